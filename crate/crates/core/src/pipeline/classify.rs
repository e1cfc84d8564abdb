//! Grid quality groups.
//!
//! 1. too little variability: at most 10 snow weeks or at most 10 bare weeks
//!    over the whole record;
//! 2. the chain fit is not trustworthy (see [`fit_concerns`]);
//! 3. the record itself is suspect: listed for exclusion, or, when automatic
//!    exclusion is on, flagged by the review heuristics;
//! 4. analyzed.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::estimation::{fit_concerns, FitConcern, FitResult};
use crate::series::BinarySeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Group {
    Invariant = 1,
    Unfitted = 2,
    Untrusted = 3,
    Analyzed = 4,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::Invariant, Group::Unfitted, Group::Untrusted, Group::Analyzed];

    pub fn number(self) -> u8 {
        self as u8
    }
}

impl From<Group> for u8 {
    fn from(g: Group) -> u8 {
        g.number()
    }
}

impl TryFrom<u8> for Group {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        Group::ALL
            .into_iter()
            .find(|g| g.number() == v)
            .ok_or_else(|| format!("no group {v}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupReason {
    FewSnowWeeks,
    FewBareWeeks,
    ExclusionList,
    RegimeShift,
    SummerOnlySnow,
    NoConvergence,
    SingularInformation,
    ExtremeLevel,
    FewTransitions,
    Analyzable,
}

impl GroupReason {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupReason::FewSnowWeeks => "few-snow-weeks",
            GroupReason::FewBareWeeks => "few-bare-weeks",
            GroupReason::ExclusionList => "exclusion-list",
            GroupReason::RegimeShift => "regime-shift",
            GroupReason::SummerOnlySnow => "summer-only-snow",
            GroupReason::NoConvergence => "no-convergence",
            GroupReason::SingularInformation => "singular-information",
            GroupReason::ExtremeLevel => "extreme-level",
            GroupReason::FewTransitions => "few-transitions",
            GroupReason::Analyzable => "analyzable",
        }
    }
}

impl From<FitConcern> for GroupReason {
    fn from(c: FitConcern) -> Self {
        match c {
            FitConcern::NoConvergence => GroupReason::NoConvergence,
            FitConcern::SingularInformation => GroupReason::SingularInformation,
            FitConcern::ExtremeLevel => GroupReason::ExtremeLevel,
            FitConcern::FewTransitions => GroupReason::FewTransitions,
        }
    }
}

/// Record-level warnings raised for manual review.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReviewFlag {
    RegimeShift,
    SummerOnlySnow,
}

impl ReviewFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            ReviewFlag::RegimeShift => "regime-shift",
            ReviewFlag::SummerOnlySnow => "summer-only-snow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLabel {
    pub group: Group,
    pub reason: GroupReason,
    pub flags: Vec<ReviewFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyOptions {
    /// Records with at most this many snow (or bare) weeks are group 1.
    pub min_weeks: usize,
    /// Winter years starting in August of this calendar year or later count
    /// as "after" for the regime-shift ratio.
    pub regime_split_year: i32,
    pub regime_ratio_low: f64,
    pub regime_ratio_high: f64,
    /// Centered weeks that should not hold snow when the summer weeks do.
    pub winter_weeks: (usize, usize),
    pub summer_weeks: (usize, usize),
    /// Send heuristic hits to group 3 instead of only flagging them.
    pub auto_exclude: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            min_weeks: 10,
            regime_split_year: 1999,
            regime_ratio_low: 0.25,
            regime_ratio_high: 4.0,
            winter_weeks: (14, 31),
            summer_weeks: (49, 52),
            auto_exclude: false,
        }
    }
}

/// Group 1 screening, decided before any fit.
pub fn screen(series: &BinarySeries, options: &ClassifyOptions) -> Option<GroupLabel> {
    let reason = if series.snow_weeks() <= options.min_weeks {
        GroupReason::FewSnowWeeks
    } else if series.bare_weeks() <= options.min_weeks {
        GroupReason::FewBareWeeks
    } else {
        return None;
    };
    Some(GroupLabel {
        group: Group::Invariant,
        reason,
        flags: Vec::new(),
    })
}

/// Ratio of mean annual snow weeks before the split year to after it.
pub fn regime_ratio(series: &BinarySeries, split_year: i32) -> Option<f64> {
    let first_year = series.origin()?.first_year?;
    let (mut before, mut after) = (Vec::new(), Vec::new());
    for y in 1..=series.num_years() {
        let snow = series.year(y).iter().filter(|&&v| v == 1).count() as f64;
        if first_year + (y as i32 - 1) < split_year {
            before.push(snow);
        } else {
            after.push(snow);
        }
    }
    if before.is_empty() || after.is_empty() {
        return None;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (b, a) = (mean(&before), mean(&after));
    match (b > 0.0, a > 0.0) {
        (false, false) => None,
        (true, false) => Some(f64::INFINITY),
        _ => Some(b / a),
    }
}

/// Years with snow in the summer weeks and none in the core winter weeks.
pub fn summer_only_years(series: &BinarySeries, options: &ClassifyOptions) -> Vec<usize> {
    let period = series.period();
    let has_snow = |year: &[u8], (lo, hi): (usize, usize)| {
        (lo..=hi.min(period)).any(|w| year[w - 1] == 1)
    };
    (1..=series.num_years())
        .filter(|&y| {
            let year = series.year(y);
            has_snow(year, options.summer_weeks) && !has_snow(year, options.winter_weeks)
        })
        .collect()
}

pub fn review_flags(series: &BinarySeries, options: &ClassifyOptions) -> Vec<ReviewFlag> {
    let mut flags = Vec::new();
    if let Some(r) = regime_ratio(series, options.regime_split_year) {
        if r < options.regime_ratio_low || r > options.regime_ratio_high {
            flags.push(ReviewFlag::RegimeShift);
        }
    }
    if !summer_only_years(series, options).is_empty() {
        flags.push(ReviewFlag::SummerOnlySnow);
    }
    flags
}

/// Assigns exactly one group. `fit` is consulted only for records that pass
/// the group 1 and group 3 checks; `None` skips the group 2 check.
pub fn classify_group(
    series: &BinarySeries,
    fit: Option<Result<&FitResult, &Error>>,
    excluded: bool,
    options: &ClassifyOptions,
) -> GroupLabel {
    if let Some(label) = screen(series, options) {
        return label;
    }
    let flags = review_flags(series, options);
    let untrusted = if excluded {
        Some(GroupReason::ExclusionList)
    } else if options.auto_exclude {
        flags.first().map(|f| match f {
            ReviewFlag::RegimeShift => GroupReason::RegimeShift,
            ReviewFlag::SummerOnlySnow => GroupReason::SummerOnlySnow,
        })
    } else {
        None
    };
    if let Some(reason) = untrusted {
        return GroupLabel {
            group: Group::Untrusted,
            reason,
            flags,
        };
    }
    if let Some(outcome) = fit {
        if let Some(&concern) = fit_concerns(series, outcome).first() {
            return GroupLabel {
                group: Group::Unfitted,
                reason: concern.into(),
                flags,
            };
        }
    }
    GroupLabel {
        group: Group::Analyzed,
        reason: GroupReason::Analyzable,
        flags,
    }
}

/// Whether classification needs a fit: groups 1 and 3 are settled without one.
pub fn needs_fit(series: &BinarySeries, excluded: bool, options: &ClassifyOptions) -> bool {
    classify_group(series, None, excluded, options).group == Group::Analyzed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{fit_mle, FitConfig};
    use crate::series::SeriesOrigin;
    use crate::simulation::simulate;
    use crate::test_support::plains;

    fn series(values: Vec<u8>, first_year: Option<i32>) -> BinarySeries {
        BinarySeries::new(values, 52).unwrap().with_origin(SeriesOrigin {
            grid_id: Some("g".into()),
            first_year,
        })
    }

    /// `snow` weeks of snow starting at centered week 10, every year.
    fn seasonal(years: usize, snow: impl Fn(usize) -> usize) -> Vec<u8> {
        (0..years)
            .flat_map(|y| {
                let n = snow(y);
                (1..=52).map(move |w| (w >= 10 && w < 10 + n) as u8)
            })
            .collect()
    }

    #[test]
    fn invariant_records() {
        let opts = ClassifyOptions::default();
        let all_bare = series(vec![0; 52 * 5], None);
        assert_eq!(classify_group(&all_bare, None, false, &opts).reason, GroupReason::FewSnowWeeks);
        let mut nine = vec![0u8; 52 * 5];
        for v in nine.iter_mut().skip(20).step_by(20).take(9) {
            *v = 1;
        }
        let nine = series(nine, None);
        assert_eq!(nine.snow_weeks(), 9);
        assert_eq!(classify_group(&nine, None, true, &opts).group, Group::Invariant);
        let mut ten_bare = vec![1u8; 52 * 5];
        ten_bare[..10].fill(0);
        let label = classify_group(&series(ten_bare, None), None, false, &opts);
        assert_eq!((label.group, label.reason), (Group::Invariant, GroupReason::FewBareWeeks));
        let mut eleven = vec![0u8; 52 * 5];
        eleven[30..41].fill(1);
        assert_eq!(classify_group(&series(eleven, None), None, false, &opts).group, Group::Analyzed);
    }

    #[test]
    fn regime_shift_is_flagged() {
        // 30 snow weeks a year until 1998, 5 afterwards: ratio 6.
        let values = seasonal(40, |y| if 1970 + y < 1998 { 30 } else { 5 });
        let s = series(values, Some(1970));
        let ratio = regime_ratio(&s, 1998).unwrap();
        assert!((ratio - 6.0).abs() < 1e-12);
        let opts = ClassifyOptions::default();
        let label = classify_group(&s, None, false, &opts);
        assert_eq!(label.group, Group::Analyzed);
        assert_eq!(label.flags, vec![ReviewFlag::RegimeShift]);
        let auto = ClassifyOptions {
            auto_exclude: true,
            ..opts
        };
        let label = classify_group(&s, None, false, &auto);
        assert_eq!((label.group, label.reason), (Group::Untrusted, GroupReason::RegimeShift));

        let low = series(seasonal(40, |y| if 1970 + y < 1998 { 3 } else { 20 }), Some(1970));
        assert!(regime_ratio(&low, 1998).unwrap() < 0.25);
        let steady = series(seasonal(40, |_| 20), Some(1970));
        assert!(review_flags(&steady, &ClassifyOptions::default()).is_empty());
        assert_eq!(regime_ratio(&steady, 1950), None);
        assert_eq!(regime_ratio(&series(seasonal(3, |_| 20), None), 1998), None);
    }

    #[test]
    fn summer_snow_is_flagged() {
        let mut values = seasonal(6, |_| 20);
        // Year 3: snow only in late July.
        let y3 = &mut values[104..156];
        y3.fill(0);
        y3[49] = 1;
        let s = series(values, None);
        let opts = ClassifyOptions::default();
        assert_eq!(summer_only_years(&s, &opts), vec![3]);
        assert_eq!(review_flags(&s, &opts), vec![ReviewFlag::SummerOnlySnow]);
    }

    #[test]
    fn exclusion_list_wins_over_fit() {
        let s = simulate(&plains(), 30, 52, 1).unwrap();
        let fit = fit_mle(&s, &FitConfig::default()).unwrap();
        let opts = ClassifyOptions::default();
        let label = classify_group(&s, Some(Ok(&fit)), true, &opts);
        assert_eq!((label.group, label.reason), (Group::Untrusted, GroupReason::ExclusionList));
        assert!(!needs_fit(&s, true, &opts));
        assert!(needs_fit(&s, false, &opts));
    }

    #[test]
    fn fit_problems_give_group_two() {
        let s = simulate(&plains(), 30, 52, 1).unwrap();
        let opts = ClassifyOptions::default();
        let err = Error::NonConvergence {
            restarts: 8,
            best_gradient_norm: 1.0,
        };
        let label = classify_group(&s, Some(Err(&err)), false, &opts);
        assert_eq!((label.group, label.reason), (Group::Unfitted, GroupReason::NoConvergence));
        let fit = fit_mle(&s, &FitConfig::default()).unwrap();
        assert_eq!(classify_group(&s, Some(Ok(&fit)), false, &opts).group, Group::Analyzed);
        let mut extreme = fit.clone();
        extreme.theta_hat.a0s = -80.0;
        let label = classify_group(&s, Some(Ok(&extreme)), false, &opts);
        assert_eq!(label.reason, GroupReason::ExtremeLevel);
    }

    #[test]
    fn group_numbers_round_trip() {
        for g in Group::ALL {
            assert_eq!(Group::try_from(g.number()).unwrap(), g);
        }
        assert!(Group::try_from(5).is_err());
        assert_eq!(serde_json::to_string(&Group::Untrusted).unwrap(), "3");
    }
}
