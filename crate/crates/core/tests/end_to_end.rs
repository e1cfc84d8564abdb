use snowtrend_core::pipeline::export::{read_total_area, write_total_area};
use snowtrend_core::pipeline::{dataset_total_area, run_hemisphere, with_pool, GridDataset, GridMeta, GridRecord, PipelineConfig};
use snowtrend_core::{
    fit_mle, log_likelihood, run_recovery_study, simulate, trend_report, FitConfig, FitMethod, ThetaParams,
};

fn plains() -> ThetaParams {
    ThetaParams::from_array([-3.2, 4.15, 24.35, 0.0, 1.73, 3.79, 49.84, -5e-4])
}

#[test]
fn newton_and_quasi_newton_reach_the_same_maximum() {
    for seed in 0..3 {
        let series = simulate(&plains(), 40, 52, seed).unwrap();
        let newton = fit_mle(&series, &FitConfig::default()).unwrap();
        let bfgs = fit_mle(
            &series,
            &FitConfig {
                method: FitMethod::QuasiNewton,
                ..FitConfig::default()
            },
        )
        .unwrap();
        assert!((newton.loglik - bfgs.loglik).abs() < 1e-4, "seed {seed}");
        for (a, b) in newton.theta_hat.to_array().iter().zip(bfgs.theta_hat.to_array()) {
            assert!((a - b).abs() < 1e-2 * (1.0 + a.abs()), "seed {seed}: {a} vs {b}");
        }
        assert!(newton.loglik >= log_likelihood(&plains(), &series));
    }
}

#[test]
fn fitted_trend_report_is_consistent() {
    let series = simulate(&plains(), 54, 52, 9).unwrap();
    let fit = fit_mle(&series, &FitConfig::default()).unwrap();
    let report = trend_report(&series, &fit.theta_hat).unwrap();
    assert!(report.var_beta > 0.0);
    assert!((report.std_error - report.var_beta.sqrt()).abs() < 1e-15);
    assert!((report.z - report.beta_hat / report.std_error).abs() < 1e-12);
    assert!((report.beta_per_century - report.beta_hat * 100.0).abs() < 1e-12);
    assert!((0.0..=1.0).contains(&report.p_two_sided));
}

#[test]
fn recovery_study_does_not_depend_on_thread_count() {
    let run = |threads| {
        with_pool(Some(threads), || {
            run_recovery_study(&plains(), 15, 52, 6, 77, &FitConfig::default()).unwrap()
        })
        .unwrap()
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn hemisphere_run_and_total_area_round_trip() {
    let start = chrono::NaiveDate::from_ymd_opt(2000, 8, 3).unwrap();
    let n = 12 * 52 + 5;
    let dates: Vec<_> = (0..n).map(|i| start + chrono::Duration::weeks(i as i64)).collect();
    let grids = (0..3)
        .map(|i| GridRecord {
            meta: GridMeta {
                grid_id: format!("g{i}"),
                row: Some(i),
                col: Some(0),
                lat: None,
                lon: None,
                area_mkm2: 0.5 + i as f64,
            },
            values: simulate(&plains(), 13, 52, 100 + i as u64).unwrap().values()[..n].to_vec(),
        })
        .collect();
    let dataset = GridDataset { dates, grids };

    let summary = run_hemisphere(&dataset, &PipelineConfig::default()).unwrap();
    assert_eq!(summary.n_grids, 3);
    assert_eq!(summary.group_counts.iter().sum::<usize>(), 3);
    assert_eq!(summary.n_positive_trend + summary.n_negative_trend, summary.n_analyzed);

    let (calendar, area) = dataset_total_area(&dataset).unwrap();
    assert_eq!(area.len(), 12 * 52);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("area.csv");
    write_total_area(&area, Some(calendar.dates()), &path).unwrap();
    let (back, dates) = read_total_area(&path, 52).unwrap();
    assert_eq!(back, area);
    assert_eq!(dates.as_deref(), Some(calendar.dates()));
}
