use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use snowtrend_core::pipeline::export::{
    self, GRID_TRENDS_FILE, GROUPS_FILE, REGRESSION_SUMMARY_FILE, REGRESSION_WEEKS_FILE,
    SUMMARY_FILE, TOTAL_AREA_FILE,
};
use snowtrend_core::pipeline::{
    classify_dataset, dataset_total_area, ingest_dir, read_exclusions, read_series, run_hemisphere,
    with_pool,
    ChangepointSpec, Group, PipelineConfig, WinterCalendar,
};
use snowtrend_core::simulation::{run_recovery_study, simulate};
use snowtrend_core::trend::{annual_counts, trend_report};
use snowtrend_core::{
    fit_mle, fit_periodic, fit_periodic_with_changepoint, ErrorKind, FitMethod, FitResult,
    ModelPreset, PeriodicFit, ThetaParams, DEFAULT_PERIOD,
};

#[derive(Parser, Debug)]
#[command(name = "snowtrend", version, about = "Markov chain trend analysis of weekly snow presence series")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Pipeline configuration (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for simulation and for the optimizer's random restarts.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for grid fits and simulation studies.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for all written files; created if missing.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    /// Grid ids to place in group 3, one per line.
    #[arg(long, global = true)]
    exclusions: Option<PathBuf>,
    /// Known changepoint as a global week index or a YYYY-MM-DD date.
    #[arg(long, global = true, value_parser = parse_changepoint)]
    changepoint_week: Option<ChangepointSpec>,
}

fn parse_changepoint(s: &str) -> Result<ChangepointSpec, String> {
    s.parse().map_err(|e: snowtrend_core::Error| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a series, or run a parameter-recovery study with --reps > 1.
    Simulate(SimulateArgs),
    /// Fit the chain to one series.
    Fit(FitArgs),
    /// Snow-week trend of one series with its chain-based standard error.
    Trend(TrendArgs),
    /// Periodic regression of a total-area series.
    Regress(RegressArgs),
    /// Assign quality groups that need no model fit.
    Classify(DataArgs),
    /// Classify, fit and compute trends for every grid, then regress total area.
    RunAll(DataArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Reference parameter set (I to V).
    #[arg(long, default_value = "I")]
    model: ModelPreset,
    /// All eight parameters, overriding --model: a0,a1,kappa,alpha,a0s,a1s,kappas,alphas.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    /// Onset drift, replacing the preset's value.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Melt drift, replacing the preset's value.
    #[arg(long, allow_negative_numbers = true)]
    alpha_star: Option<f64>,
    #[arg(long, default_value_t = 50)]
    years: usize,
    /// Weeks per year.
    #[arg(long, default_value_t = DEFAULT_PERIOD)]
    period: usize,
    /// Number of simulate-and-fit replications.
    #[arg(long, default_value_t = 1)]
    reps: usize,
}

#[derive(Args, Debug)]
struct SeriesInput {
    /// CSV with a `value` column and either `date` or `t`.
    series: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PERIOD)]
    period: usize,
    #[arg(long, value_parser = parse_method)]
    method: Option<FitMethod>,
}

fn parse_method(s: &str) -> Result<FitMethod, String> {
    match s {
        "newton" => Ok(FitMethod::Newton),
        "quasi-newton" | "bfgs" => Ok(FitMethod::QuasiNewton),
        _ => Err(format!("unknown method `{s}` (newton, quasi-newton)")),
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    input: SeriesInput,
}

#[derive(Args, Debug)]
struct TrendArgs {
    #[command(flatten)]
    input: SeriesInput,
    /// Evaluate the variance at these parameters instead of the fitted ones.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct RegressArgs {
    /// CSV with columns `t` and `G` (and optionally `date`).
    area: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PERIOD)]
    period: usize,
    /// Print slopes per century instead of per week index.
    #[arg(long)]
    per_century: bool,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Directory holding observations.csv and grids.csv.
    data_dir: PathBuf,
    /// Send heuristic group-3 hits to group 3 instead of only flagging them.
    #[arg(long)]
    auto_exclude: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<snowtrend_core::Error> for Failure {
    fn from(e: snowtrend_core::Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numerical => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn data(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn load_config(global: &Global) -> CliResult<PipelineConfig> {
    let mut config = match &global.config {
        None => PipelineConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
            let parsed = if path.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text).map_err(|e| e.to_string())
            } else {
                toml::from_str(&text).map_err(|e| e.to_string())
            };
            parsed.map_err(|e| data(format!("{}: {e}", path.display())))?
        }
    };
    if let Some(seed) = global.seed {
        config.fit.restart_seed = seed;
    }
    if global.threads.is_some() {
        config.threads = global.threads;
    }
    if let Some(path) = &global.exclusions {
        config.exclusions.extend(read_exclusions(path)?);
    }
    if global.changepoint_week.is_some() {
        config.changepoint = global.changepoint_week;
    }
    config.validate()?;
    Ok(config)
}

fn theta_from(values: &[f64]) -> CliResult<ThetaParams> {
    let arr: [f64; 8] = values
        .try_into()
        .map_err(|_| usage(format!("--theta needs 8 values, got {}", values.len())))?;
    let theta = ThetaParams::from_array(arr);
    theta.validate()?;
    Ok(theta)
}

fn out_path(global: &Global, name: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(&global.output_dir)
        .map_err(|e| data(format!("{}: {e}", global.output_dir.display())))?;
    Ok(global.output_dir.join(name))
}

fn write_json<T: Serialize>(global: &Global, name: &str, value: &T) -> CliResult<PathBuf> {
    let path = out_path(global, name)?;
    export::write_json(value, &path)?;
    Ok(path)
}

fn named(values: [f64; 8]) -> serde_json::Map<String, serde_json::Value> {
    ThetaParams::NAMES
        .iter()
        .zip(values)
        .map(|(n, v)| (n.to_string(), json!(v)))
        .collect()
}

fn fit_json(fit: &FitResult) -> serde_json::Value {
    let wald: serde_json::Map<String, serde_json::Value> = ThetaParams::NAMES
        .iter()
        .enumerate()
        .map(|(k, n)| (n.to_string(), json!(fit.wald(k))))
        .collect();
    json!({
        "theta_hat": named(fit.theta_hat.to_array()),
        "std_errors": named(fit.std_errors),
        "wald": wald,
        "loglik": fit.loglik,
        "converged": fit.converged,
        "hessian_ok": fit.hessian_ok,
        "n_restarts_used": fit.n_restarts_used,
        "gradient_norm": fit.gradient_norm,
        "iterations": fit.iterations,
    })
}

fn print_fit(fit: &FitResult) {
    println!("{:<8} {:>14} {:>12} {:>9} {:>10}", "param", "estimate", "std.err", "z", "p");
    for (k, name) in ThetaParams::NAMES.iter().enumerate() {
        let est = fit.theta_hat.to_array()[k];
        match fit.wald(k) {
            Some(w) => println!(
                "{name:<8} {est:>14.6e} {:>12.4e} {:>9.3} {:>10.4e}",
                fit.std_errors[k], w.z, w.p_two_sided
            ),
            None => println!("{name:<8} {est:>14.6e} {:>12} {:>9} {:>10}", "-", "-", "-"),
        }
    }
    println!("log-likelihood {:.6}", fit.loglik);
}

fn cmd_simulate(global: &Global, args: &SimulateArgs, config: &PipelineConfig) -> CliResult {
    let mut theta = match &args.theta {
        Some(v) => theta_from(v)?,
        None => args.model.theta(),
    };
    if let Some(a) = args.alpha {
        theta.alpha = a;
    }
    if let Some(a) = args.alpha_star {
        theta.alphas = a;
    }
    theta.validate()?;
    let seed = global.seed.unwrap_or(0);
    if args.reps <= 1 {
        let series = simulate(&theta, args.years, args.period, seed)?;
        let path = out_path(global, "series.csv")?;
        export::write_series(&series, &path)?;
        println!(
            "simulated {} weeks ({} snow) -> {}",
            series.len(),
            series.snow_weeks(),
            path.display()
        );
        return Ok(());
    }
    let study = with_pool(config.threads, || {
        run_recovery_study(&theta, args.years, args.period, args.reps, seed, &config.fit)
    })??;
    let est_path = out_path(global, "recovery_estimates.csv")?;
    export::write_recovery_estimates(&study, &est_path)?;
    let summary = study.summary().map(|s| {
        ThetaParams::NAMES
            .iter()
            .zip(s)
            .map(|(n, p)| (n.to_string(), json!(p)))
            .collect::<serde_json::Map<_, _>>()
    });
    let path = write_json(
        global,
        "recovery_summary.json",
        &json!({
            "truth": named(theta.to_array()),
            "num_years": args.years,
            "period": args.period,
            "n_reps": study.n_reps,
            "n_succeeded": study.n_succeeded(),
            "failures": study.failures,
            "parameters": summary,
        }),
    )?;
    println!("{} of {} fits succeeded", study.n_succeeded(), study.n_reps);
    if let Some(s) = study.summary() {
        println!("{:<8} {:>12} {:>12} {:>12}", "param", "truth", "median", "IQR");
        for (n, p) in ThetaParams::NAMES.iter().zip(s) {
            println!("{n:<8} {:>12.5} {:>12.5} {:>12.5}", p.truth, p.median, p.q3 - p.q1);
        }
    }
    println!("-> {}, {}", est_path.display(), path.display());
    Ok(())
}

fn fit_series(input: &SeriesInput, config: &PipelineConfig) -> CliResult<(snowtrend_core::BinarySeries, FitResult)> {
    let series = read_series(&input.series, input.period)?;
    let mut fit_config = config.fit.clone();
    if let Some(m) = input.method {
        fit_config.method = m;
    }
    let fit = fit_mle(&series, &fit_config)?;
    Ok((series, fit))
}

fn cmd_fit(global: &Global, args: &FitArgs, config: &PipelineConfig) -> CliResult {
    let (_, fit) = fit_series(&args.input, config)?;
    print_fit(&fit);
    let path = write_json(global, "fit.json", &fit_json(&fit))?;
    println!("-> {}", path.display());
    Ok(())
}

fn cmd_trend(global: &Global, args: &TrendArgs, config: &PipelineConfig) -> CliResult {
    let (series, theta, fit) = match &args.theta {
        Some(v) => (read_series(&args.input.series, args.input.period)?, theta_from(v)?, None),
        None => {
            let (s, f) = fit_series(&args.input, config)?;
            (s, f.theta_hat, Some(f))
        }
    };
    let report = trend_report(&series, &theta)?;
    println!(
        "beta = {:.6} weeks/year ({:.4} per century), se = {:.6}, z = {:.4}, p = {:.4e}",
        report.beta_hat, report.beta_per_century, report.std_error, report.z, report.p_two_sided
    );
    let path = write_json(
        global,
        "trend.json",
        &json!({
            "report": report,
            "theta": named(theta.to_array()),
            "fit": fit.as_ref().map(fit_json),
            "annual_counts": annual_counts(&series).counts,
            "first_year": series.origin().and_then(|o| o.first_year),
        }),
    )?;
    println!("-> {}", path.display());
    Ok(())
}

fn regression_json(fit: &PeriodicFit, num_years: usize, changepoint_date: Option<String>) -> serde_json::Value {
    json!({
        "period": fit.period,
        "num_years": num_years,
        "changepoint_index": fit.changepoint_index,
        "changepoint_date": changepoint_date,
        "delta": fit.delta,
        "rss": fit.rss,
        "sigma2": fit.sigma2,
        "slope_units": "million km2 per week index; beta_per_century = beta * period * 100",
        "error_assumption": "homoscedastic and uncorrelated errors; standard errors are approximate",
    })
}

fn regress(
    global: &Global,
    area: &snowtrend_core::WeeklyAreaSeries,
    calendar: Option<&WinterCalendar>,
    changepoint: Option<ChangepointSpec>,
) -> CliResult<PeriodicFit> {
    let fit = match changepoint {
        Some(spec) => fit_periodic_with_changepoint(area, spec.resolve(calendar)?)?,
        None => fit_periodic(area)?,
    };
    export::write_regression_weeks(&fit, &out_path(global, REGRESSION_WEEKS_FILE)?)?;
    let date = fit
        .changepoint_index
        .and_then(|t| calendar.and_then(|c| c.date_of_week(t)))
        .map(|d| d.to_string());
    write_json(global, REGRESSION_SUMMARY_FILE, &regression_json(&fit, area.shape().num_years(), date))?;
    Ok(fit)
}

fn print_shift(fit: &PeriodicFit) {
    if let (Some(d), Some(c)) = (fit.delta, fit.changepoint_index) {
        println!(
            "shift at week {c}: delta = {:.6}, se = {:.6}, z = {:.4}, p = {:.4e}",
            d.estimate, d.std_error, d.z, d.p_two_sided
        );
    }
}

fn cmd_regress(global: &Global, args: &RegressArgs, config: &PipelineConfig) -> CliResult {
    let (area, dates) = export::read_total_area(&args.area, args.period)?;
    let calendar = match &dates {
        Some(d) if args.period == DEFAULT_PERIOD => Some(WinterCalendar::from_dates(d, "area")?),
        _ => None,
    };
    let fit = regress(global, &area, calendar.as_ref(), config.changepoint)?;
    let (unit, slopes) = if args.per_century {
        ("per century", fit.beta_per_century())
    } else {
        ("per week index", fit.beta.clone())
    };
    println!("week  mu  beta ({unit})");
    for (nu, (mu, b)) in fit.mu.iter().zip(&slopes).enumerate() {
        println!("{:>4} {mu:>12.6} {b:>14.6e}", nu + 1);
    }
    print_shift(&fit);
    println!("-> {}", global.output_dir.display());
    Ok(())
}

fn data_config(args: &DataArgs, mut config: PipelineConfig) -> PipelineConfig {
    if args.auto_exclude {
        config.classify.auto_exclude = true;
    }
    config
}

fn cmd_classify(global: &Global, args: &DataArgs, config: PipelineConfig) -> CliResult {
    let config = data_config(args, config);
    let dataset = ingest_dir(&args.data_dir)?;
    let labels = classify_dataset(&dataset, &config)?;
    let path = out_path(global, GROUPS_FILE)?;
    export::write_groups(&labels, &path)?;
    let count = |g: Group| labels.iter().filter(|(_, l)| l.group == g).count();
    let flagged = labels.iter().filter(|(_, l)| !l.flags.is_empty()).count();
    println!(
        "{} grids: group 1 {}, group 3 {}, to fit {}, flagged for review {}",
        labels.len(),
        count(Group::Invariant),
        count(Group::Untrusted),
        count(Group::Analyzed),
        flagged
    );
    println!("-> {}", path.display());
    Ok(())
}

fn cmd_run_all(global: &Global, args: &DataArgs, config: PipelineConfig) -> CliResult {
    let config = data_config(args, config);
    let dataset = ingest_dir(&args.data_dir)?;
    let summary = run_hemisphere(&dataset, &config)?;
    export::write_grid_trends(&summary.grids, &out_path(global, GRID_TRENDS_FILE)?)?;
    write_json(global, SUMMARY_FILE, &summary)?;
    let [g1, g2, g3, g4] = summary.group_counts;
    println!("{} grids: groups 1-4 = {g1}, {g2}, {g3}, {g4}", summary.n_grids);
    println!(
        "analyzed {}: {} positive, {} negative trends; mean {} weeks per century",
        summary.n_analyzed,
        summary.n_positive_trend,
        summary.n_negative_trend,
        summary
            .mean_trend_per_century
            .map_or("n/a".to_string(), |m| format!("{m:.4}"))
    );
    if !summary.failures.is_empty() {
        println!("{} grids failed; see {SUMMARY_FILE}", summary.failures.len());
    }

    let (calendar, area) = dataset_total_area(&dataset)?;
    export::write_total_area(&area, Some(calendar.dates()), &out_path(global, TOTAL_AREA_FILE)?)?;
    let fit = regress(global, &area, Some(&calendar), config.changepoint)?;
    print_shift(&fit);
    println!("-> {}", global.output_dir.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let config = load_config(&cli.global)?;
    let global = &cli.global;
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(global, a, &config),
        Command::Fit(a) => cmd_fit(global, a, &config),
        Command::Trend(a) => cmd_trend(global, a, &config),
        Command::Regress(a) => cmd_regress(global, a, &config),
        Command::Classify(a) => cmd_classify(global, a, config),
        Command::RunAll(a) => cmd_run_all(global, a, config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
