use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use tailmean::cml::{br_mean_from, cml_solve, MeanEstimate};
use tailmean::empirical::read_values;
use tailmean::ksel::{default_k_range, reiss_thomas, DEFAULT_THETA};
use tailmean::mc::{self, Experiment, ExperimentConfig, KPolicy};
use tailmean::{
    confidence_interval, hill, normality_battery, peng_mean, weissman_quantile, CmlEstimate, Error,
    Family, HeavyTailModel, SortedSample,
};

#[derive(Parser)]
#[command(name = "tailmean", version, about = "Mean estimation for heavy-tailed data with tail index in (1, 2)")]
struct Cli {
    /// Run simulation replications on a single thread.
    #[arg(long, global = true)]
    no_parallel: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hill, CML, Peng and bias-reduced estimates from a value column.
    Estimate(EstimateArgs),
    /// Bias-reduced mean with its asymptotic confidence interval.
    Ci {
        #[command(flatten)]
        est: EstimateArgs,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Reiss–Thomas choice of k with the objective path.
    SelectK {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = DEFAULT_THETA)]
        theta: f64,
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Weissman and bias-reduced quantiles at tail probability `s`.
    Quantile {
        #[command(flatten)]
        est: EstimateArgs,
        #[arg(long)]
        s: f64,
    },
    /// Normality battery (CvM, KS, SW, Pearson) on a value column.
    Gof {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Seeded Monte Carlo experiments.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct InputArgs {
    /// CSV file with one value per line (optional `value` header); stdin if omitted.
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Sample fraction; chosen by Reiss–Thomas when omitted.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(value_enum)]
    table: Table,
    #[arg(long, value_enum, default_value_t = Dist::Frechet)]
    dist: Dist,
    #[arg(long)]
    alpha: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
    /// Fixed sample fraction instead of Reiss–Thomas.
    #[arg(long, conflicts_with = "theoretical_k")]
    k: Option<usize>,
    /// Use the theoretically optimal k from the model's second-order constants.
    #[arg(long)]
    theoretical_k: bool,
    /// Include per-replication records in JSON output.
    #[arg(long)]
    full: bool,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    /// Bias and RMSE of both estimators.
    Table1,
    /// Confidence-interval length and coverage.
    Table2,
    /// Normality battery p-values.
    Gof,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Frechet,
    Pareto,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Data { .. } | Error::Size { .. } => 2,
            ref e if e.is_numerical() => 3,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            let mut stdout = io::stdout().lock();
            match stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Estimate(args) => estimate(&args, None),
        Command::Ci { est, level } => {
            if !(level > 0.0 && level < 1.0) {
                return Err(usage(format!("--level {level} must lie in (0, 1)")));
            }
            estimate(&est, Some(level))
        }
        Command::SelectK { input, theta, k_min, k_max } => select_k(&input, theta, k_min, k_max),
        Command::Quantile { est, s } => quantile(&est, s),
        Command::Gof { input } => gof(&input),
        Command::Simulate(args) => simulate(args, !cli.no_parallel),
    }
}

fn open_input(input: &InputArgs) -> Result<Box<dyn BufRead>, Failure> {
    match &input.input {
        Some(p) => File::open(p)
            .map(|f| Box::new(BufReader::new(f)) as Box<dyn BufRead>)
            .map_err(|e| Failure { code: 2, message: format!("cannot read {}: {e}", p.display()) }),
        None => Ok(Box::new(BufReader::new(io::stdin()))),
    }
}

fn load_sample(input: &InputArgs) -> Result<SortedSample, Failure> {
    Ok(SortedSample::from_csv(open_input(input)?)?)
}

fn choose_k(sample: &SortedSample, args: &EstimateArgs) -> Result<(usize, &'static str), Failure> {
    match args.k {
        Some(k) if k == 0 || k >= sample.n() => {
            Err(usage(format!("--k {k} must lie in [1, {}) for n = {}", sample.n(), sample.n())))
        }
        Some(k) => Ok((k, "fixed")),
        None => {
            if sample.n() < 3 {
                return Err(Failure { code: 2, message: "at least 3 observations are needed to choose k".into() });
            }
            let (lo, hi) = default_k_range(sample.n());
            Ok((reiss_thomas(sample, args.theta, lo, hi)?.k_star, "reiss_thomas"))
        }
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

/// Aligns comma-separated lines into space-padded columns.
fn align(csv: &str) -> String {
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let width: Vec<usize> =
        (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().enumerate().map(|(c, s)| format!("{s:>w$}", w = width[c])).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

fn to_json(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("values serialize") + "\n"
}

fn err_string(e: &Error) -> Value {
    Value::String(e.to_string())
}

fn estimate(args: &EstimateArgs, level: Option<f64>) -> Result<String, Failure> {
    let sample = load_sample(&args.input)?;
    let (k, k_source) = choose_k(&sample, args)?;
    let hill_alpha = hill(&sample, k)?;
    let peng = peng_mean(&sample, k);
    let cml = cml_solve(&sample, k);
    let br = cml.as_ref().map_err(Clone::clone).and_then(|c| br_mean_from(&sample, c));
    let ci = level.map(|lv| br.as_ref().map_err(Clone::clone).and_then(|b| confidence_interval(b, k, sample.n(), lv)));

    // With no usable mean estimate at all, report the most specific failure.
    let required_failed = match level {
        Some(_) => ci.as_ref().and_then(|c| c.as_ref().err()).cloned(),
        None => match (&peng, &br) {
            (Err(e), Err(_)) => Some(e.clone()),
            _ => None,
        },
    };
    if let Some(e) = required_failed {
        let hint = match (&peng, level) {
            (Ok(p), None) => format!(" (Peng mean {})", fmt(p.mean_hat)),
            _ => String::new(),
        };
        return Err(Failure::from(e).with_suffix(&format!(" [Hill alpha {} at k = {k}]{hint}", fmt(hill_alpha))));
    }

    let out = match args.input.format {
        Format::Json => {
            let mut v = json!({
                "n": sample.n(),
                "k": k,
                "k_source": k_source,
                "hill_alpha": hill_alpha,
                "peng": match &peng { Ok(p) => json!(p), Err(e) => json!({"error": err_string(e)}) },
                "cml": match &cml { Ok(c) => json!(c), Err(e) => json!({"error": err_string(e)}) },
                "br": match &br { Ok(b) => json!(b), Err(e) => json!({"error": err_string(e)}) },
            });
            if let Some(Ok(ci)) = &ci {
                v["ci"] = json!(ci);
            }
            to_json(&v)
        }
        Format::Csv => {
            let mut header = "n,k,k_source,hill_alpha,alpha_hat,beta_hat,c_hat,d_hat,peng_mean,br_mean,converged,degenerate_root".to_string();
            let c = cml.as_ref().ok();
            let mut row = format!(
                "{},{k},{k_source},{hill_alpha},{},{},{},{},{},{},{},{}",
                sample.n(),
                csv_opt(c.map(|c| c.alpha_hat)),
                csv_opt(c.map(|c| c.beta_hat)),
                csv_opt(c.map(|c| c.c_hat)),
                csv_opt(c.map(|c| c.d_hat)),
                csv_opt(peng.as_ref().ok().map(|p| p.mean_hat)),
                csv_opt(br.as_ref().ok().map(|b| b.mean_hat)),
                c.is_some(),
                c.is_some_and(|c| c.degenerate),
            );
            if let Some(Ok(ci)) = &ci {
                header.push_str(",level,lower,upper");
                let _ = write!(row, ",{},{},{}", ci.level, ci.lower, ci.upper);
            }
            format!("{header}\n{row}\n")
        }
        Format::Table => {
            let mut s = String::new();
            let _ = writeln!(s, "n                 {}", sample.n());
            let _ = writeln!(s, "k                 {k} ({k_source})");
            let _ = writeln!(s, "Hill alpha        {}", fmt(hill_alpha));
            match &cml {
                Ok(c) => table_cml(&mut s, c),
                Err(e) => {
                    let _ = writeln!(s, "CML               unavailable: {e}");
                }
            }
            let _ = writeln!(s, "Peng mean         {}", result_cell(peng.as_ref().map(|p| p.mean_hat)));
            let _ = writeln!(s, "bias-reduced mean {}", result_cell(br.as_ref().map(|b| b.mean_hat)));
            if let Ok(MeanEstimate { sigma: Some(sig), .. }) = &br {
                let _ = writeln!(s, "sigma             {}", fmt(*sig));
            }
            if let Some(Ok(ci)) = &ci {
                let _ = writeln!(s, "CI ({:.0}%)          [{}, {}]", 100.0 * ci.level, fmt(ci.lower), fmt(ci.upper));
            }
            s
        }
    };
    Ok(out)
}

impl Failure {
    fn with_suffix(mut self, suffix: &str) -> Self {
        self.message.push_str(suffix);
        self
    }
}

fn csv_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn result_cell(r: Result<f64, &Error>) -> String {
    match r {
        Ok(v) => fmt(v),
        Err(e) => format!("unavailable: {e}"),
    }
}

fn table_cml(s: &mut String, c: &CmlEstimate) {
    let _ = writeln!(s, "CML alpha         {}", fmt(c.alpha_hat));
    let _ = writeln!(s, "CML beta          {}", fmt(c.beta_hat));
    let _ = writeln!(s, "c_hat             {}", fmt(c.c_hat));
    let _ = writeln!(s, "d_hat             {}", fmt(c.d_hat));
    let _ = writeln!(
        s,
        "diagnostics       residual {:.3e}, {} iterations{}",
        c.residual_norm,
        c.iterations,
        if c.degenerate { ", beta next to alpha (c, d not identified)" } else { "" }
    );
}

fn select_k(input: &InputArgs, theta: f64, k_min: Option<usize>, k_max: Option<usize>) -> Result<String, Failure> {
    let sample = load_sample(input)?;
    if sample.n() < 3 {
        return Err(Failure { code: 2, message: "at least 3 observations are needed to choose k".into() });
    }
    let (lo, hi) = default_k_range(sample.n());
    let sel = reiss_thomas(&sample, theta, k_min.unwrap_or(lo), k_max.unwrap_or(hi))?;
    Ok(match input.format {
        Format::Json => to_json(&json!(sel)),
        Format::Csv | Format::Table => {
            let mut s = String::new();
            if input.format == Format::Table {
                let _ = writeln!(
                    s,
                    "k* = {} (objective {}, theta {}, {} Hill fallbacks)\n",
                    sel.k_star,
                    fmt(sel.objective_at_star()),
                    sel.theta,
                    sel.fallback_count()
                );
            }
            let mut csv = String::from("k,objective,alpha\n");
            for (k, v) in &sel.objective_values {
                let a = sel.alpha_path[k - 1].alpha;
                let _ = writeln!(csv, "{k},{},{}", csv_opt(*v), csv_opt(a));
            }
            if input.format == Format::Table {
                s.push_str(&align(&csv));
            } else {
                s.push_str(&csv);
            }
            s
        }
    })
}

fn quantile(args: &EstimateArgs, s: f64) -> Result<String, Failure> {
    let sample = load_sample(&args.input)?;
    let (k, k_source) = choose_k(&sample, args)?;
    let weissman = weissman_quantile(&sample, k, s)?;
    let lpy = cml_solve(&sample, k).and_then(|c| c.quantile(s));
    Ok(match args.input.format {
        Format::Json => to_json(&json!({
            "k": k,
            "k_source": k_source,
            "s": s,
            "weissman": weissman,
            "lpy": match &lpy { Ok(q) => json!(q), Err(e) => json!({"error": err_string(e)}) },
        })),
        Format::Csv => format!(
            "k,k_source,s,weissman,lpy\n{k},{k_source},{s},{weissman},{}\n",
            csv_opt(lpy.as_ref().ok().copied())
        ),
        Format::Table => format!(
            "k          {k} ({k_source})\ns          {s}\nWeissman   {}\nLPY        {}\n",
            fmt(weissman),
            result_cell(lpy.as_ref().copied())
        ),
    })
}

fn gof(input: &InputArgs) -> Result<String, Failure> {
    let values: Vec<f64> = read_values(open_input(input)?)?.into_iter().map(|(_, v)| v).collect();
    let results = normality_battery(&values)?;
    Ok(match input.format {
        Format::Json => to_json(&json!(results)),
        Format::Csv | Format::Table => {
            let mut csv = String::from("test,statistic,p_value,n\n");
            for (k, r) in &results {
                let _ = writeln!(csv, "{k},{},{},{}", r.statistic, r.p_value, r.n);
            }
            if input.format == Format::Table {
                align(&csv)
            } else {
                csv
            }
        }
    })
}

fn simulate(args: SimulateArgs, parallel: bool) -> Result<String, Failure> {
    let family = match args.dist {
        Dist::Frechet => Family::Frechet,
        Dist::Pareto => Family::Pareto,
    };
    let model = HeavyTailModel::new(family, args.alpha).map_err(|e| usage(e.to_string()))?;
    let mut config = ExperimentConfig::new(model, args.sizes, args.seed);
    config.replications = args.reps;
    config.level = args.level;
    config.theta = args.theta;
    config.parallel = parallel;
    config.k_policy = match (args.k, args.theoretical_k) {
        (Some(k), _) => KPolicy::Fixed(k),
        (None, true) => KPolicy::TheoreticalOpt,
        (None, false) => KPolicy::ReissThomas,
    };
    let experiment = match args.table {
        Table::Table1 => Experiment::BiasRmse,
        Table::Table2 => Experiment::Coverage,
        Table::Gof => Experiment::Normality,
    };
    let report = mc::run(&config, experiment, args.full)?;
    Ok(match args.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("reports serialize") + "\n",
        Format::Csv => report.to_csv(),
        Format::Table => {
            let mut s = format!(
                "{} alpha = {}, true mean {}, {} replications, seed {}\n",
                family,
                args.alpha,
                fmt(report.true_mean),
                config.replications,
                config.seed
            );
            if let Some(note) = &report.note {
                let _ = writeln!(s, "note: {note}");
            }
            s.push('\n');
            s.push_str(&align(&report.to_csv()));
            s
        }
    })
}
