use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use drha::estimation::{fit_sizes, mom_dirichlet, SizeFamily};
use drha::mc_oracle::{mc_global, mc_global_variant, mc_table_avg, mc_threshold_dr, TableLayer, ThresholdMode};
use drha::mechanisms::{sanitize, Mechanism, PrivacyParams, SanitizedTable};
use drha::risk::{invert_epsilon, parse_grid, risk_curve, CellSizeModel, DirichletHyper, MeasureKind, RiskContext, SeriesOptions};
use drha::tabulation::{bin_numeric, cross_tabulate, load_csv, FrequencyTable, Schema};
use drha::utility::{utility_report, utility_report_for};
use drha::{Error, Result};

/// Disclosure risk of homogeneity attacks on DP-sanitized frequency tables.
#[derive(Parser, Debug)]
#[command(name = "drha", version)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cross-tabulate a CSV into a frequency table (JSON).
    Tabulate(TabulateArgs),
    /// Closed-form risk curve over an epsilon (and delta) grid.
    ///
    /// CSV columns: epsilon,delta,mechanism,measure,value,scenario1_component,scenario8_component.
    /// The delta column is empty for laplace.
    Risk(RiskArgs),
    /// Add calibrated noise to every count of a table (JSON).
    Sanitize(SanitizeArgs),
    /// TVD between original and sanitized k-way QID marginals.
    ///
    /// CSV columns: k,marginal,tvd_mean,tvd_q1,tvd_median,tvd_q3 (quartiles over replications).
    Utility(UtilityArgs),
    /// Method-of-moments Dirichlet hyperparameters and a cell-size fit (JSON).
    Estimate(EstimateArgs),
    /// Monte-Carlo estimate of a risk measure or the thresholding risk (JSON).
    Mc(McArgs),
    /// Smallest-crossing epsilon that achieves a target risk.
    Invert(InvertArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MechArg {
    Laplace,
    #[value(name = "gaussian_adp", alias = "gaussian-adp")]
    GaussianAdp,
    #[value(name = "gaussian_pdp", alias = "gaussian-pdp")]
    GaussianPdp,
}

impl From<MechArg> for Mechanism {
    fn from(m: MechArg) -> Self {
        match m {
            MechArg::Laplace => Mechanism::Laplace,
            MechArg::GaussianAdp => Mechanism::GaussianAdp,
            MechArg::GaussianPdp => Mechanism::GaussianPdp,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MeasureArg {
    Local,
    Expected,
    Shrinkage,
    Global,
    #[value(name = "global_variant", alias = "global-variant")]
    GlobalVariant,
}

impl From<MeasureArg> for MeasureKind {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Local => MeasureKind::Local,
            MeasureArg::Expected => MeasureKind::Expected,
            MeasureArg::Shrinkage => MeasureKind::Shrinkage,
            MeasureArg::Global => MeasureKind::Global,
            MeasureArg::GlobalVariant => MeasureKind::GlobalVariant,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FamilyArg {
    Poisson,
    #[value(name = "poisson_zt", alias = "poisson-zt")]
    PoissonZt,
    Negbin,
}

impl From<FamilyArg> for SizeFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Poisson => SizeFamily::Poisson,
            FamilyArg::PoissonZt => SizeFamily::PoissonZeroTruncated,
            FamilyArg::Negbin => SizeFamily::Negbin,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ThresholdArg {
    Hard,
    Soft,
}

#[derive(Args, Debug)]
struct TabulateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated QID columns.
    #[arg(long, value_delimiter = ',', required = true)]
    qids: Vec<String>,
    #[arg(long)]
    sensitive: String,
    /// Bin a numeric column into fixed-width intervals, `column:width`. Repeatable.
    #[arg(long = "bin")]
    bins: Vec<String>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct PrivacyArgs {
    #[arg(long, value_enum, default_value = "laplace")]
    mechanism: MechArg,
    #[arg(long, default_value_t = 1.0)]
    sensitivity: f64,
}

/// Inputs shared by every measure.
#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long, value_enum, default_value = "expected")]
    measure: MeasureArg,
    /// Dirichlet hyperparameters, comma-separated, one per sensitive category.
    #[arg(long, value_delimiter = ',', conflicts_with = "estimate_alpha")]
    alpha: Option<Vec<f64>>,
    /// Estimate the hyperparameters from the table by method of moments.
    #[arg(long)]
    estimate_alpha: bool,
    /// Cell-size model, `poisson:LAMBDA` or `negbin:R,LAMBDA`.
    #[arg(long, conflicts_with = "fit_sizes")]
    size_model: Option<String>,
    /// Fit the cell-size model to the table's cell sizes.
    #[arg(long, value_enum)]
    fit_sizes: Option<FamilyArg>,
    /// Renormalize the size weights over n >= 1 in the global sums.
    #[arg(long)]
    zero_truncated: bool,
}

#[derive(Args, Debug)]
struct RiskArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    privacy: PrivacyArgs,
    /// `lo:hi:logN`, `lo:hi:linN` or a comma list.
    #[arg(long)]
    epsilon_grid: String,
    /// Required for the gaussian mechanisms; same syntax as the epsilon grid.
    #[arg(long)]
    delta_grid: Option<String>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SanitizeArgs {
    #[arg(long)]
    table: PathBuf,
    #[command(flatten)]
    privacy: PrivacyArgs,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct UtilityArgs {
    #[arg(long)]
    table: PathBuf,
    /// Score one existing release instead of fresh sanitizations.
    #[arg(long, conflicts_with_all = ["epsilon", "delta", "reps", "seed"])]
    sanitized: Option<PathBuf>,
    #[command(flatten)]
    privacy: PrivacyArgs,
    #[arg(long, required_unless_present = "sanitized")]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Marginal sizes, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    k: Vec<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long, value_enum)]
    fit_sizes: Option<FamilyArg>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct McArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    privacy: PrivacyArgs,
    /// Estimate the thresholding risk on the table instead of a measure.
    #[arg(long, value_enum)]
    threshold: Option<ThresholdArg>,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    reps: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct InvertArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    privacy: PrivacyArgs,
    #[arg(long)]
    target_risk: f64,
    #[arg(long)]
    delta: Option<f64>,
    /// Also write the result as JSON.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    verb: &'a str,
    args: Vec<String>,
    seed: Option<u64>,
    inputs: Vec<InputRecord>,
}

#[derive(Serialize)]
struct InputRecord {
    path: String,
    bytes: u64,
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::FileNotFound(path.to_path_buf()))
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s: u64 = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

/// argv without the program name and the thread cap, which never affects output.
fn recorded_args() -> Vec<String> {
    let mut out = Vec::new();
    let mut it = std::env::args().skip(1);
    while let Some(a) = it.next() {
        if a == "--threads" {
            it.next();
        } else if !a.starts_with("--threads=") {
            out.push(a);
        }
    }
    out
}

fn write_output(path: &Path, contents: &str, verb: &str, seed: Option<u64>, inputs: &[&Path]) -> Result<()> {
    fs::write(path, contents)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        verb,
        args: recorded_args(),
        seed,
        inputs: inputs
            .iter()
            .map(|p| InputRecord {
                path: p.display().to_string(),
                bytes: fs::metadata(p).map(|m| m.len()).unwrap_or(0),
            })
            .collect(),
    };
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    fs::write(PathBuf::from(name), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

fn params(p: &PrivacyArgs, epsilon: f64, delta: Option<f64>) -> Result<PrivacyParams> {
    let mech = Mechanism::from(p.mechanism);
    let delta = if mech == Mechanism::Laplace { None } else { delta };
    if mech.is_gaussian() && delta.is_none() {
        return Err(Error::InvalidParameter(format!("{mech} requires --delta")));
    }
    PrivacyParams::new(mech, epsilon, delta, p.sensitivity)
}

fn parse_size_model(s: &str) -> Result<CellSizeModel> {
    let bad = || Error::InvalidParameter(format!("bad size model `{s}`; use poisson:LAMBDA or negbin:R,LAMBDA"));
    let (family, rest) = s.split_once(':').ok_or_else(bad)?;
    let nums = rest
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    match (family, nums.as_slice()) {
        ("poisson", [l]) => CellSizeModel::poisson(*l),
        ("negbin", [r, l]) => CellSizeModel::negbin(*r, *l),
        _ => Err(bad()),
    }
}

struct Model {
    table: FrequencyTable,
    hyper: Option<DirichletHyper>,
    size_model: Option<CellSizeModel>,
    opts: SeriesOptions,
}

impl Model {
    fn load(args: &ModelArgs) -> Result<Self> {
        require_file(&args.table)?;
        let table = FrequencyTable::read(&args.table)?;
        let hyper = match (&args.alpha, args.estimate_alpha) {
            (Some(a), _) => {
                let h = DirichletHyper::new(a.clone())?;
                if h.k() != table.k() {
                    return Err(Error::InvalidParameter(format!(
                        "--alpha has {} entries, table has K = {}",
                        h.k(),
                        table.k()
                    )));
                }
                Some(h)
            }
            (None, true) => Some(mom_dirichlet(&table)?.hyper()?),
            (None, false) => None,
        };
        let size_model = match (&args.size_model, args.fit_sizes) {
            (Some(s), _) => Some(parse_size_model(s)?),
            (None, Some(f)) => Some(fit_sizes(&table.sizes(), f.into())?),
            (None, None) => None,
        };
        let opts = if args.zero_truncated {
            SeriesOptions::zero_truncated()
        } else {
            SeriesOptions::default()
        };
        Ok(Model {
            table,
            hyper,
            size_model,
            opts,
        })
    }

    fn hyper(&self) -> Result<DirichletHyper> {
        self.hyper
            .clone()
            .ok_or_else(|| Error::InvalidParameter("this measure needs --alpha or --estimate-alpha".into()))
    }

    fn size_model(&self) -> Result<CellSizeModel> {
        self.size_model
            .ok_or_else(|| Error::InvalidParameter("this measure needs --size-model or --fit-sizes".into()))
    }

    fn context(&self, measure: MeasureKind) -> Result<RiskContext> {
        Ok(match measure {
            MeasureKind::Local => RiskContext::Local(self.table.clone()),
            MeasureKind::Expected => RiskContext::Expected(self.table.clone()),
            MeasureKind::Shrinkage => RiskContext::Shrinkage {
                sizes: self.table.sizes(),
                hyper: self.hyper()?,
            },
            MeasureKind::Global => RiskContext::Global {
                hyper: self.hyper()?,
                size_model: self.size_model()?,
                opts: self.opts,
            },
            MeasureKind::GlobalVariant => RiskContext::GlobalVariant {
                size_model: self.size_model()?,
                k: self.table.k(),
                opts: self.opts,
            },
        })
    }
}

fn tabulate(a: &TabulateArgs) -> Result<()> {
    require_file(&a.input)?;
    let mut bins = Vec::new();
    for b in &a.bins {
        let (col, width) = b
            .rsplit_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("bad --bin `{b}`; use column:width")))?;
        let width: f64 = width
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad bin width in `{b}`")))?;
        bins.push((col.to_string(), width));
    }
    let schema = bins.iter().fold(Schema::new(), |s, (c, _)| s.numeric(c.clone()));
    let mut ds = load_csv(&a.input, &schema)?;
    for (col, width) in &bins {
        ds = bin_numeric(&ds, col, *width)?;
    }
    let qids: Vec<&str> = a.qids.iter().map(String::as_str).collect();
    let tab = cross_tabulate(&ds, &qids, &a.sensitive)?;
    if tab.dropped_rows > 0 {
        eprintln!("dropped {} rows with missing values", tab.dropped_rows);
    }
    write_output(&a.output, &tab.table.to_json()?, "tabulate", None, &[&a.input])
}

fn risk(a: &RiskArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let ctx = model.context(a.model.measure.into())?;
    let eps = parse_grid(&a.epsilon_grid)?;
    let deltas = match &a.delta_grid {
        Some(g) => parse_grid(g)?,
        None => Vec::new(),
    };
    let curve = risk_curve(&ctx, a.privacy.mechanism.into(), &eps, &deltas, a.privacy.sensitivity)?;
    write_output(&a.output, &curve.to_csv(), "risk", None, &[&a.model.table])
}

fn sanitize_cmd(a: &SanitizeArgs) -> Result<()> {
    require_file(&a.table)?;
    let table = FrequencyTable::read(&a.table)?;
    let p = params(&a.privacy, a.epsilon, a.delta)?;
    let seed = resolve_seed(a.seed);
    let s = sanitize(&table, &p, seed)?;
    write_output(&a.output, &(s.to_json()? + "\n"), "sanitize", Some(seed), &[&a.table])
}

fn utility(a: &UtilityArgs) -> Result<()> {
    require_file(&a.table)?;
    let table = FrequencyTable::read(&a.table)?;
    if let Some(path) = &a.sanitized {
        require_file(path)?;
        let s = SanitizedTable::read(path)?;
        let report = utility_report_for(&table, &s, &a.k)?;
        return write_output(&a.output, &report.to_csv(), "utility", None, &[&a.table, path]);
    }
    let epsilon = a.epsilon.expect("clap enforces --epsilon");
    let p = params(&a.privacy, epsilon, a.delta)?;
    let seed = resolve_seed(a.seed);
    let reps = a.reps.unwrap_or(drha::utility::DEFAULT_REPS);
    let report = utility_report(&table, &p, &a.k, reps, seed)?;
    write_output(&a.output, &report.to_csv(), "utility", Some(seed), &[&a.table])
}

fn estimate(a: &EstimateArgs) -> Result<()> {
    require_file(&a.table)?;
    let table = FrequencyTable::read(&a.table)?;
    let mom = mom_dirichlet(&table)?;
    let sizes = match a.fit_sizes {
        Some(f) => Some(fit_sizes(&table.sizes(), f.into())?),
        None => None,
    };
    let out = json!({
        "categories": table.categories(),
        "alpha": mom.alpha,
        "alpha_dot_spread": mom.alpha_dot_spread,
        "size_model": sizes,
    });
    write_output(&a.output, &(serde_json::to_string_pretty(&out)? + "\n"), "estimate", None, &[&a.table])
}

fn mc(a: &McArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let p = params(&a.privacy, a.epsilon, a.delta)?;
    let seed = resolve_seed(a.seed);
    let est = match a.threshold {
        Some(t) => {
            let mode = match t {
                ThresholdArg::Hard => ThresholdMode::Hard,
                ThresholdArg::Soft => ThresholdMode::Soft,
            };
            mc_threshold_dr(&model.table, &p, mode, a.reps, seed)?
        }
        None => match MeasureKind::from(a.model.measure) {
            MeasureKind::Local => mc_table_avg(&model.table, &TableLayer::Local, &p, a.reps, seed)?,
            MeasureKind::Expected => mc_table_avg(&model.table, &TableLayer::Expected, &p, a.reps, seed)?,
            MeasureKind::Shrinkage => mc_table_avg(&model.table, &TableLayer::Shrinkage(model.hyper()?), &p, a.reps, seed)?,
            MeasureKind::Global => mc_global(&model.hyper()?, &model.size_model()?, &p, a.reps, seed)?,
            MeasureKind::GlobalVariant => mc_global_variant(&model.size_model()?, model.table.k(), &p, a.reps, seed)?,
        },
    };
    write_output(&a.output, &(est.to_json()? + "\n"), "mc", Some(seed), &[&a.model.table])
}

fn invert(a: &InvertArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let ctx = model.context(a.model.measure.into())?;
    let mech = Mechanism::from(a.privacy.mechanism);
    let delta = if mech == Mechanism::Laplace { None } else { a.delta };
    if mech.is_gaussian() && delta.is_none() {
        return Err(Error::InvalidParameter(format!("{mech} requires --delta")));
    }
    let inv = invert_epsilon(&ctx, a.target_risk, mech, delta, a.privacy.sensitivity)?;
    println!("epsilon={} achieved_risk={}", inv.epsilon, inv.achieved);
    if let Some(path) = &a.output {
        write_output(path, &(serde_json::to_string_pretty(&inv)? + "\n"), "invert", None, &[&a.model.table])?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidParameter("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    match &cli.command {
        Command::Tabulate(a) => tabulate(a),
        Command::Risk(a) => risk(a),
        Command::Sanitize(a) => sanitize_cmd(a),
        Command::Utility(a) => utility(a),
        Command::Estimate(a) => estimate(a),
        Command::Mc(a) => mc(a),
        Command::Invert(a) => invert(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
