//! Command-line front end. Arguments are resolved into a [`RunConfig`], which can also be read
//! from a JSON file and is echoed into every JSON result.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bias_constants::{finite_sample_constants, FiniteSampleConstants};
use crate::error::{Result, SeaperError};
use crate::estimation::{c1_half_width, cauchy_half_width, fit, select_model, SearchConfig};
use crate::likelihood::{Method, ModelOrder};
use crate::semiparametric::{default_bandwidth, gph_fit_at, gph_pole_search};
use crate::simulation::{mean_likelihood_surface, run_mc, Estimator, McConfig, RepRow};
use crate::spectral_models::GarmaParams;

/// Version tag written into every JSON result.
pub const SCHEMA_VERSION: &str = "1";

/// Output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Likelihood choice on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    #[value(alias = "demodulated")]
    Demod,
    Whittle,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Demod => Method::Demodulated,
            MethodArg::Whittle => Method::Whittle,
        }
    }
}

/// Model parameters for commands that simulate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub params: GarmaParams,
    pub n: usize,
}

/// Settings shared by `fit` and `select`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub method: Method,
    pub orders: Vec<ModelOrder>,
    pub detrend: bool,
    pub search: SearchConfig,
}

/// Settings for the log-periodogram regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GphConfig {
    /// Bandwidth; `None` means `⌊N/8⌋`.
    pub m: Option<usize>,
    pub fix_xi: Option<f64>,
    pub xi_min: Option<f64>,
    pub xi_max: Option<f64>,
    pub detrend: bool,
}

/// Monte Carlo settings plus CLI-only extras.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McRunConfig {
    pub study: McConfig,
    /// Where the per-replication CSV goes; defaults to the summary path with `.reps.csv`.
    pub rows_path: Option<PathBuf>,
    /// Also compute averaged likelihood slices through the MLE.
    pub surface: bool,
}

/// Settings for the finite-sample constants report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub n: Option<usize>,
    pub delta: f64,
    pub alpha: f64,
    pub asymptotic: bool,
}

/// The task and its typed settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "settings", rename_all = "lowercase", deny_unknown_fields)]
pub enum Task {
    Simulate(SimulateConfig),
    Fit(FitConfig),
    Gph(GphConfig),
    Mc(McRunConfig),
    Constants(ConstantsConfig),
    Select(FitConfig),
}

/// Fully resolved run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub input_path: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    /// Worker threads; `None` uses every available core.
    pub threads: Option<usize>,
}

impl RunConfig {
    /// Parses a JSON config, rejecting unknown fields.
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| SeaperError::Config(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

#[derive(Debug, Parser)]
#[command(name = "seaper", version, about = "Estimation and simulation for seasonally persistent time series")]
pub struct Cli {
    /// Read the whole run description from a JSON file instead of the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads: a count or `auto`.
    #[arg(long, global = true, env = "SEAPER_THREADS", default_value = "auto")]
    pub threads: String,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    #[arg(long)]
    pub xi: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    /// Series length.
    #[arg(long, short)]
    pub n: usize,
}

impl ModelArgs {
    fn params(&self) -> GarmaParams {
        GarmaParams { xi: self.xi, delta: self.delta, phi: self.phi, theta: self.theta, sigma2_eps: self.sigma2 }
    }
}

#[derive(Debug, Args, Clone)]
pub struct SearchArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "demod")]
    pub method: MethodArg,
    /// Known pole: skip the search.
    #[arg(long)]
    pub fix_xi: Option<f64>,
    /// Remove a least-squares line before fitting.
    #[arg(long)]
    pub detrend: bool,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub xi_min: Option<f64>,
    #[arg(long)]
    pub xi_max: Option<f64>,
}

impl SearchArgs {
    fn search(&self) -> SearchConfig {
        SearchConfig { xi_min: self.xi_min, xi_max: self.xi_max, fix_xi: self.fix_xi, alpha: self.alpha }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a series and write it as one CSV column `x`.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Fit a GARMA(p, q) model by maximum likelihood.
    Fit {
        #[command(flatten)]
        search: SearchArgs,
        /// Model order `p,q` with p, q in {0, 1}.
        #[arg(long, default_value = "0,0")]
        order: ModelOrder,
    },
    /// Log-periodogram regression estimate of δ.
    Gph {
        #[arg(long)]
        input: PathBuf,
        /// Ordinates per side of the pole; defaults to N/8.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        fix_xi: Option<f64>,
        #[arg(long)]
        detrend: bool,
        #[arg(long)]
        xi_min: Option<f64>,
        #[arg(long)]
        xi_max: Option<f64>,
    },
    /// Monte Carlo study of the estimators.
    Mc {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// Comma-separated subset of demod, whittle, gph.
        #[arg(long, default_value = "demod,whittle")]
        estimators: String,
        #[arg(long, default_value = "0,0")]
        order: ModelOrder,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        known_pole: bool,
        #[arg(long)]
        xi_min: Option<f64>,
        #[arg(long)]
        xi_max: Option<f64>,
        /// Per-replication CSV path.
        #[arg(long)]
        rows_output: Option<PathBuf>,
        /// Add averaged likelihood slices to the summary.
        #[arg(long)]
        surface: bool,
    },
    /// Finite-sample constants and pole interval half-widths.
    Constants {
        #[arg(long, short, required_unless_present = "asymptotic")]
        n: Option<usize>,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Report the large-sample limits instead.
        #[arg(long)]
        asymptotic: bool,
    },
    /// Fit several orders and rank them by BIC.
    Select {
        #[command(flatten)]
        search: SearchArgs,
        /// Semicolon-separated orders, e.g. `0,0;1,0`; all four by default.
        #[arg(long)]
        orders: Option<String>,
    },
}

fn parse_threads(s: &str) -> Result<Option<usize>> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(SeaperError::Config(format!("threads must be a positive count or `auto`, got `{s}`"))),
        Ok(t) => Ok(Some(t)),
    }
}

fn parse_estimators(s: &str) -> Result<Vec<Estimator>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let e = match part {
            "demod" | "demodulated" => Estimator::Demodulated,
            "whittle" => Estimator::Whittle,
            "gph" => Estimator::Gph,
            other => return Err(SeaperError::Config(format!("unknown estimator `{other}`"))),
        };
        if !out.contains(&e) {
            out.push(e);
        }
    }
    Ok(out)
}

fn parse_orders(s: &str) -> Result<Vec<ModelOrder>> {
    s.split(';').map(str::trim).filter(|p| !p.is_empty()).map(str::parse).collect()
}

/// Turns parsed arguments into a [`RunConfig`].
pub fn resolve(cli: Cli) -> Result<RunConfig> {
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = RunConfig::from_json(&text)?;
        if cli.output.is_some() {
            cfg.output_path = cli.output;
        }
        return Ok(cfg);
    }
    let command = cli
        .command
        .ok_or_else(|| SeaperError::Config("a subcommand or --config is required".into()))?;
    let threads = parse_threads(&cli.threads)?;
    let mut input_path = None;
    let (task, default_format) = match command {
        Command::Simulate { model } => (Task::Simulate(SimulateConfig { params: model.params(), n: model.n }), Format::Csv),
        Command::Fit { search, order } => {
            input_path = Some(search.input.clone());
            let fc = FitConfig { method: search.method.into(), orders: vec![order], detrend: search.detrend, search: search.search() };
            (Task::Fit(fc), Format::Json)
        }
        Command::Select { search, orders } => {
            input_path = Some(search.input.clone());
            let orders = match orders {
                Some(s) => parse_orders(&s)?,
                None => ModelOrder::all(),
            };
            let fc = FitConfig { method: search.method.into(), orders, detrend: search.detrend, search: search.search() };
            (Task::Select(fc), Format::Json)
        }
        Command::Gph { input, m, fix_xi, detrend, xi_min, xi_max } => {
            input_path = Some(input);
            (Task::Gph(GphConfig { m, fix_xi, xi_min, xi_max, detrend }), Format::Json)
        }
        Command::Mc { model, reps, estimators, order, alpha, m, known_pole, xi_min, xi_max, rows_output, surface } => {
            let study = McConfig {
                params_true: model.params(),
                n: model.n,
                replications: reps,
                seed: cli.seed,
                estimators: parse_estimators(&estimators)?,
                alpha,
                order,
                gph_m: m,
                xi_min,
                xi_max,
                known_pole,
            };
            (Task::Mc(McRunConfig { study, rows_path: rows_output, surface }), Format::Json)
        }
        Command::Constants { n, delta, alpha, asymptotic } => {
            (Task::Constants(ConstantsConfig { n, delta, alpha, asymptotic }), Format::Json)
        }
    };
    Ok(RunConfig {
        task,
        input_path,
        output_path: cli.output,
        format: cli.format.unwrap_or(default_format),
        seed: cli.seed,
        threads,
    })
}

/// Reads a one-column numeric CSV. Lines starting with `#` are skipped, and a single
/// non-numeric first record is taken as a header.
pub fn read_series(path: &Path) -> Result<Vec<f64>> {
    let file = std::fs::File::open(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut out = Vec::new();
    let mut first = true;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            SeaperError::Config(format!("{}: line {line}: {e}", path.display()))
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 1 {
            return Err(SeaperError::Config(format!(
                "{}: line {line}: expected one column, found {}",
                path.display(),
                rec.len()
            )));
        }
        let field = &rec[0];
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => {
                return Err(SeaperError::Config(format!("{}: line {line}: non-finite value `{field}`", path.display())))
            }
            Err(_) if first => {}
            Err(_) => {
                return Err(SeaperError::Config(format!("{}: line {line}: cannot parse `{field}` as a number", path.display())))
            }
        }
        first = false;
    }
    if out.is_empty() {
        return Err(SeaperError::Config(format!("{}: no data values", path.display())));
    }
    Ok(out)
}

/// Removes the least-squares line `a + b t`.
pub fn detrend(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let x_mean = x.iter().sum::<f64>() / n;
    let (mut sxt, mut stt) = (0.0, 0.0);
    for (t, v) in x.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxt += dt * (v - x_mean);
        stt += dt * dt;
    }
    let b = if stt > 0.0 { sxt / stt } else { 0.0 };
    x.iter().enumerate().map(|(t, v)| v - x_mean - b * (t as f64 - t_mean)).collect()
}

/// Writes `bytes` to `path` through a temporary file in the same directory and an atomic
/// rename, or to standard output when `path` is `None`.
pub fn write_atomic(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
        Some(p) => {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(p).map_err(|e| SeaperError::Io(e.error))?;
            Ok(())
        }
    }
}

fn flatten_json(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_json(&key, x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten_json(&format!("{prefix}.{i}"), x, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Renders a result document as pretty JSON or as `key,value` CSV rows.
fn render(doc: &Value, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(doc).map_err(|e| SeaperError::Config(e.to_string()))?;
            s.push('\n');
            Ok(s.into_bytes())
        }
        Format::Csv => {
            let mut pairs = Vec::new();
            flatten_json("", doc, &mut pairs);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["key", "value"]).map_err(csv_err)?;
            for (k, v) in pairs {
                w.write_record([k, v]).map_err(csv_err)?;
            }
            w.into_inner().map_err(|e| SeaperError::Io(std::io::Error::other(e.to_string())))
        }
    }
}

fn csv_err(e: csv::Error) -> SeaperError {
    SeaperError::Io(std::io::Error::other(e.to_string()))
}

fn document(cfg: &RunConfig, key: &str, result: Value) -> Value {
    json!({ "schema_version": SCHEMA_VERSION, "config": cfg, key: result })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result serialises")
}

fn load_input(cfg: &RunConfig, detrend_flag: bool) -> Result<Vec<f64>> {
    let path = cfg
        .input_path
        .as_ref()
        .ok_or_else(|| SeaperError::Config("this command needs --input".into()))?;
    let x = read_series(path)?;
    Ok(if detrend_flag { detrend(&x) } else { x })
}

fn check_output_path(cfg: &RunConfig) -> Result<()> {
    if let Some(p) = &cfg.output_path {
        if let Some(d) = p.parent() {
            if !d.as_os_str().is_empty() && !d.is_dir() {
                return Err(SeaperError::Config(format!("output directory {} does not exist", d.display())));
            }
        }
    }
    if let Some(p) = &cfg.input_path {
        if !p.is_file() {
            return Err(SeaperError::Config(format!("input file {} does not exist", p.display())));
        }
    }
    Ok(())
}

fn series_csv(cfg: &RunConfig, sc: &SimulateConfig, x: &[f64]) -> Vec<u8> {
    let p = &sc.params;
    let mut s = String::new();
    for (k, v) in [("xi", p.xi), ("delta", p.delta), ("phi", p.phi), ("theta", p.theta), ("sigma2_eps", p.sigma2_eps)] {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s.push_str(&format!("# n={}\n# seed={}\nx\n", sc.n, cfg.seed));
    for v in x {
        s.push_str(&format!("{v}\n"));
    }
    s.into_bytes()
}

fn rows_csv(rows: &[RepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| SeaperError::Io(std::io::Error::other(e.to_string())))
}

fn default_rows_path(summary: Option<&Path>) -> Option<PathBuf> {
    summary.map(|p| p.with_extension("reps.csv"))
}

fn constants_report(c: &ConstantsConfig) -> Result<Value> {
    let k: FiniteSampleConstants = if c.asymptotic {
        FiniteSampleConstants::asymptotic(c.delta)
    } else {
        let n = c.n.ok_or_else(|| SeaperError::Config("constants needs --n unless --asymptotic".into()))?;
        finite_sample_constants(n, c.delta)?
    };
    let h = c1_half_width(&k, c.alpha)?;
    Ok(json!({
        "constants": k,
        "alpha": c.alpha,
        "half_width_finite": h,
        "half_width_cauchy": cauchy_half_width(c.alpha),
    }))
}

fn execute(cfg: &RunConfig) -> Result<()> {
    check_output_path(cfg)?;
    let out = cfg.output_path.as_deref();
    match &cfg.task {
        Task::Simulate(sc) => {
            let x = crate::simulation::simulate(&sc.params, sc.n, cfg.seed)?;
            let bytes = match cfg.format {
                Format::Csv => series_csv(cfg, sc, &x),
                Format::Json => render(&document(cfg, "series", to_value(&x)), Format::Json)?,
            };
            write_atomic(out, &bytes)
        }
        Task::Fit(fc) => {
            let x = load_input(cfg, fc.detrend)?;
            let order = *fc.orders.first().ok_or_else(|| SeaperError::Config("fit needs one order".into()))?;
            let r = fit(&x, fc.method, order, &fc.search)?;
            write_atomic(out, &render(&document(cfg, "result", to_value(&r)), cfg.format)?)
        }
        Task::Select(fc) => {
            let x = load_input(cfg, fc.detrend)?;
            let r = select_model(&x, fc.method, &fc.orders, &fc.search)?;
            write_atomic(out, &render(&document(cfg, "result", to_value(&r)), cfg.format)?)
        }
        Task::Gph(gc) => {
            let x = load_input(cfg, gc.detrend)?;
            let m = gc.m.unwrap_or_else(|| default_bandwidth(x.len()));
            let r = match gc.fix_xi {
                Some(xi) => gph_fit_at(&x, xi, m)?,
                None => gph_pole_search(&x, m, gc.xi_min, gc.xi_max)?,
            };
            write_atomic(out, &render(&document(cfg, "result", to_value(&r)), cfg.format)?)
        }
        Task::Mc(mc) => {
            let res = run_mc(&mc.study)?;
            let mut result = to_value(&res.summary);
            if mc.surface {
                let s = &mc.study;
                let nf = s.n as f64;
                let xi_grid: Vec<f64> = (-30..=30).map(|i| s.params_true.xi + i as f64 / (10.0 * nf)).collect();
                let delta_grid: Vec<f64> = (1..50).map(|i| i as f64 / 100.0).collect();
                let surf = mean_likelihood_surface(s, &xi_grid, &delta_grid)?;
                result["likelihood_surface"] = to_value(&surf);
            }
            let rows_path = mc.rows_path.clone().or_else(|| default_rows_path(out));
            if let Some(rp) = &rows_path {
                write_atomic(Some(rp), &rows_csv(&res.rows)?)?;
            }
            write_atomic(out, &render(&document(cfg, "summary", result), cfg.format)?)
        }
        Task::Constants(c) => write_atomic(out, &render(&document(cfg, "result", constants_report(c)?), cfg.format)?),
    }
}

/// Runs a resolved configuration on a pool with the requested number of threads.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| SeaperError::Config(format!("thread pool: {e}")))?;
    pool.install(|| execute(cfg))
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match resolve(cli).and_then(|cfg| run(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
