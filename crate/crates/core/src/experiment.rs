//! Batch experiments described by a TOML spec file.
//!
//! A spec names a channel, a set of methods, per-method sample sizes and an
//! optional sweep over `gamma_th` or `mu`. Each (method, sweep point) pair
//! becomes one output row. Row `r` for method `k` draws from
//! `RngStream::new(seed, k)`, so a row can be rerun alone from its seed,
//! method and parameters.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::{Error, Result};
use crate::estimators::{
    estimate_ce, estimate_et, estimate_mls, estimate_nmc, estimate_pis_with, estimate_uis,
    CeOptions, MlsOptions, PilotOptions,
};
use crate::exec::Executor;
use crate::metrics::{efficiency_report, EfficiencyReport};
use crate::model::{ChannelConfig, EstimateResult, Method};
use crate::rng::RngStream;
use crate::samplers::DEFAULT_PDF_BOUND_CONSTANT;

/// Sample size used when neither `[samples]` entry applies.
pub const DEFAULT_SAMPLES: u64 = 1_000_000;
/// Default MLS chains per level.
pub const DEFAULT_MLS_PER_LEVEL: u64 = 10_000;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    GammaTh,
    Mu,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::GammaTh => "gamma_th",
            SweepAxis::Mu => "mu",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Estimator hyperparameters; every key is optional in the spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyper {
    pub ce_rho: f64,
    pub ce_pilot_samples: u64,
    pub ce_max_iterations: usize,
    pub mls_target: f64,
    pub mls_replications: usize,
    pub mls_pilot_samples: usize,
    /// Fixed MLS levels; the pilot places them when absent.
    pub mls_levels: Option<Vec<f64>>,
    pub pdf_bound_constant: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        let ce = CeOptions::default();
        let mls = MlsOptions::default();
        Self {
            ce_rho: ce.rho,
            ce_pilot_samples: ce.pilot_samples,
            ce_max_iterations: ce.max_iterations,
            mls_target: mls.pilot.target_cond_prob,
            mls_replications: mls.replications,
            mls_pilot_samples: mls.pilot.pilot_samples,
            mls_levels: None,
            pdf_bound_constant: DEFAULT_PDF_BOUND_CONSTANT,
        }
    }
}

/// Per-method sample sizes. For MLS the size is chains per level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSizes {
    pub default: u64,
    pub per_method: BTreeMap<Method, u64>,
}

impl SampleSizes {
    pub fn get(&self, method: Method) -> u64 {
        match self.per_method.get(&method) {
            Some(&s) => s,
            None if method == Method::Mls => DEFAULT_MLS_PER_LEVEL,
            None => self.default,
        }
    }
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub seed: u64,
    pub methods: Vec<Method>,
    pub config: ChannelConfig,
    pub samples: SampleSizes,
    pub sweep: Option<Sweep>,
    pub hyper: Hyper,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawMu {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    antennas: usize,
    selected: usize,
    mu: RawMu,
    gamma_th: f64,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSamples {
    default: Option<u64>,
    nmc: Option<u64>,
    uis: Option<u64>,
    pis: Option<u64>,
    et: Option<u64>,
    ce: Option<u64>,
    mls: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: Spanned<String>,
    values: Spanned<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    seed: Option<u64>,
    methods: Spanned<Vec<Spanned<String>>>,
    config: Spanned<RawConfig>,
    samples: Option<Spanned<RawSamples>>,
    sweep: Option<RawSweep>,
    hyper: Option<Spanned<Hyper>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn at<T>(text: &str, item: &Spanned<T>, msg: impl std::fmt::Display) -> Error {
    Error::Spec(format!("line {}: {msg}", line_of(text, item.span().start)))
}

impl ExperimentSpec {
    /// Parses and validates a spec; errors name the offending line.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| format!("line {}: ", line_of(text, s.start)));
            Error::Spec(format!("{}{}", line.unwrap_or_default(), e.message()))
        })?;

        if raw.methods.get_ref().is_empty() {
            return Err(at(text, &raw.methods, "methods must not be empty"));
        }
        let mut methods = Vec::new();
        for name in raw.methods.get_ref() {
            let m: Method = name.get_ref().parse().map_err(|e| at(text, name, e))?;
            if methods.contains(&m) {
                return Err(at(text, name, format!("method '{m}' listed twice")));
            }
            methods.push(m);
        }

        let rc = raw.config.get_ref();
        let mu = match &rc.mu {
            RawMu::Scalar(v) => vec![*v; rc.antennas],
            RawMu::Vector(v) => v.clone(),
        };
        let config = ChannelConfig::new(rc.antennas, rc.selected, mu, rc.gamma_th)
            .map_err(|e| at(text, &raw.config, e))?;

        let raw_samples = raw
            .samples
            .unwrap_or_else(|| Spanned::new(0..0, RawSamples::default()));
        let rs = raw_samples.get_ref();
        let default = rs.default.unwrap_or(DEFAULT_SAMPLES);
        let mut per_method = BTreeMap::new();
        for (m, s) in [
            (Method::Nmc, rs.nmc),
            (Method::Uis, rs.uis),
            (Method::Pis, rs.pis),
            (Method::Et, rs.et),
            (Method::Ce, rs.ce),
            (Method::Mls, rs.mls),
        ] {
            if let Some(s) = s {
                per_method.insert(m, s);
            }
        }
        if default == 0 || per_method.values().any(|&s| s == 0) {
            return Err(at(text, &raw_samples, "sample sizes must be at least 1"));
        }

        let sweep = match raw.sweep {
            None => None,
            Some(sw) => {
                let axis = match sw.axis.get_ref().as_str() {
                    "gamma_th" => SweepAxis::GammaTh,
                    "mu" => SweepAxis::Mu,
                    other => {
                        return Err(at(
                            text,
                            &sw.axis,
                            format!("sweep axis must be 'gamma_th' or 'mu', got '{other}'"),
                        ))
                    }
                };
                let values = sw.values.get_ref().clone();
                let positive = values.iter().all(|v| v.is_finite() && *v > 0.0);
                let sorted = values.windows(2).all(|w| w[1] > w[0])
                    || values.windows(2).all(|w| w[1] < w[0]);
                if values.is_empty() || !positive || !sorted {
                    return Err(at(
                        text,
                        &sw.values,
                        "sweep values must be nonempty, positive and strictly monotone",
                    ));
                }
                if axis == SweepAxis::Mu && config.common_mu().is_none() {
                    return Err(at(
                        text,
                        &sw.axis,
                        "a mu sweep needs a scalar mu in [config]",
                    ));
                }
                Some(Sweep { axis, values })
            }
        };

        let raw_hyper = raw
            .hyper
            .unwrap_or_else(|| Spanned::new(0..0, Hyper::default()));
        let hyper = raw_hyper.get_ref().clone();
        if !(hyper.ce_rho > 0.0 && hyper.ce_rho < 1.0) {
            return Err(at(text, &raw_hyper, "ce_rho must lie in (0, 1)"));
        }
        if !(hyper.mls_target > 0.0 && hyper.mls_target < 1.0) {
            return Err(at(text, &raw_hyper, "mls_target must lie in (0, 1)"));
        }
        if !(hyper.pdf_bound_constant >= 1.0) {
            return Err(at(
                text,
                &raw_hyper,
                "pdf_bound_constant must be at least 1",
            ));
        }

        Ok(Self {
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            methods,
            config,
            samples: SampleSizes {
                default,
                per_method,
            },
            sweep,
            hyper,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Spec(msg) => Error::Spec(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The channel at each sweep point, paired with the axis value.
    pub fn points(&self) -> Result<Vec<(Option<f64>, ChannelConfig)>> {
        let Some(sweep) = &self.sweep else {
            return Ok(vec![(None, self.config.clone())]);
        };
        sweep
            .values
            .iter()
            .map(|&v| {
                let cfg = match sweep.axis {
                    SweepAxis::GammaTh => self.config.with_gamma_th(v)?,
                    SweepAxis::Mu => ChannelConfig::identical(
                        self.config.antennas(),
                        self.config.selected(),
                        v,
                        self.config.gamma_th(),
                    )?,
                };
                Ok((Some(v), cfg))
            })
            .collect()
    }
}

/// Runs one estimator with the spec's hyperparameters.
pub fn run_method(
    method: Method,
    config: &ChannelConfig,
    samples: u64,
    hyper: &Hyper,
    rng: &RngStream,
    exec: &Executor,
) -> Result<EstimateResult> {
    match method {
        Method::Nmc => estimate_nmc(config, samples, rng, exec),
        Method::Uis => estimate_uis(config, samples, rng, exec),
        Method::Pis => estimate_pis_with(config, samples, rng, exec, hyper.pdf_bound_constant),
        Method::Et => estimate_et(config, samples, rng, exec),
        Method::Ce => {
            let opts = CeOptions {
                pilot_samples: hyper.ce_pilot_samples,
                rho: hyper.ce_rho,
                max_iterations: hyper.ce_max_iterations,
            };
            estimate_ce(config, samples, &opts, rng, exec)
        }
        Method::Mls => {
            let opts = MlsOptions {
                per_level_samples: samples as usize,
                replications: hyper.mls_replications,
                levels: hyper.mls_levels.clone(),
                pilot: PilotOptions {
                    pilot_samples: hyper.mls_pilot_samples,
                    target_cond_prob: hyper.mls_target,
                    ..PilotOptions::default()
                },
            };
            estimate_mls(config, &opts, rng, exec)
        }
    }
}

/// Stream id of a method within an experiment.
pub fn method_stream(method: Method) -> u64 {
    Method::ALL.iter().position(|&m| m == method).unwrap() as u64
}

/// One (method, sweep point) outcome.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub method: Method,
    pub axis_value: Option<f64>,
    pub config: ChannelConfig,
    pub seed: u64,
    pub result: Option<EstimateResult>,
    pub metrics: Option<EfficiencyReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Overrides the spec's seed.
    pub seed: Option<u64>,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    /// Record wall times; off gives byte-identical reruns.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: None,
            workers: 1,
            out_dir: PathBuf::from("."),
            format: OutputFormat::Csv,
            timing: true,
        }
    }
}

/// Runs every (method, point) pair. Estimator failures are kept as
/// error rows so one inapplicable method does not stop the run.
pub fn execute(spec: &ExperimentSpec, options: &RunOptions) -> Result<Vec<Row>> {
    let exec = Executor::new(options.workers)?;
    let seed = options.seed.unwrap_or(spec.seed);
    let mut rows = Vec::new();
    for (axis_value, config) in spec.points()? {
        for &method in &spec.methods {
            let rng = RngStream::new(seed, method_stream(method));
            let outcome = run_method(
                method,
                &config,
                spec.samples.get(method),
                &spec.hyper,
                &rng,
                &exec,
            );
            let (result, metrics, error) = match outcome {
                Ok(mut r) => {
                    if !options.timing {
                        r.wall_time_s = 0.0;
                    }
                    let metrics = efficiency_report(&r).ok();
                    (Some(r), metrics, None)
                }
                Err(e) => (None, None, Some(e.to_string())),
            };
            rows.push(Row {
                method,
                axis_value,
                config: config.clone(),
                seed,
                result,
                metrics,
                error,
            });
        }
    }
    Ok(rows)
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

fn mu_field(config: &ChannelConfig) -> String {
    match config.common_mu() {
        Some(mu) => mu.to_string(),
        None => config
            .mu()
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(";"),
    }
}

pub const RUN_COLUMNS: [&str; 15] = [
    "method",
    "M",
    "m",
    "mu",
    "gamma_th",
    "S",
    "p_hat",
    "var_hat",
    "re_pct",
    "scv",
    "wnrv_time",
    "wnrv_work",
    "wall_time_s",
    "seed",
    "warnings",
];

/// Writes the per-row CSV; floats carry four significant digits.
pub fn write_run_csv<W: Write>(rows: &[Row], out: W, timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUN_COLUMNS).map_err(csv_err)?;
    for row in rows {
        let c = &row.config;
        let mut rec = vec![
            row.method.to_string(),
            c.antennas().to_string(),
            c.selected().to_string(),
            mu_field(c),
            c.gamma_th().to_string(),
        ];
        match (&row.result, &row.error) {
            (Some(r), _) => {
                let m = row.metrics.as_ref();
                let opt =
                    |f: &dyn Fn(&EfficiencyReport) -> f64| m.map(|m| sci(f(m))).unwrap_or_default();
                rec.extend([
                    r.samples.to_string(),
                    sci(r.p_hat),
                    sci(r.var_hat),
                    opt(&|m| 100.0 * m.re),
                    opt(&|m| m.scv),
                    if timing {
                        opt(&|m| m.wnrv.time)
                    } else {
                        String::new()
                    },
                    opt(&|m| m.wnrv.work),
                    if timing {
                        sci(r.wall_time_s)
                    } else {
                        String::new()
                    },
                    row.seed.to_string(),
                    r.warnings.join("; "),
                ]);
            }
            (None, err) => {
                rec.extend(std::iter::repeat_n(String::new(), 8));
                rec.push(row.seed.to_string());
                rec.push(format!("error: {}", err.as_deref().unwrap_or("unknown")));
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `axis_value, method, scv` for plotting.
pub fn write_sweep_csv<W: Write>(rows: &[Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["axis_value", "method", "scv"])
        .map_err(csv_err)?;
    for row in rows {
        let axis = row.axis_value.map(|v| v.to_string()).unwrap_or_default();
        let scv = row.metrics.as_ref().map(|m| sci(m.scv)).unwrap_or_default();
        w.write_record([axis, row.method.to_string(), scv])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    spec: &'a ExperimentSpec,
    seed: u64,
    workers: usize,
    rows: &'a [Row],
}

/// Full-precision record of the run, with per-method diagnostics.
pub fn write_json<W: Write>(
    spec: &ExperimentSpec,
    options: &RunOptions,
    rows: &[Row],
    out: W,
) -> Result<()> {
    let sidecar = Sidecar {
        spec,
        seed: options.seed.unwrap_or(spec.seed),
        workers: options.workers,
        rows,
    };
    serde_json::to_writer_pretty(out, &sidecar).map_err(|e| Error::Io(e.to_string()))
}

/// Files written by [`run`] or [`sweep_scv`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<Row>,
    pub files: Vec<PathBuf>,
}

impl RunOutput {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

fn stem(spec_path: &Path) -> String {
    spec_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into())
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_outputs(
    spec: &ExperimentSpec,
    options: &RunOptions,
    rows: Vec<Row>,
    name: &str,
    csv: impl FnOnce(&[Row], fs::File) -> Result<()>,
) -> Result<RunOutput> {
    fs::create_dir_all(&options.out_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", options.out_dir.display())))?;
    let mut files = Vec::new();
    if options.format == OutputFormat::Csv {
        let path = options.out_dir.join(format!("{name}.csv"));
        csv(&rows, create(&path)?)?;
        files.push(path);
    }
    let path = options.out_dir.join(format!("{name}.json"));
    write_json(spec, options, &rows, create(&path)?)?;
    files.push(path);
    Ok(RunOutput { rows, files })
}

/// Runs a spec file and writes `<stem>.csv` and `<stem>.json` to the
/// output directory (only the JSON with [`OutputFormat::Json`]).
pub fn run(spec_path: &Path, options: &RunOptions) -> Result<RunOutput> {
    let spec = ExperimentSpec::from_file(spec_path)?;
    let rows = execute(&spec, options)?;
    let timing = options.timing;
    write_outputs(&spec, options, rows, &stem(spec_path), |rows, f| {
        write_run_csv(rows, f, timing)
    })
}

/// Runs a spec with a sweep axis and writes `<stem>_scv.csv` (axis value,
/// method, SCV) plus the JSON sidecar.
pub fn sweep_scv(spec_path: &Path, options: &RunOptions) -> Result<RunOutput> {
    let spec = ExperimentSpec::from_file(spec_path)?;
    if spec.sweep.is_none() {
        return Err(Error::Spec(format!(
            "{}: sweep needs a [sweep] section",
            spec_path.display()
        )));
    }
    let rows = execute(&spec, options)?;
    let name = format!("{}_scv", stem(spec_path));
    write_outputs(&spec, options, rows, &name, |rows, f| {
        write_sweep_csv(rows, f)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE_ONE: &str = r#"
seed = 7
methods = ["pis", "et", "ce"]

[config]
antennas = 8
selected = 4
mu = 0.5
gamma_th = 1.0

[samples]
default = 1000

[sweep]
axis = "gamma_th"
values = [1.0, 0.5]
"#;

    #[test]
    fn parses_full_spec() {
        let spec = ExperimentSpec::parse(TABLE_ONE).unwrap();
        assert_eq!(spec.seed, 7);
        assert_eq!(spec.methods, vec![Method::Pis, Method::Et, Method::Ce]);
        assert_eq!(spec.config.mu(), &[0.5; 8]);
        assert_eq!(spec.samples.get(Method::Et), 1000);
        assert_eq!(spec.samples.get(Method::Mls), DEFAULT_MLS_PER_LEVEL);
        assert_eq!(spec.hyper, Hyper::default());
        let points = spec.points().unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[1].1.gamma_th(), 0.5);
    }

    #[test]
    fn empty_methods_is_line_referenced() {
        let text = TABLE_ONE.replace(r#"["pis", "et", "ce"]"#, "[]");
        let err = ExperimentSpec::parse(&text).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("empty"), "{err}");
    }

    #[test]
    fn rejects_bad_entries() {
        let bad_method = TABLE_ONE.replace(r#""ce""#, r#""xx""#);
        assert!(ExperimentSpec::parse(&bad_method)
            .unwrap_err()
            .to_string()
            .contains("line 3"));
        let bad_m = TABLE_ONE.replace("selected = 4", "selected = 9");
        assert!(ExperimentSpec::parse(&bad_m)
            .unwrap_err()
            .to_string()
            .contains("line 5"));
        let unsorted = TABLE_ONE.replace("[1.0, 0.5]", "[1.0, 0.5, 0.7]");
        assert!(ExperimentSpec::parse(&unsorted)
            .unwrap_err()
            .to_string()
            .contains("line 16"));
        let typo = TABLE_ONE.replace("gamma_th = 1.0", "gama_th = 1.0");
        assert!(ExperimentSpec::parse(&typo).is_err());
        let syntax = TABLE_ONE.replace("seed = 7", "seed = ");
        assert!(ExperimentSpec::parse(&syntax)
            .unwrap_err()
            .to_string()
            .contains("line 2"));
    }

    #[test]
    fn mu_sweep_needs_scalar_mu() {
        let text = TABLE_ONE
            .replace("mu = 0.5", "mu = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.6]")
            .replace(r#"axis = "gamma_th""#, r#"axis = "mu""#);
        assert!(ExperimentSpec::parse(&text).is_err());
    }

    #[test]
    fn inapplicable_method_becomes_error_row() {
        let text = r#"
methods = ["ce", "et"]
[config]
antennas = 2
selected = 1
mu = [0.5, 0.7]
gamma_th = 0.5
[samples]
default = 2000
"#;
        let spec = ExperimentSpec::parse(text).unwrap();
        let rows = execute(&spec, &RunOptions::default()).unwrap();
        assert!(rows[0].error.is_some() && rows[0].result.is_none());
        assert!(rows[1].error.is_none());
        let mut buf = Vec::new();
        write_run_csv(&rows, &mut buf, true).unwrap();
        let csv = String::from_utf8(buf).unwrap();
        assert!(csv
            .lines()
            .nth(1)
            .unwrap()
            .contains("error: CE requires identical means"));
    }

    #[test]
    fn csv_is_worker_independent_without_timing() {
        let spec =
            ExperimentSpec::parse(&TABLE_ONE.replace("default = 1000", "default = 20000")).unwrap();
        let mut outs = Vec::new();
        for workers in [1, 3] {
            let opts = RunOptions {
                workers,
                timing: false,
                ..RunOptions::default()
            };
            let rows = execute(&spec, &opts).unwrap();
            let mut buf = Vec::new();
            write_run_csv(&rows, &mut buf, false).unwrap();
            outs.push(buf);
        }
        assert_eq!(outs[0], outs[1]);
    }
}
