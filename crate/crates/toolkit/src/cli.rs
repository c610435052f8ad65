//! The `abps` command line. [`run`] holds all of it so tests can drive it
//! without spawning a process.
//!
//! Exit codes: 0 success, 1 a comparison or ordering check failed, 2 bad
//! input or a model that cannot be solved.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use abps_core::coverage::{
    apply_policy, classify, coverage_from_catalog, fallback_event, forecast, ApCatalog, CoverageError, Trajectory,
    DEFAULT_THRESHOLD_S,
};
use abps_core::lang::{compose, parse};
use abps_core::models::{build, evaluate, MetricsResult, Mode, Variant};
use abps_core::sim::{simulate_traced, Estimate, SimConfig, SimMetrics};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use crate::catalog::{load_fixture, CachedCatalog, RemoteCatalog};
use crate::crossval::{compare, replicate_parallel};
use crate::error::{Error, InputError};
use crate::format::sig6;
use crate::params_file::{parse_assignment, read_params, resolve_params};
use crate::sweep::{ordering_violations, parse_grid, records, run_sweep, write_csv};
use crate::trace::CsvTrace;
use crate::trajectory::read_trajectory;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "abps",
    version,
    about = "ABPS multi-NIC performance models, simulator and coverage oracle"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Plain,
    Oracle,
    Both,
}

impl VariantArg {
    pub fn variants(self) -> Vec<Variant> {
        match self {
            VariantArg::Plain => vec![Variant::Plain],
            VariantArg::Oracle => vec![Variant::Oracle],
            VariantArg::Both => Variant::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Idle connected UMTS draws 20% of its peak while WiFi is connected.
    Text,
    /// Reproduce the model listings exactly.
    Appendix,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Text => Mode::Text,
            ModeArg::Appendix => Mode::Appendix,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    /// Parameter override, e.g. `T_W_minus=10` or `gamma_U=1/500`. Repeatable.
    #[arg(long = "params", value_name = "KEY=VALUE", value_parser = parse_assignment)]
    pub params: Vec<(String, f64)>,
    /// File of `key = value` lines applied before `--params`.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Text)]
    pub mode: ModeArg,
}

#[derive(Args, Debug, Clone)]
pub struct SimArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 30)]
    pub reps: usize,
    /// Simulated seconds per replication.
    #[arg(long, default_value_t = 1e5)]
    pub duration: f64,
    /// Datagrams per second generated by the application; 0 disables traffic.
    #[arg(long, default_value_t = 50.0)]
    pub rate: f64,
    /// Client retransmission timeout (s).
    #[arg(long, default_value_t = 1.0)]
    pub ack_timeout: f64,
}

impl SimArgs {
    fn config(&self, mode: Mode) -> SimConfig {
        SimConfig {
            duration: self.duration,
            seed: self.seed,
            data_rate: self.rate,
            ack_timeout: self.ack_timeout,
            replications: self.reps,
            mode,
            ..SimConfig::default()
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve a model and print availability, power and throughput.
    Solve {
        /// Model file in the module language; defaults to the builtin chain.
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = VariantArg::Plain)]
        variant: VariantArg,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Evaluate a grid of WiFi connection durations and write CSV.
    Sweep {
        /// Axes as `tmin:5,10,20,40 tplus:40,80,120`.
        #[arg(long, num_args = 1..=2, value_name = "AXIS")]
        grid: Vec<String>,
        #[arg(long, value_enum, default_value_t = VariantArg::Both)]
        variant: VariantArg,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Check the plain-vs-oracle orderings and exit 1 on a violation.
        #[arg(long)]
        check: bool,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Run independent replications of the packet-level simulation and
    /// write per-replication metrics as CSV.
    Simulate {
        #[arg(long, value_enum, default_value_t = VariantArg::Both)]
        variant: VariantArg,
        #[command(flatten)]
        sim: SimArgs,
        /// Write the event trace of replication 0 as CSV (single variant only).
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Compare analytic metrics with simulated means at 3 standard errors.
    Compare {
        #[arg(long, value_enum, default_value_t = VariantArg::Both)]
        variant: VariantArg,
        #[command(flatten)]
        sim: SimArgs,
        /// Also compare the mean oracle-state residence times.
        #[arg(long)]
        sojourns: bool,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Classify WiFi coverage along a trajectory and print the NIC decisions.
    #[command(group(ArgGroup::new("source").required(true).args(["catalog", "catalog_url"])))]
    Oracle {
        /// Trajectory CSV `t,lat,lon[,speed]`.
        #[arg(long, value_name = "FILE")]
        trajectory: PathBuf,
        /// Catalog fixture CSV `essid,lat,lon,radius_m,group,open`.
        #[arg(long, value_name = "FILE")]
        catalog: Option<PathBuf>,
        /// Remote catalog endpoint; the token is read from ABPS_CATALOG_TOKEN.
        #[arg(long, value_name = "URL")]
        catalog_url: Option<String>,
        /// Coverage seconds at which WiFi counts as long.
        #[arg(long, default_value_t = DEFAULT_THRESHOLD_S)]
        threshold: f64,
        /// Catalog search radius around each sample (m).
        #[arg(long, default_value_t = 500.0)]
        search_radius: f64,
        /// Remote request timeout (s).
        #[arg(long, default_value_t = 5.0)]
        timeout: f64,
        /// Remote lookup cache lifetime (s).
        #[arg(long, default_value_t = 300.0)]
        cache_ttl: f64,
        /// Instead of the whole timeline, print the decision for the next
        /// HORIZON seconds, extrapolating the last two samples.
        #[arg(long, value_name = "HORIZON")]
        horizon: Option<f64>,
        /// Extrapolation step (s).
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Print the resolved parameters as a `key = value` file.
    Params {
        #[command(flatten)]
        params: ParamArgs,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_INPUT
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}

fn output(
    path: Option<&Path>,
    out: &mut dyn Write,
    f: &mut dyn FnMut(&mut dyn Write) -> Result<(), Error>,
) -> Result<(), Error> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| InputError::io(p, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(out),
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8, Error> {
    match command {
        Command::Solve { model, variant, params } => solve(model.as_deref(), variant, &params, out),
        Command::Sweep {
            grid,
            variant,
            out: path,
            check,
            params,
        } => {
            let grid = parse_grid(&grid)?;
            let p = resolve_params(params.mode.into(), params.config.as_deref(), &params.params)?;
            let rows = records(&run_sweep(&p, params.mode.into(), &grid, &variant.variants()));
            output(path.as_deref(), out, &mut |w| write_csv(w, &rows).map_err(csv_error))?;
            for r in rows.iter().filter(|r| r.metrics.is_err()) {
                writeln!(
                    err,
                    "warning: ({}, {}) {}: {}",
                    r.t_w_minus,
                    r.t_w_plus,
                    r.variant,
                    r.metrics.as_ref().unwrap_err()
                )?;
            }
            if check {
                let violations = ordering_violations(&rows, 0.0);
                for v in &violations {
                    writeln!(err, "ordering violated: {v}")?;
                }
                if !violations.is_empty() {
                    return Ok(EXIT_CHECK_FAILED);
                }
            }
            Ok(EXIT_OK)
        }
        Command::Simulate {
            variant,
            sim,
            trace,
            out: path,
            params,
        } => {
            let mode: Mode = params.mode.into();
            let p = resolve_params(mode, params.config.as_deref(), &params.params)?;
            let cfg = sim.config(mode);
            let variants = variant.variants();
            if let Some(tp) = &trace {
                let [v] = variants[..] else {
                    return Err(InputError::Invalid("--trace needs a single --variant".into()).into());
                };
                let file = File::create(tp).map_err(|e| InputError::io(tp, e))?;
                let mut sink = CsvTrace::new(BufWriter::new(file));
                simulate_traced(&p, &cfg, v, &mut sink)?;
                sink.finish().map_err(csv_error)?.flush()?;
            }
            let mut summaries = Vec::new();
            for v in variants {
                summaries.push((v, replicate_parallel(&p, &cfg, v)?));
            }
            output(path.as_deref(), out, &mut |w| {
                let mut c = csv::Writer::from_writer(w);
                c.write_record(SIM_HEADER).map_err(csv_error)?;
                for (v, s) in &summaries {
                    for (i, r) in s.runs.iter().enumerate() {
                        c.write_record(sim_row(*v, &i.to_string(), r)).map_err(csv_error)?;
                    }
                    let est = |f: &dyn Fn(&SimMetrics) -> f64| {
                        let xs: Vec<f64> = s.runs.iter().map(f).collect();
                        Estimate::from_samples(&xs).expect("non-empty")
                    };
                    let cols: Vec<Estimate> = SIM_COLUMNS.iter().map(|(_, f)| est(f)).collect();
                    for (label, pick) in [("mean", 0), ("std_error", 1)] {
                        let mut row = vec![v.name().to_string(), label.to_string()];
                        row.extend(cols.iter().map(|e| sig6(if pick == 0 { e.mean } else { e.std_error })));
                        c.write_record(row).map_err(csv_error)?;
                    }
                }
                c.flush()?;
                Ok(())
            })?;
            Ok(EXIT_OK)
        }
        Command::Compare {
            variant,
            sim,
            sojourns,
            params,
        } => {
            let mode: Mode = params.mode.into();
            let p = resolve_params(mode, params.config.as_deref(), &params.params)?;
            let cfg = sim.config(mode);
            let mut failed = false;
            writeln!(out, "variant,metric,analytic,sim_mean,sim_se,z,result")?;
            for v in variant.variants() {
                let (checks, _) = compare(&p, &cfg, v, sojourns)?;
                for c in checks {
                    failed |= !c.pass();
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        v,
                        c.metric,
                        sig6(c.reference),
                        sig6(c.estimate.mean),
                        sig6(c.estimate.std_error),
                        sig6(c.z()),
                        if c.pass() { "PASS" } else { "FAIL" }
                    )?;
                }
            }
            Ok(if failed { EXIT_CHECK_FAILED } else { EXIT_OK })
        }
        Command::Oracle {
            trajectory,
            catalog,
            catalog_url,
            threshold,
            search_radius,
            timeout,
            cache_ttl,
            horizon,
            step,
            out: path,
        } => {
            if !(threshold > 0.0 && threshold.is_finite()) {
                return Err(CoverageError::InvalidThreshold(threshold).into());
            }
            let traj = read_trajectory(&trajectory)?;
            let source: Box<dyn ApCatalog> = match (catalog, catalog_url) {
                (Some(f), _) => {
                    let load = load_fixture(&f)?;
                    if !load.skipped.is_empty() {
                        let lines: Vec<String> = load.skipped.iter().map(|s| s.line.to_string()).collect();
                        writeln!(
                            err,
                            "warning: skipped {} malformed catalog records (lines {})",
                            load.skipped.len(),
                            lines.join(", ")
                        )?;
                    }
                    Box::new(load.catalog)
                }
                (None, Some(url)) => {
                    let secs = |x: f64, what: &str| {
                        Duration::try_from_secs_f64(x).map_err(|_| InputError::Invalid(format!("invalid {what} {x}")))
                    };
                    Box::new(CachedCatalog::new(
                        RemoteCatalog::new(url, secs(timeout, "timeout")?),
                        secs(cache_ttl, "cache TTL")?,
                    ))
                }
                (None, None) => unreachable!("clap requires a catalog source"),
            };
            let rows = oracle_rows(&traj, source.as_ref(), threshold, search_radius, horizon, step, err)?;
            output(path.as_deref(), out, &mut |w| {
                let mut c = csv::Writer::from_writer(w);
                c.write_record([
                    "start",
                    "end",
                    "event",
                    "duration_s",
                    "active_WiFi",
                    "active_UMTS",
                    "essids",
                ])
                .map_err(csv_error)?;
                for r in &rows {
                    c.write_record(r).map_err(csv_error)?;
                }
                c.flush()?;
                Ok(())
            })?;
            Ok(EXIT_OK)
        }
        Command::Params { params } => {
            let p = resolve_params(params.mode.into(), params.config.as_deref(), &params.params)?;
            for (k, v) in p.entries() {
                writeln!(out, "{k} = {v}")?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Output(e),
        other => Error::Output(io::Error::other(format!("{other:?}"))),
    }
}

fn print_metrics(out: &mut dyn Write, title: &str, states: usize, m: &MetricsResult) -> Result<(), Error> {
    writeln!(out, "# {title}, {states} states")?;
    writeln!(out, "availability: {}", sig6(m.availability))?;
    writeln!(out, "power_W: {}", sig6(m.power))?;
    writeln!(out, "throughput_Mbps: {}", sig6(m.throughput))?;
    Ok(())
}

fn solve(model: Option<&Path>, variant: VariantArg, args: &ParamArgs, out: &mut dyn Write) -> Result<u8, Error> {
    if let Some(path) = model {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| InputError::io(path, e))?;
        let spec = parse(&text).map_err(|e| InputError::Invalid(format!("{name}: {e}")))?;
        // model constants are bound by their exact names
        let mut bindings = BTreeMap::new();
        if let Some(f) = &args.config {
            bindings.extend(read_params(f)?);
        }
        bindings.extend(args.params.iter().cloned());
        let chain = compose(&spec, &bindings).map_err(|e| InputError::Invalid(format!("{name}: {e}")))?;
        let m = evaluate(&chain)?;
        print_metrics(out, &name, chain.n_states(), &m)?;
        return Ok(EXIT_OK);
    }
    let mode: Mode = args.mode.into();
    let p = resolve_params(mode, args.config.as_deref(), &args.params)?;
    for (i, v) in variant.variants().into_iter().enumerate() {
        let chain = build(&p, v, mode)?;
        let m = evaluate(&chain)?;
        if i > 0 {
            writeln!(out)?;
        }
        print_metrics(out, &format!("{v}, {} mode", mode.name()), chain.n_states(), &m)?;
    }
    Ok(EXIT_OK)
}

type Column = (&'static str, fn(&SimMetrics) -> f64);

const SIM_COLUMNS: [Column; 9] = [
    ("availability", |r| r.availability),
    ("power_W", |r| r.power),
    ("throughput_Mbps", |r| r.state_throughput),
    ("goodput_Mbps", |r| r.goodput),
    ("sojourn_O_U_s", |r| r.oracle_sojourn[0].mean().unwrap_or(f64::NAN)),
    ("sojourn_O_UW_s", |r| r.oracle_sojourn[1].mean().unwrap_or(f64::NAN)),
    ("sojourn_O_W_s", |r| r.oracle_sojourn[2].mean().unwrap_or(f64::NAN)),
    ("retransmissions", |r| r.retransmissions as f64),
    ("duplicates", |r| r.duplicates as f64),
];

const SIM_HEADER: [&str; 11] = [
    "variant",
    "replication",
    SIM_COLUMNS[0].0,
    SIM_COLUMNS[1].0,
    SIM_COLUMNS[2].0,
    SIM_COLUMNS[3].0,
    SIM_COLUMNS[4].0,
    SIM_COLUMNS[5].0,
    SIM_COLUMNS[6].0,
    SIM_COLUMNS[7].0,
    SIM_COLUMNS[8].0,
];

fn sim_row(v: Variant, label: &str, r: &SimMetrics) -> Vec<String> {
    let mut row = vec![v.name().to_string(), label.to_string()];
    row.extend(SIM_COLUMNS.iter().map(|(_, f)| sig6(f(r))));
    row
}

fn flag(b: bool) -> String {
    b.to_string()
}

fn oracle_rows(
    traj: &Trajectory,
    catalog: &dyn ApCatalog,
    threshold: f64,
    search_radius: f64,
    horizon: Option<f64>,
    step: f64,
    err: &mut dyn Write,
) -> Result<Vec<Vec<String>>, Error> {
    let row = |start: f64, end: Option<f64>, ev: &abps_core::coverage::CoverageEvent| {
        let flags = apply_policy(ev.kind);
        vec![
            sig6(start),
            end.map(sig6).unwrap_or_default(),
            ev.kind.name().to_string(),
            ev.duration.map(sig6).unwrap_or_default(),
            flag(flags.active_wifi),
            flag(flags.active_umts),
            ev.essids.join(";"),
        ]
    };
    if let Some(h) = horizon {
        let ev = forecast(traj, catalog, h, step, search_radius, threshold)?;
        return Ok(vec![row(ev.timestamp, ev.duration.map(|d| ev.timestamp + d), &ev)]);
    }
    if traj.len() < 2 {
        return Err(InputError::Invalid("trajectory needs at least two samples".into()).into());
    }
    let timeline = match coverage_from_catalog(traj, catalog, search_radius) {
        Ok(t) => t,
        Err(CoverageError::CatalogUnavailable(e)) => {
            writeln!(err, "warning: catalog unavailable ({e}); keeping both NICs on")?;
            let start = traj.start().expect("non-empty");
            return Ok(vec![row(start, traj.end(), &fallback_event(start))]);
        }
        Err(e) => return Err(e.into()),
    };
    let events = classify(&timeline, threshold)?;
    Ok(timeline
        .intervals
        .iter()
        .zip(&events)
        .map(|(iv, ev)| row(iv.start, Some(iv.end), ev))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (u8, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("abps").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn solve_builtin() {
        let (code, out, _) = call(&["solve", "--variant", "both"]);
        assert_eq!(code, 0);
        assert!(out.contains("# plain, text mode, 48 states"), "{out}");
        assert!(out.contains("# oracle, text mode, 24 states"), "{out}");
        assert_eq!(out.matches("availability: ").count(), 2);
    }

    #[test]
    fn bad_flags_are_input_errors() {
        assert_eq!(call(&["solve", "--variant", "nope"]).0, 2);
        assert_eq!(call(&["solve", "--params", "alpha_U"]).0, 2);
        assert_eq!(call(&["solve", "--params", "bogus=1"]).0, 2);
        assert_eq!(call(&["sweep", "--grid", "tmin:x"]).0, 2);
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn unsolvable_point_is_input_error() {
        let (code, _, err) = call(&["solve", "--params", "T_W_minus=100"]);
        assert_eq!(code, 2);
        assert!(err.contains("T_W"), "{err}");
    }

    #[test]
    fn params_listing_round_trips() {
        let (code, out, _) = call(&["params", "--params", "gamma_U=1/500"]);
        assert_eq!(code, 0);
        let kv = crate::params_file::parse_params(&out, "-").unwrap();
        assert!(kv.contains(&("gamma_U".to_string(), 1.0 / 500.0)));
        assert!(kv.iter().any(|(k, _)| k == "e_W_3"));
    }

    #[test]
    fn degenerate_compare() {
        let (code, out, _) = call(&["compare", "--reps", "1", "--duration", "100"]);
        assert_eq!(code, 0, "{out}");
        assert_eq!(out.lines().count(), 7);
        assert!(
            out.lines().skip(1).all(|l| l.contains(",inf,") && l.ends_with("PASS")),
            "{out}"
        );
    }
}
