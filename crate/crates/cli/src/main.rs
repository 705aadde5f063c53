//! `peakon-lab`: evaluate, verify and export the peakon-antipeakon solution.

mod table;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use peakon_core::eulerian::eval_u;
use peakon_core::lagrangian::{adapted_grid, peak_labels, profile};
use peakon_core::measures::{mu_at, nu_at};
use peakon_core::oracle::{run_post_leg, run_pre_leg, IntegratorSettings, LegReport, TraceWriter};
use peakon_core::verify::{verify, VerifyOptions};
use peakon_core::{Config, PeakonError};

use table::{Cell, Format, Table};

const THREADS_VAR: &str = "PEAKON_LAB_THREADS";

#[derive(Parser)]
#[command(
    name = "peakon-lab",
    version,
    about = "Peakon-antipeakon solutions of the Camassa-Holm equation before, at and after wave breaking",
    after_help = "Exit codes: 0 ok, 1 invariant failure or runtime error, 2 usage error.\n\
                  PEAKON_LAB_THREADS caps the number of worker threads.\n\
                  Numbers are written with 17 significant digits; JSON output is an array of\n\
                  objects with the same keys as the CSV header."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct ConfigArgs {
    /// Peakon strength, > 0
    #[arg(long, default_value_t = 0.8, allow_negative_numbers = true)]
    c1: f64,
    /// Antipeakon strength, < 0
    #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
    c2: f64,
    /// Breaking time, > 0
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    t0: f64,
    /// Fraction of the concentrated energy removed at breaking, in [0, 1]
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    alpha: f64,
}

#[derive(Args, Clone, Copy)]
struct GridArgs {
    /// Left end of the x (or xi) grid
    #[arg(long, default_value_t = -6.0, allow_negative_numbers = true)]
    xmin: f64,
    /// Right end of the x (or xi) grid
    #[arg(long, default_value_t = 6.0, allow_negative_numbers = true)]
    xmax: f64,
    /// Number of grid nodes, >= 2
    #[arg(long, default_value_t = 401)]
    nx: usize,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Output file; standard output when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Clone)]
struct TimesArg {
    /// Comma-separated, nondecreasing list of times
    #[arg(long, required = true, value_delimiter = ',', allow_hyphen_values = true)]
    times: Vec<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate u and u_x on an x grid.
    #[command(after_help = "Columns: t,x,u,u_x")]
    EvalU {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        times: TimesArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evaluate the Lagrangian variables on a xi grid (--xmin/--xmax/--nx).
    #[command(after_help = "Columns: t,xi,y,y_xi,U,U_xi,h,h_bar")]
    EvalLagrangian {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        times: TimesArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sample the energy measures mu and nu.
    #[command(after_help = "Columns: t,kind,x,mu,nu\n\
                            kind = density: absolutely continuous densities at x;\n\
                            kind = atom: masses of the atoms located at x.")]
    Measures {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        times: TimesArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run every invariant suite and report measured residuals.
    #[command(after_help = "Columns: module,check,residual,tolerance,status\n\
                            Rows with module = summary carry the headline values in the residual column.")]
    Verify {
        #[command(flatten)]
        config: ConfigArgs,
        /// Time step of the oracle integration
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Label nodes of the oracle integration
        #[arg(long, default_value_t = 2000)]
        nodes: usize,
        /// Seed of the random sample points
        #[arg(long, default_value_t = VerifyOptions::default().seed)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Integrate the Lagrangian ODE system on both sides of breaking and compare with the closed form.
    #[command(after_help = "Columns: leg,alpha,t_start,t_end,steps,max_error_y,max_error_U\n\
                            Trace columns: t,xi,y,U,h,h_bar")]
    OracleCompare {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 2000)]
        nodes: usize,
        /// End of the post-breaking leg; t0 + 1 when omitted
        #[arg(long, allow_negative_numbers = true)]
        t_end: Option<f64>,
        /// Failure threshold on the sup-norm errors
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Write the integrated states as CSV
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Keep every n-th state in the trace
        #[arg(long, default_value_t = 50)]
        stride: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Export the data behind the four figures into a directory.
    #[command(after_help = "Files:\n  \
                            u.{csv,json}               t,x,u        t in {-1.5, t0, 3}\n  \
                            U.{csv,json}               t,xi,U       t in {-0.8, t0, 2}\n  \
                            characteristics.{csv,json} xi,t,y       five labels, t in [-3, 4]\n  \
                            measures.{csv,json}        t,kind,x,mu,nu  t in {-3, 4}")]
    Figures {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Output directory
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Invariant(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<PeakonError> for Failure {
    fn from(e: PeakonError) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

impl ConfigArgs {
    fn build(&self) -> std::result::Result<Config, Failure> {
        Config::new(self.c1, self.c2, self.t0, self.alpha).map_err(|e| usage(e.to_string()))
    }
}

impl GridArgs {
    fn build(&self) -> std::result::Result<Vec<f64>, Failure> {
        if !(self.xmin.is_finite() && self.xmax.is_finite() && self.xmin < self.xmax) {
            return Err(usage(format!(
                "grid range must be finite with xmin < xmax, got [{}, {}]",
                self.xmin, self.xmax
            )));
        }
        if self.nx < 2 {
            return Err(usage(format!("--nx must be at least 2, got {}", self.nx)));
        }
        Ok(linspace(self.xmin, self.xmax, self.nx))
    }
}

impl TimesArg {
    fn build(&self) -> std::result::Result<&[f64], Failure> {
        if self.times.is_empty() {
            return Err(usage("--times must list at least one time"));
        }
        if self.times.iter().any(|t| !t.is_finite()) {
            return Err(usage("--times must be finite"));
        }
        if self.times.windows(2).any(|w| w[1] < w[0]) {
            return Err(usage("--times must be sorted in nondecreasing order"));
        }
        Ok(&self.times)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
        .collect()
}

fn emit(table: &Table, output: &OutputArgs) -> Outcome {
    match &output.out {
        Some(path) => write_file(table, path, output.format),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            table.write(&mut lock, output.format)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn write_file(table: &Table, path: &Path, format: Format) -> Outcome {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    table.write(&mut w, format)?;
    w.flush()?;
    Ok(())
}

fn u_table(cfg: &Config, times: &[f64], xs: &[f64], with_slope: bool) -> Table {
    let mut table = if with_slope {
        Table::new(&["t", "x", "u", "u_x"])
    } else {
        Table::new(&["t", "x", "u"])
    };
    for &t in times {
        for &x in xs {
            let mut row = vec![t.into(), x.into(), eval_u(cfg, t, x).into()];
            if with_slope {
                row.push(peakon_core::eulerian::eval_ux(cfg, t, x).into());
            }
            table.push(row);
        }
    }
    table
}

fn lagrangian_table(cfg: &Config, times: &[f64], labels: &[f64]) -> std::result::Result<Table, Failure> {
    let mut table = Table::new(&["t", "xi", "y", "y_xi", "U", "U_xi", "h", "h_bar"]);
    for &t in times {
        for &xi in labels {
            let s = profile(cfg, t, xi)?;
            table.push(vec![
                t.into(),
                xi.into(),
                s.y.into(),
                s.y_xi.into(),
                s.u.into(),
                s.u_xi.into(),
                s.h.into(),
                s.h_bar.into(),
            ]);
        }
    }
    Ok(table)
}

fn measures_table(cfg: &Config, times: &[f64], xs: &[f64]) -> Table {
    let mut table = Table::new(&["t", "kind", "x", "mu", "nu"]);
    for &t in times {
        let (mu, nu) = (mu_at(cfg, t), nu_at(cfg, t));
        for &x in xs {
            table.push(vec![t.into(), "density".into(), x.into(), mu.density_at(x).into(), nu.density_at(x).into()]);
        }
        let mut sites: Vec<f64> = mu.atoms().iter().chain(nu.atoms()).map(|a| a.x).collect();
        sites.sort_by(f64::total_cmp);
        sites.dedup();
        for x in sites {
            table.push(vec![t.into(), "atom".into(), x.into(), mu.atom_mass_at(x).into(), nu.atom_mass_at(x).into()]);
        }
    }
    table
}

fn run_verify(cfg: &Config, dt: f64, nodes: usize, seed: u64, output: &OutputArgs) -> Outcome {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(usage(format!("--dt must be finite and > 0, got {dt}")));
    }
    if nodes < 16 {
        return Err(usage(format!("--nodes must be at least 16, got {nodes}")));
    }
    let report = verify(cfg, &VerifyOptions { seed, oracle_dt: dt, oracle_nodes: nodes })?;
    let mut table = Table::new(&["module", "check", "residual", "tolerance", "status"]);
    for c in &report.checks {
        let status = match (&c.error, c.passed) {
            (Some(e), _) => format!("error: {e}"),
            (None, true) => "pass".into(),
            (None, false) => "FAIL".into(),
        };
        table.push(vec![c.module.into(), c.check.clone().into(), c.residual.into(), c.tolerance.into(), status.into()]);
    }
    for (name, value) in [
        ("E2 (energy quadrature at t = 0)", report.summary.e2),
        ("atom of nu at t0", report.summary.breaking_atom),
        ("removed energy ∫(h - h_bar)", report.summary.removed),
    ] {
        table.push(vec!["summary".into(), name.into(), value.into(), Cell::Empty, "info".into()]);
    }
    emit(&table, output)?;
    let failed: Vec<String> = report
        .failures()
        .map(|c| {
            format!(
                "invariant failed: {}: {}: residual {} exceeds tolerance {}",
                c.module,
                c.check,
                table::number(c.residual),
                table::number(c.tolerance)
            )
        })
        .collect();
    eprintln!(
        "{} of {} checks passed; E2 = {}, atom = {}, removed = {}",
        report.checks.len() - failed.len(),
        report.checks.len(),
        table::number(report.summary.e2),
        table::number(report.summary.breaking_atom),
        table::number(report.summary.removed),
    );
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(failed.join("\n")))
    }
}

#[allow(clippy::too_many_arguments)]
fn run_oracle(
    cfg: &Config,
    dt: f64,
    nodes: usize,
    t_end: Option<f64>,
    tol: f64,
    trace: Option<&Path>,
    stride: usize,
    output: &OutputArgs,
) -> Outcome {
    let settings = IntegratorSettings { dt, ..Default::default() };
    settings.validate().map_err(|e| usage(e.to_string()))?;
    if nodes < 16 {
        return Err(usage(format!("--nodes must be at least 16, got {nodes}")));
    }
    let t0 = cfg.t0();
    let t_end = t_end.unwrap_or(t0 + 1.0);
    if !(t_end > t0 + settings.breaking_guard) {
        return Err(usage(format!("--t-end must exceed t0 + {}", settings.breaking_guard)));
    }
    let pre_end = t0 - settings.breaking_guard;
    let (pre_grid, post_grid) = (adapted_grid(cfg, pre_end, nodes)?, adapted_grid(cfg, t_end, nodes)?);
    let (pre, _) = run_pre_leg(cfg, &pre_grid, &settings, 10)?;
    let (post, _) = run_post_leg(cfg, &post_grid, t_end, &settings, 10)?;
    if let Some(path) = trace {
        // the legs above only keep error maxima, so the traced run is repeated
        write_trace(cfg, path, &pre_grid, &post_grid, &settings, stride, t_end)?;
    }
    let mut table = Table::new(&["leg", "alpha", "t_start", "t_end", "steps", "max_error_y", "max_error_U"]);
    let row = |name: &str, r: &LegReport| {
        vec![
            name.into(),
            r.alpha.into(),
            r.t_start.into(),
            r.t_end.into(),
            r.steps.into(),
            r.max_error_y.into(),
            r.max_error_u.into(),
        ]
    };
    table.push(row("before_breaking", &pre));
    table.push(row("after_breaking", &post));
    emit(&table, output)?;
    let mut failed = Vec::new();
    for (name, r) in [("before breaking", &pre), ("after breaking", &post)] {
        let err = r.max_error_y.max(r.max_error_u);
        if !(err <= tol) {
            failed.push(format!(
                "invariant failed: oracle vs closed form {name}: residual {} exceeds tolerance {}",
                table::number(err),
                table::number(tol)
            ));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(failed.join("\n")))
    }
}

fn write_trace(
    cfg: &Config,
    path: &Path,
    pre_grid: &[f64],
    post_grid: &[f64],
    settings: &IntegratorSettings,
    stride: usize,
    t_end: f64,
) -> Outcome {
    use peakon_core::lagrangian::sample_profile;
    use peakon_core::oracle::{apply_breaking, initial_state, integrate};

    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut trace = TraceWriter::new(BufWriter::new(file), stride)?;
    let record = |trace: &mut TraceWriter<BufWriter<File>>, p: &peakon_core::LagrangianProfile| {
        trace.record(p).map_err(|e| PeakonError::Grid(format!("trace: {e}")))
    };
    let start = initial_state(cfg, pre_grid)?;
    integrate(&start, cfg.t0() - settings.breaking_guard, settings.dt, false, |p| record(&mut trace, p))?;
    let at = apply_breaking(&sample_profile(cfg, cfg.t0(), post_grid)?, cfg.alpha())?;
    integrate(&at, t_end, settings.dt, true, |p| record(&mut trace, p))?;
    trace.into_inner().flush()?;
    Ok(())
}

fn run_figures(cfg: &Config, grid: &GridArgs, dir: &Path, format: Format) -> Outcome {
    let xs = grid.build()?;
    let t0 = cfg.t0();
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let file = |stem: &str| dir.join(format!("{stem}.{}", format.extension()));

    write_file(&u_table(cfg, &[-1.5, t0, 3.0], &xs, false), &file("u"), format)?;

    let (a, b) = peak_labels(cfg);
    let labels = linspace(a - 4.0, b + 4.0, grid.nx.max(2));
    let mut big_u = Table::new(&["t", "xi", "U"]);
    for t in [-0.8, t0, 2.0] {
        for &xi in &labels {
            big_u.push(vec![t.into(), xi.into(), profile(cfg, t, xi)?.u.into()]);
        }
    }
    write_file(&big_u, &file("U"), format)?;

    let mut chars = Table::new(&["xi", "t", "y"]);
    let span = (b - a).max(1e-3);
    let picks = [a - 0.75 * span, a + 0.2 * span, 0.5 * (a + b), b - 0.2 * span, b + 0.75 * span];
    for xi in picks {
        for t in linspace(-3.0, 4.0, 701) {
            chars.push(vec![xi.into(), t.into(), profile(cfg, t, xi)?.y.into()]);
        }
    }
    write_file(&chars, &file("characteristics"), format)?;

    write_file(&measures_table(cfg, &[-3.0, 4.0], &xs), &file("measures"), format)?;
    eprintln!("wrote u, U, characteristics, measures to {}", dir.display());
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::EvalU { config, grid, times, output } => {
            let cfg = config.build()?;
            let (xs, times) = (grid.build()?, times.build()?);
            emit(&u_table(&cfg, times, &xs, true), &output)
        }
        Command::EvalLagrangian { config, grid, times, output } => {
            let cfg = config.build()?;
            let (labels, times) = (grid.build()?, times.build()?);
            emit(&lagrangian_table(&cfg, times, &labels)?, &output)
        }
        Command::Measures { config, grid, times, output } => {
            let cfg = config.build()?;
            let (xs, times) = (grid.build()?, times.build()?);
            emit(&measures_table(&cfg, times, &xs), &output)
        }
        Command::Verify { config, dt, nodes, seed, output } => run_verify(&config.build()?, dt, nodes, seed, &output),
        Command::OracleCompare { config, dt, nodes, t_end, tol, trace, stride, output } => {
            run_oracle(&config.build()?, dt, nodes, t_end, tol, trace.as_deref(), stride, &output)
        }
        Command::Figures { config, grid, out, format } => run_figures(&config.build()?, &grid, &out, format),
    }
}

fn configure_threads() -> std::result::Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => Cli::command().error(ErrorKind::ValueValidation, msg).exit(),
        Err(Failure::Invariant(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
