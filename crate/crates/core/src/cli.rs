//! Command-line front end: instance generation, solves, localization and the
//! two experiment suites. [`run`] returns the process exit code.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::locate::{self, LocalizationResult};
use crate::model::{self, from_rows, rows_of, GenerateParams, Instance};
use crate::relax::FormKind;
use crate::solve::{self, CliqueMode, Certificate, Solution, SolveOptions, SolverConfig, Status};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Environment variable capping the number of seeds solved in parallel.
pub const THREADS_ENV: &str = "EDM_SNL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "edm-snl", version, about = "Sensor network localization by EDM completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a random instance and write it as JSON.
    Generate {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Solve the relaxation of an instance file.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Extract positions with both methods and report the three measures.
    Locate {
        instance: PathBuf,
        /// A `solution.json` written by `solve`; the instance is solved when
        /// omitted.
        #[arg(long)]
        solution: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a suite over several seeds.
    Experiment {
        #[arg(long, value_enum)]
        suite: Suite,
        #[command(flatten)]
        instance: InstanceArgs,
        /// Comma separated seeds or ranges, e.g. `1-7` or `1,4,9`.
        #[arg(long)]
        seeds: String,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    EstimateMethods,
    CompareBarriers,
    Single,
}

#[derive(Debug, Clone, Args)]
struct InstanceArgs {
    #[arg(long)]
    r: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    /// Radio range; `inf` for unlimited.
    #[arg(long, default_value_t = 0.15)]
    range: f64,
    #[arg(long, default_value_t = 0.75)]
    density: f64,
    /// Multiplicative distance noise level.
    #[arg(long = "sigma-noise", default_value_t = 0.05)]
    sigma_noise: f64,
    #[arg(long = "half-width", default_value_t = 0.075)]
    half_width: f64,
    /// Add lower bounds for pairs out of radio range.
    #[arg(long)]
    range_bounds: bool,
}

impl InstanceArgs {
    fn params(&self, seed: u64) -> GenerateParams {
        GenerateParams {
            r: self.r,
            n: self.n,
            m: self.m,
            radio_range: self.range,
            density: self.density,
            noise_sigma: self.sigma_noise,
            square_half_width: self.half_width,
            seed,
            out_of_range_bounds: self.range_bounds,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct SolverArgs {
    #[arg(long, default_value_t = FormKind::Quadratic)]
    form: FormKind,
    /// `none`, `auto`, or a JSON file holding a list of sensor index lists.
    #[arg(long, default_value = "none")]
    cliques: String,
    /// Smallest clique accepted by `--cliques auto` (default `r + 2`).
    #[arg(long)]
    min_clique_size: Option<usize>,
    #[arg(long)]
    gap_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    ftb: Option<f64>,
    #[arg(long)]
    crossover_gap: Option<f64>,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        let cfg = SolverConfig {
            gap_tol: self.gap_tol.unwrap_or(d.gap_tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            sigma: self.sigma.unwrap_or(d.sigma),
            ftb: self.ftb.unwrap_or(d.ftb),
            crossover_gap: self.crossover_gap.unwrap_or(d.crossover_gap),
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn clique_mode(&self, r: usize) -> Result<CliqueMode> {
        Ok(match self.cliques.as_str() {
            "none" => CliqueMode::None,
            "auto" => CliqueMode::Auto { min_size: self.min_clique_size.unwrap_or(r + 2) },
            path => {
                let text = fs::read_to_string(path)?;
                CliqueMode::Given(serde_json::from_str(&text)?)
            }
        })
    }

    fn options(&self, inst: &Instance) -> Result<SolveOptions> {
        let cliques = match (&inst.cliques, self.cliques.as_str()) {
            (Some(c), "none") => CliqueMode::Given(c.clone()),
            _ => self.clique_mode(inst.r)?,
        };
        Ok(SolveOptions { form: self.form, cliques, config: self.config()? })
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Csv(_) | Error::Parse(_) | Error::FormatVersion { .. } | Error::InvalidInstance(_) => {
            EXIT_IO
        }
        Error::InvalidParameter(_)
        | Error::ConnectivityUnreachable { .. }
        | Error::InvalidClique(_)
        | Error::ContradictoryBounds(_) => EXIT_USAGE,
        Error::Dimension(_)
        | Error::RankDeficientAnchors { .. }
        | Error::NotEdm { .. }
        | Error::InconsistentClique { .. }
        | Error::Numerical(_) => EXIT_NUMERICAL,
    }
}

/// Parses `1-7`, `3,5,8` and mixtures; an empty list is an error.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = |s: &str| Error::InvalidParameter(format!("bad seed list entry `{s}`"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad(part))?;
                let b: u64 = b.trim().parse().map_err(|_| bad(part))?;
                if a > b {
                    return Err(bad(part));
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad(part))?),
        }
    }
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("at least one seed is required".into()));
    }
    Ok(seeds)
}

/// Mean and sample standard deviation (`n - 1` in the denominator; zero for a
/// single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

#[derive(Debug, Serialize, Deserialize)]
struct SolutionFile {
    form: String,
    status: Status,
    objective: f64,
    relgap: f64,
    iterations: usize,
    reduced_order: usize,
    anchor_only_order: usize,
    cliques: Vec<Vec<usize>>,
    certificate: Certificate,
    message: Option<String>,
    /// Optimal Gram matrix over all nodes (sensors first), row-major.
    gram: Vec<Vec<f64>>,
}

impl SolutionFile {
    fn new(sol: &Solution) -> Self {
        SolutionFile {
            form: sol.form.to_string(),
            status: sol.status,
            objective: sol.objective,
            relgap: sol.relgap,
            iterations: sol.iterations(),
            reduced_order: sol.reduced_order,
            anchor_only_order: sol.anchor_only_order,
            cliques: sol.cliques.clone(),
            certificate: sol.certificate,
            message: sol.message.clone(),
            gram: rows_of(&sol.ybar),
        }
    }

    fn gram(&self, order: usize) -> Result<DMatrix<f64>> {
        if self.gram.len() != order {
            return Err(Error::InvalidInstance(format!(
                "solution Gram matrix has order {}, instance needs {order}",
                self.gram.len()
            )));
        }
        from_rows("gram", &self.gram, order)
    }
}

fn status_code(status: Status) -> i32 {
    match status {
        Status::Converged => EXIT_OK,
        Status::MaxIter | Status::NumericalFailure => EXIT_NUMERICAL,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Generate { instance, seed, out: dir } => cmd_generate(&instance, seed, &dir, out),
        Command::Solve { instance, solver, out: dir } => cmd_solve(&instance, &solver, &dir, out),
        Command::Locate { instance, solution, solver, out: dir } => {
            cmd_locate(&instance, solution.as_deref(), &solver, &dir, out)
        }
        Command::Experiment { suite, instance, seeds, solver, out: dir } => {
            let seeds = parse_seeds(&seeds)?;
            solver.config()?;
            cmd_experiment(suite, &instance, &seeds, &solver, &dir, out, err)
        }
    }
}

fn cmd_generate(args: &InstanceArgs, seed: u64, dir: &Path, out: &mut dyn Write) -> Result<i32> {
    let inst = model::generate(&args.params(seed))?;
    fs::create_dir_all(dir)?;
    let path = dir.join("instance.json");
    write_atomic(&path, format!("{}\n", inst.to_json()?).as_bytes())?;
    let pe = model::build_partial_edm(&inst)?;
    let tmp = dir.join(".edm.csv.tmp");
    pe.write_csv(&tmp)?;
    fs::rename(&tmp, dir.join("edm.csv"))?;
    writeln!(out, "wrote {}", path.display())?;
    writeln!(out, "r = {}, n = {}, m = {}, seed = {} (requested {seed})", inst.r, inst.n, inst.m, inst.seed)?;
    writeln!(out, "sensor-sensor edges: {}", inst.sensor_sensor_edges())?;
    writeln!(out, "sensor-anchor edges: {}", inst.sensor_anchor_edges())?;
    writeln!(out, "connected: {}", if inst.is_connected() { "yes" } else { "no" })?;
    Ok(EXIT_OK)
}

fn solve_file(path: &Path, args: &SolverArgs) -> Result<(Instance, Solution)> {
    let inst = model::load_instance(path)?;
    let sol = solve::solve_instance(&inst, &args.options(&inst)?)?;
    Ok((inst, sol))
}

fn write_solution(sol: &Solution, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(&SolutionFile::new(sol))?;
    write_atomic(&dir.join("solution.json"), format!("{json}\n").as_bytes())?;
    let trace = csv_bytes(|b| solve::write_trace_csv(&sol.trace, b))?;
    write_atomic(&dir.join("trace.csv"), &trace)
}

fn cmd_solve(path: &Path, args: &SolverArgs, dir: &Path, out: &mut dyn Write) -> Result<i32> {
    let (_, sol) = solve_file(path, args)?;
    write_solution(&sol, dir)?;
    writeln!(out, "form: {}", sol.form)?;
    writeln!(out, "status: {}", sol.status)?;
    writeln!(out, "iterations: {}", sol.iterations())?;
    writeln!(out, "objective: {:.6e}", sol.objective)?;
    writeln!(out, "relative gap: {:.3e}", sol.relgap)?;
    writeln!(out, "sensor cliques: {}", sol.cliques.len())?;
    writeln!(out, "reduced order: {} (anchor face only: {})", sol.reduced_order, sol.anchor_only_order)?;
    if let Some(msg) = &sol.message {
        writeln!(out, "message: {msg}")?;
    }
    Ok(status_code(sol.status))
}

fn locate_gram(inst: &Instance, gram: &DMatrix<f64>) -> Result<[LocalizationResult; 2]> {
    let pe = model::build_partial_edm(inst)?;
    locate::locate_both(gram, &inst.anchors, &pe, inst.x_true.as_ref())
}

fn write_positions(inst: &Instance, res: &[LocalizationResult; 2], dir: &Path) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut wtr = csv::Writer::from_writer(&mut buf);
        let mut header = vec!["method".to_string(), "node".to_string(), "kind".to_string()];
        header.extend((1..=inst.r).map(|k| format!("x{k}")));
        wtr.write_record(&header)?;
        for r in res {
            let blocks = [("sensor", &r.x_est, 0), ("anchor", &r.a_est, inst.n)];
            for (kind, pts, offset) in blocks {
                let pts = locate::translate_back(pts, &inst.translation);
                for (i, row) in pts.row_iter().enumerate() {
                    let mut rec = vec![r.method.to_string(), (offset + i).to_string(), kind.to_string()];
                    rec.extend(row.iter().map(|v| format!("{v:.17e}")));
                    wtr.write_record(&rec)?;
                }
            }
        }
        wtr.flush()?;
    }
    write_atomic(&dir.join("positions.csv"), &buf)
}

fn cmd_locate(
    path: &Path,
    solution: Option<&Path>,
    args: &SolverArgs,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<i32> {
    let (inst, gram, code) = match solution {
        Some(sp) => {
            let inst = model::load_instance(path)?;
            let file: SolutionFile = serde_json::from_str(&fs::read_to_string(sp)?)?;
            let g = file.gram(inst.n + inst.m)?;
            (inst, g, status_code(file.status))
        }
        None => {
            let (inst, sol) = solve_file(path, args)?;
            write_solution(&sol, dir)?;
            let code = status_code(sol.status);
            (inst, sol.ybar, code)
        }
    };
    let res = locate_gram(&inst, &gram)?;
    fs::create_dir_all(dir)?;
    let id = format!("seed-{}", inst.seed);
    let rows: Vec<(String, LocalizationResult)> = res.iter().map(|r| (id.clone(), r.clone())).collect();
    write_atomic(&dir.join("results.csv"), &csv_bytes(|b| locate::write_results_csv(&rows, b))?)?;
    write_positions(&inst, &res, dir)?;
    for r in &res {
        let m2 = r.measures.m2.map_or_else(|| "NA".to_string(), |v| format!("{v:.4e}"));
        writeln!(
            out,
            "method {}: measure1 {:.4e}, measure2 {m2}, measure3 {:.4e}",
            r.method, r.measures.m1, r.measures.m3
        )?;
    }
    Ok(code)
}

/// Thread pool sized by [`THREADS_ENV`] when set to a positive integer.
fn seed_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let k: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&k| k > 0)
            .ok_or_else(|| Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        b = b.num_threads(k);
    }
    b.build().map_err(|e| Error::InvalidParameter(e.to_string()))
}

// One value per seed, collected once; boxing would buy nothing.
#[allow(clippy::large_enum_variant)]
enum SeedOutcome {
    Methods { id: String, res: [LocalizationResult; 2], diff: f64 },
    Barriers { runs: Vec<Solution> },
    Single { id: String, sol: Solution, res: [LocalizationResult; 2] },
}

fn run_seed(suite: Suite, inst_args: &InstanceArgs, seed: u64, solver: &SolverArgs) -> Result<SeedOutcome> {
    let inst = model::generate(&inst_args.params(seed))?;
    let id = format!("seed-{seed}");
    let converged = |sol: &Solution| -> Result<()> {
        if sol.status != Status::Converged {
            return Err(Error::Numerical(format!("{} solve ended with status {}", sol.form, sol.status)));
        }
        Ok(())
    };
    match suite {
        Suite::EstimateMethods => {
            let sol = solve::solve_instance(&inst, &solver.options(&inst)?)?;
            converged(&sol)?;
            let res = locate_gram(&inst, &sol.ybar)?;
            let diff = (&res[0].x_est - &res[1].x_est).norm();
            Ok(SeedOutcome::Methods { id, res, diff })
        }
        Suite::CompareBarriers => {
            let mut runs = Vec::new();
            for form in [FormKind::Quadratic, FormKind::Linearized] {
                let opts = SolveOptions { form, ..solver.options(&inst)? };
                runs.push(solve::solve_instance(&inst, &opts)?);
            }
            Ok(SeedOutcome::Barriers { runs })
        }
        Suite::Single => {
            let sol = solve::solve_instance(&inst, &solver.options(&inst)?)?;
            converged(&sol)?;
            let res = locate_gram(&inst, &sol.ybar)?;
            Ok(SeedOutcome::Single { id, sol, res })
        }
    }
}

type MeasureFn<'a> = &'a dyn Fn(&locate::Measures) -> f64;

/// Table in the layout `label, test 1..test k, mean, std`.
fn write_table(path: &Path, rows: &[(&str, Vec<f64>)]) -> Result<String> {
    let k = rows.first().map_or(0, |r| r.1.len());
    let mut header = vec![String::new()];
    header.extend((1..=k).map(|t| format!("test {t}")));
    header.extend(["mean".to_string(), "std".to_string()]);
    let mut buf = Vec::new();
    {
        let mut wtr = csv::Writer::from_writer(&mut buf);
        wtr.write_record(&header)?;
        for (label, vals) in rows {
            let (mean, std) = mean_std(vals);
            let mut rec = vec![label.to_string()];
            rec.extend(vals.iter().chain([mean, std].iter()).map(|v| format!("{v:.4}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
    }
    write_atomic(path, &buf)?;
    Ok(String::from_utf8_lossy(&buf).into_owned())
}

fn neg_log10(v: f64) -> f64 {
    -v.abs().max(f64::MIN_POSITIVE).log10()
}

fn cmd_experiment(
    suite: Suite,
    inst_args: &InstanceArgs,
    seeds: &[u64],
    solver: &SolverArgs,
    dir: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    let seed_dir = dir.join("seeds");
    fs::create_dir_all(&seed_dir)?;
    let pool = seed_pool()?;
    let outcomes: Vec<(u64, Result<SeedOutcome>)> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| {
                let res = run_seed(suite, inst_args, s, solver);
                (s, res)
            })
            .collect()
    });

    let mut failures = Vec::new();
    let mut ok = Vec::new();
    for (seed, res) in outcomes {
        match res {
            Ok(o) => ok.push((seed, o)),
            Err(e) => {
                writeln!(err, "seed {seed}: {e}")?;
                failures.push((seed, e.to_string()));
            }
        }
    }
    let mut fbuf = Vec::new();
    {
        let mut wtr = csv::Writer::from_writer(&mut fbuf);
        wtr.write_record(["seed", "error"])?;
        for (s, e) in &failures {
            wtr.write_record([s.to_string(), e.clone()])?;
        }
        wtr.flush()?;
    }
    write_atomic(&dir.join("failures.csv"), &fbuf)?;
    if ok.is_empty() {
        writeln!(err, "every seed failed")?;
        return Ok(EXIT_NUMERICAL);
    }

    match suite {
        Suite::EstimateMethods | Suite::Single => {
            let mut rows = Vec::new();
            for (seed, o) in &ok {
                let (id, res) = match o {
                    SeedOutcome::Methods { id, res, .. } | SeedOutcome::Single { id, res, .. } => (id, res),
                    SeedOutcome::Barriers { .. } => unreachable!(),
                };
                let mine: Vec<(String, LocalizationResult)> = res.iter().map(|r| (id.clone(), r.clone())).collect();
                let bytes = csv_bytes(|b| locate::write_results_csv(&mine, b))?;
                write_atomic(&seed_dir.join(format!("seed-{seed}.csv")), &bytes)?;
                rows.extend(mine);
            }
            write_atomic(&dir.join("results.csv"), &csv_bytes(|b| locate::write_results_csv(&rows, b))?)?;
            if suite == Suite::Single {
                let mut buf = Vec::new();
                {
                    let mut wtr = csv::Writer::from_writer(&mut buf);
                    wtr.write_record(["seed", "form", "status", "iterations", "objective", "relgap", "reduced_order"])?;
                    for (seed, o) in &ok {
                        if let SeedOutcome::Single { sol, .. } = o {
                            wtr.write_record([
                                seed.to_string(),
                                sol.form.to_string(),
                                sol.status.to_string(),
                                sol.iterations().to_string(),
                                format!("{:.17e}", sol.objective),
                                format!("{:.17e}", sol.relgap),
                                sol.reduced_order.to_string(),
                            ])?;
                        }
                    }
                    wtr.flush()?;
                }
                write_atomic(&dir.join("summary.csv"), &buf)?;
                writeln!(out, "{} of {} seeds solved", ok.len(), seeds.len())?;
                return Ok(EXIT_OK);
            }
            let pick = |method: usize, f: &dyn Fn(&locate::Measures) -> f64| -> Vec<f64> {
                ok.iter()
                    .map(|(_, o)| match o {
                        SeedOutcome::Methods { res, .. } => f(&res[method].measures),
                        _ => unreachable!(),
                    })
                    .collect()
            };
            let m2 = |m: &locate::Measures| m.m2.unwrap_or(f64::NAN);
            let tables: [(&str, MeasureFn); 3] =
                [("measure1", &|m| m.m1), ("measure2", &m2), ("measure3", &|m| m.m3)];
            for (name, f) in tables {
                let text = write_table(
                    &dir.join(format!("{name}.csv")),
                    &[("Method 1", pick(0, f)), ("Method 2", pick(1, f))],
                )?;
                writeln!(out, "{name}\n{text}")?;
            }
            let diffs: Vec<f64> = ok
                .iter()
                .map(|(_, o)| match o {
                    SeedOutcome::Methods { diff, .. } => *diff,
                    _ => unreachable!(),
                })
                .collect();
            let text = write_table(&dir.join("difference.csv"), &[("||Xe1-Xe2||_F", diffs)])?;
            writeln!(out, "difference\n{text}")?;
        }
        Suite::CompareBarriers => {
            let mut series = Vec::new();
            let mut summary = Vec::new();
            for (seed, o) in &ok {
                let SeedOutcome::Barriers { runs } = o else { unreachable!() };
                let mut mine = Vec::new();
                {
                    let mut wtr = csv::Writer::from_writer(&mut mine);
                    for sol in runs {
                        for t in &sol.trace {
                            wtr.write_record([
                                seed.to_string(),
                                sol.form.to_string(),
                                t.iter.to_string(),
                                format!("{:.17e}", neg_log10(t.objective)),
                                format!("{:.17e}", neg_log10(t.relgap)),
                            ])?;
                        }
                        let hit = sol.trace.iter().position(|t| t.relgap <= 1e-8);
                        summary.push([
                            seed.to_string(),
                            sol.form.to_string(),
                            sol.status.to_string(),
                            sol.iterations().to_string(),
                            hit.map_or_else(|| "NA".to_string(), |h| h.to_string()),
                            format!("{:.17e}", sol.relgap),
                            format!("{:.17e}", sol.objective),
                        ]);
                    }
                    wtr.flush()?;
                }
                write_atomic(&seed_dir.join(format!("seed-{seed}.csv")), &mine)?;
                series.extend(mine);
            }
            let mut buf = b"seed,form,iter,neg_log10_objective,neg_log10_relgap\n".to_vec();
            buf.extend(series);
            write_atomic(&dir.join("barriers.csv"), &buf)?;
            let mut sbuf = Vec::new();
            {
                let mut wtr = csv::Writer::from_writer(&mut sbuf);
                wtr.write_record(["seed", "form", "status", "iterations", "iters_to_1e-8", "final_relgap", "objective"])?;
                for row in &summary {
                    wtr.write_record(row)?;
                }
                wtr.flush()?;
            }
            write_atomic(&dir.join("barriers_summary.csv"), &sbuf)?;
            write!(out, "{}", String::from_utf8_lossy(&sbuf))?;
        }
    }
    Ok(EXIT_OK)
}
