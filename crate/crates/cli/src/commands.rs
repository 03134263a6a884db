use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vorticity_bsde::biot_savart::LAMBDA1;
use vorticity_bsde::brownian::{mix_seed, BrownianPath};
use vorticity_bsde::checkpoint::{decode_trajectory, encode_trajectory, TrajectoryCheckpoint};
use vorticity_bsde::diagnostics::{build_report, estimate_report, Constants, EstimateReport};
use vorticity_bsde::engine::{
    bsde_residual, outer_path, picard_solve, BsdeSolution, Estimate, IterateRecord, PicardIterate,
    SolverConfig,
};
use vorticity_bsde::oracle::{evolve, trajectory_statistics};
use vorticity_bsde::{Error, Result};

use crate::config::{parse_config, salvage_output_dir, RunConfig};
use crate::manifest::{
    content_hash, FileEntry, Manifest, Phase, MANIFEST_NAME, MANIFEST_SCHEMA_VERSION,
};

/// Version of every JSON document and CSV layout written by the commands.
pub const SCHEMA_VERSION: u32 = 1;

const COMPARE_DOMAIN: u64 = 0x636f_6d70;
const RESIDUAL_DOMAIN: u64 = 0x7265_7369;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Oracle,
    Solve,
    Compare,
    Diagnose,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Oracle => "oracle",
            Command::Solve => "solve",
            Command::Compare => "compare",
            Command::Diagnose => "diagnose",
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_NON_CONVERGENCE: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) => EXIT_NUMERICAL,
        Error::NonConvergence { .. } => EXIT_NON_CONVERGENCE,
        Error::Config(_) | Error::Domain(_) | Error::Format(_) | Error::Io(_) => EXIT_CONFIG,
    }
}

fn status(code: i32) -> &'static str {
    match code {
        EXIT_OK => "ok",
        EXIT_NUMERICAL => "numerical_failure",
        EXIT_NON_CONVERGENCE => "non_convergence",
        _ => "config_error",
    }
}

/// Summary of a solve, stored next to the solution trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub schema_version: u32,
    pub converged: bool,
    pub config: SolverConfig,
    pub psi: String,
    pub iterations: usize,
    pub ratios: Vec<f64>,
    pub tolerance: f64,
    pub last_increment: Option<f64>,
    pub alpha: Option<f64>,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub y_sup: Option<f64>,
    pub z_bmo: Option<Estimate>,
    pub records: Vec<IterateRecord>,
    pub outer_seeds: Vec<u64>,
}

impl SolutionSummary {
    fn converged(sol: &BsdeSolution, psi: String) -> SolutionSummary {
        SolutionSummary {
            schema_version: SCHEMA_VERSION,
            converged: true,
            config: sol.config.clone(),
            psi,
            iterations: sol.iterations(),
            ratios: sol.ratios(),
            tolerance: sol.tolerance,
            last_increment: sol.records.last().and_then(|r| r.increment),
            alpha: Some(sol.alpha),
            c0: Some(sol.c0),
            c1: Some(sol.c1),
            y_sup: Some(sol.y_sup),
            z_bmo: Some(sol.z_bmo),
            records: sol.records.clone(),
            outer_seeds: sol.outer_seeds.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub schema_version: u32,
    pub paths: usize,
    pub steps: usize,
    pub max_error: f64,
    pub mean_error: f64,
    /// Largest error over paths at each BSDE time node.
    pub node_max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub schema_version: u32,
    pub paths: usize,
    pub steps: usize,
    pub sup_psi: f64,
    /// Largest residual over paths and nodes.
    pub max: f64,
    /// Mean over paths of the per-path maximum.
    pub mean_path_max: f64,
    /// Same statistic on the grid with twice the step; `None` for odd `L`.
    pub coarse_mean_path_max: Option<f64>,
    pub refinement_ratio: Option<f64>,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Outputs {
    fn write(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, data)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry::of_bytes(name, data));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Numerical(format!("cannot serialize {name}: {e}")))?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}

#[derive(Default)]
struct Timer {
    phases: Vec<Phase>,
}

impl Timer {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.phases.push(Phase {
            name: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

#[derive(Default)]
struct Inputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Inputs {
    fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let data = std::fs::read(path)
            .map_err(|e| Error::Config(format!("cannot read `{}`: {e}", path.display())))?;
        self.files.push((path.display().to_string(), data.clone()));
        Ok(data)
    }
}

/// Result of one command invocation; the manifest has already been written.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    pub error: Option<String>,
}

fn default_output_dir(config_path: &Path) -> PathBuf {
    let stem = config_path
        .file_stem()
        .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    config_path
        .parent()
        .unwrap_or(Path::new("."))
        .join(format!("{stem}.out"))
}

/// Runs `command` on the config at `config_path` and writes the manifest,
/// on success and on failure alike.
pub fn run(command: Command, config_path: &Path) -> RunOutcome {
    let mut timer = Timer::default();
    let mut inputs = Inputs::default();
    let base = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut output_dir = default_output_dir(config_path);
    let mut outputs = Outputs {
        dir: output_dir.clone(),
        files: Vec::new(),
    };
    let mut entries = Default::default();
    let start = Instant::now();

    let result = (|| -> Result<()> {
        let text = inputs.read(config_path)?;
        let text = String::from_utf8(text)
            .map_err(|_| Error::Config("config is not valid UTF-8".into()))?;
        if let Some(dir) = salvage_output_dir(&text) {
            output_dir = if dir.is_relative() {
                base.join(dir)
            } else {
                dir
            };
            outputs.dir = output_dir.clone();
        }
        let mut cfg = timer.time("parse", || parse_config(&text))?;
        cfg.resolve_paths(&base);
        entries = cfg.entries.clone();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.solver.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| match command {
            Command::Oracle => cmd_oracle(&cfg, &mut outputs, &mut timer),
            Command::Solve => cmd_solve(&cfg, &mut outputs, &mut timer),
            Command::Compare => cmd_compare(&cfg, &mut outputs, &mut inputs, &mut timer),
            Command::Diagnose => cmd_diagnose(&cfg, &mut outputs, &mut inputs, &mut timer),
        })
    })();

    timer.phases.push(Phase {
        name: "total".into(),
        seconds: start.elapsed().as_secs_f64(),
    });
    let (exit_code, error) = match &result {
        Ok(()) => (EXIT_OK, None),
        Err(e) => (exit_code(e), Some(e.to_string())),
    };
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        tool: format!("vbsde {}", env!("CARGO_PKG_VERSION")),
        command: command.name().to_string(),
        status: status(exit_code).to_string(),
        exit_code,
        error: error.clone(),
        config_path: config_path.display().to_string(),
        config: entries,
        inputs: inputs
            .files
            .iter()
            .map(|(p, d)| FileEntry::of_bytes(p.clone(), d))
            .collect(),
        input_hash: content_hash(&inputs.files),
        timings: timer.phases,
        files: outputs.files,
    };
    let mut exit_code = exit_code;
    let mut error = error;
    let written = std::fs::create_dir_all(&output_dir)
        .and_then(|_| std::fs::write(output_dir.join(MANIFEST_NAME), manifest.to_json()));
    if let Err(e) = written {
        error.get_or_insert_with(|| format!("cannot write manifest: {e}"));
        if exit_code == EXIT_OK {
            exit_code = EXIT_CONFIG;
        }
    }
    RunOutcome {
        exit_code,
        output_dir,
        manifest,
        error,
    }
}

fn fmt_row(out: &mut String, ints: &[usize], floats: &[f64]) {
    let mut first = true;
    for i in ints {
        if !first {
            out.push(',');
        }
        first = false;
        let _ = write!(out, "{i}");
    }
    for x in floats {
        if !first {
            out.push(',');
        }
        first = false;
        let _ = write!(out, "{x:.12e}");
    }
    out.push('\n');
}

fn psi_text(cfg: &RunConfig) -> String {
    cfg.entries.get("psi").cloned().unwrap_or_default()
}

fn cmd_oracle(cfg: &RunConfig, out: &mut Outputs, timer: &mut Timer) -> Result<()> {
    let psi = cfg.psi()?;
    let s = &cfg.solver;
    let traj = timer.time("evolve", || evolve(&psi, s.nu, s.horizon, cfg.oracle_steps))?;
    let stats = trajectory_statistics(&traj)?;
    let mut csv = String::from("tau,enstrophy,energy,sup_abs\n");
    for (m, row) in stats.iter().enumerate() {
        fmt_row(
            &mut csv,
            &[],
            &[m as f64 * traj.dt(), row[0], row[1], row[2]],
        );
    }
    timer.time("write", || -> Result<()> {
        out.write(
            "oracle.vbst",
            &encode_trajectory(traj.fields(), traj.dt(), traj.nu())?,
        )?;
        out.write("oracle.csv", csv.as_bytes())
    })
}

fn iterations_csv(records: &[IterateRecord]) -> String {
    let mut csv =
        String::from("iteration,sup_abs,eps_mc,margin,increment,noise_floor,ratio,above_noise\n");
    for r in records {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.12e}"));
        let _ = writeln!(
            csv,
            "{},{:.12e},{:.12e},{:.12e},{},{:.12e},{},{}",
            r.iteration,
            r.sup_abs,
            r.eps_mc,
            r.margin,
            opt(r.increment),
            r.noise_floor,
            opt(r.ratio),
            u8::from(r.above_noise)
        );
    }
    csv
}

fn max_principle_error(report: &EstimateReport) -> Result<()> {
    if report.max_principle.pass {
        return Ok(());
    }
    Err(Error::Numerical(format!(
        "maximum principle violated in {} iterate(s), margin {:.3e}",
        report.max_principle.violations, report.max_principle.margin
    )))
}

fn cmd_solve(cfg: &RunConfig, out: &mut Outputs, timer: &mut Timer) -> Result<()> {
    let psi = cfg.psi()?;
    let s = &cfg.solver;
    let sol = match timer.time("picard", || picard_solve(&psi, s)) {
        Ok(sol) => sol,
        Err(Error::NonConvergence {
            iterations,
            last_increment,
            tolerance,
            ratios,
        }) => {
            out.json(
                "solution.json",
                &SolutionSummary {
                    schema_version: SCHEMA_VERSION,
                    converged: false,
                    config: s.clone(),
                    psi: psi_text(cfg),
                    iterations,
                    ratios: ratios.clone(),
                    tolerance,
                    last_increment: Some(last_increment),
                    alpha: None,
                    c0: None,
                    c1: None,
                    y_sup: None,
                    z_bmo: None,
                    records: Vec::new(),
                    outer_seeds: Vec::new(),
                },
            )?;
            return Err(Error::NonConvergence {
                iterations,
                last_increment,
                tolerance,
                ratios,
            });
        }
        Err(e) => return Err(e),
    };
    let report = timer.time("diagnostics", || estimate_report(&sol))?;
    timer.time("write", || -> Result<()> {
        out.write(
            "solution.vbst",
            &encode_trajectory(sol.iterate.fields(), sol.iterate.dt(), s.nu)?,
        )?;
        out.json(
            "solution.json",
            &SolutionSummary::converged(&sol, psi_text(cfg)),
        )?;
        out.write("iterations.csv", iterations_csv(&sol.records).as_bytes())?;
        out.json("diagnostics.json", &report)?;
        for p in 0..cfg.path_dump {
            let path = outer_path(s, p as u64)?;
            out.write(&format!("paths/outer_{p:04}.csv"), path.to_csv().as_bytes())?;
        }
        Ok(())
    })?;
    max_principle_error(&report)
}

fn require<'a>(v: &'a Option<PathBuf>, key: &str) -> Result<&'a PathBuf> {
    v.as_ref()
        .ok_or_else(|| Error::Config(format!("this command needs `{key}`")))
}

/// A solution is either a bundle directory or a trajectory checkpoint file.
fn load_solution_trajectory(path: &Path, inputs: &mut Inputs) -> Result<TrajectoryCheckpoint> {
    let file = if path.is_dir() {
        path.join("solution.vbst")
    } else {
        path.to_path_buf()
    };
    decode_trajectory(&inputs.read(&file)?)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

fn cmd_compare(
    cfg: &RunConfig,
    out: &mut Outputs,
    inputs: &mut Inputs,
    timer: &mut Timer,
) -> Result<()> {
    if cfg.paths == 0 {
        return Err(Error::Config("`paths` must be at least 1".into()));
    }
    let solution_path = require(&cfg.solution, "solution")?;
    let trajectory_path = require(&cfg.trajectory, "trajectory")?;
    let solution = load_solution_trajectory(solution_path, inputs)?;
    let oracle = decode_trajectory(&inputs.read(trajectory_path)?)?;
    if solution.n() != oracle.n()
        || !close(solution.nu, oracle.nu)
        || !close(solution.horizon(), oracle.horizon())
    {
        return Err(Error::Config(format!(
            "parameter mismatch: solution (N = {}, nu = {}, T = {}) vs oracle (N = {}, nu = {}, T = {})",
            solution.n(),
            solution.nu,
            solution.horizon(),
            oracle.n(),
            oracle.nu,
            oracle.horizon()
        )));
    }
    let (nu, horizon) = (solution.nu, solution.horizon());
    let steps = solution.steps();
    let dt = solution.dt;
    let solution = solution.into_iterate(0, 0.0)?;
    let oracle = oracle.into_trajectory()?;
    let oracle_fields = (0..=steps)
        .map(|m| oracle.field_at(horizon - m as f64 * dt))
        .collect::<Result<Vec<_>>>()?;
    let base_seed = cfg.solver.base_seed;
    let rows: Vec<Vec<f64>> = timer.time("compare", || {
        (0..cfg.paths)
            .into_par_iter()
            .map(|p| -> Result<Vec<f64>> {
                let seed = mix_seed(&[base_seed, COMPARE_DOMAIN, p as u64]);
                let path = BrownianPath::simulate(seed, steps, horizon)?;
                (0..=steps)
                    .map(|m| {
                        let shift = path.scaled_displacement(m, nu)?;
                        let y = solution.y_field(m, shift);
                        let w = oracle_fields[m].translate(shift);
                        Ok(y.sub(&w)?.l2_norm())
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut csv = String::from("path,m,t,l2_error\n");
    let mut node_max = vec![0.0f64; steps + 1];
    let mut total = 0.0;
    for (p, errs) in rows.iter().enumerate() {
        for (m, e) in errs.iter().enumerate() {
            fmt_row(&mut csv, &[p, m], &[m as f64 * dt, *e]);
            node_max[m] = node_max[m].max(*e);
            total += e;
        }
    }
    let summary = CompareSummary {
        schema_version: SCHEMA_VERSION,
        paths: cfg.paths,
        steps,
        max_error: node_max.iter().copied().fold(0.0, f64::max),
        mean_error: total / (cfg.paths * (steps + 1)) as f64,
        node_max,
    };
    out.write("compare.csv", csv.as_bytes())?;
    out.json("compare.json", &summary)
}

fn cmd_diagnose(
    cfg: &RunConfig,
    out: &mut Outputs,
    inputs: &mut Inputs,
    timer: &mut Timer,
) -> Result<()> {
    let bundle = require(&cfg.solution, "solution")?;
    let summary: SolutionSummary =
        serde_json::from_slice(&inputs.read(&bundle.join("solution.json"))?)
            .map_err(|e| Error::Format(format!("solution.json: {e}")))?;
    if !summary.converged {
        return Err(Error::Config(
            "the solution bundle holds a non-converged run".into(),
        ));
    }
    let traj = decode_trajectory(&inputs.read(&bundle.join("solution.vbst"))?)?;
    let sc = &summary.config;
    if !close(traj.nu, sc.nu) || traj.steps() != sc.steps || !close(traj.horizon(), sc.horizon) {
        return Err(Error::Format(
            "solution.vbst does not match solution.json".into(),
        ));
    }
    let missing = || Error::Format("solution.json lacks converged-run fields".into());
    let (alpha, c0, c1) = (
        summary.alpha.ok_or_else(missing)?,
        summary.c0.ok_or_else(missing)?,
        summary.c1.ok_or_else(missing)?,
    );
    let report = timer.time("diagnostics", || {
        build_report(
            &summary.records,
            summary.z_bmo.ok_or_else(missing)?,
            alpha,
            Constants {
                c0,
                c1,
                lambda1: LAMBDA1,
                nu: sc.nu,
                horizon: sc.horizon,
            },
            summary.converged,
        )
    })?;
    out.json("diagnostics.json", &report)?;

    if cfg.paths > 0 {
        let iterate = traj.into_iterate(summary.iterations, alpha)?;
        let residuals = timer.time("residuals", || residual_study(&iterate, cfg, sc.nu, c1))?;
        let (summary, csv) = residuals;
        out.write("residuals.csv", csv.as_bytes())?;
        out.json("residuals.json", &summary)?;
    }
    max_principle_error(&report)
}

fn residual_study(
    iterate: &PicardIterate,
    cfg: &RunConfig,
    nu: f64,
    sup_psi: f64,
) -> Result<(ResidualSummary, String)> {
    let steps = iterate.steps();
    let coarse = if steps % 2 == 0 {
        Some(iterate.coarsen()?)
    } else {
        None
    };
    let base_seed = cfg.solver.base_seed;
    let per_path: Vec<(Vec<f64>, Option<f64>)> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let seed = mix_seed(&[base_seed, RESIDUAL_DOMAIN, p as u64]);
            let path = BrownianPath::simulate(seed, steps, iterate.horizon())?;
            let fine = bsde_residual(iterate, &path, nu)?;
            let coarse_max = match &coarse {
                Some(c) => Some(bsde_residual(c, &path.coarsen()?, nu)?.max),
                None => None,
            };
            Ok((fine.residuals, coarse_max))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("path,m,t,residual\n");
    for (p, (res, _)) in per_path.iter().enumerate() {
        for (m, r) in res.iter().enumerate() {
            fmt_row(&mut csv, &[p, m], &[m as f64 * iterate.dt(), *r]);
        }
    }
    let path_max: Vec<f64> = per_path
        .iter()
        .map(|(r, _)| r.iter().copied().fold(0.0, f64::max))
        .collect();
    let n = per_path.len() as f64;
    let mean_path_max = path_max.iter().sum::<f64>() / n;
    let coarse_mean_path_max = coarse
        .as_ref()
        .map(|_| per_path.iter().filter_map(|(_, c)| *c).sum::<f64>() / n);
    Ok((
        ResidualSummary {
            schema_version: SCHEMA_VERSION,
            paths: per_path.len(),
            steps,
            sup_psi,
            max: path_max.iter().copied().fold(0.0, f64::max),
            mean_path_max,
            refinement_ratio: coarse_mean_path_max
                .filter(|_| mean_path_max > 0.0)
                .map(|c| c / mean_path_max),
            coarse_mean_path_max,
        },
        csv,
    ))
}
