use std::fs;
use std::path::{Path, PathBuf};

use kslab_core::constants::{constants_reports, ConstantsReport, ModelParams};
use kslab_core::io::{decode_field, encode_positions, parse_reports, ParticleSection, PdeSection, RunConfig};
use kslab_core::particles::{simulate as run_particles, StepReport};
use kslab_core::pde::{DuhamelOptions, PdeSolver, StepDiagnostics};
use kslab_core::verification::{run_cross_check, run_decay_check, Prediction, RunKind, RunRecord, VerificationReport};
use kslab_core::KsError;
use serde_json::json;

use crate::output::Writer;
use crate::{Context, Failure};

const PDE_PREFIX: &str = "pde";
const PARTICLE_PREFIX: &str = "particles";

fn plan(ctx: &Context, command: &str, details: serde_json::Value) -> Result<(), Failure> {
    let doc = json!({
        "command": command,
        "config_hash": ctx.config.hash(),
        "out": ctx.out,
        "seed": ctx.config.seed,
        "plan": details,
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    Ok(())
}

fn config_error(e: KsError) -> Failure {
    Failure::Config(e.to_string())
}

fn params(config: &RunConfig) -> Result<ModelParams, Failure> {
    config.params().map_err(config_error)
}

pub fn constants(ctx: &Context) -> Result<(), Failure> {
    let config = &ctx.config;
    let p = params(config)?;
    if ctx.dry_run {
        return plan(ctx, "constants", json!({ "d": p.d, "q": p.q, "chi": p.chi, "sweep": config.constants.sweep }));
    }
    let reports = constants_reports(&p).map_err(config_error)?;
    let text = serde_json::to_string_pretty(&reports).expect("json");
    println!("{text}");
    let hash = config.hash();
    let w = Writer::new(&ctx.out, "constants", &hash)?;
    w.write("reports.json", &text)?;
    w.write("config.toml", config.to_toml_string())?;
    if let Some(sweep) = &config.constants.sweep {
        let mut rows = Vec::new();
        for chi in sweep.values() {
            for r in constants_reports(&p.with_chi(chi)).map_err(config_error)? {
                rows.push(sweep_row(chi, &r));
            }
        }
        let header = "chi,convention,condition_lhs,c_q,satisfied,margin,uniqueness_lhs";
        w.csv("sweep.csv", header, rows)?;
    }
    Ok(())
}

fn sweep_row(chi: f64, r: &ConstantsReport) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    let convention = serde_json::to_value(r.convention).expect("json");
    format!(
        "{chi:e},{},{:e},{},{},{:e},{}",
        convention.as_str().unwrap_or_default(),
        r.existence.lhs,
        opt(r.constants.c_q),
        r.existence.satisfied,
        r.existence.margin,
        opt(r.constants.uniqueness_lhs),
    )
}

fn pde_section(config: &RunConfig) -> Result<&PdeSection, Failure> {
    config.pde.as_ref().ok_or_else(|| Failure::Config("pde: section missing".into()))
}

fn particle_section(config: &RunConfig) -> Result<&ParticleSection, Failure> {
    config.particles.as_ref().ok_or_else(|| Failure::Config("particles: section missing".into()))
}

/// Outcome of a PDE run: the record for cross-checks, its reports and whether it blew up.
struct PdeOutcome {
    record: RunRecord,
    reports: Vec<VerificationReport>,
    blow_up: Option<String>,
}

fn run_pde(ctx: &Context, w: &Writer) -> Result<PdeOutcome, Failure> {
    let config = &ctx.config;
    let section = pde_section(config)?;
    let (problem, solver_cfg) = config.pde_problem(section).map_err(config_error)?;
    let p = params(config)?;
    let horizon = config.model.horizon;
    let mut solver = PdeSolver::new(problem, solver_cfg)?;
    let mut fields = Vec::new();
    let blow_up = match solver.run_recording(horizon, section.record_every, &mut fields) {
        Ok(()) => None,
        Err(e @ KsError::BlowUp(_)) => Some(e.to_string()),
        Err(e) => return Err(e.into()),
    };
    for (i, (t, f)) in fields.iter().enumerate() {
        w.field(&format!("rho-{i:05}"), f, *t, None)?;
        if let Some(fmt) = ctx.format.filter(|f| *f != crate::Format::Binary) {
            w.field(&format!("rho-{i:05}"), f, *t, Some(fmt))?;
        }
    }
    w.csv("diagnostics.csv", StepDiagnostics::CSV_HEADER, solver.diagnostics().iter().map(StepDiagnostics::csv_row))?;
    w.norms(solver.norm_series())?;

    let hash = &w.hash;
    let mut record = RunRecord::from_pde(&solver, horizon, fields);
    let mut reports = run_decay_check(&record, &p, &config.tolerances, hash)?;
    if let Some(msg) = &blow_up {
        log::warn!("{msg}");
        reports.push(VerificationReport::judge(
            "pde.blow_up",
            "finite-time blow-up of the density",
            Prediction::Bound(section.blowup_cap),
            solver.rho().sup_abs(),
            0.0,
            hash,
            true,
        ));
    } else if section.duhamel {
        let gap = solver.duhamel_gap(DuhamelOptions::default())?;
        record.duhamel_gap = Some(gap);
        reports.push(VerificationReport::judge(
            "pde.duhamel_c",
            "mild form of the chemical concentration c",
            Prediction::Bound(config.tolerances.duhamel),
            gap,
            0.0,
            hash,
            false,
        ));
        reports.push(VerificationReport::judge(
            "pde.mild_residual",
            "mild form of the density",
            Prediction::Bound(f64::NAN),
            solver.mild_residual()?,
            0.0,
            hash,
            true,
        ));
    }
    Ok(PdeOutcome { record, reports, blow_up })
}

pub fn solve_pde(ctx: &Context) -> Result<(), Failure> {
    let config = &ctx.config;
    let section = pde_section(config)?;
    if ctx.dry_run {
        let (problem, cfg) = config.pde_problem(section).map_err(config_error)?;
        let steps = (config.model.horizon / cfg.dt).ceil() as u64;
        return plan(
            ctx,
            "solve-pde",
            json!({ "grid": problem.grid, "dt": cfg.dt, "steps": steps, "scheme": cfg.scheme, "mode": cfg.mode, "track_norms": cfg.track_norms, "duhamel": section.duhamel }),
        );
    }
    let w = Writer::new(&ctx.out, PDE_PREFIX, &config.hash())?;
    w.write("config.toml", config.to_toml_string())?;
    let outcome = run_pde(ctx, &w)?;
    let checked = w.reports(&outcome.reports);
    match outcome.blow_up {
        Some(msg) => Err(Failure::BlowUp(msg)),
        None => checked,
    }
}

fn run_simulation(ctx: &Context, w: &Writer) -> Result<(RunRecord, Vec<VerificationReport>), Failure> {
    let config = &ctx.config;
    let section = particle_section(config)?;
    let cfg = config.particle_config(section).map_err(config_error)?;
    let p = params(config)?;
    let horizon = config.model.horizon;
    let run = run_particles(&p, &config.rho0(), &config.c0(), &cfg, horizon)?;

    w.csv("steps.csv", StepReport::CSV_HEADER, run.steps.iter().map(StepReport::csv_row))?;
    w.norms(&run.norms)?;
    for (i, (t, f)) in run.snapshots.iter().enumerate() {
        w.field(&format!("kde-{i:05}"), f, *t, None)?;
        if let Some(fmt) = ctx.format.filter(|f| *f != crate::Format::Binary) {
            w.field(&format!("kde-{i:05}"), f, *t, Some(fmt))?;
        }
    }
    let ens = &run.ensemble;
    w.write("positions.bin", encode_positions(ens.positions(), ens.d(), ens.t()))?;
    let manifest = json!({
        "config_hash": w.hash,
        "seed": cfg.seed,
        "rng": "ChaCha8, one stream per particle (stream id = particle index), block counter 16 * draw counter",
        "draw_counters": "0 for the initial sample, k + 1 for step k",
        "normals": "Box-Muller",
        "backend": cfg.backend,
        "n": cfg.n,
        "dt": cfg.dt,
        "steps": ens.step(),
        "t_final": ens.t(),
        "kde_grid": cfg.kde_grid,
        "bandwidth_constant": cfg.bandwidth_constant,
        "history_policy": cfg.history_policy,
    });
    w.write("manifest.json", serde_json::to_string_pretty(&manifest).expect("json"))?;

    let record = RunRecord::from_particles(&run, config.identity());
    let reports = run_decay_check(&record, &p, &config.tolerances, &w.hash)?;
    Ok((record, reports))
}

pub fn simulate(ctx: &Context) -> Result<(), Failure> {
    let config = &ctx.config;
    let section = particle_section(config)?;
    if ctx.dry_run {
        let cfg = config.particle_config(section).map_err(config_error)?;
        let steps = (config.model.horizon / cfg.dt).round() as u64;
        return plan(
            ctx,
            "simulate",
            json!({ "n": cfg.n, "dt": cfg.dt, "steps": steps, "backend": cfg.backend, "kde_grid": cfg.kde_grid, "history_policy": cfg.history_policy }),
        );
    }
    let w = Writer::new(&ctx.out, PARTICLE_PREFIX, &config.hash())?;
    w.write("config.toml", config.to_toml_string())?;
    let (_, reports) = run_simulation(ctx, &w)?;
    w.reports(&reports)
}

/// Files in `dir` named `<prefix>-<12 hex>-<name>`.
fn find(dir: &Path, prefix: &str, name_start: &str, name_end: &str) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(file) = path.file_name().and_then(|f| f.to_str()) else { continue };
        let Some(rest) = file.strip_prefix(prefix).and_then(|r| r.strip_prefix('-')) else { continue };
        if rest.len() > 13 && rest.as_bytes()[12] == b'-' {
            let name = &rest[13..];
            if name.starts_with(name_start) && name.ends_with(name_end) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn single(dir: &Path, prefix: &str, name: &str) -> Result<Option<PathBuf>, Failure> {
    let found = find(dir, prefix, name, name)?;
    match found.len() {
        0 => Ok(None),
        1 => Ok(found.into_iter().next()),
        _ => Err(Failure::Config(format!("{}: several {prefix} runs, pass one run per directory", dir.display()))),
    }
}

/// Rebuild a run record from a directory written by `solve-pde` or `simulate`.
fn load_run(dir: &Path) -> Result<RunRecord, Failure> {
    let (prefix, kind, stem) = if single(dir, PDE_PREFIX, "config.toml")?.is_some() {
        (PDE_PREFIX, RunKind::Pde, "rho-")
    } else if single(dir, PARTICLE_PREFIX, "config.toml")?.is_some() {
        (PARTICLE_PREFIX, RunKind::Particle, "kde-")
    } else {
        return Err(Failure::Config(format!("{}: no run configuration found", dir.display())));
    };
    let config_path = single(dir, prefix, "config.toml")?.expect("checked above");
    let config = RunConfig::from_path(&config_path)?;
    let mut snapshots = Vec::new();
    for path in find(dir, prefix, stem, ".bin")? {
        let (field, t) = decode_field(&fs::read(&path)?)?;
        snapshots.push((t, field));
    }
    let duhamel_gap = match single(dir, prefix, "report.json")? {
        Some(path) => parse_reports(&fs::read_to_string(path)?)?
            .into_iter()
            .find(|r| r.check_id == "pde.duhamel_c")
            .map(|r| r.measured),
        None => None,
    };
    Ok(RunRecord {
        kind,
        identity: config.identity(),
        norms: Vec::new(),
        weighted_drift_sup: None,
        snapshots,
        final_positions: None,
        bandwidth: None,
        duhamel_gap,
    })
}

pub fn compare(ctx: &Context, run_a: Option<PathBuf>, run_b: Option<PathBuf>) -> Result<(), Failure> {
    let config = &ctx.config;
    if ctx.dry_run {
        return plan(ctx, "compare", json!({ "run_a": run_a, "run_b": run_b, "tolerances": config.tolerances }));
    }
    let hash = config.hash();
    let mut records = Vec::new();
    for dir in [&run_a, &run_b].into_iter().flatten() {
        records.push(load_run(dir)?);
    }
    let has = |records: &[RunRecord], k: RunKind| records.iter().any(|r| r.kind == k);
    if !has(&records, RunKind::Pde) {
        let w = Writer::new(&ctx.out, PDE_PREFIX, &hash)?;
        w.write("config.toml", config.to_toml_string())?;
        let outcome = run_pde(ctx, &w)?;
        w.write("report.json", kslab_core::io::reports_to_json(&outcome.reports))?;
        if let Some(msg) = outcome.blow_up {
            return Err(Failure::BlowUp(msg));
        }
        records.push(outcome.record);
    }
    if !has(&records, RunKind::Particle) {
        let w = Writer::new(&ctx.out, PARTICLE_PREFIX, &hash)?;
        w.write("config.toml", config.to_toml_string())?;
        let (record, reports) = run_simulation(ctx, &w)?;
        w.write("report.json", kslab_core::io::reports_to_json(&reports))?;
        records.push(record);
    }
    let particle = records.iter().find(|r| r.kind == RunKind::Particle);
    let pde = records.iter().find(|r| r.kind == RunKind::Pde);
    let (Some(particle), Some(pde)) = (particle, pde) else {
        return Err(Failure::Config("compare needs one particle run and one PDE run".into()));
    };
    let reports = run_cross_check(particle, pde, &config.tolerances, &hash)?;
    Writer::new(&ctx.out, "compare", &hash)?.reports(&reports)
}
