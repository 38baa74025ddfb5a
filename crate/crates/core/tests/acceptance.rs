//! Acceptance criteria, one line per criterion. A criterion passes when its
//! measurement meets the stated tolerance within the stated runtime.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use kslab_core::constants::{
    bootstrap_bound_sequence, bootstrap_initial_a0, constants_report, derive_constants, existence_threshold_chi,
    ModelParams,
};
use kslab_core::density::{field_distance, lq_norm_grid};
use kslab_core::fields::GaussianMixture;
use kslab_core::grid::GridField;
use kslab_core::io::{encode_field, encode_positions, RunConfig};
use kslab_core::particles::{interaction_eval, simulate, DriftBackendConfig, ParticleRun, StepReport};
use kslab_core::pde::{DriftMode, DuhamelOptions, PdeSolver};
use kslab_core::special::quadrature::{integrate_to_infinity, QuadOptions};
use kslab_core::special::{
    beta, beta_identity_check, c1, gaussian_lr_norm, grad_gaussian_lr_norm, C1Convention, GaussNormQuery,
};
use kslab_core::verification::{
    epsilon_uniformity_check, kde_distance_with_noise, run_decay_check, trend_check, RunRecord, TrendPoint, Verdict,
    VerificationReport,
};
use kslab_core::{Exponent, Result};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { pass, detail: detail.into() })
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn relative_l2(a: &GridField, reference: &GridField) -> f64 {
    let two = Exponent::new(2.0);
    lq_norm_grid(&a.sub(reference).unwrap(), two) / lq_norm_grid(reference, two)
}

fn config(text: &str) -> RunConfig {
    RunConfig::from_toml_str(text).expect("acceptance configuration parses")
}

fn solve(config: &RunConfig) -> Result<(PdeSolver, Vec<(f64, GridField)>)> {
    let section = config.pde.as_ref().expect("pde section");
    let (problem, cfg) = config.pde_problem(section)?;
    let mut solver = PdeSolver::new(problem, cfg)?;
    let mut fields = Vec::new();
    solver.run_recording(config.model.horizon, section.record_every, &mut fields)?;
    Ok((solver, fields))
}

fn find<'a>(reports: &'a [VerificationReport], id: &str) -> &'a VerificationReport {
    reports.iter().find(|r| r.check_id == id).unwrap_or_else(|| panic!("no report {id}"))
}

/// `||g_t||_r` and `||d_1 g_t||_r` by one-dimensional quadrature.
fn gaussian_norm_oracle(d: usize, r: Exponent, t: f64) -> (f64, f64) {
    let g1 = |x: f64| (2.0 * PI * t).sqrt().recip() * (-x * x / (2.0 * t)).exp();
    match r {
        Exponent::Infinity => {
            let peak = (2.0 * PI * t).powf(-0.5 * d as f64);
            let x = t.sqrt();
            let grad = x / t * g1(x) * g1(0.0).powi(d as i32 - 1);
            (peak, grad)
        }
        Exponent::Finite(r) => {
            let opts = QuadOptions::default();
            let plain = 2.0 * integrate_to_infinity(|x| g1(x).powf(r), 0.0, opts).unwrap().value;
            let moment = 2.0 * integrate_to_infinity(|x| (x / t * g1(x)).powf(r), 0.0, opts).unwrap().value;
            let norm = plain.powf(d as f64 / r);
            let grad = (moment * plain.powi(d as i32 - 1)).powf(1.0 / r);
            (norm, grad)
        }
    }
}

fn c1_gaussian_norms() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut worst_grad: f64 = 0.0;
    for d in 1..=3 {
        for r in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            for t in [0.1, 1.0, 10.0] {
                let q = GaussNormQuery::new(d, r, t)?;
                let (norm, grad) = gaussian_norm_oracle(d, q.r, t);
                worst = worst.max((gaussian_lr_norm(q) - norm).abs() / norm);
                worst_grad = worst_grad.max((grad_gaussian_lr_norm(q) - grad).abs() / grad);
            }
        }
    }
    let ratio = c1(3, 2.0, C1Convention::Printed) / c1(3, 2.0, C1Convention::Exact);
    outcome(
        worst <= 1e-8 && worst_grad <= 1e-8,
        format!(
            "max rel err {worst:.2e} (norm), {worst_grad:.2e} (gradient, exact C1); printed/exact C1 at d=3, r=2: {ratio:.4}"
        ),
    )
}

fn c2_beta_identity() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let a = uniform(&mut rng, -1.0, 0.9);
        let b = uniform(&mut rng, -1.0, 0.9);
        for t in [0.5, 1.0, 4.0] {
            let (lhs, rhs) = beta_identity_check(a, b, t)?;
            worst = worst.max((lhs - rhs).abs() / rhs.abs());
        }
    }
    let half = (beta(0.5, 0.5)? - PI).abs();
    outcome(worst <= 1e-6 && half <= 1e-10, format!("max rel err {worst:.2e}; |beta(1/2,1/2) - pi| = {half:.1e}"))
}

fn c3_constants_pipeline() -> Result<Outcome> {
    let base = ModelParams::new(3, 0.01, 0.8, 0.6).with_q(4.5);
    let mut worst_root: f64 = 0.0;
    for convention in C1Convention::ALL {
        let star = existence_threshold_chi(&base, convention)?;
        for i in 0..40 {
            let p = base.with_chi(star * i as f64 / 40.0);
            let k = derive_constants(&p, convention)?;
            if let Some(cq) = k.c_q {
                worst_root = worst_root.max(k.polynomial(&p, cq).abs());
            }
        }
    }
    let k = derive_constants(&base.with_chi(1e-6), C1Convention::Exact)?;
    let limit = k.c0_q_tilde2 * base.norm_p0_dhalf;
    let limit_err = (k.c_q.unwrap_or(f64::NAN) - limit).abs() / limit;
    let star = existence_threshold_chi(&base, C1Convention::Exact)?;
    let lhs: Vec<f64> = (1..=20)
        .map(|i| {
            derive_constants(&base.with_chi(2.0 * star * i as f64 / 20.0), C1Convention::Exact).map(|k| k.condition_lhs)
        })
        .collect::<Result<_>>()?;
    let monotone = lhs.windows(2).all(|w| w[1] > w[0]);
    outcome(
        worst_root <= 1e-10 && limit_err <= 1e-4 && monotone,
        format!("max |P(C_q)| {worst_root:.1e}; small-chi limit rel err {limit_err:.1e}; lhs increasing: {monotone}"),
    )
}

fn c4_bootstrap() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut sets = 0;
    let mut bounded = true;
    let mut worst_ratio: f64 = 0.0;
    while sets < 10 {
        let p =
            ModelParams::new(3, uniform(&mut rng, 0.0, 0.05), uniform(&mut rng, 0.0, 2.0), uniform(&mut rng, 0.1, 2.0))
                .with_q(4.5);
        let report = constants_report(&p, C1Convention::Exact)?;
        let Some(cq) = report.constants.c_q.filter(|_| report.existence.satisfied) else { continue };
        sets += 1;
        let seq = bootstrap_bound_sequence(&p, cq, bootstrap_initial_a0(3, cq), 200)?;
        bounded &= seq.diverged_at.is_none() && seq.a.len() == 200;
        bounded &= seq.a.iter().all(|&a| a <= seq.bound * (1.0 + 1e-12));
        for w in seq.exponent_a_prime.windows(2) {
            worst_ratio = worst_ratio.max((w[1] / w[0] - 0.5).abs());
        }
    }
    outcome(
        bounded && worst_ratio == 0.0,
        format!("10 admissible sets: A_n <= max(A_1, y) over 200 steps: {bounded}; max |a'_(n+1)/a'_n - 1/2| = {worst_ratio:.1e}"),
    )
}

const D2_PDE: &str = r#"
[model]
d = 2
chi = 1.0
lambda = 1.0
T = 1.0

[rho0]
components = [
    { weight = 0.6, mean = [-0.5, 0.2], variance = 0.4 },
    { weight = 0.4, mean = [0.7, -0.3], variance = 0.6 },
]

[c0]
components = [{ weight = 0.5, mean = [0.0, 0.3], variance = 0.8 }]

[pde]
n = 64
dt = 1e-3
record_every = 1000
"#;

fn c5_mass() -> Result<Outcome> {
    let c = config(D2_PDE);
    let (solver, _) = solve(&c)?;
    let diag = solver.diagnostics();
    let worst = diag.iter().map(|s| (s.mass - 1.0).abs()).fold(0.0, f64::max);
    outcome(diag.len() > 1000 && worst <= 1e-10, format!("{} steps, max |mass - 1| = {worst:.2e}", diag.len() - 1))
}

fn c6_heat_flow() -> Result<Outcome> {
    let mut errs = Vec::new();
    for (d, text) in [
        (1, "[rho0]\ncomponents = [{ weight = 0.7, mean = [-0.4], variance = 0.3 }, { weight = 0.3, mean = [0.8], variance = 0.5 }]\n[c0]\ncomponents = [{ weight = 1.0, mean = [0.0], variance = 1.0 }]\n"),
        (2, "[rho0]\ncomponents = [{ weight = 0.7, mean = [-0.4, 0.1], variance = 0.3 }, { weight = 0.3, mean = [0.8, -0.5], variance = 0.5 }]\n[c0]\ncomponents = [{ weight = 1.0, mean = [0.0, 0.0], variance = 1.0 }]\n"),
    ] {
        let c = config(&format!("[model]\nd = {d}\nchi = 0.0\nT = 1.0\n{text}[pde]\nn = 128\ndt = 0.01\nrecord_every = 1000\n"));
        let (solver, _) = solve(&c)?;
        let exact = c.rho0().heat_convolve(1.0).sample_periodic(&solver.rho().spec)?;
        errs.push(relative_l2(solver.rho(), &exact));
    }
    outcome(errs.iter().all(|&e| e <= 1e-6), format!("relative L2 error d=1: {:.2e}, d=2: {:.2e}", errs[0], errs[1]))
}

/// Two-dimensional parameters with the coupling at a tenth of the existence threshold.
fn at_tenth_of_threshold(mut c: RunConfig) -> Result<(RunConfig, f64)> {
    let star = constants_report(&c.params()?, C1Convention::Exact)?.chi_star;
    c.model.chi = 0.1 * star;
    let margin = constants_report(&c.params()?, C1Convention::Exact)?.existence.margin;
    Ok((c, margin))
}

fn c7_duhamel() -> Result<Outcome> {
    let mut c = config(D2_PDE);
    let pde = c.pde.as_mut().unwrap();
    pde.n = 32;
    pde.duhamel = true;
    let (c, _) = at_tenth_of_threshold(c)?;
    let (solver, _) = solve(&c)?;
    let gap = solver.duhamel_gap(DuhamelOptions::default())?;
    outcome(gap <= 1e-3, format!("chi = {:.4}, relative Linf gap {gap:.2e} (ETD1, dt = 1e-3)", c.model.chi))
}

fn c8_mild_residual() -> Result<Outcome> {
    let mut res = Vec::new();
    for dt in [0.02, 0.01, 0.005] {
        let mut c = config(D2_PDE);
        c.model.horizon = 0.4;
        let pde = c.pde.as_mut().unwrap();
        pde.n = 32;
        pde.dt = dt;
        pde.duhamel = true;
        let (solver, _) = solve(&c)?;
        res.push(solver.mild_residual()?);
    }
    let (r1, r2) = (res[0] / res[1], res[1] / res[2]);
    outcome(
        r1 >= 1.8 && r2 >= 1.8,
        format!("residuals {:.2e}, {:.2e}, {:.2e}; ratios {r1:.3}, {r2:.3}", res[0], res[1], res[2]),
    )
}

const D3_DECAY: &str = r#"
[model]
d = 3
chi = 0.0
lambda = 1.0
T = 1.0

[rho0]
components = [{ weight = 1.0, mean = [0.0, 0.0, 0.0], variance = 1.0 }]

[c0]
components = [{ weight = 0.5, mean = [0.3, 0.0, 0.0], variance = 1.0 }]

[pde]
n = 48
dt = 0.01
record_every = 100
"#;

fn d3_config() -> Result<(RunConfig, f64)> {
    let mut c = config(D3_DECAY);
    let p = c.params()?;
    c.model.chi = 0.1 * existence_threshold_chi(&p, C1Convention::Exact)?;
    let margin = constants_report(&c.params()?, C1Convention::Exact)?.existence.margin;
    Ok((c, margin))
}

fn c9_density_decay() -> Result<Outcome> {
    let (c, margin) = d3_config()?;
    let (solver, fields) = solve(&c)?;
    let hash = c.hash();
    let record = RunRecord::from_pde(&solver, c.model.horizon, fields);
    let reports = run_decay_check(&record, &c.params()?, &c.tolerances, &hash)?;
    let n_q = find(&reports, "decay.script_n_q");
    let dens = find(&reports, "decay.density_d_half");
    let pass =
        margin >= 0.5 && n_q.verdict == Verdict::Pass && dens.verdict == Verdict::Pass && dens.measured.is_finite();
    outcome(
        pass,
        format!(
            "margin {margin:.3}; N_q {:.4e} vs C_q {:.4e}; sup |rho|_(3/2) {:.6} vs bootstrap {:.6}",
            n_q.measured,
            n_q.predicted.value(),
            dens.measured,
            dens.predicted.value()
        ),
    )
}

fn c10_backends() -> Result<Outcome> {
    let dt = 0.01;
    let rho0 = GaussianMixture::single(2, 1.0, vec![0.0, 0.0], 0.5);
    let mut ens = kslab_core::particles::sample_initial(&rho0, 500, 10)?;
    let free = ModelParams::new(2, 0.0, 0.0, 1.0);
    ens.run_to(&free, &DriftBackendConfig::pairwise(dt), dt, &GaussianMixture::empty(2), 49.0 * dt)?;
    let slices = ens.history().len();
    let l = kslab_core::fields::box_length_rule(&rho0, ens.t());
    let mesh = DriftBackendConfig::mesh_rule(2, l, dt)?;
    let a = interaction_eval(&ens, 1.0, &DriftBackendConfig::pairwise(dt))?;
    let b = interaction_eval(&ens, 1.0, &DriftBackendConfig::mesh(dt, mesh))?;
    let num: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = a.iter().map(|x| x * x).sum();
    let err = (num / den).sqrt();
    outcome(slices == 50 && err <= 0.02, format!("{slices} slices, mesh n = {}: relative L2 {err:.2e}", mesh.n))
}

const D2_FREE_PARTICLES: &str = r#"
seed = 2024

[model]
d = 2
chi = 0.0
T = 1.0

[rho0]
components = [
    { weight = 0.5, mean = [-0.6, 0.0], variance = 0.3 },
    { weight = 0.5, mean = [0.6, 0.2], variance = 0.3 },
]

[c0]
components = [{ weight = 1.0, mean = [0.0, 0.0], variance = 1.0 }]

[particles]
n = 10000
dt = 0.01
kde_n = 64
record_every = 20
"#;

fn free_particles() -> Result<(RunConfig, ParticleRun)> {
    let c = config(D2_FREE_PARTICLES);
    let cfg = c.particle_config(c.particles.as_ref().unwrap())?;
    let run = simulate(&c.params()?, &c.rho0(), &c.c0(), &cfg, c.model.horizon)?;
    Ok((c, run))
}

fn mixture_axis_variance(m: &GaussianMixture, axis: usize) -> f64 {
    let w = m.total_weight();
    let mean: f64 = m.components.iter().map(|c| c.weight * c.mean[axis]).sum::<f64>() / w;
    m.components.iter().map(|c| c.weight * (c.variance + (c.mean[axis] - mean).powi(2))).sum::<f64>() / w
}

fn c11_free_particles() -> Result<Outcome> {
    let (c, run) = free_particles()?;
    let x = run.ensemble.positions();
    let n = run.ensemble.len() as f64;
    let mut worst: f64 = 0.0;
    for axis in 0..2 {
        let mean = x.iter().skip(axis).step_by(2).sum::<f64>() / n;
        let var = x.iter().skip(axis).step_by(2).map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expected = mixture_axis_variance(&c.rho0(), axis) + c.model.horizon;
        worst = worst.max((var - expected).abs() / expected);
    }
    let (t, kde) = run.last_snapshot();
    let exact = c.rho0().heat_convolve(*t).sample_periodic(&kde.spec)?;
    let l1 = field_distance(kde, &exact, Exponent::new(1.0))?;
    outcome(worst <= 0.05 && l1 <= 0.1, format!("max per-axis variance rel err {worst:.3}; KDE L1 {l1:.4} at t = {t}"))
}

const D2_CROSS: &str = r#"
seed = 99

[model]
d = 2
chi = 0.0
lambda = 1.0
T = 0.5

[rho0]
components = [
    { weight = 0.6, mean = [-0.5, 0.0], variance = 0.4 },
    { weight = 0.4, mean = [0.6, 0.3], variance = 0.5 },
]

[c0]
components = [{ weight = 0.5, mean = [0.0, 0.3], variance = 0.8 }]

[pde]
n = 64
dt = 0.005
record_every = 1000

[particles]
n = 1000
dt = 0.01
kde_n = 64
backend = "mesh"
record_every = 1000
"#;

fn c12_particle_vs_pde() -> Result<Outcome> {
    let (mut c, margin) = at_tenth_of_threshold(config(D2_CROSS))?;
    let (_, fields) = solve(&c)?;
    let (t_pde, reference) = fields.last().unwrap().clone();
    let mut points = Vec::new();
    for n in [1_000, 10_000, 40_000] {
        c.particles.as_mut().unwrap().n = n;
        let cfg = c.particle_config(c.particles.as_ref().unwrap())?;
        let run = simulate(&c.params()?, &c.rho0(), &c.c0(), &cfg, c.model.horizon)?;
        let ens = &run.ensemble;
        assert!((ens.t() - t_pde).abs() < 1e-9, "particle and PDE end times differ");
        let h = *run.bandwidths.last().unwrap();
        let (distance, noise) = kde_distance_with_noise(ens.positions(), 2, h, &reference, 20, n as u64)?;
        points.push(TrendPoint { n, distance, noise });
    }
    let report = trend_check(&points, &c.hash());
    let list: Vec<String> =
        points.iter().map(|p| format!("N={} L1 {:.4} +/- {:.4}", p.n, p.distance, p.noise)).collect();
    outcome(
        report.verdict == Verdict::Pass,
        format!(
            "chi = {:.4} (margin {margin:.2}); {}; max excess over band {:.2e}",
            c.model.chi,
            list.join(", "),
            report.measured
        ),
    )
}

fn c13_epsilon_uniformity() -> Result<Outcome> {
    let (c, _) = d3_config()?;
    let dt = c.pde.as_ref().unwrap().dt;
    let mut values = Vec::new();
    for k in [1.0, 2.0, 4.0] {
        let mut ce = c.clone();
        ce.pde.as_mut().unwrap().mode = DriftMode::RegularizedMemory { epsilon: k * dt };
        let (solver, fields) = solve(&ce)?;
        let record = RunRecord::from_pde(&solver, ce.model.horizon, fields);
        let reports = run_decay_check(&record, &ce.params()?, &ce.tolerances, &ce.hash())?;
        values.push((k * dt, find(&reports, "decay.script_n_q").measured));
    }
    let report = epsilon_uniformity_check(&values, &c.tolerances, &c.hash());
    let list: Vec<String> = values.iter().map(|(e, v)| format!("eps={e}: {v:.5e}")).collect();
    outcome(report.verdict == Verdict::Pass, format!("{}; spread {:.2e}", list.join(", "), report.measured))
}

fn run_bytes(run: &ParticleRun) -> Vec<u8> {
    let ens = &run.ensemble;
    let mut out = encode_positions(ens.positions(), ens.d(), ens.t());
    for (t, f) in &run.snapshots {
        out.extend(encode_field(f, *t));
    }
    for s in &run.steps {
        out.extend(StepReport::csv_row(s).into_bytes());
    }
    out
}

fn c14_determinism() -> Result<Outcome> {
    let mut outputs = Vec::new();
    for workers in [1, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
        let (_, run) = pool.install(free_particles)?;
        outputs.push(run_bytes(&run));
    }
    let same = outputs[0] == outputs[1];
    outcome(same, format!("{} bytes per run, identical for 1 and 8 workers: {same}", outputs[0].len()))
}

type Criterion = (&'static str, u64, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 14] = [
        ("Gaussian norm closed forms", 1, c1_gaussian_norms),
        ("Beta identity", 1, c2_beta_identity),
        ("constants pipeline", 1, c3_constants_pipeline),
        ("bootstrap recursion", 1, c4_bootstrap),
        ("PDE mass conservation", 60, c5_mass),
        ("chi = 0 heat flow", 60, c6_heat_flow),
        ("Duhamel consistency", 120, c7_duhamel),
        ("mild residual order", 180, c8_mild_residual),
        ("density decay d = 3", 600, c9_density_decay),
        ("particle backend equivalence", 60, c10_backends),
        ("particle chi = 0 sanity", 120, c11_free_particles),
        ("particle vs PDE trend", 1800, c12_particle_vs_pde),
        ("epsilon uniformity", 1800, c13_epsilon_uniformity),
        ("determinism across workers", 300, c14_determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let k = i + 1;
        if !only.is_empty() && !only.contains(&k) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        let time = format!("{:.2}s of {budget}s", elapsed.as_secs_f64());
        println!("criterion {k:2} {verdict} {name}: {detail} [{time}]");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
