//! Structured pass/fail reports tying measured quantities to the bounds of
//! the existence theory, and cross-checks between particle and PDE runs.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{
    bootstrap_bound_sequence, bootstrap_initial_a0, constants_report, ConstantsReport, ModelParams,
};
use crate::density::{field_distance, NormSeries};
use crate::error::{KsError, Result};
use crate::exponent::Exponent;
use crate::fields::{lq_norm_mixture, lq_norm_mixture_gradient, GaussianMixture, NormMethod};
use crate::grid::GridField;
use crate::particles::{kde, ParticleRun};
use crate::pde::PdeSolver;
use crate::special::C1Convention;

/// Serde for `f64` that writes non-finite values as the strings `"inf"`, `"-inf"` and `"nan"`.
pub mod float_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("expected a number, got {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Prediction {
    /// Pass when `|measured - value| <= tolerance`.
    #[serde(with = "float_serde")]
    Value(f64),
    /// Pass when `measured <= value (1 + tolerance)`.
    #[serde(with = "float_serde")]
    Bound(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Informational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check_id: String,
    pub paper_anchor: String,
    pub predicted: Prediction,
    #[serde(with = "float_serde")]
    pub measured: f64,
    #[serde(with = "float_serde")]
    pub tolerance: f64,
    pub verdict: Verdict,
    pub run_config_hash: String,
}

impl VerificationReport {
    pub fn judge(
        check_id: impl Into<String>,
        paper_anchor: impl Into<String>,
        predicted: Prediction,
        measured: f64,
        tolerance: f64,
        run_config_hash: &str,
        informational: bool,
    ) -> Self {
        let verdict = if informational {
            Verdict::Informational
        } else if predicted.accepts(measured, tolerance) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            check_id: check_id.into(),
            paper_anchor: paper_anchor.into(),
            predicted,
            measured,
            tolerance,
            verdict,
            run_config_hash: run_config_hash.to_string(),
        }
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}

impl Prediction {
    /// The predicted value or bound.
    pub fn value(&self) -> f64 {
        match *self {
            Prediction::Value(v) | Prediction::Bound(v) => v,
        }
    }

    pub fn accepts(&self, measured: f64, tolerance: f64) -> bool {
        match *self {
            Prediction::Value(p) => (measured - p).abs() <= tolerance,
            Prediction::Bound(b) => measured <= b * (1.0 + tolerance),
        }
    }
}

/// Tolerances of every check, with the documented defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckTolerances {
    /// Relative slack on `N^T_q <= C_q`.
    pub decay: f64,
    /// Relative slack on the density and drift bounds for PDE runs: grid
    /// quadrature of a norm is not exact, and the density bound is attained
    /// at `t = 0` when `chi = 0`.
    pub bound: f64,
    /// Relative slack on bounds measured from particles (Monte Carlo noise).
    pub monte_carlo: f64,
    /// Largest relative spread of `N^T_q` across regularisations.
    pub epsilon_spread: f64,
    /// Largest `L^1` distance between KDE and PDE density at positive times.
    pub kde_l1: f64,
    /// Largest `L^1` distance at `t = 0`.
    pub kde_l1_initial: f64,
    /// Largest relative `L^inf` gap between the Duhamel and stepped `c`.
    pub duhamel: f64,
}

impl Default for CheckTolerances {
    fn default() -> Self {
        Self {
            decay: 0.05,
            bound: 1e-6,
            monte_carlo: 0.2,
            epsilon_spread: 0.03,
            kde_l1: 0.1,
            kde_l1_initial: 0.05,
            duhamel: 1e-3,
        }
    }
}

/// The data two runs must share to be comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunIdentity {
    pub rho0: GaussianMixture,
    pub c0: GaussianMixture,
    pub chi: f64,
    pub lambda: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Pde,
    Particle,
}

/// What a decay or cross check needs from a finished run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub kind: RunKind,
    pub identity: RunIdentity,
    pub norms: Vec<NormSeries>,
    pub weighted_drift_sup: Option<f64>,
    /// Density fields `(t, rho)` (KDE for particle runs).
    pub snapshots: Vec<(f64, GridField)>,
    /// Particle positions at the final time, for bootstrap noise bands.
    pub final_positions: Option<Vec<f64>>,
    pub bandwidth: Option<f64>,
    /// Relative `L^inf` gap between the Duhamel and the stepped `c` at the final time.
    pub duhamel_gap: Option<f64>,
}

impl RunRecord {
    pub fn from_pde(solver: &PdeSolver, horizon: f64, snapshots: Vec<(f64, GridField)>) -> Self {
        let p = solver.problem();
        Self {
            kind: RunKind::Pde,
            identity: RunIdentity { rho0: p.rho0.clone(), c0: p.c0.clone(), chi: p.chi, lambda: p.lambda, horizon },
            norms: solver.norm_series().to_vec(),
            weighted_drift_sup: solver.config().track_drift.then(|| solver.weighted_drift_sup()),
            snapshots,
            final_positions: None,
            bandwidth: None,
            duhamel_gap: None,
        }
    }

    pub fn from_particles(run: &ParticleRun, identity: RunIdentity) -> Self {
        Self {
            kind: RunKind::Particle,
            identity,
            norms: run.norms.clone(),
            weighted_drift_sup: Some(run.weighted_drift_sup),
            snapshots: run.snapshots.clone(),
            final_positions: Some(run.ensemble.positions().to_vec()),
            bandwidth: run.bandwidths.last().copied(),
            duhamel_gap: None,
        }
    }

    fn series(&self, r: f64) -> Option<&NormSeries> {
        self.norms.iter().find(|s| (s.r.as_f64() - r).abs() < 1e-12)
    }
}

/// Model parameters with `||grad c0||_d` and `||rho0||_{d/2}` evaluated from the mixtures.
pub fn params_from_mixtures(
    rho0: &GaussianMixture,
    c0: &GaussianMixture,
    chi: f64,
    lambda: f64,
    horizon: f64,
) -> Result<ModelParams> {
    let d = rho0.d;
    if c0.d != d {
        return Err(KsError::domain("rho0 and c0 have different dimensions"));
    }
    let method = |m: &GaussianMixture| {
        if m.components.len() == 1 {
            NormMethod::ClosedFormSingle
        } else {
            NormMethod::GridQuadrature
        }
    };
    let dd = d as f64;
    let grad = lq_norm_mixture_gradient(c0, Exponent::new(dd), method(c0))?.value;
    let dens = lq_norm_mixture(rho0, Exponent::new((0.5 * dd).max(1.0)), method(rho0))?.value;
    let mut p = ModelParams::new(d, chi, grad, dens);
    p.lambda = lambda;
    p.horizon = horizon;
    Ok(p)
}

const ANCHOR_DECAY: &str = "existence theorem: weighted L^q density bound, uniform in the regularisation";
const ANCHOR_DENSITY: &str = "bootstrap recursion: bound on sup_t ||rho_t||_{d/2}";
const ANCHOR_DRIFT: &str = "drift control of the regularised process: sup_t sqrt(t) ||b_t||_inf";
const ANCHOR_CROSS: &str = "particle law and PDE solution coincide: (rho, c) solves the Keller-Segel system";
const ANCHOR_DUHAMEL: &str = "mild form of the chemical concentration c";

/// Decay checks for one run. Verdicts are informational when the existence
/// condition fails (or `C_q` does not exist).
pub fn run_decay_check(
    run: &RunRecord,
    params: &ModelParams,
    tol: &CheckTolerances,
    hash: &str,
) -> Result<Vec<VerificationReport>> {
    let report: ConstantsReport = constants_report(params, C1Convention::Exact)?;
    let c_q = report.constants.c_q;
    let informational = !report.existence.satisfied || c_q.is_none();
    let slack = match run.kind {
        RunKind::Pde => tol.bound,
        RunKind::Particle => tol.monte_carlo,
    };
    let mut out = Vec::new();
    if let Some(s) = run.series(params.q) {
        out.push(VerificationReport::judge(
            "decay.script_n_q",
            ANCHOR_DECAY,
            Prediction::Bound(c_q.unwrap_or(f64::NAN)),
            s.sup(),
            tol.decay,
            hash,
            informational,
        ));
    }
    if let Some(s) = run.series(0.5 * params.d as f64) {
        let density_bound = match (c_q, params.d >= 3) {
            (Some(cq), true) => {
                bootstrap_bound_sequence(params, cq, bootstrap_initial_a0(params.d, cq), 200)?.density_bound
            }
            _ => f64::NAN,
        };
        out.push(VerificationReport::judge(
            "decay.density_d_half",
            ANCHOR_DENSITY,
            Prediction::Bound(density_bound),
            s.sup(),
            slack,
            hash,
            informational || !density_bound.is_finite(),
        ));
    }
    if let (Some(measured), Some(bound)) = (run.weighted_drift_sup, report.drift_bound) {
        out.push(VerificationReport::judge(
            "decay.drift",
            ANCHOR_DRIFT,
            Prediction::Bound(bound),
            measured,
            slack,
            hash,
            informational,
        ));
    }
    Ok(out)
}

/// Spread `(max - min) / min` of `N^T_q` across runs with different regularisations.
pub fn epsilon_uniformity_check(values: &[(f64, f64)], tol: &CheckTolerances, hash: &str) -> VerificationReport {
    let lo = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let hi = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    VerificationReport::judge(
        "decay.epsilon_uniformity",
        ANCHOR_DECAY,
        Prediction::Bound(tol.epsilon_spread),
        (hi - lo) / lo,
        0.0,
        hash,
        false,
    )
}

/// `t` rounded to nine decimals, without trailing zeros.
fn time_label(t: f64) -> String {
    let s = format!("{t:.9}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn matching<'a>(a: &'a [(f64, GridField)], b: &'a [(f64, GridField)]) -> Vec<(f64, &'a GridField, &'a GridField)> {
    a.iter()
        .filter_map(|(t, fa)| b.iter().find(|(s, _)| (s - t).abs() <= 1e-9 * t.max(1.0)).map(|(_, fb)| (*t, fa, fb)))
        .collect()
}

/// KDE versus PDE density at every matched time, and the Duhamel gap of the PDE run.
/// Negative undershoots of the PDE density are clipped to zero for the comparison.
pub fn run_cross_check(
    particle: &RunRecord,
    pde: &RunRecord,
    tol: &CheckTolerances,
    hash: &str,
) -> Result<Vec<VerificationReport>> {
    if particle.identity != pde.identity {
        return Err(KsError::ConfigMismatch("particle and PDE runs differ in rho0, c0, chi, lambda or T".into()));
    }
    let pairs = matching(&particle.snapshots, &pde.snapshots);
    if pairs.is_empty() {
        return Err(KsError::ConfigMismatch("the runs share no snapshot time".into()));
    }
    let mut out = Vec::new();
    for (t, kde_field, pde_field) in pairs {
        let clipped = GridField { spec: pde_field.spec, values: pde_field.values.iter().map(|v| v.max(0.0)).collect() };
        let l1 = field_distance(kde_field, &clipped, Exponent::new(1.0))?;
        let l2 = field_distance(kde_field, &clipped, Exponent::new(2.0))?;
        let bound = if t == 0.0 { tol.kde_l1_initial } else { tol.kde_l1 };
        out.push(VerificationReport::judge(
            format!("cross.l1.t={}", time_label(t)),
            ANCHOR_CROSS,
            Prediction::Bound(bound),
            l1,
            0.0,
            hash,
            false,
        ));
        out.push(VerificationReport::judge(
            format!("cross.l2.t={}", time_label(t)),
            ANCHOR_CROSS,
            Prediction::Bound(f64::NAN),
            l2,
            0.0,
            hash,
            true,
        ));
    }
    if let Some(gap) = pde.duhamel_gap {
        out.push(VerificationReport::judge(
            "cross.duhamel_c",
            ANCHOR_DUHAMEL,
            Prediction::Bound(tol.duhamel),
            gap,
            0.0,
            hash,
            false,
        ));
    }
    Ok(out)
}

/// `L^1` distance of the KDE to `reference` and its bootstrap standard
/// deviation over `resamples` resamplings of the particles.
pub fn kde_distance_with_noise(
    positions: &[f64],
    d: usize,
    bandwidth: f64,
    reference: &GridField,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let one = Exponent::new(1.0);
    let distance = field_distance(&kde(positions, d, bandwidth, &reference.spec)?, reference, one)?;
    let n = positions.len() / d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(resamples);
    let mut resampled = vec![0.0; positions.len()];
    for _ in 0..resamples {
        for chunk in resampled.chunks_mut(d) {
            let j = ((rng.next_u64() as u128 * n as u128) >> 64) as usize;
            chunk.copy_from_slice(&positions[j * d..(j + 1) * d]);
        }
        samples.push(field_distance(&kde(&resampled, d, bandwidth, &reference.spec)?, reference, one)?);
    }
    let mean = samples.iter().sum::<f64>() / resamples.max(1) as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (resamples.max(2) - 1) as f64;
    Ok((distance, var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub n: usize,
    pub distance: f64,
    /// Bootstrap standard deviation of `distance`.
    pub noise: f64,
}

/// Non-increasing in `N` beyond the noise band: for consecutive sizes the
/// excess `D_{k+1} - D_k - 2 sqrt(s_k^2 + s_{k+1}^2)` must be `<= 0`.
/// The measured value is the largest excess.
pub fn trend_check(points: &[TrendPoint], hash: &str) -> VerificationReport {
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|p| p.n);
    let excess = sorted
        .windows(2)
        .map(|w| w[1].distance - w[0].distance - 2.0 * (w[0].noise.powi(2) + w[1].noise.powi(2)).sqrt())
        .fold(f64::NEG_INFINITY, f64::max);
    VerificationReport::judge("cross.trend_n", ANCHOR_CROSS, Prediction::Bound(0.0), excess, 0.0, hash, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use proptest::prelude::*;

    #[test]
    fn time_labels() {
        assert_eq!(time_label(0.39999999999999997), "0.4");
        assert_eq!(time_label(0.0), "0");
        assert_eq!(time_label(2.0), "2");
        assert_eq!(time_label(0.125), "0.125");
    }

    #[test]
    fn verdict_rules() {
        let r = VerificationReport::judge("a", "x", Prediction::Bound(2.0), 2.09, 0.05, "h", false);
        assert_eq!(r.verdict, Verdict::Pass);
        let r = VerificationReport::judge("a", "x", Prediction::Bound(2.0), 2.11, 0.05, "h", false);
        assert_eq!(r.verdict, Verdict::Fail);
        let r = VerificationReport::judge("a", "x", Prediction::Value(1.0), 1.2, 0.1, "h", false);
        assert_eq!(r.verdict, Verdict::Fail);
        let r = VerificationReport::judge("a", "x", Prediction::Bound(2.0), f64::NAN, 0.0, "h", false);
        assert_eq!(r.verdict, Verdict::Fail);
        let r = VerificationReport::judge("a", "x", Prediction::Bound(2.0), 9.0, 0.0, "h", true);
        assert_eq!(r.verdict, Verdict::Informational);
    }

    #[test]
    fn non_finite_values_round_trip() {
        let r = VerificationReport::judge("a", "x", Prediction::Bound(f64::INFINITY), f64::NAN, 0.0, "h", true);
        let json = serde_json::to_string(&r).unwrap();
        let back: VerificationReport = serde_json::from_str(&json).unwrap();
        assert!(back.measured.is_nan());
        assert_eq!(back.predicted, Prediction::Bound(f64::INFINITY));
    }

    proptest! {
        #[test]
        fn reports_round_trip(measured in -1e300f64..1e300, bound in -1e10f64..1e10, tol in 0.0f64..1.0, value in any::<bool>()) {
            let predicted = if value { Prediction::Value(bound) } else { Prediction::Bound(bound) };
            let r = VerificationReport::judge("id", "anchor", predicted, measured, tol, "abc", false);
            let json = serde_json::to_string(&r).unwrap();
            let back: VerificationReport = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, r);
        }
    }

    #[test]
    fn heat_flow_decay_passes_with_margin() {
        let spec = GridSpec::new(3, 24, 12.0).unwrap();
        let rho0 = GaussianMixture::standard(3);
        let c0 = GaussianMixture::single(3, 0.5, vec![0.0; 3], 1.0);
        let params = params_from_mixtures(&rho0, &c0, 0.0, 0.0, 1.0).unwrap();
        let mut cfg = crate::pde::SolverConfig::new(0.05);
        cfg.track_norms = vec![Exponent::new(4.5), Exponent::new(1.5)];
        cfg.track_drift = true;
        let mut s =
            PdeSolver::new(crate::pde::PdeProblem { chi: 0.0, lambda: 0.0, rho0, c0, grid: spec }, cfg).unwrap();
        s.run_to(1.0).unwrap();
        let rec = RunRecord::from_pde(&s, 1.0, Vec::new());
        let reports = run_decay_check(&rec, &params, &CheckTolerances::default(), "h").unwrap();
        assert_eq!(reports.len(), 3);
        for r in &reports {
            assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        }
        assert!(reports[0].measured < 0.8 * params_bound(&reports[0]), "{reports:?}");
    }

    fn params_bound(r: &VerificationReport) -> f64 {
        match r.predicted {
            Prediction::Bound(b) | Prediction::Value(b) => b,
        }
    }

    #[test]
    fn violated_condition_is_informational() {
        let params = ModelParams::new(3, 50.0, 1.0, 1.0);
        let mut series = NormSeries::new(Exponent::new(4.5), 0.25);
        series.push(0.5, 1.0).unwrap();
        let rec = RunRecord {
            kind: RunKind::Pde,
            identity: RunIdentity {
                rho0: GaussianMixture::standard(3),
                c0: GaussianMixture::standard(3),
                chi: 50.0,
                lambda: 0.0,
                horizon: 1.0,
            },
            norms: vec![series],
            weighted_drift_sup: None,
            snapshots: Vec::new(),
            final_positions: None,
            bandwidth: None,
            duhamel_gap: None,
        };
        let reports = run_decay_check(&rec, &params, &CheckTolerances::default(), "h").unwrap();
        assert!(reports.iter().all(|r| r.verdict == Verdict::Informational));
    }

    #[test]
    fn cross_check_rejects_mismatched_runs() {
        let id = RunIdentity {
            rho0: GaussianMixture::standard(2),
            c0: GaussianMixture::standard(2),
            chi: 0.0,
            lambda: 0.0,
            horizon: 1.0,
        };
        let mut other = id.clone();
        other.chi = 0.1;
        let mk = |identity: RunIdentity| RunRecord {
            kind: RunKind::Pde,
            identity,
            norms: Vec::new(),
            weighted_drift_sup: None,
            snapshots: Vec::new(),
            final_positions: None,
            bandwidth: None,
            duhamel_gap: None,
        };
        let err = run_cross_check(&mk(id), &mk(other), &CheckTolerances::default(), "h");
        assert!(matches!(err, Err(KsError::ConfigMismatch(_))));
    }

    #[test]
    fn trend_uses_noise_band() {
        let pts =
            [TrendPoint { n: 1000, distance: 0.2, noise: 0.01 }, TrendPoint { n: 10000, distance: 0.21, noise: 0.01 }];
        assert_eq!(trend_check(&pts, "h").verdict, Verdict::Pass);
        let pts = [
            TrendPoint { n: 1000, distance: 0.2, noise: 0.001 },
            TrendPoint { n: 10000, distance: 0.21, noise: 0.001 },
        ];
        assert_eq!(trend_check(&pts, "h").verdict, Verdict::Fail);
    }
}
