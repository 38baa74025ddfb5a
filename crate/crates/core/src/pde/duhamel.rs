use rustfft::num_complex::Complex64;

use super::phi::{phi1, phi2};
use super::solver::{transport, PdeSolver, Snapshot};
use crate::error::{KsError, Result};
use crate::fields::GaussianMixture;
use crate::grid::{GridField, SpectralGrid};
use crate::history::{trapezoid_weights, History};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuhamelOptions {
    /// Largest acceptable estimated quadrature error, relative to `sup |c|`.
    pub tolerance: f64,
}

impl Default for DuhamelOptions {
    fn default() -> Self {
        Self { tolerance: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuhamelResult {
    pub field: GridField,
    /// Richardson estimate from the trapezoid on every other snapshot.
    pub error_estimate: f64,
}

fn snapshots_up_to(history: &History<Snapshot>, t: f64) -> Result<Vec<(f64, &Snapshot)>> {
    let snaps: Vec<(f64, &Snapshot)> = history.iter().filter(|(s, _)| *s <= t * (1.0 + 1e-12)).collect();
    match (snaps.first(), snaps.last()) {
        (Some(first), Some(last)) if first.0 == 0.0 && (last.0 - t).abs() <= 1e-12 * t.max(1.0) => Ok(snaps),
        _ => Err(KsError::InsufficientHistory(format!("snapshots must start at 0 and include t = {t}"))),
    }
}

fn coarse_indices(n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).step_by(2).collect();
    if *idx.last().unwrap() != n - 1 {
        idx.push(n - 1);
    }
    idx
}

/// `c(t) = e^{-lambda t} g_t * c0 + int_0^t e^{-lambda s} g_s * rho_{t-s} ds`,
/// with the time integral by the composite trapezoid over the snapshots.
/// The `s = 0` node is `rho_t` itself.
pub fn duhamel_c(
    history: &History<Snapshot>,
    c0: &GaussianMixture,
    t: f64,
    lambda: f64,
    spectral: &SpectralGrid,
    opts: DuhamelOptions,
) -> Result<DuhamelResult> {
    let spec = *spectral.spec();
    let snaps = snapshots_up_to(history, t)?;
    if snaps.len() < 3 {
        return Err(KsError::InsufficientHistory("at least three snapshots are needed".into()));
    }
    let free = c0.heat_convolve(t).scale_weights((-lambda * t).exp()).sample_periodic(&spec)?;
    let ksq = spectral.ksq();
    let integral = |idx: &[usize]| -> Vec<Complex64> {
        let times: Vec<f64> = idx.iter().map(|&i| snaps[i].0).collect();
        let w = trapezoid_weights(&times);
        let mut acc = vec![Complex64::default(); spec.len()];
        for (&i, wi) in idx.iter().zip(w) {
            let (s, snap) = snaps[i];
            let tau = (t - s).max(0.0);
            for ((a, r), &k2) in acc.iter_mut().zip(&snap.rho_hat).zip(ksq) {
                *a += r * (wi * (-(0.5 * k2 + lambda) * tau).exp());
            }
        }
        acc
    };
    let all: Vec<usize> = (0..snaps.len()).collect();
    let fine = spectral.inverse(integral(&all));
    let coarse = spectral.inverse(integral(&coarse_indices(snaps.len())));
    let values: Vec<f64> = free.values.iter().zip(&fine).map(|(a, b)| a + b).collect();
    let field = GridField::new(spec, values)?;
    let scale = field.sup_abs().max(f64::MIN_POSITIVE);
    let error_estimate = fine.iter().zip(&coarse).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / 3.0;
    if error_estimate > opts.tolerance * scale {
        return Err(KsError::InsufficientHistory(format!(
            "estimated Duhamel quadrature error {:.3e} exceeds {:.1e} relative",
            error_estimate / scale,
            opts.tolerance
        )));
    }
    Ok(DuhamelResult { field, error_estimate })
}

/// Relative `L^2` distance between `rho` at the last snapshot and the mild
/// form `g_t * rho_0 - chi sum_i int_0^t d_i g_{t-s} * (rho_s d_i c_s) ds`.
/// The integrand is interpolated linearly between snapshots and the heat
/// factor integrated exactly, so the quadrature is second order.
pub fn mild_residual(history: &History<Snapshot>, chi: f64, spectral: &SpectralGrid) -> Result<f64> {
    let snaps: Vec<(f64, &Snapshot)> = history.iter().collect();
    if snaps.len() < 2 || snaps[0].0 != 0.0 {
        return Err(KsError::InsufficientHistory("mild residual needs snapshots from t = 0".into()));
    }
    let ksq = spectral.ksq();
    let t = snaps.last().unwrap().0;
    let len = spectral.spec().len();
    let nonlinear = |snap: &Snapshot| {
        let rho = spectral.inverse(snap.rho_hat.clone());
        transport(spectral, chi, &rho, &snap.c_hat)
    };
    let mut mild: Vec<Complex64> =
        snaps[0].1.rho_hat.iter().zip(ksq).map(|(r, &k2)| r * (-0.5 * k2 * t).exp()).collect();
    if chi != 0.0 {
        let mut n_left = nonlinear(snaps[0].1);
        for pair in snaps.windows(2) {
            let (s0, _) = pair[0];
            let (s1, right) = pair[1];
            let n_right = nonlinear(right);
            let h = s1 - s0;
            for i in 0..len {
                let kappa = 0.5 * ksq[i];
                let z = -kappa * h;
                let (p1, p2) = (phi1(z), phi2(z));
                let decay = (-kappa * (t - s1)).exp();
                mild[i] += (n_left[i] * (p1 - p2) + n_right[i] * p2) * (h * decay);
            }
            n_left = n_right;
        }
    }
    let last = &snaps.last().unwrap().1.rho_hat;
    let diff: Vec<Complex64> = mild.iter().zip(last).map(|(a, b)| a - b).collect();
    let num: f64 = diff.iter().map(|c| c.norm_sqr()).sum();
    let den: f64 = last.iter().map(|c| c.norm_sqr()).sum();
    Ok((num / den).sqrt())
}

impl PdeSolver {
    /// [`mild_residual`] over this solver's recorded history.
    pub fn mild_residual(&self) -> Result<f64> {
        mild_residual(self.history(), self.problem().chi, self.spectral())
    }

    /// [`duhamel_c`] at the current time over this solver's recorded history.
    pub fn duhamel_c(&self, opts: DuhamelOptions) -> Result<DuhamelResult> {
        let p = self.problem();
        duhamel_c(self.history(), &p.c0, self.t(), p.lambda, self.spectral(), opts)
    }

    /// Relative `L^inf` gap between the Duhamel `c` and the stepped `c` at the current time.
    pub fn duhamel_gap(&self, opts: DuhamelOptions) -> Result<f64> {
        let mild = self.duhamel_c(opts)?.field;
        let stepped = self.c();
        Ok(mild.sub(&stepped)?.sup_abs() / stepped.sup_abs())
    }
}
