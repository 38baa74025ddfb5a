//! Periodic grids on the torus `[-L/2, L/2)^d` and their spectral transforms.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    pub box_length: f64,
}

impl GridSpec {
    /// `d` in `1..=3`, `n` even and at least 4, `L` finite and positive.
    pub fn new(d: usize, n: usize, box_length: f64) -> Result<Self> {
        let spec = Self { d, n, box_length };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(KsError::domain(format!("grid dimension must be 1, 2 or 3, got {}", self.d)));
        }
        if self.n < 4 || !self.n.is_multiple_of(2) {
            return Err(KsError::domain(format!("points per axis must be even and >= 4, got {}", self.n)));
        }
        if !(self.box_length.is_finite() && self.box_length > 0.0) {
            return Err(KsError::domain(format!("box length must be > 0, got {}", self.box_length)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    pub fn volume(&self) -> f64 {
        self.box_length.powi(self.d as i32)
    }

    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.box_length + j as f64 * self.spacing()
    }

    /// Coordinates of the flat (row-major, last axis fastest) index `flat`.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for a in (0..self.d).rev() {
            out[a] = self.coord(rem % self.n);
            rem /= self.n;
        }
    }

    /// Integer wavenumber of index `j` along one axis.
    pub fn mode(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Wrap a displacement to the minimum image in `[-L/2, L/2)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let l = self.box_length;
        x - l * (x / l + 0.5).floor()
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(KsError::GridMismatch(format!(
                "(d={}, n={}, L={}) vs (d={}, n={}, L={})",
                self.d, self.n, self.box_length, other.d, other.n, other.box_length
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, values: vec![0.0; spec.len()] }
    }

    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(KsError::GridMismatch(format!("expected {} values, got {}", spec.len(), values.len())));
        }
        Ok(Self { spec, values })
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut x = [0.0; 3];
        let values = (0..spec.len())
            .map(|i| {
                spec.point(i, &mut x);
                f(&x[..spec.d])
            })
            .collect();
        Self { spec, values }
    }

    /// `sum f h^d`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.spec.check_same(&other.spec)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(GridField { spec: self.spec, values })
    }
}

/// FFT plans and wavenumber tables for one [`GridSpec`].
pub struct SpectralGrid {
    spec: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    backward: Arc<dyn Fft<f64>>,
    ksq: Vec<f64>,
    /// Per-axis wavenumbers for first derivatives, Nyquist mode zeroed.
    k: Vec<Vec<f64>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid").field("spec", &self.spec).finish()
    }
}

impl SpectralGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(spec.n);
        let backward = planner.plan_fft_inverse(spec.n);
        let two_pi_l = 2.0 * std::f64::consts::PI / spec.box_length;
        let len = spec.len();
        let mut ksq = vec![0.0; len];
        let mut k = vec![vec![0.0; len]; spec.d];
        for (flat, ks) in ksq.iter_mut().enumerate() {
            let mut rem = flat;
            for a in (0..spec.d).rev() {
                let j = rem % spec.n;
                rem /= spec.n;
                let kj = two_pi_l * spec.mode(j) as f64;
                *ks += kj * kj;
                k[a][flat] = if j == spec.n / 2 { 0.0 } else { kj };
            }
        }
        Ok(Self { spec, forward, backward, ksq, k })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// `|k|^2` per flat index.
    pub fn ksq(&self) -> &[f64] {
        &self.ksq
    }

    /// Derivative wavenumber along `axis`, zero at the Nyquist mode.
    pub fn k(&self, axis: usize) -> &[f64] {
        &self.k[axis]
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse transform, normalised, returning the real part.
    pub fn inverse(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut data, &self.backward);
        let scale = 1.0 / self.spec.len() as f64;
        data.into_iter().map(|c| c.re * scale).collect()
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.spec.n;
        let d = self.spec.d;
        let len = data.len();
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        if d == 1 {
            return;
        }
        let mut line = vec![Complex64::default(); n];
        for axis in 0..d - 1 {
            let stride = n.pow((d - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..len).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[start + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[start + j * stride] = *v;
                    }
                }
            }
        }
    }

    /// Spectral gradient of a field given by its transform.
    pub fn gradient(&self, hat: &[Complex64]) -> Vec<Vec<f64>> {
        (0..self.spec.d)
            .map(|a| {
                let g = hat.iter().zip(&self.k[a]).map(|(h, &k)| Complex64::new(-k * h.im, k * h.re)).collect();
                self.inverse(g)
            })
            .collect()
    }

    /// Transform of `div F` for a vector field given componentwise.
    pub fn divergence_hat(&self, components: &[Vec<f64>]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); self.spec.len()];
        for (a, comp) in components.iter().enumerate() {
            let hat = self.forward(comp);
            for ((o, h), &k) in out.iter_mut().zip(&hat).zip(&self.k[a]) {
                *o += Complex64::new(-k * h.im, k * h.re);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn spec_validation() {
        assert!(GridSpec::new(4, 8, 1.0).is_err());
        assert!(GridSpec::new(2, 7, 1.0).is_err());
        assert!(GridSpec::new(2, 8, 0.0).is_err());
        assert!(GridSpec::new(2, 8, f64::NAN).is_err());
        let s = GridSpec::new(3, 48, 12.0).unwrap();
        assert_eq!(s.len(), 48 * 48 * 48);
        assert_eq!(s.spacing(), 0.25);
    }

    #[test]
    fn point_layout() {
        let s = GridSpec::new(2, 4, 4.0).unwrap();
        let mut x = [0.0; 2];
        s.point(1, &mut x);
        assert_eq!(x, [-2.0, -1.0]);
        s.point(4, &mut x);
        assert_eq!(x, [-1.0, -2.0]);
    }

    #[test]
    fn wrap_is_minimum_image() {
        let s = GridSpec::new(1, 8, 10.0).unwrap();
        assert!((s.wrap(6.0) + 4.0).abs() < 1e-15);
        assert!((s.wrap(-6.0) - 4.0).abs() < 1e-15);
        assert!((s.wrap(1.5) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn roundtrip_and_derivative() {
        for d in 1..=3 {
            let s = GridSpec::new(d, 16, 2.0 * PI).unwrap();
            let sg = SpectralGrid::new(s).unwrap();
            let f = GridField::from_fn(s, |x| x.iter().map(|v| (2.0 * v).sin()).sum::<f64>() + 0.3);
            let hat = sg.forward(&f.values);
            let back = sg.inverse(hat.clone());
            for (a, b) in back.iter().zip(&f.values) {
                assert!((a - b).abs() < 1e-13);
            }
            let grad = sg.gradient(&hat);
            let mut x = [0.0; 3];
            for i in 0..s.len() {
                s.point(i, &mut x);
                for a in 0..d {
                    assert!((grad[a][i] - 2.0 * (2.0 * x[a]).cos()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_mode_is_sum() {
        let s = GridSpec::new(2, 8, 3.0).unwrap();
        let sg = SpectralGrid::new(s).unwrap();
        let f = GridField::from_fn(s, |x| (x[0] * x[1]).exp());
        let hat = sg.forward(&f.values);
        let sum: f64 = f.values.iter().sum();
        assert!((hat[0].re - sum).abs() < 1e-12 * sum.abs());
        let div = sg.divergence_hat(&[f.values.clone(), f.values.clone()]);
        assert_eq!(div[0], Complex64::new(0.0, 0.0));
    }
}
