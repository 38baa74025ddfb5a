use std::f64::consts::PI;

use rayon::prelude::*;

use super::ensemble::{moments, ParticleEnsemble};
use crate::error::{KsError, Result};
use crate::grid::{GridField, GridSpec};

/// Default constant in [`bandwidth_rule`].
pub const DEFAULT_BANDWIDTH_CONSTANT: f64 = 1.06;

/// Truncation radius of the Gaussian bump, in bandwidths.
const CUTOFF: f64 = 8.0;

/// `h = c sigma N^{-1/(d+4)}`, with `sigma` the root mean per-axis sample variance.
pub fn bandwidth_rule(positions: &[f64], d: usize, c: f64) -> f64 {
    let n = (positions.len() / d) as f64;
    let (_, var) = moments(positions, d);
    let sigma = (var.iter().sum::<f64>() / d as f64).sqrt();
    c * sigma * n.powf(-1.0 / (d as f64 + 4.0))
}

/// Particles within one bandwidth of the centre of the densest cell.
pub fn support_count(field: &GridField, positions: &[f64], bandwidth: f64) -> usize {
    let spec = field.spec;
    let d = spec.d;
    let densest = field
        .values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0;
    let mut centre = [0.0; 3];
    spec.point(densest, &mut centre[..d]);
    positions
        .chunks(d)
        .filter(|x| x.iter().zip(&centre).map(|(a, c)| spec.wrap(a - c).powi(2)).sum::<f64>() <= bandwidth * bandwidth)
        .count()
}

/// Gaussian KDE `(1/N) sum_j g_{h^2}(x - X^j)` on the torus, normalised to unit mass.
pub fn kde(positions: &[f64], d: usize, bandwidth: f64, spec: &GridSpec) -> Result<GridField> {
    spec.validate()?;
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(KsError::domain(format!("bandwidth must be > 0, got {bandwidth}")));
    }
    if d != spec.d || positions.is_empty() || !positions.len().is_multiple_of(d) {
        return Err(KsError::GridMismatch(format!(
            "{} coordinates cannot be {d}-dimensional particles on a {}-dimensional grid",
            positions.len(),
            spec.d
        )));
    }
    let n = spec.n;
    let h = spec.spacing();
    let reach = ((CUTOFF * bandwidth / h).ceil() as usize).min(n / 2);
    let span = if 2 * reach + 1 >= n { n } else { 2 * reach + 1 };
    let norm1 = 1.0 / (2.0 * PI * bandwidth * bandwidth).sqrt();
    let np = positions.len() / d;
    let chunk = (np / 64).max(256);
    let partial: Vec<Vec<f64>> = positions
        .par_chunks(chunk * d)
        .map(|block| {
            let mut acc = vec![0.0; spec.len()];
            let mut idx = vec![vec![0usize; span]; d];
            let mut val = vec![vec![0.0; span]; d];
            for x in block.chunks(d) {
                for a in 0..d {
                    let u = spec.wrap(x[a]) / h + 0.5 * n as f64;
                    let centre = u.round() as i64;
                    let start = if span == n { 0 } else { centre - reach as i64 };
                    for k in 0..span {
                        let j = (start + k as i64).rem_euclid(n as i64) as usize;
                        let dist = spec.wrap(spec.coord(j) - x[a]);
                        idx[a][k] = j;
                        val[a][k] = norm1 * (-0.5 * dist * dist / (bandwidth * bandwidth)).exp();
                    }
                }
                match d {
                    1 => {
                        for k in 0..span {
                            acc[idx[0][k]] += val[0][k];
                        }
                    }
                    2 => {
                        for k0 in 0..span {
                            let row = idx[0][k0] * n;
                            for k1 in 0..span {
                                acc[row + idx[1][k1]] += val[0][k0] * val[1][k1];
                            }
                        }
                    }
                    _ => {
                        for k0 in 0..span {
                            for k1 in 0..span {
                                let row = (idx[0][k0] * n + idx[1][k1]) * n;
                                let v01 = val[0][k0] * val[1][k1];
                                for k2 in 0..span {
                                    acc[row + idx[2][k2]] += v01 * val[2][k2];
                                }
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut values = vec![0.0; spec.len()];
    for p in &partial {
        for (v, a) in values.iter_mut().zip(p) {
            *v += a;
        }
    }
    let mass = values.iter().sum::<f64>() * spec.cell_volume();
    if !(mass > 0.0) {
        return Err(KsError::domain("KDE has zero mass on the grid"));
    }
    values.iter_mut().for_each(|v| *v /= mass);
    let field = GridField::new(*spec, values)?;
    let support = support_count(&field, positions, bandwidth);
    if support < 5 && np >= 5 {
        log::warn!(
            "KDE bandwidth {bandwidth:.3e} is small: only {support} particles within one bandwidth of the densest cell"
        );
    }
    Ok(field)
}

/// [`kde`] of the ensemble's current positions.
pub fn empirical_density(ens: &ParticleEnsemble, bandwidth: f64, spec: &GridSpec) -> Result<GridField> {
    kde(ens.positions(), ens.d(), bandwidth, spec)
}
