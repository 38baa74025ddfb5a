use serde::{Deserialize, Serialize};

use crate::constants::ModelParams;
use crate::density::{decay_weight_exponent, lq_norm_grid, NormSeries};
use crate::error::Result;
use crate::exponent::Exponent;
use crate::grid::GridField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub mass: f64,
    pub sup_norm: f64,
    pub min_value: f64,
    /// Cells below `-1e-8 sup |rho|`.
    pub negative_cells: usize,
}

impl StepDiagnostics {
    pub const CSV_HEADER: &'static str = "t,mass,sup_norm,min_value,negative_cells";

    pub fn csv_row(&self) -> String {
        format!("{:e},{:.17e},{:e},{:e},{}", self.t, self.mass, self.sup_norm, self.min_value, self.negative_cells)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEntry {
    pub r: Exponent,
    /// Whether the values carry the weight `t^{1-d/2r}` (only for `r > d/2`).
    pub weighted: bool,
    pub sup: f64,
    /// The bound this entry is compared against, if one applies.
    pub bound: Option<f64>,
    pub within_bound: Option<bool>,
    pub series: NormSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub d: usize,
    pub q: f64,
    pub entries: Vec<DecayEntry>,
}

impl DecayReport {
    /// Attach bounds to already-tracked norm series: `C_q (1 + tol)` for
    /// `r = q` and `density_bound (1 + tol)` for `r = d/2`.
    pub fn from_series(
        series: &[NormSeries],
        params: &ModelParams,
        c_q: Option<f64>,
        density_bound: Option<f64>,
        tolerance: f64,
    ) -> Self {
        let d = params.d;
        let entries = series
            .iter()
            .map(|s| {
                let rf = s.r.as_f64();
                let bound = if (rf - params.q).abs() < 1e-12 {
                    c_q
                } else if (rf - 0.5 * d as f64).abs() < 1e-12 {
                    density_bound
                } else {
                    None
                };
                let sup = s.sup();
                DecayEntry {
                    r: s.r,
                    weighted: s.weight_exponent > 0.0,
                    sup,
                    bound,
                    within_bound: bound.map(|b| sup <= b * (1.0 + tolerance)),
                    series: s.clone(),
                }
            })
            .collect();
        Self { d, q: params.q, entries }
    }

    pub fn entry(&self, r: f64) -> Option<&DecayEntry> {
        self.entries.iter().find(|e| (e.r.as_f64() - r).abs() < 1e-12)
    }
}

/// Build the decay report from a sequence of density fields.
/// Weighted entries skip `t = 0`.
pub fn density_decay_report<'a>(
    fields: impl IntoIterator<Item = (f64, &'a GridField)>,
    params: &ModelParams,
    exponents: &[Exponent],
    c_q: Option<f64>,
    density_bound: Option<f64>,
) -> Result<DecayReport> {
    let d = params.d;
    let mut series: Vec<NormSeries> =
        exponents.iter().map(|&r| NormSeries::new(r, decay_weight_exponent(d, r))).collect();
    for (t, f) in fields {
        for s in &mut series {
            if t > 0.0 || s.weight_exponent == 0.0 {
                s.push(t, lq_norm_grid(f, s.r))?;
            }
        }
    }
    Ok(DecayReport::from_series(&series, params, c_q, density_bound, 0.0))
}
