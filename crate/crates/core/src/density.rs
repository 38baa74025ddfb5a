//! Lebesgue norms, the weighted sup functional and distances on grid fields.

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::exponent::Exponent;
use crate::grid::GridField;

/// `(sum |f|^r h^d)^{1/r}`, or the grid maximum of `|f|` for `r = inf`.
pub fn lq_norm_grid(f: &GridField, r: Exponent) -> f64 {
    lq_norm_values(&f.values, f.spec.cell_volume(), r)
}

pub(crate) fn lq_norm_values(values: &[f64], cell: f64, r: Exponent) -> f64 {
    match r {
        Exponent::Infinity => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        Exponent::Finite(r) if r == 1.0 => values.iter().map(|v| v.abs()).sum::<f64>() * cell,
        Exponent::Finite(r) if r == 2.0 => (values.iter().map(|v| v * v).sum::<f64>() * cell).sqrt(),
        Exponent::Finite(r) => {
            let scale = values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            if scale == 0.0 {
                return 0.0;
            }
            let s: f64 = values.iter().map(|v| (v.abs() / scale).powf(r)).sum();
            scale * (s * cell).powf(1.0 / r)
        }
    }
}

/// `|| f - g ||_r`.
pub fn field_distance(f: &GridField, g: &GridField, r: Exponent) -> Result<f64> {
    Ok(lq_norm_grid(&f.sub(g)?, r))
}

/// Time series of `||f_t||_r`, the weighted values `t^alpha ||f_t||_r` and
/// their running supremum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSeries {
    pub r: Exponent,
    pub weight_exponent: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub weighted: Vec<f64>,
    pub running_sup: Vec<f64>,
}

impl NormSeries {
    pub fn new(r: Exponent, weight_exponent: f64) -> Self {
        Self {
            r,
            weight_exponent,
            times: Vec::new(),
            values: Vec::new(),
            weighted: Vec::new(),
            running_sup: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, norm: f64) -> Result<()> {
        if self.times.last().is_some_and(|&last| t <= last) {
            return Err(KsError::domain(format!("series times must increase, got {t}")));
        }
        if self.weight_exponent != 0.0 && !(t > 0.0) {
            return Err(KsError::domain(format!("weighted series needs t > 0, got {t}")));
        }
        let w = if self.weight_exponent == 0.0 { norm } else { t.powf(self.weight_exponent) * norm };
        let sup = self.running_sup.last().map_or(w, |&s| s.max(w));
        self.times.push(t);
        self.values.push(norm);
        self.weighted.push(w);
        self.running_sup.push(sup);
        Ok(())
    }

    /// Overall supremum of the weighted values.
    pub fn sup(&self) -> f64 {
        self.running_sup.last().copied().unwrap_or(0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,norm,weighted,running_sup\n");
        for i in 0..self.times.len() {
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e}\n",
                self.times[i], self.values[i], self.weighted[i], self.running_sup[i]
            ));
        }
        out
    }
}

/// Weight exponent `1 - d/(2r)` of the functional `sup_s s^{1-d/2r} ||f_s||_r`.
pub fn script_n_exponent(d: usize, r: Exponent) -> f64 {
    1.0 - 0.5 * d as f64 * r.reciprocal()
}

/// Weight used when reporting decay: `1 - d/(2r)` above `d/2`, and zero at
/// or below it, where the norms themselves stay bounded.
pub fn decay_weight_exponent(d: usize, r: Exponent) -> f64 {
    script_n_exponent(d, r).max(0.0)
}

/// `N_t^r` over a sequence of `(t, f_t)` with every `t > 0`.
pub fn script_n<'a>(
    fields: impl IntoIterator<Item = (f64, &'a GridField)>,
    r: Exponent,
    d: usize,
) -> Result<NormSeries> {
    let mut series = NormSeries::new(r, script_n_exponent(d, r));
    for (t, f) in fields {
        if !(t > 0.0) {
            return Err(KsError::domain(format!("N functional needs t > 0, got {t}")));
        }
        series.push(t, lq_norm_grid(f, r))?;
    }
    Ok(series)
}
