//! Time-indexed snapshot storage with geometric thinning.

use serde::{Deserialize, Serialize};

/// Slices younger than `window` are all kept. An older slice of age `a` is
/// kept only if it lies at least `growth (a - window)` after the next older
/// kept slice. The first and newest slices are always kept, and `max_slices`
/// caps the total by repeatedly dropping the interior slice that leaves the
/// smallest merged gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThinningPolicy {
    pub window: f64,
    pub growth: f64,
    pub max_slices: Option<usize>,
}

impl ThinningPolicy {
    pub fn keep_all() -> Self {
        Self { window: f64::INFINITY, growth: 0.0, max_slices: None }
    }

    pub fn keeps_all(&self) -> bool {
        self.window == f64::INFINITY && self.max_slices.is_none()
    }
}

impl Default for ThinningPolicy {
    fn default() -> Self {
        Self::keep_all()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct History<T> {
    times: Vec<f64>,
    items: Vec<T>,
    policy: ThinningPolicy,
}

impl<T> History<T> {
    pub fn new(policy: ThinningPolicy) -> Self {
        Self { times: Vec::new(), items: Vec::new(), policy }
    }

    pub fn policy(&self) -> ThinningPolicy {
        self.policy
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &T)> {
        self.times.iter().copied().zip(self.items.iter())
    }

    pub fn last(&self) -> Option<(f64, &T)> {
        self.times.last().copied().zip(self.items.last())
    }

    /// Append a slice (times must increase strictly) and thin.
    /// Returns the indices removed, in increasing order of the pre-removal layout.
    pub fn push(&mut self, t: f64, item: T) -> Vec<usize> {
        assert!(self.times.last().is_none_or(|&last| t > last), "history times must increase strictly");
        self.times.push(t);
        self.items.push(item);
        let keep = thinning_mask(&self.times, &self.policy);
        let removed: Vec<usize> = keep.iter().enumerate().filter(|(_, k)| !**k).map(|(i, _)| i).collect();
        if !removed.is_empty() {
            let mut i = 0;
            self.times.retain(|_| {
                i += 1;
                keep[i - 1]
            });
            let mut i = 0;
            self.items.retain(|_| {
                i += 1;
                keep[i - 1]
            });
        }
        removed
    }
}

fn thinning_mask(times: &[f64], policy: &ThinningPolicy) -> Vec<bool> {
    let n = times.len();
    let mut keep = vec![true; n];
    if n <= 2 {
        return keep;
    }
    let now = times[n - 1];
    if policy.window.is_finite() {
        let mut newer_kept = now;
        for i in (1..n - 1).rev() {
            let age = now - times[i];
            if age > policy.window && newer_kept - times[i] < policy.growth * (age - policy.window) {
                keep[i] = false;
            } else {
                newer_kept = times[i];
            }
        }
    }
    if let Some(cap) = policy.max_slices {
        let cap = cap.max(2);
        let mut kept: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
        while kept.len() > cap {
            let (pos, _) = (1..kept.len() - 1)
                .map(|p| (p, times[kept[p + 1]] - times[kept[p - 1]]))
                .fold((1, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
            keep[kept[pos]] = false;
            kept.remove(pos);
        }
    }
    keep
}

/// Trapezoid weights for `int_{t_0}^{t_m} f(s) ds` on the nodes `times`.
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = times[i + 1] - times[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}
