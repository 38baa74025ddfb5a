/// `phi1(z) = (e^z - 1) / z`, with `phi1(0) = 1`.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 0.5 {
        series(z, 1)
    } else {
        z.exp_m1() / z
    }
}

/// `phi2(z) = (e^z - 1 - z) / z^2`, with `phi2(0) = 1/2`.
pub fn phi2(z: f64) -> f64 {
    if z.abs() < 0.5 {
        series(z, 2)
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// `sum_k z^k / (k + offset)!`.
fn series(z: f64, offset: u32) -> f64 {
    let mut term = 1.0 / (1..=offset).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..20 {
        term *= z / f64::from(k + offset);
        sum += term;
    }
    sum
}
