//! Small quadrature and interpolation helpers.

/// Eight-point Gauss-Legendre rule on [-1, 1]: (node, weight) for the
/// positive nodes; the rule is symmetric.
const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// Eight-point Gauss-Legendre nodes and weights mapped to [0, 1].
pub fn gauss8_unit() -> [(f64, f64); 8] {
    let mut out = [(0.0, 0.0); 8];
    for (i, &(x, w)) in GL8.iter().enumerate() {
        out[2 * i] = (0.5 * (1.0 - x), 0.5 * w);
        out[2 * i + 1] = (0.5 * (1.0 + x), 0.5 * w);
    }
    out
}

/// Composite Gauss-Legendre quadrature of `f` over [a, b] with `panels`
/// equal sub-intervals.
pub fn gauss_composite(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss8_unit();
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let left = a + p as f64 * h;
        let mut s = 0.0;
        for &(x, w) in &rule {
            s += w * f(left + x * h);
        }
        total += s * h;
    }
    total
}

/// Trapezoid weights for `n` equally spaced nodes with spacing `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}

/// Cubic Lagrange weights for the four nodes at offsets -1, 0, 1, 2 from the
/// cell containing a point at fractional position `u` in [0, 1).
#[inline]
pub fn cubic_weights(u: f64) -> [f64; 4] {
    let um1 = u - 1.0;
    let um2 = u - 2.0;
    let up1 = u + 1.0;
    [
        -u * um1 * um2 / 6.0,
        up1 * um1 * um2 / 2.0,
        -up1 * u * um2 / 2.0,
        up1 * u * um1 / 6.0,
    ]
}

/// Cubic Hermite interpolation on [0, h] from endpoint values and slopes,
/// evaluated at `s` in [0, h].
#[inline]
pub fn hermite(f0: f64, d0: f64, f1: f64, d1: f64, h: f64, s: f64) -> f64 {
    let u = s / h;
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1
}

/// Ordinary least squares line through `(x, y)`: returns (slope, intercept,
/// rms residual).
pub fn least_squares_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let r = b - (intercept + slope * a);
        ss += r * r;
    }
    (slope, intercept, (ss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss8_integrates_degree_15_exactly() {
        let rule = gauss8_unit();
        let s: f64 = rule.iter().map(|&(x, w)| w * x.powi(15)).sum();
        assert!((s - 1.0 / 16.0).abs() < 1e-15);
        let total: f64 = rule.iter().map(|&(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cubic_weights_reproduce_cubics() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x - 0.25 * x * x * x;
        for &u in &[0.0, 0.3, 0.77] {
            let w = cubic_weights(u);
            let v = w[0] * f(-1.0) + w[1] * f(0.0) + w[2] * f(1.0) + w[3] * f(2.0);
            assert!((v - f(u)).abs() < 1e-14);
        }
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |x: f64| 0.3 + x - 2.0 * x * x + 0.7 * x * x * x;
        let df = |x: f64| 1.0 - 4.0 * x + 2.1 * x * x;
        let h = 0.4;
        let v = hermite(f(0.0), df(0.0), f(h), df(h), h, 0.13);
        assert!((v - f(0.13)).abs() < 1e-14);
    }

    #[test]
    fn least_squares_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (s, c, r) = least_squares_line(&x, &y);
        assert!((s + 0.5).abs() < 1e-14 && (c - 2.0).abs() < 1e-13 && r < 1e-13);
    }
}
