//! Log-domain arithmetic and one-dimensional adaptive quadrature.

/// Below this, an unnormalized log-mass is treated as numerically zero.
pub const LOG_MASS_FLOOR: f64 = -745.0;

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `log(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Normalizes log-weights in place so that `sum(exp(w)) * cell == 1`.
/// Returns the log normalizing constant that was subtracted.
pub fn normalize_log_weights(log_w: &mut [f64], cell: f64) -> f64 {
    let lse = log_sum_exp(log_w) + cell.ln();
    if lse.is_finite() {
        for w in log_w.iter_mut() {
            *w -= lse;
        }
    }
    lse
}

/// Ordinary least squares of `y` on `x`. Returns (slope, intercept, r2).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy <= f64::EPSILON * f64::EPSILON * n * (1.0 + my * my) {
        // a flat series is perfectly explained by a zero-slope line
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (slope, intercept, r2)
}

// 15-point Kronrod nodes and weights with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    /// Value of the integral.
    pub value: f64,
    /// Estimated absolute error.
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Globally adaptive Gauss–Kronrod (7/15) integration over `[a, b]`.
///
/// Stops when the summed error estimate falls below `max(abs_tol, rel_tol * |value|)`
/// or after `max_intervals` bisections.
const INITIAL_PIECES: usize = 8;

pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Quadrature {
    integrate_with_limit(f, a, b, abs_tol, rel_tol, 2000)
}

pub fn integrate_with_limit<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Quadrature {
    if a == b {
        return Quadrature { value: 0.0, error: 0.0, evaluations: 0, converged: true };
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    // a few equal pieces up front so a narrow peak is not missed by a single rule
    let pieces = INITIAL_PIECES.min(max_intervals.max(1));
    let width = (hi - lo) / pieces as f64;
    let mut intervals = Vec::with_capacity(pieces);
    for i in 0..pieces {
        let l = lo + width * i as f64;
        let r = if i + 1 == pieces { hi } else { lo + width * (i + 1) as f64 };
        let (v, e) = gk15(&f, l, r);
        intervals.push((l, r, v, e));
    }
    let mut value: f64 = intervals.iter().map(|iv| iv.2).sum();
    let mut error: f64 = intervals.iter().map(|iv| iv.3).sum();
    let mut evaluations = 15 * pieces;
    let mut converged = false;
    while intervals.len() < max_intervals {
        if error <= abs_tol.max(rel_tol * value.abs()) {
            converged = true;
            break;
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (l, r, v0, e0) = intervals.swap_remove(worst);
        let m = 0.5 * (l + r);
        if m <= l || m >= r {
            // interval can no longer be split in floating point
            intervals.push((l, r, v0, 0.0));
            error -= e0;
            continue;
        }
        let (v1, e1) = gk15(&f, l, m);
        let (v2, e2) = gk15(&f, m, r);
        evaluations += 30;
        value += v1 + v2 - v0;
        error += e1 + e2 - e0;
        intervals.push((l, m, v1, e1));
        intervals.push((m, r, v2, e2));
    }
    if !converged && error <= abs_tol.max(rel_tol * value.abs()) {
        converged = true;
    }
    // re-sum to shed accumulated rounding from the running totals
    value = intervals.iter().map(|iv| iv.2).sum();
    error = intervals.iter().map(|iv| iv.3).sum::<f64>().max(0.0);
    Quadrature { value: sign * value, error, evaluations, converged }
}
