//! Scalar numerics shared across the engine.
//!
//! Everything operates on `f64` and is deterministic: fixed iteration
//! schedules, no randomness, no wall-clock input. Entropies are in bits
//! (base-2 logarithms) throughout the crate.

/// Natural log of 2; converts `ln` to `log2` and back.
pub const LN_2: f64 = core::f64::consts::LN_2;

/// Binary Shannon entropy `H₂(p) = −p·log₂p − (1−p)·log₂(1−p)` in bits.
///
/// Input is clamped to `[0, 1]`; the endpoints return exactly 0. Evaluation
/// is symmetric under `p ↔ 1−p` and stays accurate near the endpoints by
/// computing the `(1−q)` logarithm via `log1p`.
pub fn binary_entropy(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let q = if p > 0.5 { 1.0 - p } else { p };
    if q <= 0.0 {
        return 0.0;
    }
    // log2(1−q) = log1p(−q)/ln2, accurate because q ≤ 1/2.
    let log2_q = libm::log2(q);
    let log2_1mq = libm::log1p(-q) / LN_2;
    -q * log2_q - (1.0 - q) * log2_1mq
}

/// Standard normal probability density `φ(x)`.
pub fn normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.3989422804014327; // 1/√(2π)
    INV_SQRT_2PI * libm::exp(-0.5 * x * x)
}

/// Standard normal CDF `Φ(x)`, via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal upper tail `P(Z > x) = 1 − Φ(x)`, computed directly from
/// `erfc` so that deep tails keep full relative accuracy.
pub fn normal_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Why a bracketing root search failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootError {
    /// `f(lo)` and `f(hi)` have the same sign: no crossing is bracketed.
    NoSignChange,
    /// The iteration cap was reached before the tolerance was met.
    NoConvergence,
    /// The function returned NaN inside the bracket.
    NotFinite,
}

impl core::fmt::Display for RootError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RootError::NoSignChange => write!(f, "no sign change over the search interval"),
            RootError::NoConvergence => write!(f, "root search did not converge"),
            RootError::NotFinite => write!(f, "function value was not finite"),
        }
    }
}

impl core::error::Error for RootError {}

/// Bisection root finding on `[lo, hi]`.
///
/// Requires a sign change between the endpoints. Stops when the bracket is
/// narrower than `x_tol` or `|f| ≤ f_tol`; errors with
/// [`RootError::NoConvergence`] if `max_iter` halvings pass first.
pub fn bisect<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    x_tol: f64,
    f_tol: f64,
    max_iter: u32,
) -> Result<f64, RootError> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if !flo.is_finite() || !fhi.is_finite() {
        return Err(RootError::NotFinite);
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(RootError::NoSignChange);
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if !fmid.is_finite() {
            return Err(RootError::NotFinite);
        }
        if fmid.abs() <= f_tol || (hi - lo).abs() <= x_tol {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Err(RootError::NoConvergence)
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
///
/// Returns `(argmin, min)`. Runs until the bracket is narrower than `x_tol`
/// (bounded by a fixed iteration cap, so it always terminates).
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.6180339887498949; // (√5−1)/2
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..256 {
        if (hi - lo).abs() <= x_tol {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Nelder–Mead minimization in two dimensions with a fixed iteration budget.
///
/// Deterministic: the simplex update sequence depends only on the initial
/// simplex and the function. Returns the best vertex found. The objective may
/// return `f64::INFINITY` to encode constraint violations.
pub fn nelder_mead_2d<F: Fn([f64; 2]) -> f64>(
    f: F,
    start: [f64; 2],
    scale: [f64; 2],
    iterations: u32,
) -> ([f64; 2], f64) {
    let mut pts = [
        start,
        [start[0] + scale[0], start[1]],
        [start[0], start[1] + scale[1]],
    ];
    let mut vals = [f(pts[0]), f(pts[1]), f(pts[2])];

    let order = |pts: &mut [[f64; 2]; 3], vals: &mut [f64; 3]| {
        // insertion sort by value, ties keep index order (deterministic)
        for i in 1..3 {
            let (p, v) = (pts[i], vals[i]);
            let mut j = i;
            while j > 0 && vals[j - 1] > v {
                pts[j] = pts[j - 1];
                vals[j] = vals[j - 1];
                j -= 1;
            }
            pts[j] = p;
            vals[j] = v;
        }
    };

    for _ in 0..iterations {
        order(&mut pts, &mut vals);
        let centroid = [
            0.5 * (pts[0][0] + pts[1][0]),
            0.5 * (pts[0][1] + pts[1][1]),
        ];
        let worst = pts[2];
        let refl = [
            centroid[0] + (centroid[0] - worst[0]),
            centroid[1] + (centroid[1] - worst[1]),
        ];
        let f_refl = f(refl);
        if f_refl < vals[0] {
            let exp = [
                centroid[0] + 2.0 * (centroid[0] - worst[0]),
                centroid[1] + 2.0 * (centroid[1] - worst[1]),
            ];
            let f_exp = f(exp);
            if f_exp < f_refl {
                pts[2] = exp;
                vals[2] = f_exp;
            } else {
                pts[2] = refl;
                vals[2] = f_refl;
            }
        } else if f_refl < vals[1] {
            pts[2] = refl;
            vals[2] = f_refl;
        } else {
            let contr = [
                centroid[0] + 0.5 * (worst[0] - centroid[0]),
                centroid[1] + 0.5 * (worst[1] - centroid[1]),
            ];
            let f_contr = f(contr);
            if f_contr < vals[2] {
                pts[2] = contr;
                vals[2] = f_contr;
            } else {
                // shrink toward the best vertex
                for i in 1..3 {
                    pts[i] = [
                        pts[0][0] + 0.5 * (pts[i][0] - pts[0][0]),
                        pts[0][1] + 0.5 * (pts[i][1] - pts[0][1]),
                    ];
                    vals[i] = f(pts[i]);
                }
            }
        }
    }
    order(&mut pts, &mut vals);
    (pts[0], vals[0])
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol` (recursion depth capped; the cap keeps evaluation deterministic and
/// finite on any input).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        let s = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        (m, fm, s)
    }
    #[allow(clippy::too_many_arguments)] // the argument list is the recursion state
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(&f, a, fa, b, fb);
    recurse(&f, a, fa, b, fb, m, fm, whole, tol, 40)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_entropy_reference_points() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.5) - 1.0).abs() < 1e-15);
        // H₂(1/4) = 2 − (3/4)·log₂3, evaluated independently.
        assert!((binary_entropy(0.25) - 0.8112781244591329).abs() < 1e-14);
        // symmetry
        for i in 1..50 {
            let p = i as f64 / 50.0;
            assert!((binary_entropy(p) - binary_entropy(1.0 - p)).abs() < 1e-15);
        }
    }

    #[test]
    fn log2_reference_value() {
        // input-side min-entropy at bias 0.16: −log₂(0.84)
        assert!((-libm::log2(0.84) - 0.25153876699596445).abs() < 1e-15);
    }

    #[test]
    fn normal_tail_reference_points() {
        // standard-normal mass beyond one sigma
        assert!((normal_tail(1.0) - 0.15865525393145707).abs() < 1e-15);
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        // complementarity
        for i in -40..=40 {
            let x = i as f64 * 0.2;
            assert!((normal_cdf(x) + normal_tail(x) - 1.0).abs() < 1e-14);
            assert!((normal_cdf(x) - (1.0 - normal_cdf(-x))).abs() < 1e-14);
        }
    }

    #[test]
    fn bisect_finds_known_root() {
        // fixed point of cos (Dottie number)
        let root = bisect(|x| libm::cos(x) - x, 0.0, 1.0, 1e-14, 0.0, 200).unwrap();
        assert!((root - 0.7390851332151607).abs() < 1e-12);
    }

    #[test]
    fn bisect_reports_missing_bracket() {
        assert_eq!(
            bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 0.0, 100),
            Err(RootError::NoSignChange)
        );
    }

    #[test]
    fn golden_min_quadratic() {
        let (x, fx) = golden_min(|x| (x - 2.0) * (x - 2.0) + 1.0, -5.0, 7.0, 1e-12);
        // Argmin accuracy is limited to ~√ε for a quadratic minimum: near
        // x*, f(x) − f(x*) underflows the value comparison.
        assert!((x - 2.0).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nelder_mead_quadratic_bowl() {
        let ([x, y], v) = nelder_mead_2d(
            |p| (p[0] - 1.5) * (p[0] - 1.5) + 2.0 * (p[1] + 0.5) * (p[1] + 0.5),
            [0.0, 0.0],
            [0.5, 0.5],
            200,
        );
        assert!((x - 1.5).abs() < 1e-6);
        assert!((y + 0.5).abs() < 1e-6);
        assert!(v < 1e-10);
    }

    #[test]
    fn simpson_polynomial_and_gaussian() {
        let cube = integrate(|x| x * x, 0.0, 1.0, 1e-12);
        assert!((cube - 1.0 / 3.0).abs() < 1e-12);
        // total Gaussian mass over ±8 sigma, cross-checked against the CDF
        let mass = integrate(normal_pdf, -8.0, 8.0, 1e-12);
        let expected = normal_cdf(8.0) - normal_cdf(-8.0);
        assert!((mass - expected).abs() < 1e-10);
    }
}
