//! Scalar minimizers shared by the solver and the optimizers.

pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// 1/phi, the golden-section shrink factor.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of a bracketed scalar minimization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    pub evals: usize,
}

/// Golden-section search on `[lo, hi]`.
///
/// Returns the best point evaluated, so the result is never worse than the
/// interior probes. The bracket endpoints themselves are not evaluated.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, xtol: f64, max_evals: usize) -> Minimum
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evals = 2;
    let mut best = if fc <= fd { Minimum { x: c, fx: fc, evals } } else { Minimum { x: d, fx: fd, evals } };
    while (b - a) > xtol && evals < max_evals {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc < best.fx {
                best.x = c;
                best.fx = fc;
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd < best.fx {
                best.x = d;
                best.fx = fd;
            }
        }
        evals += 1;
    }
    best.evals = evals;
    best
}

/// Brent's method (golden section with parabolic steps) on `[lo, hi]`.
///
/// `xtol` is an absolute tolerance on the abscissa; a relative floor of
/// `sqrt(eps)` is always added.
pub fn brent<F>(mut f: F, lo: f64, hi: f64, xtol: f64, max_iter: usize) -> Minimum
where
    F: FnMut(f64) -> f64,
{
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    const ZEPS: f64 = 1e-300;
    let (mut a, mut b) = (lo, hi);
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut evals = 1;
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = 1.490_116_119_384_765_6e-8 * x.abs() + xtol / 3.0 + ZEPS;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d >= 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        evals += 1;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Minimum { x, fx, evals }
}

/// Largest `s` in `[lo, hi]` with `pred(s)`, assuming `pred(lo)` holds and
/// `pred(hi)` fails. Plain bisection.
pub(crate) fn bisect_last_true<P>(mut pred: P, mut lo: f64, mut hi: f64, iters: usize) -> f64
where
    P: FnMut(f64) -> bool,
{
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Smallest `s` in `[lo, hi]` with `pred(s)`, assuming `pred(hi)` holds and
/// `pred(lo)` fails.
pub(crate) fn bisect_first_true<P>(mut pred: P, mut lo: f64, mut hi: f64, iters: usize) -> f64
where
    P: FnMut(f64) -> bool,
{
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `3s^2 - 2s^3` clamped to `[0, 1]`.
pub(crate) fn smoothstep(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * (3.0 - 2.0 * s)
    }
}

/// Derivative of [`smoothstep`] with respect to `s`.
pub(crate) fn smoothstep_slope(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        6.0 * s * (1.0 - s)
    }
}
