//! One-dimensional maximization of concave functions on an interval.

/// Result of a 1-D maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub argmax: f64,
    pub value: f64,
}

const MAX_BISECTIONS: usize = 400;

/// Maximizes a concave `value` on `[lo, hi]` using its right derivative
/// `slope`, which must be non-increasing. Bisects on the sign of the slope
/// until the bracket is narrower than `tol` (or cannot shrink further in
/// floating point).
pub fn maximize_by_slope<F, G>(value: F, slope: G, lo: f64, hi: f64, tol: f64) -> Maximum
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    debug_assert!(lo <= hi);
    let at = |x: f64| Maximum {
        argmax: x,
        value: value(x),
    };
    if hi <= lo || slope(lo) <= 0.0 {
        return at(lo);
    }
    if slope(hi) > 0.0 {
        return at(hi);
    }
    // slope(a) > 0 >= slope(b)
    let (mut a, mut b) = (lo, hi);
    for _ in 0..MAX_BISECTIONS {
        if b - a <= tol {
            break;
        }
        let mid = a + 0.5 * (b - a);
        if mid <= a || mid >= b {
            break;
        }
        if slope(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let (fa, fb) = (at(a), at(b));
    if fb.value >= fa.value {
        fb
    } else {
        fa
    }
}

/// Golden-section search for the maximum of a concave (more generally
/// unimodal) `f` on `[lo, hi]`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Maximum {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        }
        if !(a < c && c <= d && d < b) {
            break;
        }
    }
    // the endpoints are candidates too: concave functions may peak there
    [(lo, f(lo)), (hi, f(hi)), (c, fc), (d, fd)]
        .into_iter()
        .fold(
            Maximum {
                argmax: lo,
                value: f64::NEG_INFINITY,
            },
            |best, (x, v)| {
                if v > best.value {
                    Maximum {
                        argmax: x,
                        value: v,
                    }
                } else {
                    best
                }
            },
        )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_peak() {
        let f = |x: f64| -(x - 0.3) * (x - 0.3);
        let df = |x: f64| -2.0 * (x - 0.3);
        let m = maximize_by_slope(f, df, 0.0, 1.0, 1e-14);
        assert!((m.argmax - 0.3).abs() < 1e-13);
        let g = golden_section_max(f, 0.0, 1.0, 1e-10);
        assert!((g.argmax - 0.3).abs() < 1e-7);
    }

    #[test]
    fn boundary_optima() {
        let inc = |x: f64| x;
        assert_eq!(maximize_by_slope(inc, |_| 1.0, 0.0, 2.0, 1e-12).argmax, 2.0);
        assert_eq!(golden_section_max(inc, 0.0, 2.0, 1e-12).argmax, 2.0);
        let dec = |x: f64| -x;
        assert_eq!(
            maximize_by_slope(dec, |_| -1.0, 0.0, 2.0, 1e-12).argmax,
            0.0
        );
        assert_eq!(golden_section_max(dec, 0.0, 2.0, 1e-12).argmax, 0.0);
    }

    #[test]
    fn kinked_peak() {
        // min(x, 1 - x) peaks at the kink
        let f = |x: f64| x.min(1.0 - x);
        let df = |x: f64| if x < 0.5 { 1.0 } else { -1.0 };
        let m = maximize_by_slope(f, df, 0.0, 1.0, 1e-15);
        assert!((m.argmax - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_interval() {
        let m = maximize_by_slope(|x| x, |_| 1.0, 0.5, 0.5, 1e-12);
        assert_eq!(m.argmax, 0.5);
    }
}
