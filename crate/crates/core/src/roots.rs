//! Bracketed scalar root finding shared by the flux inverse, the data inversion
//! and the characteristic solver.

/// Safeguarded Newton iteration on a bracket `[lo, hi]` where `g(lo)` and
/// `g(hi)` have opposite signs.
///
/// `g` returns the residual and its derivative. A Newton step that leaves the
/// current bracket, or fails to halve it, is replaced by a bisection step, so
/// convergence is guaranteed for continuous `g`. Returns `None` if the bracket
/// does not straddle a sign change.
pub(crate) fn newton_bisect<G>(mut g: G, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64>
where
    G: FnMut(f64) -> (f64, f64),
{
    let (mut g_lo, _) = g(lo);
    let (g_hi, _) = g(hi);
    if g_lo == 0.0 {
        return Some(lo);
    }
    if g_hi == 0.0 {
        return Some(hi);
    }
    if !(g_lo.is_finite() && g_hi.is_finite()) || g_lo.signum() == g_hi.signum() {
        return None;
    }

    let mut x = 0.5 * (lo + hi);
    let mut prev_step = hi - lo;
    for _ in 0..200 {
        let (gx, dgx) = g(x);
        if gx == 0.0 {
            return Some(x);
        }
        if gx.signum() == g_lo.signum() {
            lo = x;
            g_lo = gx;
        } else {
            hi = x;
        }
        if hi - lo <= tol {
            return Some(0.5 * (lo + hi));
        }

        let newton = x - gx / dgx;
        let step = (newton - x).abs();
        let newton_ok = dgx.is_finite() && dgx != 0.0 && newton > lo && newton < hi && step < 0.5 * prev_step;
        if newton_ok {
            prev_step = step;
            x = newton;
            if step <= 0.25 * tol {
                return Some(x);
            }
        } else {
            let mid = 0.5 * (lo + hi);
            prev_step = (mid - x).abs();
            x = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Plain bisection on a sign change of `g`; `g(lo)` and `g(hi)` must differ in sign.
pub(crate) fn bisect<G>(mut g: G, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64>
where
    G: FnMut(f64) -> f64,
{
    let g_lo = g(lo);
    let g_hi = g(hi);
    if !(g_lo.is_finite() && g_hi.is_finite()) || (g_lo > 0.0) == (g_hi > 0.0) {
        return None;
    }
    let lo_positive = g_lo > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid == lo || mid == hi {
            return Some(mid);
        }
        if (g(mid) > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_bisect_finds_cube_root() {
        let r = newton_bisect(|x| (x * x * x - 2.0, 3.0 * x * x), 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn newton_bisect_rejects_unbracketed() {
        assert!(newton_bisect(|x| (x * x + 1.0, 2.0 * x), -1.0, 1.0, 1e-12).is_none());
    }

    #[test]
    fn newton_bisect_survives_zero_derivative() {
        // derivative vanishes at the starting midpoint
        let r = newton_bisect(|x| (x.powi(3) - 0.001, 3.0 * x * x), -1.0, 1.0, 1e-14).unwrap();
        assert!((r - 0.1).abs() < 1e-12);
    }

    #[test]
    fn bisect_locates_sign_change() {
        let r = bisect(|x| x - 0.3, 0.0, 1.0, 1e-15).unwrap();
        assert!((r - 0.3).abs() < 1e-14);
    }
}
