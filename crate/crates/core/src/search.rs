//! One-dimensional maximization.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of `f` on `[lo, hi]`, stopping once the
/// bracket is narrower than `tol`. Returns `(argmax, max)` over every point
/// evaluated, endpoints included, so the result never falls below the better
/// endpoint.
pub(crate) fn golden_section_max<F, E>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut best = (a, f(a)?);
    let fb = f(b)?;
    if fb > best.1 {
        best = (b, fb);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        for (x, fx) in [(c, fc), (d, fd)] {
            if fx > best.1 {
                best = (x, fx);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| Ok::<_, Infallible>(1.0 - (x - 0.3).powi(2)), 0.0, 1.0, 1e-9).unwrap();
        assert!((x - 0.3).abs() < 1e-8);
        assert!((fx - 1.0).abs() < 1e-15);
    }

    #[test]
    fn endpoint_maximum_is_kept() {
        let (x, _) = golden_section_max(|x| Ok::<_, Infallible>(x), 0.0, 2.0, 1e-6).unwrap();
        assert_eq!(x, 2.0);
    }
}
