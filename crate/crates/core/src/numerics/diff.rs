use crate::error::{Error, Result};

/// Central-difference gradient with absolute step `h` in every coordinate.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::InvalidConfig("finite-difference step must be positive".into()));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        for (xv, v) in [(x[i] + h, fp), (x[i] - h, fm)] {
            if !v.is_finite() {
                return Err(Error::NonFinite { x: xv, value: v });
            }
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn square() {
        let g = finite_diff_grad(|x| x[0] * x[0], &[3.0], 1e-5).unwrap();
        assert_abs_diff_eq!(g[0], 6.0, epsilon = 1e-8);
    }

    #[test]
    fn product() {
        let g = finite_diff_grad(|x| x[0] * x[1], &[2.0, 5.0], 1e-5).unwrap();
        assert_abs_diff_eq!(g[0], 5.0, epsilon = 1e-8);
        assert_abs_diff_eq!(g[1], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn normal_log_density_score() {
        let logpdf = |x: &[f64]| -0.5 * x[0] * x[0] - 0.5 * (2.0 * std::f64::consts::PI).ln();
        let g = finite_diff_grad(logpdf, &[1.0], 1e-5).unwrap();
        assert_abs_diff_eq!(g[0], -1.0, epsilon = 1e-8);
    }

    #[test]
    fn error_is_second_order() {
        let f = |x: &[f64]| x[0].sin() * x[0].exp();
        let exact = |x: f64| x.cos() * x.exp() + x.sin() * x.exp();
        let e1 = (finite_diff_grad(f, &[0.7], 1e-2).unwrap()[0] - exact(0.7)).abs();
        let e2 = (finite_diff_grad(f, &[0.7], 5e-3).unwrap()[0] - exact(0.7)).abs();
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn non_finite_rejected() {
        let r = finite_diff_grad(|x| x[0].ln(), &[0.0], 1e-3);
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }
}
