use serde::{Deserialize, Serialize};

use super::Density;
use crate::error::{Error, Result};

/// Affine map `x -> (x - a) / (b - a)` from the data scale onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportTransform {
    pub a: f64,
    pub b: f64,
}

impl SupportTransform {
    pub const DEFAULT_PADDING: f64 = 0.05;

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() || !(a < b) {
            return Err(Error::InvalidInterval { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn identity() -> Self {
        Self { a: 0.0, b: 1.0 }
    }

    /// `[min - padding * range, max + padding * range]`.
    pub fn from_data(data: &[f64], padding: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidInput("empty data".into()));
        }
        if !(padding >= 0.0) || !padding.is_finite() {
            return Err(Error::InvalidConfig(format!("padding {padding} must be a non-negative number")));
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &x in data {
            if !x.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite datum {x}")));
            }
            lo = lo.min(x);
            hi = hi.max(x);
        }
        let range = hi - lo;
        if !(range > 0.0) {
            return Err(Error::DegenerateData);
        }
        Self::new(lo - padding * range, hi + padding * range)
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        (x - self.a) / self.width()
    }

    pub fn from_unit(&self, u: f64) -> f64 {
        self.a + self.width() * u
    }

    /// Maps every datum to [0, 1]; values a rounding error outside are clamped.
    pub fn map_data(&self, data: &[f64]) -> Vec<f64> {
        data.iter()
            .map(|&x| {
                let u = self.to_unit(x);
                if (-1e-12..0.0).contains(&u) {
                    0.0
                } else if u > 1.0 && u <= 1.0 + 1e-12 {
                    1.0
                } else {
                    u
                }
            })
            .collect()
    }
}

/// The density of `t^{-1}(U)` for `U ~ inner`, i.e. `inner` carried from
/// [0, 1] onto `[a, b]` with Jacobian `1 / (b - a)`.
#[derive(Debug, Clone)]
pub struct TransformedDensity<D> {
    inner: D,
    transform: SupportTransform,
}

/// Carries a density on [0, 1] onto the data scale `[a, b]`.
pub fn transform_density<D: Density>(g: D, t: SupportTransform) -> Result<TransformedDensity<D>> {
    SupportTransform::new(t.a, t.b)?;
    Ok(TransformedDensity { inner: g, transform: t })
}

impl<D> TransformedDensity<D> {
    pub fn inner(&self) -> &D {
        &self.inner
    }

    pub fn transform(&self) -> SupportTransform {
        self.transform
    }
}

impl<D: Density> Density for TransformedDensity<D> {
    fn pdf(&self, y: f64) -> f64 {
        self.inner.pdf(self.transform.to_unit(y)) / self.transform.width()
    }

    fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.inner.support();
        (self.transform.from_unit(lo), self.transform.from_unit(hi))
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.inner.breakpoints().into_iter().map(|u| self.transform.from_unit(u)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::HistogramDensity;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn default_padding() {
        let t = SupportTransform::from_data(&[0.0, 10.0, 4.0], 0.05).unwrap();
        assert_abs_diff_eq!(t.a, -0.5);
        assert_abs_diff_eq!(t.b, 10.5);
        assert_eq!(SupportTransform::from_data(&[3.0, 3.0], 0.05), Err(Error::DegenerateData));
        assert!(SupportTransform::new(1.0, 1.0).is_err());
    }

    #[test]
    fn identity_leaves_density_unchanged() {
        let h = HistogramDensity::new(vec![0.1, 0.9]).unwrap();
        let t = transform_density(h.clone(), SupportTransform::identity()).unwrap();
        for x in [0.0, 0.3, 0.7, 1.0] {
            assert_abs_diff_eq!(t.pdf(x), h.pdf(x));
        }
    }

    #[test]
    fn uniform_maps_to_uniform() {
        let u = HistogramDensity::uniform(1).unwrap();
        let t = transform_density(u, SupportTransform::new(10.0, 20.0).unwrap()).unwrap();
        assert_abs_diff_eq!(t.pdf(15.0), 0.1);
        assert_eq!(t.support(), (10.0, 20.0));
        assert_eq!(t.pdf(25.0), 0.0);
    }

    proptest! {
        #[test]
        fn round_trip(a in -1e3f64..1e3, w in 1e-3f64..1e3, x in -1e4f64..1e4) {
            let t = SupportTransform::new(a, a + w).unwrap();
            let back = t.from_unit(t.to_unit(x));
            prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(a.abs() + w).max(1.0));
        }
    }
}
