use std::fmt;

/// A measured or derived value with its one-standard-deviation uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub const fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    pub const fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }

    /// Relative uncertainty; zero when the value itself is zero.
    pub fn relative(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            (self.sigma / self.value).abs()
        }
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(3);
        write!(f, "{:.*}±{:.*}", digits, self.value, digits, self.sigma)
    }
}

/// Quadrature sum.
pub(crate) fn hypot_all(terms: &[f64]) -> f64 {
    terms.iter().map(|x| x * x).sum::<f64>().sqrt()
}
