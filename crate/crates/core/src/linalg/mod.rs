//! Sparse storage, direct factorizations, GMRES and small vector helpers.

pub mod factor;
pub mod gmres;
pub mod mtx;
pub mod sparse;

pub use factor::Factorization;
pub use gmres::{gmres, gmres_checked, GmresOptions, GmresResult};
pub use sparse::CsrMatrix;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(alpha: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| alpha * x).collect()
}

/// Sum of products carried in two doubles via error-free transformations,
/// accurate as if computed in twice the working precision.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    hi: f64,
    lo: f64,
}

impl CompensatedSum {
    pub fn new(x: f64) -> Self {
        CompensatedSum { hi: x, lo: 0.0 }
    }

    pub fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bb = s - self.hi;
        self.lo += (self.hi - (s - bb)) + (x - bb);
        self.hi = s;
    }

    pub fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.add(p);
        self.lo += a.mul_add(b, -p);
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let mut s = CompensatedSum::new(1e16);
        s.add(1.0);
        s.add(-1e16);
        assert_eq!(s.value(), 1.0);
        let mut naive = 1e16;
        naive += 1.0;
        naive -= 1e16;
        assert_eq!(naive, 0.0);
        // (1 + 2^-30)^2 - 1 - 2^-29 = 2^-60
        let a = 1.0 + 2f64.powi(-30);
        let mut s = CompensatedSum::new(-1.0);
        s.add_product(a, a);
        s.add(-(2f64.powi(-29)));
        assert_eq!(s.value(), 2f64.powi(-60));
    }
}
