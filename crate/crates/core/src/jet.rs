//! Grid-pointwise truncated Taylor arithmetic in σ.
//!
//! A [`Jet`] holds, for every order n ≤ L, the values of the order-n
//! coefficient on a θ-grid. Products are Cauchy products in σ taken
//! pointwise on the grid.

/// The operations a polynomial vector field is allowed to use.
///
/// Models written against this trait evaluate identically on `f64` and on
/// [`Jet`]: the order-0 slot of a jet goes through exactly the same
/// floating-point operations as the scalar path.
pub trait Arith: Clone {
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn scale(&self, c: f64) -> Self;
    fn offset(&self, c: f64) -> Self;
    /// A constant with the same shape as `self`.
    fn constant_like(&self, c: f64) -> Self;

    fn square(&self) -> Self {
        self.mul(self)
    }

    fn powi(&self, p: u32) -> Self {
        let mut acc = self.constant_like(1.0);
        for _ in 0..p {
            acc = acc.mul(self);
        }
        acc
    }
}

impl Arith for f64 {
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn offset(&self, c: f64) -> Self {
        self + c
    }
    fn constant_like(&self, c: f64) -> Self {
        c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    coeffs: Vec<Vec<f64>>,
}

impl Jet {
    /// Builds a jet from per-order grid values; all rows must share a length.
    pub fn new(coeffs: Vec<Vec<f64>>) -> Self {
        assert!(!coeffs.is_empty(), "jet needs an order-0 slot");
        let n = coeffs[0].len();
        assert!(coeffs.iter().all(|c| c.len() == n), "ragged jet");
        Self { coeffs }
    }

    pub fn constant(value: f64, order: usize, len: usize) -> Self {
        let mut coeffs = vec![vec![0.0; len]; order + 1];
        coeffs[0].iter_mut().for_each(|v| *v = value);
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn len(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs[0].is_empty()
    }

    pub fn coefficient(&self, n: usize) -> &[f64] {
        &self.coeffs[n]
    }

    pub fn into_coefficients(self) -> Vec<Vec<f64>> {
        self.coeffs
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.order(), other.order(), "jet orders differ");
        assert_eq!(self.len(), other.len(), "jet grids differ");
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        Self { coeffs }
    }
}

impl Arith for Jet {
    fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.order(), other.order(), "jet orders differ");
        assert_eq!(self.len(), other.len(), "jet grids differ");
        let order = self.order();
        let len = self.len();
        let mut coeffs = Vec::with_capacity(order + 1);
        for n in 0..=order {
            let mut row: Vec<f64> = self.coeffs[0]
                .iter()
                .zip(&other.coeffs[n])
                .map(|(a, b)| a * b)
                .collect();
            for i in 1..=n {
                let a = &self.coeffs[i];
                let b = &other.coeffs[n - i];
                for m in 0..len {
                    row[m] += a[m] * b[m];
                }
            }
            coeffs.push(row);
        }
        Self { coeffs }
    }

    fn scale(&self, c: f64) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .map(|r| r.iter().map(|v| v * c).collect())
                .collect(),
        }
    }

    fn offset(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0].iter_mut().for_each(|v| *v += c);
        out
    }

    fn constant_like(&self, c: f64) -> Self {
        Jet::constant(c, self.order(), self.len())
    }
}
