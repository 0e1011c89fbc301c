//! Scalar fields: the objects functionals are applied to.

use std::sync::Arc;

use crate::geometry::Point;

/// A real-valued field on R^d with optional derivative information.
///
/// `derivative_order` reports how many derivative orders the field can supply:
/// 0 means values only, 1 adds gradients, 2 adds Laplacians. Callers must
/// check the order before asking for derivatives; implementations may panic
/// when asked beyond their order.
pub trait Field: Send + Sync {
    fn dim(&self) -> usize;

    fn derivative_order(&self) -> usize;

    fn value(&self, x: &Point) -> f64;

    fn gradient(&self, _x: &Point) -> [f64; 2] {
        panic!("field does not provide gradients")
    }

    fn laplacian(&self, _x: &Point) -> f64 {
        panic!("field does not provide laplacians")
    }
}

/// Shared ownership alias used throughout the crate.
pub type ArcField = Arc<dyn Field>;

/// Field built from plain closures; values only.
pub struct FnField<F: Fn(&Point) -> f64 + Send + Sync> {
    dim: usize,
    f: F,
}

impl<F: Fn(&Point) -> f64 + Send + Sync> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F: Fn(&Point) -> f64 + Send + Sync> Field for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn derivative_order(&self) -> usize {
        0
    }

    fn value(&self, x: &Point) -> f64 {
        (self.f)(x)
    }
}

/// Field defined by closures for value, gradient, and Laplacian.
pub struct SmoothFnField {
    pub dim: usize,
    pub value: Box<dyn Fn(&Point) -> f64 + Send + Sync>,
    pub gradient: Box<dyn Fn(&Point) -> [f64; 2] + Send + Sync>,
    pub laplacian: Box<dyn Fn(&Point) -> f64 + Send + Sync>,
}

impl Field for SmoothFnField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn derivative_order(&self) -> usize {
        2
    }

    fn value(&self, x: &Point) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &Point) -> [f64; 2] {
        (self.gradient)(x)
    }

    fn laplacian(&self, x: &Point) -> f64 {
        (self.laplacian)(x)
    }
}

/// Pointwise linear combination `alpha*f + beta*g` of two fields.
pub struct LinearCombination {
    pub alpha: f64,
    pub f: ArcField,
    pub beta: f64,
    pub g: ArcField,
}

impl Field for LinearCombination {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn derivative_order(&self) -> usize {
        self.f.derivative_order().min(self.g.derivative_order())
    }

    fn value(&self, x: &Point) -> f64 {
        self.alpha * self.f.value(x) + self.beta * self.g.value(x)
    }

    fn gradient(&self, x: &Point) -> [f64; 2] {
        let a = self.f.gradient(x);
        let b = self.g.gradient(x);
        [
            self.alpha * a[0] + self.beta * b[0],
            self.alpha * a[1] + self.beta * b[1],
        ]
    }

    fn laplacian(&self, x: &Point) -> f64 {
        self.alpha * self.f.laplacian(x) + self.beta * self.g.laplacian(x)
    }
}

/// Central finite-difference gradient and Laplacian, for oracle checks.
pub fn fd_gradient(f: &dyn Field, x: &Point, step: f64) -> [f64; 2] {
    let mut g = [0.0; 2];
    for i in 0..f.dim() {
        let mut cp = x.coords().to_vec();
        cp[i] += step;
        let xp = Point::from_slice(&cp).unwrap();
        cp[i] -= 2.0 * step;
        let xm = Point::from_slice(&cp).unwrap();
        g[i] = (f.value(&xp) - f.value(&xm)) / (2.0 * step);
    }
    g
}

/// Central finite-difference Laplacian, for oracle checks.
pub fn fd_laplacian(f: &dyn Field, x: &Point, step: f64) -> f64 {
    let mut lap = 0.0;
    let center = f.value(x);
    for i in 0..f.dim() {
        let mut cp = x.coords().to_vec();
        cp[i] += step;
        let xp = Point::from_slice(&cp).unwrap();
        cp[i] -= 2.0 * step;
        let xm = Point::from_slice(&cp).unwrap();
        lap += (f.value(&xp) - 2.0 * center + f.value(&xm)) / (step * step);
    }
    lap
}
