//! Radial kernels and the closed-form derivatives needed by collocation
//! functionals and symmetric collocation.
//!
//! Whittle–Matérn kernels are realized in closed form for half-integer orders
//! (order `m` with `m - d/2 - 1/2` integer), as a polynomial in `t = r/shape`
//! times `exp(-t)`. Laplacians are obtained by symbolic manipulation of that
//! polynomial, so no Bessel functions are involved. Matérn and Gaussian
//! kernels are normalized to `K(x,x) = 1`; the multiquadric is kept in its
//! classical unnormalized form and flagged as only conditionally positive
//! definite.

use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    WhittleMatern,
    Gaussian,
    Multiquadric,
}

/// A translation-invariant radial kernel `K(x,y) = phi(|x-y|)`.
#[derive(Clone, Debug)]
pub struct RadialKernel {
    family: KernelFamily,
    /// Matérn order m (reproduces H^m); ignored for Gaussian/multiquadric.
    smoothness: f64,
    shape: f64,
    dim: usize,
    matern: Option<MaternProfile>,
}

/// Polynomial factors of a half-integer Matérn kernel and its derivatives,
/// all to be multiplied by exp(-t) with t = r/shape.
#[derive(Clone, Debug)]
struct MaternProfile {
    /// K = q(t) e^{-t}
    q: Vec<f64>,
    /// phi'(r)/r = gf(t) e^{-t} / shape^2  (present when order allows gradients)
    gf: Option<Vec<f64>>,
    /// Laplacian = lap(t) e^{-t} / shape^2
    lap: Option<Vec<f64>>,
    /// Double (bi)Laplacian = bilap(t) e^{-t} / shape^4
    bilap: Option<Vec<f64>>,
}

fn poly_eval(p: &[f64], t: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// d/dt of p(t) e^{-t}, returned as the polynomial factor: p' - p.
fn poly_d(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut out = vec![0.0; n];
    for k in 0..n {
        out[k] = -p[k];
        if k + 1 < n {
            out[k] += (k + 1) as f64 * p[k + 1];
        }
    }
    out
}

/// Divide a polynomial by t. The constant term must vanish (it does exactly
/// for admissible Matérn orders; floating-point residue is discarded).
fn poly_div_t(p: &[f64]) -> Result<Vec<f64>> {
    let scale = p.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1.0);
    if p[0].abs() > 1e-9 * scale {
        return Err(Error::InvalidParameter(format!(
            "radial profile not divisible by t (constant term {})",
            p[0]
        )));
    }
    Ok(p[1..].to_vec())
}

/// Radial Laplacian in dimension d applied to p(t) e^{-t}:
/// f'' + (d-1) f'/t, returned as the polynomial factor.
fn poly_radial_laplacian(p: &[f64], d: usize) -> Result<Vec<f64>> {
    let dp = poly_d(p);
    let ddp = poly_d(&dp);
    let dp_over_t = poly_div_t(&dp)?;
    let mut out = ddp;
    for (k, c) in dp_over_t.iter().enumerate() {
        out[k] += (d as f64 - 1.0) * c;
    }
    Ok(out)
}

impl RadialKernel {
    /// Whittle–Matérn kernel reproducing H^m(R^d); requires half-integer
    /// `nu = m - d/2` (so that a closed form exists) and `nu > 0`.
    pub fn whittle_matern(smoothness: f64, shape: f64, dim: usize) -> Result<Self> {
        if shape <= 0.0 {
            return Err(Error::InvalidParameter("shape must be > 0".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dim must be >= 1".into()));
        }
        let nu = smoothness - dim as f64 / 2.0;
        let p_real = nu - 0.5;
        let p = p_real.round();
        if nu <= 0.0 || (p_real - p).abs() > 1e-9 || p < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Matérn order m={smoothness} in dim {dim} gives nu={nu}; need half-integer nu > 0"
            )));
        }
        let p = p as usize;

        // q(t) = (p!/(2p)!) * sum_{i=0}^{p} (p+i)!/(i!(p-i)!) (2t)^{p-i}
        let fact = |n: usize| (1..=n).fold(1.0f64, |a, k| a * k as f64);
        let norm = fact(p) / fact(2 * p);
        let mut q = vec![0.0; p + 1];
        for i in 0..=p {
            let deg = p - i;
            q[deg] = norm * fact(p + i) / (fact(i) * fact(p - i)) * 2f64.powi(deg as i32);
        }

        let gf = if p >= 1 {
            Some(poly_div_t(&poly_d(&q))?)
        } else {
            None
        };
        let lap = if p >= 2 {
            Some(poly_radial_laplacian(&q, dim)?)
        } else {
            None
        };
        let bilap = match &lap {
            Some(l) if p >= 4 => Some(poly_radial_laplacian(l, dim)?),
            _ => None,
        };

        Ok(RadialKernel {
            family: KernelFamily::WhittleMatern,
            smoothness,
            shape,
            dim,
            matern: Some(MaternProfile { q, gf, lap, bilap }),
        })
    }

    pub fn gaussian(shape: f64, dim: usize) -> Result<Self> {
        if shape <= 0.0 {
            return Err(Error::InvalidParameter("shape must be > 0".into()));
        }
        Ok(RadialKernel {
            family: KernelFamily::Gaussian,
            smoothness: f64::INFINITY,
            shape,
            dim,
            matern: None,
        })
    }

    pub fn multiquadric(shape: f64, dim: usize) -> Result<Self> {
        if shape <= 0.0 {
            return Err(Error::InvalidParameter("shape must be > 0".into()));
        }
        Ok(RadialKernel {
            family: KernelFamily::Multiquadric,
            smoothness: f64::INFINITY,
            shape,
            dim,
            matern: None,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Multiquadrics are only conditionally positive definite; the optimal
    /// recovery construction refuses them.
    pub fn is_positive_definite(&self) -> bool {
        self.family != KernelFamily::Multiquadric
    }

    fn check_dims(&self, x: &Point, y: &Point) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.dim() });
        }
        if y.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: y.dim() });
        }
        Ok(())
    }

    /// Derivative orders (in one argument) this kernel supports:
    /// 1 = gradient, 2 = Laplacian, 4 = Laplacian in both arguments.
    pub fn supports_order(&self, order: usize) -> bool {
        match self.family {
            KernelFamily::Gaussian | KernelFamily::Multiquadric => true,
            KernelFamily::WhittleMatern => {
                let m = self.matern.as_ref().unwrap();
                match order {
                    0 => true,
                    1 => m.gf.is_some(),
                    2 => m.lap.is_some(),
                    _ => m.bilap.is_some(),
                }
            }
        }
    }

    fn require_order(&self, order: usize) -> Result<()> {
        if self.supports_order(order) {
            Ok(())
        } else {
            let need = match order {
                1 => 1.0,
                2 => 2.0,
                _ => 4.0,
            } + self.dim as f64 / 2.0;
            Err(Error::InsufficientSmoothness { have: self.smoothness, need, dim: self.dim })
        }
    }

    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_dims(x, y)?;
        Ok(self.value_r(x.dist(y)))
    }

    pub fn value_r(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let u = r / self.shape;
                (-u * u).exp()
            }
            KernelFamily::Multiquadric => {
                let u = r / self.shape;
                (1.0 + u * u).sqrt()
            }
            KernelFamily::WhittleMatern => {
                let t = r / self.shape;
                poly_eval(&self.matern.as_ref().unwrap().q, t) * (-t).exp()
            }
        }
    }

    /// `phi'(r)/r`, so that `grad_x K(x,y) = grad_factor * (x - y)`.
    pub fn grad_factor_r(&self, r: f64) -> Result<f64> {
        self.require_order(1)?;
        let c2 = self.shape * self.shape;
        Ok(match self.family {
            KernelFamily::Gaussian => -2.0 / c2 * self.value_r(r),
            KernelFamily::Multiquadric => {
                let w = 1.0 + r * r / c2;
                1.0 / c2 * w.powf(-0.5)
            }
            KernelFamily::WhittleMatern => {
                let t = r / self.shape;
                let prof = self.matern.as_ref().unwrap();
                poly_eval(prof.gf.as_ref().unwrap(), t) * (-t).exp() / c2
            }
        })
    }

    /// Radial Laplacian `Delta_x K(x,y)` as a function of `r = |x-y|`.
    pub fn laplacian_r(&self, r: f64) -> Result<f64> {
        self.require_order(2)?;
        let d = self.dim as f64;
        let c2 = self.shape * self.shape;
        Ok(match self.family {
            KernelFamily::Gaussian => {
                let s = r * r;
                self.value_r(r) * (-2.0 * d / c2 + 4.0 * s / (c2 * c2))
            }
            KernelFamily::Multiquadric => {
                let s = r * r;
                let b = 1.0 / c2;
                let w = 1.0 + b * s;
                d * b * w.powf(-0.5) - s * b * b * w.powf(-1.5)
            }
            KernelFamily::WhittleMatern => {
                let t = r / self.shape;
                let prof = self.matern.as_ref().unwrap();
                poly_eval(prof.lap.as_ref().unwrap(), t) * (-t).exp() / c2
            }
        })
    }

    /// Double radial Laplacian, equal to `Delta_x Delta_y K(x,y)` by
    /// translation invariance.
    pub fn bilaplacian_r(&self, r: f64) -> Result<f64> {
        self.require_order(4)?;
        let d = self.dim as f64;
        let c2 = self.shape * self.shape;
        Ok(match self.family {
            KernelFamily::Gaussian => {
                let s = r * r;
                let c4 = c2 * c2;
                self.value_r(r)
                    * (4.0 * d * (d + 2.0) / c4 - 16.0 * s * (d + 2.0) / (c4 * c2)
                        + 16.0 * s * s / (c4 * c4))
            }
            KernelFamily::Multiquadric => {
                let s = r * r;
                let b = 1.0 / c2;
                let w = 1.0 + b * s;
                let g2 = -0.25 * b * b * w.powf(-1.5);
                let g3 = 0.375 * b * b * b * w.powf(-2.5);
                let g4 = -0.9375 * b * b * b * b * w.powf(-3.5);
                2.0 * d * (2.0 * d + 4.0) * g2 + (16.0 * d * s + 32.0 * s) * g3 + 16.0 * s * s * g4
            }
            KernelFamily::WhittleMatern => {
                let t = r / self.shape;
                let prof = self.matern.as_ref().unwrap();
                poly_eval(prof.bilap.as_ref().unwrap(), t) * (-t).exp() / (c2 * c2)
            }
        })
    }

    pub fn eval_grad_x(&self, x: &Point, y: &Point) -> Result<[f64; 2]> {
        self.check_dims(x, y)?;
        let gf = self.grad_factor_r(x.dist(y))?;
        let d = x.sub(y);
        Ok([gf * d[0], gf * d[1]])
    }

    /// `Delta_x K(x, y)`.
    pub fn eval_laplacian_x(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_dims(x, y)?;
        self.laplacian_r(x.dist(y))
    }

    /// `Delta_x Delta_y K(x, y)`.
    pub fn eval_laplacian_xy(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_dims(x, y)?;
        self.bilaplacian_r(x.dist(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{fd_laplacian, SmoothFnField};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut impl Rng, dim: usize) -> Point {
        match dim {
            1 => Point::new1(rng.gen_range(-1.0..1.0)),
            _ => Point::new2(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        }
    }

    #[test]
    fn normalization_at_zero_distance() {
        let g = RadialKernel::gaussian(1.0, 2).unwrap();
        let p = Point::new2(0.3, -0.2);
        assert_eq!(g.eval(&p, &p).unwrap(), 1.0);
        for m in [3.5, 4.5, 5.5] {
            let k = RadialKernel::whittle_matern(m, 0.7, 2).unwrap();
            assert!((k.eval(&p, &p).unwrap() - 1.0).abs() < 1e-14, "m={m}");
        }
    }

    #[test]
    fn gaussian_closed_form_at_unit_distance() {
        let g = RadialKernel::gaussian(1.0, 2).unwrap();
        let v = g.eval(&Point::new2(0.0, 0.0), &Point::new2(1.0, 0.0)).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_laplacian_at_origin() {
        let g = RadialKernel::gaussian(1.0, 2).unwrap();
        let p = Point::new2(0.4, 0.1);
        assert!((g.eval_laplacian_x(&p, &p).unwrap() + 4.0).abs() < 1e-13);
    }

    #[test]
    fn laplacian_symmetry_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = RadialKernel::whittle_matern(4.5, 0.5, 2).unwrap();
        for _ in 0..20 {
            let x = random_point(&mut rng, 2);
            let y = random_point(&mut rng, 2);
            let a = k.eval_laplacian_x(&x, &y).unwrap();
            let b = k.eval_laplacian_x(&y, &x).unwrap();
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    fn kernel_as_field(k: RadialKernel, y: Point) -> SmoothFnField {
        let k2 = k.clone();
        let k3 = k.clone();
        SmoothFnField {
            dim: k.dim(),
            value: Box::new(move |x| k.eval(x, &y).unwrap()),
            gradient: Box::new(move |x| k2.eval_grad_x(x, &y).unwrap()),
            laplacian: Box::new(move |x| k3.eval_laplacian_x(x, &y).unwrap()),
        }
    }

    #[test]
    fn laplacians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let kernels = vec![
            RadialKernel::gaussian(0.8, 2).unwrap(),
            RadialKernel::multiquadric(0.9, 2).unwrap(),
            RadialKernel::whittle_matern(4.5, 0.6, 2).unwrap(),
            RadialKernel::whittle_matern(5.5, 0.6, 2).unwrap(),
            RadialKernel::whittle_matern(4.0, 0.5, 1).unwrap(),
        ];
        for k in kernels {
            let dim = k.dim();
            for _ in 0..20 {
                let y = random_point(&mut rng, dim);
                let x = random_point(&mut rng, dim);
                if x.dist(&y) < 0.05 {
                    continue;
                }
                let f = kernel_as_field(k.clone(), y);
                let exact = k.eval_laplacian_x(&x, &y).unwrap();
                let fd = fd_laplacian(&f, &x, 1e-4);
                assert!(
                    (exact - fd).abs() <= 1e-6 + 1e-5 * exact.abs(),
                    "{:?}: exact {exact}, fd {fd}",
                    k.family()
                );
            }
        }
    }

    #[test]
    fn bilaplacian_matches_fd_of_laplacian() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for k in [
            RadialKernel::gaussian(0.9, 2).unwrap(),
            RadialKernel::whittle_matern(6.5, 0.7, 2).unwrap(),
        ] {
            for _ in 0..10 {
                let y = random_point(&mut rng, 2);
                let x = random_point(&mut rng, 2);
                // FD-Laplacian in x of the closed-form Delta_y K(x, .).
                let kk = k.clone();
                let lap_y = SmoothFnField {
                    dim: 2,
                    value: Box::new(move |p: &Point| kk.eval_laplacian_x(p, &y).unwrap()),
                    gradient: Box::new(|_| [0.0, 0.0]),
                    laplacian: Box::new(|_| 0.0),
                };
                let exact = k.eval_laplacian_xy(&x, &y).unwrap();
                let fd = fd_laplacian(&lap_y, &x, 1e-4);
                assert!(
                    (exact - fd).abs() <= 1e-4 + 1e-5 * exact.abs(),
                    "{:?}: exact {exact}, fd {fd}",
                    k.family()
                );
            }
        }
    }

    #[test]
    fn insufficient_smoothness_is_an_error() {
        // m = 3.5, d = 2 gives nu = 2.5: Laplacian ok, double Laplacian not.
        let k = RadialKernel::whittle_matern(3.5, 0.5, 2).unwrap();
        let x = Point::new2(0.1, 0.2);
        let y = Point::new2(0.5, 0.7);
        assert!(k.eval_laplacian_x(&x, &y).is_ok());
        assert!(matches!(
            k.eval_laplacian_xy(&x, &y),
            Err(Error::InsufficientSmoothness { .. })
        ));
        // m = 2.5, d = 2 gives nu = 1.5: no Laplacian at all.
        let k = RadialKernel::whittle_matern(2.5, 0.5, 2).unwrap();
        assert!(matches!(
            k.eval_laplacian_x(&x, &y),
            Err(Error::InsufficientSmoothness { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let k = RadialKernel::gaussian(1.0, 2).unwrap();
        assert!(matches!(
            k.eval(&Point::new1(0.0), &Point::new2(0.0, 0.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gram_matrices_are_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in [
            RadialKernel::gaussian(0.7, 2).unwrap(),
            RadialKernel::whittle_matern(4.5, 0.5, 2).unwrap(),
        ] {
            let pts: Vec<Point> = (0..20).map(|_| random_point(&mut rng, 2)).collect();
            let n = pts.len();
            let gram = nalgebra::DMatrix::from_fn(n, n, |i, j| k.eval(&pts[i], &pts[j]).unwrap());
            // Symmetry.
            for i in 0..n {
                for j in 0..n {
                    assert!((gram[(i, j)] - gram[(j, i)]).abs() < 1e-14);
                }
            }
            let eig = gram.symmetric_eigen();
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min > 0.0, "{:?}: min eigenvalue {min}", k.family());
        }
    }

    #[test]
    fn matern_half_integer_order_required() {
        assert!(RadialKernel::whittle_matern(4.0, 0.5, 2).is_err());
        assert!(RadialKernel::whittle_matern(4.5, 0.5, 2).is_ok());
        assert!(RadialKernel::whittle_matern(0.5, 0.5, 2).is_err());
    }
}
