//! Finite-dimensional trial spaces and their nodal reparametrizations.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::kernels::RadialKernel;

/// Basis used for 1D polynomial spaces. Monomials are kept only as the
/// deliberately ill-conditioned diagnostic; Chebyshev is the default.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolyBasis {
    Chebyshev,
    Monomial,
}

/// Functionals a representer span can be built from: point evaluations and
/// negative-Laplacian evaluations, which is all symmetric collocation needs.
#[derive(Clone, Debug)]
pub enum RepresenterFunctional {
    PointEval(Point),
    NegLaplacian(Point),
}

#[derive(Clone, Debug)]
pub enum TrialSpace {
    /// Polynomials of the given degree on [a, b].
    Polynomial { degree: usize, a: f64, b: f64, basis: PolyBasis },
    /// Span of kernel translates K(., c_j).
    KernelTranslates { kernel: RadialKernel, centers: Vec<Point> },
    /// Span of kernel representers of the given functionals.
    RepresenterSpan { kernel: RadialKernel, functionals: Vec<RepresenterFunctional> },
    /// A space rewritten in a Lagrange basis over `nodes`:
    /// psi_i = sum_j transform[(j, i)] phi_j with psi_i(node_k) = delta_ik.
    Nodal { inner: Box<TrialSpace>, nodes: Vec<Point>, transform: DMatrix<f64> },
}

impl TrialSpace {
    /// Number of basis functions.
    pub fn dim(&self) -> usize {
        match self {
            TrialSpace::Polynomial { degree, .. } => degree + 1,
            TrialSpace::KernelTranslates { centers, .. } => centers.len(),
            TrialSpace::RepresenterSpan { functionals, .. } => functionals.len(),
            TrialSpace::Nodal { nodes, .. } => nodes.len(),
        }
    }

    /// Ambient space dimension (1 or 2).
    pub fn space_dim(&self) -> usize {
        match self {
            TrialSpace::Polynomial { .. } => 1,
            TrialSpace::KernelTranslates { kernel, .. } => kernel.dim(),
            TrialSpace::RepresenterSpan { kernel, .. } => kernel.dim(),
            TrialSpace::Nodal { inner, .. } => inner.space_dim(),
        }
    }

    pub fn is_nodal(&self) -> bool {
        matches!(self, TrialSpace::Nodal { .. })
    }

    /// Values of all basis functions at `x`.
    pub fn eval_basis(&self, x: &Point) -> Result<Vec<f64>> {
        match self {
            TrialSpace::Polynomial { degree, a, b, basis } => {
                Ok(poly_rows(*degree, *a, *b, *basis, x.x()).0)
            }
            TrialSpace::KernelTranslates { kernel, centers } => {
                centers.iter().map(|c| kernel.eval(x, c)).collect()
            }
            TrialSpace::RepresenterSpan { kernel, functionals } => functionals
                .iter()
                .map(|f| match f {
                    RepresenterFunctional::PointEval(y) => kernel.eval(x, y),
                    // -Delta_y K(x, .) at y; radial symmetry reuses Delta_x.
                    RepresenterFunctional::NegLaplacian(y) => {
                        kernel.eval_laplacian_x(x, y).map(|v| -v)
                    }
                })
                .collect(),
            TrialSpace::Nodal { inner, transform, .. } => {
                Ok(apply_transform(&inner.eval_basis(x)?, transform))
            }
        }
    }

    /// Gradients of all basis functions at `x`.
    pub fn eval_basis_gradient(&self, x: &Point) -> Result<Vec<[f64; 2]>> {
        match self {
            TrialSpace::Polynomial { degree, a, b, basis } => {
                let d = poly_rows(*degree, *a, *b, *basis, x.x()).1;
                Ok(d.into_iter().map(|v| [v, 0.0]).collect())
            }
            TrialSpace::KernelTranslates { kernel, centers } => {
                centers.iter().map(|c| kernel.eval_grad_x(x, c)).collect()
            }
            TrialSpace::RepresenterSpan { kernel, functionals } => functionals
                .iter()
                .map(|f| match f {
                    RepresenterFunctional::PointEval(y) => kernel.eval_grad_x(x, y),
                    RepresenterFunctional::NegLaplacian(_) => {
                        Err(Error::UnsupportedDerivative { requested: 3 })
                    }
                })
                .collect(),
            TrialSpace::Nodal { inner, transform, .. } => {
                let g = inner.eval_basis_gradient(x)?;
                let n = transform.ncols();
                let mut out = vec![[0.0; 2]; n];
                for (j, gj) in g.iter().enumerate() {
                    for (i, o) in out.iter_mut().enumerate() {
                        let t = transform[(j, i)];
                        o[0] += t * gj[0];
                        o[1] += t * gj[1];
                    }
                }
                Ok(out)
            }
        }
    }

    /// Laplacians of all basis functions at `x`.
    pub fn eval_basis_laplacian(&self, x: &Point) -> Result<Vec<f64>> {
        match self {
            TrialSpace::Polynomial { degree, a, b, basis } => {
                Ok(poly_rows(*degree, *a, *b, *basis, x.x()).2)
            }
            TrialSpace::KernelTranslates { kernel, centers } => {
                centers.iter().map(|c| kernel.eval_laplacian_x(x, c)).collect()
            }
            TrialSpace::RepresenterSpan { kernel, functionals } => functionals
                .iter()
                .map(|f| match f {
                    RepresenterFunctional::PointEval(y) => kernel.eval_laplacian_x(x, y),
                    RepresenterFunctional::NegLaplacian(y) => {
                        kernel.eval_laplacian_xy(x, y).map(|v| -v)
                    }
                })
                .collect(),
            TrialSpace::Nodal { inner, transform, .. } => {
                Ok(apply_transform(&inner.eval_basis_laplacian(x)?, transform))
            }
        }
    }

    /// Value of `sum_j coeffs[j] * phi_j` at `x`.
    pub fn eval_combination(&self, coeffs: &[f64], x: &Point) -> Result<f64> {
        debug_assert_eq!(coeffs.len(), self.dim());
        Ok(dot(&self.eval_basis(x)?, coeffs))
    }

    /// Gradient of `sum_j coeffs[j] * phi_j` at `x`.
    pub fn grad_combination(&self, coeffs: &[f64], x: &Point) -> Result<[f64; 2]> {
        debug_assert_eq!(coeffs.len(), self.dim());
        let g = self.eval_basis_gradient(x)?;
        let mut out = [0.0; 2];
        for (gj, c) in g.iter().zip(coeffs) {
            out[0] += c * gj[0];
            out[1] += c * gj[1];
        }
        Ok(out)
    }

    /// Rewrite the space in the Lagrange basis of the given nodes. Requires as
    /// many nodes as basis functions; fails when the interpolation matrix is
    /// numerically singular.
    pub fn to_nodal(&self, nodes: &[Point]) -> Result<TrialSpace> {
        let m = self.dim();
        if nodes.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: nodes.len() });
        }
        let mut v = DMatrix::zeros(m, m);
        for (k, p) in nodes.iter().enumerate() {
            let row = self.eval_basis(p)?;
            for (j, val) in row.iter().enumerate() {
                v[(k, j)] = *val;
            }
        }
        let svd = v.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
        if ratio < 1e-12 {
            return Err(Error::SingularInterpolation { ratio });
        }
        // With V[(k,j)] = phi_j(node_k), the Lagrange coefficients are the
        // columns of V^{-1}: (V * V^{-1})[(k,i)] = delta_ki.
        let transform = v
            .lu()
            .try_inverse()
            .ok_or(Error::SingularInterpolation { ratio })?;
        Ok(TrialSpace::Nodal {
            inner: Box::new(self.clone()),
            nodes: nodes.to_vec(),
            transform,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn apply_transform(row: &[f64], transform: &DMatrix<f64>) -> Vec<f64> {
    let n = transform.ncols();
    (0..n)
        .map(|i| row.iter().enumerate().map(|(j, v)| v * transform[(j, i)]).sum())
        .collect()
}

/// Values, first, and second derivatives of the 1D polynomial basis at `x`.
fn poly_rows(degree: usize, a: f64, b: f64, basis: PolyBasis, x: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = degree + 1;
    let mut v = Vec::with_capacity(m);
    let mut d1 = Vec::with_capacity(m);
    let mut d2 = Vec::with_capacity(m);
    match basis {
        PolyBasis::Monomial => {
            for k in 0..m {
                let kf = k as f64;
                v.push(x.powi(k as i32));
                d1.push(if k >= 1 { kf * x.powi(k as i32 - 1) } else { 0.0 });
                d2.push(if k >= 2 { kf * (kf - 1.0) * x.powi(k as i32 - 2) } else { 0.0 });
            }
        }
        PolyBasis::Chebyshev => {
            let s = 2.0 / (b - a);
            let t = s * x - (a + b) / (b - a);
            // T, T', T'' in t via the three-term recurrences, scaled by the
            // chain rule to derivatives in x.
            let (mut t0, mut t1) = (1.0, t);
            let (mut p0, mut p1) = (0.0, 1.0);
            let (mut q0, mut q1) = (0.0, 0.0);
            for k in 0..m {
                if k == 0 {
                    v.push(t0);
                    d1.push(p0 * s);
                    d2.push(q0 * s * s);
                } else {
                    v.push(t1);
                    d1.push(p1 * s);
                    d2.push(q1 * s * s);
                    let t2 = 2.0 * t * t1 - t0;
                    let p2 = 2.0 * t1 + 2.0 * t * p1 - p0;
                    let q2 = 4.0 * p1 + 2.0 * t * q1 - q0;
                    t0 = t1;
                    t1 = t2;
                    p0 = p1;
                    p1 = p2;
                    q0 = q1;
                    q1 = q2;
                }
            }
        }
    }
    (v, d1, d2)
}

/// Largest distance from the domain's dense sample grid to the point set.
pub fn fill_distance(points: &[Point], domain: &Domain) -> f64 {
    let mut h = 0.0f64;
    for q in domain.measurement_grid() {
        let d = points
            .iter()
            .map(|p| p.dist(&q))
            .fold(f64::INFINITY, f64::min);
        h = h.max(d);
    }
    h
}

/// Reads points from a whitespace-separated text file, one point per line;
/// blank lines and `#` comments are skipped.
pub fn load_points(path: &Path) -> Result<Vec<Point>> {
    let text = fs::read_to_string(path)?;
    let mut pts = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let coords: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        pts.push(Point::from_slice(&coords).map_err(|_| {
            Error::Parse(format!("line {}: expected 1 or 2 coordinates", lineno + 1))
        })?);
    }
    if let Some(first) = pts.first() {
        if pts.iter().any(|p| p.dim() != first.dim()) {
            return Err(Error::Parse("mixed point dimensions in file".into()));
        }
    }
    Ok(pts)
}

/// Equidistant points on [a, b] including the endpoints.
pub fn equidistant_points(m: usize, a: f64, b: f64) -> Vec<Point> {
    assert!(m >= 2);
    (0..m)
        .map(|i| Point::new1(a + (b - a) * i as f64 / (m - 1) as f64))
        .collect()
}

/// Chebyshev points of the second kind on [a, b].
pub fn chebyshev_points(m: usize, a: f64, b: f64) -> Vec<Point> {
    assert!(m >= 2);
    (0..m)
        .map(|i| {
            let t = (std::f64::consts::PI * i as f64 / (m - 1) as f64).cos();
            Point::new1(0.5 * (a + b) - 0.5 * (b - a) * t)
        })
        .collect()
}

/// Uniform (n+1) x (n+1) grid on the unit square, boundary included.
pub fn unit_square_grid(n: usize) -> Vec<Point> {
    let mut pts = Vec::with_capacity((n + 1) * (n + 1));
    for i in 0..=n {
        for j in 0..=n {
            pts.push(Point::new2(i as f64 / n as f64, j as f64 / n as f64));
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{fd_gradient, fd_laplacian, FnField};
    use crate::kernels;

    fn cheb_space(degree: usize) -> TrialSpace {
        TrialSpace::Polynomial { degree, a: -1.0, b: 1.0, basis: PolyBasis::Chebyshev }
    }

    #[test]
    fn chebyshev_values_match_closed_forms() {
        let s = cheb_space(3);
        for &x in &[-0.9, -0.3, 0.0, 0.55, 1.0] {
            let v = s.eval_basis(&Point::new1(x)).unwrap();
            assert!((v[0] - 1.0).abs() < 1e-14);
            assert!((v[1] - x).abs() < 1e-14);
            assert!((v[2] - (2.0 * x * x - 1.0)).abs() < 1e-13);
            assert!((v[3] - (4.0 * x.powi(3) - 3.0 * x)).abs() < 1e-13);
        }
    }

    #[test]
    fn chebyshev_scaling_keeps_unit_range() {
        let s = TrialSpace::Polynomial { degree: 4, a: 2.0, b: 5.0, basis: PolyBasis::Chebyshev };
        // T_k maps [a,b] into [-1,1]
        for i in 0..=60 {
            let x = 2.0 + 3.0 * i as f64 / 60.0;
            for v in s.eval_basis(&Point::new1(x)).unwrap() {
                assert!(v.abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn polynomial_derivatives_match_finite_differences() {
        for basis in [PolyBasis::Chebyshev, PolyBasis::Monomial] {
            let s = TrialSpace::Polynomial { degree: 5, a: 0.0, b: 2.0, basis };
            for &x in &[0.2, 0.9, 1.7] {
                let p = Point::new1(x);
                let d1 = s.eval_basis_gradient(&p).unwrap();
                let d2 = s.eval_basis_laplacian(&p).unwrap();
                for j in 0..s.dim() {
                    let sj = s.clone();
                    let f = FnField::new(1, move |q: &Point| sj.eval_basis(q).unwrap()[j]);
                    let fd1 = fd_gradient(&f, &p, 1e-5)[0];
                    let fd2 = fd_laplacian(&f, &p, 1e-4);
                    assert!((d1[j][0] - fd1).abs() < 1e-5 * fd1.abs().max(1.0), "basis {j} d1");
                    assert!((d2[j] - fd2).abs() < 1e-4 * fd2.abs().max(1.0), "basis {j} d2");
                }
            }
        }
    }

    #[test]
    fn kernel_translate_derivatives_match_finite_differences() {
        let kernel = kernels::RadialKernel::whittle_matern(4.5, 0.5, 2).unwrap();
        let centers = vec![Point::new2(0.2, 0.3), Point::new2(0.8, 0.6)];
        let s = TrialSpace::KernelTranslates { kernel, centers };
        let p = Point::new2(0.45, 0.52);
        let g = s.eval_basis_gradient(&p).unwrap();
        let l = s.eval_basis_laplacian(&p).unwrap();
        for j in 0..s.dim() {
            let sj = s.clone();
            let f = FnField::new(2, move |q: &Point| sj.eval_basis(q).unwrap()[j]);
            let fg = fd_gradient(&f, &p, 1e-5);
            let fl = fd_laplacian(&f, &p, 1e-4);
            assert!((g[j][0] - fg[0]).abs() < 1e-6);
            assert!((g[j][1] - fg[1]).abs() < 1e-6);
            assert!((l[j] - fl).abs() < 1e-5);
        }
    }

    #[test]
    fn representer_span_values_and_laplacians() {
        let kernel = kernels::RadialKernel::whittle_matern(5.5, 0.7, 2).unwrap();
        let y = Point::new2(0.4, 0.4);
        let s = TrialSpace::RepresenterSpan {
            kernel: kernel.clone(),
            functionals: vec![
                RepresenterFunctional::PointEval(y),
                RepresenterFunctional::NegLaplacian(y),
            ],
        };
        let x = Point::new2(0.7, 0.2);
        let v = s.eval_basis(&x).unwrap();
        assert!((v[0] - kernel.eval(&x, &y).unwrap()).abs() < 1e-15);
        assert!((v[1] + kernel.eval_laplacian_x(&x, &y).unwrap()).abs() < 1e-15);
        let l = s.eval_basis_laplacian(&x).unwrap();
        assert!((l[1] + kernel.eval_laplacian_xy(&x, &y).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn nodal_basis_has_lagrange_property() {
        let nodes = chebyshev_points(6, -1.0, 1.0);
        let s = cheb_space(5).to_nodal(&nodes).unwrap();
        for (k, p) in nodes.iter().enumerate() {
            let v = s.eval_basis(p).unwrap();
            for (i, val) in v.iter().enumerate() {
                let want = if i == k { 1.0 } else { 0.0 };
                assert!((val - want).abs() < 1e-10, "psi_{i}(x_{k}) = {val}");
            }
        }
    }

    #[test]
    fn nodal_kernel_space_lagrange_property() {
        let kernel = kernels::RadialKernel::whittle_matern(3.5, 0.5, 2).unwrap();
        let centers = unit_square_grid(3);
        let s = TrialSpace::KernelTranslates { kernel, centers: centers.clone() };
        let nodal = s.to_nodal(&centers).unwrap();
        for (k, p) in centers.iter().enumerate() {
            let v = nodal.eval_basis(p).unwrap();
            for (i, val) in v.iter().enumerate() {
                let want = if i == k { 1.0 } else { 0.0 };
                assert!((val - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn nodal_bases_span_the_same_functions() {
        // Chebyshev and monomial parametrizations of the same space must give
        // the same Lagrange basis.
        let nodes = equidistant_points(5, 0.0, 1.0);
        let a = TrialSpace::Polynomial { degree: 4, a: 0.0, b: 1.0, basis: PolyBasis::Chebyshev }
            .to_nodal(&nodes)
            .unwrap();
        let b = TrialSpace::Polynomial { degree: 4, a: 0.0, b: 1.0, basis: PolyBasis::Monomial }
            .to_nodal(&nodes)
            .unwrap();
        for i in 0..=20 {
            let x = Point::new1(i as f64 / 20.0);
            let va = a.eval_basis(&x).unwrap();
            let vb = b.eval_basis(&x).unwrap();
            for (u, w) in va.iter().zip(&vb) {
                assert!((u - w).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn duplicate_nodes_are_rejected() {
        let nodes = vec![Point::new1(0.0), Point::new1(0.5), Point::new1(0.5)];
        let err = cheb_space(2).to_nodal(&nodes).unwrap_err();
        assert!(matches!(err, Error::SingularInterpolation { .. }));
    }

    #[test]
    fn node_count_must_match_dimension() {
        let err = cheb_space(3).to_nodal(&equidistant_points(3, 0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 4, got: 3 }));
    }

    #[test]
    fn fill_distance_of_uniform_grids() {
        // Interval: M equidistant points, farthest sample sits mid-gap.
        let pts = equidistant_points(5, 0.0, 1.0);
        let h = fill_distance(&pts, &Domain::Interval(0.0, 1.0));
        assert!((h - 0.125).abs() < 1e-3, "h = {h}");
        // Square: cell-diagonal half-length sqrt(2)/(2n).
        let grid = unit_square_grid(4);
        let h = fill_distance(&grid, &Domain::UnitSquare);
        assert!((h - 2f64.sqrt() / 8.0).abs() < 5e-3, "h = {h}");
    }

    #[test]
    fn load_points_parses_comments_and_blanks() {
        let dir = std::env::temp_dir();
        let path = dir.join("trialspace_points_test.txt");
        fs::write(&path, "# header\n0.0 0.5\n\n1.0 0.25  # trailing\n").unwrap();
        let pts = load_points(&path).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1], Point::new2(1.0, 0.25));
        fs::write(&path, "0.0 0.5\nbogus 1.0\n").unwrap();
        assert!(matches!(load_points(&path).unwrap_err(), Error::Parse(_)));
        fs::remove_file(&path).ok();
    }
}
