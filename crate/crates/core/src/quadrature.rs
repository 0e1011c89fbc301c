//! Numerical integration rules for weak and MLPG functionals.
//!
//! All rules are plain node/weight lists. Boundary rules additionally carry
//! outward unit normals so flux functionals can be evaluated directly.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{Ball, Domain, Point};

#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Interval(f64, f64),
    /// [x0,x1] x [y0,y1]
    TensorSquare(f64, f64, f64, f64),
    Disk(Ball),
    CircleBoundary(Ball),
    /// Boundary of the unit square.
    SquareBoundary,
    /// Ball clipped against a domain.
    BallInDomain(Ball, Domain),
}

impl Region {
    /// Length/area/perimeter of the region (for clipped balls: of the clip,
    /// known only approximately through the rule itself).
    pub fn measure(&self) -> Option<f64> {
        match self {
            Region::Interval(a, b) => Some(b - a),
            Region::TensorSquare(x0, x1, y0, y1) => Some((x1 - x0) * (y1 - y0)),
            Region::Disk(b) => Some(PI * b.radius * b.radius),
            Region::CircleBoundary(b) => Some(2.0 * PI * b.radius),
            Region::SquareBoundary => Some(4.0),
            Region::BallInDomain(..) => None,
        }
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self, Region::CircleBoundary(_) | Region::SquareBoundary)
    }
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub region: Region,
    /// Outward unit normals, present for boundary rules.
    pub normals: Option<Vec<[f64; 2]>>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Sum of weights; reproduces the region measure for polynomial-exact rules.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial from the Chebyshev initial guess.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative via recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            pp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n == 1 {
        nodes[0] = 0.0;
        weights[0] = 2.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule on an interval, exact for polynomials of degree
/// `2*order - 1`.
pub fn gauss_rule(order: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if order < 1 {
        return Err(Error::InvalidParameter("quadrature order must be >= 1".into()));
    }
    let (x, w) = gauss_legendre(order);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    Ok(QuadratureRule {
        nodes: x.iter().map(|&t| Point::new1(mid + half * t)).collect(),
        weights: w.iter().map(|&v| v * half).collect(),
        region: Region::Interval(a, b),
        normals: None,
    })
}

/// Tensor-product Gauss rule on a rectangle.
pub fn tensor_square_rule(order: usize, x0: f64, x1: f64, y0: f64, y1: f64) -> QuadratureRule {
    let gx = gauss_rule(order, x0, x1).unwrap();
    let gy = gauss_rule(order, y0, y1).unwrap();
    let mut nodes = Vec::with_capacity(order * order);
    let mut weights = Vec::with_capacity(order * order);
    for (xi, wi) in gx.nodes.iter().zip(&gx.weights) {
        for (yj, wj) in gy.nodes.iter().zip(&gy.weights) {
            nodes.push(Point::new2(xi.x(), yj.x()));
            weights.push(wi * wj);
        }
    }
    QuadratureRule {
        nodes,
        weights,
        region: Region::TensorSquare(x0, x1, y0, y1),
        normals: None,
    }
}

/// Polar tensor rule over a disk: Gauss in the radius, midpoint in the angle.
pub fn disk_rule(order: usize, ball: Ball) -> QuadratureRule {
    let (xr, wr) = gauss_legendre(order);
    let ntheta = (2 * order).max(4);
    let mut nodes = Vec::with_capacity(order * ntheta);
    let mut weights = Vec::with_capacity(order * ntheta);
    let rr = ball.radius;
    for (t, w) in xr.iter().zip(&wr) {
        let r = 0.5 * rr * (t + 1.0);
        let wrad = 0.5 * rr * w;
        for k in 0..ntheta {
            let th = 2.0 * PI * (k as f64 + 0.5) / ntheta as f64;
            nodes.push(Point::new2(
                ball.center.x() + r * th.cos(),
                ball.center.y() + r * th.sin(),
            ));
            weights.push(wrad * r * 2.0 * PI / ntheta as f64);
        }
    }
    QuadratureRule { nodes, weights, region: Region::Disk(ball), normals: None }
}

/// Equispaced (trapezoidal) rule on a circle, spectrally accurate for smooth
/// periodic integrands; carries outward normals.
pub fn circle_boundary_rule(n: usize, ball: Ball) -> QuadratureRule {
    let mut nodes = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let w = 2.0 * PI * ball.radius / n as f64;
    for k in 0..n {
        let th = 2.0 * PI * (k as f64 + 0.5) / n as f64;
        let (s, c) = th.sin_cos();
        nodes.push(Point::new2(ball.center.x() + ball.radius * c, ball.center.y() + ball.radius * s));
        normals.push([c, s]);
    }
    QuadratureRule {
        nodes,
        weights: vec![w; n],
        region: Region::CircleBoundary(ball),
        normals: Some(normals),
    }
}

/// Gauss rule per edge on the boundary of the unit square, with normals.
pub fn square_boundary_rule(order_per_edge: usize) -> QuadratureRule {
    let g = gauss_rule(order_per_edge, 0.0, 1.0).unwrap();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut normals = Vec::new();
    for (t, w) in g.nodes.iter().zip(&g.weights) {
        let t = t.x();
        nodes.push(Point::new2(t, 0.0));
        normals.push([0.0, -1.0]);
        weights.push(*w);
        nodes.push(Point::new2(t, 1.0));
        normals.push([0.0, 1.0]);
        weights.push(*w);
        nodes.push(Point::new2(0.0, t));
        normals.push([-1.0, 0.0]);
        weights.push(*w);
        nodes.push(Point::new2(1.0, t));
        normals.push([1.0, 0.0]);
        weights.push(*w);
    }
    QuadratureRule { nodes, weights, region: Region::SquareBoundary, normals: Some(normals) }
}

/// Rule over a ball clipped against a domain. Fully interior balls get the
/// polar rule; clipped balls fall back to an indicator-weighted tensor rule
/// over the bounding box (Lemma-style interior placement makes the clipped
/// path a rarely used fallback).
pub fn ball_in_domain_rule(order: usize, ball: Ball, domain: Domain) -> QuadratureRule {
    if domain.contains_ball(&ball) {
        let mut rule = disk_rule(order, ball);
        rule.region = Region::BallInDomain(ball, domain);
        return rule;
    }
    let dense = tensor_square_rule(
        (3 * order).max(12),
        ball.center.x() - ball.radius,
        ball.center.x() + ball.radius,
        ball.center.y() - ball.radius,
        ball.center.y() + ball.radius,
    );
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (p, w) in dense.nodes.iter().zip(&dense.weights) {
        if ball.contains(p) && domain.contains(p) {
            nodes.push(*p);
            weights.push(*w);
        }
    }
    QuadratureRule { nodes, weights, region: Region::BallInDomain(ball, domain), normals: None }
}

/// Interior quadrature rule for a whole study domain.
pub fn domain_rule(order: usize, domain: Domain) -> QuadratureRule {
    match domain {
        Domain::Interval(a, b) => gauss_rule(order, a, b).unwrap(),
        Domain::UnitSquare => tensor_square_rule(order, 0.0, 1.0, 0.0, 1.0),
        Domain::UnitDisk => disk_rule(order, Ball::new(Point::new2(0.0, 0.0), 1.0)),
    }
}

/// Boundary quadrature rule for a whole study domain (2D only).
pub fn domain_boundary_rule(order: usize, domain: Domain) -> Result<QuadratureRule> {
    match domain {
        Domain::UnitSquare => Ok(square_boundary_rule(order)),
        Domain::UnitDisk => Ok(circle_boundary_rule(
            (8 * order).max(16),
            Ball::new(Point::new2(0.0, 0.0), 1.0),
        )),
        Domain::Interval(..) => Err(Error::RegionMismatch(
            "interval domains have no boundary quadrature".into(),
        )),
    }
}

/// `sum_i w_i f(x_i)` over an interior rule.
pub fn integrate_region(rule: &QuadratureRule, f: impl Fn(&Point) -> f64) -> Result<f64> {
    if rule.region.is_boundary() {
        return Err(Error::RegionMismatch("interior integral over a boundary rule".into()));
    }
    Ok(rule.nodes.iter().zip(&rule.weights).map(|(p, w)| w * f(p)).sum())
}

/// `sum_i w_i f(x_i)` over a boundary rule.
pub fn integrate_boundary(rule: &QuadratureRule, f: impl Fn(&Point) -> f64) -> Result<f64> {
    if !rule.region.is_boundary() {
        return Err(Error::RegionMismatch("boundary integral over an interior rule".into()));
    }
    Ok(rule.nodes.iter().zip(&rule.weights).map(|(p, w)| w * f(p)).sum())
}

/// `sum_i w_i g(x_i, n_i)` with the outward normal, for flux integrals.
pub fn integrate_flux(rule: &QuadratureRule, g: impl Fn(&Point, &[f64; 2]) -> f64) -> Result<f64> {
    let normals = rule
        .normals
        .as_ref()
        .ok_or_else(|| Error::RegionMismatch("flux integral needs a rule with normals".into()))?;
    Ok(rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .zip(normals)
        .map(|((p, w), n)| w * g(p, n))
        .sum())
}
