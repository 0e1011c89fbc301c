//! Points, balls, and the study domains (interval, unit square, unit disk).

use crate::error::{Error, Result};

/// A point in R^1 or R^2. Higher dimensions are out of scope for the studies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    coords: [f64; 2],
    dim: usize,
}

impl Point {
    pub fn new1(x: f64) -> Self {
        Point { coords: [x, 0.0], dim: 1 }
    }

    pub fn new2(x: f64, y: f64) -> Self {
        Point { coords: [x, y], dim: 2 }
    }

    pub fn from_slice(c: &[f64]) -> Result<Self> {
        match c.len() {
            1 => Ok(Point::new1(c[0])),
            2 => Ok(Point::new2(c[0], c[1])),
            n => Err(Error::DimensionMismatch { expected: 2, got: n }),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    pub fn y(&self) -> f64 {
        self.coords[1]
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.coords[i]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    /// Euclidean distance. Points must share a dimension.
    pub fn dist(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let dx = self.coords[0] - other.coords[0];
        let dy = self.coords[1] - other.coords[1];
        (dx * dx + dy * dy).sqrt()
    }

    /// Componentwise difference, zero-padded beyond `dim`.
    pub fn sub(&self, other: &Point) -> [f64; 2] {
        [
            self.coords[0] - other.coords[0],
            self.coords[1] - other.coords[1],
        ]
    }
}

/// A closed ball (disk in 2D, interval in 1D).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Self {
        Ball { center, radius }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.center.dist(p) <= self.radius + 1e-14
    }

    /// Area (2D) or length (1D).
    pub fn measure(&self) -> f64 {
        match self.center.dim() {
            1 => 2.0 * self.radius,
            _ => std::f64::consts::PI * self.radius * self.radius,
        }
    }
}

/// Study domains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Interval(f64, f64),
    /// [0,1]^2
    UnitSquare,
    /// Disk of radius 1 centered at the origin.
    UnitDisk,
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval(..) => 1,
            _ => 2,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Domain::Interval(a, b) => p.x() >= a - 1e-14 && p.x() <= b + 1e-14,
            Domain::UnitSquare => {
                (-1e-14..=1.0 + 1e-14).contains(&p.x()) && (-1e-14..=1.0 + 1e-14).contains(&p.y())
            }
            Domain::UnitDisk => p.x() * p.x() + p.y() * p.y() <= 1.0 + 1e-12,
        }
    }

    /// Distance from an interior point to the boundary (0 if outside).
    pub fn boundary_distance(&self, p: &Point) -> f64 {
        match self {
            Domain::Interval(a, b) => (p.x() - a).min(b - p.x()).max(0.0),
            Domain::UnitSquare => p
                .x()
                .min(1.0 - p.x())
                .min(p.y())
                .min(1.0 - p.y())
                .max(0.0),
            Domain::UnitDisk => (1.0 - (p.x() * p.x() + p.y() * p.y()).sqrt()).max(0.0),
        }
    }

    /// Whether a ball lies entirely inside the domain.
    pub fn contains_ball(&self, ball: &Ball) -> bool {
        self.boundary_distance(&ball.center) >= ball.radius - 1e-14
    }

    /// Dyadic grid over the closed domain, `2^level` cells per direction.
    /// Grids are nested across levels.
    pub fn grid(&self, level: u32) -> Vec<Point> {
        let n = 1usize << level;
        match self {
            Domain::Interval(a, b) => (0..=n)
                .map(|i| Point::new1(a + (b - a) * i as f64 / n as f64))
                .collect(),
            Domain::UnitSquare => {
                let mut pts = Vec::with_capacity((n + 1) * (n + 1));
                for i in 0..=n {
                    for j in 0..=n {
                        pts.push(Point::new2(i as f64 / n as f64, j as f64 / n as f64));
                    }
                }
                pts
            }
            Domain::UnitDisk => {
                // Tensor grid on the bounding square, clipped to the disk.
                let mut pts = Vec::new();
                for i in 0..=n {
                    for j in 0..=n {
                        let p = Point::new2(
                            -1.0 + 2.0 * i as f64 / n as f64,
                            -1.0 + 2.0 * j as f64 / n as f64,
                        );
                        if self.contains(&p) {
                            pts.push(p);
                        }
                    }
                }
                pts
            }
        }
    }

    /// Interior part of the dyadic grid.
    pub fn interior_grid(&self, level: u32) -> Vec<Point> {
        self.grid(level)
            .into_iter()
            .filter(|p| self.boundary_distance(p) > 1e-12)
            .collect()
    }

    /// Dyadic sampling of the boundary, nested across levels.
    pub fn boundary_grid(&self, level: u32) -> Vec<Point> {
        let n = 1usize << level;
        match self {
            Domain::Interval(a, b) => vec![Point::new1(*a), Point::new1(*b)],
            Domain::UnitSquare => {
                let mut pts = Vec::new();
                for i in 0..=n {
                    let t = i as f64 / n as f64;
                    pts.push(Point::new2(t, 0.0));
                    pts.push(Point::new2(t, 1.0));
                    if i > 0 && i < n {
                        pts.push(Point::new2(0.0, t));
                        pts.push(Point::new2(1.0, t));
                    }
                }
                pts
            }
            Domain::UnitDisk => {
                let m = 4 * n;
                (0..m)
                    .map(|k| {
                        let th = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                        Point::new2(th.cos(), th.sin())
                    })
                    .collect()
            }
        }
    }

    /// Fixed dense measurement grid, independent of any discretization choice.
    pub fn measurement_grid(&self) -> Vec<Point> {
        match self {
            Domain::Interval(a, b) => (0..=2000)
                .map(|i| Point::new1(a + (b - a) * i as f64 / 2000.0))
                .collect(),
            Domain::UnitSquare => {
                let mut pts = Vec::with_capacity(201 * 201);
                for i in 0..=200 {
                    for j in 0..=200 {
                        pts.push(Point::new2(i as f64 / 200.0, j as f64 / 200.0));
                    }
                }
                pts
            }
            Domain::UnitDisk => {
                let mut pts = Vec::with_capacity(200 * 100 + 1);
                pts.push(Point::new2(0.0, 0.0));
                for i in 1..=100 {
                    let r = i as f64 / 100.0;
                    for k in 0..200 {
                        let th = 2.0 * std::f64::consts::PI * k as f64 / 200.0;
                        pts.push(Point::new2(r * th.cos(), r * th.sin()));
                    }
                }
                pts
            }
        }
    }

    /// Area (2D) or length (1D) of the domain.
    pub fn measure(&self) -> f64 {
        match self {
            Domain::Interval(a, b) => b - a,
            Domain::UnitSquare => 1.0,
            Domain::UnitDisk => std::f64::consts::PI,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_are_nested() {
        for dom in [Domain::Interval(-1.0, 1.0), Domain::UnitSquare, Domain::UnitDisk] {
            let coarse = dom.grid(2);
            let fine = dom.grid(3);
            for p in &coarse {
                assert!(
                    fine.iter().any(|q| p.dist(q) < 1e-13),
                    "coarse point {p:?} missing from fine grid of {dom:?}"
                );
            }
        }
    }

    #[test]
    fn boundary_distance_square() {
        let d = Domain::UnitSquare;
        assert!((d.boundary_distance(&Point::new2(0.5, 0.5)) - 0.5).abs() < 1e-15);
        assert!((d.boundary_distance(&Point::new2(0.1, 0.7)) - 0.1).abs() < 1e-15);
        assert_eq!(d.boundary_distance(&Point::new2(0.0, 0.3)), 0.0);
    }

    #[test]
    fn ball_measure() {
        let b = Ball::new(Point::new2(0.5, 0.5), 0.25);
        assert!((b.measure() - std::f64::consts::PI * 0.0625).abs() < 1e-15);
    }
}
