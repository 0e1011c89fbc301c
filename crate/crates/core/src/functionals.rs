//! Data functionals: point evaluations, strong differential-operator samples,
//! weak pairings against test fields, and local weak averages over interior
//! balls. A `DataMap` bundles a nested family of such functionals so that the
//! family at a coarser level is always a subset of the finer one.

use std::collections::HashSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{ArcField, Field};
use crate::geometry::{Ball, Domain, Point};
use crate::quadrature::{circle_boundary_rule, disk_rule, QuadratureRule};
use crate::trialspaces::TrialSpace;

const CIRCLE_RULE_NODES: usize = 64;
/// Radial order for ball rules paired with compactly supported bumps; their
/// derivatives concentrate near the rim and need dense rules.
const BUMP_RULE_ORDER: usize = 48;
/// Stored pairing rules inside data maps use a lighter order; the same rule
/// evaluates both sides of each equation, so its error acts as data noise.
const PAIR_RULE_ORDER: usize = 24;
const SMOOTH_RULE_ORDER: usize = 12;

/// Radial quadrature order adequate for the given test field and weak form.
fn ball_rule_order(test: &TestField, form: WeakForm) -> usize {
    match (test, form) {
        (TestField::One, _) => SMOOTH_RULE_ORDER,
        // the twice-integrated form integrates the test field's Laplacian,
        // the hardest of the bump integrands
        (_, WeakForm::TwiceIntegrated) => 96,
        _ => BUMP_RULE_ORDER,
    }
}

/// Test field a weak functional pairs against.
#[derive(Clone, Debug)]
pub enum TestField {
    /// Constant 1.
    One,
    /// Compactly supported bump on a ball, value 1 at the center,
    /// `exp(1 - 1/(1 - |x-c|^2/r^2))` inside and 0 outside.
    Bump { ball: Ball },
    /// A trial-space element multiplied by the square bubble
    /// `16 x(1-x) y(1-y)`, so it vanishes on the boundary of the unit square.
    /// `tag` identifies the field in descriptors.
    TrialBubble { space: Arc<TrialSpace>, coeffs: Vec<f64>, tag: usize },
}

fn bubble(x: &Point) -> f64 {
    16.0 * x.x() * (1.0 - x.x()) * x.y() * (1.0 - x.y())
}

fn bubble_grad(x: &Point) -> [f64; 2] {
    [
        16.0 * (1.0 - 2.0 * x.x()) * x.y() * (1.0 - x.y()),
        16.0 * x.x() * (1.0 - x.x()) * (1.0 - 2.0 * x.y()),
    ]
}

fn bubble_lap(x: &Point) -> f64 {
    -32.0 * (x.y() * (1.0 - x.y()) + x.x() * (1.0 - x.x()))
}

impl TestField {
    pub fn value(&self, x: &Point) -> Result<f64> {
        match self {
            TestField::One => Ok(1.0),
            TestField::Bump { ball } => {
                let w = sq(x.dist(&ball.center) / ball.radius);
                Ok(if w < 1.0 { (1.0 - 1.0 / (1.0 - w)).exp() } else { 0.0 })
            }
            TestField::TrialBubble { space, coeffs, .. } => {
                Ok(space.eval_combination(coeffs, x)? * bubble(x))
            }
        }
    }

    pub fn gradient(&self, x: &Point) -> Result<[f64; 2]> {
        match self {
            TestField::One => Ok([0.0, 0.0]),
            TestField::Bump { ball } => {
                let d = x.sub(&ball.center);
                let w = (d[0] * d[0] + d[1] * d[1]) / sq(ball.radius);
                if w >= 1.0 {
                    return Ok([0.0, 0.0]);
                }
                let v = (1.0 - 1.0 / (1.0 - w)).exp();
                // dv/dw = -v / (1-w)^2, dw/dx = 2(x-c)/r^2
                let dv = -v / sq(1.0 - w);
                let s = 2.0 * dv / sq(ball.radius);
                Ok([s * d[0], s * d[1]])
            }
            TestField::TrialBubble { space, coeffs, .. } => {
                let u = space.eval_combination(coeffs, x)?;
                let gu = space.grad_combination(coeffs, x)?;
                let b = bubble(x);
                let gb = bubble_grad(x);
                Ok([gu[0] * b + u * gb[0], gu[1] * b + u * gb[1]])
            }
        }
    }

    pub fn laplacian(&self, x: &Point) -> Result<f64> {
        match self {
            TestField::One => Ok(0.0),
            TestField::Bump { ball } => {
                let d = x.sub(&ball.center);
                let r2 = sq(ball.radius);
                let w = (d[0] * d[0] + d[1] * d[1]) / r2;
                if w >= 1.0 {
                    return Ok(0.0);
                }
                let v = (1.0 - 1.0 / (1.0 - w)).exp();
                let g = 1.0 - w;
                let dv = -v / sq(g);
                let d2v = v / sq(sq(g)) - 2.0 * v / (g * g * g);
                let dim = ball.center.dim() as f64;
                // |grad w|^2 = 4w/r^2, Lap w = 2*dim/r^2
                Ok(d2v * 4.0 * w / r2 + dv * 2.0 * dim / r2)
            }
            TestField::TrialBubble { space, coeffs, .. } => {
                let u = space.eval_combination(coeffs, x)?;
                let gu = space.grad_combination(coeffs, x)?;
                let lu: f64 = space
                    .eval_basis_laplacian(x)?
                    .iter()
                    .zip(coeffs)
                    .map(|(l, c)| l * c)
                    .sum();
                let b = bubble(x);
                let gb = bubble_grad(x);
                Ok(lu * b + 2.0 * (gu[0] * gb[0] + gu[1] * gb[1]) + u * bubble_lap(x))
            }
        }
    }

    /// Whether the field and its gradient vanish on the boundary of `ball`.
    fn vanishes_on(&self, ball: &Ball) -> bool {
        matches!(self, TestField::Bump { ball: b } if b == ball)
    }

    fn descriptor(&self) -> String {
        match self {
            TestField::One => "one".into(),
            TestField::Bump { ball } => format!(
                "bump[{:?};r={:?}]",
                ball.center.coords(),
                ball.radius
            ),
            TestField::TrialBubble { tag, .. } => format!("bubble#{tag}"),
        }
    }
}

fn sq(x: f64) -> f64 {
    x * x
}

/// Weak form of a local average over a ball; the three forms agree on smooth
/// fields but require different derivative orders of the argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeakForm {
    /// -(1/|B|) Int_B (Lap u) v
    Direct,
    /// (1/|B|) [Int_B grad u . grad v - Bnd_B v du/dn]
    OnceIntegrated,
    /// (1/|B|) [-Int_B u Lap v + Bnd_B (u dv/dn - v du/dn)]
    TwiceIntegrated,
}

#[derive(Clone, Debug)]
pub enum FunctionalKind {
    /// u -> u(x)
    PointEval(Point),
    /// u -> -(Lap u)(x)
    NegLaplacianAt(Point),
    /// u -> Int grad u . grad v over the stored rule
    WeakGradientPair { test: TestField, rule: QuadratureRule },
    /// u -> Int u v over the stored rule
    WeakL2Pair { test: TestField, rule: QuadratureRule },
    /// Local weak average of -Lap u against `test` over a ball.
    LocalWeakAverage { ball: Ball, test: TestField, form: WeakForm },
    /// u -> -(1/|B|) Bnd_B du/dn, the flux form of the local average.
    BoundaryFluxAverage { ball: Ball },
}

#[derive(Clone, Debug)]
pub struct Functional {
    pub kind: FunctionalKind,
    /// Multiplicative normalization applied to the raw value.
    pub scale: f64,
}

/// What the exact data of a problem is: either samples of a known target or
/// Poisson data (source term plus boundary values).
#[derive(Clone)]
pub enum DataDefinition {
    Interpolation { target: ArcField },
    Poisson { source: ArcField, boundary: ArcField },
}

/// Uniform interface over "one field" and "all basis functions of a space",
/// so functional application is written once.
trait Evaluand {
    fn count(&self) -> usize;
    fn values(&self, x: &Point) -> Result<Vec<f64>>;
    fn gradients(&self, x: &Point) -> Result<Vec<[f64; 2]>>;
    fn laplacians(&self, x: &Point) -> Result<Vec<f64>>;
}

struct FieldEval<'a>(&'a dyn Field);

impl Evaluand for FieldEval<'_> {
    fn count(&self) -> usize {
        1
    }

    fn values(&self, x: &Point) -> Result<Vec<f64>> {
        Ok(vec![self.0.value(x)])
    }

    fn gradients(&self, x: &Point) -> Result<Vec<[f64; 2]>> {
        if self.0.derivative_order() < 1 {
            return Err(Error::UnsupportedDerivative { requested: 1 });
        }
        Ok(vec![self.0.gradient(x)])
    }

    fn laplacians(&self, x: &Point) -> Result<Vec<f64>> {
        if self.0.derivative_order() < 2 {
            return Err(Error::UnsupportedDerivative { requested: 2 });
        }
        Ok(vec![self.0.laplacian(x)])
    }
}

impl Evaluand for &TrialSpace {
    fn count(&self) -> usize {
        self.dim()
    }

    fn values(&self, x: &Point) -> Result<Vec<f64>> {
        self.eval_basis(x)
    }

    fn gradients(&self, x: &Point) -> Result<Vec<[f64; 2]>> {
        self.eval_basis_gradient(x)
    }

    fn laplacians(&self, x: &Point) -> Result<Vec<f64>> {
        self.eval_basis_laplacian(x)
    }
}

impl Functional {
    pub fn point(x: Point) -> Self {
        Functional { kind: FunctionalKind::PointEval(x), scale: 1.0 }
    }

    pub fn neg_laplacian(x: Point) -> Self {
        Functional { kind: FunctionalKind::NegLaplacianAt(x), scale: 1.0 }
    }

    pub fn flux_average(ball: Ball) -> Self {
        Functional { kind: FunctionalKind::BoundaryFluxAverage { ball }, scale: 1.0 }
    }

    pub fn local_weak(ball: Ball, test: TestField, form: WeakForm) -> Self {
        Functional { kind: FunctionalKind::LocalWeakAverage { ball, test, form }, scale: 1.0 }
    }

    /// Gradient pairing scaled so the test field has unit first-order energy
    /// `(Int |grad v|^2)^{1/2} = 1`.
    pub fn normalized_weak_gradient(test: TestField, rule: QuadratureRule) -> Result<Self> {
        let mut energy = 0.0;
        for (p, w) in rule.nodes.iter().zip(&rule.weights) {
            let g = test.gradient(p)?;
            energy += w * (g[0] * g[0] + g[1] * g[1]);
        }
        if energy <= 0.0 {
            return Err(Error::InvalidParameter("test field has zero gradient energy".into()));
        }
        Ok(Functional {
            kind: FunctionalKind::WeakGradientPair { test, rule },
            scale: 1.0 / energy.sqrt(),
        })
    }

    /// L2 pairing scaled so the test field has unit L2 norm over the rule.
    pub fn normalized_weak_l2(test: TestField, rule: QuadratureRule) -> Result<Self> {
        let mut norm2 = 0.0;
        for (p, w) in rule.nodes.iter().zip(&rule.weights) {
            norm2 += w * sq(test.value(p)?);
        }
        if norm2 <= 0.0 {
            return Err(Error::InvalidParameter("test field has zero L2 norm".into()));
        }
        Ok(Functional {
            kind: FunctionalKind::WeakL2Pair { test, rule },
            scale: 1.0 / norm2.sqrt(),
        })
    }

    /// Applies the functional to a field.
    pub fn apply(&self, f: &dyn Field) -> Result<f64> {
        Ok(self.apply_rows(&FieldEval(f))?[0])
    }

    /// Applies the functional to every basis function of a trial space.
    pub fn apply_to_basis(&self, space: &TrialSpace) -> Result<Vec<f64>> {
        self.apply_rows(&space)
    }

    fn apply_rows<E: Evaluand>(&self, e: &E) -> Result<Vec<f64>> {
        let mut out = match &self.kind {
            FunctionalKind::PointEval(x) => e.values(x)?,
            FunctionalKind::NegLaplacianAt(x) => {
                let mut v = e.laplacians(x)?;
                v.iter_mut().for_each(|u| *u = -*u);
                v
            }
            FunctionalKind::WeakGradientPair { test, rule } => {
                let mut acc = vec![0.0; e.count()];
                for (p, w) in rule.nodes.iter().zip(&rule.weights) {
                    let gv = test.gradient(p)?;
                    if gv[0] == 0.0 && gv[1] == 0.0 {
                        continue;
                    }
                    for (a, gu) in acc.iter_mut().zip(e.gradients(p)?) {
                        *a += w * (gu[0] * gv[0] + gu[1] * gv[1]);
                    }
                }
                acc
            }
            FunctionalKind::WeakL2Pair { test, rule } => {
                let mut acc = vec![0.0; e.count()];
                for (p, w) in rule.nodes.iter().zip(&rule.weights) {
                    let v = test.value(p)?;
                    if v == 0.0 {
                        continue;
                    }
                    for (a, u) in acc.iter_mut().zip(e.values(p)?) {
                        *a += w * u * v;
                    }
                }
                acc
            }
            FunctionalKind::LocalWeakAverage { ball, test, form } => {
                self.local_weak_rows(e, ball, test, *form)?
            }
            FunctionalKind::BoundaryFluxAverage { ball } => {
                let rule = circle_boundary_rule(CIRCLE_RULE_NODES, *ball);
                let normals = rule.normals.as_ref().unwrap();
                let mut acc = vec![0.0; e.count()];
                for ((p, w), n) in rule.nodes.iter().zip(&rule.weights).zip(normals) {
                    for (a, g) in acc.iter_mut().zip(e.gradients(p)?) {
                        *a -= w * (g[0] * n[0] + g[1] * n[1]);
                    }
                }
                let vol = ball.measure();
                acc.iter_mut().for_each(|a| *a /= vol);
                acc
            }
        };
        out.iter_mut().for_each(|v| *v *= self.scale);
        Ok(out)
    }

    fn local_weak_rows<E: Evaluand>(
        &self,
        e: &E,
        ball: &Ball,
        test: &TestField,
        form: WeakForm,
    ) -> Result<Vec<f64>> {
        let vol = ball.measure();
        let interior = disk_rule(ball_rule_order(test, form), *ball);
        let mut acc = vec![0.0; e.count()];
        match form {
            WeakForm::Direct => {
                for (p, w) in interior.nodes.iter().zip(&interior.weights) {
                    let v = test.value(p)?;
                    for (a, l) in acc.iter_mut().zip(e.laplacians(p)?) {
                        *a -= w * l * v;
                    }
                }
            }
            WeakForm::OnceIntegrated => {
                for (p, w) in interior.nodes.iter().zip(&interior.weights) {
                    let gv = test.gradient(p)?;
                    for (a, gu) in acc.iter_mut().zip(e.gradients(p)?) {
                        *a += w * (gu[0] * gv[0] + gu[1] * gv[1]);
                    }
                }
                if !test.vanishes_on(ball) {
                    let bnd = circle_boundary_rule(CIRCLE_RULE_NODES, *ball);
                    let normals = bnd.normals.as_ref().unwrap();
                    for ((p, w), n) in bnd.nodes.iter().zip(&bnd.weights).zip(normals) {
                        let v = test.value(p)?;
                        for (a, gu) in acc.iter_mut().zip(e.gradients(p)?) {
                            *a -= w * v * (gu[0] * n[0] + gu[1] * n[1]);
                        }
                    }
                }
            }
            WeakForm::TwiceIntegrated => {
                for (p, w) in interior.nodes.iter().zip(&interior.weights) {
                    let lv = test.laplacian(p)?;
                    for (a, u) in acc.iter_mut().zip(e.values(p)?) {
                        *a -= w * u * lv;
                    }
                }
                let bnd = circle_boundary_rule(CIRCLE_RULE_NODES, *ball);
                let normals = bnd.normals.as_ref().unwrap();
                for ((p, w), n) in bnd.nodes.iter().zip(&bnd.weights).zip(normals) {
                    let gv = test.gradient(p)?;
                    let dvdn = gv[0] * n[0] + gv[1] * n[1];
                    for (a, u) in acc.iter_mut().zip(e.values(p)?) {
                        *a += w * u * dvdn;
                    }
                    if !test.vanishes_on(ball) {
                        let v = test.value(p)?;
                        for (a, gu) in acc.iter_mut().zip(e.gradients(p)?) {
                            *a -= w * v * (gu[0] * n[0] + gu[1] * n[1]);
                        }
                    }
                }
            }
        }
        acc.iter_mut().for_each(|a| *a /= vol);
        Ok(acc)
    }

    /// Exact right-hand side of the functional under the given data.
    pub fn rhs_value(&self, data: &DataDefinition) -> Result<f64> {
        match data {
            DataDefinition::Interpolation { target } => self.apply(target.as_ref()),
            DataDefinition::Poisson { source, boundary } => {
                let raw = match &self.kind {
                    FunctionalKind::PointEval(x) => boundary.value(x),
                    FunctionalKind::NegLaplacianAt(x) => source.value(x),
                    FunctionalKind::WeakGradientPair { test, rule } => {
                        // valid because weak test fields vanish on the domain
                        // boundary, so integration by parts drops the boundary
                        // term: Int grad u . grad v = Int (-Lap u) v = Int f v
                        let mut acc = 0.0;
                        for (p, w) in rule.nodes.iter().zip(&rule.weights) {
                            acc += w * source.value(p) * test.value(p)?;
                        }
                        acc
                    }
                    FunctionalKind::WeakL2Pair { .. } => {
                        return Err(Error::UnsupportedFunctional(
                            "L2 pairings carry no Poisson data".into(),
                        ))
                    }
                    FunctionalKind::LocalWeakAverage { ball, test, form } => {
                        let rule = disk_rule(ball_rule_order(test, *form), *ball);
                        let mut acc = 0.0;
                        for (p, w) in rule.nodes.iter().zip(&rule.weights) {
                            acc += w * source.value(p) * test.value(p)?;
                        }
                        acc / ball.measure()
                    }
                    FunctionalKind::BoundaryFluxAverage { ball } => {
                        let rule = disk_rule(SMOOTH_RULE_ORDER, *ball);
                        let mut acc = 0.0;
                        for (p, w) in rule.nodes.iter().zip(&rule.weights) {
                            acc += w * source.value(p);
                        }
                        acc / ball.measure()
                    }
                };
                Ok(raw * self.scale)
            }
        }
    }

    /// Stable identity string, used for subset checks and manifests.
    pub fn descriptor(&self) -> String {
        match &self.kind {
            FunctionalKind::PointEval(x) => format!("pt[{:?}]", x.coords()),
            FunctionalKind::NegLaplacianAt(x) => format!("neglap[{:?}]", x.coords()),
            FunctionalKind::WeakGradientPair { test, .. } => {
                format!("wgrad[{}]", test.descriptor())
            }
            FunctionalKind::WeakL2Pair { test, .. } => format!("wl2[{}]", test.descriptor()),
            FunctionalKind::LocalWeakAverage { ball, test, form } => format!(
                "lwa[{:?};r={:?};{};{:?}]",
                ball.center.coords(),
                ball.radius,
                test.descriptor(),
                form
            ),
            FunctionalKind::BoundaryFluxAverage { ball } => {
                format!("flux[{:?};r={:?}]", ball.center.coords(), ball.radius)
            }
        }
    }
}

/// Sampling strategy generating the functional pool of a data map.
#[derive(Clone)]
pub enum PoolSampler {
    /// Point evaluations on the dyadic grid of the domain.
    PointGrid(Domain),
    /// Negative-Laplacian samples on the interior grid, point evaluations on
    /// the boundary grid.
    StrongPoisson(Domain),
    /// Boundary flux averages over interior balls, point evaluations on the
    /// boundary grid.
    Mlpg5(Domain),
    /// Normalized gradient pairings against bump fields on interior balls,
    /// point evaluations on the boundary grid; `extra` carries
    /// level-independent functionals (e.g. trial-bubble pairings).
    WeakDirichlet { domain: Domain, extra: Vec<Functional> },
    /// Normalized L2 pairings against interior bumps, point evaluations on
    /// the boundary grid.
    WeakL2(Domain),
    /// A fixed list, the same at every level.
    Explicit(Vec<Functional>),
}

/// A nested family of functional sets indexed by a refinement level.
#[derive(Clone)]
pub struct DataMap {
    pub sampler: PoolSampler,
}

impl DataMap {
    pub fn new(sampler: PoolSampler) -> Self {
        DataMap { sampler }
    }

    /// Functionals at a level. The set is the union of all coarser levels, so
    /// restriction families are monotone by construction.
    pub fn functionals(&self, level: u32) -> Result<Vec<Functional>> {
        if let PoolSampler::Explicit(fs) = &self.sampler {
            return Ok(fs.clone());
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for j in 1..=level.max(1) {
            for f in self.level_functionals(j)? {
                if seen.insert(f.descriptor()) {
                    out.push(f);
                }
            }
        }
        Ok(out)
    }

    fn level_functionals(&self, level: u32) -> Result<Vec<Functional>> {
        match &self.sampler {
            PoolSampler::Explicit(fs) => Ok(fs.clone()),
            PoolSampler::PointGrid(dom) => {
                Ok(dom.grid(level).into_iter().map(Functional::point).collect())
            }
            PoolSampler::StrongPoisson(dom) => {
                let mut fs: Vec<Functional> = dom
                    .interior_grid(level)
                    .into_iter()
                    .map(Functional::neg_laplacian)
                    .collect();
                fs.extend(dom.boundary_grid(level).into_iter().map(Functional::point));
                Ok(fs)
            }
            PoolSampler::Mlpg5(dom) => {
                let mut fs: Vec<Functional> = interior_balls(dom, level)
                    .into_iter()
                    .map(Functional::flux_average)
                    .collect();
                fs.extend(dom.boundary_grid(level).into_iter().map(Functional::point));
                Ok(fs)
            }
            PoolSampler::WeakDirichlet { domain, extra } => {
                let mut fs = extra.clone();
                for ball in interior_balls(domain, level) {
                    let rule = disk_rule(PAIR_RULE_ORDER, ball);
                    fs.push(Functional::normalized_weak_gradient(
                        TestField::Bump { ball },
                        rule,
                    )?);
                }
                fs.extend(domain.boundary_grid(level).into_iter().map(Functional::point));
                Ok(fs)
            }
            PoolSampler::WeakL2(dom) => {
                let mut fs = Vec::new();
                for ball in interior_balls(dom, level) {
                    let rule = disk_rule(PAIR_RULE_ORDER, ball);
                    fs.push(Functional::normalized_weak_l2(TestField::Bump { ball }, rule)?);
                }
                fs.extend(dom.boundary_grid(level).into_iter().map(Functional::point));
                Ok(fs)
            }
        }
    }
}

/// Balls centered at the interior grid points of a level, sized to the grid
/// spacing but kept strictly inside the domain.
fn interior_balls(dom: &Domain, level: u32) -> Vec<Ball> {
    let h = match dom {
        Domain::Interval(a, b) => (b - a) / (1u64 << level) as f64,
        _ => 1.0 / (1u64 << level) as f64,
    };
    dom.interior_grid(level)
        .into_iter()
        .map(|x| {
            let r = (0.45 * h).min(0.9 * dom.boundary_distance(&x));
            Ball::new(x, r)
        })
        .filter(|b| b.radius > 0.0)
        .collect()
}

/// Discrete data seminorm: the largest absolute functional value.
pub fn data_seminorm(functionals: &[Functional], f: &dyn Field) -> Result<f64> {
    let mut m = 0.0f64;
    for lam in functionals {
        m = m.max(lam.apply(f)?.abs());
    }
    Ok(m)
}
