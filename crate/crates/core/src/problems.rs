//! Concrete recovery problems: manufactured solutions, the data maps of each
//! problem kind, and the error measures of the studies.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{ArcField, Field, SmoothFnField};
use crate::functionals::{DataDefinition, DataMap, Functional, PoolSampler, TestField};
use crate::geometry::{Domain, Point};
use crate::quadrature::tensor_square_rule;
use crate::trialspaces::TrialSpace;

/// A known solution with its negative Laplacian, used to manufacture
/// consistent problem data.
#[derive(Clone)]
pub struct ManufacturedSolution {
    pub name: String,
    pub field: ArcField,
    /// f = -Lap u
    pub source: ArcField,
}

/// Looks up a manufactured solution by name.
///
/// 2D: `sin_sin_plus_x`, `harmonic_exp_cos`, `radial_pow`.
/// 1D: `runge`.
pub fn manufactured_solution(name: &str) -> Result<ManufacturedSolution> {
    use std::f64::consts::PI;
    let (field, source): (ArcField, ArcField) = match name {
        "sin_sin_plus_x" => (
            Arc::new(SmoothFnField {
                dim: 2,
                value: Box::new(|p: &Point| (PI * p.x()).sin() * (PI * p.y()).sin() + p.x()),
                gradient: Box::new(|p: &Point| {
                    [
                        PI * (PI * p.x()).cos() * (PI * p.y()).sin() + 1.0,
                        PI * (PI * p.x()).sin() * (PI * p.y()).cos(),
                    ]
                }),
                laplacian: Box::new(|p: &Point| {
                    -2.0 * PI * PI * (PI * p.x()).sin() * (PI * p.y()).sin()
                }),
            }),
            Arc::new(SmoothFnField {
                dim: 2,
                value: Box::new(|p: &Point| {
                    2.0 * PI * PI * (PI * p.x()).sin() * (PI * p.y()).sin()
                }),
                gradient: Box::new(|p: &Point| {
                    [
                        2.0 * PI * PI * PI * (PI * p.x()).cos() * (PI * p.y()).sin(),
                        2.0 * PI * PI * PI * (PI * p.x()).sin() * (PI * p.y()).cos(),
                    ]
                }),
                laplacian: Box::new(|p: &Point| {
                    -4.0 * PI * PI * PI * PI * (PI * p.x()).sin() * (PI * p.y()).sin()
                }),
            }),
        ),
        "harmonic_exp_cos" => (
            Arc::new(SmoothFnField {
                dim: 2,
                value: Box::new(|p: &Point| p.x().exp() * p.y().cos()),
                gradient: Box::new(|p: &Point| {
                    [p.x().exp() * p.y().cos(), -p.x().exp() * p.y().sin()]
                }),
                laplacian: Box::new(|_| 0.0),
            }),
            Arc::new(SmoothFnField {
                dim: 2,
                value: Box::new(|_| 0.0),
                gradient: Box::new(|_| [0.0, 0.0]),
                laplacian: Box::new(|_| 0.0),
            }),
        ),
        // |x - x0|^{5/2} centered inside the square: finite smoothness, so
        // convergence rates saturate
        "radial_pow" => {
            let c = Point::new2(0.3, 0.4);
            (
                Arc::new(SmoothFnField {
                    dim: 2,
                    value: Box::new(move |p: &Point| p.dist(&c).powf(2.5)),
                    gradient: Box::new(move |p: &Point| {
                        let r = p.dist(&c);
                        let d = p.sub(&c);
                        let s = 2.5 * r.powf(0.5);
                        [s * d[0], s * d[1]]
                    }),
                    laplacian: Box::new(move |p: &Point| 6.25 * p.dist(&c).powf(0.5)),
                }),
                Arc::new(SmoothFnField {
                    dim: 2,
                    value: Box::new(move |p: &Point| -6.25 * p.dist(&c).powf(0.5)),
                    gradient: Box::new(move |p: &Point| {
                        let r = p.dist(&c);
                        let d = p.sub(&c);
                        if r == 0.0 {
                            return [0.0, 0.0];
                        }
                        let s = -6.25 * 0.5 * r.powf(-1.5);
                        [s * d[0], s * d[1]]
                    }),
                    laplacian: Box::new(move |p: &Point| {
                        let r = p.dist(&c);
                        if r == 0.0 {
                            return 0.0;
                        }
                        -6.25 * 0.25 * r.powf(-1.5)
                    }),
                }),
            )
        }
        "runge" => (
            Arc::new(SmoothFnField {
                dim: 1,
                value: Box::new(|p: &Point| 1.0 / (1.0 + 25.0 * p.x() * p.x())),
                gradient: Box::new(|p: &Point| {
                    let g = 1.0 + 25.0 * p.x() * p.x();
                    [-50.0 * p.x() / (g * g), 0.0]
                }),
                laplacian: Box::new(|p: &Point| {
                    let g = 1.0 + 25.0 * p.x() * p.x();
                    let gp = 50.0 * p.x();
                    -50.0 / (g * g) + 2.0 * gp * gp / (g * g * g)
                }),
            }),
            Arc::new(SmoothFnField {
                dim: 1,
                value: Box::new(|p: &Point| {
                    let g = 1.0 + 25.0 * p.x() * p.x();
                    let gp = 50.0 * p.x();
                    50.0 / (g * g) - 2.0 * gp * gp / (g * g * g)
                }),
                gradient: Box::new(|_| [0.0, 0.0]),
                laplacian: Box::new(|_| 0.0),
            }),
        ),
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown manufactured solution '{other}'"
            )))
        }
    };
    Ok(ManufacturedSolution { name: name.to_string(), field, source })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    /// Recover a function from point values.
    InterpolationStrong,
    /// Recover a function from local L2 averages.
    InterpolationWeak,
    /// Poisson problem from pointwise -Lap samples and boundary values.
    PoissonStrong,
    /// Poisson problem from gradient pairings against boundary-vanishing test
    /// fields plus boundary values.
    PoissonWeakDirichlet,
    /// Poisson problem from boundary-flux averages over interior balls plus
    /// boundary values.
    PoissonMlpg5,
}

impl ProblemKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "interp" | "interpolation" => ProblemKind::InterpolationStrong,
            "interp-weak" | "interpolation-weak" => ProblemKind::InterpolationWeak,
            "poisson" | "poisson-strong" => ProblemKind::PoissonStrong,
            "poisson-weak" | "weak-dirichlet" => ProblemKind::PoissonWeakDirichlet,
            "mlpg5" | "poisson-mlpg5" => ProblemKind::PoissonMlpg5,
            other => {
                return Err(Error::InvalidParameter(format!("unknown problem '{other}'")))
            }
        })
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub domain: Domain,
    pub solution: ManufacturedSolution,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, domain: Domain, solution: ManufacturedSolution) -> Self {
        ProblemSpec { kind, domain, solution }
    }

    /// The nested functional family of this problem. Weak Dirichlet problems
    /// additionally pair against every trial element times the square bubble,
    /// which needs the trial space.
    pub fn data_map(&self, trial: Option<Arc<TrialSpace>>) -> Result<DataMap> {
        let sampler = match self.kind {
            ProblemKind::InterpolationStrong => PoolSampler::PointGrid(self.domain),
            ProblemKind::InterpolationWeak => PoolSampler::WeakL2(self.domain),
            ProblemKind::PoissonStrong => PoolSampler::StrongPoisson(self.domain),
            ProblemKind::PoissonMlpg5 => PoolSampler::Mlpg5(self.domain),
            ProblemKind::PoissonWeakDirichlet => {
                let space = trial.ok_or_else(|| {
                    Error::InvalidParameter(
                        "weak Dirichlet data needs the trial space for its test fields".into(),
                    )
                })?;
                if self.domain != Domain::UnitSquare {
                    return Err(Error::RegionMismatch(
                        "trial-bubble test fields are defined on the unit square".into(),
                    ));
                }
                let rule = tensor_square_rule(24, 0.0, 1.0, 0.0, 1.0);
                let mut extra = Vec::with_capacity(space.dim());
                for j in 0..space.dim() {
                    let mut coeffs = vec![0.0; space.dim()];
                    coeffs[j] = 1.0;
                    let test = TestField::TrialBubble { space: space.clone(), coeffs, tag: j };
                    extra.push(Functional::normalized_weak_gradient(test, rule.clone())?);
                }
                PoolSampler::WeakDirichlet { domain: self.domain, extra }
            }
        };
        Ok(DataMap::new(sampler))
    }

    pub fn data_definition(&self) -> DataDefinition {
        match self.kind {
            ProblemKind::InterpolationStrong | ProblemKind::InterpolationWeak => {
                DataDefinition::Interpolation { target: self.solution.field.clone() }
            }
            _ => DataDefinition::Poisson {
                source: self.solution.source.clone(),
                boundary: self.solution.field.clone(),
            },
        }
    }
}

/// Sup and L2 errors of a trial combination against the true solution over
/// the domain's fixed measurement grid.
pub fn wp_error(
    domain: &Domain,
    space: &TrialSpace,
    coeffs: &[f64],
    truth: &dyn Field,
) -> Result<(f64, f64)> {
    let pts = domain.measurement_grid();
    let mut sup = 0.0f64;
    let mut sum2 = 0.0;
    for p in &pts {
        let e = space.eval_combination(coeffs, p)? - truth.value(p);
        sup = sup.max(e.abs());
        sum2 += e * e;
    }
    let l2 = (sum2 / pts.len() as f64).sqrt() * domain.measure().sqrt();
    Ok((sup, l2))
}

/// Best possible data-seminorm error of the trial space against the truth:
/// the minimum over trial elements of `max_k |lambda_k(u - u*)|`, found by
/// sup-norm residual minimization.
pub fn trial_space_data_error(
    reference: &[Functional],
    space: &TrialSpace,
    truth: &dyn Field,
) -> Result<f64> {
    let a = crate::discretization::assemble(reference, space)?;
    let b: Vec<f64> = reference
        .iter()
        .map(|f| f.apply(truth))
        .collect::<Result<_>>()?;
    Ok(crate::solvers::solve_chebyshev(&a, &b)?.residual_sup)
}

/// Synthetic data perturbations for the noise studies.
#[derive(Clone, Copy, Debug)]
pub enum NoiseModel {
    /// iid uniform in [-eps, eps]
    Uniform { eps: f64 },
    /// deterministic worst-ish case: +-eps with alternating sign
    Alternating { eps: f64 },
}

pub fn perturb_data(rhs: &[f64], model: NoiseModel, seed: u64) -> Vec<f64> {
    match model {
        NoiseModel::Uniform { eps } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rhs.iter().map(|v| v + rng.gen_range(-eps..=eps)).collect()
        }
        NoiseModel::Alternating { eps } => rhs
            .iter()
            .enumerate()
            .map(|(i, v)| v + if i % 2 == 0 { eps } else { -eps })
            .collect(),
    }
}
