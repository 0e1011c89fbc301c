//! Study drivers producing CSV results.
//!
//! Each `run_*` function sweeps a parameter family (node counts, fill
//! distances, noise levels, ball radii), estimates stability constants with
//! the greedy stabilizer where applicable, and collects one row per
//! configuration into a [`StudyResult`]. Results serialize to CSV with a
//! `# key = value` metadata preamble and round-trip losslessly.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::discretization::{
    assemble, basis_condition, greedy_stabilize, StabilizeOutcome,
};
use crate::error::{Error, Result};
use crate::field::{Field, SmoothFnField};
use crate::functionals::{Functional, FunctionalKind};
use crate::geometry::{Ball, Domain, Point};
use crate::kernels::RadialKernel;
use crate::problems::{perturb_data, wp_error, NoiseModel, ProblemSpec};
use crate::quadrature::{disk_rule, integrate_region};
use crate::solvers::{solve, solve_chebyshev, SolverKind};
use crate::trialspaces::{
    chebyshev_points, equidistant_points, fill_distance, unit_square_grid, PolyBasis, TrialSpace,
};

/// One CSV value. Integers and text round-trip verbatim; floats are printed
/// in scientific notation with the shortest representation that re-parses to
/// the same bits.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v:e}"),
            Cell::Text(s) => write!(f, "{s}"),
        }
    }
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    fn parse(s: &str) -> Cell {
        if let Ok(v) = s.parse::<i64>() {
            return Cell::Int(v);
        }
        if let Ok(v) = s.parse::<f64>() {
            return Cell::Float(v);
        }
        Cell::Text(s.to_string())
    }
}

/// Tabular study output: named columns, one row per swept configuration, a
/// parameter-echo metadata block, and an optional fitted log-log rate.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: Vec<(String, String)>,
    pub fitted_rate: Option<f64>,
}

impl StudyResult {
    pub fn new(columns: &[&str]) -> Self {
        StudyResult {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
            fitted_rate: None,
        }
    }

    pub fn push_meta(&mut self, key: &str, value: impl fmt::Display) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    /// Numeric view of a column; text cells are an error.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Parse(format!("no column named '{name}'")))?;
        self.rows
            .iter()
            .map(|r| {
                r[idx]
                    .as_f64()
                    .ok_or_else(|| Error::Parse(format!("column '{name}' holds text")))
            })
            .collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        if let Some(rate) = self.fitted_rate {
            out.push_str(&format!("# fitted_rate = {rate:e}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn parse_csv(text: &str) -> Result<StudyResult> {
        let mut metadata = Vec::new();
        let mut fitted_rate = None;
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for line in text.lines() {
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("bad metadata line: {line}")))?;
                let (k, v) = (k.trim().to_string(), v.trim().to_string());
                if k == "fitted_rate" {
                    fitted_rate = Some(
                        v.parse::<f64>()
                            .map_err(|e| Error::Parse(format!("bad fitted_rate: {e}")))?,
                    );
                } else {
                    metadata.push((k, v));
                }
                continue;
            }
            match &columns {
                None => columns = Some(line.split(',').map(|s| s.to_string()).collect()),
                Some(cols) => {
                    let cells: Vec<Cell> = line.split(',').map(Cell::parse).collect();
                    if cells.len() != cols.len() {
                        return Err(Error::Parse(format!(
                            "row has {} cells, expected {}",
                            cells.len(),
                            cols.len()
                        )));
                    }
                    rows.push(cells);
                }
            }
        }
        Ok(StudyResult {
            columns: columns.ok_or_else(|| Error::Parse("missing header row".into()))?,
            rows,
            metadata,
            fitted_rate,
        })
    }
}

/// Least-squares slope of `log e` against `log h`.
pub fn rate_estimate(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(
            "rate estimation needs at least two points".into(),
        ));
    }
    for &(h, e) in points {
        if h <= 0.0 || e <= 0.0 || !h.is_finite() || !e.is_finite() {
            return Err(Error::NonPositiveInput { h, e });
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(h, _)| h.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, e)| e.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "rate estimation needs distinct abscissae".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    Ok(sxy / sxx)
}

fn unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn select_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

// ---------------------------------------------------------------------------
// stability study (1D polynomial interpolation)
// ---------------------------------------------------------------------------

/// Node placement rules for the interpolation stability sweep. "Square"
/// rules test with exactly as many point evaluations as trial dimensions;
/// the oversampled rule tests at M^2 equidistant points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRule {
    EquidistantSquare,
    ChebyshevSquare,
    EquidistantOversampled,
}

impl NodeRule {
    pub fn parse(s: &str) -> Result<NodeRule> {
        Ok(match s {
            "equidistant-square" | "equidistant" => NodeRule::EquidistantSquare,
            "chebyshev-square" | "chebyshev" => NodeRule::ChebyshevSquare,
            "equidistant-oversampled" | "oversampled" => NodeRule::EquidistantOversampled,
            other => return Err(Error::InvalidParameter(format!("unknown node rule '{other}'"))),
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            NodeRule::EquidistantSquare => "equidistant-square",
            NodeRule::ChebyshevSquare => "chebyshev-square",
            NodeRule::EquidistantOversampled => "equidistant-oversampled",
        }
    }

    pub fn all() -> [NodeRule; 3] {
        [
            NodeRule::EquidistantSquare,
            NodeRule::ChebyshevSquare,
            NodeRule::EquidistantOversampled,
        ]
    }
}

/// Stability constants of polynomial interpolation on [-1, 1]: for each node
/// count M and node rule, the constant comparing the sup norm on a dense
/// reference grid against the sup over the test nodes. Square cases are
/// computed exactly by duality; the oversampled case uses the lower-bound
/// search.
pub fn run_stability_study(degrees: &[usize], rules: &[NodeRule], seed: u64) -> Result<StudyResult> {
    let domain = Domain::Interval(-1.0, 1.0);
    let reference_points = domain.measurement_grid();
    let mut result = StudyResult::new(&["M", "N", "rule", "constant"]);
    result.push_meta("study", "stability");
    result.push_meta("seed", seed);
    result.push_meta("generated_unix", unix_seconds());
    for rule in rules {
        for &m in degrees {
            if m < 1 {
                return Err(Error::InvalidParameter("node count must be >= 1".into()));
            }
            let space = TrialSpace::Polynomial {
                degree: m - 1,
                a: -1.0,
                b: 1.0,
                basis: PolyBasis::Chebyshev,
            };
            let nodes = match rule {
                NodeRule::EquidistantSquare => equidistant_points(m, -1.0, 1.0),
                NodeRule::ChebyshevSquare => chebyshev_points(m, -1.0, 1.0),
                NodeRule::EquidistantOversampled => equidistant_points(m * m, -1.0, 1.0),
            };
            let test: Vec<Functional> =
                nodes.iter().map(|p| Functional::point(*p)).collect();
            let reference: Vec<Functional> =
                reference_points.iter().map(|p| Functional::point(*p)).collect();
            let a_res = assemble(&test, &space)?;
            let a_ref = assemble(&reference, &space)?;
            let est = crate::discretization::estimate_stability(&a_ref, &a_res, seed)?;
            result.push_row(vec![
                Cell::Int(m as i64),
                Cell::Int(nodes.len() as i64),
                Cell::Text(rule.label().to_string()),
                Cell::Float(est.constant),
            ]);
        }
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// convergence study
// ---------------------------------------------------------------------------

/// Parameters shared by the convergence, noise, and nodal studies: a problem,
/// a kernel for the translate trial spaces, stabilizer settings, and pool /
/// reference refinement levels.
#[derive(Clone)]
pub struct ConvergenceConfig {
    pub problem: ProblemSpec,
    pub kernel: RadialKernel,
    /// Grid subdivisions n; each yields (n+1)^2 centers on the unit square.
    pub grid_sizes: Vec<usize>,
    /// Stability factor the greedy stabilizer must reach.
    pub target: f64,
    pub pool_level: u32,
    pub reference_level: u32,
    pub solver: SolverKind,
    /// Re-base each trial space to its Lagrange basis over the centers.
    pub nodal: bool,
    pub seed: u64,
}

/// Smallest grid subdivision whose fill distance does not exceed `h`; the
/// unit-square grid with n subdivisions has fill distance sqrt(2)/(2n).
pub fn grid_size_for_fill_distance(h: f64) -> Result<usize> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("fill distance must be positive, got {h}")));
    }
    Ok(((2.0f64).sqrt() / (2.0 * h)).round().max(1.0) as usize)
}

/// Pool rows to seed the greedy stabilizer: the point evaluation nearest to
/// each coarse anchor of the domain, plus the first non-point functional.
fn stabilizer_seed_rows(pool: &[Functional], domain: &Domain) -> Vec<usize> {
    let mut seeds: Vec<usize> = Vec::new();
    for anchor in domain.grid(1) {
        let mut best: Option<(usize, f64)> = None;
        for (i, f) in pool.iter().enumerate() {
            if let FunctionalKind::PointEval(p) = &f.kind {
                let d = p.dist(&anchor);
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((i, d));
                }
            }
        }
        if let Some((i, _)) = best {
            if !seeds.contains(&i) {
                seeds.push(i);
            }
        }
    }
    if let Some(i) = pool
        .iter()
        .position(|f| !matches!(f.kind, FunctionalKind::PointEval(_)))
    {
        if !seeds.contains(&i) {
            seeds.push(i);
        }
    }
    seeds
}

struct FamilyMember {
    trial: Arc<TrialSpace>,
    reference: Vec<Functional>,
    selected: Vec<Functional>,
    a_ref: DMatrix<f64>,
    a_res: DMatrix<f64>,
    stability: f64,
    budget_exhausted: bool,
    h: f64,
}

/// Builds one stabilized family member: trial space on the n-grid, functional
/// pool and reference from the problem's data map, greedy restriction.
fn build_member(cfg: &ConvergenceConfig, n: usize) -> Result<FamilyMember> {
    let domain = cfg.problem.domain;
    let centers = unit_square_grid(n);
    let h = fill_distance(&centers, &domain);
    let base =
        TrialSpace::KernelTranslates { kernel: cfg.kernel.clone(), centers: centers.clone() };
    let trial: Arc<TrialSpace> =
        Arc::new(if cfg.nodal { base.to_nodal(&centers)? } else { base });
    let data_map = cfg.problem.data_map(Some(trial.clone()))?;
    let pool = data_map.functionals(cfg.pool_level)?;
    let reference = data_map.functionals(cfg.reference_level)?;
    let a_pool = assemble(&pool, &trial)?;
    let a_ref = assemble(&reference, &trial)?;
    let seeds = stabilizer_seed_rows(&pool, &domain);
    let budget = 40 * trial.dim();
    let (outcome, budget_exhausted): (StabilizeOutcome, bool) =
        match greedy_stabilize(&a_pool, &a_ref, &seeds, cfg.target, budget, cfg.seed) {
            Ok(o) => (o, false),
            Err(Error::BudgetExhausted { best, .. }) => (*best, true),
            Err(e) => return Err(e),
        };
    let a_res = select_rows(&a_pool, &outcome.selected);
    let selected: Vec<Functional> =
        outcome.selected.iter().map(|&i| pool[i].clone()).collect();
    Ok(FamilyMember {
        trial,
        reference,
        selected,
        a_ref,
        a_res,
        stability: outcome.constant,
        budget_exhausted,
        h,
    })
}

fn rhs_vector(functionals: &[Functional], problem: &ProblemSpec) -> Result<Vec<f64>> {
    let data = problem.data_definition();
    functionals.iter().map(|f| f.rhs_value(&data)).collect()
}

fn echo_config(result: &mut StudyResult, cfg: &ConvergenceConfig) {
    result.push_meta("problem", format!("{:?}", cfg.problem.kind));
    result.push_meta("solution", &cfg.problem.solution.name);
    result.push_meta("kernel", format!("{:?}", cfg.kernel.family()));
    result.push_meta("smoothness", cfg.kernel.smoothness());
    result.push_meta("shape", cfg.kernel.shape());
    result.push_meta("target", cfg.target);
    result.push_meta("pool_level", cfg.pool_level);
    result.push_meta("reference_level", cfg.reference_level);
    result.push_meta("solver", format!("{:?}", cfg.solver));
    result.push_meta("nodal", cfg.nodal);
    result.push_meta("seed", cfg.seed);
    result.push_meta("generated_unix", unix_seconds());
}

/// Sweeps the trial-space family over decreasing fill distance: stabilize,
/// solve, and measure errors per member; fits the log-log rate of the sup
/// error against the fill distance over the non-flagged rows. Rows are
/// flagged when the stabilizer budget runs out or the basis condition
/// exceeds 1e14, and flagged rows are excluded from the fit.
pub fn run_convergence_study(cfg: &ConvergenceConfig) -> Result<StudyResult> {
    if cfg.grid_sizes.len() < 3 {
        return Err(Error::InvalidParameter(
            "convergence study needs at least three family members".into(),
        ));
    }
    let mut columns = vec![
        "M", "N", "h", "stability", "data_residual", "tsd_error", "wp_sup", "wp_l2",
    ];
    if cfg.nodal {
        columns.push("nodal_error");
    }
    columns.extend_from_slice(&["cond", "flagged"]);
    let mut result = StudyResult::new(&columns);
    result.push_meta("study", "convergence");
    echo_config(&mut result, cfg);

    let truth = cfg.problem.solution.field.clone();
    // rows are independent; compute them concurrently, assemble in order
    let computed: Vec<Result<(Vec<Cell>, Option<(f64, f64)>)>> = cfg
        .grid_sizes
        .par_iter()
        .map(|&n| convergence_row(cfg, n, truth.as_ref()))
        .collect();
    let mut fit_points: Vec<(f64, f64)> = Vec::new();
    for item in computed {
        let (row, fit) = item?;
        if let Some(p) = fit {
            fit_points.push(p);
        }
        result.push_row(row);
    }
    if fit_points.len() >= 2 {
        result.fitted_rate = Some(rate_estimate(&fit_points)?);
    }
    Ok(result)
}

fn convergence_row(
    cfg: &ConvergenceConfig,
    n: usize,
    truth: &dyn Field,
) -> Result<(Vec<Cell>, Option<(f64, f64)>)> {
    let member = build_member(cfg, n)?;
    let b = rhs_vector(&member.selected, &cfg.problem)?;
    let report = solve(cfg.solver, &member.a_res, &b)?;
    let b_ref = rhs_vector(&member.reference, &cfg.problem)?;
    let tsd = solve_chebyshev(&member.a_ref, &b_ref)?.residual_sup;
    let (wp_sup, wp_l2) =
        wp_error(&cfg.problem.domain, &member.trial, &report.coefficients, truth)?;
    let cond = basis_condition(&member.trial, &cfg.problem.domain)?;
    let flagged = member.budget_exhausted || cond > 1e14;
    let mut row = vec![
        Cell::Int(member.trial.dim() as i64),
        Cell::Int(member.a_res.nrows() as i64),
        Cell::Float(member.h),
        Cell::Float(member.stability),
        Cell::Float(report.residual_sup),
        Cell::Float(tsd),
        Cell::Float(wp_sup),
        Cell::Float(wp_l2),
    ];
    if cfg.nodal {
        let nodes = match member.trial.as_ref() {
            TrialSpace::Nodal { nodes, .. } => nodes.clone(),
            _ => unreachable!("nodal flag builds a nodal space"),
        };
        let nodal_error = nodes
            .iter()
            .zip(&report.coefficients)
            .map(|(x, c)| (c - truth.value(x)).abs())
            .fold(0.0f64, f64::max);
        row.push(Cell::Float(nodal_error));
    }
    row.push(Cell::Float(cond));
    row.push(Cell::Int(flagged as i64));
    let fit = if flagged { None } else { Some((member.h, wp_sup)) };
    Ok((row, fit))
}

// ---------------------------------------------------------------------------
// noise study
// ---------------------------------------------------------------------------

#[derive(Clone)]
pub struct NoiseConfig {
    pub base: ConvergenceConfig,
    /// Single family member the noise is injected into.
    pub grid_size: usize,
    pub eps: Vec<f64>,
    pub repetitions: usize,
    /// Residual-minimizer quality cap the rows are checked against.
    pub ca_cap: f64,
}

/// Injects uniform noise of each level into the restricted data and checks
/// the recovered error on the reference functionals against the bound
/// (2 C_A + 3) * tsd + (2 C_A + 2) * noise, which holds whenever the
/// restriction's stability constant is at most 2.
pub fn run_noise_study(cfg: &NoiseConfig) -> Result<StudyResult> {
    let mut result = StudyResult::new(&[
        "eps", "rep", "noise_sup", "ca", "measured_error", "bound", "satisfied",
    ]);
    result.push_meta("study", "noise");
    echo_config(&mut result, &cfg.base);
    result.push_meta("grid_size", cfg.grid_size);
    result.push_meta("repetitions", cfg.repetitions);
    result.push_meta("ca_cap", cfg.ca_cap);

    let member = build_member(&cfg.base, cfg.grid_size)?;
    if member.budget_exhausted {
        return Err(Error::InvalidParameter(format!(
            "noise study needs a stabilized restriction; best constant {}",
            member.stability
        )));
    }
    result.push_meta("stability", member.stability);
    let b_res = rhs_vector(&member.selected, &cfg.base.problem)?;
    let b_ref = rhs_vector(&member.reference, &cfg.base.problem)?;
    // best sup-norm data fit of the truth by the trial space on the reference
    let tsd = solve_chebyshev(&member.a_ref, &b_ref)?.residual_sup;
    result.push_meta("tsd_error", tsd);
    let b_ref_v = DVector::from_column_slice(&b_ref);

    for (k, &eps) in cfg.eps.iter().enumerate() {
        for rep in 0..cfg.repetitions {
            let noise_seed = cfg.base.seed
                .wrapping_add(1_000_003u64.wrapping_mul(k as u64))
                .wrapping_add(rep as u64);
            let noisy = perturb_data(&b_res, NoiseModel::Uniform { eps }, noise_seed);
            let noise_sup = noisy
                .iter()
                .zip(&b_res)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            let report = solve_chebyshev(&member.a_res, &noisy)?;
            let ca = report.achieved_ca;
            let coeffs = DVector::from_column_slice(&report.coefficients);
            let measured = (&member.a_ref * &coeffs - &b_ref_v).amax();
            let bound = (2.0 * ca + 3.0) * tsd + (2.0 * ca + 2.0) * noise_sup;
            result.push_row(vec![
                Cell::Float(eps),
                Cell::Int(rep as i64),
                Cell::Float(noise_sup),
                Cell::Float(ca),
                Cell::Float(measured),
                Cell::Float(bound),
                Cell::Int((measured <= bound) as i64),
            ]);
        }
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// nodal study
// ---------------------------------------------------------------------------

/// Tracks nodal errors across the family: each member is re-based to its
/// Lagrange basis, so solved coefficients are nodal values directly. The
/// comparison object is the nodal interpolant of the truth; its test residual
/// should control the nodal error with a stable ratio across refinement.
pub fn run_nodal_study(cfg: &ConvergenceConfig) -> Result<StudyResult> {
    let mut cfg = cfg.clone();
    cfg.nodal = true;
    let mut result = StudyResult::new(&[
        "M", "h", "stability", "nodal_error", "test_residual", "ratio", "wp_sup",
    ]);
    result.push_meta("study", "nodal");
    echo_config(&mut result, &cfg);

    let truth = cfg.problem.solution.field.clone();
    for &n in &cfg.grid_sizes {
        let member = build_member(&cfg, n)?;
        let nodes = match member.trial.as_ref() {
            TrialSpace::Nodal { nodes, .. } => nodes.clone(),
            _ => unreachable!(),
        };
        let b = rhs_vector(&member.selected, &cfg.problem)?;
        let report = solve(cfg.solver, &member.a_res, &b)?;
        let nodal_error = nodes
            .iter()
            .zip(&report.coefficients)
            .map(|(x, c)| (c - truth.value(x)).abs())
            .fold(0.0f64, f64::max);
        // nodal interpolant of the truth: its coefficients are nodal values
        let star: Vec<f64> = nodes.iter().map(|x| truth.value(x)).collect();
        let star_v = DVector::from_column_slice(&star);
        let b_v = DVector::from_column_slice(&b);
        let test_residual = (&member.a_res * &star_v - &b_v).amax();
        let ratio = if test_residual > 1e-15 { nodal_error / test_residual } else { 0.0 };
        let (wp_sup, _) =
            wp_error(&cfg.problem.domain, &member.trial, &report.coefficients, truth.as_ref())?;
        result.push_row(vec![
            Cell::Int(member.trial.dim() as i64),
            Cell::Float(member.h),
            Cell::Float(member.stability),
            Cell::Float(nodal_error),
            Cell::Float(test_residual),
            Cell::Float(ratio),
            Cell::Float(wp_sup),
        ]);
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// local-average norm check
// ---------------------------------------------------------------------------

/// Random trigonometric field vanishing on the unit-square boundary, with
/// modes up to 3 in each direction.
fn random_trig_field(rng: &mut ChaCha8Rng) -> SmoothFnField {
    use std::f64::consts::PI;
    let coeffs: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let c = coeffs.clone();
    let value = move |p: &Point| {
        let mut s = 0.0;
        for k in 1..=3usize {
            for l in 1..=3usize {
                s += c[3 * (k - 1) + (l - 1)]
                    * (k as f64 * PI * p.x()).sin()
                    * (l as f64 * PI * p.y()).sin();
            }
        }
        s
    };
    let v2 = value.clone();
    let v3 = value.clone();
    SmoothFnField {
        dim: 2,
        value: Box::new(value),
        gradient: Box::new(move |p| {
            // not used by the check; finite differences of the value
            crate::field::fd_gradient(&crate::field::FnField::new(2, &v2), p, 1e-6)
        }),
        laplacian: Box::new(move |p| {
            crate::field::fd_laplacian(&crate::field::FnField::new(2, &v3), p, 1e-4)
        }),
    }
}

/// Interior-grid level whose spacing resolves balls of radius `r`: spacing
/// at most r/2, between levels 5 and 7.
fn center_level_for_radius(r: f64) -> u32 {
    for level in 5..=7u32 {
        if 1.0 / (1u64 << level) as f64 <= r / 2.0 {
            return level;
        }
    }
    7
}

/// For random smooth fields on the unit square, compares the sup over
/// interior balls of the absolute ball average against the plain sup norm.
/// As the radius shrinks the ball sup should rise monotonically toward the
/// sup norm; rows are ordered field-major with decreasing radius.
pub fn run_mlpg_norm_check(n_fields: usize, radii: &[f64], seed: u64) -> Result<StudyResult> {
    let domain = Domain::UnitSquare;
    let mut result = StudyResult::new(&["field", "radius", "ball_sup", "sup_norm", "gap"]);
    result.push_meta("study", "mlpg-norm-check");
    result.push_meta("fields", n_fields);
    result.push_meta("seed", seed);
    result.push_meta("generated_unix", unix_seconds());
    let mut radii: Vec<f64> = radii.to_vec();
    radii.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let measurement = domain.measurement_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for field_idx in 0..n_fields {
        let field = random_trig_field(&mut rng);
        let sup_norm = measurement
            .iter()
            .map(|p| field.value(p).abs())
            .fold(0.0f64, f64::max);
        for &r in &radii {
            let level = center_level_for_radius(r);
            let mut ball_sup = 0.0f64;
            for center in domain.interior_grid(level) {
                let ball = Ball::new(center, r);
                if !domain.contains_ball(&ball) {
                    continue;
                }
                let rule = disk_rule(8, ball);
                let avg = integrate_region(&rule, |p| field.value(p))? / ball.measure();
                ball_sup = ball_sup.max(avg.abs());
            }
            result.push_row(vec![
                Cell::Int(field_idx as i64),
                Cell::Float(r),
                Cell::Float(ball_sup),
                Cell::Float(sup_norm),
                Cell::Float((sup_norm - ball_sup) / sup_norm),
            ]);
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{manufactured_solution, ManufacturedSolution, ProblemKind};

    #[test]
    fn rate_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = [0.5, 0.25, 0.125, 0.0625]
            .iter()
            .map(|&h| (h, h * h))
            .collect();
        assert!((rate_estimate(&pts).unwrap() - 2.0).abs() < 1e-12);
        let flat: Vec<(f64, f64)> = [0.5, 0.25, 0.125].iter().map(|&h| (h, 3.0)).collect();
        assert!(rate_estimate(&flat).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rate_with_multiplicative_jitter() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<(f64, f64)> = (0..8)
            .map(|i| {
                let h = 0.5f64.powi(i);
                let jitter = 1.0 + rng.gen_range(-0.01..=0.01);
                (h, 3.0 * h.powf(1.5) * jitter)
            })
            .collect();
        let rate = rate_estimate(&pts).unwrap();
        assert!((rate - 1.5).abs() < 0.1, "rate {rate}");
    }

    #[test]
    fn rate_rejects_nonpositive() {
        assert!(rate_estimate(&[(0.5, 1.0)]).is_err());
        assert!(matches!(
            rate_estimate(&[(0.5, 1.0), (0.25, -1.0)]),
            Err(Error::NonPositiveInput { .. })
        ));
        assert!(rate_estimate(&[(0.5, 1.0), (0.5, 2.0)]).is_err());
    }

    #[test]
    fn csv_round_trips() {
        let mut r = StudyResult::new(&["M", "rule", "constant"]);
        r.push_meta("seed", 42);
        r.push_meta("kernel", "gaussian");
        r.fitted_rate = Some(1.532e-3);
        r.push_row(vec![
            Cell::Int(5),
            Cell::Text("equidistant-square".into()),
            Cell::Float(1.25),
        ]);
        r.push_row(vec![
            Cell::Int(20),
            Cell::Text("chebyshev-square".into()),
            Cell::Float(2.900_788_212_012_553e0),
        ]);
        let text = r.to_csv_string();
        let back = StudyResult::parse_csv(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.column("constant").unwrap()[0], 1.25);
        assert!(back.column("rule").is_err());
    }

    #[test]
    fn stability_study_small_oracle_values() {
        let r = run_stability_study(
            &[2, 3],
            &[NodeRule::EquidistantSquare],
            0,
        )
        .unwrap();
        let c = r.column("constant").unwrap();
        // two equidistant nodes: linear hats, partition of unity
        assert!((c[0] - 1.0).abs() < 1e-9, "C(2,2) = {}", c[0]);
        // three equidistant nodes: Lebesgue constant 1.25
        assert!((c[1] - 1.25).abs() < 1e-6, "C(3,3) = {}", c[1]);
    }

    #[test]
    fn stability_study_chebyshev_grows_like_log() {
        let r = run_stability_study(&[20], &[NodeRule::ChebyshevSquare], 0).unwrap();
        let c = r.column("constant").unwrap()[0];
        let log_bound = (2.0 / std::f64::consts::PI) * (20.0f64).ln() + 1.0;
        assert!(c < 1.5 * log_bound && c > log_bound / 1.5, "C = {c} vs {log_bound}");
    }

    fn kernel_combo_solution(kernel: RadialKernel) -> ManufacturedSolution {
        let centers = unit_square_grid(2);
        let coeffs: Vec<f64> = (0..centers.len()).map(|i| 0.3 + 0.1 * i as f64).collect();
        let (c1, z1) = (coeffs.clone(), centers.clone());
        let (c2, z2) = (coeffs.clone(), centers.clone());
        let (c3, z3) = (coeffs, centers);
        let (ka, kb, kc) = (kernel.clone(), kernel.clone(), kernel);
        ManufacturedSolution {
            name: "kernel_combo".into(),
            field: Arc::new(SmoothFnField {
                dim: 2,
                value: Box::new(move |p| {
                    z1.iter().zip(&c1).map(|(z, c)| c * ka.eval(p, z).unwrap()).sum()
                }),
                gradient: Box::new(move |p| {
                    let mut g = [0.0, 0.0];
                    for (z, c) in z2.iter().zip(&c2) {
                        let gz = kb.eval_grad_x(p, z).unwrap();
                        g[0] += c * gz[0];
                        g[1] += c * gz[1];
                    }
                    g
                }),
                laplacian: Box::new(move |p| {
                    z3.iter()
                        .zip(&c3)
                        .map(|(z, c)| c * kc.eval_laplacian_x(p, z).unwrap())
                        .sum()
                }),
            }),
            source: Arc::new(crate::field::FnField::new(2, |_| 0.0)),
        }
    }

    #[test]
    fn convergence_reproduces_contained_truth() {
        // the truth is a combination of translates at grid(2) centers, which
        // every family member's center set contains
        let kernel = RadialKernel::whittle_matern(4.5, 0.5, 2).unwrap();
        let cfg = ConvergenceConfig {
            problem: ProblemSpec::new(
                ProblemKind::InterpolationStrong,
                Domain::UnitSquare,
                kernel_combo_solution(kernel.clone()),
            ),
            kernel,
            grid_sizes: vec![2, 4, 6],
            target: 2.0,
            pool_level: 4,
            reference_level: 5,
            solver: SolverKind::Chebyshev,
            nodal: false,
            seed: 1,
        };
        let r = run_convergence_study(&cfg).unwrap();
        for (wp, flag) in r
            .column("wp_sup")
            .unwrap()
            .iter()
            .zip(r.column("flagged").unwrap())
        {
            assert_eq!(flag, 0.0);
            assert!(*wp <= 1e-8, "wp_sup = {wp}");
        }
        for s in r.column("stability").unwrap() {
            assert!(s <= cfg.target * 1.1, "stability {s}");
        }
    }

    #[test]
    fn grid_sizes_for_study_fill_distances() {
        let hs = [0.25, 0.177, 0.125, 0.088];
        let ns: Vec<usize> = hs
            .iter()
            .map(|&h| grid_size_for_fill_distance(h).unwrap())
            .collect();
        assert_eq!(ns, vec![3, 4, 6, 8]);
        assert!(grid_size_for_fill_distance(-1.0).is_err());
    }

    #[test]
    fn noise_rows_satisfy_bound() {
        let kernel = RadialKernel::whittle_matern(4.5, 0.5, 2).unwrap();
        let cfg = NoiseConfig {
            base: ConvergenceConfig {
                problem: ProblemSpec::new(
                    ProblemKind::InterpolationStrong,
                    Domain::UnitSquare,
                    manufactured_solution("sin_sin_plus_x").unwrap(),
                ),
                kernel,
                grid_sizes: vec![],
                target: 2.0,
                pool_level: 3,
                reference_level: 4,
                solver: SolverKind::Chebyshev,
                nodal: false,
                seed: 3,
            },
            grid_size: 3,
            eps: vec![0.0, 1e-3],
            repetitions: 2,
            ca_cap: 1.5,
        };
        let r = run_noise_study(&cfg).unwrap();
        assert_eq!(r.rows.len(), 4);
        for s in r.column("satisfied").unwrap() {
            assert_eq!(s, 1.0);
        }
        for ca in r.column("ca").unwrap() {
            assert!(ca <= cfg.ca_cap, "achieved ca {ca}");
        }
        // determinism given the seed
        let again = run_noise_study(&cfg).unwrap();
        assert_eq!(again.rows, r.rows);
    }

    #[test]
    fn nodal_study_contained_truth_is_exact_at_nodes() {
        let kernel = RadialKernel::whittle_matern(4.5, 0.5, 2).unwrap();
        let cfg = ConvergenceConfig {
            problem: ProblemSpec::new(
                ProblemKind::InterpolationStrong,
                Domain::UnitSquare,
                kernel_combo_solution(kernel.clone()),
            ),
            kernel,
            grid_sizes: vec![2, 4, 6],
            target: 2.0,
            pool_level: 4,
            reference_level: 5,
            solver: SolverKind::Chebyshev,
            nodal: true,
            seed: 5,
        };
        let r = run_nodal_study(&cfg).unwrap();
        for (ne, wp) in r
            .column("nodal_error")
            .unwrap()
            .iter()
            .zip(r.column("wp_sup").unwrap())
        {
            assert!(*ne <= 1e-8, "nodal error {ne}");
            // nodes are grid points, so nodal error cannot exceed the grid sup
            assert!(*ne <= wp + 1e-10);
        }
    }

    #[test]
    fn ball_average_sup_rises_toward_sup_norm() {
        let r = run_mlpg_norm_check(2, &[0.2, 0.1], 11).unwrap();
        let ball = r.column("ball_sup").unwrap();
        let sup = r.column("sup_norm").unwrap();
        for i in 0..2 {
            let (a, b) = (ball[2 * i], ball[2 * i + 1]);
            assert!(b >= a - 1e-6, "field {i}: {a} -> {b}");
            assert!(b <= sup[2 * i] * (1.0 + 1e-9));
        }
    }
}
