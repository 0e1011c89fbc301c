//! Assembly of functional-by-basis matrices, stability-constant estimation,
//! and greedy selection of stable restrictions.
//!
//! The stability constant of a restriction measures how well the restricted
//! data controls the full reference data over the trial space:
//!
//! ```text
//! C = sup_{a != 0} ||A_ref a||_inf / ||A_res a||_inf
//! ```
//!
//! For square invertible restrictions the constant is computed exactly by
//! duality; otherwise the estimator returns a certified lower bound.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::geometry::Domain;
use crate::trialspaces::TrialSpace;

/// An ordered set of functionals, deduplicated by descriptor.
#[derive(Clone)]
pub struct Restriction {
    pub functionals: Vec<Functional>,
}

impl Restriction {
    pub fn new(functionals: Vec<Functional>) -> Self {
        let mut seen = std::collections::HashSet::new();
        let functionals = functionals
            .into_iter()
            .filter(|f| seen.insert(f.descriptor()))
            .collect();
        Restriction { functionals }
    }

    pub fn len(&self) -> usize {
        self.functionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functionals.is_empty()
    }

    pub fn union(&self, other: &Restriction) -> Restriction {
        let mut all = self.functionals.clone();
        all.extend(other.functionals.clone());
        Restriction::new(all)
    }

    pub fn is_subset_of(&self, other: &Restriction) -> bool {
        let theirs: std::collections::HashSet<String> =
            other.functionals.iter().map(|f| f.descriptor()).collect();
        self.functionals.iter().all(|f| theirs.contains(&f.descriptor()))
    }

    /// Writes one functional descriptor per line.
    pub fn write_manifest(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for f in &self.functionals {
            text.push_str(&f.descriptor());
            text.push('\n');
        }
        fs::write(path, text)?;
        Ok(())
    }
}

/// Matrix of all functionals applied to all basis functions, row per
/// functional.
pub fn assemble(functionals: &[Functional], space: &TrialSpace) -> Result<DMatrix<f64>> {
    let m = space.dim();
    let mut a = DMatrix::zeros(functionals.len(), m);
    for (k, f) in functionals.iter().enumerate() {
        let row = f.apply_to_basis(space)?;
        for (j, v) in row.iter().enumerate() {
            a[(k, j)] = *v;
        }
    }
    Ok(a)
}

#[derive(Clone, Debug)]
pub struct StabilityEstimate {
    pub constant: f64,
    /// True when the value is exact (square restriction), false for a
    /// certified lower bound.
    pub exact: bool,
    /// Coefficient vector realizing the reported ratio.
    pub witness: Vec<f64>,
}

/// Search effort for the lower-bound path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Effort {
    /// Pseudoinverse seeds and coordinate polish only.
    Cheap,
    /// Adds constrained sup-norm minimization around the best seeds.
    Thorough,
}

fn ratio(a_ref: &DMatrix<f64>, a_res: &DMatrix<f64>, a: &DVector<f64>) -> f64 {
    let denom = (a_res * a).amax();
    if denom == 0.0 {
        return f64::INFINITY;
    }
    (a_ref * a).amax() / denom
}

pub fn estimate_stability(
    a_ref: &DMatrix<f64>,
    a_res: &DMatrix<f64>,
    seed: u64,
) -> Result<StabilityEstimate> {
    estimate_stability_with(a_ref, a_res, seed, Effort::Thorough)
}

pub fn estimate_stability_with(
    a_ref: &DMatrix<f64>,
    a_res: &DMatrix<f64>,
    seed: u64,
    effort: Effort,
) -> Result<StabilityEstimate> {
    let m = a_res.ncols();
    if a_ref.ncols() != m {
        return Err(Error::DimensionMismatch { expected: m, got: a_ref.ncols() });
    }
    if a_res.nrows() == 0 {
        return Ok(StabilityEstimate {
            constant: f64::INFINITY,
            exact: true,
            witness: first_nonzero_direction(a_ref),
        });
    }

    // rank check: a null direction of the restriction seen by the reference
    // makes the constant infinite
    let svd = a_res.clone().svd(false, true);
    let smax = svd.singular_values.max();
    let smin = if a_res.nrows() >= m { svd.singular_values.min() } else { 0.0 };
    if smin <= 1e-12 * smax {
        // null directions of the restriction from the spectral decomposition
        // of A^T A (the thin SVD does not expose them when rows < cols)
        let eig = (a_res.transpose() * a_res).symmetric_eigen();
        for (i, lam) in eig.eigenvalues.iter().enumerate() {
            if lam.abs().sqrt() <= 1e-10 * smax.max(1e-300) {
                let v = eig.eigenvectors.column(i).into_owned();
                if (a_ref * &v).amax() > 1e-10 * smax {
                    return Ok(StabilityEstimate {
                        constant: f64::INFINITY,
                        exact: true,
                        witness: v.as_slice().to_vec(),
                    });
                }
            }
        }
        if a_res.nrows() < m {
            return Ok(StabilityEstimate {
                constant: f64::INFINITY,
                exact: true,
                witness: first_nonzero_direction(a_ref),
            });
        }
    }

    if a_res.nrows() == m {
        return Ok(exact_square_constant(a_ref, a_res));
    }

    // lower-bound search
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = StabilityEstimate {
        constant: 0.0,
        exact: false,
        witness: vec![0.0; m],
    };
    let consider = |a: &DVector<f64>, best: &mut StabilityEstimate| {
        let r = ratio(a_ref, a_res, a);
        if r > best.constant {
            best.constant = r;
            best.witness = a.as_slice().to_vec();
        }
    };

    // pseudoinverse seeds: for each (sampled) reference row r, the flattest
    // coefficient vector with r.a fixed, a = (A_res^T A_res)^+ r
    let vt = svd.v_t.as_ref().unwrap();
    let mut pinv2 = DMatrix::zeros(m, m); // V S^-2 V^T
    for r in 0..vt.nrows() {
        let s = svd.singular_values[r];
        if s > 1e-12 * smax {
            let v = vt.row(r).transpose();
            pinv2 += &v * v.transpose() / (s * s);
        }
    }
    let nref = a_ref.nrows();
    let max_seeds = if effort == Effort::Thorough { 600 } else { 120 };
    let stride = nref.div_ceil(max_seeds).max(1);
    let mut ranked: Vec<(f64, DVector<f64>)> = Vec::new();
    for k in (0..nref).step_by(stride) {
        let r = a_ref.row(k).transpose();
        let cand = &pinv2 * r;
        if cand.amax() == 0.0 {
            continue;
        }
        let val = ratio(a_ref, a_res, &cand);
        consider(&cand, &mut best);
        ranked.push((val, cand));
    }
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    // random directions
    let n_random = if effort == Effort::Thorough { 200 } else { 40 };
    for _ in 0..n_random {
        let a = DVector::from_fn(m, |_, _| rng.gen_range(-1.0f64..1.0));
        consider(&a, &mut best);
    }

    if effort == Effort::Thorough {
        // around the best seeds, minimize the restricted sup norm while
        // pinning the dominant reference row to 1
        for (_, cand) in ranked.iter().take(4) {
            let refvals = a_ref * cand;
            let (mut krow, mut kval) = (0usize, 0.0f64);
            for (i, v) in refvals.iter().enumerate() {
                if v.abs() > kval {
                    kval = v.abs();
                    krow = i;
                }
            }
            if kval == 0.0 {
                continue;
            }
            if let Some(a) = min_sup_with_pinned_row(a_res, &a_ref.row(krow).transpose()) {
                consider(&a, &mut best);
            }
        }
    }

    // coordinate polish around the best witness
    let mut w = DVector::from_column_slice(&best.witness);
    if w.amax() > 0.0 {
        let rounds = if effort == Effort::Thorough { 3 } else { 1 };
        for _ in 0..rounds {
            for i in 0..m {
                let scale = w.amax();
                for t in [-0.3, -0.05, 0.05, 0.3] {
                    let mut cand = w.clone();
                    cand[i] += t * scale;
                    let r = ratio(a_ref, a_res, &cand);
                    if r > best.constant {
                        best.constant = r;
                        best.witness = cand.as_slice().to_vec();
                        w = cand;
                    }
                }
            }
        }
    }

    Ok(best)
}

fn first_nonzero_direction(a_ref: &DMatrix<f64>) -> Vec<f64> {
    for k in 0..a_ref.nrows() {
        if a_ref.row(k).amax() > 0.0 {
            return a_ref.row(k).transpose().as_slice().to_vec();
        }
    }
    let mut v = vec![0.0; a_ref.ncols()];
    if !v.is_empty() {
        v[0] = 1.0;
    }
    v
}

/// Exact constant for an invertible square restriction: by duality the
/// maximal ratio for reference row r is the 1-norm of A_res^{-T} r, realized
/// by pushing all restricted values to +-1.
fn exact_square_constant(a_ref: &DMatrix<f64>, a_res: &DMatrix<f64>) -> StabilityEstimate {
    let lu = a_res.transpose().lu();
    let mut best = 0.0f64;
    let mut best_dual: Option<DVector<f64>> = None;
    for k in 0..a_ref.nrows() {
        let r = a_ref.row(k).transpose();
        if let Some(d) = lu.solve(&r) {
            let l1 = d.iter().map(|v| v.abs()).sum::<f64>();
            if l1 > best {
                best = l1;
                best_dual = Some(d);
            }
        }
    }
    let witness = match best_dual {
        Some(d) => {
            let signs = DVector::from_iterator(d.len(), d.iter().map(|v| v.signum()));
            a_res
                .clone()
                .lu()
                .solve(&signs)
                .map(|w| w.as_slice().to_vec())
                .unwrap_or_else(|| vec![0.0; a_res.ncols()])
        }
        None => vec![0.0; a_res.ncols()],
    };
    StabilityEstimate { constant: best.max(0.0), exact: true, witness }
}

/// Minimizes ||A_res a||_inf subject to r.a = 1, by eliminating the pivot
/// variable with the largest |r_j| and solving the reduced sup-norm problem.
fn min_sup_with_pinned_row(a_res: &DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let m = r.len();
    let mut piv = 0;
    for i in 0..m {
        if r[i].abs() > r[piv].abs() {
            piv = i;
        }
    }
    if r[piv] == 0.0 {
        return None;
    }
    if m == 1 {
        return Some(DVector::from_element(1, 1.0 / r[piv]));
    }
    let n = a_res.nrows();
    // a = e_piv / r_piv + Z atil; columns of A_res Z and the offset
    let mut b = DMatrix::zeros(n, m - 1);
    let mut c = DVector::zeros(n);
    for row in 0..n {
        c[row] = a_res[(row, piv)] / r[piv];
        let mut col = 0;
        for i in 0..m {
            if i == piv {
                continue;
            }
            b[(row, col)] = a_res[(row, i)] - a_res[(row, piv)] * r[i] / r[piv];
            col += 1;
        }
    }
    let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();
    // a stability witness needs no high-accuracy minimax; cap the iterations
    let sol = crate::solvers::solve_chebyshev_iters(&b, &neg_c, 120).ok()?;
    let mut a = DVector::zeros(m);
    let mut col = 0;
    let mut acc = 1.0;
    for i in 0..m {
        if i == piv {
            continue;
        }
        a[i] = sol.coefficients[col];
        acc -= r[i] * a[i];
        col += 1;
    }
    a[piv] = acc / r[piv];
    Some(a)
}

/// Result payload of a (possibly failed) stabilization run.
#[derive(Clone, Debug)]
pub struct StabilizeOutcome {
    /// Pool row indices selected for the restriction, in insertion order.
    pub selected: Vec<usize>,
    /// Best stability estimate achieved.
    pub constant: f64,
    /// Number of stability estimates performed.
    pub evaluations: usize,
}

/// Grows a restriction from the pool until the estimated stability constant
/// drops to `target`: each step adds the pool functional that sees the
/// current worst-case coefficient vector the strongest.
pub fn greedy_stabilize(
    pool: &DMatrix<f64>,
    reference: &DMatrix<f64>,
    seed_rows: &[usize],
    target: f64,
    budget: usize,
    rng_seed: u64,
) -> Result<StabilizeOutcome> {
    let m = pool.ncols();
    if reference.ncols() != m {
        return Err(Error::DimensionMismatch { expected: m, got: reference.ncols() });
    }
    let mut selected: Vec<usize> = Vec::new();
    for &i in seed_rows {
        if i < pool.nrows() && !selected.contains(&i) {
            selected.push(i);
        }
    }
    let mut evaluations = 0;
    let mut best_constant = f64::INFINITY;
    let mut best_selected = selected.clone();
    loop {
        let a_res = rows_of(pool, &selected);
        let cheap = estimate_stability_with(reference, &a_res, rng_seed, Effort::Cheap)?;
        evaluations += 1;
        let est = if cheap.constant <= target {
            let strong = estimate_stability(reference, &a_res, rng_seed)?;
            evaluations += 1;
            strong
        } else {
            cheap
        };
        if est.constant < best_constant {
            best_constant = est.constant;
            best_selected = selected.clone();
        }
        if est.constant <= target {
            return Ok(StabilizeOutcome { selected, constant: est.constant, evaluations });
        }
        if selected.len() >= budget {
            return Err(Error::BudgetExhausted {
                budget,
                best_constant,
                best: Box::new(StabilizeOutcome {
                    selected: best_selected,
                    constant: best_constant,
                    evaluations,
                }),
            });
        }
        // add the pool row that sees the witness the strongest
        let w = DVector::from_column_slice(&est.witness);
        let mut pick = None;
        let mut pick_val = 0.0;
        for i in 0..pool.nrows() {
            if selected.contains(&i) {
                continue;
            }
            let v = pool.row(i).transpose().dot(&w).abs();
            if v > pick_val {
                pick_val = v;
                pick = Some(i);
            }
        }
        match pick {
            Some(i) if pick_val > 0.0 => selected.push(i),
            _ => {
                return Err(Error::BudgetExhausted {
                    budget,
                    best_constant,
                    best: Box::new(StabilizeOutcome {
                        selected: best_selected,
                        constant: best_constant,
                        evaluations,
                    }),
                })
            }
        }
    }
}

fn rows_of(mat: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows.len(), mat.ncols());
    for (k, &i) in rows.iter().enumerate() {
        out.row_mut(k).copy_from(&mat.row(i));
    }
    out
}

/// Condition number of the basis over a dense domain sample: the singular
/// value ratio of the sampled value matrix. Flags parametrizations (like raw
/// monomials) whose coefficients are numerically meaningless.
pub fn basis_condition(space: &TrialSpace, domain: &Domain) -> Result<f64> {
    let pts = domain.measurement_grid();
    let stride = (pts.len() / 2000).max(1);
    let sample: Vec<_> = pts.into_iter().step_by(stride).collect();
    if sample.len() < space.dim() {
        return Err(Error::InvalidParameter("too few samples for basis condition".into()));
    }
    let mut b = DMatrix::zeros(sample.len(), space.dim());
    for (k, p) in sample.iter().enumerate() {
        for (j, v) in space.eval_basis(p)?.iter().enumerate() {
            b[(k, j)] = *v;
        }
    }
    let sv = b.svd(false, false).singular_values;
    let smin = sv.min();
    if smin <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(sv.max() / smin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::trialspaces::{equidistant_points, PolyBasis};

    fn poly_space(degree: usize) -> TrialSpace {
        TrialSpace::Polynomial { degree, a: -1.0, b: 1.0, basis: PolyBasis::Chebyshev }
    }

    fn point_rows(space: &TrialSpace, pts: &[Point]) -> DMatrix<f64> {
        let fs: Vec<Functional> = pts.iter().map(|p| Functional::point(*p)).collect();
        assemble(&fs, space).unwrap()
    }

    #[test]
    fn quadratic_equidistant_lebesgue_constant() {
        // interpolation at {-1, 0, 1} has Lebesgue constant 5/4, attained at
        // x = +-1/2
        let space = poly_space(2);
        let a_res = point_rows(&space, &equidistant_points(3, -1.0, 1.0));
        let a_ref = point_rows(&space, &Domain::Interval(-1.0, 1.0).grid(10));
        let est = estimate_stability(&a_ref, &a_res, 0).unwrap();
        assert!(est.exact);
        assert!((est.constant - 1.25).abs() < 1e-12, "{}", est.constant);
        // the witness realizes the ratio
        let w = DVector::from_column_slice(&est.witness);
        assert!((ratio(&a_ref, &a_res, &w) - 1.25).abs() < 1e-10);
    }

    #[test]
    fn identical_reference_gives_constant_one() {
        let space = poly_space(3);
        let pts = equidistant_points(4, -1.0, 1.0);
        let a = point_rows(&space, &pts);
        let est = estimate_stability(&a, &a, 0).unwrap();
        assert!((est.constant - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_restriction_is_infinite() {
        let space = poly_space(2);
        let a_res = point_rows(&space, &equidistant_points(2, -1.0, 1.0));
        let a_ref = point_rows(&space, &Domain::Interval(-1.0, 1.0).grid(6));
        let est = estimate_stability(&a_ref, &a_res, 0).unwrap();
        assert!(est.constant.is_infinite());
        assert!(est.exact);
        // witness is invisible to the restriction but seen by the reference
        let w = DVector::from_column_slice(&est.witness);
        assert!((&a_res * &w).amax() < 1e-8 * (&a_ref * &w).amax());
    }

    #[test]
    fn oversampling_does_not_increase_the_constant() {
        let space = poly_space(2);
        let a_ref = point_rows(&space, &Domain::Interval(-1.0, 1.0).grid(9));
        let square = point_rows(&space, &equidistant_points(3, -1.0, 1.0));
        let over = point_rows(&space, &equidistant_points(7, -1.0, 1.0));
        let c_square = estimate_stability(&a_ref, &square, 0).unwrap().constant;
        let c_over = estimate_stability(&a_ref, &over, 0).unwrap().constant;
        assert!(c_over <= c_square + 1e-9, "{c_over} vs {c_square}");
        assert!(c_over >= 1.0 - 1e-9);
    }

    /// Exact maximal ratio for small systems: the maximum over vertices of
    /// the polytope {||A_res a||_inf <= 1}, i.e. over all ways of making
    /// `m` restricted rows active with arbitrary signs.
    fn brute_force_constant(a_ref: &DMatrix<f64>, a_res: &DMatrix<f64>) -> f64 {
        let m = a_res.ncols();
        let n = a_res.nrows();
        let mut best = 0.0f64;
        let idx: Vec<usize> = (0..n).collect();
        let mut subset = vec![0usize; m];
        fn rec(
            idx: &[usize],
            start: usize,
            k: usize,
            subset: &mut Vec<usize>,
            a_ref: &DMatrix<f64>,
            a_res: &DMatrix<f64>,
            best: &mut f64,
        ) {
            let m = a_res.ncols();
            if k == m {
                for signs in 0..(1u32 << m) {
                    let mut mat = DMatrix::zeros(m, m);
                    let mut rhs = DVector::zeros(m);
                    for (row, &i) in subset.iter().enumerate() {
                        mat.row_mut(row).copy_from(&a_res.row(i));
                        rhs[row] = if signs & (1 << row) != 0 { 1.0 } else { -1.0 };
                    }
                    if let Some(a) = mat.lu().solve(&rhs) {
                        if (a_res * &a).amax() <= 1.0 + 1e-9 {
                            *best = best.max((a_ref * &a).amax());
                        }
                    }
                }
                return;
            }
            for pos in start..idx.len() {
                subset[k] = idx[pos];
                rec(idx, pos + 1, k + 1, subset, a_ref, a_res, best);
            }
        }
        rec(&idx, 0, 0, &mut subset, a_ref, a_res, &mut best);
        best
    }

    #[test]
    fn lower_bound_estimator_is_tight_on_small_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let a_res = DMatrix::from_fn(6, 3, |_, _| rng.gen_range(-1.0f64..1.0));
            let a_ref = DMatrix::from_fn(9, 3, |_, _| rng.gen_range(-1.0f64..1.0));
            let oracle = brute_force_constant(&a_ref, &a_res);
            let est = estimate_stability(&a_ref, &a_res, 5).unwrap();
            assert!(!est.exact);
            assert!(est.constant <= oracle * (1.0 + 1e-8), "{} above {oracle}", est.constant);
            assert!(est.constant >= 0.9 * oracle, "{} far below {oracle}", est.constant);
        }
    }

    #[test]
    fn monomial_basis_condition_blows_up() {
        let cheb = TrialSpace::Polynomial { degree: 20, a: 0.0, b: 1.0, basis: PolyBasis::Chebyshev };
        let mono = TrialSpace::Polynomial { degree: 20, a: 0.0, b: 1.0, basis: PolyBasis::Monomial };
        let dom = Domain::Interval(0.0, 1.0);
        let c_cheb = basis_condition(&cheb, &dom).unwrap();
        let c_mono = basis_condition(&mono, &dom).unwrap();
        assert!(c_mono > 1e3 * c_cheb, "{c_mono} vs {c_cheb}");
        assert!(c_mono > 1e10);
    }

    #[test]
    fn greedy_reaches_the_target() {
        let space = poly_space(4);
        let pool_pts = Domain::Interval(-1.0, 1.0).grid(6);
        let pool = point_rows(&space, &pool_pts);
        let reference = point_rows(&space, &Domain::Interval(-1.0, 1.0).grid(9));
        // seed with the two endpoints
        let out = greedy_stabilize(&pool, &reference, &[0, pool_pts.len() - 1], 4.0, 30, 1)
            .unwrap();
        assert!(out.constant <= 4.0);
        assert!(out.selected.len() >= space.dim());
        // verify the claim independently
        let a_res = rows_of(&pool, &out.selected);
        let check = estimate_stability(&reference, &a_res, 99).unwrap();
        assert!(check.constant <= 4.0 * (1.0 + 1e-6), "{}", check.constant);
    }

    #[test]
    fn greedy_budget_exhaustion_reports_best_attempt() {
        let space = poly_space(4);
        let pool = point_rows(&space, &Domain::Interval(-1.0, 1.0).grid(6));
        let reference = point_rows(&space, &Domain::Interval(-1.0, 1.0).grid(9));
        let err = greedy_stabilize(&pool, &reference, &[], 1.01, 4, 1).unwrap_err();
        match err {
            Error::BudgetExhausted { budget, best_constant, best } => {
                assert_eq!(budget, 4);
                assert!(best_constant.is_infinite() || best_constant > 1.01);
                assert!(best.selected.len() <= 4);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn restriction_set_operations() {
        let fs: Vec<Functional> = equidistant_points(4, 0.0, 1.0)
            .into_iter()
            .map(Functional::point)
            .collect();
        let small = Restriction::new(fs[..2].to_vec());
        let big = Restriction::new(fs.clone());
        assert!(small.is_subset_of(&big));
        assert!(!big.is_subset_of(&small));
        let u = small.union(&big);
        assert_eq!(u.len(), 4);
        let dir = std::env::temp_dir().join("restriction_manifest_test.txt");
        u.write_manifest(&dir).unwrap();
        let text = fs::read_to_string(&dir).unwrap();
        assert_eq!(text.lines().count(), 4);
        fs::remove_file(&dir).ok();
    }
}
