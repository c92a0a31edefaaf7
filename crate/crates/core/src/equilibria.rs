//! Equilibrium finding, linearized stability, and rank-based estimates of
//! the local attractor dimension.
//!
//! The dimension of the equilibrium set near `x*` is `n − rank J(x*)` when the
//! Jacobian rank is bounded by its value at `x*` throughout a neighbourhood.
//! That bound cannot be certified over all of `Rⁿ`; [`survey_rank`] checks it on
//! a sampling box and reports what it saw.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dynsys::{DynamicalSystem, Form};
use crate::error::{Error, Result};
use crate::sampling::SampleBox;
use crate::spectral::{self, SpectrumReport, DEFAULT_RANK_TOL};

/// Residual bound for reporting an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;
/// Residual bound accepted by the dimension estimators.
pub const WITNESS_TOL: f64 = 1e-8;
pub const DEFAULT_ETA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub point: Vec<f64>,
    pub residual: f64,
    /// Spectrum of the Jacobian of the equilibrium equation (`J − I` for a discrete map).
    pub spectrum: SpectrumReport,
    pub attractor_dim: usize,
    pub stability: Stability,
    pub marginal_count: usize,
    /// Newton needed a pseudo-inverse step on the way here.
    pub pinv_step: bool,
    pub kink_hit: bool,
}

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Singular values below `pinv_rel_tol · s_max` are dropped from the step.
    pub pinv_rel_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: EQUILIBRIUM_TOL,
            max_iter: 100,
            max_halvings: 30,
            pinv_rel_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub newton: NewtonOptions,
    pub rank_tol: f64,
    pub eta: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            newton: NewtonOptions::default(),
            rank_tol: DEFAULT_RANK_TOL,
            eta: DEFAULT_ETA,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub point: DVector<f64>,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub pinv_step: bool,
}

/// Damped Newton on the equilibrium equation with step halving.
pub fn newton_solve(sys: &DynamicalSystem, x0: &DVector<f64>, opts: &NewtonOptions) -> Result<NewtonOutcome> {
    let mut x = x0.clone();
    let mut f = sys.residual_field(&x)?;
    let mut norm = f.norm();
    let mut pinv_step = false;
    for iter in 0..opts.max_iter {
        if norm <= opts.tol {
            return Ok(NewtonOutcome {
                point: x,
                residual: norm,
                converged: true,
                iterations: iter,
                pinv_step,
            });
        }
        let jac = sys.residual_jacobian(&x)?.matrix;
        let (step, truncated) = pinv_solve(&jac, &(-&f), opts.pinv_rel_tol)?;
        pinv_step |= truncated;

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = &x + &step * alpha;
            let ft = sys.residual_field(&trial)?;
            let nt = ft.norm();
            if nt.is_finite() && nt < norm {
                accepted = Some((trial, ft, nt));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((xn, fnew, nn)) => {
                x = xn;
                f = fnew;
                norm = nn;
            }
            None => break,
        }
    }
    Ok(NewtonOutcome {
        converged: norm <= opts.tol,
        residual: norm,
        point: x,
        iterations: opts.max_iter,
        pinv_step,
    })
}

/// Minimum-norm least-squares solution of `J·dx = rhs`. The flag reports
/// whether any singular direction had to be dropped.
fn pinv_solve(jac: &DMatrix<f64>, rhs: &DVector<f64>, rel_tol: f64) -> Result<(DVector<f64>, bool)> {
    let f = spectral::svd_factors(jac)?;
    let s_max = f.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = rel_tol * s_max;
    let mut truncated = f.singular_values.len() < jac.ncols();
    let ut_rhs = f.u.transpose() * rhs;
    let mut coeff = DVector::zeros(f.singular_values.len());
    for (i, &s) in f.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            coeff[i] = ut_rhs[i] / s;
        } else {
            truncated = true;
        }
    }
    Ok((f.v_t.transpose() * coeff, truncated))
}

/// Linearized stability from eigenvalues of the residual Jacobian.
pub fn classify_stability(residual_eigs: &[num_complex::Complex64], form: Form, eta: f64) -> (Stability, usize) {
    let margins = residual_eigs.iter().map(|z| match form {
        // map eigenvalue is z + 1
        Form::DiscreteMap => (z + 1.0).norm() - 1.0,
        _ => z.re,
    });
    let mut any_unstable = false;
    let mut marginal = 0;
    for m in margins {
        if m > eta {
            any_unstable = true;
        } else if m >= -eta {
            marginal += 1;
        }
    }
    let class = if any_unstable {
        Stability::Unstable
    } else if marginal > 0 {
        Stability::Marginal
    } else {
        Stability::Stable
    };
    (class, marginal)
}

/// Builds the full report for a point already known to be an equilibrium.
pub fn analyze_point(sys: &DynamicalSystem, x: &DVector<f64>, opts: &SearchOptions) -> Result<EquilibriumReport> {
    let residual = sys.residual_field(x)?.norm();
    let jac = sys.residual_jacobian(x)?;
    let spectrum = spectral::full_spectrum(&jac.matrix, opts.rank_tol)?;
    let eigs = spectrum.eigenvalues.as_deref().unwrap_or_default();
    let (stability, marginal_count) = classify_stability(eigs, sys.form(), opts.eta);
    Ok(EquilibriumReport {
        point: x.iter().copied().collect(),
        residual,
        attractor_dim: sys.n() - spectrum.numerical_rank,
        spectrum,
        stability,
        marginal_count,
        pinv_step: false,
        kink_hit: jac.kink_hit,
    })
}

pub fn find_equilibria(
    sys: &DynamicalSystem,
    sample_box: &SampleBox,
    n_starts: usize,
    seed: u64,
    opts: &SearchOptions,
) -> Result<Vec<EquilibriumReport>> {
    if n_starts == 0 {
        return Err(Error::invalid("need at least one start"));
    }
    if sample_box.dim() != sys.n() {
        return Err(Error::DimensionMismatch {
            context: "sampling box",
            expected: sys.n(),
            found: sample_box.dim(),
        });
    }
    let starts = sample_box.halton(n_starts, seed);
    find_equilibria_from(sys, &starts, opts)
}

/// Multi-start refinement from explicit starting points. The result does not
/// depend on the order of `starts`.
pub fn find_equilibria_from(
    sys: &DynamicalSystem,
    starts: &[DVector<f64>],
    opts: &SearchOptions,
) -> Result<Vec<EquilibriumReport>> {
    let outcomes: Vec<NewtonOutcome> = starts
        .par_iter()
        .map(|x0| newton_solve(sys, x0, &opts.newton))
        .collect::<Result<_>>()?;

    let mut converged: Vec<(DVector<f64>, bool)> = outcomes
        .into_iter()
        .filter(|o| o.converged && o.point.iter().all(|v| v.is_finite()))
        .map(|o| (o.point, o.pinv_step))
        .collect();
    converged.sort_by(|a, b| lexicographic(&a.0, &b.0).then(a.1.cmp(&b.1)));

    let mut kept: Vec<(DVector<f64>, bool)> = Vec::new();
    for (p, flag) in converged {
        let dup = kept
            .iter_mut()
            .find(|(q, _)| (&p - q).norm() < 1e-6 * (1.0 + q.norm()));
        match dup {
            Some(entry) => entry.1 |= flag,
            None => kept.push((p, flag)),
        }
    }

    kept.par_iter()
        .map(|(p, flag)| {
            let mut report = analyze_point(sys, p, opts)?;
            report.pinv_step = *flag;
            Ok(report)
        })
        .collect()
}

fn lexicographic(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// `n − rank J(x*)` at an equilibrium.
pub fn attractor_dimension(sys: &DynamicalSystem, x_star: &DVector<f64>, rel_tol: f64) -> Result<usize> {
    let residual = sys.residual_field(x_star)?.norm();
    if !(residual <= WITNESS_TOL) {
        return Err(Error::NotEquilibrium { residual });
    }
    Ok(sys.n() - jacobian_rank(sys, x_star, rel_tol)?)
}

fn jacobian_rank(sys: &DynamicalSystem, x: &DVector<f64>, rel_tol: f64) -> Result<usize> {
    let jac = sys.residual_jacobian(x)?.matrix;
    spectral::numerical_rank(&spectral::singular_values(&jac)?, rel_tol)
}

/// Distribution of Jacobian ranks over quasi-random samples of a box.
#[derive(Debug, Clone, Serialize)]
pub struct RankSurvey {
    pub samples: usize,
    pub min_rank: usize,
    pub max_rank: usize,
    /// `histogram[r]` = number of samples with rank `r`.
    pub histogram: Vec<usize>,
}

pub fn survey_rank(
    sys: &DynamicalSystem,
    sample_box: &SampleBox,
    n_samples: usize,
    seed: u64,
    rel_tol: f64,
) -> Result<RankSurvey> {
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let ranks: Vec<usize> = sample_box
        .halton(n_samples, seed)
        .par_iter()
        .map(|x| jacobian_rank(sys, x, rel_tol))
        .collect::<Result<_>>()?;
    let mut histogram = vec![0; sys.n() + 1];
    for &r in &ranks {
        histogram[r] += 1;
    }
    Ok(RankSurvey {
        samples: n_samples,
        min_rank: *ranks.iter().min().unwrap_or(&0),
        max_rank: *ranks.iter().max().unwrap_or(&0),
        histogram,
    })
}

/// A declared linear relation `Σ cᵢ fᵢ ≡ 0` among the component functions of
/// the field, with `k` the size of a maximal independent subset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalDependence {
    coefficients: Vec<f64>,
    independent_count: usize,
}

impl FunctionalDependence {
    pub fn new(coefficients: Vec<f64>, independent_count: usize) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("dependence coefficients"));
        }
        if coefficients.iter().all(|&c| c == 0.0) {
            return Err(Error::invalid("dependence needs a nonzero coefficient"));
        }
        if independent_count >= coefficients.len() {
            return Err(Error::invalid(format!(
                "independent count {independent_count} must be below n = {}",
                coefficients.len()
            )));
        }
        Ok(Self {
            coefficients,
            independent_count,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn independent_count(&self) -> usize {
        self.independent_count
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DependenceVerdict {
    Holds { samples: usize, worst_ratio: f64 },
    Violated { sample: DVector<f64>, magnitude: f64 },
}

impl DependenceVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, DependenceVerdict::Holds { .. })
    }
}

/// Where and how densely a declared dependence is checked.
#[derive(Debug, Clone)]
pub struct DependenceCheck {
    pub sample_box: Option<SampleBox>,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for DependenceCheck {
    fn default() -> Self {
        Self {
            sample_box: None,
            n_samples: 256,
            seed: 0,
        }
    }
}

pub const DEFAULT_DEPENDENCE_BOX: (f64, f64) = (-2.0, 2.0);

pub fn verify_dependence(
    sys: &DynamicalSystem,
    dep: &FunctionalDependence,
    n_samples: usize,
    seed: u64,
) -> Result<DependenceVerdict> {
    let cube = SampleBox::cube(sys.n(), DEFAULT_DEPENDENCE_BOX.0, DEFAULT_DEPENDENCE_BOX.1)?;
    verify_dependence_in(sys, dep, &cube, n_samples, seed)
}

/// Monte Carlo check of the relation on a box: holds iff every sample has
/// `|Σ cᵢ fᵢ(x)| ≤ 1e-8·(1 + maxᵢ |fᵢ(x)|)`.
pub fn verify_dependence_in(
    sys: &DynamicalSystem,
    dep: &FunctionalDependence,
    sample_box: &SampleBox,
    n_samples: usize,
    seed: u64,
) -> Result<DependenceVerdict> {
    if dep.coefficients.len() != sys.n() {
        return Err(Error::DimensionMismatch {
            context: "dependence coefficients",
            expected: sys.n(),
            found: dep.coefficients.len(),
        });
    }
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let c = DVector::from_column_slice(&dep.coefficients);
    let mut worst_ratio: f64 = 0.0;
    for x in sample_box.halton(n_samples, seed) {
        let f = sys.residual_field(&x)?;
        let magnitude = c.dot(&f).abs();
        let bound = 1e-8 * (1.0 + f.amax());
        if !(magnitude <= bound) {
            return Ok(DependenceVerdict::Violated { sample: x, magnitude });
        }
        worst_ratio = worst_ratio.max(magnitude / bound);
    }
    Ok(DependenceVerdict::Holds {
        samples: n_samples,
        worst_ratio,
    })
}

/// `dim X = n − k`, cross-checked against the Jacobian rank at the witness.
pub fn dimension_from_dependence(
    sys: &DynamicalSystem,
    dep: &FunctionalDependence,
    x_witness: &DVector<f64>,
    check: &DependenceCheck,
    rel_tol: f64,
) -> Result<usize> {
    let verdict = match &check.sample_box {
        Some(b) => verify_dependence_in(sys, dep, b, check.n_samples, check.seed)?,
        None => verify_dependence(sys, dep, check.n_samples, check.seed)?,
    };
    if let DependenceVerdict::Violated { magnitude, .. } = verdict {
        return Err(Error::DependenceViolated { magnitude });
    }
    let residual = sys.residual_field(x_witness)?.norm();
    if !(residual <= WITNESS_TOL) {
        return Err(Error::NotEquilibrium { residual });
    }
    let rank = jacobian_rank(sys, x_witness, rel_tol)?;
    if rank != dep.independent_count {
        return Err(Error::InconsistentWitness {
            rank,
            expected: dep.independent_count,
        });
    }
    let estimate = sys.n() - dep.independent_count;
    let direct = attractor_dimension(sys, x_witness, rel_tol)?;
    if direct != estimate {
        return Err(Error::InconsistentWitness {
            rank: sys.n() - direct,
            expected: dep.independent_count,
        });
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::Activation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_tanh() -> DynamicalSystem {
        DynamicalSystem::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.5),
            DVector::zeros(1),
            Activation::Tanh,
            Form::PreActivation,
        )
        .unwrap()
    }

    /// tanh(x) = x/2 on [1, 3] by bisection.
    fn bisection_root() -> f64 {
        let g = |x: f64| x.tanh() - 0.5 * x;
        let (mut lo, mut hi) = (1.0, 3.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(lo) * g(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn tanh_scalar_has_three_equilibria() {
        let sys = scalar_tanh();
        let b = SampleBox::cube(1, -3.0, 3.0).unwrap();
        let eqs = find_equilibria(&sys, &b, 16, 1, &SearchOptions::default()).unwrap();
        let root = bisection_root();
        assert!((root - 1.915).abs() < 1e-3);
        let pts: Vec<f64> = eqs.iter().map(|e| e.point[0]).collect();
        assert_eq!(pts.len(), 3, "{pts:?}");
        for (p, want) in pts.iter().zip([-root, 0.0, root]) {
            assert!((p - want).abs() < 1e-6);
        }
        for e in &eqs {
            assert!(e.residual <= EQUILIBRIUM_TOL);
            assert_eq!(e.attractor_dim, 0);
        }
        // Origin: J = 1 − 0.5 > 0, the outer pair: 1 − tanh² − 0.5 < 0.
        assert_eq!(eqs[1].stability, Stability::Unstable);
        assert_eq!(eqs[0].stability, Stability::Stable);
        assert_eq!(eqs[2].stability, Stability::Stable);
    }

    #[test]
    fn linear_nonsingular_system_has_unique_equilibrium() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 4;
        let w = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let sys = DynamicalSystem::new(
            w,
            DMatrix::identity(n, n) * 2.5,
            DVector::zeros(n),
            Activation::Identity,
            Form::PreActivation,
        )
        .unwrap();
        let b = SampleBox::cube(n, -5.0, 5.0).unwrap();
        let eqs = find_equilibria(&sys, &b, 8, 3, &SearchOptions::default()).unwrap();
        assert_eq!(eqs.len(), 1);
        assert!(eqs[0].point.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn degenerate_linear_field_has_full_dimension() {
        let i3 = DMatrix::identity(3, 3);
        let sys = DynamicalSystem::new(
            i3.clone(),
            i3,
            DVector::zeros(3),
            Activation::Identity,
            Form::PreActivation,
        )
        .unwrap();
        let x = DVector::from_vec(vec![0.3, -2.0, 7.0]);
        assert_eq!(attractor_dimension(&sys, &x, DEFAULT_RANK_TOL).unwrap(), 3);
    }

    #[test]
    fn non_equilibrium_is_rejected() {
        let sys = scalar_tanh();
        let err = attractor_dimension(&sys, &DVector::from_element(1, 1.0), 1e-8).unwrap_err();
        assert!(matches!(err, Error::NotEquilibrium { residual } if residual > 0.2));
    }

    #[test]
    fn dedup_ignores_start_order() {
        let sys = scalar_tanh();
        let b = SampleBox::cube(1, -3.0, 3.0).unwrap();
        let mut starts = b.halton(40, 9);
        let a = find_equilibria_from(&sys, &starts, &SearchOptions::default()).unwrap();
        starts.reverse();
        starts.rotate_left(13);
        let c = find_equilibria_from(&sys, &starts, &SearchOptions::default()).unwrap();
        let pa: Vec<_> = a.iter().map(|e| e.point.clone()).collect();
        let pc: Vec<_> = c.iter().map(|e| e.point.clone()).collect();
        assert_eq!(pa, pc);
    }

    #[test]
    fn singular_jacobian_switches_to_pseudo_inverse() {
        // ẋ = (W − I)x with a rank-one W − I: a line of equilibria.
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]);
        let sys = DynamicalSystem::new(
            w,
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            Activation::Identity,
            Form::PreActivation,
        )
        .unwrap();
        let out = newton_solve(&sys, &DVector::from_vec(vec![1.0, 1.0]), &NewtonOptions::default()).unwrap();
        assert!(out.converged && out.pinv_step);
        assert!((out.point[0] - 1.0).abs() < 1e-12 && out.point[1].abs() < 1e-12);
    }

    #[test]
    fn stability_bands() {
        use num_complex::Complex64 as C;
        let s = |v: &[f64]| v.iter().map(|&r| C::new(r, 0.0)).collect::<Vec<_>>();
        assert_eq!(classify_stability(&s(&[-1.0, -0.5]), Form::PreActivation, 1e-6), (Stability::Stable, 0));
        assert_eq!(classify_stability(&s(&[1e-9, -0.5]), Form::PreActivation, 1e-6), (Stability::Marginal, 1));
        assert_eq!(classify_stability(&s(&[1e-3, -0.5]), Form::PreActivation, 1e-6).0, Stability::Unstable);
        // Residual eigenvalue −0.5 means map eigenvalue 0.5.
        assert_eq!(classify_stability(&s(&[-0.5]), Form::DiscreteMap, 1e-6).0, Stability::Stable);
        assert_eq!(classify_stability(&s(&[-2.0 + 1e-9]), Form::DiscreteMap, 1e-6).0, Stability::Marginal);
    }

    fn replicated_rows() -> DynamicalSystem {
        let w = DMatrix::from_row_slice(3, 3, &[0.2, 0.5, -0.3, 0.1, -0.4, 0.6, 0.3, 0.1, 0.3]);
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, -0.1, 0.8, 0.3, 0.9, 1.0, 0.3]);
        let b = DVector::from_vec(vec![0.1, -0.2, -0.1]);
        DynamicalSystem::new(w, a, b, Activation::Identity, Form::PreActivation).unwrap()
    }

    #[test]
    fn dependence_verdicts() {
        let sys = replicated_rows();
        let good = FunctionalDependence::new(vec![1.0, 1.0, -1.0], 2).unwrap();
        assert!(verify_dependence(&sys, &good, 64, 1).unwrap().holds());
        let bad = FunctionalDependence::new(vec![1.0, 0.0, -1.0], 2).unwrap();
        assert!(matches!(
            verify_dependence(&sys, &bad, 64, 1).unwrap(),
            DependenceVerdict::Violated { magnitude, .. } if magnitude > 1e-6
        ));
        assert!(FunctionalDependence::new(vec![0.0], 0).is_err());
        assert!(FunctionalDependence::new(vec![1.0, 2.0], 2).is_err());
    }

    #[test]
    fn dependence_estimate_on_replicated_rows() {
        let sys = replicated_rows();
        let dep = FunctionalDependence::new(vec![1.0, 1.0, -1.0], 2).unwrap();
        // Elimination oracle: the first two rows of (W − A)x = −b with x₃ = 0.
        let m = sys.w() - sys.a();
        let (a11, a12, a21, a22) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let (r1, r2) = (-sys.b()[0], -sys.b()[1]);
        let det = a11 * a22 - a12 * a21;
        let x = DVector::from_vec(vec![(r1 * a22 - a12 * r2) / det, (a11 * r2 - r1 * a21) / det, 0.0]);
        let dim = dimension_from_dependence(&sys, &dep, &x, &DependenceCheck::default(), 1e-8).unwrap();
        assert_eq!(dim, 1);
        assert_eq!(attractor_dimension(&sys, &x, 1e-8).unwrap(), 1);

        let wrong_k = FunctionalDependence::new(vec![1.0, 1.0, -1.0], 1).unwrap();
        assert!(matches!(
            dimension_from_dependence(&sys, &wrong_k, &x, &DependenceCheck::default(), 1e-8),
            Err(Error::InconsistentWitness { rank: 2, expected: 1 })
        ));
    }

    #[test]
    fn rank_survey_on_linear_field() {
        let sys = replicated_rows();
        let b = SampleBox::cube(3, -1.0, 1.0).unwrap();
        let s = survey_rank(&sys, &b, 20, 0, 1e-8).unwrap();
        assert_eq!((s.min_rank, s.max_rank), (2, 2));
        assert_eq!(s.histogram[2], 20);
    }

    #[test]
    fn rotation_invariance_of_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let n = rng.random_range(2..=8);
            let k = rng.random_range(1..n);
            // W − A of rank k, A = I.
            let left = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
            let right = DMatrix::from_fn(k, n, |_, _| rng.random_range(-1.0..1.0));
            let a = DMatrix::identity(n, n);
            let w = &left * &right + &a;
            let x_star = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let b = -((&w - &a) * &x_star);
            let sys = DynamicalSystem::new(w.clone(), a.clone(), b.clone(), Activation::Identity, Form::PreActivation).unwrap();
            let base = attractor_dimension(&sys, &x_star, 1e-8).unwrap();
            assert_eq!(base, n - k);

            let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let q = g.qr().q();
            let wq = &q * &w * q.transpose();
            let aq = &q * &a * q.transpose();
            let rotated = DynamicalSystem::new(wq, aq, &q * &b, Activation::Identity, Form::PreActivation).unwrap();
            let xq = &q * &x_star;
            assert_eq!(attractor_dimension(&rotated, &xq, 1e-8).unwrap(), base);
        }
    }
}
