//! ReLU networks `ẋ = −x + W·relu(x) + b` with a known continuous attractor.
//!
//! Coordinates split into `P` (the first `p`) and `Z` (the last `z`). With
//! `W_P` symmetric, top eigenvalue exactly 1 of multiplicity `m` and `b_P = 0`,
//! the set
//!
//! ```text
//! C = { (x_P, x_Z) : x_P = Σ cᵢ vᵢ,  x_Z = W_ZP·x_P + b_Z,  x_P ≥ 0,  x_Z < 0 }
//! ```
//!
//! is an `m`-dimensional continuous attractor, where `vᵢ` span the eigenvalue-1
//! eigenspace. On `C` the Jacobian is `[[W_P − I, 0], [W_ZP, −I]]`, which has
//! rank `n − m`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynsys::{rows_of, Activation, DynamicalSystem, Form, SystemFile};
use crate::equilibria::FunctionalDependence;
use crate::error::{Error, Result};
use crate::sampling::{substream, SampleBox};
use crate::spectral::{self, DEFAULT_RANK_TOL};

pub const DEFAULT_C_MAX: f64 = 10.0;
/// Range for the eigenvalues of `W_P` below the top one.
pub const LOWER_EIGENVALUE_RANGE: (f64, f64) = (0.2, 0.8);

const RESIDUAL_TOL: f64 = 1e-12;
const ZERO_EIG_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ConstructedAttractor {
    sys: DynamicalSystem,
    p: usize,
    z: usize,
    basis: Vec<DVector<f64>>,
    w_p: DMatrix<f64>,
    w_zp: DMatrix<f64>,
    b_z: DVector<f64>,
    c_max: f64,
}

pub fn construct_relu_attractor(p: usize, z: usize, m: usize, seed: u64) -> Result<ConstructedAttractor> {
    construct_relu_attractor_with(p, z, m, seed, DEFAULT_C_MAX)
}

/// Random instance: each eigenvalue-1 eigenvector is strictly positive on its
/// own block of `P` and zero elsewhere, so the basis is orthonormal and every
/// `c ≥ 0` gives `x_P ≥ 0`.
pub fn construct_relu_attractor_with(
    p: usize,
    z: usize,
    m: usize,
    seed: u64,
    c_max: f64,
) -> Result<ConstructedAttractor> {
    if m == 0 || m > p {
        return Err(Error::invalid(format!("need 1 ≤ m ≤ p, got m = {m}, p = {p}")));
    }
    if z == 0 {
        return Err(Error::invalid("need z ≥ 1"));
    }
    if !(c_max > 0.0 && c_max.is_finite()) {
        return Err(Error::invalid(format!("c_max must be positive, got {c_max}")));
    }
    let mut rng = substream(seed, "construction");
    let n = p + z;

    // Partition P into m non-empty blocks.
    let mut idx: Vec<usize> = (0..p).collect();
    idx.shuffle(&mut rng);
    let mut group = vec![0usize; p];
    for (k, &i) in idx.iter().enumerate() {
        group[i] = if k < m { k } else { rng.random_range(0..m) };
    }
    let basis: Vec<DVector<f64>> = (0..m)
        .map(|g| {
            let v = DVector::from_fn(p, |i, _| {
                if group[i] == g {
                    rng.random_range(0.5..1.5)
                } else {
                    0.0
                }
            });
            v.normalize()
        })
        .collect();

    let v = DMatrix::from_columns(&basis);
    let w_p = if m == p {
        DMatrix::identity(p, p)
    } else {
        let filler = DMatrix::from_fn(p, p - m, |_, _| rng.random_range(-1.0..1.0));
        let mut stacked = DMatrix::zeros(p, p);
        stacked.columns_mut(0, m).copy_from(&v);
        stacked.columns_mut(m, p - m).copy_from(&filler);
        let q = stacked.qr().q();
        let mut w_p = &v * v.transpose();
        for j in m..p {
            let mu = rng.random_range(LOWER_EIGENVALUE_RANGE.0..LOWER_EIGENVALUE_RANGE.1);
            let qj = q.column(j);
            w_p += qj * qj.transpose() * mu;
        }
        (&w_p + w_p.transpose()) * 0.5
    };

    let w_zp = DMatrix::from_fn(z, p, |_, _| rng.random_range(-1.0..1.0));
    // Most positive x_Z over c ∈ [0, c_max]^m, pushed below zero with a margin.
    let b_z = DVector::from_fn(z, |k, _| {
        let worst: f64 = basis
            .iter()
            .map(|vi| c_max * (w_zp.row(k) * vi)[0].max(0.0))
            .sum();
        -worst - rng.random_range(0.5..1.5)
    });
    let off_scale = 0.5 / (n as f64).sqrt();
    let w_pz = DMatrix::from_fn(p, z, |_, _| rng.random_range(-off_scale..off_scale));
    let w_z = DMatrix::from_fn(z, z, |_, _| rng.random_range(-off_scale..off_scale));

    ConstructedAttractor::from_parts(w_p, w_pz, w_zp, w_z, b_z, basis, c_max)
}

impl ConstructedAttractor {
    /// Assemble and validate an instance from its blocks.
    pub fn from_parts(
        w_p: DMatrix<f64>,
        w_pz: DMatrix<f64>,
        w_zp: DMatrix<f64>,
        w_z: DMatrix<f64>,
        b_z: DVector<f64>,
        basis: Vec<DVector<f64>>,
        c_max: f64,
    ) -> Result<Self> {
        let p = w_p.nrows();
        let z = w_z.nrows();
        let m = basis.len();
        let n = p + z;
        if m == 0 {
            return Err(Error::invalid("attractor dimension m must be at least 1"));
        }
        if !w_p.is_square() || !w_z.is_square() || w_pz.shape() != (p, z) || w_zp.shape() != (z, p) || b_z.len() != z {
            return Err(Error::invalid("inconsistent block shapes"));
        }
        if basis.iter().any(|v| v.len() != p) {
            return Err(Error::invalid("basis vectors must have length p"));
        }
        if (&w_p - w_p.transpose()).amax() > 1e-12 {
            return Err(Error::ConstructionFailed("W_P is not symmetric".into()));
        }
        let v = DMatrix::from_columns(&basis);
        if (v.transpose() * &v - DMatrix::identity(m, m)).amax() > 1e-10 {
            return Err(Error::ConstructionFailed("basis is not orthonormal".into()));
        }
        if (&w_p * &v - &v).amax() > 1e-10 {
            return Err(Error::ConstructionFailed("basis vectors are not eigenvalue-1 eigenvectors of W_P".into()));
        }
        let eig = spectral::eig_spectrum(&w_p)?;
        let top = eig.iter().filter(|z| (z.re - 1.0).abs() <= 1e-10).count();
        if top != m || eig.iter().any(|z| z.re > 1.0 + 1e-10) {
            return Err(Error::ConstructionFailed(format!(
                "eigenvalue 1 of W_P has multiplicity {top}, expected {m} as the top eigenvalue"
            )));
        }
        if basis.iter().any(|vi| vi.iter().any(|&e| e < 0.0)) {
            return Err(Error::ConstructionFailed("basis has negative entries; x_P ≥ 0 not guaranteed on the coefficient box".into()));
        }
        for k in 0..z {
            let worst: f64 = b_z[k]
                + basis
                    .iter()
                    .map(|vi| c_max * (w_zp.row(k) * vi)[0].max(0.0))
                    .sum::<f64>();
            if worst >= 0.0 {
                return Err(Error::ConstructionFailed(format!(
                    "x_Z[{k}] reaches {worst} ≥ 0 on the coefficient box [0, {c_max}]^{m}"
                )));
            }
        }

        let mut w = DMatrix::zeros(n, n);
        w.view_mut((0, 0), (p, p)).copy_from(&w_p);
        w.view_mut((0, p), (p, z)).copy_from(&w_pz);
        w.view_mut((p, 0), (z, p)).copy_from(&w_zp);
        w.view_mut((p, p), (z, z)).copy_from(&w_z);
        let mut b = DVector::zeros(n);
        b.rows_mut(p, z).copy_from(&b_z);
        let sys = DynamicalSystem::new(w, DMatrix::identity(n, n), b, Activation::Relu, Form::PostActivation)?;
        Ok(Self {
            sys,
            p,
            z,
            basis,
            w_p,
            w_zp,
            b_z,
            c_max,
        })
    }

    pub fn system(&self) -> &DynamicalSystem {
        &self.sys
    }

    pub fn n(&self) -> usize {
        self.p + self.z
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn z(&self) -> usize {
        self.z
    }

    pub fn m(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[DVector<f64>] {
        &self.basis
    }

    pub fn w_p(&self) -> &DMatrix<f64> {
        &self.w_p
    }

    pub fn w_zp(&self) -> &DMatrix<f64> {
        &self.w_zp
    }

    pub fn b_z(&self) -> &DVector<f64> {
        &self.b_z
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    /// Point of `C` with coefficients `c`.
    pub fn point_at(&self, c: &[f64]) -> Result<DVector<f64>> {
        if c.len() != self.m() {
            return Err(Error::DimensionMismatch {
                context: "attractor coefficients",
                expected: self.m(),
                found: c.len(),
            });
        }
        let x_p = self
            .basis
            .iter()
            .zip(c)
            .fold(DVector::zeros(self.p), |acc, (v, &ci)| acc + v * ci);
        let x_z = &self.w_zp * &x_p + &self.b_z;
        let mut x = DVector::zeros(self.n());
        x.rows_mut(0, self.p).copy_from(&x_p);
        x.rows_mut(self.p, self.z).copy_from(&x_z);
        Ok(x)
    }

    fn sample_coefficients(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        // (0, c_max]: keeps x_P strictly off the ReLU kink
        (0..self.m())
            .map(|_| self.c_max * (1.0 - rng.random::<f64>()))
            .collect()
    }

    /// Uniform samples of the coefficient box mapped onto `C`.
    pub fn sample_attractor_points(&self, count: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
        if count == 0 {
            return Err(Error::invalid("count must be at least 1"));
        }
        let mut rng = substream(seed, "sampling");
        (0..count)
            .map(|_| {
                let c = self.sample_coefficients(&mut rng);
                let x = self.point_at(&c)?;
                let residual = self.sys.eval_field(&x)?.norm();
                if residual > RESIDUAL_TOL {
                    return Err(Error::ConstructionFailed(format!(
                        "sampled point has residual {residual:e}"
                    )));
                }
                Ok(x)
            })
            .collect()
    }

    /// Box around `count` sampled attractor points, widened without letting a
    /// coordinate change sign, so multistart searches begin in the piece holding `C`.
    pub fn search_box(&self, count: usize, seed: u64) -> Result<SampleBox> {
        let pts = self.sample_attractor_points(count, seed)?;
        let mut lo = vec![f64::INFINITY; self.n()];
        let mut hi = vec![f64::NEG_INFINITY; self.n()];
        for p in &pts {
            for (i, &v) in p.iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        for (l, h) in lo.iter_mut().zip(hi.iter_mut()) {
            if *l > 0.0 {
                *l *= 0.5;
                *h += 0.5;
            } else if *h < 0.0 {
                *l -= 0.5;
                *h *= 0.5;
            } else {
                *l -= 0.5;
                *h += 0.5;
            }
        }
        SampleBox::new(lo, hi)
    }

    /// Jacobian of the affine piece containing `C` (`P` active, `Z` inactive):
    /// `[[W_P − I, 0], [W_ZP, −I]]`.
    pub fn region_jacobian(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut j = -DMatrix::identity(n, n);
        let w = self.sys.w();
        for r in 0..n {
            for c in 0..self.p {
                j[(r, c)] += w[(r, c)];
            }
        }
        j
    }

    /// Eigenvalues of `W_P` minus one, then `−1` repeated `z` times.
    pub fn predicted_jacobian_spectrum(&self) -> Result<Vec<f64>> {
        let mut eigs: Vec<f64> = spectral::eig_spectrum(&self.w_p)?
            .iter()
            .map(|z| z.re - 1.0)
            .collect();
        eigs.extend(std::iter::repeat_n(-1.0, self.z));
        eigs.sort_by(|a, b| b.total_cmp(a));
        Ok(eigs)
    }

    /// Distance from `x` to the cone `C` (coefficients `c ≥ 0`, not clipped at `c_max`).
    pub fn distance_to_set(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "state vector",
                expected: self.n(),
                found: x.len(),
            });
        }
        // min ‖G c − t‖ over c ≥ 0 with G = [V; W_ZP V], t = [x_P; x_Z − b_Z].
        let v = DMatrix::from_columns(&self.basis);
        let mut g = DMatrix::zeros(self.n(), self.m());
        g.rows_mut(0, self.p).copy_from(&v);
        g.rows_mut(self.p, self.z).copy_from(&(&self.w_zp * &v));
        let mut t = x.clone();
        let tz = x.rows(self.p, self.z) - &self.b_z;
        t.rows_mut(self.p, self.z).copy_from(&tz);
        Ok(nonnegative_least_squares_residual(&g, &t))
    }

    /// Relations `Σ (vᵢ)_j f_j ≡ 0` over the sign region `x_P ≥ 0, x_Z ≤ 0`,
    /// one per basis vector, each with `n − m` independent components.
    pub fn dependences(&self) -> Result<Vec<FunctionalDependence>> {
        self.basis
            .iter()
            .map(|v| {
                let mut c = vec![0.0; self.n()];
                c[..self.p].copy_from_slice(v.as_slice());
                FunctionalDependence::new(c, self.n() - self.m())
            })
            .collect()
    }

    /// Box inside the sign region where the dependences hold.
    pub fn sign_region_box(&self) -> Result<SampleBox> {
        let extent = 2.0 * self.c_max;
        let mut lo = vec![0.0; self.n()];
        let mut hi = vec![extent; self.n()];
        for k in self.p..self.n() {
            lo[k] = -extent;
            hi[k] = 0.0;
        }
        SampleBox::new(lo, hi)
    }

    pub fn to_file(&self) -> ConstructedFile {
        ConstructedFile {
            system: self.sys.to_file(),
            ground_truth: GroundTruth {
                p: self.p,
                z: self.z,
                m: self.m(),
                basis: self.basis.iter().map(|v| v.iter().copied().collect()).collect(),
                w_zp: rows_of(&self.w_zp),
                b_z: self.b_z.iter().copied().collect(),
                c_max: self.c_max,
            },
        }
    }

    pub fn verify(&self, n_samples: usize, seed: u64) -> Result<VerificationReport> {
        verify_construction(self, n_samples, seed)
    }
}

/// Exhaustive active-set NNLS; fine for the small `m` used here.
fn nonnegative_least_squares_residual(g: &DMatrix<f64>, t: &DVector<f64>) -> f64 {
    let m = g.ncols();
    let mut best = t.norm();
    for mask in 1u32..(1u32 << m.min(16)) {
        let cols: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
        let sub = DMatrix::from_fn(g.nrows(), cols.len(), |r, c| g[(r, cols[c])]);
        let Ok(svd) = sub.clone().svd(true, true).solve(t, 1e-14) else {
            continue;
        };
        if svd.iter().all(|&c| c >= 0.0) {
            best = best.min((&sub * &svd - t).norm());
        }
    }
    best
}

/// JSON layout: the plain system definition plus the known attractor.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct ConstructedFile {
    #[serde(flatten)]
    pub system: SystemFile,
    pub ground_truth: GroundTruth,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct GroundTruth {
    pub p: usize,
    pub z: usize,
    pub m: usize,
    pub basis: Vec<Vec<f64>>,
    #[serde(rename = "W_ZP")]
    pub w_zp: Vec<Vec<f64>>,
    pub b_z: Vec<f64>,
    pub c_max: f64,
}

impl ConstructedFile {
    pub fn into_attractor(self) -> Result<ConstructedAttractor> {
        let gt = self.ground_truth;
        let sys = self.system.into_system()?;
        let n = sys.n();
        if gt.p + gt.z != n {
            return Err(Error::invalid("ground truth partition does not match n"));
        }
        let w = sys.w();
        let (p, z) = (gt.p, gt.z);
        let attractor = ConstructedAttractor::from_parts(
            w.view((0, 0), (p, p)).into_owned(),
            w.view((0, p), (p, z)).into_owned(),
            w.view((p, 0), (z, p)).into_owned(),
            w.view((p, p), (z, z)).into_owned(),
            sys.b().rows(p, z).into_owned(),
            gt.basis.into_iter().map(DVector::from_vec).collect(),
            gt.c_max,
        )?;
        if attractor.m() != gt.m || attractor.sys.b().rows(0, p).amax() != 0.0 {
            return Err(Error::invalid("ground truth block is inconsistent with the system"));
        }
        Ok(attractor)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleCheck {
    pub coefficients: Vec<f64>,
    pub residual: f64,
    pub rank: usize,
    pub near_zero_eigenvalues: usize,
    /// Largest real part among the remaining eigenvalues.
    pub max_other_real_part: f64,
    /// The point sat on a ReLU kink and the Jacobian of the attractor's affine piece was used.
    pub kink_resolved: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckFailure {
    pub sample: usize,
    pub check: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub n: usize,
    pub m: usize,
    pub expected_rank: usize,
    pub samples: Vec<SampleCheck>,
    pub failures: Vec<CheckFailure>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn check_point(ca: &ConstructedAttractor, c: Vec<f64>) -> Result<SampleCheck> {
    let x = ca.point_at(&c)?;
    let residual = ca.sys.eval_field(&x)?.norm();
    let jac = ca.sys.jacobian_analytic(&x)?;
    let (matrix, kink_resolved) = if jac.kink_hit {
        (ca.region_jacobian(), true)
    } else {
        (jac.matrix, false)
    };
    let rank = spectral::numerical_rank(&spectral::singular_values(&matrix)?, DEFAULT_RANK_TOL)?;
    let eigs = spectral::eig_spectrum(&matrix)?;
    let near_zero_eigenvalues = eigs.iter().filter(|z| z.norm() <= ZERO_EIG_TOL).count();
    let max_other_real_part = eigs
        .iter()
        .filter(|z| z.norm() > ZERO_EIG_TOL)
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SampleCheck {
        coefficients: c,
        residual,
        rank,
        near_zero_eigenvalues,
        max_other_real_part,
        kink_resolved,
    })
}

pub fn verify_construction(ca: &ConstructedAttractor, n_samples: usize, seed: u64) -> Result<VerificationReport> {
    let mut rng = substream(seed, "verification");
    let coeffs: Vec<Vec<f64>> = (0..n_samples).map(|_| ca.sample_coefficients(&mut rng)).collect();
    verify_at(ca, coeffs)
}

/// Same checks at explicit coefficient vectors.
pub fn verify_at(ca: &ConstructedAttractor, coeffs: Vec<Vec<f64>>) -> Result<VerificationReport> {
    let expected_rank = ca.n() - ca.m();
    let mut samples = Vec::with_capacity(coeffs.len());
    let mut failures = Vec::new();
    for (i, c) in coeffs.into_iter().enumerate() {
        let s = check_point(ca, c)?;
        if !(s.residual <= RESIDUAL_TOL) {
            failures.push(CheckFailure {
                sample: i,
                check: "residual",
                detail: format!("{:e} > {RESIDUAL_TOL:e}", s.residual),
            });
        }
        if s.rank != expected_rank {
            failures.push(CheckFailure {
                sample: i,
                check: "rank",
                detail: format!("{} != n - m = {expected_rank}", s.rank),
            });
        }
        if s.near_zero_eigenvalues != ca.m() {
            failures.push(CheckFailure {
                sample: i,
                check: "zero eigenvalues",
                detail: format!("{} within {ZERO_EIG_TOL:e} of 0, expected {}", s.near_zero_eigenvalues, ca.m()),
            });
        }
        if !(s.max_other_real_part < 0.0) {
            failures.push(CheckFailure {
                sample: i,
                check: "negative real parts",
                detail: format!("max real part {}", s.max_other_real_part),
            });
        }
        samples.push(s);
    }
    Ok(VerificationReport {
        n: ca.n(),
        m: ca.m(),
        expected_rank,
        samples,
        failures,
    })
}

/// Identity-activation system whose rows `k..n` are fixed combinations of the
/// first `k` rows (in `W`, `A` and `b` alike), so the component functions obey
/// `n − k` linear relations.
#[derive(Debug, Clone)]
pub struct DependentRows {
    pub sys: DynamicalSystem,
    pub dependences: Vec<FunctionalDependence>,
    /// An equilibrium (minimum-norm solution of the independent rows).
    pub witness: DVector<f64>,
}

pub fn construct_dependent_rows(n: usize, k: usize, seed: u64) -> Result<DependentRows> {
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("need 1 ≤ k < n, got k = {k}, n = {n}")));
    }
    let mut rng = substream(seed, "dependent-rows");
    let mut w = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut a = DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) + rng.random_range(-0.3..0.3));
    let mut b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let mut dependences = Vec::with_capacity(n - k);
    for j in k..n {
        let alpha: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let combine = |m: &DMatrix<f64>| {
            (0..k).fold(nalgebra::RowDVector::zeros(n), |acc, i| acc + m.row(i) * alpha[i])
        };
        let wr = combine(&w);
        let ar = combine(&a);
        w.row_mut(j).copy_from(&wr);
        a.row_mut(j).copy_from(&ar);
        b[j] = (0..k).map(|i| alpha[i] * b[i]).sum();
        let mut c = vec![0.0; n];
        c[..k].copy_from_slice(&alpha);
        c[j] = -1.0;
        dependences.push(FunctionalDependence::new(c, k)?);
    }
    let sys = DynamicalSystem::new(w, a, b, Activation::Identity, Form::PreActivation)?;
    let top = (sys.w() - sys.a()).rows(0, k).into_owned();
    let rhs = -sys.b().rows(0, k).into_owned();
    let witness = top
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::ConstructionFailed(e.to_string()))?;
    Ok(DependentRows {
        sys,
        dependences,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{
        attractor_dimension, dimension_from_dependence, verify_dependence, verify_dependence_in, DependenceCheck,
    };

    /// W_P = diag(1, 0.5), v = (1, 0), W_ZP = (−0.5, 0), b_Z = −1.
    fn line_example() -> ConstructedAttractor {
        ConstructedAttractor::from_parts(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5])),
            DMatrix::from_column_slice(2, 1, &[0.2, -0.4]),
            DMatrix::from_row_slice(1, 2, &[-0.5, 0.0]),
            DMatrix::from_element(1, 1, 0.3),
            DVector::from_element(1, -1.0),
            vec![DVector::from_vec(vec![1.0, 0.0])],
            DEFAULT_C_MAX,
        )
        .unwrap()
    }

    #[test]
    fn line_example_points_and_spectrum() {
        let ca = line_example();
        for c in [0.0, 1.0, 4.5, 10.0] {
            let x = ca.point_at(&[c]).unwrap();
            assert_eq!(x.as_slice(), &[c, 0.0, -0.5 * c - 1.0]);
            assert_eq!(ca.system().eval_field(&x).unwrap().amax(), 0.0);
        }
        let report = ca.verify(10, 1).unwrap();
        assert!(report.passed(), "{:?}", report.failures);
        assert!(report.samples.iter().all(|s| s.rank == 2 && s.kink_resolved));
        let eigs = spectral::eig_spectrum(&ca.region_jacobian()).unwrap();
        for (got, want) in eigs.iter().zip([0.0, -0.5, -1.0]) {
            assert!((got.re - want).abs() < 1e-12 && got.im.abs() < 1e-12);
        }
        let predicted = ca.predicted_jacobian_spectrum().unwrap();
        for (got, want) in predicted.iter().zip([0.0, -0.5, -1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn minimal_two_dimensional_example() {
        let ca = ConstructedAttractor::from_parts(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 0.0),
            DVector::from_element(1, -1.0),
            vec![DVector::from_element(1, 1.0)],
            DEFAULT_C_MAX,
        )
        .unwrap();
        let report = ca.verify(5, 2).unwrap();
        assert!(report.passed(), "{:?}", report.failures);
        for s in &report.samples {
            assert_eq!((s.rank, s.near_zero_eigenvalues), (1, 1), "{s:?}");
            assert!((s.max_other_real_part + 1.0).abs() < 1e-12, "{s:?}");
        }
    }

    #[test]
    fn full_multiplicity_gives_identity_block() {
        let ca = construct_relu_attractor(3, 1, 3, 4).unwrap();
        assert_eq!(ca.w_p(), &DMatrix::identity(3, 3));
        let x = ca.point_at(&[0.5, 2.0, 1.0]).unwrap();
        assert!(ca.system().eval_field(&x).unwrap().norm() < 1e-12);
    }

    #[test]
    fn invalid_requests_are_rejected() {
        assert!(construct_relu_attractor(3, 1, 0, 0).is_err());
        assert!(construct_relu_attractor(3, 1, 4, 0).is_err());
        assert!(construct_relu_attractor(3, 0, 1, 0).is_err());
        // b_Z not negative enough for the coefficient box.
        let bad = ConstructedAttractor::from_parts(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            DVector::from_element(1, -1.0),
            vec![DVector::from_element(1, 1.0)],
            DEFAULT_C_MAX,
        );
        assert!(matches!(bad, Err(Error::ConstructionFailed(_))));
    }

    #[test]
    fn random_instances_have_expected_structure() {
        for (p, z, m) in [(4, 2, 1), (6, 4, 2), (8, 4, 3), (5, 3, 5)] {
            for seed in 0..3 {
                let ca = construct_relu_attractor(p, z, m, seed).unwrap();
                let report = ca.verify(8, seed).unwrap();
                assert!(report.passed(), "{p},{z},{m} seed {seed}: {:?}", report.failures);
                assert!(report.samples.iter().all(|s| !s.kink_resolved));
                assert_eq!(ca.system().b().rows(0, p).amax(), 0.0);
                // Spectrum law for the block lower-triangular Jacobian.
                let predicted = ca.predicted_jacobian_spectrum().unwrap();
                let x = ca.sample_attractor_points(1, seed).unwrap().remove(0);
                let j = ca.system().jacobian_analytic(&x).unwrap().matrix;
                let mut got: Vec<f64> = spectral::eig_spectrum(&j).unwrap().iter().map(|z| z.re).collect();
                got.sort_by(|a, b| b.total_cmp(a));
                for (g, w) in got.iter().zip(&predicted) {
                    assert!((g - w).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let a = construct_relu_attractor(6, 4, 2, 7).unwrap();
        let b = construct_relu_attractor(6, 4, 2, 7).unwrap();
        assert_eq!(a.system(), b.system());
        let c = construct_relu_attractor(6, 4, 2, 8).unwrap();
        assert_ne!(a.system(), c.system());
    }

    #[test]
    fn plane_example_dimension() {
        let ca = construct_relu_attractor(4, 2, 2, 11).unwrap();
        let x = ca.sample_attractor_points(1, 3).unwrap().remove(0);
        assert_eq!(attractor_dimension(ca.system(), &x, DEFAULT_RANK_TOL).unwrap(), 2);
    }

    #[test]
    fn sampled_points_lie_on_affine_set() {
        let ca = line_example();
        let pts = ca.sample_attractor_points(3, 5).unwrap();
        let d1 = &pts[1] - &pts[0];
        let d2 = &pts[2] - &pts[0];
        assert!(d1.norm() > 0.0 && d2.norm() > 0.0 && (&pts[2] - &pts[1]).norm() > 0.0);
        let cross = d1[0] * d2[2] - d1[2] * d2[0];
        assert!(cross.abs() < 1e-12 && d1[1] == 0.0 && d2[1] == 0.0);

        let plane = construct_relu_attractor(5, 3, 2, 1).unwrap();
        let pts = plane.sample_attractor_points(100, 2).unwrap();
        let mean = pts.iter().fold(DVector::zeros(8), |a, p| a + p) / 100.0;
        let centered = DMatrix::from_fn(100, 8, |i, j| pts[i][j] - mean[j]);
        let s = spectral::singular_values(&centered).unwrap();
        assert_eq!(spectral::numerical_rank(&s, 1e-8).unwrap(), 2);

        let origin = ca.point_at(&[0.0]).unwrap();
        assert_eq!(origin.as_slice(), &[0.0, 0.0, -1.0]);
        assert!(ca.sample_attractor_points(0, 1).is_err());
    }

    #[test]
    fn search_box_keeps_signs_and_contains_samples() {
        let ca = construct_relu_attractor(6, 4, 2, 5).unwrap();
        let b = ca.search_box(32, 1).unwrap();
        assert!(ca.sample_attractor_points(32, 1).unwrap().iter().all(|x| b.contains(x)));
        assert!(b.lo()[..6].iter().all(|&l| l > 0.0));
        assert!(b.hi()[6..].iter().all(|&h| h < 0.0));
        let found = crate::equilibria::find_equilibria(ca.system(), &b, 16, 2, &Default::default()).unwrap();
        assert!(found.len() >= 5 && found.iter().all(|e| e.attractor_dim == 2));
    }

    #[test]
    fn distance_to_set_behaves() {
        let ca = construct_relu_attractor(4, 2, 1, 3).unwrap();
        let x = ca.point_at(&[2.0]).unwrap();
        assert!(ca.distance_to_set(&x).unwrap() < 1e-12);
        let mut off = x.clone();
        off[5] += 0.25;
        let d = ca.distance_to_set(&off).unwrap();
        assert!(d > 0.0 && d <= 0.25 + 1e-12);
    }

    #[test]
    fn off_block_scale_leaves_dimension_unchanged() {
        let ca = construct_relu_attractor(5, 3, 2, 9).unwrap();
        let scaled = ConstructedAttractor::from_parts(
            ca.w_p().clone(),
            ca.system().w().view((0, 5), (5, 3)).into_owned(),
            ca.w_zp() * 3.0,
            ca.system().w().view((5, 5), (3, 3)).into_owned(),
            ca.b_z() * 3.0,
            ca.basis().to_vec(),
            ca.c_max(),
        )
        .unwrap();
        let x = scaled.sample_attractor_points(1, 0).unwrap().remove(0);
        assert_eq!(attractor_dimension(scaled.system(), &x, DEFAULT_RANK_TOL).unwrap(), 2);
    }

    #[test]
    fn file_round_trip() {
        let ca = construct_relu_attractor(4, 2, 2, 5).unwrap();
        let json = serde_json::to_string(&ca.to_file()).unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["form"], "post_activation");
        assert_eq!(value["ground_truth"]["m"], 2);
        let back: ConstructedFile = serde_json::from_str(&json).unwrap();
        let ca2 = back.into_attractor().unwrap();
        assert_eq!(ca2.system(), ca.system());
    }

    #[test]
    fn dependent_rows_estimate() {
        let dr = construct_dependent_rows(3, 2, 1).unwrap();
        let dep = &dr.dependences[0];
        assert!(verify_dependence(&dr.sys, dep, 64, 0).unwrap().holds());
        let dim = dimension_from_dependence(&dr.sys, dep, &dr.witness, &DependenceCheck::default(), 1e-8).unwrap();
        assert_eq!(dim, 1);
        assert!(construct_dependent_rows(3, 3, 1).is_err());
    }

    #[test]
    fn relu_construction_in_dependence_form() {
        let ca = line_example();
        let dep = &ca.dependences().unwrap()[0];
        assert_eq!(dep.coefficients(), &[1.0, 0.0, 0.0]);
        let region = ca.sign_region_box().unwrap();
        assert!(verify_dependence_in(ca.system(), dep, &region, 128, 0).unwrap().holds());
        // Witness strictly inside the sign region.
        let ca2 = construct_relu_attractor(2, 1, 1, 3).unwrap();
        let dep2 = &ca2.dependences().unwrap()[0];
        let check2 = DependenceCheck {
            sample_box: Some(ca2.sign_region_box().unwrap()),
            ..DependenceCheck::default()
        };
        let x = ca2.sample_attractor_points(1, 0).unwrap().remove(0);
        let dim = dimension_from_dependence(ca2.system(), dep2, &x, &check2, 1e-8).unwrap();
        assert_eq!(dim, 1);
        assert_eq!(attractor_dimension(ca2.system(), &x, 1e-8).unwrap(), 1);
        // The relation fails once x_Z turns positive.
        assert!(!verify_dependence(ca.system(), dep, 64, 0).unwrap().holds());
    }
}
