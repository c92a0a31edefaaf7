//! Singular-value and eigenvalue spectra, numerical rank, and the
//! stratification statistics computed over them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Descending, non-negative.
    pub singular_values: Vec<f64>,
    /// Only populated for square inputs when requested.
    pub eigenvalues: Option<Vec<Complex64>>,
    /// `None` when every singular value is zero.
    pub cv: Option<f64>,
    /// `f64::INFINITY` when a trailing singular value is zero.
    pub max_gap_ratio: f64,
    pub numerical_rank: usize,
    /// Absolute threshold: `rel_tol · s_max`.
    pub tol_used: f64,
}

impl Serialize for SpectrumReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let fields = if self.eigenvalues.is_some() { 6 } else { 5 };
        let mut st = serializer.serialize_struct("SpectrumReport", fields)?;
        st.serialize_field("singular_values", &self.singular_values)?;
        st.serialize_field("cv", &self.cv)?;
        st.serialize_field("rank", &self.numerical_rank)?;
        st.serialize_field("tol", &self.tol_used)?;
        // JSON has no infinity
        let gap = self.max_gap_ratio.is_finite().then_some(self.max_gap_ratio);
        st.serialize_field("max_gap_ratio", &gap)?;
        if let Some(eigs) = &self.eigenvalues {
            let pairs: Vec<[f64; 2]> = eigs.iter().map(|z| [z.re, z.im]).collect();
            st.serialize_field("eigenvalues", &pairs)?;
        }
        st.end()
    }
}

/// Full thin SVD with singular values sorted descending.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let k = self.singular_values.len();
        let mut us = self.u.clone();
        for j in 0..k {
            let mut col = us.column_mut(j);
            col *= self.singular_values[j];
        }
        us * &self.v_t
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    Ok(())
}

pub fn svd_factors(m: &DMatrix<f64>) -> Result<SvdFactors> {
    check_finite(m)?;
    if m.is_empty() {
        return Err(Error::invalid("empty matrix"));
    }
    let svd = m.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::invalid("SVD failed to produce factors")),
    };
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let singular_values = order.iter().map(|&i| svd.singular_values[i].max(0.0)).collect();
    let u = DMatrix::from_fn(u.nrows(), k, |r, c| u[(r, order[c])]);
    let v_t = DMatrix::from_fn(k, v_t.ncols(), |r, c| v_t[(order[r], c)]);
    Ok(SvdFactors {
        u,
        singular_values,
        v_t,
    })
}

pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_finite(m)?;
    if m.is_empty() {
        return Err(Error::invalid("empty matrix"));
    }
    let mut s: Vec<f64> = m.singular_values().iter().map(|v| v.max(0.0)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

pub fn svd_spectrum(m: &DMatrix<f64>) -> Result<SpectrumReport> {
    svd_spectrum_with_tol(m, DEFAULT_RANK_TOL)
}

pub fn svd_spectrum_with_tol(m: &DMatrix<f64>, rel_tol: f64) -> Result<SpectrumReport> {
    report_from_singular_values(singular_values(m)?, rel_tol)
}

/// Singular-value report plus the eigenvalues of a square matrix.
pub fn full_spectrum(m: &DMatrix<f64>, rel_tol: f64) -> Result<SpectrumReport> {
    let mut report = svd_spectrum_with_tol(m, rel_tol)?;
    report.eigenvalues = Some(eig_spectrum(m)?);
    Ok(report)
}

pub fn report_from_singular_values(singular_values: Vec<f64>, rel_tol: f64) -> Result<SpectrumReport> {
    let numerical_rank = numerical_rank(&singular_values, rel_tol)?;
    let s_max = singular_values.first().copied().unwrap_or(0.0);
    let cv = match cv_metric(&singular_values) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SpectrumReport {
        max_gap_ratio: max_gap_ratio(&singular_values),
        cv,
        numerical_rank,
        tol_used: rel_tol * s_max,
        eigenvalues: None,
        singular_values,
    })
}

/// Largest ratio between consecutive descending values; `1` for a single value.
pub fn max_gap_ratio(sorted_desc: &[f64]) -> f64 {
    let mut best = 1.0f64;
    for pair in sorted_desc.windows(2) {
        if pair[1] <= 0.0 {
            return f64::INFINITY;
        }
        best = best.max(pair[0] / pair[1]);
    }
    best
}

/// Eigenvalues with multiplicity, sorted by real part then imaginary part (both descending).
pub fn eig_spectrum(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::invalid(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    check_finite(m)?;
    if m.is_empty() {
        return Err(Error::invalid("empty matrix"));
    }
    let mut eigs: Vec<Complex64> = if m == &m.transpose() {
        m.clone()
            .symmetric_eigenvalues()
            .iter()
            .map(|&re| Complex64::new(re, 0.0))
            .collect()
    } else {
        faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
            .eigenvalues()
            .map_err(|e| Error::invalid(format!("eigenvalue solver failed: {e:?}")))?
            .into_iter()
            .map(|z| Complex64::new(z.re, z.im))
            .collect()
    };
    eigs.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(eigs)
}

/// Count of values strictly above `rel_tol · s_max`.
pub fn numerical_rank(sorted_desc: &[f64], rel_tol: f64) -> Result<usize> {
    if !(rel_tol > 0.0 && rel_tol.is_finite()) {
        return Err(Error::invalid(format!("rank tolerance must be positive, got {rel_tol}")));
    }
    if sorted_desc.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("singular values must be finite and non-negative"));
    }
    if sorted_desc.windows(2).any(|p| p[0] < p[1]) {
        return Err(Error::invalid("singular values must be sorted descending"));
    }
    let s_max = match sorted_desc.first() {
        Some(&s) if s > 0.0 => s,
        _ => return Ok(0),
    };
    let threshold = rel_tol * s_max;
    Ok(sorted_desc.iter().filter(|&&s| s > threshold).count())
}

/// Coefficient of variation `σ²/μ²` with population variance.
pub fn cv_metric(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("cv of an empty list"));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("cv needs finite non-negative values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Err(Error::UndefinedMetric("coefficient of variation with zero mean"));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var / (mean * mean))
}
