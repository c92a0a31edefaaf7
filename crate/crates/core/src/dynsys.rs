//! Recurrent-style dynamical systems and their Jacobians.
//!
//! Three forms share one parameter set `(W, A, b, σ)`:
//!
//! * [`Form::PreActivation`]: `ẋ = σ(Wx + b) − Ax`
//! * [`Form::PostActivation`]: `ẋ = −x + Wσ(x) + b` (the ReLU network form; `A` is unused)
//! * [`Form::DiscreteMap`]: `x(t+1) = σ(Wx(t) + b) − Ax(t)`

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elementwise activation function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sine,
    /// Logistic sigmoid. Not one of the classic attractor-network activations;
    /// kept to exercise a generic smooth σ.
    Logistic,
}

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Identity,
        Activation::Relu,
        Activation::Tanh,
        Activation::Sine,
        Activation::Logistic,
    ];

    #[inline]
    pub fn value(self, u: f64) -> f64 {
        match self {
            Activation::Identity => u,
            Activation::Relu => u.max(0.0),
            Activation::Tanh => u.tanh(),
            Activation::Sine => u.sin(),
            Activation::Logistic => 1.0 / (1.0 + (-u).exp()),
        }
    }

    /// Derivative; ReLU uses `0` at the kink.
    #[inline]
    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if u > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = u.tanh();
                1.0 - t * t
            }
            Activation::Sine => u.cos(),
            Activation::Logistic => {
                let s = 1.0 / (1.0 + (-u).exp());
                s * (1.0 - s)
            }
        }
    }

    /// True when `u` sits exactly on a point where the derivative is a convention.
    #[inline]
    pub fn is_kink(self, u: f64) -> bool {
        matches!(self, Activation::Relu) && u == 0.0
    }

    pub fn is_smooth(self) -> bool {
        !matches!(self, Activation::Relu)
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sine => "sine",
            Activation::Logistic => "logistic",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown activation `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    PreActivation,
    PostActivation,
    DiscreteMap,
}

impl Form {
    pub fn is_continuous(self) -> bool {
        !matches!(self, Form::DiscreteMap)
    }

    pub fn name(self) -> &'static str {
        match self {
            Form::PreActivation => "pre_activation",
            Form::PostActivation => "post_activation",
            Form::DiscreteMap => "discrete_map",
        }
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Form {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Form::PreActivation, Form::PostActivation, Form::DiscreteMap]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown form `{s}`")))
    }
}

/// Analytic Jacobian together with a flag set when some activation argument
/// sat exactly on a kink (the derivative convention was applied there).
#[derive(Debug, Clone)]
pub struct JacobianEval {
    pub matrix: DMatrix<f64>,
    pub kink_hit: bool,
}

/// Outcome of comparing the analytic Jacobian against central differences.
#[derive(Debug, Clone)]
pub struct JacobianCheck {
    pub max_abs_diff: f64,
    /// `1 + ‖J‖∞` of the analytic Jacobian.
    pub scale: f64,
    pub agrees: bool,
    /// Some ReLU argument lies within the finite-difference reach of zero.
    pub kink_nearby: bool,
}

pub const JACOBIAN_CHECK_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalSystem {
    w: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    activation: Activation,
    form: Form,
}

impl DynamicalSystem {
    pub fn new(
        w: DMatrix<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
        activation: Activation,
        form: Form,
    ) -> Result<Self> {
        let n = w.nrows();
        if n == 0 {
            return Err(Error::invalid("state dimension must be positive"));
        }
        if w.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "W columns",
                expected: n,
                found: w.ncols(),
            });
        }
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "A side",
                expected: n,
                found: if a.nrows() != n { a.nrows() } else { a.ncols() },
            });
        }
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                context: "b length",
                expected: n,
                found: b.len(),
            });
        }
        if w.iter().chain(a.iter()).chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("system parameters"));
        }
        Ok(Self {
            w,
            a,
            b,
            activation,
            form,
        })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn form(&self) -> Form {
        self.form
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "state vector",
                expected: self.n(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Argument fed to σ: `Wx + b` for the pre-activation and map forms, `x` itself otherwise.
    fn activation_argument(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.form {
            Form::PreActivation | Form::DiscreteMap => &self.w * x + &self.b,
            Form::PostActivation => x.clone(),
        }
    }

    /// Right-hand side of the system at `x` (the next state for a discrete map).
    pub fn eval_field(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        Ok(self.field_unchecked(x))
    }

    pub(crate) fn field_unchecked(&self, x: &DVector<f64>) -> DVector<f64> {
        let act = self.activation;
        match self.form {
            Form::PreActivation | Form::DiscreteMap => {
                let u = self.activation_argument(x).map(|v| act.value(v));
                u - &self.a * x
            }
            Form::PostActivation => {
                let fx = x.map(|v| act.value(v));
                &self.w * fx + &self.b - x
            }
        }
    }

    /// The function whose zeros are equilibria: the field itself for the
    /// continuous forms, `map(x) − x` for a discrete map.
    pub fn residual_field(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let f = self.eval_field(x)?;
        Ok(match self.form {
            Form::DiscreteMap => f - x,
            _ => f,
        })
    }

    pub fn jacobian_analytic(&self, x: &DVector<f64>) -> Result<JacobianEval> {
        self.check_dim(x)?;
        let act = self.activation;
        let arg = self.activation_argument(x);
        let kink_hit = arg.iter().any(|&u| act.is_kink(u));
        let d = arg.map(|u| act.derivative(u));
        let matrix = match self.form {
            // D·W − A
            Form::PreActivation | Form::DiscreteMap => {
                let mut dw = self.w.clone();
                for (i, mut row) in dw.row_iter_mut().enumerate() {
                    row *= d[i];
                }
                dw - &self.a
            }
            // W·D − I
            Form::PostActivation => {
                let mut wd = self.w.clone();
                for (j, mut col) in wd.column_iter_mut().enumerate() {
                    col *= d[j];
                }
                wd - DMatrix::identity(self.n(), self.n())
            }
        };
        Ok(JacobianEval { matrix, kink_hit })
    }

    /// Jacobian of [`Self::residual_field`].
    pub fn residual_jacobian(&self, x: &DVector<f64>) -> Result<JacobianEval> {
        let mut j = self.jacobian_analytic(x)?;
        if self.form == Form::DiscreteMap {
            for i in 0..self.n() {
                j.matrix[(i, i)] -= 1.0;
            }
        }
        Ok(j)
    }

    pub fn default_fd_step(x: &DVector<f64>) -> f64 {
        1e-6 * x.amax().max(1.0)
    }

    /// Central-difference Jacobian of [`Self::eval_field`].
    pub fn jacobian_fd(&self, x: &DVector<f64>, h: f64) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("finite-difference step must be positive, got {h}")));
        }
        let n = self.n();
        let mut jac = DMatrix::zeros(n, n);
        let mut xp = x.clone();
        for j in 0..n {
            let orig = xp[j];
            xp[j] = orig + h;
            let fp = self.field_unchecked(&xp);
            xp[j] = orig - h;
            let fm = self.field_unchecked(&xp);
            xp[j] = orig;
            jac.set_column(j, &((fp - fm) / (2.0 * h)));
        }
        Ok(jac)
    }

    /// Compare analytic and finite-difference Jacobians under the
    /// `max|J − J_fd| ≤ 1e-5·(1 + ‖J‖∞)` criterion.
    pub fn check_jacobian(&self, x: &DVector<f64>, h: f64) -> Result<JacobianCheck> {
        let analytic = self.jacobian_analytic(x)?.matrix;
        let fd = self.jacobian_fd(x, h)?;
        let max_abs_diff = (&analytic - &fd).amax();
        let scale = 1.0 + inf_norm(&analytic);
        let kink_nearby = self.activation == Activation::Relu && {
            let arg = self.activation_argument(x);
            match self.form {
                Form::PostActivation => arg.iter().any(|u| u.abs() <= h),
                _ => arg.iter().zip(self.w.row_iter()).any(|(u, row)| {
                    u.abs() <= h * row.iter().map(|v| v.abs()).fold(0.0, f64::max)
                }),
            }
        };
        Ok(JacobianCheck {
            max_abs_diff,
            scale,
            agrees: max_abs_diff <= JACOBIAN_CHECK_TOL * scale,
            kink_nearby,
        })
    }

    /// Reads a system from its JSON definition file.
    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: SystemFile = serde_json::from_str(&text)?;
        file.into_system()
    }

    pub fn to_file(&self) -> SystemFile {
        SystemFile {
            n: self.n(),
            form: self.form,
            activation: self.activation,
            w: rows_of(&self.w),
            a: rows_of(&self.a),
            b: self.b.iter().copied().collect(),
        }
    }
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], context: &'static str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch {
            context,
            expected: ncols,
            found: bad.len(),
        });
    }
    Ok(DMatrix::from_row_iterator(
        nrows,
        ncols,
        rows.iter().flatten().copied(),
    ))
}

/// On-disk JSON layout: row-major matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemFile {
    pub n: usize,
    pub form: Form,
    pub activation: Activation,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl SystemFile {
    pub fn into_system(self) -> Result<DynamicalSystem> {
        let w = matrix_from_rows(&self.w, "W rows")?;
        let a = matrix_from_rows(&self.a, "A rows")?;
        if w.nrows() != self.n {
            return Err(Error::DimensionMismatch {
                context: "W rows vs n",
                expected: self.n,
                found: w.nrows(),
            });
        }
        DynamicalSystem::new(w, a, DVector::from_vec(self.b), self.activation, self.form)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |_, _| rng.random_range(-scale..scale))
    }

    fn random_system(rng: &mut ChaCha8Rng, act: Activation, form: Form) -> DynamicalSystem {
        let n = rng.random_range(1..=16);
        let scale = 1.5 / (n as f64).sqrt();
        DynamicalSystem::new(
            random_matrix(rng, n, scale),
            random_matrix(rng, n, 0.5),
            DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5)),
            act,
            form,
        )
        .unwrap()
    }

    #[test]
    fn derivative_matches_central_differences() {
        let h = 1e-5;
        for act in Activation::ALL {
            for &u in &[-2.3, -0.7, 0.31, 1.1, 2.9] {
                let fd = (act.value(u + h) - act.value(u - h)) / (2.0 * h);
                assert!((fd - act.derivative(u)).abs() < 1e-6, "{act} at {u}");
            }
        }
        assert_eq!(Activation::Relu.derivative(0.0), 0.0);
        assert!(Activation::Relu.is_kink(0.0));
    }

    #[test]
    fn identity_field_vanishes_when_w_equals_a() {
        let i2 = DMatrix::identity(2, 2);
        let sys = DynamicalSystem::new(
            i2.clone(),
            i2,
            DVector::zeros(2),
            Activation::Identity,
            Form::PreActivation,
        )
        .unwrap();
        let f = sys.eval_field(&DVector::from_vec(vec![3.0, -4.0])).unwrap();
        assert_eq!(f.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn scalar_tanh_field() {
        let sys = DynamicalSystem::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.5),
            DVector::zeros(1),
            Activation::Tanh,
            Form::PreActivation,
        )
        .unwrap();
        let f = sys.eval_field(&DVector::from_element(1, 1.0)).unwrap();
        assert!((f[0] - (1f64.tanh() - 0.5)).abs() < 1e-15);
        assert!((f[0] - 0.2616).abs() < 1e-4);
    }

    #[test]
    fn post_activation_line_is_equilibrium() {
        // W_P = diag(1, 0.5), W_ZP = (-0.5, 0), b_Z = -1.
        let w = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.3, 0.0, 0.5, -0.2, -0.5, 0.0, 0.7]);
        let sys = DynamicalSystem::new(
            w,
            DMatrix::identity(3, 3),
            DVector::from_vec(vec![0.0, 0.0, -1.0]),
            Activation::Relu,
            Form::PostActivation,
        )
        .unwrap();
        for c in [0.0, 0.5, 3.0, 10.0] {
            let x = DVector::from_vec(vec![c, 0.0, -0.5 * c - 1.0]);
            assert_eq!(sys.eval_field(&x).unwrap().amax(), 0.0);
        }
        // Block structure [[W_P − I, 0], [W_ZP, −I]] when x_P > 0, x_Z < 0.
        let j = sys
            .jacobian_analytic(&DVector::from_vec(vec![1.0, 2.0, -3.0]))
            .unwrap()
            .matrix;
        let expected =
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, -0.5, 0.0, -0.5, 0.0, -1.0]);
        assert_eq!(j, expected);
    }

    #[test]
    fn scalar_sine_jacobian() {
        let sys = DynamicalSystem::new(
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::from_element(1, 1, 0.3),
            DVector::zeros(1),
            Activation::Sine,
            Form::PreActivation,
        )
        .unwrap();
        let j = sys.jacobian_analytic(&DVector::zeros(1)).unwrap();
        assert!((j.matrix[(0, 0)] - 1.7).abs() < 1e-15);
        assert!(!j.kink_hit);
    }

    #[test]
    fn identity_jacobian_is_w_minus_a_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sys = random_system(&mut rng, Activation::Identity, Form::PreActivation);
        let x = DVector::from_fn(sys.n(), |_, _| rng.random_range(-2.0..2.0));
        let j = sys.jacobian_analytic(&x).unwrap().matrix;
        assert_eq!(j, sys.w() - sys.a());
        let fd = sys.jacobian_fd(&x, 1e-6).unwrap();
        assert!((&fd - &j).amax() < 1e-9);
        // Homogeneity of the linear field with b = 0.
        let sys0 = DynamicalSystem::new(
            sys.w().clone(),
            sys.a().clone(),
            DVector::zeros(sys.n()),
            Activation::Identity,
            Form::PreActivation,
        )
        .unwrap();
        let f = sys0.eval_field(&x).unwrap();
        assert!((f - (sys.w() - sys.a()) * &x).amax() < 1e-12);
    }

    #[test]
    fn analytic_matches_fd_for_smooth_activations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let forms = [Form::PreActivation, Form::PostActivation, Form::DiscreteMap];
        let acts = [Activation::Tanh, Activation::Sine, Activation::Logistic];
        for trial in 0..100 {
            let sys = random_system(&mut rng, acts[trial % 3], forms[(trial / 3) % 3]);
            let x = DVector::from_fn(sys.n(), |_, _| rng.random_range(-2.0..2.0));
            let check = sys.check_jacobian(&x, DynamicalSystem::default_fd_step(&x)).unwrap();
            assert!(check.agrees, "trial {trial}: {check:?}");
        }
    }

    #[test]
    fn relu_kink_straddle_is_flagged() {
        // Activation argument 1e-8 sits inside the FD reach h = 1e-6.
        let sys = DynamicalSystem::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            DVector::zeros(1),
            Activation::Relu,
            Form::PreActivation,
        )
        .unwrap();
        let x = DVector::from_element(1, 1e-8);
        let check = sys.check_jacobian(&x, 1e-6).unwrap();
        assert!(check.kink_nearby);
        assert!(!check.agrees);

        let on_kink = sys.jacobian_analytic(&DVector::zeros(1)).unwrap();
        assert!(on_kink.kink_hit);
        assert_eq!(on_kink.matrix[(0, 0)], 0.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let sys = DynamicalSystem::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            Activation::Tanh,
            Form::PreActivation,
        )
        .unwrap();
        assert!(matches!(
            sys.eval_field(&DVector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(DynamicalSystem::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(3, 3),
            DVector::zeros(2),
            Activation::Tanh,
            Form::PreActivation,
        )
        .is_err());
    }

    #[test]
    fn evaluation_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sys = random_system(&mut rng, Activation::Logistic, Form::DiscreteMap);
        let x = DVector::from_fn(sys.n(), |_, _| rng.random_range(-1.0..1.0));
        let a = sys.eval_field(&x).unwrap();
        let b = sys.eval_field(&x).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"n":2,"form":"discrete_map","activation":"sine",
            "W":[[1.0,2.0],[3.0,4.0]],"A":[[0.5,0.0],[0.0,0.5]],"b":[0.1,-0.1]}"#;
        let file: SystemFile = serde_json::from_str(text).unwrap();
        let sys = file.into_system().unwrap();
        assert_eq!(sys.w()[(1, 0)], 3.0);
        assert_eq!(sys.form(), Form::DiscreteMap);
        let again = serde_json::to_string(&sys.to_file()).unwrap();
        let back = serde_json::from_str::<SystemFile>(&again).unwrap().into_system().unwrap();
        assert_eq!(back, sys);
    }
}
