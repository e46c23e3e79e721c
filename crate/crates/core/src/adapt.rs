//! Belief-space recursive least squares.
//!
//! The robot's model of the human is parameter-affine,
//! `x_H(k+1) = offset(k) + Φ(k)·θ + w`, where `Φ(k) = I₄ ⊗ φ(k)ᵀ` and `θ`
//! stacks the rows of the estimated coefficient block. `offset` carries any
//! part of the model treated as known (a known `A_H` or `B_H`, or the current
//! state for residual models). Alongside the estimate `θ̂` the belief carries
//! the learning gain `F`, the parameter-error covariance `Σ_θθ`, and the mean
//! parameter error `E[θ̃]`.

use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::human::FeatureVector;
use crate::world::{AgentState, Vec4};

/// Dimension of the human state.
pub const N_H: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMode {
    /// Estimate `A_H`; `B_H` known.
    Intrinsic,
    /// Estimate `B_H`; `A_H` known.
    Interactive,
    /// Estimate both.
    Full,
}

impl UncertaintyMode {
    pub fn name(&self) -> &'static str {
        match self {
            UncertaintyMode::Intrinsic => "intrinsic",
            UncertaintyMode::Interactive => "interactive",
            UncertaintyMode::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixNorm {
    #[default]
    Frobenius,
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptParams {
    /// Forgetting factor λ ∈ (0, 1].
    pub forgetting: f64,
    /// `F(0) = gain0 · I`.
    pub gain0: f64,
    /// `Σ_θθ(0) = sigma0 · I`.
    pub sigma0: f64,
    /// Drift rate `dθ`, broadcast to every parameter.
    pub dtheta: f64,
    /// Standard deviation of the additive perturbation applied to the true
    /// parameters to form `θ̂(0)`.
    pub perturbation: f64,
    pub norm: MatrixNorm,
}

impl Default for AdaptParams {
    fn default() -> Self {
        Self {
            forgetting: 0.98,
            gain0: 1.0,
            sigma0: 1.0,
            dtheta: 0.0,
            perturbation: 0.3,
            norm: MatrixNorm::Frobenius,
        }
    }
}

impl AdaptParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return Err(Error::Config(format!(
                "forgetting must lie in (0, 1], got {}",
                self.forgetting
            )));
        }
        if !(self.gain0 > 0.0) || !(self.sigma0 >= 0.0) || !(self.perturbation >= 0.0) {
            return Err(Error::Config(
                "gain0 must be positive; sigma0 and perturbation nonnegative".into(),
            ));
        }
        if !self.dtheta.is_finite() {
            return Err(Error::Config("dtheta must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub theta_hat: DVector<f64>,
    /// Learning gain `F`.
    pub gain: DMatrix<f64>,
    /// Parameter-error covariance `Σ_θθ`.
    pub sigma_tt: DMatrix<f64>,
    /// Mean parameter error `E[θ̃]`.
    pub mean_error: DVector<f64>,
    pub forgetting: f64,
    pub dtheta: DVector<f64>,
    pub noise_cov: Matrix4<f64>,
    pub mode: UncertaintyMode,
    pub known_a: Option<Matrix4<f64>>,
    pub known_b: Option<Matrix4<f64>>,
    pub norm: MatrixNorm,
}

impl BeliefState {
    /// Generic belief over `N_H · obs_dim` parameters.
    pub fn new(
        theta0: DVector<f64>,
        params: &AdaptParams,
        noise_cov: Matrix4<f64>,
        mode: UncertaintyMode,
    ) -> Self {
        let n = theta0.len();
        Self {
            gain: DMatrix::identity(n, n) * params.gain0,
            sigma_tt: DMatrix::identity(n, n) * params.sigma0,
            mean_error: DVector::zeros(n),
            forgetting: params.forgetting,
            dtheta: DVector::from_element(n, params.dtheta),
            noise_cov,
            mode,
            known_a: None,
            known_b: None,
            norm: params.norm,
            theta_hat: theta0,
        }
    }

    /// Belief for the linear human model. The estimated block starts at the
    /// truth plus elementwise `N(0, perturbation²)`; the other block is known.
    pub fn linear<R: Rng + ?Sized>(
        mode: UncertaintyMode,
        true_a: &Matrix4<f64>,
        true_b: &Matrix4<f64>,
        params: &AdaptParams,
        noise_cov: Matrix4<f64>,
        rng: &mut R,
    ) -> Self {
        let truth = linear_truth(mode, true_a, true_b);
        let theta0 = truth.map(|t| t + params.perturbation * rng.sample::<f64, _>(StandardNormal));
        let mut b = Self::new(theta0, params, noise_cov, mode);
        match mode {
            UncertaintyMode::Intrinsic => b.known_b = Some(*true_b),
            UncertaintyMode::Interactive => b.known_a = Some(*true_a),
            UncertaintyMode::Full => {}
        }
        b
    }

    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.theta_hat.len() / N_H
    }

    /// `θ̂` reshaped to the `N_H × obs_dim` coefficient block.
    pub fn coefficients(&self) -> DMatrix<f64> {
        unflatten_rows(&self.theta_hat, N_H)
    }

    pub fn covariance_norm(&self) -> f64 {
        covariance_norm_with(&self.sigma_tt, self.norm)
    }

    /// Observation vector and known offset for the linear human model.
    pub fn linear_observation(&self, x_h: &AgentState, u_h: &FeatureVector) -> Result<Observation> {
        let x = x_h.to_vec4();
        let (phi, offset) = match self.mode {
            UncertaintyMode::Intrinsic => {
                let b = self
                    .known_b
                    .ok_or_else(|| Error::Config("intrinsic mode requires a known B_H".into()))?;
                (DVector::from_column_slice(x.as_slice()), b * u_h.values)
            }
            UncertaintyMode::Interactive => {
                let a = self
                    .known_a
                    .ok_or_else(|| Error::Config("interactive mode requires a known A_H".into()))?;
                (DVector::from_column_slice(u_h.values.as_slice()), a * x)
            }
            UncertaintyMode::Full => {
                let mut v = DVector::zeros(8);
                v.rows_mut(0, 4).copy_from(&x);
                v.rows_mut(4, 4).copy_from(&u_h.values);
                (v, Vec4::zeros())
            }
        };
        if phi.len() != self.obs_dim() {
            return Err(Error::Dimension {
                expected: self.obs_dim(),
                got: phi.len(),
                context: "observation vector",
            });
        }
        Ok(Observation { phi, offset })
    }
}

/// The flattened true parameter vector for a linear mode.
pub fn linear_truth(mode: UncertaintyMode, a: &Matrix4<f64>, b: &Matrix4<f64>) -> DVector<f64> {
    let c = match mode {
        UncertaintyMode::Intrinsic => DMatrix::from_column_slice(4, 4, a.as_slice()),
        UncertaintyMode::Interactive => DMatrix::from_column_slice(4, 4, b.as_slice()),
        UncertaintyMode::Full => {
            let mut c = DMatrix::zeros(4, 8);
            c.view_mut((0, 0), (4, 4)).copy_from(a);
            c.view_mut((0, 4), (4, 4)).copy_from(b);
            c
        }
    };
    flatten_rows(&c)
}

/// Row-major flattening `[C_1 … C_n]ᵀ`.
pub fn flatten_rows(c: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        c.len(),
        (0..c.nrows()).flat_map(|i| (0..c.ncols()).map(move |j| c[(i, j)])),
    )
}

pub fn unflatten_rows(theta: &DVector<f64>, rows: usize) -> DMatrix<f64> {
    let cols = theta.len() / rows;
    DMatrix::from_fn(rows, cols, |i, j| theta[i * cols + j])
}

/// Regressor `φ(k)` plus the known part of the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub phi: DVector<f64>,
    pub offset: Vec4,
}

impl Observation {
    pub fn new(phi: DVector<f64>, offset: Vec4) -> Self {
        Self { phi, offset }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        observation_matrix(&self.phi)
    }
}

/// `Φ = I₄ ⊗ φᵀ`, shape `4 × 4·len(φ)`.
pub fn observation_matrix(phi: &DVector<f64>) -> DMatrix<f64> {
    let p = phi.len();
    let mut m = DMatrix::zeros(N_H, N_H * p);
    for i in 0..N_H {
        for j in 0..p {
            m[(i, i * p + j)] = phi[j];
        }
    }
    m
}

/// Observation matrix for the linear model in the belief's mode.
pub fn build_phi(
    belief: &BeliefState,
    x_h: &AgentState,
    u_h: &FeatureVector,
) -> Result<DMatrix<f64>> {
    Ok(belief.linear_observation(x_h, u_h)?.matrix())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub x_hat_next: Vec4,
    pub sigma_h_next: Matrix4<f64>,
}

pub fn predict(belief: &BeliefState, x_h: &AgentState, u_h: &FeatureVector) -> Result<Prediction> {
    let obs = belief.linear_observation(x_h, u_h)?;
    predict_observation(belief, &obs)
}

/// `x̂ = offset + Φθ̂`, `Σ_H = Φ Σ_θθ Φᵀ + W`.
pub fn predict_observation(belief: &BeliefState, obs: &Observation) -> Result<Prediction> {
    if N_H * obs.phi.len() != belief.dim() {
        return Err(Error::Dimension {
            expected: belief.dim(),
            got: N_H * obs.phi.len(),
            context: "observation matrix columns",
        });
    }
    let phi = obs.matrix();
    let mean = &phi * &belief.theta_hat;
    let x_hat_next = obs.offset + Vec4::from_column_slice(mean.as_slice());
    Ok(Prediction {
        x_hat_next,
        sigma_h_next: predicted_covariance(&phi, &belief.sigma_tt, &belief.noise_cov),
    })
}

pub fn predicted_covariance(
    phi: &DMatrix<f64>,
    sigma_tt: &DMatrix<f64>,
    w: &Matrix4<f64>,
) -> Matrix4<f64> {
    let s = phi * sigma_tt * phi.transpose();
    let mut out = *w + Matrix4::from_column_slice(s.as_slice());
    symmetrize4(&mut out);
    out
}

fn symmetrize4(m: &mut Matrix4<f64>) {
    for i in 0..4 {
        for j in (i + 1)..4 {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// One adaptation step given the realised next human state.
pub fn update(
    belief: &BeliefState,
    x_h_next_observed: &AgentState,
    phi: &DMatrix<f64>,
    prediction: &Prediction,
) -> BeliefState {
    let innovation = x_h_next_observed.to_vec4() - prediction.x_hat_next;
    let innovation = DVector::from_column_slice(innovation.as_slice());
    propagate(
        belief,
        phi,
        &prediction.sigma_h_next,
        Some(&innovation),
        true,
    )
}

/// Propagate `F`, `Σ_θθ` and `E[θ̃]` without touching `θ̂`, i.e. with the
/// innovation replaced by its expectation (zero).
pub fn virtual_update(
    belief: &BeliefState,
    phi: &DMatrix<f64>,
    sigma_h: &Matrix4<f64>,
) -> BeliefState {
    propagate(belief, phi, sigma_h, None, true)
}

pub(crate) fn propagate(
    belief: &BeliefState,
    phi: &DMatrix<f64>,
    sigma_h: &Matrix4<f64>,
    innovation: Option<&DVector<f64>>,
    floor: bool,
) -> BeliefState {
    let lambda = belief.forgetting;
    let f = &belief.gain;
    let sigma = &belief.sigma_tt;

    // learning gain
    let phi_f = phi * f; // 4 × n
    let mut m = phi_f.clone() * phi.transpose();
    for i in 0..N_H {
        m[(i, i)] += lambda;
    }
    let m_inv = m
        .try_inverse()
        .expect("λI + ΦFΦᵀ is positive definite for λ > 0 and F ≻ 0");
    let mut gain = (f - phi_f.transpose() * (m_inv * &phi_f)) / lambda;
    symmetrize(&mut gain);

    let k = &gain * phi.transpose(); // F(k+1) Φᵀ, n × 4

    let theta_hat = match innovation {
        Some(e) => &belief.theta_hat + &k * e,
        None => belief.theta_hat.clone(),
    };

    let dtheta = &belief.dtheta;
    let mean_error = &belief.mean_error - &k * (phi * &belief.mean_error) + dtheta;

    // five-term covariance recursion
    let sh = DMatrix::from_column_slice(4, 4, sigma_h.as_slice());
    let sigma_phi_t = sigma * phi.transpose(); // Σ Φᵀ, n × 4
    let mut next = sigma.clone();
    next += &k * sh * k.transpose();
    next -= &sigma_phi_t * k.transpose();
    next -= &k * sigma_phi_t.transpose();
    if dtheta.iter().any(|v| *v != 0.0) {
        next += &mean_error * dtheta.transpose();
        next += dtheta * mean_error.transpose();
        next -= dtheta * dtheta.transpose();
    }
    symmetrize(&mut next);
    if floor {
        floor_eigenvalues(&mut next);
    }

    BeliefState {
        theta_hat,
        gain,
        sigma_tt: next,
        mean_error,
        forgetting: belief.forgetting,
        dtheta: belief.dtheta.clone(),
        noise_cov: belief.noise_cov,
        mode: belief.mode,
        known_a: belief.known_a,
        known_b: belief.known_b,
        norm: belief.norm,
    }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Clip negative eigenvalues of a symmetric matrix to zero. Positive-definite
/// inputs (Cholesky succeeds) are returned untouched.
pub fn floor_eigenvalues(m: &mut DMatrix<f64>) {
    if m.clone().cholesky().is_some() {
        return;
    }
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().all(|l| *l >= 0.0) {
        return;
    }
    let vals = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&vals) * v.transpose();
    symmetrize(&mut out);
    *m = out;
}

/// Frobenius norm.
pub fn covariance_norm(sigma_tt: &DMatrix<f64>) -> f64 {
    sigma_tt.norm()
}

pub fn covariance_norm_with(sigma_tt: &DMatrix<f64>, norm: MatrixNorm) -> f64 {
    match norm {
        MatrixNorm::Frobenius => sigma_tt.norm(),
        MatrixNorm::Spectral => {
            if sigma_tt.is_empty() {
                return 0.0;
            }
            SymmetricEigen::new(sigma_tt.clone())
                .eigenvalues
                .iter()
                .fold(0.0_f64, |acc, l| acc.max(l.abs()))
        }
    }
}
