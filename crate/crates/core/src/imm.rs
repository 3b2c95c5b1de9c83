//! Interacting multiple model (IMM) estimation of a single object.
//!
//! A track keeps one extended Kalman filter per motion model together with a
//! probability ("weight") for each model. Every cycle runs four steps:
//!
//! 1. [`merge`]: mix the model estimates through the Markov transition matrix,
//! 2. [`ekf_predict`] / [`ekf_update`]: run every model filter independently,
//! 3. [`update_weights`]: rescale the weights by the measurement likelihood,
//! 4. [`synthesize`]: fuse the bank into one five-component estimate.
//!
//! [`imm_step`] chains all four. States of different dimension are mixed by
//! lifting them to the full five-component state (absent velocity components
//! are zero) and truncating back to the destination model.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{self, wrap_angle, FullState, ModelId, ModelState, NoiseConfig};

const HEADING: usize = 2;
const MAX_CONDITION: f64 = 1e12;

/// Row-stochastic model transition matrix; entry `(c, d)` is the
/// probability of switching from model `c` to model `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix(DMatrix<f64>);

impl TransitionMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::invalid("transition matrix must be square and non-empty"));
        }
        for r in 0..m.nrows() {
            let row = m.row(r);
            if row.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::invalid("transition probabilities must be finite and >= 0"));
            }
            if (row.sum() - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("transition row {r} does not sum to 1")));
            }
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.0[(from, to)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Three-model transition matrix with switching probability `tau` between
/// every pair of distinct models.
pub fn transition_matrix(tau: f64) -> Result<TransitionMatrix> {
    if !(0.0..0.5).contains(&tau) {
        return Err(Error::invalid(format!("tau must lie in [0, 0.5), got {tau}")));
    }
    let mut m = DMatrix::from_element(3, 3, tau);
    m.fill_diagonal(1.0 - 2.0 * tau);
    Ok(TransitionMatrix(m))
}

/// Which innovation drives the model-likelihood update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    /// Residual of the updated mean, `z - H x̂`, with `S = H P̂ Hᵀ + R`.
    Posterior,
    /// Classic IMM innovation `z - H x̄` with `S = H P̄ Hᵀ + R`.
    #[default]
    Prior,
}

#[derive(Clone, Debug)]
pub struct ImmConfig {
    pub models: Vec<ModelId>,
    pub transition: TransitionMatrix,
    pub noise: NoiseConfig,
    /// Lower bound applied to model weights; `None` disables flooring.
    pub weight_floor: Option<f64>,
    pub likelihood: Likelihood,
}

impl ImmConfig {
    pub const DEFAULT_TAU: f64 = 0.02;
    pub const DEFAULT_FLOOR: f64 = 1e-6;

    /// CP/CV/CTRV bank with the default switching probability.
    pub fn standard(noise: NoiseConfig) -> Self {
        Self {
            models: ModelId::ALL.to_vec(),
            transition: transition_matrix(Self::DEFAULT_TAU).unwrap(),
            noise,
            weight_floor: Some(Self::DEFAULT_FLOOR),
            likelihood: Likelihood::default(),
        }
    }

    /// Degenerate bank with one model; the cycle reduces to a plain EKF.
    pub fn single(model: ModelId, noise: NoiseConfig) -> Self {
        Self {
            models: vec![model],
            transition: TransitionMatrix::identity(1),
            noise,
            weight_floor: None,
            likelihood: Likelihood::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::invalid("model bank is empty"));
        }
        if self.transition.dim() != self.models.len() {
            return Err(Error::invalid("transition matrix size does not match model bank"));
        }
        self.noise.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelEstimate {
    pub mean: ModelState,
    pub covariance: DMatrix<f64>,
}

impl ModelEstimate {
    pub fn model(&self) -> ModelId {
        self.mean.model()
    }
}

/// World-frame object observation `(x, z, θ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub object_id: u64,
    pub x: f64,
    pub z: f64,
    pub theta: f64,
    pub frame: usize,
}

impl Measurement {
    pub fn new(object_id: u64, frame: usize, x: f64, z: f64, theta: f64) -> Self {
        Self {
            object_id,
            x,
            z,
            theta: wrap_angle(theta),
            frame,
        }
    }

    fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.z, self.theta)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.z.is_finite() && self.theta.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImmTrack {
    pub object_id: u64,
    pub estimates: Vec<ModelEstimate>,
    pub weights: Vec<f64>,
    pub last_update: usize,
}

impl ImmTrack {
    pub fn models(&self) -> impl Iterator<Item = ModelId> + '_ {
        self.estimates.iter().map(|e| e.model())
    }

    pub fn weight_of(&self, model: ModelId) -> Option<f64> {
        self.estimates
            .iter()
            .position(|e| e.model() == model)
            .map(|i| self.weights[i])
    }

    /// Model with the largest weight.
    pub fn dominant_model(&self) -> ModelId {
        let (i, _) = self
            .weights
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &w)| if w > acc.1 { (i, w) } else { acc });
        self.estimates[i].model()
    }
}

pub fn init_track(
    id: u64,
    first: &Measurement,
    models: &[ModelId],
    cfg: &NoiseConfig,
) -> ImmTrack {
    let n = models.len();
    let estimates = models
        .iter()
        .map(|&m| {
            let full = FullState {
                x: first.x,
                z: first.z,
                theta: first.theta,
                ..FullState::default()
            };
            let d = m.dim();
            ModelEstimate {
                mean: full.truncate(m),
                covariance: DMatrix::from_diagonal(&DVector::from_column_slice(
                    &cfg.init_cov[..d],
                )),
            }
        })
        .collect();
    ImmTrack {
        object_id: id,
        estimates,
        weights: vec![1.0 / n as f64; n],
        last_update: first.frame,
    }
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let t = p.transpose();
    *p += t;
    *p *= 0.5;
}

fn lifted_cov(est: &ModelEstimate) -> DMatrix<f64> {
    let d = est.covariance.nrows();
    let mut out = DMatrix::zeros(5, 5);
    out.view_mut((0, 0), (d, d)).copy_from(&est.covariance);
    out
}

/// Probability-weighted mean of five-component states; the heading is
/// averaged as wrapped offsets from `reference`.
fn weighted_mean(probs: &[f64], states: &[[f64; 5]], reference: f64) -> [f64; 5] {
    let mut out = [0.0; 5];
    let mut heading = 0.0;
    for (p, s) in probs.iter().zip(states) {
        if *p == 0.0 {
            continue;
        }
        for i in 0..5 {
            if i != HEADING {
                out[i] += p * s[i];
            }
        }
        heading += p * wrap_angle(s[HEADING] - reference);
    }
    out[HEADING] = wrap_angle(reference + heading);
    out
}

fn spread(a: &[f64; 5], mean: &[f64; 5]) -> DVector<f64> {
    let mut d = DVector::from_fn(5, |i, _| a[i] - mean[i]);
    d[HEADING] = wrap_angle(d[HEADING]);
    d
}

fn apply_floor(weights: &mut [f64], floor: Option<f64>) {
    let Some(floor) = floor else { return };
    let mut clamped = false;
    for w in weights.iter_mut() {
        if *w < floor {
            *w = floor;
            clamped = true;
        }
    }
    if clamped {
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
    }
}

/// Markov mixing step. Returns the track holding the merged weights, means
/// and covariances.
pub fn merge(track: &ImmTrack, transition: &TransitionMatrix, floor: Option<f64>) -> ImmTrack {
    let n = track.estimates.len();
    assert_eq!(transition.dim(), n, "transition matrix does not match the model bank");
    let lifted: Vec<[f64; 5]> = track.estimates.iter().map(|e| e.mean.lift().to_array()).collect();
    let covs: Vec<DMatrix<f64>> = track.estimates.iter().map(lifted_cov).collect();

    let mut weights = vec![0.0; n];
    let mut estimates = Vec::with_capacity(n);
    for d in 0..n {
        let raw: Vec<f64> = (0..n).map(|c| transition.get(c, d) * track.weights[c]).collect();
        let merged: f64 = raw.iter().sum();
        weights[d] = merged;
        let model = track.estimates[d].model();
        if merged <= 0.0 {
            // Unreachable model: nothing flows into it, keep its own estimate.
            estimates.push(track.estimates[d].clone());
            continue;
        }
        let probs: Vec<f64> = raw.iter().map(|r| r / merged).collect();
        let mean = weighted_mean(&probs, &lifted, lifted[d][HEADING]);
        let mut cov = DMatrix::zeros(5, 5);
        for c in 0..n {
            if probs[c] == 0.0 {
                continue;
            }
            let dx = spread(&lifted[c], &mean);
            cov += (&covs[c] + &dx * dx.transpose()) * probs[c];
        }
        let dim = model.dim();
        let mut covariance = cov.view((0, 0), (dim, dim)).into_owned();
        symmetrize(&mut covariance);
        estimates.push(ModelEstimate {
            mean: FullState::from_array(mean).truncate(model),
            covariance,
        });
    }
    apply_floor(&mut weights, floor);
    ImmTrack {
        object_id: track.object_id,
        estimates,
        weights,
        last_update: track.last_update,
    }
}

pub fn ekf_predict(est: &ModelEstimate, dt: f64, cfg: &NoiseConfig) -> Result<ModelEstimate> {
    let a = motion::jacobian(&est.mean, dt)?;
    let mean = motion::propagate(&est.mean, dt)?;
    let mut covariance = &a * &est.covariance * a.transpose() + motion::process_noise(est.model(), cfg);
    symmetrize(&mut covariance);
    Ok(ModelEstimate { mean, covariance })
}

/// Result of one measurement update.
#[derive(Clone, Debug)]
pub struct UpdateOutput {
    pub estimate: ModelEstimate,
    /// `z - H x̄` with the heading wrapped.
    pub innovation: Vector3<f64>,
    /// `H P̄ Hᵀ + R`.
    pub s: Matrix3<f64>,
    /// `z - H x̂` with the heading wrapped.
    pub posterior_residual: Vector3<f64>,
    /// `H P̂ Hᵀ + R`.
    pub posterior_s: Matrix3<f64>,
}

impl UpdateOutput {
    pub fn likelihood_terms(&self, mode: Likelihood) -> (Vector3<f64>, Matrix3<f64>) {
        match mode {
            Likelihood::Posterior => (self.posterior_residual, self.posterior_s),
            Likelihood::Prior => (self.innovation, self.s),
        }
    }
}

fn observe(state: &ModelState) -> Vector3<f64> {
    Vector3::new(state.x(), state.z(), state.theta())
}

fn residual(z: &Measurement, state: &ModelState) -> Vector3<f64> {
    let mut r = z.vector() - observe(state);
    r[2] = wrap_angle(r[2]);
    r
}

fn top_left3(p: &DMatrix<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| p[(i, j)])
}

fn condition_number(s: &Matrix3<f64>) -> f64 {
    let eig = SymmetricEigen::new(*s).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn ekf_update(est: &ModelEstimate, z: &Measurement, cfg: &NoiseConfig) -> Result<UpdateOutput> {
    if !z.is_finite() {
        return Err(Error::invalid("measurement has non-finite components"));
    }
    let d = est.mean.dim();
    let r = Matrix3::from_diagonal(&Vector3::from_column_slice(&cfg.r));
    let p = &est.covariance;
    let s = top_left3(p) + r;
    let condition = condition_number(&s);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::DegenerateUpdate { condition });
    }
    let s_inv = s
        .try_inverse()
        .ok_or(Error::DegenerateUpdate { condition })?;
    // P Hᵀ is the first three columns of P.
    let pht = p.columns(0, 3).into_owned();
    let s_inv_dyn = DMatrix::from_fn(3, 3, |i, j| s_inv[(i, j)]);
    let gain = &pht * &s_inv_dyn;
    let innovation = residual(z, &est.mean);
    let dx = &gain * DVector::from_column_slice(innovation.as_slice());
    let mut values = est.mean.to_vector() + dx;
    values[HEADING] = wrap_angle(values[HEADING]);
    let mean = ModelState::from_vector(est.model(), &values)?;

    let mut kh = DMatrix::zeros(d, d);
    kh.columns_mut(0, 3).copy_from(&gain);
    let mut covariance = (DMatrix::identity(d, d) - kh) * p;
    symmetrize(&mut covariance);

    let posterior_residual = residual(z, &mean);
    let posterior_s = top_left3(&covariance) + r;
    Ok(UpdateOutput {
        estimate: ModelEstimate { mean, covariance },
        innovation,
        s,
        posterior_residual,
        posterior_s,
    })
}

/// Rescales merged weights by each model's Gaussian measurement likelihood
/// and renormalizes. Falls back to the merged weights if no likelihood is
/// finite.
pub fn update_weights(
    merged: &[f64],
    innovations: &[Vector3<f64>],
    s_matrices: &[Matrix3<f64>],
    floor: Option<f64>,
) -> Result<Vec<f64>> {
    if merged.len() != innovations.len() || merged.len() != s_matrices.len() {
        return Err(Error::invalid("weight update inputs differ in length"));
    }
    // Normalized in log space so tight measurement noise does not zero every term.
    let mut log_raw = Vec::with_capacity(merged.len());
    for ((w, nu), s) in merged.iter().zip(innovations).zip(s_matrices) {
        let det = s.determinant();
        let s_inv = s
            .try_inverse()
            .filter(|_| det > 0.0)
            .ok_or(Error::DegenerateUpdate { condition: f64::INFINITY })?;
        let mahalanobis = (nu.transpose() * s_inv * nu)[0];
        log_raw.push(w.ln() - 0.5 * det.ln() - 0.5 * mahalanobis);
    }
    let peak = log_raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights = if peak.is_finite() {
        let raw: Vec<f64> = log_raw.iter().map(|l| (l - peak).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|r| r / total).collect()
    } else {
        merged.to_vec()
    };
    apply_floor(&mut weights, floor);
    Ok(weights)
}

/// Fused estimate of the bank: weighted mean of the lifted model means and
/// the matching covariance including the between-model spread.
pub fn synthesize(track: &ImmTrack) -> (FullState, DMatrix<f64>) {
    let lifted: Vec<[f64; 5]> = track.estimates.iter().map(|e| e.mean.lift().to_array()).collect();
    let reference = lifted[track
        .weights
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &w)| if w > acc.1 { (i, w) } else { acc })
        .0][HEADING];
    let mean = weighted_mean(&track.weights, &lifted, reference);
    let mut cov = DMatrix::zeros(5, 5);
    for ((w, est), x) in track.weights.iter().zip(&track.estimates).zip(&lifted) {
        if *w == 0.0 {
            continue;
        }
        let dx = spread(x, &mean);
        cov += (lifted_cov(est) + &dx * dx.transpose()) * *w;
    }
    symmetrize(&mut cov);
    (FullState::from_array(mean), cov)
}

/// Merge and predict without a measurement. Weights become the merged weights.
pub fn coast(track: &ImmTrack, dt: f64, cfg: &ImmConfig) -> Result<ImmTrack> {
    let mut merged = merge(track, &cfg.transition, cfg.weight_floor);
    for est in merged.estimates.iter_mut() {
        *est = ekf_predict(est, dt, &cfg.noise)?;
    }
    Ok(merged)
}

/// One full IMM cycle for `track` with measurement `z` taken `dt` seconds
/// after the previous one.
pub fn imm_step(
    track: &ImmTrack,
    z: &Measurement,
    dt: f64,
    cfg: &ImmConfig,
) -> Result<(ImmTrack, FullState, DMatrix<f64>)> {
    if z.object_id != track.object_id {
        return Err(Error::invalid(format!(
            "measurement for object {} applied to track {}",
            z.object_id, track.object_id
        )));
    }
    let merged = merge(track, &cfg.transition, cfg.weight_floor);
    let mut estimates = Vec::with_capacity(merged.estimates.len());
    let mut innovations = Vec::with_capacity(merged.estimates.len());
    let mut s_matrices = Vec::with_capacity(merged.estimates.len());
    for est in &merged.estimates {
        let predicted = ekf_predict(est, dt, &cfg.noise)?;
        let out = ekf_update(&predicted, z, &cfg.noise)?;
        let (nu, s) = out.likelihood_terms(cfg.likelihood);
        innovations.push(nu);
        s_matrices.push(s);
        estimates.push(out.estimate);
    }
    let weights = update_weights(&merged.weights, &innovations, &s_matrices, cfg.weight_floor)?;
    let updated = ImmTrack {
        object_id: track.object_id,
        estimates,
        weights,
        last_update: z.frame,
    };
    let (state, cov) = synthesize(&updated);
    Ok((updated, state, cov))
}
