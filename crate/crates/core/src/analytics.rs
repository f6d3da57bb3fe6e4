//! Closed-form predictions for the distillation protocol, evaluated by
//! deterministic numerical quadrature.
//!
//! For fixed phase shifts the joint statistics of the trigger quadrature
//! `q1(theta)` and the verified quadrature are Gaussian, so the conditional
//! second moment and the acceptance probability of the window `|q1| < Q`
//! have explicit forms in `erf`. Averaging over the Gaussian phase
//! distribution leaves two-dimensional integrals
//!
//! ```text
//! V_out = (1/P) *  Int [ B erf(Q/sqrt(2A))
//!                        - sqrt(2/pi) C^2 Q A^(-3/2) exp(-Q^2/2A) ]
//!                      * erf(Q/sqrt(2A))^(N-1)  Phi(phi1) Phi(phi2)
//! P     =          Int   erf(Q/sqrt(2A))^N      Phi(phi1) Phi(phi2)
//! ```
//!
//! where `N` is the number of consecutive triggers required (`N = 1` is the
//! plain protocol, `N > 1` the channel-probing variant in the limit of
//! perfectly correlated phases across the trigger window). The substitution
//! `phi_j = sqrt(2) sigma t_j` absorbs the Gaussian weight exactly, so a
//! tensor Gauss-Hermite rule applies; node counts are doubled until the
//! results stop moving, and failure to settle is reported as an error
//! rather than silently returned.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::covariance::{
    apply_detection_efficiency, beamsplitter_transform, conditional_moments, rotate_covariance,
    CovarianceError, ModeCovariance, SqueezedModeParams,
};
use crate::quadrature::{QuadratureError, QuadratureRule};
use crate::special::erf;

// Node/weight construction costs more than a whole tensor pass at the
// default sizes, and sweeps request the same handful of rules thousands of
// times over.
fn hermite_rule(n: usize) -> Result<Arc<QuadratureRule>, QuadratureError> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return Ok(rule.clone());
    }
    let rule = Arc::new(QuadratureRule::gauss_hermite(n)?);
    cache.lock().unwrap().insert(n, rule.clone());
    Ok(rule)
}

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("sigma must be non-negative, got {sigma}")]
    InvalidSigma { sigma: f64 },
    #[error("trigger threshold must be positive, got {q}")]
    InvalidThreshold { q: f64 },
    #[error("channel-probing depth must be at least 1")]
    InvalidQcpDepth,
    #[error("operation requires n_qcp = 1, got {n_qcp}; use the channel-probing variant")]
    ExpectedSingleTrigger { n_qcp: u32 },
    #[error(
        "quadrature did not converge below {tol:e} within {max_nodes} nodes per dimension \
         (last doubling moved v_out by {delta_v:e} and p_success by {delta_p:e})"
    )]
    NonConvergence {
        max_nodes: usize,
        tol: f64,
        delta_v: f64,
        delta_p: f64,
    },
}

/// Full configuration of one protocol evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Squeezed/anti-squeezed variances shared by both input copies.
    pub state: SqueezedModeParams,
    /// Standard deviation of the phase noise, radians.
    pub sigma: f64,
    /// Trigger quadrature angle, radians (0 = initially squeezed quadrature).
    pub theta: f64,
    /// Half-width `Q` of the acceptance window `|q1| < Q`, shot-noise units.
    pub q_threshold: f64,
    /// Detection efficiency in `(0, 1]`. Variances measured by homodyning
    /// already include it, hence the default of 1 in the front ends.
    pub eta: f64,
    /// Number of consecutive triggers required (channel probing depth).
    pub n_qcp: u32,
}

impl ProtocolParams {
    pub fn new(
        state: SqueezedModeParams,
        sigma: f64,
        theta: f64,
        q_threshold: f64,
        eta: f64,
        n_qcp: u32,
    ) -> Result<Self, AnalyticsError> {
        let params = Self {
            state,
            sigma,
            theta,
            q_threshold,
            eta,
            n_qcp,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if !(self.sigma >= 0.0) {
            return Err(AnalyticsError::InvalidSigma { sigma: self.sigma });
        }
        if !(self.q_threshold > 0.0) {
            return Err(AnalyticsError::InvalidThreshold {
                q: self.q_threshold,
            });
        }
        if self.n_qcp == 0 {
            return Err(AnalyticsError::InvalidQcpDepth);
        }
        // Right-range eta and state invariants are checked by the loss map.
        self.effective_state().map(|_| ())
    }

    /// Input variances after the detection-efficiency substitution
    /// `V -> eta V + 1 - eta`. Applied once, before any moment computation.
    pub fn effective_state(&self) -> Result<SqueezedModeParams, AnalyticsError> {
        let cov = ModeCovariance::from_params(&self.state);
        let lossy = apply_detection_efficiency(&cov, self.eta)?;
        // The loss map cannot break the Heisenberg bound.
        Ok(SqueezedModeParams::new(lossy.c_xx, lossy.c_pp)?)
    }
}

/// Node-count policy of the adaptive tensor quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    /// Nodes per dimension of the first evaluation.
    pub base_nodes: usize,
    /// Hard cap; exceeding it is a [`AnalyticsError::NonConvergence`].
    pub max_nodes: usize,
    /// Absolute agreement required between consecutive doublings, for both
    /// the variance and the success probability.
    pub tol: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            base_nodes: 64,
            max_nodes: 1024,
            tol: 1e-8,
        }
    }
}

/// Bundle of the closed-form predictions at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticResult {
    /// Variance of the verified quadrature of accepted states.
    pub v_out: f64,
    /// Success probability of the conditioning.
    pub p_success: f64,
    /// Variance of the phase-diffused input, for comparison.
    pub v_in: f64,
}

/// Variance of the amplitude quadrature of the phase-diffused state before
/// any conditioning: the phase average of `V_x cos^2 + V_p sin^2`, which
/// evaluates in closed form to `(V_x+V_p)/2 + (V_x-V_p)/2 exp(-2 sigma^2)`.
/// The quadrature route is kept alongside as [`v_in_quadrature`] and the
/// two are held to 1e-10 of each other by the test suite.
pub fn v_in(params: &ProtocolParams) -> Result<f64, AnalyticsError> {
    params.validate()?;
    let state = params.effective_state()?;
    let (v_x, v_p) = (state.v_x(), state.v_p());
    Ok(0.5 * (v_x + v_p) + 0.5 * (v_x - v_p) * (-2.0 * params.sigma * params.sigma).exp())
}

/// Direct Gauss-Hermite evaluation of the input-variance integral.
pub fn v_in_quadrature(params: &ProtocolParams, nodes: usize) -> Result<f64, AnalyticsError> {
    params.validate()?;
    let state = params.effective_state()?;
    let (v_x, v_p) = (state.v_x(), state.v_p());
    if params.sigma == 0.0 {
        return Ok(v_x);
    }
    let rule = hermite_rule(nodes)?;
    let scale = std::f64::consts::SQRT_2 * params.sigma;
    let total = rule.integrate(|t| {
        let (s, c) = (scale * t).sin_cos();
        v_x * c * c + v_p * s * s
    });
    Ok(total / std::f64::consts::PI.sqrt())
}

/// Distilled variance and success probability of the single-trigger
/// protocol. Requires `n_qcp = 1`; [`v_out_qcp`] handles deeper triggers
/// and reduces to this bit-for-bit at depth 1.
pub fn v_out(params: &ProtocolParams) -> Result<AnalyticResult, AnalyticsError> {
    if params.n_qcp != 1 {
        return Err(AnalyticsError::ExpectedSingleTrigger {
            n_qcp: params.n_qcp,
        });
    }
    v_out_qcp(params)
}

/// Distilled variance and success probability with `n_qcp` consecutive
/// triggers under perfectly correlated phases across the trigger window.
pub fn v_out_qcp(params: &ProtocolParams) -> Result<AnalyticResult, AnalyticsError> {
    v_out_qcp_with(params, &QuadratureSettings::default())
}

/// As [`v_out_qcp`] with an explicit quadrature policy.
pub fn v_out_qcp_with(
    params: &ProtocolParams,
    settings: &QuadratureSettings,
) -> Result<AnalyticResult, AnalyticsError> {
    let (v, p) = conditioned_variance(params, 0.0, settings)?;
    Ok(AnalyticResult {
        v_out: v,
        p_success: p,
        v_in: v_in(params)?,
    })
}

/// Variance of an arbitrary verified quadrature `q2(psi)` of accepted
/// states. `psi = 0` reproduces [`v_out`] exactly; `psi = pi/2` gives the
/// conjugate-quadrature variance needed for the uncertainty product.
pub fn v_out_general(params: &ProtocolParams, psi: f64) -> Result<f64, AnalyticsError> {
    v_out_general_with(params, psi, &QuadratureSettings::default())
}

/// As [`v_out_general`] with an explicit quadrature policy.
pub fn v_out_general_with(
    params: &ProtocolParams,
    psi: f64,
    settings: &QuadratureSettings,
) -> Result<f64, AnalyticsError> {
    Ok(conditioned_variance(params, psi, settings)?.0)
}

/// Uncertainty product `U = sqrt(V_x,out * V_p,out)` of the distilled
/// state; `1/U` is its purity.
pub fn u_product(params: &ProtocolParams) -> Result<f64, AnalyticsError> {
    let vx_out = v_out_general(params, 0.0)?;
    let vp_out = v_out_general(params, std::f64::consts::FRAC_PI_2)?;
    Ok((vx_out * vp_out).sqrt())
}

fn conditioned_variance(
    params: &ProtocolParams,
    psi: f64,
    settings: &QuadratureSettings,
) -> Result<(f64, f64), AnalyticsError> {
    params.validate()?;
    let state = params.effective_state()?;
    if params.sigma == 0.0 {
        // Delta-distributed phases: a single integrand evaluation is exact.
        let base = ModeCovariance::from_params(&state);
        let (num, den) = integrand(&base, &base, params, psi);
        return Ok((num / den, den));
    }

    let mut nodes = settings.base_nodes;
    let (mut v_prev, mut p_prev) = tensor_pass(params, &state, psi, nodes)?;
    loop {
        let next = nodes * 2;
        if next > settings.max_nodes {
            return Err(AnalyticsError::NonConvergence {
                max_nodes: settings.max_nodes,
                tol: settings.tol,
                delta_v: f64::NAN,
                delta_p: f64::NAN,
            });
        }
        let (v, p) = tensor_pass(params, &state, psi, next)?;
        let (delta_v, delta_p) = ((v - v_prev).abs(), (p - p_prev).abs());
        if delta_v <= settings.tol && delta_p <= settings.tol {
            return Ok((v, p));
        }
        if next == settings.max_nodes {
            return Err(AnalyticsError::NonConvergence {
                max_nodes: settings.max_nodes,
                tol: settings.tol,
                delta_v,
                delta_p,
            });
        }
        nodes = next;
        v_prev = v;
        p_prev = p;
    }
}

fn tensor_pass(
    params: &ProtocolParams,
    state: &SqueezedModeParams,
    psi: f64,
    nodes: usize,
) -> Result<(f64, f64), AnalyticsError> {
    let rule = hermite_rule(nodes)?;
    let scale = std::f64::consts::SQRT_2 * params.sigma;
    let base = ModeCovariance::from_params(state);
    let rotated: Vec<ModeCovariance> = rule
        .nodes()
        .iter()
        .map(|&t| rotate_covariance(&base, scale * t))
        .collect();

    let mut num = 0.0;
    let mut den = 0.0;
    for (i, wi) in rule.weights().iter().enumerate() {
        for (j, wj) in rule.weights().iter().enumerate() {
            let (n, d) = integrand(&rotated[i], &rotated[j], params, psi);
            let w = wi * wj;
            num += w * n;
            den += w * d;
        }
    }
    let norm = std::f64::consts::PI; // (sqrt(pi))^2 from the two Gaussian weights
    Ok((num / den, den / norm))
}

// Integrand of the conditioned second moment (numerator) and of the
// success probability (denominator) at fixed phase shifts, built on the
// general covariance path.
fn integrand(
    mode1: &ModeCovariance,
    mode2: &ModeCovariance,
    params: &ProtocolParams,
    psi: f64,
) -> (f64, f64) {
    let tm = beamsplitter_transform(mode1, mode2);
    let m = conditional_moments(&tm, params.theta, psi);
    let q = params.q_threshold;
    let e = erf(q / (2.0 * m.a).sqrt());
    let bracket = m.b * e
        - (2.0 / std::f64::consts::PI).sqrt()
            * m.c
            * m.c
            * q
            * m.a.powf(-1.5)
            * (-q * q / (2.0 * m.a)).exp();
    let gate = e.powi(params.n_qcp as i32 - 1);
    (bracket * gate, e * gate)
}

/// Fock-basis coefficients `P_0 .. P_n_max` of the POVM element describing
/// threshold conditioning with a phase-randomized trigger quadrature:
///
/// ```text
/// P_n = (sqrt(pi) 2^n n!)^(-1) * Int_{-Q}^{Q} H_n(x)^2 exp(-x^2) dx
/// ```
///
/// evaluated through orthonormal Hermite functions (no raw factorials, so
/// no overflow at large `n`). Note the Gaussian weight `exp(-x^2)` puts
/// `Q` in quadrature units where the vacuum variance is 1/2, i.e. a factor
/// `sqrt(2)` off the shot-noise units used elsewhere in this crate; the
/// coefficients are reported for the threshold exactly as given.
pub fn povm_coefficients(q_threshold: f64, n_max: usize) -> Result<Vec<f64>, AnalyticsError> {
    if !(q_threshold > 0.0) {
        return Err(AnalyticsError::InvalidThreshold { q: q_threshold });
    }
    let mut nodes = 128;
    let mut prev = povm_pass(q_threshold, n_max, nodes)?;
    loop {
        nodes *= 2;
        let cur = povm_pass(q_threshold, n_max, nodes)?;
        let delta = prev
            .iter()
            .zip(&cur)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if delta <= 1e-12 {
            return Ok(cur.into_iter().map(|p| p.min(1.0)).collect());
        }
        if nodes >= 4096 {
            return Err(AnalyticsError::NonConvergence {
                max_nodes: 4096,
                tol: 1e-12,
                delta_v: delta,
                delta_p: 0.0,
            });
        }
        prev = cur;
    }
}

fn povm_pass(q: f64, n_max: usize, nodes: usize) -> Result<Vec<f64>, AnalyticsError> {
    let rule = QuadratureRule::gauss_legendre(nodes)?;
    let mut coeffs = vec![0.0; n_max + 1];
    let norm = std::f64::consts::PI.powf(-0.25);
    for (&u, &w) in rule.nodes().iter().zip(rule.weights()) {
        let x = q * u;
        // Orthonormal Hermite functions psi_n(x); psi_n^2 integrates to P_n.
        let mut prev = 0.0;
        let mut cur = norm * (-x * x / 2.0).exp();
        coeffs[0] += w * q * cur * cur;
        for k in 0..n_max {
            let next = x * (2.0 / (k as f64 + 1.0)).sqrt() * cur
                - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
            coeffs[k + 1] += w * q * cur * cur;
        }
    }
    Ok(coeffs)
}
