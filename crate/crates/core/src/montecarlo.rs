//! Stochastic simulation of the optical protocol.
//!
//! Independent of the closed forms in [`crate::analytics`]: phases are
//! sampled from the configured noise model, homodyne outcomes are drawn
//! from the exact per-phase joint Gaussian, and the threshold conditioning
//! (including the multi-trigger channel-probing rule) is applied to the
//! resulting stream. Estimates therefore validate the quadrature results
//! and extend them to regimes the closed forms do not cover, such as
//! finite phase correlation or a randomized trigger angle.
//!
//! Runs are sharded: each shard draws from its own generator streams, so
//! the aggregate is a deterministic function of `(seed, shards)` no matter
//! how the shards are scheduled.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::analytics::{AnalyticsError, ProtocolParams};
use crate::covariance::{
    beamsplitter_transform, conditional_moments, rotate_covariance, ModeCovariance,
};
use crate::phase_noise::{
    sample_bandlimited_stream, sample_iid_stream, PhaseDistribution, PhaseNoiseError,
    PhaseProcessConfig,
};
use crate::rng::stream_rng;

// Generator streams per shard: phase 1, phase 2, quadrature draws,
// trigger angles. Bootstrap resampling gets a reserved stream far away.
const STREAMS_PER_SHARD: u64 = 4;
const BOOTSTRAP_STREAM: u64 = u64::MAX;
const BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum MonteCarloError {
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    PhaseNoise(#[from] PhaseNoiseError),
    #[error("n_trials must be at least 1")]
    NoTrials,
    #[error("shard count must be at least 1")]
    NoShards,
    #[error(
        "band-limited phase config disagrees with the simulation: {field} is {config_value} \
         in the process config but {simulation_value} in the simulation config"
    )]
    PhaseConfigMismatch {
        field: &'static str,
        config_value: f64,
        simulation_value: f64,
    },
    #[error("no trials were accepted; widen the trigger window or increase n_trials")]
    NoAcceptedTrials,
    #[error("only {n_accepted} trial(s) accepted; at least 2 are needed for a variance estimate")]
    InsufficientAccepted { n_accepted: u64 },
}

/// Phase-noise model driving the simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseModel {
    /// Fresh independent phases on every sample.
    Iid,
    /// Band-limited correlated phase processes (one per channel). The
    /// process `sigma` and `seed` must equal the simulation's own; the
    /// remaining fields set the band and sampling rate.
    Bandlimited(PhaseProcessConfig),
    /// Phases held constant across each window of `n_qcp` consecutive
    /// samples, with independent draws between windows; windows are
    /// disjoint. This is the perfectly-correlated limit the closed-form
    /// channel-probing expressions assume.
    HeldIid,
}

/// Trigger quadrature angle policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerMode {
    /// Measure `q1(theta)` with the configured fixed angle.
    FixedAngle,
    /// Phase-randomized homodyning: a fresh uniform angle per sample.
    RandomizedAngle,
}

/// Full Monte Carlo run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub params: ProtocolParams,
    /// Number of candidate trigger windows evaluated.
    pub n_trials: u64,
    pub phase_model: PhaseModel,
    pub trigger_mode: TriggerMode,
    /// Verified quadrature angle `psi` (0 = amplitude quadrature; `pi/2`
    /// estimates the conjugate variance for the uncertainty product).
    pub verify_angle: f64,
    pub seed: u64,
    /// Number of independent shards; the aggregate is deterministic for a
    /// fixed `(seed, shards)` pair and shards may run in parallel.
    pub shards: u32,
}

impl SimulationConfig {
    /// Single-shard fixed-angle configuration with `psi = 0`.
    pub fn new(params: ProtocolParams, n_trials: u64, seed: u64) -> Self {
        Self {
            params,
            n_trials,
            phase_model: PhaseModel::Iid,
            trigger_mode: TriggerMode::FixedAngle,
            verify_angle: 0.0,
            seed,
            shards: 1,
        }
    }

    fn validate(&self) -> Result<(), MonteCarloError> {
        self.params.validate()?;
        if self.n_trials == 0 {
            return Err(MonteCarloError::NoTrials);
        }
        if self.shards == 0 {
            return Err(MonteCarloError::NoShards);
        }
        if let PhaseModel::Bandlimited(cfg) = &self.phase_model {
            cfg.validate()?;
            if cfg.sigma != self.params.sigma {
                return Err(MonteCarloError::PhaseConfigMismatch {
                    field: "sigma",
                    config_value: cfg.sigma,
                    simulation_value: self.params.sigma,
                });
            }
            if cfg.seed != self.seed {
                return Err(MonteCarloError::PhaseConfigMismatch {
                    field: "seed",
                    config_value: cfg.seed as f64,
                    simulation_value: self.seed as f64,
                });
            }
        }
        Ok(())
    }
}

/// Result of a Monte Carlo run or of offline postprocessing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistillationEstimate {
    /// Sample variance of the verified quadrature over accepted trials.
    pub v_out_hat: f64,
    /// Acceptance fraction.
    pub p_hat: f64,
    pub n_accepted: u64,
    /// Bootstrap standard error of `v_out_hat` (200 resamples).
    pub se_v: f64,
    /// Binomial standard error of `p_hat`.
    pub se_p: f64,
}

/// One synchronized pair of homodyne outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub q1: f64,
    pub q2: f64,
    pub accepted: bool,
}

/// Draws one protocol trial at fixed phase shifts: `(q1, q2)` from the
/// joint Gaussian of the trigger quadrature `q1(theta)` and the verified
/// amplitude quadrature `x2`, accepted iff `|q1| < Q` (strict).
///
/// Expects valid `params` (this is a total function on valid input).
pub fn simulate_trial(
    params: &ProtocolParams,
    phi1: f64,
    phi2: f64,
    rng: &mut impl Rng,
) -> TrialOutcome {
    let state = params.effective_state().expect("valid protocol parameters");
    let base = ModeCovariance::from_params(&state);
    draw_outcome(&base, params, phi1, phi2, params.theta, 0.0, rng)
}

fn draw_outcome(
    base: &ModeCovariance,
    params: &ProtocolParams,
    phi1: f64,
    phi2: f64,
    theta: f64,
    psi: f64,
    rng: &mut impl Rng,
) -> TrialOutcome {
    let tm = beamsplitter_transform(
        &rotate_covariance(base, phi1),
        &rotate_covariance(base, phi2),
    );
    let m = conditional_moments(&tm, theta, psi);
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let q1 = m.a.sqrt() * z1;
    // Regression of q2 on q1 plus the conditional remainder.
    let q2 = (m.c / m.a) * q1 + (m.det().max(0.0) / m.a).sqrt() * z2;
    TrialOutcome {
        q1,
        q2,
        accepted: q1.abs() < params.q_threshold,
    }
}

/// Runs the single-trigger protocol and aggregates a
/// [`DistillationEstimate`] over all shards.
///
/// Zero accepted trials is reported as an explicit
/// [`MonteCarloError::NoAcceptedTrials`], never as a silent zero.
pub fn run_protocol(config: &SimulationConfig) -> Result<DistillationEstimate, MonteCarloError> {
    run_windowed(config, 1)
}

/// Runs the channel-probing protocol: a candidate at sample `k` is
/// accepted iff `|q1| < Q` there and at the `n_qcp - 1` preceding samples.
/// For the sliding phase models every sample index past the warm-up is a
/// candidate; for [`PhaseModel::HeldIid`] the candidates are the final
/// samples of the disjoint constant-phase windows.
pub fn run_qcp(config: &SimulationConfig) -> Result<DistillationEstimate, MonteCarloError> {
    run_windowed(config, config.params.n_qcp)
}

/// Generates the raw synchronized `(q1, q2)` stream the protocol runs
/// consume, shards concatenated in order. Postprocessing this stream with
/// the sliding window rule reproduces [`run_protocol`]/[`run_qcp`]
/// estimates exactly (single shard; shard boundaries are not marked in
/// the flat stream).
pub fn simulate_series(config: &SimulationConfig) -> Result<Vec<(f64, f64)>, MonteCarloError> {
    config.validate()?;
    let window = config.params.n_qcp;
    let shards = shard_sizes(config.n_trials, config.shards);
    let streams: Vec<Vec<(f64, f64)>> = shards
        .par_iter()
        .enumerate()
        .map(|(shard, &windows)| shard_stream(config, shard as u64, windows, window))
        .collect::<Result<_, _>>()?;
    Ok(streams.concat())
}

fn run_windowed(
    config: &SimulationConfig,
    window: u32,
) -> Result<DistillationEstimate, MonteCarloError> {
    config.validate()?;
    let shards = shard_sizes(config.n_trials, config.shards);
    let outputs: Vec<(Vec<f64>, u64)> = shards
        .par_iter()
        .enumerate()
        .map(
            |(shard, &windows)| -> Result<(Vec<f64>, u64), MonteCarloError> {
                let stream = shard_stream(config, shard as u64, windows, window)?;
                let accepted = match config.phase_model {
                    PhaseModel::HeldIid => {
                        accept_blockwise(&stream, config.params.q_threshold, window)
                    }
                    _ => accept_sliding(&stream, config.params.q_threshold, window),
                };
                Ok((accepted, windows))
            },
        )
        .collect::<Result<_, _>>()?;

    let mut accepted = Vec::new();
    let mut candidates = 0u64;
    for (values, windows) in outputs {
        accepted.extend(values);
        candidates += windows;
    }
    estimate_from_samples(&accepted, candidates, config.seed)
}

// Samples needed in one shard for `windows` candidate triggers.
fn shard_samples(phase_model: &PhaseModel, windows: u64, window: u32) -> u64 {
    match phase_model {
        // Disjoint constant-phase blocks.
        PhaseModel::HeldIid => windows * window as u64,
        // Sliding rule: one warm-up prefix, then every index is a candidate.
        _ => windows + window as u64 - 1,
    }
}

fn shard_sizes(n_trials: u64, shards: u32) -> Vec<u64> {
    let shards = shards as u64;
    let base = n_trials / shards;
    let extra = n_trials % shards;
    (0..shards).map(|s| base + u64::from(s < extra)).collect()
}

fn shard_stream(
    config: &SimulationConfig,
    shard: u64,
    windows: u64,
    window: u32,
) -> Result<Vec<(f64, f64)>, MonteCarloError> {
    if windows == 0 {
        return Ok(Vec::new());
    }
    let n = shard_samples(&config.phase_model, windows, window) as usize;
    let params = &config.params;
    let state = params.effective_state()?;
    let base_cov = ModeCovariance::from_params(&state);
    let stream_base = shard * STREAMS_PER_SHARD;

    let (phi1, phi2) = sample_phases(config, n, window, stream_base)?;
    let mut quad_rng = stream_rng(config.seed, stream_base + 2);
    let mut angle_rng = stream_rng(config.seed, stream_base + 3);

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let theta = match config.trigger_mode {
            TriggerMode::FixedAngle => params.theta,
            TriggerMode::RandomizedAngle => angle_rng.random_range(0.0..2.0 * std::f64::consts::PI),
        };
        let outcome = draw_outcome(
            &base_cov,
            params,
            phi1[i],
            phi2[i],
            theta,
            config.verify_angle,
            &mut quad_rng,
        );
        out.push((outcome.q1, outcome.q2));
    }
    Ok(out)
}

fn sample_phases(
    config: &SimulationConfig,
    n: usize,
    window: u32,
    stream_base: u64,
) -> Result<(Vec<f64>, Vec<f64>), MonteCarloError> {
    let sigma = config.params.sigma;
    match &config.phase_model {
        PhaseModel::Iid => {
            let dist = PhaseDistribution::new(sigma)?;
            Ok((
                sample_iid_stream(&dist, n, config.seed, stream_base),
                sample_iid_stream(&dist, n, config.seed, stream_base + 1),
            ))
        }
        PhaseModel::Bandlimited(cfg) => Ok((
            sample_bandlimited_stream(cfg, n, stream_base)?,
            sample_bandlimited_stream(cfg, n, stream_base + 1)?,
        )),
        PhaseModel::HeldIid => {
            let dist = PhaseDistribution::new(sigma)?;
            let blocks = n.div_ceil(window as usize);
            let hold = |draws: Vec<f64>| -> Vec<f64> {
                draws
                    .into_iter()
                    .flat_map(|phi| std::iter::repeat_n(phi, window as usize))
                    .take(n)
                    .collect()
            };
            Ok((
                hold(sample_iid_stream(&dist, blocks, config.seed, stream_base)),
                hold(sample_iid_stream(
                    &dist,
                    blocks,
                    config.seed,
                    stream_base + 1,
                )),
            ))
        }
    }
}

// Sliding acceptance: candidate at every index past the first window - 1
// samples; accepted iff the window of `window` consecutive |q1| < q all pass.
fn accept_sliding(stream: &[(f64, f64)], q: f64, window: u32) -> Vec<f64> {
    let window = window as usize;
    let mut run = 0usize;
    let mut accepted = Vec::new();
    for (i, &(q1, q2)) in stream.iter().enumerate() {
        if q1.abs() < q {
            run += 1;
        } else {
            run = 0;
        }
        if i + 1 >= window && run >= window {
            accepted.push(q2);
        }
    }
    accepted
}

// Block acceptance for the held-phase model: disjoint windows, trigger
// sample is the last of each block.
fn accept_blockwise(stream: &[(f64, f64)], q: f64, window: u32) -> Vec<f64> {
    stream
        .chunks_exact(window as usize)
        .filter(|block| block.iter().all(|&(q1, _)| q1.abs() < q))
        .map(|block| block[window as usize - 1].1)
        .collect()
}

/// Builds the estimate over accepted verified-quadrature samples: sample
/// variance, acceptance fraction, bootstrap standard error of the variance
/// and binomial standard error of the fraction. Shared verbatim with the
/// offline time-series postprocessing.
pub(crate) fn estimate_from_samples(
    accepted: &[f64],
    n_candidates: u64,
    seed: u64,
) -> Result<DistillationEstimate, MonteCarloError> {
    let n_accepted = accepted.len() as u64;
    if n_accepted == 0 {
        return Err(MonteCarloError::NoAcceptedTrials);
    }
    if n_accepted < 2 {
        return Err(MonteCarloError::InsufficientAccepted { n_accepted });
    }

    let v_out_hat = sample_variance(accepted);
    let p_hat = n_accepted as f64 / n_candidates as f64;
    let se_p = (p_hat * (1.0 - p_hat) / n_candidates as f64).sqrt();

    // Nonparametric bootstrap: accepted samples are a non-Gaussian mixture
    // across phase draws, so the Gaussian 2V^2/(n-1) formula is biased.
    let mut rng = stream_rng(seed, BOOTSTRAP_STREAM);
    let n = accepted.len();
    let mut resampled = [0.0; BOOTSTRAP_RESAMPLES];
    for slot in resampled.iter_mut() {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let x = accepted[rng.random_range(0..n)];
            sum += x;
            sumsq += x * x;
        }
        *slot = (sumsq - sum * sum / n as f64) / (n as f64 - 1.0);
    }
    let se_v = sample_variance(&resampled).sqrt();

    Ok(DistillationEstimate {
        v_out_hat,
        p_hat,
        n_accepted,
        se_v,
        se_p,
    })
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::SqueezedModeParams;
    use crate::special::erf;

    const V_X: f64 = 0.32;
    const V_P: f64 = 8.5;

    fn params(sigma: f64, theta: f64, q: f64, n_qcp: u32) -> ProtocolParams {
        ProtocolParams::new(
            SqueezedModeParams::new(V_X, V_P).unwrap(),
            sigma,
            theta,
            q,
            1.0,
            n_qcp,
        )
        .unwrap()
    }

    #[test]
    fn acceptance_rate_matches_erf_without_noise() {
        // sigma = 0, theta = 0, Q = 1: acceptance -> erf(1/sqrt(0.64)).
        let p = params(0.0, 0.0, 1.0, 1);
        let config = SimulationConfig::new(p, 1_000_000, 11);
        let est = run_protocol(&config).unwrap();
        let expected = erf(1.0 / (2.0 * V_X).sqrt());
        assert!(
            (est.p_hat - expected).abs() < 3.0 * est.se_p,
            "p_hat {} vs erf {}",
            est.p_hat,
            expected
        );
    }

    #[test]
    fn huge_window_accepts_everything() {
        let p = params(0.28, 0.0, 1e6, 1);
        let config = SimulationConfig::new(p, 5_000, 3);
        let est = run_protocol(&config).unwrap();
        assert_eq!(est.n_accepted, 5_000);
        assert_eq!(est.p_hat, 1.0);
    }

    #[test]
    fn uncorrelated_trigger_and_verify_without_noise() {
        // For identical un-rotated states C = 0: empirical correlation -> 0.
        let p = params(0.0, 0.0, 1.0, 1);
        let mut rng = crate::rng::stream_rng(5, 0);
        let n = 100_000;
        let mut sum_q1q2 = 0.0;
        for _ in 0..n {
            let t = simulate_trial(&p, 0.0, 0.0, &mut rng);
            sum_q1q2 += t.q1 * t.q2;
        }
        let corr = sum_q1q2 / n as f64 / V_X; // both variances are V_x
        assert!(corr.abs() < 4.0 / (n as f64).sqrt() * 2.0, "corr = {corr}");
    }

    #[test]
    fn estimates_are_bit_identical_per_seed() {
        let p = params(0.28, 0.0, 1.0, 1);
        let config = SimulationConfig::new(p, 20_000, 77);
        assert_eq!(
            run_protocol(&config).unwrap(),
            run_protocol(&config).unwrap()
        );
        let mut other = config.clone();
        other.seed = 78;
        assert_ne!(
            run_protocol(&config).unwrap(),
            run_protocol(&other).unwrap()
        );
    }

    #[test]
    fn sharded_runs_are_deterministic() {
        let p = params(0.28, 0.0, 1.0, 1);
        let mut config = SimulationConfig::new(p, 30_000, 7);
        config.shards = 4;
        let a = run_protocol(&config).unwrap();
        let b = run_protocol(&config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn qcp_depth_one_equals_protocol() {
        let p = params(0.28, 0.0, 1.0, 1);
        let config = SimulationConfig::new(p, 50_000, 21);
        assert_eq!(run_protocol(&config).unwrap(), run_qcp(&config).unwrap());
    }

    #[test]
    fn zero_accepted_is_explicit() {
        // A tiny window at sigma = 0 on the anti-squeezed trigger: q1 has
        // variance 8.5, so |q1| < 1e-6 essentially never fires.
        let p = params(0.0, std::f64::consts::FRAC_PI_2, 1e-6, 1);
        let config = SimulationConfig::new(p, 2_000, 9);
        assert!(matches!(
            run_protocol(&config),
            Err(MonteCarloError::NoAcceptedTrials)
        ));
    }

    #[test]
    fn invalid_configs_rejected() {
        let p = params(0.28, 0.0, 1.0, 1);
        let mut config = SimulationConfig::new(p, 0, 1);
        assert!(matches!(
            run_protocol(&config),
            Err(MonteCarloError::NoTrials)
        ));
        config.n_trials = 10;
        config.shards = 0;
        assert!(matches!(
            run_protocol(&config),
            Err(MonteCarloError::NoShards)
        ));
    }

    #[test]
    fn bandlimited_config_must_agree() {
        let p = params(0.28, 0.0, 1.0, 1);
        let mut config = SimulationConfig::new(p, 1_000, 5);
        config.phase_model = PhaseModel::Bandlimited(PhaseProcessConfig::reference(0.17, 5));
        assert!(matches!(
            run_protocol(&config),
            Err(MonteCarloError::PhaseConfigMismatch { field: "sigma", .. })
        ));
        config.phase_model = PhaseModel::Bandlimited(PhaseProcessConfig::reference(0.28, 6));
        assert!(matches!(
            run_protocol(&config),
            Err(MonteCarloError::PhaseConfigMismatch { field: "seed", .. })
        ));
    }

    #[test]
    fn series_postprocessed_like_protocol() {
        let p = params(0.28, 0.0, 1.0, 1);
        let config = SimulationConfig::new(p, 10_000, 13);
        let series = simulate_series(&config).unwrap();
        assert_eq!(series.len(), 10_000);
        let accepted = accept_sliding(&series, 1.0, 1);
        let direct = run_protocol(&config).unwrap();
        let replayed = estimate_from_samples(&accepted, 10_000, config.seed).unwrap();
        assert_eq!(direct, replayed);
    }

    #[test]
    fn sliding_window_subset_property() {
        let stream: Vec<(f64, f64)> = [0.1, 2.0, 0.3, 0.2, 0.4, 5.0, 0.1, 0.2]
            .iter()
            .map(|&q| (q, q))
            .collect();
        let one = accept_sliding(&stream, 1.0, 1);
        let two = accept_sliding(&stream, 1.0, 2);
        assert_eq!(one.len(), 6);
        assert_eq!(two.len(), 3); // indices 3, 4, 7
        for v in &two {
            assert!(one.contains(v));
        }
    }
}
