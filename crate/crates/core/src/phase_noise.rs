//! Models of the phase-diffusion channel.
//!
//! Each copy of the squeezed state picks up a random phase `phi` drawn from
//! a zero-mean Gaussian of standard deviation `sigma`. Phases are either
//! i.i.d. between protocol runs or, mimicking the piezo drive of the
//! optical experiment, a band-limited process obtained by FIR band-pass
//! filtering of white Gaussian noise (1-5 kHz pass band sampled at
//! 100 kHz in the reference configuration). Slow in-band dynamics make
//! subsequent samples strongly correlated, which is what the multi-trigger
//! channel-probing protocol exploits.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::rng::stream_rng;

/// Number of taps of the band-pass FIR filter. Also used as the warm-up
/// length discarded before the output is considered stationary. Odd, so
/// the symmetric design has exactly linear phase.
pub const FIR_TAPS: usize = 257;

#[derive(Debug, Error, PartialEq)]
pub enum PhaseNoiseError {
    #[error("sigma must be non-negative, got {sigma}")]
    NegativeSigma { sigma: f64 },
    #[error("sigma = 0 denotes the degenerate (noiseless) distribution; it has no density")]
    DegenerateDistribution,
    #[error(
        "invalid band: need 0 < band_low < band_high < sample_rate/2, \
         got [{band_low}, {band_high}] Hz at {sample_rate} Hz"
    )]
    InvalidBand {
        band_low: f64,
        band_high: f64,
        sample_rate: f64,
    },
}

/// Zero-mean Gaussian distribution of the random phase, `sigma` in radians.
/// `sigma = 0` denotes the noiseless delta distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDistribution {
    sigma: f64,
}

impl PhaseDistribution {
    pub fn new(sigma: f64) -> Result<Self, PhaseNoiseError> {
        if !(sigma >= 0.0) {
            return Err(PhaseNoiseError::NegativeSigma { sigma });
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Probability density `exp(-phi^2 / 2 sigma^2) / sqrt(2 pi sigma^2)`.
    ///
    /// The degenerate `sigma = 0` case is rejected; callers must branch to
    /// the noiseless path instead of integrating against a delta.
    pub fn density(&self, phi: f64) -> Result<f64, PhaseNoiseError> {
        if self.sigma == 0.0 {
            return Err(PhaseNoiseError::DegenerateDistribution);
        }
        let var = self.sigma * self.sigma;
        Ok((-phi * phi / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt())
    }
}

/// Configuration of the band-limited phase process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseProcessConfig {
    /// Sampling rate in Hz.
    pub sample_rate: f64,
    /// Lower edge of the pass band in Hz.
    pub band_low: f64,
    /// Upper edge of the pass band in Hz.
    pub band_high: f64,
    /// Target stationary standard deviation in radians.
    pub sigma: f64,
    /// Seed of the white-noise source.
    pub seed: u64,
}

impl PhaseProcessConfig {
    /// The experiment's regime: 1-5 kHz noise band sampled at 100 kHz.
    pub fn reference(sigma: f64, seed: u64) -> Self {
        Self {
            sample_rate: 100_000.0,
            band_low: 1_000.0,
            band_high: 5_000.0,
            sigma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), PhaseNoiseError> {
        if !(self.sigma >= 0.0) {
            return Err(PhaseNoiseError::NegativeSigma { sigma: self.sigma });
        }
        if !(self.band_low > 0.0
            && self.band_low < self.band_high
            && self.band_high < self.sample_rate / 2.0)
        {
            return Err(PhaseNoiseError::InvalidBand {
                band_low: self.band_low,
                band_high: self.band_high,
                sample_rate: self.sample_rate,
            });
        }
        Ok(())
    }
}

/// `n` independent draws from `N(0, sigma^2)`, reproducible from the seed.
/// Stream index 0; see [`sample_iid_stream`] for concurrent samplers.
pub fn sample_iid(dist: &PhaseDistribution, n: usize, seed: u64) -> Vec<f64> {
    sample_iid_stream(dist, n, seed, 0)
}

/// As [`sample_iid`] but on an explicit generator stream. Distinct streams
/// of the same seed produce non-overlapping sequences.
pub fn sample_iid_stream(dist: &PhaseDistribution, n: usize, seed: u64, stream: u64) -> Vec<f64> {
    if dist.sigma() == 0.0 {
        return vec![0.0; n];
    }
    let mut rng = stream_rng(seed, stream);
    (0..n)
        .map(|_| dist.sigma() * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Band-limited Gaussian phase process: white noise filtered by a
/// linear-phase FIR band-pass ([`FIR_TAPS`] taps, Hamming window), rescaled
/// so the stationary standard deviation equals `config.sigma`. The first
/// [`FIR_TAPS`] filtered samples are discarded as warm-up.
pub fn sample_bandlimited(
    config: &PhaseProcessConfig,
    n: usize,
) -> Result<Vec<f64>, PhaseNoiseError> {
    sample_bandlimited_stream(config, n, 0)
}

/// As [`sample_bandlimited`] but on an explicit generator stream.
pub fn sample_bandlimited_stream(
    config: &PhaseProcessConfig,
    n: usize,
    stream: u64,
) -> Result<Vec<f64>, PhaseNoiseError> {
    config.validate()?;
    if config.sigma == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let taps = bandpass_taps(config.sample_rate, config.band_low, config.band_high);
    let gain: f64 = taps.iter().map(|h| h * h).sum::<f64>().sqrt();
    let scale = config.sigma / gain;

    // Enough white input for `n` outputs after the warm-up discard.
    let mut rng = stream_rng(config.seed, stream);
    let white: Vec<f64> = (0..n + 2 * FIR_TAPS - 1)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut out = Vec::with_capacity(n);
    for j in FIR_TAPS..FIR_TAPS + n {
        let window = &white[j..j + FIR_TAPS];
        let acc: f64 = taps.iter().rev().zip(window).map(|(h, w)| h * w).sum();
        out.push(scale * acc);
    }
    Ok(out)
}

/// Windowed-design band-pass taps (Hamming window, [`FIR_TAPS`] taps,
/// symmetric and therefore exactly linear phase). Band edges in Hz.
pub fn bandpass_taps(sample_rate: f64, band_low: f64, band_high: f64) -> Vec<f64> {
    let w_low = 2.0 * std::f64::consts::PI * band_low / sample_rate;
    let w_high = 2.0 * std::f64::consts::PI * band_high / sample_rate;
    let center = (FIR_TAPS - 1) as f64 / 2.0;
    (0..FIR_TAPS)
        .map(|k| {
            let m = k as f64 - center;
            let ideal = if m == 0.0 {
                (w_high - w_low) / std::f64::consts::PI
            } else {
                ((w_high * m).sin() - (w_low * m).sin()) / (std::f64::consts::PI * m)
            };
            let window =
                0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / (FIR_TAPS - 1) as f64).cos();
            ideal * window
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_at_origin() {
        let dist = PhaseDistribution::new(0.5).unwrap();
        let expected = 1.0 / (2.0 * std::f64::consts::PI * 0.25).sqrt(); // ~0.7979
        assert!((dist.density(0.0).unwrap() - expected).abs() < 1e-15);
        assert!((dist.density(0.0).unwrap() - 0.7978845608028654).abs() < 1e-13);
    }

    #[test]
    fn density_is_symmetric() {
        let dist = PhaseDistribution::new(0.28).unwrap();
        for &phi in &[0.01, 0.3, 1.7, 4.0] {
            assert_eq!(dist.density(phi).unwrap(), dist.density(-phi).unwrap());
        }
    }

    #[test]
    fn density_normalizes() {
        // Composite Simpson over [-8 sigma, 8 sigma].
        let dist = PhaseDistribution::new(0.4).unwrap();
        let (lo, hi) = (-8.0 * 0.4, 8.0 * 0.4);
        let n = 4000;
        let h = (hi - lo) / n as f64;
        let mut total = dist.density(lo).unwrap() + dist.density(hi).unwrap();
        for i in 1..n {
            let weight = if i % 2 == 0 { 2.0 } else { 4.0 };
            total += weight * dist.density(lo + i as f64 * h).unwrap();
        }
        total *= h / 3.0;
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn degenerate_density_rejected() {
        let dist = PhaseDistribution::new(0.0).unwrap();
        assert_eq!(
            dist.density(0.0),
            Err(PhaseNoiseError::DegenerateDistribution)
        );
        assert!(PhaseDistribution::new(-0.1).is_err());
    }

    #[test]
    fn iid_zero_sigma_yields_zeros() {
        let dist = PhaseDistribution::new(0.0).unwrap();
        assert!(sample_iid(&dist, 100, 3).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn iid_is_deterministic_per_seed_and_stream() {
        let dist = PhaseDistribution::new(0.28).unwrap();
        assert_eq!(sample_iid(&dist, 64, 42), sample_iid(&dist, 64, 42));
        assert_ne!(sample_iid(&dist, 64, 42), sample_iid(&dist, 64, 43));
        assert_ne!(
            sample_iid_stream(&dist, 64, 42, 0),
            sample_iid_stream(&dist, 64, 42, 1)
        );
    }

    #[test]
    fn bandlimited_zero_sigma_yields_zeros() {
        let config = PhaseProcessConfig::reference(0.0, 1);
        assert!(sample_bandlimited(&config, 500)
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn invalid_bands_rejected() {
        for (lo, hi, fs) in [(0.0, 5e3, 1e5), (5e3, 1e3, 1e5), (1e3, 6e4, 1e5)] {
            let config = PhaseProcessConfig {
                sample_rate: fs,
                band_low: lo,
                band_high: hi,
                sigma: 0.28,
                seed: 1,
            };
            assert!(matches!(
                sample_bandlimited(&config, 10),
                Err(PhaseNoiseError::InvalidBand { .. })
            ));
        }
    }

    #[test]
    fn taps_are_symmetric() {
        let taps = bandpass_taps(100_000.0, 1_000.0, 5_000.0);
        assert_eq!(taps.len(), FIR_TAPS);
        for i in 0..FIR_TAPS / 2 {
            assert!((taps[i] - taps[FIR_TAPS - 1 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn bandlimited_deterministic_and_stream_separated() {
        let config = PhaseProcessConfig::reference(0.28, 9);
        let a = sample_bandlimited(&config, 256).unwrap();
        let b = sample_bandlimited(&config, 256).unwrap();
        assert_eq!(a, b);
        let c = sample_bandlimited_stream(&config, 256, 1).unwrap();
        assert_ne!(a, c);
    }
}
