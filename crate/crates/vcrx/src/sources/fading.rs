//! Gaussian fading triples: both parties observe the same fading vector
//! through independent additive noise, and the eavesdropper sees either a
//! third noisy copy or an independent draw.

use ndarray::Array2;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::{EveMode, SampleBatch, Source, SourceError};

/// Converts a power in dBm to linear scale: 10^(p/10).
pub fn dbm_to_linear(p_dbm: f64) -> f64 {
    10f64.powf(p_dbm / 10.0)
}

/// Shared Gaussian fading with per-party additive noise.
///
/// Each scalar component is drawn as x = h + w1, y = h + w2 with
/// h ~ N(0, P), w_i ~ N(0, N_i), all independent across components and
/// rows. A correlated eavesdropper sees z = h + w3; an uncorrelated one
/// sees an independent N(0, P) vector of the same width.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingConfig {
    pub p_dbm: f64,
    pub n1_dbm: f64,
    pub n2_dbm: f64,
    pub n3_dbm: f64,
    pub dim: usize,
    pub eve: EveMode,
}

impl Default for FadingConfig {
    fn default() -> Self {
        Self {
            p_dbm: 0.0,
            n1_dbm: -20.0,
            n2_dbm: -20.0,
            n3_dbm: 0.0,
            dim: 8,
            eve: EveMode::Absent,
        }
    }
}

impl FadingConfig {
    pub fn validate(&self) -> Result<(), SourceError> {
        if self.dim == 0 {
            return Err(SourceError::BadConfig("fading dim must be positive".into()));
        }
        Ok(())
    }
}

/// Exact mutual information I(X_i; Y_i) in bits for one scalar component
/// of the fading source: -0.5 * log2(1 - rho^2) with
/// rho = P / sqrt((P + N1)(P + N2)).
pub fn fading_mi_bits_per_scalar(cfg: &FadingConfig) -> f64 {
    let p = dbm_to_linear(cfg.p_dbm);
    let n1 = dbm_to_linear(cfg.n1_dbm);
    let n2 = dbm_to_linear(cfg.n2_dbm);
    let rho2 = p * p / ((p + n1) * (p + n2));
    -0.5 * (1.0 - rho2).log2()
}

/// Draws one batch. Per row and per component the draw order is fixed
/// (h, w1, w2, then the Eve variate if any), so a given (config, seed)
/// reproduces bit-identically regardless of the caller.
pub fn gen_fading(cfg: &FadingConfig, batch: usize, rng: &mut dyn RngCore) -> SampleBatch {
    let d = cfg.dim;
    let sp = dbm_to_linear(cfg.p_dbm).sqrt();
    let s1 = dbm_to_linear(cfg.n1_dbm).sqrt();
    let s2 = dbm_to_linear(cfg.n2_dbm).sqrt();
    let s3 = dbm_to_linear(cfg.n3_dbm).sqrt();

    let mut x = Array2::<f64>::zeros((batch, d));
    let mut y = Array2::<f64>::zeros((batch, d));
    let mut z = match cfg.eve {
        EveMode::Absent => None,
        _ => Some(Array2::<f64>::zeros((batch, d))),
    };

    for i in 0..batch {
        for j in 0..d {
            let h: f64 = rng.sample(StandardNormal);
            let w1: f64 = rng.sample(StandardNormal);
            let w2: f64 = rng.sample(StandardNormal);
            x[[i, j]] = sp * h + s1 * w1;
            y[[i, j]] = sp * h + s2 * w2;
            match cfg.eve {
                EveMode::Absent => {}
                EveMode::Correlated => {
                    let w3: f64 = rng.sample(StandardNormal);
                    z.as_mut().unwrap()[[i, j]] = sp * h + s3 * w3;
                }
                EveMode::Uncorrelated => {
                    let g: f64 = rng.sample(StandardNormal);
                    z.as_mut().unwrap()[[i, j]] = sp * g;
                }
            }
        }
    }

    SampleBatch { x, y, z }
}

/// [`Source`] wrapper around [`gen_fading`].
#[derive(Debug, Clone)]
pub struct FadingSource {
    cfg: FadingConfig,
}

impl FadingSource {
    pub fn new(cfg: FadingConfig) -> Result<Self, SourceError> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &FadingConfig {
        &self.cfg
    }
}

impl Source for FadingSource {
    fn x_dim(&self) -> usize {
        self.cfg.dim
    }

    fn y_dim(&self) -> usize {
        self.cfg.dim
    }

    fn z_dim(&self) -> usize {
        match self.cfg.eve {
            EveMode::Absent => 0,
            _ => self.cfg.dim,
        }
    }

    fn sample(&self, batch: usize, rng: &mut dyn RngCore) -> SampleBatch {
        gen_fading(&self.cfg, batch, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn dbm_conversion_known_values() {
        assert_abs_diff_eq!(dbm_to_linear(0.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dbm_to_linear(-20.0), 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(dbm_to_linear(10.0), 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dbm_to_linear(3.0), 1.9952623149688795, epsilon = 1e-12);
    }

    #[test]
    fn zero_noise_collapses_to_equal_observations() {
        let cfg = FadingConfig {
            n1_dbm: -300.0,
            n2_dbm: -300.0,
            ..FadingConfig::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let b = gen_fading(&cfg, 64, &mut rng);
        for (xi, yi) in b.x.iter().zip(b.y.iter()) {
            assert!((xi - yi).abs() < 1e-9, "x={xi} y={yi}");
        }
    }

    #[test]
    fn default_marginal_variance_matches_closed_form() {
        // Var(X) = P + N1 = 1.01. Sample variance of n i.i.d. Gaussians has
        // SE ~ var * sqrt(2/n); use a 3-sigma band.
        let cfg = FadingConfig::default();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let n_rows = 125_000;
        let b = gen_fading(&cfg, n_rows, &mut rng);
        let n = (n_rows * cfg.dim) as f64;
        let mean = b.x.iter().sum::<f64>() / n;
        let var = b.x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = 1.01 * (2.0 / n).sqrt();
        assert!(
            (var - 1.01).abs() < 3.0 * se,
            "var={var}, want 1.01 +- {}",
            3.0 * se
        );
    }

    #[test]
    fn cross_correlation_matches_closed_form() {
        // rho = P / sqrt((P+N1)(P+N2)) = 1/1.01. SE of the sample
        // correlation is about (1-rho^2)/sqrt(n).
        let cfg = FadingConfig::default();
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let n_rows = 125_000;
        let b = gen_fading(&cfg, n_rows, &mut rng);
        let n = (n_rows * cfg.dim) as f64;
        let mx = b.x.iter().sum::<f64>() / n;
        let my = b.y.iter().sum::<f64>() / n;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for (xi, yi) in b.x.iter().zip(b.y.iter()) {
            sxy += (xi - mx) * (yi - my);
            sxx += (xi - mx).powi(2);
            syy += (yi - my).powi(2);
        }
        let rho = sxy / (sxx * syy).sqrt();
        let want = 1.0 / 1.01;
        let se = (1.0 - want * want) / n.sqrt();
        assert!(
            (rho - want).abs() < 3.0 * se,
            "rho={rho}, want {want} +- {}",
            3.0 * se
        );
    }

    #[test]
    fn mi_helper_matches_default_operating_point() {
        let mi = fading_mi_bits_per_scalar(&FadingConfig::default());
        assert!((mi - 2.8328).abs() < 5e-4, "mi={mi}");
    }

    #[test]
    fn same_seed_reproduces_bit_identically() {
        let cfg = FadingConfig {
            eve: EveMode::Correlated,
            ..FadingConfig::default()
        };
        let mut r1 = ChaCha12Rng::seed_from_u64(42);
        let mut r2 = ChaCha12Rng::seed_from_u64(42);
        let a = gen_fading(&cfg, 32, &mut r1);
        let b = gen_fading(&cfg, 32, &mut r2);
        assert_eq!(
            a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(
            a.z.as_ref().unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.z.as_ref().unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn eve_modes_control_z_presence_and_correlation() {
        let absent = FadingSource::new(FadingConfig::default()).unwrap();
        assert_eq!(absent.z_dim(), 0);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        assert!(absent.sample(8, &mut rng).z.is_none());

        let unc = FadingSource::new(FadingConfig {
            eve: EveMode::Uncorrelated,
            ..FadingConfig::default()
        })
        .unwrap();
        assert_eq!(unc.z_dim(), 8);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let b = unc.sample(62_500, &mut rng);
        let z = b.z.unwrap();
        let n = (62_500 * 8) as f64;
        let mut sxz = 0.0;
        for (xi, zi) in b.x.iter().zip(z.iter()) {
            sxz += xi * zi;
        }
        // X and Z are zero-mean with Var ~ 1; the sample cross-moment of
        // independent pairs has SE ~ 1/sqrt(n).
        let rho = sxz / n;
        assert!(rho.abs() < 3.0 / n.sqrt(), "rho={rho}");
    }

    #[test]
    fn correlated_eve_sees_the_fading_term() {
        let cfg = FadingConfig {
            eve: EveMode::Correlated,
            ..FadingConfig::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let b = gen_fading(&cfg, 62_500, &mut rng);
        let z = b.z.unwrap();
        let n = (62_500 * 8) as f64;
        let mut sxz = 0.0;
        let mut sxx = 0.0;
        let mut szz = 0.0;
        for (xi, zi) in b.x.iter().zip(z.iter()) {
            sxz += xi * zi;
            sxx += xi * xi;
            szz += zi * zi;
        }
        let rho = sxz / (sxx * szz).sqrt();
        // rho(X, Z) = P / sqrt((P+N1)(P+N3)) = 1/sqrt(1.01 * 2).
        let want = 1.0 / (1.01f64 * 2.0).sqrt();
        let se = (1.0 - want * want) / n.sqrt();
        assert!((rho - want).abs() < 3.0 * se, "rho={rho}, want {want}");
    }

    #[test]
    fn zero_dim_rejected() {
        let cfg = FadingConfig {
            dim: 0,
            ..FadingConfig::default()
        };
        assert!(FadingSource::new(cfg).is_err());
    }
}
