//! Range-angle map synthesis: a monostatic radar echo for Alice and a
//! one-way downlink channel for Bob, swept over a grid of receive beams,
//! turned into squared-magnitude IFFT range profiles.

use std::f64::consts::{PI, TAU};

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use super::{EveMode, SampleBatch, Source, SourceError};

/// Speed of light, m/s.
pub const C0: f64 = 299_792_458.0;

/// Normal cyclic prefix as a fraction of the OFDM symbol period. Path
/// delays beyond the CP break the flat-per-subcarrier channel model, so
/// scenes are validated against it.
const CP_FRACTION: f64 = 0.0703125;

/// One propagation scene shared by both parties.
#[derive(Debug, Clone, PartialEq)]
pub struct RaScene {
    /// One-way target distance in meters.
    pub bob_range_m: f64,
    /// Target azimuth in degrees, within the sweep sector.
    pub bob_azimuth_deg: f64,
    /// Target radar cross-section in dBsm; scales Alice's echo only.
    pub rcs_dbsm: f64,
    /// Static reflectors as (one-way range m, azimuth deg, gain dB).
    pub clutter_paths: Vec<(f64, f64, f64)>,
    /// Channel-estimate SNR in dB relative to a unit-gain path.
    pub snr_db: f64,
}

/// OFDM and beam-sweep geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct RaConfig {
    /// Subcarrier spacing in Hz.
    pub delta_f: f64,
    /// Number of occupied subcarriers.
    pub n_sc: usize,
    /// IFFT length; at least `n_sc`.
    pub n_ifft: usize,
    /// Receive beams, uniformly spaced over the sector (inclusive ends).
    pub n_beams: usize,
    /// Sweep half-angle in degrees; beams and scenes live in +-sector.
    pub sector_deg: f64,
    /// Elements of the uniform linear array (half-wavelength spacing).
    pub array_elems: usize,
    /// Rows kept from the range axis after the IFFT.
    pub n_range_bins: usize,
}

impl Default for RaConfig {
    fn default() -> Self {
        Self {
            delta_f: 120e3,
            n_sc: 3300,
            n_ifft: 4096,
            n_beams: 64,
            sector_deg: 45.0,
            array_elems: 8,
            n_range_bins: 256,
        }
    }
}

impl RaConfig {
    pub fn validate(&self) -> Result<(), SourceError> {
        if self.n_sc == 0 || self.n_beams == 0 || self.array_elems == 0 || self.n_range_bins == 0 {
            return Err(SourceError::BadConfig("ra config has a zero dimension".into()));
        }
        if self.n_ifft < self.n_sc {
            return Err(SourceError::BadConfig(format!(
                "n_ifft {} smaller than n_sc {}",
                self.n_ifft, self.n_sc
            )));
        }
        if self.n_range_bins > self.n_ifft {
            return Err(SourceError::BadConfig(format!(
                "n_range_bins {} exceeds n_ifft {}",
                self.n_range_bins, self.n_ifft
            )));
        }
        if !(self.delta_f > 0.0) || !(self.sector_deg > 0.0) {
            return Err(SourceError::BadConfig("delta_f and sector must be positive".into()));
        }
        Ok(())
    }

    /// Largest one-way range whose round trip still fits in the cyclic
    /// prefix: c0 * CP / (2 delta_f). About 87.8 m at 120 kHz spacing.
    pub fn max_range_m(&self) -> f64 {
        C0 * CP_FRACTION / (2.0 * self.delta_f)
    }

    /// Beam steering angles in degrees, sector ends included.
    pub fn beam_angles_deg(&self) -> Vec<f64> {
        if self.n_beams == 1 {
            return vec![0.0];
        }
        let step = 2.0 * self.sector_deg / (self.n_beams - 1) as f64;
        (0..self.n_beams).map(|b| -self.sector_deg + step * b as f64).collect()
    }
}

impl RaScene {
    pub fn validate(&self, cfg: &RaConfig) -> Result<(), SourceError> {
        let max_r = cfg.max_range_m();
        let check = |r: f64, az: f64, what: &str| -> Result<(), SourceError> {
            if !(r > 0.0) || r > max_r {
                return Err(SourceError::BadScene(format!(
                    "{what} range {r} m outside (0, {max_r:.1}]"
                )));
            }
            if az.abs() > cfg.sector_deg {
                return Err(SourceError::BadScene(format!(
                    "{what} azimuth {az} deg outside +-{} sector",
                    cfg.sector_deg
                )));
            }
            Ok(())
        };
        check(self.bob_range_m, self.bob_azimuth_deg, "target")?;
        for &(r, az, _) in &self.clutter_paths {
            check(r, az, "clutter")?;
        }
        Ok(())
    }
}

struct PropPath {
    amp: f64,
    az_deg: f64,
    tau_s: f64,
}

/// |a(theta_rx)^H a(theta_path)|^2 / M^2 for a half-wavelength ULA.
fn beam_gain(rx_deg: f64, path_deg: f64, m: usize) -> f64 {
    let u = (path_deg.to_radians().sin() - rx_deg.to_radians().sin()) * PI;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..m {
        acc += Complex64::from_polar(1.0, u * k as f64);
    }
    acc.norm_sqr() / (m * m) as f64
}

/// Synthesizes one map: for every beam, sum the paths (each with a random
/// initial phase drawn once per map), add complex AWGN per subcarrier,
/// inverse-FFT, and keep |.|^2 / n_ifft over the first n_range_bins rows.
fn synth_map(paths: &[PropPath], snr_db: f64, cfg: &RaConfig, rng: &mut dyn RngCore) -> Array2<f64> {
    let n_sc = cfg.n_sc;
    // Per-path subcarrier response amp * e^{j(phi - 2 pi n' delta_f tau)},
    // built once; beams only rescale it by the (real) beam gain.
    let mut base = Array2::<Complex64>::zeros((paths.len(), n_sc));
    for (p, path) in paths.iter().enumerate() {
        let phi: f64 = rng.gen::<f64>() * TAU;
        let step = Complex64::from_polar(1.0, -TAU * cfg.delta_f * path.tau_s);
        let mut cur = Complex64::from_polar(path.amp, phi);
        for v in base.row_mut(p) {
            *v = cur;
            cur *= step;
        }
    }

    let noise_sigma = (10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
    let angles = cfg.beam_angles_deg();
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(cfg.n_ifft);
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.n_ifft];
    let mut map = Array2::<f64>::zeros((cfg.n_range_bins, cfg.n_beams));

    for (b, &angle) in angles.iter().enumerate() {
        buf.fill(Complex64::new(0.0, 0.0));
        for (p, path) in paths.iter().enumerate() {
            let g = beam_gain(angle, path.az_deg, cfg.array_elems);
            for (dst, src) in buf[..n_sc].iter_mut().zip(base.row(p)) {
                *dst += g * src;
            }
        }
        for dst in &mut buf[..n_sc] {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *dst += Complex64::new(noise_sigma * re, noise_sigma * im);
        }
        fft.process(&mut buf);
        for n in 0..cfg.n_range_bins {
            map[[n, b]] = buf[n].norm_sqr() / cfg.n_ifft as f64;
        }
    }
    map
}

/// Builds the two parties' range-angle maps for one scene.
///
/// Bob sees the one-way downlink: a unit-gain path at delay d/c0 plus the
/// clutter at their one-way delays. Alice sees the monostatic echo: the
/// target at delay 2d/c0 with gain sqrt(RCS) reduced 6 dB, plus clutter at
/// round-trip delays. Alice's draws precede Bob's in the RNG stream.
pub fn gen_ra_maps(
    scene: &RaScene,
    cfg: &RaConfig,
    rng: &mut dyn RngCore,
) -> Result<(Array2<f64>, Array2<f64>), SourceError> {
    cfg.validate()?;
    scene.validate(cfg)?;

    let mut alice_paths = vec![PropPath {
        amp: 10f64.powf((scene.rcs_dbsm - 6.0) / 20.0),
        az_deg: scene.bob_azimuth_deg,
        tau_s: 2.0 * scene.bob_range_m / C0,
    }];
    let mut bob_paths = vec![PropPath {
        amp: 1.0,
        az_deg: scene.bob_azimuth_deg,
        tau_s: scene.bob_range_m / C0,
    }];
    for &(r, az, gain_db) in &scene.clutter_paths {
        let amp = 10f64.powf(gain_db / 20.0);
        alice_paths.push(PropPath { amp, az_deg: az, tau_s: 2.0 * r / C0 });
        bob_paths.push(PropPath { amp, az_deg: az, tau_s: r / C0 });
    }

    let alice = synth_map(&alice_paths, scene.snr_db, cfg, rng);
    let bob = synth_map(&bob_paths, scene.snr_db, cfg, rng);
    Ok((alice, bob))
}

/// (range bin, beam index) of the largest map cell.
pub fn strongest_cell(map: &Array2<f64>) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_v = f64::NEG_INFINITY;
    for ((n, b), &v) in map.indexed_iter() {
        if v > best_v {
            best_v = v;
            best = (n, b);
        }
    }
    best
}

/// Eve's noisy position estimate: the true (range, azimuth) perturbed by
/// independent uniforms over [-delta/2, +delta/2].
pub fn eve_position_obs(
    scene: &RaScene,
    delta_d_m: f64,
    delta_theta_deg: f64,
    rng: &mut dyn RngCore,
) -> (f64, f64) {
    let d = scene.bob_range_m + (rng.gen::<f64>() - 0.5) * delta_d_m;
    let t = scene.bob_azimuth_deg + (rng.gen::<f64>() - 0.5) * delta_theta_deg;
    (d, t)
}

/// Scene distribution and preprocessing for the range-angle source.
#[derive(Debug, Clone, PartialEq)]
pub struct RamapSourceConfig {
    pub ra: RaConfig,
    /// Target and clutter ranges drawn uniform in [r_min_m, r_max_m].
    pub r_min_m: f64,
    pub r_max_m: f64,
    /// Target RCS drawn uniform in [rcs_min_dbsm, rcs_max_dbsm].
    pub rcs_min_dbsm: f64,
    pub rcs_max_dbsm: f64,
    /// Clutter paths per scene, gains uniform in the dB interval below.
    pub n_clutter: usize,
    pub clutter_gain_min_db: f64,
    pub clutter_gain_max_db: f64,
    pub snr_db: f64,
    pub eve: EveMode,
    /// Width of Eve's uniform range perturbation (correlated mode).
    pub delta_d_m: f64,
    /// Width of Eve's uniform azimuth perturbation (correlated mode).
    pub delta_theta_deg: f64,
    /// Scenes synthesized once at construction to fit the log-power
    /// standardization statistics.
    pub calib_scenes: usize,
    pub calib_seed: u64,
}

impl Default for RamapSourceConfig {
    fn default() -> Self {
        Self {
            ra: RaConfig::default(),
            r_min_m: 5.0,
            r_max_m: 70.0,
            rcs_min_dbsm: -10.0,
            rcs_max_dbsm: 10.0,
            n_clutter: 2,
            clutter_gain_min_db: -18.0,
            clutter_gain_max_db: -6.0,
            snr_db: 20.0,
            eve: EveMode::Absent,
            delta_d_m: 10.0,
            delta_theta_deg: 10.0,
            calib_scenes: 32,
            calib_seed: 0,
        }
    }
}

impl RamapSourceConfig {
    pub fn validate(&self) -> Result<(), SourceError> {
        self.ra.validate()?;
        if !(self.r_min_m > 0.0) || self.r_max_m <= self.r_min_m {
            return Err(SourceError::BadConfig("need 0 < r_min_m < r_max_m".into()));
        }
        if self.r_max_m > self.ra.max_range_m() {
            return Err(SourceError::BadConfig(format!(
                "r_max_m {} exceeds CP-limited {:.1} m",
                self.r_max_m,
                self.ra.max_range_m()
            )));
        }
        if self.rcs_max_dbsm < self.rcs_min_dbsm
            || self.clutter_gain_max_db < self.clutter_gain_min_db
        {
            return Err(SourceError::BadConfig("empty uniform interval".into()));
        }
        if self.delta_d_m < 0.0 || self.delta_theta_deg < 0.0 {
            return Err(SourceError::BadConfig("perturbation widths must be nonnegative".into()));
        }
        if self.calib_scenes == 0 {
            return Err(SourceError::BadConfig("calib_scenes must be positive".into()));
        }
        Ok(())
    }
}

/// Per-party scalar standardization of the log-power maps, with the
/// statistics frozen at construction from a calibration split.
#[derive(Debug, Clone, Copy)]
struct Standardizer {
    mean: f64,
    std: f64,
}

impl Standardizer {
    fn from_pooled(sum: f64, sum_sq: f64, count: f64) -> Self {
        let mean = sum / count;
        let var = (sum_sq / count - mean * mean).max(1e-30);
        Standardizer { mean, std: var.sqrt() }
    }

    fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }
}

const LOG_FLOOR: f64 = 1e-30;

/// Draws a fresh scene per sample. x is Alice's standardized log-power
/// map (row-major, range bins by beams), y is Bob's, and z, when present,
/// is Eve's standardized (range, azimuth) estimate.
#[derive(Debug, Clone)]
pub struct RamapSource {
    cfg: RamapSourceConfig,
    std_alice: Standardizer,
    std_bob: Standardizer,
    z_mean: [f64; 2],
    z_std: [f64; 2],
}

impl RamapSource {
    pub fn new(cfg: RamapSourceConfig) -> Result<Self, SourceError> {
        cfg.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.calib_seed);
        let (mut sa, mut qa, mut sb, mut qb) = (0.0, 0.0, 0.0, 0.0);
        let mut count = 0.0;
        for _ in 0..cfg.calib_scenes {
            let scene = draw_scene(&cfg, &mut rng);
            let (a, b) = gen_ra_maps(&scene, &cfg.ra, &mut rng)?;
            for &v in a.iter() {
                let l = (v + LOG_FLOOR).ln();
                sa += l;
                qa += l * l;
            }
            for &v in b.iter() {
                let l = (v + LOG_FLOOR).ln();
                sb += l;
                qb += l * l;
            }
            count += a.len() as f64;
        }
        // Closed-form moments of the Eve 2-vector: a uniform scene position
        // plus an independent uniform perturbation.
        let var_d = (cfg.r_max_m - cfg.r_min_m).powi(2) / 12.0 + cfg.delta_d_m.powi(2) / 12.0;
        let var_t =
            (2.0 * cfg.ra.sector_deg).powi(2) / 12.0 + cfg.delta_theta_deg.powi(2) / 12.0;
        Ok(Self {
            std_alice: Standardizer::from_pooled(sa, qa, count),
            std_bob: Standardizer::from_pooled(sb, qb, count),
            z_mean: [(cfg.r_min_m + cfg.r_max_m) / 2.0, 0.0],
            z_std: [var_d.sqrt(), var_t.sqrt()],
            cfg,
        })
    }

    pub fn config(&self) -> &RamapSourceConfig {
        &self.cfg
    }
}

fn draw_scene(cfg: &RamapSourceConfig, rng: &mut dyn RngCore) -> RaScene {
    let sector = cfg.ra.sector_deg;
    let bob_range_m = rng.gen_range(cfg.r_min_m..=cfg.r_max_m);
    let bob_azimuth_deg = rng.gen_range(-sector..=sector);
    let rcs_dbsm = rng.gen_range(cfg.rcs_min_dbsm..=cfg.rcs_max_dbsm);
    let clutter_paths = (0..cfg.n_clutter)
        .map(|_| {
            (
                rng.gen_range(cfg.r_min_m..=cfg.r_max_m),
                rng.gen_range(-sector..=sector),
                rng.gen_range(cfg.clutter_gain_min_db..=cfg.clutter_gain_max_db),
            )
        })
        .collect();
    RaScene {
        bob_range_m,
        bob_azimuth_deg,
        rcs_dbsm,
        clutter_paths,
        snr_db: cfg.snr_db,
    }
}

impl Source for RamapSource {
    fn x_dim(&self) -> usize {
        self.cfg.ra.n_range_bins * self.cfg.ra.n_beams
    }

    fn y_dim(&self) -> usize {
        self.x_dim()
    }

    fn z_dim(&self) -> usize {
        match self.cfg.eve {
            EveMode::Absent => 0,
            _ => 2,
        }
    }

    fn sample(&self, batch: usize, rng: &mut dyn RngCore) -> SampleBatch {
        let d = self.x_dim();
        let mut x = Array2::<f64>::zeros((batch, d));
        let mut y = Array2::<f64>::zeros((batch, d));
        let mut z = match self.cfg.eve {
            EveMode::Absent => None,
            _ => Some(Array2::<f64>::zeros((batch, 2))),
        };

        for i in 0..batch {
            let scene = draw_scene(&self.cfg, rng);
            let (a, b) = gen_ra_maps(&scene, &self.cfg.ra, rng)
                .expect("drawn scene is always within the validated ranges");
            for (dst, &v) in x.row_mut(i).iter_mut().zip(a.iter()) {
                *dst = self.std_alice.apply((v + LOG_FLOOR).ln());
            }
            for (dst, &v) in y.row_mut(i).iter_mut().zip(b.iter()) {
                *dst = self.std_bob.apply((v + LOG_FLOOR).ln());
            }
            match self.cfg.eve {
                EveMode::Absent => {}
                EveMode::Correlated => {
                    let (dh, th) = eve_position_obs(
                        &scene,
                        self.cfg.delta_d_m,
                        self.cfg.delta_theta_deg,
                        rng,
                    );
                    let zi = z.as_mut().unwrap();
                    zi[[i, 0]] = (dh - self.z_mean[0]) / self.z_std[0];
                    zi[[i, 1]] = (th - self.z_mean[1]) / self.z_std[1];
                }
                EveMode::Uncorrelated => {
                    // Independent position guess with the same marginals.
                    let dh = rng.gen_range(self.cfg.r_min_m..=self.cfg.r_max_m);
                    let th = rng.gen_range(-self.cfg.ra.sector_deg..=self.cfg.ra.sector_deg);
                    let zi = z.as_mut().unwrap();
                    zi[[i, 0]] = (dh - self.z_mean[0]) / self.z_std[0];
                    zi[[i, 1]] = (th - self.z_mean[1]) / self.z_std[1];
                }
            }
        }
        SampleBatch { x, y, z }
    }
}
