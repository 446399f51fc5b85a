//! The reciprocal-fading source: Alice and Bob probe the same fading
//! vector through independent measurement noise, and (optionally) Eve
//! listens through her own channel. Sample moments match the closed forms.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use vcrx::sources::{
    dbm_to_linear, fading_mi_bits_per_scalar, EveMode, FadingConfig, FadingSource, Source,
};

fn main() {
    let cfg = FadingConfig::default();
    println!(
        "powers: P {} mW, N1 {} mW, N2 {} mW (dim {})",
        dbm_to_linear(cfg.p_dbm),
        dbm_to_linear(cfg.n1_dbm),
        dbm_to_linear(cfg.n2_dbm),
        cfg.dim
    );

    let src = FadingSource::new(cfg.clone()).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let batch = src.sample(200_000, &mut rng);
    let n = (batch.rows() * cfg.dim) as f64;

    let var_x = batch.x.iter().map(|v| v * v).sum::<f64>() / n;
    let cov_xy = batch
        .x
        .iter()
        .zip(batch.y.iter())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / n;
    let rho = cov_xy / var_x;
    println!("\nsample var(x)  = {var_x:.4}   (closed form 1.01)");
    println!("sample corr    = {rho:.4}   (closed form {:.4})", 1.0 / 1.01);
    println!(
        "I(x;y) per scalar = {:.4} bits",
        fading_mi_bits_per_scalar(&cfg)
    );

    // Correlated Eve shares the fading vector through her own noise;
    // uncorrelated Eve observes an unrelated channel.
    for eve in [EveMode::Correlated, EveMode::Uncorrelated] {
        let cfg = FadingConfig { eve, ..cfg.clone() };
        let src = FadingSource::new(cfg).unwrap();
        let batch = src.sample(200_000, &mut rng);
        let z = batch.z.as_ref().unwrap();
        let cov_xz = batch
            .x
            .iter()
            .zip(z.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n;
        println!("\n{eve:?} eve: sample corr(x, z) = {:.4}", cov_xz / var_x);
    }
}
