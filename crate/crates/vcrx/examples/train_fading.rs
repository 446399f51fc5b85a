//! A short quantizer training run on the fading source (no eavesdropper):
//! the mismatch loss falls while the symbol marginals stay near uniform.
//! Scaled down from the desk preset to finish in seconds.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use vcrx::eval::test_metrics;
use vcrx::sources::{FadingConfig, FadingSource, Source};
use vcrx::vpq::{train_vpq, VpqConfig};

fn main() {
    let source = FadingSource::new(FadingConfig::default()).unwrap();
    let cfg = VpqConfig {
        steps_max: 800,
        steps_predictor_only: 0,
        batch_size: 128,
        enc_hidden: vec![64, 64],
        lr: 1e-3,
        ..VpqConfig::desk()
    };
    println!(
        "training q={} quantizer, {} steps, batch {}, encoder {:?}",
        cfg.q, cfg.steps_max, cfg.batch_size, cfg.enc_hidden
    );

    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let trained = train_vpq(&cfg, &source, &mut rng).unwrap();

    println!("\n   step      L_MR       L_ENT");
    for r in trained.history.records.iter().step_by(100) {
        println!(
            "  {:5}  {:9.4}  {:9.4}",
            r.step,
            r.l_mr.unwrap(),
            r.l_ent.unwrap()
        );
    }

    let held_out = source.sample(20_000, &mut rng);
    let metrics = test_metrics(
        &trained.encoder_a,
        trained.encoder_bob(),
        None,
        &held_out.x,
        &held_out.y,
        None,
        cfg.batch_size,
    )
    .unwrap();
    println!("\nheld-out: H(W) = {:.3} bits, H(V) = {:.3} bits", metrics.h_w_bits, metrics.h_v_bits);
    println!("held-out: Pr[W = V] = {:.3}", metrics.agree_rate);
}
