//! End-to-end command flows: gen -> train -> eval -> keys on small
//! configurations, plus the contract's error cases.

use std::fs;
use std::path::{Path, PathBuf};

use vcrx::cli::{
    cmd_eval, cmd_gen, cmd_keys, cmd_train, read_dataset, ConfigDigest, DatasetSource,
};
use vcrx::sources::Source;

const EVE_CONFIG: &str = r#"
seed = 11
rows = 2048

[source.fading]
dim = 4
eve = "correlated"

[vpq]
q = 16
steps_max = 60
steps_predictor_only = 12
batch_size = 32
enc_hidden = [24]
pred_hidden = [24]
lr = 0.002

[eval]
test_size = 512
trials = 60
rs_m = [1, 3, 5]
mi_batch = 64
"#;

const PLAIN_CONFIG: &str = r#"
seed = 11
rows = 2048

[source.fading]
dim = 4

[vpq]
q = 16
steps_max = 60
steps_predictor_only = 12
batch_size = 32
enc_hidden = [24]
pred_hidden = [24]
lr = 0.002

[eval]
test_size = 512
trials = 60
rs_m = [1, 3, 5]
mi_batch = 64
"#;

struct Fixture {
    dir: tempfile::TempDir,
    config: PathBuf,
}

impl Fixture {
    fn new(config_text: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("run.toml");
        fs::write(&config, config_text).unwrap();
        Self { dir, config }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn gen(&self, name: &str, seed: Option<u64>) -> PathBuf {
        let out = self.path(name);
        cmd_gen(&self.config, &out, seed).unwrap();
        out
    }

    fn train(&self, data: &Path, stem: &str) -> (PathBuf, PathBuf, Vec<PathBuf>) {
        let model = self.path(stem);
        let log = self.path(&format!("{stem}.history.csv"));
        let outputs = cmd_train(&self.config, data, &model, &log, None).unwrap();
        (model, log, outputs.model_paths)
    }
}

#[test]
fn gen_is_deterministic_and_stamps_provenance() {
    let fx = Fixture::new(EVE_CONFIG);
    let d1 = fx.gen("a.bin", None);
    let d2 = fx.gen("b.bin", None);
    assert_eq!(fs::read(&d1).unwrap(), fs::read(&d2).unwrap());

    let ds = read_dataset(&d1).unwrap();
    assert_eq!(ds.rows(), 2048);
    assert_eq!((ds.x.ncols(), ds.y.ncols(), ds.z_dim()), (4, 4, 4));
    assert_eq!(ds.seed, 11);
    let expected = ConfigDigest::of_bytes(&fs::read(&fx.config).unwrap());
    assert_eq!(ds.digest, expected);

    let d3 = fx.gen("c.bin", Some(12));
    let ds3 = read_dataset(&d3).unwrap();
    assert_eq!(ds3.seed, 12);
    assert_eq!(ds3.digest, expected);
    assert_ne!(ds3.x, ds.x);
}

#[test]
fn train_writes_shared_encoder_predictor_and_history() {
    let fx = Fixture::new(EVE_CONFIG);
    let data = fx.gen("train.bin", None);
    let (_, log, paths) = fx.train(&data, "model");
    let names: Vec<String> = paths
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["model.encoder.bin", "model.predictor.bin"]);

    let history = fs::read_to_string(&log).unwrap();
    let mut lines = history.lines();
    let provenance = lines.next().unwrap();
    assert!(provenance.starts_with("# seed=11 config_digest="), "{provenance}");
    assert_eq!(
        lines.next().unwrap(),
        "step,l_mr,l_ent,i_vlb_bits,i_vub_bits,lambda2"
    );
    // 60 joint steps, the last 12 of which are predictor-only.
    assert_eq!(lines.clone().count(), 60);
    let first = lines.next().unwrap();
    assert!(!first.ends_with(",,"), "joint step should report lambda2: {first}");

    // Retraining with the same seed reproduces the history byte for byte.
    let log2 = fx.path("model2.history.csv");
    cmd_train(&fx.config, &data, &fx.path("model2"), &log2, None).unwrap();
    let h2 = fs::read_to_string(&log2).unwrap();
    assert_eq!(history, h2);
}

#[test]
fn train_without_sharing_writes_two_encoders() {
    let text = EVE_CONFIG.replace("[vpq]", "[vpq]\nshared_encoder = false");
    let fx = Fixture::new(&text);
    let data = fx.gen("train.bin", None);
    let (_, _, paths) = fx.train(&data, "model");
    let names: Vec<String> = paths
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        names,
        vec![
            "model.encoder_alice.bin",
            "model.encoder_bob.bin",
            "model.predictor.bin"
        ]
    );
}

#[test]
fn no_eve_run_has_no_predictor_and_blank_mi_columns() {
    let fx = Fixture::new(PLAIN_CONFIG);
    let data = fx.gen("train.bin", None);
    let (_, log, paths) = fx.train(&data, "model");
    let names: Vec<String> = paths
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["model.encoder.bin"]);
    let history = fs::read_to_string(&log).unwrap();
    let row = history.lines().nth(2).unwrap();
    assert!(row.ends_with(",,,"), "no MI or lambda2 columns without Eve: {row}");
}

#[test]
fn eval_reports_metrics_and_mi_on_request() {
    let fx = Fixture::new(EVE_CONFIG);
    let train = fx.gen("train.bin", None);
    let test = fx.gen("test.bin", Some(99));
    let (model, _, _) = fx.train(&train, "model");
    let predictor = fx.path("model.predictor.bin");

    let out = fx.path("metrics.txt");
    let m = cmd_eval(&fx.config, &test, &model, None, false, &out, None).unwrap();
    assert_eq!(m.n_test, 512);
    assert!(m.i_vlb_bits.is_none());
    let doc = fs::read_to_string(&out).unwrap();
    assert!(doc.contains("seed = 11"));
    assert!(doc.contains("config_digest = "));
    assert!(doc.contains("agree_rate = "));
    assert!(!doc.contains("i_vlb_bits"));

    let out_mi = fx.path("metrics_mi.txt");
    let with_mi = cmd_eval(
        &fx.config,
        &test,
        &model,
        Some(&predictor),
        true,
        &out_mi,
        None,
    )
    .unwrap();
    assert!(with_mi.i_vlb_bits.is_some() && with_mi.i_vub_bits.is_some());
    let doc = fs::read_to_string(&out_mi).unwrap();
    assert!(doc.contains("i_vlb_bits = ") && doc.contains("i_vub_bits = "));

    // Reruns are byte-identical.
    let out_again = fx.path("metrics_again.txt");
    cmd_eval(&fx.config, &test, &model, None, false, &out_again, None).unwrap();
    assert_eq!(
        fs::read(&out).unwrap(),
        fs::read(&out_again).unwrap()
    );
}

#[test]
fn eval_mi_without_predictor_is_an_explicit_error() {
    let fx = Fixture::new(EVE_CONFIG);
    let train = fx.gen("train.bin", None);
    let (model, _, _) = fx.train(&train, "model");
    let err = cmd_eval(
        &fx.config,
        &train,
        &model,
        None,
        true,
        &fx.path("m.txt"),
        None,
    )
    .unwrap_err();
    assert!(err.to_string().contains("--predictor"), "{err}");
}

#[test]
fn keys_sweeps_message_lengths_with_increasing_rate() {
    let fx = Fixture::new(EVE_CONFIG);
    let train = fx.gen("train.bin", None);
    let test = fx.gen("test.bin", Some(99));
    let (model, _, _) = fx.train(&train, "model");
    let predictor = fx.path("model.predictor.bin");

    let out = fx.path("keys.csv");
    let rows = cmd_keys(
        &fx.config,
        &test,
        &model,
        Some(&predictor),
        None,
        None,
        &out,
        None,
    )
    .unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[0].key_rate_bits < w[1].key_rate_bits));
    assert!(rows.iter().all(|r| r.trials == 60));

    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# seed=11 config_digest="));
    assert_eq!(
        lines.next().unwrap(),
        "m,key_rate_bits,key_mismatch_rate,decode_failure_rate,leakage_bound_bits,trials"
    );
    assert_eq!(lines.count(), 3);

    // --rs-m and --trials overrides change the sweep.
    let out2 = fx.path("keys2.csv");
    let rows = cmd_keys(
        &fx.config,
        &test,
        &model,
        Some(&predictor),
        Some(vec![7, 9]),
        Some(20),
        &out2,
        None,
    )
    .unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].m, rows[1].m), (7, 9));
    assert!(rows.iter().all(|r| r.trials == 20));

    // Reruns are byte-identical.
    let out3 = fx.path("keys3.csv");
    cmd_keys(
        &fx.config,
        &test,
        &model,
        Some(&predictor),
        None,
        None,
        &out3,
        None,
    )
    .unwrap();
    assert_eq!(fs::read(&out).unwrap(), fs::read(&out3).unwrap());
}

#[test]
fn keys_demands_predictor_when_data_has_eavesdropper() {
    let fx = Fixture::new(EVE_CONFIG);
    let train = fx.gen("train.bin", None);
    let (model, _, _) = fx.train(&train, "model");
    let err = cmd_keys(
        &fx.config,
        &train,
        &model,
        None,
        None,
        None,
        &fx.path("k.csv"),
        None,
    )
    .unwrap_err();
    assert!(err.to_string().contains("--predictor"), "{err}");
}

#[test]
fn mismatched_dataset_dims_are_rejected() {
    let fx = Fixture::new(EVE_CONFIG);
    let data = fx.gen("train.bin", None);
    let other = Fixture::new(&EVE_CONFIG.replace("dim = 4", "dim = 8"));
    fs::copy(&data, other.path("train.bin")).unwrap();
    let err = cmd_train(
        &other.config,
        &other.path("train.bin"),
        &other.path("model"),
        &other.path("h.csv"),
        None,
    )
    .unwrap_err();
    assert!(err.to_string().contains("do not match"), "{err}");
}

#[test]
fn missing_model_stem_is_a_clear_error() {
    let fx = Fixture::new(EVE_CONFIG);
    let data = fx.gen("train.bin", None);
    let err = cmd_eval(
        &fx.config,
        &data,
        &fx.path("nope"),
        None,
        false,
        &fx.path("m.txt"),
        None,
    )
    .unwrap_err();
    assert!(err.to_string().contains("no model at stem"), "{err}");
}

#[test]
fn bad_config_is_reported_with_the_offending_key() {
    let fx = Fixture::new("seed = 1\nwat = true\n[source.fading]\n");
    let err = cmd_gen(&fx.config, &fx.path("d.bin"), None).unwrap_err();
    assert!(err.to_string().contains("wat"), "{err}");
}

#[test]
fn eval_on_training_data_is_at_least_as_agreeable() {
    // A small replay pool makes the fit optimistic on its own rows.
    let text = r#"
seed = 3
rows = 128

[source.fading]
dim = 4
n1_dbm = 0.0
n2_dbm = 0.0

[vpq]
q = 16
steps_max = 1500
steps_predictor_only = 0
batch_size = 64
enc_hidden = [32, 32]
pred_hidden = [16]
lr = 0.003

[eval]
test_size = 4096
trials = 10
rs_m = [1]
mi_batch = 64
"#;
    let fx = Fixture::new(text);
    let train = fx.gen("train.bin", None);
    let held_out_text = text.replace("rows = 128", "rows = 4096");
    fs::write(&fx.config, &held_out_text).unwrap();
    let held_out = fx.gen("test.bin", Some(77));
    fs::write(&fx.config, text).unwrap();
    let (model, _, _) = fx.train(&train, "model");
    let on_train = cmd_eval(
        &fx.config,
        &train,
        &model,
        None,
        false,
        &fx.path("m_train.txt"),
        None,
    )
    .unwrap();
    let on_held_out = cmd_eval(
        &fx.config,
        &held_out,
        &model,
        None,
        false,
        &fx.path("m_test.txt"),
        None,
    )
    .unwrap();
    assert!(
        on_train.agree_rate >= on_held_out.agree_rate,
        "train {} vs held-out {}",
        on_train.agree_rate,
        on_held_out.agree_rate
    );
}

#[test]
fn dataset_source_replays_into_training_shapes() {
    let fx = Fixture::new(EVE_CONFIG);
    let data = fx.gen("train.bin", None);
    let src = DatasetSource::new(read_dataset(&data).unwrap());
    assert_eq!((src.x_dim(), src.y_dim(), src.z_dim()), (4, 4, 4));
}
