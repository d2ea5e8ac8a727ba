use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

const CONFIG: &str = r#"
[network]
layers = 7
hidden = 16
latent = 8
max_bandwidth = 64.0

[training]
steps = 200
batch_shapes = 2
samples_per_shape = 128

[dataset]
analytic = ["sphere", "torus"]
samples_per_shape = 4000

[metrics]
chamfer_points = 400
emd_points = 64

[metrics.meshing]
base_resolution = 16
target_resolution = 32
"#;

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn lodsdf(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lodsdf"))
        .args(args.iter().map(|a| a.as_ref()))
        .output()
        .expect("binary runs")
}

fn check(out: Output) -> Output {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Config and checkpoint written once by the `train` command.
fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let fx = Fixture {
            dir: tempfile::tempdir().unwrap(),
        };
        std::fs::write(fx.path("run.toml"), CONFIG).unwrap();
        check(lodsdf(&[&"train", &fx.path("run.toml"), &"-o", &fx.path("model.lods")]));
        fx
    })
}

fn stats(obj: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(obj.with_extension("json")).unwrap()).unwrap()
}

#[test]
fn train_writes_checkpoint_and_history() {
    let fx = fixture();
    assert!(fx.path("model.lods").is_file());
    let history = std::fs::read_to_string(fx.path("model.csv")).unwrap();
    assert_eq!(history.lines().count(), 201);
}

#[test]
fn mesh_output_is_deterministic() {
    let fx = fixture();
    let run = |name: &str| {
        let out = fx.path(name);
        check(lodsdf(&[&"mesh", &fx.path("model.lods"), &"--shape-id", &"1", &"--level", &"4", &"--res", &"32", &"-o", &out]));
        std::fs::read(&out).unwrap()
    };
    let (a, b) = (run("a.obj"), run("b.obj"));
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().lines().any(|l| l.starts_with("f ")));
    assert!(stats(&fx.path("a.obj"))["evals"].as_u64().unwrap() > 0);
}

#[test]
fn refinement_spends_fewer_fine_queries() {
    let fx = fixture();
    let plain = fx.path("plain.obj");
    let refined = fx.path("refined.obj");
    let model = fx.path("model.lods");
    check(lodsdf(&[&"mesh", &model, &"--shape-id", &"0", &"--level", &"5", &"--res", &"64", &"-o", &plain]));
    check(lodsdf(&[
        &"mesh", &model, &"--shape-id", &"0", &"--level", &"5", &"--refine-from", &"2", &"--res", &"64", &"-o", &refined,
    ]));
    let (p, r) = (stats(&plain), stats(&refined));
    assert!(r["evals"].as_u64().unwrap() < p["evals"].as_u64().unwrap());
    assert!(r["coarse_evals"].as_u64().is_some());
    assert!(p["coarse_evals"].is_null());
}

#[test]
fn level_zero_is_a_usage_error() {
    let fx = fixture();
    let out = lodsdf(&[&"mesh", &fx.path("model.lods"), &"--shape-id", &"0", &"--level", &"0", &"-o", &fx.path("z.obj")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("levels start at 1"));
}

#[test]
fn out_of_range_level_fails_cleanly() {
    let fx = fixture();
    let out = lodsdf(&[&"mesh", &fx.path("model.lods"), &"--shape-id", &"0", &"--level", &"9", &"-o", &fx.path("z.obj")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("level 9"));
    assert!(!fx.path("z.obj").exists());
}

#[test]
fn tau_needs_a_coarse_level() {
    let fx = fixture();
    let out = lodsdf(&[&"mesh", &fx.path("model.lods"), &"--shape-id", &"0", &"--level", &"3", &"--tau", &"0.1", &"-o", &fx.path("t.obj")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let fx = fixture();
    let bad = fx.path("bad.toml");
    std::fs::write(&bad, "[training]\nstepz = 3\n").unwrap();
    let out = lodsdf(&[&"train", &bad, &"-o", &fx.path("bad.lods")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stepz"));
}

#[test]
fn sample_then_masked_fit_then_mesh_from_latent() {
    let fx = fixture();
    let samples = fx.path("samples");
    check(lodsdf(&[&"sample", &fx.path("run.toml"), &"-o", &samples]));
    let torus = samples.join("torus.sdfs");
    assert!(torus.is_file());
    let latent = fx.path("latent.json");
    check(lodsdf(&[
        &"fit", &fx.path("model.lods"), &torus, &"--mask", &"halfspace:x<0", &"--steps", &"50", &"-o", &latent,
    ]));
    let code: Vec<f64> = serde_json::from_str(&std::fs::read_to_string(&latent).unwrap()).unwrap();
    assert_eq!(code.len(), 8);
    assert!(code.iter().all(|v| v.is_finite()));
    let out = fx.path("fitted.obj");
    check(lodsdf(&[&"mesh", &fx.path("model.lods"), &"--latent-file", &latent, &"--level", &"3", &"--res", &"32", &"-o", &out]));
    assert!(out.is_file());
}

#[test]
fn metrics_and_spectrum_report() {
    let fx = fixture();
    let csv = fx.path("metrics.csv");
    check(lodsdf(&[&"metrics", &fx.path("model.lods"), &fx.path("run.toml"), &"-o", &csv]));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("level,cd_e5,ed_e4,sr_e3,evals"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(csv.with_extension("json")).unwrap()).unwrap();
    assert!(report["ed_non_increasing"].is_boolean());

    let out = check(lodsdf(&[&"spectrum", &fx.path("model.lods"), &"--level", &"2", &"--lines", &"4"]));
    let spectrum: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(spectrum["fractions"].as_array().unwrap().len(), 4);
    assert!(spectrum["max_fraction"].as_f64().unwrap() < 1e-3);
}
