use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn afclab(args: &[&str], env_dir: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_afclab"));
    c.args(args).env_remove("AFCLAB_OUTPUT_DIR");
    if let Some(d) = env_dir {
        c.env("AFCLAB_OUTPUT_DIR", d);
    }
    c.output().expect("spawn afclab")
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).to_string_lossy().into_owned()
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn latency_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = afclab(&["latency", "-c", &config("latency.toml"), "--output-dir", dir.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = read(dir.path().join("latency.csv"));
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..6], ["10", "4", "9", "122", "69", "3"]);
    assert!(row[6].starts_with("0.434"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("sync=122 async=69 reduction=0.434"));
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["kind"], "latency");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn sweep_row_format() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = afclab(
        &[
            "latency-sweep",
            "--set",
            "latency_sweep.deltas_ms=[10]",
            "--set",
            "latency_sweep.delta_tildes_ms=[4]",
            "--set",
            "latency_sweep.rounds=9",
            "--output-dir",
            d,
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        read(dir.path().join("latency_sweep.csv")),
        "delta_ms,delta_tilde_ms,mode,delta_prime_ms,total_ms\n10,4,sync,10,122\n10,4,async,3,69\n"
    );
}

#[test]
fn gradcheck_default_tiny_model_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = afclab(&["gradcheck", "--set", "seed=3", "--output-dir", dir.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = read(dir.path().join("gradcheck.csv"));
    for line in csv.lines().skip(1) {
        let rel: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(rel < 1e-4, "{line}");
    }
}

#[test]
fn numerical_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = afclab(
        &[
            "gradcheck",
            "--set",
            "seed=3",
            "--set",
            "gradcheck.tolerance=0",
            "--output-dir",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("numerical failure"));
}

#[test]
fn config_errors_exit_two_with_key_path() {
    let cases: &[(&[&str], &str)] = &[
        (&["latency", "--set", "latency.delta_ms=10", "--set", "latency.delta_tilde_ms=4"], "latency.rounds"),
        (&["latency", "-c", &config("latency.toml"), "--set", "latency.delta=3"], "latency"),
        (&["latency", "-c", &config("latency.toml"), "--set", "latency.rounds=\"nine\""], "latency.rounds"),
        (&["timeline", "-c", &config("latency.toml")], "kind"),
        (&["per-sweep", "-c", &config("per-sweep-harq.toml"), "--set", "seed=\"x\""], "seed"),
        (&["train", "--set", "seed=1", "--set", "train.model.d_modle=3"], "d_modle"),
        (&["train", "--set", "seed=1", "--set", "train.settings.batch_sise=3"], "train.settings"),
        (
            &[
                "per-sweep",
                "--set",
                "per_sweep.snr_grid_db=[0]",
                "--set",
                "per_sweep.link.type=\"uncoded\"",
                "--set",
                "per_sweep.link.k=4",
            ],
            "seed",
        ),
        (
            &[
                "per-sweep",
                "--set",
                "seed=1",
                "--set",
                "per_sweep.snr_grid_db=[0]",
                "--set",
                "per_sweep.link.type=\"afc\"",
                "--set",
                "per_sweep.link.checkpoint=\"/nonexistent/model.afc\"",
            ],
            "per_sweep.link.checkpoint",
        ),
        (
            &[
                "latency",
                "--set",
                "latency.delta_ms=10",
                "--set",
                "latency.delta_tilde_ms=4",
                "--set",
                "latency.rounds=1",
            ],
            "pipeline",
        ),
        (
            &[
                "latency",
                "--set",
                "latency.delta_ms=10",
                "--set",
                "latency.delta_tilde_ms=4",
                "--set",
                "latency.rounds=9",
                "--set",
                "coverage.path_loss.exponent=2",
            ],
            "coverage",
        ),
        (&["latency", "-c", "/nonexistent.toml"], "cannot read config"),
    ];
    for (args, needle) in cases {
        let dir = tempfile::tempdir().unwrap();
        let mut a = args.to_vec();
        a.extend(["--output-dir", dir.path().to_str().unwrap()]);
        let o = afclab(&a, None);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{args:?}: {}", stderr(&o));
        assert!(!dir.path().join("manifest.json").exists());
    }
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = afclab(&["complexity"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["complexity.csv", "reduction.csv", "fpga.csv", "manifest.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn json_format() {
    let dir = tempfile::tempdir().unwrap();
    let o = afclab(
        &[
            "latency",
            "-c",
            &config("latency.toml"),
            "--set",
            "format=\"json\"",
            "--output-dir",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&read(dir.path().join("latency.json"))).unwrap();
    assert_eq!(v[0]["async_ms"], 69.0);
}

fn result_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn manifest_hash(dir: &Path) -> String {
    let m: serde_json::Value = serde_json::from_str(&read(dir.join("manifest.json"))).unwrap();
    m["config_sha256"].as_str().unwrap().to_string()
}

#[test]
fn reruns_are_byte_identical_across_execution_modes() {
    let runs: &[&[&str]] = &[
        &[
            "per-sweep",
            "-c",
            &config("per-sweep-harq.toml"),
            "--set",
            "per_sweep.snr_grid_db=[-6,-4]",
            "--set",
            "per_sweep.stop.max_trials=3000",
        ],
        &[
            "train",
            "--set",
            "seed=5",
            "--set",
            "train.curriculum.total_steps=30",
            "--set",
            "train.settings.batch_size=16",
            "--set",
            "train.settings.chunks=4",
            "--set",
            "train.settings.eval_snr_grid=[0,4]",
            "--set",
            "train.eval_stop.max_trials=500",
        ],
        &[
            "timeline",
            "-c",
            &config("timeline.toml"),
            "--set",
            "timeline.jitter={type=\"exponential\",mean_ms=3.0,seed=4}",
        ],
    ];
    for args in runs {
        let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
        for (i, d) in dirs.iter().enumerate() {
            let mut a = args.to_vec();
            a.extend(["--output-dir", d.path().to_str().unwrap()]);
            let exec = if i == 2 { "execution=\"sequential\"" } else { "execution=\"parallel\"" };
            a.extend(["--set", exec]);
            let o = afclab(&a, None);
            assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        }
        let first = result_files(dirs[0].path());
        assert!(!first.is_empty());
        assert_eq!(first, result_files(dirs[1].path()), "{args:?}");
        assert_eq!(first, result_files(dirs[2].path()), "{args:?}");
        assert_eq!(manifest_hash(dirs[0].path()), manifest_hash(dirs[1].path()));
        assert_ne!(manifest_hash(dirs[0].path()), manifest_hash(dirs[2].path()));
    }
}

#[test]
fn trained_checkpoint_feeds_per_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train");
    let o = afclab(
        &[
            "train",
            "--set",
            "seed=2",
            "--set",
            "train.curriculum.total_steps=20",
            "--set",
            "train.settings.batch_size=16",
            "--set",
            "train.settings.chunks=2",
            "--set",
            "train.settings.eval_snr_grid=[]",
            "--output-dir",
            train.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(read(train.join("loss.csv")).lines().count(), 21);
    assert_eq!(read(train.join("robustness.csv")), "snr_db,per,ci_low,ci_high,trials,errors\n");
    let ck = train.join("model.afc");
    let ck = ck.to_str().unwrap();
    let links = [
        format!("per_sweep.link={{type=\"afc\",checkpoint=\"{ck}\",feedback_snr_db=20.0}}"),
        format!(
            "per_sweep.link={{type=\"afc_session\",checkpoint=\"{ck}\",round_period_ms=7.0,\
             feedback={{seed=3,kind={{type=\"mean_reverting\",mean=20.0,reversion_rate=0.001,volatility=0.136,step_ms=1.0}}}}}}"
        ),
    ];
    for (i, link) in links.iter().enumerate() {
        let out = dir.path().join(format!("per{i}"));
        let o = afclab(
            &[
                "per-sweep",
                "--set",
                "seed=1",
                "--set",
                "per_sweep.snr_grid_db=[0,6]",
                "--set",
                link,
                "--set",
                "per_sweep.stop={max_trials=300,target_errors=1000}",
                "--output-dir",
                out.to_str().unwrap(),
            ],
            None,
        );
        assert_eq!(o.status.code(), Some(0), "{link}: {}", stderr(&o));
        let csv = read(out.join("per.csv"));
        assert_eq!(csv.lines().count(), 3, "{csv}");
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",300,") || l.split(',').nth(4) == Some("300")), "{csv}");
    }
}

#[test]
fn example_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        let text = read(p.clone());
        let kind_name = text.lines().find_map(|l| l.strip_prefix("kind = \"")).unwrap().trim_end_matches('"');
        let kind = afclab_cli::Kind::ALL.into_iter().find(|k| k.name() == kind_name).unwrap();
        afclab_cli::ExperimentConfig::parse(kind, &text, &[]).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        n += 1;
    }
    assert!(n >= 8);
}
