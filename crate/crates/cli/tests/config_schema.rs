//! Every tunable of every core module must be reachable from a
//! documented config key, and every documented key must exist.

use std::collections::BTreeSet;

use serde_json::Value;

use afclab_cli::config::{
    ComplexityParams, CoverageParams, ExperimentConfig, GradcheckParams, LatencyParams, LatencySweepParams, ModelSpec,
    Preset, SCHEMA,
};
use afclab_core::analysis::{CoverageCase, FpgaSpec, LinkBudget, PathLossModel};
use afclab_core::channel::{SnrDb, SnrTraceConfig, TraceKind};
use afclab_core::codec::{HarqConfig, StopRule};
use afclab_core::neural::AfcConfig;
use afclab_core::pipeline::{Jitter, TimingParams};
use afclab_core::training::{AlphaSchedule, CurriculumConfig, TrainConfig};

/// Leaf key paths of a serialized value. Objects tagged with `type` put
/// their other keys under `<variant>`; arrays of objects become `[]`.
fn leaves(prefix: &str, v: &Value, out: &mut BTreeSet<String>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            let variant = m.get("type").and_then(Value::as_str);
            for (k, child) in m {
                if k == "type" {
                    out.insert(join(k));
                    continue;
                }
                let p = match variant {
                    Some(t) => join(&format!("<{t}>.{k}")),
                    None => join(k),
                };
                leaves(&p, child, out);
            }
        }
        Value::Array(a) if a.first().is_some_and(Value::is_object) => {
            for item in a {
                leaves(&format!("{prefix}[]"), item, out);
            }
        }
        _ => {
            out.insert(prefix.to_string());
        }
    }
}

fn keys<T: serde::Serialize>(prefix: &str, v: &T) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    leaves(prefix, &serde_json::to_value(v).unwrap(), &mut out);
    out
}

fn without(mut s: BTreeSet<String>, key: &str) -> BTreeSet<String> {
    assert!(s.remove(key), "registry lost {key}");
    s
}

/// Parameter registries of the core modules mapped to where the config
/// exposes them.
fn registry() -> BTreeSet<String> {
    let mut all = BTreeSet::new();
    let with_some = AfcConfig { sparse_ff_window: Some(2), ..AfcConfig::full() };
    let model = keys("train.model", &with_some);
    assert_eq!(model, keys("train.model", &ModelSpec::preset(Preset::Light).config));
    all.extend(model);
    all.insert("train.model.preset".into());
    for variant in [AlphaSchedule::Linear { k_start: 0, k_end: 1 }, AlphaSchedule::Exponential { rate: 0.1 }] {
        all.extend(keys("train.curriculum", &CurriculumConfig { alpha: variant, ..CurriculumConfig::default() }));
    }
    let tc = TrainConfig { fixed_snr_db: Some(0.0), feedback_snr_db: Some(10.0), ..TrainConfig::default() };
    all.extend(without(keys("train.settings", &tc), "train.settings.seed"));
    all.extend(keys("train.eval_stop", &StopRule::default()));
    all.extend(keys("per_sweep.stop", &StopRule::default()));
    all.extend(keys("per_sweep.link.<harq>", &HarqConfig::default()));
    let traces = [
        SnrTraceConfig::fixed(SnrDb::db(1.0)),
        SnrTraceConfig {
            kind: TraceKind::MeanReverting {
                mean: SnrDb::db(0.0),
                reversion_rate: 1.0,
                volatility: 1.0,
                step_ms: 1.0,
                initial: Some(SnrDb::db(0.0)),
            },
            seed: 1,
        },
        SnrTraceConfig { kind: TraceKind::Piecewise { points: vec![(0.0, SnrDb::db(0.0))] }, seed: 0 },
    ];
    for t in &traces {
        all.extend(keys("per_sweep.link.<afc_session>.feedback", t));
    }
    all.extend(keys("timeline.timing", &TimingParams::from_intervals(10.0, 4.0, 9)));
    for j in [
        Jitter::None,
        Jitter::PerRound { extra_ms: vec![1.0] },
        Jitter::Uniform { max_ms: 1.0, seed: 0 },
        Jitter::Exponential { mean_ms: 1.0, seed: 0 },
    ] {
        all.extend(keys("timeline.jitter", &j));
    }
    all.extend(keys("coverage.path_loss", &PathLossModel::default()));
    all.extend(keys("coverage.cases", &CoverageCase::harq_baselines()));
    let budget = LinkBudget { p_tx_dbm: 0.0, g_tx_dbi: 0.0, g_rx_dbi: 0.0, sensitivity_dbm: -90.0 };
    all.extend(keys("coverage.budget", &budget));
    all.extend(keys("complexity.fpga", &FpgaSpec::seven_series()));
    let gc = afclab_core::neural::gradcheck::GradcheckSettings::default();
    all.extend(without(keys("gradcheck", &gc), "gradcheck.seed"));
    all
}

/// Keys that exist only at the config layer.
fn harness_keys() -> BTreeSet<String> {
    let mut all = BTreeSet::new();
    let top = ExperimentConfig::parse(afclab_cli::Kind::Complexity, "seed = 1\noutput_dir = \"x\"", &[]).unwrap();
    let mut top_keys = keys("", &top);
    top_keys.retain(|k| !k.starts_with("complexity"));
    all.extend(top_keys);
    let lat = LatencyParams { delta_ms: 1.0, delta_tilde_ms: 1.0, rounds: 2, min_forward_ms: 1.0 };
    all.extend(keys("latency", &lat));
    let sweep = LatencySweepParams { deltas_ms: vec![1.0], delta_tildes_ms: vec![1.0], rounds: 2 };
    all.extend(keys("latency_sweep", &sweep));
    all.extend(keys("gradcheck", &GradcheckParams::default()));
    for k in [
        "snr_grid_db",
        "link.type",
        "link.<uncoded>.k",
        "link.<afc>.checkpoint",
        "link.<afc>.feedback_snr_db",
        "link.<afc_session>.checkpoint",
        "link.<afc_session>.noiseless_feedback",
        "link.<afc_session>.round_period_ms",
    ] {
        all.insert(format!("per_sweep.{k}"));
    }
    for k in ["mode", "lag"] {
        all.insert(format!("timeline.{k}"));
    }
    let c = serde_json::to_value(ComplexityParams::default()).unwrap();
    let model_keys = keys("", &with_preset(AfcConfig::light()));
    for name in ["full", "light"] {
        let mut got: BTreeSet<String> = c[name].as_object().unwrap().keys().cloned().collect();
        // TOML has no null, so an unset window is simply absent.
        got.insert("sparse_ff_window".into());
        assert_eq!(got, model_keys, "complexity.{name} must take the same keys as train.model");
        all.insert(format!("complexity.{name}.<model>"));
    }
    let cov = CoverageParams::default();
    assert_eq!(cov.cases, CoverageCase::harq_baselines());
    all
}

fn with_preset(c: AfcConfig) -> Value {
    let mut v = serde_json::to_value(c).unwrap();
    v["preset"] = "full".into();
    v
}

#[test]
fn schema_covers_every_registry_key_and_nothing_else() {
    let documented: BTreeSet<String> = SCHEMA.iter().map(|(k, _)| k.to_string()).collect();
    assert_eq!(documented.len(), SCHEMA.len(), "duplicate schema keys");
    let mut reachable = registry();
    reachable.extend(harness_keys());
    let undocumented: Vec<_> = reachable.difference(&documented).collect();
    let stale: Vec<_> = documented.difference(&reachable).collect();
    assert!(undocumented.is_empty(), "tunables without a config key: {undocumented:?}");
    assert!(stale.is_empty(), "documented keys with no tunable: {stale:?}");
}

#[test]
fn every_documented_key_is_accepted_by_the_parser() {
    // One override per registry key, set to its default value, must parse.
    let base = [
        ("train", "seed = 1\n[train.model]\nsparse_ff_window = 2\npreset = \"light\"\n[train.settings]\nfixed_snr_db = 0.0\nfeedback_snr_db = 5.0\n"),
        ("coverage", "[coverage.budget]\np_tx_dbm = 0.0\ng_tx_dbi = 0.0\ng_rx_dbi = 0.0\nsensitivity_dbm = -90.0\n"),
    ];
    for (kind, text) in base {
        let k = afclab_cli::Kind::ALL.into_iter().find(|x| x.name() == kind).unwrap();
        ExperimentConfig::parse(k, text, &[]).unwrap();
    }
    let descriptions: Vec<&str> = SCHEMA.iter().map(|(_, d)| *d).collect();
    assert!(descriptions.iter().all(|d| !d.is_empty()));
}
