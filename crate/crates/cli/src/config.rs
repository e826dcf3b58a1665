//! Experiment configuration: a TOML file plus `--set key=value`
//! overrides, parsed strictly so every error names a key path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use afclab_core::analysis::{CoverageCase, FpgaSpec, LinkBudget, PathLossModel};
use afclab_core::channel::SnrTraceConfig;
use afclab_core::codec::{HarqConfig, StopRule};
use afclab_core::exec::Execution;
use afclab_core::neural::AfcConfig;
use afclab_core::pipeline::{Jitter, Mode, TimingParams};
use afclab_core::training::{CurriculumConfig, TrainConfig};

use crate::emit::Format;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    PerSweep,
    Latency,
    LatencySweep,
    Coverage,
    Train,
    Gradcheck,
    Complexity,
    Timeline,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::PerSweep,
        Kind::Latency,
        Kind::LatencySweep,
        Kind::Coverage,
        Kind::Train,
        Kind::Gradcheck,
        Kind::Complexity,
        Kind::Timeline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::PerSweep => "per-sweep",
            Kind::Latency => "latency",
            Kind::LatencySweep => "latency-sweep",
            Kind::Coverage => "coverage",
            Kind::Train => "train",
            Kind::Gradcheck => "gradcheck",
            Kind::Complexity => "complexity",
            Kind::Timeline => "timeline",
        }
    }

    /// Table holding this kind's parameters.
    pub fn section(self) -> &'static str {
        match self {
            Kind::PerSweep => "per_sweep",
            Kind::Latency => "latency",
            Kind::LatencySweep => "latency_sweep",
            Kind::Coverage => "coverage",
            Kind::Train => "train",
            Kind::Gradcheck => "gradcheck",
            Kind::Complexity => "complexity",
            Kind::Timeline => "timeline",
        }
    }

    pub fn stochastic(self) -> bool {
        matches!(self, Kind::PerSweep | Kind::Train | Kind::Gradcheck)
    }

    /// Kinds whose section may be omitted entirely.
    fn section_optional(self) -> bool {
        matches!(self, Kind::Coverage | Kind::Gradcheck | Kind::Complexity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Json => Format::Json,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_sweep: Option<PerSweepParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_sweep: Option<LatencySweepParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradcheck: Option<GradcheckParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complexity: Option<ComplexityParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeline: Option<TimelineParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerSweepParams {
    pub snr_grid_db: Vec<f64>,
    #[serde(default)]
    pub stop: StopRule,
    pub link: LinkSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum LinkSpec {
    Uncoded {
        k: usize,
    },
    Harq(HarqConfig),
    /// Trained model at a fixed uplink SNR per grid point.
    Afc {
        checkpoint: PathBuf,
        /// Noiseless feedback when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        feedback_snr_db: Option<f64>,
    },
    /// Trained model driven through the round-by-round session engine,
    /// with a possibly time-varying feedback channel.
    AfcSession {
        checkpoint: PathBuf,
        feedback: SnrTraceConfig,
        #[serde(default)]
        noiseless_feedback: bool,
        round_period_ms: f64,
    },
}

fn default_min_forward() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyParams {
    pub delta_ms: f64,
    pub delta_tilde_ms: f64,
    pub rounds: usize,
    #[serde(default = "default_min_forward")]
    pub min_forward_ms: f64,
}

impl LatencyParams {
    pub fn timing(&self) -> TimingParams {
        let tau_tx_ms = self.min_forward_ms.min(self.delta_ms);
        TimingParams {
            tau_enc_ms: self.delta_ms - tau_tx_ms,
            tau_tx_ms,
            tau_fb_ms: self.delta_tilde_ms,
            rounds: self.rounds,
            min_forward_ms: self.min_forward_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencySweepParams {
    pub deltas_ms: Vec<f64>,
    pub delta_tildes_ms: Vec<f64>,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageParams {
    #[serde(default)]
    pub path_loss: PathLossModel,
    #[serde(default = "CoverageCase::harq_baselines")]
    pub cases: Vec<CoverageCase>,
    /// Baseline link budget; when present, absolute ranges are reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<LinkBudget>,
}

impl Default for CoverageParams {
    fn default() -> Self {
        CoverageParams { path_loss: PathLossModel::default(), cases: CoverageCase::harq_baselines(), budget: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Tiny,
    Full,
    Light,
}

impl Preset {
    pub fn config(self) -> AfcConfig {
        match self {
            Preset::Tiny => AfcConfig::tiny(),
            Preset::Full => AfcConfig::full(),
            Preset::Light => AfcConfig::light(),
        }
    }
}

/// A model preset with individual fields overridden, e.g.
/// `{ preset = "tiny", d_model = 8 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "toml::Table", into = "toml::Table")]
pub struct ModelSpec {
    pub preset: Preset,
    pub config: AfcConfig,
}

impl ModelSpec {
    pub fn preset(preset: Preset) -> Self {
        ModelSpec { preset, config: preset.config() }
    }
}

impl TryFrom<toml::Table> for ModelSpec {
    type Error = String;

    fn try_from(mut t: toml::Table) -> Result<Self, String> {
        let preset = match t.remove("preset") {
            None => Preset::default(),
            Some(v) => Preset::deserialize(v).map_err(|e| format!("preset: {e}"))?,
        };
        let mut base = toml::Table::try_from(preset.config()).map_err(|e| e.to_string())?;
        for (k, v) in t {
            base.insert(k, v);
        }
        let config = decode::<AfcConfig>(toml::Value::Table(base)).map_err(|e| e.to_string())?;
        Ok(ModelSpec { preset, config })
    }
}

impl From<ModelSpec> for toml::Table {
    fn from(m: ModelSpec) -> toml::Table {
        let mut t = toml::Table::try_from(&m.config).unwrap_or_default();
        t.insert("preset".into(), toml::Value::try_from(m.preset).unwrap_or(toml::Value::from("tiny")));
        t
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::preset(Preset::Tiny)
    }
}

/// Curriculum with unspecified keys taken from the defaults. When only
/// `total_steps` is given, the linear schedule ends at that step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "toml::Table", into = "toml::Table")]
pub struct CurriculumSpec(pub CurriculumConfig);

impl TryFrom<toml::Table> for CurriculumSpec {
    type Error = String;

    fn try_from(t: toml::Table) -> Result<Self, String> {
        let steps = match t.get("total_steps") {
            Some(v) => u64::deserialize(v.clone()).map_err(|e| format!("total_steps: {e}"))?,
            None => CurriculumConfig::default().total_steps,
        };
        let mut base = toml::Table::try_from(CurriculumConfig::linear(steps)).map_err(|e| e.to_string())?;
        base.extend(t);
        decode(toml::Value::Table(base)).map(CurriculumSpec)
    }
}

impl From<CurriculumSpec> for toml::Table {
    fn from(c: CurriculumSpec) -> toml::Table {
        toml::Table::try_from(&c.0).unwrap_or_default()
    }
}

fn default_train_settings() -> toml::Table {
    toml::Table::new()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainParams {
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub curriculum: CurriculumSpec,
    /// Optimizer, batch and channel settings. The seed comes from the
    /// top-level `seed` key.
    #[serde(default = "default_train_settings")]
    pub settings: toml::Table,
    /// Early-stop rule for the post-training robustness sweep.
    #[serde(default)]
    pub eval_stop: StopRule,
}

impl TrainParams {
    pub fn train_config(&self, seed: u64) -> Result<TrainConfig, CliError> {
        if self.settings.contains_key("seed") {
            return Err(CliError::Config("train.settings.seed: set the top-level `seed` instead".into()));
        }
        let mut base = toml::Table::try_from(TrainConfig::default()).map_err(|e| CliError::Internal(e.to_string()))?;
        for (k, v) in &self.settings {
            base.insert(k.clone(), v.clone());
        }
        base.insert("seed".into(), toml::Value::Integer(seed as i64));
        decode::<TrainConfig>(toml::Value::Table(base)).map_err(|e| CliError::Config(format!("train.settings.{e}")))
    }
}

fn default_tolerance() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckParams {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    /// Largest accepted relative error.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_step() -> f64 {
    afclab_core::neural::gradcheck::DEFAULT_STEP
}

fn default_floor() -> f64 {
    afclab_core::neural::gradcheck::DEFAULT_FLOOR
}

impl Default for GradcheckParams {
    fn default() -> Self {
        GradcheckParams { step: default_step(), floor: default_floor(), tolerance: default_tolerance() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityParams {
    #[serde(default = "full_spec")]
    pub full: ModelSpec,
    #[serde(default = "light_spec")]
    pub light: ModelSpec,
    #[serde(default = "FpgaSpec::seven_series")]
    pub fpga: Vec<FpgaSpec>,
}

fn full_spec() -> ModelSpec {
    ModelSpec::preset(Preset::Full)
}

fn light_spec() -> ModelSpec {
    ModelSpec::preset(Preset::Light)
}

impl Default for ComplexityParams {
    fn default() -> Self {
        ComplexityParams { full: full_spec(), light: light_spec(), fpga: FpgaSpec::seven_series() }
    }
}

fn default_lag() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimelineParams {
    pub timing: TimingParams,
    pub mode: Mode,
    #[serde(default = "default_lag")]
    pub lag: usize,
    #[serde(default)]
    pub jitter: Jitter,
}

/// Deserializes with the failing key path in the error message.
pub fn decode<T: serde::de::DeserializeOwned>(v: toml::Value) -> Result<T, String> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let full = e.inner().to_string();
        let msg = full.lines().next().unwrap_or_default().to_string();
        let missing = msg.strip_prefix("missing field `").and_then(|r| r.split('`').next());
        match (path.as_str(), missing) {
            (".", Some(f)) => format!("{f}: {msg}"),
            (p, Some(f)) => format!("{p}.{f}: {msg}"),
            (".", None) => msg,
            (p, None) => format!("{p}: {msg}"),
        }
    })
}

/// Applies one `a.b.c=value` override. The value is parsed as a TOML
/// value and falls back to a plain string.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key `{key}` is malformed")));
    }
    let mut table = root;
    for (i, p) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: `{}` is not a table", parts[..=i].join("."))))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Parses `text` with `overrides` applied, then validates it for `kind`.
    pub fn parse(kind: Kind, text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut root: toml::Table = text.parse().map_err(|e| CliError::Config(format!("invalid TOML: {e}")))?;
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let mut cfg: ExperimentConfig = decode(toml::Value::Table(root)).map_err(CliError::Config)?;
        cfg.validate(kind)?;
        if kind.section_optional() {
            match kind {
                Kind::Coverage => {
                    cfg.coverage.get_or_insert_with(CoverageParams::default);
                }
                Kind::Gradcheck => {
                    cfg.gradcheck.get_or_insert_with(GradcheckParams::default);
                }
                Kind::Complexity => {
                    cfg.complexity.get_or_insert_with(ComplexityParams::default);
                }
                _ => {}
            }
        }
        cfg.kind = Some(kind);
        Ok(cfg)
    }

    pub fn load(kind: Kind, path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::parse(kind, &text, overrides)
    }

    fn present_sections(&self) -> Vec<Kind> {
        Kind::ALL
            .into_iter()
            .filter(|k| match k {
                Kind::PerSweep => self.per_sweep.is_some(),
                Kind::Latency => self.latency.is_some(),
                Kind::LatencySweep => self.latency_sweep.is_some(),
                Kind::Coverage => self.coverage.is_some(),
                Kind::Train => self.train.is_some(),
                Kind::Gradcheck => self.gradcheck.is_some(),
                Kind::Complexity => self.complexity.is_some(),
                Kind::Timeline => self.timeline.is_some(),
            })
            .collect()
    }

    fn validate(&self, kind: Kind) -> Result<(), CliError> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(CliError::Config(format!(
                    "kind: config is for `{}` but `{}` was requested",
                    k.name(),
                    kind.name()
                )));
            }
        }
        let present = self.present_sections();
        if let Some(other) = present.iter().find(|k| **k != kind) {
            return Err(CliError::Config(format!(
                "{}: section does not belong to a `{}` run",
                other.section(),
                kind.name()
            )));
        }
        if present.is_empty() && !kind.section_optional() {
            return Err(CliError::Config(format!(
                "{}: missing required section for `{}`",
                kind.section(),
                kind.name()
            )));
        }
        if kind.stochastic() && self.seed.is_none() {
            return Err(CliError::Config(format!("seed: required for `{}`", kind.name())));
        }
        if let Some(p) = &self.per_sweep {
            match &p.link {
                LinkSpec::Afc { checkpoint, .. } | LinkSpec::AfcSession { checkpoint, .. } if !checkpoint.is_file() => {
                    return Err(CliError::Config(format!(
                        "per_sweep.link.checkpoint: file {} does not exist",
                        checkpoint.display()
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Canonical JSON of the settings that determine the results; the
    /// output location is excluded.
    pub fn canonical_json(&self) -> Result<String, CliError> {
        let mut c = self.clone();
        c.output_dir = None;
        serde_json::to_string(&c).map_err(|e| CliError::Internal(e.to_string()))
    }
}

/// Every documented key, as `section.field` paths; `[]` marks an array of
/// tables and `<type>` a variant-specific key.
pub const SCHEMA: &[(&str, &str)] = &[
    ("kind", "experiment kind; must match the subcommand"),
    ("seed", "base RNG seed; required for per-sweep, train and gradcheck"),
    ("output_dir", "output directory; overridden by --output-dir"),
    ("execution", "parallel | sequential"),
    ("format", "csv | json"),
    ("per_sweep.snr_grid_db", "uplink SNR grid in dB"),
    ("per_sweep.stop.max_trials", "trial cap per SNR point"),
    ("per_sweep.stop.target_errors", "packet errors that end an SNR point"),
    ("per_sweep.link.type", "uncoded | harq | afc | afc_session"),
    ("per_sweep.link.<uncoded>.k", "information bits"),
    ("per_sweep.link.<harq>.k", "information bits"),
    ("per_sweep.link.<harq>.max_attempts", "HARQ attempt budget"),
    ("per_sweep.link.<harq>.crc16", "ACK from CRC-16 instead of a genie check"),
    ("per_sweep.link.<afc>.checkpoint", "trained model file"),
    ("per_sweep.link.<afc>.feedback_snr_db", "feedback SNR; noiseless when absent"),
    ("per_sweep.link.<afc_session>.checkpoint", "trained model file"),
    ("per_sweep.link.<afc_session>.feedback.seed", "feedback trace seed"),
    ("per_sweep.link.<afc_session>.feedback.kind.type", "fixed | mean_reverting | piecewise"),
    ("per_sweep.link.<afc_session>.feedback.kind.<fixed>.level", "feedback SNR in dB"),
    ("per_sweep.link.<afc_session>.feedback.kind.<mean_reverting>.mean", "long-run feedback SNR in dB"),
    ("per_sweep.link.<afc_session>.feedback.kind.<mean_reverting>.reversion_rate", "reversion rate in 1/ms"),
    ("per_sweep.link.<afc_session>.feedback.kind.<mean_reverting>.volatility", "diffusion in dB/sqrt(ms)"),
    ("per_sweep.link.<afc_session>.feedback.kind.<mean_reverting>.step_ms", "trace sampling step"),
    ("per_sweep.link.<afc_session>.feedback.kind.<mean_reverting>.initial", "starting level; the mean when absent"),
    ("per_sweep.link.<afc_session>.feedback.kind.<piecewise>.points", "[time_ms, level_db] breakpoints"),
    ("per_sweep.link.<afc_session>.noiseless_feedback", "ignore the feedback trace and deliver feedback exactly"),
    ("per_sweep.link.<afc_session>.round_period_ms", "spacing of rounds on the trace time axis"),
    ("latency.delta_ms", "forward interval"),
    ("latency.delta_tilde_ms", "feedback interval"),
    ("latency.rounds", "interaction rounds"),
    ("latency.min_forward_ms", "floor of the steady-state feedback gap"),
    ("latency_sweep.deltas_ms", "forward intervals to sweep"),
    ("latency_sweep.delta_tildes_ms", "feedback intervals to sweep"),
    ("latency_sweep.rounds", "interaction rounds"),
    ("coverage.path_loss.pl0_db", "path loss at the reference distance"),
    ("coverage.path_loss.d0_m", "reference distance"),
    ("coverage.path_loss.exponent", "path-loss exponent"),
    ("coverage.cases[].scheme", "baseline name"),
    ("coverage.cases[].delta_snr_db", "SNR advantage over the baseline"),
    ("coverage.cases[].reported_distance_ratio", "externally reported range ratio to check against"),
    ("coverage.budget.p_tx_dbm", "transmit power"),
    ("coverage.budget.g_tx_dbi", "transmit antenna gain"),
    ("coverage.budget.g_rx_dbi", "receive antenna gain"),
    ("coverage.budget.sensitivity_dbm", "baseline receiver sensitivity"),
    ("train.model.preset", "tiny | full | light; other model keys override it"),
    ("train.model.block_size", "bits per block"),
    ("train.model.num_blocks", "blocks per packet"),
    ("train.model.rounds", "interaction rounds"),
    ("train.model.lag", "feedback lag in rounds; 1 is synchronous"),
    ("train.model.fb_per_block", "feedback symbols per block and round"),
    ("train.model.d_model", "encoder width"),
    ("train.model.ff_dim", "encoder feed-forward width"),
    ("train.model.enc_layers", "encoder attention blocks"),
    ("train.model.dec_d_model", "feedback generator and decoder width"),
    ("train.model.dec_ff_dim", "feedback generator and decoder feed-forward width"),
    ("train.model.dec_layers", "decoder attention blocks"),
    ("train.model.fb_layers", "feedback generator attention blocks"),
    ("train.model.snr_emb_dim", "SNR embedding width"),
    ("train.model.snr_hidden", "SNR embedding hidden width"),
    ("train.model.lightweight", "lightweight encoder variant"),
    ("train.model.sparse_ff_window", "feedback window of the sparse encoder"),
    ("train.model.positional", "learned per-block position vectors"),
    ("train.model.init_seed", "weight initialization seed"),
    ("train.curriculum.p_orig.mean_db", "benign anchor mean"),
    ("train.curriculum.p_orig.std_db", "benign anchor std"),
    ("train.curriculum.p_targ.mean_db", "target anchor mean"),
    ("train.curriculum.p_targ.std_db", "target anchor std"),
    ("train.curriculum.alpha.type", "linear | exponential"),
    ("train.curriculum.alpha.<linear>.k_start", "step where the decay starts"),
    ("train.curriculum.alpha.<linear>.k_end", "step where alpha reaches 0"),
    ("train.curriculum.alpha.<exponential>.rate", "decay rate per step"),
    ("train.curriculum.sigma_p", "perturbation std in dB"),
    ("train.curriculum.total_steps", "training steps"),
    ("train.settings.batch_size", "sessions per step"),
    ("train.settings.learning_rate", "Adam step size"),
    ("train.settings.adam.beta1", "first-moment decay"),
    ("train.settings.adam.beta2", "second-moment decay"),
    ("train.settings.adam.eps", "denominator floor"),
    ("train.settings.eval_snr_grid", "SNRs of the post-training robustness sweep"),
    ("train.settings.fixed_snr_db", "train every sample at this SNR, bypassing the curriculum"),
    ("train.settings.noiseless_uplink", "train without uplink noise"),
    ("train.settings.feedback_snr_db", "feedback SNR during training; noiseless when absent"),
    ("train.settings.chunks", "independently simulated slices of each batch"),
    ("train.eval_stop.max_trials", "trial cap per robustness point"),
    ("train.eval_stop.target_errors", "errors that end a robustness point"),
    ("gradcheck.step", "central-difference step"),
    ("gradcheck.floor", "relative-error denominator floor"),
    ("gradcheck.tolerance", "largest accepted relative error"),
    ("complexity.full.<model>", "same keys as train.model, default preset full"),
    ("complexity.light.<model>", "same keys as train.model, default preset light"),
    ("complexity.fpga[].name", "device family"),
    ("complexity.fpga[].dsp_gmacs", "peak DSP throughput in GMAC/s"),
    ("timeline.timing.tau_enc_ms", "encode time per round"),
    ("timeline.timing.tau_tx_ms", "transmit time per round"),
    ("timeline.timing.tau_fb_ms", "feedback time per round"),
    ("timeline.timing.rounds", "interaction rounds"),
    ("timeline.timing.min_forward_ms", "floor of the steady-state feedback gap"),
    ("timeline.mode", "sync | async"),
    ("timeline.lag", "feedback lag of the asynchronous pipeline"),
    ("timeline.jitter.type", "none | per_round | uniform | exponential"),
    ("timeline.jitter.<per_round>.extra_ms", "extra encode time per round"),
    ("timeline.jitter.<uniform>.max_ms", "upper bound of uniform extra encode time"),
    ("timeline.jitter.<uniform>.seed", "jitter seed"),
    ("timeline.jitter.<exponential>.mean_ms", "mean extra encode time"),
    ("timeline.jitter.<exponential>.seed", "jitter seed"),
];
