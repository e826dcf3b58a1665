//! One function per experiment kind; each returns the files it wrote.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use afclab_core::analysis::{coverage_report, density_ratio, distance_ratio, fpga_report, max_distance, max_path_loss};
use afclab_core::channel::{Noise, SnrDb};
use afclab_core::codec::HarqLink;
use afclab_core::codec::{measure_per, LinkSimulator, SessionLink, UncodedBpsk};
use afclab_core::neural::gradcheck::{run_gradcheck, GradcheckCase, GradcheckSettings};
use afclab_core::neural::{count_complexity, read_checkpoint, write_checkpoint, AfcLink, AfcModel};
use afclab_core::pipeline::{
    async_delta_prime, async_latency, forward_share, latency_reduction, latency_sweep, simulate_timeline, sync_latency,
    EventKind, Mode, TimelineEvent,
};
use afclab_core::training::{evaluate_robustness, train};

use crate::config::{ExperimentConfig, Kind, LinkSpec};
use crate::emit::{emit_results, write_atomic, Format, Record};
use crate::CliError;

/// Default output directory when neither the command line nor the config
/// names one.
pub const OUTPUT_DIR_ENV: &str = "AFCLAB_OUTPUT_DIR";

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Writer<'a> {
    dir: &'a Path,
    format: Format,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn records<T: Record>(&mut self, stem: &str, rows: &[T]) -> Result<(), CliError> {
        let path = self.dir.join(format!("{stem}.{}", self.format.extension()));
        emit_results(rows, self.format, &path)?;
        self.files.push(path);
        Ok(())
    }

    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.files.push(path);
        Ok(())
    }
}

macro_rules! record {
    ($name:ident { $($field:ident : $ty:ty),* $(,)? }) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        pub struct $name { $(pub $field: $ty),* }
        impl Record for $name {
            fn columns() -> Vec<&'static str> { vec![$(stringify!($field)),*] }
        }
    };
}

record!(LatencyRow {
    delta_ms: f64,
    delta_tilde_ms: f64,
    rounds: usize,
    sync_ms: f64,
    async_ms: f64,
    delta_prime_ms: f64,
    reduction: f64,
    forward_share: f64,
    simulated_sync_ms: f64,
    simulated_async_ms: f64,
});

record!(CoverageRow {
    scheme: String,
    delta_snr_db: f64,
    n: f64,
    distance_ratio: f64,
    density_ratio: f64,
    reported_distance_ratio: Option<f64>,
    density_ratio_from_reported: Option<f64>,
    distance_ratio_discrepancy: Option<f64>,
    inconsistent_with_reported: bool,
});

record!(RelativeDensityRow {
    reference: String,
    compared: String,
    density_ratio: f64,
    density_ratio_from_reported: Option<f64>,
});

record!(RangeRow { scheme: String, baseline_range_m: f64, improved_range_m: f64 });

record!(GradcheckRow { name: String, scalars_checked: usize, max_rel_error: f64, max_abs_error: f64 });

record!(ComplexityRow {
    config: String,
    encoder_params: u64,
    encoder_flops_per_session: u64,
    feedback_params: u64,
    decoder_params: u64,
    total_params: u64,
});

record!(ReductionRow { param_reduction: f64, flop_reduction: f64 });

record!(FpgaConfigRow { config: String, family: String, dsp_gmacs: f64, peak_gflops: f64, latency_us: f64 });

record!(EventRow { round: usize, kind: String, time_ms: f64 });

record!(TimelineSummaryRow { mode: String, total_latency_ms: f64, slots_skipped: usize });

impl From<&TimelineEvent> for EventRow {
    fn from(e: &TimelineEvent) -> Self {
        EventRow { round: e.round, kind: e.kind.name().into(), time_ms: e.time_ms }
    }
}

impl From<&GradcheckCase> for GradcheckRow {
    fn from(c: &GradcheckCase) -> Self {
        GradcheckRow {
            name: c.name.clone(),
            scalars_checked: c.scalars_checked,
            max_rel_error: c.max_rel_error,
            max_abs_error: c.max_abs_error,
        }
    }
}

fn output_dir(cfg: &ExperimentConfig, cli: Option<&Path>) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("afclab-out"))
}

fn section<T>(s: &Option<T>, kind: Kind) -> Result<&T, CliError> {
    s.as_ref().ok_or_else(|| CliError::Config(format!("{}: missing required section", kind.section())))
}

/// Runs the experiment and writes its result files plus `manifest.json`
/// into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutcome, CliError> {
    let kind = cfg.kind.ok_or_else(|| CliError::Config("kind: not set".into()))?;
    let dir = output_dir(cfg, out);
    let mut w = Writer { dir: &dir, format: cfg.format.into(), files: Vec::new() };
    let summary = match kind {
        Kind::Latency => latency(cfg, &mut w)?,
        Kind::LatencySweep => sweep(cfg, &mut w)?,
        Kind::Timeline => timeline(cfg, &mut w)?,
        Kind::Coverage => coverage(cfg, &mut w)?,
        Kind::Complexity => complexity(cfg, &mut w)?,
        Kind::Gradcheck => gradcheck(cfg, &mut w)?,
        Kind::PerSweep => per_sweep(cfg, &mut w)?,
        Kind::Train => training(cfg, &mut w)?,
    };
    let manifest = manifest(cfg, kind, &w.files)?;
    w.bytes("manifest.json", &manifest)?;
    Ok(RunOutcome { files: w.files, summary })
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn manifest(cfg: &ExperimentConfig, kind: Kind, files: &[PathBuf]) -> Result<Vec<u8>, CliError> {
    let canonical = cfg.canonical_json()?;
    let mut outputs = serde_json::Map::new();
    for f in files {
        let bytes = std::fs::read(f).map_err(|e| CliError::io(f, e))?;
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        outputs.insert(name, sha256_hex(&bytes).into());
    }
    let created = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let m = serde_json::json!({
        "artifact": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "kind": kind.name(),
        "seed": cfg.seed,
        "config_sha256": sha256_hex(canonical.as_bytes()),
        "config": serde_json::from_str::<serde_json::Value>(&canonical).map_err(|e| CliError::Internal(e.to_string()))?,
        "outputs_sha256": outputs,
        "created_unix_s": created,
    });
    let mut bytes = serde_json::to_vec_pretty(&m).map_err(|e| CliError::Internal(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn latency(cfg: &ExperimentConfig, w: &mut Writer) -> Result<String, CliError> {
    let p = section(&cfg.latency, Kind::Latency)?;
    let t = p.timing();
    t.validate()?;
    let sim_sync = simulate_timeline(&t, Mode::Sync, 1, &Default::default())?.total_latency_ms;
    let sim_async = simulate_timeline(&t, Mode::Async, 2, &Default::default())?.total_latency_ms;
    let row = LatencyRow {
        delta_ms: p.delta_ms,
        delta_tilde_ms: p.delta_tilde_ms,
        rounds: p.rounds,
        sync_ms: sync_latency(&t),
        async_ms: async_latency(&t)?,
        delta_prime_ms: async_delta_prime(&t),
        reduction: latency_reduction(&t)?,
        forward_share: forward_share(&t),
        simulated_sync_ms: sim_sync,
        simulated_async_ms: sim_async,
    };
    let s = format!(
        "sync={} async={} reduction={:.3} delta_prime={}",
        row.sync_ms, row.async_ms, row.reduction, row.delta_prime_ms
    );
    w.records("latency", &[row])?;
    Ok(s)
}

fn sweep(cfg: &ExperimentConfig, w: &mut Writer) -> Result<String, CliError> {
    let p = section(&cfg.latency_sweep, Kind::LatencySweep)?;
    let rows = latency_sweep(&p.deltas_ms, &p.delta_tildes_ms, p.rounds, cfg.execution)?;
    w.records("latency_sweep", &rows)?;
    Ok(format!("{} sweep rows", rows.len()))
}

fn timeline(cfg: &ExperimentConfig, w: &mut Writer) -> Result<String, CliError> {
    let p = section(&cfg.timeline, Kind::Timeline)?;
    let tl = simulate_timeline(&p.timing, p.mode, p.lag, &p.jitter)?;
    let rows: Vec<EventRow> = tl.events.iter().map(EventRow::from).collect();
    let summary = TimelineSummaryRow {
        mode: p.mode.to_string(),
        total_latency_ms: tl.total_latency_ms,
        slots_skipped: tl.count(EventKind::SlotSkipped),
    };
    let s = format!("{} total={} skipped={}", summary.mode, summary.total_latency_ms, summary.slots_skipped);
    w.records("timeline", &rows)?;
    w.records("timeline_summary", &[summary])?;
    Ok(s)
}

fn coverage(cfg: &ExperimentConfig, w: &mut Writer) -> Result<String, CliError> {
    let p = section(&cfg.coverage, Kind::Coverage)?;
    p.path_loss.validate()?;
    let n = p.path_loss.exponent;
    let reports = p.cases.iter().map(|c| coverage_report(c, n)).collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<CoverageRow> = reports
        .iter()
        .map(|r| CoverageRow {
            scheme: r.scheme.clone(),
            delta_snr_db: r.delta_snr_db,
            n: r.n,
            distance_ratio: r.distance_ratio,
            density_ratio: r.density_ratio,
            reported_distance_ratio: r.reported_distance_ratio,
            density_ratio_from_reported: r.density_ratio_from_reported,
            distance_ratio_discrepancy: r.distance_ratio_discrepancy,
            inconsistent_with_reported: r.inconsistent_with_reported,
        })
        .collect();
    let mut relative = Vec::new();
    for (i, a) in reports.iter().enumerate() {
        for b in &reports[i + 1..] {
            let from_reported = match (a.reported_distance_ratio, b.reported_distance_ratio) {
                (Some(ra), Some(rb)) => Some(density_ratio(rb / ra)?),
                _ => None,
            };
            relative.push(RelativeDensityRow {
                reference: a.scheme.clone(),
                compared: b.scheme.clone(),
                density_ratio: density_ratio(b.distance_ratio / a.distance_ratio)?,
                density_ratio_from_reported: from_reported,
            });
        }
    }
    let flagged = rows.iter().filter(|r| r.inconsistent_with_reported).count();
    w.records("coverage", &rows)?;
    w.records("relative_density", &relative)?;
    if let Some(b) = &p.budget {
        let base = max_distance(&p.path_loss, max_path_loss(b))?;
        let ranges = p
            .cases
            .iter()
            .map(|c| {
                Ok(RangeRow {
                    scheme: c.scheme.clone(),
                    baseline_range_m: base,
                    improved_range_m: base * distance_ratio(c.delta_snr_db, n)?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        w.records("range", &ranges)?;
    }
    Ok(format!("{} cases, {flagged} inconsistent with reported distance ratios", rows.len()))
}

fn complexity(cfg: &ExperimentConfig, w: &mut Writer) -> Result<String, CliError> {
    let p = section(&cfg.complexity, Kind::Complexity)?;
    let full = count_complexity(&p.full.config)?;
    let light = count_complexity(&p.light.config)?;
    let row = |name: &str, c: &afclab_core::neural::Complexity| ComplexityRow {
        config: name.into(),
        encoder_params: c.encoder_params,
        encoder_flops_per_session: c.encoder_flops_per_session,
        feedback_params: c.feedback_params,
        decoder_params: c.decoder_params,
        total_params: c.total_params,
    };
    let red = ReductionRow {
        param_reduction: 1.0 - light.encoder_params as f64 / full.encoder_params as f64,
        flop_reduction: 1.0 - light.encoder_flops_per_session as f64 / full.encoder_flops_per_session as f64,
    };
    let mut fpga = Vec::new();
    for (name, c) in [("full", &full), ("light", &light)] {
        for r in fpga_report(c.encoder_flops_per_session as f64, &p.fpga)? {
            fpga.push(FpgaConfigRow {
                config: name.into(),
                family: r.family,
                dsp_gmacs: r.dsp_gmacs,
                peak_gflops: r.peak_gflops,
                latency_us: r.latency_us,
            });
        }
    }
    let s = format!(
        "encoder params -{:.1}%, encoder FLOPs -{:.1}%",
        100.0 * red.param_reduction,
        100.0 * red.flop_reduction
    );
    w.records("complexity", &[row("full", &full), row("light", &light)])?;
    w.records("reduction", &[red])?;
    w.records("fpga", &fpga)?;
    Ok(s)
}

fn gradcheck(cfg: &ExperimentConfig, w: &mut Writer) -> Result<String, CliError> {
    let p = section(&cfg.gradcheck, Kind::Gradcheck)?;
    let seed = cfg.seed.ok_or_else(|| CliError::Config("seed: required".into()))?;
    let report = run_gradcheck(&GradcheckSettings { step: p.step, floor: p.floor, seed })?;
    let rows: Vec<GradcheckRow> = report.cases.iter().map(GradcheckRow::from).collect();
    w.records("gradcheck", &rows)?;
    let s = format!("max relative error {:.3e} over {} cases", report.max_rel_error, rows.len());
    if report.max_rel_error.is_nan() || report.max_rel_error >= p.tolerance {
        return Err(CliError::Numerical(format!("{s} exceeds tolerance {:e}", p.tolerance)));
    }
    Ok(s)
}

fn load_model(path: &Path) -> Result<AfcModel, CliError> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(read_checkpoint(std::io::BufReader::new(f))?)
}

fn snr_grid(v: &[f64]) -> Result<Vec<SnrDb>, CliError> {
    v.iter().map(|&x| SnrDb::new(x).map_err(|e| CliError::Config(format!("per_sweep.snr_grid_db: {e}")))).collect()
}

fn per_sweep(cfg: &ExperimentConfig, w: &mut Writer) -> Result<String, CliError> {
    let p = section(&cfg.per_sweep, Kind::PerSweep)?;
    let seed = cfg.seed.ok_or_else(|| CliError::Config("seed: required".into()))?;
    let grid = snr_grid(&p.snr_grid_db)?;
    let measure = |link: &dyn LinkSimulator| measure_per(link, &grid, p.stop, seed, cfg.execution);
    let points = match &p.link {
        LinkSpec::Uncoded { k } => measure(&UncodedBpsk { k: *k })?,
        LinkSpec::Harq(h) => measure(&HarqLink(h.clone()))?,
        LinkSpec::Afc { checkpoint, feedback_snr_db } => {
            let model = load_model(checkpoint)?;
            let feedback = match feedback_snr_db {
                Some(s) => Noise::Awgn(
                    SnrDb::new(*s).map_err(|e| CliError::Config(format!("per_sweep.link.feedback_snr_db: {e}")))?,
                ),
                None => Noise::Noiseless,
            };
            measure(&AfcLink { model: &model, feedback })?
        }
        LinkSpec::AfcSession { checkpoint, feedback, noiseless_feedback, round_period_ms } => {
            let model = load_model(checkpoint)?;
            let mut session = model.config.session_config(SnrDb::db(0.0), *noiseless_feedback);
            session.feedback = feedback.clone();
            session.round_period_ms = *round_period_ms;
            measure(&SessionLink { encoder: &model, decoder: &model, config: session })?
        }
    };
    w.records("per", &points)?;
    Ok(format!("{} SNR points", points.len()))
}

fn training(cfg: &ExperimentConfig, w: &mut Writer) -> Result<String, CliError> {
    let p = section(&cfg.train, Kind::Train)?;
    let seed = cfg.seed.ok_or_else(|| CliError::Config("seed: required".into()))?;
    let tc = p.train_config(seed)?;
    let mut model = AfcModel::new(p.model.config.clone())?;
    let history = train(&mut model, &p.curriculum.0, &tc, cfg.execution)?;
    w.records("loss", &history)?;
    let mut ck = Vec::new();
    write_checkpoint(&model, &mut ck)?;
    w.bytes("model.afc", &ck)?;
    let robustness = if tc.eval_snr_grid.is_empty() {
        Vec::new()
    } else {
        evaluate_robustness(&model, &tc.eval_snr_grid, tc.feedback_noise(), p.eval_stop, seed, cfg.execution)?
    };
    w.records("robustness", &robustness)?;
    let first = history.first().map(|r| r.loss).unwrap_or(f64::NAN);
    let last = history.last().map(|r| r.loss).unwrap_or(f64::NAN);
    Ok(format!("{} steps, loss {first:.4} -> {last:.4}", history.len()))
}
