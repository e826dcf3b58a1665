//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! A criterion listed in `KNOWN_FAILURES` may fail only in the documented
//! way; the process exits non-zero on any other failure.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use afclab_core::analysis::{coverage_report, density_ratio, CoverageCase};
use afclab_core::channel::{Noise, SnrDb};
use afclab_core::codec::{
    bpsk_llrs, chase_combine, measure_per, non_increasing_within_ci, HarqConfig, HarqLink, StopRule,
};
use afclab_core::exec::{stream_rng, Execution};
use afclab_core::neural::gradcheck::{run_gradcheck, GradcheckSettings};
use afclab_core::neural::graph::Graph;
use afclab_core::neural::tensor::Mat;
use afclab_core::neural::{
    count_complexity, enumerate_encoder_params, measure_encoder_flops, AfcConfig, AfcModel, EncoderState,
};
use afclab_core::pipeline::{
    async_delta_prime, async_latency, forward_share, latency_reduction, latency_sweep, simulate_timeline, sync_latency,
    Jitter, Mode, SweepRecord, TimingParams,
};
use afclab_core::training::{
    compare_robustness, ks_p_value, ks_statistic, sample_train_snr, train, AlphaSchedule, CurriculumConfig, GaussianDb,
    TrainConfig,
};

/// Outcome of one criterion. `known` marks a failure that matches its
/// documented cause exactly.
struct Outcome {
    pass: bool,
    known: bool,
    detail: String,
}

fn check(ok: bool, detail: String) -> Outcome {
    Outcome { pass: ok, known: false, detail }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn c1() -> Outcome {
    let p = TimingParams::from_intervals(10.0, 4.0, 9);
    let (s, a, r) = (sync_latency(&p), async_latency(&p).unwrap(), latency_reduction(&p).unwrap());
    let pct = (1000.0 * r).round() / 10.0;
    check(s == 122.0 && a == 69.0 && pct == 43.4, format!("D_sync {s} ms, D_async {a} ms, reduction {pct}%"))
}

fn monotone(rows: &[SweepRecord], mode: Mode, by_delta: bool) -> bool {
    let mut r: Vec<&SweepRecord> = rows.iter().filter(|r| r.mode == mode).collect();
    r.sort_by(|a, b| {
        let key =
            |x: &SweepRecord| if by_delta { (x.delta_tilde_ms, x.delta_ms) } else { (x.delta_ms, x.delta_tilde_ms) };
        key(a).partial_cmp(&key(b)).unwrap()
    });
    r.windows(2).all(|w| {
        let same_group =
            if by_delta { w[0].delta_tilde_ms == w[1].delta_tilde_ms } else { w[0].delta_ms == w[1].delta_ms };
        !same_group || w[1].total_ms >= w[0].total_ms
    })
}

fn c2() -> Outcome {
    let dp = async_delta_prime(&TimingParams::from_intervals(10.0, 4.0, 9));
    let mut floor_ok = true;
    for d in 1..=30 {
        for f in 0..=15 {
            let v = async_delta_prime(&TimingParams::from_intervals(d as f64, f as f64, 9));
            if d <= f + 2 && v != 1.0 {
                floor_ok = false;
            }
        }
    }
    let r = latency_reduction(&TimingParams::from_intervals(10.0, 8.0, 9)).unwrap();
    let deltas: Vec<f64> = (1..=30).map(f64::from).collect();
    let tildes: Vec<f64> = (0..=15).map(f64::from).collect();
    let rows = latency_sweep(&deltas, &tildes, 9, Execution::Parallel).unwrap();
    let shapes = [Mode::Sync, Mode::Async].iter().all(|&m| monotone(&rows, m, true) && monotone(&rows, m, false));
    check(
        dp == 3.0 && floor_ok && close(100.0 * r, 46.1, 0.5) && shapes,
        format!(
            "delta' {dp} ms, floor holds: {floor_ok}, (10,8,9) reduction {:.2}%, sweep latencies monotone in both intervals: {shapes}",
            100.0 * r
        ),
    )
}

fn c3() -> Outcome {
    let mut cells = 0;
    let mut mismatches = Vec::new();
    let mut violations = 0;
    let mut violations_off_pattern = 0;
    for d in 1..=30 {
        for f in 0..=15 {
            for t in 2..=12usize {
                let p = TimingParams::from_intervals(d as f64, f as f64, t);
                let (s, a) = (sync_latency(&p), async_latency(&p).unwrap());
                let ss = simulate_timeline(&p, Mode::Sync, 1, &Jitter::None).unwrap().total_latency_ms;
                let sa = simulate_timeline(&p, Mode::Async, 2, &Jitter::None).unwrap().total_latency_ms;
                cells += 1;
                if ss != s || sa != a {
                    mismatches.push((d, f, t, ss, s, sa, a));
                }
                if a > s {
                    violations += 1;
                    if !(d == 1 && a == s + 1.0) {
                        violations_off_pattern += 1;
                    }
                }
            }
        }
    }
    let mut detail = format!(
        "simulator equals closed forms on {}/{cells} cells; D_async > D_sync on {violations} cells",
        cells - mismatches.len()
    );
    if violations > 0 {
        detail.push_str(" (all at delta = 1 ms, where the 1 ms floor on delta' makes D_async = D_sync + 1)");
    }
    if let Some(m) = mismatches.first() {
        detail.push_str(&format!("; first mismatch {m:?}"));
    }
    let pass = mismatches.is_empty() && violations == 0;
    let known = !pass && mismatches.is_empty() && violations_off_pattern == 0;
    Outcome { pass, known, detail }
}

fn c4() -> Outcome {
    let polar = density_ratio(1.70).unwrap();
    let turbo_rel = density_ratio(1.70 / 1.38).unwrap();
    let reports: Vec<_> = CoverageCase::harq_baselines().iter().map(|c| coverage_report(c, 3.0).unwrap()).collect();
    let surfaced =
        reports.iter().all(|r| r.distance_ratio_discrepancy.is_some() && r.density_ratio_from_reported.is_some());
    let flagged: Vec<String> = reports
        .iter()
        .map(|r| format!("{} formula {:.3} vs reported {:?}", r.scheme, r.distance_ratio, r.reported_distance_ratio))
        .collect();
    check(
        close(polar, 0.35, 0.02 * 0.35) && close(turbo_rel, 0.66, 0.02 * 0.66) && surfaced,
        format!(
            "density(1.70) {polar:.3}, Turbo-relative density {turbo_rel:.3}, discrepancy reported: {}",
            flagged.join("; ")
        ),
    )
}

fn c5() -> Outcome {
    let s = forward_share(&TimingParams::from_intervals(10.0, 4.0, 9));
    let pct = (1000.0 * s).round() / 10.0;
    check(pct == 73.8, format!("forward share {:.4}% (rounded {pct}%)", 100.0 * s))
}

fn c6() -> Outcome {
    let full = AfcConfig::full();
    let light = AfcConfig::light();
    light.check_light_pair(&full).unwrap();
    let (cf, cl) = (count_complexity(&full).unwrap(), count_complexity(&light).unwrap());
    let mut exact = true;
    for (cfg, c) in [(&full, &cf), (&light, &cl)] {
        let m = AfcModel::new(cfg.clone()).unwrap();
        exact &= enumerate_encoder_params(&m) == c.encoder_params;
        exact &= measure_encoder_flops(&m).unwrap() == c.encoder_flops_per_session;
    }
    let pr = 1.0 - cl.encoder_params as f64 / cf.encoder_params as f64;
    let fr = 1.0 - cl.encoder_flops_per_session as f64 / cf.encoder_flops_per_session as f64;
    check(
        pr >= 0.40 && fr >= 0.30 && exact,
        format!(
            "encoder params {} -> {} (-{:.1}%), FLOPs {} -> {} (-{:.1}%), counter equals enumeration and tape: {exact}",
            cf.encoder_params,
            cl.encoder_params,
            100.0 * pr,
            cf.encoder_flops_per_session,
            cl.encoder_flops_per_session,
            100.0 * fr
        ),
    )
}

fn c7() -> Outcome {
    let start = Instant::now();
    let r = run_gradcheck(&GradcheckSettings { seed: 20, ..GradcheckSettings::default() }).unwrap();
    let required =
        ["linear", "layer_norm", "attention_block", "gelu_mlp", "snr_embedding", "cross_entropy", "session_dense"];
    let covered = required.iter().all(|n| r.cases.iter().any(|c| c.name == *n));
    let scalars: usize = r.cases.iter().map(|c| c.scalars_checked).sum();
    check(
        r.max_rel_error < 1e-4 && covered,
        format!(
            "max relative error {:.2e} over {} cases, {scalars} scalars, {:.1?}",
            r.max_rel_error,
            r.cases.len(),
            start.elapsed()
        ),
    )
}

fn draws(k: u64, cfg: &CurriculumConfig, seed: u64, n: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, &[k]);
    (0..n).map(|_| sample_train_snr(k, cfg, &mut rng).value()).collect()
}

fn mean_var(x: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = x.iter().map(|s| (s - m).powi(4)).sum::<f64>() / n;
    (m, v, ((m4 - v * v) / n).sqrt())
}

fn c8() -> Outcome {
    const N: usize = 100_000;
    let half = CurriculumConfig {
        p_orig: GaussianDb { mean_db: 10.0, std_db: 1.0 },
        p_targ: GaussianDb { mean_db: 0.0, std_db: 1.0 },
        alpha: AlphaSchedule::Linear { k_start: 0, k_end: 100 },
        sigma_p: 1.0,
        total_steps: 100,
    };
    let (m, v, se_v) = mean_var(&draws(50, &half, 1, N));
    let se_m = (27.0 / N as f64).sqrt();
    let moments = close(m, 5.0, 3.0 * se_m) && close(v, 27.0, 3.0 * se_v);
    let cfg = CurriculumConfig::default();
    let mut min_p = 1.0f64;
    for k in [0, cfg.total_steps / 2, cfg.total_steps] {
        let x = draws(k, &cfg, 2, N);
        let a = cfg.alpha(k);
        min_p = min_p.min(ks_p_value(ks_statistic(&x, |s| cfg.mixture_cdf(a, s)), N));
    }
    let pert = CurriculumConfig {
        p_orig: GaussianDb { mean_db: 4.0, std_db: 0.0 },
        p_targ: GaussianDb { mean_db: 4.0, std_db: 0.0 },
        sigma_p: 2.0,
        ..CurriculumConfig::default()
    };
    let (_, pv, _) = mean_var(&draws(900, &pert, 3, N));
    let pert_ok = close(pv, 4.0, 3.0 * (2.0 * 16.0 / (N as f64 - 1.0)).sqrt());
    check(
        moments && min_p > 0.01 && pert_ok,
        format!("mixture mean {m:.3} var {v:.2}, min KS p {min_p:.3} at k in {{0, mid, end}}, perturbation-only var {pv:.3}"),
    )
}

fn c9() -> Outcome {
    let n = 100_000;
    let snr = SnrDb::db(1.0);
    let sigma = snr.noise_std();
    let mut rng = stream_rng(90, &[]);
    let mut gains = Vec::new();
    for a in [2usize, 4] {
        let sets: Vec<Vec<f64>> = (0..a)
            .map(|_| {
                let y: Vec<f64> = (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        1.0 + sigma * z
                    })
                    .collect();
                bpsk_llrs(&y, Noise::Awgn(snr))
            })
            .collect();
        let c = chase_combine(&sets).unwrap();
        let mean = c.iter().sum::<f64>() / n as f64;
        let var = c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        gains.push((a, 10.0 * (mean * mean / var).log10() - 1.0));
    }
    let gains_ok = gains.iter().all(|&(a, g)| close(g, 10.0 * (a as f64).log10(), 0.5));
    let stop = StopRule { max_trials: 20_000, target_errors: 200 };
    let grid: Vec<SnrDb> = [-6.0, -5.0, -4.0, -3.0, -2.0, 0.0, 2.0, 4.0].iter().map(|&s| SnrDb::db(s)).collect();
    let mut by_snr = true;
    let mut at = Vec::new();
    for a in 1..=4 {
        let pts = measure_per(
            &HarqLink(HarqConfig { k: 47, max_attempts: a, crc16: false }),
            &grid,
            stop,
            9,
            Execution::Parallel,
        )
        .unwrap();
        by_snr &= non_increasing_within_ci(&pts);
        at.push(pts[1]);
    }
    let by_attempts = non_increasing_within_ci(&at);
    let g: Vec<String> = gains.iter().map(|(a, g)| format!("A={a}: +{g:.2} dB")).collect();
    let pers: Vec<String> = at.iter().map(|p| format!("{:.3}", p.per)).collect();
    check(
        gains_ok && by_snr && by_attempts,
        format!(
            "combining gain {}; HARQ-CC PER non-increasing in SNR: {by_snr}, in attempts: {by_attempts} (PER at -5 dB for A=1..4: {})",
            g.join(", "),
            pers.join(", ")
        ),
    )
}

fn c10() -> Outcome {
    let start = Instant::now();
    let mut model = AfcModel::new(AfcConfig::tiny()).unwrap();
    let noiseless = TrainConfig {
        batch_size: 32,
        learning_rate: 1e-2,
        seed: 1,
        noiseless_uplink: true,
        chunks: 4,
        ..TrainConfig::default()
    };
    let h = train(&mut model, &CurriculumConfig::linear(500), &noiseless, Execution::Parallel).unwrap();
    let head = h[..10].iter().map(|r| r.loss).sum::<f64>() / 10.0;
    let tail = h[490..].iter().map(|r| r.loss).sum::<f64>() / 10.0;
    let halved = tail < 0.5 * head;
    let cfg = TrainConfig {
        batch_size: 128,
        learning_rate: 3e-3,
        seed: 7,
        chunks: 8,
        eval_snr_grid: vec![0.0, 2.0, 4.0, 6.0, 8.0],
        ..TrainConfig::default()
    };
    let stop = StopRule { max_trials: 20_000, target_errors: 200 };
    let r =
        compare_robustness(&AfcConfig::tiny(), &CurriculumConfig::linear(2000), &cfg, 0.0, stop, Execution::Parallel)
            .unwrap();
    let monotone = non_increasing_within_ci(&r.curriculum);
    let (c, f) = (r.curriculum[3], r.fixed[3]);
    let not_better = f.ci_high >= c.ci_low;
    let curve =
        |v: &[afclab_core::codec::PerPoint]| v.iter().map(|p| format!("{:.3}", p.per)).collect::<Vec<_>>().join(" ");
    check(
        halved && monotone && not_better,
        format!(
            "noiseless loss {head:.3} -> {tail:.3}; PER over 0..8 dB curriculum [{}] fixed-0dB [{}]; {:.0?}",
            curve(&r.curriculum),
            curve(&r.fixed),
            start.elapsed()
        ),
    )
}

fn random_state(cfg: &AfcConfig, t: usize, seed: u64) -> EncoderState {
    let mut rng = stream_rng(seed, &[t as u64]);
    EncoderState {
        round: t,
        bits: (0..cfg.k()).map(|_| rng.random_range(0..2u8)).collect(),
        sent: (0..t).map(|_| (0..cfg.num_blocks).map(|_| rng.random_range(-2.0..2.0)).collect()).collect(),
        feedback: (0..cfg.rounds)
            .map(|_| (0..cfg.feedback_len()).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect(),
        snr_db: rng.random_range(-2.0..8.0),
    }
}

fn c11() -> Outcome {
    let mut checked = 0;
    let mut masked = true;
    for base in [AfcConfig::full(), AfcConfig::light()] {
        for lag in [2usize, 3] {
            let cfg = AfcConfig { lag, ..base.clone() };
            let m = AfcModel::new(cfg.clone()).unwrap();
            for t in 0..cfg.rounds {
                for seed in 0..3u64 {
                    let s = random_state(&cfg, t, seed);
                    let a = m.encode_round(&s).unwrap();
                    let mut mutated = s.clone();
                    let mut rng = stream_rng(seed, &[t as u64, 7]);
                    for fb in mutated.feedback.iter_mut().skip((t + 1).saturating_sub(lag)) {
                        fb.iter_mut().for_each(|v| *v = rng.random_range(-1e3..1e3));
                    }
                    let b = m.encode_round(&mutated).unwrap();
                    masked &= a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
                    checked += 1;
                }
            }
        }
    }
    let cfg = AfcConfig::light();
    let w = cfg.sparse_ff_window.unwrap();
    let m = AfcModel::new(cfg.clone()).unwrap();
    let t = cfg.rounds - 1;
    let state = random_state(&cfg, t, 4);
    let n = cfg.num_blocks;
    let mut zeros_outside = true;
    let mut nonzero_inside = true;
    for out in 0..n {
        let mut g = Graph::new();
        let p = m.params.bind(&mut g);
        let (c, fb) = m.encode_round_on(&mut g, &p, &state).unwrap();
        let mut sel = Mat::zeros(n, 1);
        sel.data[out] = 1.0;
        let sel = g.leaf(sel);
        let y = g.mul(c, sel);
        let l = g.sum(y);
        let grads = g.backward(l);
        for (tau, &v) in fb.iter().enumerate() {
            let jac = grads.get_or_zeros(v, n, cfg.fb_per_block);
            if tau + cfg.lag + w < t {
                zeros_outside &= jac.data.iter().all(|&x| x == 0.0);
            } else {
                nonzero_inside &= jac.data.iter().any(|&x| x != 0.0);
            }
        }
    }
    check(
        masked && zeros_outside && nonzero_inside,
        format!(
            "{checked} encoder states bit-identical under mutation of future feedback: {masked}; \
             sparse Jacobian zero outside window: {zeros_outside}, nonzero inside: {nonzero_inside}"
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

/// Criteria allowed to fail, each only in its documented way.
const KNOWN_FAILURES: &[usize] = &[3];

fn main() {
    let criteria: [Criterion; 11] = [
        ("latency closed forms", c1),
        ("delta' floor and latency sweeps", c2),
        ("discrete-event oracle and dominance", c3),
        ("coverage pipeline", c4),
        ("forward share", c5),
        ("complexity accounting", c6),
        ("gradient correctness", c7),
        ("curriculum statistics", c8),
        ("chase combining and HARQ-CC monotonicity", c9),
        ("desk-scale training", c10),
        ("lag masking", c11),
    ];
    let mut unexpected = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        let start = Instant::now();
        let o = f();
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && o.known && KNOWN_FAILURES.contains(&id) { " [known]" } else { "" };
        if !o.pass && note.is_empty() {
            unexpected += 1;
        }
        println!("{status} {id:>2} {name}{note}: {} ({:.1?})", o.detail, start.elapsed());
    }
    if unexpected > 0 {
        eprintln!("{unexpected} unexpected acceptance failure(s)");
        std::process::exit(1);
    }
}
