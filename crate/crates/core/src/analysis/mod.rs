//! Link-budget coverage, AP density, receiver sensitivity from PER curves
//! and FPGA encoding-latency estimates.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalysisError {
    #[error("invalid parameter: {0}")]
    Domain(String),
    #[error("target PER {target} outside curve range [{min}, {max}]")]
    OutOfRange { target: f64, min: f64, max: f64 },
}

/// Log-distance path loss `PL(d) = PL0 + 10 n log10(d / d0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossModel {
    pub pl0_db: f64,
    pub d0_m: f64,
    pub exponent: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel { pl0_db: 40.0, d0_m: 1.0, exponent: 3.0 }
    }
}

impl PathLossModel {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !(self.exponent > 0.0 && self.exponent.is_finite()) {
            return Err(AnalysisError::Domain(format!("path-loss exponent {} must be > 0", self.exponent)));
        }
        if !(self.d0_m > 0.0 && self.d0_m.is_finite()) {
            return Err(AnalysisError::Domain(format!("reference distance {} must be > 0", self.d0_m)));
        }
        if !self.pl0_db.is_finite() {
            return Err(AnalysisError::Domain("PL0 must be finite".into()));
        }
        Ok(())
    }

    pub fn path_loss(&self, d_m: f64) -> f64 {
        self.pl0_db + 10.0 * self.exponent * (d_m / self.d0_m).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudget {
    pub p_tx_dbm: f64,
    pub g_tx_dbi: f64,
    pub g_rx_dbi: f64,
    pub sensitivity_dbm: f64,
}

/// `P_tx + G_tx + G_rx - S_rx`.
pub fn max_path_loss(b: &LinkBudget) -> f64 {
    b.p_tx_dbm + b.g_tx_dbi + b.g_rx_dbi - b.sensitivity_dbm
}

/// Distance at which the path loss reaches `pl_max_db`.
pub fn max_distance(m: &PathLossModel, pl_max_db: f64) -> Result<f64, AnalysisError> {
    m.validate()?;
    Ok(m.d0_m * 10f64.powf((pl_max_db - m.pl0_db) / (10.0 * m.exponent)))
}

/// Coverage distance gain from a sensitivity advantage of `delta_snr_db`.
pub fn distance_ratio(delta_snr_db: f64, exponent: f64) -> Result<f64, AnalysisError> {
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(AnalysisError::Domain(format!("path-loss exponent {exponent} must be > 0")));
    }
    Ok(10f64.powf(delta_snr_db / (10.0 * exponent)))
}

/// Relative AP density needed for full coverage; cell area grows with the
/// square of the coverage radius.
pub fn density_ratio(distance_ratio: f64) -> Result<f64, AnalysisError> {
    if !(distance_ratio > 0.0 && distance_ratio.is_finite()) {
        return Err(AnalysisError::Domain(format!("distance ratio {distance_ratio} must be > 0")));
    }
    Ok(1.0 / (distance_ratio * distance_ratio))
}

/// SNR at which a PER curve crosses `target`, interpolating linearly in
/// `(snr, log10 per)` between the bracketing samples.
pub fn sensitivity_from_per_curve(points: &[(f64, f64)], target: f64) -> Result<f64, AnalysisError> {
    if points.is_empty() {
        return Err(AnalysisError::Domain("PER curve is empty".into()));
    }
    if !(target > 0.0 && target.is_finite()) {
        return Err(AnalysisError::Domain(format!("target PER {target} must be > 0")));
    }
    let mut pts = points.to_vec();
    if let Some(&(s, p)) = pts.iter().find(|(s, p)| !(s.is_finite() && *p > 0.0 && p.is_finite())) {
        return Err(AnalysisError::Domain(format!("invalid curve point ({s}, {p}); PER must be > 0")));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.windows(2).any(|w| w[1].1 > w[0].1) {
        return Err(AnalysisError::Domain("PER curve must be non-increasing in SNR".into()));
    }
    let (max, min) = (pts[0].1, pts[pts.len() - 1].1);
    if target > max || target < min {
        return Err(AnalysisError::OutOfRange { target, min, max });
    }
    if let Some(&(s, _)) = pts.iter().find(|(_, p)| *p == target) {
        return Ok(s);
    }
    let lt = target.log10();
    for w in pts.windows(2) {
        let ((s0, p0), (s1, p1)) = (w[0], w[1]);
        if p0 > target && target > p1 {
            let (l0, l1) = (p0.log10(), p1.log10());
            return Ok(s0 + (lt - l0) / (l1 - l0) * (s1 - s0));
        }
    }
    unreachable!("target lies strictly inside a non-increasing curve")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpgaSpec {
    pub name: String,
    pub dsp_gmacs: f64,
}

impl FpgaSpec {
    /// One MAC per DSP per cycle, two FLOPs per MAC.
    pub fn peak_gflops(&self) -> f64 {
        2.0 * self.dsp_gmacs
    }

    /// Peak DSP throughput of the 7-series families.
    pub fn seven_series() -> Vec<FpgaSpec> {
        [("Spartan-7", 176.0), ("Artix-7", 929.0), ("Kintex-7", 2845.0), ("Virtex-7", 5335.0)]
            .into_iter()
            .map(|(n, g)| FpgaSpec { name: n.into(), dsp_gmacs: g })
            .collect()
    }
}

/// Encoding time in seconds at peak throughput.
pub fn fpga_encode_latency(flops: f64, spec: &FpgaSpec) -> Result<f64, AnalysisError> {
    if !(flops > 0.0 && flops.is_finite()) {
        return Err(AnalysisError::Domain(format!("flops {flops} must be > 0")));
    }
    if !(spec.dsp_gmacs > 0.0 && spec.dsp_gmacs.is_finite()) {
        return Err(AnalysisError::Domain(format!("dsp_gmacs {} must be > 0", spec.dsp_gmacs)));
    }
    Ok(flops / (spec.peak_gflops() * 1e9))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpgaRow {
    pub family: String,
    pub dsp_gmacs: f64,
    pub peak_gflops: f64,
    pub latency_us: f64,
}

impl FpgaRow {
    pub fn csv_header() -> &'static str {
        "family,dsp_gmacs,peak_gflops,latency_us"
    }
}

pub fn fpga_report(flops: f64, specs: &[FpgaSpec]) -> Result<Vec<FpgaRow>, AnalysisError> {
    specs
        .iter()
        .map(|s| {
            Ok(FpgaRow {
                family: s.name.clone(),
                dsp_gmacs: s.dsp_gmacs,
                peak_gflops: s.peak_gflops(),
                latency_us: fpga_encode_latency(flops, s)? * 1e6,
            })
        })
        .collect()
}

/// A baseline to compare against, with an optional externally reported
/// distance ratio to check the formula against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageCase {
    pub scheme: String,
    pub delta_snr_db: f64,
    #[serde(default)]
    pub reported_distance_ratio: Option<f64>,
}

impl CoverageCase {
    /// SNR advantages at PER 1e-4 over the two HARQ-CC baselines, with the
    /// distance ratios quoted alongside them.
    pub fn harq_baselines() -> Vec<CoverageCase> {
        vec![
            CoverageCase { scheme: "turbo-harq-cc".into(), delta_snr_db: 7.5, reported_distance_ratio: Some(1.38) },
            CoverageCase { scheme: "polar-harq-cc".into(), delta_snr_db: 8.6, reported_distance_ratio: Some(1.70) },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub scheme: String,
    pub delta_snr_db: f64,
    pub n: f64,
    pub distance_ratio: f64,
    pub density_ratio: f64,
    pub reported_distance_ratio: Option<f64>,
    pub density_ratio_from_reported: Option<f64>,
    /// Formula distance ratio minus the reported one.
    pub distance_ratio_discrepancy: Option<f64>,
    /// True when the formula and reported ratio differ by more than 2%.
    pub inconsistent_with_reported: bool,
}

pub fn coverage_report(case: &CoverageCase, n: f64) -> Result<CoverageReport, AnalysisError> {
    let r = distance_ratio(case.delta_snr_db, n)?;
    let rep = case.reported_distance_ratio;
    let density_rep = rep.map(density_ratio).transpose()?;
    Ok(CoverageReport {
        scheme: case.scheme.clone(),
        delta_snr_db: case.delta_snr_db,
        n,
        distance_ratio: r,
        density_ratio: density_ratio(r)?,
        reported_distance_ratio: rep,
        density_ratio_from_reported: density_rep,
        distance_ratio_discrepancy: rep.map(|x| r - x),
        inconsistent_with_reported: rep.is_some_and(|x| ((r - x) / x).abs() > 0.02),
    })
}
