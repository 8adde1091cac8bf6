//! Deterministic report emission: one CSV per figure-analogue plus a JSON
//! summary, byte-stable for identical reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::campaign::LinkReport;
use crate::error::{Error, Result};

/// Output encoding of a report bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    CsvBundle,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" | "csv_bundle" => Ok(ReportFormat::CsvBundle),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!("unknown report format '{other}'"))),
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(path)
}

/// Emit a report into `dir`; returns the files written.
///
/// The full report always lands in `campaign.json` (loadable again by the
/// `report` subcommand); `csv_bundle` additionally writes one CSV per
/// present section and a `summary.json` of the headline figures.
pub fn emit_report(report: &LinkReport, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut written = Vec::new();

    let full = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Config(format!("report serialize: {e}")))?;
    written.push(write_file(dir, "campaign.json", &full)?);

    if format == ReportFormat::Json {
        return Ok(written);
    }

    written.push(write_file(dir, "summary.json", &summary_json(report)?)?);

    if let Some(campaign) = &report.campaign {
        let mut trace = String::from("t_s,smf_dbm,mmf_dbm,smf_los,mmf_los,weather_active\n");
        let smf = &campaign.smf_trace;
        let mmf = &campaign.mmf_trace;
        for i in 0..smf.len() {
            let _ = writeln!(
                trace,
                "{:.1},{:.4},{:.4},{},{},{}",
                smf.timestamps[i],
                smf.rop_dbm[i],
                mmf.rop_dbm[i],
                smf.los[i] as u8,
                mmf.los[i] as u8,
                smf.weather_active[i] as u8,
            );
        }
        written.push(write_file(dir, "fig2a_trace.csv", &trace)?);

        let mut hist =
            String::from("bin_low_dbm,bin_high_dbm,smf_all,smf_clear,mmf_all,mmf_clear\n");
        let histos = [
            &campaign.smf_all.histogram,
            &campaign.smf_clear.histogram,
            &campaign.mmf_all.histogram,
            &campaign.mmf_clear.histogram,
        ];
        let origin = histos[0].origin_dbm;
        let width = histos[0].bin_width_db;
        let bins = histos.iter().map(|h| h.counts.len()).max().unwrap_or(0);
        for b in 0..bins {
            let count = |h: &crate::campaign::RopHistogram| {
                h.counts.get(b).copied().unwrap_or(0)
            };
            let _ = writeln!(
                hist,
                "{:.2},{:.2},{},{},{},{}",
                origin + b as f64 * width,
                origin + (b as f64 + 1.0) * width,
                count(histos[0]),
                count(histos[1]),
                count(histos[2]),
                count(histos[3]),
            );
        }
        written.push(write_file(dir, "fig2b_hist.csv", &hist)?);
    }

    if let Some(throughput) = &report.throughput {
        let mut csv = String::from("second,rate_mbps\n");
        for (s, r) in throughput
            .trace
            .seconds
            .iter()
            .zip(&throughput.trace.rate_mbps)
        {
            let _ = writeln!(csv, "{s},{r:.3}");
        }
        written.push(write_file(dir, "fig2c_throughput.csv", &csv)?);
    }

    if let Some(subcarrier) = &report.subcarrier_evm {
        let mut csv = String::from("subcarrier,evm_uni_percent,evm_bidi_percent\n");
        for (k, (u, b)) in subcarrier
            .unidirectional_percent
            .iter()
            .zip(&subcarrier.bidirectional_percent)
            .enumerate()
        {
            let _ = writeln!(csv, "{k},{u:.4},{b:.4}");
        }
        written.push(write_file(dir, "fig3b_evm_subcarrier.csv", &csv)?);
    }

    if let Some(sweep) = &report.sweep {
        let mut csv =
            String::from("rop_dbm,evm_uni_percent,evm_bidi_percent,evm_b2b_percent\n");
        for (i, rop) in sweep.unidirectional.rop_dbm.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{:.2},{:.4},{:.4},{:.4}",
                rop,
                sweep.unidirectional.evm_percent[i],
                sweep.bidirectional.evm_percent[i],
                sweep.back_to_back.evm_percent[i],
            );
        }
        written.push(write_file(dir, "fig3c_evm_rop.csv", &csv)?);
    }

    Ok(written)
}

/// Load a report previously written by [`emit_report`].
pub fn load_report(dir: &Path) -> Result<LinkReport> {
    let path = dir.join("campaign.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("report parse: {e}")))
}

fn summary_json(report: &LinkReport) -> Result<String> {
    let mut summary = serde_json::Map::new();
    summary.insert("seed".into(), report.meta.seed.into());
    summary.insert("preset".into(), report.meta.preset.clone().into());
    summary.insert(
        "spread_definition".into(),
        report.meta.spread_definition.clone().into(),
    );
    if let Some(c) = &report.campaign {
        summary.insert("smf_p2p_db".into(), c.smf_trace.peak_to_peak_db().into());
        summary.insert("mmf_p2p_db".into(), c.mmf_trace.peak_to_peak_db().into());
        summary.insert("spread_reduction_db".into(), c.spread_reduction_db.into());
        summary.insert("mmf_mean_dbm".into(), c.mmf_all.mean_dbm.into());
        summary.insert(
            "mmf_clear_mean_dbm".into(),
            c.mmf_clear.mean_dbm.into(),
        );
        summary.insert(
            "mmf_clear_three_sigma_db".into(),
            c.mmf_clear.three_sigma_db.into(),
        );
    }
    if let Some(s) = &report.sweep {
        summary.insert("oscr_db".into(), s.oscr_db.into());
        if let Some(v) = s.sensitivity_uni_dbm {
            summary.insert("sensitivity_uni_dbm".into(), v.into());
        }
        if let Some(v) = s.sensitivity_bidi_dbm {
            summary.insert("sensitivity_bidi_dbm".into(), v.into());
        }
    }
    if let Some(t) = &report.throughput {
        let min = t.trace.rate_mbps.iter().cloned().fold(f64::INFINITY, f64::min);
        summary.insert("throughput_min_mbps".into(), min.into());
    }
    serde_json::to_string_pretty(&serde_json::Value::Object(summary))
        .map_err(|e| Error::Config(format!("summary serialize: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::ReportMeta;

    #[test]
    fn empty_report_emits_summary_only_bundle() {
        let report = LinkReport {
            meta: ReportMeta {
                seed: 5,
                ..ReportMeta::default()
            },
            ..LinkReport::default()
        };
        let dir = std::env::temp_dir().join("fsobridge_report_empty");
        std::fs::remove_dir_all(&dir).ok();
        let files = emit_report(&report, &dir, ReportFormat::CsvBundle).unwrap();
        let names: Vec<_> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["campaign.json", "summary.json"]);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn report_round_trips_through_json() {
        let report = LinkReport {
            meta: ReportMeta {
                seed: 11,
                ..ReportMeta::default()
            },
            ..LinkReport::default()
        };
        let dir = std::env::temp_dir().join("fsobridge_report_roundtrip");
        std::fs::remove_dir_all(&dir).ok();
        emit_report(&report, &dir, ReportFormat::Json).unwrap();
        let back = load_report(&dir).unwrap();
        assert_eq!(back, report);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn identical_reports_emit_identical_bytes() {
        let report = LinkReport {
            meta: ReportMeta {
                seed: 3,
                ..ReportMeta::default()
            },
            ..LinkReport::default()
        };
        let dir_a = std::env::temp_dir().join("fsobridge_report_a");
        let dir_b = std::env::temp_dir().join("fsobridge_report_b");
        std::fs::remove_dir_all(&dir_a).ok();
        std::fs::remove_dir_all(&dir_b).ok();
        let a = emit_report(&report, &dir_a, ReportFormat::CsvBundle).unwrap();
        let b = emit_report(&report, &dir_b, ReportFormat::CsvBundle).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
        }
        std::fs::remove_dir_all(&dir_a).ok();
        std::fs::remove_dir_all(&dir_b).ok();
    }
}
