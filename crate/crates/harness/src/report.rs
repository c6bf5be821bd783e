//! CSV artifacts: the evaluation grid, the attack training log, and the
//! per-sample distortion distribution. Fixed headers, fixed precision, so
//! identical runs produce byte-identical files.

use std::path::Path;

use wgap_core::attack::TrainLogRow;
use wgap_core::metrics::EvalReport;
use wgap_core::{Error, Result};

pub const LOSS_HEADER: &str = "epoch,iteration,loss,over_budget_frac,mean_rel_l2";
pub const SAMPLES_HEADER: &str = "sample,rel_l2,ssim_d";

fn format_err(path: &Path, lineno: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("{}:{}: {msg}", path.display(), lineno))
}

pub fn write_report_csv(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut text = String::from(EvalReport::CSV_HEADER);
    text.push('\n');
    for r in reports {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_report_csv(path: &Path) -> Result<Vec<EvalReport>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == EvalReport::CSV_HEADER => {}
        other => {
            return Err(format_err(
                path,
                1,
                format!(
                    "bad report header {:?}, expected {:?}",
                    other.map(|(_, h)| h).unwrap_or(""),
                    EvalReport::CSV_HEADER
                ),
            ))
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(format_err(path, i + 1, format!("expected 7 fields, got {}", f.len())));
        }
        let num = |j: usize| -> Result<f64> {
            f[j].parse()
                .map_err(|_| format_err(path, i + 1, format!("bad number `{}`", f[j])))
        };
        out.push(EvalReport {
            model: f[0].to_string(),
            defense: f[1].to_string(),
            fooling_ratio: num(2)?,
            fool_vs_truth: num(3)?,
            mean_rel_l2: num(4)?,
            mean_ssim_d: num(5)?,
            n: f[6]
                .parse()
                .map_err(|_| format_err(path, i + 1, format!("bad count `{}`", f[6])))?,
        });
    }
    Ok(out)
}

pub fn write_loss_log(path: &Path, log: &[TrainLogRow]) -> Result<()> {
    let mut text = String::from(LOSS_HEADER);
    text.push('\n');
    for row in log {
        text.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6}\n",
            row.epoch, row.iteration, row.loss, row.over_budget_frac, row.mean_rel_l2
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Per-sample distortions of the undefended adversarials, one row per test
/// image, emitted alongside the aggregate report.
pub fn write_samples_csv(path: &Path, rel_l2: &[f64], ssim_d: &[f64]) -> Result<()> {
    debug_assert_eq!(rel_l2.len(), ssim_d.len());
    let mut text = String::from(SAMPLES_HEADER);
    text.push('\n');
    for (i, (r, s)) in rel_l2.iter().zip(ssim_d).enumerate() {
        text.push_str(&format!("{i},{r:.6},{s:.6}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_samples_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == SAMPLES_HEADER => {}
        _ => return Err(format_err(path, 1, "bad samples header")),
    }
    let mut rel = Vec::new();
    let mut ssim = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(format_err(path, i + 1, "expected 3 fields"));
        }
        rel.push(
            f[1].parse()
                .map_err(|_| format_err(path, i + 1, format!("bad number `{}`", f[1])))?,
        );
        ssim.push(
            f[2].parse()
                .map_err(|_| format_err(path, i + 1, format!("bad number `{}`", f[2])))?,
        );
    }
    Ok((rel, ssim))
}
