//! CSV and JSON writers for run logs.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::harness::RunLog;
use crate::pipeline::PipelineOutput;
use crate::plant::SensorFrame;
use crate::scalar::Scalar;

fn num<T: Scalar>(v: T) -> String {
    format!("{}", v.as_f64())
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_frames_csv<T: Scalar, W: Write>(w: W, frames: &[SensorFrame<T>]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["t", "msf1", "msf2", "de1", "de2", "de3", "df1", "df2"])?;
    for f in frames {
        let mut rec = vec![num(f.t)];
        rec.extend(f.channels().iter().map(|&v| num(v)));
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_residuals_csv<T: Scalar, W: Write>(w: W, outputs: &[PipelineOutput<T>]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["t", "r1", "r2", "r3", "r4", "r5"])?;
    for o in outputs {
        let mut rec = vec![num(o.t)];
        rec.extend(o.residuals.to_array().iter().map(|&v| num(v)));
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_thresholds_csv<T: Scalar, W: Write>(w: W, outputs: &[PipelineOutput<T>]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["t", "thr1", "thr2", "thr3", "thr4", "thr5"])?;
    for o in outputs {
        let mut rec = vec![num(o.t)];
        rec.extend(o.thresholds.iter().map(|&v| num(v)));
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_indices_csv<T: Scalar, W: Write>(w: W, outputs: &[PipelineOutput<T>]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["t", "idx1", "idx2", "idx3", "idx4", "idx5"])?;
    for o in outputs {
        let mut rec = vec![num(o.t)];
        rec.extend(o.verdict.alarm_index.iter().map(|&a| num(a)));
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_verdicts_csv<T: Scalar, W: Write>(w: W, outputs: &[PipelineOutput<T>]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    for prefix in ["exc", "idx", "conf"] {
        header.extend((1..=5).map(|i| format!("{prefix}{i}")));
    }
    header.push("verdict".into());
    csv.write_record(&header)?;
    for o in outputs {
        let v = &o.verdict;
        let mut rec = vec![num(o.t)];
        rec.extend(v.exceeded.iter().map(|&b| flag(b).to_string()));
        rec.extend(v.alarm_index.iter().map(|&a| num(a)));
        rec.extend(v.confirmed.iter().map(|&b| flag(b).to_string()));
        rec.push(o.system.to_string());
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes the run's CSV logs plus `variables.json` and `summary.json` into `dir`.
pub fn write_run_dir<T: Scalar>(dir: &Path, log: &RunLog<T>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_frames_csv(fs::File::create(dir.join("plant.csv"))?, &log.frames)?;
    write_residuals_csv(fs::File::create(dir.join("residuals.csv"))?, &log.outputs)?;
    write_thresholds_csv(fs::File::create(dir.join("thresholds.csv"))?, &log.outputs)?;
    write_indices_csv(fs::File::create(dir.join("alarm_indices.csv"))?, &log.outputs)?;
    write_verdicts_csv(fs::File::create(dir.join("verdicts.csv"))?, &log.outputs)?;
    write_json(&dir.join("variables.json"), &log.last_variables())?;
    write_json(&dir.join("summary.json"), &RunSummary::of(log))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunSummary<T> {
    pub mode: crate::detector::DetectionMode,
    pub verdict: crate::detector::SystemVerdict,
    pub samples: usize,
    pub confirmed_samples: usize,
    pub first_confirmation: Option<T>,
    pub failure: Option<String>,
}

impl<T: Scalar> RunSummary<T> {
    pub fn of(log: &RunLog<T>) -> Self {
        RunSummary {
            mode: log.mode,
            verdict: log.verdict(),
            samples: log.outputs.len(),
            confirmed_samples: log.confirmed_samples(log.mode),
            first_confirmation: log.first_confirmation(log.mode),
            failure: log.failure.clone(),
        }
    }
}
