use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::robustness::{RobustnessReport, RunSummary};
use crate::boost::Dataset;
use crate::error::Result;

#[derive(Serialize)]
struct CsvRow<'a> {
    model: &'a str,
    metric: String,
    instance_id: usize,
    distance: f64,
    status: &'a str,
    wall_time: f64,
}

/// Writes a binary (P5) greyscale PGM.
pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    assert_eq!(pixels.len(), width * height);
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{width} {height}\n255\n")?;
    f.write_all(pixels)?;
    Ok(())
}

/// Image shape for a feature vector: square when possible, else one row.
pub fn image_shape(n: usize) -> (usize, usize) {
    let side = (n as f64).sqrt().round() as usize;
    if side * side == n {
        (side, side)
    } else {
        (n, 1)
    }
}

/// Values in `[0, 1]` to grey levels.
pub fn to_grey(values: &[f64]) -> Vec<u8> {
    values
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

/// Frequencies as grey levels, darker meaning more frequent; all white when
/// nothing was modified.
pub fn frequency_image(counts: &[u64]) -> Vec<u8> {
    let max = counts.iter().copied().max().unwrap_or(0);
    counts
        .iter()
        .map(|&c| {
            if max == 0 {
                255
            } else {
                255 - (255.0 * c as f64 / max as f64).round() as u8
            }
        })
        .collect()
}

pub fn write_outcomes_csv(report: &RobustnessReport, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for o in &report.outcomes {
        w.serialize(CsvRow {
            model: &o.model,
            metric: o.metric.to_string(),
            instance_id: o.instance_id,
            distance: o.outcome.distance,
            status: o.outcome.status.label(),
            wall_time: o.outcome.wall_time.as_secs_f64(),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    solver: String,
    runs: &'a [RunSummary],
}

/// Writes `outcomes.csv`, `summary.json`, and per model an
/// `importance.pgm` frequency map (L0 runs) plus an `x_<id>.pgm` /
/// `xprime_<id>.pgm` pair per evasion under `<model>/<metric>/`.
pub fn emit_artifacts(report: &RobustnessReport, eval: &Dataset, out_dir: impl AsRef<Path>) -> Result<()> {
    let out = out_dir.as_ref();
    fs::create_dir_all(out)?;
    write_outcomes_csv(report, out.join("outcomes.csv"))?;
    let summary = SummaryFile {
        solver: report.solver.to_string(),
        runs: &report.summaries,
    };
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;

    let (w, h) = image_shape(eval.n_features());
    for f in &report.frequencies {
        let dir = out.join(&f.model);
        fs::create_dir_all(&dir)?;
        write_pgm(dir.join("importance.pgm"), w, h, &frequency_image(&f.counts))?;
    }
    for o in &report.outcomes {
        let Some(xp) = &o.outcome.x_prime else {
            continue;
        };
        let dir = out.join(&o.model).join(o.metric.to_string());
        fs::create_dir_all(&dir)?;
        let id = o.instance_id;
        write_pgm(dir.join(format!("x_{id}.pgm")), w, h, &to_grey(eval.row(id)))?;
        write_pgm(dir.join(format!("xprime_{id}.pgm")), w, h, &to_grey(xp))?;
    }
    Ok(())
}
