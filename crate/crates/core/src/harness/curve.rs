//! Learning-curve files: one row per generation, delimited text with a
//! header, floats printed in shortest round-trip form so identical runs
//! produce byte-identical files.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::erl::GenerationReport;
use crate::error::{Error, Result};

pub const CURVE_HEADER: &str = "generation,cumulative_steps,champion_score,best_fitness,mean_fitness";

/// One learning-curve checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub generation: u64,
    pub cumulative_steps: u64,
    pub champion_score: f64,
    pub best_fitness: f64,
    pub mean_fitness: f64,
}

impl From<&GenerationReport> for CurvePoint {
    fn from(r: &GenerationReport) -> Self {
        Self {
            generation: r.generation,
            cumulative_steps: r.cumulative_steps,
            champion_score: r.champion_score,
            best_fitness: r.best_fitness,
            mean_fitness: r.mean_fitness,
        }
    }
}

/// Streams curve rows to disk as they are produced.
pub struct CurveWriter {
    out: BufWriter<std::fs::File>,
}

impl CurveWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = std::fs::File::create(path)?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{CURVE_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, point: &CurvePoint) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{}",
            point.generation,
            point.cumulative_steps,
            point.champion_score,
            point.best_fitness,
            point.mean_fitness
        )?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_curve(path: &Path) -> Result<Vec<CurvePoint>> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(header)) if header == CURVE_HEADER => {}
        _ => return Err(Error::Parse(format!("{}: missing curve header", path.display()))),
    }
    let mut points = Vec::new();
    for (ix, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!(
                "{}: row {} has {} fields, expected 5",
                path.display(),
                ix + 2,
                fields.len()
            )));
        }
        let parse_u = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        };
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        };
        points.push(CurvePoint {
            generation: parse_u(fields[0])?,
            cumulative_steps: parse_u(fields[1])?,
            champion_score: parse_f(fields[2])?,
            best_fitness: parse_f(fields[3])?,
            mean_fitness: parse_f(fields[4])?,
        });
    }
    Ok(points)
}

/// Mean and standard deviation of champion scores at each checkpoint,
/// across runs that share a step grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatePoint {
    pub cumulative_steps: u64,
    pub mean: f64,
    pub std_dev: f64,
}

/// Aggregates aligned curves checkpoint-by-checkpoint. Errors when the runs
/// do not share the same cumulative-step grid.
pub fn aggregate_curves(curves: &[Vec<CurvePoint>]) -> Result<Vec<AggregatePoint>> {
    let first = curves
        .first()
        .ok_or_else(|| Error::input("aggregate_curves: no curves"))?;
    for c in curves {
        if c.len() != first.len()
            || c.iter()
                .zip(first)
                .any(|(a, b)| a.cumulative_steps != b.cumulative_steps)
        {
            return Err(Error::input(
                "aggregate_curves: runs do not share a cumulative-step grid",
            ));
        }
    }
    let n = curves.len() as f64;
    Ok((0..first.len())
        .map(|i| {
            let scores: Vec<f64> = curves.iter().map(|c| c[i].champion_score).collect();
            let mean = scores.iter().sum::<f64>() / n;
            let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
            AggregatePoint {
                cumulative_steps: first[i].cumulative_steps,
                mean,
                std_dev: var.sqrt(),
            }
        })
        .collect())
}
