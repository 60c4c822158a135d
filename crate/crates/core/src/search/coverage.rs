//! ε-grid coverage certificates.
//!
//! Centers sit at spacing `2ε` on `[-h, h]^d`; if every center has a subset
//! sum within `ε`, every point of the box has one within `2ε`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParamError, Result};
use crate::params::snapped_ceil;
use crate::sampler::SampleMatrix;

use super::mim::{MimIndex, DEFAULT_MEMORY_BUDGET};
use super::{enumerate_exhaustive, Engine, SearchResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverageOptions {
    pub engine: Engine,
    pub range_halfwidth: f64,
    /// Largest number of grid centers accepted.
    pub grid_budget: u64,
    /// Search only the first rows. A prefix that covers the box certifies
    /// the full matrix too, so this trades power for speed.
    pub max_rows: Option<usize>,
    pub cardinality: Option<usize>,
    /// Evaluate centers in order and stop at the first miss.
    pub stop_at_first_uncovered: bool,
    pub memory_budget: u64,
}

impl Default for CoverageOptions {
    fn default() -> Self {
        Self {
            engine: Engine::MeetInMiddle,
            range_halfwidth: 1.0,
            grid_budget: 1 << 20,
            max_rows: None,
            cardinality: None,
            stop_at_first_uncovered: false,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointOutcome {
    pub center: Vec<f64>,
    pub found: bool,
    pub error: f64,
    pub subset: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub grid_step: f64,
    pub points_per_axis: usize,
    pub total_points: u64,
    /// Centers evaluated; below `total_points` only after an early stop.
    pub evaluated_points: u64,
    pub covered_points: u64,
    pub first_uncovered: Option<Vec<f64>>,
    pub max_error: f64,
    pub mean_error: f64,
    pub rows_searched: usize,
    pub engine: Engine,
    pub points: Vec<PointOutcome>,
}

impl CoverageReport {
    pub fn fully_covered(&self) -> bool {
        self.first_uncovered.is_none() && self.covered_points == self.total_points
    }
}

fn axis_count(halfwidth: f64, epsilon: f64) -> usize {
    snapped_ceil(halfwidth / epsilon).max(1)
}

/// Centers `−(k−1)ε + 2εi`, `i < k = ceil(h/ε)`, on each axis; the first
/// axis varies slowest.
pub fn grid_centers(d: usize, epsilon: f64, halfwidth: f64) -> Vec<Vec<f64>> {
    let k = axis_count(halfwidth, epsilon);
    let coord = |i: usize| -((k - 1) as f64) * epsilon + 2.0 * epsilon * i as f64;
    let total = k.pow(d as u32);
    (0..total)
        .map(|mut flat| {
            let mut c = vec![0.0; d];
            for j in (0..d).rev() {
                c[j] = coord(flat % k);
                flat /= k;
            }
            c
        })
        .collect()
}

/// Runs the engine at every grid center with tolerance `ε`.
pub fn cover_grid(m: &SampleMatrix, epsilon: f64, opts: &CoverageOptions) -> Result<CoverageReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(ParamError::new("epsilon", "must be positive for a coverage grid").into());
    }
    let h = opts.range_halfwidth;
    if !(h > 0.0 && h.is_finite()) {
        return Err(ParamError::new("range_halfwidth", "must be positive and finite").into());
    }
    let k = axis_count(h, epsilon);
    let total = (k as f64).powi(m.d() as i32);
    if total > opts.grid_budget as f64 {
        return Err(Error::GridBudget {
            required: if total >= u64::MAX as f64 {
                u64::MAX
            } else {
                total as u64
            },
            budget: opts.grid_budget,
        });
    }
    let rows = m
        .n()
        .min(opts.max_rows.unwrap_or(usize::MAX))
        .min(opts.engine.max_rows());
    let prefix;
    let mat = if rows < m.n() {
        prefix = m.prefix(rows);
        &prefix
    } else {
        m
    };
    let centers = grid_centers(m.d(), epsilon, h);
    let index = match opts.engine {
        Engine::MeetInMiddle => Some(MimIndex::new(mat, epsilon, opts.cardinality, opts.memory_budget)?),
        Engine::Exhaustive => None,
    };
    let run = |c: &Vec<f64>| -> Result<SearchResult> {
        match &index {
            Some(ix) => ix.query(c),
            None => enumerate_exhaustive(mat, c, epsilon, opts.cardinality),
        }
    };
    let outcome = |c: &Vec<f64>, r: SearchResult| PointOutcome {
        center: c.clone(),
        found: r.found,
        error: r.error,
        subset: r.subset,
    };
    let points: Vec<PointOutcome> = if opts.stop_at_first_uncovered {
        let mut out = Vec::new();
        for c in &centers {
            let p = outcome(c, run(c)?);
            let miss = !p.found;
            out.push(p);
            if miss {
                break;
            }
        }
        out
    } else {
        centers
            .par_iter()
            .map(|c| run(c).map(|r| outcome(c, r)))
            .collect::<Result<_>>()?
    };
    let covered = points.iter().filter(|p| p.found).count() as u64;
    let max_error = points.iter().map(|p| p.error).fold(0.0, f64::max);
    let mean_error = points.iter().map(|p| p.error).sum::<f64>() / points.len().max(1) as f64;
    Ok(CoverageReport {
        grid_step: 2.0 * epsilon,
        points_per_axis: k,
        total_points: centers.len() as u64,
        evaluated_points: points.len() as u64,
        covered_points: covered,
        first_uncovered: points.iter().find(|p| !p.found).map(|p| p.center.clone()),
        max_error,
        mean_error,
        rows_searched: rows,
        engine: opts.engine,
        points,
    })
}

/// One CSV row per center: `c0..c{d-1}, found, error, subset` with the
/// subset as space-separated indices.
pub fn write_coverage_csv<W: Write>(report: &CoverageReport, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let d = report.points.first().map_or(0, |p| p.center.len());
    let mut header: Vec<String> = (0..d).map(|j| format!("c{j}")).collect();
    header.extend(["found", "error", "subset"].map(String::from));
    wr.write_record(&header)?;
    for p in &report.points {
        let mut rec: Vec<String> = p.center.iter().map(|x| x.to_string()).collect();
        rec.push(p.found.to_string());
        rec.push(p.error.to_string());
        rec.push(p.subset.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}
