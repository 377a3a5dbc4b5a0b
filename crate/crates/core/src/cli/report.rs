//! Run reports and their on-disk forms: `report.json`, `tables/*.csv` and
//! `plots/*.dat`. Everything written here is a function of the report
//! alone, so equal reports give equal bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Command, RunConfig};
use super::verify::VerifyReport;
use crate::analysis::{LipschitzReport, ProfilePoint, RugosityReport};
use crate::density::DensityMethod;
use crate::error::Result;
use crate::kinf::KinfReport;

pub const ARTIFACT: &str = "densinf";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityResult {
    pub method: DensityMethod,
    pub points: Vec<ProfilePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    Config,
    Detected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatesUsed {
    pub source: CandidateSource,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageResults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Vec<DensityResult>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinf: Option<KinfReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<CandidatesUsed>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<LipschitzReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rugosity: Option<RugosityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub artifact: String,
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    pub results: StageResults,
    /// Set when a numeric stage failed; earlier stages are kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Wall-clock seconds per stage, written apart from the report so that the
/// report stays reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) if v.is_nan() => "nan".into(),
            Cell::Num(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}
impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        Cell::Num(v.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: &str, columns: &[&'static str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_dat(&self) -> String {
        let mut s = String::from("# ");
        s.push_str(&self.columns.join(" "));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
        s
    }
}

/// Flat tables derived from a report.
pub fn tables(report: &RunReport) -> Vec<Table> {
    let mut out = Vec::new();
    let res = &report.results;
    if let Some(density) = &res.density {
        let mut curves = Table::new("density_curves", &["method", "t", "r", "value", "stderr", "reliable"]);
        let mut est = Table::new("density_estimates", &["method", "t", "theta", "uncertainty", "plausible"]);
        for d in density {
            for p in &d.points {
                if let Some(c) = &p.curve {
                    for s in &c.samples {
                        curves.push(vec![d.method.name().into(), p.t.into(), s.r.into(), s.value.into(), s.stderr.into(), s.reliable.into()]);
                    }
                }
                let (theta, unc, ok) = p
                    .estimate
                    .as_ref()
                    .map_or((f64::NAN, f64::NAN, false), |e| (e.theta, e.uncertainty, e.plausible));
                est.push(vec![d.method.name().into(), p.t.into(), theta.into(), unc.into(), ok.into()]);
            }
        }
        out.push(curves);
        out.push(est);
    }
    if let Some(k) = &res.kinf {
        let mut env = Table::new("kinf_envelope", &["r", "bin_center", "min_nu"]);
        for row in &k.envelope {
            env.push(vec![row.r.into(), row.bin_center.into(), row.min_nu.into()]);
        }
        let mut cand = Table::new("kinf_candidates", &["value", "bin_width", "decay_slope", "final_nu", "n_witnesses"]);
        for c in &k.candidates {
            cand.push(vec![c.value.into(), c.bin_width.into(), c.decay_slope.into(), c.final_nu.into(), c.n_witnesses.into()]);
        }
        let mut glob = Table::new("kinf_global_nu", &["r", "min_nu"]);
        for (r, v) in k.radii.iter().zip(&k.global_min_nu) {
            glob.push(vec![(*r).into(), (*v).into()]);
        }
        out.extend([env, cand, glob]);
    }
    if let Some(l) = &res.lipschitz {
        let mut prof = Table::new("profile", &["t", "theta", "stderr"]);
        for (t, e) in l.t_grid.iter().zip(&l.theta) {
            let (th, se) = e.as_ref().map_or((f64::NAN, f64::NAN), |e| (e.theta, e.uncertainty));
            prof.push(vec![(*t).into(), th.into(), se.into()]);
        }
        let mut moduli = Table::new("moduli", &["t_lo", "t_hi", "modulus"]);
        for (w, m) in l.t_grid.windows(2).zip(&l.moduli) {
            moduli.push(vec![w[0].into(), w[1].into(), (*m).into()]);
        }
        let mut jumps = Table::new("discontinuities", &["t_location", "jump_size", "nearest_candidate"]);
        for d in &l.discontinuities {
            jumps.push(vec![d.t_location.into(), d.jump_size.into(), d.nearest_kinf_candidate.into()]);
        }
        out.extend([prof, moduli, jumps]);
    }
    if let Some(r) = &res.rugosity {
        let mut per = Table::new("rugosity_radius", &["r", "max_ratio"]);
        for m in &r.per_radius_max {
            per.push(vec![m.r.into(), m.max_ratio.into()]);
        }
        let mut pairs = Table::new("rugosity_pairs", &["r", "t_z", "t_y", "distance", "v_tail_norm", "ratio", "refined"]);
        for p in &r.pair_samples {
            pairs.push(vec![p.r.into(), p.t_z.into(), p.t_y.into(), p.distance.into(), p.v_tail_norm.into(), p.ratio.into(), p.refined.into()]);
        }
        out.extend([per, pairs]);
    }
    if let Some(v) = &res.verify {
        let mut t = Table::new("verify", &["check", "passed"]);
        for c in &v.checks {
            t.push(vec![c.name.as_str().into(), c.passed.into()]);
        }
        out.push(t);
    }
    out
}

pub fn report_json(report: &RunReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Writes `report.json`, `timings.json`, `tables/*.csv` and `plots/*.dat`.
pub fn emit(report: &RunReport, timings: &Timings, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("tables"))?;
    fs::create_dir_all(dir.join("plots"))?;
    fs::write(dir.join("report.json"), report_json(report)?)?;
    let mut t = serde_json::to_string_pretty(timings)?;
    t.push('\n');
    fs::write(dir.join("timings.json"), t)?;
    for table in tables(report) {
        fs::write(dir.join("tables").join(format!("{}.csv", table.name)), table.to_csv())?;
        fs::write(dir.join("plots").join(format!("{}.dat", table.name)), table.to_dat())?;
    }
    Ok(())
}
