use std::time::Instant;

use super::config::{Command, KinfBlock, RunConfig};
use super::report::{CandidateSource, CandidatesUsed, DensityResult, RunReport, StageResults, Timings, ARTIFACT};
use super::verify::verify;
use crate::analysis::{density_lipschitz, density_profile, rugosity_check, RugosityOptions};
use crate::density::DensityOptions;
use crate::error::{Error, Result};
use crate::fiber::ScanConfig;
use crate::kinf::{detect_kinf, BinSpec, KinfConfig, KinfReport, RabierScanConfig};
use crate::poly::Polynomial;

fn scan(resolution: usize) -> ScanConfig {
    ScanConfig {
        resolution,
        ..ScanConfig::default()
    }
}

fn kinf_config(b: &KinfBlock, seed: u64) -> KinfConfig {
    KinfConfig {
        bins: BinSpec {
            center: b.bin_center,
            width: b.bin_width,
            count: b.bins,
        },
        slope_threshold: b.slope_threshold,
        abs_threshold: b.abs_threshold,
        scan: RabierScanConfig {
            resolution: b.resolution,
            draws: b.draws,
            ..RabierScanConfig::default()
        },
        seed,
    }
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    results: StageResults,
    timings: Timings,
}

impl Runner<'_> {
    fn timed<T>(&mut self, stage: &str, job: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = job();
        self.timings.stages.push((stage.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    fn kinf(&mut self, f: &Polynomial) -> Result<KinfReport> {
        let b = self.cfg.kinf.clone().unwrap_or_default();
        let kc = kinf_config(&b, self.cfg.seed);
        let radii = b.radii.radii();
        let rep = self.timed("kinf", || detect_kinf(f, &radii, &kc))?;
        self.results.kinf = Some(rep.clone());
        Ok(rep)
    }

    fn candidates(&mut self, f: &Polynomial, given: &Option<Vec<f64>>) -> Result<Vec<f64>> {
        let used = match given {
            Some(v) => CandidatesUsed {
                source: CandidateSource::Config,
                values: v.clone(),
            },
            None => CandidatesUsed {
                source: CandidateSource::Detected,
                values: self.kinf(f)?.candidates.iter().map(|c| c.value).collect(),
            },
        };
        let values = used.values.clone();
        self.results.candidates = Some(used);
        Ok(values)
    }

    fn stages(&mut self, cmd: Command, f: &Polynomial) -> Result<()> {
        let cfg = self.cfg;
        match cmd {
            Command::Density => {
                let b = cfg.density.as_ref().expect("validated");
                let opts = DensityOptions {
                    scan: scan(b.resolution),
                    draws: b.draws,
                    delta0: b.delta0,
                    min_retained: b.min_retained,
                    seed: cfg.seed,
                };
                let radii = b.radii.radii();
                let mut all = Vec::new();
                for &method in &b.methods {
                    let points = self.timed(&format!("density/{}", method.name()), || density_profile(f, &b.t, method, &radii, &opts))?;
                    all.push(DensityResult { method, points });
                    self.results.density = Some(all.clone());
                }
                if let Some(bad) = all.iter().flat_map(|d| &d.points).find(|p| p.error.is_some()) {
                    return Err(Error::InvalidArgument(format!(
                        "density estimate failed at t = {}: {}",
                        bad.t,
                        bad.error.as_deref().unwrap_or_default()
                    )));
                }
            }
            Command::Kinf => {
                self.kinf(f)?;
            }
            Command::Lipschitz => {
                let b = cfg.lipschitz.as_ref().expect("validated");
                let cands = self.candidates(f, &b.candidates)?;
                let opts = DensityOptions {
                    scan: scan(b.resolution),
                    draws: b.draws,
                    seed: cfg.seed,
                    ..DensityOptions::default()
                };
                let radii = b.radii.radii();
                let rep = self.timed("lipschitz", || density_lipschitz(f, &b.t_grid, b.method, &radii, &opts, b.jump_threshold, &cands))?;
                self.results.lipschitz = Some(rep);
            }
            Command::Rugosity => {
                let b = cfg.rugosity.as_ref().expect("validated");
                let cands = self.candidates(f, &b.candidates)?;
                let opts = RugosityOptions {
                    pairs_per_radius: b.pairs_per_radius,
                    margin: b.margin,
                    scan: scan(b.resolution),
                    seed: cfg.seed,
                    ..RugosityOptions::default()
                };
                let radii = b.radii.radii();
                let rep = self.timed("rugosity", || rugosity_check(f, b.interval, &cands, &radii, &opts))?;
                self.results.rugosity = Some(rep);
            }
            Command::Verify => unreachable!(),
        }
        Ok(())
    }
}

/// Runs `cmd`. Configuration problems are errors; numeric failures are
/// recorded in the report's `failure` field with earlier stages kept.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<(RunReport, Timings)> {
    cfg.validate(cmd)?;
    let mut runner = Runner {
        cfg,
        results: StageResults::default(),
        timings: Timings::default(),
    };
    let failure = if cmd == Command::Verify {
        let rep = runner.timed("verify", || Ok(verify(cfg.seed)))?;
        runner.results.verify = Some(rep);
        None
    } else {
        let f = cfg.polynomial()?;
        runner.stages(cmd, &f).err().map(|e| e.to_string())
    };
    let report = RunReport {
        artifact: ARTIFACT.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: cmd,
        config: cfg.clone(),
        results: runner.results,
        failure,
    };
    Ok((report, runner.timings))
}
