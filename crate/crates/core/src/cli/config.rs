//! Run configuration read from JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::density::{geometric_radii, DensityMethod};
use crate::error::{Error, Result};
use crate::poly::Polynomial;

/// Either an explicit list or `r0 * 2^j` for `j < count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiiSpec {
    List(Vec<f64>),
    Geometric { r0: f64, count: usize },
}

impl RadiiSpec {
    pub fn radii(&self) -> Vec<f64> {
        match self {
            RadiiSpec::List(v) => v.clone(),
            RadiiSpec::Geometric { r0, count } => geometric_radii(*r0, *count),
        }
    }

    fn validate(&self, what: &str) -> Result<Vec<f64>> {
        let r = self.radii();
        if r.is_empty() || r.iter().any(|v| !(v.is_finite() && *v > 0.0)) || r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!("{what}: radii must be positive, finite and increasing")));
        }
        Ok(r)
    }
}

fn default_radii() -> RadiiSpec {
    RadiiSpec::Geometric { r0: 8.0, count: 6 }
}
fn default_methods() -> Vec<DensityMethod> {
    vec![DensityMethod::SphereCount]
}
fn default_method() -> DensityMethod {
    DensityMethod::SphereCount
}
fn default_nvars() -> usize {
    2
}
fn default_resolution() -> usize {
    4096
}
fn default_draws() -> usize {
    200_000
}
fn default_min_retained() -> usize {
    1000
}
fn default_rabier_draws() -> usize {
    100_000
}
fn default_bin_width() -> f64 {
    0.02
}
fn default_bins() -> usize {
    64
}
fn default_slope_threshold() -> f64 {
    -0.5
}
fn default_abs_threshold() -> f64 {
    0.1
}
fn default_jump_threshold() -> f64 {
    0.5
}
fn default_pairs() -> usize {
    128
}
fn default_margin() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityBlock {
    pub t: Vec<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<DensityMethod>,
    #[serde(default = "default_radii")]
    pub radii: RadiiSpec,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_min_retained")]
    pub min_retained: usize,
    #[serde(default)]
    pub delta0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinfBlock {
    #[serde(default = "default_radii")]
    pub radii: RadiiSpec,
    #[serde(default)]
    pub bin_center: f64,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_slope_threshold")]
    pub slope_threshold: f64,
    #[serde(default = "default_abs_threshold")]
    pub abs_threshold: f64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_rabier_draws")]
    pub draws: usize,
}

impl Default for KinfBlock {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzBlock {
    pub t_grid: Vec<f64>,
    #[serde(default = "default_method")]
    pub method: DensityMethod,
    #[serde(default = "default_radii")]
    pub radii: RadiiSpec,
    #[serde(default = "default_jump_threshold")]
    pub jump_threshold: f64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Known candidates; detected with the `kinf` block when absent.
    #[serde(default)]
    pub candidates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RugosityBlock {
    pub interval: (f64, f64),
    #[serde(default = "default_radii")]
    pub radii: RadiiSpec,
    #[serde(default = "default_pairs")]
    pub pairs_per_radius: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub candidates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub polynomial: Option<String>,
    #[serde(default = "default_nvars")]
    pub nvars: usize,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub density: Option<DensityBlock>,
    #[serde(default)]
    pub kinf: Option<KinfBlock>,
    #[serde(default)]
    pub lipschitz: Option<LipschitzBlock>,
    #[serde(default)]
    pub rugosity: Option<RugosityBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Density,
    Kinf,
    Lipschitz,
    Rugosity,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Density => "density",
            Command::Kinf => "kinf",
            Command::Lipschitz => "lipschitz",
            Command::Rugosity => "rugosity",
            Command::Verify => "verify",
        }
    }
}

impl RunConfig {
    /// Parses JSON text; `seed` replaces the configured seed when given.
    pub fn from_json(text: &str, seed: Option<u64>) -> Result<Self> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
        if let Some(s) = seed {
            obj.insert("seed".into(), s.into());
        }
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, seed)
    }

    /// A configuration with only a seed, enough for `verify`.
    pub fn bare(seed: u64) -> Self {
        Self {
            polynomial: None,
            nvars: 2,
            seed,
            output_dir: None,
            density: None,
            kinf: None,
            lipschitz: None,
            rugosity: None,
        }
    }

    pub fn polynomial(&self) -> Result<Polynomial> {
        let src = self
            .polynomial
            .as_deref()
            .ok_or_else(|| Error::Config("missing field `polynomial`".into()))?;
        if self.nvars == 0 {
            return Err(Error::Config("nvars must be positive".into()));
        }
        Ok(Polynomial::parse(src, self.nvars)?)
    }

    /// Checks that the blocks needed by `cmd` are present and consistent.
    pub fn validate(&self, cmd: Command) -> Result<()> {
        if cmd == Command::Verify {
            return Ok(());
        }
        let f = self.polynomial()?;
        let missing = |b: &str| Error::Config(format!("subcommand {} needs a `{b}` block", cmd.name()));
        let needs_plane = |what: &str| {
            if f.nvars() != 2 {
                Err(Error::Config(format!("{what} needs nvars = 2")))
            } else {
                Ok(())
            }
        };
        match cmd {
            Command::Density => {
                let b = self.density.as_ref().ok_or_else(|| missing("density"))?;
                if b.t.is_empty() || b.methods.is_empty() {
                    return Err(Error::Config("density: need at least one level and one method".into()));
                }
                b.radii.validate("density")?;
                if b.t.iter().any(|t| !t.is_finite()) {
                    return Err(Error::Config("density: levels must be finite".into()));
                }
                let mut sorted = b.t.clone();
                sorted.sort_by(f64::total_cmp);
                if sorted.windows(2).any(|w| w[0] == w[1]) || sorted != b.t {
                    return Err(Error::Config("density: levels must be strictly increasing".into()));
                }
            }
            Command::Kinf => {
                let b = self.kinf.clone().unwrap_or_default();
                self.validate_kinf(&b)?;
            }
            Command::Lipschitz => {
                let b = self.lipschitz.as_ref().ok_or_else(|| missing("lipschitz"))?;
                b.radii.validate("lipschitz")?;
                if b.t_grid.len() < 3 || b.t_grid.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config("lipschitz: t_grid needs >= 3 strictly increasing levels".into()));
                }
                if !(b.jump_threshold > 0.0) {
                    return Err(Error::Config("lipschitz: jump_threshold must be positive".into()));
                }
                if b.candidates.is_none() {
                    self.validate_kinf(&self.kinf.clone().unwrap_or_default())?;
                }
            }
            Command::Rugosity => {
                let b = self.rugosity.as_ref().ok_or_else(|| missing("rugosity"))?;
                needs_plane("rugosity")?;
                b.radii.validate("rugosity")?;
                let (a, c) = b.interval;
                if !(a < c) || !a.is_finite() || !c.is_finite() {
                    return Err(Error::Config("rugosity: interval must satisfy a < b".into()));
                }
                if !(b.margin >= 0.0) || b.pairs_per_radius == 0 {
                    return Err(Error::Config("rugosity: need margin >= 0 and pairs_per_radius > 0".into()));
                }
                if b.candidates.is_none() {
                    self.validate_kinf(&self.kinf.clone().unwrap_or_default())?;
                }
            }
            Command::Verify => unreachable!(),
        }
        Ok(())
    }

    fn validate_kinf(&self, b: &KinfBlock) -> Result<()> {
        let r = b.radii.validate("kinf")?;
        if r.len() < 4 {
            return Err(Error::Config("kinf: need at least 4 radii".into()));
        }
        if !(b.bin_width > 0.0) || b.bins == 0 {
            return Err(Error::Config("kinf: bins need positive width and count".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_required() {
        let e = RunConfig::from_json(r#"{"polynomial": "x"}"#, None).unwrap_err();
        assert!(matches!(e, Error::Config(m) if m.contains("seed")));
        let c = RunConfig::from_json(r#"{"polynomial": "x"}"#, Some(3)).unwrap();
        assert_eq!(c.seed, 3);
        let c = RunConfig::from_json(r#"{"polynomial": "x", "seed": 1}"#, Some(9)).unwrap();
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn blocks_and_defaults() {
        let c = RunConfig::from_json(r#"{"polynomial": "x*y", "seed": 1, "density": {"t": [1.0]}}"#, None).unwrap();
        c.validate(Command::Density).unwrap();
        let b = c.density.as_ref().unwrap();
        assert_eq!(b.methods, vec![DensityMethod::SphereCount]);
        assert_eq!(b.radii.radii(), vec![8.0, 16.0, 32.0, 64.0, 128.0, 256.0]);
        assert!(c.validate(Command::Rugosity).is_err());
        c.validate(Command::Kinf).unwrap();
        let c = RunConfig::from_json(r#"{"polynomial": "x", "seed": 1, "kinf": {"radii": [1, 2]}}"#, None).unwrap();
        assert!(c.validate(Command::Kinf).is_err());
        let c = RunConfig::from_json(r#"{"polynomial": "x", "seed": 1, "kinf": {"radii": {"r0": 2, "count": 5}}}"#, None).unwrap();
        c.validate(Command::Kinf).unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_json("[1]", Some(1)).is_err());
        assert!(RunConfig::from_json(r#"{"seed": 1, "typo": 2}"#, None).is_err());
        let c = RunConfig::from_json(r#"{"polynomial": "x/", "seed": 1, "density": {"t": [0]}}"#, None).unwrap();
        assert!(matches!(c.validate(Command::Density), Err(Error::Parse(_))));
        let c = RunConfig::from_json(r#"{"polynomial": "x", "seed": 1, "density": {"t": [1, 0]}}"#, None).unwrap();
        assert!(c.validate(Command::Density).is_err());
        RunConfig::bare(1).validate(Command::Verify).unwrap();
    }
}
