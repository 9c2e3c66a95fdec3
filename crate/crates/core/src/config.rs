//! JSON experiment configuration.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GafError, Result};
use crate::geometry::{Disc, Rect};
use crate::measure::{TabulatedDensity, Weight};
use crate::stats::testfn::TestFunction;

/// Environment variable that replaces `seeds.master`.
pub const SEED_ENV: &str = "GAFSIM_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MeanVariance,
    Hole,
    LargeDeviation,
    Normality,
    KernelDiagnostics,
    PoissonBaseline,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MeanVariance => "mean_variance",
            ExperimentKind::Hole => "hole",
            ExperimentKind::LargeDeviation => "large_deviation",
            ExperimentKind::Normality => "normality",
            ExperimentKind::KernelDiagnostics => "kernel_diagnostics",
            ExperimentKind::PoissonBaseline => "poisson_baseline",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    RadialPower { alpha: f64 },
    RealPartSquare,
    /// JSON grid file; relative paths resolve against the config file's directory.
    Tabulated { path: PathBuf },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GafForm {
    #[default]
    Basis,
    Frame,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub master: u64,
    #[serde(default)]
    pub trial_offset: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameParams {
    /// Separation of the sampling sequence in units of `rho_L`.
    pub delta: f64,
    /// Covering radius in units of `rho_L`.
    pub covering_r: f64,
}

impl Default for FrameParams {
    fn default() -> Self {
        FrameParams {
            delta: 0.4,
            covering_r: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoissonParams {
    /// Intensity is `intensity_scale * L * dmu`; `1/(2 pi)` matches the GAF zero intensity.
    pub intensity_scale: f64,
    /// Also simulate the Poisson process next to the GAF (hole and deviation runs).
    pub simulate: bool,
}

impl Default for PoissonParams {
    fn default() -> Self {
        PoissonParams {
            intensity_scale: 1.0 / (2.0 * PI),
            simulate: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsParams {
    /// Grid points per side for the kernel bands.
    pub grid: usize,
    /// Inner radius `r` of the fast-decay integral, in units of `rho`.
    pub fast_decay_r: f64,
    /// Cut-off radii `R` of the fast-decay integral, in units of `rho`.
    pub fast_decay_big_r: Vec<f64>,
}

impl Default for DiagnosticsParams {
    fn default() -> Self {
        DiagnosticsParams {
            grid: 9,
            fast_decay_r: 1.0,
            fast_decay_big_r: vec![2.0, 3.0, 4.0],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputParams {
    pub dir: Option<PathBuf>,
    /// File stem for the report files; defaults to the experiment name.
    pub stem: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub weight: WeightSpec,
    #[serde(default)]
    pub gaf_form: GafForm,
    pub l_grid: Vec<f64>,
    pub trials: usize,
    pub region: Rect,
    #[serde(default)]
    pub disc: Option<Disc>,
    #[serde(default)]
    pub psi: Option<TestFunction>,
    pub seeds: Seeds,
    #[serde(default)]
    pub frame: FrameParams,
    #[serde(default)]
    pub poisson: PoissonParams,
    /// Relative deviation threshold for large-deviation runs.
    #[serde(default = "default_deviation")]
    pub deviation_delta: f64,
    #[serde(default)]
    pub diagnostics: DiagnosticsParams,
    #[serde(default)]
    pub output: OutputParams,
}

fn default_deviation() -> f64 {
    0.2
}

/// A validated config together with its resolved weight and content hash.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub weight: Weight,
    /// sha256 of the canonical JSON form (after any seed override).
    pub hash: String,
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.contains("field"))
                .unwrap_or("config")
                .to_string();
            GafError::config(field, msg)
        })
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn stem(&self) -> String {
        self.output
            .stem
            .clone()
            .unwrap_or_else(|| self.experiment.name().to_string())
    }

    pub fn resolve_weight(&self, base_dir: &Path) -> Result<Weight> {
        let w = match &self.weight {
            WeightSpec::RadialPower { alpha } => Weight::radial_power(*alpha),
            WeightSpec::RealPartSquare => Ok(Weight::RealPartSquare),
            WeightSpec::Tabulated { path } => {
                let p = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                TabulatedDensity::from_json_file(&p).map(|t| Weight::Tabulated(Arc::new(t)))
            }
        };
        w.map_err(|e| GafError::config("weight", e.to_string()))
    }

    /// Structural checks; every error names the offending field.
    pub fn validate(&self, weight: &Weight) -> Result<()> {
        if self.l_grid.is_empty() {
            return Err(GafError::config("l_grid", "must not be empty"));
        }
        if self.l_grid.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(GafError::config("l_grid", "values must be positive and finite"));
        }
        if self.l_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GafError::config("l_grid", "must be strictly increasing"));
        }
        if self.trials < 1 {
            return Err(GafError::config("trials", "must be at least 1"));
        }
        if !self.region.is_valid() {
            return Err(GafError::config("region", "x_min < x_max and y_min < y_max required"));
        }
        if let Some(psi) = &self.psi {
            if !psi.is_valid() {
                return Err(GafError::config("psi", "invalid test function parameters"));
            }
            if !self.region.contains_disc(&psi.support()) {
                return Err(GafError::config("region", "does not contain the support of psi"));
            }
        }
        if let Some(d) = &self.disc {
            if !d.is_valid() {
                return Err(GafError::config("disc", "radius must be positive"));
            }
            if !self.region.contains_disc(d) {
                return Err(GafError::config("region", "does not contain the disc"));
            }
        }
        if !(self.frame.delta > 0.0 && self.frame.covering_r > self.frame.delta) {
            return Err(GafError::config("frame", "need 0 < delta < covering_r"));
        }
        if !(self.poisson.intensity_scale > 0.0 && self.poisson.intensity_scale.is_finite()) {
            return Err(GafError::config("poisson", "intensity_scale must be positive"));
        }
        if self.deviation_delta.is_nan() || self.deviation_delta <= 0.0 {
            return Err(GafError::config("deviation_delta", "must be positive"));
        }
        let d = &self.diagnostics;
        if d.grid < 2 || d.fast_decay_r.is_nan() || d.fast_decay_r <= 0.0 || d.fast_decay_big_r.iter().any(|r| *r <= d.fast_decay_r) {
            return Err(GafError::config("diagnostics", "need grid >= 2 and 0 < r < every R"));
        }
        use ExperimentKind::*;
        match self.experiment {
            MeanVariance | Normality | PoissonBaseline if self.psi.is_none() => {
                return Err(GafError::config("psi", "required by this experiment"));
            }
            Hole | LargeDeviation if self.disc.is_none() => {
                return Err(GafError::config("disc", "required by this experiment"));
            }
            _ => {}
        }
        if self.experiment == LargeDeviation && self.gaf_form != GafForm::Frame {
            return Err(GafError::config("gaf_form", "large deviations are run on the frame GAF"));
        }
        if matches!(weight, Weight::Tabulated(_)) && self.experiment != PoissonBaseline {
            return Err(GafError::config(
                "weight",
                "tabulated densities have no potential; only poisson_baseline is available",
            ));
        }
        Ok(())
    }

    /// Reads, applies the seed override, validates and hashes.
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::from_json(&text)?;
        if let Ok(s) = std::env::var(SEED_ENV) {
            config.seeds.master = s
                .trim()
                .parse()
                .map_err(|_| GafError::config("seeds", format!("{SEED_ENV}={s} is not a u64")))?;
        }
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let weight = config.resolve_weight(&base_dir)?;
        config.validate(&weight)?;
        let hash = config.hash();
        Ok(LoadedConfig {
            config,
            weight,
            hash,
            base_dir,
        })
    }
}
