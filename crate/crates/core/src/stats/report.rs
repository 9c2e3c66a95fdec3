//! Experiment reports: full JSON plus fixed-schema CSV summaries.
//!
//! CSV schemas:
//! - `<stem>.csv`: `L,trials,mean,var,theory_mean,theory_var,flags`
//! - `<stem>_hole.csv` (hole runs only): `L2,log_p,se_log_p`
//!
//! Missing values are written as empty fields.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SeedRange {
    pub l: f64,
    pub l_index: usize,
    pub domain: String,
    pub first_stream: u64,
    pub last_stream: u64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SeedLedger {
    pub master: u64,
    pub trial_offset: u64,
    pub ranges: Vec<SeedRange>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TrialFlag {
    pub l: f64,
    pub trial: u64,
    pub stream: u64,
    pub error: String,
}

#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct Row {
    pub l: f64,
    pub trials: usize,
    pub flagged: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theory_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theory_var: Option<f64>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, f64>,
}

impl Row {
    pub fn new(l: f64) -> Self {
        Row {
            l,
            ..Row::default()
        }
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.extra.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.extra.get(key).copied()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StatReport {
    pub schema_version: u32,
    pub build_version: String,
    pub experiment: String,
    pub weight: String,
    pub gaf_form: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seeds: SeedLedger,
    pub rows: Vec<Row>,
    pub fits: BTreeMap<String, serde_json::Value>,
    pub diagnostics: BTreeMap<String, f64>,
    pub flags: Vec<TrialFlag>,
    pub notes: Vec<String>,
}

/// Files written by [`StatReport::write`].
#[derive(Clone, Debug)]
pub struct ReportPaths {
    pub json: PathBuf,
    pub csv: PathBuf,
    pub hole_csv: Option<PathBuf>,
}

fn opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:e}"),
        _ => String::new(),
    }
}

impl StatReport {
    pub fn new(config: &ExperimentConfig, hash: &str, weight: String) -> Self {
        StatReport {
            schema_version: SCHEMA_VERSION,
            build_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: config.experiment.name().to_string(),
            weight,
            gaf_form: format!("{:?}", config.gaf_form).to_lowercase(),
            config_hash: hash.to_string(),
            config: config.clone(),
            seeds: SeedLedger {
                master: config.seeds.master,
                trial_offset: config.seeds.trial_offset,
                ranges: Vec::new(),
            },
            rows: Vec::new(),
            fits: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
            flags: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn add_fit<T: Serialize>(&mut self, name: &str, fit: &T) {
        let v = serde_json::to_value(fit).expect("fit serializes");
        self.fits.insert(name.to_string(), v);
    }

    pub fn fit_field(&self, name: &str, field: &str) -> Option<f64> {
        self.fits.get(name)?.get(field)?.as_f64()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["L", "trials", "mean", "var", "theory_mean", "theory_var", "flags"])?;
        for r in &self.rows {
            w.write_record([
                format!("{}", r.l),
                r.trials.to_string(),
                opt(r.mean),
                opt(r.var),
                opt(r.theory_mean),
                opt(r.theory_var),
                r.flagged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_hole_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["L2", "log_p", "se_log_p"])?;
        for r in &self.rows {
            let lp = r.get("log_p").filter(|v| v.is_finite());
            if lp.is_none() {
                continue;
            }
            w.write_record([format!("{:e}", r.l * r.l), opt(lp), opt(r.get("se_log_p"))])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<stem>.json`, `<stem>.csv` and, for hole runs, `<stem>_hole.csv`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<ReportPaths> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, self.to_json() + "\n")?;
        let csv = dir.join(format!("{stem}.csv"));
        self.write_summary_csv(&csv)?;
        let hole_csv = if self.experiment == "hole" {
            let p = dir.join(format!("{stem}_hole.csv"));
            self.write_hole_csv(&p)?;
            Some(p)
        } else {
            None
        };
        Ok(ReportPaths {
            json,
            csv,
            hole_csv,
        })
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} | weight {} | form {} | config {}\n",
            self.experiment,
            self.weight,
            self.gaf_form,
            &self.config_hash[..12.min(self.config_hash.len())]
        );
        for r in &self.rows {
            s += &format!(
                "  L={:<6} trials={:<7} flagged={:<4} mean={:<12} var={:<12} theory_mean={:<12} theory_var={}\n",
                r.l,
                r.trials,
                r.flagged,
                fmt(r.mean),
                fmt(r.var),
                fmt(r.theory_mean),
                fmt(r.theory_var)
            );
        }
        for (k, v) in &self.fits {
            s += &format!("  fit {k}: {v}\n");
        }
        for (k, v) in &self.diagnostics {
            s += &format!("  {k} = {v:.6e}\n");
        }
        for n in &self.notes {
            s += &format!("  note: {n}\n");
        }
        s
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.5e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> StatReport {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment": "hole", "weight": {"kind": "radial_power", "alpha": 2},
                "l_grid": [1, 2], "trials": 3,
                "region": {"x_min": -1, "x_max": 1, "y_min": -1, "y_max": 1},
                "disc": {"center": [0, 0], "radius": 0.5}, "seeds": {"master": 1}}"#,
        )
        .unwrap();
        let mut r = StatReport::new(&cfg, "abc", "radial_power(2)".into());
        let mut row = Row::new(2.0);
        row.trials = 3;
        row.mean = Some(0.5);
        row.set("log_p", -1.0);
        row.set("se_log_p", 0.1);
        r.rows.push(row);
        r
    }

    #[test]
    fn csv_schemas() {
        let dir = tempfile::tempdir().unwrap();
        let paths = report().write(dir.path(), "t").unwrap();
        let csv = std::fs::read_to_string(paths.csv).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "L,trials,mean,var,theory_mean,theory_var,flags");
        assert_eq!(csv.lines().nth(1).unwrap(), "2,3,5e-1,,,,0");
        let hole = std::fs::read_to_string(paths.hole_csv.unwrap()).unwrap();
        assert_eq!(hole.lines().nth(1).unwrap(), "4e0,-1e0,1e-1");
    }

    #[test]
    fn json_flattens_extra_fields() {
        let v: serde_json::Value = serde_json::from_str(&report().to_json()).unwrap();
        assert_eq!(v["rows"][0]["log_p"], -1.0);
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert!(v["rows"][0].get("var").is_none());
    }
}
