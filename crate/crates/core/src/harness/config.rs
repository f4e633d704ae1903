use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineKind, DEFAULT_SWEEPS};
use crate::error::{Error, Result};
use crate::model::{DeltaMode, SystemDims};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(alias = "proposed")]
    Proposed,
    #[serde(alias = "ia3")]
    IA3,
    #[serde(alias = "max_sinr", alias = "max-sinr")]
    MaxSinr,
    #[serde(alias = "min_leakage", alias = "min-leakage")]
    MinLeakage,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::IA3, Scheme::MaxSinr, Scheme::MinLeakage];

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            Scheme::Proposed => None,
            Scheme::IA3 => Some(BaselineKind::IA3),
            Scheme::MaxSinr => Some(BaselineKind::MaxSinr),
            Scheme::MinLeakage => Some(BaselineKind::MinLeakage),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown scheme `{s}` (expected proposed, ia3, max_sinr or min_leakage)")))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Proposed => "proposed",
            Scheme::IA3 => "ia3",
            Scheme::MaxSinr => "max_sinr",
            Scheme::MinLeakage => "min_leakage",
        })
    }
}

/// Which SINR sets the scheduled rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// Nominal SINR at the estimates.
    #[default]
    Nominal,
    /// Worst-case surrogate (clamped at zero).
    WorstCase,
}

/// Experiment description, read from JSON.
///
/// Every user has power `P = 1`; the SNR `P/N0` sets the noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub snr_db: Vec<f64>,
    pub eps: Vec<f64>,
    pub drops: usize,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    pub out: PathBuf,
    #[serde(default)]
    pub delta_mode: DeltaMode,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default = "default_sweeps")]
    pub baseline_sweeps: usize,
    #[serde(default = "default_ao_iters")]
    pub ao_max_iters: usize,
}

fn default_sweeps() -> usize {
    DEFAULT_SWEEPS
}

fn default_ao_iters() -> usize {
    50
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("{origin}: line {} column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::Config(format!("field `{field}`: {msg}")));
        if self.drops == 0 {
            return bad("drops", "must be at least 1");
        }
        if self.snr_db.is_empty() {
            return bad("snr_db", "must not be empty");
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_db", "values must be finite");
        }
        if self.eps.is_empty() {
            return bad("eps", "must not be empty");
        }
        if self.eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return bad("eps", "values must be finite and non-negative");
        }
        if self.schemes.is_empty() {
            return bad("schemes", "must not be empty");
        }
        if self.baseline_sweeps == 0 {
            return bad("baseline_sweeps", "must be at least 1");
        }
        if self.ao_max_iters == 0 {
            return bad("ao_max_iters", "must be at least 1");
        }
        self.dims(self.snr_db[0], self.eps[0]).map(|_| ())
    }

    /// Dimensions for one grid point.
    pub fn dims(&self, snr_db: f64, eps: f64) -> Result<SystemDims> {
        SystemDims::uniform(self.k, self.m, self.n, self.l, 1.0, 10f64.powf(-snr_db / 10.0), eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{"k":3,"m":2,"n":2,"l":1,"snr_db":[10],"eps":[0.05],"drops":2,
        "schemes":["proposed","max_sinr"],"seed":7,"out":"x.csv"}"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_json_str(GOOD, "inline").unwrap();
        assert_eq!(cfg.schemes, vec![Scheme::Proposed, Scheme::MaxSinr]);
        assert_eq!(cfg.delta_mode, DeltaMode::Boundary);
        assert_eq!(cfg.schedule, Schedule::Nominal);
        let d = cfg.dims(10.0, 0.05).unwrap();
        assert!((d.noise - 0.1).abs() < 1e-15);
        assert_eq!(d.power, vec![1.0; 3]);
    }

    #[test]
    fn diagnostics_name_the_problem() {
        let err = ExperimentConfig::from_json_str(&GOOD.replace("\"drops\":2", "\"drops\":0"), "c.json").unwrap_err();
        assert!(err.to_string().contains("drops"), "{err}");
        let err = ExperimentConfig::from_json_str(&GOOD.replace("\"seed\"", "\"sead\""), "c.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sead") && msg.contains("line"), "{msg}");
        let err = ExperimentConfig::from_json_str("{\n\"k\": \"three\"}", "c.json").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn scheme_names() {
        for s in Scheme::ALL {
            assert_eq!(Scheme::parse(&s.to_string()).unwrap(), s);
        }
        assert!(Scheme::parse("zf").is_err());
    }
}
