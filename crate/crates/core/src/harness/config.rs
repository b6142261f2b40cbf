//! Run configuration as flat `key = value` text.
//!
//! Quantities measured in model time or model length carry a `_model` suffix
//! (`dt_model`, `t_final_model`, `margin_model`, `eps_ladder_model`); counts and names
//! do not.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use super::HarnessError;
use crate::kv;
use crate::regularization::EPS_LADDER;
use crate::spde::SimConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    AtlasCheck,
    CommutatorRate,
    Simulate,
    RenormCheck,
    Apriori,
    Uniqueness,
}

impl Check {
    pub const ALL: [Check; 6] =
        [Self::AtlasCheck, Self::CommutatorRate, Self::Simulate, Self::RenormCheck, Self::Apriori, Self::Uniqueness];

    pub fn name(self) -> &'static str {
        match self {
            Self::AtlasCheck => "atlas-check",
            Self::CommutatorRate => "commutator-rate",
            Self::Simulate => "simulate",
            Self::RenormCheck => "renorm-check",
            Self::Apriori => "apriori",
            Self::Uniqueness => "uniqueness",
        }
    }

    fn stochastic(self) -> bool {
        !matches!(self, Self::AtlasCheck | Self::CommutatorRate)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| HarnessError::ConfigInvalid(format!("unknown check '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub check: Check,
    pub manifold: String,
    pub resolution: Option<usize>,
    pub margin: f64,
    pub eps_ladder: Vec<f64>,
    pub kind: String,
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: Option<u64>,
    pub preset: String,
    pub f_spec: String,
    pub psi: String,
    pub refine_levels: usize,
    pub refine_space: usize,
    pub refine_time: usize,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults for everything but the check itself; `seed` stays unset.
    pub fn new(check: Check) -> Self {
        Self {
            check,
            manifold: "flat-torus-1d".into(),
            resolution: None,
            margin: 0.2,
            eps_ladder: EPS_LADDER.to_vec(),
            kind: "r".into(),
            dt: 1e-4,
            horizon: 0.1,
            paths: 16,
            seed: None,
            preset: "generic".into(),
            f_spec: "linear".into(),
            psi: "one".into(),
            refine_levels: 2,
            refine_space: 2,
            refine_time: 16,
            out: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let map = kv::parse(text).map_err(HarnessError::ConfigInvalid)?;
        let check: Check = map
            .get("check")
            .ok_or_else(|| HarnessError::ConfigInvalid("missing key 'check'".into()))?
            .parse()?;
        let mut cfg = Self::new(check);
        for (k, v) in &map {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, HarnessError> {
            v.trim().parse().map_err(|_| HarnessError::ConfigInvalid(format!("{key}: cannot parse {v:?}")))
        }
        match key {
            "check" => self.check = value.parse()?,
            "manifold" => self.manifold = value.into(),
            "resolution" => self.resolution = Some(num(key, value)?),
            "margin_model" => self.margin = num(key, value)?,
            "eps_ladder_model" => self.eps_ladder = kv::list(value).map_err(HarnessError::ConfigInvalid)?,
            "kind" => self.kind = value.into(),
            "dt_model" => self.dt = num(key, value)?,
            "t_final_model" => self.horizon = num(key, value)?,
            "paths" => self.paths = num(key, value)?,
            "seed" => self.seed = Some(num(key, value)?),
            "coeff_preset" => self.preset = value.into(),
            "F" => self.f_spec = value.into(),
            "psi" => self.psi = value.into(),
            "refine_levels" => self.refine_levels = num(key, value)?,
            "refine_space" => self.refine_space = num(key, value)?,
            "refine_time" => self.refine_time = num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            other => {
                let hint = if other.ends_with("_seconds") { " (times are model time: use the _model suffix)" } else { "" };
                return Err(HarnessError::ConfigInvalid(format!("unknown key '{other}'{hint}")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::ConfigInvalid(m));
        let positive = |name: &str, v: f64| -> Result<(), HarnessError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(HarnessError::ConfigInvalid(format!("{name} must be positive, got {v}")))
            }
        };
        if self.resolution == Some(0) {
            return bad("resolution must be positive".into());
        }
        match self.check {
            Check::AtlasCheck => positive("margin_model", self.margin)?,
            Check::CommutatorRate => {
                for &e in &self.eps_ladder {
                    positive("eps_ladder_model entry", e)?;
                }
            }
            _ => {}
        }
        if self.check.stochastic() {
            positive("dt_model", self.dt)?;
            positive("t_final_model", self.horizon)?;
            if self.paths == 0 {
                return bad("paths must be positive".into());
            }
            if self.seed.is_none() {
                return bad("seed is required".into());
            }
            if self.check == Check::RenormCheck && (self.refine_space == 0 || self.refine_time == 0) {
                return bad("refinement factors must be positive".into());
            }
        }
        Ok(())
    }

    /// The echo of every setting, as it would be written back to a config file.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("check", self.check.name().into());
        put("manifold", self.manifold.clone());
        if let Some(r) = self.resolution {
            put("resolution", r.to_string());
        }
        match self.check {
            Check::AtlasCheck => put("margin_model", self.margin.to_string()),
            Check::CommutatorRate => {
                put("kind", self.kind.clone());
                put(
                    "eps_ladder_model",
                    self.eps_ladder.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", "),
                );
            }
            _ => {
                put("dt_model", self.dt.to_string());
                put("t_final_model", self.horizon.to_string());
                put("paths", self.paths.to_string());
                if let Some(s) = self.seed {
                    put("seed", s.to_string());
                }
                put("coeff_preset", self.preset.clone());
            }
        }
        if self.check == Check::RenormCheck {
            put("F", self.f_spec.clone());
            put("psi", self.psi.clone());
            put("refine_levels", self.refine_levels.to_string());
            put("refine_space", self.refine_space.to_string());
            put("refine_time", self.refine_time.to_string());
        }
        m
    }

    pub fn to_text(&self) -> String {
        kv::render(&self.entries())
    }

    pub fn sim(&self) -> Result<SimConfig, HarnessError> {
        let domain = crate::spde::Domain::from_name(&self.manifold)?;
        Ok(SimConfig {
            manifold: self.manifold.clone(),
            resolution: self.resolution.unwrap_or(domain.default_resolution()),
            preset: self.preset.clone(),
            dt: self.dt,
            horizon: self.horizon,
            paths: self.paths,
            seed: self.seed.ok_or_else(|| HarnessError::ConfigInvalid("seed is required".into()))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = "check = renorm-check\nmanifold = sphere\nresolution = 32\ndt_model = 0.001\n\
                    t_final_model = 0.05\npaths = 8\nseed = 3\ncoeff_preset = generic\nF = quadratic-trunc:4\npsi = fourier:1\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.f_spec, "quadratic-trunc:4");
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        let base = "check = simulate\nseed = 1\n";
        assert!(RunConfig::parse(&format!("{base}dt_model = 0\n")).is_err());
        assert!(RunConfig::parse(&format!("{base}dt_model = -1e-3\n")).is_err());
        assert!(RunConfig::parse(&format!("{base}dt_seconds = 1e-3\n")).unwrap_err().to_string().contains("_model"));
        assert!(RunConfig::parse("check = simulate\n").unwrap_err().to_string().contains("seed"));
        assert!(RunConfig::parse("check = teleport\n").is_err());
        assert!(RunConfig::parse("check = atlas-check\nmargin_model = 0\n").is_err());
    }
}
