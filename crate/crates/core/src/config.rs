//! JSON run configuration with whole-file validation.

use serde::{Deserialize, Serialize};

use crate::continuation::{ContinuationOptions, Ladder};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::limit::{LimitOptions, NodalSignature};
use crate::mesh::{align_domain, Grid};
use crate::model::{Nonlinearity, ProblemSpec};
use crate::profiles::WellProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

/// A nodal quantity given as a constant or as one value per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampled {
    Constant(f64),
    Tabulated(Vec<f64>),
}

impl Sampled {
    fn field(&self, n: usize) -> Field {
        match self {
            Sampled::Constant(c) => Field::new(vec![*c; n]),
            Sampled::Tabulated(v) => Field::new(v.clone()),
        }
    }

    fn check(&self, name: &str, n: usize, errors: &mut Vec<String>) {
        match self {
            Sampled::Constant(c) if !c.is_finite() => errors.push(format!("{name}: constant must be finite")),
            Sampled::Tabulated(v) if v.len() != n => {
                errors.push(format!("{name}: tabulated length {} does not match grid.n = {n}", v.len()))
            }
            Sampled::Tabulated(v) if v.iter().any(|x| !x.is_finite()) => {
                errors.push(format!("{name}: tabulated values must be finite"))
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub a0: Sampled,
    pub a: WellProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondTerm {
    pub q: f64,
    pub w2: Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub p: f64,
    pub w: Sampled,
    #[serde(default)]
    pub second: Option<SecondTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub tol_limit: f64,
    pub tol_cont: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Ball samples for the `k_λ − k_∞∘P` table.
    pub samples: usize,
    /// Random fields for the norm inequalities.
    pub fields: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { samples: 50, fields: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub intervals: Vec<(f64, f64)>,
    pub potential: PotentialConfig,
    pub nonlinearity: NonlinearityConfig,
    pub ladder: LadderConfig,
    pub tolerances: Tolerances,
    /// Signatures such as `"1,0"` or `"1,0;+,-"`.
    pub signatures: Vec<String>,
    pub seed: u64,
    #[serde(default)]
    pub verify: VerifyConfig,
}

/// Everything a pipeline run needs, built from a validated config.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub ladder: Ladder,
    pub signatures: Vec<NodalSignature>,
    pub limit: LimitOptions,
    pub continuation: ContinuationOptions,
    pub verify: VerifyConfig,
    pub seed: u64,
}

impl RunConfig {
    /// The reference double-well problem.
    pub fn reference() -> Self {
        Self {
            grid: GridConfig { x_min: -5.0, x_max: 8.0, n: 2601 },
            intervals: vec![(0.0, 1.0), (2.0, 3.0)],
            potential: PotentialConfig {
                a0: Sampled::Constant(1.0),
                a: WellProfile::BoxComplement { height: 1.0, ramp_width: 0.005 },
            },
            nonlinearity: NonlinearityConfig { p: 3.0, w: Sampled::Constant(1.0), second: None },
            ladder: LadderConfig { lambda_min: 10.0, lambda_max: 1e6, ratio: 10f64.sqrt() },
            tolerances: Tolerances { tol_limit: 1e-11, tol_cont: 1e-9 },
            signatures: vec!["0,0".into(), "1,0".into(), "0,1".into(), "1,1".into()],
            seed: 1,
            verify: VerifyConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("parse error: {e}")]))
    }

    /// Validate every field and build the problem; all violations are
    /// reported together.
    pub fn build(&self) -> Result<Problem> {
        let mut errors = Vec::new();
        let g = &self.grid;
        let grid = match Grid::new(g.x_min, g.x_max, g.n) {
            Ok(grid) => Some(grid),
            Err(e) => {
                errors.push(format!("grid: {e}"));
                None
            }
        };
        let n = g.n;
        self.potential.a0.check("potential.a0", n, &mut errors);
        self.nonlinearity.w.check("nonlinearity.w", n, &mut errors);
        if !(self.nonlinearity.p > 2.0) {
            errors.push(format!("nonlinearity.p: must exceed 2, got {}", self.nonlinearity.p));
        }
        if let Some(second) = &self.nonlinearity.second {
            if !(second.q > 2.0) {
                errors.push(format!("nonlinearity.second.q: must exceed 2, got {}", second.q));
            }
            second.w2.check("nonlinearity.second.w2", n, &mut errors);
        }
        let ladder = match Ladder::geometric(self.ladder.lambda_min, self.ladder.lambda_max, self.ladder.ratio) {
            Ok(l) => Some(l),
            Err(e) => {
                errors.push(format!("ladder: {e}"));
                None
            }
        };
        let t = &self.tolerances;
        if !(t.tol_limit > 0.0) {
            errors.push(format!("tolerances.tol_limit: must be positive, got {}", t.tol_limit));
        }
        if !(t.tol_cont > 0.0) {
            errors.push(format!("tolerances.tol_cont: must be positive, got {}", t.tol_cont));
        }
        if self.signatures.is_empty() {
            errors.push("signatures: at least one signature is required".into());
        }
        let mut signatures = Vec::new();
        for (k, s) in self.signatures.iter().enumerate() {
            match NodalSignature::parse(s) {
                Ok(sig) if sig.len() != self.intervals.len() => errors.push(format!(
                    "signatures[{k}]: {s:?} has {} entries but there are {} intervals",
                    sig.len(),
                    self.intervals.len()
                )),
                Ok(sig) => signatures.push(sig),
                Err(e) => errors.push(format!("signatures[{k}]: {e}")),
            }
        }
        let domain = grid.as_ref().and_then(|grid| match align_domain(grid, &self.intervals) {
            Ok(d) => Some(d),
            Err(e) => {
                errors.push(format!("intervals: {e}"));
                None
            }
        });
        let mut spec = None;
        if let (Some(grid), Some(domain), true) = (grid, domain, errors.is_empty()) {
            let build = || -> Result<ProblemSpec> {
                let a = self.potential.a.sample(&grid, &domain)?;
                let mut nl = Nonlinearity::single(self.nonlinearity.p, self.nonlinearity.w.field(n));
                if let Some(second) = &self.nonlinearity.second {
                    nl = nl.with_second(second.q, second.w2.field(n));
                }
                ProblemSpec::new(grid.clone(), domain.clone(), self.potential.a0.field(n), a, nl)
            };
            match build() {
                Ok(s) => spec = Some(s),
                Err(e) => errors.push(format!("potential: {e}")),
            }
        }
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        Ok(Problem {
            spec: spec.expect("spec built when no errors"),
            ladder: ladder.expect("ladder built when no errors"),
            signatures,
            limit: LimitOptions { tol: t.tol_limit, ..LimitOptions::default() },
            continuation: ContinuationOptions { tol_cont: t.tol_cont, ..ContinuationOptions::default() },
            verify: self.verify.clone(),
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_round_trips() {
        let cfg = RunConfig::reference();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
        let p = cfg.build().unwrap();
        assert_eq!(p.signatures.len(), 4);
        assert_eq!(p.ladder.values().len(), 11);
        assert_eq!(p.spec.b(), 0.0);
    }

    #[test]
    fn every_violation_is_listed() {
        let mut cfg = RunConfig::reference();
        cfg.nonlinearity.p = 1.5;
        cfg.ladder.ratio = 0.5;
        cfg.tolerances.tol_cont = -1.0;
        cfg.signatures = vec!["1".into(), "x".into()];
        cfg.potential.a0 = Sampled::Tabulated(vec![1.0; 3]);
        let Err(Error::Config(errs)) = cfg.build() else { panic!("expected config error") };
        assert_eq!(errs.len(), 6, "{errs:#?}");
        for key in ["nonlinearity.p", "ladder", "tol_cont", "signatures[0]", "signatures[1]", "potential.a0"] {
            assert!(errs.iter().any(|e| e.contains(key)), "{key} missing from {errs:#?}");
        }
    }

    #[test]
    fn misaligned_interval_is_a_config_error() {
        let mut cfg = RunConfig::reference();
        cfg.intervals = vec![(0.0012, 1.0), (2.0, 3.0)];
        let Err(Error::Config(errs)) = cfg.build() else { panic!("expected config error") };
        assert!(errs[0].starts_with("intervals"));
    }

    #[test]
    fn unknown_keys_and_bad_numbers_are_rejected() {
        assert!(RunConfig::parse("{\"grid\": 3}").is_err());
        let mut v = serde_json::to_value(RunConfig::reference()).unwrap();
        v["surprise"] = serde_json::json!(1);
        assert!(RunConfig::parse(&v.to_string()).is_err());
        let mut v = serde_json::to_value(RunConfig::reference()).unwrap();
        v["ladder"]["lambda_max"] = serde_json::json!(1.0e6);
        assert!(RunConfig::parse(&v.to_string()).is_ok());
    }
}
