//! Parameter findings: failsafe posture, safety flags and notable settings.
//!
//! Rules live in a JSON catalog (see `catalogs/px4-default.json`); a custom
//! catalog can be loaded at run time to cover other firmware.

mod qgc;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ulog::{ParamValue, ParameterSet, Provenance};

pub use qgc::{parse_qgc_params, render_qgc_params};

pub const DEFAULT_CATALOG_JSON: &str = include_str!("../../../../catalogs/px4-default.json");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid catalog: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum ParamFileError {
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Notable,
    Critical,
}

impl Severity {
    /// Sort key: most severe first.
    fn rank(self) -> u8 {
        match self {
            Severity::Critical => 0,
            Severity::Notable => 1,
            Severity::Info => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Predicate {
    Any,
    Eq { value: f64 },
    Ne { value: f64 },
    Lt { value: f64 },
    Le { value: f64 },
    Gt { value: f64 },
    Ge { value: f64 },
    In { values: Vec<f64> },
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * b.abs().max(1.0)
}

impl Predicate {
    pub fn matches(&self, v: ParamValue) -> bool {
        let x = v.as_f64();
        match self {
            Predicate::Any => true,
            Predicate::Eq { value } => same(x, *value),
            Predicate::Ne { value } => !same(x, *value),
            Predicate::Lt { value } => x < *value && !same(x, *value),
            Predicate::Le { value } => x <= *value || same(x, *value),
            Predicate::Gt { value } => x > *value && !same(x, *value),
            Predicate::Ge { value } => x >= *value || same(x, *value),
            Predicate::In { values } => values.iter().any(|v| same(x, *v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub code: String,
    pub parameter: String,
    pub when: Predicate,
    pub severity: Severity,
    /// Template; `{value}`, `{label}` and `{parameter}` are substituted.
    pub meaning: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, String>,
}

impl Rule {
    fn render(&self, v: ParamValue) -> String {
        let value = v.to_string();
        let label = match v {
            ParamValue::Int32(i) => self.labels.get(&i.to_string()),
            ParamValue::Float32(f) if f.fract() == 0.0 => self.labels.get(&(f as i64).to_string()),
            ParamValue::Float32(_) => None,
        }
        .cloned()
        .unwrap_or_else(|| value.clone());
        self.meaning
            .replace("{value}", &value)
            .replace("{label}", &label)
            .replace("{parameter}", &self.parameter)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingCatalog {
    pub catalog: String,
    pub version: u32,
    #[serde(default)]
    pub notes: Vec<String>,
    pub rules: Vec<Rule>,
}

impl FindingCatalog {
    pub fn from_json(s: &str) -> Result<Self, CatalogError> {
        let c: FindingCatalog = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    /// The catalog shipped with the toolkit.
    pub fn default_px4() -> Self {
        Self::from_json(DEFAULT_CATALOG_JSON).expect("embedded catalog is valid")
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let mut codes = BTreeSet::new();
        for r in &self.rules {
            if !codes.insert(r.code.as_str()) {
                return Err(CatalogError::Invalid(format!("duplicate code {}", r.code)));
            }
            if r.parameter.trim().is_empty() || r.parameter.contains(char::is_whitespace) {
                return Err(CatalogError::Invalid(format!("{}: bad parameter name", r.code)));
            }
            if r.meaning.trim().is_empty() {
                return Err(CatalogError::Invalid(format!("{}: empty meaning", r.code)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub code: String,
    pub severity: Severity,
    pub parameter: String,
    pub observed: ParamValue,
    pub provenance: Provenance,
    pub meaning: String,
}

/// One finding per matching rule, ordered most severe first, then by code.
pub fn analyze_parameters(params: &ParameterSet, catalog: &FindingCatalog) -> Vec<Finding> {
    let mut out: Vec<Finding> = catalog
        .rules
        .iter()
        .filter_map(|rule| {
            let entry = params.get(&rule.parameter)?;
            rule.when.matches(entry.value).then(|| Finding {
                code: rule.code.clone(),
                severity: rule.severity,
                parameter: rule.parameter.clone(),
                observed: entry.value,
                provenance: entry.provenance,
                meaning: rule.render(entry.value),
            })
        })
        .collect();
    out.sort_by(|a, b| {
        (a.severity.rank(), &a.code).cmp(&(b.severity.rank(), &b.code))
    });
    out
}

/// Mission cruise speed (`MPC_XY_CRUISE`) in m/s, latest value wins.
pub fn cruise_speed(params: &ParameterSet) -> Option<f64> {
    params.get("MPC_XY_CRUISE").map(|e| e.value.as_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ulog::ParamChange;

    fn set(entries: &[(&str, ParamValue)]) -> ParameterSet {
        ParameterSet::from_initial(entries.iter().map(|(k, v)| (k.to_string(), *v)))
    }

    #[test]
    fn default_catalog_loads() {
        let c = FindingCatalog::default_px4();
        assert!(c.rules.len() > 20);
    }

    #[test]
    fn spec_examples() {
        let c = FindingCatalog::default_px4();
        let f = analyze_parameters(&set(&[("COM_ARM_WO_GPS", ParamValue::Int32(1))]), &c);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].code, "ARM_WITHOUT_GPS");
        assert_eq!(f[0].severity, Severity::Notable);
        assert_eq!(f[0].meaning, "Allows arming without GPS fix");

        let f = analyze_parameters(&set(&[("COM_OBS_AVOID", ParamValue::Int32(0))]), &c);
        assert_eq!(f[0].code, "OBSTACLE_AVOIDANCE_OFF");
        assert_eq!(f[0].severity, Severity::Notable);
        assert_eq!(f[0].meaning, "Obstacle avoidance disabled");

        assert!(analyze_parameters(&ParameterSet::default(), &c).is_empty());
    }

    #[test]
    fn ordering_and_labels() {
        let c = FindingCatalog::default_px4();
        let f = analyze_parameters(
            &set(&[
                ("SDLOG_MODE", ParamValue::Int32(-1)),
                ("COM_FLTMODE1", ParamValue::Int32(8)),
                ("GF_ACTION", ParamValue::Int32(0)),
            ]),
            &c,
        );
        let codes: Vec<_> = f.iter().map(|x| x.code.as_str()).collect();
        assert_eq!(codes, ["LOGGING_DISABLED", "GEOFENCE_DISABLED", "FLIGHT_MODE_1"]);
        assert_eq!(f[2].meaning, "Flight mode slot 1: Stabilized");
    }

    #[test]
    fn float_values_render_plainly() {
        let c = FindingCatalog::default_px4();
        let f = analyze_parameters(&set(&[("MPC_LAND_SPEED", ParamValue::Float32(0.7))]), &c);
        assert_eq!(f[0].meaning, "Landing descent rate 0.7 m/s");
    }

    #[test]
    fn duplicate_codes_rejected() {
        let json = r#"{"catalog":"x","version":1,"rules":[
            {"code":"A","parameter":"P","when":{"op":"any"},"severity":"info","meaning":"m"},
            {"code":"A","parameter":"Q","when":{"op":"any"},"severity":"info","meaning":"m"}]}"#;
        assert!(FindingCatalog::from_json(json).is_err());
    }

    #[test]
    fn cruise_speed_cases() {
        let mut p = set(&[("MPC_XY_CRUISE", ParamValue::Float32(5.0))]);
        assert_eq!(cruise_speed(&p), Some(5.0));
        assert_eq!(cruise_speed(&ParameterSet::default()), None);
        p.changes.push(ParamChange {
            timestamp_us: 10,
            name: "MPC_XY_CRUISE".into(),
            value: ParamValue::Float32(2.0),
        });
        assert_eq!(cruise_speed(&p), Some(2.0));
    }

    #[test]
    fn predicates() {
        let v = ParamValue::Float32(0.7);
        assert!(Predicate::Eq { value: 0.7 }.matches(v));
        assert!(Predicate::Le { value: 0.7 }.matches(v));
        assert!(!Predicate::Lt { value: 0.7 }.matches(v));
        assert!(Predicate::In { values: vec![0.1, 0.7] }.matches(v));
        assert!(Predicate::Ne { value: 1.0 }.matches(v));
    }
}
