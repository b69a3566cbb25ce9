//! Named residuals with tolerances, as emitted by the verification ops.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::surface::{Chart, ChartKind};

/// Default tolerance for spectral (flat torus) checks.
pub const FLAT_TOLERANCE: f64 = 1e-8;
/// Default tolerance on curved charts with finite-difference directions.
pub const CURVED_TOLERANCE: f64 = 1e-4;

/// Tolerance matched to the chart's discretization.
pub fn default_tolerance(chart: &Chart) -> f64 {
    match chart.kind {
        ChartKind::FlatTorus => FLAT_TOLERANCE,
        _ => CURVED_TOLERANCE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Sup,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub name: String,
    pub norm_kind: NormKind,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Human-readable formula for the residual.
    pub definition: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    /// Auxiliary numbers (locations, sample values, counts).
    pub info: BTreeMap<String, f64>,
}

impl ResidualReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        name: &str,
        norm_kind: NormKind,
        value: f64,
        tolerance: f64,
        definition: &str,
    ) -> &mut Self {
        self.entries.push(ResidualEntry {
            name: name.to_string(),
            norm_kind,
            value,
            tolerance,
            pass: value <= tolerance,
            definition: definition.to_string(),
        });
        self
    }

    pub fn note(&mut self, key: &str, value: f64) -> &mut Self {
        self.info.insert(key.to_string(), value);
        self
    }

    /// True when every entry passes (vacuously true when empty).
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn get(&self, name: &str) -> Option<&ResidualEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Value of the named entry.
    ///
    /// # Panics
    /// If no entry has that name.
    pub fn value(&self, name: &str) -> f64 {
        self.get(name)
            .unwrap_or_else(|| panic!("no residual named {name:?}"))
            .value
    }

    pub fn extend(&mut self, other: ResidualReport) {
        self.entries.extend(other.entries);
        self.info.extend(other.info);
    }

    /// Prefix every entry and info key, for merging reports.
    pub fn prefixed(mut self, prefix: &str) -> Self {
        for e in &mut self.entries {
            e.name = format!("{prefix}.{}", e.name);
        }
        self.info = self
            .info
            .into_iter()
            .map(|(k, v)| (format!("{prefix}.{k}"), v))
            .collect();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_iff_value_within_tolerance() {
        let mut r = ResidualReport::new();
        r.push("a", NormKind::Sup, 1e-9, 1e-8, "a")
            .push("b", NormKind::L2, 1e-8, 1e-8, "b");
        assert!(r.passed());
        r.push("c", NormKind::Sup, 2.0, 1e-8, "c");
        assert!(!r.passed());
        assert!(!r.get("c").unwrap().pass);
        assert_eq!(r.value("b"), 1e-8);
    }

    #[test]
    fn nan_never_passes() {
        let mut r = ResidualReport::new();
        r.push("x", NormKind::Sup, f64::NAN, 1.0, "x");
        assert!(!r.passed());
    }

    #[test]
    fn json_round_trip() {
        let mut r = ResidualReport::new();
        r.push("x", NormKind::L2, 0.5, 1.0, "x").note("k", 3.0);
        let s = serde_json::to_string(&r).unwrap();
        let back: ResidualReport = serde_json::from_str(&s).unwrap();
        assert_eq!(r, back);
    }
}
