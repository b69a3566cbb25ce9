//! Experiment configuration files.
//!
//! A config is a TOML document. Keys left out take the per-command
//! defaults; command-line flags override keys after parsing.
//!
//! ```toml
//! name = "cellular"
//! output_dir = "out"
//! checks = ["asymptotic", "monge_ampere"]
//! tol = 1e-8
//!
//! [chart]
//! kind = "flat_torus"
//! nu = 64
//! nv = 64
//!
//! [field]
//! stream = "cos(v) - cos(u)"
//! ```
//!
//! The chart may live in its own file: `[chart]` with `file = "torus.toml"`,
//! resolved relative to the config. Fields are either a stream function
//! (`stream`, the field is its symplectic gradient) or contravariant
//! components (`x1`, `x2`), as expressions in `u` and `v`.

use std::fs;
use std::path::{Path, PathBuf};

use mongeflow::calculus::symplectic_gradient;
use mongeflow::expr::Expr;
use mongeflow::surface::ChartSpec;
use mongeflow::{Chart, ScalarField, VectorField};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChartSource {
    File { file: PathBuf },
    Inline(ChartSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Stream { stream: String },
    Components { x1: String, x2: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Asymptotic,
    MongeAmpere,
    Equivalence,
    Boundary,
    KgIdentity,
    Maxpoint,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Pass/fail tolerance (verify) or Newton residual target (transport).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Iteration cap for the search descent or the transport Newton solve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Density perturbation: the target is `∝ 1 + ε cos u`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Use the product target `(1 + ε cos u)(1 + ε cos v)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product: Option<bool>,
    /// Interpolation times for the submersion check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<usize>,
    /// Finite-difference step for the vertical departure rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub chart: ChartSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
}

/// Values given on the command line, applied over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub epsilon: Option<f64>,
    pub times: Option<usize>,
    pub restarts: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config and resolves a chart file reference relative to it.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let ChartSource::File { file } = &cfg.chart {
            let full = path.parent().unwrap_or(Path::new(".")).join(file);
            let text = fs::read_to_string(&full)
                .map_err(|e| CliError::Config(format!("{}: {e}", full.display())))?;
            let spec: ChartSpec = toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
            cfg.chart = ChartSource::Inline(spec);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! over {
            ($($f:ident),*) => { $( if o.$f.is_some() { self.$f = o.$f.clone(); } )* };
        }
        over!(seed, tol, max_iters, epsilon, times, restarts);
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
    }

    pub fn build_chart(&self) -> Result<Chart, CliError> {
        match &self.chart {
            ChartSource::Inline(spec) => Ok(spec.build()?),
            ChartSource::File { file } => Err(CliError::Config(format!(
                "chart file {} was not resolved; load the config from disk",
                file.display()
            ))),
        }
    }

    pub fn require_field(&self) -> Result<&FieldSpec, CliError> {
        self.field
            .as_ref()
            .ok_or_else(|| CliError::Config("this experiment needs a [field] table".into()))
    }
}

fn sample(chart: &Chart, src: &str) -> Result<ScalarField, CliError> {
    let e = Expr::parse(src, &["u", "v"])?;
    let g = chart.grid;
    let mut out = ScalarField::constant(chart, 0.0);
    for ((i, j), s) in out.samples.indexed_iter_mut() {
        let (u, v) = g.point(i, j);
        *s = e.eval(&[u, v])?;
    }
    Ok(out)
}

impl FieldSpec {
    pub fn stream(&self, chart: &Chart) -> Result<Option<ScalarField>, CliError> {
        match self {
            FieldSpec::Stream { stream } => Ok(Some(sample(chart, stream)?)),
            FieldSpec::Components { .. } => Ok(None),
        }
    }

    pub fn vector(&self, chart: &Chart) -> Result<VectorField, CliError> {
        match self {
            FieldSpec::Stream { stream } => Ok(symplectic_gradient(&sample(chart, stream)?)),
            FieldSpec::Components { x1, x2 } => Ok(VectorField::new(
                chart,
                sample(chart, x1)?.samples,
                sample(chart, x2)?.samples,
            )?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "demo"
seed = 7
checks = ["asymptotic", "kg_identity"]
tol = 1e-8

[chart]
kind = "sphere_band"
theta_min = 0.5
theta_max = 2.5
nu = 32
nv = 32

[field]
x1 = "0"
x2 = "1"
"#;

    #[test]
    fn round_trips_through_toml() {
        let a = ExperimentConfig::parse(SAMPLE).unwrap();
        let b = ExperimentConfig::parse(&a.to_toml()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.output_dir, PathBuf::from("out"));
        assert!(matches!(a.field, Some(FieldSpec::Components { .. })));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_charts() {
        assert!(matches!(
            ExperimentConfig::parse(&format!("bogus = 1\n{SAMPLE}")),
            Err(CliError::Config(_))
        ));
        let bad = SAMPLE.replace("sphere_band", "klein_bottle");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let mut a = ExperimentConfig::parse(SAMPLE).unwrap();
        a.apply(&Overrides {
            seed: Some(9),
            tol: None,
            ..Default::default()
        });
        assert_eq!(a.seed, Some(9));
        assert_eq!(a.tol, Some(1e-8));
    }

    #[test]
    fn chart_files_resolve_relative_to_the_config() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("torus.toml"), "kind = \"flat_torus\"\nnu = 8\nnv = 8\n").unwrap();
        let cfg = "name = \"t\"\n[chart]\nfile = \"torus.toml\"\n";
        fs::write(dir.path().join("c.toml"), cfg).unwrap();
        let c = ExperimentConfig::load(&dir.path().join("c.toml")).unwrap();
        assert_eq!(c.build_chart().unwrap().shape(), (8, 8));
    }

    #[test]
    fn stream_functions_become_symplectic_gradients() {
        let c = ExperimentConfig::parse(SAMPLE).unwrap().build_chart().unwrap();
        let f = FieldSpec::Stream {
            stream: "cos(u)".into(),
        };
        assert!(f.stream(&c).unwrap().is_some());
        let x = f.vector(&c).unwrap();
        assert!(x.sup_norm() > 0.0);
        let bad = FieldSpec::Stream { stream: "cos(".into() };
        assert!(matches!(bad.vector(&c), Err(CliError::Config(_))));
    }
}
