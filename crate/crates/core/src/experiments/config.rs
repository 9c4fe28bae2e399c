use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::corpus::CorpusSpec;
use crate::coefficients::{random_elliptic_coefficients, CoefficientField};
use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid};
use crate::operator::{assemble_operator, DiscreteOperator};
use crate::semigroup::TimeGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Nodes per axis; one entry for 1D, two for 2D.
    pub sizes: Vec<usize>,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    /// Defaults to 1/sizes[0].
    #[serde(default)]
    pub spacing: Option<f64>,
}

fn default_boundary() -> Boundary {
    Boundary::Periodic
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { sizes: vec![64], boundary: Boundary::Periodic, spacing: None }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        let n = *self.sizes.first().ok_or_else(|| Error::Config("grid.sizes is empty".into()))?;
        Grid::new(&self.sizes, self.spacing.unwrap_or(1.0 / n as f64), self.boundary)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    #[default]
    Identity,
    Random {
        lambda: f64,
        #[serde(rename = "Lambda")]
        big_lambda: f64,
        seed: u64,
    },
    /// A serialized `CoefficientField`, relative paths taken from the
    /// config file's directory.
    File { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub count: usize,
    /// Defaults to h/16.
    #[serde(default)]
    pub t_min: Option<f64>,
    /// Defaults to four times the largest side.
    #[serde(default)]
    pub t_max: Option<f64>,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self { count: 64, t_min: None, t_max: None }
    }
}

impl TimeSpec {
    pub fn build(&self, grid: &Grid) -> Result<TimeGrid> {
        TimeGrid::new(
            self.t_min.unwrap_or(grid.spacing() / 16.0),
            self.t_max.unwrap_or(4.0 * grid.max_side()),
            self.count,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    #[serde(rename = "M")]
    pub m: u32,
    pub p: f64,
    pub eps: f64,
    pub gamma: f64,
    pub apertures: Vec<f64>,
    pub beta: f64,
    /// Exponents of the John–Nirenberg comparison.
    pub bmo_p: Vec<f64>,
    /// Nodes of the Riesz quadrature.
    pub quad_nodes: usize,
    pub molecules: usize,
    pub duality_pairs: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            m: 1,
            p: 2.0,
            eps: 1.0,
            gamma: 0.5,
            apertures: vec![1.0, 2.0],
            beta: 1.0,
            bmo_p: vec![1.5, 2.0, 3.0],
            quad_nodes: 128,
            molecules: 20,
            duality_pairs: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub reconstruction: f64,
    pub decomposition_ratio: f64,
    pub equivalence_spread: f64,
    pub bmo_spread: f64,
    pub riesz_spread: f64,
    pub commutator_slack: f64,
    pub duality: f64,
    pub scaled_functional: [f64; 2],
    pub scaled_decomposition: [f64; 2],
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            reconstruction: 1e-3,
            decomposition_ratio: 25.0,
            equivalence_spread: 25.0,
            bmo_spread: 25.0,
            riesz_spread: 10.0,
            commutator_slack: 0.2,
            duality: 1e-6,
            scaled_functional: [2.9, 3.1],
            scaled_decomposition: [1.5, 6.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub coefficients: CoefficientSpec,
    #[serde(default)]
    pub times: TimeSpec,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub corpus: CorpusSpec,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Oracle suites to run; empty means all.
    #[serde(default)]
    pub filter: Vec<String>,
    /// Where relative paths resolve; the config file's directory.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config deserializes")
    }
}

/// Command-line overrides applied after parsing.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    /// `64` or `16x16`.
    pub grid: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Comma-separated suite names.
    pub filter: Option<String>,
}

impl ExperimentConfig {
    /// Parses and validates; errors carry `name:line:col`.
    pub fn from_json_str(text: &str, name: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("{name}:{}:{}: {e}", e.line(), e.column())))?;
        cfg.validate().map_err(|(key, msg)| {
            let line = locate(text, key).map_or(String::new(), |l| format!("{l}:"));
            Error::Config(format!("{name}:{line} {msg}"))
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(g) = &o.grid {
            let sizes = g
                .split('x')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Config(format!("--grid expects N or NxM, got {g:?}")))?;
            self.grid.sizes = sizes;
            self.grid.spacing = None;
        }
        if let Some(s) = o.seed {
            self.corpus.seed = s;
        }
        if let Some(out) = &o.out {
            // relative to the working directory, not the config file
            self.output = std::env::current_dir()?.join(out);
        }
        if let Some(f) = &o.filter {
            self.filter = f.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            if self.filter.is_empty() {
                return Err(Error::Config("empty suite selection".into()));
            }
        }
        self.validate().map_err(|(_, msg)| Error::Config(msg))
    }

    /// Semantic checks; on failure returns the offending key and a message.
    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        let fail = |key: &'static str, msg: String| Err((key, msg));
        let s = &self.grid.sizes;
        if s.is_empty() || s.len() > 2 || s.iter().any(|&n| n < 8) {
            return fail("grid.sizes", format!("grid.sizes must hold one or two sizes >= 8, got {s:?}"));
        }
        if self.grid.spacing.is_some_and(|h| !(h > 0.0 && h.is_finite())) {
            return fail("grid.spacing", "grid.spacing must be positive".into());
        }
        if let CoefficientSpec::Random { lambda, big_lambda, .. } = self.coefficients {
            if !(lambda > 0.0 && lambda <= big_lambda && big_lambda.is_finite()) {
                return fail(
                    "coefficients.lambda",
                    format!("need 0 < lambda <= Lambda < inf, got ({lambda}, {big_lambda})"),
                );
            }
        }
        if self.times.count < 16 {
            return fail("times.count", format!("times.count must be >= 16, got {}", self.times.count));
        }
        if self.corpus.count == 0 {
            return fail("corpus.count", "empty corpus".into());
        }
        let p = &self.params;
        if p.m == 0 {
            return fail("params.M", "params.M must be >= 1".into());
        }
        if !(p.p >= 1.0) || !(p.eps > 0.0) {
            return fail("params.p", "params.p must be >= 1 and params.eps > 0".into());
        }
        if !(p.gamma > 0.0 && p.gamma < 1.0) {
            return fail("params.gamma", format!("params.gamma must lie in (0, 1), got {}", p.gamma));
        }
        if p.apertures.iter().any(|&a| !(a >= 1.0)) || !(p.beta >= 1.0) {
            return fail("params.apertures", "apertures and beta must be >= 1".into());
        }
        if p.bmo_p.iter().any(|&q| !(q > 1.0 && q.is_finite())) {
            return fail("params.bmo_p", "params.bmo_p entries must lie in (1, inf)".into());
        }
        if p.quad_nodes < 32 {
            return fail("params.quad_nodes", "params.quad_nodes must be >= 32".into());
        }
        if p.molecules == 0 || p.duality_pairs == 0 {
            return fail("params.molecules", "params.molecules and params.duality_pairs must be >= 1".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        self.grid.build()
    }

    pub fn coefficients(&self, grid: &Grid) -> Result<CoefficientField> {
        match &self.coefficients {
            CoefficientSpec::Identity => Ok(CoefficientField::identity(grid)),
            CoefficientSpec::Random { lambda, big_lambda, seed } => {
                random_elliptic_coefficients(grid, *lambda, *big_lambda, *seed)
            }
            CoefficientSpec::File { path } => {
                let path = self.base_dir.join(path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                let c: CoefficientField = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?;
                if &c.grid != grid {
                    return Err(Error::Config(format!(
                        "{}: coefficient grid differs from the configured grid",
                        path.display()
                    )));
                }
                // re-check the declared bounds
                CoefficientField::new(c.grid, c.matrices, c.lambda, c.big_lambda)
            }
        }
    }

    pub fn operator(&self) -> Result<DiscreteOperator> {
        let grid = self.grid()?;
        assemble_operator(&grid, &self.coefficients(&grid)?)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output)
    }
}

/// Line (1-based) of a dotted key path such as `corpus.count`: each
/// segment is searched from the line of the previous one.
fn locate(text: &str, path: &str) -> Option<usize> {
    let lines: Vec<&str> = text.lines().collect();
    let mut from = 0;
    for seg in path.split('.') {
        let needle = format!("\"{seg}\"");
        from += lines[from..].iter().position(|l| l.contains(&needle))?;
    }
    Some(from + 1)
}
