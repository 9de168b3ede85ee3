//! JSON run configurations. Unknown fields are rejected and every error
//! carries the JSON path of the offending field.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use ysl_core::channel::{self, ChannelConfig, Scheme, NO_SLIP_FRICTION};
use ysl_core::{FluidParams, MatD, MicroRotation};

use crate::error::{Error, Result};
use crate::galerkin::GalerkinConfig;

/// Parses `text` as `T`, reporting failures as `<path>: <json path>: <msg>`.
pub fn parse<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        let inner = e.into_inner();
        let message = if at == "." {
            inner.to_string()
        } else {
            format!("{at}: {inner}")
        };
        Error::config(origin, message)
    })
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidSpec {
    pub mu1: f64,
    #[serde(default)]
    pub mu2: f64,
    #[serde(default)]
    pub nu: f64,
    #[serde(default)]
    pub tau_star: f64,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "two")]
    pub q: f64,
    #[serde(default)]
    pub a1: f64,
    #[serde(default)]
    pub a2: f64,
}

fn two() -> f64 {
    2.0
}

impl FluidSpec {
    pub fn build(&self) -> Result<FluidParams> {
        Ok(FluidParams::new(self.mu1, self.mu2, self.nu, self.tau_star, self.p, self.q)?
            .with_offsets(self.a1, self.a2)?)
    }
}

/// Micro-rotation input. Scalars `w` stand for the 2D generator `[[0, w], [−w, 0]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaSpec {
    #[default]
    Zero,
    Constant(f64),
    /// Row-major rows of a `d×d` antisymmetric matrix.
    Matrix(Vec<Vec<f64>>),
    /// `w(x, y) = A sin x sin y` on the torus.
    SinSin(f64),
    /// `w` uniform in `[−A, A]` independently per node.
    Random { amplitude: f64, seed: u64 },
    /// CSV with one row-major `d×d` matrix per node.
    Samples(PathBuf),
}

impl OmegaSpec {
    /// Resolves to a single matrix for pointwise queries.
    pub fn constant(&self, dim: usize) -> Result<MatD> {
        match self {
            Self::Zero => Ok(MatD::zeros(dim)?),
            Self::Constant(w) if dim == 2 => Ok(MatD::skew2(*w)),
            Self::Constant(_) => Err(Error::Invalid("a scalar micro-rotation is only defined in 2D".into())),
            Self::Matrix(rows) => {
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::Invalid(format!("micro-rotation matrix must be {dim}x{dim}")));
                }
                let m = MatD::from_row_major(dim, &flat)?;
                ysl_core::params::check_antisymmetric(&m)?;
                Ok(m)
            }
            _ => Err(Error::Invalid("this command needs a constant micro-rotation".into())),
        }
    }

    /// Resolves on 2D nodes `(x, y)`; `base` anchors relative sample paths.
    pub fn resolve(&self, nodes: &[(f64, f64)], base: &Path) -> Result<MicroRotation> {
        Ok(match self {
            Self::Zero | Self::Constant(_) | Self::Matrix(_) => MicroRotation::constant(self.constant(2)?)?,
            Self::SinSin(a) => MicroRotation::sampled(
                nodes.iter().map(|&(x, y)| MatD::skew2(a * x.sin() * y.sin())).collect(),
            )?,
            Self::Random { amplitude, seed } => {
                let a = amplitude.abs();
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                MicroRotation::sampled(
                    nodes.iter().map(|_| MatD::skew2(rng.random_range(-a..=a))).collect(),
                )?
            }
            Self::Samples(file) => {
                let path = base.join(file);
                let values = read_matrices(&path, 2)?;
                if values.len() != nodes.len() {
                    return Err(Error::config(
                        &path,
                        format!("{} samples given, {} nodes expected", values.len(), nodes.len()),
                    ));
                }
                MicroRotation::sampled(values)?
            }
        })
    }
}

/// Reads a headered CSV whose rows hold `dim²` row-major entries.
pub fn read_matrices(path: &Path, dim: usize) -> Result<Vec<MatD>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::config(path, format!("row {}: {e}", i + 1)))?;
        let m = MatD::from_row_major(dim, &vals).map_err(|e| Error::config(path, format!("row {}: {e}", i + 1)))?;
        out.push(m);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub fluid: FluidSpec,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub omega: OmegaSpec,
    /// Regularization indices tabulated next to the exact stress.
    #[serde(default = "default_eval_n")]
    pub reg_n: Vec<u64>,
    pub tol_plug: Option<f64>,
}

fn default_dim() -> usize {
    2
}

fn default_eval_n() -> Vec<u64> {
    vec![1000]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckPlugConfig {
    pub fluid: FluidSpec,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub omega: OmegaSpec,
    /// Plug matrix with zero symmetric part, used when `nu = 0`; defaults to `omega`.
    #[serde(default)]
    pub plug_point: Option<Vec<f64>>,
    /// Candidate stresses, each a row-major list of `dim²` entries.
    pub queries: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSpec {
    Explicit,
    #[default]
    Implicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FrictionSpec {
    #[default]
    NoSlip,
    Navier(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub fluid: FluidSpec,
    pub half_width: f64,
    pub cells: usize,
    pub dt: f64,
    pub t_end: f64,
    pub body_force: f64,
    #[serde(default)]
    pub friction: FrictionSpec,
    /// Defaults to the grid-coupled index.
    pub reg_n: Option<u64>,
    #[serde(default)]
    pub omega: OmegaSpec,
    #[serde(default = "default_steady_tol")]
    pub steady_tol: f64,
    #[serde(default)]
    pub scheme: SchemeSpec,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

fn default_steady_tol() -> f64 {
    1e-9
}

fn default_cfl() -> f64 {
    0.45
}

impl ChannelSpec {
    pub fn build(&self, base: &Path) -> Result<ChannelConfig> {
        let params = self.fluid.build()?;
        if self.cells == 0 || !(self.half_width > 0.0) {
            return Err(Error::Invalid("cells and half_width must be positive".into()));
        }
        let dy = 2.0 * self.half_width / self.cells as f64;
        let nodes: Vec<(f64, f64)> = (0..self.cells)
            .map(|i| (0.0, -self.half_width + (i as f64 + 0.5) * dy))
            .collect();
        if matches!(self.omega, OmegaSpec::SinSin(_)) {
            return Err(Error::Invalid("sin_sin micro-rotation is only available on the torus".into()));
        }
        Ok(ChannelConfig {
            half_width: self.half_width,
            cells: self.cells,
            dt: self.dt,
            t_end: self.t_end,
            body_force: self.body_force,
            friction: match self.friction {
                FrictionSpec::NoSlip => NO_SLIP_FRICTION,
                FrictionSpec::Navier(a) => a,
            },
            params,
            reg_n: self
                .reg_n
                .unwrap_or_else(|| channel::coupled_reg_n(self.half_width, self.cells, self.body_force, &params)),
            omega: self.omega.resolve(&nodes, base)?,
            steady_tol: self.steady_tol,
            scheme: match self.scheme {
                SchemeSpec::Explicit => Scheme::Explicit,
                SchemeSpec::Implicit => Scheme::Implicit,
            },
            cfl: self.cfl,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    TaylorGreen(f64),
    /// Random solenoidal field from modes `|k|∞ ≤ 3` with `|k|⁻²` decay.
    Random { amplitude: f64, seed: u64 },
}

impl Default for InitSpec {
    fn default() -> Self {
        Self::TaylorGreen(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GalerkinSpec {
    pub fluid: FluidSpec,
    pub modes: usize,
    /// Defaults to the smallest even dealiasing grid.
    pub grid: Option<usize>,
    pub reg_n: u64,
    #[serde(default)]
    pub omega: OmegaSpec,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_record")]
    pub record_every: usize,
    #[serde(default)]
    pub init: InitSpec,
}

fn default_record() -> usize {
    10
}

impl GalerkinSpec {
    pub fn build(&self, base: &Path) -> Result<GalerkinConfig> {
        let grid = self.grid.unwrap_or_else(|| GalerkinConfig::dealiased_grid(self.modes));
        if grid == 0 {
            return Err(Error::Invalid("grid must be positive".into()));
        }
        let h = 2.0 * std::f64::consts::PI / grid as f64;
        let nodes: Vec<(f64, f64)> = (0..grid * grid)
            .map(|idx| ((idx % grid) as f64 * h, (idx / grid) as f64 * h))
            .collect();
        Ok(GalerkinConfig {
            modes: self.modes,
            grid,
            params: self.fluid.build()?,
            reg_n: self.reg_n,
            omega: self.omega.resolve(&nodes, base)?,
            dt: self.dt,
            t_end: self.t_end,
            record_every: self.record_every,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Channel,
    Galerkin,
}

/// One swept parameter: a dotted path into `base` and its values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub path: String,
    pub values: Vec<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub kind: RunKind,
    /// A complete channel or Galerkin configuration.
    pub base: serde_json::Value,
    pub axes: Vec<Axis>,
    pub out: PathBuf,
}

impl SweepSpec {
    /// Cartesian product of the axes applied to `base`, first axis slowest.
    pub fn expand(&self) -> Result<Vec<serde_json::Value>> {
        let mut runs = vec![self.base.clone()];
        for axis in &self.axes {
            if axis.values.is_empty() {
                return Err(Error::Invalid(format!("axis {} has no values", axis.path)));
            }
            let mut next = Vec::with_capacity(runs.len() * axis.values.len());
            for run in &runs {
                for v in &axis.values {
                    let mut r = run.clone();
                    set_path(&mut r, &axis.path, v.clone())?;
                    next.push(r);
                }
            }
            runs = next;
        }
        Ok(runs)
    }
}

fn set_path(root: &mut serde_json::Value, path: &str, value: serde_json::Value) -> Result<()> {
    let mut cur = root;
    let mut keys = path.split('.').peekable();
    while let Some(k) = keys.next() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Invalid(format!("sweep path {path}: {k} is not inside an object")))?;
        if keys.peek().is_none() {
            obj.insert(k.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(k.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Err(Error::Invalid("empty sweep path".into()))
}
