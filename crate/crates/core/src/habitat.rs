//! L-periodic coefficient fields and problem-instance ingestion.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, PeriodicField};
use crate::kernel::{Kernel, TableKernel};

/// Periodic habitat coefficients for the two competing species.
/// `b_i(x) = (r_i(x) - 1) / C_i(x)` is derived on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Habitat {
    pub r1: PeriodicField,
    pub r2: PeriodicField,
    pub c1: PeriodicField,
    pub c2: PeriodicField,
    pub a1: PeriodicField,
    pub a2: PeriodicField,
}

impl Habitat {
    pub fn b1(&self) -> PeriodicField {
        self.r1.zip_with(&self.c1, |r, c| (r - 1.0) / c)
    }

    pub fn b2(&self) -> PeriodicField {
        self.r2.zip_with(&self.c2, |r, c| (r - 1.0) / c)
    }

    /// Check the model invariants grid-pointwise: `r_i > 1`, `C_i > 0`,
    /// `a_i > 0`. Reports the violating field, value, and location.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let check = |name: &str, f: &PeriodicField, bound: f64, what: &str| -> Result<()> {
            for (i, &v) in f.values.iter().enumerate() {
                if !(v > bound) {
                    return Err(Error::Validation(format!(
                        "{name} must {what}; value {v} at x = {}",
                        grid.node(i)
                    )));
                }
            }
            Ok(())
        };
        check("r1", &self.r1, 1.0, "exceed 1 everywhere")?;
        check("r2", &self.r2, 1.0, "exceed 1 everywhere")?;
        check("C1", &self.c1, 0.0, "be positive everywhere")?;
        check("C2", &self.c2, 0.0, "be positive everywhere")?;
        check("a1", &self.a1, 0.0, "be positive everywhere")?;
        check("a2", &self.a2, 0.0, "be positive everywhere")?;
        Ok(())
    }
}

/// Two-patch piecewise-constant periodic field: `v_patch1` on `[0, L1)`,
/// `v_patch2` on `[L1, L)`. A node exactly at the breakpoint belongs to the
/// right patch.
pub fn piecewise_two_patch(
    grid: &Grid,
    breakpoint: f64,
    v_patch1: f64,
    v_patch2: f64,
) -> Result<PeriodicField> {
    if !(breakpoint > 0.0 && breakpoint < grid.length) {
        return Err(Error::Range(format!(
            "patch breakpoint {breakpoint} must lie strictly inside (0, {})",
            grid.length
        )));
    }
    Ok(PeriodicField::from_fn(grid, |x| if x < breakpoint { v_patch1 } else { v_patch2 }))
}

// ---------------------------------------------------------------------------
// Config file schema
// ---------------------------------------------------------------------------

/// One coefficient field in the config: a constant, a two-patch table, or an
/// explicit per-node sample list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Constant(f64),
    TwoPatch { patch1: f64, patch2: f64, breakpoint: f64 },
    Samples { values: Vec<f64> },
}

impl FieldSpec {
    pub fn build(&self, grid: &Grid) -> Result<PeriodicField> {
        match self {
            FieldSpec::Constant(v) => Ok(PeriodicField::constant(grid, *v)),
            FieldSpec::TwoPatch { patch1, patch2, breakpoint } => {
                piecewise_two_patch(grid, *breakpoint, *patch1, *patch2)
            }
            FieldSpec::Samples { values } => {
                if values.len() != grid.n {
                    return Err(Error::Validation(format!(
                        "sampled field has {} values but the grid has {} nodes",
                        values.len(),
                        grid.n
                    )));
                }
                PeriodicField::new(grid.length, values.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: String,
    pub variance: Option<f64>,
    pub scale: Option<f64>,
    pub path: Option<String>,
}

impl KernelSpec {
    pub fn build(&self, base_dir: &Path) -> Result<Kernel> {
        match self.family.as_str() {
            "gaussian" => Kernel::gaussian(
                self.variance
                    .ok_or_else(|| Error::Validation("gaussian kernel needs `variance`".into()))?,
            ),
            "laplace" => Kernel::laplace(
                self.scale
                    .ok_or_else(|| Error::Validation("laplace kernel needs `scale`".into()))?,
            ),
            "table" => {
                let rel = self
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Validation("table kernel needs `path`".into()))?;
                load_table_kernel(&base_dir.join(rel))
            }
            other => Err(Error::Validation(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// `z,density` CSV with a symmetric, uniformly spaced support.
pub fn load_table_kernel(path: &Path) -> Result<Kernel> {
    let text = std::fs::read_to_string(path)?;
    let mut zs = Vec::new();
    let mut vals = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("z")) {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|t| t.trim().parse::<f64>().ok()).ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                message: format!("line {}: expected `z,density`", lineno + 1),
            })
        };
        zs.push(parse(parts.next())?);
        vals.push(parse(parts.next())?);
    }
    if zs.len() < 3 {
        return Err(Error::Parse {
            path: path.display().to_string(),
            message: "kernel table needs at least 3 rows".into(),
        });
    }
    let half = -zs[0];
    if (zs[zs.len() - 1] - half).abs() > 1e-9 * half.max(1.0) {
        return Err(Error::Validation("kernel table support must be symmetric about 0".into()));
    }
    Ok(Kernel::Table(TableKernel::new(half, vals)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "L")]
    pub length: f64,
    pub n: usize,
    pub sim_periods: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HabitatSpec {
    pub r1: FieldSpec,
    pub r2: FieldSpec,
    #[serde(rename = "C1")]
    pub c1: FieldSpec,
    #[serde(rename = "C2")]
    pub c2: FieldSpec,
    pub a1: FieldSpec,
    pub a2: FieldSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelsSpec {
    pub k1: KernelSpec,
    pub k2: KernelSpec,
}

/// How the simulation is seeded and pinned at the domain ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    /// Left guard pinned to `(p*, 0)`, right guard to `(0, q*)`.
    Invasion,
    /// Both guard bands pinned to zero.
    Compact,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub steps: usize,
    pub threshold: f64,
    /// `"step"`, `"periodic"`, or a path to an `x,p,q` CSV.
    pub initial: String,
    #[serde(default = "default_boundary")]
    pub boundary: BoundaryKind,
    #[serde(default = "default_snapshot")]
    pub snapshot_every: usize,
}

fn default_boundary() -> BoundaryKind {
    BoundaryKind::Invasion
}

fn default_snapshot() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub grid: GridSpec,
    pub habitat: HabitatSpec,
    pub kernel: KernelsSpec,
    pub run: RunSpec,
}

/// A fully validated problem instance.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid,
    pub habitat: Habitat,
    pub k1: Kernel,
    pub k2: Kernel,
    pub run: RunSpec,
    /// Raw config, kept for the run manifest.
    pub config: Config,
}

/// Parse and validate a config file; every habitat invariant is enforced at
/// load time.
pub fn load_config(path: &Path) -> Result<Problem> {
    let text = std::fs::read_to_string(path)?;
    let config: Config = toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    build_problem(config, &base_dir)
}

pub fn build_problem(config: Config, base_dir: &Path) -> Result<Problem> {
    let grid = Grid::new(config.grid.length, config.grid.n, config.grid.sim_periods)?;
    let habitat = Habitat {
        r1: config.habitat.r1.build(&grid)?,
        r2: config.habitat.r2.build(&grid)?,
        c1: config.habitat.c1.build(&grid)?,
        c2: config.habitat.c2.build(&grid)?,
        a1: config.habitat.a1.build(&grid)?,
        a2: config.habitat.a2.build(&grid)?,
    };
    habitat.validate(&grid)?;
    let k1 = config.kernel.k1.build(base_dir)?;
    let k2 = config.kernel.k2.build(base_dir)?;
    if config.run.snapshot_every == 0 {
        return Err(Error::Validation("run.snapshot_every must be positive".into()));
    }
    if !(config.run.threshold > 0.0) {
        return Err(Error::Validation("run.threshold must be positive".into()));
    }
    Ok(Problem { grid, habitat, k1, k2, run: config.run.clone(), config })
}
