//! `.scn` scenario files: TOML with matrix literals as nested arrays.
//!
//! ```toml
//! name = "toy_exact"
//! T = 1.0
//! eps = 0.0
//! grid_N = 2000
//! y0 = [1.0, 0.0, 0.0]
//! yf = [0.0, 1.0, 0.0]
//!
//! [system]
//! A = [[1.0, 2.0, 0.0], [1.0, -1.0, 2.0], [1.0, 1.0, -1.0]]
//! B = [[1.0, 0.0], [-1.0, 1.0], [0.0, 0.0]]
//!
//! [set]
//! variant = "toy_half_mix"
//! ```
//!
//! Optional tables: `[solver]` (SolverOptions fields), `[check]` with
//! `subcone_orthobasis` (one list of n-vectors per singular subcone) and
//! `[expect]` with the exit code each command should return.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use conereach::{ConstraintSet, LtiSystem, ReachabilityProblem, SolverOptions, TimeGrid};
use nalgebra::DVector;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    #[serde(default)]
    pub subcone_orthobasis: Vec<Vec<Vec<f64>>>,
}

/// Expected exit code per command, used by the fixture contract test.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectSpec {
    pub solve: Option<i32>,
    pub check: Option<i32>,
    pub cstar: Option<i32>,
    pub oracle_compare: Option<i32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default)]
    pub eps: f64,
    #[serde(rename = "grid_N")]
    pub grid_n: usize,
    pub y0: Vec<f64>,
    pub yf: Vec<f64>,
    pub system: SystemSpec,
    pub set: ConstraintSet,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub check: CheckSpec,
    #[serde(default)]
    pub expect: ExpectSpec,
}

/// Command-line overrides of scenario values.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub eps: Option<f64>,
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in scenario {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn apply(&mut self, o: Overrides) -> Result<()> {
        if let Some(n) = o.grid {
            self.grid_n = n;
        }
        if let Some(e) = o.eps {
            self.eps = e;
        }
        if let Some(s) = o.seed {
            self.solver.seed = s;
        }
        self.validate()
    }

    /// Dimension and value checks; messages name the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            bail!("name: must be a nonempty file stem without path separators");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            bail!("T: must be a positive finite number, got {}", self.horizon);
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            bail!("eps: must be a nonnegative finite number, got {}", self.eps);
        }
        if self.grid_n < 2 {
            bail!("grid_N: needs at least 2 intervals, got {}", self.grid_n);
        }
        let n = self.system.a.len();
        if n == 0 {
            bail!("system.A: must have at least one row");
        }
        check_rows(&self.system.a, "system.A", n, n)?;
        let m = self.system.b.first().map_or(0, Vec::len);
        if m == 0 {
            bail!("system.B: must have at least one column");
        }
        check_rows(&self.system.b, "system.B", n, m)?;
        check_vec(&self.y0, "y0", n)?;
        check_vec(&self.yf, "yf", n)?;
        self.set.validate().map_err(|e| anyhow!("set: {e}"))?;
        if self.set.dim() != m {
            bail!(
                "set: dimension {} does not match the {m} columns of system.B",
                self.set.dim()
            );
        }
        self.solver.validate().map_err(|e| anyhow!("solver: {e}"))?;
        for (c, basis) in self.check.subcone_orthobasis.iter().enumerate() {
            if basis.is_empty() {
                bail!("check.subcone_orthobasis[{c}]: needs at least one vector");
            }
            for (j, b) in basis.iter().enumerate() {
                check_vec(b, &format!("check.subcone_orthobasis[{c}][{j}]"), n)?;
            }
        }
        Ok(())
    }

    pub fn system(&self) -> Result<LtiSystem> {
        LtiSystem::from_rows(&self.system.a, &self.system.b).map_err(|e| anyhow!("system: {e}"))
    }

    pub fn problem_on(&self, grid_n: usize, eps: f64) -> Result<ReachabilityProblem> {
        let grid = TimeGrid::new(self.horizon, grid_n).map_err(|e| anyhow!("grid_N: {e}"))?;
        ReachabilityProblem::new(
            self.system()?,
            self.set.clone(),
            DVector::from_vec(self.y0.clone()),
            DVector::from_vec(self.yf.clone()),
            eps,
            grid,
        )
        .map_err(|e| anyhow!("{e}"))
    }

    pub fn problem(&self) -> Result<ReachabilityProblem> {
        self.problem_on(self.grid_n, self.eps)
    }

    pub fn subcones(&self) -> Vec<Vec<DVector<f64>>> {
        self.check
            .subcone_orthobasis
            .iter()
            .map(|basis| basis.iter().map(|b| DVector::from_vec(b.clone())).collect())
            .collect()
    }
}

fn check_rows(rows: &[Vec<f64>], field: &str, n_rows: usize, n_cols: usize) -> Result<()> {
    if rows.len() != n_rows {
        bail!("{field}: expected {n_rows} rows, found {}", rows.len());
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n_cols {
            bail!("{field}: row {i} has {} entries, expected {n_cols}", r.len());
        }
        if r.iter().any(|x| !x.is_finite()) {
            bail!("{field}: row {i} has a non-finite entry");
        }
    }
    Ok(())
}

fn check_vec(v: &[f64], field: &str, n: usize) -> Result<()> {
    if v.len() != n {
        bail!("{field}: expected {n} entries, found {}", v.len());
    }
    if v.iter().any(|x| !x.is_finite()) {
        bail!("{field}: has a non-finite entry");
    }
    Ok(())
}
