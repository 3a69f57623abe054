//! Instance files.
//!
//! An instance is a JSON object describing one grid, the two measures, the
//! coefficients `λ` and the exponents, plus optional test data:
//!
//! ```json
//! {
//!   "dimension": 1, "depth": 1,
//!   "sigma": [1, 1], "mu": [1, 1],
//!   "lambda": [{"level": 0, "index": [0], "value": 1}],
//!   "exponents": {"p": 3, "q": 2, "s": "inf"},
//!   "f": [1, 1],
//!   "g": [{"level": 1, "index": [0], "value": 0.5}],
//!   "families": {"F": [{"level": 0, "index": [0]}]},
//!   "beta": [{"level": 0, "index": [0], "value": 1}],
//!   "allocation": [{"level": 0, "index": [0], "fractions": [0.5, 0]}],
//!   "wolff": {"alpha": 0.5, "s": 2},
//!   "weak": {"alpha": 1, "set": [1, 0]},
//!   "seed": 7,
//!   "expect_infeasible": false
//! }
//! ```
//!
//! Numbers keep their decimal text, so exact mode converts them to
//! rationals without passing through `f64`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use bigdecimal::BigDecimal;
use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};

use dyadic_core::sparse::CubeFamily;
use dyadic_core::wolff::WolffParams;
use dyadic_core::{
    CubeCoefficients, CubeId, CubeVector, DisjointAllocation, ExponentTriple, FractionalSet,
    GridSpec, LeafFunction, LeafMeasure, MeasureRole, Rational,
};

/// Schema or validation failure, located by a JSON path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputError {
    pub path: String,
    pub message: String,
}

impl InputError {
    pub fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        InputError {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for InputError {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeRef {
    pub level: u32,
    pub index: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeValue {
    pub level: u32,
    pub index: Vec<u64>,
    pub value: Number,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationEntry {
    pub level: u32,
    pub index: Vec<u64>,
    /// One fraction per leaf of the grid.
    pub fractions: Vec<Number>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exponents {
    pub p: Number,
    pub q: Number,
    /// A number or the string `"inf"`.
    pub s: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WolffSpec {
    pub alpha: Number,
    pub s: Number,
    /// Stopping threshold for the constructed sparse family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<Number>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakSpec {
    pub alpha: Number,
    /// Per-leaf fractions of the test set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<Vec<Number>>,
}

/// The file as written on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub dimension: u32,
    pub depth: u32,
    pub sigma: Vec<Number>,
    pub mu: Vec<Number>,
    #[serde(default)]
    pub lambda: Vec<CubeValue>,
    pub exponents: Exponents,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<Number>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<CubeValue>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub families: BTreeMap<String, Vec<CubeRef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<CubeValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<Vec<AllocationEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wolff: Option<WolffSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak: Option<WeakSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub expect_infeasible: bool,
}

/// A validated instance with every field converted to library types.
#[derive(Debug, Clone)]
pub struct Instance {
    pub grid: GridSpec,
    pub sigma: LeafMeasure,
    pub mu: LeafMeasure,
    pub lambda: CubeCoefficients,
    pub sigma_exact: LeafMeasure<Rational>,
    pub mu_exact: LeafMeasure<Rational>,
    pub lambda_exact: CubeCoefficients<Rational>,
    pub exponents: ExponentTriple,
    pub f: Option<LeafFunction>,
    pub g: Option<CubeVector>,
    pub families: BTreeMap<String, CubeFamily>,
    pub beta: Option<Vec<(CubeId, f64)>>,
    pub allocation: Option<DisjointAllocation>,
    pub wolff: Option<(WolffParams, Option<f64>)>,
    pub weak: Option<(f64, Option<FractionalSet>)>,
    pub seed: Option<u64>,
    pub expect_infeasible: bool,
}

impl InstanceFile {
    /// Parses JSON text; errors carry the path of the offending field.
    pub fn parse(text: &str) -> Result<Self, InputError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            InputError::new(path, e.into_inner())
        })
    }

    pub fn load(path: &Path) -> Result<Self, InputError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InputError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn validate(&self) -> Result<Instance, InputError> {
        let grid = GridSpec::new(self.dimension, self.depth)
            .map_err(|e| InputError::new("dimension", e))?;
        let leaves = grid.num_leaves();

        let sigma_exact = exact_measure(grid, &self.sigma, "sigma", MeasureRole::Sigma)?;
        let mu_exact = exact_measure(grid, &self.mu, "mu", MeasureRole::Mu)?;
        let sigma = float_measure(grid, &self.sigma, "sigma", MeasureRole::Sigma)?;
        let mu = float_measure(grid, &self.mu, "mu", MeasureRole::Mu)?;

        let mut lambda_entries = Vec::with_capacity(self.lambda.len());
        let mut lambda_exact_entries = Vec::with_capacity(self.lambda.len());
        let mut seen = std::collections::BTreeSet::new();
        for (i, entry) in self.lambda.iter().enumerate() {
            let path = format!("lambda[{i}]");
            let cube = cube(grid, entry.level, &entry.index, &path)?;
            if !seen.insert(cube) {
                return Err(InputError::new(path, "duplicate cube"));
            }
            let value = float(&entry.value, &format!("{path}.value"))?;
            if value < 0.0 {
                return Err(InputError::new(
                    format!("{path}.value"),
                    "coefficients must be nonnegative",
                ));
            }
            lambda_entries.push((cube, value));
            lambda_exact_entries.push((cube, rational(&entry.value, &format!("{path}.value"))?));
        }
        let lambda = CubeCoefficients::from_entries(grid, lambda_entries)
            .map_err(|e| InputError::new("lambda", e))?;
        let lambda_exact = CubeCoefficients::from_entries(grid, lambda_exact_entries)
            .map_err(|e| InputError::new("lambda", e))?;

        let exponents = self.exponents()?;

        let f = match &self.f {
            None => None,
            Some(values) => {
                let values = floats(values, "f", Some(leaves))?;
                Some(
                    if values.iter().all(|v| *v >= 0.0) {
                        LeafFunction::nonneg(grid, values)
                    } else {
                        LeafFunction::signed(grid, values)
                    }
                    .map_err(|e| InputError::new("f", e))?,
                )
            }
        };
        let g = match &self.g {
            None => None,
            Some(entries) => {
                let pairs = cube_values(grid, entries, "g")?;
                Some(CubeVector::from_entries(grid, pairs).map_err(|e| InputError::new("g", e))?)
            }
        };
        let mut families = BTreeMap::new();
        for (name, cubes) in &self.families {
            let path = format!("families.{name}");
            let ids = cubes
                .iter()
                .enumerate()
                .map(|(i, c)| cube(grid, c.level, &c.index, &format!("{path}[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            families.insert(
                name.clone(),
                CubeFamily::from_cubes(grid, ids).map_err(|e| InputError::new(path, e))?,
            );
        }
        let beta = match &self.beta {
            None => None,
            Some(entries) => Some(cube_values(grid, entries, "beta")?),
        };
        let allocation = match &self.allocation {
            None => None,
            Some(entries) => {
                let mut sets = Vec::with_capacity(entries.len());
                for (i, entry) in entries.iter().enumerate() {
                    let path = format!("allocation[{i}]");
                    let cube = cube(grid, entry.level, &entry.index, &path)?;
                    let fractions =
                        floats(&entry.fractions, &format!("{path}.fractions"), Some(leaves))?;
                    let set = FractionalSet::from_fractions(grid, fractions)
                        .map_err(|e| InputError::new(format!("{path}.fractions"), e))?;
                    sets.push((cube, set));
                }
                Some(
                    DisjointAllocation::from_sets(grid, sets, 1e-9)
                        .map_err(|e| InputError::new("allocation", e))?,
                )
            }
        };
        let wolff = match &self.wolff {
            None => None,
            Some(spec) => {
                let alpha = float(&spec.alpha, "wolff.alpha")?;
                let s = float(&spec.s, "wolff.s")?;
                let params = WolffParams::new(alpha, s, grid.dim())
                    .map_err(|e| InputError::new("wolff", e))?;
                let threshold = match &spec.threshold {
                    None => None,
                    Some(t) => Some(float(t, "wolff.threshold")?),
                };
                Some((params, threshold))
            }
        };
        let weak = match &self.weak {
            None => None,
            Some(spec) => {
                let alpha = float(&spec.alpha, "weak.alpha")?;
                if !(alpha > 0.0 && alpha < exponents.q) {
                    return Err(InputError::new(
                        "weak.alpha",
                        format!("need 0 < alpha < q = {}", exponents.q),
                    ));
                }
                let set = match &spec.set {
                    None => None,
                    Some(values) => Some(
                        FractionalSet::from_fractions(
                            grid,
                            floats(values, "weak.set", Some(leaves))?,
                        )
                        .map_err(|e| InputError::new("weak.set", e))?,
                    ),
                };
                Some((alpha, set))
            }
        };

        Ok(Instance {
            grid,
            sigma,
            mu,
            lambda,
            sigma_exact,
            mu_exact,
            lambda_exact,
            exponents,
            f,
            g,
            families,
            beta,
            allocation,
            wolff,
            weak,
            seed: self.seed,
            expect_infeasible: self.expect_infeasible,
        })
    }

    fn exponents(&self) -> Result<ExponentTriple, InputError> {
        let p = float(&self.exponents.p, "exponents.p")?;
        let q = float(&self.exponents.q, "exponents.q")?;
        let s = match &self.exponents.s {
            Value::Number(n) => float(n, "exponents.s")?,
            Value::String(text) if matches!(text.as_str(), "inf" | "infinity" | "Infinity") => {
                f64::INFINITY
            }
            other => {
                return Err(InputError::new(
                    "exponents.s",
                    format!("expected a number or \"inf\", got {other}"),
                ))
            }
        };
        ExponentTriple::new(p, q, s).map_err(|e| InputError::new("exponents", e))
    }
}

impl Instance {
    pub fn load(path: &Path) -> Result<Self, InputError> {
        InstanceFile::load(path)?.validate()
    }

    /// The family named `name`, or the only family when `name` is `None`.
    pub fn family(&self, name: Option<&str>) -> Result<Option<(String, CubeFamily)>, InputError> {
        match name {
            Some(name) => match self.families.get(name) {
                Some(f) => Ok(Some((name.to_string(), f.clone()))),
                None => Err(InputError::new(
                    format!("families.{name}"),
                    "no such family",
                )),
            },
            None => match self.families.len() {
                0 => Ok(None),
                1 => Ok(self
                    .families
                    .iter()
                    .next()
                    .map(|(k, v)| (k.clone(), v.clone()))),
                _ => Err(InputError::new(
                    "families",
                    "several families given; select one with --family",
                )),
            },
        }
    }
}

fn cube(grid: GridSpec, level: u32, index: &[u64], path: &str) -> Result<CubeId, InputError> {
    grid.cube_from_coords(level, index)
        .map_err(|e| InputError::new(path, e))
}

fn cube_values(
    grid: GridSpec,
    entries: &[CubeValue],
    path: &str,
) -> Result<Vec<(CubeId, f64)>, InputError> {
    entries
        .iter()
        .enumerate()
        .map(|(i, entry)| {
            let at = format!("{path}[{i}]");
            Ok((
                cube(grid, entry.level, &entry.index, &at)?,
                float(&entry.value, &format!("{at}.value"))?,
            ))
        })
        .collect()
}

fn float(n: &Number, path: &str) -> Result<f64, InputError> {
    match n.as_f64() {
        Some(v) if v.is_finite() => Ok(v),
        _ => Err(InputError::new(path, format!("{n} is not a finite number"))),
    }
}

fn floats(values: &[Number], path: &str, expected: Option<usize>) -> Result<Vec<f64>, InputError> {
    if let Some(len) = expected {
        if values.len() != len {
            return Err(InputError::new(
                path,
                format!("expected {len} entries, got {}", values.len()),
            ));
        }
    }
    values
        .iter()
        .enumerate()
        .map(|(i, n)| float(n, &format!("{path}[{i}]")))
        .collect()
}

/// Exact value of a JSON number from its decimal text.
pub fn rational(n: &Number, path: &str) -> Result<Rational, InputError> {
    let decimal = BigDecimal::from_str(&n.to_string()).map_err(|e| InputError::new(path, e))?;
    let (digits, scale) = decimal.as_bigint_and_exponent();
    let ten = BigInt::from(10);
    Ok(if scale >= 0 {
        Rational::new(digits, num_traits::pow(ten, scale as usize))
    } else {
        Rational::from_integer(digits * num_traits::pow(ten, (-scale) as usize))
    })
}

fn measure_masses<T>(
    values: &[Number],
    path: &str,
    leaves: usize,
    convert: impl Fn(&Number, &str) -> Result<T, InputError>,
    negative: impl Fn(&T) -> bool,
) -> Result<Vec<T>, InputError> {
    if values.len() != leaves {
        return Err(InputError::new(
            path,
            format!("expected {leaves} entries, got {}", values.len()),
        ));
    }
    values
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let at = format!("{path}[{i}]");
            let v = convert(n, &at)?;
            if negative(&v) {
                return Err(InputError::new(at, "masses must be nonnegative"));
            }
            Ok(v)
        })
        .collect()
}

fn float_measure(
    grid: GridSpec,
    values: &[Number],
    path: &str,
    role: MeasureRole,
) -> Result<LeafMeasure, InputError> {
    let masses = measure_masses(values, path, grid.num_leaves(), float, |v| *v < 0.0)?;
    Ok(LeafMeasure::new(grid, masses)
        .map_err(|e| InputError::new(path, e))?
        .with_role(role))
}

fn exact_measure(
    grid: GridSpec,
    values: &[Number],
    path: &str,
    role: MeasureRole,
) -> Result<LeafMeasure<Rational>, InputError> {
    let masses = measure_masses(values, path, grid.num_leaves(), rational, |v| {
        *v < Rational::zero()
    })?;
    Ok(LeafMeasure::new(grid, masses)
        .map_err(|e| InputError::new(path, e))?
        .with_role(role))
}

/// `"root"` or `level:[j_1,...,j_n]`.
pub fn cube_label(grid: &GridSpec, cube: CubeId) -> String {
    if cube.is_root() {
        "root".to_string()
    } else {
        let coords: Vec<String> = grid.coords(cube).iter().map(u64::to_string).collect();
        format!("{}:[{}]", cube.level, coords.join(","))
    }
}
