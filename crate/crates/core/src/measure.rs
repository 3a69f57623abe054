//! Non-atomic measures on the leaves of a dyadic grid.
//!
//! A measure is stored as one mass per leaf. Leaf masses are treated as
//! divisible: any fraction of a leaf is a measurable set of proportional
//! mass, which is how "no point masses" is encoded at finite resolution.
//! Measurable sets are [`FractionalSet`]s, i.e. per-leaf fractions in `[0,1]`.
//!
//! The mass-bookkeeping types are generic over [`Scalar`] so that the
//! allocation routines can run in exact rational arithmetic; everything that
//! needs powers or roots lives on the `f64` instantiation.

use std::collections::BTreeMap;
use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};

use crate::error::{Error, Result};
use crate::grid::{CubeId, GridSpec};

/// Numeric type usable for exact or floating mass bookkeeping.
pub trait Scalar:
    Num + Clone + PartialOrd + Debug + ToPrimitive + FromPrimitive + Send + Sync
{
    /// Relative slack granted when a requested mass overshoots the
    /// available mass; zero for exact types.
    const REL_TOLERANCE: f64;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

pub type Rational = num_rational::BigRational;

impl Scalar for f64 {
    const REL_TOLERANCE: f64 = 1e-12;
}

impl Scalar for Rational {
    const REL_TOLERANCE: f64 = 0.0;
}

pub(crate) fn max_scalar<S: Scalar>(a: S, b: S) -> S {
    if a >= b {
        a
    } else {
        b
    }
}

pub(crate) fn min_scalar<S: Scalar>(a: S, b: S) -> S {
    if a <= b {
        a
    } else {
        b
    }
}

/// Sums per-leaf values over every cube of the grid, bottom up.
/// The result is indexed by [`GridSpec::linear_index`].
pub fn cube_sums<S: Scalar>(grid: &GridSpec, leaf_values: &[S]) -> Vec<S> {
    debug_assert_eq!(leaf_values.len(), grid.num_leaves());
    let mut out = vec![S::zero(); grid.num_cubes()];
    let leaf_offset = grid.level_offset(grid.depth());
    out[leaf_offset..].clone_from_slice(leaf_values);
    let branching = grid.branching();
    for level in (0..grid.depth()).rev() {
        let offset = grid.level_offset(level);
        let child_offset = grid.level_offset(level + 1);
        for code in 0..grid.cubes_at_level(level) {
            let first = child_offset + code * branching;
            let mut acc = S::zero();
            for value in &out[first..first + branching] {
                acc = acc + value.clone();
            }
            out[offset + code] = acc;
        }
    }
    out
}

/// Which side of the inequality a measure plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeasureRole {
    /// The domain measure σ.
    Sigma,
    /// The target measure μ.
    Mu,
    /// Lebesgue measure on the leaves.
    Lebesgue,
    #[default]
    Unspecified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafMeasure<S = f64> {
    grid: GridSpec,
    role: MeasureRole,
    masses: Vec<S>,
    cube_masses: Vec<S>,
}

impl<S: Scalar> LeafMeasure<S> {
    pub fn new(grid: GridSpec, masses: Vec<S>) -> Result<Self> {
        if masses.len() != grid.num_leaves() {
            return Err(Error::LengthMismatch {
                expected: grid.num_leaves(),
                actual: masses.len(),
            });
        }
        if let Some((i, m)) = masses
            .iter()
            .enumerate()
            .find(|(_, m)| !(**m >= S::zero()) || !m.to_f64_lossy().is_finite())
        {
            return Err(Error::InvalidValue(format!("leaf {i} has mass {m:?}")));
        }
        let cube_masses = cube_sums(&grid, &masses);
        Ok(LeafMeasure {
            grid,
            role: MeasureRole::Unspecified,
            masses,
            cube_masses,
        })
    }

    pub fn zero(grid: GridSpec) -> Self {
        Self::new(grid, vec![S::zero(); grid.num_leaves()]).expect("zero measure is valid")
    }

    pub fn with_role(mut self, role: MeasureRole) -> Self {
        self.role = role;
        self
    }

    pub fn role(&self) -> MeasureRole {
        self.role
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn masses(&self) -> &[S] {
        &self.masses
    }

    pub fn leaf_mass(&self, leaf: usize) -> &S {
        &self.masses[leaf]
    }

    /// `m(Q)`, read from the aggregation cache.
    pub fn cube_mass(&self, cube: CubeId) -> &S {
        &self.cube_masses[self.grid.linear_index(cube)]
    }

    /// Cube masses indexed by [`GridSpec::linear_index`].
    pub fn cube_masses(&self) -> &[S] {
        &self.cube_masses
    }

    pub fn total(&self) -> &S {
        &self.cube_masses[0]
    }

    /// `m(E) = Σ fraction_ℓ · m_ℓ`.
    pub fn set_mass(&self, set: &FractionalSet<S>) -> S {
        self.masses
            .iter()
            .zip(&set.fractions)
            .fold(S::zero(), |acc, (m, f)| acc + m.clone() * f.clone())
    }

    /// The restriction `m|_E`.
    pub fn restricted(&self, set: &FractionalSet<S>) -> Self {
        let masses = self
            .masses
            .iter()
            .zip(&set.fractions)
            .map(|(m, f)| m.clone() * f.clone())
            .collect();
        Self::new(self.grid, masses)
            .expect("restriction of a valid measure is valid")
            .with_role(self.role)
    }

    pub fn to_f64(&self) -> LeafMeasure<f64> {
        LeafMeasure::new(
            self.grid,
            self.masses.iter().map(Scalar::to_f64_lossy).collect(),
        )
        .expect("finite masses convert")
        .with_role(self.role)
    }
}

impl LeafMeasure<f64> {
    /// Lebesgue measure: every leaf has mass `2^{-nD}`.
    pub fn lebesgue(grid: GridSpec) -> Self {
        let leaf = grid.volume(grid.leaf(0));
        Self::new(grid, vec![leaf; grid.num_leaves()])
            .expect("lebesgue masses are valid")
            .with_role(MeasureRole::Lebesgue)
    }

    pub fn to_rational(&self) -> LeafMeasure<Rational> {
        LeafMeasure::new(
            self.grid,
            self.masses
                .iter()
                .map(|&m| Rational::from_f64(m).expect("finite mass"))
                .collect(),
        )
        .expect("exact conversion preserves validity")
        .with_role(self.role)
    }
}

/// A real function that is constant on each leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafFunction {
    grid: GridSpec,
    values: Vec<f64>,
    nonneg: bool,
}

impl LeafFunction {
    /// A nonnegative function; negative or non-finite values are rejected.
    pub fn nonneg(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        Self::check_len(&grid, &values)?;
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidValue(format!(
                "leaf {i} has value {v}, expected a finite nonnegative number"
            )));
        }
        Ok(LeafFunction {
            grid,
            values,
            nonneg: true,
        })
    }

    /// A function allowed to change sign (only used for duality checks).
    pub fn signed(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        Self::check_len(&grid, &values)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!("leaf {i} is not finite")));
        }
        let nonneg = values.iter().all(|&v| v >= 0.0);
        Ok(LeafFunction {
            grid,
            values,
            nonneg,
        })
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self::signed(grid, vec![value; grid.num_leaves()]).expect("constant is finite")
    }

    pub fn zero(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    fn check_len(grid: &GridSpec, values: &[f64]) -> Result<()> {
        if values.len() != grid.num_leaves() {
            return Err(Error::LengthMismatch {
                expected: grid.num_leaves(),
                actual: values.len(),
            });
        }
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_nonneg(&self) -> bool {
        self.nonneg
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `∫ f dm` over every cube, indexed by [`GridSpec::linear_index`].
    pub fn cube_integrals(&self, m: &LeafMeasure) -> Vec<f64> {
        let weighted: Vec<f64> = self
            .values
            .iter()
            .zip(m.masses())
            .map(|(v, w)| v * w)
            .collect();
        cube_sums(&self.grid, &weighted)
    }

    pub fn integrate(&self, m: &LeafMeasure, cube: CubeId) -> f64 {
        self.grid
            .leaves_under(cube)
            .map(|i| self.values[i] * m.masses()[i])
            .sum()
    }

    /// `⟨f⟩_Q^m`; fails on cubes of zero mass.
    pub fn average(&self, m: &LeafMeasure, cube: CubeId) -> Result<f64> {
        let mass = *m.cube_mass(cube);
        if mass <= 0.0 {
            return Err(Error::ZeroMassCube(cube));
        }
        Ok(self.integrate(m, cube) / mass)
    }

    /// `‖f‖_{L^p(m)}`; `p = f64::INFINITY` gives the m-essential supremum.
    pub fn lp_norm(&self, p: f64, m: &LeafMeasure) -> f64 {
        lp_norm(&self.values, p, m.masses())
    }
}

/// `(Σ |v_ℓ|^p w_ℓ)^{1/p}`, or the sup over `w_ℓ > 0` when `p` is infinite.
pub fn lp_norm(values: &[f64], p: f64, weights: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    if p.is_infinite() {
        return values
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(v, _)| v.abs())
            .fold(0.0, f64::max);
    }
    // Rescale by the largest entry so that large p does not overflow.
    let scale = values
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = values
        .iter()
        .zip(weights)
        .map(|(v, w)| (v.abs() / scale).powf(p) * w)
        .sum();
    scale * sum.powf(1.0 / p)
}

/// A measurable subset of the root encoded by per-leaf fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalSet<S = f64> {
    grid: GridSpec,
    fractions: Vec<S>,
}

impl<S: Scalar> FractionalSet<S> {
    pub fn empty(grid: GridSpec) -> Self {
        FractionalSet {
            grid,
            fractions: vec![S::zero(); grid.num_leaves()],
        }
    }

    /// The whole cube `Q`.
    pub fn cube(grid: GridSpec, cube: CubeId) -> Self {
        let mut set = Self::empty(grid);
        for i in grid.leaves_under(cube) {
            set.fractions[i] = S::one();
        }
        set
    }

    pub fn full(grid: GridSpec) -> Self {
        Self::cube(grid, CubeId::ROOT)
    }

    pub fn from_fractions(grid: GridSpec, fractions: Vec<S>) -> Result<Self> {
        if fractions.len() != grid.num_leaves() {
            return Err(Error::LengthMismatch {
                expected: grid.num_leaves(),
                actual: fractions.len(),
            });
        }
        if let Some((i, f)) = fractions
            .iter()
            .enumerate()
            .find(|(_, f)| !(**f >= S::zero() && **f <= S::one()))
        {
            return Err(Error::InvalidValue(format!(
                "leaf {i} has fraction {f:?}, expected a value in [0,1]"
            )));
        }
        Ok(FractionalSet { grid, fractions })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn fractions(&self) -> &[S] {
        &self.fractions
    }

    pub fn fraction(&self, leaf: usize) -> &S {
        &self.fractions[leaf]
    }

    pub(crate) fn set_fraction(&mut self, leaf: usize, value: S) {
        self.fractions[leaf] = value;
    }

    pub fn is_empty(&self) -> bool {
        self.fractions.iter().all(|f| f.is_zero())
    }

    /// Leaves carrying a nonzero fraction.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.fractions
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.is_zero())
            .map(|(i, _)| i)
    }

    /// Fractionwise containment `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.fractions
            .iter()
            .zip(&other.fractions)
            .all(|(a, b)| a <= b)
    }

    /// Whether the set lives inside the leaves of `cube`.
    pub fn is_within(&self, cube: CubeId) -> bool {
        let inside = self.grid.leaves_under(cube);
        self.support().all(|i| inside.contains(&i))
    }

    /// Fractionwise `max(0, a - b)`.
    pub fn minus(&self, other: &Self) -> Self {
        let fractions = self
            .fractions
            .iter()
            .zip(&other.fractions)
            .map(|(a, b)| {
                if a > b {
                    a.clone() - b.clone()
                } else {
                    S::zero()
                }
            })
            .collect();
        FractionalSet {
            grid: self.grid,
            fractions,
        }
    }

    pub fn to_f64(&self) -> FractionalSet<f64> {
        FractionalSet {
            grid: self.grid,
            fractions: self.fractions.iter().map(Scalar::to_f64_lossy).collect(),
        }
    }
}

/// A family `Q ↦ E_Q` of sets with `E_Q ⊆ Q`, meant to be pairwise disjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct DisjointAllocation<S = f64> {
    grid: GridSpec,
    sets: BTreeMap<CubeId, FractionalSet<S>>,
}

impl<S: Scalar> DisjointAllocation<S> {
    pub fn new(grid: GridSpec) -> Self {
        DisjointAllocation {
            grid,
            sets: BTreeMap::new(),
        }
    }

    /// Builds an allocation and validates containment and disjointness.
    pub fn from_sets(
        grid: GridSpec,
        sets: impl IntoIterator<Item = (CubeId, FractionalSet<S>)>,
        tolerance: f64,
    ) -> Result<Self> {
        let mut alloc = Self::new(grid);
        for (cube, set) in sets {
            if !grid.contains_cube(cube) {
                return Err(Error::InvalidCube(cube.to_string()));
            }
            if !set.is_within(cube) {
                return Err(Error::InvalidValue(format!(
                    "set for {cube} reaches outside the cube"
                )));
            }
            alloc.sets.insert(cube, set);
        }
        alloc.check_disjoint(tolerance)?;
        Ok(alloc)
    }

    pub(crate) fn insert(&mut self, cube: CubeId, set: FractionalSet<S>) {
        self.sets.insert(cube, set);
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn get(&self, cube: CubeId) -> Option<&FractionalSet<S>> {
        self.sets.get(&cube)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CubeId, &FractionalSet<S>)> {
        self.sets.iter()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Sum of fractions over all sets, per leaf.
    pub fn leaf_totals(&self) -> Vec<S> {
        let mut totals = vec![S::zero(); self.grid.num_leaves()];
        for set in self.sets.values() {
            for (t, f) in totals.iter_mut().zip(set.fractions()) {
                *t = t.clone() + f.clone();
            }
        }
        totals
    }

    /// Fails with [`Error::OverlappingAllocation`] if some leaf is used more
    /// than `1 + tolerance` times in total.
    pub fn check_disjoint(&self, tolerance: f64) -> Result<()> {
        for (leaf, total) in self.leaf_totals().iter().enumerate() {
            let total = total.to_f64_lossy();
            if total > 1.0 + tolerance {
                return Err(Error::OverlappingAllocation { leaf, total });
            }
        }
        Ok(())
    }

    /// The union of all sets as one fractional set (clamped at 1).
    pub fn union(&self) -> FractionalSet<S> {
        let fractions = self
            .leaf_totals()
            .into_iter()
            .map(|t| min_scalar(t, S::one()))
            .collect();
        FractionalSet {
            grid: self.grid,
            fractions,
        }
    }

    pub fn masses(&self, m: &LeafMeasure<S>) -> BTreeMap<CubeId, S> {
        self.sets
            .iter()
            .map(|(q, set)| (*q, m.set_mass(set)))
            .collect()
    }

    pub fn to_f64(&self) -> DisjointAllocation<f64> {
        DisjointAllocation {
            grid: self.grid,
            sets: self.sets.iter().map(|(q, s)| (*q, s.to_f64())).collect(),
        }
    }
}
