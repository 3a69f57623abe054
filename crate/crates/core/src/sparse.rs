//! Sparse and Carleson families of cubes, and the bottom-up construction of
//! pairwise disjoint sets `E_Q ⊆ Q` with prescribed masses.
//!
//! The allocation routines are generic over [`Scalar`]; instantiated with
//! [`Rational`](crate::measure::Rational) they are exact.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::grid::{CubeId, GridSpec};
use crate::measure::{
    lp_norm, max_scalar, min_scalar, DisjointAllocation, FractionalSet, LeafFunction, LeafMeasure,
    Scalar,
};
use crate::operator::CubeCoefficients;

/// A set of cubes of one grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeFamily {
    grid: GridSpec,
    members: Vec<bool>,
}

impl CubeFamily {
    pub fn empty(grid: GridSpec) -> Self {
        CubeFamily {
            grid,
            members: vec![false; grid.num_cubes()],
        }
    }

    pub fn all(grid: GridSpec) -> Self {
        CubeFamily {
            grid,
            members: vec![true; grid.num_cubes()],
        }
    }

    pub fn from_cubes(grid: GridSpec, cubes: impl IntoIterator<Item = CubeId>) -> Result<Self> {
        let mut family = Self::empty(grid);
        for cube in cubes {
            if !grid.contains_cube(cube) {
                return Err(Error::InvalidCube(cube.to_string()));
            }
            family.insert(cube);
        }
        Ok(family)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn insert(&mut self, cube: CubeId) {
        let i = self.grid.linear_index(cube);
        self.members[i] = true;
    }

    pub fn contains(&self, cube: CubeId) -> bool {
        self.members[self.grid.linear_index(cube)]
    }

    pub fn iter(&self) -> impl Iterator<Item = CubeId> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(i, _)| self.grid.cube_at(i))
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|m| **m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|m| *m)
    }
}

/// Result of [`carleson_constant`].
#[derive(Debug, Clone, PartialEq)]
pub struct CarlesonReport<S = f64> {
    /// Largest ratio `Σ_{Q ⊆ P} λ_Q / m(P)` over cubes with `m(P) > 0`.
    pub constant: S,
    /// Cube attaining `constant`.
    pub witness: Option<CubeId>,
    /// A cube of zero mass carrying coefficient mass below it; when set the
    /// Carleson constant is infinite.
    pub unbounded_at: Option<CubeId>,
    /// Every cube with `m(P) > 0` and its ratio.
    pub ratios: Vec<(CubeId, S)>,
}

impl<S: Scalar> CarlesonReport<S> {
    pub fn is_finite(&self) -> bool {
        self.unbounded_at.is_none()
    }

    pub fn value_f64(&self) -> f64 {
        if self.is_finite() {
            self.constant.to_f64_lossy()
        } else {
            f64::INFINITY
        }
    }
}

/// `Λ1 = sup_P Σ_{Q ⊆ P} λ_Q / m(P)`.
pub fn carleson_constant<S: Scalar>(
    lambda: &CubeCoefficients<S>,
    m: &LeafMeasure<S>,
) -> CarlesonReport<S> {
    let grid = *lambda.grid();
    let sums = lambda.subtree_sums();
    let mut report = CarlesonReport {
        constant: S::zero(),
        witness: None,
        unbounded_at: None,
        ratios: Vec::new(),
    };
    for (i, (sum, mass)) in sums.iter().zip(m.cube_masses()).enumerate() {
        let cube = grid.cube_at(i);
        if mass.is_zero() {
            if !sum.is_zero() && report.unbounded_at.is_none() {
                report.unbounded_at = Some(cube);
            }
            continue;
        }
        let ratio = sum.clone() / mass.clone();
        if report.witness.is_none() || ratio > report.constant {
            report.constant = ratio.clone();
            report.witness = Some(cube);
        }
        report.ratios.push((cube, ratio));
    }
    report
}

/// Result of [`family_carleson_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct CarlesonCheck {
    pub holds: bool,
    /// Family cube with the largest ratio `Σ_{Q∈F, Q⊆P} m(Q) / m(P)`.
    pub worst: Option<CubeId>,
    pub worst_ratio: f64,
}

/// Whether `Σ_{Q ∈ F, Q ⊆ P} m(Q) ≤ c·m(P)` for every `P ∈ F`.
pub fn family_carleson_check<S: Scalar>(
    family: &CubeFamily,
    m: &LeafMeasure<S>,
    c: &S,
) -> CarlesonCheck {
    let grid = *family.grid();
    let weights: Vec<S> = family
        .members
        .iter()
        .zip(m.cube_masses())
        .map(|(&inside, mass)| if inside { mass.clone() } else { S::zero() })
        .collect();
    let sums = CubeCoefficients::from_dense(grid, weights)
        .expect("cube masses are nonnegative")
        .subtree_sums();
    let mut check = CarlesonCheck {
        holds: true,
        worst: None,
        worst_ratio: 0.0,
    };
    for cube in family.iter() {
        let i = grid.linear_index(cube);
        let mass = &m.cube_masses()[i];
        let sum = &sums[i];
        if sum > &(c.clone() * mass.clone()) {
            check.holds = false;
        }
        let ratio = if mass.is_zero() {
            0.0
        } else {
            (sum.clone() / mass.clone()).to_f64_lossy()
        };
        if check.worst.is_none() || ratio > check.worst_ratio {
            check.worst = Some(cube);
            check.worst_ratio = ratio;
        }
    }
    check
}

/// A canonical set `H` together with its part outside the excluded set.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixSelection<S = f64> {
    /// The canonical-order prefix `H` of `A` (excluded parts included).
    pub extended: FractionalSet<S>,
    /// `H \ exclude`, the part carrying the requested mass.
    pub fresh: FractionalSet<S>,
}

struct Taken<S> {
    leaf: usize,
    extended: S,
    fresh: S,
}

/// Walks `leaves` in canonical order and takes mass `t` from the part of
/// `A` not yet covered by `exclude`, cutting the boundary leaf fractionally
/// (or, in atomic mode, taking whole untouched leaves until `t` is reached).
fn prefix_walk<S: Scalar>(
    leaves: Range<usize>,
    a: impl Fn(usize) -> S,
    masses: &[S],
    exclude: impl Fn(usize) -> S,
    t: &S,
    atomic: bool,
) -> Result<Vec<Taken<S>>> {
    let mut taken = Vec::new();
    if t.is_zero() {
        return Ok(taken);
    }
    let available = leaves.clone().fold(S::zero(), |acc, i| {
        let free = max_scalar(a(i) - exclude(i), S::zero());
        if atomic && !(exclude(i).is_zero() && a(i) == S::one()) {
            acc
        } else {
            acc + free * masses[i].clone()
        }
    });
    let mut remaining = t.clone();
    if remaining > available {
        let (req, avail) = (t.to_f64_lossy(), available.to_f64_lossy());
        if atomic || req - avail > S::REL_TOLERANCE * req.abs().max(1.0) {
            return Err(Error::MassUnavailable {
                requested: req,
                available: avail,
            });
        }
        remaining = available;
    }
    for i in leaves {
        if remaining <= S::zero() {
            break;
        }
        let a_i = a(i);
        if a_i.is_zero() {
            continue;
        }
        let mass = masses[i].clone();
        if atomic {
            if exclude(i).is_zero() && a_i == S::one() && !mass.is_zero() {
                remaining = remaining - mass;
                taken.push(Taken {
                    leaf: i,
                    extended: S::one(),
                    fresh: S::one(),
                });
            }
            continue;
        }
        let covered = min_scalar(exclude(i), a_i.clone());
        let free = a_i.clone() - covered.clone();
        let capacity = free.clone() * mass.clone();
        if capacity <= remaining {
            remaining = remaining - capacity;
            taken.push(Taken {
                leaf: i,
                extended: a_i,
                fresh: free,
            });
        } else {
            let cut = remaining.clone() / mass;
            remaining = S::zero();
            taken.push(Taken {
                leaf: i,
                extended: covered + cut.clone(),
                fresh: cut,
            });
        }
    }
    Ok(taken)
}

/// Canonical subset of `a` with prescribed mass `t` outside `exclude`.
///
/// The result is a canonical-order prefix of `a` whose last leaf may be cut
/// fractionally. It is nested in `t` and in `exclude`: larger `t` or a
/// larger excluded set only ever extends the prefix.
pub fn prefix_select<S: Scalar>(
    a: &FractionalSet<S>,
    m: &LeafMeasure<S>,
    t: &S,
    exclude: &FractionalSet<S>,
    atomic: bool,
) -> Result<PrefixSelection<S>> {
    let grid = *a.grid();
    let taken = prefix_walk(
        0..grid.num_leaves(),
        |i| a.fraction(i).clone(),
        m.masses(),
        |i| exclude.fraction(i).clone(),
        t,
        atomic,
    )?;
    let mut extended = FractionalSet::empty(grid);
    let mut fresh = FractionalSet::empty(grid);
    for step in taken {
        extended.set_fraction(step.leaf, step.extended);
        fresh.set_fraction(step.leaf, step.fresh);
    }
    Ok(PrefixSelection { extended, fresh })
}

/// Pairwise disjoint `E_Q ⊆ Q` with `m(E_Q) = λ_Q / C`, built bottom up.
///
/// Cubes are processed from the deepest level to the root; each takes the
/// canonical prefix of its still-unallocated mass. This succeeds whenever
/// `Σ_{Q ⊆ P} λ_Q ≤ C·m(P)` for every `P`. In atomic mode only whole,
/// untouched leaves may be used (leaves behave as point masses) and
/// `m(E_Q) ≥ λ_Q / C` is all that can be guaranteed.
pub fn dor_allocate<S: Scalar>(
    lambda: &CubeCoefficients<S>,
    m: &LeafMeasure<S>,
    c: &S,
    atomic: bool,
) -> Result<DisjointAllocation<S>> {
    if !(c > &S::zero()) {
        return Err(Error::InvalidValue(format!(
            "allocation constant must be positive, got {c:?}"
        )));
    }
    let grid = *lambda.grid();
    let mut used = vec![S::zero(); grid.num_leaves()];
    let mut alloc = DisjointAllocation::new(grid);
    for level in (0..=grid.depth()).rev() {
        for code in 0..grid.cubes_at_level(level) as u64 {
            let cube = CubeId { level, code };
            let coefficient = lambda.get(cube);
            if coefficient.is_zero() {
                continue;
            }
            let target = coefficient.clone() / c.clone();
            let taken = prefix_walk(
                grid.leaves_under(cube),
                |_| S::one(),
                m.masses(),
                |i| used[i].clone(),
                &target,
                atomic,
            )
            .map_err(|_| Error::Infeasible(cube))?;
            let mut set = FractionalSet::empty(grid);
            for step in taken {
                used[step.leaf] = used[step.leaf].clone() + step.fresh.clone();
                set.set_fraction(step.leaf, step.fresh);
            }
            alloc.insert(cube, set);
        }
    }
    Ok(alloc)
}

/// Most λ-supported cubes [`lambda2_bruteforce`] accepts.
pub const BRUTEFORCE_MAX_CUBES: usize = 7;
/// Most leaves [`lambda2_bruteforce`] accepts.
pub const BRUTEFORCE_MAX_LEAVES: usize = 8;

/// `Λ2 = inf over disjoint E_Q ⊆ Q of sup_Q λ_Q / m(E_Q)`, by exhaustive
/// enumeration.
///
/// With divisible leaf mass, demands `λ_Q / t` can be met by disjoint sets
/// iff every subfamily `S` of supported cubes satisfies
/// `Σ_{Q∈S} λ_Q ≤ t · m(∪S)` (supply–demand duality for the bipartite
/// cube/leaf transport problem), so `Λ2` is the maximum of
/// `λ(S) / m(∪S)` over all `2^k - 1` subfamilies. Unlike the Carleson
/// constant this ranges over arbitrary unions, not only dyadic cubes.
pub fn lambda2_bruteforce(lambda: &CubeCoefficients, m: &LeafMeasure) -> Result<f64> {
    let grid = *lambda.grid();
    if grid.num_leaves() > BRUTEFORCE_MAX_LEAVES {
        return Err(Error::TooLarge(format!(
            "{} leaves (at most {BRUTEFORCE_MAX_LEAVES})",
            grid.num_leaves()
        )));
    }
    let support: Vec<(u64, f64)> = lambda
        .support()
        .map(|(q, &v)| {
            let mask = grid.leaves_under(q).fold(0u64, |acc, i| acc | (1 << i));
            (mask, v)
        })
        .collect();
    if support.len() > BRUTEFORCE_MAX_CUBES {
        return Err(Error::TooLarge(format!(
            "{} supported cubes (at most {BRUTEFORCE_MAX_CUBES})",
            support.len()
        )));
    }
    let mut best = 0.0f64;
    for subset in 1u32..(1 << support.len()) {
        let (mut union, mut demand) = (0u64, 0.0);
        for (k, (mask, value)) in support.iter().enumerate() {
            if subset & (1 << k) != 0 {
                union |= mask;
                demand += value;
            }
        }
        let supply: f64 = (0..grid.num_leaves())
            .filter(|i| union & (1 << i) != 0)
            .map(|i| m.masses()[i])
            .sum();
        if supply == 0.0 {
            return Ok(f64::INFINITY);
        }
        best = best.max(demand / supply);
    }
    Ok(best)
}

/// Result of [`is_sigma_sparse`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCheck<S = f64> {
    pub sparse: bool,
    /// Sets `E_F` with `m(E_F) = δ·m(F)` when the family is sparse.
    pub witness: Option<DisjointAllocation<S>>,
    /// The Carleson test with constant `1/δ`, computed independently.
    pub carleson: CarlesonCheck,
}

impl<S> SparseCheck<S> {
    /// Whether the allocation route and the Carleson route agree.
    pub fn agrees(&self) -> bool {
        self.sparse == self.carleson.holds
    }
}

/// Whether each `F` in the family owns disjoint `E_F ⊆ F` with
/// `m(E_F) ≥ δ·m(F)`; `δ = 1/2` is the usual choice.
pub fn is_sparse_with<S: Scalar>(
    family: &CubeFamily,
    m: &LeafMeasure<S>,
    delta: &S,
) -> SparseCheck<S> {
    let grid = *family.grid();
    let demands: Vec<S> = family
        .members
        .iter()
        .zip(m.cube_masses())
        .map(|(&inside, mass)| {
            if inside {
                delta.clone() * mass.clone()
            } else {
                S::zero()
            }
        })
        .collect();
    let lambda = CubeCoefficients::from_dense(grid, demands).expect("demands are nonnegative");
    let witness = dor_allocate(&lambda, m, &S::one(), false).ok();
    let carleson = family_carleson_check(family, m, &(S::one() / delta.clone()));
    SparseCheck {
        sparse: witness.is_some(),
        witness,
        carleson,
    }
}

/// [`is_sparse_with`] at `δ = 1/2`.
pub fn is_sigma_sparse<S: Scalar>(family: &CubeFamily, m: &LeafMeasure<S>) -> SparseCheck<S> {
    let half = S::one() / (S::one() + S::one());
    is_sparse_with(family, m, &half)
}

/// `π_F(Q)`: the smallest family cube containing `Q`.
pub fn pi_family(family: &CubeFamily, cube: CubeId) -> Result<CubeId> {
    let grid = family.grid();
    (0..=cube.level)
        .rev()
        .map(|k| grid.ancestor_at(cube, k))
        .find(|&a| family.contains(a))
        .ok_or(Error::NotCovered(cube))
}

/// `ch_F(F0)`: the maximal family cubes strictly inside `F0`.
pub fn family_children(family: &CubeFamily, top: CubeId) -> Vec<CubeId> {
    let grid = *family.grid();
    family
        .iter()
        .filter(|&q| q != top && grid.is_subcube(q, top))
        .filter(|&q| {
            let parent = grid.parent(q).expect("strict subcube has a parent");
            pi_family(family, parent) == Ok(top)
        })
        .collect()
}

/// `E_F(F0) = F0 \ ∪ ch_F(F0)` as a 0/1 fractional set.
pub fn family_exclusive_set(family: &CubeFamily, top: CubeId) -> FractionalSet {
    let grid = *family.grid();
    let mut set = FractionalSet::cube(grid, top);
    for child in family_children(family, top) {
        for i in grid.leaves_under(child) {
            set.set_fraction(i, 0.0);
        }
    }
    set
}

/// Principal cubes of `f` with respect to `m`: the root, then recursively
/// the maximal cubes whose `m`-average of `f` exceeds `threshold` times the
/// average on their parent in the family. Cubes of zero mass are skipped.
pub fn stopping_family(f: &LeafFunction, m: &LeafMeasure, threshold: f64) -> Result<CubeFamily> {
    let grid = *f.grid();
    if !f.is_nonneg() {
        return Err(Error::InvalidValue("stopping cubes need f >= 0".into()));
    }
    let integrals = f.cube_integrals(m);
    let average = |q: CubeId| -> Option<f64> {
        let i = grid.linear_index(q);
        let mass = m.cube_masses()[i];
        (mass > 0.0).then(|| integrals[i] / mass)
    };
    let root_avg = average(CubeId::ROOT).ok_or(Error::ZeroMassCube(CubeId::ROOT))?;
    let mut family = CubeFamily::empty(grid);
    family.insert(CubeId::ROOT);
    // (cube to inspect, average of its current stopping parent)
    let mut stack: Vec<(CubeId, f64)> =
        grid.children(CubeId::ROOT).map(|c| (c, root_avg)).collect();
    while let Some((cube, parent_avg)) = stack.pop() {
        let Some(avg) = average(cube) else {
            continue;
        };
        let next_parent = if avg > threshold * parent_avg {
            family.insert(cube);
            avg
        } else {
            parent_avg
        };
        stack.extend(grid.children(cube).map(|c| (c, next_parent)));
    }
    Ok(family)
}

/// Whether `a` is an admissible component for `top` in the two-sided
/// `ℓ^p` estimate over a sparse family: nonnegative, supported on `top`,
/// and constant on every `F' ∈ ch_F(top)`.
pub fn is_admissible_component(family: &CubeFamily, top: CubeId, a: &LeafFunction) -> bool {
    let grid = *family.grid();
    let inside = grid.leaves_under(top);
    let values = a.values();
    if values.iter().any(|&v| v < 0.0) {
        return false;
    }
    if values
        .iter()
        .enumerate()
        .any(|(i, &v)| v != 0.0 && !inside.contains(&i))
    {
        return false;
    }
    family_children(family, top).into_iter().all(|child| {
        let r = grid.leaves_under(child);
        values[r.clone()].iter().all(|&v| v == values[r.start])
    })
}

/// `((Σ_F ‖a_F‖_p^p)^{1/p}, ‖Σ_F a_F‖_p)` for components `a_F`.
pub fn lp_decomposition_norms(parts: &[LeafFunction], p: f64, m: &LeafMeasure) -> (f64, f64) {
    let grid = *m.grid();
    let separate: f64 = parts
        .iter()
        .map(|a| a.lp_norm(p, m).powf(p))
        .sum::<f64>()
        .powf(1.0 / p);
    let mut total = vec![0.0; grid.num_leaves()];
    for a in parts {
        for (t, v) in total.iter_mut().zip(a.values()) {
            *t += v;
        }
    }
    (separate, lp_norm(&total, p, m.masses()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Rational;

    const L0: CubeId = CubeId { level: 1, code: 0 };
    const L1: CubeId = CubeId { level: 1, code: 1 };

    fn grid(n: u32, d: u32) -> GridSpec {
        GridSpec::new(n, d).unwrap()
    }

    fn measure(g: GridSpec, m: &[f64]) -> LeafMeasure {
        LeafMeasure::new(g, m.to_vec()).unwrap()
    }

    fn coeffs(g: GridSpec, e: &[(CubeId, f64)]) -> CubeCoefficients {
        CubeCoefficients::from_entries(g, e.iter().copied()).unwrap()
    }

    fn chain(g: GridSpec) -> CubeFamily {
        CubeFamily::from_cubes(g, g.ancestors(g.leaf(0))).unwrap()
    }

    #[test]
    fn carleson_constants() {
        let g = grid(1, 1);
        let mu = measure(g, &[1.0, 1.0]);
        let r = carleson_constant(&coeffs(g, &[(CubeId::ROOT, 1.0), (L0, 1.0)]), &mu);
        assert_eq!(r.constant, 1.0);
        assert!(r.is_finite());
        assert_eq!(r.ratios.len(), 3);
        let r = carleson_constant(&coeffs(g, &[(L1, 1.0)]), &mu);
        assert_eq!(r.value_f64(), 1.0);
        assert_eq!(r.witness, Some(L1));
        assert_eq!(
            carleson_constant(&CubeCoefficients::zero(g), &mu).value_f64(),
            0.0
        );
        let lop = measure(g, &[1.0, 0.0]);
        let r = carleson_constant(&coeffs(g, &[(L1, 1.0)]), &lop);
        assert_eq!(r.unbounded_at, Some(L1));
        assert!(r.value_f64().is_infinite());
    }

    #[test]
    fn family_carleson() {
        let g = grid(1, 1);
        let sigma = measure(g, &[1.0, 1.0]);
        let f = CubeFamily::from_cubes(g, [CubeId::ROOT, L0]).unwrap();
        let check = family_carleson_check(&f, &sigma, &2.0);
        assert!(check.holds);
        assert_eq!(check.worst_ratio, 1.5);
        let root = CubeFamily::from_cubes(g, [CubeId::ROOT]).unwrap();
        assert!(family_carleson_check(&root, &measure(g, &[0.3, 4.0]), &1.0).holds);
    }

    #[test]
    fn chains_with_uniform_mass_are_carleson_and_concentrated_chains_are_not() {
        let g = grid(1, 3);
        let uniform = LeafMeasure::lebesgue(g);
        let check = family_carleson_check(&chain(g), &uniform, &2.0);
        // 1 + 1/2 + 1/4 + 1/8 = 15/8 <= 2
        assert!(check.holds);
        assert!((check.worst_ratio - 1.875).abs() < 1e-15);
        assert!(is_sigma_sparse(&chain(g), &uniform).sparse);

        let mut point = vec![0.0; 8];
        point[0] = 1.0;
        let point = measure(g, &point);
        let check = family_carleson_check(&chain(g), &point, &2.0);
        assert!(!check.holds);
        assert_eq!(check.worst, Some(CubeId::ROOT));
        let sparse = is_sigma_sparse(&chain(g), &point);
        assert!(!sparse.sparse && sparse.agrees());
    }

    #[test]
    fn prefix_selection() {
        let g = grid(1, 1);
        let mu = measure(g, &[1.0, 1.0]);
        let root = FractionalSet::full(g);
        let none = FractionalSet::empty(g);
        let h = prefix_select(&root, &mu, &0.0, &none, false).unwrap();
        assert!(h.fresh.is_empty() && h.extended.is_empty());
        let h = prefix_select(&root, &mu, &1.5, &none, false).unwrap();
        assert_eq!(h.fresh.fractions(), &[1.0, 0.5]);
        let exclude = FractionalSet::from_fractions(g, vec![0.25, 0.5]).unwrap();
        let h = prefix_select(&root, &mu, &1.25, &exclude, false).unwrap();
        assert_eq!(h.fresh, root.minus(&exclude));
        assert_eq!(h.extended, root);
        assert!(matches!(
            prefix_select(&root, &mu, &1.5, &exclude, false),
            Err(Error::MassUnavailable { .. })
        ));
    }

    #[test]
    fn prefix_selection_is_nested_in_excluded_set() {
        let g = grid(1, 2);
        let mu = measure(g, &[1.0, 2.0, 0.5, 1.5]);
        let a = FractionalSet::full(g);
        let small = FractionalSet::from_fractions(g, vec![0.5, 0.0, 0.0, 0.0]).unwrap();
        let large = FractionalSet::from_fractions(g, vec![1.0, 0.25, 0.0, 0.0]).unwrap();
        let h_small = prefix_select(&a, &mu, &1.0, &small, false).unwrap();
        let h_large = prefix_select(&a, &mu, &1.0, &large, false).unwrap();
        assert!(h_small.extended.is_subset_of(&h_large.extended));
        assert_eq!(mu.set_mass(&h_large.fresh), 1.0);
    }

    #[test]
    fn greedy_allocation_examples() {
        let g = grid(1, 1);
        let mu = measure(g, &[1.0, 1.0]);
        let alloc = dor_allocate(
            &coeffs(g, &[(CubeId::ROOT, 1.0), (L0, 1.0)]),
            &mu,
            &1.0,
            false,
        )
        .unwrap();
        assert_eq!(alloc.get(L0).unwrap().fractions(), &[1.0, 0.0]);
        assert_eq!(alloc.get(CubeId::ROOT).unwrap().fractions(), &[0.0, 1.0]);

        let alloc = dor_allocate(&coeffs(g, &[(L1, 1.0)]), &mu, &1.0, false).unwrap();
        assert_eq!(*alloc.get(L1).unwrap(), FractionalSet::cube(g, L1));

        assert!(matches!(
            dor_allocate(&coeffs(g, &[(L1, 1.0)]), &mu, &0.0, false),
            Err(Error::InvalidValue(_))
        ));
    }

    #[test]
    fn point_mass_counterexample() {
        let g = grid(1, 1);
        let mu = measure(g, &[1.0, 0.0]);
        let lambda = coeffs(g, &[(CubeId::ROOT, 0.5), (L0, 0.5)]);
        assert_eq!(carleson_constant(&lambda, &mu).constant, 1.0);
        let alloc = dor_allocate(&lambda, &mu, &1.0, false).unwrap();
        assert_eq!(alloc.get(L0).unwrap().fractions(), &[0.5, 0.0]);
        assert_eq!(alloc.get(CubeId::ROOT).unwrap().fractions(), &[0.5, 0.0]);
        assert_eq!(
            dor_allocate(&lambda, &mu, &1.0, true),
            Err(Error::Infeasible(CubeId::ROOT))
        );
    }

    #[test]
    fn exact_allocation_in_rationals() {
        let g = grid(1, 2);
        let third = |k: i64| Rational::new(k.into(), 3.into());
        let mu = LeafMeasure::new(g, vec![third(1), third(2), third(1), third(5)]).unwrap();
        let lambda = CubeCoefficients::from_entries(
            g,
            [
                (CubeId::ROOT, third(2)),
                (L0, third(1)),
                (g.leaf(3), third(4)),
            ],
        )
        .unwrap();
        let report = carleson_constant(&lambda, &mu);
        let alloc = dor_allocate(&lambda, &mu, &report.constant, false).unwrap();
        for (q, mass) in alloc.masses(&mu) {
            assert_eq!(mass, lambda.get(q).clone() / report.constant.clone());
        }
        assert!(alloc
            .leaf_totals()
            .iter()
            .all(|t| *t <= Rational::from_integer(1.into())));
    }

    #[test]
    fn lambda2_examples() {
        let g = grid(1, 1);
        let mu = measure(g, &[1.0, 1.0]);
        assert_eq!(
            lambda2_bruteforce(&coeffs(g, &[(L0, 1.0)]), &mu).unwrap(),
            1.0
        );
        assert_eq!(
            lambda2_bruteforce(&coeffs(g, &[(CubeId::ROOT, 1.0), (L0, 1.0)]), &mu).unwrap(),
            1.0
        );
        assert_eq!(
            lambda2_bruteforce(&CubeCoefficients::zero(g), &mu).unwrap(),
            0.0
        );
        let big = grid(1, 4);
        assert!(matches!(
            lambda2_bruteforce(&CubeCoefficients::zero(big), &LeafMeasure::lebesgue(big)),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn sparse_examples() {
        let g = grid(1, 1);
        let sigma = measure(g, &[1.0, 1.0]);
        let f = CubeFamily::from_cubes(g, [CubeId::ROOT, L0]).unwrap();
        let check = is_sigma_sparse(&f, &sigma);
        assert!(check.sparse && check.agrees());
        let witness = check.witness.unwrap();
        assert_eq!(witness.get(L0).unwrap().fractions(), &[0.5, 0.0]);
        assert_eq!(sigma.set_mass(witness.get(CubeId::ROOT).unwrap()), 1.0);
        let single = CubeFamily::from_cubes(g, [L1]).unwrap();
        assert!(is_sigma_sparse(&single, &sigma).sparse);
    }

    #[test]
    fn family_navigation() {
        let g = grid(1, 1);
        let f = CubeFamily::from_cubes(g, [CubeId::ROOT, L0]).unwrap();
        assert_eq!(pi_family(&f, L0), Ok(L0));
        assert_eq!(pi_family(&f, L1), Ok(CubeId::ROOT));
        let only_left = CubeFamily::from_cubes(g, [L0]).unwrap();
        assert_eq!(pi_family(&only_left, L1), Err(Error::NotCovered(L1)));

        assert_eq!(family_children(&f, CubeId::ROOT), vec![L0]);
        assert_eq!(
            family_exclusive_set(&f, CubeId::ROOT).fractions(),
            &[0.0, 1.0]
        );
        assert!(family_children(&f, L0).is_empty());
        assert_eq!(family_exclusive_set(&f, L0), FractionalSet::cube(g, L0));

        let g2 = grid(1, 2);
        let l00 = CubeId { level: 2, code: 0 };
        let nested = CubeFamily::from_cubes(g2, [CubeId::ROOT, L0, l00]).unwrap();
        assert_eq!(family_children(&nested, L0), vec![l00]);
        assert_eq!(family_children(&nested, CubeId::ROOT), vec![L0]);
    }

    #[test]
    fn stopping_cubes() {
        let g = grid(1, 1);
        let sigma = measure(g, &[1.0, 1.0]);
        let root_only = CubeFamily::from_cubes(g, [CubeId::ROOT]).unwrap();
        assert_eq!(
            stopping_family(&LeafFunction::constant(g, 3.0), &sigma, 2.0).unwrap(),
            root_only
        );
        for f in [[10.0, 1.0], [100.0, 1.0], [1000.0, 1.0]] {
            let f = LeafFunction::nonneg(g, f.to_vec()).unwrap();
            assert_eq!(stopping_family(&f, &sigma, 2.0).unwrap(), root_only);
        }
        let skewed = measure(g, &[1.0, 9.0]);
        let f = LeafFunction::nonneg(g, vec![1000.0, 1.0]).unwrap();
        assert_eq!(
            stopping_family(&f, &skewed, 2.0).unwrap(),
            CubeFamily::from_cubes(g, [CubeId::ROOT, L0]).unwrap()
        );
        let empty = LeafMeasure::<f64>::zero(g);
        assert_eq!(
            stopping_family(&f, &empty, 2.0),
            Err(Error::ZeroMassCube(CubeId::ROOT))
        );
    }

    #[test]
    fn admissible_components() {
        let g = grid(1, 2);
        let f = CubeFamily::from_cubes(g, [CubeId::ROOT, L0]).unwrap();
        let ok = LeafFunction::nonneg(g, vec![2.0, 2.0, 1.0, 3.0]).unwrap();
        assert!(is_admissible_component(&f, CubeId::ROOT, &ok));
        let bad = LeafFunction::nonneg(g, vec![2.0, 1.0, 1.0, 3.0]).unwrap();
        assert!(!is_admissible_component(&f, CubeId::ROOT, &bad));
        let outside = LeafFunction::nonneg(g, vec![1.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(!is_admissible_component(&f, L0, &outside));
    }
}
