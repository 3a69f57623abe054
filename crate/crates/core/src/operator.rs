//! The positive dyadic operator `T f = (λ_Q ∫_Q f dσ · χ_Q)_Q`, its formal
//! adjoint, and the mixed and weak norms it is measured in.

use crate::error::{Error, Result};
use crate::grid::{CubeId, GridSpec};
use crate::measure::{lp_norm, FractionalSet, LeafFunction, LeafMeasure, Scalar};

/// Nonnegative coefficients `(λ_Q)` indexed by every cube of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeCoefficients<S = f64> {
    grid: GridSpec,
    values: Vec<S>,
}

impl<S: Scalar> CubeCoefficients<S> {
    pub fn zero(grid: GridSpec) -> Self {
        CubeCoefficients {
            grid,
            values: vec![S::zero(); grid.num_cubes()],
        }
    }

    /// Coefficients from sparse entries; repeated cubes are summed.
    pub fn from_entries(
        grid: GridSpec,
        entries: impl IntoIterator<Item = (CubeId, S)>,
    ) -> Result<Self> {
        let mut out = Self::zero(grid);
        for (cube, value) in entries {
            if !grid.contains_cube(cube) {
                return Err(Error::InvalidCube(cube.to_string()));
            }
            if !(value >= S::zero()) || !value.to_f64_lossy().is_finite() {
                return Err(Error::InvalidValue(format!(
                    "coefficient {value:?} at {cube} must be finite and nonnegative"
                )));
            }
            let slot = &mut out.values[grid.linear_index(cube)];
            *slot = slot.clone() + value;
        }
        Ok(out)
    }

    /// Dense coefficients in [`GridSpec::enumerate_cubes`] order.
    pub fn from_dense(grid: GridSpec, values: Vec<S>) -> Result<Self> {
        if values.len() != grid.num_cubes() {
            return Err(Error::LengthMismatch {
                expected: grid.num_cubes(),
                actual: values.len(),
            });
        }
        Self::from_entries(grid, grid.enumerate_cubes().zip(values))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn get(&self, cube: CubeId) -> &S {
        &self.values[self.grid.linear_index(cube)]
    }

    pub fn dense(&self) -> &[S] {
        &self.values
    }

    /// Nonzero entries in enumeration order.
    pub fn support(&self) -> impl Iterator<Item = (CubeId, &S)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, v)| (self.grid.cube_at(i), v))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    /// Zeroes every coefficient on a cube of zero `sigma`-mass.
    pub fn with_zero_mass_convention(&self, sigma: &LeafMeasure<S>) -> Self {
        let values = self
            .values
            .iter()
            .zip(sigma.cube_masses())
            .map(|(v, m)| if m.is_zero() { S::zero() } else { v.clone() })
            .collect();
        CubeCoefficients {
            grid: self.grid,
            values,
        }
    }

    /// `Σ_{Q ⊆ P} λ_Q` for every cube `P`, indexed linearly.
    pub fn subtree_sums(&self) -> Vec<S> {
        let mut sums = self.values.clone();
        let branching = self.grid.branching();
        for level in (0..self.grid.depth()).rev() {
            let offset = self.grid.level_offset(level);
            let child_offset = self.grid.level_offset(level + 1);
            for code in 0..self.grid.cubes_at_level(level) {
                let first = child_offset + code * branching;
                let mut acc = sums[offset + code].clone();
                for child in first..first + branching {
                    acc = acc + sums[child].clone();
                }
                sums[offset + code] = acc;
            }
        }
        sums
    }
}

impl CubeCoefficients<f64> {
    pub fn scaled(&self, t: f64) -> Self {
        CubeCoefficients {
            grid: self.grid,
            values: self.values.iter().map(|v| v * t).collect(),
        }
    }

    pub fn to_rational(&self) -> CubeCoefficients<crate::measure::Rational> {
        CubeCoefficients {
            grid: self.grid,
            values: self
                .values
                .iter()
                .map(|&v| crate::measure::Rational::from_float(v).expect("finite coefficient"))
                .collect(),
        }
    }
}

/// A vector function `(v_Q χ_Q)_Q`, one real value per cube.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeVector {
    grid: GridSpec,
    values: Vec<f64>,
}

impl CubeVector {
    pub fn zero(grid: GridSpec) -> Self {
        CubeVector {
            grid,
            values: vec![0.0; grid.num_cubes()],
        }
    }

    pub fn from_entries(
        grid: GridSpec,
        entries: impl IntoIterator<Item = (CubeId, f64)>,
    ) -> Result<Self> {
        let mut out = Self::zero(grid);
        for (cube, value) in entries {
            if !grid.contains_cube(cube) {
                return Err(Error::InvalidCube(cube.to_string()));
            }
            if !value.is_finite() {
                return Err(Error::InvalidValue(format!(
                    "value at {cube} is not finite"
                )));
            }
            out.values[grid.linear_index(cube)] += value;
        }
        Ok(out)
    }

    pub(crate) fn from_dense_unchecked(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.num_cubes());
        CubeVector { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn get(&self, cube: CubeId) -> f64 {
        self.values[self.grid.linear_index(cube)]
    }

    pub fn dense(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> impl Iterator<Item = (CubeId, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (self.grid.cube_at(i), *v))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, t: f64) -> Self {
        CubeVector {
            grid: self.grid,
            values: self.values.iter().map(|v| v * t).collect(),
        }
    }

    /// Keeps only the entries whose cube satisfies `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(CubeId) -> bool) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| if keep(self.grid.cube_at(i)) { v } else { 0.0 })
            .collect();
        CubeVector {
            grid: self.grid,
            values,
        }
    }
}

/// Hölder conjugate, with `1 ↔ ∞`.
pub fn conjugate(x: f64) -> f64 {
    if x.is_infinite() {
        1.0
    } else if x == 1.0 {
        f64::INFINITY
    } else {
        x / (x - 1.0)
    }
}

/// Exponents `(p, q, s)` with `1 < q < p < ∞` and `q ≤ s ≤ ∞`.
/// `s = f64::INFINITY` is the maximal-function endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentTriple {
    pub p: f64,
    pub q: f64,
    pub s: f64,
}

impl ExponentTriple {
    pub fn new(p: f64, q: f64, s: f64) -> Result<Self> {
        if !(p.is_finite() && q > 1.0 && q < p) {
            return Err(Error::InvalidExponents(format!(
                "need 1 < q < p < inf, got p = {p}, q = {q}"
            )));
        }
        if s.is_nan() || s < q {
            return Err(Error::InvalidExponents(format!(
                "need q <= s <= inf, got s = {s} with q = {q}"
            )));
        }
        Ok(ExponentTriple { p, q, s })
    }

    /// `1/r = 1/q - 1/p`.
    pub fn r(&self) -> f64 {
        1.0 / (1.0 / self.q - 1.0 / self.p)
    }

    pub fn p_conj(&self) -> f64 {
        conjugate(self.p)
    }

    pub fn q_conj(&self) -> f64 {
        conjugate(self.q)
    }

    pub fn s_conj(&self) -> f64 {
        conjugate(self.s)
    }

    /// `s / q` (infinite when `s` is).
    pub fn s_tilde(&self) -> f64 {
        self.s / self.q
    }

    pub fn p_tilde(&self) -> f64 {
        self.p / self.q
    }

    pub fn p_tilde_conj(&self) -> f64 {
        conjugate(self.p_tilde())
    }
}

/// `v_Q = λ_Q ∫_Q f dσ`. Requires `f ≥ 0`; see [`apply_t_signed`].
pub fn apply_t(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    f: &LeafFunction,
) -> Result<CubeVector> {
    if !f.is_nonneg() {
        return Err(Error::InvalidValue(
            "T is evaluated on nonnegative functions".into(),
        ));
    }
    Ok(apply_t_signed(lambda, sigma, f))
}

/// [`apply_t`] without the sign restriction, for duality checks.
pub fn apply_t_signed(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    f: &LeafFunction,
) -> CubeVector {
    let integrals = f.cube_integrals(sigma);
    let values = lambda
        .dense()
        .iter()
        .zip(&integrals)
        .map(|(l, i)| if *l == 0.0 { 0.0 } else { l * i })
        .collect();
    CubeVector::from_dense_unchecked(*lambda.grid(), values)
}

/// `T_P f`: the components of `T f` on cubes `Q ⊆ P`.
pub fn apply_t_local(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    f: &LeafFunction,
    local: CubeId,
) -> Result<CubeVector> {
    let grid = *lambda.grid();
    Ok(apply_t(lambda, sigma, f)?.filtered(|q| grid.is_subcube(q, local)))
}

/// Sums `per_cube[Q]` over the ancestors of every leaf.
fn ancestor_sums(grid: &GridSpec, per_cube: &[f64]) -> Vec<f64> {
    let mut acc = per_cube.to_vec();
    let branching = grid.branching();
    for level in 0..grid.depth() {
        let offset = grid.level_offset(level);
        let child_offset = grid.level_offset(level + 1);
        for code in 0..grid.cubes_at_level(level) {
            let above = acc[offset + code];
            let first = child_offset + code * branching;
            for slot in &mut acc[first..first + branching] {
                *slot += above;
            }
        }
    }
    acc.split_off(grid.level_offset(grid.depth()))
}

/// Maximum of `per_cube[Q]` over the ancestors of every leaf.
fn ancestor_max(grid: &GridSpec, per_cube: &[f64]) -> Vec<f64> {
    let mut acc = per_cube.to_vec();
    let branching = grid.branching();
    for level in 0..grid.depth() {
        let offset = grid.level_offset(level);
        let child_offset = grid.level_offset(level + 1);
        for code in 0..grid.cubes_at_level(level) {
            let above = acc[offset + code];
            let first = child_offset + code * branching;
            for slot in &mut acc[first..first + branching] {
                *slot = slot.max(above);
            }
        }
    }
    acc.split_off(grid.level_offset(grid.depth()))
}

/// `(T* g)(ℓ) = Σ_{Q ∋ ℓ} λ_Q g_Q μ(Q)`.
pub fn apply_t_star(lambda: &CubeCoefficients, mu: &LeafMeasure, g: &CubeVector) -> LeafFunction {
    let grid = *lambda.grid();
    let per_cube: Vec<f64> = lambda
        .dense()
        .iter()
        .zip(g.dense())
        .zip(mu.cube_masses())
        .map(|((l, g), m)| l * g * m)
        .collect();
    LeafFunction::signed(grid, ancestor_sums(&grid, &per_cube))
        .expect("finite inputs give finite output")
}

/// Pointwise `(Σ_{Q ∋ ℓ} |v_Q|^s)^{1/s}` (the sup when `s` is infinite).
pub fn leaf_ls_aggregate(v: &CubeVector, s: f64) -> Vec<f64> {
    let grid = v.grid();
    if s.is_infinite() {
        let abs: Vec<f64> = v.dense().iter().map(|x| x.abs()).collect();
        return ancestor_max(grid, &abs);
    }
    // Factor out the largest entry before taking powers.
    let scale = v.dense().iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if scale == 0.0 {
        return vec![0.0; grid.num_leaves()];
    }
    let powered: Vec<f64> = v
        .dense()
        .iter()
        .map(|x| (x.abs() / scale).powf(s))
        .collect();
    ancestor_sums(grid, &powered)
        .into_iter()
        .map(|t| scale * t.powf(1.0 / s))
        .collect()
}

/// `‖v‖_{L^q_{ℓ^s}(μ)}` for explicit `q` and `s`.
pub fn mixed_norm_with(v: &CubeVector, q: f64, s: f64, mu: &LeafMeasure) -> f64 {
    lp_norm(&leaf_ls_aggregate(v, s), q, mu.masses())
}

/// `‖v‖_{L^q_{ℓ^s}(μ)}` with the exponents of `e`.
pub fn mixed_norm(v: &CubeVector, e: &ExponentTriple, mu: &LeafMeasure) -> f64 {
    mixed_norm_with(v, e.q, e.s, mu)
}

/// `sup_{t > 0} t^q μ(|h| > t)`, computed over the finitely many levels of `|h|`.
pub fn weak_norm(h: &LeafFunction, q: f64, mu: &LeafMeasure) -> f64 {
    let mut levels: Vec<(f64, f64)> = h
        .values()
        .iter()
        .zip(mu.masses())
        .filter(|(v, m)| **m > 0.0 && **v != 0.0)
        .map(|(v, m)| (v.abs(), *m))
        .collect();
    levels.sort_by(|a, b| b.0.total_cmp(&a.0));
    // Approaching each level value from below, the superlevel set is
    // everything at or above it.
    let mut mass_above = 0.0;
    let mut best = 0.0f64;
    let mut i = 0;
    while i < levels.len() {
        let level = levels[i].0;
        while i < levels.len() && levels[i].0 == level {
            mass_above += levels[i].1;
            i += 1;
        }
        best = best.max(level.powf(q) * mass_above);
    }
    best
}

/// `μ(E)^{(α-q)/(αq)} (∫_E |h|^α dμ)^{1/α}`.
pub fn kolmogorov_value(
    h: &LeafFunction,
    q: f64,
    alpha: f64,
    mu: &LeafMeasure,
    set: &FractionalSet,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < q) {
        return Err(Error::InvalidExponents(format!(
            "need 0 < alpha < q, got alpha = {alpha}, q = {q}"
        )));
    }
    let mass = mu.set_mass(set);
    if mass <= 0.0 {
        return Err(Error::EmptySet);
    }
    let integral: f64 = h
        .values()
        .iter()
        .zip(mu.masses())
        .zip(set.fractions())
        .map(|((v, m), e)| v.abs().powf(alpha) * m * e)
        .sum();
    Ok(mass.powf((alpha - q) / (alpha * q)) * integral.powf(1.0 / alpha))
}

/// Largest [`kolmogorov_value`] over the superlevel sets `{|h| ≥ t}`.
pub fn kolmogorov_level_sup(h: &LeafFunction, q: f64, alpha: f64, mu: &LeafMeasure) -> Result<f64> {
    let grid = *h.grid();
    let mut levels: Vec<f64> = h
        .values()
        .iter()
        .zip(mu.masses())
        .filter(|(_, m)| **m > 0.0)
        .map(|(v, _)| v.abs())
        .collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    let mut best = 0.0f64;
    for t in levels {
        let fractions = h
            .values()
            .iter()
            .map(|v| if v.abs() >= t { 1.0 } else { 0.0 })
            .collect();
        let set = FractionalSet::from_fractions(grid, fractions)?;
        best = best.max(kolmogorov_value(h, q, alpha, mu, &set)?);
    }
    Ok(best)
}

/// `ess sup_μ (Σ_{Q ∋ ℓ} |g_Q|^{s'})^{1/s'}` for explicit `s'`.
pub fn linf_ls_norm_with(g: &CubeVector, s_conj: f64, mu: &LeafMeasure) -> f64 {
    lp_norm(&leaf_ls_aggregate(g, s_conj), f64::INFINITY, mu.masses())
}

/// `‖g‖_{L^∞_{ℓ^{s'}}(μ)}`.
pub fn linf_ls_norm(g: &CubeVector, e: &ExponentTriple, mu: &LeafMeasure) -> f64 {
    linf_ls_norm_with(g, e.s_conj(), mu)
}

/// `Σ_Q λ_Q (∫_Q f dσ)(∫_Q g_Q dμ)`.
pub fn pairing(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    f: &LeafFunction,
    g: &CubeVector,
) -> f64 {
    let integrals = f.cube_integrals(sigma);
    lambda
        .dense()
        .iter()
        .zip(&integrals)
        .zip(g.dense())
        .zip(mu.cube_masses())
        .map(|(((l, i), g), m)| l * i * g * m)
        .sum()
}

/// `Σ_Q v_Q g_Q μ(Q)`.
pub fn cube_pairing(v: &CubeVector, g: &CubeVector, mu: &LeafMeasure) -> f64 {
    v.dense()
        .iter()
        .zip(g.dense())
        .zip(mu.cube_masses())
        .map(|((v, g), m)| v * g * m)
        .sum()
}

/// `∫ f h dσ`.
pub fn function_pairing(f: &LeafFunction, h: &LeafFunction, sigma: &LeafMeasure) -> f64 {
    f.values()
        .iter()
        .zip(h.values())
        .zip(sigma.masses())
        .map(|((f, h), m)| f * h * m)
        .sum()
}

/// `sup_Q ρ_Q χ_Q` as a leaf function.
pub fn maximal_multiplier(rho: &CubeCoefficients) -> LeafFunction {
    let grid = *rho.grid();
    LeafFunction::nonneg(grid, ancestor_max(&grid, rho.dense())).expect("nonnegative maxima")
}

/// `‖(Σ_Q λ_Q^s σ(Q)^s ρ_Q^s χ_Q)^{1/s}‖_{L^q(μ)}`.
pub fn multiplier_lhs(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    rho: &CubeCoefficients,
    e: &ExponentTriple,
    mu: &LeafMeasure,
) -> f64 {
    let values = lambda
        .dense()
        .iter()
        .zip(sigma.cube_masses())
        .zip(rho.dense())
        .map(|((l, m), r)| l * m * r)
        .collect();
    mixed_norm(
        &CubeVector::from_dense_unchecked(*lambda.grid(), values),
        e,
        mu,
    )
}

/// Coefficients `λ_Q^s σ(Q)^{s-1}` of the linear operator that the
/// `s ≤ q` case reduces to; cubes with `σ(Q) = 0` get 0.
pub fn reduce_to_linear(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    s: f64,
) -> Result<CubeCoefficients> {
    if !(s >= 1.0 && s.is_finite()) {
        return Err(Error::InvalidExponents(format!(
            "need 1 <= s < inf, got {s}"
        )));
    }
    let grid = *lambda.grid();
    let values = lambda
        .dense()
        .iter()
        .zip(sigma.cube_masses())
        .map(|(&l, &m)| {
            if m == 0.0 || l == 0.0 {
                0.0
            } else {
                l.powf(s) * m.powf(s - 1.0)
            }
        })
        .collect();
    CubeCoefficients::from_dense(grid, values)
}

/// `‖Σ_Q λ_Q^q σ(Q)^{q-1} μ(Q) χ_Q‖_{L^{(p/q)'}(σ)}`, the exact dual
/// condition for `s = q`.
pub fn s_eq_q_condition(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    p: f64,
    q: f64,
) -> f64 {
    let grid = *lambda.grid();
    let per_cube: Vec<f64> = lambda
        .dense()
        .iter()
        .zip(sigma.cube_masses())
        .zip(mu.cube_masses())
        .map(|((&l, &sm), &mm)| {
            if l == 0.0 || sm == 0.0 {
                0.0
            } else {
                l.powf(q) * sm.powf(q - 1.0) * mm
            }
        })
        .collect();
    let leaf = ancestor_sums(&grid, &per_cube);
    lp_norm(&leaf, conjugate(p / q), sigma.masses())
}

pub(crate) fn leaf_sums_over_ancestors(grid: &GridSpec, per_cube: &[f64]) -> Vec<f64> {
    ancestor_sums(grid, per_cube)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const L0: CubeId = CubeId { level: 1, code: 0 };
    const L1: CubeId = CubeId { level: 1, code: 1 };

    fn instance_a() -> (GridSpec, CubeCoefficients, LeafMeasure) {
        let g = GridSpec::new(1, 1).unwrap();
        let lambda = CubeCoefficients::from_entries(g, [(CubeId::ROOT, 1.0)]).unwrap();
        let sigma = LeafMeasure::new(g, vec![1.0, 1.0]).unwrap();
        (g, lambda, sigma)
    }

    fn e(p: f64, q: f64, s: f64) -> ExponentTriple {
        ExponentTriple::new(p, q, s).unwrap()
    }

    #[test]
    fn exponent_validation_and_derived_values() {
        assert!(ExponentTriple::new(2.0, 3.0, 4.0).is_err());
        assert!(ExponentTriple::new(3.0, 1.0, 4.0).is_err());
        assert!(ExponentTriple::new(3.0, 2.0, 1.5).is_err());
        let t = e(3.0, 2.0, 4.0);
        assert_relative_eq!(t.r(), 6.0, max_relative = 1e-14);
        assert_relative_eq!(t.p_conj(), 1.5);
        assert_relative_eq!(t.s_conj(), 4.0 / 3.0);
        assert_relative_eq!(t.s_tilde(), 2.0);
        assert_relative_eq!(t.p_tilde_conj(), 3.0, max_relative = 1e-14);
        let inf = e(3.0, 2.0, f64::INFINITY);
        assert_eq!(inf.s_conj(), 1.0);
        assert!(inf.s_tilde().is_infinite());
    }

    #[test]
    fn t_on_instance_a() {
        let (g, lambda, sigma) = instance_a();
        let v = apply_t(&lambda, &sigma, &LeafFunction::constant(g, 1.0)).unwrap();
        assert_eq!(v.support().collect::<Vec<_>>(), vec![(CubeId::ROOT, 2.0)]);
        let zero = apply_t(
            &CubeCoefficients::zero(g),
            &sigma,
            &LeafFunction::constant(g, 1.0),
        )
        .unwrap();
        assert!(zero.is_zero());
        assert!(apply_t(&lambda, &sigma, &LeafFunction::zero(g))
            .unwrap()
            .is_zero());
        let signed = LeafFunction::signed(g, vec![1.0, -1.0]).unwrap();
        assert!(apply_t(&lambda, &sigma, &signed).is_err());
    }

    #[test]
    fn local_t() {
        let g = GridSpec::new(1, 2).unwrap();
        let lambda = CubeCoefficients::from_entries(g, [(CubeId::ROOT, 1.0), (L0, 1.0)]).unwrap();
        let sigma = LeafMeasure::new(g, vec![1.0; 4]).unwrap();
        let f = LeafFunction::constant(g, 1.0);
        let local = apply_t_local(&lambda, &sigma, &f, L0).unwrap();
        assert_eq!(local.support().collect::<Vec<_>>(), vec![(L0, 2.0)]);
        let whole = apply_t_local(&lambda, &sigma, &f, CubeId::ROOT).unwrap();
        assert_eq!(whole, apply_t(&lambda, &sigma, &f).unwrap());
        assert!(apply_t_local(&lambda, &sigma, &f, g.leaf(3))
            .unwrap()
            .is_zero());
    }

    #[test]
    fn adjoint_on_instance_a() {
        let (g, lambda, mu) = instance_a();
        let gv = CubeVector::from_entries(g, [(CubeId::ROOT, 1.0)]).unwrap();
        assert_eq!(apply_t_star(&lambda, &mu, &gv).values(), &[2.0, 2.0]);
        assert!(apply_t_star(&lambda, &mu, &CubeVector::zero(g)).is_zero());
        assert!(apply_t_star(&CubeCoefficients::zero(g), &mu, &gv).is_zero());
    }

    #[test]
    fn mixed_norm_examples() {
        let (g, _, mu) = instance_a();
        let v = CubeVector::from_entries(g, [(CubeId::ROOT, 2.0)]).unwrap();
        assert_relative_eq!(
            mixed_norm(&v, &e(3.0, 2.0, 2.0), &mu),
            2.0 * 2f64.sqrt(),
            max_relative = 1e-15
        );
        let leaf = CubeVector::from_entries(g, [(L1, 1.0)]).unwrap();
        for (q, s) in [(1.5, 2.0), (2.0, 5.0), (2.5, f64::INFINITY)] {
            assert_relative_eq!(mixed_norm_with(&leaf, q, s, &mu), 1.0, max_relative = 1e-15);
        }
        assert_eq!(
            mixed_norm(&CubeVector::zero(g), &e(3.0, 2.0, 2.0), &mu),
            0.0
        );
    }

    #[test]
    fn weak_norm_examples() {
        let (g, _, mu) = instance_a();
        let c = LeafFunction::constant(g, 3.0);
        assert_relative_eq!(weak_norm(&c, 2.0, &mu), 18.0);
        let h = LeafFunction::nonneg(g, vec![2.0, 1.0]).unwrap();
        assert_relative_eq!(weak_norm(&h, 2.0, &mu), 4.0);
        assert_eq!(weak_norm(&LeafFunction::zero(g), 2.0, &mu), 0.0);
    }

    #[test]
    fn kolmogorov_examples() {
        let g = GridSpec::new(1, 1).unwrap();
        let unit = LeafMeasure::new(g, vec![0.5, 0.5]).unwrap();
        let full = FractionalSet::full(g);
        for (q, a) in [(2.0, 1.0), (3.0, 2.5), (1.5, 0.2)] {
            let v = kolmogorov_value(&LeafFunction::constant(g, 1.0), q, a, &unit, &full).unwrap();
            assert_relative_eq!(v, 1.0, max_relative = 1e-14);
        }
        let mu = LeafMeasure::new(g, vec![1.0, 1.0]).unwrap();
        let h = LeafFunction::nonneg(g, vec![2.0, 1.0]).unwrap();
        let v = kolmogorov_value(&h, 2.0, 1.0, &mu, &full).unwrap();
        assert_relative_eq!(v, 3.0 / 2f64.sqrt(), max_relative = 1e-14);
        let null = LeafMeasure::new(g, vec![0.0, 0.0]).unwrap();
        assert_eq!(
            kolmogorov_value(&h, 2.0, 1.0, &null, &full),
            Err(Error::EmptySet)
        );
    }

    #[test]
    fn linf_ls_examples() {
        let (g, _, mu) = instance_a();
        let root = CubeVector::from_entries(g, [(CubeId::ROOT, 1.0)]).unwrap();
        for s in [1.5, 2.0, f64::INFINITY] {
            assert_relative_eq!(linf_ls_norm_with(&root, conjugate(s), &mu), 1.0);
        }
        let two = CubeVector::from_entries(g, [(CubeId::ROOT, 1.0), (L0, 1.0)]).unwrap();
        assert_relative_eq!(
            linf_ls_norm_with(&two, 2.0, &mu),
            2f64.sqrt(),
            max_relative = 1e-15
        );
        let lop = LeafMeasure::new(g, vec![0.0, 1.0]).unwrap();
        let g2 = CubeVector::from_entries(g, [(L0, 7.0), (L1, 1.0)]).unwrap();
        assert_eq!(linf_ls_norm_with(&g2, 1.0, &lop), 1.0);
    }

    #[test]
    fn pairing_examples() {
        let (g, lambda, sigma) = instance_a();
        let f = LeafFunction::constant(g, 1.0);
        let gv = CubeVector::from_entries(g, [(CubeId::ROOT, 1.0)]).unwrap();
        assert_eq!(pairing(&lambda, &sigma, &sigma, &f, &gv), 4.0);
        assert_eq!(
            pairing(&lambda, &sigma, &sigma, &LeafFunction::zero(g), &gv),
            0.0
        );
        assert_eq!(
            pairing(&lambda, &sigma, &sigma, &f, &CubeVector::zero(g)),
            0.0
        );
        assert_eq!(
            pairing(&CubeCoefficients::zero(g), &sigma, &sigma, &f, &gv),
            0.0
        );
    }

    #[test]
    fn multipliers() {
        let (g, lambda, sigma) = instance_a();
        let rho = CubeCoefficients::from_entries(g, [(CubeId::ROOT, 1.0), (L0, 2.0)]).unwrap();
        assert_eq!(maximal_multiplier(&rho).values(), &[2.0, 1.0]);
        assert!(maximal_multiplier(&CubeCoefficients::zero(g)).is_zero());
        let rho = CubeCoefficients::from_entries(g, [(L1, 3.0)]).unwrap();
        assert_eq!(maximal_multiplier(&rho).values(), &[0.0, 3.0]);

        let rho = CubeCoefficients::from_entries(g, [(CubeId::ROOT, 1.0)]).unwrap();
        let t = e(3.0, 2.0, 2.0);
        assert_relative_eq!(
            multiplier_lhs(&lambda, &sigma, &rho, &t, &sigma),
            2.0 * 2f64.sqrt(),
            max_relative = 1e-15
        );
        assert_eq!(
            multiplier_lhs(&lambda, &sigma, &CubeCoefficients::zero(g), &t, &sigma),
            0.0
        );
        assert_eq!(
            multiplier_lhs(&CubeCoefficients::zero(g), &sigma, &rho, &t, &sigma),
            0.0
        );
    }

    #[test]
    fn linear_reduction() {
        let (g, lambda, sigma) = instance_a();
        let mixed = CubeCoefficients::from_entries(g, [(CubeId::ROOT, 0.7), (L1, 2.5)]).unwrap();
        assert_eq!(reduce_to_linear(&mixed, &sigma, 1.0).unwrap(), mixed);
        let r = reduce_to_linear(&lambda, &sigma, 2.0).unwrap();
        assert_eq!(*r.get(CubeId::ROOT), 2.0);
        assert!(reduce_to_linear(&CubeCoefficients::zero(g), &sigma, 2.0)
            .unwrap()
            .is_zero());
        let lop = LeafMeasure::new(g, vec![1.0, 0.0]).unwrap();
        let on_null = CubeCoefficients::from_entries(g, [(L1, 1.0)]).unwrap();
        assert!(reduce_to_linear(&on_null, &lop, 2.0).unwrap().is_zero());
        assert!(reduce_to_linear(&lambda, &sigma, f64::INFINITY).is_err());
    }

    #[test]
    fn s_equals_q_dual_condition() {
        let (g, lambda, sigma) = instance_a();
        assert_relative_eq!(
            s_eq_q_condition(&lambda, &sigma, &sigma, 3.0, 2.0),
            4.0 * 2f64.powf(1.0 / 3.0),
            max_relative = 1e-14
        );
        assert_eq!(
            s_eq_q_condition(&CubeCoefficients::zero(g), &sigma, &sigma, 3.0, 2.0),
            0.0
        );
        let lop = LeafMeasure::new(g, vec![1.0, 0.0]).unwrap();
        let on_other = CubeCoefficients::from_entries(g, [(L1, 1.0)]).unwrap();
        assert_eq!(s_eq_q_condition(&on_other, &lop, &sigma, 3.0, 2.0), 0.0);
    }
}
