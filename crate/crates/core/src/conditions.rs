//! Testing conditions for the two-weight bound
//! `‖T f‖_{L^q_{ℓ^s}(μ)} ≤ C ‖f‖_{L^p(σ)}`, and estimators for the best
//! constants they quantify over.
//!
//! The conditions are suprema over sparse families, weights or disjoint
//! allocations. Evaluators take an explicit certificate; the `*_constant`,
//! `*_sup` and [`operator_norm`] routines search for good certificates by
//! seeded ascent and, on tiny instances, by exhaustive grids. Every
//! [`ConditionReport`] records how its value was obtained and replays to it.

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{CubeId, GridSpec};
use crate::measure::{
    cube_sums, lp_norm, DisjointAllocation, FractionalSet, LeafFunction, LeafMeasure,
};
use crate::operator::{
    apply_t, apply_t_star, conjugate, leaf_sums_over_ancestors, linf_ls_norm_with, mixed_norm,
    mixed_norm_with, CubeCoefficients, CubeVector, ExponentTriple,
};
use crate::sparse::{is_sigma_sparse, pi_family, CubeFamily};

/// How a reported value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Evaluated at a caller-supplied certificate.
    Given,
    /// The quantity does not depend on the certificate.
    Exact,
    /// Best point found by seeded ascent.
    Ascent,
    /// Best point of an exhaustive grid search.
    Bruteforce,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Given => "given",
            Method::Exact => "exact",
            Method::Ascent => "ascent",
            Method::Bruteforce => "bruteforce",
        }
    }
}

/// The argument at which a reported value is attained.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    None,
    /// A test function `f ≥ 0` on the leaves.
    Function(LeafFunction),
    /// Weights `β_F` on family cubes.
    Weights(Vec<(CubeId, f64)>),
    /// Pairwise disjoint sets `E_Q ⊆ Q`.
    Allocation(DisjointAllocation),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub value: f64,
    pub certificate: Certificate,
    pub method: Method,
    pub seed: Option<u64>,
}

/// Knobs for the randomized searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentConfig {
    /// Random starting points tried besides the deterministic ones.
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Iterations over which progress is measured.
    pub window: usize,
    /// Stop once the relative gain over `window` iterations drops below this.
    pub tolerance: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig {
            restarts: 8,
            seed: 0,
            max_iterations: 5000,
            window: 50,
            tolerance: 1e-8,
        }
    }
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Keeps the best `(value, payload)`; earlier entries win ties.
fn best_of<T>(candidates: impl IntoIterator<Item = (f64, T)>) -> Option<(f64, T)> {
    candidates
        .into_iter()
        .fold(None, |best, (v, t)| match best {
            Some((bv, bt)) if bv >= v || v.is_nan() => Some((bv, bt)),
            _ => Some((v, t)),
        })
}

fn has_converged(history: &[f64], config: &AscentConfig) -> bool {
    let n = history.len();
    if n <= config.window {
        return false;
    }
    let (old, new) = (history[n - 1 - config.window], history[n - 1]);
    new - old <= config.tolerance * new.abs()
}

/// For each leaf, the deepest ancestor with the largest value.
fn ancestor_argmax(grid: &GridSpec, per_cube: &[f64]) -> Vec<(f64, usize)> {
    let mut best: Vec<(f64, usize)> = vec![(per_cube[0], 0)];
    for level in 1..=grid.depth() {
        let offset = grid.level_offset(level);
        let mut next = Vec::with_capacity(grid.cubes_at_level(level));
        for code in 0..grid.cubes_at_level(level) {
            let (above, at) = best[code >> grid.dim()];
            let here = per_cube[offset + code];
            next.push(if here >= above {
                (here, offset + code)
            } else {
                (above, at)
            });
        }
        best = next;
    }
    best
}

/// A direction of steepest increase of `v ↦ ‖v‖_{L^q_{ℓ^s}(μ)}` at `v ≥ 0`,
/// up to a positive factor. Only the direction is used by the ascents.
fn mixed_norm_direction(grid: &GridSpec, v: &[f64], q: f64, s: f64, mu: &LeafMeasure) -> Vec<f64> {
    let scale = v.iter().fold(0.0f64, |a, x| a.max(*x));
    let mut direction = vec![0.0; v.len()];
    if scale == 0.0 {
        return direction;
    }
    let normalized: Vec<f64> = v.iter().map(|x| x / scale).collect();
    if s.is_infinite() {
        for ((peak, at), m) in ancestor_argmax(grid, &normalized)
            .into_iter()
            .zip(mu.masses())
        {
            if peak > 0.0 {
                direction[at] += m * peak.powf(q - 1.0);
            }
        }
        return direction;
    }
    let powered: Vec<f64> = normalized.iter().map(|x| x.powf(s)).collect();
    let leaf_terms: Vec<f64> = leaf_sums_over_ancestors(grid, &powered)
        .into_iter()
        .zip(mu.masses())
        .map(|(sum, m)| {
            if sum > 0.0 {
                m * sum.powf((q - s) / s)
            } else {
                0.0
            }
        })
        .collect();
    let below = cube_sums(grid, &leaf_terms);
    for ((d, w), b) in direction.iter_mut().zip(&normalized).zip(below) {
        if *w > 0.0 {
            *d = w.powf(s - 1.0) * b;
        }
    }
    direction
}

/// A nonnegative linear map `x ↦ Σ_k x_k c_k` into cube vectors, with the
/// ratio `‖Σ_k x_k c_k‖_{L^q_{ℓ^s}(μ)} / (Σ_k ω_k x_k^p)^{1/p}` to maximize.
struct PositiveMap<'a> {
    grid: GridSpec,
    columns: Vec<Vec<(usize, f64)>>,
    weights: Vec<f64>,
    p: f64,
    q: f64,
    s: f64,
    mu: &'a LeafMeasure,
}

impl PositiveMap<'_> {
    fn active(&self, k: usize) -> bool {
        self.weights[k] > 0.0 && !self.columns[k].is_empty()
    }

    fn image(&self, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.grid.num_cubes()];
        for (column, &xk) in self.columns.iter().zip(x) {
            if xk != 0.0 {
                for &(i, c) in column {
                    v[i] += c * xk;
                }
            }
        }
        v
    }

    fn input_norm(&self, x: &[f64]) -> f64 {
        lp_norm(x, self.p, &self.weights)
    }

    fn ratio(&self, x: &[f64]) -> f64 {
        let denominator = self.input_norm(x);
        if denominator == 0.0 {
            return 0.0;
        }
        let v = CubeVector::from_dense_unchecked(self.grid, self.image(x));
        mixed_norm_with(&v, self.q, self.s, self.mu) / denominator
    }

    fn normalize(&self, x: &mut [f64]) {
        let norm = self.input_norm(x);
        if norm > 0.0 {
            x.iter_mut().for_each(|v| *v /= norm);
        }
    }

    /// Nonlinear power iteration: `x ← (∇Φ(x)/ω)^{1/(p-1)}`, renormalized.
    /// The numerator is convex and 1-homogeneous, so each step does not
    /// decrease the ratio.
    fn ascend(&self, mut x: Vec<f64>, config: &AscentConfig) -> (f64, Vec<f64>) {
        for (k, xk) in x.iter_mut().enumerate() {
            if !self.active(k) {
                *xk = 0.0;
            }
        }
        self.normalize(&mut x);
        let mut best = (self.ratio(&x), x.clone());
        let mut history = vec![best.0];
        for _ in 0..config.max_iterations {
            let direction =
                mixed_norm_direction(&self.grid, &self.image(&x), self.q, self.s, self.mu);
            let gradient: Vec<f64> = self
                .columns
                .iter()
                .map(|column| column.iter().map(|&(i, c)| c * direction[i]).sum())
                .collect();
            let top = gradient
                .iter()
                .zip(&self.weights)
                .filter(|(_, w)| **w > 0.0)
                .map(|(g, w)| g / w)
                .fold(0.0f64, f64::max);
            if top == 0.0 {
                break;
            }
            x = gradient
                .iter()
                .zip(&self.weights)
                .map(|(g, w)| {
                    if *w > 0.0 {
                        (g / w / top).powf(1.0 / (self.p - 1.0))
                    } else {
                        0.0
                    }
                })
                .collect();
            self.normalize(&mut x);
            let value = self.ratio(&x);
            if value > best.0 {
                best = (value, x.clone());
            }
            history.push(best.0);
            if has_converged(&history, config) {
                break;
            }
        }
        best
    }

    fn starting_points(&self, config: &AscentConfig) -> Vec<Vec<f64>> {
        let k = self.columns.len();
        let mut starts = vec![vec![1.0; k]];
        for r in 0..config.restarts {
            let mut rng = restart_rng(config.seed, r);
            let x: Vec<f64> = if r % 2 == 0 {
                (0..k).map(|_| rng.gen_range(0.0..1.0)).collect()
            } else {
                // Concentrated start: a few coordinates carry most of the mass.
                (0..k)
                    .map(|_| {
                        if rng.gen_bool(0.25) {
                            1.0
                        } else {
                            rng.gen_range(0.0..0.01)
                        }
                    })
                    .collect()
            };
            starts.push(x);
        }
        starts
    }

    fn maximize(&self, config: &AscentConfig) -> (f64, Vec<f64>) {
        let results: Vec<(f64, Vec<f64>)> = self
            .starting_points(config)
            .into_par_iter()
            .map(|x| self.ascend(x, config))
            .collect();
        best_of(results).expect("at least one starting point")
    }

    /// Exhaustive search over `u_k = ω_k x_k^p` on the simplex grid of the
    /// given resolution, followed by a pairwise-transfer hill climb.
    fn grid_search(&self, resolution: usize) -> (f64, Vec<f64>) {
        let active: Vec<usize> = (0..self.columns.len())
            .filter(|&k| self.active(k))
            .collect();
        let to_x = |u: &[f64]| -> Vec<f64> {
            let mut x = vec![0.0; self.columns.len()];
            for (&k, &uk) in active.iter().zip(u) {
                x[k] = (uk / self.weights[k]).powf(1.0 / self.p);
            }
            x
        };
        if active.is_empty() {
            return (0.0, vec![0.0; self.columns.len()]);
        }
        let n = resolution.max(1);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for parts in compositions(n, active.len()) {
            let u: Vec<f64> = parts.iter().map(|&c| c as f64 / n as f64).collect();
            let value = self.ratio(&to_x(&u));
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, u));
            }
        }
        let (mut value, mut u) = best.expect("nonempty simplex grid");
        let mut step = 1.0 / n as f64;
        while step > 1e-9 {
            let mut improved = false;
            for i in 0..u.len() {
                for j in 0..u.len() {
                    if i == j || u[j] < step {
                        continue;
                    }
                    let mut trial = u.clone();
                    trial[i] += step;
                    trial[j] -= step;
                    let v = self.ratio(&to_x(&trial));
                    if v > value {
                        value = v;
                        u = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
        (value, to_x(&u))
    }
}

/// All ways of writing `total` as an ordered sum of `parts` nonnegative
/// integers.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn operator_map<'a>(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &'a LeafMeasure,
    e: &ExponentTriple,
) -> PositiveMap<'a> {
    let grid = *lambda.grid();
    let columns = (0..grid.num_leaves())
        .map(|leaf| {
            let weight = sigma.masses()[leaf];
            grid.ancestors(grid.leaf(leaf))
                .into_iter()
                .filter(|&q| *lambda.get(q) > 0.0 && weight > 0.0)
                .map(|q| (grid.linear_index(q), lambda.get(q) * weight))
                .collect()
        })
        .collect();
    PositiveMap {
        grid,
        columns,
        weights: sigma.masses().to_vec(),
        p: e.p,
        q: e.q,
        s: e.s,
        mu,
    }
}

/// `‖T f‖_{L^q_{ℓ^s}(μ)} / ‖f‖_{L^p(σ)}`, 0 when `f` vanishes σ-a.e.
pub fn operator_ratio(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
    f: &LeafFunction,
) -> Result<f64> {
    let denominator = f.lp_norm(e.p, sigma);
    if denominator == 0.0 {
        return Ok(0.0);
    }
    Ok(mixed_norm(&apply_t(lambda, sigma, f)?, e, mu) / denominator)
}

fn function_report(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
    x: Vec<f64>,
    method: Method,
    seed: Option<u64>,
) -> Result<ConditionReport> {
    let f = LeafFunction::nonneg(*lambda.grid(), x)?;
    Ok(ConditionReport {
        value: operator_ratio(lambda, sigma, mu, e, &f)?,
        certificate: Certificate::Function(f),
        method,
        seed,
    })
}

/// Lower estimate of the norm of `T: L^p(σ) → L^q_{ℓ^s}(μ)` by power
/// iteration from `f ≡ 1` and seeded random starts.
pub fn operator_norm(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
    config: &AscentConfig,
) -> Result<ConditionReport> {
    if *sigma.total() == 0.0 {
        return Err(Error::ZeroMeasure);
    }
    let map = operator_map(lambda, sigma, mu, e);
    let (_, x) = map.maximize(config);
    let x = if x.iter().all(|v| *v == 0.0) {
        vec![1.0; x.len()]
    } else {
        x
    };
    function_report(lambda, sigma, mu, e, x, Method::Ascent, Some(config.seed))
}

/// Most leaves [`operator_norm_bruteforce`] accepts.
pub const NORM_BRUTEFORCE_MAX_LEAVES: usize = 4;

/// Grid search for the operator norm over nonnegative `f` on the unit
/// sphere of `L^p(σ)`; a lower bound for the true norm.
pub fn operator_norm_bruteforce(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
    grid_points: usize,
) -> Result<ConditionReport> {
    let grid = *lambda.grid();
    if grid.num_leaves() > NORM_BRUTEFORCE_MAX_LEAVES {
        return Err(Error::TooLarge(format!(
            "{} leaves (at most {NORM_BRUTEFORCE_MAX_LEAVES})",
            grid.num_leaves()
        )));
    }
    if *sigma.total() == 0.0 {
        return Err(Error::ZeroMeasure);
    }
    let (_, x) = operator_map(lambda, sigma, mu, e).grid_search(grid_points);
    let x = if x.iter().all(|v| *v == 0.0) {
        vec![1.0; x.len()]
    } else {
        x
    };
    function_report(lambda, sigma, mu, e, x, Method::Bruteforce, None)
}

/// Splits `g` by `π_G` and returns the nonempty pieces `(G, g_G)`.
fn split_by_family(family: &CubeFamily, g: &CubeVector) -> Result<Vec<(CubeId, CubeVector)>> {
    let grid = *g.grid();
    let mut pieces: Vec<(CubeId, Vec<f64>)> = Vec::new();
    for (q, value) in g.support() {
        let top = pi_family(family, q)?;
        let slot = match pieces.iter().position(|(t, _)| *t == top) {
            Some(i) => i,
            None => {
                pieces.push((top, vec![0.0; grid.num_cubes()]));
                pieces.len() - 1
            }
        };
        pieces[slot].1[grid.linear_index(q)] = value;
    }
    pieces.sort_by_key(|(t, _)| *t);
    Ok(pieces
        .into_iter()
        .map(|(t, v)| (t, CubeVector::from_dense_unchecked(grid, v)))
        .collect())
}

/// `ℓ^r` norm of the terms `‖T*(g_G)‖_{L^{p'}(σ)} / (μ(G)^{1/q'} ‖g_G‖_{L^∞_{ℓ^{s'}}(μ)})`.
fn family_dual_terms(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
    family: &CubeFamily,
    g: &CubeVector,
    r: f64,
) -> Result<f64> {
    if !is_sigma_sparse(family, mu).sparse {
        warn!("family passed as sparse is not sparse for the target measure");
    }
    let mut terms = Vec::new();
    for (top, piece) in split_by_family(family, g)? {
        let numerator = apply_t_star(lambda, mu, &piece).lp_norm(e.p_conj(), sigma);
        let denominator =
            mu.cube_mass(top).powf(1.0 / e.q_conj()) * linf_ls_norm_with(&piece, e.s_conj(), mu);
        if denominator == 0.0 {
            if numerator == 0.0 {
                continue;
            }
            return Err(Error::DegenerateTerm(top));
        }
        terms.push(numerator / denominator);
    }
    let ones = vec![1.0; terms.len()];
    Ok(lp_norm(&terms, r, &ones))
}

/// The dual testing quantity over a μ-sparse family `G` and a cube vector
/// `g`, aggregated in `ℓ^r` with `1/r = 1/q - 1/p`.
pub fn cond1_value(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
    family: &CubeFamily,
    g: &CubeVector,
) -> Result<f64> {
    family_dual_terms(lambda, sigma, mu, e, family, g, e.r())
}

/// Which test vector stands for the family cube `F` in [`cond2_value`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TestVariant {
    /// `T(χ_F)`, with components `λ_Q σ(Q ∩ F)`.
    #[default]
    Indicator,
    /// `T_F(σ)`, with components `λ_Q σ(Q)` for `Q ⊆ F` only.
    Localized,
}

/// Nonzero components of the test vector for `top`, scaled by
/// `σ(top)^{-1/p}`.
fn test_column(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    top: CubeId,
    p: f64,
    variant: TestVariant,
) -> Vec<(usize, f64)> {
    let grid = *lambda.grid();
    let mass = *sigma.cube_mass(top);
    if mass == 0.0 {
        return Vec::new();
    }
    let scale = mass.powf(-1.0 / p);
    let mut column: Vec<(usize, f64)> = grid
        .descendants(top)
        .filter(|&q| *lambda.get(q) > 0.0)
        .map(|q| {
            (
                grid.linear_index(q),
                scale * lambda.get(q) * sigma.cube_mass(q),
            )
        })
        .filter(|(_, c)| *c > 0.0)
        .collect();
    if variant == TestVariant::Indicator {
        for q in grid.ancestors(top).into_iter().filter(|&q| q != top) {
            if *lambda.get(q) > 0.0 {
                column.push((grid.linear_index(q), scale * lambda.get(q) * mass));
            }
        }
    }
    column
}

/// `‖Σ_F β_F σ(F)^{-1/p} T(χ_F)‖_{L^q_{ℓ^s}(μ)} / ‖β‖_{ℓ^p}`.
pub fn cond2_value(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
    beta: &[(CubeId, f64)],
    variant: TestVariant,
) -> Result<f64> {
    cond2_value_with(lambda, sigma, mu, e.p, e.q, e.s, beta, variant)
}

#[allow(clippy::too_many_arguments)]
fn cond2_value_with(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    p: f64,
    outer: f64,
    inner: f64,
    beta: &[(CubeId, f64)],
    variant: TestVariant,
) -> Result<f64> {
    let grid = *lambda.grid();
    let mut v = vec![0.0; grid.num_cubes()];
    for &(top, b) in beta {
        if !grid.contains_cube(top) {
            return Err(Error::InvalidCube(top.to_string()));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::InvalidValue(format!("weight {b} for {top}")));
        }
        if b > 0.0 && *sigma.cube_mass(top) == 0.0 {
            return Err(Error::ZeroMassCube(top));
        }
        for (i, c) in test_column(lambda, sigma, top, p, variant) {
            v[i] += b * c;
        }
    }
    let weights: Vec<f64> = beta.iter().map(|(_, b)| *b).collect();
    let denominator = lp_norm(&weights, p, &vec![1.0; weights.len()]);
    if denominator == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    let v = CubeVector::from_dense_unchecked(grid, v);
    Ok(mixed_norm_with(&v, outer, inner, mu) / denominator)
}

/// Most family cubes for which [`cond2_constant`] adds a grid search.
pub const COND2_GRID_MAX_CUBES: usize = 4;

/// Best [`cond2_value`] over weights `β` on a fixed family.
pub fn cond2_constant(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
    family: &CubeFamily,
    variant: TestVariant,
    config: &AscentConfig,
) -> Result<ConditionReport> {
    let grid = *lambda.grid();
    let tops: Vec<CubeId> = family.iter().collect();
    let map = PositiveMap {
        grid,
        columns: tops
            .iter()
            .map(|&t| test_column(lambda, sigma, t, e.p, variant))
            .collect(),
        weights: tops
            .iter()
            .map(|&t| if *sigma.cube_mass(t) > 0.0 { 1.0 } else { 0.0 })
            .collect(),
        p: e.p,
        q: e.q,
        s: e.s,
        mu,
    };
    if tops.is_empty() {
        return Ok(ConditionReport {
            value: 0.0,
            certificate: Certificate::Weights(Vec::new()),
            method: Method::Exact,
            seed: None,
        });
    }
    let mut candidates = vec![(map.maximize(config), Method::Ascent)];
    if tops.len() <= COND2_GRID_MAX_CUBES {
        candidates.push((map.grid_search(32), Method::Bruteforce));
    }
    let ((_, x), method) = candidates
        .into_iter()
        .reduce(|a, b| if b.0 .0 > a.0 .0 { b } else { a })
        .expect("ascent candidate");
    let mut beta: Vec<(CubeId, f64)> = tops.iter().copied().zip(x).collect();
    if beta.iter().all(|(_, b)| *b == 0.0) {
        // Nothing to test against: every admissible β gives 0.
        match beta.iter_mut().find(|(t, _)| *sigma.cube_mass(*t) > 0.0) {
            Some(first) => first.1 = 1.0,
            None => {
                return Ok(ConditionReport {
                    value: 0.0,
                    certificate: Certificate::Weights(Vec::new()),
                    method: Method::Exact,
                    seed: None,
                })
            }
        }
    }
    Ok(ConditionReport {
        value: cond2_value(lambda, sigma, mu, e, &beta, variant)?,
        certificate: Certificate::Weights(beta),
        method,
        seed: (method == Method::Ascent).then_some(config.seed),
    })
}

/// Per-cube factors `a_Q = (λ_Q σ(Q))^q μ(Q)^{1/s̃} σ(Q)^{-1}` of the
/// allocation condition; zero where `λ_Q σ(Q) = 0`.
fn reduction_factors(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
) -> Vec<f64> {
    let inv_s_tilde = if e.s.is_infinite() { 0.0 } else { e.q / e.s };
    lambda
        .dense()
        .iter()
        .zip(sigma.cube_masses())
        .zip(mu.cube_masses())
        .map(|((&l, &sm), &mm)| {
            if l == 0.0 || sm == 0.0 {
                0.0
            } else {
                (l * sm).powf(e.q) * mm.powf(inv_s_tilde) / sm
            }
        })
        .collect()
}

/// Exponent `1/s̃' = 1 - q/s` of `μ(E_Q)`.
fn allocation_exponent(e: &ExponentTriple) -> f64 {
    if e.s.is_infinite() {
        1.0
    } else {
        1.0 - e.q / e.s
    }
}

fn allocation_power(mass: f64, exponent: f64) -> f64 {
    if exponent == 0.0 {
        1.0
    } else {
        mass.powf(exponent)
    }
}

fn reduction_from_masses(
    grid: &GridSpec,
    factors: &[f64],
    masses: &[f64],
    e: &ExponentTriple,
    sigma: &LeafMeasure,
) -> f64 {
    let exponent = allocation_exponent(e);
    let per_cube: Vec<f64> = factors
        .iter()
        .zip(masses)
        .map(|(&a, &x)| {
            if a == 0.0 {
                0.0
            } else {
                a * allocation_power(x, exponent)
            }
        })
        .collect();
    lp_norm(
        &leaf_sums_over_ancestors(grid, &per_cube),
        e.p_tilde_conj(),
        sigma.masses(),
    )
}

fn allocation_masses(alloc: &DisjointAllocation, mu: &LeafMeasure) -> Vec<f64> {
    let grid = *alloc.grid();
    let mut masses = vec![0.0; grid.num_cubes()];
    for (q, x) in alloc.masses(mu) {
        masses[grid.linear_index(q)] = x;
    }
    masses
}

const DISJOINT_TOLERANCE: f64 = 1e-12;

/// `‖Σ_Q (λ_Q σ(Q))^q μ(Q)^{1/s̃} μ(E_Q)^{1/s̃'} σ(Q)^{-1} χ_Q‖_{L^{p̃'}(σ)}`
/// with `s̃ = s/q` and `p̃ = p/q`.
pub fn reduction_condition_value(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
    allocation: &DisjointAllocation,
) -> Result<f64> {
    allocation.check_disjoint(DISJOINT_TOLERANCE)?;
    let grid = *lambda.grid();
    let factors = reduction_factors(lambda, sigma, mu, e);
    Ok(reduction_from_masses(
        &grid,
        &factors,
        &allocation_masses(allocation, mu),
        e,
        sigma,
    ))
}

fn allocation_report(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
    allocation: DisjointAllocation,
    method: Method,
    seed: Option<u64>,
) -> Result<ConditionReport> {
    Ok(ConditionReport {
        value: reduction_condition_value(lambda, sigma, mu, e, &allocation)?,
        certificate: Certificate::Allocation(allocation),
        method,
        seed,
    })
}

/// Variables of the allocation ascent: the fraction `y[ℓ][j]` of leaf `ℓ`
/// given to the `j`-th relevant cube on its chain.
struct AllocationProblem<'a> {
    grid: GridSpec,
    factors: Vec<f64>,
    /// For each leaf, the linear indices of relevant cubes containing it.
    chains: Vec<Vec<usize>>,
    e: ExponentTriple,
    sigma: &'a LeafMeasure,
    mu: &'a LeafMeasure,
}

impl<'a> AllocationProblem<'a> {
    fn new(
        lambda: &CubeCoefficients,
        sigma: &'a LeafMeasure,
        mu: &'a LeafMeasure,
        e: &ExponentTriple,
    ) -> Self {
        let grid = *lambda.grid();
        let factors = reduction_factors(lambda, sigma, mu, e);
        let chains = (0..grid.num_leaves())
            .map(|leaf| {
                if mu.masses()[leaf] == 0.0 {
                    return Vec::new();
                }
                grid.ancestors(grid.leaf(leaf))
                    .into_iter()
                    .map(|q| grid.linear_index(q))
                    .filter(|&i| factors[i] > 0.0)
                    .collect()
            })
            .collect();
        AllocationProblem {
            grid,
            factors,
            chains,
            e: *e,
            sigma,
            mu,
        }
    }

    fn masses(&self, y: &[Vec<f64>]) -> Vec<f64> {
        let mut x = vec![0.0; self.grid.num_cubes()];
        for ((chain, fractions), m) in self.chains.iter().zip(y).zip(self.mu.masses()) {
            for (&i, f) in chain.iter().zip(fractions) {
                x[i] += f * m;
            }
        }
        x
    }

    fn value(&self, y: &[Vec<f64>]) -> f64 {
        reduction_from_masses(
            &self.grid,
            &self.factors,
            &self.masses(y),
            &self.e,
            self.sigma,
        )
    }

    fn gradient(&self, y: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let x = self.masses(y);
        let exponent = allocation_exponent(&self.e);
        let r = self.e.p_tilde_conj();
        let per_cube: Vec<f64> = self
            .factors
            .iter()
            .zip(&x)
            .map(|(&a, &xq)| {
                if a == 0.0 {
                    0.0
                } else {
                    a * allocation_power(xq, exponent)
                }
            })
            .collect();
        let h = leaf_sums_over_ancestors(&self.grid, &per_cube);
        let scale = h.iter().fold(0.0f64, |a, v| a.max(*v));
        let leaf_terms: Vec<f64> = h
            .iter()
            .zip(self.sigma.masses())
            .map(|(v, s)| {
                if *v > 0.0 {
                    s * (v / scale).powf(r - 1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let below = cube_sums(&self.grid, &leaf_terms);
        let cube_gradient: Vec<f64> = (0..x.len())
            .map(|i| {
                if self.factors[i] == 0.0 {
                    return 0.0;
                }
                let q = self.grid.cube_at(i);
                // Keep the derivative of x^θ finite at x = 0.
                let floor = 1e-12 * self.mu.cube_mass(q);
                self.factors[i] * exponent * x[i].max(floor).powf(exponent - 1.0) * below[i]
            })
            .collect();
        self.chains
            .iter()
            .zip(self.mu.masses())
            .map(|(chain, m)| chain.iter().map(|&i| cube_gradient[i] * m).collect())
            .collect()
    }

    fn project(y: &mut [Vec<f64>]) {
        for fractions in y.iter_mut() {
            project_capped_simplex(fractions);
        }
    }

    /// Projected gradient ascent with an adaptive step.
    fn ascend(&self, mut y: Vec<Vec<f64>>, config: &AscentConfig) -> (f64, Vec<Vec<f64>>) {
        Self::project(&mut y);
        let mut value = self.value(&y);
        let mut history = vec![value];
        let mut step = 0.5;
        for _ in 0..config.max_iterations {
            let gradient = self.gradient(&y);
            let top = gradient
                .iter()
                .flatten()
                .fold(0.0f64, |a, g| a.max(g.abs()));
            if top == 0.0 {
                break;
            }
            let mut accepted = false;
            while step > 1e-12 {
                let mut trial: Vec<Vec<f64>> = y
                    .iter()
                    .zip(&gradient)
                    .map(|(ys, gs)| ys.iter().zip(gs).map(|(a, g)| a + step * g / top).collect())
                    .collect();
                Self::project(&mut trial);
                let trial_value = self.value(&trial);
                if trial_value > value {
                    y = trial;
                    value = trial_value;
                    step = (step * 2.0).min(1.0);
                    accepted = true;
                    break;
                }
                step /= 2.0;
            }
            history.push(value);
            if !accepted || has_converged(&history, config) {
                break;
            }
        }
        (value, y)
    }

    /// Greedy vertex: cubes in `order` take all mass still free in them.
    fn greedy(&self, order: &[usize]) -> Vec<Vec<f64>> {
        let rank: std::collections::HashMap<usize, usize> =
            order.iter().enumerate().map(|(r, &i)| (i, r)).collect();
        self.chains
            .iter()
            .map(|chain| {
                let mut y = vec![0.0; chain.len()];
                if let Some(j) = (0..chain.len()).min_by_key(|&j| rank[&chain[j]]) {
                    y[j] = 1.0;
                }
                y
            })
            .collect()
    }

    fn relevant_cubes(&self) -> Vec<usize> {
        (0..self.factors.len())
            .filter(|&i| self.factors[i] > 0.0)
            .collect()
    }

    fn starting_points(&self, config: &AscentConfig) -> Vec<Vec<Vec<f64>>> {
        let uniform = self
            .chains
            .iter()
            .map(|c| vec![1.0 / c.len().max(1) as f64; c.len()])
            .collect();
        let cubes = self.relevant_cubes();
        let deepest_first: Vec<usize> = cubes.iter().rev().copied().collect();
        let mut starts = vec![uniform, self.greedy(&deepest_first), self.greedy(&cubes)];
        for r in 0..config.restarts {
            let mut rng = restart_rng(config.seed, r);
            if r % 2 == 0 {
                let mut order = cubes.clone();
                order.shuffle(&mut rng);
                starts.push(self.greedy(&order));
            } else {
                starts.push(
                    self.chains
                        .iter()
                        .map(|c| c.iter().map(|_| rng.gen_range(0.0..1.0)).collect())
                        .collect(),
                );
            }
        }
        starts
    }

    fn to_allocation(&self, y: &[Vec<f64>]) -> Result<DisjointAllocation> {
        let mut fractions: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
        for (leaf, (chain, ys)) in self.chains.iter().zip(y).enumerate() {
            for (&i, &f) in chain.iter().zip(ys) {
                if f > 0.0 {
                    fractions
                        .entry(i)
                        .or_insert_with(|| vec![0.0; self.grid.num_leaves()])[leaf] = f.min(1.0);
                }
            }
        }
        let sets = fractions
            .into_iter()
            .map(|(i, f)| {
                Ok((
                    self.grid.cube_at(i),
                    FractionalSet::from_fractions(self.grid, f)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        DisjointAllocation::from_sets(self.grid, sets, DISJOINT_TOLERANCE)
    }
}

/// Euclidean projection onto `{y ≥ 0, Σ y ≤ 1}`.
fn project_capped_simplex(y: &mut [f64]) {
    for v in y.iter_mut() {
        *v = v.max(0.0);
    }
    if y.iter().sum::<f64>() <= 1.0 {
        return;
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if v - candidate > 0.0 {
            shift = candidate;
        }
    }
    for v in y.iter_mut() {
        *v = (*v - shift).max(0.0);
    }
}

fn exact_reduction_report(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
) -> Result<ConditionReport> {
    allocation_report(
        lambda,
        sigma,
        mu,
        e,
        DisjointAllocation::new(*lambda.grid()),
        Method::Exact,
        None,
    )
}

/// Best [`reduction_condition_value`] found by projected ascent on per-leaf
/// fractions, from deterministic and seeded random starts.
pub fn reduction_condition_ascent(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
    config: &AscentConfig,
) -> Result<ConditionReport> {
    if allocation_exponent(e) == 0.0 {
        return exact_reduction_report(lambda, sigma, mu, e);
    }
    let problem = AllocationProblem::new(lambda, sigma, mu, e);
    let results: Vec<(f64, Vec<Vec<f64>>)> = problem
        .starting_points(config)
        .into_par_iter()
        .map(|y| problem.ascend(y, config))
        .collect();
    let (_, y) = best_of(results).expect("at least one start");
    allocation_report(
        lambda,
        sigma,
        mu,
        e,
        problem.to_allocation(&y)?,
        Method::Ascent,
        Some(config.seed),
    )
}

/// Most leaves [`reduction_condition_bruteforce`] accepts.
pub const REDUCTION_BRUTEFORCE_MAX_LEAVES: usize = 8;
/// Most relevant cubes [`reduction_condition_bruteforce`] accepts.
pub const REDUCTION_BRUTEFORCE_MAX_CUBES: usize = 6;
const REDUCTION_GRID_BUDGET: usize = 200_000;

/// Exhaustive search over allocation masses `x_Q = μ(E_Q)`.
///
/// Masses are realizable by disjoint sets iff `Σ_{Q ⊆ P} x_Q ≤ μ(P)` for
/// every `P`. The search covers a grid of masses (resolution lowered as
/// the number of relevant cubes grows), every greedy vertex of that
/// region, and a pairwise-transfer hill climb from the best point. The
/// certificate is realized by the bottom-up allocation.
pub fn reduction_condition_bruteforce(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
    resolution: usize,
) -> Result<ConditionReport> {
    let grid = *lambda.grid();
    if grid.num_leaves() > REDUCTION_BRUTEFORCE_MAX_LEAVES {
        return Err(Error::TooLarge(format!(
            "{} leaves (at most {REDUCTION_BRUTEFORCE_MAX_LEAVES})",
            grid.num_leaves()
        )));
    }
    if allocation_exponent(e) == 0.0 {
        return exact_reduction_report(lambda, sigma, mu, e);
    }
    let problem = AllocationProblem::new(lambda, sigma, mu, e);
    let cubes: Vec<usize> = problem
        .relevant_cubes()
        .into_iter()
        .filter(|&i| mu.cube_masses()[i] > 0.0)
        .collect();
    if cubes.len() > REDUCTION_BRUTEFORCE_MAX_CUBES {
        return Err(Error::TooLarge(format!(
            "{} relevant cubes (at most {REDUCTION_BRUTEFORCE_MAX_CUBES})",
            cubes.len()
        )));
    }
    let cube_ids: Vec<CubeId> = cubes.iter().map(|&i| grid.cube_at(i)).collect();
    // Constraint rows: for every P, the relevant cubes inside P.
    let constraints: Vec<(f64, Vec<usize>)> = grid
        .enumerate_cubes()
        .map(|p| {
            let inside = (0..cubes.len())
                .filter(|&k| grid.is_subcube(cube_ids[k], p))
                .collect();
            (*mu.cube_mass(p), inside)
        })
        .filter(|(_, inside): &(f64, Vec<usize>)| !inside.is_empty())
        .collect();
    let feasible = |x: &[f64]| {
        x.iter().all(|v| *v >= 0.0)
            && constraints.iter().all(|(cap, inside)| {
                inside.iter().map(|&k| x[k]).sum::<f64>() <= cap * (1.0 + 1e-12)
            })
    };
    let evaluate = |x: &[f64]| {
        let mut masses = vec![0.0; grid.num_cubes()];
        for (&i, &v) in cubes.iter().zip(x) {
            masses[i] = v;
        }
        reduction_from_masses(&grid, &problem.factors, &masses, e, sigma)
    };
    let caps: Vec<f64> = cubes.iter().map(|&i| mu.cube_masses()[i]).collect();

    let mut best: (f64, Vec<f64>) = (evaluate(&vec![0.0; cubes.len()]), vec![0.0; cubes.len()]);
    let consider = |x: Vec<f64>, best: &mut (f64, Vec<f64>)| {
        if feasible(&x) {
            let v = evaluate(&x);
            if v > best.0 {
                *best = (v, x);
            }
        }
    };
    if !cubes.is_empty() {
        let per_axis =
            ((REDUCTION_GRID_BUDGET as f64).powf(1.0 / cubes.len() as f64) as usize).max(2) - 1;
        let n = resolution.min(per_axis).max(1);
        let mut digits = vec![0usize; cubes.len()];
        loop {
            let x: Vec<f64> = digits
                .iter()
                .zip(&caps)
                .map(|(&d, c)| c * d as f64 / n as f64)
                .collect();
            consider(x, &mut best);
            let mut k = 0;
            while k < digits.len() && digits[k] == n {
                digits[k] = 0;
                k += 1;
            }
            if k == digits.len() {
                break;
            }
            digits[k] += 1;
        }
        for order in permutations(cubes.len()) {
            let x = greedy_masses(&order, &constraints, cubes.len());
            consider(x, &mut best);
        }
        // Hill climb with single and pairwise moves.
        let mut step = caps.iter().fold(0.0f64, |a, c| a.max(*c)) / n as f64;
        let floor = 1e-9 * mu.total();
        while step > floor {
            let mut improved = false;
            for i in 0..cubes.len() {
                for j in 0..=cubes.len() {
                    if i == j {
                        continue;
                    }
                    for sign in [1.0, -1.0] {
                        let mut x = best.1.clone();
                        x[i] += sign * step;
                        if j < cubes.len() {
                            x[j] -= sign * step;
                        }
                        let before = best.0;
                        consider(x, &mut best);
                        improved |= best.0 > before;
                    }
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
    }
    let mut masses = vec![0.0; grid.num_cubes()];
    for (&i, &v) in cubes.iter().zip(&best.1) {
        masses[i] = v;
    }
    let allocation = realize_masses(&grid, &masses, mu)?;
    allocation_report(lambda, sigma, mu, e, allocation, Method::Bruteforce, None)
}

/// Greedy vertex of `{x ≥ 0 : Σ_{Q ⊆ P} x_Q ≤ μ(P)}` for an ordering.
fn greedy_masses(order: &[usize], constraints: &[(f64, Vec<usize>)], k: usize) -> Vec<f64> {
    let mut x = vec![0.0; k];
    for &c in order {
        let slack = constraints
            .iter()
            .filter(|(_, inside)| inside.contains(&c))
            .map(|(cap, inside)| cap - inside.iter().map(|&j| x[j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        x[c] = slack.max(0.0);
    }
    x
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(k - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, k - 1);
            out.push(p);
        }
    }
    out
}

/// Disjoint sets with `μ(E_Q) = x_Q`, shrinking by a rounding margin when
/// the masses sit exactly on the feasibility boundary.
fn realize_masses(grid: &GridSpec, masses: &[f64], mu: &LeafMeasure) -> Result<DisjointAllocation> {
    let mut shrink = 1.0;
    loop {
        let coefficients =
            CubeCoefficients::from_dense(*grid, masses.iter().map(|x| x * shrink).collect())?;
        match crate::sparse::dor_allocate(&coefficients, mu, &1.0, false) {
            Ok(allocation) => return Ok(allocation),
            Err(err) if shrink < 1.0 - 1e-6 => return Err(err),
            Err(_) => shrink *= 1.0 - 1e-12 * 16.0,
        }
    }
}

/// Largest [`reduction_condition_value`] found: the ascent, plus the
/// exhaustive search when the instance is small enough for it.
pub fn reduction_condition_sup(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
    config: &AscentConfig,
) -> Result<ConditionReport> {
    let ascent = reduction_condition_ascent(lambda, sigma, mu, e, config)?;
    match reduction_condition_bruteforce(lambda, sigma, mu, e, 16) {
        Ok(oracle) if oracle.value > ascent.value => Ok(oracle),
        Ok(_) | Err(Error::TooLarge(_)) => Ok(ascent),
        Err(err) => Err(err),
    }
}

/// Which space carries the second weak-type condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeakReading {
    /// `L^q_{ℓ^α}(μ|_E)`: inner exponent `α`, outer `q`.
    #[default]
    Printed,
    /// `L^α_{ℓ^s}(μ|_E)`: outer exponent `α`, inner `s`.
    Alternate,
}

fn weak_normalizer(
    mu: &LeafMeasure,
    set: &FractionalSet,
    q: f64,
    alpha: f64,
) -> Result<(LeafMeasure, f64)> {
    if !(alpha > 1.0 && alpha < q) {
        return Err(Error::InvalidExponents(format!(
            "need 1 < alpha < q, got alpha = {alpha}, q = {q}"
        )));
    }
    let mass = mu.set_mass(set);
    if mass <= 0.0 {
        return Err(Error::EmptySet);
    }
    Ok((mu.restricted(set), mass.powf((q - alpha) / (q * alpha))))
}

/// First weak-type condition: the dual family quantity against `μ|_E`,
/// aggregated in `ℓ^{r_α}` with `1/r_α = 1/α - 1/p`, divided by
/// `μ(E)^{(q-α)/(qα)}`.
#[allow(clippy::too_many_arguments)]
pub fn weak_cond1_value(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
    alpha: f64,
    set: &FractionalSet,
    family: &CubeFamily,
    g: &CubeVector,
) -> Result<f64> {
    let (restricted, normalizer) = weak_normalizer(mu, set, e.q, alpha)?;
    let r_alpha = 1.0 / (1.0 / alpha - 1.0 / e.p);
    Ok(family_dual_terms(lambda, sigma, &restricted, e, family, g, r_alpha)? / normalizer)
}

/// Second weak-type condition: the weighted family test against `μ|_E`
/// in the space chosen by `reading`, divided by `μ(E)^{(q-α)/(qα)}`.
#[allow(clippy::too_many_arguments)]
pub fn weak_cond2_value(
    lambda: &CubeCoefficients,
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
    alpha: f64,
    set: &FractionalSet,
    beta: &[(CubeId, f64)],
    variant: TestVariant,
    reading: WeakReading,
) -> Result<f64> {
    let (restricted, normalizer) = weak_normalizer(mu, set, e.q, alpha)?;
    let (outer, inner) = match reading {
        WeakReading::Printed => (e.q, alpha),
        WeakReading::Alternate => (alpha, e.s),
    };
    Ok(
        cond2_value_with(lambda, sigma, &restricted, e.p, outer, inner, beta, variant)?
            / normalizer,
    )
}

/// `A_1`, the extremal dual sequence from Hölder's inequality, and the
/// ratio it certifies.
#[derive(Debug, Clone, PartialEq)]
pub struct DualWitness {
    /// `‖(Σ_Q Λ_Q^s χ_Q)^{1/s}‖_{L^1(μ)}`.
    pub a1: f64,
    /// `α*_Q = Λ_Q^{s-1} ∫_Q (Σ_R Λ_R^s χ_R)^{-1/s'} dμ`.
    pub witness: CubeVector,
    /// `Σ_Q Λ_Q α*_Q`.
    pub pairing: f64,
    /// `sup_P (μ(P)^{-1} Σ_{Q ⊆ P} (α*_Q/μ(Q))^{s'} μ(Q))^{1/s'}`.
    pub denominator: f64,
    /// `pairing / denominator` (0 when both vanish).
    pub ratio: f64,
}

pub fn a1_a2_witness(
    big_lambda: &CubeCoefficients,
    mu: &LeafMeasure,
    s: f64,
) -> Result<DualWitness> {
    if !(s > 1.0 && s.is_finite()) {
        return Err(Error::InvalidExponents(format!(
            "need 1 < s < inf, got {s}"
        )));
    }
    let grid = *big_lambda.grid();
    let s_conj = conjugate(s);
    let coefficients = CubeVector::from_dense_unchecked(grid, big_lambda.dense().to_vec());
    let a1 = mixed_norm_with(&coefficients, 1.0, s, mu);

    let powered: Vec<f64> = big_lambda.dense().iter().map(|l| l.powf(s)).collect();
    let weights: Vec<f64> = leaf_sums_over_ancestors(&grid, &powered)
        .into_iter()
        .zip(mu.masses())
        .map(|(sum, m)| {
            if sum > 0.0 {
                m * sum.powf(-1.0 / s_conj)
            } else {
                0.0
            }
        })
        .collect();
    let integrals = cube_sums(&grid, &weights);
    let witness_values: Vec<f64> = big_lambda
        .dense()
        .iter()
        .zip(&integrals)
        .map(|(&l, &w)| if l == 0.0 { 0.0 } else { l.powf(s - 1.0) * w })
        .collect();
    let pairing: f64 = big_lambda
        .dense()
        .iter()
        .zip(&witness_values)
        .map(|(l, a)| l * a)
        .sum();

    let terms: Vec<f64> = witness_values
        .iter()
        .zip(mu.cube_masses())
        .map(|(&a, &m)| {
            if m == 0.0 || a == 0.0 {
                0.0
            } else {
                (a / m).powf(s_conj) * m
            }
        })
        .collect();
    let below = CubeCoefficients::from_dense(grid, terms)?.subtree_sums();
    let denominator = below
        .iter()
        .zip(mu.cube_masses())
        .filter(|(_, m)| **m > 0.0)
        .map(|(b, m)| (b / m).powf(1.0 / s_conj))
        .fold(0.0, f64::max);
    let ratio = if denominator == 0.0 {
        0.0
    } else {
        pairing / denominator
    };
    Ok(DualWitness {
        a1,
        witness: CubeVector::from_entries(
            grid,
            witness_values
                .iter()
                .enumerate()
                .map(|(i, &v)| (grid.cube_at(i), v)),
        )?,
        pairing,
        denominator,
        ratio,
    })
}

/// `(Σ_Q b_Q^q μ(E_Q)^{1/s̃'} μ(Q)^{1/s̃})^{1/q}` with `s̃ = s/q`.
pub fn dorverbitsky_value(
    b: &CubeCoefficients,
    mu: &LeafMeasure,
    q: f64,
    s: f64,
    allocation: &DisjointAllocation,
) -> Result<f64> {
    if !(q > 0.0 && q.is_finite() && s >= q) {
        return Err(Error::InvalidExponents(format!(
            "need 0 < q <= s, got q = {q}, s = {s}"
        )));
    }
    allocation.check_disjoint(DISJOINT_TOLERANCE)?;
    let grid = *b.grid();
    let (inv_s_tilde, exponent) = if s.is_infinite() {
        (0.0, 1.0)
    } else {
        (q / s, 1.0 - q / s)
    };
    let masses = allocation_masses(allocation, mu);
    let sum: f64 = b
        .dense()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, v)| {
            let cube_mass = mu.cube_masses()[i];
            v.powf(q)
                * allocation_power(masses[i], exponent)
                * allocation_power(cube_mass, inv_s_tilde)
        })
        .sum();
    debug_assert!(grid.num_cubes() == masses.len());
    Ok(sum.powf(1.0 / q))
}

/// Sends each leaf to the ancestor with the largest positive `b_Q` (the
/// deepest one on ties), so that `Σ_Q b_Q χ_{E_Q} = sup_Q b_Q χ_Q`.
pub fn linearizing_allocation(b: &CubeCoefficients) -> DisjointAllocation {
    let grid = *b.grid();
    let mut sets: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for (leaf, (peak, at)) in ancestor_argmax(&grid, b.dense()).into_iter().enumerate() {
        if peak > 0.0 {
            sets.entry(at)
                .or_insert_with(|| vec![0.0; grid.num_leaves()])[leaf] = 1.0;
        }
    }
    DisjointAllocation::from_sets(
        grid,
        sets.into_iter().map(|(i, f)| {
            (
                grid.cube_at(i),
                FractionalSet::from_fractions(grid, f).expect("0/1 fractions"),
            )
        }),
        0.0,
    )
    .expect("whole leaves assigned once")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

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

    fn exps(p: f64, q: f64, s: f64) -> ExponentTriple {
        ExponentTriple::new(p, q, s).unwrap()
    }

    /// λ = {root: 1}, σ = μ = (1, 1) on the grid of depth 1.
    fn instance_a() -> (GridSpec, CubeCoefficients, LeafMeasure) {
        let g = grid(1, 1);
        (
            g,
            coeffs(g, &[(CubeId::ROOT, 1.0)]),
            measure(g, &[1.0, 1.0]),
        )
    }

    fn seven_sixths() -> f64 {
        2f64.powf(7.0 / 6.0)
    }

    #[test]
    fn cond1_examples() {
        let (g, lambda, m) = instance_a();
        let e = exps(3.0, 2.0, 2.0);
        let family = CubeFamily::from_cubes(g, [CubeId::ROOT]).unwrap();
        let unit = CubeVector::from_entries(g, [(CubeId::ROOT, 1.0)]).unwrap();
        // ‖T*g‖_{L^{3/2}} = 2·2^{2/3}, μ(root)^{1/2} = 2^{1/2}
        assert_relative_eq!(
            cond1_value(&lambda, &m, &m, &e, &family, &unit).unwrap(),
            seven_sixths(),
            max_relative = 1e-14
        );
        assert_eq!(
            cond1_value(&lambda, &m, &m, &e, &family, &CubeVector::zero(g)).unwrap(),
            0.0
        );
        let zero = CubeCoefficients::zero(g);
        assert_eq!(cond1_value(&zero, &m, &m, &e, &family, &unit).unwrap(), 0.0);
        let uncovered = CubeFamily::from_cubes(g, [L0]).unwrap();
        assert_eq!(
            cond1_value(&lambda, &m, &m, &e, &uncovered, &unit),
            Err(Error::NotCovered(CubeId::ROOT))
        );
    }

    #[test]
    fn cond1_zero_denominator() {
        let g = grid(1, 1);
        let lambda = coeffs(g, &[(L1, 1.0)]);
        let sigma = measure(g, &[1.0, 1.0]);
        let mu = measure(g, &[1.0, 0.0]);
        let e = exps(3.0, 2.0, 2.0);
        let family = CubeFamily::from_cubes(g, [CubeId::ROOT, L1]).unwrap();
        let g_vec = CubeVector::from_entries(g, [(L1, 1.0)]).unwrap();
        // μ(L1) = 0 kills both numerator and denominator.
        assert_eq!(
            cond1_value(&lambda, &sigma, &mu, &e, &family, &g_vec).unwrap(),
            0.0
        );
    }

    #[test]
    fn cond2_examples() {
        let (g, lambda, m) = instance_a();
        let e = exps(3.0, 2.0, 2.0);
        let beta = [(CubeId::ROOT, 1.0)];
        let v = cond2_value(&lambda, &m, &m, &e, &beta, TestVariant::Indicator).unwrap();
        assert_relative_eq!(v, seven_sixths(), max_relative = 1e-14);
        let scaled = cond2_value(
            &lambda,
            &m,
            &m,
            &e,
            &[(CubeId::ROOT, 7.5)],
            TestVariant::Indicator,
        )
        .unwrap();
        assert_relative_eq!(scaled, v, max_relative = 1e-14);

        // λ lives on L1, β on L0: the localized test vector vanishes.
        let right = coeffs(g, &[(L1, 1.0)]);
        let off = [(L0, 1.0)];
        assert_eq!(
            cond2_value(&right, &m, &m, &e, &off, TestVariant::Localized).unwrap(),
            0.0
        );
        assert_eq!(
            cond2_value(
                &lambda,
                &m,
                &m,
                &e,
                &[(CubeId::ROOT, 0.0)],
                TestVariant::Indicator
            ),
            Err(Error::ZeroDenominator)
        );
        // T(χ_{L0}) sees the root through σ(root ∩ L0) = 1.
        let v = cond2_value(&lambda, &m, &m, &e, &[(L0, 1.0)], TestVariant::Indicator).unwrap();
        assert_relative_eq!(v, 2f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn cond2_constant_examples() {
        let (g, lambda, m) = instance_a();
        let e = exps(3.0, 2.0, 2.0);
        let config = AscentConfig::default();
        let root = CubeFamily::from_cubes(g, [CubeId::ROOT]).unwrap();
        let report =
            cond2_constant(&lambda, &m, &m, &e, &root, TestVariant::Indicator, &config).unwrap();
        assert_relative_eq!(report.value, seven_sixths(), max_relative = 1e-12);
        let zero = CubeCoefficients::zero(g);
        assert_eq!(
            cond2_constant(&zero, &m, &m, &e, &root, TestVariant::Indicator, &config)
                .unwrap()
                .value,
            0.0
        );

        let pair = CubeFamily::from_cubes(g, [CubeId::ROOT, L0]).unwrap();
        let report =
            cond2_constant(&lambda, &m, &m, &e, &pair, TestVariant::Indicator, &config).unwrap();
        let Certificate::Weights(beta) = &report.certificate else {
            panic!("weights expected")
        };
        let replay = cond2_value(&lambda, &m, &m, &e, beta, TestVariant::Indicator).unwrap();
        assert_eq!(replay, report.value);
        assert!(report.value >= seven_sixths() - 1e-9);
    }

    #[test]
    fn reduction_examples() {
        let (g, lambda, m) = instance_a();
        let e = exps(3.0, 2.0, 2.0);
        let empty = DisjointAllocation::new(g);
        let expected = 4.0 * 2f64.powf(1.0 / 3.0);
        assert_relative_eq!(
            reduction_condition_value(&lambda, &m, &m, &e, &empty).unwrap(),
            expected,
            max_relative = 1e-14
        );
        let full = DisjointAllocation::from_sets(g, [(CubeId::ROOT, FractionalSet::full(g))], 0.0)
            .unwrap();
        assert_relative_eq!(
            reduction_condition_value(&lambda, &m, &m, &e, &full).unwrap(),
            expected,
            max_relative = 1e-14
        );
        assert_eq!(
            reduction_condition_value(&CubeCoefficients::zero(g), &m, &m, &e, &full).unwrap(),
            0.0
        );
        let e4 = exps(3.0, 2.0, 4.0);
        assert_eq!(
            reduction_condition_value(&lambda, &m, &m, &e4, &empty).unwrap(),
            0.0
        );
        let sup = reduction_condition_sup(&lambda, &m, &m, &e, &AscentConfig::default()).unwrap();
        assert_eq!(sup.method, Method::Exact);
        assert_relative_eq!(sup.value, expected, max_relative = 1e-14);
    }

    #[test]
    fn reduction_sup_oracle_and_ascent_agree() {
        let g = grid(1, 1);
        let lambda = coeffs(g, &[(CubeId::ROOT, 1.0), (L0, 1.0)]);
        let m = measure(g, &[1.0, 1.0]);
        let e = exps(3.0, 2.0, f64::INFINITY);
        let oracle = reduction_condition_bruteforce(&lambda, &m, &m, &e, 16).unwrap();
        let ascent =
            reduction_condition_ascent(&lambda, &m, &m, &e, &AscentConfig::default()).unwrap();
        // a_root = 4/2 = 2, a_L0 = 1. Giving everything to the root yields
        // leaf values (4, 4); the other vertex (x_root, x_L0) = (1, 1) gives (3, 2).
        assert_relative_eq!(oracle.value, 128f64.powf(1.0 / 3.0), max_relative = 1e-9);
        assert_relative_eq!(ascent.value, oracle.value, max_relative = 1e-6);
        for report in [&oracle, &ascent] {
            let Certificate::Allocation(alloc) = &report.certificate else {
                panic!("allocation expected")
            };
            let replay = reduction_condition_value(&lambda, &m, &m, &e, alloc).unwrap();
            assert_relative_eq!(replay, report.value, max_relative = 1e-9);
        }
    }

    #[test]
    fn capped_simplex_projection() {
        let mut y = vec![0.2, 0.3];
        project_capped_simplex(&mut y);
        assert_eq!(y, vec![0.2, 0.3]);
        let mut y = vec![1.0, 1.0, -1.0];
        project_capped_simplex(&mut y);
        assert_eq!(y, vec![0.5, 0.5, 0.0]);
        let mut y = vec![2.0, 0.1];
        project_capped_simplex(&mut y);
        assert_eq!(y, vec![1.0, 0.0]);
    }

    #[test]
    fn operator_norm_examples() {
        let (g, lambda, m) = instance_a();
        let config = AscentConfig::default();
        for s in [2.0, 3.0, f64::INFINITY] {
            let e = exps(3.0, 2.0, s);
            let report = operator_norm(&lambda, &m, &m, &e, &config).unwrap();
            assert_relative_eq!(report.value, seven_sixths(), max_relative = 1e-12);
            let brute = operator_norm_bruteforce(&lambda, &m, &m, &e, 32).unwrap();
            assert_relative_eq!(brute.value, seven_sixths(), max_relative = 1e-2);
        }
        let e = exps(3.0, 2.0, 2.0);
        assert_eq!(
            operator_norm(&CubeCoefficients::zero(g), &m, &m, &e, &config)
                .unwrap()
                .value,
            0.0
        );
        assert_eq!(
            operator_norm(&lambda, &m, &LeafMeasure::zero(g), &e, &config)
                .unwrap()
                .value,
            0.0
        );
        assert_eq!(
            operator_norm(&lambda, &LeafMeasure::zero(g), &m, &e, &config),
            Err(Error::ZeroMeasure)
        );

        let point = grid(1, 0);
        let lambda = coeffs(point, &[(CubeId::ROOT, 3.0)]);
        let m = measure(point, &[2.0]);
        let exact =
            operator_ratio(&lambda, &m, &m, &e, &LeafFunction::constant(point, 1.0)).unwrap();
        assert_eq!(
            operator_norm_bruteforce(&lambda, &m, &m, &e, 8)
                .unwrap()
                .value,
            exact
        );
        assert!(matches!(
            operator_norm_bruteforce(
                &CubeCoefficients::zero(grid(1, 3)),
                &LeafMeasure::lebesgue(grid(1, 3)),
                &LeafMeasure::lebesgue(grid(1, 3)),
                &e,
                8
            ),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn operator_norm_ascent_matches_grid_search() {
        let g = grid(1, 2);
        let lambda = coeffs(g, &[(CubeId::ROOT, 0.5), (L0, 2.0), (g.leaf(3), 1.0)]);
        let sigma = measure(g, &[1.0, 0.5, 2.0, 0.25]);
        let mu = measure(g, &[0.3, 1.0, 1.0, 2.0]);
        for s in [2.0, 4.0, f64::INFINITY] {
            let e = exps(3.0, 2.0, s);
            let ascent = operator_norm(&lambda, &sigma, &mu, &e, &AscentConfig::default()).unwrap();
            let brute = operator_norm_bruteforce(&lambda, &sigma, &mu, &e, 40).unwrap();
            assert!(
                (ascent.value - brute.value).abs() <= 0.01 * brute.value,
                "{} vs {}",
                ascent.value,
                brute.value
            );
        }
    }

    #[test]
    fn weak_conditions() {
        let (g, lambda, m) = instance_a();
        let e = exps(3.0, 2.0, 2.0);
        let alpha = 1.5;
        let full = FractionalSet::full(g);
        let root = CubeFamily::from_cubes(g, [CubeId::ROOT]).unwrap();
        let unit = CubeVector::from_entries(g, [(CubeId::ROOT, 1.0)]).unwrap();
        let normalizer = 2f64.powf((2.0 - alpha) / (2.0 * alpha));
        let strong = cond1_value(&lambda, &m, &m, &e, &root, &unit).unwrap();
        let weak = weak_cond1_value(&lambda, &m, &m, &e, alpha, &full, &root, &unit).unwrap();
        assert_relative_eq!(weak, strong / normalizer, max_relative = 1e-14);
        assert_eq!(
            weak_cond1_value(
                &lambda,
                &m,
                &m,
                &e,
                alpha,
                &full,
                &root,
                &CubeVector::zero(g)
            )
            .unwrap(),
            0.0
        );

        // E = L0: μ|_E = (1, 0); T*g = 1 on both leaves, so the term is
        // ‖1‖_{L^{3/2}(σ)} / 1 = 2^{2/3}, divided by 1^{...} = 1.
        let left = FractionalSet::cube(g, L0);
        let v = weak_cond1_value(&lambda, &m, &m, &e, alpha, &left, &root, &unit).unwrap();
        assert_relative_eq!(v, 2f64.powf(2.0 / 3.0), max_relative = 1e-14);

        let beta = [(CubeId::ROOT, 1.0)];
        let strong = cond2_value(&lambda, &m, &m, &e, &beta, TestVariant::Indicator).unwrap();
        for reading in [WeakReading::Printed, WeakReading::Alternate] {
            let v = weak_cond2_value(
                &lambda,
                &m,
                &m,
                &e,
                alpha,
                &full,
                &beta,
                TestVariant::Indicator,
                reading,
            )
            .unwrap();
            let expected = match reading {
                // single cube: the inner exponent is irrelevant
                WeakReading::Printed => strong / normalizer,
                WeakReading::Alternate => {
                    2f64.powf(2.0 / 3.0) * 2f64.powf(1.0 / alpha) / normalizer
                }
            };
            assert_relative_eq!(v, expected, max_relative = 1e-14);
        }
        assert!(weak_cond1_value(&lambda, &m, &m, &e, 2.5, &full, &root, &unit).is_err());
        assert_eq!(
            weak_cond1_value(
                &lambda,
                &m,
                &m,
                &e,
                alpha,
                &FractionalSet::empty(g),
                &root,
                &unit
            ),
            Err(Error::EmptySet)
        );
    }

    #[test]
    fn dual_witness_examples() {
        let (g, lambda, m) = instance_a();
        for s in [1.5, 2.0, 4.0] {
            let w = a1_a2_witness(&lambda, &m, s).unwrap();
            assert_relative_eq!(w.a1, 2.0, max_relative = 1e-14);
            assert_relative_eq!(w.witness.get(CubeId::ROOT), 2.0, max_relative = 1e-14);
            assert_relative_eq!(w.denominator, 1.0, max_relative = 1e-14);
            assert_relative_eq!(w.ratio, 2.0, max_relative = 1e-14);
        }
        let w = a1_a2_witness(&CubeCoefficients::zero(g), &m, 2.0).unwrap();
        assert_eq!((w.a1, w.ratio), (0.0, 0.0));
        let lop = measure(g, &[1.0, 0.0]);
        let w = a1_a2_witness(&coeffs(g, &[(L1, 3.0)]), &lop, 2.0).unwrap();
        assert_eq!(w.a1, 0.0);
    }

    #[test]
    fn dorverbitsky_examples() {
        let (g, b, m) = instance_a();
        let half = FractionalSet::from_fractions(g, vec![0.5, 0.0]).unwrap();
        let alloc = DisjointAllocation::from_sets(g, [(CubeId::ROOT, half)], 0.0).unwrap();
        assert_relative_eq!(
            dorverbitsky_value(&b, &m, 2.0, 4.0, &alloc).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            dorverbitsky_value(&b, &m, 2.0, 2.0, &alloc).unwrap(),
            2f64.sqrt(),
            max_relative = 1e-14
        );
        assert_eq!(
            dorverbitsky_value(&CubeCoefficients::zero(g), &m, 2.0, 4.0, &alloc).unwrap(),
            0.0
        );
    }

    #[test]
    fn linearizing_allocation_attains_the_maximal_function() {
        let g = grid(1, 2);
        let b = coeffs(
            g,
            &[
                (CubeId::ROOT, 1.0),
                (L0, 3.0),
                (g.leaf(1), 3.0),
                (g.leaf(3), 0.5),
            ],
        );
        let m = measure(g, &[1.0, 2.0, 0.5, 0.25]);
        let alloc = linearizing_allocation(&b);
        assert_eq!(
            alloc.get(g.leaf(1)).unwrap().fractions(),
            &[0.0, 1.0, 0.0, 0.0]
        );
        assert_eq!(alloc.get(L0).unwrap().fractions(), &[1.0, 0.0, 0.0, 0.0]);
        let target = crate::operator::maximal_multiplier(&b).lp_norm(2.0, &m);
        let value = dorverbitsky_value(&b, &m, 2.0, f64::INFINITY, &alloc).unwrap();
        assert_relative_eq!(value, target, max_relative = 1e-14);
    }
}
