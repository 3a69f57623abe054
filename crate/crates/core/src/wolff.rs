//! Dyadic Wolff potentials
//! `W(f)(x) = Σ_{Q ∋ x} (∫_Q f dx / |Q|^{1-α/n})^s`
//! with respect to Lebesgue measure, their sparse restrictions, and the
//! two-weight condition they lead to.

use crate::error::{Error, Result};
use crate::grid::{CubeId, GridSpec};
use crate::measure::{lp_norm, LeafFunction, LeafMeasure};
use crate::operator::{leaf_sums_over_ancestors, ExponentTriple};
use crate::sparse::{stopping_family, CubeFamily};

/// Order `α` and power `s` of a Wolff potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolffParams {
    pub alpha: f64,
    pub s: f64,
}

impl WolffParams {
    /// Requires `0 < α < dim` and `s > 0`.
    pub fn new(alpha: f64, s: f64, dim: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha < dim as f64) {
            return Err(Error::InvalidValue(format!(
                "need 0 < alpha < {dim}, got {alpha}"
            )));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidValue(format!("need s > 0, got {s}")));
        }
        Ok(WolffParams { alpha, s })
    }

    /// `|Q|^{α/n - 1}`.
    fn scale(&self, grid: &GridSpec, cube: CubeId) -> f64 {
        grid.volume(cube).powf(self.alpha / grid.dim() as f64 - 1.0)
    }
}

fn potential(
    f: &LeafFunction,
    w: &WolffParams,
    keep: impl Fn(CubeId) -> bool,
) -> Result<LeafFunction> {
    if !f.is_nonneg() {
        return Err(Error::InvalidValue("Wolff potentials need f >= 0".into()));
    }
    let grid = *f.grid();
    let integrals = f.cube_integrals(&LeafMeasure::lebesgue(grid));
    let terms: Vec<f64> = integrals
        .iter()
        .enumerate()
        .map(|(i, integral)| {
            let cube = grid.cube_at(i);
            if keep(cube) {
                (integral * w.scale(&grid, cube)).powf(w.s)
            } else {
                0.0
            }
        })
        .collect();
    LeafFunction::nonneg(grid, leaf_sums_over_ancestors(&grid, &terms))
}

/// The dyadic Wolff potential over all cubes of the grid.
pub fn wolff_dyadic(f: &LeafFunction, w: &WolffParams) -> Result<LeafFunction> {
    potential(f, w, |_| true)
}

/// The Wolff potential with the sum restricted to `family`.
pub fn wolff_sparse(
    f: &LeafFunction,
    w: &WolffParams,
    family: &CubeFamily,
) -> Result<LeafFunction> {
    potential(f, w, |q| family.contains(q))
}

/// Stopping cubes of `f` for Lebesgue measure with the given threshold
/// (2 is the usual choice).
pub fn wolff_sparse_family(f: &LeafFunction, threshold: f64) -> Result<CubeFamily> {
    if f.is_zero() {
        return Err(Error::ZeroFunction);
    }
    stopping_family(f, &LeafMeasure::lebesgue(*f.grid()), threshold)
}

/// `max_ℓ W(f)(ℓ) / W_S(f)(ℓ)` over leaves where the full potential is
/// positive; infinite if the sparse potential vanishes there.
pub fn domination_ratio(full: &LeafFunction, sparse: &LeafFunction) -> f64 {
    full.values()
        .iter()
        .zip(sparse.values())
        .filter(|(d, _)| **d > 0.0)
        .map(|(d, s)| if *s > 0.0 { d / s } else { f64::INFINITY })
        .fold(0.0, f64::max)
}

/// `‖Σ_{Q∈S} (|Q|^{α/n-1} σ(Q))^q μ(Q) σ(Q)^{-1} χ_Q‖_{L^{p̃'}(σ)}`,
/// which does not involve `s`.
pub fn wolff_condition_value(
    sigma: &LeafMeasure,
    mu: &LeafMeasure,
    e: &ExponentTriple,
    w: &WolffParams,
    family: &CubeFamily,
) -> f64 {
    let grid = *sigma.grid();
    let per_cube: Vec<f64> = grid
        .enumerate_cubes()
        .map(|q| {
            let sm = *sigma.cube_mass(q);
            if !family.contains(q) || sm == 0.0 {
                return 0.0;
            }
            (w.scale(&grid, q) * sm).powf(e.q) * mu.cube_mass(q) / sm
        })
        .collect();
    lp_norm(
        &leaf_sums_over_ancestors(&grid, &per_cube),
        e.p_tilde_conj(),
        sigma.masses(),
    )
}
