//! Finite dyadic system on the unit cube `[0,1)^n`.
//!
//! Cubes are addressed by `(level, code)` where `code` is the Morton code of
//! the cube inside its level: each refinement appends an `n`-bit digit whose
//! bit `n-1-c` is the half chosen along coordinate `c`. Ordering leaves by
//! code gives a lexicographic depth-first order in which the leaves under
//! any cube form one contiguous block, and the blocks of the `2^n` children
//! appear consecutively in child order.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n * depth` accepted; keeps leaf arrays below 2^24 entries.
pub const MAX_LEAF_BITS: u32 = 24;

/// A dyadic grid of dimension `dim` refined `depth` times below the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    dim: u32,
    depth: u32,
}

/// A dyadic cube: `level` refinements below the root, Morton `code` within
/// that level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CubeId {
    pub level: u32,
    pub code: u64,
}

impl CubeId {
    pub const ROOT: CubeId = CubeId { level: 0, code: 0 };

    pub fn is_root(&self) -> bool {
        self.level == 0
    }
}

impl fmt::Display for CubeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q[{}:{}]", self.level, self.code)
    }
}

impl GridSpec {
    pub fn new(dim: u32, depth: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if dim.saturating_mul(depth) > MAX_LEAF_BITS {
            return Err(Error::InvalidGrid(format!(
                "dimension * depth = {} exceeds {MAX_LEAF_BITS}",
                dim * depth
            )));
        }
        Ok(GridSpec { dim, depth })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Number of children of every non-leaf cube.
    pub fn branching(&self) -> usize {
        1 << self.dim
    }

    pub fn cubes_at_level(&self, level: u32) -> usize {
        1usize << (self.dim * level)
    }

    pub fn num_leaves(&self) -> usize {
        self.cubes_at_level(self.depth)
    }

    pub fn num_cubes(&self) -> usize {
        self.level_offset(self.depth + 1)
    }

    /// Position of the first cube of `level` in [`GridSpec::enumerate_cubes`].
    pub fn level_offset(&self, level: u32) -> usize {
        (0..level).map(|k| self.cubes_at_level(k)).sum()
    }

    pub fn contains_cube(&self, cube: CubeId) -> bool {
        cube.level <= self.depth && (cube.code as usize) < self.cubes_at_level(cube.level)
    }

    /// Dense index of `cube` in the `(level, code)` enumeration.
    pub fn linear_index(&self, cube: CubeId) -> usize {
        debug_assert!(self.contains_cube(cube));
        self.level_offset(cube.level) + cube.code as usize
    }

    pub fn cube_at(&self, linear: usize) -> CubeId {
        let mut rest = linear;
        for level in 0..=self.depth {
            let count = self.cubes_at_level(level);
            if rest < count {
                return CubeId {
                    level,
                    code: rest as u64,
                };
            }
            rest -= count;
        }
        panic!("linear cube index {linear} out of range");
    }

    /// All cubes sorted by level, then canonical order within the level.
    pub fn enumerate_cubes(&self) -> impl Iterator<Item = CubeId> + '_ {
        (0..=self.depth).flat_map(move |level| {
            (0..self.cubes_at_level(level) as u64).map(move |code| CubeId { level, code })
        })
    }

    pub fn leaf(&self, index: usize) -> CubeId {
        CubeId {
            level: self.depth,
            code: index as u64,
        }
    }

    /// Canonical-order leaf range covered by `cube`.
    pub fn leaves_under(&self, cube: CubeId) -> Range<usize> {
        let span = 1usize << (self.dim * (self.depth - cube.level));
        let start = cube.code as usize * span;
        start..start + span
    }

    pub fn parent(&self, cube: CubeId) -> Option<CubeId> {
        (cube.level > 0).then(|| CubeId {
            level: cube.level - 1,
            code: cube.code >> self.dim,
        })
    }

    pub fn children(&self, cube: CubeId) -> impl Iterator<Item = CubeId> {
        let dim = self.dim;
        let at_bottom = cube.level >= self.depth;
        let count = if at_bottom { 0 } else { 1u64 << dim };
        (0..count).map(move |digit| CubeId {
            level: cube.level + 1,
            code: (cube.code << dim) | digit,
        })
    }

    /// The ancestor of `cube` at `level` (`level <= cube.level`).
    pub fn ancestor_at(&self, cube: CubeId, level: u32) -> CubeId {
        debug_assert!(level <= cube.level);
        CubeId {
            level,
            code: cube.code >> (self.dim * (cube.level - level)),
        }
    }

    /// Chain of cubes from the root down to `cube` (inclusive).
    pub fn ancestors(&self, cube: CubeId) -> Vec<CubeId> {
        (0..=cube.level)
            .map(|k| self.ancestor_at(cube, k))
            .collect()
    }

    /// All cubes contained in `cube`, itself first, level by level.
    pub fn descendants(&self, cube: CubeId) -> impl Iterator<Item = CubeId> {
        let dim = self.dim;
        (cube.level..=self.depth).flat_map(move |level| {
            let span = 1u64 << (dim * (level - cube.level));
            (cube.code * span..(cube.code + 1) * span).map(move |code| CubeId { level, code })
        })
    }

    /// Whether `inner ⊆ outer`.
    pub fn is_subcube(&self, inner: CubeId, outer: CubeId) -> bool {
        inner.level >= outer.level && self.ancestor_at(inner, outer.level) == outer
    }

    /// Lebesgue volume `2^{-kn}`.
    pub fn volume(&self, cube: CubeId) -> f64 {
        (2.0f64).powi(-((cube.level * self.dim) as i32))
    }

    /// Integer coordinates `j` with `Q = 2^{-k}([0,1)^n + j)`.
    pub fn coords(&self, cube: CubeId) -> Vec<u64> {
        let mut coords = vec![0u64; self.dim as usize];
        for step in 0..cube.level {
            let digit = (cube.code >> (self.dim * (cube.level - 1 - step))) & ((1 << self.dim) - 1);
            for (c, coord) in coords.iter_mut().enumerate() {
                let bit = (digit >> (self.dim as usize - 1 - c)) & 1;
                *coord = (*coord << 1) | bit;
            }
        }
        coords
    }

    pub fn cube_from_coords(&self, level: u32, coords: &[u64]) -> Result<CubeId> {
        if level > self.depth {
            return Err(Error::InvalidCube(format!(
                "level {level} exceeds depth {}",
                self.depth
            )));
        }
        if coords.len() != self.dim as usize {
            return Err(Error::InvalidCube(format!(
                "expected {} coordinates, got {}",
                self.dim,
                coords.len()
            )));
        }
        let side = 1u64 << level;
        if let Some(bad) = coords.iter().find(|&&j| j >= side) {
            return Err(Error::InvalidCube(format!(
                "coordinate {bad} out of range for level {level}"
            )));
        }
        let mut code = 0u64;
        for step in 0..level {
            let shift = level - 1 - step;
            let mut digit = 0u64;
            for &j in coords {
                digit = (digit << 1) | ((j >> shift) & 1);
            }
            code = (code << self.dim) | digit;
        }
        Ok(CubeId { level, code })
    }
}
