//! Uniform grids for the long interval and the cross section.
//!
//! Boundary nodes are never stored: all grids carry interior nodes only and
//! homogeneous Dirichlet data is implicit.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::util;

/// Divisibility tolerance for cross-section spacings.
const DIVISIBILITY_TOL: f64 = 1e-12;

/// Uniform grid on the interval `(-ell, ell)`, interior nodes only.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    ell: f64,
    n: usize,
    h: f64,
    nodes: Vec<f64>,
}

impl Grid1D {
    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Interior node count.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Interior nodes `x_i = -ell + i*h`, `i = 1..=n`, strictly increasing.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

/// Build the interior grid of `(-ell, ell)` with `n` nodes, `h = 2 ell / (n+1)`.
pub fn build_interval_grid(ell: f64, n: usize) -> Result<Grid1D> {
    if !(ell > 0.0) || !ell.is_finite() {
        return Err(Error::invalid("interval half-length must be positive"));
    }
    if n == 0 {
        return Err(Error::invalid("interval grid needs at least one node"));
    }
    let h = 2.0 * ell / (n + 1) as f64;
    let nodes = (1..=n).map(|i| -ell + i as f64 * h).collect();
    Ok(Grid1D { ell, n, h, nodes })
}

/// Supported cross-section shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossSectionShape {
    /// The interval `(-1, 1)`.
    Interval,
    /// The L-shaped polygon `(0,2)x(0,1) ∪ (0,1)x(1,2)`.
    LShape,
}

/// Structured cross-section grid with a bijection between interior lattice
/// points and contiguous indices (lexicographic by coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSectionGrid {
    shape: CrossSectionShape,
    h: f64,
    n: usize,
    coords: Vec<[f64; 2]>,
    /// L-shape only: multi-index (i2, i3) per interior node.
    multi_index: Vec<(u32, u32)>,
    /// L-shape only: lattice map of size (2k+1)^2, -1 for non-interior.
    lattice: Vec<i32>,
    /// L-shape only: cells per unit edge, k = 1/h.
    cells_per_unit: usize,
}

impl CrossSectionGrid {
    pub fn shape(&self) -> CrossSectionShape {
        self.shape
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Interior node count.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Spatial dimension of the cross section.
    pub fn dim(&self) -> usize {
        match self.shape {
            CrossSectionShape::Interval => 1,
            CrossSectionShape::LShape => 2,
        }
    }

    /// Quadrature weight per node: `h` in 1D, `h^2` in 2D.
    pub fn node_weight(&self) -> f64 {
        match self.shape {
            CrossSectionShape::Interval => self.h,
            CrossSectionShape::LShape => self.h * self.h,
        }
    }

    /// Coordinates per index. For the interval the second component is 0.
    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    /// L-shape: lattice multi-indices parallel to `coords`.
    pub fn multi_indices(&self) -> &[(u32, u32)] {
        &self.multi_index
    }

    /// L-shape: interior index at lattice point (i2, i3), if interior.
    pub fn index_at(&self, i2: i64, i3: i64) -> Option<usize> {
        if self.shape != CrossSectionShape::LShape {
            return None;
        }
        let side = 2 * self.cells_per_unit as i64 + 1;
        if i2 < 0 || i3 < 0 || i2 >= side || i3 >= side {
            return None;
        }
        let v = self.lattice[(i2 * side + i3) as usize];
        (v >= 0).then_some(v as usize)
    }
}

/// True iff the lattice point `(i2*h, i3*h)` lies strictly inside the
/// L-shape. `k` is the number of cells per unit edge. Integer arithmetic,
/// so the interface segment `x3 = 1, 0 < x2 < 1` is interior while the
/// reentrant corner and the leg extensions are boundary.
fn lshape_interior(i2: i64, i3: i64, k: i64) -> bool {
    (0 < i2 && i2 < 2 * k && 0 < i3 && i3 < k) || (0 < i2 && i2 < k && 0 < i3 && i3 < 2 * k)
}

/// Build a cross-section grid with spacing `h`. The spacing must divide the
/// shape's unit edge lengths exactly (interval: 2, L-shape: 1) within 1e-12.
pub fn build_cross_section(shape: CrossSectionShape, h: f64) -> Result<CrossSectionGrid> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid("cross-section spacing must be positive"));
    }
    match shape {
        CrossSectionShape::Interval => {
            let m = util::round(2.0 / h);
            if util::abs(m * h - 2.0) > DIVISIBILITY_TOL || m < 2.0 {
                return Err(Error::invalid("spacing must divide the interval length 2"));
            }
            let cells = m as usize;
            let n = cells - 1;
            let coords = (1..=n).map(|i| [-1.0 + i as f64 * h, 0.0]).collect();
            Ok(CrossSectionGrid {
                shape,
                h,
                n,
                coords,
                multi_index: Vec::new(),
                lattice: Vec::new(),
                cells_per_unit: 0,
            })
        }
        CrossSectionShape::LShape => {
            let m = util::round(1.0 / h);
            if util::abs(m * h - 1.0) > DIVISIBILITY_TOL || m < 2.0 {
                return Err(Error::invalid("spacing must divide the L-shape edge length 1"));
            }
            let k = m as usize;
            let side = 2 * k + 1;
            let mut lattice = alloc::vec![-1i32; side * side];
            let mut coords = Vec::new();
            let mut multi_index = Vec::new();
            // Lexicographic by (x2, x3): x3 varies fastest.
            for i2 in 0..side as i64 {
                for i3 in 0..side as i64 {
                    if lshape_interior(i2, i3, k as i64) {
                        lattice[(i2 as usize) * side + i3 as usize] = coords.len() as i32;
                        coords.push([i2 as f64 * h, i3 as f64 * h]);
                        multi_index.push((i2 as u32, i3 as u32));
                    }
                }
            }
            let n = coords.len();
            Ok(CrossSectionGrid {
                shape,
                h,
                n,
                coords,
                multi_index,
                lattice,
                cells_per_unit: k,
            })
        }
    }
}
