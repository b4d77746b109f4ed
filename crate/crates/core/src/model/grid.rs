use serde::Serialize;

use super::Vec3;
use crate::error::{Error, Result};

/// A node of the clipped Cartesian velocity grid.
///
/// `odd` holds the lattice coordinates in half-spacing units: the center is
/// `odd * h / 2` with every component an odd integer. Integer coordinates
/// make the ball test exact and keep the node set symmetric bit for bit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridNode {
    pub index: [usize; 3],
    pub odd: [i32; 3],
    pub center: Vec3,
    pub weight: f64,
}

/// Cell-centered uniform Cartesian grid restricted to the closed ball `|v| <= R`.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityGrid {
    radius: f64,
    cells_per_axis: usize,
    spacing: f64,
    nodes: Vec<GridNode>,
    lookup: Vec<u32>,
}

const NO_NODE: u32 = u32::MAX;

impl VelocityGrid {
    /// Builds the grid with `n` cells per axis over `[-R, R]^3`, keeping the
    /// cell centers inside the closed ball of radius `R`.
    pub fn new(radius: f64, n: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Config(format!("grid radius must be positive, got {radius}")));
        }
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "cells per axis must be even and at least 4, got {n}"
            )));
        }
        if n > 1024 {
            return Err(Error::Config(format!("cells per axis {n} is unreasonably large")));
        }
        let spacing = 2.0 * radius / n as f64;
        let half = 0.5 * spacing;
        let weight = spacing * spacing * spacing;
        let limit = (n * n) as i64;
        let mut nodes = Vec::new();
        let mut lookup = vec![NO_NODE; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let odd = [odd_coord(i, n), odd_coord(j, n), odd_coord(k, n)];
                    let r2: i64 = odd.iter().map(|&c| (c as i64) * (c as i64)).sum();
                    if r2 > limit {
                        continue;
                    }
                    lookup[(i * n + j) * n + k] = nodes.len() as u32;
                    nodes.push(GridNode {
                        index: [i, j, k],
                        odd,
                        center: Vec3::new(
                            odd[0] as f64 * half,
                            odd[1] as f64 * half,
                            odd[2] as f64 * half,
                        ),
                        weight,
                    });
                }
            }
        }
        Ok(VelocityGrid {
            radius,
            cells_per_axis: n,
            spacing,
            nodes,
            lookup,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    /// Node spacing `h = 2R/n`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Common node weight `h^3`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing * self.spacing * self.spacing
    }

    pub fn nodes(&self) -> &[GridNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    /// Node position in the node list for Cartesian cell index `(i, j, k)`.
    pub fn node_at(&self, index: [usize; 3]) -> Option<usize> {
        let n = self.cells_per_axis;
        if index.iter().any(|&c| c >= n) {
            return None;
        }
        match self.lookup[(index[0] * n + index[1]) * n + index[2]] {
            NO_NODE => None,
            id => Some(id as usize),
        }
    }

    /// Node position for lattice coordinates in half-spacing units.
    pub fn node_at_odd(&self, odd: [i32; 3]) -> Option<usize> {
        let n = self.cells_per_axis as i32;
        let mut index = [0usize; 3];
        for a in 0..3 {
            let c = odd[a];
            if c % 2 == 0 || c.abs() >= n {
                return None;
            }
            index[a] = ((c + n - 1) / 2) as usize;
        }
        self.node_at(index)
    }

    /// Radius beyond which the trilinear interpolant of any field on this grid vanishes.
    pub fn support_radius(&self) -> f64 {
        let far = self
            .nodes
            .iter()
            .map(|n| n.center.norm())
            .fold(0.0_f64, f64::max);
        far + 3.0_f64.sqrt() * self.spacing
    }

    /// Center of the lattice point with odd coordinates `odd`.
    #[inline]
    pub fn center_of_odd(&self, odd: [i32; 3]) -> Vec3 {
        let half = 0.5 * self.spacing;
        Vec3::new(odd[0] as f64 * half, odd[1] as f64 * half, odd[2] as f64 * half)
    }

    /// Odd coordinates of the points of the infinite lattice sharing this
    /// grid's spacing and alignment that lie in the closed ball of radius
    /// `r`, in lexicographic order. Used for integration domains that extend
    /// past the grid.
    pub fn lattice_odd_within(&self, r: f64) -> Vec<[i32; 3]> {
        let half = 0.5 * self.spacing;
        let kmax = (r / half).floor() as i32 + 1;
        let r2 = r * r;
        let odds: Vec<i32> = (-kmax..=kmax).filter(|c| c.rem_euclid(2) == 1).collect();
        let mut out = Vec::new();
        for &a in &odds {
            for &b in &odds {
                for &c in &odds {
                    if self.center_of_odd([a, b, c]).norm_sqr() <= r2 {
                        out.push([a, b, c]);
                    }
                }
            }
        }
        out
    }

    /// Trilinear interpolation stencil at `u`: node ids and weights of the
    /// corners that are grid nodes. Returns the number of valid entries.
    pub(crate) fn stencil(&self, u: Vec3) -> ([u32; 8], [f64; 8], usize) {
        let mut ids = [0u32; 8];
        let mut wts = [0.0; 8];
        let n = self.cells_per_axis;
        let inv_h = 1.0 / self.spacing;
        let shift = 0.5 * (n as f64 - 1.0);
        let s = [u.x * inv_h + shift, u.y * inv_h + shift, u.z * inv_h + shift];
        let lim = n as f64;
        if !s.iter().all(|&c| c >= -1.0 && c < lim) {
            return (ids, wts, 0);
        }
        let fl = [s[0].floor(), s[1].floor(), s[2].floor()];
        let t = [s[0] - fl[0], s[1] - fl[1], s[2] - fl[2]];
        let mut count = 0;
        for corner in 0..8 {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            let mut inside = true;
            for a in 0..3 {
                let up = (corner >> (2 - a)) & 1 == 1;
                let c = fl[a] as i64 + up as i64;
                w *= if up { t[a] } else { 1.0 - t[a] };
                if c < 0 || c >= n as i64 {
                    inside = false;
                } else {
                    idx[a] = c as usize;
                }
            }
            if !inside || w == 0.0 {
                continue;
            }
            if let Some(id) = self.node_at(idx) {
                ids[count] = id as u32;
                wts[count] = w;
                count += 1;
            }
        }
        (ids, wts, count)
    }

    /// Centers matching [`VelocityGrid::lattice_odd_within`].
    pub fn lattice_points_within(&self, r: f64) -> Vec<Vec3> {
        self.lattice_odd_within(r)
            .into_iter()
            .map(|o| self.center_of_odd(o))
            .collect()
    }
}

#[inline]
fn odd_coord(i: usize, n: usize) -> i32 {
    2 * i as i32 - n as i32 + 1
}

/// Convenience constructor mirroring [`VelocityGrid::new`].
pub fn make_velocity_grid(radius: f64, n: usize) -> Result<VelocityGrid> {
    VelocityGrid::new(radius, n)
}
