use std::sync::Arc;

use super::{Vec3, VelocityGrid};
use crate::error::{Error, Result};

/// Anything that can be evaluated pointwise in velocity (or momentum) space
/// and vanishes outside a known ball.
pub trait Field: Sync {
    fn value(&self, v: Vec3) -> f64;

    /// Radius outside of which `value` is zero.
    fn support_radius(&self) -> f64;
}

/// Nonnegative samples of a distribution function on a [`VelocityGrid`].
///
/// Off-node values come from trilinear interpolation with zero extension
/// outside the grid ball.
#[derive(Clone, Debug)]
pub struct DistributionField {
    grid: Arc<VelocityGrid>,
    values: Vec<f64>,
    // (n + 2)^3 cube holding the node values with a one-cell zero border.
    padded: Vec<f64>,
    inv_h: f64,
    // f is identically plateau.1 on |u|^2 <= plateau.0 (negative when none)
    plateau: (f64, f64),
    // maps a coordinate to cell units shifted by one, so the padded cube
    // starts at 0
    offset: f64,
}

impl PartialEq for DistributionField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl DistributionField {
    pub fn from_values(grid: Arc<VelocityGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Argument(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::Argument(format!(
                "field value {v} at node {i} is negative or not finite"
            )));
        }
        let n = grid.cells_per_axis();
        let p = n + 2;
        let mut padded = vec![0.0; p * p * p];
        for (node, &val) in grid.nodes().iter().zip(&values) {
            let [i, j, k] = node.index;
            padded[((i + 1) * p + (j + 1)) * p + (k + 1)] = val;
        }
        let inv_h = 1.0 / grid.spacing();
        let offset = 0.5 * (n as f64 - 1.0) + 1.0;
        let plateau = plateau(&grid, &values);
        Ok(DistributionField {
            grid,
            values,
            padded,
            inv_h,
            plateau,
            offset,
        })
    }

    pub fn zeros(grid: Arc<VelocityGrid>) -> Self {
        let n = grid.len();
        Self::from_values(grid, vec![0.0; n]).expect("zeros are a valid field")
    }

    /// `height * chi_{B_r}` realized as an exact node mask.
    pub fn indicator(grid: Arc<VelocityGrid>, r: f64, height: f64) -> Result<Self> {
        let values = grid
            .nodes()
            .iter()
            .map(|n| if n.center.norm() <= r { height } else { 0.0 })
            .collect();
        Self::from_values(grid, values)
    }

    pub fn from_fn(grid: Arc<VelocityGrid>, f: impl Fn(Vec3) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|n| f(n.center)).collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &Arc<VelocityGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_values(self.grid.clone(), self.values.iter().map(|v| c * v).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Trilinear interpolant of the node values, zero outside the grid ball.
    #[inline(always)]
    pub fn interpolate(&self, u: Vec3) -> f64 {
        if u.norm_sqr() <= self.plateau.0 {
            return self.plateau.1;
        }
        let p = self.grid.cells_per_axis() + 2;
        let lim = (p - 1) as f64;
        let sx = u.x * self.inv_h + self.offset;
        let sy = u.y * self.inv_h + self.offset;
        let sz = u.z * self.inv_h + self.offset;
        // every corner must lie in the padded cube
        if !(sx >= 0.0 && sx < lim && sy >= 0.0 && sy < lim && sz >= 0.0 && sz < lim) {
            return 0.0;
        }
        // truncation is floor for nonnegative values
        let (i, j, k) = (sx as i32, sy as i32, sz as i32);
        let (tx, ty, tz) = (sx - i as f64, sy - j as f64, sz - k as f64);
        let (i, j, k) = (i as usize, j as usize, k as usize);
        let base = (i * p + j) * p + k;
        let c = &self.padded[base..base + p * p + p + 2];
        let c000 = c[0];
        let c001 = c[1];
        let c010 = c[p];
        let c011 = c[p + 1];
        let c100 = c[p * p];
        let c101 = c[p * p + 1];
        let c110 = c[p * p + p];
        let c111 = c[p * p + p + 1];
        let c00 = c000 + (c001 - c000) * tz;
        let c01 = c010 + (c011 - c010) * tz;
        let c10 = c100 + (c101 - c100) * tz;
        let c11 = c110 + (c111 - c110) * tz;
        let c0 = c00 + (c01 - c00) * ty;
        let c1 = c10 + (c11 - c10) * ty;
        (c0 + (c1 - c0) * tx).max(0.0)
    }

    /// Largest node value minus smallest node value over nodes with `|v| <= r`.
    pub fn spread_on_ball(&self, r: f64) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (node, &v) in self.grid.nodes().iter().zip(&self.values) {
            if node.center.norm() <= r {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }
}

/// Largest centered ball on which the interpolant is a constant, as
/// `(radius^2, value)`. A point is inside when every corner of its cell is a
/// node carrying that value; corners lie within `sqrt(3) h` of the point.
fn plateau(grid: &VelocityGrid, values: &[f64]) -> (f64, f64) {
    let none = (-1.0, 0.0);
    let Some(first) = grid.nodes().iter().position(|n| n.odd.iter().all(|c| c.abs() == 1)) else {
        return none;
    };
    let c = values[first];
    // radius of the first node (or lattice point outside the grid) that breaks the plateau
    let mut broken = grid.radius();
    for (node, &v) in grid.nodes().iter().zip(values) {
        if v != c {
            broken = broken.min(node.center.norm());
        }
    }
    let r = broken - 3f64.sqrt() * grid.spacing();
    // stay strictly inside so rounding in |u|^2 cannot reach a foreign corner
    let r = r * (1.0 - 1e-12);
    if r > 0.0 {
        (r * r, c)
    } else {
        none
    }
}

impl Field for DistributionField {
    fn value(&self, v: Vec3) -> f64 {
        self.interpolate(v)
    }

    fn support_radius(&self) -> f64 {
        self.grid.support_radius()
    }
}

/// `height * chi_{B_r}` evaluated exactly, closed ball.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallIndicator {
    pub radius: f64,
    pub height: f64,
}

impl BallIndicator {
    pub fn new(radius: f64, height: f64) -> Self {
        BallIndicator { radius, height }
    }
}

impl Field for BallIndicator {
    fn value(&self, v: Vec3) -> f64 {
        if v.norm_sqr() <= self.radius * self.radius {
            self.height
        } else {
            0.0
        }
    }

    fn support_radius(&self) -> f64 {
        self.radius
    }
}

/// A closure with a declared support radius.
pub struct FnField<F> {
    pub f: F,
    pub radius: f64,
}

impl<F: Fn(Vec3) -> f64 + Sync> FnField<F> {
    pub fn new(f: F, radius: f64) -> Self {
        FnField { f, radius }
    }
}

impl<F: Fn(Vec3) -> f64 + Sync> Field for FnField<F> {
    fn value(&self, v: Vec3) -> f64 {
        if v.norm_sqr() > self.radius * self.radius {
            0.0
        } else {
            (self.f)(v)
        }
    }

    fn support_radius(&self) -> f64 {
        self.radius
    }
}
