//! Quadrature of the gain term `Q+(f, f)(v)`.
//!
//! Classical regime:
//!
//! ```text
//! Q+(f, f)(v) = sum_w sum_n h^3 w_n max(0, n . (v - w)) f(v') f(w')
//! ```
//!
//! with `w` running over the lattice of the field's grid (extended as far as
//! any partner can contribute), `n` over the sphere rule and `f` evaluated by
//! trilinear interpolation. The relativistic regime has the same shape with
//! momenta, the kernel `k(p, q, w)` and the map `p' = p + a w`.
//!
//! Each point is reduced in a fixed order (per-partner sums combined by
//! pairwise summation), so results do not depend on the thread count.

mod tensor;

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

pub use tensor::GainTensor;

use crate::error::{Error, Result};
use crate::model::{DistributionField, KernelSpec, Regime, SphereQuadrature, Vec3, VelocityGrid};
use crate::relativistic::{energy, kernel_k_unchecked, offset_a_unchecked};
use crate::sum::pairwise_sum;
use crate::symmetry::{field_group, orbits, quadrature_group, SignedPermutation};

/// Gain quadrature for one kernel and sphere rule.
#[derive(Clone, Debug)]
pub struct GainOperator {
    kernel: KernelSpec,
    sphere: SphereQuadrature,
    sphere_group: Vec<SignedPermutation>,
    fault_scale: f64,
}

/// Lattice of collision partners for fields on one grid.
pub(crate) struct PartnerSet {
    pub points: Vec<Vec3>,
    /// `|w|^2` classically, the energy `q0` relativistically; ascending.
    pub aux: Vec<f64>,
    pub cell_volume: f64,
    pub support: f64,
}

const CHUNK: usize = 512;
const PRUNE_BLOCK: usize = 32;

impl GainOperator {
    pub fn new(kernel: KernelSpec, sphere: SphereQuadrature) -> Result<Self> {
        kernel.validate()?;
        let sphere_group = quadrature_group(&sphere);
        Ok(GainOperator {
            kernel,
            sphere,
            sphere_group,
            fault_scale: 1.0,
        })
    }

    /// Multiplies every kernel value by `scale`. Only meant for fault-injection
    /// checks of the oracle comparisons.
    #[doc(hidden)]
    pub fn with_fault_scale(mut self, scale: f64) -> Self {
        self.fault_scale = scale;
        self
    }

    pub fn fault_scale(&self) -> f64 {
        self.fault_scale
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn sphere(&self) -> &SphereQuadrature {
        &self.sphere
    }

    pub fn regime(&self) -> Regime {
        self.kernel.regime()
    }

    pub(crate) fn sphere_group(&self) -> &[SignedPermutation] {
        &self.sphere_group
    }

    pub(crate) fn partners(&self, grid: &VelocityGrid) -> PartnerSet {
        let support = grid.support_radius();
        let reach = match self.regime() {
            // |w|^2 = |v'|^2 + |w'|^2 - |v|^2 <= 2 support^2
            Regime::Classical => 2f64.sqrt() * support,
            // q0 <= 2 E(support) - p0 <= 2 E(support) - 1
            Regime::Relativistic => {
                let e = 2.0 * energy(Vec3::new(support, 0.0, 0.0)) - 1.0;
                (e * e - 1.0).max(0.0).sqrt()
            }
        };
        // nearest partners first: they carry most of the gain, which makes
        // partial sums useful lower bounds, and the admissibility cut on the
        // partner key becomes a prefix
        let mut points = grid.lattice_points_within(reach);
        points.sort_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()));
        let aux = match self.regime() {
            Regime::Classical => points.iter().map(|p| p.norm_sqr()).collect(),
            Regime::Relativistic => points.iter().map(|&p| energy(p)).collect(),
        };
        PartnerSet {
            points,
            aux,
            cell_volume: grid.cell_volume(),
            support,
        }
    }

    /// Largest admissible partner key (`|w|^2` or `q0`) for the point `v`,
    /// or `None` when nothing can scatter into `v`.
    #[inline]
    pub(crate) fn partner_bound(&self, v: Vec3, support: f64) -> Option<f64> {
        let rs2 = support * support;
        match self.regime() {
            Regime::Classical => {
                let b = 2.0 * rs2 - v.norm_sqr();
                (b >= 0.0).then_some(b)
            }
            Regime::Relativistic => {
                let b = 2.0 * (1.0 + rs2).sqrt() - energy(v);
                (b >= 1.0).then_some(b)
            }
        }
    }

    /// Calls `emit(v', w', weight)` for every sphere node whose outgoing pair
    /// lies in the support ball, with `weight = w_n * kernel`.
    #[inline]
    pub(crate) fn for_each_outgoing(
        &self,
        v: Vec3,
        v_aux: f64,
        w: Vec3,
        w_aux: f64,
        support: f64,
        mut emit: impl FnMut(Vec3, Vec3, f64),
    ) {
        let rs2 = support * support;
        let scale = self.fault_scale;
        match &self.kernel {
            KernelSpec::ClassicalHardSphere => {
                let u = v - w;
                let center = (v + w) * 0.5;
                if center.norm() - 0.5 * u.norm() > support {
                    return;
                }
                match self.sphere.upper_half() {
                    // n and -n give the same outgoing pair and exactly one of
                    // them lies in the admissible hemisphere, with B = |n.u|
                    Some(half) => {
                        for node in half {
                            let t = node.dir.dot(u);
                            let d = node.dir * t;
                            let vp = v - d;
                            let wp = w + d;
                            if (vp.norm_sqr() > rs2) | (wp.norm_sqr() > rs2) | (t == 0.0) {
                                continue;
                            }
                            emit(vp, wp, node.weight * t.abs() * scale);
                        }
                    }
                    None => {
                        for node in self.sphere.nodes() {
                            let t = node.dir.dot(u);
                            let d = node.dir * t;
                            let vp = v - d;
                            let wp = w + d;
                            if (vp.norm_sqr() > rs2) | (wp.norm_sqr() > rs2) | (t <= 0.0) {
                                continue;
                            }
                            emit(vp, wp, node.weight * t * scale);
                        }
                    }
                }
            }
            KernelSpec::RelativisticConstantSigma { sigma0 } => {
                let (p, p0, q, q0) = (v, v_aux, w, w_aux);
                let e = p0 + q0;
                let s = e * e - (p + q).norm_sqr();
                let rel = q / q0 - p / p0;
                let sum = p + q;
                // w and -w give the same outgoing pair and kernel value
                let (nodes, mult) = self.relativistic_nodes();
                for node in nodes {
                    let om = node.dir;
                    let nd = om.dot(rel);
                    if nd == 0.0 {
                        continue;
                    }
                    let ws = om.dot(sum);
                    let denom = e * e - ws * ws;
                    let a = 2.0 * e * p0 * q0 * nd / denom;
                    let d = om * a;
                    let pp = p + d;
                    if pp.norm_sqr() > rs2 {
                        continue;
                    }
                    let qp = q - d;
                    if qp.norm_sqr() > rs2 {
                        continue;
                    }
                    let k = 4.0 * s * sigma0 * e * e * nd.abs() / (denom * denom);
                    emit(pp, qp, mult * node.weight * k * scale);
                }
            }
            KernelSpec::RelativisticMaxwellian { .. } => {
                let (p, p0, q, q0) = (v, v_aux, w, w_aux);
                let (nodes, mult) = self.relativistic_nodes();
                for node in nodes {
                    let om = node.dir;
                    let a = offset_a_unchecked(p, p0, q, q0, om);
                    if a == 0.0 {
                        continue;
                    }
                    let d = om * a;
                    let pp = p + d;
                    if pp.norm_sqr() > rs2 {
                        continue;
                    }
                    let qp = q - d;
                    if qp.norm_sqr() > rs2 {
                        continue;
                    }
                    let k = kernel_k_unchecked(p, p0, q, q0, om, &self.kernel);
                    emit(pp, qp, mult * node.weight * k * scale);
                }
            }
        }
    }

    fn relativistic_nodes(&self) -> (&[crate::model::SphereNode], f64) {
        match self.sphere.upper_half() {
            Some(half) => (half, 2.0),
            None => (self.sphere.nodes(), 1.0),
        }
    }

    #[inline]
    pub(crate) fn point_aux(&self, v: Vec3) -> f64 {
        match self.regime() {
            Regime::Classical => v.norm_sqr(),
            Regime::Relativistic => energy(v),
        }
    }

    /// Sum over one partner block, one entry per partner with a nonzero sum.
    fn partials(
        &self,
        f: &DistributionField,
        set: &PartnerSet,
        range: std::ops::Range<usize>,
        v: Vec3,
        bound: f64,
        out: &mut Vec<f64>,
    ) {
        let v_aux = self.point_aux(v);
        for i in range {
            let w_aux = set.aux[i];
            if w_aux > bound {
                break;
            }
            let mut inner = 0.0;
            self.for_each_outgoing(v, v_aux, set.points[i], w_aux, set.support, |vp, wp, wt| {
                let fv = f.interpolate(vp);
                if fv != 0.0 {
                    inner += wt * fv * f.interpolate(wp);
                }
            });
            if inner != 0.0 {
                out.push(inner);
            }
        }
    }

    fn eval_sequential(&self, f: &DistributionField, set: &PartnerSet, v: Vec3) -> f64 {
        let Some(bound) = self.partner_bound(v, set.support) else {
            return 0.0;
        };
        let mut parts = Vec::new();
        self.partials(f, set, 0..set.points.len(), v, bound, &mut parts);
        pairwise_sum(&parts) * set.cell_volume
    }

    /// Like `eval_sequential`, but gives up (returning `None`) once the
    /// partial sum is clearly above `cap`. Completed values are bit-identical
    /// to `eval_sequential`.
    fn eval_bounded(&self, f: &DistributionField, set: &PartnerSet, v: Vec3, cap: f64) -> Option<f64> {
        let Some(bound) = self.partner_bound(v, set.support) else {
            return Some(0.0);
        };
        let n = set.points.len();
        let limit = cap * (1.0 + 1e-9) / set.cell_volume;
        let mut parts = Vec::new();
        let mut running = 0.0;
        for start in (0..n).step_by(CHUNK) {
            let before = parts.len();
            self.partials(f, set, start..(start + CHUNK).min(n), v, bound, &mut parts);
            running += parts[before..].iter().sum::<f64>();
            if running > limit {
                return None;
            }
        }
        Some(pairwise_sum(&parts) * set.cell_volume)
    }

    fn eval_parallel(&self, f: &DistributionField, set: &PartnerSet, v: Vec3) -> f64 {
        let Some(bound) = self.partner_bound(v, set.support) else {
            return 0.0;
        };
        let n = set.points.len();
        let blocks: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|b| {
                let mut out = Vec::new();
                self.partials(f, set, b * CHUNK..((b + 1) * CHUNK).min(n), v, bound, &mut out);
                out
            })
            .collect();
        let parts: Vec<f64> = blocks.into_iter().flatten().collect();
        pairwise_sum(&parts) * set.cell_volume
    }

    /// `Q+(f, f)(v)` at a single point.
    pub fn apply_at(&self, f: &DistributionField, v: Vec3) -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::Argument("evaluation point must be finite".into()));
        }
        let set = self.partners(f.grid());
        Ok(self.eval_parallel(f, &set, v))
    }

    /// `Q+(f, f)` at every grid node.
    pub fn apply_all(&self, f: &DistributionField) -> Result<Vec<f64>> {
        let set = self.partners(f.grid());
        let pts: Vec<[i32; 3]> = f.grid().nodes().iter().map(|n| n.odd).collect();
        let group = field_group(f, &self.sphere_group);
        Ok(evaluate_by_orbits(&pts, &group, |i| {
            self.eval_sequential(f, &set, f.grid().nodes()[i].center)
        }))
    }

    /// Gain of `rho chi_{B_R}` minimized over the lattice points of `grid`
    /// inside the closed ball of radius `lambda R`, with `R` the grid radius.
    pub fn estimate_delta(&self, grid: &Arc<VelocityGrid>, lambda: f64) -> Result<DeltaEstimate> {
        if !(lambda.is_finite() && lambda >= 1.0) {
            return Err(Error::Config(format!("lambda must be at least 1, got {lambda}")));
        }
        let r = grid.radius();
        let f = DistributionField::indicator(grid.clone(), r, 1.0)?;
        let set = self.partners(grid);
        let probes = grid.lattice_odd_within(lambda * r);
        let group = field_group(&f, &self.sphere_group);
        let orbit_list = orbits(&probes, &group);
        // Outer points first: the gain of a ball indicator is smallest near
        // the rim, so an early small value lets later points stop as soon as
        // their (nonnegative) partial sums exceed it.
        let mut order: Vec<usize> = (0..orbit_list.len()).collect();
        let radius_of = |o: usize| {
            let c = probes[orbit_list[o][0]];
            -(c.iter().map(|&x| (x as i64) * (x as i64)).sum::<i64>())
        };
        order.sort_by_key(|&o| (radius_of(o), o));
        let mut best = (usize::MAX, f64::INFINITY);
        let mut pruned = 0;
        for block in order.chunks(PRUNE_BLOCK) {
            let cap = best.1;
            let vals: Vec<Option<f64>> = block
                .par_iter()
                .map(|&o| self.eval_bounded(&f, &set, grid.center_of_odd(probes[orbit_list[o][0]]), cap))
                .collect();
            for (&o, val) in block.iter().zip(vals) {
                match val {
                    None => pruned += 1,
                    Some(v) => {
                        if v < best.1 || (v == best.1 && o < best.0) {
                            best = (o, v);
                        }
                    }
                }
            }
        }
        let (best, delta) = best;
        let estimate = DeltaEstimate {
            delta,
            lambda,
            radius: r,
            grid_n: grid.cells_per_axis(),
            sphere_m: self.sphere.order(),
            kernel: self.kernel.clone(),
            argmin: grid.center_of_odd(probes[orbit_list[best][0]]),
            probes: probes.len(),
            orbits: orbit_list.len(),
            orbits_pruned: pruned,
        };
        if !(delta > 0.0) {
            return Err(Error::Estimation { delta, lambda });
        }
        Ok(estimate)
    }

    /// The truncated operator: the minimum of `Q+(f, f)` over grid nodes with
    /// `|v| <= R`, placed on those nodes; zero elsewhere.
    pub fn q_r(&self, f: &DistributionField, r: f64) -> Result<DistributionField> {
        let gain = self.apply_all(f)?;
        truncate_to_min(f.grid(), &gain, r)
    }
}

/// Evaluates `eval` once per orbit of `group` and copies the value to the
/// rest of the orbit. Representatives run in parallel; each evaluation is
/// itself sequential.
pub(crate) fn evaluate_by_orbits(
    pts: &[[i32; 3]],
    group: &[SignedPermutation],
    eval: impl Fn(usize) -> f64 + Sync,
) -> Vec<f64> {
    let orbit_list = orbits(pts, group);
    let reps: Vec<f64> = orbit_list.par_iter().map(|orb| eval(orb[0])).collect();
    let mut out = vec![0.0; pts.len()];
    for (orb, &val) in orbit_list.iter().zip(&reps) {
        for &i in orb {
            out[i] = val;
        }
    }
    out
}

pub(crate) fn truncate_to_min(
    grid: &Arc<VelocityGrid>,
    gain: &[f64],
    r: f64,
) -> Result<DistributionField> {
    let inside: Vec<bool> = grid.nodes().iter().map(|n| n.center.norm() <= r).collect();
    let c = gain
        .iter()
        .zip(&inside)
        .filter(|(_, &b)| b)
        .map(|(&g, _)| g)
        .fold(f64::INFINITY, f64::min);
    let c = if c.is_finite() { c } else { 0.0 };
    let values = inside.iter().map(|&b| if b { c } else { 0.0 }).collect();
    DistributionField::from_values(grid.clone(), values)
}

/// Lower-bound constant for `Q+(rho chi_{B_R}, rho chi_{B_R}) >= delta rho^2 chi_{lambda B_R}`
/// on a grid, with the resolution that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeltaEstimate {
    pub delta: f64,
    pub lambda: f64,
    pub radius: f64,
    pub grid_n: usize,
    pub sphere_m: usize,
    pub kernel: KernelSpec,
    /// A node where the minimum is attained.
    pub argmin: Vec3,
    pub probes: usize,
    /// Symmetry orbits among the probes; one point per orbit is evaluated.
    pub orbits: usize,
    /// Orbits whose partial sums already exceeded the running minimum.
    pub orbits_pruned: usize,
}

/// `Q+(f, f)(v)` for a grid field.
pub fn gain_apply(
    f: &DistributionField,
    kernel: &KernelSpec,
    sq: &SphereQuadrature,
    v: Vec3,
) -> Result<f64> {
    GainOperator::new(kernel.clone(), sq.clone())?.apply_at(f, v)
}

/// Grid estimate of the lower-bound constant; fails when the minimum is not positive.
pub fn estimate_delta(
    r: f64,
    lambda: f64,
    kernel: &KernelSpec,
    grid_n: usize,
    sphere_m: usize,
) -> Result<DeltaEstimate> {
    let grid = Arc::new(VelocityGrid::new(r, grid_n)?);
    let op = GainOperator::new(kernel.clone(), SphereQuadrature::new(sphere_m)?)?;
    op.estimate_delta(&grid, lambda)
}

pub fn q_r_apply(
    f: &DistributionField,
    r: f64,
    kernel: &KernelSpec,
    sq: &SphereQuadrature,
) -> Result<DistributionField> {
    GainOperator::new(kernel.clone(), sq.clone())?.q_r(f, r)
}

/// Whether `Q+(f, f) >= Q+(g, g)` at every node, for `f >= g >= 0`.
///
/// Comparisons allow a rounding slack of `1e-14 * max(1, Q+(f, f)(v))`.
pub fn check_monotone(
    f: &DistributionField,
    g: &DistributionField,
    kernel: &KernelSpec,
    sq: &SphereQuadrature,
) -> Result<bool> {
    if **f.grid() != **g.grid() {
        return Err(Error::Argument("fields live on different grids".into()));
    }
    if let Some(i) = f.values().iter().zip(g.values()).position(|(a, b)| a < b) {
        return Err(Error::Argument(format!("f < g at node {i}")));
    }
    let op = GainOperator::new(kernel.clone(), sq.clone())?;
    let qf = op.apply_all(f)?;
    let qg = op.apply_all(g)?;
    Ok(qf
        .iter()
        .zip(&qg)
        .all(|(&a, &b)| a >= b - 1e-14 * a.max(1.0)))
}
