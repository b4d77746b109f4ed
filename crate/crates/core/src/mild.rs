//! Picard iterates of the spatially inhomogeneous truncated problem.
//!
//! ```text
//! f_0 = 0
//! f_{k+1}(t, x, v) = c0 chi1(x - t v) chi2(v)
//!     + chi2(v) int_0^t sum_w sum_n B f_k(tau, y, v') f_k(tau, y, w') dtau,   y = x - (t - tau) v
//! ```
//!
//! Iterates are evaluated pointwise by recursion. The time integral uses
//! Gauss-Legendre nodes rescaled to `[0, t]` (one panel per unit time), the
//! `w` sum runs over the nodes of a velocity grid of radius `c2` and the `n`
//! sum over the sphere rule. Since every quantity except the indicator
//! `chi1` is independent of `x`, two points of the shrinking ball
//! `|x| <= c1 - t c2` follow bit-identical evaluation paths.

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::RwLock;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{evolve_truncated_with, BlowupReport, Controls};
use crate::error::{Error, Result};
use crate::gain::{GainOperator, GainTensor};
use crate::model::{gauss_legendre, KernelSpec, Regime, SphereQuadrature, Vec3, VelocityGrid};
use crate::relativistic::energy;

/// Data and resolutions of the inhomogeneous problem.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InhomogeneousConfig {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub horizon: f64,
    pub kernel: KernelSpec,
    pub sphere_m: usize,
    pub w_grid_n: usize,
    /// Gauss-Legendre nodes per unit time.
    pub n_t: usize,
}

impl InhomogeneousConfig {
    /// Config with the default resolutions (`m = 4`, `w` grid `n = 4`, two
    /// time nodes), sized so that a depth-3 evaluation costs about `1e6`
    /// kernel evaluations.
    pub fn new(c0: f64, c1: f64, c2: f64, horizon: f64, kernel: KernelSpec) -> Result<Self> {
        let cfg = InhomogeneousConfig {
            c0,
            c1,
            c2,
            horizon,
            kernel,
            sphere_m: 4,
            w_grid_n: 4,
            n_t: 2,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2), ("T", self.horizon)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.c1 <= self.horizon * self.c2 {
            return Err(Error::Config(format!(
                "need c1 > T c2, got c1 = {} and T c2 = {}",
                self.c1,
                self.horizon * self.c2
            )));
        }
        if self.n_t == 0 {
            return Err(Error::Config("n_t must be at least 1".into()));
        }
        self.kernel.validate()
    }
}

/// `c0` on `|x| <= c1, |v| <= c2` (closed balls), zero elsewhere.
pub fn eval_phi(x: Vec3, v: Vec3, config: &InhomogeneousConfig) -> f64 {
    if x.norm() <= config.c1 && v.norm() <= config.c2 {
        config.c0
    } else {
        0.0
    }
}

type Key = (usize, u64, [u64; 3], [u64; 3]);

const MEMO_CAP: usize = 1 << 22;

/// Memoized pointwise evaluator of the Picard iterates.
pub struct PicardEvaluator {
    config: InhomogeneousConfig,
    k_max: usize,
    op: GainOperator,
    partners: Vec<Vec3>,
    cell_volume: f64,
    gl: (Vec<f64>, Vec<f64>),
    memo: RwLock<HashMap<Key, f64>>,
}

fn key(k: usize, t: f64, x: Vec3, v: Vec3) -> Key {
    (
        k,
        t.to_bits(),
        [x.x.to_bits(), x.y.to_bits(), x.z.to_bits()],
        [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()],
    )
}

impl PicardEvaluator {
    pub fn new(config: InhomogeneousConfig, k_max: usize) -> Result<Self> {
        config.validate()?;
        if k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        let grid = VelocityGrid::new(config.c2, config.w_grid_n)?;
        let op = GainOperator::new(config.kernel.clone(), SphereQuadrature::new(config.sphere_m)?)?;
        Ok(PicardEvaluator {
            partners: grid.nodes().iter().map(|n| n.center).collect(),
            cell_volume: grid.cell_volume(),
            gl: gauss_legendre(config.n_t),
            op,
            k_max,
            config,
            memo: RwLock::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &InhomogeneousConfig {
        &self.config
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn memo_len(&self) -> usize {
        self.memo.read().len()
    }

    fn transport_velocity(&self, v: Vec3) -> Vec3 {
        match self.op.regime() {
            Regime::Classical => v,
            Regime::Relativistic => v / energy(v),
        }
    }

    /// Time nodes and weights on `[0, t]`.
    fn ladder(&self, t: f64) -> Vec<(f64, f64)> {
        let panels = (t.ceil() as usize).max(1);
        let len = t / panels as f64;
        let (xs, ws) = &self.gl;
        let mut out = Vec::with_capacity(panels * xs.len());
        for p in 0..panels {
            let a = p as f64 * len;
            for (x, w) in xs.iter().zip(ws) {
                out.push((a + 0.5 * len * (x + 1.0), 0.5 * len * w));
            }
        }
        out
    }

    /// `f_k(t, x, v)`.
    pub fn eval_picard(&self, k: usize, t: f64, x: Vec3, v: Vec3) -> Result<f64> {
        if k > self.k_max {
            return Err(Error::Depth { k, k_max: self.k_max });
        }
        if !(0.0..=self.config.horizon).contains(&t) {
            return Err(Error::Argument(format!(
                "time {t} outside [0, {}]",
                self.config.horizon
            )));
        }
        if !(x.is_finite() && v.is_finite()) {
            return Err(Error::Argument("evaluation point must be finite".into()));
        }
        Ok(self.eval(k, t, x, v))
    }

    fn eval(&self, k: usize, t: f64, x: Vec3, v: Vec3) -> f64 {
        let cfg = &self.config;
        if k == 0 || v.norm() > cfg.c2 {
            return 0.0;
        }
        let u = self.transport_velocity(v);
        let free = if (x - u * t).norm() <= cfg.c1 { cfg.c0 } else { 0.0 };
        if k == 1 || t == 0.0 {
            return free;
        }
        let key = key(k, t, x, v);
        if let Some(&hit) = self.memo.read().get(&key) {
            return hit;
        }
        let v_aux = self.op.point_aux(v);
        let mut integral = 0.0;
        for (tau, wt) in self.ladder(t) {
            let y = x - u * (t - tau);
            let mut inner = 0.0;
            for &w in &self.partners {
                let w_aux = self.op.point_aux(w);
                self.op.for_each_outgoing(v, v_aux, w, w_aux, cfg.c2, |vp, wp, b| {
                    let a = self.eval(k - 1, tau, y, vp);
                    if a != 0.0 {
                        inner += b * a * self.eval(k - 1, tau, y, wp);
                    }
                });
            }
            integral += wt * inner;
        }
        let value = free + integral * self.cell_volume;
        let mut memo = self.memo.write();
        if memo.len() < MEMO_CAP {
            memo.insert(key, value);
        }
        value
    }
}

/// One sampled pair of the shrinking-ball check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShrinkingBallSample {
    pub k: usize,
    pub t: f64,
    pub x_norm: f64,
    pub y_norm: f64,
    pub v_norm: f64,
    pub f_x: f64,
    pub f_y: f64,
    pub discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShrinkingBallReport {
    pub max_discrepancy: f64,
    pub samples: Vec<ShrinkingBallSample>,
}

fn uniform_in_ball(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    loop {
        let p = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if p.norm_sqr() <= 1.0 {
            return p * r;
        }
    }
}

/// Largest `|f_k(t, x, v) - f_k(t, y, v)|` over random `x, y` in the
/// shrinking ball `|x| <= c1 - t c2` and `v` in `B_{c2}`.
pub fn check_shrinking_ball(
    ev: &PicardEvaluator,
    k: usize,
    t: f64,
    samples: usize,
    seed: u64,
) -> Result<ShrinkingBallReport> {
    let cfg = ev.config();
    if !(t >= 0.0 && t < cfg.horizon) {
        return Err(Error::Config(format!("need 0 <= t < T, got t = {t}")));
    }
    if k > ev.k_max() {
        return Err(Error::Depth { k, k_max: ev.k_max() });
    }
    let shrink = cfg.c1 - t * cfg.c2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<(Vec3, Vec3, Vec3)> = (0..samples)
        .map(|_| {
            let x = uniform_in_ball(&mut rng, shrink);
            let y = uniform_in_ball(&mut rng, shrink);
            let v = uniform_in_ball(&mut rng, cfg.c2);
            (x, y, v)
        })
        .collect();
    let rows: Vec<ShrinkingBallSample> = points
        .par_iter()
        .map(|&(x, y, v)| {
            let fx = ev.eval(k, t, x, v);
            let fy = ev.eval(k, t, y, v);
            ShrinkingBallSample {
                k,
                t,
                x_norm: x.norm(),
                y_norm: y.norm(),
                v_norm: v.norm(),
                f_x: fx,
                f_y: fy,
                discrepancy: (fx - fy).abs(),
            }
        })
        .collect();
    Ok(ShrinkingBallReport {
        max_discrepancy: rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max),
        samples: rows,
    })
}

/// Which mechanism makes blowup inside the horizon possible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlowupBranch {
    /// `c0 >= 10 / (delta T)`: large data blow up early.
    C0Large,
    /// Predicted blowup, reached by making the spatial ball wide enough.
    C1Large,
    /// No blowup predicted within the horizon.
    None,
}

/// Homogeneous reduction of the inhomogeneous problem on the shrinking ball.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReductionReport {
    pub report: BlowupReport,
    pub delta_hat: f64,
    /// `1.1 / (delta_hat c0)`.
    pub predicted_time: f64,
    /// `c1 > c2 1.1 / (delta_hat c0)`.
    pub c1_criterion: bool,
    /// Blowup predicted within the horizon: `predicted_time <= T` (which,
    /// with `c1 > T c2`, implies the `c1` criterion).
    pub predicted: bool,
    pub branch: BlowupBranch,
    /// A predicted blowup was detected.
    pub consistent: bool,
}

/// Runs the truncated homogeneous problem with `R = c2`, `rho0 = c0` up to
/// the horizon and compares the outcome with the prediction from `delta_hat`.
pub fn reduced_homogeneous_blowup(
    config: &InhomogeneousConfig,
    grid: &Arc<VelocityGrid>,
    sq: &SphereQuadrature,
) -> Result<ReductionReport> {
    config.validate()?;
    if (grid.radius() - config.c2).abs() > 1e-12 * config.c2 {
        return Err(Error::Argument(format!(
            "grid radius {} differs from c2 = {}",
            grid.radius(),
            config.c2
        )));
    }
    let op = GainOperator::new(config.kernel.clone(), sq.clone())?;
    let delta_hat = op.estimate_delta(grid, 1.0)?.delta;
    let tensor = GainTensor::new(op, grid.clone());
    let (_, report) = evolve_truncated_with(&tensor, config.c0, config.c2, config.horizon, &Controls::default())?;
    let predicted_time = 1.1 / (delta_hat * config.c0);
    let c1_criterion = config.c1 > config.c2 * predicted_time;
    let predicted = predicted_time <= config.horizon;
    let branch = if config.c0 >= 10.0 / (delta_hat * config.horizon) {
        BlowupBranch::C0Large
    } else if predicted {
        BlowupBranch::C1Large
    } else {
        BlowupBranch::None
    };
    Ok(ReductionReport {
        consistent: !predicted || report.detected,
        report,
        delta_hat,
        predicted_time,
        c1_criterion,
        predicted,
        branch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> InhomogeneousConfig {
        InhomogeneousConfig::new(1.0, 2.0, 1.0, 1.0, KernelSpec::ClassicalHardSphere).unwrap()
    }

    #[test]
    fn config_requires_wide_spatial_ball() {
        let err = InhomogeneousConfig::new(1.0, 1.0, 1.0, 1.0, KernelSpec::ClassicalHardSphere);
        assert!(matches!(err, Err(Error::Config(_))));
        assert!(InhomogeneousConfig::new(-1.0, 3.0, 1.0, 1.0, KernelSpec::ClassicalHardSphere).is_err());
    }

    #[test]
    fn phi_uses_closed_balls() {
        let c = cfg();
        assert_eq!(eval_phi(Vec3::ZERO, Vec3::ZERO, &c), 1.0);
        assert_eq!(eval_phi(Vec3::new(2.0, 0.0, 0.0), Vec3::ZERO, &c), 1.0);
        assert_eq!(eval_phi(Vec3::new(2.0 + 1e-12, 0.0, 0.0), Vec3::ZERO, &c), 0.0);
        assert_eq!(eval_phi(Vec3::ZERO, Vec3::new(0.0, 1.0 + 1e-12, 0.0), &c), 0.0);
    }

    #[test]
    fn first_iterate_is_free_streaming() {
        let ev = PicardEvaluator::new(cfg(), 3).unwrap();
        let v = Vec3::new(0.5, 0.0, 0.0);
        assert_eq!(ev.eval_picard(0, 0.5, Vec3::ZERO, v).unwrap(), 0.0);
        assert_eq!(ev.eval_picard(1, 0.5, Vec3::new(2.2, 0.0, 0.0), v).unwrap(), 1.0);
        assert_eq!(ev.eval_picard(1, 0.5, Vec3::new(-1.9, 0.0, 0.0), v).unwrap(), 0.0);
        for k in 1..=3 {
            assert_eq!(ev.eval_picard(k, 0.0, Vec3::ZERO, v).unwrap(), eval_phi(Vec3::ZERO, v, ev.config()));
        }
        assert!(matches!(ev.eval_picard(4, 0.1, Vec3::ZERO, v), Err(Error::Depth { .. })));
        assert!(ev.eval_picard(1, 2.0, Vec3::ZERO, v).is_err());
    }

    #[test]
    fn iterates_increase_and_vanish_outside_c2() {
        let ev = PicardEvaluator::new(cfg(), 3).unwrap();
        let t = 0.3;
        let f1 = ev.eval_picard(1, t, Vec3::ZERO, Vec3::ZERO).unwrap();
        let f2 = ev.eval_picard(2, t, Vec3::ZERO, Vec3::ZERO).unwrap();
        let f3 = ev.eval_picard(3, t, Vec3::ZERO, Vec3::ZERO).unwrap();
        assert_eq!(f1, 1.0);
        assert!(f2 > f1 && f3 >= f2, "{f1} {f2} {f3}");
        assert_eq!(ev.eval_picard(3, t, Vec3::ZERO, Vec3::new(0.0, 0.0, 1.01)).unwrap(), 0.0);
        assert!(ev.memo_len() > 0);
        // memo hits return the same bits
        assert_eq!(ev.eval_picard(3, t, Vec3::ZERO, Vec3::ZERO).unwrap(), f3);
    }

    #[test]
    fn support_propagates_at_most_at_speed_c2() {
        let c = cfg();
        let ev = PicardEvaluator::new(c.clone(), 2).unwrap();
        let t = 0.4;
        let x = Vec3::new(c.c1 + t * c.c2 + 1e-9, 0.0, 0.0);
        for v in [Vec3::ZERO, Vec3::new(-0.9, 0.0, 0.0), Vec3::new(0.3, 0.3, 0.3)] {
            assert_eq!(ev.eval_picard(2, t, x, v).unwrap(), 0.0);
        }
    }

    #[test]
    fn shrinking_ball_is_exactly_homogeneous() {
        let ev = PicardEvaluator::new(cfg(), 2).unwrap();
        let r1 = check_shrinking_ball(&ev, 1, 0.5, 20, 7).unwrap();
        assert_eq!(r1.max_discrepancy, 0.0);
        let r2 = check_shrinking_ball(&ev, 2, 0.5, 20, 7).unwrap();
        assert_eq!(r2.max_discrepancy, 0.0);
        assert_eq!(r2.samples.len(), 20);
        assert!(check_shrinking_ball(&ev, 2, 1.0, 5, 7).is_err());
    }

    #[test]
    fn outside_the_shrinking_ball_values_differ() {
        let c = cfg();
        let ev = PicardEvaluator::new(c.clone(), 2).unwrap();
        let t = 0.5;
        let v = Vec3::new(0.8, 0.0, 0.0);
        let edge = Vec3::new(-(c.c1 - 0.5 * t * c.c2), 0.0, 0.0);
        let inner = ev.eval_picard(2, t, Vec3::ZERO, v).unwrap();
        let outer = ev.eval_picard(2, t, edge, v).unwrap();
        assert!((inner - outer).abs() > 0.0);
    }
}
