//! Spatially homogeneous gain-only dynamics.
//!
//! Two node-wise ODE systems on a velocity grid:
//!
//! * the truncated problem `df/dt = Q_R(f, f)`, `f(0) = rho0 chi_{B_R}`, whose
//!   solution stays of the form `rho(t) chi_{B_R}` and dominates the comparison
//!   solution `rho0 / (1 - delta rho0 t)`;
//! * the full problem `df/dt = Q+(f, f)` on the grid, where contributions
//!   landing outside the grid ball are dropped. Dropping them only lowers the
//!   right-hand side, so blowup of the grid system implies blowup of the
//!   untruncated one.
//!
//! Both use classical RK4. A step is rejected and halved when the sup-norm
//! grows by more than 10% or when the step-doubling error estimate exceeds
//! the local tolerance; accepted steps are Richardson-extrapolated.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gain::{truncate_to_min, GainOperator, GainTensor};
use crate::model::{DistributionField, KernelSpec, SphereQuadrature, VelocityGrid};

/// Exact solution of `d rho/dt = delta rho^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComparisonState {
    pub rho0: f64,
    pub delta: f64,
    pub blowup_time: f64,
}

impl ComparisonState {
    pub fn new(rho0: f64, delta: f64) -> Result<Self> {
        if !(rho0.is_finite() && rho0 > 0.0 && delta.is_finite() && delta > 0.0) {
            return Err(Error::Argument(format!(
                "comparison state needs rho0 > 0 and delta > 0, got {rho0}, {delta}"
            )));
        }
        Ok(ComparisonState {
            rho0,
            delta,
            blowup_time: 1.0 / (delta * rho0),
        })
    }
}

/// `rho0 / (1 - delta rho0 t)` for `0 <= t < 1 / (delta rho0)`.
pub fn comparison_solution(cs: &ComparisonState, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Argument(format!("time must be nonnegative, got {t}")));
    }
    if t >= cs.blowup_time {
        return Err(Error::Domain {
            t,
            blowup_time: cs.blowup_time,
        });
    }
    Ok(cs.rho0 / (1.0 - cs.delta * cs.rho0 * t))
}

/// Integrator settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Controls {
    /// Initial step; `None` means `0.01 / (delta rho0)`.
    pub dt0: Option<f64>,
    pub dt_min: f64,
    /// Largest accepted relative growth of the sup-norm in one step.
    pub max_rel_increment: f64,
    /// Local step-doubling tolerance, relative to the sup-norm.
    pub local_tol: f64,
    /// Detection threshold as a multiple of `rho0`.
    pub threshold_factor: f64,
    pub max_steps: usize,
    /// When set, steps are clipped to land on these times and only these
    /// states (plus the initial and final one) are recorded.
    pub sample_times: Option<Vec<f64>>,
}

impl Default for Controls {
    fn default() -> Self {
        Controls {
            dt0: None,
            dt_min: 1e-12,
            max_rel_increment: 0.1,
            local_tol: 1e-11,
            threshold_factor: 1e6,
            max_steps: 200_000,
            sample_times: None,
        }
    }
}

/// Outcome of a blowup run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlowupReport {
    pub detected: bool,
    /// Time of the first accepted state at or above the threshold, or the
    /// final time when nothing was detected.
    pub t_detect: f64,
    pub threshold: f64,
    pub final_sup_norm: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    pub dt_final: f64,
    pub rho0: f64,
    pub delta_hat: f64,
    /// `1 / (delta_hat rho0)`.
    pub predicted_blowup: f64,
    /// Smallest `rho(t) / comparison(t) - 1` over accepted states before
    /// detection (truncated runs only).
    pub min_comparison_margin: Option<f64>,
}

/// Recorded states of a run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<DistributionField>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sup_norms(&self) -> Vec<f64> {
        self.fields.iter().map(|f| f.sup_norm()).collect()
    }

    /// Smallest node value on the closed ball of radius `r` at each time.
    pub fn min_on_ball(&self, r: f64) -> Vec<f64> {
        self.fields
            .iter()
            .map(|f| {
                f.grid()
                    .nodes()
                    .iter()
                    .zip(f.values())
                    .filter(|(n, _)| n.center.norm() <= r)
                    .map(|(_, &v)| v)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

fn axpy(y: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(y, k)| y + a * k).collect()
}

fn rk4(y: &[f64], dt: f64, rhs: &impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
    let k1 = rhs(y)?;
    let k2 = rhs(&axpy(y, 0.5 * dt, &k1))?;
    let k3 = rhs(&axpy(y, 0.5 * dt, &k2))?;
    let k4 = rhs(&axpy(y, dt, &k3))?;
    Ok(y
        .iter()
        .enumerate()
        .map(|(i, y)| y + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

struct RunSpec<'a> {
    grid: &'a Arc<VelocityGrid>,
    rho0: f64,
    delta_hat: f64,
    t_end: f64,
    controls: &'a Controls,
}

fn integrate(
    spec: RunSpec<'_>,
    y0: Vec<f64>,
    rhs: impl Fn(&[f64]) -> Result<Vec<f64>>,
    mut on_accept: impl FnMut(f64, &[f64]) -> Result<()>,
) -> Result<(Trajectory, BlowupReport)> {
    let c = spec.controls;
    if !(spec.t_end.is_finite() && spec.t_end > 0.0) {
        return Err(Error::Argument(format!("t_end must be positive, got {}", spec.t_end)));
    }
    if !(c.dt_min > 0.0 && c.max_rel_increment > 0.0 && c.local_tol > 0.0 && c.threshold_factor > 1.0) {
        return Err(Error::Config("invalid integrator controls".into()));
    }
    let predicted = 1.0 / (spec.delta_hat * spec.rho0);
    let threshold = c.threshold_factor * spec.rho0;
    let mut samples: Vec<f64> = c
        .sample_times
        .clone()
        .unwrap_or_default()
        .into_iter()
        .filter(|&s| s > 0.0 && s <= spec.t_end)
        .collect();
    samples.sort_by(f64::total_cmp);
    samples.dedup();
    let record_all = c.sample_times.is_none();
    let field = |v: Vec<f64>| DistributionField::from_values(spec.grid.clone(), v);

    let mut t = 0.0;
    let mut y = y0;
    let mut dt = c.dt0.unwrap_or(0.01 * predicted).min(spec.t_end);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("initial step must be positive, got {dt}")));
    }
    let mut next_sample = 0;
    let mut times = vec![0.0];
    let mut fields = vec![field(y.clone())?];
    let (mut steps, mut rejected) = (0, 0);
    let mut detected = sup(&y) >= threshold;
    on_accept(0.0, &y)?;

    while !detected && t < spec.t_end {
        if steps >= c.max_steps {
            return Err(Error::Inconclusive { t, dt });
        }
        let target = samples.get(next_sample).copied().unwrap_or(spec.t_end).min(spec.t_end);
        let clipped = t + dt >= target;
        let h = if clipped { target - t } else { dt };
        let full = rk4(&y, h, &rhs)?;
        let mid = rk4(&y, 0.5 * h, &rhs)?;
        let half = rk4(&mid, 0.5 * h, &rhs)?;
        let scale = sup(&half).max(f64::MIN_POSITIVE);
        let err = full
            .iter()
            .zip(&half)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale;
        let growth = half
            .iter()
            .zip(&y)
            .map(|(a, b)| a - b)
            .fold(0.0, f64::max)
            / sup(&y).max(f64::MIN_POSITIVE);
        let finite = half.iter().all(|v| v.is_finite());
        if !finite || err > c.local_tol || growth > c.max_rel_increment {
            rejected += 1;
            dt = 0.5 * h;
            if dt < c.dt_min {
                return Err(Error::Inconclusive { t, dt });
            }
            continue;
        }
        y = half
            .iter()
            .zip(&full)
            .map(|(b, a)| (b + (b - a) / 15.0).max(0.0))
            .collect();
        t = if clipped { target } else { t + h };
        steps += 1;
        on_accept(t, &y)?;
        detected = sup(&y) >= threshold;
        let at_sample = clipped && samples.get(next_sample) == Some(&target);
        if at_sample {
            next_sample += 1;
        }
        if record_all || at_sample || detected || t >= spec.t_end {
            times.push(t);
            fields.push(field(y.clone())?);
        }
        if !clipped {
            let grow = (0.9 * (c.local_tol / err.max(1e-300)).powf(0.2)).clamp(1.0, 2.0);
            dt = h * grow;
        }
    }
    let report = BlowupReport {
        detected,
        t_detect: t,
        threshold,
        final_sup_norm: sup(&y),
        steps,
        rejected_steps: rejected,
        dt_final: dt,
        rho0: spec.rho0,
        delta_hat: spec.delta_hat,
        predicted_blowup: predicted,
        min_comparison_margin: None,
    };
    Ok((Trajectory { times, fields }, report))
}

/// Integrates `df/dt = Q_R(f, f)` from `rho0 chi_{B_R}`.
///
/// The state is checked to stay constant on the `B_R` nodes (spread at most
/// `1e-12` times the height) and zero elsewhere at every accepted step.
pub fn evolve_truncated(
    rho0: f64,
    r: f64,
    kernel: &KernelSpec,
    grid: &Arc<VelocityGrid>,
    sq: &SphereQuadrature,
    t_end: f64,
    controls: &Controls,
) -> Result<(Trajectory, BlowupReport)> {
    let op = GainOperator::new(kernel.clone(), sq.clone())?;
    let tensor = GainTensor::new(op, grid.clone());
    evolve_truncated_with(&tensor, rho0, r, t_end, controls)
}

/// [`evolve_truncated`] reusing an assembled gain tensor.
pub fn evolve_truncated_with(
    tensor: &GainTensor,
    rho0: f64,
    r: f64,
    t_end: f64,
    controls: &Controls,
) -> Result<(Trajectory, BlowupReport)> {
    if !(rho0.is_finite() && rho0 >= 0.0 && r.is_finite() && r > 0.0) {
        return Err(Error::Argument(format!("need rho0 >= 0 and R > 0, got {rho0}, {r}")));
    }
    let grid = tensor.grid();
    let f0 = DistributionField::indicator(grid.clone(), r, rho0)?;
    if rho0 == 0.0 || f0.sup_norm() == 0.0 {
        return Ok(quiet_run(f0, t_end));
    }
    let delta_hat = delta_on_ball(tensor, r)?;
    let cs = ComparisonState::new(rho0, delta_hat)?;
    let inside: Vec<bool> = grid.nodes().iter().map(|n| n.center.norm() <= r).collect();
    let rhs = |y: &[f64]| -> Result<Vec<f64>> {
        let f = DistributionField::from_values(grid.clone(), y.to_vec())?;
        let gain = tensor.apply_all(&f)?;
        Ok(truncate_to_min(grid, &gain, r)?.values().to_vec())
    };
    let mut margin = f64::INFINITY;
    let threshold = controls.threshold_factor * rho0;
    let check = |t: f64, y: &[f64]| -> Result<()> {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for (&v, &b) in y.iter().zip(&inside) {
            if b {
                lo = lo.min(v);
                hi = hi.max(v);
            } else if v != 0.0 {
                return Err(Error::Consistency(format!("mass outside B_R at t = {t}")));
            }
        }
        if hi - lo > 1e-12 * hi {
            return Err(Error::Consistency(format!(
                "state lost its constant-on-ball form at t = {t}: spread {}",
                hi - lo
            )));
        }
        if hi < threshold && t < cs.blowup_time {
            margin = margin.min(lo / comparison_solution(&cs, t)? - 1.0);
        }
        Ok(())
    };
    let spec = RunSpec {
        grid,
        rho0,
        delta_hat,
        t_end,
        controls,
    };
    let (traj, mut report) = integrate(spec, f0.values().to_vec(), rhs, check)?;
    report.min_comparison_margin = Some(margin);
    Ok((traj, report))
}

/// Integrates `df/dt = Q+(f, f)` on the grid from `f0`.
///
/// `rho0` in the report is the smallest value of `f0` on the grid ball, so
/// `f0 >= rho0 chi_{B_R}` with `R` the grid radius; it must be positive.
pub fn evolve_full_homogeneous(
    f0: &DistributionField,
    kernel: &KernelSpec,
    sq: &SphereQuadrature,
    t_end: f64,
    controls: &Controls,
) -> Result<(Trajectory, BlowupReport)> {
    let op = GainOperator::new(kernel.clone(), sq.clone())?;
    let tensor = GainTensor::new(op, f0.grid().clone());
    evolve_full_homogeneous_with(&tensor, f0, t_end, controls)
}

/// [`evolve_full_homogeneous`] reusing an assembled gain tensor.
pub fn evolve_full_homogeneous_with(
    tensor: &GainTensor,
    f0: &DistributionField,
    t_end: f64,
    controls: &Controls,
) -> Result<(Trajectory, BlowupReport)> {
    let grid = tensor.grid();
    if **f0.grid() != **grid {
        return Err(Error::Argument("initial field is not on the tensor's grid".into()));
    }
    let rho0 = f0.values().iter().copied().fold(f64::INFINITY, f64::min);
    if !(rho0 > 0.0) {
        return Err(Error::Argument(
            "initial field must be bounded below by a positive multiple of the ball indicator".into(),
        ));
    }
    let delta_hat = delta_on_ball(tensor, grid.radius())?;
    let rhs = |y: &[f64]| -> Result<Vec<f64>> {
        let f = DistributionField::from_values(grid.clone(), y.to_vec())?;
        tensor.apply_all(&f)
    };
    let spec = RunSpec {
        grid,
        rho0,
        delta_hat,
        t_end,
        controls,
    };
    integrate(spec, f0.values().to_vec(), rhs, |_, _| Ok(()))
}

/// Minimum over `B_R` nodes of the gain of `chi_{B_R}`.
fn delta_on_ball(tensor: &GainTensor, r: f64) -> Result<f64> {
    let chi = DistributionField::indicator(tensor.grid().clone(), r, 1.0)?;
    let gain = tensor.apply_all(&chi)?;
    let d = truncate_to_min(tensor.grid(), &gain, r)?.sup_norm();
    if !(d > 0.0) {
        return Err(Error::Estimation { delta: d, lambda: 1.0 });
    }
    Ok(d)
}

fn quiet_run(f0: DistributionField, t_end: f64) -> (Trajectory, BlowupReport) {
    let report = BlowupReport {
        detected: false,
        t_detect: t_end,
        threshold: 0.0,
        final_sup_norm: 0.0,
        steps: 0,
        rejected_steps: 0,
        dt_final: t_end,
        rho0: 0.0,
        delta_hat: 0.0,
        predicted_blowup: f64::INFINITY,
        min_comparison_margin: None,
    };
    let traj = Trajectory {
        times: vec![0.0, t_end],
        fields: vec![f0.clone(), f0],
    };
    (traj, report)
}

/// Whether `full >= truncated - 1e-9 (1 + |truncated|_inf)` node-wise at every
/// shared time.
///
/// The recorded times must agree except that either run may end with one
/// extra state (detection stops a run off the sampling ladder).
pub fn check_domination(full: &Trajectory, truncated: &Trajectory) -> Result<bool> {
    let n = full.len().min(truncated.len());
    let mut ok = true;
    for k in 0..n {
        let (ta, tb) = (full.times[k], truncated.times[k]);
        let (fa, fb) = (&full.fields[k], &truncated.fields[k]);
        if **fa.grid() != **fb.grid() {
            return Err(Error::Argument("trajectories live on different grids".into()));
        }
        if ta != tb {
            if k + 1 == full.len() || k + 1 == truncated.len() {
                break;
            }
            return Err(Error::Argument(format!("time stamps differ at index {k}: {ta} vs {tb}")));
        }
        let tol = 1e-9 * (1.0 + fb.sup_norm());
        ok &= fa.values().iter().zip(fb.values()).all(|(a, b)| *a >= b - tol);
    }
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize, m: usize) -> (Arc<VelocityGrid>, GainTensor) {
        let grid = Arc::new(VelocityGrid::new(1.0, n).unwrap());
        let op = GainOperator::new(KernelSpec::ClassicalHardSphere, SphereQuadrature::new(m).unwrap()).unwrap();
        let t = GainTensor::new(op, grid.clone());
        (grid, t)
    }

    #[test]
    fn comparison_examples() {
        let cs = ComparisonState::new(1.0, 1.0).unwrap();
        assert_eq!(comparison_solution(&cs, 0.0).unwrap(), 1.0);
        assert_eq!(comparison_solution(&cs, 0.5).unwrap(), 2.0);
        let cs = ComparisonState::new(3.0, 2.0).unwrap();
        assert!(comparison_solution(&cs, 1.0 / 6.0 - 1e-9).unwrap() > 1e8);
        assert!(matches!(comparison_solution(&cs, 1.0 / 6.0), Err(Error::Domain { .. })));
        assert!(ComparisonState::new(0.0, 1.0).is_err());
    }

    #[test]
    fn zero_data_stays_zero() {
        let (_, t) = setup(6, 4);
        let (traj, rep) = evolve_truncated_with(&t, 0.0, 1.0, 1.0, &Controls::default()).unwrap();
        assert!(!rep.detected);
        assert!(traj.fields.iter().all(|f| f.sup_norm() == 0.0));
    }

    #[test]
    fn truncated_run_tracks_comparison_and_blows_up() {
        let (_, t) = setup(6, 4);
        let probe = evolve_truncated_with(&t, 1.0, 1.0, 1e-3, &Controls::default()).unwrap().1;
        let tstar = probe.predicted_blowup;
        let (traj, rep) = evolve_truncated_with(&t, 1.0, 1.0, 2.0 * tstar, &Controls::default()).unwrap();
        assert!(rep.detected);
        assert!(rep.t_detect <= 1.1 * tstar && rep.t_detect >= 0.99 * tstar);
        assert!(rep.min_comparison_margin.unwrap() >= -1e-6);
        let sups = traj.sup_norms();
        assert!(sups.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn bad_controls_are_rejected() {
        let (_, t) = setup(6, 4);
        let c = Controls {
            threshold_factor: 0.5,
            ..Controls::default()
        };
        assert!(matches!(evolve_truncated_with(&t, 1.0, 1.0, 1.0, &c), Err(Error::Config(_))));
        assert!(evolve_truncated_with(&t, 1.0, 1.0, -1.0, &Controls::default()).is_err());
    }

    #[test]
    fn step_cap_is_inconclusive() {
        let (_, t) = setup(6, 4);
        let c = Controls {
            max_steps: 3,
            ..Controls::default()
        };
        assert!(matches!(
            evolve_truncated_with(&t, 1.0, 1.0, 100.0, &c),
            Err(Error::Inconclusive { .. })
        ));
    }

    #[test]
    fn domination_checks() {
        let (grid, t) = setup(6, 4);
        let probe = evolve_truncated_with(&t, 1.0, 1.0, 1e-3, &Controls::default()).unwrap().1;
        let ladder: Vec<f64> = (1..=6).map(|i| 0.05 * i as f64 * probe.predicted_blowup).collect();
        let horizon = ladder[5];
        let c = Controls {
            sample_times: Some(ladder),
            ..Controls::default()
        };
        let (tr, _) = evolve_truncated_with(&t, 1.0, 1.0, horizon, &c).unwrap();
        let f0 = DistributionField::indicator(grid.clone(), 1.0, 1.0).unwrap();
        let (full, _) = evolve_full_homogeneous_with(&t, &f0, horizon, &c).unwrap();
        assert_eq!(tr.times, full.times);
        assert!(check_domination(&full, &tr).unwrap());
        assert!(check_domination(&tr, &tr).unwrap());
        assert!(!check_domination(&tr, &full).unwrap());

        let other = Trajectory {
            times: vec![0.0, 0.5, 1.0],
            fields: vec![f0.clone(); 3],
        };
        let shifted = Trajectory {
            times: vec![0.0, 0.4, 1.0],
            fields: vec![f0.clone(); 3],
        };
        assert!(matches!(check_domination(&other, &shifted), Err(Error::Argument(_))));
    }

    #[test]
    fn full_run_needs_positive_floor() {
        let (grid, t) = setup(6, 4);
        let f0 = DistributionField::indicator(grid, 0.5, 1.0).unwrap();
        assert!(matches!(
            evolve_full_homogeneous_with(&t, &f0, 1.0, &Controls::default()),
            Err(Error::Argument(_))
        ));
    }
}
