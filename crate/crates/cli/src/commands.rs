use std::sync::Arc;

use kinetic_blowup::classical::collide;
use kinetic_blowup::dynamics::evolve_truncated_with;
use kinetic_blowup::mild::ShrinkingBallSample;
use kinetic_blowup::oracle::{check_forms, mc_form_equivalence_with, FormCheck};
use kinetic_blowup::relativistic::{fit_quadric, post_collision_rel, QuadricFit};
use kinetic_blowup::{
    check_shrinking_ball, comparison_solution, mc_delta, mc_gain, reduced_homogeneous_blowup, BlowupReport,
    ComparisonState, Controls, DeltaEstimate, DistributionField, Error, FnField, GainOperator, GainTensor,
    InhomogeneousConfig, McEstimate, PicardEvaluator, ReductionReport, SphereQuadrature, Vec3, VelocityGrid,
};
use serde::Serialize;

use crate::config::{Command, RegimeArg, RunConfig, TestFunction};
use crate::error::CliError;
use crate::output::{fmt_f64, Output};

/// How a command judged its own results.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Pass,
    /// Nothing to check; exits 0.
    Info(String),
    Fail(String),
    Inconclusive(String),
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Pass | Verdict::Info(_) => 0,
            Verdict::Fail(_) => 3,
            Verdict::Inconclusive(_) => 4,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Info(_) => "info",
            Verdict::Fail(_) => "fail",
            Verdict::Inconclusive(_) => "inconclusive",
        }
    }
}

pub fn run(cfg: &RunConfig, out: &mut Output) -> Result<Verdict, CliError> {
    match cfg.command {
        Command::Geometry => geometry(cfg, out),
        Command::Delta => delta(cfg, out),
        Command::Homogeneous => homogeneous(cfg, out),
        Command::Inhomogeneous => inhomogeneous(cfg, out),
        Command::OracleCheck => oracle_check(cfg, out),
    }
}

fn vec_cells(v: Vec3) -> [String; 3] {
    [fmt_f64(v.x), fmt_f64(v.y), fmt_f64(v.z)]
}

#[derive(Serialize)]
struct GeometrySummary {
    regime: RegimeArg,
    incoming: [Vec3; 2],
    points: usize,
    /// Classical only: center and radius of the collision sphere.
    center: Option<Vec3>,
    radius: Option<f64>,
    max_radius_deviation: Option<f64>,
    quadric: Option<QuadricFit>,
    quadric_skipped: Option<&'static str>,
    /// Relativistic only: range of the excentricity over the directions.
    excentricity_range: Option<[f64; 2]>,
}

fn geometry(cfg: &RunConfig, out: &mut Output) -> Result<Verdict, CliError> {
    let sq = SphereQuadrature::new(cfg.sphere_m)?;
    let (a, b) = cfg.vectors();
    let mut rows = Vec::with_capacity(sq.len());
    let mut cloud = Vec::with_capacity(sq.len());
    let mut summary = GeometrySummary {
        regime: cfg.regime,
        incoming: [a, b],
        points: sq.len(),
        center: None,
        radius: None,
        max_radius_deviation: None,
        quadric: None,
        quadric_skipped: None,
        excentricity_range: None,
    };
    let verdict = match cfg.regime {
        RegimeArg::Classical => {
            let center = (a + b) * 0.5;
            let radius = 0.5 * (a - b).norm();
            let mut dev: f64 = 0.0;
            for node in sq.nodes() {
                let (vp, wp) = collide(a, b, node.dir);
                dev = dev
                    .max(((vp - center).norm() - radius).abs())
                    .max(((wp - center).norm() - radius).abs());
                cloud.push(vp);
                rows.push([vec_cells(node.dir), vec_cells(vp), vec_cells(wp)].concat());
            }
            out.write_csv("sphere.csv", &["nx", "ny", "nz", "vx", "vy", "vz", "wx", "wy", "wz"], &rows)?;
            summary.center = Some(center);
            summary.radius = Some(radius);
            summary.max_radius_deviation = Some(dev);
            if dev <= 1e-12 * radius.max(1.0) {
                Verdict::Pass
            } else {
                Verdict::Fail(format!("collision cloud leaves its sphere by {dev:e}"))
            }
        }
        RegimeArg::Relativistic => {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for node in sq.nodes() {
                let c = post_collision_rel(a, b, node.dir)?;
                let (pp, qp) = (c.p_post.spatial(), c.q_post.spatial());
                lo = lo.min(c.alpha);
                hi = hi.max(c.alpha);
                cloud.push(pp);
                rows.push([vec_cells(node.dir), vec_cells(pp), vec_cells(qp)].concat());
            }
            out.write_csv(
                "ellipsoid.csv",
                &["omegax", "omegay", "omegaz", "px", "py", "pz", "qx", "qy", "qz"],
                &rows,
            )?;
            summary.excentricity_range = Some([lo, hi]);
            Verdict::Pass
        }
    };
    match fit_quadric(&cloud) {
        Some(fit) => summary.quadric = Some(fit),
        None => summary.quadric_skipped = Some("degenerate"),
    }
    out.write_json("geometry.json", &summary)?;
    Ok(verdict)
}

#[derive(Serialize)]
struct OracleDelta {
    estimate: McEstimate,
    argmin: Vec3,
    probes: usize,
}

#[derive(Serialize)]
struct DeltaSummary {
    status: &'static str,
    diagnostic: Option<String>,
    lambda: f64,
    radius: f64,
    grid_n: usize,
    sphere_m: usize,
    estimate: Option<DeltaEstimate>,
    oracle: Option<OracleDelta>,
    relative_difference: Option<f64>,
    /// `0.05 delta_hat + 3 sigma`.
    tolerance: Option<f64>,
}

fn delta(cfg: &RunConfig, out: &mut Output) -> Result<Verdict, CliError> {
    let kernel = cfg.kernel();
    let grid = Arc::new(VelocityGrid::new(cfg.r, cfg.grid_n)?);
    let op = GainOperator::new(kernel.clone(), SphereQuadrature::new(cfg.sphere_m)?)?.with_fault_scale(cfg.fault_scale);
    let mut summary = DeltaSummary {
        status: "fail",
        diagnostic: None,
        lambda: cfg.lambda,
        radius: cfg.r,
        grid_n: cfg.grid_n,
        sphere_m: cfg.sphere_m,
        estimate: None,
        oracle: None,
        relative_difference: None,
        tolerance: None,
    };
    let est = match op.estimate_delta(&grid, cfg.lambda) {
        Ok(est) => est,
        Err(e @ Error::Estimation { .. }) => {
            let msg = format!("lambda too large: {e}");
            summary.diagnostic = Some(msg.clone());
            out.write_json("delta.json", &summary)?;
            return Ok(Verdict::Fail(msg));
        }
        Err(e) => return Err(e.into()),
    };
    let mc = mc_delta(cfg.r, cfg.lambda, &kernel, cfg.samples, cfg.probes, cfg.seed)?;
    let diff = est.delta - mc.estimate.mean;
    let tol = 0.05 * est.delta + 3.0 * mc.estimate.std_error;
    let verdict = if diff.abs() <= tol {
        Verdict::Pass
    } else {
        Verdict::Fail(format!(
            "grid delta {} and oracle {} differ by more than {tol}",
            est.delta, mc.estimate.mean
        ))
    };
    summary.status = verdict.label();
    summary.relative_difference = Some(diff / est.delta);
    summary.tolerance = Some(tol);
    summary.estimate = Some(est);
    summary.oracle = Some(OracleDelta {
        estimate: mc.estimate,
        argmin: mc.argmin,
        probes: mc.probes.len(),
    });
    out.write_json("delta.json", &summary)?;
    Ok(verdict)
}

#[derive(Serialize)]
struct BlowupSummary {
    status: &'static str,
    diagnostic: Option<String>,
    report: Option<BlowupReport>,
    delta_hat: f64,
    /// `1 / (delta_hat rho0)`.
    predicted_bound: f64,
    /// `1.1 / (delta_hat rho0)`.
    detection_window: f64,
    t_end: f64,
    detected_within_window: bool,
    /// `rho / comparison - 1 >= -1e-6` at every accepted step.
    domination_held: bool,
}

fn homogeneous(cfg: &RunConfig, out: &mut Output) -> Result<Verdict, CliError> {
    let grid = Arc::new(VelocityGrid::new(cfg.r, cfg.grid_n)?);
    let op = GainOperator::new(cfg.kernel(), SphereQuadrature::new(cfg.sphere_m)?)?;
    let controls = Controls {
        threshold_factor: cfg.threshold_factor,
        ..Controls::default()
    };
    let header = ["t", "sup_norm", "min_on_ball", "comparison_value"];
    if cfg.rho0 == 0.0 {
        let t_end = cfg.t_end.unwrap_or(1.0);
        let tensor = GainTensor::new(op, grid);
        let (traj, report) = evolve_truncated_with(&tensor, 0.0, cfg.r, t_end, &controls)?;
        let rows: Vec<Vec<String>> = traj
            .times
            .iter()
            .map(|&t| vec![fmt_f64(t), fmt_f64(0.0), fmt_f64(0.0), fmt_f64(0.0)])
            .collect();
        out.write_csv("trajectory.csv", &header, &rows)?;
        let msg = "rho0 = 0: no blowup expected".to_string();
        out.write_json(
            "blowup.json",
            &BlowupSummary {
                status: "info",
                diagnostic: Some(msg.clone()),
                report: Some(report),
                delta_hat: 0.0,
                predicted_bound: f64::INFINITY,
                detection_window: f64::INFINITY,
                t_end,
                detected_within_window: false,
                domination_held: true,
            },
        )?;
        return Ok(Verdict::Info(msg));
    }
    let delta_hat = op.estimate_delta(&grid, 1.0)?.delta;
    let window = 1.1 / (delta_hat * cfg.rho0);
    let t_end = cfg.t_end.unwrap_or(window);
    let tensor = GainTensor::new(op, grid);
    let mut summary = BlowupSummary {
        status: "inconclusive",
        diagnostic: None,
        report: None,
        delta_hat,
        predicted_bound: 1.0 / (delta_hat * cfg.rho0),
        detection_window: window,
        t_end,
        detected_within_window: false,
        domination_held: false,
    };
    let (traj, report) = match evolve_truncated_with(&tensor, cfg.rho0, cfg.r, t_end, &controls) {
        Ok(run) => run,
        Err(e @ Error::Inconclusive { .. }) => {
            let msg = e.to_string();
            summary.diagnostic = Some(msg.clone());
            out.write_json("blowup.json", &summary)?;
            return Ok(Verdict::Inconclusive(msg));
        }
        Err(e) => return Err(e.into()),
    };
    let cs = ComparisonState::new(cfg.rho0, report.delta_hat)?;
    let mins = traj.min_on_ball(cfg.r);
    let rows: Vec<Vec<String>> = traj
        .times
        .iter()
        .zip(traj.sup_norms())
        .zip(mins)
        .map(|((&t, sup), min)| {
            let cmp = comparison_solution(&cs, t).unwrap_or(f64::INFINITY);
            vec![fmt_f64(t), fmt_f64(sup), fmt_f64(min), fmt_f64(cmp)]
        })
        .collect();
    out.write_csv("trajectory.csv", &header, &rows)?;
    let dominated = report.min_comparison_margin.is_some_and(|m| m >= -1e-6);
    let within = report.detected && report.t_detect <= window;
    let verdict = if within && dominated {
        Verdict::Pass
    } else if !report.detected && t_end < window {
        Verdict::Inconclusive(format!("no detection before t_end = {t_end}, inside the window {window}"))
    } else if !dominated {
        Verdict::Fail(format!(
            "comparison solution not dominated: margin {:?}",
            report.min_comparison_margin
        ))
    } else {
        Verdict::Fail(format!("no detection within {window}"))
    };
    summary.status = verdict.label();
    summary.detected_within_window = within;
    summary.domination_held = dominated;
    summary.report = Some(report);
    if let Verdict::Fail(m) | Verdict::Inconclusive(m) = &verdict {
        summary.diagnostic = Some(m.clone());
    }
    out.write_json("blowup.json", &summary)?;
    Ok(verdict)
}

#[derive(Serialize)]
struct ShrinkingBallSummary {
    times: Vec<f64>,
    pairs_per_time: usize,
    k: usize,
    max_discrepancy: f64,
    /// Largest sampled iterate value, at least 1.
    scale: f64,
    tolerance: f64,
}

#[derive(Serialize)]
struct NegativeControl {
    k: usize,
    t: f64,
    x: Vec3,
    y: Vec3,
    v: Vec3,
    discrepancy: f64,
}

#[derive(Serialize)]
struct ReductionSummary {
    status: &'static str,
    diagnostic: Option<String>,
    config: InhomogeneousConfig,
    k_max: usize,
    c1_exceeds_t_c2: bool,
    shrinking_ball: ShrinkingBallSummary,
    negative_control: Option<NegativeControl>,
    reduction: ReductionReport,
}

fn sample_row(s: &ShrinkingBallSample, control: bool) -> Vec<String> {
    vec![
        s.k.to_string(),
        fmt_f64(s.t),
        fmt_f64(s.x_norm),
        fmt_f64(s.y_norm),
        fmt_f64(s.v_norm),
        fmt_f64(s.f_x),
        fmt_f64(s.f_y),
        fmt_f64(s.discrepancy),
        u8::from(control).to_string(),
    ]
}

fn inhomogeneous(cfg: &RunConfig, out: &mut Output) -> Result<Verdict, CliError> {
    let mut ic = InhomogeneousConfig::new(cfg.c0, cfg.c1, cfg.c2, cfg.horizon, cfg.kernel())?;
    ic.sphere_m = cfg.sphere_m;
    ic.w_grid_n = cfg.grid_n;
    ic.n_t = cfg.n_t;
    ic.validate()?;
    let ev = PicardEvaluator::new(ic.clone(), cfg.k_max)?;
    let times: Vec<f64> = [0.25, 0.5, 0.75].iter().map(|f| f * cfg.horizon).collect();
    let mut rows = Vec::new();
    let (mut worst, mut scale) = (0.0_f64, 1.0_f64);
    for (i, &t) in times.iter().enumerate() {
        let rep = check_shrinking_ball(&ev, cfg.k_max, t, cfg.samples, cfg.seed.wrapping_add(i as u64))?;
        worst = worst.max(rep.max_discrepancy);
        for s in &rep.samples {
            scale = scale.max(s.f_x).max(s.f_y);
            rows.push(sample_row(s, false));
        }
    }
    let negative_control = if cfg.negative_control && cfg.k_max >= 2 {
        let t = 0.5 * cfg.horizon;
        let x = Vec3::new(cfg.c1 - 0.5 * t * cfg.c2, 0.0, 0.0);
        let y = Vec3::ZERO;
        let v = Vec3::new(-0.9 * cfg.c2, 0.0, 0.0);
        let (fx, fy) = (ev.eval_picard(2, t, x, v)?, ev.eval_picard(2, t, y, v)?);
        let s = ShrinkingBallSample {
            k: 2,
            t,
            x_norm: x.norm(),
            y_norm: y.norm(),
            v_norm: v.norm(),
            f_x: fx,
            f_y: fy,
            discrepancy: (fx - fy).abs(),
        };
        rows.push(sample_row(&s, true));
        Some(NegativeControl {
            k: 2,
            t,
            x,
            y,
            v,
            discrepancy: s.discrepancy,
        })
    } else {
        None
    };
    out.write_csv(
        "lemma5.csv",
        &["k", "t", "x_norm", "y_norm", "v_norm", "f_x", "f_y", "discrepancy", "control"],
        &rows,
    )?;
    let grid = Arc::new(VelocityGrid::new(cfg.c2, cfg.reduction_grid_n)?);
    let sq = SphereQuadrature::new(cfg.reduction_sphere_m)?;
    let reduction = reduced_homogeneous_blowup(&ic, &grid, &sq)?;
    let tolerance = 1e-12 * scale;
    let verdict = if worst > tolerance {
        Verdict::Fail(format!("shrinking-ball discrepancy {worst:e} exceeds {tolerance:e}"))
    } else if !reduction.consistent {
        Verdict::Fail(format!(
            "blowup predicted by {} but not detected within T = {}",
            reduction.predicted_time, cfg.horizon
        ))
    } else {
        Verdict::Pass
    };
    let diagnostic = match &verdict {
        Verdict::Fail(m) => Some(m.clone()),
        _ => None,
    };
    out.write_json(
        "theorem2.json",
        &ReductionSummary {
            status: verdict.label(),
            diagnostic,
            c1_exceeds_t_c2: ic.c1 > ic.horizon * ic.c2,
            config: ic,
            k_max: cfg.k_max,
            shrinking_ball: ShrinkingBallSummary {
                times,
                pairs_per_time: cfg.samples,
                k: cfg.k_max,
                max_discrepancy: worst,
                scale,
                tolerance,
            },
            negative_control,
            reduction,
        },
    )?;
    Ok(verdict)
}

#[derive(Serialize)]
struct GainComparison {
    v: Vec3,
    grid: f64,
    monte_carlo: McEstimate,
    z: f64,
}

#[derive(Serialize)]
struct FormComparison {
    p: Vec3,
    check: Option<FormCheck>,
    mismatch: Option<String>,
}

#[derive(Serialize)]
struct OracleSummary {
    status: &'static str,
    regime: RegimeArg,
    test_function: TestFunction,
    grid_n: usize,
    sphere_m: usize,
    samples: usize,
    max_z: f64,
    gain: Vec<GainComparison>,
    forms: Vec<FormComparison>,
}

/// Probe velocities as fractions of the grid radius.
pub const ORACLE_PROBES: [[f64; 3]; 5] = [
    [0.0, 0.0, 0.0],
    [0.3, 0.0, 0.0],
    [0.2, 0.4, 0.1],
    [-0.5, 0.3, 0.2],
    [0.1, -0.6, 0.5],
];

fn oracle_check(cfg: &RunConfig, out: &mut Output) -> Result<Verdict, CliError> {
    let kernel = cfg.kernel();
    let grid = Arc::new(VelocityGrid::new(cfg.r, cfg.grid_n)?);
    let r2 = cfg.r * cfg.r;
    let bump = move |v: Vec3| (1.0 - v.norm_sqr() / r2).max(0.0).powi(2);
    let field = match cfg.test_function {
        TestFunction::Bump => DistributionField::from_fn(grid, bump)?,
        TestFunction::Zero => DistributionField::zeros(grid),
    };
    let op = GainOperator::new(kernel.clone(), SphereQuadrature::new(cfg.sphere_m)?)?.with_fault_scale(cfg.fault_scale);
    let mut gain = Vec::new();
    for (i, p) in ORACLE_PROBES.iter().enumerate() {
        let v = Vec3::from(*p) * cfg.r;
        let det = op.apply_at(&field, v)?;
        let mc = mc_gain(&field, &kernel, v, cfg.samples, cfg.seed.wrapping_add(i as u64))?;
        let d = (det - mc.mean).abs();
        let z = if d == 0.0 { 0.0 } else { d / mc.std_error };
        gain.push(GainComparison {
            v,
            grid: det,
            monte_carlo: mc,
            z,
        });
    }
    let form_field = FnField::new(bump, cfg.r);
    let zero_field = FnField::new(|_| 0.0, cfg.r);
    let mut forms = Vec::new();
    for (i, p) in [Vec3::ZERO, Vec3::new(0.5 * cfg.r, 0.0, 0.0)].into_iter().enumerate() {
        let seed = cfg.seed.wrapping_add(100 + i as u64);
        let (cm, mom) = match cfg.test_function {
            TestFunction::Bump => mc_form_equivalence_with(p, &form_field, cfg.samples, seed, cfg.fault_scale)?,
            TestFunction::Zero => mc_form_equivalence_with(p, &zero_field, cfg.samples, seed, cfg.fault_scale)?,
        };
        forms.push(match check_forms(cm, mom) {
            Ok(check) => FormComparison {
                p,
                check: Some(check),
                mismatch: None,
            },
            Err(e @ Error::RepresentationMismatch(_)) => FormComparison {
                p,
                check: None,
                mismatch: Some(e.to_string()),
            },
            Err(e) => return Err(e.into()),
        });
    }
    let max_z = gain.iter().map(|g| g.z).fold(0.0, f64::max);
    let mismatch = forms.iter().find_map(|f| f.mismatch.clone());
    let verdict = if max_z > 5.0 {
        Verdict::Fail(format!("grid gain disagrees with the Monte Carlo oracle at {max_z:.1} sigma"))
    } else if let Some(m) = mismatch {
        Verdict::Fail(m)
    } else {
        Verdict::Pass
    };
    out.write_json(
        "oracle.json",
        &OracleSummary {
            status: verdict.label(),
            regime: cfg.regime,
            test_function: cfg.test_function,
            grid_n: cfg.grid_n,
            sphere_m: cfg.sphere_m,
            samples: cfg.samples,
            max_z,
            gain,
            forms,
        },
    )?;
    Ok(verdict)
}
