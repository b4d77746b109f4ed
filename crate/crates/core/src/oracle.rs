//! Monte Carlo reference integrals for the gain term.
//!
//! Nothing here calls the deterministic quadrature or the collision modules:
//! collision maps and kernels are re-derived locally and only [`Vec3`] and the
//! [`Field`] trait are shared. Samples are drawn in batches of fixed size;
//! batch `b` uses a ChaCha8 stream `b` of the master seed, and batch sums are
//! combined in batch order, so estimates are identical for any thread count.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BallIndicator, Field, KernelSpec, Vec3};

/// Mean and standard error of a Monte Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

impl McEstimate {
    /// `|a - b|` in units of the combined standard error; zero when both
    /// agree exactly, infinite when they differ with zero error.
    pub fn z_score(&self, other: &McEstimate) -> f64 {
        z_score(self.mean, other.mean, self.std_error.hypot(other.std_error))
    }
}

pub(crate) fn z_score(a: f64, b: f64, sigma: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else if sigma == 0.0 {
        f64::INFINITY
    } else {
        d / sigma
    }
}

pub const MIN_SAMPLES: usize = 10_000;
const BATCH: usize = 4096;

/// Kernels known to the oracle.
#[derive(Clone, Debug, PartialEq)]
pub enum OracleKernel {
    HardSphere,
    /// `B = 1` on the hemisphere `n . (v - w) >= 0`.
    UnitHemisphere,
    ConstantSigma(f64),
    /// Angular table on `[0, pi]`, linearly interpolated.
    Maxwellian(Vec<f64>),
}

impl From<&KernelSpec> for OracleKernel {
    fn from(k: &KernelSpec) -> Self {
        match k {
            KernelSpec::ClassicalHardSphere => OracleKernel::HardSphere,
            KernelSpec::RelativisticConstantSigma { sigma0 } => OracleKernel::ConstantSigma(*sigma0),
            KernelSpec::RelativisticMaxwellian { angular } => OracleKernel::Maxwellian(angular.values().to_vec()),
        }
    }
}

impl OracleKernel {
    fn relativistic(&self) -> bool {
        matches!(self, OracleKernel::ConstantSigma(_) | OracleKernel::Maxwellian(_))
    }
}

fn table(values: &[f64], theta: f64) -> f64 {
    let x = theta.clamp(0.0, PI) / PI * (values.len() - 1) as f64;
    let i = (x.floor() as usize).min(values.len() - 2);
    let t = x - i as f64;
    values[i] * (1.0 - t) + values[i + 1] * t
}

fn unit_sphere(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

fn unit_ball(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let p = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if p.norm_sqr() <= 1.0 {
            return p;
        }
    }
}

fn ball_volume(r: f64) -> f64 {
    4.0 / 3.0 * PI * r * r * r
}

fn p0(p: Vec3) -> f64 {
    (1.0 + p.norm_sqr()).sqrt()
}

/// Runs `samples` draws of `draw` in seeded batches.
fn run_batches(samples: usize, seed: u64, draw: impl Fn(&mut ChaCha8Rng) -> f64 + Sync) -> Result<McEstimate> {
    if samples < MIN_SAMPLES {
        return Err(Error::Argument(format!(
            "need at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let batches = samples.div_ceil(BATCH);
    let sums: Vec<(f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = BATCH.min(samples - b * BATCH);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let x = draw(&mut rng);
                s += x;
                s2 += x * x;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
        seed,
    })
}

/// Radius of a ball containing every partner that can scatter into `v`.
fn partner_radius(kernel: &OracleKernel, v: Vec3, support: f64) -> Option<f64> {
    if kernel.relativistic() {
        let e = 2.0 * p0(Vec3::new(support, 0.0, 0.0)) - p0(v);
        (e >= 1.0).then(|| (e * e - 1.0).sqrt())
    } else {
        let r2 = 2.0 * support * support - v.norm_sqr();
        (r2 >= 0.0).then(|| r2.sqrt())
    }
}

/// Integrand of the gain at one `(w, n)` sample, without the sampling density.
fn gain_integrand(f: &dyn Field, kernel: &OracleKernel, v: Vec3, w: Vec3, n: Vec3) -> f64 {
    match kernel {
        OracleKernel::HardSphere | OracleKernel::UnitHemisphere => {
            let c = n.dot(v - w);
            if c < 0.0 {
                return 0.0;
            }
            let b = if matches!(kernel, OracleKernel::HardSphere) { c } else { 1.0 };
            let vp = v - n * c;
            let wp = w + n * c;
            b * f.value(vp) * f.value(wp)
        }
        _ => {
            let (a, k) = rel_collision(kernel, v, w, n);
            if k == 0.0 {
                return 0.0;
            }
            k * f.value(v + n * a) * f.value(w - n * a)
        }
    }
}

/// Offset `a` and kernel `k` of the momentum-space parametrization
/// `p' = p + a w`, `q' = q - a w`.
fn rel_collision(kernel: &OracleKernel, p: Vec3, q: Vec3, om: Vec3) -> (f64, f64) {
    let (e_p, e_q) = (p0(p), p0(q));
    let e = e_p + e_q;
    let tot = p + q;
    let s = e * e - tot.norm_sqr();
    let proj = om.dot(q / e_q - p / e_p);
    if proj == 0.0 {
        return (0.0, 0.0);
    }
    let along = om.dot(tot);
    let d = e * e - along * along;
    let a = 2.0 * e * e_p * e_q * proj / d;
    let sigma = match kernel {
        OracleKernel::ConstantSigma(s0) => *s0,
        OracleKernel::Maxwellian(t) => {
            let g = cm_momentum(p, q);
            if g == 0.0 {
                return (a, 0.0);
            }
            let pp = p + om * a;
            let qp = q - om * a;
            ((1.0 + g * g).sqrt() / g) * table(t, cm_angle(p, q, pp, qp))
        }
        _ => unreachable!(),
    };
    (a, 4.0 * s * sigma * e * e * proj.abs() / (d * d))
}

/// Momentum of either particle in the center-of-mass frame.
fn cm_momentum(p: Vec3, q: Vec3) -> f64 {
    let e = p0(p) + p0(q);
    let s = e * e - (p + q).norm_sqr();
    (0.25 * s - 1.0).max(0.0).sqrt()
}

/// Lorentz boost of `(e, k)` into the frame moving with velocity `beta`.
fn boost(e: f64, k: Vec3, beta: Vec3) -> (f64, Vec3) {
    let b2 = beta.norm_sqr();
    if b2 == 0.0 {
        return (e, k);
    }
    let gamma = 1.0 / (1.0 - b2).sqrt();
    let bk = beta.dot(k);
    let e2 = gamma * (e - bk);
    let k2 = k + beta * ((gamma - 1.0) * bk / b2 - gamma * e);
    (e2, k2)
}

/// Angle between incoming and outgoing momenta of the first particle in the
/// center-of-mass frame.
fn cm_angle(p: Vec3, q: Vec3, pp: Vec3, _qp: Vec3) -> f64 {
    let beta = (p + q) / (p0(p) + p0(q));
    let (_, a) = boost(p0(p), p, beta);
    let (_, b) = boost(p0(pp), pp, beta);
    let c = a.dot(b) / (a.norm() * b.norm());
    c.clamp(-1.0, 1.0).acos()
}

/// Monte Carlo estimate of `Q+(f, f)(v)`: `w` uniform in a ball holding all
/// contributing partners, `n` uniform on the sphere.
pub fn mc_gain(f: &dyn Field, kernel: &KernelSpec, v: Vec3, samples: usize, seed: u64) -> Result<McEstimate> {
    mc_gain_with(f, &OracleKernel::from(kernel), v, samples, seed)
}

pub fn mc_gain_with(
    f: &dyn Field,
    kernel: &OracleKernel,
    v: Vec3,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let Some(rw) = partner_radius(kernel, v, f.support_radius()) else {
        return run_batches(samples, seed, |_| 0.0);
    };
    let density = ball_volume(rw) * 4.0 * PI;
    run_batches(samples, seed, |rng| {
        let w = unit_ball(rng) * rw;
        let n = unit_sphere(rng);
        density * gain_integrand(f, kernel, v, w, n)
    })
}

/// Minimum over probe velocities of the estimated gain of `chi_{B_R}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McDelta {
    /// `mean` is the smallest probe mean, `std_error` the largest probe error.
    pub estimate: McEstimate,
    pub argmin: Vec3,
    pub probes: Vec<(Vec3, f64)>,
}

/// Probe set: half Fibonacci points on the sphere `|v| = lambda R`, half
/// Halton points filling the ball.
pub fn probe_points(radius: f64, count: usize) -> Vec<Vec3> {
    let shell = count.div_ceil(2);
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut out: Vec<Vec3> = (0..shell)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / shell as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z) * radius
        })
        .collect();
    let mut i = 1;
    while out.len() < count {
        let p = Vec3::new(halton(i, 2), halton(i, 3), halton(i, 5)) * 2.0 - Vec3::new(1.0, 1.0, 1.0);
        if p.norm_sqr() <= 1.0 {
            out.push(p * radius);
        }
        i += 1;
    }
    out
}

fn halton(mut i: usize, base: usize) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

pub fn mc_delta(
    r: f64,
    lambda: f64,
    kernel: &KernelSpec,
    samples_per_v: usize,
    v_probes: usize,
    seed: u64,
) -> Result<McDelta> {
    if !(r > 0.0 && lambda >= 1.0 && v_probes > 0) {
        return Err(Error::Argument(format!(
            "need R > 0, lambda >= 1 and at least one probe, got {r}, {lambda}, {v_probes}"
        )));
    }
    let f = BallIndicator::new(r, 1.0);
    let k = OracleKernel::from(kernel);
    let mut probes = Vec::new();
    let mut worst_error: f64 = 0.0;
    for (i, v) in probe_points(lambda * r, v_probes).into_iter().enumerate() {
        let est = mc_gain_with(&f, &k, v, samples_per_v, seed.wrapping_add(i as u64))?;
        worst_error = worst_error.max(est.std_error);
        probes.push((v, est.mean));
    }
    let (argmin, mean) = probes
        .iter()
        .copied()
        .fold((Vec3::ZERO, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    Ok(McDelta {
        estimate: McEstimate {
            mean,
            std_error: worst_error,
            samples: samples_per_v * v_probes,
            seed,
        },
        argmin,
        probes,
    })
}

/// Ratio between the momentum-space (`k dw dq`) form integrated over the full
/// direction sphere and the center-of-mass (`B dOmega dq / q0`, prefactor
/// `1 / p0`) form. One factor 2 comes from `w` and `-w` giving the same
/// outcome, one from the normalization of the cross section.
pub const FORM_RATIO: f64 = 4.0;

/// The relativistic gain of `f` at `p` estimated through both representations,
/// `(center-of-mass form, momentum-space form)`, constant cross section 1.
pub fn mc_form_equivalence(p: Vec3, f: &dyn Field, samples: usize, seed: u64) -> Result<(McEstimate, McEstimate)> {
    mc_form_equivalence_with(p, f, samples, seed, 1.0)
}

/// [`mc_form_equivalence`] with the momentum-space kernel multiplied by
/// `fault_scale` (fault injection).
pub fn mc_form_equivalence_with(
    p: Vec3,
    f: &dyn Field,
    samples: usize,
    seed: u64,
    fault_scale: f64,
) -> Result<(McEstimate, McEstimate)> {
    let kernel = OracleKernel::ConstantSigma(1.0);
    let Some(rq) = partner_radius(&kernel, p, f.support_radius()) else {
        let z = run_batches(samples, seed, |_| 0.0)?;
        return Ok((z, z));
    };
    let density = ball_volume(rq) * 4.0 * PI;
    let e_p = p0(p);
    let cm = run_batches(samples, seed, |rng| {
        let q = unit_ball(rng) * rq;
        let omega = unit_sphere(rng);
        let e_q = p0(q);
        let g = cm_momentum(p, q);
        if g == 0.0 {
            return 0.0;
        }
        // rotate the pair in the center-of-mass frame
        let beta = (p + q) / (e_p + e_q);
        let e_cm = (e_p + e_q) * (1.0 - beta.norm_sqr()).sqrt();
        let half = 0.5 * e_cm;
        let (_, pp) = boost(half, omega * g, -beta);
        let (_, qp) = boost(half, omega * -g, -beta);
        let s = e_cm * e_cm;
        let b = 0.5 * g * s.sqrt();
        density * b * f.value(pp) * f.value(qp) / (e_p * e_q)
    })?;
    let momentum = run_batches(samples, seed ^ 0x9e37_79b9_7f4a_7c15, |rng| {
        let q = unit_ball(rng) * rq;
        let omega = unit_sphere(rng);
        density * fault_scale * gain_integrand(f, &kernel, p, q, omega)
    })?;
    Ok((cm, momentum))
}

/// Outcome of comparing the two relativistic representations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FormCheck {
    pub center_of_mass: McEstimate,
    pub momentum_space: McEstimate,
    pub ratio: f64,
    pub z: f64,
}

/// Compares the momentum-space estimate with `FORM_RATIO` times the
/// center-of-mass estimate; fails beyond 5 standard errors.
pub fn check_forms(cm: McEstimate, momentum: McEstimate) -> Result<FormCheck> {
    let sigma = (FORM_RATIO * cm.std_error).hypot(momentum.std_error);
    let z = z_score(momentum.mean, FORM_RATIO * cm.mean, sigma);
    let check = FormCheck {
        center_of_mass: cm,
        momentum_space: momentum,
        ratio: momentum.mean / cm.mean,
        z,
    };
    if z > 5.0 {
        return Err(Error::RepresentationMismatch(format!(
            "momentum-space estimate {} vs {} x {} at {z:.1} sigma",
            momentum.mean, FORM_RATIO, cm.mean
        )));
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnField;

    fn bump(r: f64) -> FnField<impl Fn(Vec3) -> f64 + Sync> {
        FnField::new(move |v: Vec3| (1.0 - v.norm_sqr() / (r * r)).max(0.0).powi(2), r)
    }

    #[test]
    fn zero_field_gives_exact_zero() {
        let z = FnField::new(|_| 0.0, 1.0);
        let est = mc_gain(&z, &KernelSpec::ClassicalHardSphere, Vec3::ZERO, 20_000, 1).unwrap();
        assert_eq!((est.mean, est.std_error), (0.0, 0.0));
        let (a, b) = mc_form_equivalence(Vec3::ZERO, &z, 20_000, 1).unwrap();
        assert_eq!((a.mean, b.mean), (0.0, 0.0));
    }

    #[test]
    fn too_few_samples_rejected() {
        let f = bump(1.0);
        assert!(mc_gain(&f, &KernelSpec::ClassicalHardSphere, Vec3::ZERO, 100, 1).is_err());
    }

    #[test]
    fn hard_sphere_origin_matches_closed_form() {
        let f = BallIndicator::new(1.0, 1.0);
        let est = mc_gain(&f, &KernelSpec::ClassicalHardSphere, Vec3::ZERO, 400_000, 3).unwrap();
        let exact = 2.0 * PI * PI;
        assert!((est.mean - exact).abs() < 4.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn unit_hemisphere_kernel_measures_the_admissible_set() {
        // v = 0: every partner in B_1 is admissible on the whole hemisphere,
        // giving 2 pi vol(B_1); partners out to sqrt(2) add pi^2 4/3
        let f = BallIndicator::new(1.0, 1.0);
        let est = mc_gain_with(&f, &OracleKernel::UnitHemisphere, Vec3::ZERO, 400_000, 5).unwrap();
        let half_measure = 2.0 * PI * ball_volume(1.0);
        assert!(est.mean > half_measure);
        assert!((est.mean - 4.0 * PI * PI).abs() < 4.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let f = bump(1.0);
        let k = KernelSpec::constant_sigma(1.0).unwrap();
        let v = Vec3::new(0.2, 0.1, 0.0);
        let a = mc_gain(&f, &k, v, 30_000, 9).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| mc_gain(&f, &k, v, 30_000, 9).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, mc_gain(&f, &k, v, 30_000, 10).unwrap());
    }

    #[test]
    fn error_halves_when_samples_quadruple() {
        let f = bump(1.0);
        let a = mc_gain(&f, &KernelSpec::ClassicalHardSphere, Vec3::ZERO, 50_000, 2).unwrap();
        let b = mc_gain(&f, &KernelSpec::ClassicalHardSphere, Vec3::ZERO, 200_000, 2).unwrap();
        let ratio = a.std_error / b.std_error;
        assert!(ratio > 2.0 / 1.5 && ratio < 2.0 * 1.5, "{ratio}");
    }

    #[test]
    fn forms_agree_after_normalization() {
        let f = bump(1.0);
        for p in [Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)] {
            let (cm, mom) = mc_form_equivalence(p, &f, 200_000, 11).unwrap();
            let check = check_forms(cm, mom).unwrap();
            assert!(check.z < 3.0, "{check:?}");
        }
        let (cm, mom) = mc_form_equivalence_with(Vec3::ZERO, &f, 200_000, 11, 1.5).unwrap();
        assert!(matches!(check_forms(cm, mom), Err(Error::RepresentationMismatch(_))));
    }

    #[test]
    fn boost_round_trip() {
        let beta = Vec3::new(0.3, -0.2, 0.5);
        let k = Vec3::new(1.0, 2.0, -0.5);
        let e = p0(k);
        let (e1, k1) = boost(e, k, beta);
        assert!((e1 * e1 - k1.norm_sqr() - 1.0).abs() < 1e-12);
        let (e2, k2) = boost(e1, k1, -beta);
        assert!((e2 - e).abs() < 1e-12 && k2.max_abs_diff(k) < 1e-12);
    }

    #[test]
    fn delta_probes_cover_the_shell() {
        let pts = probe_points(2.0, 9);
        assert_eq!(pts.len(), 9);
        assert!(pts[..5].iter().all(|p| (p.norm() - 2.0).abs() < 1e-12));
        assert!(pts[5..].iter().all(|p| p.norm() <= 2.0));
    }
}
