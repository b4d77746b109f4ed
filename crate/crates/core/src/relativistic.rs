//! Relativistic binary collisions of unit-mass particles (`m = c = 1`,
//! signature `(+ - - -)`).
//!
//! Outgoing momenta use the parametrization `p' = p + a w`, `q' = q - a w`
//! over directions `w` on the unit sphere, with
//!
//! ```text
//! a(p, q, w) = 2 e p0 q0 (w . (q^ - p^)) / (e^2 - (w . (p + q))^2),   e = p0 + q0,
//! ```
//!
//! where `x^ = x / x0`. The companion kernel is
//!
//! ```text
//! k(p, q, w) = 4 s sigma e^2 |w . (q^ - p^)| / (e^2 - (w . (p + q))^2)^2.
//! ```
//!
//! `w` and `-w` produce the same outgoing pair, so a sweep over the full
//! sphere covers every outcome twice.
//!
//! The center-of-mass scattering angle follows
//! `cos(theta) = 1 - 2 <p - q, p' - q'> / <p - q, p - q>` with Minkowski
//! products. Evaluated literally, the identity collision `p' = p` gives
//! `cos(theta) = -1`, so the forward limit maps to `theta = pi`, and the
//! exchange `p' = q` gives the unclamped value `3`. [`cos_theta_raw`] exposes
//! the unclamped value; [`scattering_angle`] clamps it to `[-1, 1]`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{KernelSpec, Regime, SphereQuadrature, Vec3};

const UNIT_TOL: f64 = 1e-12;
const CONSERVATION_TOL: f64 = 1e-8;

/// Particle energy `sqrt(1 + |p|^2)`.
#[inline]
pub fn energy(p: Vec3) -> f64 {
    (1.0 + p.norm_sqr()).sqrt()
}

/// An on-shell four-momentum. The energy is always derived from the spatial part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FourMomentum {
    p: Vec3,
    p0: f64,
}

impl FourMomentum {
    pub fn new(p: Vec3) -> Self {
        FourMomentum { p, p0: energy(p) }
    }

    pub fn spatial(&self) -> Vec3 {
        self.p
    }

    pub fn energy(&self) -> f64 {
        self.p0
    }

    /// Three-velocity `p / p0`.
    pub fn velocity(&self) -> Vec3 {
        self.p / self.p0
    }

    /// Minkowski product with signature `(+ - - -)`.
    pub fn minkowski(&self, other: &FourMomentum) -> f64 {
        self.p0 * other.p0 - self.p.dot(other.p)
    }
}

/// Minkowski product of two differences `(a - b).(c - d)`.
fn minkowski_diff(a: &FourMomentum, b: &FourMomentum, c: &FourMomentum, d: &FourMomentum) -> f64 {
    (a.p0 - b.p0) * (c.p0 - d.p0) - (a.p - b.p).dot(c.p - d.p)
}

/// Squared total center-of-mass energy `s` and relative momentum `g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InvariantPair {
    pub s: f64,
    pub g: f64,
}

pub fn invariants_sg(p: Vec3, q: Vec3) -> Result<InvariantPair> {
    let (p0, q0) = (energy(p), energy(q));
    let s = (p0 + q0).powi(2) - (p + q).norm_sqr();
    // p0 - q0 without cancellation
    let de = (p.norm_sqr() - q.norm_sqr()) / (p0 + q0);
    let radicand = (p - q).norm_sqr() - de * de;
    if radicand < -1e-12 {
        return Err(Error::Consistency(format!(
            "negative relative-momentum radicand {radicand:e}"
        )));
    }
    Ok(InvariantPair {
        s,
        g: 0.5 * radicand.max(0.0).sqrt(),
    })
}

/// Unclamped value of the printed scattering-angle cosine.
pub fn cos_theta_raw(
    p: &FourMomentum,
    q: &FourMomentum,
    p_post: &FourMomentum,
    q_post: &FourMomentum,
) -> Result<f64> {
    let denom = minkowski_diff(p, q, p, q);
    if denom.abs() < 1e-14 {
        return Err(Error::DegenerateCollision(
            "p = q leaves the scattering angle undefined".into(),
        ));
    }
    Ok(1.0 - 2.0 * minkowski_diff(p, q, p_post, q_post) / denom)
}

/// Center-of-mass scattering angle in `[0, pi]`.
pub fn scattering_angle(
    p: &FourMomentum,
    q: &FourMomentum,
    p_post: &FourMomentum,
    q_post: &FourMomentum,
) -> Result<f64> {
    let dm = (p.p + q.p - p_post.p - q_post.p).norm();
    let de = (p.p0 + q.p0 - p_post.p0 - q_post.p0).abs();
    if dm > CONSERVATION_TOL || de > CONSERVATION_TOL {
        return Err(Error::Argument(format!(
            "momenta do not satisfy conservation (momentum {dm:e}, energy {de:e})"
        )));
    }
    Ok(cos_theta_raw(p, q, p_post, q_post)?.clamp(-1.0, 1.0).acos())
}

/// `B(g, theta) = g s^(1/2) sigma(g, theta) / 2` with `s = 4 (1 + g^2)`.
///
/// For Maxwellian molecules the `1/g` of the cross section cancels, leaving
/// `(s^(1/2) / 2) (1 + g^2)^(1/2) F(theta)`, which is finite at `g = 0`.
pub fn kernel_b(g: f64, theta: f64, spec: &KernelSpec) -> Result<f64> {
    spec.require(Regime::Relativistic)?;
    if !(g >= 0.0) || !(0.0..=PI).contains(&theta) {
        return Err(Error::Argument(format!("need g >= 0 and theta in [0, pi], got {g}, {theta}")));
    }
    let s = 4.0 * (1.0 + g * g);
    let root_s = s.sqrt();
    Ok(match spec {
        KernelSpec::RelativisticConstantSigma { sigma0 } => 0.5 * g * root_s * sigma0,
        KernelSpec::RelativisticMaxwellian { angular } => {
            0.5 * root_s * (1.0 + g * g).sqrt() * angular.eval(theta)
        }
        KernelSpec::ClassicalHardSphere => unreachable!(),
    })
}

#[inline]
fn offset_parts(p: Vec3, p0: f64, q: Vec3, q0: f64, omega: Vec3) -> (f64, f64) {
    let e = p0 + q0;
    let num_dir = omega.dot(q / q0 - p / p0);
    let wp = omega.dot(p + q);
    let denom = e * e - wp * wp;
    (num_dir, denom)
}

/// Offset `a(p, q, w)`; no validation.
#[inline]
pub fn offset_a_unchecked(p: Vec3, p0: f64, q: Vec3, q0: f64, omega: Vec3) -> f64 {
    let (num_dir, denom) = offset_parts(p, p0, q, q0, omega);
    2.0 * (p0 + q0) * p0 * q0 * num_dir / denom
}

pub fn offset_a(p: Vec3, q: Vec3, omega: Vec3) -> Result<f64> {
    check_unit(omega)?;
    Ok(offset_a_unchecked(p, energy(p), q, energy(q), omega))
}

/// Outgoing spatial momenta; no validation.
#[inline]
pub fn collide_rel(p: Vec3, p0: f64, q: Vec3, q0: f64, omega: Vec3) -> (Vec3, Vec3) {
    let a = offset_a_unchecked(p, p0, q, q0, omega);
    let d = omega * a;
    (p + d, q - d)
}

fn check_unit(omega: Vec3) -> Result<()> {
    if !omega.is_finite() || (omega.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::Argument(format!(
            "direction must be a unit vector, |w| = {}",
            omega.norm()
        )));
    }
    Ok(())
}

/// A resolved relativistic collision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RelativisticCollision {
    pub p: FourMomentum,
    pub q: FourMomentum,
    pub omega: Vec3,
    pub a: f64,
    pub p_post: FourMomentum,
    pub q_post: FourMomentum,
    /// Scattering angle; `pi` when `p = q` (the forward limit of the printed formula).
    pub theta: f64,
    /// `p0 q0 / (p0' q0')`.
    pub alpha: f64,
}

pub fn post_collision_rel(p: Vec3, q: Vec3, omega: Vec3) -> Result<RelativisticCollision> {
    check_unit(omega)?;
    let pm = FourMomentum::new(p);
    let qm = FourMomentum::new(q);
    let a = offset_a_unchecked(p, pm.p0, q, qm.p0, omega);
    let p_post = FourMomentum::new(p + omega * a);
    let q_post = FourMomentum::new(q - omega * a);
    let e = pm.p0 + qm.p0;
    let residual = (p_post.p0 + q_post.p0 - e).abs() / e;
    if !(residual <= CONSERVATION_TOL) {
        return Err(Error::FormulaConsistency { residual });
    }
    let theta = if minkowski_diff(&pm, &qm, &pm, &qm).abs() < 1e-14 {
        PI
    } else {
        cos_theta_raw(&pm, &qm, &p_post, &q_post)?
            .clamp(-1.0, 1.0)
            .acos()
    };
    Ok(RelativisticCollision {
        p: pm,
        q: qm,
        omega,
        a,
        p_post,
        q_post,
        theta,
        alpha: (pm.p0 * qm.p0) / (p_post.p0 * q_post.p0),
    })
}

/// `k` without validation. `sigma` is evaluated lazily from the outgoing pair.
#[inline]
pub fn kernel_k_unchecked(
    p: Vec3,
    p0: f64,
    q: Vec3,
    q0: f64,
    omega: Vec3,
    spec: &KernelSpec,
) -> f64 {
    let (num_dir, denom) = offset_parts(p, p0, q, q0, omega);
    if num_dir == 0.0 {
        return 0.0;
    }
    let e = p0 + q0;
    let s = e * e - (p + q).norm_sqr();
    let sigma = match spec {
        KernelSpec::RelativisticConstantSigma { sigma0 } => *sigma0,
        KernelSpec::RelativisticMaxwellian { angular } => {
            let pm = FourMomentum { p, p0 };
            let qm = FourMomentum { p: q, p0: q0 };
            let g = 0.5 * (-minkowski_diff(&pm, &qm, &pm, &qm)).max(0.0).sqrt();
            if g == 0.0 {
                return 0.0;
            }
            let a = 2.0 * e * p0 * q0 * num_dir / denom;
            let pp = FourMomentum::new(p + omega * a);
            let qp = FourMomentum::new(q - omega * a);
            let theta = (1.0 - 2.0 * minkowski_diff(&pm, &qm, &pp, &qp) / minkowski_diff(&pm, &qm, &pm, &qm))
                .clamp(-1.0, 1.0)
                .acos();
            (1.0 + g * g).sqrt() / g * angular.eval(theta)
        }
        KernelSpec::ClassicalHardSphere => 0.0,
    };
    4.0 * s * sigma * e * e * num_dir.abs() / (denom * denom)
}

pub fn kernel_k(p: Vec3, q: Vec3, omega: Vec3, spec: &KernelSpec) -> Result<f64> {
    check_unit(omega)?;
    spec.require(Regime::Relativistic)?;
    if p == q {
        return Ok(0.0);
    }
    let (p0, q0) = (energy(p), energy(q));
    Ok(kernel_k_unchecked(p, p0, q, q0, omega, spec))
}

/// Ratio of pre- to post-collision energy products for one direction.
pub fn excentricity(p: Vec3, q: Vec3, omega: Vec3) -> Result<f64> {
    Ok(post_collision_rel(p, q, omega)?.alpha)
}

/// Outgoing pairs for every node direction of a sphere rule of order `m`.
pub fn ellipsoid_points(p: Vec3, q: Vec3, m: usize) -> Result<Vec<(Vec3, Vec3)>> {
    let sq = SphereQuadrature::new(m)?;
    let (p0, q0) = (energy(p), energy(q));
    Ok(sq
        .nodes()
        .iter()
        .map(|node| collide_rel(p, p0, q, q0, node.dir))
        .collect())
}

/// Result of fitting `x^T A x + b . x = 1` to a centered point cloud.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadricFit {
    pub centroid: Vec3,
    /// Eigenvalues of `A`, ascending.
    pub eigenvalues: [f64; 3],
    /// Root-mean-square residual of the fitted equation.
    pub rms_residual: f64,
}

impl QuadricFit {
    pub fn is_ellipsoid(&self) -> bool {
        self.eigenvalues.iter().all(|&l| l > 0.0)
    }

    /// Relative spread of the eigenvalues; zero for a sphere.
    pub fn anisotropy(&self) -> f64 {
        (self.eigenvalues[2] - self.eigenvalues[0]) / self.eigenvalues[2].abs()
    }
}

/// Least-squares quadric through a point cloud, after subtracting its centroid.
///
/// Returns `None` when the cloud is degenerate (fewer than nine points or
/// no spatial extent).
pub fn fit_quadric(points: &[Vec3]) -> Option<QuadricFit> {
    if points.len() < 9 {
        return None;
    }
    let centroid = points.iter().fold(Vec3::ZERO, |acc, &p| acc + p) / points.len() as f64;
    let scale = points
        .iter()
        .map(|&p| (p - centroid).norm())
        .fold(0.0, f64::max);
    if !(scale > 1e-12) {
        return None;
    }
    let rows: Vec<[f64; 9]> = points
        .iter()
        .map(|&p| {
            let x = (p - centroid) / scale;
            [
                x.x * x.x,
                x.y * x.y,
                x.z * x.z,
                2.0 * x.x * x.y,
                2.0 * x.x * x.z,
                2.0 * x.y * x.z,
                x.x,
                x.y,
                x.z,
            ]
        })
        .collect();
    let design = DMatrix::from_fn(rows.len(), 9, |i, j| rows[i][j]);
    let rhs = DVector::from_element(rows.len(), 1.0);
    let svd = design.clone().svd(true, true);
    let coef = svd.solve(&rhs, 1e-12).ok()?;
    let resid = &design * &coef - &rhs;
    let rms = (resid.norm_squared() / rows.len() as f64).sqrt();
    let a = Matrix3::new(
        coef[0], coef[3], coef[4], //
        coef[3], coef[1], coef[5], //
        coef[4], coef[5], coef[2],
    ) / (scale * scale);
    let eig = SymmetricEigen::new(a);
    let mut ev = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Some(QuadricFit {
        centroid,
        eigenvalues: ev,
        rms_residual: rms,
    })
}

/// Boost along the x axis with rapidity `chi`.
pub fn boost_x(m: &FourMomentum, chi: f64) -> FourMomentum {
    let (sh, ch) = (chi.sinh(), chi.cosh());
    let p = Vec3::new(ch * m.p.x - sh * m.p0, m.p.y, m.p.z);
    FourMomentum {
        p,
        p0: ch * m.p0 - sh * m.p.x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AngularTable;

    fn v3(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn energies() {
        assert_eq!(energy(Vec3::ZERO), 1.0);
        assert!((energy(v3(0., 0., 3f64.sqrt())) - 2.0).abs() < 1e-15);
        assert_eq!(energy(v3(3., 0., 4.)), 26f64.sqrt());
        let m = FourMomentum::new(v3(0.3, -2.0, 1.5));
        assert!((m.minkowski(&m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invariants_examples() {
        let r = invariants_sg(Vec3::ZERO, Vec3::ZERO).unwrap();
        assert_eq!((r.s, r.g), (4.0, 0.0));
        let p = v3(0.4, 1.1, -2.0);
        let r = invariants_sg(p, p).unwrap();
        assert!((r.s - 4.0).abs() < 1e-12 && r.g == 0.0);
        let r = invariants_sg(v3(1., 0., 0.), v3(-1., 0., 0.)).unwrap();
        assert!((r.s - 8.0).abs() < 1e-12);
        assert!((r.g - 1.0).abs() < 1e-12);
        assert!((r.s - 4.0 * (1.0 + r.g * r.g)).abs() < 1e-10);
    }

    #[test]
    fn scattering_angle_conventions() {
        let p = FourMomentum::new(v3(0.5, 0.2, 0.));
        let q = FourMomentum::new(v3(-0.3, 0.1, 0.4));
        // identity collision: cos = 1 - 2 = -1
        assert!((cos_theta_raw(&p, &q, &p, &q).unwrap() + 1.0).abs() < 1e-12);
        assert!((scattering_angle(&p, &q, &p, &q).unwrap() - PI).abs() < 1e-6);
        // exchange: unclamped value 3, clamped to theta = 0
        assert!((cos_theta_raw(&p, &q, &q, &p).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(scattering_angle(&p, &q, &q, &p).unwrap(), 0.0);
        assert!(matches!(
            cos_theta_raw(&p, &p, &p, &p),
            Err(Error::DegenerateCollision(_))
        ));
        let c = post_collision_rel(p.spatial(), q.spatial(), v3(0., 0.6, 0.8)).unwrap();
        let th = scattering_angle(&p, &q, &c.p_post, &c.q_post).unwrap();
        assert!(th.is_finite() && (0.0..=PI).contains(&th));
        // broken conservation is refused
        assert!(scattering_angle(&p, &q, &p, &p).is_err());
    }

    #[test]
    fn kernel_b_values() {
        let cs = KernelSpec::constant_sigma(1.0).unwrap();
        assert_eq!(kernel_b(0.0, 0.3, &cs).unwrap(), 0.0);
        assert!((kernel_b(1.0, 0.3, &cs).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let mx = KernelSpec::maxwellian(AngularTable::constant(1.0).unwrap());
        assert!((kernel_b(0.0, 1.0, &mx).unwrap() - 1.0).abs() < 1e-15);
        // agrees with the uncancelled product at small g
        let g: f64 = 1e-4;
        let s = 4.0 * (1.0 + g * g);
        let direct = g * s.sqrt() / 2.0 * ((1.0 + g * g).sqrt() / g);
        assert!((kernel_b(g, 1.0, &mx).unwrap() - direct).abs() < 1e-12);
        assert!(matches!(
            kernel_b(1.0, 0.0, &KernelSpec::ClassicalHardSphere),
            Err(Error::WrongRegime { .. })
        ));
    }

    #[test]
    fn offset_examples() {
        let p = v3(0.2, -0.4, 1.0);
        assert_eq!(offset_a(p, p, Vec3::e_x()).unwrap(), 0.0);
        // omega orthogonal to q^ - p^
        let (p, q) = (v3(1., 0., 0.), v3(-1., 0., 0.));
        assert_eq!(offset_a(p, q, Vec3::e_y()).unwrap(), 0.0);
        let (p, q) = (v3(1., 0., 0.), Vec3::ZERO);
        let e = 1.0 + 2f64.sqrt();
        let a = offset_a(p, q, Vec3::e_x()).unwrap();
        assert!((a - (-2.0 * e / (e * e - 1.0))).abs() < 1e-14);
        // this is the full exchange
        assert!((a + 1.0).abs() < 1e-14);
        let c = post_collision_rel(p, q, Vec3::e_x()).unwrap();
        assert!((c.p_post.spatial() + c.q_post.spatial()).max_abs_diff(p + q) < 1e-12);
        assert!((c.p_post.energy() + c.q_post.energy() - energy(p) - energy(q)).abs() < 1e-12);
    }

    #[test]
    fn post_collision_examples() {
        let p = v3(0.3, 0.1, -0.7);
        let c = post_collision_rel(p, p, v3(0., 0.6, 0.8)).unwrap();
        assert_eq!(c.p_post.spatial(), p);
        assert_eq!(c.q_post.spatial(), p);
        assert_eq!(c.alpha, 1.0);
        let (p, q) = (v3(1., 0., 0.), v3(-1., 0., 0.));
        let c = post_collision_rel(p, q, Vec3::e_z()).unwrap();
        assert_eq!(c.p_post.spatial(), p);
        let (p, q) = (v3(0.5, 0., 0.), v3(-0.5, 0., 0.));
        let c = post_collision_rel(p, q, Vec3::e_y()).unwrap();
        assert!((c.p_post.spatial() + c.q_post.spatial()).norm() < 1e-15);
        assert!((c.p_post.energy() - c.q_post.energy()).abs() < 1e-15);
        assert!(post_collision_rel(p, q, v3(1., 1., 0.)).is_err());
    }

    #[test]
    fn kernel_k_values() {
        let cs = KernelSpec::constant_sigma(1.0).unwrap();
        let p = v3(0.1, 0.2, 0.3);
        assert_eq!(kernel_k(p, p, Vec3::e_x(), &cs).unwrap(), 0.0);
        assert_eq!(kernel_k(v3(1., 0., 0.), v3(-1., 0., 0.), Vec3::e_y(), &cs).unwrap(), 0.0);
        let k = kernel_k(v3(1., 0., 0.), Vec3::ZERO, Vec3::e_x(), &cs).unwrap();
        // s = 2 + 2 sqrt 2, e^2 = 3 + 2 sqrt 2, |w.(q^-p^)| = 1/sqrt 2, denominator (e^2 - 1)^2
        let r2 = 2f64.sqrt();
        let e2 = 3.0 + 2.0 * r2;
        let expected = 4.0 * (2.0 + 2.0 * r2) * e2 * (1.0 / r2) / ((e2 - 1.0) * (e2 - 1.0));
        assert!((k - expected).abs() < 1e-13 * expected);
        assert!(kernel_k(p, Vec3::ZERO, Vec3::e_x(), &KernelSpec::ClassicalHardSphere).is_err());
    }

    #[test]
    fn excentricity_bounds() {
        assert_eq!(excentricity(Vec3::ZERO, Vec3::ZERO, Vec3::e_z()).unwrap(), 1.0);
        let (p, q) = (v3(1., 0., 0.), v3(-1., 0., 0.));
        assert_eq!(excentricity(p, q, Vec3::e_y()).unwrap(), 1.0);
        let c = (1.0 + p.norm_sqr()) * (1.0 + q.norm_sqr());
        let sq = SphereQuadrature::new(12).unwrap();
        for node in sq.nodes() {
            let a = excentricity(p, q, node.dir).unwrap();
            assert!(a >= 1.0 / c && a <= c, "{a}");
        }
    }

    #[test]
    fn ellipsoid_clouds() {
        let p = v3(0.3, 0.3, 0.3);
        let pts = ellipsoid_points(p, p, 4).unwrap();
        assert!(pts.iter().all(|&(a, b)| a == p && b == p));
        assert!(fit_quadric(&pts.iter().map(|x| x.0).collect::<Vec<_>>()).is_none());

        let (p, q) = (v3(1., 0., 0.), v3(-1., 0., 0.));
        let sq = SphereQuadrature::new(16).unwrap();
        let pts = ellipsoid_points(p, q, 16).unwrap();
        // reflecting x and swapping the pair maps the configuration onto itself
        for (node, &(pp, qp)) in sq.nodes().iter().zip(&pts) {
            let w = node.dir;
            let (pr, qr) = collide_rel(
                v3(-q.x, q.y, q.z),
                energy(q),
                v3(-p.x, p.y, p.z),
                energy(p),
                v3(-w.x, w.y, w.z),
            );
            assert!(pr.max_abs_diff(v3(-qp.x, qp.y, qp.z)) < 1e-12);
            assert!(qr.max_abs_diff(v3(-pp.x, pp.y, pp.z)) < 1e-12);
        }

        let pts = ellipsoid_points(v3(2., 0., 0.), Vec3::ZERO, 16).unwrap();
        let fit = fit_quadric(&pts.iter().map(|x| x.0).collect::<Vec<_>>()).unwrap();
        assert!(fit.is_ellipsoid(), "{fit:?}");
        assert!(fit.anisotropy() > 1e-3, "{fit:?}");
        assert!(fit.rms_residual < 1e-8, "{fit:?}");
    }

    #[test]
    fn boost_preserves_mass_shell() {
        let m = FourMomentum::new(v3(0.7, -0.2, 1.3));
        let b = boost_x(&m, 0.5);
        assert!((b.minkowski(&b) - 1.0).abs() < 1e-12);
        assert!((b.energy() - energy(b.spatial())).abs() < 1e-12);
        let back = boost_x(&b, -0.5);
        assert!(back.spatial().max_abs_diff(m.spatial()) < 1e-12);
    }
}
