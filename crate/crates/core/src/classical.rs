//! Elastic binary collisions of equal-mass particles.
//!
//! For collision parameter `n` on the unit sphere the outgoing pair is
//!
//! ```text
//! v' = v - n (n . (v - w)),    w' = w + n (n . (v - w))
//! ```
//!
//! which conserves momentum and kinetic energy, is an involution for fixed
//! `n`, and commutes with Galilean shifts. The outgoing velocities sit at
//! opposite ends of a diameter of the sphere centered at `(v + w) / 2` with
//! radius `|v - w| / 2`.
//!
//! The hemisphere `S^2_+` is taken to be `{n : n . (v - w) >= 0}`, which is
//! where the hard-sphere kernel is nonnegative.

use crate::error::{Error, Result};
use crate::model::{SphereQuadrature, Vec3};

const UNIT_TOL: f64 = 1e-12;

/// A resolved classical collision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalCollision {
    pub v: Vec3,
    pub w: Vec3,
    pub n: Vec3,
    pub v_post: Vec3,
    pub w_post: Vec3,
}

impl ClassicalCollision {
    pub fn new(v: Vec3, w: Vec3, n: Vec3) -> Result<Self> {
        check_unit(n)?;
        let (v_post, w_post) = collide(v, w, n);
        Ok(ClassicalCollision {
            v,
            w,
            n,
            v_post,
            w_post,
        })
    }

    pub fn center(&self) -> Vec3 {
        (self.v + self.w) * 0.5
    }

    pub fn sphere_radius(&self) -> f64 {
        0.5 * (self.v - self.w).norm()
    }
}

fn check_unit(n: Vec3) -> Result<()> {
    if !n.is_finite() || (n.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::Argument(format!(
            "collision parameter must be a unit vector, |n| = {}",
            n.norm()
        )));
    }
    Ok(())
}

/// Unchecked post-collision map. `n` is assumed to be a unit vector.
#[inline]
pub fn collide(v: Vec3, w: Vec3, n: Vec3) -> (Vec3, Vec3) {
    let t = n.dot(v - w);
    let dv = n * t;
    (v - dv, w + dv)
}

pub fn post_collision(v: Vec3, w: Vec3, n: Vec3) -> Result<(Vec3, Vec3)> {
    check_unit(n)?;
    Ok(collide(v, w, n))
}

/// Hard-sphere kernel `max(0, n . (v - w))`.
pub fn hard_sphere_b(v: Vec3, w: Vec3, n: Vec3) -> Result<f64> {
    check_unit(n)?;
    Ok(n.dot(v - w).max(0.0))
}

/// Whether `(w, n)` belongs to the admissible set for `v`: `|w| <= R`, both
/// outgoing velocities in the closed ball of radius `R`, and `n` in the
/// hemisphere.
pub fn in_admissible_set(v: Vec3, w: Vec3, n: Vec3, r: f64) -> bool {
    if n.dot(v - w) < 0.0 {
        return false;
    }
    let r2 = r * r;
    if w.norm_sqr() > r2 {
        return false;
    }
    let (vp, wp) = collide(v, w, n);
    vp.norm_sqr() <= r2 && wp.norm_sqr() <= r2
}

/// Outgoing pairs for every node direction of a sphere rule of order `m`.
pub fn collision_sphere_points(v: Vec3, w: Vec3, m: usize) -> Result<Vec<(Vec3, Vec3)>> {
    let sq = SphereQuadrature::new(m)?;
    Ok(sq.nodes().iter().map(|node| collide(v, w, node.dir)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v3(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn head_on_exchange() {
        let (vp, wp) = post_collision(v3(1., 0., 0.), v3(-1., 0., 0.), Vec3::e_x()).unwrap();
        assert_eq!(vp, v3(-1., 0., 0.));
        assert_eq!(wp, v3(1., 0., 0.));
    }

    #[test]
    fn equal_velocities_are_fixed() {
        let v = v3(0.3, -0.2, 0.5);
        let n = v3(1., 2., 2.) / 3.0;
        let (vp, wp) = post_collision(v, v, n).unwrap();
        assert_eq!(vp, v);
        assert_eq!(wp, v);
    }

    #[test]
    fn conservation_example() {
        let (v, w) = (v3(1., 2., 3.), v3(0., -1., 1.));
        let (vp, wp) = post_collision(v, w, Vec3::e_z()).unwrap();
        assert!((vp + wp).max_abs_diff(v + w) < 1e-12);
        let e0 = v.norm_sqr() + w.norm_sqr();
        assert!((vp.norm_sqr() + wp.norm_sqr() - e0).abs() < 1e-12 * e0);
        assert_eq!(vp, v3(1., 2., 1.));
        assert_eq!(wp, v3(0., -1., 3.));
    }

    #[test]
    fn rejects_non_unit_parameter() {
        assert!(post_collision(Vec3::ZERO, Vec3::ZERO, v3(1., 1., 0.)).is_err());
        assert!(hard_sphere_b(Vec3::ZERO, Vec3::ZERO, v3(0., 0., 0.)).is_err());
    }

    #[test]
    fn hard_sphere_kernel() {
        let b = |v, w, n| hard_sphere_b(v, w, n).unwrap();
        assert_eq!(b(Vec3::e_x(), Vec3::ZERO, Vec3::e_x()), 1.0);
        assert_eq!(b(Vec3::e_x(), Vec3::ZERO, -Vec3::e_x()), 0.0);
        assert_eq!(b(v3(1., 1., 0.), Vec3::ZERO, Vec3::e_x()), 1.0);
    }

    #[test]
    fn admissible_set_examples() {
        assert!(in_admissible_set(Vec3::ZERO, Vec3::ZERO, Vec3::e_y(), 1.0));
        assert!(in_admissible_set(v3(0.9, 0., 0.), v3(-0.9, 0., 0.), Vec3::e_x(), 1.0));
        assert!(!in_admissible_set(v3(1.2, 0., 0.), Vec3::ZERO, Vec3::e_x(), 1.0));
        // wrong hemisphere
        assert!(!in_admissible_set(v3(0.5, 0., 0.), Vec3::ZERO, -Vec3::e_x(), 1.0));
    }

    #[test]
    fn sphere_points() {
        let v = v3(0.4, -0.1, 0.2);
        for (vp, wp) in collision_sphere_points(v, v, 4).unwrap() {
            assert_eq!((vp, wp), (v, v));
        }
        let pts = collision_sphere_points(v3(1., 0., 0.), v3(-1., 0., 0.), 8).unwrap();
        assert_eq!(pts.len(), 64);
        for (vp, wp) in pts {
            assert!((vp.norm() - 1.0).abs() < 1e-12);
            assert!(((vp + wp) * 0.5).norm() < 1e-12);
        }
        let (v, w) = (v3(0.7, 2.0, -1.0), v3(-0.3, 0.1, 0.4));
        let c = (v + w) * 0.5;
        let r = 0.5 * (v - w).norm();
        for (vp, wp) in collision_sphere_points(v, w, 6).unwrap() {
            assert!(((vp + wp) * 0.5).max_abs_diff(c) < 1e-12);
            assert!(((vp - c).norm() - r).abs() < 1e-12);
        }
    }

    #[test]
    fn collision_struct() {
        let c = ClassicalCollision::new(v3(1., 0., 0.), v3(-1., 0., 0.), Vec3::e_y()).unwrap();
        assert_eq!(c.v_post, c.v);
        assert_eq!(c.sphere_radius(), 1.0);
        assert_eq!(c.center(), Vec3::ZERO);
    }
}
