use std::f64::consts::PI;

use super::Vec3;
use crate::error::{Error, Result};

/// A quadrature node on the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereNode {
    pub dir: Vec3,
    pub weight: f64,
}

/// Product rule on the unit sphere: Gauss-Legendre in `cos(theta)` times a
/// uniform midpoint rule in the azimuth, `m` points each. For even `m` the
/// node set is exactly symmetric under `n -> -n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereQuadrature {
    order: usize,
    nodes: Vec<SphereNode>,
}

impl SphereQuadrature {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Config(format!("sphere order must be at least 2, got {m}")));
        }
        let (xs, ws) = gauss_legendre(m);
        let dphi = 2.0 * PI / m as f64;
        let mut nodes = Vec::with_capacity(m * m);
        for (&ct, &wt) in xs.iter().zip(&ws) {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for j in 0..m {
                let phi = dphi * (j as f64 + 0.5);
                let (sp, cp) = phi.sin_cos();
                nodes.push(SphereNode {
                    dir: Vec3::new(st * cp, st * sp, ct),
                    weight: wt * dphi,
                });
            }
        }
        if m.is_multiple_of(2) {
            // make the lower hemisphere the exact mirror image of the upper one
            for i in 0..m / 2 {
                for j in 0..m {
                    let twin = nodes[(m - 1 - i) * m + (j + m / 2) % m];
                    nodes[i * m + j] = SphereNode {
                        dir: -twin.dir,
                        weight: twin.weight,
                    };
                }
            }
        }
        Ok(SphereQuadrature { order: m, nodes })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[SphereNode] {
        &self.nodes
    }

    /// Nodes with `z > 0` when every node's antipode is also a node with the
    /// same weight (even `m`); `None` otherwise.
    pub fn upper_half(&self) -> Option<&[SphereNode]> {
        let m = self.order;
        m.is_multiple_of(2).then(|| &self.nodes[m / 2 * m..])
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Vec3) -> f64) -> f64 {
        self.nodes.iter().map(|n| n.weight * f(n.dir)).sum()
    }
}

pub fn make_sphere_quadrature(m: usize) -> Result<SphereQuadrature> {
    SphereQuadrature::new(m)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; m];
    let mut ws = vec![0.0; m];
    let half = m.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess, then Newton on P_m.
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        xs[m - 1 - i] = x;
        ws[i] = w;
        ws[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        xs[m / 2] = 0.0;
    }
    (xs, ws)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_moments() {
        for m in [2, 3, 5, 8, 16, 33] {
            let (xs, ws) = gauss_legendre(m);
            for deg in 0..(2 * m) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let q: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((q - exact).abs() < 1e-13, "m={m} deg={deg} q={q}");
            }
            assert!(xs.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn rejects_low_order() {
        assert!(SphereQuadrature::new(1).is_err());
        assert!(SphereQuadrature::new(0).is_err());
    }

    #[test]
    fn constants_and_linear_functions() {
        for m in [2, 4, 8, 13] {
            let sq = SphereQuadrature::new(m).unwrap();
            assert_eq!(sq.len(), m * m);
            assert!(sq.nodes().iter().all(|n| n.weight > 0.0));
            let total: f64 = sq.nodes().iter().map(|n| n.weight).sum();
            assert!((total - 4.0 * PI).abs() < 1e-10);
            let c = Vec3::new(0.3, -1.7, 2.2);
            assert!(sq.integrate(|n| c.dot(n)).abs() < 1e-10);
            assert!(sq.nodes().iter().all(|n| (n.dir.norm() - 1.0).abs() < 1e-14));
        }
    }

    #[test]
    fn second_moment() {
        let sq = SphereQuadrature::new(8).unwrap();
        assert!((sq.integrate(|_| 1.0) - 4.0 * PI).abs() < 1e-12);
        assert!((sq.integrate(|n| n.z * n.z) - 4.0 * PI / 3.0).abs() < 1e-10);
        assert!((sq.integrate(|n| n.x * n.x) - 4.0 * PI / 3.0).abs() < 1e-10);
    }

    #[test]
    fn kinked_integrand_converges() {
        // int max(0, n.u) over the sphere is pi |u|; the kink caps the order.
        let u = Vec3::new(0.0, 0.0, 2.0);
        let exact = PI * u.norm();
        let err = |m| {
            let sq = SphereQuadrature::new(m).unwrap();
            (sq.integrate(|n| n.dot(u).max(0.0)) - exact).abs()
        };
        let (e8, e16, e128) = (err(8), err(16), err(128));
        assert!(e128 < 1e-3, "{e128}");
        assert!(e16 < e8 && e128 < e16);
        // m = 8 against the m = 128 reference: 7e-2, not better
        assert!(e8 < 0.08, "{e8}");
    }

    #[test]
    fn deterministic() {
        assert_eq!(SphereQuadrature::new(12).unwrap(), SphereQuadrature::new(12).unwrap());
    }
}
