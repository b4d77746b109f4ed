//! Signed permutations of the coordinate axes (the 48-element symmetry
//! group of the cube) and the orbits they induce on lattice nodes.

use crate::model::{DistributionField, SphereQuadrature, Vec3, VelocityGrid};

/// `x -> (s0 x[p0], s1 x[p1], s2 x[p2])`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignedPermutation {
    pub perm: [usize; 3],
    pub signs: [i32; 3],
}

impl SignedPermutation {
    pub const IDENTITY: SignedPermutation = SignedPermutation {
        perm: [0, 1, 2],
        signs: [1, 1, 1],
    };

    pub fn apply(&self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.signs[0] as f64 * v[self.perm[0]],
            self.signs[1] as f64 * v[self.perm[1]],
            self.signs[2] as f64 * v[self.perm[2]],
        )
    }

    pub fn apply_odd(&self, c: [i32; 3]) -> [i32; 3] {
        [
            self.signs[0] * c[self.perm[0]],
            self.signs[1] * c[self.perm[1]],
            self.signs[2] * c[self.perm[2]],
        ]
    }
}

/// All 48 signed permutations.
pub fn cubic_group() -> Vec<SignedPermutation> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(48);
    for perm in PERMS {
        for bits in 0..8 {
            let s = |b: i32| if bits & (1 << b) != 0 { -1 } else { 1 };
            out.push(SignedPermutation {
                perm,
                signs: [s(0), s(1), s(2)],
            });
        }
    }
    out
}

/// Elements of the cubic group that map the node set of `sq` onto itself
/// with matching weights.
pub fn quadrature_group(sq: &SphereQuadrature) -> Vec<SignedPermutation> {
    let nodes = sq.nodes();
    cubic_group()
        .into_iter()
        .filter(|g| {
            nodes.iter().all(|a| {
                let d = g.apply(a.dir);
                nodes.iter().any(|b| {
                    b.dir.max_abs_diff(d) < 1e-13 && (b.weight - a.weight).abs() <= 1e-15 * a.weight
                })
            })
        })
        .collect()
}

/// Elements of `group` under which the node values of `f` are exactly invariant.
pub fn field_group(f: &DistributionField, group: &[SignedPermutation]) -> Vec<SignedPermutation> {
    let grid = f.grid();
    let vals = f.values();
    group
        .iter()
        .copied()
        .filter(|g| {
            grid.nodes().iter().zip(vals).all(|(node, &v)| {
                grid.node_at_odd(g.apply_odd(node.odd))
                    .is_some_and(|id| vals[id] == v)
            })
        })
        .collect()
}

/// Partition of lattice points (odd coordinates) into orbits of `group`.
/// Each orbit lists point positions ascending; orbits are ordered by their
/// first element. Points whose images leave the list are kept as singletons.
pub fn orbits(points: &[[i32; 3]], group: &[SignedPermutation]) -> Vec<Vec<usize>> {
    use std::collections::HashMap;
    let index: HashMap<[i32; 3], usize> = points.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut seen = vec![false; points.len()];
    let mut out = Vec::new();
    for (i, &p) in points.iter().enumerate() {
        if seen[i] {
            continue;
        }
        let mut orbit = vec![i];
        seen[i] = true;
        for g in group {
            if let Some(&j) = index.get(&g.apply_odd(p)) {
                if !seen[j] {
                    seen[j] = true;
                    orbit.push(j);
                }
            }
        }
        orbit.sort_unstable();
        out.push(orbit);
    }
    out
}

/// Orbits of the grid nodes of `grid`.
pub fn grid_orbits(grid: &VelocityGrid, group: &[SignedPermutation]) -> Vec<Vec<usize>> {
    let pts: Vec<[i32; 3]> = grid.nodes().iter().map(|n| n.odd).collect();
    orbits(&pts, group)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn group_has_48_distinct_elements() {
        let g = cubic_group();
        assert_eq!(g.len(), 48);
        for (i, a) in g.iter().enumerate() {
            for b in &g[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert!(g.contains(&SignedPermutation::IDENTITY));
    }

    #[test]
    fn product_rule_keeps_the_square_symmetries() {
        // m divisible by four: 90 degree turns about z, mirrors, z flip
        assert_eq!(quadrature_group(&SphereQuadrature::new(8).unwrap()).len(), 16);
        assert_eq!(quadrature_group(&SphereQuadrature::new(16).unwrap()).len(), 16);
        let g6 = quadrature_group(&SphereQuadrature::new(6).unwrap());
        assert!(g6.len() < 16 && g6.contains(&SignedPermutation::IDENTITY));
    }

    #[test]
    fn orbit_sizes_partition_the_grid() {
        let grid = Arc::new(VelocityGrid::new(1.0, 8).unwrap());
        let orb = grid_orbits(&grid, &cubic_group());
        assert_eq!(orb.iter().map(Vec::len).sum::<usize>(), grid.len());
        assert!(orb.iter().all(|o| 48 % o.len() == 0));
        let f = DistributionField::indicator(grid.clone(), 1.0, 1.0).unwrap();
        assert_eq!(field_group(&f, &cubic_group()).len(), 48);
        let lop = DistributionField::from_fn(grid, |v| 1.0 + v.x.max(0.0)).unwrap();
        assert_eq!(field_group(&lop, &cubic_group()).len(), 8);
    }
}
