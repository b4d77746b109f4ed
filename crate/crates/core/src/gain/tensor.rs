use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use super::{evaluate_by_orbits, GainOperator, PartnerSet};
use crate::error::{Error, Result};
use crate::model::{DistributionField, VelocityGrid};
use crate::symmetry::field_group;

/// `Q+(f, f)` at every node of a fixed grid as a quadratic form in the node
/// values.
///
/// Interpolation is linear in the node values, so the gain at a node is
/// `sum_{i <= j} c_ij f_i f_j`. Rows are assembled on first use and reused
/// for every later field, which pays off when the same grid is evaluated many
/// times (time stepping).
pub struct GainTensor {
    op: GainOperator,
    grid: Arc<VelocityGrid>,
    partners: PartnerSet,
    rows: Vec<OnceLock<Row>>,
}

struct Row {
    pairs: Vec<(u32, u32)>,
    coeffs: Vec<f64>,
}

impl Row {
    fn eval(&self, f: &[f64]) -> f64 {
        self.pairs
            .iter()
            .zip(&self.coeffs)
            .map(|(&(i, j), c)| c * f[i as usize] * f[j as usize])
            .sum()
    }
}

impl GainTensor {
    pub fn new(op: GainOperator, grid: Arc<VelocityGrid>) -> Self {
        let partners = op.partners(&grid);
        let rows = (0..grid.len()).map(|_| OnceLock::new()).collect();
        GainTensor {
            op,
            grid,
            partners,
            rows,
        }
    }

    pub fn operator(&self) -> &GainOperator {
        &self.op
    }

    pub fn grid(&self) -> &Arc<VelocityGrid> {
        &self.grid
    }

    /// Number of rows assembled so far.
    pub fn assembled_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.get().is_some()).count()
    }

    fn row(&self, node: usize) -> &Row {
        self.rows[node].get_or_init(|| self.build_row(node))
    }

    fn build_row(&self, node: usize) -> Row {
        let v = self.grid.nodes()[node].center;
        let set = &self.partners;
        let mut acc: HashMap<(u32, u32), f64> = HashMap::new();
        if let Some(bound) = self.op.partner_bound(v, set.support) {
            let v_aux = self.op.point_aux(v);
            for (w, &w_aux) in set.points.iter().zip(&set.aux) {
                if w_aux > bound {
                    break;
                }
                self.op
                    .for_each_outgoing(v, v_aux, *w, w_aux, set.support, |vp, wp, wt| {
                        let (ia, wa, na) = self.grid.stencil(vp);
                        if na == 0 {
                            return;
                        }
                        let (ib, wb, nb) = self.grid.stencil(wp);
                        for a in 0..na {
                            for b in 0..nb {
                                let key = if ia[a] <= ib[b] { (ia[a], ib[b]) } else { (ib[b], ia[a]) };
                                *acc.entry(key).or_insert(0.0) += wt * wa[a] * wb[b];
                            }
                        }
                    });
            }
        }
        let mut entries: Vec<((u32, u32), f64)> = acc.into_iter().filter(|e| e.1 != 0.0).collect();
        entries.sort_unstable_by_key(|e| e.0);
        let cell = set.cell_volume;
        Row {
            pairs: entries.iter().map(|e| e.0).collect(),
            coeffs: entries.iter().map(|e| e.1 * cell).collect(),
        }
    }

    /// Gain at one node.
    pub fn apply_node(&self, f: &DistributionField, node: usize) -> Result<f64> {
        self.check(f)?;
        if node >= self.grid.len() {
            return Err(Error::Argument(format!("node {node} out of range")));
        }
        Ok(self.row(node).eval(f.values()))
    }

    /// Gain at every node; rows are assembled for one node per symmetry orbit.
    pub fn apply_all(&self, f: &DistributionField) -> Result<Vec<f64>> {
        self.check(f)?;
        let group = field_group(f, self.op.sphere_group());
        let pts: Vec<[i32; 3]> = self.grid.nodes().iter().map(|n| n.odd).collect();
        Ok(evaluate_by_orbits(&pts, &group, |i| self.row(i).eval(f.values())))
    }

    fn check(&self, f: &DistributionField) -> Result<()> {
        if **f.grid() != *self.grid {
            return Err(Error::Argument("field is not on the tensor's grid".into()));
        }
        Ok(())
    }
}
