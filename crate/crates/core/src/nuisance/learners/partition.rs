use std::collections::HashMap;

use super::{Predictor, Rows};
use crate::nuisance::config::PartitionCuts;

/// Partitioning regression estimate: each covariate is cut into bins and a
/// query is answered with the mean target of its cell, shrunk towards the
/// global mean by `prior` pseudo-observations.
#[derive(Debug, Clone)]
pub struct CellMeans {
    cuts: Vec<Vec<f64>>,
    cells: HashMap<Vec<u8>, (f64, f64)>,
    global: f64,
    prior: f64,
}

impl CellMeans {
    pub fn fit(rows: Rows<'_>, targets: &[f64], bins: usize, rule: PartitionCuts, prior: f64) -> Self {
        let n = rows.len();
        let cuts: Vec<Vec<f64>> = (0..rows.dim())
            .map(|j| match rule {
                PartitionCuts::Zero => vec![0.0],
                PartitionCuts::Quantile => {
                    let mut col: Vec<f64> = (0..n).map(|i| rows.row(i)[j]).collect();
                    col.sort_by(f64::total_cmp);
                    let mut c: Vec<f64> = (1..bins)
                        .map(|b| {
                            let pos = b as f64 * (n - 1) as f64 / bins as f64;
                            let lo = pos.floor() as usize;
                            let frac = pos - lo as f64;
                            let hi = (lo + 1).min(n - 1);
                            col[lo] + frac * (col[hi] - col[lo])
                        })
                        .collect();
                    c.dedup();
                    c
                }
            })
            .collect();
        let global = crate::stats::mean(targets);
        let mut cells: HashMap<Vec<u8>, (f64, f64)> = HashMap::new();
        let mut model = Self { cuts, cells: HashMap::new(), global, prior };
        for (i, &t) in targets.iter().enumerate() {
            let entry = cells.entry(model.cell(rows.row(i))).or_insert((0.0, 0.0));
            entry.0 += t;
            entry.1 += 1.0;
        }
        model.cells = cells;
        model
    }

    fn cell(&self, x: &[f64]) -> Vec<u8> {
        self.cuts
            .iter()
            .zip(x)
            .map(|(c, v)| c.partition_point(|cut| cut < v) as u8)
            .collect()
    }

    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }
}

impl Predictor for CellMeans {
    fn predict(&self, x: &[f64]) -> f64 {
        let (sum, count) = self.cells.get(&self.cell(x)).copied().unwrap_or((0.0, 0.0));
        (sum + self.prior * self.global) / (count + self.prior)
    }
}
