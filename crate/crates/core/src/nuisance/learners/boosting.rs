use super::{Predictor, Rows, Task};
use crate::stats::sigmoid;

/// L2 penalty on leaf values.
const LEAF_L2: f64 = 1.0;

#[derive(Debug, Clone, Copy)]
struct Stump {
    feature: usize,
    threshold: f64,
    left: f64,
    right: f64,
}

/// Gradient boosting with depth-1 trees and Newton leaf values.
#[derive(Debug, Clone)]
pub struct StumpBoost {
    init: f64,
    stumps: Vec<Stump>,
    task: Task,
}

impl StumpBoost {
    pub fn fit(rows: Rows<'_>, targets: &[f64], task: Task, rounds: usize, shrinkage: f64) -> Self {
        let n = rows.len();
        let d = rows.dim();
        let mean = crate::stats::mean(targets);
        let init = match task {
            Task::Classification => {
                let m = mean.clamp(1e-6, 1.0 - 1e-6);
                (m / (1.0 - m)).ln()
            }
            Task::Regression => mean,
        };
        // Sorted row order per feature, computed once.
        let order: Vec<Vec<usize>> = (0..d)
            .map(|j| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| rows.row(a)[j].total_cmp(&rows.row(b)[j]).then(a.cmp(&b)));
                idx
            })
            .collect();

        let mut score = vec![init; n];
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut stumps = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            for i in 0..n {
                match task {
                    Task::Classification => {
                        let p = sigmoid(score[i]);
                        grad[i] = p - targets[i];
                        hess[i] = (p * (1.0 - p)).max(1e-6);
                    }
                    Task::Regression => {
                        grad[i] = score[i] - targets[i];
                        hess[i] = 1.0;
                    }
                }
            }
            let g_total: f64 = grad.iter().sum();
            let h_total: f64 = hess.iter().sum();
            let parent = g_total * g_total / (h_total + LEAF_L2);

            let mut best: Option<(f64, Stump)> = None;
            for (j, idx) in order.iter().enumerate() {
                let (mut gl, mut hl) = (0.0, 0.0);
                for w in 0..n - 1 {
                    let i = idx[w];
                    gl += grad[i];
                    hl += hess[i];
                    let (v, v_next) = (rows.row(i)[j], rows.row(idx[w + 1])[j]);
                    if v == v_next {
                        continue;
                    }
                    let (gr, hr) = (g_total - gl, h_total - hl);
                    let gain = gl * gl / (hl + LEAF_L2) + gr * gr / (hr + LEAF_L2) - parent;
                    if best.as_ref().is_none_or(|(g, _)| gain > *g) {
                        best = Some((
                            gain,
                            Stump {
                                feature: j,
                                threshold: 0.5 * (v + v_next),
                                left: -gl / (hl + LEAF_L2) * shrinkage,
                                right: -gr / (hr + LEAF_L2) * shrinkage,
                            },
                        ));
                    }
                }
            }
            let Some((gain, stump)) = best else { break };
            if gain <= 1e-12 {
                break;
            }
            for (i, s) in score.iter_mut().enumerate() {
                *s += stump.value(rows.row(i));
            }
            stumps.push(stump);
        }
        Self { init, stumps, task }
    }

    pub fn rounds(&self) -> usize {
        self.stumps.len()
    }
}

impl Stump {
    fn value(&self, x: &[f64]) -> f64 {
        if x[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

impl Predictor for StumpBoost {
    fn predict(&self, x: &[f64]) -> f64 {
        let s = self.init + self.stumps.iter().map(|st| st.value(x)).sum::<f64>();
        match self.task {
            Task::Classification => sigmoid(s),
            Task::Regression => s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learns_a_step_function() {
        let xs: Vec<f64> = (0..200).map(|i| i as f64 / 100.0 - 1.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| if x > 0.3 { 2.0 } else { -1.0 }).collect();
        let m = StumpBoost::fit(Rows::new(&xs, 1), &ys, Task::Regression, 200, 0.1);
        assert!((m.predict(&[0.9]) - 2.0).abs() < 0.05);
        assert!((m.predict(&[-0.5]) + 1.0).abs() < 0.05);
    }

    #[test]
    fn classification_stays_in_unit_interval() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let ys: Vec<f64> = (0..100).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let m = StumpBoost::fit(Rows::new(&xs, 1), &ys, Task::Classification, 50, 0.1);
        for x in [-10.0, 0.0, 50.0, 1e6] {
            let p = m.predict(&[x]);
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn stops_when_no_split_exists() {
        let xs = vec![1.0; 10];
        let ys: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let m = StumpBoost::fit(Rows::new(&xs, 1), &ys, Task::Regression, 100, 0.1);
        assert_eq!(m.rounds(), 0);
        assert!((m.predict(&[1.0]) - 4.5).abs() < 1e-12);
    }
}
