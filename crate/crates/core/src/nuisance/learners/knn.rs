use super::{Predictor, Rows};

/// Mean target of the `k` nearest training rows (Euclidean distance,
/// ties broken by training order).
#[derive(Debug, Clone)]
pub struct NearestMean {
    x: Vec<f64>,
    targets: Vec<f64>,
    dim: usize,
    k: usize,
}

impl NearestMean {
    pub fn fit(rows: Rows<'_>, targets: &[f64], k: usize) -> Self {
        let mut x = Vec::with_capacity(rows.len() * rows.dim());
        for i in 0..rows.len() {
            x.extend_from_slice(rows.row(i));
        }
        Self { x, targets: targets.to_vec(), dim: rows.dim(), k: k.clamp(1, rows.len()) }
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl Predictor for NearestMean {
    fn predict(&self, query: &[f64]) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .x
            .chunks_exact(self.dim)
            .enumerate()
            .map(|(i, row)| (row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let k = self.k;
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
        }
        let mut nearest: Vec<usize> = dist[..k].iter().map(|&(_, i)| i).collect();
        nearest.sort_unstable();
        nearest.iter().map(|&i| self.targets[i]).sum::<f64>() / k as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averages_nearest_targets() {
        let xs = [0.0, 1.0, 2.0, 10.0, 11.0];
        let ys = [0.0, 0.0, 3.0, 9.0, 9.0];
        let m = NearestMean::fit(Rows::new(&xs, 1), &ys, 3);
        assert!((m.predict(&[0.9]) - 1.0).abs() < 1e-12);
        assert!((m.predict(&[10.4]) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn k_is_capped_by_training_size() {
        let m = NearestMean::fit(Rows::new(&[0.0, 1.0], 1), &[1.0, 3.0], 10);
        assert_eq!(m.k(), 2);
        assert_eq!(m.predict(&[5.0]), 2.0);
    }
}
