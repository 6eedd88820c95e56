//! k-nearest-neighbors with Euclidean distance and deterministic
//! (distance, insertion index) tie ordering.

use crate::error::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 8 }
    }
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    pub n_features: usize,
    pub k: usize,
    train_x: Vec<Vec<f64>>,
    train_y: Vec<bool>,
}

pub fn train(x: &[Vec<f64>], y: &[bool], params: &KnnParams) -> Result<KnnModel, Error> {
    if params.k > x.len() {
        return Err(Error::KTooLarge {
            k: params.k,
            n: x.len(),
        });
    }
    Ok(KnnModel {
        n_features: x[0].len(),
        k: params.k,
        train_x: x.to_vec(),
        train_y: y.to_vec(),
    })
}

impl KnnModel {
    /// Fraction of the k nearest training rows that are positive.
    pub fn scores(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter()
            .map(|q| {
                let idx = self.neighbors(q);
                let pos = idx.iter().filter(|&&i| self.train_y[i]).count();
                pos as f64 / self.k as f64
            })
            .collect()
    }

    /// Label of the single nearest neighbor; used to settle an exact
    /// half-and-half vote.
    pub fn tie_break_label(&self, q: &[f64]) -> bool {
        let nearest = self.neighbors(q)[0];
        self.train_y[nearest]
    }

    fn neighbors(&self, q: &[f64]) -> Vec<usize> {
        let mut order: Vec<(f64, usize)> = self
            .train_x
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let d2: f64 = row.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        order.into_iter().take(self.k).map(|(_, i)| i).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_echoes_the_nearest_label() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![false, true];
        let model = train(&x, &y, &KnnParams { k: 1 }).unwrap();
        assert_eq!(model.scores(&[vec![0.2]]), vec![0.0]);
        assert_eq!(model.scores(&[vec![0.9]]), vec![1.0]);
    }

    #[test]
    fn equidistant_points_rank_by_index() {
        // Two rows both at distance 1; the earlier row wins the k=1 slot.
        let x = vec![vec![1.0], vec![-1.0]];
        let y = vec![true, false];
        let model = train(&x, &y, &KnnParams { k: 1 }).unwrap();
        assert_eq!(model.scores(&[vec![0.0]]), vec![1.0]);
    }

    #[test]
    fn even_k_split_vote_falls_to_nearest_neighbor() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let y = vec![false, false, true, true];
        let model = train(&x, &y, &KnnParams { k: 2 }).unwrap();
        // Query 1.4: neighbors are rows 1 (d 0.4, false) and 2 (d 0.6, true).
        // Vote is exactly 0.5; the nearer row is negative.
        let s = model.scores(&[vec![1.4]]);
        assert_eq!(s, vec![0.5]);
        assert!(!model.tie_break_label(&[1.4]));
        assert!(model.tie_break_label(&[1.6]));
    }

    #[test]
    fn k_larger_than_training_set_is_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![false, true];
        match train(&x, &y, &KnnParams { k: 3 }) {
            Err(Error::KTooLarge { k, n }) => assert_eq!((k, n), (3, 2)),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn score_counts_positive_fraction() {
        let x = vec![vec![0.0], vec![0.1], vec![0.2], vec![5.0]];
        let y = vec![true, true, false, false];
        let model = train(&x, &y, &KnnParams { k: 3 }).unwrap();
        let s = model.scores(&[vec![0.05]]);
        assert!((s[0] - 2.0 / 3.0).abs() < 1e-12);
    }
}
