//! Brute-force k-nearest-neighbors on `v1` encodings.
//!
//! Distances are exact integer squared Euclidean distances. Neighbors are
//! ranked by `(distance, training row)`, so equal distances prefer the lower
//! row, and `k` must be odd so a two-class vote can never tie.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::{EncodingKind, LabeledDataset};
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 5;

/// Values of `k` tried when the best setting is not known in advance.
pub const K_SWEEP: [usize; 5] = [1, 3, 5, 7, 9];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnnModel {
    k: usize,
    width: usize,
    features: Vec<u8>,
    labels: Vec<u8>,
    largest: u8,
}

/// Stores the training set. Only `v1` datasets are accepted.
pub fn knn_fit(train: &LabeledDataset, k: usize) -> Result<KnnModel> {
    if train.kind() != EncodingKind::V1 {
        return Err(Error::EncodingMismatch { model: "nearn".into(), expected: 1, found: train.kind().index() });
    }
    KnnModel::from_raw(train.width(), train.features().to_vec(), train.labels().to_vec(), k)
}

impl KnnModel {
    /// Builds a model over arbitrary byte features of the given row width.
    pub fn from_raw(width: usize, features: Vec<u8>, labels: Vec<u8>, k: usize) -> Result<Self> {
        if width == 0 || features.len() != width * labels.len() {
            return Err(Error::Shape(format!("{} values do not form {} rows of width {width}", features.len(), labels.len())));
        }
        let largest = features.iter().copied().max().unwrap_or(0);
        let model = Self { k: 1, width, features, labels, largest };
        model.with_k(k)
    }

    /// Same training data, different `k`.
    pub fn with_k(mut self, k: usize) -> Result<Self> {
        check_k(k, self.labels.len())?;
        self.k = k;
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The `m` nearest training rows to `x` as `(squared distance, row)`,
    /// ascending.
    pub fn neighbors(&self, x: &[u8], m: usize) -> Vec<(u32, u32)> {
        debug_assert_eq!(x.len(), self.width);
        let m = m.min(self.len());
        let mut best: Vec<(u32, u32)> = Vec::with_capacity(m + 1);
        let mut worst = u32::MAX;
        let narrow = fits_u16(self.width, x.iter().copied().fold(self.largest, u8::max));
        for (row, train) in self.features.chunks_exact(self.width).enumerate() {
            let d = if narrow { squared_distance_u16(x, train) } else { squared_distance(x, train) };
            // rows arrive in ascending order, so an equal distance never
            // displaces an earlier row
            if best.len() == m && d >= worst {
                continue;
            }
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, row as u32));
            best.truncate(m);
            if best.len() == m {
                worst = best[m - 1].0;
            }
        }
        best
    }

    /// Share of class-1 votes among the `k` nearest rows.
    pub fn score(&self, x: &[u8]) -> f64 {
        vote_share(&self.neighbors(x, self.k), &self.labels, self.k)
    }

    pub fn predict(&self, x: &[u8]) -> Result<u8> {
        if x.len() != self.width {
            return Err(Error::SizeMismatch { expected: self.width, found: x.len() });
        }
        Ok(u8::from(self.score(x) > 0.5))
    }

    /// Class-1 vote shares for every sample of `data`, for each `k` in `ks`,
    /// from a single neighbor scan. Result is indexed `[k position][sample]`.
    pub fn sweep_scores(&self, data: &LabeledDataset, ks: &[usize]) -> Result<Vec<Vec<f64>>> {
        if data.width() != self.width {
            return Err(Error::SizeMismatch { expected: self.width, found: data.width() });
        }
        for &k in ks {
            check_k(k, self.len())?;
        }
        let kmax = ks.iter().copied().max().unwrap_or(self.k);
        let per_sample: Vec<Vec<f64>> = (0..data.len())
            .into_par_iter()
            .map(|i| {
                let nb = self.neighbors(data.sample(i), kmax);
                ks.iter().map(|&k| vote_share(&nb, &self.labels, k)).collect()
            })
            .collect();
        Ok((0..ks.len()).map(|j| per_sample.iter().map(|s| s[j]).collect()).collect())
    }

    pub fn predict_scores(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        Ok(self.sweep_scores(data, &[self.k])?.pop().expect("one k requested"))
    }

    /// `k=<k>` followed by the training set in dataset CSV format.
    pub fn save(&self, path: &Path, n: usize) -> Result<()> {
        let data = LabeledDataset::from_parts(n, EncodingKind::V1, self.features.clone(), self.labels.clone())?;
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "k={}", self.k).map_err(|e| Error::io(path, e))?;
        data.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut first = String::new();
        reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
        let k = first
            .trim()
            .strip_prefix("k=")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(path, "first line must be k=<k>"))?;
        let data = LabeledDataset::read_from(reader, path)?;
        knn_fit(&data, k)
    }
}

fn check_k(k: usize, rows: usize) -> Result<()> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!("k must be a positive odd integer, got {k}")));
    }
    if k > rows {
        return Err(Error::InvalidConfig(format!("k = {k} exceeds the {rows} training rows")));
    }
    Ok(())
}

fn vote_share(neighbors: &[(u32, u32)], labels: &[u8], k: usize) -> f64 {
    let ones = neighbors[..k].iter().filter(|&&(_, r)| labels[r as usize] == 1).count();
    ones as f64 / k as f64
}

/// Whether every squared distance between rows of this width with entries
/// at most `largest` fits in `u16`.
fn fits_u16(width: usize, largest: u8) -> bool {
    width * (largest as usize).pow(2) <= u16::MAX as usize
}

#[inline]
fn squared_distance_u16(a: &[u8], b: &[u8]) -> u32 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.abs_diff(y) as u16;
            d * d
        })
        .fold(0u16, u16::wrapping_add) as u32
}

#[inline]
fn squared_distance(a: &[u8], b: &[u8]) -> u32 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as i32 - y as i32;
            (d * d) as u32
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(rows: &[[u8; 3]], labels: &[u8]) -> KnnModel {
        KnnModel::from_raw(3, rows.concat(), labels.to_vec(), 1).unwrap()
    }

    #[test]
    fn one_nn_memorizes() {
        let rows: Vec<[u8; 3]> = (0..10).map(|i| [i, (i * 3) % 7, 1]).collect();
        let labels: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
        let m = toy(&rows, &labels);
        for (r, &y) in rows.iter().zip(&labels) {
            assert_eq!(m.predict(r).unwrap(), y);
            assert_eq!(m.neighbors(r, 1)[0].0, 0);
        }
    }

    #[test]
    fn duplicate_rows_prefer_lower_index() {
        let m = toy(&[[1, 1, 1], [1, 1, 1], [5, 5, 5]], &[1, 0, 0]);
        assert_eq!(m.predict(&[1, 1, 1]).unwrap(), 1);
        let m = toy(&[[1, 1, 1], [1, 1, 1], [5, 5, 5]], &[0, 1, 1]);
        assert_eq!(m.predict(&[1, 1, 1]).unwrap(), 0);
    }

    #[test]
    fn rejects_bad_k_and_encoding() {
        let rows = [[0u8, 0, 0], [1, 1, 1]];
        let m = toy(&rows, &[0, 1]);
        assert!(m.clone().with_k(2).is_err());
        assert!(m.clone().with_k(0).is_err());
        assert!(m.with_k(3).is_err());
        let v2 = LabeledDataset::from_parts(2, EncodingKind::V2, vec![2, 2, 0, 0, 0, 0], vec![1]).unwrap();
        assert!(matches!(knn_fit(&v2, 1), Err(Error::EncodingMismatch { .. })));
    }

    #[test]
    fn majority_vote() {
        let m = toy(&[[0, 0, 0], [0, 0, 1], [0, 1, 0], [9, 9, 9], [9, 9, 8]], &[1, 1, 0, 0, 0]).with_k(3).unwrap();
        assert_eq!(m.predict(&[0, 0, 0]).unwrap(), 1);
        assert_eq!(m.predict(&[9, 9, 9]).unwrap(), 0);
    }

    #[test]
    fn save_and_load() {
        let data = LabeledDataset::from_parts(2, EncodingKind::V1, vec![2, 0, 2, 0, 2, 0, 1, 1, 1, 1, 2, 0], vec![1, 0]).unwrap();
        let m = knn_fit(&data, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("knn.txt");
        m.save(&path, 2).unwrap();
        assert_eq!(KnnModel::load(&path).unwrap(), m);
    }

    proptest! {
        #[test]
        fn scaling_preserves_predictions(
            rows in prop::collection::vec(prop::array::uniform3(0u8..10), 5..40),
            query in prop::array::uniform3(0u8..10),
            scale in 2u8..20,
            k in prop::sample::select(vec![1usize, 3, 5]),
        ) {
            let labels: Vec<u8> = rows.iter().map(|r| (r[0] + r[2]) % 2).collect();
            let base = KnnModel::from_raw(3, rows.concat(), labels.clone(), k).unwrap();
            let scaled_rows: Vec<u8> = rows.concat().iter().map(|&x| x * scale).collect();
            let scaled = KnnModel::from_raw(3, scaled_rows, labels, k).unwrap();
            let sq: Vec<u8> = query.iter().map(|&x| x * scale).collect();
            prop_assert_eq!(base.predict(&query).unwrap(), scaled.predict(&sq).unwrap());
        }

        #[test]
        fn row_order_does_not_matter_for_distinct_rows(
            rows in prop::collection::btree_set(prop::array::uniform3(0u8..6), 3..30),
            query in prop::array::uniform3(0u8..6),
            seed in any::<u64>(),
        ) {
            let rows: Vec<[u8; 3]> = rows.into_iter().collect();
            let labels: Vec<u8> = rows.iter().map(|r| r[1] % 2).collect();
            let base = KnnModel::from_raw(3, rows.concat(), labels.clone(), 3).unwrap();
            let nb = base.neighbors(&query, 4);
            // only meaningful when the 3rd and 4th distances differ
            prop_assume!(nb.len() < 4 || nb[2].0 != nb[3].0);
            let mut perm: Vec<usize> = (0..rows.len()).collect();
            use rand::seq::SliceRandom;
            perm.shuffle(&mut crate::seeds::rng_from(seed));
            let shuffled: Vec<u8> = perm.iter().flat_map(|&i| rows[i]).collect();
            let shuffled_labels: Vec<u8> = perm.iter().map(|&i| labels[i]).collect();
            let other = KnnModel::from_raw(3, shuffled, shuffled_labels, 3).unwrap();
            prop_assert_eq!(base.predict(&query).unwrap(), other.predict(&query).unwrap());
        }
    }
}
