//! The filtered triple set `Q(n)`, its three tensor encodings, labeled
//! datasets and balanced train/validation splits.
//!
//! Encodings (all integer, values in `[0, n]`):
//! - `v1`: `[pad λ, pad μ, pad ν]`, length `3n`.
//! - `v2`: `n × 3`, row `i` is `(λ_i, μ_i, ν_i)`, flattened row-major.
//! - `v3`: six `v2` slices for the permutations `(λμν), (λνμ), (μλν),
//!   (μνλ), (νλμ), (νμλ)` in that order, slice-major then row-major.
//!   Read as an image this is height 6, width `n`, 3 channels.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::characters::CharacterTable;
use crate::error::{Error, Result};
use crate::kronecker::{depths_pass, kron_batch, Triple};
use crate::partitions::{enumerate_partitions, Partition};
use crate::seeds::rng_from;

/// Default training share of a split.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

const V3_ORDER: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncodingKind {
    V1,
    V2,
    V3,
}

impl EncodingKind {
    pub fn from_index(a: u8) -> Result<Self> {
        match a {
            1 => Ok(Self::V1),
            2 => Ok(Self::V2),
            3 => Ok(Self::V3),
            _ => Err(Error::InvalidConfig(format!("encoding must be 1, 2 or 3, got {a}"))),
        }
    }

    /// The `a` in `D_n^(a)`.
    pub fn index(self) -> u8 {
        match self {
            Self::V1 => 1,
            Self::V2 => 2,
            Self::V3 => 3,
        }
    }

    /// Flat tensor length for degree `n`.
    pub fn width(self, n: usize) -> usize {
        match self {
            Self::V1 | Self::V2 => 3 * n,
            Self::V3 => 18 * n,
        }
    }
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.index())
    }
}

fn encode_rows(kind: EncodingKind, rows: [&[u8]; 3], out: &mut Vec<u8>) {
    let n = rows[0].len();
    match kind {
        EncodingKind::V1 => {
            for r in rows {
                out.extend_from_slice(r);
            }
        }
        EncodingKind::V2 => {
            for i in 0..n {
                out.extend(rows.iter().map(|r| r[i]));
            }
        }
        EncodingKind::V3 => {
            for perm in V3_ORDER {
                out.extend((0..n).flat_map(|i| perm.iter().map(move |&c| rows[c][i])));
            }
        }
    }
}

fn padded_bytes(l: &Partition, n: usize) -> Result<Vec<u8>> {
    if n > u8::MAX as usize {
        return Err(Error::DegreeOutOfRange { n, min: 1, max: u8::MAX as usize });
    }
    Ok(l.pad(n)?.entries().iter().map(|&x| x as u8).collect())
}

fn encode(kind: EncodingKind, lambda: &Partition, mu: &Partition, nu: &Partition) -> Result<Vec<u8>> {
    let t = Triple::new(lambda.clone(), mu.clone(), nu.clone())?;
    let n = t.n();
    let rows = [padded_bytes(lambda, n)?, padded_bytes(mu, n)?, padded_bytes(nu, n)?];
    let mut out = Vec::with_capacity(kind.width(n));
    encode_rows(kind, [&rows[0], &rows[1], &rows[2]], &mut out);
    Ok(out)
}

pub fn encode_v1(lambda: &Partition, mu: &Partition, nu: &Partition) -> Result<Vec<u8>> {
    encode(EncodingKind::V1, lambda, mu, nu)
}

pub fn encode_v2(lambda: &Partition, mu: &Partition, nu: &Partition) -> Result<Vec<u8>> {
    encode(EncodingKind::V2, lambda, mu, nu)
}

pub fn encode_v3(lambda: &Partition, mu: &Partition, nu: &Partition) -> Result<Vec<u8>> {
    encode(EncodingKind::V3, lambda, mu, nu)
}

/// Index triples `(i, j, k)` into `partitions` passing the depth filter, in
/// lexicographic order.
pub fn enumerate_q_indices(partitions: &[Partition]) -> Vec<[u16; 3]> {
    let depths: Vec<usize> = partitions.iter().map(Partition::depth).collect();
    let p = partitions.len();
    let mut out = Vec::new();
    for i in 0..p {
        for j in 0..p {
            for k in 0..p {
                if depths_pass(depths[i], depths[j], depths[k]) {
                    out.push([i as u16, j as u16, k as u16]);
                }
            }
        }
    }
    out
}

/// `Q(n)`: every triple of partitions of `n` passing the depth filter.
pub fn enumerate_q(n: usize) -> Result<Vec<Triple>> {
    let ps = enumerate_partitions(n)?;
    Ok(enumerate_q_indices(&ps)
        .into_iter()
        .map(|[i, j, k]| Triple {
            lambda: ps[i as usize].clone(),
            mu: ps[j as usize].clone(),
            nu: ps[k as usize].clone(),
        })
        .collect())
}

/// `Q(n)` as index triples together with their labels; the compact form the
/// experiment pipeline works on before encoding selected rows.
#[derive(Clone, Debug)]
pub struct LabeledTriples {
    n: usize,
    padded: Vec<Vec<u8>>,
    triples: Vec<[u16; 3]>,
    labels: Vec<u8>,
}

impl LabeledTriples {
    pub fn build(table: &CharacterTable) -> Result<Self> {
        let n = table.n();
        let partitions = table.partitions();
        let padded = partitions.iter().map(|l| padded_bytes(l, n)).collect::<Result<_>>()?;
        let triples = enumerate_q_indices(partitions);
        let labels = kron_batch(table, &triples)?.into_iter().map(|g| u8::from(g != 0)).collect();
        Ok(Self { n, padded, triples, labels })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[[u16; 3]] {
        &self.triples
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// `(#label 0, #label 1)`.
    pub fn class_counts(&self) -> (usize, usize) {
        class_counts(&self.labels)
    }

    /// Encodes the rows at `indices` (all rows when `None`).
    pub fn encode(&self, kind: EncodingKind, indices: Option<&[usize]>) -> LabeledDataset {
        let width = kind.width(self.n);
        let count = indices.map_or(self.len(), <[usize]>::len);
        let mut features = Vec::with_capacity(count * width);
        let mut labels = Vec::with_capacity(count);
        let mut push = |r: usize| {
            let [i, j, k] = self.triples[r];
            let rows = [&self.padded[i as usize][..], &self.padded[j as usize][..], &self.padded[k as usize][..]];
            encode_rows(kind, rows, &mut features);
            labels.push(self.labels[r]);
        };
        match indices {
            Some(idx) => idx.iter().for_each(|&r| push(r)),
            None => (0..self.len()).for_each(push),
        }
        LabeledDataset { n: self.n, kind, features, labels }
    }
}

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let ones = labels.iter().filter(|&&y| y == 1).count();
    (labels.len() - ones, ones)
}

/// Encoded samples of one degree and one encoding, each with a binary label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledDataset {
    n: usize,
    kind: EncodingKind,
    features: Vec<u8>,
    labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn from_parts(n: usize, kind: EncodingKind, features: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        let ds = Self { n, kind, features, labels };
        ds.validate()?;
        Ok(ds)
    }

    /// Checks the shape and range invariants of every sample.
    pub fn validate(&self) -> Result<()> {
        let width = self.width();
        if self.features.len() != width * self.labels.len() {
            return Err(Error::Shape(format!(
                "{} feature values for {} samples of width {width}",
                self.features.len(),
                self.labels.len()
            )));
        }
        if let Some(bad) = self.features.iter().find(|&&x| x as usize > self.n) {
            return Err(Error::Shape(format!("feature value {bad} exceeds n = {}", self.n)));
        }
        if let Some(bad) = self.labels.iter().find(|&&y| y > 1) {
            return Err(Error::Shape(format!("label {bad} is not binary")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> EncodingKind {
        self.kind
    }

    pub fn width(&self) -> usize {
        self.kind.width(self.n)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[u8] {
        let w = self.width();
        &self.features[i * w..(i + 1) * w]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &[u8] {
        &self.features
    }

    pub fn class_counts(&self) -> (usize, usize) {
        class_counts(&self.labels)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.width());
        for &i in indices {
            features.extend_from_slice(self.sample(i));
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self { n: self.n, kind: self.kind, features, labels }
    }

    /// Writes the CSV format: `n=<n>,a=<a>,rows=<count>`, then one line per
    /// sample with the flat tensor followed by the label.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::with_capacity(1 << 20, file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "n={},a={},rows={}", self.n, self.kind.index(), self.len())?;
        let mut line = String::with_capacity(4 * self.width() + 4);
        for i in 0..self.len() {
            line.clear();
            for &x in self.sample(i) {
                push_u8(&mut line, x);
                line.push(',');
            }
            push_u8(&mut line, self.labels[i]);
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::with_capacity(1 << 20, file), path)
    }

    pub fn read_from(reader: impl BufRead, path: &Path) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(path, "empty file"))?
            .map_err(|e| Error::io(path, e))?;
        let (n, a, rows) = parse_header(&header).ok_or_else(|| Error::format(path, format!("bad header {header:?}")))?;
        let kind = EncodingKind::from_index(a)?;
        let width = kind.width(n);
        let mut features = Vec::with_capacity(rows * width);
        let mut labels = Vec::with_capacity(rows);
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let before = features.len();
            for tok in line.split(',') {
                let v = tok
                    .parse::<u8>()
                    .map_err(|e| Error::format(path, format!("line {}: {tok:?}: {e}", lineno + 2)))?;
                features.push(v);
            }
            if features.len() - before != width + 1 {
                return Err(Error::format(
                    path,
                    format!("line {}: {} columns, expected {}", lineno + 2, features.len() - before, width + 1),
                ));
            }
            labels.push(features.pop().expect("row is non-empty"));
        }
        if labels.len() != rows {
            return Err(Error::format(path, format!("header says {rows} rows, found {}", labels.len())));
        }
        Self::from_parts(n, kind, features, labels).map_err(|e| Error::format(path, e.to_string()))
    }
}

fn push_u8(s: &mut String, x: u8) {
    if x >= 100 {
        s.push((b'0' + x / 100) as char);
    }
    if x >= 10 {
        s.push((b'0' + (x / 10) % 10) as char);
    }
    s.push((b'0' + x % 10) as char);
}

fn parse_header(line: &str) -> Option<(usize, u8, usize)> {
    let mut it = line.trim().split(',');
    let n = it.next()?.strip_prefix("n=")?.parse().ok()?;
    let a = it.next()?.strip_prefix("a=")?.parse().ok()?;
    let rows = it.next()?.strip_prefix("rows=")?.parse().ok()?;
    if it.next().is_some() {
        return None;
    }
    Some((n, a, rows))
}

/// Builds `D_n^(a)`: one sample per element of `Q(n)` in enumeration order.
pub fn build_dataset(kind: EncodingKind, table: &CharacterTable) -> Result<LabeledDataset> {
    Ok(LabeledTriples::build(table)?.encode(kind, None))
}

/// How to balance and split a labeled set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub balanced: bool,
    /// Upper bound on the samples kept per class; `None` keeps all.
    pub per_class_cap: Option<usize>,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        Self { train_fraction: DEFAULT_TRAIN_FRACTION, seed, balanced: true, per_class_cap: None }
    }

    pub fn with_cap(mut self, cap: Option<usize>) -> Self {
        self.per_class_cap = cap;
        self
    }
}

/// Row indices chosen for training and validation, plus the recipe that
/// produced them. Written next to datasets as the split sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub spec: SplitSpec,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl SplitManifest {
    /// Sampling recipe, one ChaCha8 stream seeded with `spec.seed`:
    /// 1. per class (0 then 1), the ascending row indices of that class;
    /// 2. per class, keep `m` rows by a partial Fisher–Yates shuffle, where
    ///    `m = min(#class0, #class1, cap)` when balanced and
    ///    `min(#class, cap)` otherwise;
    /// 3. per class, the first `round(m · train_fraction)` kept rows go to
    ///    training and the rest to validation (so both sides stay balanced);
    /// 4. both index lists are sorted ascending.
    pub fn plan(labels: &[u8], spec: &SplitSpec) -> Result<Self> {
        if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!("train fraction {} outside (0, 1)", spec.train_fraction)));
        }
        let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, &y) in labels.iter().enumerate() {
            by_class[y as usize].push(i);
        }
        for (c, rows) in by_class.iter().enumerate() {
            if rows.is_empty() {
                return Err(Error::EmptyClass(c as u8));
            }
        }
        let cap = spec.per_class_cap.unwrap_or(usize::MAX);
        if cap == 0 {
            return Err(Error::InvalidConfig("per-class cap must be positive".into()));
        }
        let balanced_m = by_class[0].len().min(by_class[1].len()).min(cap);
        let mut rng = rng_from(spec.seed);
        let mut train = Vec::new();
        let mut validation = Vec::new();
        for rows in by_class.iter_mut() {
            let m = if spec.balanced { balanced_m } else { rows.len().min(cap) };
            let (chosen, _) = rows.partial_shuffle(&mut rng, m);
            let t = (m as f64 * spec.train_fraction).round() as usize;
            train.extend_from_slice(&chosen[..t]);
            validation.extend_from_slice(&chosen[t..]);
        }
        train.sort_unstable();
        validation.sort_unstable();
        Ok(Self { spec: spec.clone(), train, validation })
    }

    pub fn to_text(&self) -> String {
        let list = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        format!(
            "seed={}\ncap={}\nfraction={}\nbalanced={}\ntrain={}\nvalidation={}\n",
            self.spec.seed,
            self.spec.per_class_cap.map_or_else(|| "none".to_string(), |c| c.to_string()),
            self.spec.train_fraction,
            self.spec.balanced,
            list(&self.train),
            list(&self.validation),
        )
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).ok_or_else(|| Error::format(path, "malformed split manifest"))
    }

    fn parse(text: &str) -> Option<Self> {
        let mut fields = std::collections::HashMap::new();
        for line in text.lines() {
            let (k, v) = line.split_once('=')?;
            fields.insert(k, v);
        }
        let list = |v: &str| -> Option<Vec<usize>> {
            if v.is_empty() {
                return Some(Vec::new());
            }
            v.split(',').map(|t| usize::from_str(t).ok()).collect()
        };
        let cap = match *fields.get("cap")? {
            "none" => None,
            c => Some(c.parse().ok()?),
        };
        Some(Self {
            spec: SplitSpec {
                seed: fields.get("seed")?.parse().ok()?,
                per_class_cap: cap,
                train_fraction: fields.get("fraction")?.parse().ok()?,
                balanced: fields.get("balanced")?.parse().ok()?,
            },
            train: list(fields.get("train")?)?,
            validation: list(fields.get("validation")?)?,
        })
    }
}

/// A materialized train/validation pair.
#[derive(Clone, Debug)]
pub struct Split {
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
    pub manifest: SplitManifest,
}

/// Balances `data` by class and splits it per `spec`.
pub fn balance_and_split(data: &LabeledDataset, spec: &SplitSpec) -> Result<Split> {
    let manifest = SplitManifest::plan(data.labels(), spec)?;
    Ok(Split { train: data.subset(&manifest.train), validation: data.subset(&manifest.validation), manifest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(parts: &[usize]) -> Partition {
        Partition::new(parts.to_vec()).unwrap()
    }

    #[test]
    fn v1_examples() {
        assert_eq!(encode_v1(&p(&[3]), &p(&[2, 1]), &p(&[1, 1, 1])).unwrap(), vec![3, 0, 0, 2, 1, 0, 1, 1, 1]);
        assert_eq!(encode_v1(&p(&[2]), &p(&[2]), &p(&[2])).unwrap(), vec![2, 0, 2, 0, 2, 0]);
        assert!(encode_v1(&p(&[2]), &p(&[3]), &p(&[2])).is_err());
    }

    #[test]
    fn v2_examples() {
        let v = encode_v2(&p(&[3]), &p(&[2, 1]), &p(&[1, 1, 1])).unwrap();
        assert_eq!(v, vec![3, 2, 1, 0, 1, 1, 0, 0, 1]);
    }

    #[test]
    fn v3_slices() {
        let (l, m, n) = (p(&[4, 1]), p(&[3, 2]), p(&[2, 2, 1]));
        let v3 = encode_v3(&l, &m, &n).unwrap();
        assert_eq!(v3.len(), 18 * 5);
        let slices: Vec<&[u8]> = v3.chunks(15).collect();
        assert_eq!(slices[0], encode_v2(&l, &m, &n).unwrap());
        assert_eq!(slices[1], encode_v2(&l, &n, &m).unwrap());
        assert_eq!(slices[2], encode_v2(&m, &l, &n).unwrap());
        assert_eq!(slices[3], encode_v2(&m, &n, &l).unwrap());
        assert_eq!(slices[4], encode_v2(&n, &l, &m).unwrap());
        assert_eq!(slices[5], encode_v2(&n, &m, &l).unwrap());

        let same = encode_v3(&l, &l, &l).unwrap();
        assert!(same.chunks(15).all(|s| s == &same[..15]));
    }

    #[test]
    fn small_q_counts() {
        assert_eq!(enumerate_q(1).unwrap().len(), 1);
        // of the 8 triples of S_2, the three with exactly one sign
        // partition violate |d_λ − d_μ| ≤ d_ν ≤ d_λ + d_μ
        assert_eq!(enumerate_q(2).unwrap().len(), 5);
        let q4 = enumerate_q(4).unwrap();
        assert!(q4.iter().all(|t| crate::kronecker::depth_filter(&t.lambda, &t.mu, &t.nu)));
    }

    #[test]
    fn dataset_for_s1() {
        let t = CharacterTable::build(1).unwrap();
        let d = build_dataset(EncodingKind::V1, &t).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.sample(0), &[1, 1, 1]);
        assert_eq!(d.label(0), 1);
    }

    #[test]
    fn counts_do_not_depend_on_encoding() {
        let t = CharacterTable::build(7).unwrap();
        let lt = LabeledTriples::build(&t).unwrap();
        let counts: Vec<_> = [EncodingKind::V1, EncodingKind::V2, EncodingKind::V3]
            .into_iter()
            .map(|k| {
                let d = lt.encode(k, None);
                d.validate().unwrap();
                d.class_counts()
            })
            .collect();
        assert!(counts.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn v2_columns_sum_to_n_and_deinterleave_to_v1() {
        let t = CharacterTable::build(6).unwrap();
        let lt = LabeledTriples::build(&t).unwrap();
        let v1 = lt.encode(EncodingKind::V1, None);
        let v2 = lt.encode(EncodingKind::V2, None);
        for i in 0..v1.len() {
            let s2 = v2.sample(i);
            for c in 0..3 {
                let col: Vec<u8> = (0..6).map(|r| s2[r * 3 + c]).collect();
                assert_eq!(col.iter().map(|&x| x as usize).sum::<usize>(), 6);
                assert_eq!(&v1.sample(i)[c * 6..(c + 1) * 6], &col[..]);
            }
        }
    }

    #[test]
    fn split_of_200() {
        let labels: Vec<u8> = (0..200).map(|i| (i % 2) as u8).collect();
        let m = SplitManifest::plan(&labels, &SplitSpec::new(1)).unwrap();
        assert_eq!((m.train.len(), m.validation.len()), (140, 60));
    }

    #[test]
    fn split_rejects_empty_class_and_bad_fraction() {
        assert!(matches!(SplitManifest::plan(&[1, 1, 1], &SplitSpec::new(0)), Err(Error::EmptyClass(0))));
        let mut spec = SplitSpec::new(0);
        spec.train_fraction = 1.0;
        assert!(SplitManifest::plan(&[0, 1], &spec).is_err());
    }

    #[test]
    fn cap_limits_class_size() {
        let labels: Vec<u8> = (0..1000).map(|i| u8::from(i % 3 != 0)).collect();
        let m = SplitManifest::plan(&labels, &SplitSpec::new(3).with_cap(Some(100))).unwrap();
        assert_eq!(m.train.len() + m.validation.len(), 200);
        let unbalanced = SplitSpec { balanced: false, ..SplitSpec::new(3) };
        let m = SplitManifest::plan(&labels, &unbalanced).unwrap();
        assert_eq!(m.train.len() + m.validation.len(), 1000);
    }

    #[test]
    fn manifest_round_trip() {
        let labels: Vec<u8> = (0..50).map(|i| u8::from(i % 4 == 0)).collect();
        let m = SplitManifest::plan(&labels, &SplitSpec::new(9).with_cap(Some(10))).unwrap();
        assert_eq!(SplitManifest::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn csv_round_trip_and_header() {
        let t = CharacterTable::build(5).unwrap();
        let d = build_dataset(EncodingKind::V3, &t).unwrap();
        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&format!("n=5,a=3,rows={}\n", d.len())));
        let back = LabeledDataset::read_from(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let bad = b"n=2,a=1,rows=1\n2,0,2,0,2\n";
        assert!(LabeledDataset::read_from(&bad[..], Path::new("mem")).is_err());
        let out_of_range = b"n=2,a=1,rows=1\n3,0,2,0,2,0,1\n";
        assert!(LabeledDataset::read_from(&out_of_range[..], Path::new("mem")).is_err());
    }

    proptest! {
        #[test]
        fn split_is_balanced_and_disjoint(
            labels in prop::collection::vec(0u8..2, 2..400),
            seed in any::<u64>(),
            cap in prop::option::of(1usize..100),
        ) {
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let m = SplitManifest::plan(&labels, &SplitSpec::new(seed).with_cap(cap)).unwrap();
            let all: std::collections::BTreeSet<_> = m.train.iter().chain(&m.validation).collect();
            prop_assert_eq!(all.len(), m.train.len() + m.validation.len());
            let count = |idx: &[usize], c: u8| idx.iter().filter(|&&i| labels[i] == c).count();
            prop_assert_eq!(count(&m.train, 0), count(&m.train, 1));
            prop_assert_eq!(count(&m.validation, 0), count(&m.validation, 1));
            prop_assert_eq!(&m, &SplitManifest::plan(&labels, &SplitSpec::new(seed).with_cap(cap)).unwrap());
        }
    }
}
