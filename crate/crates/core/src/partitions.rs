//! Integer partitions: enumeration in reverse-lexicographic order, depth,
//! zero padding and conjugation.

use std::fmt;

use crate::error::{Error, Result};

/// Largest degree accepted by [`enumerate_partitions`]. p(30) = 5604.
pub const MAX_N: usize = 30;

/// A partition of `n`: weakly decreasing positive parts summing to `n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    parts: Vec<usize>,
}

impl Partition {
    /// Validates `parts` and builds a partition. Trailing zeros are stripped,
    /// so a padded vector is accepted as well.
    pub fn new(mut parts: Vec<usize>) -> Result<Self> {
        while parts.last() == Some(&0) {
            parts.pop();
        }
        if parts.is_empty() {
            return Err(Error::InvalidPartition("empty partition".into()));
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidPartition(format!("{parts:?} is not weakly decreasing")));
        }
        if parts.contains(&0) {
            return Err(Error::InvalidPartition(format!("{parts:?} has an interior zero")));
        }
        Ok(Self { parts })
    }

    /// The one-row partition `(n)`.
    pub fn row(n: usize) -> Self {
        Self { parts: vec![n] }
    }

    /// The one-column partition `(1^n)`.
    pub fn column(n: usize) -> Self {
        Self { parts: vec![1; n] }
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    /// The number being partitioned.
    pub fn n(&self) -> usize {
        self.parts.iter().sum()
    }

    /// Number of nonzero parts.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Largest part, `λ₁`.
    pub fn first(&self) -> usize {
        self.parts[0]
    }

    /// `n − λ₁`.
    pub fn depth(&self) -> usize {
        self.n() - self.first()
    }

    /// Extends the parts with zeros to length `n`.
    pub fn pad(&self, n: usize) -> Result<PaddedPartition> {
        if self.n() != n {
            return Err(Error::SizeMismatch { expected: n, found: self.n() });
        }
        let mut entries = self.parts.clone();
        entries.resize(n, 0);
        Ok(PaddedPartition { entries })
    }

    /// The transpose partition: column lengths of the Young diagram.
    pub fn conjugate(&self) -> Self {
        let parts = (1..=self.first())
            .map(|c| self.parts.iter().take_while(|&&p| p >= c).count())
            .collect();
        Self { parts }
    }

    /// Multiplicity `m_i` of each part size `i`, indexed from 0 (index 0 unused).
    pub fn multiplicities(&self) -> Vec<usize> {
        let mut m = vec![0; self.first() + 1];
        for &p in &self.parts {
            m[p] += 1;
        }
        m
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// A partition of `n` written as a length-`n` vector with trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PaddedPartition {
    entries: Vec<usize>,
}

impl PaddedPartition {
    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    /// Drops the trailing zeros.
    pub fn strip(&self) -> Partition {
        Partition::new(self.entries.clone()).expect("padded partition is valid by construction")
    }
}

/// All partitions of `n` in reverse-lexicographic order: `(n)` first and
/// `(1^n)` last. Every downstream index (table rows, dataset rows) uses this
/// order.
pub fn enumerate_partitions(n: usize) -> Result<Vec<Partition>> {
    if n == 0 || n > MAX_N {
        return Err(Error::DegreeOutOfRange { n, min: 1, max: MAX_N });
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    descend(n, n, &mut current, &mut out);
    Ok(out)
}

fn descend(remaining: usize, max_part: usize, current: &mut Vec<usize>, out: &mut Vec<Partition>) {
    if remaining == 0 {
        out.push(Partition { parts: current.clone() });
        return;
    }
    for part in (1..=remaining.min(max_part)).rev() {
        current.push(part);
        descend(remaining - part, part, current, out);
        current.pop();
    }
}

/// `n − λ₁`.
pub fn depth(lambda: &Partition) -> usize {
    lambda.depth()
}

/// Number of partitions of `n`, by the standard part-size recurrence.
pub fn partition_count(n: usize) -> u64 {
    let mut ways = vec![0u64; n + 1];
    ways[0] = 1;
    for part in 1..=n {
        for total in part..=n {
            ways[total] += ways[total - part];
        }
    }
    ways[n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(parts: &[usize]) -> Partition {
        Partition::new(parts.to_vec()).unwrap()
    }

    #[test]
    fn five_in_reverse_lex_order() {
        let got: Vec<Vec<usize>> =
            enumerate_partitions(5).unwrap().iter().map(|l| l.parts().to_vec()).collect();
        let want = vec![
            vec![5],
            vec![4, 1],
            vec![3, 2],
            vec![3, 1, 1],
            vec![2, 2, 1],
            vec![2, 1, 1, 1],
            vec![1, 1, 1, 1, 1],
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn counts() {
        assert_eq!(enumerate_partitions(1).unwrap(), vec![p(&[1])]);
        assert_eq!(enumerate_partitions(12).unwrap().len(), 77);
        assert_eq!(enumerate_partitions(13).unwrap().len(), 101);
        assert_eq!(enumerate_partitions(14).unwrap().len(), 135);
        for n in 1..=20 {
            assert_eq!(enumerate_partitions(n).unwrap().len() as u64, partition_count(n));
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(enumerate_partitions(0).is_err());
        assert!(enumerate_partitions(31).is_err());
        assert_eq!(enumerate_partitions(30).unwrap().len(), 5604);
    }

    #[test]
    fn no_duplicates_and_sums() {
        for n in 1..=14 {
            let ps = enumerate_partitions(n).unwrap();
            let set: std::collections::HashSet<_> = ps.iter().collect();
            assert_eq!(set.len(), ps.len());
            assert!(ps.iter().all(|l| l.n() == n));
            assert!(ps.windows(2).all(|w| w[0] > w[1]));
        }
    }

    #[test]
    fn depth_examples() {
        assert_eq!(depth(&p(&[5])), 0);
        assert_eq!(depth(&p(&[1, 1, 1, 1, 1])), 4);
        assert_eq!(depth(&p(&[3, 2, 1])), 3);
        for n in 1..=10 {
            for l in enumerate_partitions(n).unwrap() {
                assert_eq!(l.depth() == 0, l == Partition::row(n));
                assert_eq!(l.depth() == n - 1, l == Partition::column(n));
            }
        }
    }

    #[test]
    fn pad_examples() {
        assert_eq!(p(&[3, 2]).pad(5).unwrap().entries(), &[3, 2, 0, 0, 0]);
        assert_eq!(p(&[5]).pad(5).unwrap().entries(), &[5, 0, 0, 0, 0]);
        assert_eq!(p(&[1, 1]).pad(2).unwrap().entries(), &[1, 1]);
        assert!(p(&[3, 2]).pad(6).is_err());
    }

    #[test]
    fn conjugate_examples() {
        assert_eq!(Partition::row(4).conjugate(), Partition::column(4));
        assert_eq!(p(&[2, 1]).conjugate(), p(&[2, 1]));
        assert_eq!(p(&[3, 1]).conjugate(), p(&[2, 1, 1]));
    }

    #[test]
    fn conjugate_is_involution() {
        for n in 1..=14 {
            for l in enumerate_partitions(n).unwrap() {
                assert_eq!(l.conjugate().conjugate(), l);
                assert_eq!(l.conjugate().n(), n);
            }
        }
    }

    #[test]
    fn rejects_malformed() {
        assert!(Partition::new(vec![1, 2]).is_err());
        assert!(Partition::new(vec![]).is_err());
        assert!(Partition::new(vec![0, 0]).is_err());
        assert!(Partition::new(vec![2, 0, 1]).is_err());
        assert_eq!(Partition::new(vec![2, 1, 0, 0]).unwrap(), p(&[2, 1]));
    }

    proptest! {
        #[test]
        fn pad_then_strip_is_identity(n in 1usize..=14, idx in any::<prop::sample::Index>()) {
            let ps = enumerate_partitions(n).unwrap();
            let l = &ps[idx.index(ps.len())];
            prop_assert_eq!(&l.pad(n).unwrap().strip(), l);
        }
    }
}
