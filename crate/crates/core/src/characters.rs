//! Exact character theory of the symmetric group.
//!
//! Character values come from the Murnaghan–Nakayama rule, evaluated on
//! beta-sets: removing a border strip of length `r` from `λ` is the same as
//! moving one bead of the beta-set `{λ_i + ℓ − i}` down by `r` onto an empty
//! position, and the strip height equals the number of beads jumped over.
//! All arithmetic is integer; no floating point is used in this module.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::partitions::{enumerate_partitions, Partition};

/// Largest degree for which tables are built. `20! < i64::MAX`.
pub const MAX_TABLE_N: usize = 20;

/// A partition read as a conjugacy class label (cycle type).
pub type CycleType = Partition;

pub fn factorial(n: usize) -> i128 {
    (1..=n as i128).product()
}

/// `(−1)^{n − ℓ(ρ)}`, the sign of any permutation with cycle type `ρ`.
pub fn sign(rho: &CycleType) -> i64 {
    if (rho.n() - rho.len()).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Centralizer order `z_ρ = ∏ i^{m_i} m_i!`.
pub fn centralizer_order(rho: &CycleType) -> i128 {
    rho.multiplicities()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &m)| (i as i128).pow(m as u32) * factorial(m))
        .product()
}

/// Size of the conjugacy class `n!/z_ρ`.
pub fn class_size(rho: &CycleType) -> i128 {
    factorial(rho.n()) / centralizer_order(rho)
}

/// Number of standard Young tableaux of shape `λ`, by the hook length formula.
pub fn dimension(lambda: &Partition) -> i128 {
    let conj = lambda.conjugate();
    let mut hooks: i128 = 1;
    for (i, &row) in lambda.parts().iter().enumerate() {
        for j in 0..row {
            let arm = row - j - 1;
            let leg = conj.parts()[j] - i - 1;
            hooks *= (arm + leg + 1) as i128;
        }
    }
    factorial(lambda.n()) / hooks
}

/// Memoized Murnaghan–Nakayama evaluation against one fixed cycle type.
///
/// Parts of `ρ` are consumed largest first. After removing `k` strips the
/// remaining shape has size `|ρ_{k..}|`, so the remaining shape alone keys
/// the memo.
struct ColumnEvaluator<'a> {
    rho: &'a [usize],
    suffix_sums: Vec<usize>,
    memo: HashMap<Vec<usize>, i64>,
}

impl<'a> ColumnEvaluator<'a> {
    fn new(rho: &'a [usize]) -> Self {
        let mut suffix_sums = vec![0; rho.len() + 1];
        for k in (0..rho.len()).rev() {
            suffix_sums[k] = suffix_sums[k + 1] + rho[k];
        }
        Self { rho, suffix_sums, memo: HashMap::new() }
    }

    fn eval(&mut self, shape: &[usize]) -> i64 {
        let size: usize = shape.iter().sum();
        if size == 0 {
            return 1;
        }
        if let Some(&v) = self.memo.get(shape) {
            return v;
        }
        let k = self
            .suffix_sums
            .iter()
            .position(|&s| s == size)
            .expect("shape size always matches a suffix of the cycle type");
        let r = self.rho[k];

        let len = shape.len();
        let beta: Vec<usize> = shape.iter().enumerate().map(|(i, &p)| p + len - 1 - i).collect();
        let mut total = 0i64;
        for (idx, &b) in beta.iter().enumerate() {
            if b < r {
                continue;
            }
            let target = b - r;
            if beta.contains(&target) {
                continue;
            }
            // beads strictly between target and b; beta is decreasing so they
            // all sit after idx
            let height = beta[idx + 1..].iter().filter(|&&x| x > target).count();
            let mut moved = beta.clone();
            moved[idx] = target;
            moved.sort_unstable_by(|a, b| b.cmp(a));
            let smaller = shape_from_beta(&moved);
            let value = self.eval(&smaller);
            if height % 2 == 0 {
                total += value;
            } else {
                total -= value;
            }
        }
        self.memo.insert(shape.to_vec(), total);
        total
    }
}

fn shape_from_beta(beta: &[usize]) -> Vec<usize> {
    let len = beta.len();
    let mut parts: Vec<usize> = beta.iter().enumerate().map(|(i, &b)| b - (len - 1 - i)).collect();
    while parts.last() == Some(&0) {
        parts.pop();
    }
    parts
}

/// `χ_λ(ρ)` by the Murnaghan–Nakayama rule.
pub fn mn_character(lambda: &Partition, rho: &CycleType) -> Result<i64> {
    if lambda.n() != rho.n() {
        return Err(Error::SizeMismatch { expected: lambda.n(), found: rho.n() });
    }
    Ok(ColumnEvaluator::new(rho.parts()).eval(lambda.parts()))
}

/// Full character table of `S_n`. Rows are irreducibles `λ`, columns are
/// classes `ρ`, both in [`enumerate_partitions`] order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharacterTable {
    n: usize,
    partitions: Vec<Partition>,
    index: HashMap<Partition, usize>,
    class_sizes: Vec<i64>,
    chi: Vec<i64>,
}

impl CharacterTable {
    /// Builds the table from scratch, one column per cycle type (in parallel).
    pub fn build(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_TABLE_N {
            return Err(Error::DegreeOutOfRange { n, min: 1, max: MAX_TABLE_N });
        }
        let partitions = enumerate_partitions(n)?;
        let p = partitions.len();
        let columns: Vec<Vec<i64>> = partitions
            .par_iter()
            .map(|rho| {
                let mut eval = ColumnEvaluator::new(rho.parts());
                partitions.iter().map(|l| eval.eval(l.parts())).collect()
            })
            .collect();
        let mut chi = vec![0i64; p * p];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                chi[i * p + j] = v;
            }
        }
        let class_sizes = partitions.iter().map(|r| class_size(r) as i64).collect();
        Ok(Self::from_parts(n, partitions, class_sizes, chi))
    }

    fn from_parts(n: usize, partitions: Vec<Partition>, class_sizes: Vec<i64>, chi: Vec<i64>) -> Self {
        let index = partitions.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect();
        Self { n, partitions, index, class_sizes, chi }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `p(n)`, the side length of the table.
    pub fn size(&self) -> usize {
        self.partitions.len()
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn index_of(&self, lambda: &Partition) -> Option<usize> {
        self.index.get(lambda).copied()
    }

    pub fn class_sizes(&self) -> &[i64] {
        &self.class_sizes
    }

    /// `χ_{λ_i}(ρ_j)`.
    pub fn value(&self, i: usize, j: usize) -> i64 {
        self.chi[i * self.size() + j]
    }

    /// Character of `λ_i` on every class.
    pub fn row(&self, i: usize) -> &[i64] {
        let p = self.size();
        &self.chi[i * p..(i + 1) * p]
    }

    /// Checks class sizes, both orthogonality relations and the integrality
    /// of every entry, exactly.
    pub fn verify(&self) -> Result<()> {
        let n = self.n;
        let p = self.size();
        let fail = |reason: String| Err(Error::TableVerification { n, reason });
        let nfact = factorial(n);
        let total: i128 = self.class_sizes.iter().map(|&c| c as i128).sum();
        if total != nfact {
            return fail(format!("class sizes sum to {total}, expected {nfact}"));
        }
        for i in 0..p {
            for k in i..p {
                let s: i128 = (0..p)
                    .map(|j| self.class_sizes[j] as i128 * self.value(i, j) as i128 * self.value(k, j) as i128)
                    .sum();
                let want = if i == k { nfact } else { 0 };
                if s != want {
                    return fail(format!("row orthogonality fails for rows {i},{k}: {s} != {want}"));
                }
            }
        }
        for j in 0..p {
            for l in j..p {
                let s: i128 = (0..p).map(|i| self.value(i, j) as i128 * self.value(i, l) as i128).sum();
                let want = if j == l { nfact / self.class_sizes[j] as i128 } else { 0 };
                if s != want {
                    return fail(format!("column orthogonality fails for columns {j},{l}: {s} != {want}"));
                }
            }
        }
        Ok(())
    }

    /// Writes the cache file format: `n,p(n)`; the partition order; the class
    /// sizes one per line; then the `p(n)` table rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let text = self.to_csv_string();
        w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = format!("{},{}\n", self.n, self.size());
        for l in &self.partitions {
            s.push_str(&join(l.parts()));
            s.push('\n');
        }
        for c in &self.class_sizes {
            s.push_str(&c.to_string());
            s.push('\n');
        }
        for i in 0..self.size() {
            s.push_str(&join(self.row(i)));
            s.push('\n');
        }
        s
    }

    /// Reads a cache file and refuses it unless both orthogonality relations
    /// hold and the partition order is the canonical one.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::format(path, "unexpected end of file"))?
                .map_err(|e| Error::io(path, e))
        };
        let header: Vec<usize> = parse_row(path, &next()?)?;
        let [n, p] = header[..] else {
            return Err(Error::format(path, "header must be `n,p(n)`"));
        };
        if n == 0 || n > MAX_TABLE_N {
            return Err(Error::DegreeOutOfRange { n, min: 1, max: MAX_TABLE_N });
        }
        let canonical = enumerate_partitions(n)?;
        if canonical.len() != p {
            return Err(Error::format(path, format!("p({n}) is {}, header says {p}", canonical.len())));
        }
        let mut partitions = Vec::with_capacity(p);
        for _ in 0..p {
            let parts: Vec<usize> = parse_row(path, &next()?)?;
            partitions.push(Partition::new(parts)?);
        }
        if partitions != canonical {
            return Err(Error::format(path, "partition order is not reverse-lexicographic"));
        }
        let mut class_sizes = Vec::with_capacity(p);
        for _ in 0..p {
            let line = next()?;
            class_sizes.push(
                line.trim().parse::<i64>().map_err(|e| Error::format(path, format!("class size {line:?}: {e}")))?,
            );
        }
        let mut chi = Vec::with_capacity(p * p);
        for _ in 0..p {
            let row: Vec<i64> = parse_row(path, &next()?)?;
            if row.len() != p {
                return Err(Error::format(path, format!("table row has {} entries, expected {p}", row.len())));
            }
            chi.extend(row);
        }
        let table = Self::from_parts(n, partitions, class_sizes, chi);
        table.verify()?;
        Ok(table)
    }

    /// Loads `chartab_<n>.csv` from `dir` if present and valid, otherwise
    /// builds the table and writes the cache.
    pub fn load_or_build(n: usize, dir: &Path) -> Result<Self> {
        let path = cache_path(dir, n);
        if path.exists() {
            return Self::read_csv(&path);
        }
        let table = Self::build(n)?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let tmp = path.with_extension("csv.tmp");
        table.write_csv(&tmp)?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(table)
    }
}

/// `<dir>/chartab_<n>.csv`
pub fn cache_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("chartab_{n}.csv"))
}

/// Convenience for callers that only need the in-memory table.
pub fn character_table(n: usize) -> Result<CharacterTable> {
    CharacterTable::build(n)
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn parse_row<T: std::str::FromStr>(path: &Path, line: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    line.trim()
        .split(',')
        .map(|t| t.trim().parse::<T>().map_err(|e| Error::format(path, format!("{t:?}: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(parts: &[usize]) -> Partition {
        Partition::new(parts.to_vec()).unwrap()
    }

    #[test]
    fn class_sizes_s3() {
        assert_eq!(class_size(&p(&[1, 1, 1])), 1);
        assert_eq!(class_size(&p(&[2, 1])), 3);
        assert_eq!(class_size(&p(&[3])), 2);
    }

    #[test]
    fn trivial_and_sign_characters() {
        for n in 1..=8 {
            for rho in enumerate_partitions(n).unwrap() {
                assert_eq!(mn_character(&Partition::row(n), &rho).unwrap(), 1);
                assert_eq!(mn_character(&Partition::column(n), &rho).unwrap(), sign(&rho));
            }
        }
    }

    #[test]
    fn standard_character_of_s3() {
        let l = p(&[2, 1]);
        assert_eq!(mn_character(&l, &p(&[1, 1, 1])).unwrap(), 2);
        assert_eq!(mn_character(&l, &p(&[2, 1])).unwrap(), 0);
        assert_eq!(mn_character(&l, &p(&[3])).unwrap(), -1);
    }

    #[test]
    fn s3_table() {
        let t = CharacterTable::build(3).unwrap();
        let rows: Vec<Vec<i64>> = (0..3).map(|i| t.row(i).to_vec()).collect();
        assert_eq!(rows, vec![vec![1, 1, 1], vec![-1, 0, 2], vec![1, -1, 1]]);
        assert_eq!(t.class_sizes(), &[2, 3, 1]);
    }

    #[test]
    fn s1_table() {
        let t = CharacterTable::build(1).unwrap();
        assert_eq!(t.row(0), &[1]);
        assert_eq!(t.class_sizes(), &[1]);
    }

    #[test]
    fn dimensions() {
        assert_eq!(dimension(&Partition::row(7)), 1);
        assert_eq!(dimension(&p(&[2, 1])), 2);
        assert_eq!(dimension(&p(&[2, 2])), 2);
        assert_eq!(dimension(&p(&[3, 2, 1])), 16);
    }

    #[test]
    fn rejects_degree_out_of_range() {
        assert!(CharacterTable::build(0).is_err());
        assert!(CharacterTable::build(21).is_err());
        assert!(mn_character(&p(&[2]), &p(&[1, 1, 1])).is_err());
    }

    #[test]
    fn verification_catches_corruption() {
        let mut t = CharacterTable::build(5).unwrap();
        t.verify().unwrap();
        t.chi[7] += 1;
        assert!(t.verify().is_err());
    }

    #[test]
    fn csv_round_trip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        let t = CharacterTable::load_or_build(6, dir.path()).unwrap();
        let path = cache_path(dir.path(), 6);
        assert!(path.exists());
        assert_eq!(CharacterTable::read_csv(&path).unwrap(), t);
        assert_eq!(CharacterTable::load_or_build(6, dir.path()).unwrap(), t);

        let text = fs::read_to_string(&path).unwrap();
        // last table row is the sign character; flip its first entry
        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        let last = lines.last_mut().unwrap();
        let rest = last.split_once(',').unwrap().1.to_owned();
        *last = format!("7,{rest}");
        fs::write(&path, lines.join("\n") + "\n").unwrap();
        assert!(CharacterTable::read_csv(&path).is_err());
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use crate::partitions::enumerate_partitions;
    use proptest::prelude::*;

    fn pair() -> impl Strategy<Value = (Partition, Partition)> {
        (1..=10usize).prop_flat_map(|n| {
            let parts = enumerate_partitions(n).unwrap();
            let k = parts.len();
            (0..k, 0..k).prop_map(move |(i, j)| (parts[i].clone(), parts[j].clone()))
        })
    }

    proptest! {
        #[test]
        fn conjugate_twists_by_sign((lambda, rho) in pair()) {
            let plain = mn_character(&lambda, &rho).unwrap();
            let twisted = mn_character(&lambda.conjugate(), &rho).unwrap();
            prop_assert_eq!(twisted, sign(&rho) * plain);
        }

        #[test]
        fn identity_class_gives_dimension((lambda, _) in pair()) {
            let id = Partition::column(lambda.n());
            prop_assert_eq!(mn_character(&lambda, &id).unwrap() as i128, dimension(&lambda));
        }

        #[test]
        fn class_sizes_divide_group_order((_, rho) in pair()) {
            prop_assert_eq!(class_size(&rho) * centralizer_order(&rho), factorial(rho.n()));
        }

        #[test]
        fn character_bounded_by_dimension((lambda, rho) in pair()) {
            prop_assert!((mn_character(&lambda, &rho).unwrap() as i128).abs() <= dimension(&lambda));
        }
    }
}
