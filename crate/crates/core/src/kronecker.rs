//! Kronecker coefficients `g(λ,μ,ν)` as the triple character inner product
//! `(1/n!) Σ_ρ |C_ρ| χ_λ(ρ) χ_μ(ρ) χ_ν(ρ)`, the depth filter and the binary
//! vanishing label.
//!
//! Overflow: row orthogonality gives `|C_ρ| χ_λ(ρ)² ≤ n!`, so by
//! Cauchy–Schwarz `Σ_ρ |C_ρ χ_λ χ_μ| ≤ n!` and the full sum is bounded by
//! `n! · max|χ_ν| ≤ n!^{3/2}`. For `n ≤ 20` that is below `2^92`, so the
//! `i128` accumulation here cannot overflow.

use rayon::prelude::*;

use crate::characters::{factorial, CharacterTable};
use crate::error::{Error, Result};
use crate::partitions::Partition;

/// A triple of partitions of a common `n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Triple {
    pub lambda: Partition,
    pub mu: Partition,
    pub nu: Partition,
}

impl Triple {
    pub fn new(lambda: Partition, mu: Partition, nu: Partition) -> Result<Self> {
        let n = lambda.n();
        for other in [&mu, &nu] {
            if other.n() != n {
                return Err(Error::SizeMismatch { expected: n, found: other.n() });
            }
        }
        Ok(Self { lambda, mu, nu })
    }

    pub fn n(&self) -> usize {
        self.lambda.n()
    }
}

impl std::fmt::Display for Triple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.lambda, self.mu, self.nu)
    }
}

/// `|d_λ − d_μ| ≤ d_ν ≤ d_λ + d_μ`, necessary for a nonzero coefficient.
pub fn depth_filter(lambda: &Partition, mu: &Partition, nu: &Partition) -> bool {
    depths_pass(lambda.depth(), mu.depth(), nu.depth())
}

#[inline]
pub fn depths_pass(dl: usize, dm: usize, dn: usize) -> bool {
    dl.abs_diff(dm) <= dn && dn <= dl + dm
}

fn table_index(table: &CharacterTable, l: &Partition) -> Result<usize> {
    table
        .index_of(l)
        .ok_or_else(|| Error::SizeMismatch { expected: table.n(), found: l.n() })
}

/// `g(λ,μ,ν)` computed exactly from `table`.
pub fn kron(lambda: &Partition, mu: &Partition, nu: &Partition, table: &CharacterTable) -> Result<u64> {
    let i = table_index(table, lambda)?;
    let j = table_index(table, mu)?;
    let k = table_index(table, nu)?;
    let weights = pair_weights(table, i, j);
    finish(table, dot(&weights, table.row(k)), || format!("({lambda}, {mu}, {nu})"))
}

/// 0 if `g(λ,μ,ν) = 0`, else 1.
pub fn label(lambda: &Partition, mu: &Partition, nu: &Partition, table: &CharacterTable) -> Result<u8> {
    Ok(u8::from(kron(lambda, mu, nu, table)? != 0))
}

/// `|C_ρ| χ_{λ_i}(ρ) χ_{μ_j}(ρ)` for every class `ρ`.
fn pair_weights(table: &CharacterTable, i: usize, j: usize) -> Vec<i128> {
    let (a, b) = (table.row(i), table.row(j));
    table
        .class_sizes()
        .iter()
        .zip(a.iter().zip(b))
        .map(|(&c, (&x, &y))| c as i128 * x as i128 * y as i128)
        .collect()
}

#[inline]
fn dot(weights: &[i128], row: &[i64]) -> i128 {
    weights.iter().zip(row).map(|(&w, &x)| w * x as i128).sum()
}

fn finish(table: &CharacterTable, sum: i128, describe: impl Fn() -> String) -> Result<u64> {
    let nfact = factorial(table.n());
    if sum < 0 {
        return Err(Error::KroneckerCorruption { triple: describe(), reason: format!("negative character sum {sum}") });
    }
    if sum % nfact != 0 {
        return Err(Error::KroneckerCorruption {
            triple: describe(),
            reason: format!("character sum {sum} not divisible by {nfact}"),
        });
    }
    u64::try_from(sum / nfact).map_err(|_| Error::KroneckerCorruption {
        triple: describe(),
        reason: "coefficient exceeds u64".into(),
    })
}

/// Every coefficient `g(λ_i, μ_j, ν_k)` for `i, j, k < p(n)`, stored densely
/// with `k` fastest. Each `(i, j)` pair reuses one weight vector across all
/// `ν`, so the cost per coefficient is a single length-`p(n)` dot product.
#[derive(Clone, Debug)]
pub struct KroneckerCube {
    p: usize,
    values: Vec<u64>,
}

impl KroneckerCube {
    pub fn compute(table: &CharacterTable) -> Result<Self> {
        let p = table.size();
        let parts = table.partitions();
        let slabs: Vec<Vec<u64>> = (0..p)
            .into_par_iter()
            .map(|i| {
                let mut slab = Vec::with_capacity(p * p);
                for j in 0..p {
                    let w = pair_weights(table, i, j);
                    for k in 0..p {
                        let describe = || format!("({}, {}, {})", parts[i], parts[j], parts[k]);
                        slab.push(finish(table, dot(&w, table.row(k)), describe)?);
                    }
                }
                Ok(slab)
            })
            .collect::<Result<_>>()?;
        Ok(Self { p, values: slabs.concat() })
    }

    /// `p(n)`.
    pub fn size(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> u64 {
        self.values[(i * self.p + j) * self.p + k]
    }
}

/// Coefficients for an explicit list of index triples, without materializing
/// the whole cube. Consecutive triples sharing `(i, j)` share a weight vector.
pub fn kron_batch(table: &CharacterTable, triples: &[[u16; 3]]) -> Result<Vec<u64>> {
    let parts = table.partitions();
    let chunks: Vec<Vec<u64>> = triples
        .par_chunks(4096)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len());
            let mut cached: Option<((u16, u16), Vec<i128>)> = None;
            for &[i, j, k] in chunk {
                let w = match &cached {
                    Some((key, w)) if *key == (i, j) => w,
                    _ => {
                        cached = Some(((i, j), pair_weights(table, i as usize, j as usize)));
                        &cached.as_ref().unwrap().1
                    }
                };
                let describe = || format!("({}, {}, {})", parts[i as usize], parts[j as usize], parts[k as usize]);
                out.push(finish(table, dot(w, table.row(k as usize)), describe)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(chunks.concat())
}
