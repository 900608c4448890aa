//! Self-checks over character tables and Kronecker coefficients.
//!
//! Each check reports how many cases it examined and how many violated the
//! property. The bialternant oracle computes characters from the identity
//! `a_δ · p_ρ = Σ_λ χ_λ(ρ) a_{λ+δ}` by direct monomial counting, sharing no
//! code with the border-strip recursion used to build tables.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::characters::{dimension, sign, CharacterTable};
use crate::error::Result;
use crate::kronecker::{depth_filter, kron};
use crate::partitions::Partition;
use crate::seeds::{derive_seed, rng_from, Purpose};

/// Largest `n` the bialternant oracle is run at.
pub const ORACLE_MAX_N: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub n: usize,
    pub cases: u64,
    pub violations: u64,
    /// First violation found, if any.
    pub example: Option<String>,
}

impl CheckOutcome {
    fn new(name: &str, n: usize) -> Self {
        Self { name: name.into(), n, cases: 0, violations: 0, example: None }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.violations += 1;
            if self.example.is_none() {
                self.example = Some(describe());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{status} {:<24} n={:<2} cases={} violations={}", self.name, self.n, self.cases, self.violations)?;
        if let Some(e) = &self.example {
            write!(f, " first: {e}")?;
        }
        Ok(())
    }
}

/// `χ_λ(ρ)` as the coefficient of `x^{λ+δ}` in `a_δ · p_ρ`, with `δ =
/// (ℓ−1, …, 0)` over `ℓ = n` variables. Exponential in `n`.
pub fn bialternant_character(lambda: &Partition, rho: &Partition) -> i64 {
    let n = lambda.n();
    let l = n.max(1);
    let target: Vec<usize> = (0..l).map(|i| lambda.parts().get(i).copied().unwrap_or(0) + (l - 1 - i)).collect();
    let mut total = 0i64;
    let mut perm: Vec<usize> = (0..l).collect();
    // a_δ = Σ_σ sgn(σ) x^{σ·δ}; walk all σ with Heap's algorithm
    let mut c = vec![0usize; l];
    let mut parity = 1i64;
    total += parity * power_sum_coefficient(rho.parts(), residual(&target, &perm, l));
    let mut i = 0;
    while i < l {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            parity = -parity;
            total += parity * power_sum_coefficient(rho.parts(), residual(&target, &perm, l));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    total
}

/// `target − σ·δ`, or `None` if any entry would be negative.
fn residual(target: &[usize], perm: &[usize], l: usize) -> Option<Vec<usize>> {
    target.iter().zip(perm).map(|(&t, &p)| t.checked_sub(l - 1 - p)).collect()
}

/// Coefficient of `x^α` in `p_{ρ_1} ⋯ p_{ρ_k}`: the number of ways to give
/// each part a variable so that the parts on variable `j` sum to `α_j`.
fn power_sum_coefficient(parts: &[usize], alpha: Option<Vec<usize>>) -> i64 {
    fn count(parts: &[usize], rest: &mut [usize]) -> i64 {
        let Some((&r, tail)) = parts.split_first() else {
            return i64::from(rest.iter().all(|&a| a == 0));
        };
        let mut ways = 0;
        for j in 0..rest.len() {
            if rest[j] >= r {
                rest[j] -= r;
                ways += count(tail, rest);
                rest[j] += r;
            }
        }
        ways
    }
    match alpha {
        Some(mut a) if a.iter().sum::<usize>() == parts.iter().sum::<usize>() => count(parts, &mut a),
        _ => 0,
    }
}

/// Every entry of `table` against the bialternant oracle.
pub fn check_bialternant(table: &CharacterTable) -> CheckOutcome {
    let mut out = CheckOutcome::new("bialternant oracle", table.n());
    let parts = table.partitions();
    for (i, lambda) in parts.iter().enumerate() {
        for (j, rho) in parts.iter().enumerate() {
            let want = bialternant_character(lambda, rho);
            let got = table.value(i, j);
            out.record(got == want, || format!("chi_{lambda}({rho}) = {got}, oracle {want}"));
        }
    }
    out
}

pub fn check_orthogonality(table: &CharacterTable) -> CheckOutcome {
    let mut out = CheckOutcome::new("orthogonality", table.n());
    let r = table.verify();
    out.record(r.is_ok(), || r.unwrap_err().to_string());
    out
}

/// Identity-class column against the hook-length formula.
pub fn check_dimensions(table: &CharacterTable) -> CheckOutcome {
    let mut out = CheckOutcome::new("hook-length dimensions", table.n());
    let identity = table.index_of(&Partition::column(table.n())).expect("column shape is a partition");
    for (i, lambda) in table.partitions().iter().enumerate() {
        let got = table.value(i, identity) as i128;
        let want = dimension(lambda);
        out.record(got == want, || format!("dim {lambda}: table {got}, hooks {want}"));
    }
    out
}

/// `χ_{λ'}(ρ) = sgn(ρ) χ_λ(ρ)`.
pub fn check_sign_twist(table: &CharacterTable) -> CheckOutcome {
    let mut out = CheckOutcome::new("sign twist", table.n());
    let parts = table.partitions();
    for (i, lambda) in parts.iter().enumerate() {
        let c = table.index_of(&lambda.conjugate()).expect("conjugate is a partition");
        for (j, rho) in parts.iter().enumerate() {
            let (a, b) = (table.value(c, j), sign(rho) * table.value(i, j));
            out.record(a == b, || format!("{lambda} at {rho}: {a} vs {b}"));
        }
    }
    out
}

fn random_partition<'a>(parts: &'a [Partition], rng: &mut impl Rng) -> &'a Partition {
    &parts[rng.random_range(0..parts.len())]
}

/// `g` is invariant under all six orderings of a triple.
pub fn check_permutation_symmetry(table: &CharacterTable, samples: usize, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("permutation symmetry", table.n());
    let mut rng = rng_from(derive_seed(seed, Purpose::Verify, table.n() as u32));
    let parts = table.partitions();
    for _ in 0..samples {
        let (a, b, c) = (random_partition(parts, &mut rng), random_partition(parts, &mut rng), random_partition(parts, &mut rng));
        let base = kron(a, b, c, table)?;
        let others = [kron(a, c, b, table)?, kron(b, a, c, table)?, kron(b, c, a, table)?, kron(c, a, b, table)?, kron(c, b, a, table)?];
        out.record(others.iter().all(|&g| g == base), || format!("({a}, {b}, {c}): {base} vs {others:?}"));
    }
    Ok(out)
}

/// `Σ_ν g(λ,μ,ν) dim ν = dim λ · dim μ`.
pub fn check_dimension_sum(table: &CharacterTable, samples: usize, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("dimension sum rule", table.n());
    let mut rng = rng_from(derive_seed(seed, Purpose::Verify, 1000 + table.n() as u32));
    let parts = table.partitions();
    for _ in 0..samples {
        let (a, b) = (random_partition(parts, &mut rng), random_partition(parts, &mut rng));
        let mut sum = 0i128;
        for nu in parts {
            sum += kron(a, b, nu, table)? as i128 * dimension(nu);
        }
        let want = dimension(a) * dimension(b);
        out.record(sum == want, || format!("({a}, {b}): {sum} vs {want}"));
    }
    Ok(out)
}

/// Every triple failing the depth filter has `g = 0`.
pub fn check_depth_filter(table: &CharacterTable) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("depth filter", table.n());
    let parts = table.partitions();
    for a in parts {
        for b in parts {
            for c in parts {
                if !depth_filter(a, b, c) {
                    let g = kron(a, b, c, table)?;
                    out.record(g == 0, || format!("({a}, {b}, {c}) fails the filter but g = {g}"));
                }
            }
        }
    }
    Ok(out)
}

/// `g(λ,μ,ν) = g(λ',μ',ν)`.
pub fn check_conjugation(table: &CharacterTable, samples: usize, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("conjugation twist", table.n());
    let mut rng = rng_from(derive_seed(seed, Purpose::Verify, 2000 + table.n() as u32));
    let parts = table.partitions();
    for _ in 0..samples {
        let (a, b, c) = (random_partition(parts, &mut rng), random_partition(parts, &mut rng), random_partition(parts, &mut rng));
        let (x, y) = (kron(a, b, c, table)?, kron(&a.conjugate(), &b.conjugate(), c, table)?);
        out.record(x == y, || format!("({a}, {b}, {c}): {x} vs {y}"));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    /// Exhaustive checks for `n ≤ 8` plus the oracle for `n ≤ 6`.
    Fast,
    /// Table and sampled coefficient checks up to `n = 14`.
    Full,
}

impl Level {
    pub fn default_max_n(self) -> usize {
        match self {
            Level::Fast => 8,
            Level::Full => 14,
        }
    }
}

/// Runs every check for `1 ≤ n ≤ max_n`, calling `report` as each finishes.
pub fn run_suite(level: Level, max_n: usize, seed: u64, mut report: impl FnMut(&CheckOutcome)) -> Result<Vec<CheckOutcome>> {
    let samples = match level {
        Level::Fast => 200,
        Level::Full => 1000,
    };
    let mut all = Vec::new();
    for n in 1..=max_n {
        let table = CharacterTable::build(n)?;
        let mut batch = vec![check_orthogonality(&table), check_dimensions(&table), check_sign_twist(&table)];
        if n <= ORACLE_MAX_N {
            batch.push(check_bialternant(&table));
        }
        if n <= 8 {
            batch.push(check_depth_filter(&table)?);
        }
        if n <= 12 {
            batch.push(check_permutation_symmetry(&table, samples, seed)?);
            batch.push(check_dimension_sum(&table, samples / 10, seed)?);
            batch.push(check_conjugation(&table, samples, seed)?);
        }
        for outcome in batch {
            report(&outcome);
            all.push(outcome);
        }
    }
    Ok(all)
}
