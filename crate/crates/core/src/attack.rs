//! Oracles for the underlying search problem and for protocol leakage.
//!
//! [`exhaustive_search`] finds every ordered selection of `n` matrices of a
//! public set whose product is a target. Sequences follow ring order: the
//! product of `(s_1, …, s_n)` is `M[s_n] ··· M[s_1]`, so the dealer's
//! selection is itself a solution.

use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::algebra::{mat_inverse, mat_mul, Matrix};
use crate::dealer::Bulletin;
use crate::error::{usage, Error, Result};
use crate::exec::Execution;
use crate::protocol::reveal_rounds;
use crate::transport::{Endpoint, Envelope, ParticipantId};

/// Largest search space enumerated without an explicit override.
pub const GUARDRAIL: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    OrderedDistinct,
    OrderedWithRepetition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountMode {
    /// Multisets of size `n`: `C(k + n − 1, n)`.
    Multiset,
    /// `k! / (k − n)!`
    OrderedDistinct,
    /// `kⁿ`
    OrderedWithRepetition,
}

impl From<SearchMode> for CountMode {
    fn from(m: SearchMode) -> Self {
        match m {
            SearchMode::OrderedDistinct => CountMode::OrderedDistinct,
            SearchMode::OrderedWithRepetition => CountMode::OrderedWithRepetition,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchProblem {
    pub matrices: Vec<Matrix>,
    pub n: usize,
    pub target: Matrix,
}

impl SearchProblem {
    pub fn new(matrices: Vec<Matrix>, n: usize, target: Matrix) -> Result<Self> {
        if n == 0 || n > matrices.len() {
            return Err(usage(format!(
                "need 1 <= n <= k (got n = {n}, k = {})",
                matrices.len()
            )));
        }
        let r = target.dim();
        if let Some(bad) = matrices.iter().find(|m| m.dim() != r) {
            return Err(Error::DimensionMismatch {
                expected: r,
                found: bad.dim(),
            });
        }
        Ok(SearchProblem { matrices, n, target })
    }

    pub fn k(&self) -> usize {
        self.matrices.len()
    }

    /// Ring-order product of a candidate sequence.
    pub fn product_of(&self, seq: &[usize]) -> Result<Matrix> {
        let (&first, rest) = seq.split_first().ok_or_else(|| usage("empty sequence"))?;
        rest.iter()
            .try_fold(self.matrices[first].clone(), |acc, &i| mat_mul(&self.matrices[i], &acc))
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    /// Matching sequences in lexicographic order.
    pub solutions: Vec<Vec<usize>>,
    /// Complete sequences whose product was compared with the target.
    pub nodes_explored: u64,
    pub elapsed: Duration,
}

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    pub mode: SearchMode,
    /// Cap on the number of solutions kept (the first ones in lexicographic order).
    pub limit: Option<usize>,
    pub override_guardrail: bool,
    pub execution: Execution,
}

impl SearchOptions {
    pub fn new(mode: SearchMode) -> Self {
        SearchOptions {
            mode,
            limit: None,
            override_guardrail: false,
            execution: Execution::default(),
        }
    }

    pub fn limit(mut self, limit: Option<usize>) -> Self {
        self.limit = limit;
        self
    }

    pub fn override_guardrail(mut self, yes: bool) -> Self {
        self.override_guardrail = yes;
        self
    }

    pub fn execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

/// Exhaustive search with default execution and the guardrail on.
pub fn exhaustive_search(
    problem: &SearchProblem,
    mode: SearchMode,
    limit: Option<usize>,
) -> Result<SearchResult> {
    exhaustive_search_with(problem, &SearchOptions::new(mode).limit(limit))
}

/// Enumerates every sequence of the chosen mode. The work is partitioned by
/// the first index; partitions are merged in order so the result does not
/// depend on the execution policy.
pub fn exhaustive_search_with(problem: &SearchProblem, opts: &SearchOptions) -> Result<SearchResult> {
    check_guardrail(problem.k(), problem.n, opts.mode.into(), opts.override_guardrail)?;
    let began = Instant::now();
    let limit = opts.limit;
    let parts = opts.execution.map_range(problem.k(), |first| {
        let mut walk = Walk {
            problem,
            mode: opts.mode,
            limit,
            prefix: vec![first],
            solutions: Vec::new(),
            explored: 0,
        };
        let acc = problem.matrices[first].clone();
        walk.descend(&acc).map(|()| (walk.solutions, walk.explored))
    });

    let mut solutions = Vec::new();
    let mut nodes_explored = 0;
    for part in parts {
        let (sols, explored) = part?;
        solutions.extend(sols);
        nodes_explored += explored;
    }
    if let Some(limit) = limit {
        solutions.truncate(limit);
    }
    Ok(SearchResult {
        solutions,
        nodes_explored,
        elapsed: began.elapsed(),
    })
}

struct Walk<'a> {
    problem: &'a SearchProblem,
    mode: SearchMode,
    limit: Option<usize>,
    prefix: Vec<usize>,
    solutions: Vec<Vec<usize>>,
    explored: u64,
}

impl Walk<'_> {
    /// `acc` is the ring-order product of `prefix`.
    fn descend(&mut self, acc: &Matrix) -> Result<()> {
        if self.prefix.len() == self.problem.n {
            self.explored += 1;
            let room = self.limit.is_none_or(|l| self.solutions.len() < l);
            if room && acc == &self.problem.target {
                self.solutions.push(self.prefix.clone());
            }
            return Ok(());
        }
        for next in 0..self.problem.k() {
            if self.mode == SearchMode::OrderedDistinct && self.prefix.contains(&next) {
                continue;
            }
            let extended = mat_mul(&self.problem.matrices[next], acc)?;
            self.prefix.push(next);
            self.descend(&extended)?;
            self.prefix.pop();
        }
        Ok(())
    }
}

fn check_guardrail(k: usize, n: usize, mode: CountMode, override_guardrail: bool) -> Result<()> {
    let space = count_search_space(k, n, mode);
    if !override_guardrail && space > BigUint::from(GUARDRAIL) {
        return Err(Error::Guardrail {
            space: space.to_string(),
            multiset: count_search_space(k, n, CountMode::Multiset).to_string(),
            limit: GUARDRAIL,
        });
    }
    Ok(())
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    // Each partial product is itself a binomial coefficient, so the
    // division is exact at every step.
    (0..k).fold(BigUint::one(), |acc, i| acc * (n - i) / (i + 1))
}

/// Size of the search space for `n` picks out of `k` matrices.
pub fn count_search_space(k: usize, n: usize, mode: CountMode) -> BigUint {
    let (k64, n64) = (k as u64, n as u64);
    match mode {
        CountMode::Multiset => {
            if k == 0 {
                return if n == 0 { BigUint::one() } else { BigUint::zero() };
            }
            binomial(k64 + n64 - 1, n64)
        }
        CountMode::OrderedDistinct => {
            if n > k {
                return BigUint::zero();
            }
            (k64 - n64 + 1..=k64).fold(BigUint::one(), |acc, f| acc * f)
        }
        CountMode::OrderedWithRepetition => BigUint::from(k).pow(n as u32),
    }
}

/// Convenience: the count as a `u64` when it fits.
pub fn count_search_space_u64(k: usize, n: usize, mode: CountMode) -> Option<u64> {
    count_search_space(k, n, mode).to_u64()
}

/// A shadow extracted from two consecutive public reveals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatioHit {
    pub position: ParticipantId,
    pub shadow: Matrix,
    /// Index of `shadow` in the public set, if it occurs there.
    pub matrix_index: Option<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct RatioReport {
    pub hits: Vec<RatioHit>,
    /// Positions skipped because the earlier reveal was singular.
    pub gaps: Vec<ParticipantId>,
}

/// What a passive observer extracts from reconstruction broadcasts: for
/// consecutive reveals `V_j`, `V_{j+1}` of one round, `V_{j+1} · V_j⁻¹` is
/// the shadow of the participant that made `V_{j+1}`.
pub fn ratio_analysis(view: &[&Envelope], bulletin: &Bulletin) -> RatioReport {
    let mut report = RatioReport::default();
    for round in reveal_rounds(view, bulletin.n) {
        for pair in round.reveals.windows(2) {
            let (Some(prev), Some(next)) = (pair[0].payload.as_matrix(), pair[1].payload.as_matrix())
            else {
                continue;
            };
            let Endpoint::Participant(position) = pair[1].from else {
                continue;
            };
            let shadow = match mat_inverse(prev).and_then(|inv| mat_mul(next, &inv)) {
                Ok(s) => s,
                Err(_) => {
                    report.gaps.push(position);
                    continue;
                }
            };
            let matrix_index = bulletin.find_matrix(&shadow);
            report.hits.push(RatioHit {
                position,
                shadow,
                matrix_index,
            });
        }
    }
    report
}
