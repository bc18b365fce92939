//! Seeded batch experiments over many independent protocol runs.
//!
//! Each run is a pure function of its parameters and seeds, so a batch can
//! be fanned out with any [`Execution`] policy and still produce identical
//! results.

use rand::Rng;

use crate::algebra::{freivalds_verify, rng_from_seed, Matrix, Seed};
use crate::dealer::{generate_instance, Deal, DealerParams};
use crate::error::Result;
use crate::exec::Execution;
use crate::protocol::{CheaterSpec, Session};
use crate::transport::{ParticipantId, Transcript};

/// Everything one honest simulation produced.
#[derive(Clone, Debug)]
pub struct HonestOutcome {
    pub params: DealerParams,
    pub deal: Deal,
    /// `recovered[i - 1][d]`: the secret recovered from start `i` with the
    /// `d`-th blinding draw.
    pub recovered: Vec<Vec<Matrix>>,
    pub transcript: Transcript,
}

impl HonestOutcome {
    /// True when every recovery equals the dealer's secret exactly.
    pub fn all_correct(&self) -> bool {
        self.recovered
            .iter()
            .flatten()
            .all(|m| m == &self.deal.instance.secret)
    }

    pub fn all_integer(&self) -> bool {
        self.recovered.iter().flatten().all(Matrix::is_integer)
    }
}

/// Deals an instance and, for every start position, verifies and then
/// reconstructs `draws_per_start` times with fresh blinding matrices.
pub fn honest_run(params: &DealerParams, blind_seed: Seed, draws_per_start: usize) -> Result<HonestOutcome> {
    let deal = generate_instance(params)?;
    let mut session = Session::new(deal.bulletin.clone(), deal.shares.clone())?;
    let mut rng = rng_from_seed(blind_seed);
    let mut recovered = Vec::with_capacity(params.n);
    for i in 1..=params.n {
        let start = ParticipantId(i);
        let mut per_start = Vec::with_capacity(draws_per_start);
        for _ in 0..draws_per_start {
            if !session.verify(start, None)? {
                return Err(crate::Error::Protocol(format!(
                    "honest verification from {start} failed"
                )));
            }
            per_start.push(session.reconstruct(start, &mut rng)?);
        }
        recovered.push(per_start);
    }
    Ok(HonestOutcome {
        params: params.clone(),
        deal,
        recovered,
        transcript: session.transport.into_transcript(),
    })
}

/// Runs [`honest_run`] for each parameter set, seeding blinding from the
/// dealer seed.
pub fn honest_sweep(
    params: Vec<DealerParams>,
    draws_per_start: usize,
    execution: Execution,
) -> Vec<Result<HonestOutcome>> {
    execution.map(params, |p| honest_run(&p, p.seed ^ 0x5eed_b11d, draws_per_start))
}

/// Result of one forgery trial.
#[derive(Clone, Debug)]
pub struct ForgeryTrial {
    pub position: ParticipantId,
    pub start: ParticipantId,
    pub verdict: bool,
}

/// Deals an instance and runs one verification in which a uniformly random
/// participant substitutes a uniformly random forged shadow, starting from
/// a uniformly random ring position.
pub fn forgery_trial(params: &DealerParams, seed: Seed) -> Result<ForgeryTrial> {
    let deal = generate_instance(params)?;
    let mut rng = rng_from_seed(seed);
    let position = ParticipantId(rng.gen_range(1..=params.n));
    let start = ParticipantId(rng.gen_range(1..=params.n));
    let cheat = CheaterSpec::random(
        position,
        deal.instance.shadow(position),
        params.entry_bound,
        &mut rng,
    )?;
    let mut session = Session::new(deal.bulletin, deal.shares)?;
    let verdict = session.verify(start, Some(&cheat))?;
    Ok(ForgeryTrial {
        position,
        start,
        verdict,
    })
}

/// Number of seeds in `seeds` for which `freivalds_verify(a, b, c, t, seed)`
/// accepts.
pub fn freivalds_accept_count(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    t: u32,
    seeds: std::ops::Range<Seed>,
    execution: Execution,
) -> Result<u64> {
    let outcomes = execution.map(seeds.collect(), |s| freivalds_verify(a, b, c, t, s));
    let mut accepted = 0;
    for o in outcomes {
        accepted += u64::from(o?);
    }
    Ok(accepted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn honest_run_recovers_from_every_start() {
        let out = honest_run(&DealerParams::new(5, 6, 3, 1), 2, 2).unwrap();
        assert_eq!(out.recovered.len(), 3);
        assert!(out.all_correct());
        assert!(out.all_integer());
    }

    #[test]
    fn sweep_is_policy_independent() {
        let params: Vec<_> = (0..6).map(|s| DealerParams::new(4, 5, 3, s)).collect();
        let seq = honest_sweep(params.clone(), 1, Execution::Sequential);
        let par = honest_sweep(params, 1, Execution::Parallel);
        for (a, b) in seq.iter().zip(&par) {
            let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
            assert_eq!(a.transcript, b.transcript);
            assert_eq!(a.recovered, b.recovered);
        }
    }

    #[test]
    fn forgery_trials_fail_verification() {
        for seed in 0..10 {
            let trial = forgery_trial(&DealerParams::new(5, 7, 4, seed), seed + 100).unwrap();
            assert!(!trial.verdict);
        }
    }
}
