//! Trusted dealer: builds an instance of the bounded matrix representability
//! problem whose hidden ordered product is the secret, and derives the
//! public bulletin and the private shares from it.

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    integer_rank, is_invertible, mat_bin_vec_mul, mat_mul, mat_vec_mul, rng_from_seed,
    sample_check_vector, sample_matrix, BinaryVector, Matrix, Seed, Vector,
    MAX_INVERTIBLE_ATTEMPTS,
};
use crate::error::{usage, Error, Result};
use crate::transport::{Endpoint, Envelope, ParticipantId, Payload, Transport, Visibility};

pub const DEFAULT_ENTRY_BOUND: u64 = 256;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DealerParams {
    /// Matrix dimension.
    pub r: usize,
    /// Size of the public matrix set.
    pub k: usize,
    /// Number of participants.
    pub n: usize,
    /// Entries are drawn uniformly from `0..entry_bound`.
    pub entry_bound: u64,
    pub seed: Seed,
}

impl DealerParams {
    pub fn new(r: usize, k: usize, n: usize, seed: Seed) -> Self {
        DealerParams {
            r,
            k,
            n,
            entry_bound: DEFAULT_ENTRY_BOUND,
            seed,
        }
    }

    pub fn with_entry_bound(mut self, entry_bound: u64) -> Self {
        self.entry_bound = entry_bound;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(usage(format!("n >= 2 required (got n = {})", self.n)));
        }
        if self.n > self.k {
            return Err(usage(format!(
                "n <= k required (got n = {}, k = {})",
                self.n, self.k
            )));
        }
        if self.r <= self.n {
            return Err(usage(format!(
                "r > n required (got r = {}, n = {})",
                self.r, self.n
            )));
        }
        if self.entry_bound < 2 {
            return Err(usage("entry bound >= 2 required"));
        }
        Ok(())
    }
}

/// Dealer-side ground truth. Never published.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub matrices: Vec<Matrix>,
    /// `sigma[j - 1]` is the index in `matrices` of participant `Pj`'s shadow.
    pub sigma: Vec<usize>,
    /// `A_{σ(n)} ··· A_{σ(2)} · A_{σ(1)}`.
    pub secret: Matrix,
}

impl Instance {
    /// Computes the secret as the canonical ordered product of the selection.
    pub fn new(matrices: Vec<Matrix>, sigma: Vec<usize>) -> Result<Self> {
        let Some(&first) = sigma.first() else {
            return Err(usage("empty selection"));
        };
        for (j, &idx) in sigma.iter().enumerate() {
            if idx >= matrices.len() {
                return Err(usage(format!("selection index {idx} out of range")));
            }
            if sigma[..j].contains(&idx) {
                return Err(usage(format!("selection repeats index {idx}")));
            }
        }
        let mut secret = matrices[first].clone();
        for &idx in &sigma[1..] {
            secret = mat_mul(&matrices[idx], &secret)?;
        }
        Ok(Instance {
            matrices,
            sigma,
            secret,
        })
    }

    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    pub fn shadow(&self, p: ParticipantId) -> &Matrix {
        &self.matrices[self.sigma[p.index()]]
    }

    /// The product of all shadows in ring order starting at `start`, i.e.
    /// what the chain `start, start+1, …, start−1` applies to a vector.
    pub fn rotated_product(&self, start: ParticipantId) -> Result<Matrix> {
        let n = self.n();
        let mut p = start;
        let mut acc = self.shadow(p).clone();
        for _ in 1..n {
            p = p.successor(n);
            acc = mat_mul(self.shadow(p), &acc)?;
        }
        Ok(acc)
    }
}

/// A participant's private material.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Share {
    pub participant: ParticipantId,
    pub matrix_index: usize,
    pub ring: Vec<ParticipantId>,
    pub u: BinaryVector,
}

/// Everything public.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bulletin {
    pub r: usize,
    pub k: usize,
    pub n: usize,
    pub matrices: Vec<Matrix>,
    /// `u_prime[j - 1]` is the value the verification chain starting at `Pj`
    /// must reproduce.
    pub u_prime: Vec<Vector>,
    /// Public protocol messages, appended as rounds complete.
    pub reveals: Vec<Envelope>,
}

impl Bulletin {
    pub fn u_prime_for(&self, start: ParticipantId) -> &Vector {
        &self.u_prime[start.index()]
    }

    /// Index of `m` in the public set, if present.
    pub fn find_matrix(&self, m: &Matrix) -> Option<usize> {
        self.matrices.iter().position(|x| x == m)
    }
}

#[derive(Clone, Debug)]
pub struct Deal {
    pub instance: Instance,
    pub bulletin: Bulletin,
    pub shares: Vec<Share>,
}

/// Generates a full deal. Deterministic in `params`.
///
/// The public set must consist of pairwise distinct matrices and every
/// selected shadow must be invertible; otherwise the whole instance is
/// re-drawn, up to [`MAX_INVERTIBLE_ATTEMPTS`] times.
pub fn generate_instance(params: &DealerParams) -> Result<Deal> {
    params.validate()?;
    let mut rng = rng_from_seed(params.seed);

    let mut instance = None;
    for _ in 0..MAX_INVERTIBLE_ATTEMPTS {
        let matrices = (0..params.k)
            .map(|_| sample_matrix(params.r, params.entry_bound, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let mut indices: Vec<usize> = (0..params.k).collect();
        let (chosen, _) = indices.partial_shuffle(&mut rng, params.n);
        let sigma = chosen.to_vec();

        let distinct = (0..matrices.len())
            .all(|i| (i + 1..matrices.len()).all(|j| matrices[i] != matrices[j]));
        if distinct && sigma.iter().all(|&i| is_invertible(&matrices[i])) {
            instance = Some((matrices, sigma));
            break;
        }
    }
    let (matrices, sigma) = instance.ok_or_else(|| {
        Error::GenerationFailure(format!(
            "no valid instance after {MAX_INVERTIBLE_ATTEMPTS} attempts \
             (r = {}, k = {}, entry bound = {})",
            params.r, params.k, params.entry_bound
        ))
    })?;

    let instance = Instance::new(matrices, sigma)?;
    let (us, u_prime) = compute_check_pairs(&instance, &mut rng)?;
    Ok(finish_deal(instance, us, u_prime))
}

/// Builds the bulletin and shares for a known instance and a choice of
/// private check vectors (one per ring position).
pub fn assemble_deal(instance: Instance, us: Vec<BinaryVector>) -> Result<Deal> {
    let n = instance.n();
    if us.len() != n {
        return Err(usage(format!("need {n} check vectors, got {}", us.len())));
    }
    let u_prime = us
        .iter()
        .enumerate()
        .map(|(j, u)| chain_apply(&instance, ParticipantId(j + 1), u))
        .collect::<Result<Vec<_>>>()?;
    Ok(finish_deal(instance, us, u_prime))
}

fn finish_deal(instance: Instance, us: Vec<BinaryVector>, u_prime: Vec<Vector>) -> Deal {
    let n = instance.n();
    let ring: Vec<ParticipantId> = (1..=n).map(ParticipantId).collect();
    let shares = us
        .into_iter()
        .enumerate()
        .map(|(j, u)| Share {
            participant: ParticipantId(j + 1),
            matrix_index: instance.sigma[j],
            ring: ring.clone(),
            u,
        })
        .collect();
    let bulletin = Bulletin {
        r: instance.secret.dim(),
        k: instance.matrices.len(),
        n,
        matrices: instance.matrices.clone(),
        u_prime,
        reveals: Vec::new(),
    };
    Deal {
        instance,
        bulletin,
        shares,
    }
}

/// Draws a private check vector `U_i` per start position and the matching
/// public vector `U'_i = R_i · U_i`, where `R_i` is the rotated product the
/// verification chain starting at `Pi` computes. `R_1` is the secret.
pub fn compute_check_pairs<R: Rng + ?Sized>(
    instance: &Instance,
    rng: &mut R,
) -> Result<(Vec<BinaryVector>, Vec<Vector>)> {
    let n = instance.n();
    let r = instance.secret.dim();
    let mut us = Vec::with_capacity(n);
    let mut u_primes = Vec::with_capacity(n);
    for i in 1..=n {
        let u = sample_check_vector(r, rng)?;
        u_primes.push(chain_apply(instance, ParticipantId(i), &u)?);
        us.push(u);
    }
    Ok((us, u_primes))
}

/// Applies the shadows in ring order from `start` to `u`, one
/// matrix-vector product at a time.
pub fn chain_apply(instance: &Instance, start: ParticipantId, u: &BinaryVector) -> Result<Vector> {
    let n = instance.n();
    let mut p = start;
    let mut v = mat_bin_vec_mul(instance.shadow(p), u)?;
    for _ in 1..n {
        p = p.successor(n);
        v = mat_vec_mul(instance.shadow(p), &v)?;
    }
    Ok(v)
}

/// Rank of the linear system `X · u = u'` in the `r²` unknown entries of
/// `X`. The system has only `r` equations, so the rank never exceeds `r`
/// and the pair pins down at most `r` of the `r²` degrees of freedom.
pub fn secrecy_rank_check(u: &BinaryVector, u_prime: &Vector, r: usize) -> Result<usize> {
    for found in [u.dim(), u_prime.dim()] {
        if found != r {
            return Err(Error::DimensionMismatch { expected: r, found });
        }
    }
    // Row a: Σ_b x[a][b] · u[b] = u'[a]. Unknown x[a][b] sits in column a·r + b;
    // the last column is the right-hand side, scaled to integers.
    let rows: Vec<Vec<BigInt>> = (0..r)
        .map(|a| {
            let rhs = &u_prime.entries()[a];
            let scale = rhs.denom().clone();
            let mut row = vec![BigInt::from(0); r * r + 1];
            for (b, &bit) in u.bits().iter().enumerate() {
                if bit {
                    row[a * r + b] = scale.clone();
                }
            }
            row[r * r] = rhs.numer().clone();
            row
        })
        .collect();
    Ok(integer_rank(&rows))
}

/// Delivers every share over secure dealer channels: the shadow index and
/// the private check vector. The ring layout is fixed and public.
pub fn distribute_shares(shares: &[Share], transport: &mut Transport) -> Result<()> {
    for share in shares {
        transport.send(
            Endpoint::Dealer,
            share.participant,
            Visibility::Secure,
            Payload::ShareIndex(share.matrix_index),
        )?;
        transport.send(
            Endpoint::Dealer,
            share.participant,
            Visibility::Secure,
            Payload::CheckVector(share.u.clone()),
        )?;
    }
    Ok(())
}
