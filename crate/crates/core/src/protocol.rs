//! The ring protocol: circular-shift verification with cheater detection,
//! then blinded reconstruction ending in the two-sided inverse recovery of
//! the secret.
//!
//! A round walks the ring once from its starting participant. All traffic
//! goes through a [`Transport`], so every run leaves a complete transcript.

use rand::Rng;

use crate::algebra::{
    freivalds_verify, mat_bin_vec_mul, mat_inverse_scaled, mat_mul, mat_vec_mul, rng_from_seed,
    sample_invertible_matrix, sample_matrix, Matrix, Scalar, Seed, Vector,
};
use crate::dealer::{Bulletin, Share, DEFAULT_ENTRY_BOUND};
use crate::error::{usage, Error, Result};
use crate::transport::{
    Endpoint, Envelope, ParticipantId, Payload, Transcript, Transport, Visibility,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Idle,
    Verifying,
    Reconstructing,
    Done,
}

/// Last value a participant received from its predecessor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pending {
    Vector(Vector),
    Matrix(Matrix),
}

#[derive(Clone, Debug)]
pub struct ParticipantState {
    pub share: Share,
    shadow: Matrix,
    pub phase: Phase,
    pub pending: Option<Pending>,
    /// Set only on the starter of a reconstruction round.
    pub x_blind: Option<Matrix>,
    pub recovered: Option<Matrix>,
    /// `(round start, verdict)` for every verification verdict heard.
    pub verdicts: Vec<(ParticipantId, bool)>,
}

impl ParticipantState {
    /// Resolves the share's index against the public set.
    pub fn new(share: Share, bulletin: &Bulletin) -> Result<Self> {
        let shadow = bulletin
            .matrices
            .get(share.matrix_index)
            .ok_or_else(|| {
                usage(format!(
                    "{} points at matrix {} but the public set has {}",
                    share.participant, share.matrix_index, bulletin.k
                ))
            })?
            .clone();
        if share.u.dim() != bulletin.r {
            return Err(Error::DimensionMismatch {
                expected: bulletin.r,
                found: share.u.dim(),
            });
        }
        if share.ring.len() != bulletin.n || !share.ring.contains(&share.participant) {
            return Err(usage(format!("{} holds an inconsistent ring", share.participant)));
        }
        Ok(ParticipantState {
            share,
            shadow,
            phase: Phase::Idle,
            pending: None,
            x_blind: None,
            recovered: None,
            verdicts: Vec::new(),
        })
    }

    pub fn id(&self) -> ParticipantId {
        self.share.participant
    }

    pub fn shadow(&self) -> &Matrix {
        &self.shadow
    }

    /// Most recent verdict heard for rounds starting at `start`.
    pub fn verdict_for(&self, start: ParticipantId) -> Option<bool> {
        self.verdicts
            .iter()
            .rev()
            .find(|(s, _)| *s == start)
            .map(|&(_, v)| v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoundKind {
    Verification,
    Reconstruction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundPlan {
    pub kind: RoundKind,
    pub start: ParticipantId,
    /// `start, start+1, …` with wraparound; each participant exactly once.
    pub order: Vec<ParticipantId>,
}

impl RoundPlan {
    pub fn new(kind: RoundKind, start: ParticipantId, n: usize) -> Result<Self> {
        if start.0 == 0 || start.0 > n {
            return Err(usage(format!("start position {} outside 1..={n}", start.0)));
        }
        let order = std::iter::successors(Some(start), |p| Some(p.successor(n)))
            .take(n)
            .collect();
        Ok(RoundPlan { kind, start, order })
    }

    pub fn last(&self) -> ParticipantId {
        *self.order.last().expect("ring is non-empty")
    }
}

/// A participant that substitutes `forged` for its true shadow.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheaterSpec {
    pub position: ParticipantId,
    pub forged: Matrix,
}

impl CheaterSpec {
    pub fn new(position: ParticipantId, forged: Matrix, true_shadow: &Matrix) -> Result<Self> {
        if forged.dim() != true_shadow.dim() {
            return Err(Error::DimensionMismatch {
                expected: true_shadow.dim(),
                found: forged.dim(),
            });
        }
        if &forged == true_shadow {
            return Err(usage("a forged shadow must differ from the true one"));
        }
        Ok(CheaterSpec { position, forged })
    }

    /// Uniformly random forgery over `0..entry_bound`, redrawn until it
    /// differs from the true shadow.
    pub fn random<R: Rng + ?Sized>(
        position: ParticipantId,
        true_shadow: &Matrix,
        entry_bound: u64,
        rng: &mut R,
    ) -> Result<Self> {
        loop {
            let forged = sample_matrix(true_shadow.dim(), entry_bound, rng)?;
            if &forged != true_shadow {
                return Ok(CheaterSpec { position, forged });
            }
        }
    }
}

fn check_round(
    plan: &RoundPlan,
    kind: RoundKind,
    states: &[ParticipantState],
    bulletin: &Bulletin,
    transport: &Transport,
) -> Result<()> {
    if plan.kind != kind {
        return Err(usage(format!("expected a {kind:?} plan, got {:?}", plan.kind)));
    }
    let n = bulletin.n;
    if states.len() != n || plan.order.len() != n || transport.participants() != n {
        return Err(usage(format!("round expects {n} participants")));
    }
    for (j, s) in states.iter().enumerate() {
        if s.id() != ParticipantId(j + 1) {
            return Err(usage("participant states must be ordered by ring position"));
        }
    }
    Ok(())
}

/// Takes the first envelope for `me` sent by `from` whose payload satisfies
/// `pick`. Everything else pending in the inbox is consumed as seen.
fn take_from<T>(
    transport: &mut Transport,
    me: ParticipantId,
    from: ParticipantId,
    pick: impl Fn(Payload) -> Option<T>,
) -> Result<T> {
    let mut found = None;
    for env in transport.drain(me) {
        if found.is_none() && env.from == Endpoint::Participant(from) {
            found = pick(env.payload);
        }
    }
    found.ok_or_else(|| Error::Protocol(format!("{me} expected a message from {from}")))
}

/// Broadcasts an abort and converts the failure into a protocol error.
fn abort(transport: &mut Transport, who: ParticipantId, err: Error) -> Error {
    let reason = err.to_string();
    // The abort itself cannot fail: `who` is a validated ring member.
    let _ = transport.broadcast(who.into(), Payload::Abort(reason.clone()));
    Error::Protocol(format!("{who} aborted: {reason}"))
}

/// Runs one verification round.
///
/// The starter multiplies its shadow by its private check vector, each
/// successor left-multiplies by its own shadow and forwards, and the last
/// participant compares the result with the published vector for this start
/// and broadcasts the verdict.
pub fn run_verification(
    plan: &RoundPlan,
    states: &mut [ParticipantState],
    bulletin: &Bulletin,
    cheater: Option<&CheaterSpec>,
    transport: &mut Transport,
) -> Result<bool> {
    check_round(plan, RoundKind::Verification, states, bulletin, transport)?;
    let effective = |s: &ParticipantState| match cheater {
        Some(c) if c.position == s.id() => c.forged.clone(),
        _ => s.shadow.clone(),
    };
    for s in states.iter_mut() {
        s.phase = Phase::Verifying;
        s.pending = None;
    }

    let start = plan.start;
    let first = &states[start.index()];
    let mut value = mat_bin_vec_mul(&effective(first), &first.share.u)
        .map_err(|e| abort(transport, start, e))?;
    for pair in plan.order.windows(2) {
        let (prev, next) = (pair[0], pair[1]);
        transport.send(prev.into(), next, Visibility::Public, Payload::ChainVector(value))?;
        let received = take_from(transport, next, prev, |p| match p {
            Payload::ChainVector(v) => Some(v),
            _ => None,
        })?;
        let state = &mut states[next.index()];
        state.pending = Some(Pending::Vector(received.clone()));
        value = mat_vec_mul(&effective(state), &received).map_err(|e| abort(transport, next, e))?;
    }

    let verdict = &value == bulletin.u_prime_for(start);
    transport.broadcast(plan.last().into(), Payload::Verdict(verdict))?;
    for s in states.iter_mut() {
        for env in transport.drain(s.id()) {
            if let Payload::Verdict(v) = env.payload {
                s.verdicts.push((start, v));
            }
        }
        s.phase = Phase::Idle;
    }
    Ok(verdict)
}

/// Runs one reconstruction round with a freshly sampled blinding matrix.
pub fn run_reconstruction<R: Rng + ?Sized>(
    plan: &RoundPlan,
    states: &mut [ParticipantState],
    bulletin: &mut Bulletin,
    transport: &mut Transport,
    blind_bound: u64,
    rng: &mut R,
) -> Result<Matrix> {
    check_round(plan, RoundKind::Reconstruction, states, bulletin, transport)?;
    let x = sample_invertible_matrix(bulletin.r, blind_bound, rng)?;
    run_reconstruction_with_blind(plan, states, bulletin, transport, x)
}

/// Reconstruction with a caller-chosen invertible blinding matrix `x`.
///
/// The starter broadcasts `shadow · x`; each successor broadcasts its shadow
/// times what it received. The last participant hands its product `B` back
/// to the starter, who takes `C` (the reveal made by ring position `n`) from
/// the public log and recovers `(C·x⁻¹)·(B·C⁻¹)`.
pub fn run_reconstruction_with_blind(
    plan: &RoundPlan,
    states: &mut [ParticipantState],
    bulletin: &mut Bulletin,
    transport: &mut Transport,
    x: Matrix,
) -> Result<Matrix> {
    check_round(plan, RoundKind::Reconstruction, states, bulletin, transport)?;
    let start = plan.start;
    if states[start.index()].verdict_for(start) != Some(true) {
        return Err(Error::Protocol(format!(
            "verification starting at {start} has not passed"
        )));
    }
    let round_begin = transport.next_step();
    for s in states.iter_mut() {
        s.phase = Phase::Reconstructing;
        s.pending = None;
    }

    let starter = &mut states[start.index()];
    let mut value = mat_mul(&starter.shadow, &x).map_err(|e| abort(transport, start, e))?;
    starter.x_blind = Some(x);
    transport.broadcast(start.into(), Payload::Reveal(value.clone()))?;
    for pair in plan.order.windows(2) {
        let (prev, next) = (pair[0], pair[1]);
        let received = take_from(transport, next, prev, |p| match p {
            Payload::Reveal(m) => Some(m),
            _ => None,
        })?;
        let state = &mut states[next.index()];
        value = mat_mul(&state.shadow, &received).map_err(|e| abort(transport, next, e))?;
        state.pending = Some(Pending::Matrix(received));
        transport.broadcast(next.into(), Payload::Reveal(value.clone()))?;
    }

    let last = plan.last();
    let b = if last == start {
        value
    } else {
        transport.send(last.into(), start, Visibility::Public, Payload::Handback(value))?;
        take_from(transport, start, last, |p| match p {
            Payload::Handback(m) => Some(m),
            _ => None,
        })?
    };

    let tail = ParticipantId(bulletin.n);
    let c = transport
        .since(round_begin)
        .find_map(|e| match &e.payload {
            Payload::Reveal(m) if e.from == Endpoint::Participant(tail) => Some(m.clone()),
            _ => None,
        })
        .ok_or_else(|| Error::Protocol(format!("no reveal from {tail} in this round")))?;

    let starter = &mut states[start.index()];
    let x = starter.x_blind.as_ref().expect("blinding matrix set above");
    let recovered = recover_secret(&b, &c, x)?;
    starter.recovered = Some(recovered.clone());
    transport.record_local(start, Payload::Recovered(recovered.clone()))?;

    for s in states.iter_mut() {
        transport.drain(s.id());
        s.phase = Phase::Done;
    }
    bulletin.reveals.extend(
        transport
            .since(round_begin)
            .filter(|e| e.visibility == Visibility::Public)
            .cloned(),
    );
    Ok(recovered)
}

/// `(c·x⁻¹)·(b·c⁻¹)`. With `b = R_i·x` and `c = A_{σ(n)}···A_{σ(i)}·x`
/// this is the canonical secret; an honest result is always integral.
pub fn recover_secret(b: &Matrix, c: &Matrix, x: &Matrix) -> Result<Matrix> {
    let (x_inv, dx) = mat_inverse_scaled(x)?;
    let (c_inv, dc) = mat_inverse_scaled(c)?;
    let left = mat_mul(c, &x_inv)?;
    let right = mat_mul(b, &c_inv)?;
    let scaled = mat_mul(&left, &right)?;
    let d = Scalar::from_integer(dx * dc);
    let secret = Matrix::from_fn(scaled.dim(), |i, j| {
        Scalar::from(scaled.get(i, j).as_rational() / d.as_rational())
    });
    if !secret.is_integer() {
        return Err(Error::IntegrityFailure(
            "recovered matrix has non-integer entries".into(),
        ));
    }
    Ok(secret)
}

/// One reconstruction round as seen in a transcript.
#[derive(Clone, Debug)]
pub struct RevealRound<'a> {
    pub reveals: Vec<&'a Envelope>,
    pub handback: Option<&'a Envelope>,
}

/// Splits the public reveal broadcasts of a transcript into rounds of `n`
/// and pairs each with its hand-back. The final group may be short if a
/// round was cut off.
pub fn reveal_rounds<'a>(envelopes: &[&'a Envelope], n: usize) -> Vec<RevealRound<'a>> {
    let mut rounds: Vec<RevealRound<'a>> = Vec::new();
    for env in envelopes {
        match env.payload {
            Payload::Reveal(_) if env.to == Endpoint::Broadcast => {
                match rounds.last_mut() {
                    Some(r) if r.reveals.len() < n && r.handback.is_none() => r.reveals.push(env),
                    _ => rounds.push(RevealRound {
                        reveals: vec![env],
                        handback: None,
                    }),
                }
            }
            Payload::Handback(_) => {
                if let Some(r) = rounds.last_mut() {
                    if r.handback.is_none() {
                        r.handback = Some(env);
                    }
                }
            }
            _ => {}
        }
    }
    rounds
}

/// Audits the public side of every reconstruction round in `transcript`.
///
/// The shadows are undisclosed, so a consecutive pair of reveals
/// `(V_j, V_{j+1})` is accepted when some matrix `S` of the public set
/// passes a Freivalds check of `S · V_j == V_{j+1}` with `t` iterations.
/// The senders must walk the ring in order and the hand-back must equal the
/// final reveal. Returns the conjunction of all checks.
pub fn freivalds_audit(transcript: &Transcript, bulletin: &Bulletin, t: u32, seed: Seed) -> bool {
    let mut rng = rng_from_seed(seed);
    let n = bulletin.n;
    let view = transcript.eavesdropper_view();
    reveal_rounds(&view, n).iter().all(|round| {
        if round.reveals.len() != n {
            return false;
        }
        let senders_in_ring_order = round.reveals.windows(2).all(|w| match (w[0].from, w[1].from) {
            (Endpoint::Participant(a), Endpoint::Participant(b)) => a.successor(n) == b,
            _ => false,
        });
        if !senders_in_ring_order {
            return false;
        }
        let matrices: Vec<&Matrix> = round
            .reveals
            .iter()
            .filter_map(|e| e.payload.as_matrix())
            .collect();
        if let Some(hb) = round.handback {
            if hb.payload.as_matrix() != matrices.last().copied() {
                return false;
            }
        }
        matrices.windows(2).all(|w| {
            bulletin.matrices.iter().any(|s| {
                let sub_seed: Seed = rng.gen();
                freivalds_verify(s, w[0], w[1], t, sub_seed).unwrap_or(false)
            })
        })
    })
}

/// A simulated ring: public bulletin, participant states and the message
/// fabric connecting them.
#[derive(Debug)]
pub struct Session {
    pub bulletin: Bulletin,
    pub states: Vec<ParticipantState>,
    pub transport: Transport,
    pub blind_bound: u64,
}

impl Session {
    pub fn new(bulletin: Bulletin, shares: Vec<Share>) -> Result<Self> {
        Self::resume(bulletin, shares, Transcript::default())
    }

    /// Like [`Session::new`] but appends to an existing transcript.
    pub fn resume(bulletin: Bulletin, mut shares: Vec<Share>, transcript: Transcript) -> Result<Self> {
        shares.sort_by_key(|s| s.participant);
        if shares.len() != bulletin.n {
            return Err(usage(format!(
                "expected {} shares, got {}",
                bulletin.n,
                shares.len()
            )));
        }
        let states = shares
            .into_iter()
            .enumerate()
            .map(|(j, share)| {
                if share.participant != ParticipantId(j + 1) {
                    return Err(usage(format!("missing share for P{}", j + 1)));
                }
                ParticipantState::new(share, &bulletin)
            })
            .collect::<Result<Vec<_>>>()?;
        let transport = Transport::resume(bulletin.n, transcript);
        Ok(Session {
            bulletin,
            states,
            transport,
            blind_bound: DEFAULT_ENTRY_BOUND,
        })
    }

    pub fn n(&self) -> usize {
        self.bulletin.n
    }

    pub fn verify(&mut self, start: ParticipantId, cheater: Option<&CheaterSpec>) -> Result<bool> {
        let plan = RoundPlan::new(RoundKind::Verification, start, self.n())?;
        run_verification(&plan, &mut self.states, &self.bulletin, cheater, &mut self.transport)
    }

    pub fn reconstruct<R: Rng + ?Sized>(&mut self, start: ParticipantId, rng: &mut R) -> Result<Matrix> {
        let plan = RoundPlan::new(RoundKind::Reconstruction, start, self.n())?;
        run_reconstruction(
            &plan,
            &mut self.states,
            &mut self.bulletin,
            &mut self.transport,
            self.blind_bound,
            rng,
        )
    }

    pub fn reconstruct_with_blind(&mut self, start: ParticipantId, x: Matrix) -> Result<Matrix> {
        let plan = RoundPlan::new(RoundKind::Reconstruction, start, self.n())?;
        run_reconstruction_with_blind(&plan, &mut self.states, &mut self.bulletin, &mut self.transport, x)
    }

    pub fn transcript(&self) -> Transcript {
        self.transport.transcript()
    }
}
