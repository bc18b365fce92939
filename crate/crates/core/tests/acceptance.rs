//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;

use matshare::algebra::{rng_from_seed, sample_matrix, Matrix, Scalar};
use matshare::attack::{
    count_search_space, exhaustive_search, ratio_analysis, CountMode, SearchMode, SearchProblem,
};
use matshare::dealer::{generate_instance, secrecy_rank_check, DealerParams};
use matshare::exec::Execution;
use matshare::protocol::Session;
use matshare::sim::{forgery_trial, freivalds_accept_count, honest_run, honest_sweep};
use matshare::transport::ParticipantId;

type Outcome = Result<String, String>;

// Schoolbook product over big rationals, independent of the library's
// multiplication.
fn naive_mul(a: &Matrix, b: &Matrix) -> Vec<Vec<BigRational>> {
    let r = a.dim();
    (0..r)
        .map(|i| {
            (0..r)
                .map(|j| {
                    let mut acc = BigRational::zero();
                    for l in 0..r {
                        acc += a.get(i, l).as_rational() * b.get(l, j).as_rational();
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn to_matrix(rows: Vec<Vec<BigRational>>) -> Matrix {
    let r = rows.len();
    Matrix::from_fn(r, |i, j| Scalar::from(rows[i][j].clone()))
}

/// `M[σ_n] ··· M[σ_1]` by schoolbook multiplication.
fn oracle_secret(matrices: &[Matrix], sigma: &[usize]) -> Matrix {
    let mut acc = matrices[sigma[0]].clone();
    for &s in &sigma[1..] {
        acc = to_matrix(naive_mul(&matrices[s], &acc));
    }
    acc
}

fn sweep_params() -> Vec<DealerParams> {
    const RS: [usize; 4] = [4, 8, 12, 20];
    let mut rng = rng_from_seed(0xacce_0001);
    (0..200u64)
        .map(|i| {
            let r = RS[i as usize % RS.len()];
            let n = rng.gen_range(2..=8.min(r - 1));
            let k = rng.gen_range(n..=32);
            DealerParams::new(r, k, n, 1000 + i)
        })
        .collect()
}

fn round_trip() -> (Outcome, Outcome) {
    let params = sweep_params();
    let began = Instant::now();
    let outcomes = honest_sweep(params.clone(), 1, Execution::Parallel);
    let elapsed = began.elapsed();

    let mut recoveries = 0;
    let mut integral = 0;
    let mut failures = Vec::new();
    for (p, o) in params.iter().zip(outcomes) {
        let o = match o {
            Ok(o) => o,
            Err(e) => {
                failures.push(format!("seed {}: {e}", p.seed));
                continue;
            }
        };
        let expected = oracle_secret(&o.deal.instance.matrices, &o.deal.instance.sigma);
        for m in o.recovered.iter().flatten() {
            recoveries += 1;
            if m.entries().iter().all(Scalar::is_integer) {
                integral += 1;
            }
            if m != &expected {
                failures.push(format!("seed {}: wrong secret", p.seed));
            }
        }
    }
    let c1 = if failures.is_empty() && elapsed < Duration::from_secs(120) {
        Ok(format!(
            "{} instances, {recoveries} exact recoveries in {:.1}s",
            params.len(),
            elapsed.as_secs_f64()
        ))
    } else {
        Err(format!(
            "{} failures (first: {:?}), {:.1}s",
            failures.len(),
            failures.first(),
            elapsed.as_secs_f64()
        ))
    };
    let c9 = if integral == recoveries && recoveries > 0 {
        Ok(format!("{integral}/{recoveries} recovered matrices have denominator 1"))
    } else {
        Err(format!("{integral}/{recoveries} integral"))
    };
    (c1, c9)
}

fn start_blinding_invariance() -> Outcome {
    let p = DealerParams::new(8, 12, 6, 0xacce_0002);
    let o = honest_run(&p, 77, 10).map_err(|e| e.to_string())?;
    let first = &o.recovered[0][0];
    let all: Vec<&Matrix> = o.recovered.iter().flatten().collect();
    if all.len() == p.n * 10 && all.iter().all(|m| *m == first) && first == &o.deal.instance.secret {
        Ok(format!("{} starts x 10 blinds agree", p.n))
    } else {
        Err("recovered matrices differ".into())
    }
}

fn cheater_detection() -> Outcome {
    let mut rng = rng_from_seed(0xacce_0003);
    let mut rejected = 0;
    for i in 0..100u64 {
        let r = rng.gen_range(4..=10);
        let n = rng.gen_range(2..r.min(9));
        let k = rng.gen_range(n..=16);
        let t = forgery_trial(&DealerParams::new(r, k, n, 3000 + i), 4000 + i)
            .map_err(|e| e.to_string())?;
        if !t.verdict {
            rejected += 1;
        }
    }
    if rejected == 100 {
        Ok("100/100 forgeries rejected".into())
    } else {
        Err(format!("{rejected}/100 forgeries rejected"))
    }
}

fn freivalds_bound() -> Outcome {
    const TRIALS: u64 = 10_000;
    const CASES: u64 = 10;
    let per_case = TRIALS / CASES;
    let mut rng = rng_from_seed(0xacce_0004);
    let (mut true_acc, mut acc1, mut acc10) = (0, 0, 0);
    for case in 0..CASES {
        let r = 6;
        let a = sample_matrix(r, 100, &mut rng).unwrap();
        let b = sample_matrix(r, 100, &mut rng).unwrap();
        let c = to_matrix(naive_mul(&a, &b));
        let (i, j) = (rng.gen_range(0..r), rng.gen_range(0..r));
        let delta = BigInt::from(rng.gen_range(1..=50i64));
        let mut bad = c.clone();
        let v = bad.get(i, j).as_rational() + BigRational::from_integer(delta);
        bad.set(i, j, Scalar::from(v));

        let seeds = case * per_case..(case + 1) * per_case;
        let count = |m: &Matrix, t| {
            freivalds_accept_count(&a, &b, m, t, seeds.clone(), Execution::Parallel).unwrap()
        };
        true_acc += count(&c, 1);
        acc1 += count(&bad, 1);
        acc10 += count(&bad, 10);
    }
    let (rate1, rate10) = (acc1 as f64 / TRIALS as f64, acc10 as f64 / TRIALS as f64);
    let bound10 = 2f64.powi(-10) + 0.003;
    let line = format!(
        "true {true_acc}/{TRIALS}, false-accept t=1 {rate1:.4} (<= 0.515), t=10 {rate10:.5} (<= {bound10:.5})"
    );
    if true_acc == TRIALS && rate1 <= 0.515 && rate10 <= bound10 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn attack_oracle() -> Outcome {
    let deal = generate_instance(&DealerParams::new(4, 6, 3, 0xacce_0005)).map_err(|e| e.to_string())?;
    let inst = &deal.instance;
    let problem = SearchProblem::new(inst.matrices.clone(), 3, inst.secret.clone()).unwrap();
    let began = Instant::now();
    let res = exhaustive_search(&problem, SearchMode::OrderedDistinct, None).map_err(|e| e.to_string())?;
    let elapsed = began.elapsed();
    let multiset = count_search_space(6, 3, CountMode::Multiset);
    let ordered = count_search_space(6, 3, CountMode::OrderedDistinct);
    let ok = res.solutions.contains(&inst.sigma)
        && elapsed < Duration::from_secs(10)
        && res.nodes_explored == 6 * 5 * 4
        && ordered == 120u32.into()
        && multiset == binomial(6 + 3 - 1, 3).into()
        && multiset == 56u32.into();
    let line = format!(
        "sigma found among {} solutions, {} sequences, multiset {multiset}, {:.3}s",
        res.solutions.len(),
        res.nodes_explored,
        elapsed.as_secs_f64()
    );
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

fn secrecy_sanity() -> Outcome {
    let mut max_rank = 0;
    for i in 0..50u64 {
        let n = 2 + (i as usize % 7);
        let deal = generate_instance(&DealerParams::new(20, n + 2, n, 6000 + i)).map_err(|e| e.to_string())?;
        for share in &deal.shares {
            let u_prime = deal.bulletin.u_prime_for(share.participant);
            let rank = secrecy_rank_check(&share.u, u_prime, 20).map_err(|e| e.to_string())?;
            max_rank = max_rank.max(rank);
        }
    }
    if max_rank <= 20 {
        Ok(format!("max rank {max_rank} against 400 unknowns over 50 instances"))
    } else {
        Err(format!("rank {max_rank} exceeds 20"))
    }
}

fn leakage() -> Outcome {
    let mut hits = 0;
    for i in 0..20u64 {
        let n = 2 + (i as usize % 6);
        let deal = generate_instance(&DealerParams::new(n + 2, n + 3, n, 7000 + i)).map_err(|e| e.to_string())?;
        let sigma = deal.instance.sigma.clone();
        let mut session = Session::new(deal.bulletin, deal.shares).map_err(|e| e.to_string())?;
        let start = ParticipantId(1 + (i as usize % n));
        let mut rng = rng_from_seed(8000 + i);
        session.verify(start, None).map_err(|e| e.to_string())?;
        session.reconstruct(start, &mut rng).map_err(|e| e.to_string())?;

        let transcript = session.transcript();
        let report = ratio_analysis(&transcript.eavesdropper_view(), &session.bulletin);
        if report.hits.len() != n - 1 {
            return Err(format!("run {i}: {} hits for n = {n}", report.hits.len()));
        }
        for h in &report.hits {
            if h.matrix_index != Some(sigma[h.position.index()]) {
                return Err(format!("run {i}: wrong index at {}", h.position));
            }
        }
        hits += report.hits.len();
    }
    Ok(format!("20 runs, {hits} shadows identified, 0 mismatches"))
}

fn cli(args: &[&str]) -> i32 {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    matshare::cli::run(std::iter::once("matshare").chain(args.iter().copied()), &mut out, &mut err)
}

fn determinism() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let p = d.path().to_str().unwrap();
        let dealt = cli(&["deal", "-w", p, "--r", "8", "--k", "10", "--n", "4", "--seed", "7"]);
        let ran = cli(&["run", "-w", p, "--start", "2", "--seed", "9"]);
        if (dealt, ran) != (0, 0) {
            return Err(format!("deal exit {dealt}, run exit {ran}"));
        }
    }
    let mut files = vec!["bulletin.json".to_string(), "transcript.json".to_string()];
    files.extend((1..=4).map(|j| format!("shares/P{j}.json")));
    let read = |root: &Path, f: &str| fs::read(root.join(f)).unwrap();
    for f in &files {
        if read(dirs[0].path(), f) != read(dirs[1].path(), f) {
            return Err(format!("{f} differs"));
        }
    }
    Ok(format!("{} files byte-identical", files.len()))
}

fn main() {
    let (c1, c9) = round_trip();
    let results = [
        ("1 round-trip correctness", c1),
        ("2 start/blinding invariance", start_blinding_invariance()),
        ("3 cheater detection", cheater_detection()),
        ("4 freivalds bound", freivalds_bound()),
        ("5 attack oracle", attack_oracle()),
        ("6 secrecy sanity", secrecy_sanity()),
        ("7 leakage demonstration", leakage()),
        ("8 determinism", determinism()),
        ("9 integer closure", c9),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("acceptance: {}/{} passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
