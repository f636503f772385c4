//! Approximate model counting for bounded integer formulas: binary
//! encoding of the free variables, q-fold replication, and majority votes
//! over random XOR hash cells.

use std::sync::atomic::{AtomicUsize, Ordering};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formula::{Cmp, Formula, MeasuredFormula, Sort, Term, Theory, VarDecl};
use crate::hashing;
use crate::params::{self, ParameterSet};
use crate::rat::{self, Rat};
use crate::reference::{BruteEnumerator, OracleBudget};
use crate::solver::{Enumerator, Query, SolverConfig, SolverSession};

/// `ψ(x, x') = φ(x) ∧ t(x, x')` with the bits `x'` as its free variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Binarization {
    /// Free variables are the bits; the original variables are bound.
    pub psi: MeasuredFormula,
    pub bit_vars: Vec<String>,
    pub bits_per_copy: u64,
    /// `(variable, lower bound, width)` for every original free variable.
    pub offsets: Vec<(String, BigInt, u64)>,
}

/// Bits needed for `n` distinct values, at least one.
pub fn width(n: &BigInt) -> u64 {
    if *n <= BigInt::one() {
        1
    } else {
        (n - 1u32).bits()
    }
}

pub fn bit_name(var: &str, j: u64) -> String {
    format!("{var}%{j}")
}

pub fn binarize(f: &MeasuredFormula) -> Result<Binarization> {
    let mut bits = Vec::new();
    let mut bit_decls = Vec::new();
    let mut links = Vec::new();
    let mut offsets = Vec::new();
    let mut bound = Vec::new();
    for d in &f.free {
        match d.sort {
            Sort::Real => return Err(Error::NonIntegerFreeVar(d.name.clone())),
            Sort::Bool => {
                bits.push(d.name.clone());
                bit_decls.push(d.clone());
                offsets.push((d.name.clone(), BigInt::from(0), 1));
            }
            Sort::Int => {
                let lo = rat::floor(&d.lower);
                let n = d.domain_size().expect("integer domain");
                let w = width(&n);
                let mut sum = vec![Term::Const(Rat::from_integer(lo.clone()))];
                for j in 0..w {
                    let b = bit_name(&d.name, j);
                    let weight = Rat::from_integer(BigInt::one() << j);
                    sum.push(Term::Ite(
                        Box::new(Formula::Bool(b.clone())),
                        Box::new(Term::Const(weight)),
                        Box::new(Term::int(0)),
                    ));
                    bit_decls.push(VarDecl::boolean(b.clone()));
                    bits.push(b);
                }
                links.push(Formula::atom(Cmp::Eq, Term::var(&d.name), Term::Add(sum)));
                links.push(Formula::atom(Cmp::Le, Term::var(&d.name), Term::Const(d.upper.clone())));
                offsets.push((d.name.clone(), lo, w));
                bound.push(d.clone());
            }
        }
    }
    bound.extend(f.bound.iter().cloned());
    let body = Formula::and_all(std::iter::once(f.body.clone()).chain(links));
    let bits_per_copy = bits.len() as u64;
    let psi = MeasuredFormula::new(Theory::Ia, bit_decls, bound, body)?;
    Ok(Binarization {
        psi,
        bit_vars: bits,
        bits_per_copy,
        offsets,
    })
}

fn copy_name(v: &str, c: u64) -> String {
    format!("{v}^{c}")
}

/// `q` variable-disjoint copies of `ψ`, conjoined. Returns the product
/// and its bit variables (copy-major order).
pub fn replicate(bz: &Binarization, q: u64) -> Result<(MeasuredFormula, Vec<String>)> {
    if q == 0 {
        return Err(Error::InvalidParameter("q must be at least 1".into()));
    }
    if q == 1 {
        return Ok((bz.psi.clone(), bz.bit_vars.clone()));
    }
    let mut free = Vec::new();
    let mut bound = Vec::new();
    let mut bodies = Vec::new();
    let mut bits = Vec::new();
    for c in 1..=q {
        let rn = |v: &str| copy_name(v, c);
        free.extend(bz.psi.free.iter().map(|d| d.renamed(rn(&d.name))));
        bound.extend(bz.psi.bound.iter().map(|d| d.renamed(rn(&d.name))));
        bodies.push(bz.psi.body.rename(&rn));
        bits.extend(bz.bit_vars.iter().map(|b| rn(b)));
    }
    let psi_q = MeasuredFormula::new(Theory::Ia, free, bound, Formula::And(bodies))?;
    Ok((psi_q, bits))
}

/// Source of enumerators; one per concurrent worker.
pub trait Backend: Sync {
    fn open(&self) -> Result<Box<dyn Enumerator + Send>>;
}

pub struct SolverBackend {
    pub cfg: SolverConfig,
    sessions: AtomicUsize,
}

impl SolverBackend {
    pub fn new(cfg: SolverConfig) -> Self {
        SolverBackend {
            cfg,
            sessions: AtomicUsize::new(0),
        }
    }
}

impl Backend for SolverBackend {
    fn open(&self) -> Result<Box<dyn Enumerator + Send>> {
        let n = self.sessions.fetch_add(1, Ordering::Relaxed);
        let mut cfg = self.cfg.clone();
        cfg.label = format!("{}-{n}", cfg.label);
        Ok(Box::new(SolverSession::open(&cfg)?))
    }
}

/// Exhaustive enumeration instead of a solver.
pub struct BruteBackend(pub OracleBudget);

impl Backend for BruteBackend {
    fn open(&self) -> Result<Box<dyn Enumerator + Send>> {
        Ok(Box::new(BruteEnumerator::new(self.0)))
    }
}

/// Whether `psi_q ∧ h(bits) = 0^m` has at least `a` models, for a fresh
/// random `h`.
#[allow(clippy::too_many_arguments)]
pub fn estimate(
    psi_q: &MeasuredFormula,
    bits: &[String],
    m: u64,
    a: u64,
    rng: &mut ChaCha8Rng,
    e: &mut dyn Enumerator,
    presolve: bool,
) -> Result<bool> {
    if m < 1 || m as usize > bits.len() {
        return Err(Error::InvalidParameter(format!("m = {m} outside 1..={}", bits.len())));
    }
    let h = hashing::pick_hash(bits.len(), m as usize, rng);
    let extra = if presolve {
        h.constraint_presolved(bits)
    } else {
        h.constraint(bits)
    };
    let decls: Vec<VarDecl> = psi_q.decls().cloned().collect();
    e.at_least_with(&Query::new(&decls, &psi_q.body, &extra, bits), a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Majority {
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VoteRow {
    pub m: u64,
    pub sat_votes: u64,
    pub unsat_votes: u64,
    pub majority: Majority,
}

pub type VoteTable = Vec<VoteRow>;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum EstimateKind {
    Exact,
    Multiplicative { eps: f64 },
    Additive { abs_err: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountEstimate {
    pub value: f64,
    pub kind: EstimateKind,
    pub confidence: f64,
    /// Dimension used in the return value, if hashing ran.
    pub m: Option<i64>,
    pub votes: VoteTable,
    /// Estimate calls made (one per vote).
    pub queries: u64,
    pub solver_calls: u64,
    pub pset: Option<ParameterSet>,
}

impl CountEstimate {
    fn exact(n: u64, pset: Option<ParameterSet>, solver_calls: u64) -> Self {
        CountEstimate {
            value: n as f64,
            kind: EstimateKind::Exact,
            confidence: 1.0,
            m: None,
            votes: Vec::new(),
            queries: 0,
            solver_calls,
            pset,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CountOptions {
    pub eps: Rat,
    pub alpha: Rat,
    pub a: u64,
    pub seed: u64,
    /// Largest enumeration bound allowed on the exact path.
    pub max_enum: u64,
    pub presolve: bool,
    /// Concurrent estimate workers.
    pub threads: usize,
}

impl Default for CountOptions {
    fn default() -> Self {
        CountOptions {
            eps: rat::frac(1, 2),
            alpha: rat::frac(1, 10),
            a: 20,
            seed: 0,
            max_enum: 1 << 16,
            presolve: false,
            threads: 1,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent RNG stream for one vote.
pub fn vote_rng(seed: u64, m: u64, vote: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(splitmix(splitmix(seed) ^ m) ^ vote))
}

fn exact_models(bz: &Binarization, e: &mut dyn Enumerator, bound: u64) -> Result<u64> {
    let decls: Vec<VarDecl> = bz.psi.decls().cloned().collect();
    let q = Query::new(&decls, &bz.psi.body, &Formula::True, &bz.bit_vars);
    Ok(e.count_up_to_with(&q, bound)?.count)
}

/// Upper bound on the number of models: the size of the free space.
fn space_size(f: &MeasuredFormula) -> Option<u64> {
    f.free
        .iter()
        .try_fold(1u64, |acc, d| acc.checked_mul(d.domain_size()?.to_u64()?))
}

pub fn approx_count_int(f: &MeasuredFormula, opts: &CountOptions, backend: &dyn Backend) -> Result<CountEstimate> {
    let bz = binarize(f)?;
    let mut main = backend.open()?;
    if bz.bits_per_copy == 0 {
        let n = exact_models(&bz, main.as_mut(), 1)?;
        return Ok(CountEstimate::exact(n, None, main.calls()));
    }
    let pset = match params::derive(opts.a, &opts.eps, &opts.alpha, bz.bits_per_copy) {
        Ok(p) => p,
        Err(Error::DegenerateInstance { .. }) => {
            // Too few bits to hash: count everything.
            let all = space_size(f).unwrap_or(u64::MAX);
            let bound = all.saturating_add(1);
            if bound > opts.max_enum {
                return Err(Error::EnumerationCap {
                    needed: bound,
                    cap: opts.max_enum,
                });
            }
            let n = exact_models(&bz, main.as_mut(), bound)?;
            let p = params::derive_unchecked(opts.a, &opts.eps, &opts.alpha, bz.bits_per_copy)?;
            return Ok(CountEstimate::exact(n, Some(p), main.calls()));
        }
        Err(e) => return Err(e),
    };
    params::check_enum_cap(&pset, opts.max_enum)?;
    let e = exact_models(&bz, main.as_mut(), pset.p + 1)?;
    if e <= pset.p {
        return Ok(CountEstimate::exact(e, Some(pset), main.calls()));
    }
    let (psi_q, bits) = replicate(&bz, pset.q)?;
    let mut workers: Vec<Box<dyn Enumerator + Send>> = vec![main];
    for _ in 1..opts.threads.max(1) {
        workers.push(backend.open()?);
    }
    let mut votes = Vec::new();
    let mut queries = 0;
    let mut chosen = pset.m_star;
    for m in 1..=pset.m_star as u64 {
        let row = vote_round(&psi_q, &bits, m, &pset, opts, &mut workers)?;
        queries += row.sat_votes + row.unsat_votes;
        let no = row.majority == Majority::No;
        votes.push(row);
        if no {
            chosen = m as i64;
            break;
        }
    }
    let calls = workers.iter().map(|w| w.calls()).sum();
    Ok(CountEstimate {
        value: params::return_value(opts.a, chosen, pset.q),
        kind: EstimateKind::Multiplicative {
            eps: rat::to_f64(&opts.eps),
        },
        confidence: 1.0 - rat::to_f64(&opts.alpha),
        m: Some(chosen),
        votes,
        queries,
        solver_calls: calls,
        pset: Some(pset),
    })
}

/// Up to `r` votes at dimension `m`, stopping once the majority is fixed.
/// Votes are consumed in index order, so concurrent and sequential runs
/// record the same table.
fn vote_round(
    psi_q: &MeasuredFormula,
    bits: &[String],
    m: u64,
    pset: &ParameterSet,
    opts: &CountOptions,
    workers: &mut [Box<dyn Enumerator + Send>],
) -> Result<VoteRow> {
    let r = pset.r;
    let (mut yes, mut no) = (0u64, 0u64);
    let mut next = 0u64;
    // "yes" overall needs c > r/2, i.e. 2c > r.
    let decided = |yes: u64, no: u64| 2 * yes > r || 2 * (r - no) <= r;
    while next < r && !decided(yes, no) {
        let batch: Vec<u64> = (next..r).take(workers.len()).collect();
        let results: Vec<Result<bool>> = if batch.len() == 1 {
            let mut rng = vote_rng(opts.seed, m, batch[0]);
            vec![estimate(psi_q, bits, m, opts.a, &mut rng, workers[0].as_mut(), opts.presolve)]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = workers
                    .iter_mut()
                    .zip(&batch)
                    .map(|(w, &v)| {
                        s.spawn(move || {
                            let mut rng = vote_rng(opts.seed, m, v);
                            estimate(psi_q, bits, m, opts.a, &mut rng, w.as_mut(), opts.presolve)
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("vote worker panicked")).collect()
            })
        };
        for res in results {
            if decided(yes, no) {
                break;
            }
            if res? {
                yes += 1;
            } else {
                no += 1;
            }
            next += 1;
        }
    }
    Ok(VoteRow {
        m,
        sat_votes: yes,
        unsat_votes: no,
        majority: if 2 * yes > r { Majority::Yes } else { Majority::No },
    })
}

/// The unique integer in `[v/(1+ε), v·(1+ε)]`, if there is exactly one.
pub fn snap_to_integer(est: &CountEstimate) -> Option<u64> {
    match est.kind {
        EstimateKind::Exact => Some(est.value.round() as u64),
        EstimateKind::Multiplicative { eps } => {
            let lo = (est.value / (1.0 + eps)).ceil().max(0.0);
            let hi = (est.value * (1.0 + eps)).floor();
            (lo == hi).then_some(lo as u64)
        }
        EstimateKind::Additive { .. } => None,
    }
}
