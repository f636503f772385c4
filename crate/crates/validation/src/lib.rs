//! Seeded instance generators and corpus fixtures for the integration
//! tests and the acceptance suite.

use countersmt::discrete::{Backend, SolverBackend};
use countersmt::formula::{self, Cmp, Formula, MeasuredFormula, Term, Theory, VarDecl};
use countersmt::solver::{probe, SolverConfig};
use countersmt::{rat, Rat};
use rand::Rng;

pub const CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus");

pub fn corpus(name: &str) -> String {
    std::fs::read_to_string(format!("{CORPUS}/{name}")).unwrap_or_else(|e| panic!("corpus/{name}: {e}"))
}

pub fn problem(name: &str) -> MeasuredFormula {
    formula::parse_problem(&corpus(name)).unwrap()
}

/// A solver backend if the configured solver starts.
pub fn solver() -> Option<SolverBackend> {
    let cfg = SolverConfig::resolve(None).ok()?;
    probe(&cfg)?;
    Some(SolverBackend::new(cfg))
}

pub fn as_backend(b: &SolverBackend) -> &dyn Backend {
    b
}

fn ceil_log2(n: u64) -> u32 {
    64 - (n.max(1) - 1).leading_zeros()
}

/// Integer variables whose domains use at most `max_bits` bits in total.
fn int_vars<R: Rng>(rng: &mut R, prefix: &str, max_bits: u32) -> Vec<VarDecl> {
    let mut out = Vec::new();
    let mut used = 0;
    while out.len() < 3 {
        let width = rng.gen_range(1..=4u32);
        if used + width > max_bits {
            break;
        }
        let size = rng.gen_range((1u64 << (width - 1)) + 1..=(1u64 << width)).max(2);
        if used + ceil_log2(size) > max_bits {
            break;
        }
        used += ceil_log2(size);
        let lo = rng.gen_range(-3..=3i64);
        out.push(VarDecl::int(format!("{prefix}{}", out.len()), lo, lo + size as i64 - 1));
    }
    if out.is_empty() {
        out.push(VarDecl::int(format!("{prefix}0"), 0, 1));
    }
    out
}

fn linear<R: Rng>(rng: &mut R, vars: &[VarDecl]) -> Formula {
    let mut sum: Vec<Term> = vars
        .iter()
        .filter_map(|d| {
            let c = rng.gen_range(-3..=3i64);
            (c != 0).then(|| Term::Mul(vec![Term::int(c), Term::var(&d.name)]))
        })
        .collect();
    if sum.is_empty() {
        sum.push(Term::var(&vars[0].name));
    }
    let cmp = [Cmp::Le, Cmp::Lt, Cmp::Ge, Cmp::Gt, Cmp::Eq, Cmp::Ne][rng.gen_range(0..6)];
    Formula::atom(cmp, Term::Add(sum), Term::int(rng.gen_range(-6..=6)))
}

fn tree<R: Rng>(rng: &mut R, vars: &[VarDecl], depth: u32) -> Formula {
    if depth == 0 || rng.gen_bool(0.35) {
        return linear(rng, vars);
    }
    let kids = (0..rng.gen_range(2..=3)).map(|_| tree(rng, vars, depth - 1)).collect();
    match rng.gen_range(0..5) {
        0 | 1 => Formula::And(kids),
        2 | 3 => Formula::Or(kids),
        _ => Formula::not(Formula::And(kids)),
    }
}

/// A random bounded-integer formula with at most `max_bits` free domain
/// bits and sometimes one existential variable.
pub fn random_ia<R: Rng>(rng: &mut R, max_bits: u32) -> MeasuredFormula {
    let free = int_vars(rng, "x", max_bits);
    let bound = if rng.gen_bool(0.4) {
        vec![VarDecl::int("e", rng.gen_range(-2..=0), rng.gen_range(1..=3))]
    } else {
        vec![]
    };
    let all: Vec<VarDecl> = free.iter().chain(&bound).cloned().collect();
    let body = tree(rng, &all, 3);
    MeasuredFormula::new(Theory::Ia, free, bound, body).unwrap()
}

/// A random quantifier-free formula over `k` reals on `[0, 1]` with
/// between one and `max_atoms` distinct linear atoms.
pub fn random_ra<R: Rng>(rng: &mut R, k: usize, max_atoms: usize) -> MeasuredFormula {
    let free: Vec<VarDecl> = (0..k).map(|i| VarDecl::real(format!("u{i}"), rat::int(0), rat::int(1))).collect();
    let n = rng.gen_range(1..=max_atoms);
    let atoms: Vec<Formula> = (0..n)
        .map(|_| {
            let mut sum = Vec::new();
            for d in &free {
                let c = rng.gen_range(-4..=4i64);
                if c != 0 {
                    sum.push(Term::Mul(vec![Term::int(c), Term::var(&d.name)]));
                }
            }
            if sum.is_empty() {
                sum.push(Term::var(&free[0].name));
            }
            let c: Rat = rat::frac(rng.gen_range(-8..=16), 8);
            let cmp = [Cmp::Le, Cmp::Lt, Cmp::Ge, Cmp::Gt][rng.gen_range(0..4)];
            Formula::atom(cmp, Term::Add(sum), Term::Const(c))
        })
        .collect();
    let body = if atoms.len() == 1 {
        atoms.into_iter().next().unwrap()
    } else if rng.gen_bool(0.5) {
        Formula::And(atoms)
    } else {
        let mut it = atoms.into_iter();
        let first = it.next().unwrap();
        Formula::Or(vec![first, Formula::And(it.collect())])
    };
    MeasuredFormula::new(Theory::Ra, free, vec![], body).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use countersmt::continuous::count_atoms;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bits(f: &MeasuredFormula) -> u32 {
        f.free
            .iter()
            .map(|d| ceil_log2(d.domain_size().unwrap().try_into().unwrap()))
            .sum()
    }

    #[test]
    fn ia_respects_bit_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for max in [1, 4, 12] {
            for _ in 0..50 {
                let f = random_ia(&mut rng, max);
                assert!(bits(&f) <= max.max(1), "{:?}", f.free);
                assert!(f.validate().is_ok());
            }
        }
    }

    #[test]
    fn ra_atom_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in 1..=2 {
            for _ in 0..50 {
                let f = random_ra(&mut rng, k, 4);
                assert_eq!(f.free.len(), k);
                assert!((1..=4).contains(&count_atoms(&f)));
            }
        }
    }

    #[test]
    fn generators_are_seeded() {
        let a = random_ia(&mut ChaCha8Rng::seed_from_u64(9), 10);
        let b = random_ia(&mut ChaCha8Rng::seed_from_u64(9), 10);
        assert_eq!(a, b);
    }

    #[test]
    fn corpus_files_parse() {
        for name in ["example1.prob", "example2.prob", "montyhall_acc.prob", "montyhall_term.prob"] {
            problem(name);
        }
    }
}
