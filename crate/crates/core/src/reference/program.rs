//! Program values without formulas: scenarios are enumerated and run
//! through the interpreter. A single real sample is handled by cutting its
//! range at every point where some predicate along some path can change.

use std::collections::{BTreeSet, HashMap};

use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::formula::{Assignment, Formula, Sort, Term, VarDecl};
use crate::ppl::{Program, Stmt};
use crate::rat::{self, Rat};

use super::{odometer, space_size, OracleBudget};

/// Scenario measures of a program: counts when every sample is discrete,
/// lengths when one sample is real.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Measures {
    /// Some run accepts.
    pub acc: Rat,
    /// Some run terminates.
    pub term: Rat,
    /// Some run terminates and none rejects.
    pub sure: Rat,
}

pub fn exact_measures(p: &Program, budget: &OracleBudget) -> Result<Measures> {
    let decls = p.sample_decls();
    let reals: Vec<&VarDecl> = decls.iter().filter(|d| d.sort == Sort::Real).collect();
    if reals.len() > 1 {
        return Err(Error::Domain("exact value supports at most one real sample".into()));
    }
    let discrete: Vec<&VarDecl> = decls.iter().filter(|d| d.sort != Sort::Real).collect();
    space_size(&discrete, budget)?;
    let mut m = Measures {
        acc: Rat::zero(),
        term: Rat::zero(),
        sure: Rat::zero(),
    };
    let mut add = |w: &Assignment, weight: &Rat| -> Result<()> {
        let (a, r) = p.reaches(w)?;
        if a {
            m.acc += weight;
        }
        if a || r {
            m.term += weight;
        }
        if a && !r {
            m.sure += weight;
        }
        Ok(())
    };
    odometer(&discrete, |point| {
        let mut w: Assignment = discrete.iter().zip(point).map(|(d, v)| (d.name.clone(), v.clone())).collect();
        match reals.first() {
            None => add(&w, &rat::int(1))?,
            Some(u) => {
                let cuts = breakpoints(p, &w, u)?;
                for pair in cuts.windows(2) {
                    w.insert(u.name.clone(), (&pair[0] + &pair[1]) / rat::int(2));
                    add(&w, &(&pair[1] - &pair[0]))?;
                }
            }
        }
        Ok(true)
    })?;
    Ok(m)
}

/// Exact upper value: some run accepts, given termination.
pub fn exact_value(p: &Program, budget: &OracleBudget) -> Result<Rat> {
    let m = exact_measures(p, budget)?;
    if m.term.is_zero() {
        return Err(Error::ZeroTermination);
    }
    Ok(m.acc / m.term)
}

/// Exact lower value: no run rejects, given termination.
pub fn exact_lower_value(p: &Program, budget: &OracleBudget) -> Result<Rat> {
    let m = exact_measures(p, budget)?;
    if m.term.is_zero() {
        return Err(Error::ZeroTermination);
    }
    Ok(m.sure / m.term)
}

/// Sorted cut points of the real sample's range, endpoints included.
fn breakpoints(p: &Program, fixed: &Assignment, u: &VarDecl) -> Result<Vec<Rat>> {
    let mut cuts: BTreeSet<Rat> = [u.lower.clone(), u.upper.clone()].into();
    let mut stack: Vec<(usize, HashMap<String, Term>)> = vec![(p.init, HashMap::new())];
    while let Some((v, env)) = stack.pop() {
        for e in p.out_edges(v) {
            let mut next = env.clone();
            match &e.stmt {
                Stmt::Skip => {}
                Stmt::Assign(x, t) => {
                    next.insert(x.clone(), t.subst(&env));
                }
                Stmt::Sample { var, .. } => {
                    let t = match fixed.get(var) {
                        Some(c) => Term::Const(c.clone()),
                        None => Term::var(var.clone()),
                    };
                    next.insert(var.clone(), t);
                }
                Stmt::Assume(f) => {
                    let f = f.subst(&env);
                    for atom in f.atoms() {
                        if let Formula::Atom(_, l, r) = atom {
                            let diff = Term::Add(vec![l.clone(), Term::Neg(Box::new(r.clone()))]);
                            let (coeffs, c0) = diff
                                .linearize()
                                .ok_or_else(|| Error::NonLinear(crate::formula::formula_text(atom)))?;
                            if let Some(a) = coeffs.get(&u.name).filter(|a| !a.is_zero()) {
                                let root = -c0 / a;
                                if root > u.lower && root < u.upper {
                                    cuts.insert(root);
                                }
                            }
                        }
                    }
                }
            }
            stack.push((e.to, next));
        }
    }
    Ok(cuts.into_iter().collect())
}

/// Monte Carlo estimate of the upper value with a 95% normal half-width,
/// from `n` uniformly drawn scenarios.
pub fn monte_carlo_value(p: &Program, n: u64, seed: u64) -> Result<(f64, f64)> {
    let decls = p.sample_decls();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut acc, mut term) = (0u64, 0u64);
    for _ in 0..n {
        let mut w = Assignment::new();
        for d in &decls {
            let v = match d.sort {
                Sort::Real => {
                    let x = rat::to_f64(&d.lower) + rng.gen::<f64>() * rat::to_f64(&(&d.upper - &d.lower));
                    rat::from_f64(x).ok_or_else(|| Error::Domain(format!("cannot sample `{}`", d.name)))?
                }
                _ => {
                    let lo = rat::floor(&d.lower).to_i64();
                    let hi = rat::floor(&d.upper).to_i64();
                    let (Some(lo), Some(hi)) = (lo, hi) else {
                        return Err(Error::Domain(format!("range of `{}` too wide to sample", d.name)));
                    };
                    rat::int(rng.gen_range(lo..=hi))
                }
            };
            w.insert(d.name.clone(), v);
        }
        let (a, t) = p.interpret(&w)?;
        acc += a as u64;
        term += t as u64;
    }
    if term == 0 {
        return Err(Error::ZeroTermHits);
    }
    let est = acc as f64 / term as f64;
    let half = 1.96 * (est * (1.0 - est) / term as f64).sqrt();
    Ok((est, half))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppl::parse_program;
    use crate::ppl::tests::MONTY_HALL;

    #[test]
    fn monty_hall_is_two_thirds() {
        let p = parse_program(MONTY_HALL).unwrap();
        assert_eq!(exact_value(&p, &OracleBudget::default()).unwrap(), rat::frac(2, 3));
        let (est, half) = monte_carlo_value(&p, 3000, 1).unwrap();
        assert!((est - 2.0 / 3.0).abs() < half.max(0.03));
    }

    #[test]
    fn bernoulli_encoding() {
        for (lit, n, d) in [("0", 0, 1), ("0.25", 1, 4), ("0.5", 1, 2), ("0.75", 3, 4), ("1", 1, 1)] {
            let p = parse_program(&format!(
                "u ~ uniform(0.0, 1.0); if (u <= {lit}) {{ x := 0; }} else {{ x := 1; }}
                 if (x = 0) {{ accept; }} else {{ reject; }}"
            ))
            .unwrap();
            assert_eq!(exact_value(&p, &OracleBudget::default()).unwrap(), rat::frac(n, d), "p = {lit}");
        }
    }

    #[test]
    fn zero_termination_and_hits() {
        let p = parse_program("x ~ uniform(0, 3); assume(x > 9); accept;").unwrap();
        assert!(matches!(exact_value(&p, &OracleBudget::default()), Err(Error::ZeroTermination)));
        assert!(matches!(monte_carlo_value(&p, 100, 0), Err(Error::ZeroTermHits)));
    }

    #[test]
    fn two_real_samples_unsupported() {
        let p = parse_program("x ~ uniform(0.0, 1.0); y ~ uniform(0.0, 1.0); accept;").unwrap();
        assert!(matches!(exact_value(&p, &OracleBudget::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn lower_value_of_host_choice() {
        let p = parse_program("x ~ uniform(0, 1); choice { accept; } or { reject; }").unwrap();
        let b = OracleBudget::default();
        assert_eq!(exact_value(&p, &b).unwrap(), rat::int(1));
        assert_eq!(exact_lower_value(&p, &b).unwrap(), rat::int(0));
        assert_eq!(exact_value(&p.dualize(), &b).unwrap(), rat::int(1));
    }

    #[test]
    fn real_and_discrete() {
        // Pr[u < k / 4] averaged over k in {1, 2, 3}.
        let p = parse_program("k ~ uniform(1, 3); u ~ uniform(0.0, 1.0); if (4 * u < k) { accept; } else { reject; }")
            .unwrap();
        assert_eq!(exact_value(&p, &OracleBudget::default()).unwrap(), rat::frac(1, 2));
    }
}
