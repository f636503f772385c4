//! Three-valued evaluation over partial assignments, using interval
//! enclosures for unassigned numeric variables. Written separately from
//! `Formula::eval` so the two can check each other.

use std::collections::HashMap;

use num_traits::Zero;

use crate::formula::{Cmp, Formula, Term};
use crate::rat::Rat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tri {
    True,
    False,
    Unknown,
}

impl Tri {
    fn from(b: bool) -> Tri {
        if b {
            Tri::True
        } else {
            Tri::False
        }
    }

    fn not(self) -> Tri {
        match self {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Unknown => Tri::Unknown,
        }
    }
}

/// What is known about a variable: its value, or the range it ranges over.
#[derive(Debug, Clone)]
pub enum Slot {
    Val(Rat),
    Range(Rat, Rat),
}

pub type Env = HashMap<String, Slot>;

#[derive(Debug, Clone)]
struct Iv {
    lo: Rat,
    hi: Rat,
}

impl Iv {
    fn point(v: Rat) -> Iv {
        Iv { lo: v.clone(), hi: v }
    }
}

fn term(t: &Term, env: &Env) -> Option<Iv> {
    Some(match t {
        Term::Const(c) => Iv::point(c.clone()),
        Term::Var(v) => match env.get(v)? {
            Slot::Val(x) => Iv::point(x.clone()),
            Slot::Range(a, b) => Iv { lo: a.clone(), hi: b.clone() },
        },
        Term::Add(ts) => {
            let mut acc = Iv::point(Rat::zero());
            for s in ts {
                let i = term(s, env)?;
                acc = Iv {
                    lo: acc.lo + i.lo,
                    hi: acc.hi + i.hi,
                };
            }
            acc
        }
        Term::Mul(ts) => {
            let mut acc = Iv::point(Rat::from_integer(1.into()));
            for s in ts {
                let i = term(s, env)?;
                let ps = [&acc.lo * &i.lo, &acc.lo * &i.hi, &acc.hi * &i.lo, &acc.hi * &i.hi];
                let lo = ps.iter().min().unwrap().clone();
                let hi = ps.iter().max().unwrap().clone();
                acc = Iv { lo, hi };
            }
            acc
        }
        Term::Neg(s) => {
            let i = term(s, env)?;
            Iv { lo: -i.hi, hi: -i.lo }
        }
        Term::Ite(c, a, b) => match formula(c, env)? {
            Tri::True => term(a, env)?,
            Tri::False => term(b, env)?,
            Tri::Unknown => {
                let x = term(a, env)?;
                let y = term(b, env)?;
                Iv {
                    lo: x.lo.min(y.lo),
                    hi: x.hi.max(y.hi),
                }
            }
        },
    })
}

fn compare(c: Cmp, l: &Iv, r: &Iv) -> Tri {
    let point = l.lo == l.hi && r.lo == r.hi;
    match c {
        Cmp::Le => {
            if l.hi <= r.lo {
                Tri::True
            } else if l.lo > r.hi {
                Tri::False
            } else {
                Tri::Unknown
            }
        }
        Cmp::Lt => {
            if l.hi < r.lo {
                Tri::True
            } else if l.lo >= r.hi {
                Tri::False
            } else {
                Tri::Unknown
            }
        }
        Cmp::Ge => compare(Cmp::Le, r, l),
        Cmp::Gt => compare(Cmp::Lt, r, l),
        Cmp::Eq => {
            if point {
                Tri::from(l.lo == r.lo)
            } else if l.hi < r.lo || r.hi < l.lo {
                Tri::False
            } else {
                Tri::Unknown
            }
        }
        Cmp::Ne => compare(Cmp::Eq, l, r).not(),
    }
}

/// `None` if a variable is missing from `env`.
pub fn formula(f: &Formula, env: &Env) -> Option<Tri> {
    Some(match f {
        Formula::True => Tri::True,
        Formula::False => Tri::False,
        Formula::Bool(b) => match env.get(b)? {
            Slot::Val(v) => Tri::from(!v.is_zero()),
            Slot::Range(..) => Tri::Unknown,
        },
        Formula::Atom(c, l, r) => compare(*c, &term(l, env)?, &term(r, env)?),
        Formula::Not(g) => formula(g, env)?.not(),
        Formula::And(fs) => {
            let mut out = Tri::True;
            for g in fs {
                match formula(g, env)? {
                    Tri::False => return Some(Tri::False),
                    Tri::Unknown => out = Tri::Unknown,
                    Tri::True => {}
                }
            }
            out
        }
        Formula::Or(fs) => {
            let mut out = Tri::False;
            for g in fs {
                match formula(g, env)? {
                    Tri::True => return Some(Tri::True),
                    Tri::Unknown => out = Tri::Unknown,
                    Tri::False => {}
                }
            }
            out
        }
        Formula::Implies(a, b) => {
            let a = formula(a, env)?;
            let b = formula(b, env)?;
            match (a, b) {
                (Tri::False, _) | (_, Tri::True) => Tri::True,
                (Tri::True, Tri::False) => Tri::False,
                _ => Tri::Unknown,
            }
        }
        Formula::Xor(fs) => {
            let mut acc = false;
            for g in fs {
                match formula(g, env)? {
                    Tri::True => acc = !acc,
                    Tri::False => {}
                    Tri::Unknown => return Some(Tri::Unknown),
                }
            }
            Tri::from(acc)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;

    #[test]
    fn ranges_decide_atoms() {
        let mut env = Env::new();
        env.insert("x".into(), Slot::Range(rat::int(0), rat::int(3)));
        let le = Formula::atom(Cmp::Le, Term::var("x"), Term::int(5));
        assert_eq!(formula(&le, &env), Some(Tri::True));
        let lt = Formula::atom(Cmp::Lt, Term::var("x"), Term::int(2));
        assert_eq!(formula(&lt, &env), Some(Tri::Unknown));
        env.insert("x".into(), Slot::Val(rat::int(2)));
        assert_eq!(formula(&lt, &env), Some(Tri::False));
        assert_eq!(formula(&Formula::Bool("b".into()), &env), None);
    }

    #[test]
    fn kleene_connectives() {
        let mut env = Env::new();
        env.insert("b".into(), Slot::Range(rat::int(0), rat::int(1)));
        let b = Formula::Bool("b".into());
        assert_eq!(formula(&Formula::Or(vec![b.clone(), Formula::True]), &env), Some(Tri::True));
        assert_eq!(formula(&Formula::And(vec![b.clone(), Formula::False]), &env), Some(Tri::False));
        assert_eq!(formula(&Formula::implies(Formula::False, b.clone()), &env), Some(Tri::True));
        assert_eq!(formula(&Formula::Xor(vec![b, Formula::True]), &env), Some(Tri::Unknown));
    }
}
