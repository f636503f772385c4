//! Measured-theory formulas: AST, domains, evaluation, the problem file
//! format and SMT-LIB v2 emission.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rat::{self, Rat};
use crate::sexp::{self, Sexp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sort {
    Bool,
    Int,
    Real,
}

impl Sort {
    pub fn name(self) -> &'static str {
        match self {
            Sort::Bool => "bool",
            Sort::Int => "int",
            Sort::Real => "real",
        }
    }

    fn smt(self) -> &'static str {
        match self {
            Sort::Bool => "Bool",
            Sort::Int => "Int",
            Sort::Real => "Real",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Counting,
    Lebesgue,
    UniformWeight(#[serde(with = "rat")] Rat),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub sort: Sort,
    pub lower: Rat,
    pub upper: Rat,
    pub measure: Measure,
}

impl VarDecl {
    pub fn new(name: impl Into<String>, sort: Sort, lower: Rat, upper: Rat, measure: Measure) -> Result<Self> {
        let d = VarDecl {
            name: name.into(),
            sort,
            lower,
            upper,
            measure,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn boolean(name: impl Into<String>) -> Self {
        VarDecl {
            name: name.into(),
            sort: Sort::Bool,
            lower: Rat::zero(),
            upper: Rat::one(),
            measure: Measure::Counting,
        }
    }

    pub fn int(name: impl Into<String>, lower: i64, upper: i64) -> Self {
        VarDecl {
            name: name.into(),
            sort: Sort::Int,
            lower: rat::int(lower),
            upper: rat::int(upper),
            measure: Measure::Counting,
        }
    }

    pub fn int_big(name: impl Into<String>, lower: BigInt, upper: BigInt) -> Self {
        VarDecl {
            name: name.into(),
            sort: Sort::Int,
            lower: Rat::from_integer(lower),
            upper: Rat::from_integer(upper),
            measure: Measure::Counting,
        }
    }

    pub fn real(name: impl Into<String>, lower: Rat, upper: Rat) -> Self {
        VarDecl {
            name: name.into(),
            sort: Sort::Real,
            lower,
            upper,
            measure: Measure::Lebesgue,
        }
    }

    pub fn with_measure(mut self, measure: Measure) -> Self {
        self.measure = measure;
        self
    }

    pub fn renamed(&self, name: impl Into<String>) -> Self {
        VarDecl {
            name: name.into(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.name;
        if self.lower > self.upper {
            return Err(Error::Domain(format!("`{n}`: lower bound exceeds upper bound")));
        }
        match self.sort {
            Sort::Bool => {
                if !self.lower.is_zero() || !self.upper.is_one() {
                    return Err(Error::Domain(format!("`{n}`: boolean domain must be [0, 1]")));
                }
            }
            Sort::Int => {
                if !rat::is_int(&self.lower) || !rat::is_int(&self.upper) {
                    return Err(Error::Domain(format!("`{n}`: integer domain needs integer endpoints")));
                }
            }
            Sort::Real => {}
        }
        match (&self.measure, self.sort) {
            (Measure::Counting, Sort::Real) => {
                Err(Error::Domain(format!("`{n}`: counting measure on a real variable")))
            }
            (Measure::Lebesgue, Sort::Bool | Sort::Int) => {
                Err(Error::Domain(format!("`{n}`: lebesgue measure on a discrete variable")))
            }
            (Measure::UniformWeight(w), _) if !w.is_positive() => {
                Err(Error::Domain(format!("`{n}`: weight must be positive")))
            }
            _ => Ok(()),
        }
    }

    /// Number of points of a discrete domain.
    pub fn domain_size(&self) -> Option<BigInt> {
        match self.sort {
            Sort::Real => None,
            _ => Some(rat::floor(&self.upper) - rat::floor(&self.lower) + 1),
        }
    }

    pub fn contains(&self, v: &Rat) -> bool {
        *v >= self.lower && *v <= self.upper && (self.sort == Sort::Real || rat::is_int(v))
    }

    /// Measure of a single point (discrete) or unit length (real).
    pub fn point_weight(&self) -> Rat {
        match &self.measure {
            Measure::UniformWeight(w) => w.clone(),
            _ => Rat::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theory {
    Ia,
    Ra,
    Iara,
}

impl Theory {
    pub fn name(self) -> &'static str {
        match self {
            Theory::Ia => "ia",
            Theory::Ra => "ra",
            Theory::Iara => "iara",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cmp {
    Le,
    Lt,
    Eq,
    Ge,
    Gt,
    Ne,
}

impl Cmp {
    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Cmp::Le => ord != Greater,
            Cmp::Lt => ord == Less,
            Cmp::Eq => ord == Equal,
            Cmp::Ge => ord != Less,
            Cmp::Gt => ord == Greater,
            Cmp::Ne => ord != Equal,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Lt => "<",
            Cmp::Eq => "=",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
            Cmp::Ne => "distinct",
        }
    }

    fn from_symbol(s: &str) -> Option<Cmp> {
        Some(match s {
            "<=" => Cmp::Le,
            "<" => Cmp::Lt,
            "=" => Cmp::Eq,
            ">=" => Cmp::Ge,
            ">" => Cmp::Gt,
            "distinct" => Cmp::Ne,
            _ => return None,
        })
    }

    pub fn negate(self) -> Cmp {
        match self {
            Cmp::Le => Cmp::Gt,
            Cmp::Lt => Cmp::Ge,
            Cmp::Eq => Cmp::Ne,
            Cmp::Ge => Cmp::Lt,
            Cmp::Gt => Cmp::Le,
            Cmp::Ne => Cmp::Eq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Const(Rat),
    Var(String),
    Add(Vec<Term>),
    Mul(Vec<Term>),
    Neg(Box<Term>),
    Ite(Box<Formula>, Box<Term>, Box<Term>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Bool(String),
    Atom(Cmp, Term, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Xor(Vec<Formula>),
}

impl Term {
    pub fn int(n: i64) -> Term {
        Term::Const(rat::int(n))
    }

    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn is_const(&self) -> bool {
        let mut vars = BTreeSet::new();
        self.collect_vars(&mut vars);
        vars.is_empty()
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Const(_) => {}
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Add(ts) | Term::Mul(ts) => ts.iter().for_each(|t| t.collect_vars(out)),
            Term::Neg(t) => t.collect_vars(out),
            Term::Ite(c, t, e) => {
                c.collect_vars(out);
                t.collect_vars(out);
                e.collect_vars(out);
            }
        }
    }

    pub fn eval(&self, env: &dyn Fn(&str) -> Option<Rat>) -> Result<Rat> {
        Ok(match self {
            Term::Const(c) => c.clone(),
            Term::Var(v) => env(v).ok_or_else(|| Error::MissingVariable(v.clone()))?,
            Term::Add(ts) => {
                let mut acc = Rat::zero();
                for t in ts {
                    acc += t.eval(env)?;
                }
                acc
            }
            Term::Mul(ts) => {
                let mut acc = Rat::one();
                for t in ts {
                    acc *= t.eval(env)?;
                }
                acc
            }
            Term::Neg(t) => -t.eval(env)?,
            Term::Ite(c, t, e) => {
                if c.eval_with(env)? {
                    t.eval(env)?
                } else {
                    e.eval(env)?
                }
            }
        })
    }

    /// Affine form `Σ c_v·v + c0`, or `None` for products of variables and
    /// if-then-else terms.
    pub fn linearize(&self) -> Option<(BTreeMap<String, Rat>, Rat)> {
        match self {
            Term::Const(c) => Some((BTreeMap::new(), c.clone())),
            Term::Var(v) => Some((BTreeMap::from([(v.clone(), Rat::one())]), Rat::zero())),
            Term::Add(ts) => {
                let mut coeffs = BTreeMap::new();
                let mut c0 = Rat::zero();
                for t in ts {
                    let (cs, c) = t.linearize()?;
                    add_coeffs(&mut coeffs, &cs, &Rat::one());
                    c0 += c;
                }
                Some((coeffs, c0))
            }
            Term::Neg(t) => {
                let (cs, c) = t.linearize()?;
                Some((cs.into_iter().map(|(v, k)| (v, -k)).collect(), -c))
            }
            Term::Mul(ts) => {
                let mut coeffs: BTreeMap<String, Rat> = BTreeMap::new();
                let mut c0 = Rat::one();
                let mut seen_var = false;
                for t in ts {
                    let (cs, c) = t.linearize()?;
                    if cs.is_empty() {
                        c0 *= &c;
                        for k in coeffs.values_mut() {
                            *k *= &c;
                        }
                    } else {
                        if seen_var {
                            return None;
                        }
                        seen_var = true;
                        coeffs = cs.into_iter().map(|(v, k)| (v, k * &c0)).collect();
                        c0 *= c;
                    }
                }
                coeffs.retain(|_, k| !k.is_zero());
                Some((coeffs, c0))
            }
            Term::Ite(..) => None,
        }
    }

    pub fn rename(&self, f: &dyn Fn(&str) -> String) -> Term {
        match self {
            Term::Const(c) => Term::Const(c.clone()),
            Term::Var(v) => Term::Var(f(v)),
            Term::Add(ts) => Term::Add(ts.iter().map(|t| t.rename(f)).collect()),
            Term::Mul(ts) => Term::Mul(ts.iter().map(|t| t.rename(f)).collect()),
            Term::Neg(t) => Term::Neg(Box::new(t.rename(f))),
            Term::Ite(c, t, e) => Term::Ite(
                Box::new(c.rename(f)),
                Box::new(t.rename(f)),
                Box::new(e.rename(f)),
            ),
        }
    }

    /// Replace numeric variables by terms.
    pub fn subst(&self, map: &HashMap<String, Term>) -> Term {
        match self {
            Term::Const(_) => self.clone(),
            Term::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Add(ts) => Term::Add(ts.iter().map(|t| t.subst(map)).collect()),
            Term::Mul(ts) => Term::Mul(ts.iter().map(|t| t.subst(map)).collect()),
            Term::Neg(t) => Term::Neg(Box::new(t.subst(map))),
            Term::Ite(c, t, e) => Term::Ite(
                Box::new(c.subst(map)),
                Box::new(t.subst(map)),
                Box::new(e.subst(map)),
            ),
        }
    }

    fn nonlinear(&self) -> bool {
        match self {
            Term::Const(_) | Term::Var(_) => false,
            Term::Add(ts) => ts.iter().any(Term::nonlinear),
            Term::Neg(t) => t.nonlinear(),
            Term::Mul(ts) => {
                ts.iter().filter(|t| !t.is_const()).count() > 1 || ts.iter().any(Term::nonlinear)
            }
            Term::Ite(_, t, e) => t.nonlinear() || e.nonlinear(),
        }
    }

    /// True if the term needs real arithmetic: a real variable or a
    /// non-integral constant.
    fn is_real(&self, sorts: &dyn Fn(&str) -> Option<Sort>) -> bool {
        match self {
            Term::Const(c) => !rat::is_int(c),
            Term::Var(v) => sorts(v) == Some(Sort::Real),
            Term::Add(ts) | Term::Mul(ts) => ts.iter().any(|t| t.is_real(sorts)),
            Term::Neg(t) => t.is_real(sorts),
            Term::Ite(_, t, e) => t.is_real(sorts) || e.is_real(sorts),
        }
    }
}

fn add_coeffs(into: &mut BTreeMap<String, Rat>, from: &BTreeMap<String, Rat>, scale: &Rat) {
    for (v, k) in from {
        let e = into.entry(v.clone()).or_insert_with(Rat::zero);
        *e += k * scale;
        if e.is_zero() {
            into.remove(v);
        }
    }
}

impl Formula {
    pub fn atom(cmp: Cmp, lhs: Term, rhs: Term) -> Formula {
        Formula::Atom(cmp, lhs, rhs)
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    /// Conjunction that drops `true` and collapses singletons.
    pub fn and_all(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut v: Vec<Formula> = parts.into_iter().filter(|f| *f != Formula::True).collect();
        if v.iter().any(|f| *f == Formula::False) {
            return Formula::False;
        }
        match v.len() {
            0 => Formula::True,
            1 => v.pop().unwrap(),
            _ => Formula::And(v),
        }
    }

    pub fn or_all(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut v: Vec<Formula> = parts.into_iter().filter(|f| *f != Formula::False).collect();
        if v.iter().any(|f| *f == Formula::True) {
            return Formula::True;
        }
        match v.len() {
            0 => Formula::False,
            1 => v.pop().unwrap(),
            _ => Formula::Or(v),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Bool(b) => {
                out.insert(b.clone());
            }
            Formula::Atom(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Formula::Not(f) => f.collect_vars(out),
            Formula::And(fs) | Formula::Or(fs) | Formula::Xor(fs) => {
                fs.iter().for_each(|f| f.collect_vars(out))
            }
            Formula::Implies(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    /// Every atomic comparison, in left-to-right order (with repeats).
    pub fn atoms(&self) -> Vec<&Formula> {
        fn go<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
            match f {
                Formula::Atom(_, l, r) => {
                    out.push(f);
                    term_atoms(l, out);
                    term_atoms(r, out);
                }
                Formula::Not(g) => go(g, out),
                Formula::And(fs) | Formula::Or(fs) | Formula::Xor(fs) => fs.iter().for_each(|g| go(g, out)),
                Formula::Implies(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                Formula::True | Formula::False | Formula::Bool(_) => {}
            }
        }
        fn term_atoms<'a>(t: &'a Term, out: &mut Vec<&'a Formula>) {
            match t {
                Term::Ite(c, a, b) => {
                    go(c, out);
                    term_atoms(a, out);
                    term_atoms(b, out);
                }
                Term::Add(ts) | Term::Mul(ts) => ts.iter().for_each(|t| term_atoms(t, out)),
                Term::Neg(t) => term_atoms(t, out),
                Term::Const(_) | Term::Var(_) => {}
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    pub fn eval_with(&self, env: &dyn Fn(&str) -> Option<Rat>) -> Result<bool> {
        Ok(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Bool(b) => {
                let v = env(b).ok_or_else(|| Error::MissingVariable(b.clone()))?;
                !v.is_zero()
            }
            Formula::Atom(c, l, r) => {
                let l = l.eval(env)?;
                let r = r.eval(env)?;
                c.holds(l.cmp(&r))
            }
            Formula::Not(f) => !f.eval_with(env)?,
            Formula::And(fs) => {
                for f in fs {
                    if !f.eval_with(env)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Or(fs) => {
                for f in fs {
                    if f.eval_with(env)? {
                        return Ok(true);
                    }
                }
                false
            }
            Formula::Implies(a, b) => !a.eval_with(env)? || b.eval_with(env)?,
            Formula::Xor(fs) => {
                let mut acc = false;
                for f in fs {
                    acc ^= f.eval_with(env)?;
                }
                acc
            }
        })
    }

    pub fn eval(&self, asg: &Assignment) -> Result<bool> {
        self.eval_with(&|v| asg.get(v).cloned())
    }

    pub fn rename(&self, f: &dyn Fn(&str) -> String) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Bool(b) => Formula::Bool(f(b)),
            Formula::Atom(c, l, r) => Formula::Atom(*c, l.rename(f), r.rename(f)),
            Formula::Not(g) => Formula::Not(Box::new(g.rename(f))),
            Formula::And(fs) => Formula::And(fs.iter().map(|g| g.rename(f)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|g| g.rename(f)).collect()),
            Formula::Xor(fs) => Formula::Xor(fs.iter().map(|g| g.rename(f)).collect()),
            Formula::Implies(a, b) => Formula::Implies(Box::new(a.rename(f)), Box::new(b.rename(f))),
        }
    }

    /// Replace numeric variables by terms; boolean variables are untouched.
    pub fn subst(&self, map: &HashMap<String, Term>) -> Formula {
        match self {
            Formula::True | Formula::False | Formula::Bool(_) => self.clone(),
            Formula::Atom(c, l, r) => Formula::Atom(*c, l.subst(map), r.subst(map)),
            Formula::Not(g) => Formula::Not(Box::new(g.subst(map))),
            Formula::And(fs) => Formula::And(fs.iter().map(|g| g.subst(map)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|g| g.subst(map)).collect()),
            Formula::Xor(fs) => Formula::Xor(fs.iter().map(|g| g.subst(map)).collect()),
            Formula::Implies(a, b) => Formula::Implies(Box::new(a.subst(map)), Box::new(b.subst(map))),
        }
    }

    /// Replace boolean variables by formulas.
    pub fn subst_bool(&self, map: &HashMap<String, Formula>) -> Formula {
        let t = |t: &Term| subst_bool_term(t, map);
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Bool(b) => map.get(b).cloned().unwrap_or_else(|| self.clone()),
            Formula::Atom(c, l, r) => Formula::Atom(*c, t(l), t(r)),
            Formula::Not(g) => Formula::Not(Box::new(g.subst_bool(map))),
            Formula::And(fs) => Formula::And(fs.iter().map(|g| g.subst_bool(map)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|g| g.subst_bool(map)).collect()),
            Formula::Xor(fs) => Formula::Xor(fs.iter().map(|g| g.subst_bool(map)).collect()),
            Formula::Implies(a, b) => {
                Formula::Implies(Box::new(a.subst_bool(map)), Box::new(b.subst_bool(map)))
            }
        }
    }

    fn check_sorts(&self, sorts: &dyn Fn(&str) -> Option<Sort>) -> Result<()> {
        match self {
            Formula::True | Formula::False => Ok(()),
            Formula::Bool(b) => match sorts(b) {
                Some(Sort::Bool) => Ok(()),
                Some(s) => Err(Error::IllFormed(format!("`{b}` is {} but used as a proposition", s.name()))),
                None => Err(Error::IllFormed(format!("undeclared variable `{b}`"))),
            },
            Formula::Atom(_, l, r) => {
                check_term_sorts(l, sorts)?;
                check_term_sorts(r, sorts)
            }
            Formula::Not(f) => f.check_sorts(sorts),
            Formula::And(fs) | Formula::Or(fs) | Formula::Xor(fs) => {
                fs.iter().try_for_each(|f| f.check_sorts(sorts))
            }
            Formula::Implies(a, b) => {
                a.check_sorts(sorts)?;
                b.check_sorts(sorts)
            }
        }
    }
}

fn subst_bool_term(t: &Term, map: &HashMap<String, Formula>) -> Term {
    match t {
        Term::Const(_) | Term::Var(_) => t.clone(),
        Term::Add(ts) => Term::Add(ts.iter().map(|t| subst_bool_term(t, map)).collect()),
        Term::Mul(ts) => Term::Mul(ts.iter().map(|t| subst_bool_term(t, map)).collect()),
        Term::Neg(t) => Term::Neg(Box::new(subst_bool_term(t, map))),
        Term::Ite(c, a, b) => Term::Ite(
            Box::new(c.subst_bool(map)),
            Box::new(subst_bool_term(a, map)),
            Box::new(subst_bool_term(b, map)),
        ),
    }
}

fn check_term_sorts(t: &Term, sorts: &dyn Fn(&str) -> Option<Sort>) -> Result<()> {
    match t {
        Term::Const(_) => Ok(()),
        Term::Var(v) => match sorts(v) {
            Some(Sort::Bool) => Err(Error::IllFormed(format!("boolean `{v}` used as a number"))),
            Some(_) => Ok(()),
            None => Err(Error::IllFormed(format!("undeclared variable `{v}`"))),
        },
        Term::Add(ts) | Term::Mul(ts) => ts.iter().try_for_each(|t| check_term_sorts(t, sorts)),
        Term::Neg(t) => check_term_sorts(t, sorts),
        Term::Ite(c, a, b) => {
            c.check_sorts(sorts)?;
            check_term_sorts(a, sorts)?;
            check_term_sorts(b, sorts)
        }
    }
}

pub type Assignment = BTreeMap<String, Rat>;

/// A formula with its free variables, its existential prefix and the
/// domains of both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasuredFormula {
    pub theory: Theory,
    pub free: Vec<VarDecl>,
    pub bound: Vec<VarDecl>,
    pub body: Formula,
}

impl MeasuredFormula {
    pub fn new(theory: Theory, free: Vec<VarDecl>, bound: Vec<VarDecl>, body: Formula) -> Result<Self> {
        let f = MeasuredFormula {
            theory,
            free,
            bound,
            body,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for d in self.free.iter().chain(&self.bound) {
            d.validate()?;
            if !seen.insert(d.name.as_str()) {
                return Err(Error::IllFormed(format!("duplicate variable `{}`", d.name)));
            }
        }
        for d in &self.free {
            match (self.theory, d.sort) {
                (Theory::Ia, Sort::Real) => {
                    return Err(Error::IllFormed(format!("real free variable `{}` in ia", d.name)))
                }
                (Theory::Ra, Sort::Bool | Sort::Int) => {
                    return Err(Error::IllFormed(format!("discrete free variable `{}` in ra", d.name)))
                }
                _ => {}
            }
        }
        let sorts = self.sort_map();
        self.body.check_sorts(&|v| sorts.get(v).copied())?;
        check_real_linear(&self.body, &|v| sorts.get(v).copied())
    }

    pub fn free_vars(&self) -> &[VarDecl] {
        &self.free
    }

    pub fn decls(&self) -> impl Iterator<Item = &VarDecl> {
        self.free.iter().chain(&self.bound)
    }

    pub fn sort_map(&self) -> HashMap<String, Sort> {
        self.decls().map(|d| (d.name.clone(), d.sort)).collect()
    }

    /// Truth of the body under `asg ∪ witness`. Domains are not checked.
    pub fn eval(&self, asg: &Assignment, witness: &Assignment) -> Result<bool> {
        self.body
            .eval_with(&|v| asg.get(v).or_else(|| witness.get(v)).cloned())
    }

    pub fn to_smtlib(&self, logic: Option<&str>) -> Result<String> {
        let decls: Vec<VarDecl> = self.decls().cloned().collect();
        to_smtlib(&self.body, &decls, logic)
    }
}

fn check_real_linear(f: &Formula, sorts: &dyn Fn(&str) -> Option<Sort>) -> Result<()> {
    for a in f.atoms() {
        if let Formula::Atom(_, l, r) = a {
            if (l.is_real(sorts) || r.is_real(sorts)) && (l.nonlinear() || r.nonlinear()) {
                return Err(Error::UnsupportedLogic(format!(
                    "nonlinear real atom {}",
                    SmtWriter::new(sorts).formula(a)
                )));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// SMT-LIB emission

/// Renders formulas in SMT-LIB syntax, inserting `to_real` where integer
/// terms meet real ones.
pub struct SmtWriter<'a> {
    sorts: &'a dyn Fn(&str) -> Option<Sort>,
}

impl<'a> SmtWriter<'a> {
    pub fn new(sorts: &'a dyn Fn(&str) -> Option<Sort>) -> Self {
        SmtWriter { sorts }
    }

    pub fn formula(&self, f: &Formula) -> String {
        let mut s = String::new();
        self.write_formula(f, &mut s);
        s
    }

    fn write_formula(&self, f: &Formula, out: &mut String) {
        match f {
            Formula::True => out.push_str("true"),
            Formula::False => out.push_str("false"),
            Formula::Bool(b) => out.push_str(b),
            Formula::Atom(c, l, r) => {
                let real = l.is_real(self.sorts) || r.is_real(self.sorts);
                let _ = write!(out, "({} ", c.symbol());
                self.write_term(l, real, out);
                out.push(' ');
                self.write_term(r, real, out);
                out.push(')');
            }
            Formula::Not(g) => {
                out.push_str("(not ");
                self.write_formula(g, out);
                out.push(')');
            }
            Formula::And(fs) | Formula::Or(fs) => {
                let (op, unit) = if matches!(f, Formula::And(_)) {
                    ("and", "true")
                } else {
                    ("or", "false")
                };
                match fs.len() {
                    0 => out.push_str(unit),
                    1 => self.write_formula(&fs[0], out),
                    _ => {
                        let _ = write!(out, "({op}");
                        for g in fs {
                            out.push(' ');
                            self.write_formula(g, out);
                        }
                        out.push(')');
                    }
                }
            }
            Formula::Implies(a, b) => {
                out.push_str("(=> ");
                self.write_formula(a, out);
                out.push(' ');
                self.write_formula(b, out);
                out.push(')');
            }
            Formula::Xor(fs) => match fs.len() {
                0 => out.push_str("false"),
                _ => {
                    // Chained binary xor: (xor (xor a b) c).
                    for _ in 1..fs.len() {
                        out.push_str("(xor ");
                    }
                    self.write_formula(&fs[0], out);
                    for g in &fs[1..] {
                        out.push(' ');
                        self.write_formula(g, out);
                        out.push(')');
                    }
                }
            },
        }
    }

    fn write_term(&self, t: &Term, real: bool, out: &mut String) {
        match t {
            Term::Const(c) => out.push_str(&smt_const(c, real)),
            Term::Var(v) => {
                if real && (self.sorts)(v) != Some(Sort::Real) {
                    let _ = write!(out, "(to_real {v})");
                } else {
                    out.push_str(v);
                }
            }
            Term::Add(ts) | Term::Mul(ts) => {
                let (op, unit) = if matches!(t, Term::Add(_)) { ("+", 0) } else { ("*", 1) };
                match ts.len() {
                    0 => out.push_str(&smt_const(&rat::int(unit), real)),
                    1 => self.write_term(&ts[0], real, out),
                    _ => {
                        let _ = write!(out, "({op}");
                        for s in ts {
                            out.push(' ');
                            self.write_term(s, real, out);
                        }
                        out.push(')');
                    }
                }
            }
            Term::Neg(s) => {
                out.push_str("(- ");
                self.write_term(s, real, out);
                out.push(')');
            }
            Term::Ite(c, a, b) => {
                out.push_str("(ite ");
                self.write_formula(c, out);
                out.push(' ');
                self.write_term(a, real, out);
                out.push(' ');
                self.write_term(b, real, out);
                out.push(')');
            }
        }
    }
}

/// SMT-LIB literal for a rational, `Int` form unless `real`.
pub fn smt_const(c: &Rat, real: bool) -> String {
    let mag = |n: &BigInt| if real { format!("{n}.0") } else { n.to_string() };
    let abs = c.abs();
    let body = if rat::is_int(&abs) {
        mag(abs.numer())
    } else {
        format!("(/ {} {})", mag(abs.numer()), mag(abs.denom()))
    };
    if c.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

/// Parses a value printed by a solver: `3`, `(- 3)`, `2.5`, `(/ 1.0 3.0)`.
pub fn parse_smt_value(s: &Sexp) -> Option<Rat> {
    match s {
        Sexp::Atom(a, _) => match a.as_str() {
            "true" => Some(Rat::one()),
            "false" => Some(Rat::zero()),
            _ => rat::parse(a).filter(|_| !a.starts_with('-')),
        },
        Sexp::List(items, _) => match items.as_slice() {
            [op, x] if op.as_atom() == Some("-") => parse_smt_value(x).map(|v| -v),
            [op, x, y] if op.as_atom() == Some("/") => {
                let x = parse_smt_value(x)?;
                let y = parse_smt_value(y)?;
                (!y.is_zero()).then(|| x / y)
            }
            _ => None,
        },
        Sexp::Str(..) => None,
    }
}

/// Which SMT-LIB logic a formula over `decls` needs.
pub fn infer_logic(body: &Formula, decls: &[VarDecl]) -> Result<&'static str> {
    let map: HashMap<&str, Sort> = decls.iter().map(|d| (d.name.as_str(), d.sort)).collect();
    let sorts = |v: &str| map.get(v).copied();
    check_real_linear(body, &sorts)?;
    let mut ints = decls.iter().any(|d| d.sort == Sort::Int);
    let mut reals = decls.iter().any(|d| d.sort == Sort::Real);
    let mut nonlinear = false;
    for a in body.atoms() {
        if let Formula::Atom(_, l, r) = a {
            if l.is_real(&sorts) || r.is_real(&sorts) {
                reals = true;
            } else {
                ints = true;
                nonlinear |= l.nonlinear() || r.nonlinear();
            }
        }
    }
    Ok(match (ints, reals, nonlinear) {
        (_, false, false) => "QF_LIA",
        (_, false, true) => "QF_NIA",
        (false, true, _) => "QF_LRA",
        (true, true, false) => "QF_LIRA",
        (true, true, true) => "QF_NIRA",
    })
}

/// Declarations, domain bounds and the body assertion. A `set-logic` line is
/// prepended when `logic` is given.
pub fn to_smtlib(body: &Formula, decls: &[VarDecl], logic: Option<&str>) -> Result<String> {
    let inferred = infer_logic(body, decls)?;
    if let Some(l) = logic {
        let needs_real = inferred.contains("RA") || inferred.contains("IRA");
        let needs_nl = inferred.starts_with("QF_N");
        let ok = match l {
            "ALL" => true,
            "QF_LIA" | "QF_LRA" | "QF_LIRA" if needs_nl => false,
            "QF_LIA" | "QF_NIA" => !needs_real,
            "QF_LRA" | "QF_NRA" => !decls.iter().any(|d| d.sort == Sort::Int),
            _ => true,
        };
        if !ok {
            return Err(Error::UnsupportedLogic(format!("formula needs {inferred}, logic is {l}")));
        }
    }
    let map: HashMap<&str, Sort> = decls.iter().map(|d| (d.name.as_str(), d.sort)).collect();
    let sorts = |v: &str| map.get(v).copied();
    let w = SmtWriter::new(&sorts);
    let mut out = String::new();
    if let Some(l) = logic {
        let _ = writeln!(out, "(set-logic {l})");
    }
    out.push_str(&declarations(decls));
    let _ = writeln!(out, "(assert {})", w.formula(body));
    Ok(out)
}

/// `declare-fun` lines plus domain-bound assertions.
pub fn declarations(decls: &[VarDecl]) -> String {
    let mut out = String::new();
    for d in decls {
        let _ = writeln!(out, "(declare-fun {} () {})", d.name, d.sort.smt());
    }
    for d in decls {
        if d.sort == Sort::Bool {
            continue;
        }
        let real = d.sort == Sort::Real;
        let _ = writeln!(
            out,
            "(assert (and (>= {n} {lo}) (<= {n} {hi})))",
            n = d.name,
            lo = smt_const(&d.lower, real),
            hi = smt_const(&d.upper, real)
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Problem file format

const KEYWORDS: &[&str] = &[
    "true", "false", "and", "or", "not", "xor", "ite", "distinct", "exists", "assert", "var",
    "problem", "theory", "weight", "measure", "let", "forall",
];

pub fn is_user_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&s)
}

fn perr(s: &Sexp, msg: impl Into<String>) -> Error {
    let p = s.pos();
    Error::parse(p.line, p.col, msg)
}

pub fn parse_problem(text: &str) -> Result<MeasuredFormula> {
    let top = sexp::parse_all(text)?;
    let [prob] = top.as_slice() else {
        return Err(Error::parse(1, 1, "expected exactly one `(problem …)` form"));
    };
    let items = prob
        .tagged("problem")
        .ok_or_else(|| perr(prob, "expected `(problem …)`"))?;
    let mut theory = None;
    let mut free = Vec::new();
    let mut bound = Vec::new();
    let mut body_src: Option<&Sexp> = None;
    for item in items {
        if let Some(args) = item.tagged("theory") {
            let t = match args {
                [t] => match t.as_atom() {
                    Some("ia") => Theory::Ia,
                    Some("ra") => Theory::Ra,
                    _ => return Err(perr(t, "theory must be `ia` or `ra`")),
                },
                _ => return Err(perr(item, "expected `(theory ia|ra)`")),
            };
            if theory.replace(t).is_some() {
                return Err(perr(item, "duplicate theory"));
            }
        } else if let Some(args) = item.tagged("var") {
            free.push(parse_decl(item, args)?);
        } else if let Some(args) = item.tagged("exists") {
            for d in args {
                let inner = d.as_list().ok_or_else(|| perr(d, "expected a declaration list"))?;
                bound.push(parse_decl(d, inner)?);
            }
        } else if let Some(args) = item.tagged("assert") {
            match args {
                [b] => {
                    if body_src.replace(b).is_some() {
                        return Err(perr(item, "duplicate assert"));
                    }
                }
                [] => return Err(perr(item, "empty assert")),
                _ => return Err(perr(item, "assert takes one formula")),
            }
        } else {
            return Err(perr(item, format!("unexpected item `{item}`")));
        }
    }
    let theory = theory.ok_or_else(|| perr(prob, "missing `(theory …)`"))?;
    let body_src = body_src.ok_or_else(|| perr(prob, "missing `(assert …)`"))?;
    for d in free.iter().chain(&bound) {
        let bad = match theory {
            Theory::Ia => d.sort == Sort::Real,
            _ => d.sort == Sort::Int,
        };
        if bad {
            return Err(Error::Domain(format!(
                "`{}`: {} variable in theory {}; mixed theories are not accepted",
                d.name,
                d.sort.name(),
                theory.name()
            )));
        }
    }
    let sorts: HashMap<String, Sort> = free.iter().chain(&bound).map(|d| (d.name.clone(), d.sort)).collect();
    let body = parse_formula(body_src, &sorts)?;
    MeasuredFormula::new(theory, free, bound, body)
}

fn parse_decl(whole: &Sexp, args: &[Sexp]) -> Result<VarDecl> {
    let name_s = args.first().ok_or_else(|| perr(whole, "declaration without a name"))?;
    let name = name_s
        .as_atom()
        .filter(|n| is_user_ident(n))
        .ok_or_else(|| perr(name_s, "invalid identifier"))?;
    let sort_s = args.get(1).ok_or_else(|| perr(whole, "declaration without a sort"))?;
    let sort = match sort_s.as_atom() {
        Some("bool") => Sort::Bool,
        Some("int") => Sort::Int,
        Some("real") => Sort::Real,
        _ => return Err(perr(sort_s, "sort must be bool, int or real")),
    };
    let mut rest = &args[2..];
    let (lower, upper) = if sort == Sort::Bool && rest.first().map_or(true, |s| s.as_list().is_some() && parse_const(s).is_none()) {
        (Rat::zero(), Rat::one())
    } else {
        let lo = rest.first().and_then(parse_const);
        let hi = rest.get(1).and_then(parse_const);
        match (lo, hi) {
            (Some(lo), Some(hi)) => {
                rest = &rest[2..];
                (lo, hi)
            }
            _ => return Err(Error::Domain(format!("`{name}`: domain must have two numeric bounds"))),
        }
    };
    let mut measure = match sort {
        Sort::Real => Measure::Lebesgue,
        _ => Measure::Counting,
    };
    for opt in rest {
        if let Some([w]) = opt.tagged("weight") {
            let w = parse_const(w).ok_or_else(|| perr(w, "weight must be a number"))?;
            measure = Measure::UniformWeight(w);
        } else if let Some([m]) = opt.tagged("measure") {
            measure = match m.as_atom() {
                Some("counting") => Measure::Counting,
                Some("lebesgue") => Measure::Lebesgue,
                _ => return Err(perr(m, "measure must be counting or lebesgue")),
            };
        } else {
            return Err(perr(opt, "expected `(weight w)` or `(measure …)`"));
        }
    }
    VarDecl::new(name, sort, lower, upper, measure)
}

/// Numeric literal: `3`, `2.5`, `(/ 3 2)`, `(- c)`.
fn parse_const(s: &Sexp) -> Option<Rat> {
    match s {
        Sexp::Atom(a, _) => {
            if a.starts_with('-') || a.contains('/') {
                None
            } else {
                rat::parse(a)
            }
        }
        Sexp::List(items, _) => match items.as_slice() {
            [op, x] if op.as_atom() == Some("-") && x.tagged("-").is_none() => parse_const(x).map(|v| -v),
            [op, n, d] if op.as_atom() == Some("/") => {
                let n = n.as_atom().and_then(|_| parse_const(n))?;
                let d = d.as_atom().and_then(|_| parse_const(d))?;
                (!d.is_zero()).then(|| n / d)
            }
            _ => None,
        },
        Sexp::Str(..) => None,
    }
}

fn parse_formula(s: &Sexp, sorts: &HashMap<String, Sort>) -> Result<Formula> {
    match s {
        Sexp::Atom(a, _) => match a.as_str() {
            "true" => Ok(Formula::True),
            "false" => Ok(Formula::False),
            v => match sorts.get(v) {
                Some(Sort::Bool) => Ok(Formula::Bool(v.to_string())),
                Some(_) => Err(perr(s, format!("`{v}` is not boolean"))),
                None => Err(perr(s, format!("undeclared variable `{v}`"))),
            },
        },
        Sexp::Str(..) => Err(perr(s, "unexpected string")),
        Sexp::List(items, _) => {
            let (head, args) = items.split_first().ok_or_else(|| perr(s, "empty formula"))?;
            let op = head.as_atom().ok_or_else(|| perr(head, "expected an operator"))?;
            let subs = || args.iter().map(|a| parse_formula(a, sorts)).collect::<Result<Vec<_>>>();
            match op {
                "and" => Ok(Formula::And(subs()?)),
                "or" => Ok(Formula::Or(subs()?)),
                "xor" => Ok(Formula::Xor(subs()?)),
                "not" => match args {
                    [a] => Ok(Formula::not(parse_formula(a, sorts)?)),
                    _ => Err(perr(s, "`not` takes one argument")),
                },
                "=>" => match args {
                    [a, b] => Ok(Formula::implies(parse_formula(a, sorts)?, parse_formula(b, sorts)?)),
                    _ => Err(perr(s, "`=>` takes two arguments")),
                },
                _ => {
                    let cmp = Cmp::from_symbol(op).ok_or_else(|| perr(head, format!("unknown operator `{op}`")))?;
                    match args {
                        [l, r] => Ok(Formula::Atom(cmp, parse_term(l, sorts)?, parse_term(r, sorts)?)),
                        _ => Err(perr(s, format!("`{op}` takes two arguments"))),
                    }
                }
            }
        }
    }
}

fn parse_term(s: &Sexp, sorts: &HashMap<String, Sort>) -> Result<Term> {
    if let Some(c) = parse_const(s) {
        return Ok(Term::Const(c));
    }
    match s {
        Sexp::Atom(a, _) => match sorts.get(a.as_str()) {
            Some(Sort::Bool) => Err(perr(s, format!("boolean `{a}` used as a number"))),
            Some(_) => Ok(Term::Var(a.clone())),
            None => Err(perr(s, format!("bad term `{a}`"))),
        },
        Sexp::Str(..) => Err(perr(s, "unexpected string")),
        Sexp::List(items, _) => {
            let (head, args) = items.split_first().ok_or_else(|| perr(s, "empty term"))?;
            let op = head.as_atom().ok_or_else(|| perr(head, "expected an operator"))?;
            let subs = || args.iter().map(|a| parse_term(a, sorts)).collect::<Result<Vec<_>>>();
            match (op, args.len()) {
                ("+", _) => Ok(Term::Add(subs()?)),
                ("*", _) => Ok(Term::Mul(subs()?)),
                ("-", 1) => Ok(Term::Neg(Box::new(parse_term(&args[0], sorts)?))),
                ("-", n) if n >= 2 => {
                    let mut ts = subs()?.into_iter();
                    let first = ts.next().unwrap();
                    Ok(Term::Add(
                        std::iter::once(first)
                            .chain(ts.map(|t| Term::Neg(Box::new(t))))
                            .collect(),
                    ))
                }
                ("ite", 3) => Ok(Term::Ite(
                    Box::new(parse_formula(&args[0], sorts)?),
                    Box::new(parse_term(&args[1], sorts)?),
                    Box::new(parse_term(&args[2], sorts)?),
                )),
                _ => Err(perr(s, format!("bad term operator `{op}`"))),
            }
        }
    }
}

fn problem_const(c: &Rat) -> String {
    let abs = c.abs();
    let body = if rat::is_int(&abs) {
        abs.numer().to_string()
    } else {
        format!("(/ {} {})", abs.numer(), abs.denom())
    };
    if c.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

fn problem_formula(f: &Formula, out: &mut String) {
    let list = |op: &str, fs: &[Formula], out: &mut String| {
        out.push('(');
        out.push_str(op);
        for g in fs {
            out.push(' ');
            problem_formula(g, out);
        }
        out.push(')');
    };
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Bool(b) => out.push_str(b),
        Formula::Atom(c, l, r) => {
            let _ = write!(out, "({} ", c.symbol());
            problem_term(l, out);
            out.push(' ');
            problem_term(r, out);
            out.push(')');
        }
        Formula::Not(g) => {
            out.push_str("(not ");
            problem_formula(g, out);
            out.push(')');
        }
        Formula::And(fs) => list("and", fs, out),
        Formula::Or(fs) => list("or", fs, out),
        Formula::Xor(fs) => list("xor", fs, out),
        Formula::Implies(a, b) => {
            out.push_str("(=> ");
            problem_formula(a, out);
            out.push(' ');
            problem_formula(b, out);
            out.push(')');
        }
    }
}

fn problem_term(t: &Term, out: &mut String) {
    match t {
        Term::Const(c) => out.push_str(&problem_const(c)),
        Term::Var(v) => out.push_str(v),
        Term::Add(ts) | Term::Mul(ts) => {
            out.push_str(if matches!(t, Term::Add(_)) { "(+" } else { "(*" });
            for s in ts {
                out.push(' ');
                problem_term(s, out);
            }
            out.push(')');
        }
        Term::Neg(s) => {
            out.push_str("(- ");
            problem_term(s, out);
            out.push(')');
        }
        Term::Ite(c, a, b) => {
            out.push_str("(ite ");
            problem_formula(c, out);
            out.push(' ');
            problem_term(a, out);
            out.push(' ');
            problem_term(b, out);
            out.push(')');
        }
    }
}

fn problem_decl(d: &VarDecl) -> String {
    let mut s = format!("{} {}", d.name, d.sort.name());
    if d.sort != Sort::Bool {
        let _ = write!(s, " {} {}", problem_const(&d.lower), problem_const(&d.upper));
    }
    if let Measure::UniformWeight(w) = &d.measure {
        let _ = write!(s, " (weight {})", problem_const(w));
    }
    s
}

/// Serializes to the problem file format read by [`parse_problem`].
pub fn emit_problem(f: &MeasuredFormula) -> String {
    let mut out = format!("(problem\n  (theory {})\n", f.theory.name());
    for d in &f.free {
        let _ = writeln!(out, "  (var {})", problem_decl(d));
    }
    if !f.bound.is_empty() {
        out.push_str("  (exists");
        for d in &f.bound {
            let _ = write!(out, " ({})", problem_decl(d));
        }
        out.push_str(")\n");
    }
    out.push_str("  (assert ");
    problem_formula(&f.body, &mut out);
    out.push_str("))\n");
    out
}

/// The body in problem syntax, for diagnostics.
pub fn formula_text(f: &Formula) -> String {
    let mut s = String::new();
    problem_formula(f, &mut s);
    s
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const EXAMPLE1: &str = "(problem (theory ia)
      (var x int 0 10)
      (exists (y int 0 10))
      (assert (and (>= y 1) (<= y 10) (>= x 1) (<= x 10) (<= (+ (* 2 x) y) 6))))";

    fn asg(pairs: &[(&str, i64)]) -> Assignment {
        pairs.iter().map(|(k, v)| (k.to_string(), rat::int(*v))).collect()
    }

    #[test]
    fn example1_free_vars_and_eval() {
        let f = parse_problem(EXAMPLE1).unwrap();
        let names: Vec<_> = f.free_vars().iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names, ["x"]);
        assert!(f.eval(&asg(&[("x", 2)]), &asg(&[("y", 1)])).unwrap());
        assert!(!f.eval(&asg(&[("x", 3)]), &asg(&[("y", 1)])).unwrap());
        assert!(matches!(f.eval(&asg(&[("x", 3)]), &asg(&[])), Err(Error::MissingVariable(v)) if v == "y"));
    }

    #[test]
    fn closed_sentence_and_order() {
        let f = MeasuredFormula::new(Theory::Ia, vec![], vec![], Formula::True).unwrap();
        assert!(f.free_vars().is_empty());
        let g = MeasuredFormula::new(
            Theory::Ia,
            vec![VarDecl::int("x1", 0, 1), VarDecl::int("x2", 0, 1)],
            vec![],
            Formula::And(vec![
                Formula::atom(Cmp::Le, Term::var("x2"), Term::int(1)),
                Formula::atom(Cmp::Le, Term::var("x1"), Term::int(1)),
            ]),
        )
        .unwrap();
        let names: Vec<_> = g.free_vars().iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names, ["x1", "x2"]);
        let zero = Formula::atom(Cmp::Le, Term::int(0), Term::int(0));
        assert!(zero.eval(&Assignment::new()).unwrap());
    }

    #[test]
    fn smtlib_bounds_and_logic() {
        let f = MeasuredFormula::new(Theory::Ia, vec![VarDecl::int("x", 1, 3)], vec![], Formula::True).unwrap();
        let s = f.to_smtlib(Some("QF_LIA")).unwrap();
        assert!(s.contains("(>= x 1)") && s.contains("(<= x 3)"), "{s}");
        assert!(s.starts_with("(set-logic QF_LIA)"));
        let e1 = parse_problem(EXAMPLE1).unwrap();
        let decls: Vec<_> = e1.decls().cloned().collect();
        assert_eq!(infer_logic(&e1.body, &decls).unwrap(), "QF_LIA");
    }

    #[test]
    fn smtlib_mixed_sorts_use_to_real() {
        let decls = [VarDecl::int("y", 0, 3), VarDecl::real("x", rat::int(0), rat::int(1))];
        let body = Formula::atom(
            Cmp::Le,
            Term::Mul(vec![Term::Const(rat::frac(1, 4)), Term::var("y")]),
            Term::var("x"),
        );
        let s = to_smtlib(&body, &decls, None).unwrap();
        assert!(s.contains("(<= (* (/ 1.0 4.0) (to_real y)) x)"), "{s}");
        assert_eq!(infer_logic(&body, &decls).unwrap(), "QF_LIRA");
    }

    #[test]
    fn nonlinear_real_rejected() {
        let decls = [VarDecl::real("x", rat::int(0), rat::int(1))];
        let body = Formula::atom(Cmp::Le, Term::Mul(vec![Term::var("x"), Term::var("x")]), Term::int(1));
        assert!(matches!(to_smtlib(&body, &decls, None), Err(Error::UnsupportedLogic(_))));
        let idecls = [VarDecl::int("x", 0, 3)];
        assert_eq!(infer_logic(&body, &idecls).unwrap(), "QF_NIA");
    }

    #[test]
    fn xor_chains_binary() {
        let decls = [VarDecl::boolean("a"), VarDecl::boolean("b"), VarDecl::boolean("c")];
        let f = Formula::Xor(vec![Formula::Bool("a".into()), Formula::Bool("b".into()), Formula::Bool("c".into())]);
        let s = to_smtlib(&f, &decls, None).unwrap();
        assert!(s.contains("(assert (xor (xor a b) c))"), "{s}");
    }

    #[test]
    fn parse_errors() {
        let empty = "(problem (theory ia) (var x int 0 1) (assert))";
        assert!(matches!(parse_problem(empty), Err(Error::Parse { .. })));
        let missing = "(problem (theory ia) (var x int 0 1))";
        assert!(matches!(parse_problem(missing), Err(Error::Parse { .. })));
        let counting_real = "(problem (theory ra) (var x real 0 1 (measure counting)) (assert true))";
        assert!(matches!(parse_problem(counting_real), Err(Error::Domain(_))));
        let unbounded = "(problem (theory ia) (var x int 0) (assert true))";
        assert!(matches!(parse_problem(unbounded), Err(Error::Domain(_))));
        let mixed = "(problem (theory ia) (var x int 0 1) (exists (y real 0 1)) (assert true))";
        assert!(matches!(parse_problem(mixed), Err(Error::Domain(_))));
        let pos = parse_problem("(problem (theory ia)\n  (var x int 0 1)\n  (assert (<= z 1)))").unwrap_err();
        assert!(matches!(pos, Error::Parse { line: 3, .. }), "{pos}");
    }

    #[test]
    fn smt_values() {
        let v = |s: &str| parse_smt_value(&sexp::parse_all(s).unwrap()[0]);
        assert_eq!(v("3"), Some(rat::int(3)));
        assert_eq!(v("(- 3)"), Some(rat::int(-3)));
        assert_eq!(v("2.5"), Some(rat::frac(5, 2)));
        assert_eq!(v("(- (/ 1.0 3.0))"), Some(rat::frac(-1, 3)));
        assert_eq!(v("true"), Some(rat::int(1)));
    }

    #[test]
    fn linearize_collects_coefficients() {
        let t = Term::Add(vec![
            Term::Mul(vec![Term::int(2), Term::var("x"), Term::int(3)]),
            Term::Neg(Box::new(Term::var("x"))),
            Term::int(4),
        ]);
        let (cs, c0) = t.linearize().unwrap();
        assert_eq!(cs.get("x"), Some(&rat::int(5)));
        assert_eq!(c0, rat::int(4));
        assert!(Term::Mul(vec![Term::var("x"), Term::var("y")]).linearize().is_none());
    }

    fn arb_rat() -> impl Strategy<Value = Rat> {
        (-20i64..20, 1i64..5).prop_map(|(n, d)| rat::frac(n, d))
    }

    fn arb_term(vars: Vec<&'static str>) -> impl Strategy<Value = Term> {
        let leaf = prop_oneof![
            arb_rat().prop_map(Term::Const),
            proptest::sample::select(vars).prop_map(Term::var),
        ];
        leaf.prop_recursive(3, 12, 3, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 0..3).prop_map(Term::Add),
                (arb_rat(), inner.clone()).prop_map(|(c, t)| Term::Mul(vec![Term::Const(c), t])),
                inner.prop_filter("no negated literals", |t| !matches!(t, Term::Const(_)))
                    .prop_map(|t| Term::Neg(Box::new(t))),
            ]
        })
    }

    pub(crate) fn arb_formula(vars: Vec<&'static str>, bools: Vec<&'static str>) -> impl Strategy<Value = Formula> {
        let cmp = proptest::sample::select(vec![Cmp::Le, Cmp::Lt, Cmp::Eq, Cmp::Ge, Cmp::Gt, Cmp::Ne]);
        let leaf = prop_oneof![
            (cmp, arb_term(vars.clone()), arb_term(vars)).prop_map(|(c, l, r)| Formula::Atom(c, l, r)),
            proptest::sample::select(bools).prop_map(|b| Formula::Bool(b.to_string())),
            Just(Formula::True),
        ];
        leaf.prop_recursive(3, 16, 3, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 0..3).prop_map(Formula::And),
                proptest::collection::vec(inner.clone(), 1..3).prop_map(Formula::Or),
                proptest::collection::vec(inner.clone(), 1..3).prop_map(Formula::Xor),
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner).prop_map(|(a, b)| Formula::implies(a, b)),
            ]
        })
    }

    proptest! {
        #[test]
        fn problem_round_trip(body in arb_formula(vec!["x", "y"], vec!["b"])) {
            let f = MeasuredFormula::new(
                Theory::Ia,
                vec![VarDecl::int("x", -3, 4), VarDecl::boolean("b")],
                vec![VarDecl::int("y", 0, 2)],
                body,
            ).unwrap();
            let text = emit_problem(&f);
            let g = parse_problem(&text).unwrap();
            prop_assert_eq!(g, f);
        }

        #[test]
        fn emitted_bounds_cover_every_decl(lo in -5i64..5, w in 0i64..5) {
            let decls = [VarDecl::int("x", lo, lo + w)];
            let s = to_smtlib(&Formula::True, &decls, None).unwrap();
            let lo_s = smt_const(&rat::int(lo), false);
            let needle = format!("(>= x {lo_s})");
            prop_assert!(s.contains(&needle));
        }
    }
}
