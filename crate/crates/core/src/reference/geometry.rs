//! Exact reasoning about linear real constraints: Fourier–Motzkin
//! elimination with strict inequalities, satisfiability of boolean
//! combinations, and exact length/area of definable sets in one and two
//! dimensions.

use std::collections::{BTreeSet, HashMap};

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::formula::{Cmp, Formula, Term, VarDecl};
use crate::rat::{self, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Le,
    Lt,
    Eq,
}

/// `Σ coeffs[i]·x_i + c0  rel  0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinCon {
    pub coeffs: Vec<Rat>,
    pub c0: Rat,
    pub rel: Rel,
}

impl LinCon {
    fn is_const(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    fn const_holds(&self) -> bool {
        match self.rel {
            Rel::Le => !self.c0.is_positive(),
            Rel::Lt => self.c0.is_negative(),
            Rel::Eq => self.c0.is_zero(),
        }
    }

    /// Positive scaling so the first nonzero coefficient has magnitude 1
    /// (and sign +1 for equalities).
    fn normalized(mut self) -> LinCon {
        if let Some(k) = self.coeffs.iter().find(|c| !c.is_zero()).cloned() {
            let k = if self.rel == Rel::Eq { k } else { k.abs() };
            for c in &mut self.coeffs {
                *c /= &k;
            }
            self.c0 /= &k;
        }
        self
    }

    fn scaled_add(&self, a: &Rat, other: &LinCon, b: &Rat, rel: Rel) -> LinCon {
        LinCon {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            c0: a * &self.c0 + b * &other.c0,
            rel,
        }
    }

    pub fn eval(&self, x: &[Rat]) -> bool {
        let v: Rat = self.coeffs.iter().zip(x).map(|(c, v)| c * v).sum::<Rat>() + &self.c0;
        match self.rel {
            Rel::Le => !v.is_positive(),
            Rel::Lt => v.is_negative(),
            Rel::Eq => v.is_zero(),
        }
    }
}

/// Removes constant constraints (returning `None` if one fails), duplicates
/// and constraints dominated by a parallel tighter one.
fn simplify(cons: Vec<LinCon>) -> Option<Vec<LinCon>> {
    let mut best: HashMap<Vec<Rat>, (Rat, Rel)> = HashMap::new();
    let mut eqs: BTreeSet<LinCon> = BTreeSet::new();
    for c in cons {
        if c.is_const() {
            if !c.const_holds() {
                return None;
            }
            continue;
        }
        let c = c.normalized();
        if c.rel == Rel::Eq {
            eqs.insert(c);
            continue;
        }
        // Σ + c0 ≤ 0: larger c0 is tighter; strict wins ties.
        match best.get_mut(&c.coeffs) {
            Some((c0, rel)) => {
                if c.c0 > *c0 || (c.c0 == *c0 && c.rel == Rel::Lt) {
                    *c0 = c.c0;
                    *rel = c.rel;
                }
            }
            None => {
                best.insert(c.coeffs, (c.c0, c.rel));
            }
        }
    }
    let mut out: Vec<LinCon> = eqs.into_iter().collect();
    let mut ineqs: Vec<LinCon> = best
        .into_iter()
        .map(|(coeffs, (c0, rel))| LinCon { coeffs, c0, rel })
        .collect();
    ineqs.sort();
    // Opposite parallel pairs: a·x + c ⋈ 0 and −a·x + d ⋈ 0.
    for c in &ineqs {
        let neg: Vec<Rat> = c.coeffs.iter().map(|k| -k).collect();
        if let Some(o) = ineqs.iter().find(|o| o.coeffs == neg) {
            // a·x ≤ −c and a·x ≥ d  ⇒  need d ≤ −c (strict if either is).
            let gap = -&c.c0 - &o.c0;
            let strict = c.rel == Rel::Lt || o.rel == Rel::Lt;
            if gap.is_negative() || (strict && gap.is_zero()) {
                return None;
            }
        }
    }
    out.extend(ineqs);
    Some(out)
}

fn eliminate(cons: Vec<LinCon>, j: usize) -> Option<Vec<LinCon>> {
    if let Some(pos) = cons.iter().position(|c| c.rel == Rel::Eq && !c.coeffs[j].is_zero()) {
        let eq = cons[pos].clone();
        let out = cons
            .into_iter()
            .enumerate()
            .filter(|(i, _)| *i != pos)
            .map(|(_, c)| {
                if c.coeffs[j].is_zero() {
                    c
                } else {
                    let f = -(&c.coeffs[j] / &eq.coeffs[j]);
                    let rel = c.rel;
                    c.scaled_add(&Rat::one(), &eq, &f, rel)
                }
            })
            .collect();
        return simplify(out);
    }
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    let mut rest = Vec::new();
    for c in cons {
        if c.coeffs[j].is_positive() {
            upper.push(c);
        } else if c.coeffs[j].is_negative() {
            lower.push(c);
        } else {
            rest.push(c);
        }
    }
    for u in &upper {
        for l in &lower {
            let a = u.coeffs[j].clone();
            let b = -l.coeffs[j].clone();
            let rel = if u.rel == Rel::Lt || l.rel == Rel::Lt { Rel::Lt } else { Rel::Le };
            rest.push(u.scaled_add(&b, l, &a, rel));
        }
    }
    simplify(rest)
}

/// Eliminates every variable not in `keep`. `None` means infeasible.
pub fn project(cons: Vec<LinCon>, nvars: usize, keep: &[usize]) -> Option<Vec<LinCon>> {
    let mut cur = simplify(cons)?;
    for j in 0..nvars {
        if !keep.contains(&j) {
            cur = eliminate(cur, j)?;
        }
    }
    Some(cur)
}

pub fn feasible(cons: Vec<LinCon>, nvars: usize) -> bool {
    project(cons, nvars, &[]).is_some()
}

/// Index of real variables in constraint vectors.
#[derive(Debug, Clone)]
pub struct Space {
    pub names: Vec<String>,
    index: HashMap<String, usize>,
    bounds: Vec<LinCon>,
}

impl Space {
    pub fn new(vars: &[VarDecl]) -> Space {
        let names: Vec<String> = vars.iter().map(|d| d.name.clone()).collect();
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let n = vars.len();
        let mut bounds = Vec::new();
        for (i, d) in vars.iter().enumerate() {
            let mut up = vec![Rat::zero(); n];
            up[i] = Rat::one();
            bounds.push(LinCon {
                coeffs: up.clone(),
                c0: -d.upper.clone(),
                rel: Rel::Le,
            });
            let down: Vec<Rat> = up.iter().map(|k| -k).collect();
            bounds.push(LinCon {
                coeffs: down,
                c0: d.lower.clone(),
                rel: Rel::Le,
            });
        }
        Space { names, index, bounds }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn domain(&self) -> &[LinCon] {
        &self.bounds
    }

    /// `l − r` as coefficients over this space.
    fn difference(&self, l: &Term, r: &Term) -> Result<(Vec<Rat>, Rat)> {
        let diff = Term::Add(vec![l.clone(), Term::Neg(Box::new(r.clone()))]);
        let (map, c0) = diff
            .linearize()
            .ok_or_else(|| Error::NonLinear(crate::formula::formula_text(&Formula::Atom(Cmp::Le, l.clone(), r.clone()))))?;
        let mut coeffs = vec![Rat::zero(); self.dim()];
        for (v, k) in map {
            let i = *self
                .index
                .get(&v)
                .ok_or_else(|| Error::IllFormed(format!("`{v}` is not a real variable of the space")))?;
            coeffs[i] = k;
        }
        Ok((coeffs, c0))
    }

    /// The atom (or its negation) as a disjunction of constraints.
    fn atom(&self, c: Cmp, l: &Term, r: &Term, positive: bool) -> Result<Vec<LinCon>> {
        let c = if positive { c } else { c.negate() };
        let (k, c0) = self.difference(l, r)?;
        let neg = |k: &Vec<Rat>, c0: &Rat| (k.iter().map(|x| -x).collect::<Vec<_>>(), -c0);
        let mk = |(coeffs, c0): (Vec<Rat>, Rat), rel| LinCon { coeffs, c0, rel };
        Ok(match c {
            Cmp::Le => vec![mk((k, c0), Rel::Le)],
            Cmp::Lt => vec![mk((k, c0), Rel::Lt)],
            Cmp::Ge => vec![mk(neg(&k, &c0), Rel::Le)],
            Cmp::Gt => vec![mk(neg(&k, &c0), Rel::Lt)],
            Cmp::Eq => vec![mk((k, c0), Rel::Eq)],
            Cmp::Ne => vec![mk((k.clone(), c0.clone()), Rel::Lt), mk(neg(&k, &c0), Rel::Lt)],
        })
    }
}

/// Replaces numeric if-then-else terms by case splits on the atoms that
/// contain them.
pub fn lift_ite(f: &Formula) -> Formula {
    match f {
        Formula::Atom(c, l, r) => {
            if let Some((cond, a, b)) = find_ite(l).or_else(|| find_ite(r)) {
                let pick = |branch: &Term| {
                    let l2 = replace_first_ite(l, &cond, branch);
                    let r2 = if l2 == *l { replace_first_ite(r, &cond, branch) } else { r.clone() };
                    lift_ite(&Formula::Atom(*c, l2, r2))
                };
                Formula::Or(vec![
                    Formula::And(vec![lift_ite(&cond), pick(&a)]),
                    Formula::And(vec![Formula::not(lift_ite(&cond)), pick(&b)]),
                ])
            } else {
                f.clone()
            }
        }
        Formula::Not(g) => Formula::not(lift_ite(g)),
        Formula::And(fs) => Formula::And(fs.iter().map(lift_ite).collect()),
        Formula::Or(fs) => Formula::Or(fs.iter().map(lift_ite).collect()),
        Formula::Xor(fs) => Formula::Xor(fs.iter().map(lift_ite).collect()),
        Formula::Implies(a, b) => Formula::implies(lift_ite(a), lift_ite(b)),
        Formula::True | Formula::False | Formula::Bool(_) => f.clone(),
    }
}

fn find_ite(t: &Term) -> Option<(Formula, Term, Term)> {
    match t {
        Term::Ite(c, a, b) => Some(((**c).clone(), (**a).clone(), (**b).clone())),
        Term::Add(ts) | Term::Mul(ts) => ts.iter().find_map(find_ite),
        Term::Neg(s) => find_ite(s),
        Term::Const(_) | Term::Var(_) => None,
    }
}

fn replace_first_ite(t: &Term, cond: &Formula, with: &Term) -> Term {
    fn go(t: &Term, cond: &Formula, with: &Term, done: &mut bool) -> Term {
        if *done {
            return t.clone();
        }
        match t {
            Term::Ite(c, _, _) if **c == *cond => {
                *done = true;
                with.clone()
            }
            Term::Add(ts) => Term::Add(ts.iter().map(|s| go(s, cond, with, done)).collect()),
            Term::Mul(ts) => Term::Mul(ts.iter().map(|s| go(s, cond, with, done)).collect()),
            Term::Neg(s) => Term::Neg(Box::new(go(s, cond, with, done))),
            _ => t.clone(),
        }
    }
    let mut done = false;
    go(t, cond, with, &mut done)
}

/// Depth-first search for a satisfiable branch of an ite-free formula over
/// `space`, on top of the constraints `base`.
fn search(space: &Space, mut todo: Vec<(Formula, bool)>, cons: Vec<LinCon>, out: &mut dyn FnMut(&[LinCon]) -> bool) -> Result<bool> {
    while let Some((f, pos)) = todo.pop() {
        match (&f, pos) {
            (Formula::True, true) | (Formula::False, false) => {}
            (Formula::True, false) | (Formula::False, true) => return Ok(false),
            (Formula::Bool(b), _) => {
                return Err(Error::IllFormed(format!("boolean `{b}` left in a real constraint")))
            }
            (Formula::Not(g), _) => todo.push(((**g).clone(), !pos)),
            (Formula::And(fs), true) | (Formula::Or(fs), false) => {
                todo.extend(fs.iter().cloned().map(|g| (g, pos)));
            }
            (Formula::Implies(a, b), false) => {
                todo.push(((**a).clone(), true));
                todo.push(((**b).clone(), false));
            }
            (Formula::Atom(c, l, r), _) => {
                let alts = space.atom(*c, l, r, pos)?;
                if alts.len() == 1 {
                    let mut next = cons;
                    next.extend(alts);
                    return search(space, todo, next, out);
                }
                for alt in alts {
                    let mut next = cons.clone();
                    next.push(alt);
                    if search(space, todo.clone(), next, out)? {
                        return Ok(true);
                    }
                }
                return Ok(false);
            }
            (Formula::Xor(fs), _) => {
                // ⊕(a, rest) = (a ∧ ¬⊕rest) ∨ (¬a ∧ ⊕rest)
                let Some((a, rest)) = fs.split_first() else {
                    return if pos { Ok(false) } else { search(space, todo, cons, out) };
                };
                let rest = Formula::Xor(rest.to_vec());
                for a_val in [true, false] {
                    let mut next = todo.clone();
                    next.push((a.clone(), a_val));
                    next.push((rest.clone(), pos != a_val));
                    if search(space, next, cons.clone(), out)? {
                        return Ok(true);
                    }
                }
                return Ok(false);
            }
            (Formula::And(fs), false) | (Formula::Or(fs), true) => {
                if !feasible(cons.clone(), space.dim()) {
                    return Ok(false);
                }
                for g in fs {
                    let mut next = todo.clone();
                    next.push((g.clone(), pos));
                    if search(space, next, cons.clone(), out)? {
                        return Ok(true);
                    }
                }
                return Ok(false);
            }
            (Formula::Implies(a, b), true) => {
                let alts = [((**a).clone(), false), ((**b).clone(), true)];
                for alt in alts {
                    let mut next = todo.clone();
                    next.push(alt);
                    if search(space, next, cons.clone(), out)? {
                        return Ok(true);
                    }
                }
                return Ok(false);
            }
        }
    }
    Ok(out(&cons))
}

/// Whether some point of the box of `space` satisfies `f`. All variables
/// of `f` must be real variables of the space.
pub fn satisfiable(f: &Formula, space: &Space) -> Result<bool> {
    let f = lift_ite(f);
    let n = space.dim();
    search(space, vec![(f, true)], space.domain().to_vec(), &mut |c| feasible(c.to_vec(), n))
}

/// Every satisfiable conjunctive branch, projected onto `keep`.
pub fn projected_branches(f: &Formula, space: &Space, keep: &[usize]) -> Result<Vec<Vec<LinCon>>> {
    let f = lift_ite(f);
    let n = space.dim();
    let mut out = Vec::new();
    search(space, vec![(f, true)], space.domain().to_vec(), &mut |c| {
        if let Some(p) = project(c.to_vec(), n, keep) {
            out.push(p);
        }
        false
    })?;
    Ok(out)
}

fn subst_real(f: &Formula, name: &str, v: &Rat) -> Formula {
    f.subst(&HashMap::from([(name.to_string(), Term::Const(v.clone()))]))
}

/// Membership of `x = v` in `∃ bound. f`.
fn member(f: &Formula, x: &str, v: &Rat, bound: &Space) -> Result<bool> {
    satisfiable(&subst_real(f, x, v), bound)
}

/// Points of `[lo, hi]` where membership in `∃ bound. f` may change.
pub fn breakpoints_1d(f: &Formula, x: &VarDecl, bound: &[VarDecl]) -> Result<Vec<Rat>> {
    let mut vars = vec![x.clone()];
    vars.extend(bound.iter().cloned());
    let space = Space::new(&vars);
    let mut pts: BTreeSet<Rat> = BTreeSet::from([x.lower.clone(), x.upper.clone()]);
    for branch in projected_branches(f, &space, &[0])? {
        for c in branch {
            if !c.coeffs[0].is_zero() {
                let p = -&c.c0 / &c.coeffs[0];
                if p >= x.lower && p <= x.upper {
                    pts.insert(p);
                }
            }
        }
    }
    Ok(pts.into_iter().collect())
}

/// Exact length of `{x ∈ [lo, hi] : ∃ bound. f}`.
pub fn length_1d(f: &Formula, x: &VarDecl, bound: &[VarDecl]) -> Result<Rat> {
    let pts = breakpoints_1d(f, x, bound)?;
    let bspace = Space::new(bound);
    let mut total = Rat::zero();
    for w in pts.windows(2) {
        let mid = (&w[0] + &w[1]) / rat::int(2);
        if member(f, &x.name, &mid, &bspace)? {
            total += &w[1] - &w[0];
        }
    }
    Ok(total)
}

/// Lines `a1·x1 + a2·x2 + c = 0` of the atoms of a quantifier-free `f`.
pub fn lines_2d(f: &Formula, x1: &VarDecl, x2: &VarDecl) -> Result<Vec<(Rat, Rat, Rat)>> {
    let f = lift_ite(f);
    let space = Space::new(&[x1.clone(), x2.clone()]);
    let mut out = BTreeSet::new();
    for a in f.atoms() {
        if let Formula::Atom(_, l, r) = a {
            let (k, c0) = space.difference(l, r)?;
            if k[0].is_zero() && k[1].is_zero() {
                continue;
            }
            let lc = LinCon {
                coeffs: k,
                c0,
                rel: Rel::Eq,
            }
            .normalized();
            out.insert((lc.coeffs[0].clone(), lc.coeffs[1].clone(), lc.c0));
        }
    }
    Ok(out.into_iter().collect())
}

/// Exact area of `{(x1, x2) in the box : f}` for quantifier-free `f`.
pub fn area_2d(f: &Formula, x1: &VarDecl, x2: &VarDecl) -> Result<Rat> {
    let mut lines = lines_2d(f, x1, x2)?;
    // Where a boundary line leaves through the top or bottom edge, the
    // slice length changes slope.
    lines.push((Rat::zero(), Rat::one(), -x2.lower.clone()));
    lines.push((Rat::zero(), Rat::one(), -x2.upper.clone()));
    let mut xs: BTreeSet<Rat> = BTreeSet::from([x1.lower.clone(), x1.upper.clone()]);
    let inside = |p: &Rat| *p >= x1.lower && *p <= x1.upper;
    for (i, (a1, a2, c)) in lines.iter().enumerate() {
        if a2.is_zero() {
            let p = -c / a1;
            if inside(&p) {
                xs.insert(p);
            }
        }
        for (b1, b2, d) in &lines[i + 1..] {
            let det = a1 * b2 - a2 * b1;
            if !det.is_zero() {
                // Cramer: x1 = (−c·b2 + a2·d) / det
                let p = (-c * b2 + a2 * d) / det;
                if inside(&p) {
                    xs.insert(p);
                }
            }
        }
    }
    let xs: Vec<Rat> = xs.into_iter().collect();
    let mut total = Rat::zero();
    for w in xs.windows(2) {
        let mid = (&w[0] + &w[1]) / rat::int(2);
        let slice = subst_real(f, &x1.name, &mid);
        total += length_1d(&slice, x2, &[])? * (&w[1] - &w[0]);
    }
    Ok(total)
}
