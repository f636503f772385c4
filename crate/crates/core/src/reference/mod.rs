//! Brute-force ground truth. Nothing here talks to a solver: discrete
//! variables are enumerated, real existentials are decided by exact
//! Fourier–Motzkin elimination.

pub mod geometry;
pub mod grid;
pub mod interval;
pub mod program;

use std::collections::HashMap;

use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::formula::{Assignment, Formula, MeasuredFormula, Sort, Term, VarDecl};
use crate::rat::{self, Rat};
use crate::solver::{EnumResult, Enumerator, Query};
use interval::{Slot, Tri};
pub use program::{exact_lower_value, exact_measures, exact_value, monte_carlo_value, Measures};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_points: u128,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_points: 1 << 20 }
    }
}

impl OracleBudget {
    pub fn new(max_points: u128) -> Result<Self> {
        if max_points == 0 {
            return Err(Error::InvalidParameter("oracle budget must be positive".into()));
        }
        Ok(OracleBudget { max_points })
    }
}

fn values(d: &VarDecl) -> Vec<Rat> {
    let lo = rat::ceil(&d.lower);
    let hi = rat::floor(&d.upper);
    let mut out = Vec::new();
    let mut v = lo;
    while v <= hi {
        out.push(Rat::from_integer(v.clone()));
        v += 1;
    }
    out
}

fn space_size(decls: &[&VarDecl], budget: &OracleBudget) -> Result<u128> {
    let mut total: u128 = 1;
    for d in decls {
        let n = d
            .domain_size()
            .ok_or_else(|| Error::IllFormed(format!("`{}` is not discrete", d.name)))?;
        let n = n.to_u128().unwrap_or(u128::MAX);
        total = total.saturating_mul(n);
    }
    if total > budget.max_points {
        return Err(Error::BudgetExceeded {
            needed: total,
            budget: budget.max_points,
        });
    }
    Ok(total)
}

/// Calls `visit` on every point of the product of discrete domains, last
/// variable fastest. Stops early when `visit` returns false.
fn odometer(decls: &[&VarDecl], mut visit: impl FnMut(&[Rat]) -> Result<bool>) -> Result<()> {
    let doms: Vec<Vec<Rat>> = decls.iter().map(|d| values(d)).collect();
    if doms.iter().any(Vec::is_empty) {
        return Ok(());
    }
    let mut idx = vec![0usize; doms.len()];
    let mut point: Vec<Rat> = doms.iter().map(|d| d[0].clone()).collect();
    loop {
        if !visit(&point)? {
            return Ok(());
        }
        let mut j = doms.len();
        loop {
            if j == 0 {
                return Ok(());
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < doms[j].len() {
                point[j] = doms[j][idx[j]].clone();
                break;
            }
            idx[j] = 0;
            point[j] = doms[j][0].clone();
        }
    }
}

/// Existential search over the bound variables of one free point.
struct Witness<'a> {
    body: &'a Formula,
    discrete: Vec<&'a VarDecl>,
    reals: Vec<VarDecl>,
}

impl<'a> Witness<'a> {
    fn new(body: &'a Formula, bound: &'a [&'a VarDecl]) -> Self {
        Witness {
            body,
            discrete: bound.iter().copied().filter(|d| d.sort != Sort::Real).collect(),
            reals: bound.iter().filter(|d| d.sort == Sort::Real).map(|d| (*d).clone()).collect(),
        }
    }

    fn env_for(&self, fixed: &HashMap<String, Rat>) -> interval::Env {
        let mut env = interval::Env::new();
        for (k, v) in fixed {
            env.insert(k.clone(), Slot::Val(v.clone()));
        }
        for d in self.discrete.iter().filter(|d| !fixed.contains_key(&d.name)) {
            env.insert(d.name.clone(), Slot::Range(d.lower.clone(), d.upper.clone()));
        }
        for d in &self.reals {
            env.insert(d.name.clone(), Slot::Range(d.lower.clone(), d.upper.clone()));
        }
        env
    }

    /// A witness for the discrete bound variables, if one exists.
    fn find(&self, fixed: &mut HashMap<String, Rat>, next: usize) -> Result<Option<Assignment>> {
        let env = self.env_for(fixed);
        let tri = interval::formula(self.body, &env).ok_or_else(|| {
            let missing = self.body.vars().into_iter().find(|v| !env.contains_key(v)).unwrap_or_default();
            Error::MissingVariable(missing)
        })?;
        match tri {
            Tri::False => return Ok(None),
            Tri::True if self.reals.iter().all(|d| d.lower <= d.upper) => {
                return Ok(Some(self.complete(fixed)));
            }
            _ => {}
        }
        if next == self.discrete.len() {
            return if self.reals_satisfiable(fixed)? {
                Ok(Some(self.complete(fixed)))
            } else {
                Ok(None)
            };
        }
        let d = self.discrete[next];
        for v in values(d) {
            fixed.insert(d.name.clone(), v);
            if let Some(w) = self.find(fixed, next + 1)? {
                fixed.remove(&d.name);
                return Ok(Some(w));
            }
        }
        fixed.remove(&d.name);
        Ok(None)
    }

    /// Fills still-open discrete variables with their lower bounds; any
    /// value works once the formula is known true on the whole range.
    fn complete(&self, fixed: &HashMap<String, Rat>) -> Assignment {
        let mut w = Assignment::new();
        for d in &self.discrete {
            w.insert(d.name.clone(), fixed.get(&d.name).cloned().unwrap_or_else(|| d.lower.clone()));
        }
        w
    }

    fn reals_satisfiable(&self, fixed: &HashMap<String, Rat>) -> Result<bool> {
        let mut terms = HashMap::new();
        let mut bools = HashMap::new();
        for (k, v) in fixed {
            terms.insert(k.clone(), Term::Const(v.clone()));
            bools.insert(k.clone(), if v.is_zero() { Formula::False } else { Formula::True });
        }
        let f = self.body.subst_bool(&bools).subst(&terms);
        geometry::satisfiable(&f, &geometry::Space::new(&self.reals))
    }
}

fn discrete_free(f: &MeasuredFormula) -> Result<Vec<&VarDecl>> {
    f.free
        .iter()
        .map(|d| match d.sort {
            Sort::Real => Err(Error::NonIntegerFreeVar(d.name.clone())),
            _ => Ok(d),
        })
        .collect()
}

/// Visits every free point that has a witness.
fn for_each_model(
    f: &MeasuredFormula,
    budget: &OracleBudget,
    reverse: bool,
    mut visit: impl FnMut(&[&VarDecl], &[Rat]) -> Result<bool>,
) -> Result<()> {
    let mut free = discrete_free(f)?;
    if reverse {
        free.reverse();
    }
    space_size(&free, budget)?;
    let bound: Vec<&VarDecl> = f.bound.iter().collect();
    let w = Witness::new(&f.body, &bound);
    odometer(&free, |point| {
        let mut fixed: HashMap<String, Rat> =
            free.iter().zip(point).map(|(d, v)| (d.name.clone(), v.clone())).collect();
        if w.find(&mut fixed, 0)?.is_some() {
            visit(&free, point)
        } else {
            Ok(true)
        }
    })
}

/// Exact number of free-variable assignments with a witness. The budget
/// applies to the free space; bound variables are searched with pruning.
pub fn exact_count(f: &MeasuredFormula, budget: &OracleBudget, reverse: bool) -> Result<u128> {
    let mut n = 0u128;
    for_each_model(f, budget, reverse, |_, _| {
        n += 1;
        Ok(true)
    })?;
    Ok(n)
}

pub fn exact_count_int(f: &MeasuredFormula, budget: &OracleBudget) -> Result<u128> {
    exact_count(f, budget, false)
}

/// Sum over models of the product of per-variable point weights.
pub fn exact_weighted_count(f: &MeasuredFormula, budget: &OracleBudget) -> Result<Rat> {
    let mut total = Rat::zero();
    let weight: Rat = f.free.iter().map(VarDecl::point_weight).product();
    for_each_model(f, budget, false, |_, _| {
        total += &weight;
        Ok(true)
    })?;
    Ok(total)
}

/// Weighted count of a discretized formula over grid cells.
pub fn exact_weighted_grid_count(psi: &MeasuredFormula, budget: &OracleBudget) -> Result<Rat> {
    exact_weighted_count(psi, budget)
}

/// Every model, as free-variable assignments in declaration order.
pub fn models(f: &MeasuredFormula, budget: &OracleBudget) -> Result<Vec<Assignment>> {
    let mut out = Vec::new();
    for_each_model(f, budget, false, |free, point| {
        out.push(free.iter().zip(point).map(|(d, v)| (d.name.clone(), v.clone())).collect());
        Ok(true)
    })?;
    Ok(out)
}

/// Solver-free stand-in for a solver session, enumerating the projection
/// space exhaustively.
#[derive(Debug, Clone, Default)]
pub struct BruteEnumerator {
    pub budget: OracleBudget,
    calls: u64,
}

impl BruteEnumerator {
    pub fn new(budget: OracleBudget) -> Self {
        BruteEnumerator { budget, calls: 0 }
    }
}

impl Enumerator for BruteEnumerator {
    fn count_up_to_with(&mut self, q: &Query<'_>, bound: u64) -> Result<EnumResult> {
        if bound == 0 {
            return Err(Error::InvalidParameter("enumeration bound must be at least 1".into()));
        }
        self.calls += 1;
        let by_name: HashMap<&str, &VarDecl> = q.decls.iter().map(|d| (d.name.as_str(), d)).collect();
        let project: Vec<&VarDecl> = q
            .project
            .iter()
            .map(|n| by_name.get(n.as_str()).copied().ok_or_else(|| Error::MissingVariable(n.clone())))
            .collect::<Result<_>>()?;
        space_size(&project, &self.budget)?;
        let others: Vec<&VarDecl> = q.decls.iter().filter(|d| !q.project.contains(&d.name)).collect();
        let body = Formula::and_all([q.base.clone(), q.extra.clone()]);
        let w = Witness::new(&body, &others);
        let mut res = EnumResult::default();
        odometer(&project, |point| {
            let mut fixed: HashMap<String, Rat> =
                project.iter().zip(point).map(|(d, v)| (d.name.clone(), v.clone())).collect();
            if let Some(wit) = w.find(&mut fixed, 0)? {
                res.count += 1;
                res.models
                    .push(project.iter().zip(point).map(|(d, v)| (d.name.clone(), v.clone())).collect());
                if q.with_witness {
                    res.witnesses.push(wit);
                }
            }
            Ok(res.count < bound)
        })?;
        res.capped = res.count >= bound;
        Ok(res)
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}
