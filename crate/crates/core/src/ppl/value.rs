use serde::Serialize;

use crate::continuous::{self, GridSpec, RealOptions};
use crate::discrete::{self, Backend, CountEstimate, CountOptions, EstimateKind};
use crate::error::{Error, Result};
use crate::formula::{Formula, MeasuredFormula, Sort, Term, Theory, VarDecl};
use crate::params;
use crate::rat;

use super::ssa::{is_ssa, to_ssa};
use super::{Program, Stmt};

pub fn at_var(v: usize) -> String {
    format!("at${v}")
}

fn edge_formula(s: &Stmt) -> Formula {
    match s {
        Stmt::Skip | Stmt::Sample { .. } => Formula::True,
        Stmt::Assign(x, t) => Formula::atom(crate::formula::Cmp::Eq, Term::var(x.clone()), t.clone()),
        Stmt::Assume(p) => p.clone(),
    }
}

/// Reachability condition: the initial vertex holds, and every other vertex
/// that holds is entered along some edge whose source holds and whose
/// statement is satisfied. The initial vertex has no entering edge, so it
/// is left out of the implications.
pub fn vc(p: &Program) -> Formula {
    let mut parts = vec![Formula::Bool(at_var(p.init))];
    for v in (0..p.n_vertices).filter(|v| *v != p.init) {
        let into = Formula::or_all(
            p.in_edges(v)
                .map(|e| Formula::and_all([Formula::Bool(at_var(e.from)), edge_formula(&e.stmt)])),
        );
        parts.push(Formula::implies(Formula::Bool(at_var(v)), into));
    }
    Formula::and_all(parts)
}

/// Acceptance and termination formulas over the sampled variables, built on
/// the SSA form of the program.
#[derive(Debug, Clone)]
pub struct AccTerm {
    pub program: Program,
    pub acc: MeasuredFormula,
    pub term: MeasuredFormula,
}

pub fn acc_term_formulas(p: &Program) -> Result<AccTerm> {
    let p = if is_ssa(p) { p.clone() } else { to_ssa(p)? };
    let free = p.sample_decls();
    let reals = free.iter().filter(|d| d.sort == Sort::Real).count();
    let theory = if reals == 0 {
        Theory::Ia
    } else if reals == free.len() {
        Theory::Ra
    } else {
        let first = free.iter().find(|d| d.sort == Sort::Real).unwrap();
        return Err(Error::ContinuousSampleUnsupported(first.name.clone()));
    };
    let mut bound: Vec<VarDecl> = p.vars.iter().filter(|d| !p.samples.contains(&d.name)).cloned().collect();
    bound.extend((0..p.n_vertices).map(|v| VarDecl::boolean(at_var(v))));
    let at = |v: Option<usize>| v.map(|v| Formula::Bool(at_var(v))).unwrap_or(Formula::False);
    let base = vc(&p);
    let acc = Formula::and_all([base.clone(), at(p.acc)]);
    let term = Formula::and_all([base, Formula::or_all([at(p.acc), at(p.rej)])]);
    Ok(AccTerm {
        acc: MeasuredFormula::new(theory, free.clone(), bound.clone(), acc)?,
        term: MeasuredFormula::new(theory, free, bound, term)?,
        program: p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Default)]
pub struct ValueOptions {
    pub count: CountOptions,
    pub real: RealOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueReport {
    pub mode: Mode,
    pub value: f64,
    /// Interval the true value lies in when both counts meet their targets.
    pub band: (f64, f64),
    /// Counts for the program actually measured (the dual in lower mode).
    pub v_acc: CountEstimate,
    pub v_term: CountEstimate,
    pub grid: Option<GridSpec>,
    pub well_formed: bool,
}

fn rel_err(e: &CountEstimate) -> f64 {
    match e.kind {
        EstimateKind::Exact => 0.0,
        EstimateKind::Multiplicative { eps } => eps,
        EstimateKind::Additive { .. } => unreachable!("counts are multiplicative or exact"),
    }
}

fn as_count(r: continuous::RealEstimate) -> CountEstimate {
    CountEstimate {
        value: r.value,
        kind: EstimateKind::Additive { abs_err: r.abs_err },
        ..r.cells
    }
}

fn band(acc: &CountEstimate, term: &CountEstimate) -> (f64, f64) {
    let (a, t) = (acc.value, term.value);
    match (&acc.kind, &term.kind) {
        (EstimateKind::Additive { abs_err: ea }, EstimateKind::Additive { abs_err: et }) => {
            let lo = if t + et > 0.0 { ((a - ea) / (t + et)).max(0.0) } else { 0.0 };
            let hi = if t > *et { ((a + ea) / (t - et)).min(1.0) } else { 1.0 };
            (lo, hi)
        }
        _ => {
            let f = (1.0 + rel_err(acc)) * (1.0 + rel_err(term));
            let v = a / t;
            (v / f, (v * f).min(1.0))
        }
    }
}

fn upper(p: &Program, opts: &ValueOptions, backend: &dyn Backend) -> Result<(CountEstimate, CountEstimate, Option<GridSpec>)> {
    let at = acc_term_formulas(p)?;
    if at.acc.theory == Theory::Ia {
        let t = discrete::approx_count_int(&at.term, &opts.count, backend)?;
        if t.value == 0.0 {
            return Err(Error::ZeroTermination);
        }
        let a = discrete::approx_count_int(&at.acc, &opts.count, backend)?;
        return Ok((a, t, None));
    }
    // Both counts share one grid, fine enough for either formula.
    let mut ro = opts.real.clone();
    let formal = ro.grid.is_none();
    if formal {
        let eps = ro.eps_discrete.clone().unwrap_or_else(|| &ro.gamma / rat::int(2));
        let q = params::derive_unchecked(opts.count.a, &eps, &opts.count.alpha, 1)?.q;
        let mut s = 1;
        for f in [&at.acc, &at.term] {
            let scaled = continuous::scale(f)?;
            if !scaled.f.free.is_empty() {
                s = s.max(continuous::grid_params(&scaled, &ro.gamma, None, q, ro.bit_budget)?.s);
            }
        }
        ro.grid = Some(s);
    }
    let t = continuous::approx_count_real(&at.term, &ro, &opts.count, backend)?;
    if t.cells.value == 0.0 {
        return Err(Error::ZeroTermination);
    }
    let a = continuous::approx_count_real(&at.acc, &ro, &opts.count, backend)?;
    let mut grid = t.grid.clone();
    grid.formal = formal;
    Ok((as_count(a), as_count(t), Some(grid)))
}

/// Value of a program. The upper value is the acceptance measure over the
/// termination measure; the lower value is one minus the upper value of
/// the dual program.
pub fn estimate_value(p: &Program, mode: Mode, opts: &ValueOptions, backend: &dyn Backend) -> Result<ValueReport> {
    let target = match mode {
        Mode::Upper => p.clone(),
        Mode::Lower => p.dualize(),
    };
    let (v_acc, v_term, grid) = upper(&target, opts, backend)?;
    let v = (v_acc.value / v_term.value).clamp(0.0, 1.0);
    let (lo, hi) = band(&v_acc, &v_term);
    let (value, band) = match mode {
        Mode::Upper => (v, (lo, hi)),
        Mode::Lower => (1.0 - v, (1.0 - hi, 1.0 - lo)),
    };
    Ok(ValueReport {
        mode,
        value,
        band,
        v_acc,
        v_term,
        grid,
        well_formed: true,
    })
}
