//! Volume of bounded linear real formulas with additive error, by counting
//! the cells of a square grid that meet the set.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::discrete::{self, Backend, CountEstimate, CountOptions, EstimateKind};
use crate::error::{Error, Result};
use crate::formula::{self, Cmp, Formula, Measure, MeasuredFormula, Sort, Term, Theory, VarDecl};
use crate::params;
use crate::rat::{self, Rat};

/// A formula whose free variables all range over `[0, M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaled {
    pub f: MeasuredFormula,
    pub m: Rat,
    /// `Π (b_i − a_i) / M` over the kept axes.
    pub jacobian: Rat,
    /// Axes with a one-point domain, substituted away.
    pub dropped: Vec<String>,
    /// `(name, a_i, (b_i − a_i)/M)`: `x_i = a_i + factor · u_i`.
    pub back_map: Vec<(String, Rat, Rat)>,
}

pub fn scale(f: &MeasuredFormula) -> Result<Scaled> {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut point = HashMap::new();
    for d in &f.free {
        if d.sort != Sort::Real {
            return Err(Error::IllFormed(format!("`{}` is not a real variable", d.name)));
        }
        if d.lower > d.upper {
            return Err(Error::EmptyDomain(d.name.clone()));
        }
        if d.lower == d.upper {
            dropped.push(d.name.clone());
            point.insert(d.name.clone(), Term::Const(d.lower.clone()));
        } else {
            kept.push(d);
        }
    }
    let m = kept
        .iter()
        .map(|d| &d.upper - &d.lower)
        .max()
        .unwrap_or_else(Rat::one);
    let mut map = point;
    let mut free = Vec::new();
    let mut back_map = Vec::new();
    let mut jacobian = Rat::one();
    for d in kept {
        let factor = (&d.upper - &d.lower) / &m;
        jacobian *= &factor;
        map.insert(
            d.name.clone(),
            Term::Add(vec![
                Term::Const(d.lower.clone()),
                Term::Mul(vec![Term::Const(factor.clone()), Term::var(&d.name)]),
            ]),
        );
        back_map.push((d.name.clone(), d.lower.clone(), factor));
        free.push(VarDecl::real(&d.name, Rat::zero(), m.clone()));
    }
    let body = f.body.subst(&map);
    Ok(Scaled {
        f: MeasuredFormula::new(Theory::Ra, free, f.bound.clone(), body)?,
        m,
        jacobian,
        dropped,
        back_map,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub k: u64,
    #[serde(with = "rat")]
    pub m: Rat,
    pub m_bar: u64,
    pub s: u64,
    #[serde(with = "rat")]
    pub delta: Rat,
    pub formal: bool,
    /// Bits per copy after binarizing the cell indices.
    pub bits_per_copy: u64,
}

/// Key of an atom after moving everything to one side and scaling the
/// leading coefficient to ±1.
fn atom_key(c: Cmp, l: &Term, r: &Term) -> String {
    let diff = Term::Add(vec![l.clone(), Term::Neg(Box::new(r.clone()))]);
    match diff.linearize() {
        Some((map, c0)) => {
            let lead = map.values().find(|v| !v.is_zero()).map(rat::abs).unwrap_or_else(Rat::one);
            let terms: Vec<String> = map
                .iter()
                .filter(|(_, v)| !v.is_zero())
                .map(|(k, v)| format!("{}*{k}", rat::display(&(v / &lead))))
                .collect();
            format!("{} {} {}", c.symbol(), terms.join("+"), rat::display(&(c0 / lead)))
        }
        None => formula::formula_text(&Formula::Atom(c, l.clone(), r.clone())),
    }
}

/// Distinct atomic predicates of the matrix, counting the two domain
/// bounds of every existential variable.
pub fn count_atoms(f: &MeasuredFormula) -> u64 {
    let mut keys = BTreeSet::new();
    for a in f.body.atoms() {
        if let Formula::Atom(c, l, r) = a {
            keys.insert(atom_key(*c, l, r));
        }
    }
    for d in f.bound.iter().filter(|d| d.sort != Sort::Bool) {
        keys.insert(atom_key(Cmp::Ge, &Term::var(&d.name), &Term::Const(d.lower.clone())));
        keys.insert(atom_key(Cmp::Le, &Term::var(&d.name), &Term::Const(d.upper.clone())));
    }
    keys.len() as u64
}

/// `⌈2^(m̄+2k) · k² / (γ/2)⌉`.
pub fn formal_s(m_bar: u64, k: u64, gamma: &Rat) -> BigInt {
    let top = Rat::from_integer(BigInt::one() << (m_bar + 2 * k)) * rat::int((k * k) as i64) * rat::int(2);
    rat::ceil(&(top / gamma))
}

/// Grid for `scaled`. `bit_budget` bounds `⌈log₂ s⌉ · k · q`, the total
/// number of hashed bits.
pub fn grid_params(scaled: &Scaled, gamma: &Rat, override_s: Option<u64>, q: u64, bit_budget: u64) -> Result<GridSpec> {
    if !gamma.is_positive() {
        return Err(Error::InvalidParameter("gamma must be positive".into()));
    }
    let k = scaled.f.free.len() as u64;
    let m_bar = count_atoms(&scaled.f);
    let (s, formal) = match override_s {
        Some(0) => return Err(Error::InvalidParameter("grid size must be at least 1".into())),
        Some(s) => (BigInt::from(s), false),
        None => (formal_s(m_bar, k.max(1), gamma), true),
    };
    let per_axis = discrete::width(&s);
    let required = per_axis.saturating_mul(k).saturating_mul(q);
    if required > bit_budget {
        return Err(Error::Overflow {
            required,
            budget: bit_budget,
        });
    }
    let s = s.to_u64().ok_or(Error::Overflow {
        required,
        budget: bit_budget,
    })?;
    Ok(GridSpec {
        k,
        delta: &scaled.m / rat::int(s as i64),
        m: scaled.m.clone(),
        m_bar,
        s,
        formal,
        bits_per_copy: per_axis * k,
    })
}

pub fn cell_var(x: &str) -> String {
    format!("{x}~y")
}

/// `ψ(y) = ∃x. φ(x) ∧ x ∈ C(y)` with one integer cell index per axis,
/// each carrying weight `δ`.
pub fn discretize(scaled: &Scaled, grid: &GridSpec) -> Result<MeasuredFormula> {
    let mut free = Vec::new();
    let mut bound = Vec::new();
    let mut parts = vec![scaled.f.body.clone()];
    for d in &scaled.f.free {
        let y = cell_var(&d.name);
        free.push(VarDecl::int(&y, 0, grid.s as i64 - 1).with_measure(Measure::UniformWeight(grid.delta.clone())));
        bound.push(d.clone());
        let lo = Term::Mul(vec![Term::Const(grid.delta.clone()), Term::var(&y)]);
        let hi = Term::Add(vec![lo.clone(), Term::Const(grid.delta.clone())]);
        parts.push(Formula::atom(Cmp::Le, lo, Term::var(&d.name)));
        parts.push(Formula::atom(Cmp::Le, Term::var(&d.name), hi));
    }
    bound.extend(scaled.f.bound.iter().cloned());
    MeasuredFormula::new(Theory::Ia, free, bound, Formula::And(parts))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealEstimate {
    /// Estimated volume of the original formula.
    pub value: f64,
    /// Guaranteed additive error, `γ · Π(b_i − a_i)`, when the grid is formal.
    pub abs_err: f64,
    pub formal: bool,
    pub grid: GridSpec,
    #[serde(with = "rat")]
    pub jacobian: Rat,
    pub dropped: Vec<String>,
    /// The discrete run over cells; its value counts cells.
    pub cells: CountEstimate,
}

#[derive(Debug, Clone)]
pub struct RealOptions {
    pub gamma: Rat,
    pub grid: Option<u64>,
    /// Multiplicative target for the cell count; `γ/2` when absent.
    pub eps_discrete: Option<Rat>,
    pub bit_budget: u64,
}

impl Default for RealOptions {
    fn default() -> Self {
        RealOptions {
            gamma: rat::frac(1, 2),
            grid: None,
            eps_discrete: None,
            bit_budget: 4096,
        }
    }
}

pub fn approx_count_real(
    f: &MeasuredFormula,
    ro: &RealOptions,
    opts: &CountOptions,
    backend: &dyn Backend,
) -> Result<RealEstimate> {
    let scaled = scale(f)?;
    let eps = ro.eps_discrete.clone().unwrap_or_else(|| &ro.gamma / rat::int(2));
    let opts = CountOptions { eps, ..opts.clone() };
    if scaled.f.free.is_empty() {
        // Every axis was a point: the measure is 1 or 0.
        let psi = MeasuredFormula::new(Theory::Ia, vec![], scaled.f.bound.clone(), scaled.f.body.clone())?;
        let cells = discrete::approx_count_int(&psi, &opts, backend)?;
        let grid = GridSpec {
            k: 0,
            m: scaled.m.clone(),
            m_bar: count_atoms(&scaled.f),
            s: 1,
            delta: scaled.m.clone(),
            formal: true,
            bits_per_copy: 0,
        };
        return Ok(RealEstimate {
            value: cells.value,
            abs_err: 0.0,
            formal: true,
            grid,
            jacobian: Rat::one(),
            dropped: scaled.dropped,
            cells,
        });
    }
    let q = {
        // q depends only on (a, ε); the bit count is a placeholder.
        params::derive_unchecked(opts.a, &opts.eps, &opts.alpha, 1)?.q
    };
    let grid = grid_params(&scaled, &ro.gamma, ro.grid, q, ro.bit_budget)?;
    let psi = discretize(&scaled, &grid)?;
    let cells = discrete::approx_count_int(&psi, &opts, backend)?;
    let cell_volume = rat::to_f64(&grid.delta).powi(grid.k as i32);
    let value = cells.value * cell_volume * rat::to_f64(&scaled.jacobian);
    let widths: f64 = f
        .free
        .iter()
        .filter(|d| d.lower != d.upper)
        .map(|d| rat::to_f64(&(&d.upper - &d.lower)))
        .product();
    Ok(RealEstimate {
        value,
        abs_err: rat::to_f64(&ro.gamma) * widths,
        formal: grid.formal,
        grid,
        jacobian: scaled.jacobian.clone(),
        dropped: scaled.dropped,
        cells,
    })
}

impl RealEstimate {
    /// Whether the cell count came from the exact path.
    pub fn exact_cells(&self) -> bool {
        self.cells.kind == EstimateKind::Exact
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::BruteBackend;
    use crate::reference::{exact_weighted_grid_count, OracleBudget};

    pub(crate) fn example2() -> MeasuredFormula {
        formula::parse_problem(
            "(problem (theory ra)
               (var x real 0 10)
               (exists (y real 0 10))
               (assert (and (>= y 1) (<= y 10) (>= x 1) (<= x 10) (<= (+ (* 2 x) y) 6))))",
        )
        .unwrap()
    }

    #[test]
    fn scaling() {
        let s = scale(&example2()).unwrap();
        assert_eq!((s.m.clone(), s.jacobian.clone()), (rat::int(10), Rat::one()));
        let two = MeasuredFormula::new(
            Theory::Ra,
            vec![
                VarDecl::real("a", rat::int(0), rat::int(1)),
                VarDecl::real("b", rat::int(0), rat::int(2)),
            ],
            vec![],
            Formula::True,
        )
        .unwrap();
        let s = scale(&two).unwrap();
        assert_eq!(s.m, rat::int(2));
        assert_eq!(s.jacobian, rat::frac(1, 2));
        let point = MeasuredFormula::new(
            Theory::Ra,
            vec![VarDecl::real("z", rat::int(3), rat::int(3))],
            vec![],
            Formula::atom(Cmp::Ge, Term::var("z"), Term::int(2)),
        )
        .unwrap();
        let s = scale(&point).unwrap();
        assert_eq!(s.dropped, ["z"]);
        assert!(s.f.free.is_empty());
        assert_eq!(s.f.body, Formula::atom(Cmp::Ge, Term::int(3), Term::int(2)));
    }

    #[test]
    fn formal_sizes() {
        assert_eq!(formal_s(2, 1, &rat::frac(1, 2)), BigInt::from(64));
        assert_eq!(formal_s(5, 1, &rat::frac(1, 10)), BigInt::from(2560));
        assert_eq!(formal_s(4, 2, &rat::frac(1, 2)), BigInt::from(4096));
    }

    #[test]
    fn grid_override_and_budget() {
        let s = scale(&example2()).unwrap();
        // 5 body atoms and y ≥ 0; the bound y ≤ 10 repeats a body atom.
        assert_eq!(count_atoms(&s.f), 6);
        let g = grid_params(&s, &rat::frac(1, 2), Some(1024), 5, 4096).unwrap();
        assert!(!g.formal);
        assert_eq!((g.s, g.bits_per_copy), (1024, 10));
        assert_eq!(g.delta, rat::frac(10, 1024));
        let err = grid_params(&s, &rat::frac(1, 2), Some(1024), 5, 49).unwrap_err();
        assert!(matches!(err, Error::Overflow { required: 50, budget: 49 }));
    }

    #[test]
    fn example2_cells_at_64() {
        let s = scale(&example2()).unwrap();
        let g = grid_params(&s, &rat::frac(1, 2), Some(64), 1, 4096).unwrap();
        let psi = discretize(&s, &g).unwrap();
        let w = exact_weighted_grid_count(&psi, &OracleBudget::default()).unwrap();
        assert_eq!(w, rat::frac(11 * 10, 64));
    }

    #[test]
    fn full_and_empty_boxes() {
        let full = MeasuredFormula::new(
            Theory::Ra,
            vec![VarDecl::real("x", rat::int(0), rat::int(4))],
            vec![],
            Formula::True,
        )
        .unwrap();
        let s = scale(&full).unwrap();
        let g = grid_params(&s, &rat::frac(1, 2), Some(8), 1, 4096).unwrap();
        let psi = discretize(&s, &g).unwrap();
        assert_eq!(exact_weighted_grid_count(&psi, &OracleBudget::default()).unwrap(), rat::int(4));
        let empty = MeasuredFormula { body: Formula::False, ..full };
        let psi = discretize(&scale(&empty).unwrap(), &g).unwrap();
        assert!(exact_weighted_grid_count(&psi, &OracleBudget::default()).unwrap().is_zero());
    }

    #[test]
    fn redundant_existential_keeps_cells() {
        let s = scale(&example2()).unwrap();
        let g = grid_params(&s, &rat::frac(1, 2), Some(64), 1, 4096).unwrap();
        let mut with_u = s.clone();
        with_u.f.bound.push(VarDecl::real("u", rat::int(0), rat::int(1)));
        let a = crate::reference::models(&discretize(&s, &g).unwrap(), &OracleBudget::default()).unwrap();
        let b = crate::reference::models(&discretize(&with_u, &g).unwrap(), &OracleBudget::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pipeline_on_small_grid_without_solver() {
        // x ≤ 5 on [0, 10] with s = 8 meets cells 0..=4: 5 · 10/8.
        let f = MeasuredFormula::new(
            Theory::Ra,
            vec![VarDecl::real("x", rat::int(0), rat::int(10))],
            vec![],
            Formula::atom(Cmp::Le, Term::var("x"), Term::int(5)),
        )
        .unwrap();
        let ro = RealOptions {
            grid: Some(8),
            ..RealOptions::default()
        };
        let opts = CountOptions {
            a: 100,
            ..CountOptions::default()
        };
        let est = approx_count_real(&f, &ro, &opts, &BruteBackend(OracleBudget::default())).unwrap();
        assert!(est.exact_cells());
        assert_eq!(est.value, 6.25);
        assert!(!est.formal);
        assert_eq!(est.abs_err, 5.0);
    }
}
