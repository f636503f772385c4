//! Loop-free probabilistic programs: parsing to a control-flow automaton,
//! SSA renaming, verification conditions and value estimation.

mod parse;
mod ssa;
mod value;

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::formula::{Assignment, Formula, Measure, Sort, Term, VarDecl};
use crate::rat::{self, Rat};

pub use parse::{parse_ast, parse_program, Ast};
pub use ssa::to_ssa;
pub use value::{acc_term_formulas, estimate_value, vc, AccTerm, Mode, ValueOptions, ValueReport};

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Skip,
    Assign(String, Term),
    Sample { var: String, lo: Rat, hi: Rat, real: bool },
    Assume(Formula),
}

impl Stmt {
    pub fn defines(&self) -> Option<&str> {
        match self {
            Stmt::Assign(x, _) | Stmt::Sample { var: x, .. } => Some(x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub stmt: Stmt,
    pub to: usize,
}

/// A control-flow automaton over vertices `0..n_vertices`.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub n_vertices: usize,
    pub edges: Vec<Edge>,
    pub init: usize,
    pub acc: Option<usize>,
    pub rej: Option<usize>,
    /// Every variable with its domain. Assigned variables get the interval
    /// hull of their right-hand sides.
    pub vars: Vec<VarDecl>,
    /// Sampled variables in order of first occurrence.
    pub samples: Vec<String>,
    order: Vec<usize>,
}

impl Program {
    pub fn new(n_vertices: usize, edges: Vec<Edge>, init: usize, acc: Option<usize>, rej: Option<usize>) -> Result<Self> {
        for v in [Some(init), acc, rej].into_iter().flatten() {
            if v >= n_vertices {
                return Err(Error::IllFormed(format!("vertex {v} out of range")));
            }
        }
        if acc.is_some() && acc == rej {
            return Err(Error::IllFormed("accepting and rejecting vertex coincide".into()));
        }
        for e in &edges {
            if e.from >= n_vertices || e.to >= n_vertices {
                return Err(Error::IllFormed(format!("edge {}->{} out of range", e.from, e.to)));
            }
        }
        let order = topo_order(n_vertices, &edges)?;
        let mut p = Program {
            n_vertices,
            edges,
            init,
            acc,
            rej,
            vars: Vec::new(),
            samples: Vec::new(),
            order,
        };
        p.infer_vars()?;
        Ok(p)
    }

    /// Vertices in a topological order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn out_edges(&self, v: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.from == v)
    }

    pub fn in_edges(&self, v: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.to == v)
    }

    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.vars.iter().find(|d| d.name == name)
    }

    pub fn sample_decls(&self) -> Vec<VarDecl> {
        self.samples.iter().map(|s| self.var(s).expect("sample declared").clone()).collect()
    }

    /// Same automaton with accepting and rejecting vertices swapped.
    pub fn dualize(&self) -> Program {
        Program {
            acc: self.rej,
            rej: self.acc,
            ..self.clone()
        }
    }

    fn infer_vars(&mut self) -> Result<()> {
        let rank: HashMap<usize, usize> = self.order.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let mut edges: Vec<&Edge> = self.edges.iter().collect();
        edges.sort_by_key(|e| rank[&e.from]);
        let mut vars: BTreeMap<String, VarDecl> = BTreeMap::new();
        let mut first: Vec<String> = Vec::new();
        let mut samples = Vec::new();
        for e in edges {
            let decl = match &e.stmt {
                Stmt::Sample { var, lo, hi, real } => {
                    if !samples.contains(var) {
                        samples.push(var.clone());
                    }
                    if *real {
                        VarDecl::real(var.clone(), lo.clone(), hi.clone())
                    } else {
                        VarDecl::new(var.clone(), Sort::Int, lo.clone(), hi.clone(), Measure::Counting)?
                    }
                }
                Stmt::Assign(x, t) => {
                    let (lo, hi, int) = range(t, &vars)?;
                    if int {
                        VarDecl::new(x.clone(), Sort::Int, lo, hi, Measure::Counting)?
                    } else {
                        VarDecl::real(x.clone(), lo, hi)
                    }
                }
                _ => continue,
            };
            match vars.get_mut(&decl.name) {
                Some(old) => {
                    if old.sort != decl.sort {
                        return Err(Error::IllFormed(format!("`{}` is both integer and real", decl.name)));
                    }
                    if decl.lower < old.lower {
                        old.lower = decl.lower;
                    }
                    if decl.upper > old.upper {
                        old.upper = decl.upper;
                    }
                }
                None => {
                    first.push(decl.name.clone());
                    vars.insert(decl.name.clone(), decl);
                }
            }
        }
        if let Some(s) = samples.iter().find(|s| self.edges.iter().any(|e| matches!(&e.stmt, Stmt::Assign(x, _) if x == *s))) {
            return Err(Error::IllFormed(format!("`{s}` is both sampled and assigned")));
        }
        self.vars = first.into_iter().map(|n| vars.remove(&n).unwrap()).collect();
        self.samples = samples;
        Ok(())
    }

    /// Runs the program on a scenario. Returns whether some run accepts and
    /// whether some run terminates (accepts or rejects).
    pub fn interpret(&self, scenario: &Assignment) -> Result<(bool, bool)> {
        let (acc, rej) = self.reaches(scenario)?;
        Ok((acc, acc || rej))
    }

    /// Whether some run reaches the accepting, resp. rejecting, vertex.
    pub fn reaches(&self, scenario: &Assignment) -> Result<(bool, bool)> {
        let mut acc = false;
        let mut rej = false;
        let mut stack: Vec<(usize, HashMap<String, Rat>)> = vec![(self.init, HashMap::new())];
        while let Some((v, env)) = stack.pop() {
            if Some(v) == self.acc {
                acc = true;
                continue;
            }
            if Some(v) == self.rej {
                rej = true;
                continue;
            }
            for e in self.out_edges(v) {
                let lookup = |n: &str| env.get(n).cloned();
                let mut next = env.clone();
                match &e.stmt {
                    Stmt::Skip => {}
                    Stmt::Assign(x, t) => {
                        next.insert(x.clone(), t.eval(&lookup)?);
                    }
                    Stmt::Sample { var, .. } => {
                        let val = scenario.get(var).ok_or_else(|| Error::MissingVariable(var.clone()))?;
                        next.insert(var.clone(), val.clone());
                    }
                    Stmt::Assume(p) => {
                        if !p.eval_with(&lookup)? {
                            continue;
                        }
                    }
                }
                stack.push((e.to, next));
            }
            if acc && rej {
                break;
            }
        }
        Ok((acc, rej))
    }
}

fn topo_order(n: usize, edges: &[Edge]) -> Result<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    for e in edges {
        indeg[e.to] += 1;
    }
    let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|v| indeg[*v] == 0).collect();
    let mut out = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        out.push(v);
        for e in edges.iter().filter(|e| e.from == v) {
            indeg[e.to] -= 1;
            if indeg[e.to] == 0 {
                ready.insert(e.to);
            }
        }
    }
    match (0..n).find(|v| indeg[*v] > 0) {
        Some(v) => Err(Error::Cycle(v)),
        None => Ok(out),
    }
}

/// Interval hull of a term and whether it is integer-valued.
fn range(t: &Term, vars: &BTreeMap<String, VarDecl>) -> Result<(Rat, Rat, bool)> {
    Ok(match t {
        Term::Const(c) => (c.clone(), c.clone(), rat::is_int(c)),
        Term::Var(x) => {
            let d = vars
                .get(x)
                .ok_or_else(|| Error::IllFormed(format!("`{x}` is read before it is defined")))?;
            (d.lower.clone(), d.upper.clone(), d.sort != Sort::Real)
        }
        Term::Neg(a) => {
            let (lo, hi, int) = range(a, vars)?;
            (-hi, -lo, int)
        }
        Term::Add(ts) => {
            let mut acc = (Rat::from_integer(0.into()), Rat::from_integer(0.into()), true);
            for t in ts {
                let (lo, hi, int) = range(t, vars)?;
                acc = (acc.0 + lo, acc.1 + hi, acc.2 && int);
            }
            acc
        }
        Term::Mul(ts) => {
            let mut acc = (Rat::from_integer(1.into()), Rat::from_integer(1.into()), true);
            for t in ts {
                let (lo, hi, int) = range(t, vars)?;
                let c = [&acc.0 * &lo, &acc.0 * &hi, &acc.1 * &lo, &acc.1 * &hi];
                let min = c.iter().min().unwrap().clone();
                let max = c.iter().max().unwrap().clone();
                acc = (min, max, acc.2 && int);
            }
            acc
        }
        Term::Ite(..) => return Err(Error::IllFormed("conditional term in a program".into())),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub const MONTY_HALL: &str = "\
c ~ uniform(1, 3);
i := 1;
choice { j := 2; assume(j != c); } or { j := 3; assume(j != c); }
if (i != c) { accept; } else { reject; }
";

    fn scenario(pairs: &[(&str, i64)]) -> Assignment {
        pairs.iter().map(|(k, v)| (k.to_string(), rat::int(*v))).collect()
    }

    #[test]
    fn monty_hall_cfa_shape() {
        let p = parse_program(MONTY_HALL).unwrap();
        assert_eq!(p.n_vertices, 8);
        assert_eq!(p.edges.len(), 8);
        let acc = p.acc.unwrap();
        let rej = p.rej.unwrap();
        // Both choice branches meet at one vertex, which then branches on i != c.
        let join: Vec<usize> = p.in_edges(acc).map(|e| e.from).chain(p.in_edges(rej).map(|e| e.from)).collect();
        assert_eq!(join.len(), 2);
        assert_eq!(join[0], join[1]);
        assert_eq!(p.in_edges(join[0]).count(), 2);
        assert!(p.in_edges(join[0]).all(|e| matches!(e.stmt, Stmt::Assume(_))));
        let branch = p.out_edges(p.init).next().unwrap();
        assert!(matches!(&branch.stmt, Stmt::Sample { var, real: false, .. } if var == "c"));
        assert_eq!(p.samples, vec!["c".to_string()]);
        assert_eq!(p.var("j").unwrap().lower, rat::int(2));
        assert_eq!(p.var("j").unwrap().upper, rat::int(3));
    }

    #[test]
    fn interpret_monty_hall() {
        let p = parse_program(MONTY_HALL).unwrap();
        assert_eq!(p.interpret(&scenario(&[("c", 1)])).unwrap(), (false, true));
        assert_eq!(p.interpret(&scenario(&[("c", 2)])).unwrap(), (true, true));
        assert_eq!(p.interpret(&scenario(&[("c", 3)])).unwrap(), (true, true));
        let d = p.dualize();
        assert_eq!(d.interpret(&scenario(&[("c", 2)])).unwrap(), (false, true));
        assert!(matches!(p.interpret(&Assignment::new()), Err(Error::MissingVariable(_))));
    }

    #[test]
    fn cycle_detected() {
        let e = |from, to| Edge {
            from,
            stmt: Stmt::Skip,
            to,
        };
        let r = Program::new(3, vec![e(0, 1), e(1, 2), e(2, 1)], 0, Some(2), None);
        assert!(matches!(r, Err(Error::Cycle(_))));
    }

    #[test]
    fn ranges_of_assignments() {
        let p = parse_program("x ~ uniform(-2, 3); y := x * x - 1; z := x + 0.5; accept;").unwrap();
        let y = p.var("y").unwrap();
        assert_eq!((y.sort, y.lower.clone(), y.upper.clone()), (Sort::Int, rat::int(-7), rat::int(8)));
        assert_eq!(p.var("z").unwrap().sort, Sort::Real);
        assert!(matches!(parse_program("y := x; accept;"), Err(Error::IllFormed(_))));
        assert!(matches!(parse_program("x ~ uniform(0,1); x := 2; accept;"), Err(Error::IllFormed(_))));
    }

    #[test]
    fn real_sample_literal() {
        let p = parse_program("x ~ uniform(0, 1.0); accept;").unwrap();
        assert_eq!(p.var("x").unwrap().sort, Sort::Real);
        let q = parse_program("x ~ uniform(0, 1); assume(x >= 1); accept;").unwrap();
        assert_eq!(q.var("x").unwrap().sort, Sort::Int);
    }
}
