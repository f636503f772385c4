use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::formula::Term;

use super::{Edge, Program, Stmt};

type Versions = BTreeMap<String, String>;

struct Namer(HashMap<String, usize>);

impl Namer {
    fn fresh(&mut self, x: &str) -> String {
        let k = self.0.entry(x.to_string()).or_insert(0);
        *k += 1;
        format!("{x}.{k}")
    }
}

fn read(map: &Versions, x: &str) -> Result<String> {
    map.get(x)
        .cloned()
        .ok_or_else(|| Error::IllFormed(format!("`{x}` may be read before it is defined")))
}

fn rename_term(t: &Term, map: &Versions) -> Result<Term> {
    let mut vars = std::collections::BTreeSet::new();
    t.collect_vars(&mut vars);
    for v in &vars {
        read(map, v)?;
    }
    Ok(t.rename(&|v| map[v].clone()))
}

/// Renames every definition to a fresh version `x.k`. Where paths with
/// different versions meet, a join version is introduced by assignment
/// edges placed just before the meeting vertex.
pub fn to_ssa(p: &Program) -> Result<Program> {
    let mut namer = Namer(HashMap::new());
    let mut pending: HashMap<usize, (Stmt, Versions)> = HashMap::new();
    let mut edges = Vec::new();
    let mut n = p.n_vertices;
    for &v in p.order() {
        let incoming: Vec<usize> = (0..p.edges.len()).filter(|i| p.edges[*i].to == v).collect();
        let entry = if incoming.is_empty() {
            Versions::new()
        } else {
            let outs: Vec<&Versions> = incoming.iter().map(|i| &pending[i].1).collect();
            let mut entry = Versions::new();
            let mut joins: Vec<Vec<(String, String)>> = vec![Vec::new(); incoming.len()];
            for (x, ver) in outs[0] {
                if !outs.iter().all(|o| o.contains_key(x)) {
                    continue;
                }
                if outs.iter().all(|o| &o[x] == ver) {
                    entry.insert(x.clone(), ver.clone());
                    continue;
                }
                let joined = namer.fresh(x);
                for (k, o) in outs.iter().enumerate() {
                    joins[k].push((joined.clone(), o[x].clone()));
                }
                entry.insert(x.clone(), joined);
            }
            for (k, i) in incoming.iter().enumerate() {
                let (stmt, _) = pending.remove(i).unwrap();
                let mut from = p.edges[*i].from;
                let mut stmt = stmt;
                for (dst, src) in joins[k].drain(..) {
                    edges.push(Edge { from, stmt, to: n });
                    from = n;
                    n += 1;
                    stmt = Stmt::Assign(dst, Term::Var(src));
                }
                edges.push(Edge { from, stmt, to: v });
            }
            entry
        };
        for i in (0..p.edges.len()).filter(|i| p.edges[*i].from == v) {
            let mut map = entry.clone();
            let stmt = match &p.edges[i].stmt {
                Stmt::Skip => Stmt::Skip,
                Stmt::Assume(f) => {
                    for x in f.vars() {
                        read(&map, &x)?;
                    }
                    Stmt::Assume(f.rename(&|x| map[x].clone()))
                }
                Stmt::Assign(x, t) => {
                    let t = rename_term(t, &map)?;
                    let x2 = namer.fresh(x);
                    map.insert(x.clone(), x2.clone());
                    Stmt::Assign(x2, t)
                }
                Stmt::Sample { var, lo, hi, real } => {
                    let x2 = namer.fresh(var);
                    map.insert(var.clone(), x2.clone());
                    Stmt::Sample {
                        var: x2,
                        lo: lo.clone(),
                        hi: hi.clone(),
                        real: *real,
                    }
                }
            };
            pending.insert(i, (stmt, map));
        }
    }
    Program::new(n, edges, p.init, p.acc, p.rej)
}

/// True when no path defines a variable twice.
pub fn is_ssa(p: &Program) -> bool {
    let mut defined: Vec<std::collections::BTreeSet<&str>> = vec![Default::default(); p.n_vertices];
    for &v in p.order() {
        for e in p.out_edges(v) {
            let mut d = defined[v].clone();
            if let Some(x) = e.stmt.defines() {
                if !d.insert(x) {
                    return false;
                }
            }
            defined[e.to].extend(d);
        }
    }
    true
}
