//! Exact cell classification for square grids over `[0, M]^k`, k ≤ 2.
//! A cell meets a set when the closed cell intersects it, and is cut when
//! it meets both the set and its complement.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::formula::{Cmp, Formula, Term, VarDecl};
use crate::rat::{self, Rat};

use super::geometry::{self, LinCon, Rel, Space};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CellStats {
    pub cells: u128,
    pub meets: u128,
    pub cut: u128,
}

fn subst(f: &Formula, name: &str, v: &Rat) -> Formula {
    f.subst(&HashMap::from([(name.to_string(), Term::Const(v.clone()))]))
}

/// One free real variable over `[0, M]` (its declared domain), optionally
/// with real existentials.
pub fn cells_1d(f: &Formula, x: &VarDecl, bound: &[VarDecl], s: u64) -> Result<CellStats> {
    let m = &x.upper - &x.lower;
    let delta = &m / rat::int(s as i64);
    let bps = geometry::breakpoints_1d(f, x, bound)?;
    let space = Space::new(bound);
    let mut memo: HashMap<Rat, bool> = HashMap::new();
    let mut member = |v: Rat| -> Result<bool> {
        if let Some(b) = memo.get(&v) {
            return Ok(*b);
        }
        let b = geometry::satisfiable(&subst(f, &x.name, &v), &space)?;
        memo.insert(v, b);
        Ok(b)
    };
    let mut st = CellStats::default();
    let mut next_bp = 0;
    for y in 0..s {
        let lo = &x.lower + &delta * rat::int(y as i64);
        let hi = &lo + &delta;
        while next_bp < bps.len() && bps[next_bp] <= lo {
            next_bp += 1;
        }
        let mut pts = vec![lo.clone()];
        let mut j = next_bp;
        while j < bps.len() && bps[j] < hi {
            pts.push(bps[j].clone());
            j += 1;
        }
        pts.push(hi);
        let mut probes = Vec::with_capacity(2 * pts.len());
        for w in pts.windows(2) {
            probes.push(w[0].clone());
            probes.push((&w[0] + &w[1]) / rat::int(2));
        }
        probes.push(pts.last().unwrap().clone());
        let (mut yes, mut no) = (false, false);
        for p in probes {
            if member(p)? {
                yes = true;
            } else {
                no = true;
            }
        }
        st.cells += 1;
        st.meets += yes as u128;
        st.cut += (yes && no) as u128;
    }
    Ok(st)
}

/// An atom `P1·X1 + P2·X2 + P0 ⋈ 0` over half-cell coordinates, where
/// `x_i = lower_i + (M / 2s)·X_i`.
#[derive(Debug, Clone)]
struct IntAtom {
    cmp: Cmp,
    p: [i128; 3],
}

impl IntAtom {
    fn value(&self, x1: i128, x2: i128) -> i128 {
        self.p[0] * x1 + self.p[1] * x2 + self.p[2]
    }

    fn holds(&self, sign: i128) -> bool {
        self.cmp.holds(sign.cmp(&0))
    }
}

fn to_i128(n: &BigInt) -> Result<i128> {
    n.to_i128()
        .filter(|v| v.unsigned_abs() < (1u128 << 100))
        .ok_or_else(|| Error::Domain("grid coefficients too large for exact integer classification".into()))
}

/// Replaces each atom of `f` by a boolean placeholder `@i`.
fn skeleton(f: &Formula, atoms: &mut Vec<Formula>) -> Formula {
    match f {
        Formula::Atom(..) => {
            let i = match atoms.iter().position(|a| a == f) {
                Some(i) => i,
                None => {
                    atoms.push(f.clone());
                    atoms.len() - 1
                }
            };
            Formula::Bool(format!("@{i}"))
        }
        Formula::Not(g) => Formula::not(skeleton(g, atoms)),
        Formula::And(fs) => Formula::And(fs.iter().map(|g| skeleton(g, atoms)).collect()),
        Formula::Or(fs) => Formula::Or(fs.iter().map(|g| skeleton(g, atoms)).collect()),
        Formula::Xor(fs) => Formula::Xor(fs.iter().map(|g| skeleton(g, atoms)).collect()),
        Formula::Implies(a, b) => Formula::implies(skeleton(a, atoms), skeleton(b, atoms)),
        Formula::True | Formula::False | Formula::Bool(_) => f.clone(),
    }
}

fn eval_skeleton(sk: &Formula, truth: &[bool]) -> bool {
    sk.eval_with(&|v| {
        let i: usize = v.strip_prefix('@')?.parse().ok()?;
        Some(if truth[i] { Rat::one() } else { Rat::zero() })
    })
    .expect("skeleton variables are placeholders")
}

fn ceil_div(n: i128, d: i128) -> i128 {
    -(-n).div_euclid(d)
}

/// Two free real variables, quantifier-free. Both domains must have the
/// same width `M`.
pub fn cells_2d(f: &Formula, x1: &VarDecl, x2: &VarDecl, s: u64) -> Result<CellStats> {
    let m = &x1.upper - &x1.lower;
    if &x2.upper - &x2.lower != m {
        return Err(Error::Domain("grid axes must share one width".into()));
    }
    let f = geometry::lift_ite(f);
    let mut atom_list = Vec::new();
    let sk = skeleton(&f, &mut atom_list);
    let half = &m / rat::int(2 * s as i64);
    let mut atoms = Vec::new();
    for a in &atom_list {
        let Formula::Atom(c, l, r) = a else { unreachable!() };
        let diff = Term::Add(vec![l.clone(), Term::Neg(Box::new(r.clone()))]);
        let (map, c0) = diff
            .linearize()
            .ok_or_else(|| Error::NonLinear(crate::formula::formula_text(a)))?;
        let k1 = map.get(&x1.name).cloned().unwrap_or_else(Rat::zero);
        let k2 = map.get(&x2.name).cloned().unwrap_or_else(Rat::zero);
        if let Some(v) = map.keys().find(|v| **v != x1.name && **v != x2.name) {
            return Err(Error::IllFormed(format!("`{v}` is not a grid axis")));
        }
        // Shift the origin to the lower corner, then scale to half-cells.
        let shifted = &c0 + &k1 * &x1.lower + &k2 * &x2.lower;
        let coeffs = [&k1 * &half, &k2 * &half, shifted];
        let lcm = coeffs.iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
        let ints: Vec<i128> = coeffs
            .iter()
            .map(|q| to_i128(&(q * Rat::from_integer(lcm.clone())).to_integer()))
            .collect::<Result<_>>()?;
        atoms.push(IntAtom {
            cmp: *c,
            p: [ints[0], ints[1], ints[2]],
        });
    }
    let s_i = s as i128;
    let eval_at = |x1: i128, x2: i128| -> bool {
        let truth: Vec<bool> = atoms.iter().map(|a| a.holds(a.value(x1, x2).signum())).collect();
        eval_skeleton(&sk, &truth)
    };
    let mut st = CellStats::default();
    st.cells = (s as u128) * (s as u128);
    let mut touched = vec![false; s as usize];
    for i in 0..s_i {
        touched.iter_mut().for_each(|t| *t = false);
        let (c_lo, c_hi) = (2 * i, 2 * i + 2);
        for a in &atoms {
            let [p1, p2, p0] = a.p;
            if p2 == 0 {
                if p1 == 0 {
                    continue;
                }
                // Vertical line X1 = −P0/P1.
                let (n, d) = if p1 > 0 { (-p0, p1) } else { (p0, -p1) };
                if c_lo * d <= n && n <= c_hi * d {
                    touched.iter_mut().for_each(|t| *t = true);
                }
                continue;
            }
            // X2 = −(P1·X1 + P0)/P2 at both column edges.
            let (mut ends, d) = {
                let e = [-(p1 * c_lo + p0), -(p1 * c_hi + p0)];
                if p2 > 0 {
                    (e, p2)
                } else {
                    ([-e[0], -e[1]], -p2)
                }
            };
            ends.sort();
            // Cells [2j, 2j+2] touching [lo, hi]: lo − 2 ≤ 2j ≤ hi.
            let j_min = ceil_div(ends[0] - 2 * d, 2 * d).max(0);
            let j_max = ends[1].div_euclid(2 * d).min(s_i - 1);
            for j in j_min..=j_max {
                touched[j as usize] = true;
            }
        }
        let mut j = 0;
        while j < s_i {
            if touched[j as usize] {
                let (yes, no) = classify_touched(&atoms, &sk, i, j)?;
                st.meets += yes as u128;
                st.cut += (yes && no) as u128;
                j += 1;
            } else {
                let start = j;
                while j < s_i && !touched[j as usize] {
                    j += 1;
                }
                if eval_at(2 * i + 1, 2 * start + 1) {
                    st.meets += (j - start) as u128;
                }
            }
        }
    }
    Ok(st)
}

/// Truth values taken by `sk` on the closed cell `(i, j)`.
fn classify_touched(atoms: &[IntAtom], sk: &Formula, i: i128, j: i128) -> Result<(bool, bool)> {
    let corners = [(2 * i, 2 * j), (2 * i + 2, 2 * j), (2 * i, 2 * j + 2), (2 * i + 2, 2 * j + 2)];
    let mut fixed = Vec::with_capacity(atoms.len());
    let mut active = Vec::new();
    for (n, a) in atoms.iter().enumerate() {
        let vals = corners.map(|(x, y)| a.value(x, y));
        let lo = *vals.iter().min().unwrap();
        let hi = *vals.iter().max().unwrap();
        if lo > 0 || hi < 0 {
            fixed.push(Some(lo.signum()));
        } else {
            fixed.push(None);
            active.push((n, lo, hi));
        }
    }
    let mut seen = (false, false);
    let mut record = |signs: &[i128]| {
        let truth: Vec<bool> = atoms.iter().zip(signs).map(|(a, s)| a.holds(*s)).collect();
        if eval_skeleton(sk, &truth) {
            seen.0 = true;
        } else {
            seen.1 = true;
        }
    };
    let base: Vec<i128> = fixed.iter().map(|s| s.unwrap_or(0)).collect();
    match active.len() {
        0 => record(&base),
        1 => {
            let (n, lo, hi) = active[0];
            for sign in [-1, 0, 1] {
                let ok = match sign {
                    -1 => lo < 0,
                    1 => hi > 0,
                    _ => true,
                };
                if ok {
                    let mut s = base.clone();
                    s[n] = sign;
                    record(&s);
                }
            }
        }
        _ => {
            // Several lines through the cell: decide each sign pattern by
            // exact elimination over the cell.
            let cell = [
                con([-1, 0, 2 * i], Rel::Le),
                con([1, 0, -(2 * i + 2)], Rel::Le),
                con([0, -1, 2 * j], Rel::Le),
                con([0, 1, -(2 * j + 2)], Rel::Le),
            ];
            let combos = 3usize.pow(active.len() as u32);
            for code in 0..combos {
                let mut c = code;
                let mut cons = cell.to_vec();
                let mut s = base.clone();
                for &(n, _, _) in &active {
                    let sign = (c % 3) as i128 - 1;
                    c /= 3;
                    s[n] = sign;
                    let p = atoms[n].p;
                    cons.push(match sign {
                        -1 => con(p, Rel::Lt),
                        0 => con(p, Rel::Eq),
                        _ => con([-p[0], -p[1], -p[2]], Rel::Lt),
                    });
                }
                if geometry::feasible(cons, 2) {
                    record(&s);
                }
            }
        }
    }
    Ok(seen)
}

fn con(p: [i128; 3], rel: Rel) -> LinCon {
    LinCon {
        coeffs: vec![Rat::from_integer(p[0].into()), Rat::from_integer(p[1].into())],
        c0: Rat::from_integer(p[2].into()),
        rel,
    }
}
