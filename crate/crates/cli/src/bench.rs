//! The corpus runner: a structural table of encoding sizes and a table of
//! counting runs.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use serde_json::{json, Value};

use countersmt::discrete;
use countersmt::ppl::{self, Mode, ValueOptions};
use countersmt::reference::{self, OracleBudget};
use countersmt::{formula, params, rat};

use crate::{CliError, CliResult, Common};

pub const PROGRAMS: [&str; 5] = ["montyhall", "prisoners", "alarm", "grass", "egfr"];

/// Expected k′ under ε = 0.2, a = 1.
const PINNED_K: [(&str, u64); 2] = [("montyhall", 24), ("prisoners", 36)];

fn table1_row(name: &str, p: &ppl::Program) -> CliResult<Value> {
    let at = ppl::acc_term_formulas(p)?;
    let bz = discrete::binarize(&at.acc)?;
    let (eps, alpha) = (rat::frac(1, 5), rat::frac(1, 100));
    let pset = params::derive_unchecked(1, &eps, &alpha, bz.bits_per_copy)?;
    let atoms: BTreeSet<String> = at.term.body.atoms().into_iter().map(formula::formula_text).collect();
    Ok(json!({
        "program": name,
        "free": at.acc.free.len(),
        "atoms": atoms.len(),
        "eps": 0.2,
        "alpha": 0.01,
        "a": 1,
        "bits_per_copy": bz.bits_per_copy,
        "q": pset.q,
        "k_prime": pset.k_bits,
    }))
}

fn table2_row(name: &str, p: &ppl::Program, common: &Common) -> CliResult<Value> {
    let (backend, _) = common.backend()?;
    let opts = ValueOptions {
        count: common.count_options(),
        ..ValueOptions::default()
    };
    let t0 = Instant::now();
    let r = ppl::estimate_value(p, Mode::Upper, &opts, backend.as_ref())?;
    let secs = t0.elapsed().as_secs_f64();
    let exact = reference::exact_value(p, &OracleBudget::default())?;
    Ok(json!({
        "program": name,
        "value": r.value,
        "band": r.band,
        "exact": rat::display(&exact),
        "m_acc": r.v_acc.m,
        "m_term": r.v_term.m,
        "solver_calls": r.v_acc.solver_calls + r.v_term.solver_calls,
        "time_s": secs,
    }))
}

pub fn run(dir: &Path, common: &Common, table1_only: bool) -> CliResult<Value> {
    let missing: Vec<String> = PROGRAMS
        .iter()
        .map(|n| format!("{n}.ppl"))
        .filter(|f| !dir.join(f).is_file())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::CorpusIncomplete(missing));
    }
    let mut table1 = Vec::new();
    let mut table2 = Vec::new();
    for name in PROGRAMS {
        let p = ppl::parse_program(&crate::read(&dir.join(format!("{name}.ppl")))?)?;
        let row = table1_row(name, &p)?;
        if let Some((_, want)) = PINNED_K.iter().find(|(n, _)| *n == name) {
            if row["k_prime"] != json!(want) {
                return Err(CliError::Check(format!("{name}: k' is {}, expected {want}", row["k_prime"])));
            }
        }
        table1.push(row);
        if !table1_only {
            table2.push(table2_row(name, &p, common)?);
        }
    }
    let mut out = json!({ "table1": table1 });
    if !table1_only {
        out["table2"] = json!(table2);
        out["parameters"] = json!({
            "eps": rat::to_f64(&common.eps),
            "alpha": rat::to_f64(&common.alpha),
            "a": common.a,
            "seed": common.seed,
        });
    }
    Ok(out)
}
