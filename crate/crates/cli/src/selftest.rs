//! Oracle-only checks; no solver is started.

use serde::Serialize;

use countersmt::continuous::{self, RealOptions};
use countersmt::discrete::{self, BruteBackend, CountOptions, EstimateKind};
use countersmt::ppl::{self, Mode, ValueOptions};
use countersmt::reference::{self, OracleBudget};
use countersmt::{formula, params, rat, Result};

const EXAMPLE1: &str = include_str!("../../../corpus/example1.prob");
const EXAMPLE2: &str = include_str!("../../../corpus/example2.prob");
const MONTY_HALL: &str = include_str!("../../../corpus/montyhall.ppl");
const HOST_DECIDES: &str = include_str!("../../../corpus/host_decides.ppl");

#[derive(Serialize)]
pub struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
pub struct Report {
    pub ok: bool,
    checks: Vec<Check>,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check {
            name,
            pass: false,
            detail: e.to_string(),
        },
    }
}

pub fn run() -> Report {
    let brute = BruteBackend(OracleBudget::default());
    let checks = vec![
        check("parameter pins", || {
            let p = params::derive(1, &rat::frac(1, 5), &rat::frac(1, 100), 2)?;
            Ok((
                (p.q, p.r, p.m_star, p.p) == (12, 62, 21, 1),
                format!("q={} r={} m*={} p={}", p.q, p.r, p.m_star, p.p),
            ))
        }),
        check("example 1 exact path", || {
            let f = formula::parse_problem(EXAMPLE1)?;
            let e = discrete::approx_count_int(&f, &CountOptions::default(), &brute)?;
            Ok((e.value == 2.0 && e.kind == EstimateKind::Exact, format!("{}", e.value)))
        }),
        check("monty hall value", || {
            let p = ppl::parse_program(MONTY_HALL)?;
            let exact = reference::exact_value(&p, &OracleBudget::default())?;
            let r = ppl::estimate_value(&p, Mode::Upper, &ValueOptions::default(), &brute)?;
            Ok((
                exact == rat::frac(2, 3) && (r.value - 2.0 / 3.0).abs() < 1e-12,
                format!("exact {} estimated {}", rat::display(&exact), r.value),
            ))
        }),
        check("example 2 at 64 cells per axis", || {
            let f = formula::parse_problem(EXAMPLE2)?;
            let ro = RealOptions {
                grid: Some(64),
                ..RealOptions::default()
            };
            let opts = CountOptions {
                a: 1_000_000,
                ..CountOptions::default()
            };
            let e = continuous::approx_count_real(&f, &ro, &opts, &brute)?;
            Ok(((e.value - 110.0 / 64.0).abs() < 1e-12, format!("{}", e.value)))
        }),
        check("duality", || {
            let p = ppl::parse_program(HOST_DECIDES)?;
            let b = OracleBudget::default();
            let upper = reference::exact_value(&p, &b)?;
            let lower = reference::exact_lower_value(&p, &b)?;
            let dual = reference::exact_value(&p.dualize(), &b)?;
            Ok((
                upper == rat::int(1) && lower == rat::int(0) && lower == rat::int(1) - dual,
                format!("upper {} lower {}", rat::display(&upper), rat::display(&lower)),
            ))
        }),
    ];
    Report {
        ok: checks.iter().all(|c| c.pass),
        checks,
    }
}
