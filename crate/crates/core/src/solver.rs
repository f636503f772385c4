//! SMT-LIB v2 client over a solver's stdin/stdout, with bounded model
//! enumeration by blocking clauses.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fs::File;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::formula::{self, Assignment, Formula, MeasuredFormula, Sort, SmtWriter, VarDecl};
use crate::sexp::{self, Sexp};

pub const SOLVER_ENV: &str = "COUNTERSMT_SOLVER";
pub const DEFAULT_SOLVER: &str = "z3 -in";

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub program: String,
    pub args: Vec<String>,
    /// Sent as `set-logic` when present.
    pub logic: Option<String>,
    pub timeout_ms: u64,
    pub seed_hint: u64,
    /// Directory receiving one transcript file per session.
    pub log_dir: Option<PathBuf>,
    /// Transcript file stem.
    pub label: String,
}

impl SolverConfig {
    /// Splits `cmd` on whitespace into program and arguments.
    pub fn from_command(cmd: &str) -> Result<Self> {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| Error::InvalidParameter("empty solver command".into()))?;
        Ok(SolverConfig {
            program,
            args: parts.collect(),
            logic: None,
            timeout_ms: 60_000,
            seed_hint: 0,
            log_dir: None,
            label: "session".into(),
        })
    }

    /// The explicit command if given, else `$COUNTERSMT_SOLVER`, else `z3 -in`.
    pub fn resolve(explicit: Option<&str>) -> Result<Self> {
        match explicit {
            Some(c) => Self::from_command(c),
            None => match std::env::var(SOLVER_ENV) {
                Ok(c) if !c.trim().is_empty() => Self::from_command(&c),
                _ => Self::from_command(DEFAULT_SOLVER),
            },
        }
    }

    pub fn command_line(&self) -> String {
        std::iter::once(self.program.as_str())
            .chain(self.args.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Models found by bounded enumeration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnumResult {
    pub count: u64,
    pub capped: bool,
    /// One entry per model, over the projection variables only.
    pub models: Vec<Assignment>,
    /// Values of all other declared variables, when requested.
    pub witnesses: Vec<Assignment>,
}

/// One enumeration problem: models of `base ∧ extra` counted as distinct
/// assignments to `project`.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub decls: &'a [VarDecl],
    pub base: &'a Formula,
    pub extra: &'a Formula,
    pub project: &'a [String],
    pub with_witness: bool,
}

impl<'a> Query<'a> {
    pub fn new(decls: &'a [VarDecl], base: &'a Formula, extra: &'a Formula, project: &'a [String]) -> Self {
        Query {
            decls,
            base,
            extra,
            project,
            with_witness: false,
        }
    }
}

/// Anything that can count models up to a bound.
pub trait Enumerator {
    fn count_up_to_with(&mut self, q: &Query<'_>, bound: u64) -> Result<EnumResult>;

    /// Whether at least `a` models exist. Implementations may skip reading
    /// the last model.
    fn at_least_with(&mut self, q: &Query<'_>, a: u64) -> Result<bool> {
        Ok(self.count_up_to_with(q, a)?.count >= a)
    }

    /// Number of solver round trips so far, for reports.
    fn calls(&self) -> u64 {
        0
    }
}

/// Projection names and the full declaration list of `f`.
fn formula_query_parts(f: &MeasuredFormula) -> (Vec<VarDecl>, Vec<String>) {
    let decls: Vec<VarDecl> = f.decls().cloned().collect();
    let project = f.free.iter().map(|d| d.name.clone()).collect();
    (decls, project)
}

/// Models of `f`, distinct on its free variables, up to `bound`.
pub fn count_up_to(e: &mut dyn Enumerator, f: &MeasuredFormula, bound: u64) -> Result<EnumResult> {
    let (decls, project) = formula_query_parts(f);
    e.count_up_to_with(&Query::new(&decls, &f.body, &Formula::True, &project), bound)
}

/// Like [`count_up_to`] with solver witnesses for the bound variables.
pub fn count_up_to_witnessed(e: &mut dyn Enumerator, f: &MeasuredFormula, bound: u64) -> Result<EnumResult> {
    let (decls, project) = formula_query_parts(f);
    let mut q = Query::new(&decls, &f.body, &Formula::True, &project);
    q.with_witness = true;
    e.count_up_to_with(&q, bound)
}

pub fn check_at_least(e: &mut dyn Enumerator, f: &MeasuredFormula, a: u64) -> Result<bool> {
    let (decls, project) = formula_query_parts(f);
    e.at_least_with(&Query::new(&decls, &f.body, &Formula::True, &project), a)
}

pub struct SolverSession {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<String>,
    timeout: Duration,
    transcript: Option<File>,
    /// Hash of the text asserted at push level 1.
    base_key: Option<u64>,
    dead: bool,
    calls: u64,
}

impl SolverSession {
    pub fn open(cfg: &SolverConfig) -> Result<Self> {
        if cfg.timeout_ms == 0 {
            return Err(Error::InvalidParameter("solver timeout must be positive".into()));
        }
        let mut child = Command::new(&cfg.program)
            .args(&cfg.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| Error::Spawn {
                cmd: cfg.command_line(),
                source,
            })?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) | Err(_) => break,
                    Ok(_) => {
                        if tx.send(line).is_err() {
                            break;
                        }
                    }
                }
            }
        });
        let transcript = match &cfg.log_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Some(File::create(dir.join(format!("{}.smt2", cfg.label)))?)
            }
            None => None,
        };
        let mut s = SolverSession {
            child,
            stdin,
            lines: rx,
            timeout: Duration::from_millis(cfg.timeout_ms),
            transcript,
            base_key: None,
            dead: false,
            calls: 0,
        };
        match s.command("(set-option :print-success true)") {
            Ok(Sexp::Atom(a, _)) if a == "success" => {}
            Ok(other) => return Err(Error::Handshake(format!("expected `success`, got `{other}`"))),
            Err(e) => return Err(Error::Handshake(e.to_string())),
        }
        // Seeds are best effort: some solvers reject the option.
        let _ = s.command(&format!("(set-option :random-seed {})", cfg.seed_hint % (1 << 31)))?;
        if let Some(logic) = &cfg.logic {
            s.expect_success(&format!("(set-logic {logic})"))?;
        }
        Ok(s)
    }

    fn log(&mut self, text: &str) {
        if let Some(f) = &mut self.transcript {
            let _ = f.write_all(text.as_bytes());
        }
    }

    /// Sends one command and reads one response.
    pub fn command(&mut self, cmd: &str) -> Result<Sexp> {
        if self.dead {
            return Err(Error::Solver("session is closed".into()));
        }
        self.log(cmd);
        self.log("\n");
        let stdin = self.stdin.as_mut().ok_or_else(|| Error::Solver("stdin closed".into()))?;
        if writeln!(stdin, "{cmd}").and_then(|_| stdin.flush()).is_err() {
            self.dead = true;
            return Err(Error::Solver("solver exited".into()));
        }
        let resp = self.read_response()?;
        self.log(&format!("; {resp}\n"));
        Ok(resp)
    }

    fn read_response(&mut self) -> Result<Sexp> {
        let deadline = Instant::now() + self.timeout;
        let mut text = String::new();
        let mut depth = 0i64;
        let mut in_string = false;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let line = match self.lines.recv_timeout(left) {
                Ok(l) => l,
                Err(RecvTimeoutError::Timeout) => {
                    self.kill();
                    return Err(Error::Timeout(self.timeout.as_millis() as u64));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    self.dead = true;
                    return Err(Error::Solver(format!("solver exited; partial output `{}`", text.trim())));
                }
            };
            depth += sexp::paren_balance(&line, &mut in_string);
            text.push_str(&line);
            if depth <= 0 && !in_string && !text.trim().is_empty() {
                break;
            }
        }
        let mut items = sexp::parse_all(&text).map_err(|e| Error::Solver(format!("unreadable response `{}`: {}", text.trim(), e.msg)))?;
        if items.len() != 1 {
            return Err(Error::Solver(format!("expected one response, got `{}`", text.trim())));
        }
        Ok(items.pop().unwrap())
    }

    fn expect_success(&mut self, cmd: &str) -> Result<()> {
        match self.command(cmd)? {
            Sexp::Atom(a, _) if a == "success" => Ok(()),
            other => Err(Error::Solver(format!("`{cmd}` answered `{other}`"))),
        }
    }

    fn check_sat(&mut self) -> Result<bool> {
        self.calls += 1;
        match self.command("(check-sat)")? {
            Sexp::Atom(a, _) if a == "sat" => Ok(true),
            Sexp::Atom(a, _) if a == "unsat" => Ok(false),
            Sexp::Atom(a, _) if a == "unknown" => Err(Error::SolverUnknown),
            other => Err(Error::Solver(format!("check-sat answered `{other}`"))),
        }
    }

    fn get_values(&mut self, names: &[&str]) -> Result<Assignment> {
        let mut out = Assignment::new();
        if names.is_empty() {
            return Ok(out);
        }
        let resp = self.command(&format!("(get-value ({}))", names.join(" ")))?;
        let pairs = resp
            .as_list()
            .filter(|l| l.first().and_then(Sexp::as_atom) != Some("error"))
            .ok_or_else(|| Error::Solver(format!("get-value answered `{resp}`")))?;
        for pair in pairs {
            match pair.as_list() {
                Some([name, value]) => {
                    let name = name.as_atom().ok_or_else(|| Error::Solver(format!("bad pair `{pair}`")))?;
                    let v = formula::parse_smt_value(value)
                        .ok_or_else(|| Error::Solver(format!("unreadable value `{value}`")))?;
                    out.insert(name.to_string(), v);
                }
                _ => return Err(Error::Solver(format!("bad pair `{pair}`"))),
            }
        }
        Ok(out)
    }

    /// Makes push level 1 hold exactly `decls` and `base`, reusing what is
    /// already there when unchanged.
    fn load_base(&mut self, decls: &[VarDecl], base: &Formula, w: &SmtWriter<'_>) -> Result<()> {
        let text = format!("{}(assert {})\n", formula::declarations(decls), w.formula(base));
        let mut h = DefaultHasher::new();
        text.hash(&mut h);
        let key = h.finish();
        if self.base_key == Some(key) {
            return Ok(());
        }
        if self.base_key.take().is_some() {
            self.expect_success("(pop 1)")?;
        }
        self.expect_success("(push 1)")?;
        for line in text.lines() {
            self.expect_success(line)?;
        }
        self.base_key = Some(key);
        Ok(())
    }

    fn enumerate(&mut self, q: &Query<'_>, bound: u64, read_last: bool) -> Result<EnumResult> {
        let sorts: HashMap<&str, Sort> = q.decls.iter().map(|d| (d.name.as_str(), d.sort)).collect();
        let lookup = |v: &str| sorts.get(v).copied();
        let w = SmtWriter::new(&lookup);
        formula::infer_logic(q.base, q.decls)?;
        self.load_base(q.decls, q.base, &w)?;
        self.expect_success("(push 1)")?;
        let result = self.enumerate_inner(q, bound, read_last, &w, &sorts);
        if !self.dead {
            self.expect_success("(pop 1)")?;
        }
        result
    }

    fn enumerate_inner(
        &mut self,
        q: &Query<'_>,
        bound: u64,
        read_last: bool,
        w: &SmtWriter<'_>,
        sorts: &HashMap<&str, Sort>,
    ) -> Result<EnumResult> {
        if *q.extra != Formula::True {
            self.expect_success(&format!("(assert {})", w.formula(q.extra)))?;
        }
        let project: Vec<&str> = q.project.iter().map(String::as_str).collect();
        let others: Vec<&str> = q
            .decls
            .iter()
            .map(|d| d.name.as_str())
            .filter(|n| !project.contains(n))
            .collect();
        let mut res = EnumResult::default();
        while res.count < bound {
            if !self.check_sat()? {
                return Ok(res);
            }
            res.count += 1;
            let last = res.count == bound;
            if last && !read_last {
                break;
            }
            let model = self.get_values(&project)?;
            if q.with_witness {
                res.witnesses.push(self.get_values(&others)?);
            }
            if project.is_empty() {
                res.models.push(model);
                break;
            }
            if !last {
                let diseqs: Vec<String> = model
                    .iter()
                    .map(|(name, v)| match sorts.get(name.as_str()) {
                        Some(Sort::Bool) if v.is_zero() => name.clone(),
                        Some(Sort::Bool) => format!("(not {name})"),
                        Some(s) => format!("(distinct {name} {})", formula::smt_const(v, *s == Sort::Real)),
                        None => unreachable!("projection variable is declared"),
                    })
                    .collect();
                let clause = if diseqs.len() == 1 {
                    diseqs[0].clone()
                } else {
                    format!("(or {})", diseqs.join(" "))
                };
                self.expect_success(&format!("(assert {clause})"))?;
            }
            res.models.push(model);
        }
        res.capped = res.count >= bound;
        Ok(res)
    }

    fn kill(&mut self) {
        self.dead = true;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Enumerator for SolverSession {
    fn count_up_to_with(&mut self, q: &Query<'_>, bound: u64) -> Result<EnumResult> {
        if bound == 0 {
            return Err(Error::InvalidParameter("enumeration bound must be at least 1".into()));
        }
        self.enumerate(q, bound, true)
    }

    fn at_least_with(&mut self, q: &Query<'_>, a: u64) -> Result<bool> {
        if a == 0 {
            return Ok(true);
        }
        Ok(self.enumerate(q, a, false)?.count >= a)
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}

impl Drop for SolverSession {
    fn drop(&mut self) {
        if !self.dead {
            if let Some(stdin) = &mut self.stdin {
                let _ = writeln!(stdin, "(exit)");
                let _ = stdin.flush();
            }
            self.stdin = None;
            // Give the solver a moment to exit on its own before killing it.
            for _ in 0..20 {
                if let Ok(Some(_)) = self.child.try_wait() {
                    return;
                }
                std::thread::sleep(Duration::from_millis(1));
            }
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Opens a session for the configured solver if one can be started.
pub fn probe(cfg: &SolverConfig) -> Option<SolverSession> {
    SolverSession::open(cfg).ok()
}
