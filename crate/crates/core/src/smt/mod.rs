//! Single point of logical truth: satisfiability with models,
//! quantifier elimination, and formula equivalence, delegated to an
//! external SMT-LIB 2 solver process.
//!
//! Boolean variables are compiled to 0/1 integer variables (with
//! `0 <= b <= 1` clamps) before solving, so every query runs in one
//! mixed linear integer/rational arithmetic theory. Answers are cached
//! under a canonical serialization of the query; the cache only ever
//! changes statistics, never answers.

pub mod session;
pub mod sexp;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::constraint::{
    canonical_key, simplify, Assignment, Atom, CmpOp, Constraint, LinTerm, Rat, Sort, Value, Var,
    VarKind,
};
use session::{Dialect, Session};
use sexp::Sexp;

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("solver unavailable: {0}")]
    SolverUnavailable(String),
    #[error("solver session error: {0}")]
    Session(String),
    #[error("solver reported an error: {0}")]
    SolverReported(String),
    #[error("unexpected solver response: {0}")]
    BadResponse(String),
    #[error("solver answered unknown: {0}")]
    Inconclusive(String),
    #[error("quantifier elimination unsupported here: {0}")]
    QeNotSupported(String),
}

/// Outcome of a satisfiability check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    Sat(Assignment),
    Unsat,
    Unknown(String),
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }
}

/// Query counters for one gateway. Monotone within a session.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub sat_checks: u64,
    pub qe_calls: u64,
    pub equiv_checks: u64,
    pub cache_hits: u64,
    pub elapsed: Duration,
}

impl SolverStats {
    pub fn absorb(&mut self, other: &SolverStats) {
        self.sat_checks += other.sat_checks;
        self.qe_calls += other.qe_calls;
        self.equiv_checks += other.equiv_checks;
        self.cache_hits += other.cache_hits;
        self.elapsed += other.elapsed;
    }
}

/// How to reach the solver.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub path: PathBuf,
    pub args: Vec<String>,
    pub dialect: Option<Dialect>,
    pub timeout: Duration,
    pub cache: bool,
}

impl SolverConfig {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        SolverConfig {
            path: path.into(),
            args: Vec::new(),
            dialect: None,
            timeout: Duration::from_secs(10),
            cache: true,
        }
    }

    /// Resolves the solver from `DPNCHECK_SOLVER` or `PATH` (z3, cvc5).
    pub fn from_env() -> Result<Self, SmtError> {
        let path = session::default_solver().ok_or_else(|| {
            SmtError::SolverUnavailable(
                "no solver found; set DPNCHECK_SOLVER or put z3/cvc5 on PATH".into(),
            )
        })?;
        let mut cfg = SolverConfig::new(path);
        if let Ok(args) = std::env::var("DPNCHECK_SOLVER_ARGS") {
            cfg.args = args.split_whitespace().map(str::to_string).collect();
        }
        Ok(cfg)
    }

    fn dialect(&self) -> Dialect {
        self.dialect.unwrap_or_else(|| Dialect::guess(&self.path))
    }
}

#[derive(Clone)]
enum Cached {
    SatModel(Assignment),
    SatNoModel,
    Unsat,
    Unknown(String),
    Qe(Constraint),
    Equiv(bool),
}

type Cache = Arc<Mutex<HashMap<String, Cached>>>;
type FingerprintCache = Arc<Mutex<HashMap<String, Option<u64>>>>;

/// Samples for the equivalence pre-filter: evaluating both formulas on
/// a fixed assignment panel refutes most non-equivalences without a
/// solver roundtrip. Disagreement on any sample is a proof; agreement
/// proves nothing and falls through to the solver.
const FINGERPRINT_SAMPLES: u32 = 32;

fn panel_value(sample: u32, var: &Var) -> Value {
    if sample == 0 {
        return Value::zero_of(var.sort);
    }
    // Small deterministic hash over (sample, name, kind).
    let mut h: u64 = 0xcbf29ce484222325;
    let mut mix = |byte: u8| {
        h ^= byte as u64;
        h = h.wrapping_mul(0x100000001b3);
    };
    mix(sample as u8);
    mix((sample >> 8) as u8);
    for b in var.name.bytes() {
        mix(b);
    }
    mix(match var.kind {
        VarKind::Plain => 1,
        VarKind::Read => 2,
        VarKind::Written => 3,
        VarKind::Placeholder => 4,
    });
    match var.sort {
        Sort::Bool => Value::Bool(h & 1 == 1),
        Sort::Int => Value::Int(BigInt::from((h % 7) as i64 - 3)),
        Sort::Rat => {
            let grid = [
                BigRational::from_integer(BigInt::from(-2)),
                BigRational::from_integer(BigInt::from(-1)),
                BigRational::new(BigInt::from(-1), BigInt::from(2)),
                BigRational::from_integer(BigInt::from(0)),
                BigRational::new(BigInt::from(1), BigInt::from(2)),
                BigRational::from_integer(BigInt::from(1)),
                BigRational::from_integer(BigInt::from(2)),
            ];
            Value::Rat(grid[(h % 7) as usize].clone())
        }
    }
}

fn compute_fingerprint(c: &Constraint) -> Option<u64> {
    let frees: Vec<Var> = c.free_vars().into_iter().collect();
    let mut mask = 0u64;
    for i in 0..FINGERPRINT_SAMPLES {
        let assignment: Assignment = frees
            .iter()
            .map(|v| (v.clone(), panel_value(i, v)))
            .collect();
        match c.evaluate(&assignment) {
            Ok(true) => mask |= 1 << i,
            Ok(false) => {}
            Err(_) => return None,
        }
    }
    Some(mask)
}

/// A live solver connection plus cache and statistics.
pub struct SmtGateway {
    session: Session,
    config: SolverConfig,
    cache: Cache,
    fingerprints: FingerprintCache,
    caching: bool,
    pub stats: SolverStats,
}

impl SmtGateway {
    pub fn new(config: SolverConfig) -> Result<Self, SmtError> {
        let session = Session::spawn(&config.path, &config.args, config.dialect(), config.timeout)?;
        let caching = config.cache;
        Ok(SmtGateway {
            session,
            config,
            cache: Arc::new(Mutex::new(HashMap::new())),
            fingerprints: Arc::new(Mutex::new(HashMap::new())),
            caching,
            stats: SolverStats::default(),
        })
    }

    /// A second session sharing this gateway's cache. Sessions are not
    /// shareable across threads; forked gateways are.
    pub fn fork(&self) -> Result<Self, SmtError> {
        let session = Session::spawn(
            &self.config.path,
            &self.config.args,
            self.config.dialect(),
            self.config.timeout,
        )?;
        Ok(SmtGateway {
            session,
            config: self.config.clone(),
            cache: Arc::clone(&self.cache),
            fingerprints: Arc::clone(&self.fingerprints),
            caching: self.caching,
            stats: SolverStats::default(),
        })
    }

    fn fingerprint(&self, c: &Constraint, key: &str) -> Option<u64> {
        if let Some(hit) = self.fingerprints.lock().unwrap().get(key) {
            return *hit;
        }
        let fp = compute_fingerprint(c);
        self.fingerprints
            .lock()
            .unwrap()
            .insert(key.to_string(), fp);
        fp
    }

    fn cache_get(&mut self, key: &str) -> Option<Cached> {
        if !self.caching {
            return None;
        }
        self.cache.lock().unwrap().get(key).cloned()
    }

    fn cache_put(&mut self, key: String, value: Cached) {
        if self.caching {
            self.cache.lock().unwrap().insert(key, value);
        }
    }

    // ── Satisfiability ──────────────────────────────────────────────

    /// Checks satisfiability and extracts a model for every free
    /// variable on `sat`.
    pub fn is_sat(&mut self, c: &Constraint) -> Result<SatResult, SmtError> {
        self.sat_inner(c, true)
    }

    /// Satisfiability as a plain boolean; `unknown` is an error here.
    pub fn is_sat_bool(&mut self, c: &Constraint) -> Result<bool, SmtError> {
        match self.sat_inner(c, false)? {
            SatResult::Sat(_) => Ok(true),
            SatResult::Unsat => Ok(false),
            SatResult::Unknown(reason) => Err(SmtError::Inconclusive(reason)),
        }
    }

    fn sat_inner(&mut self, c: &Constraint, want_model: bool) -> Result<SatResult, SmtError> {
        self.stats.sat_checks += 1;
        let key = format!("s|{}", canonical_key(c));
        match self.cache_get(&key) {
            Some(Cached::SatModel(m)) => {
                self.stats.cache_hits += 1;
                return Ok(SatResult::Sat(m));
            }
            Some(Cached::SatNoModel) if !want_model => {
                self.stats.cache_hits += 1;
                return Ok(SatResult::Sat(Assignment::new()));
            }
            Some(Cached::Unsat) => {
                self.stats.cache_hits += 1;
                return Ok(SatResult::Unsat);
            }
            Some(Cached::Unknown(reason)) => {
                self.stats.cache_hits += 1;
                return Ok(SatResult::Unknown(reason));
            }
            _ => {}
        }

        let started = Instant::now();
        let frees: Vec<Var> = c.free_vars().into_iter().collect();
        self.session.command("(push 1)")?;
        for v in &frees {
            self.session.command(&declare(v))?;
        }
        self.session
            .command(&format!("(assert {})", clamped_smt(c, &frees)))?;
        let word = self.session.query_word("(check-sat)")?;
        let result = match word.as_str() {
            "sat" => {
                if want_model && !frees.is_empty() {
                    SatResult::Sat(self.read_model(&frees)?)
                } else {
                    SatResult::Sat(Assignment::new())
                }
            }
            "unsat" => SatResult::Unsat,
            "unknown" => {
                let reason = self.reason_unknown();
                SatResult::Unknown(reason)
            }
            other => return Err(SmtError::BadResponse(format!("check-sat: {other}"))),
        };
        self.session.command("(pop 1)")?;
        self.stats.elapsed += started.elapsed();

        let entry = match &result {
            SatResult::Sat(m) if !m.is_empty() || frees.is_empty() => Cached::SatModel(m.clone()),
            SatResult::Sat(_) => Cached::SatNoModel,
            SatResult::Unsat => Cached::Unsat,
            SatResult::Unknown(r) => Cached::Unknown(r.clone()),
        };
        self.cache_put(key, entry);
        Ok(result)
    }

    fn read_model(&mut self, frees: &[Var]) -> Result<Assignment, SmtError> {
        let names: Vec<String> = frees.iter().map(smt_name).collect();
        let response = self
            .session
            .query_sexp(&format!("(get-value ({}))", names.join(" ")))?;
        let pairs = response
            .list()
            .ok_or_else(|| SmtError::BadResponse(format!("get-value: {response}")))?;
        let mut by_name: HashMap<&str, &Sexp> = HashMap::new();
        for pair in pairs {
            if let Some(items) = pair.list() {
                if items.len() == 2 {
                    if let Some(n) = items[0].sym() {
                        by_name.insert(n, &items[1]);
                    }
                }
            }
        }
        let mut model = Assignment::new();
        for v in frees {
            let name = smt_name(v);
            let raw = by_name
                .get(name.as_str())
                .ok_or_else(|| SmtError::BadResponse(format!("model missing value for {name}")))?;
            let q = parse_numeral(raw)
                .map_err(|e| SmtError::BadResponse(format!("value for {name}: {e}")))?;
            let value = match v.sort {
                Sort::Bool => Value::Bool(!q.is_zero()),
                Sort::Int => {
                    if !q.is_integer() {
                        return Err(SmtError::BadResponse(format!(
                            "non-integer model value {q} for {name}"
                        )));
                    }
                    Value::Int(q.to_integer())
                }
                Sort::Rat => Value::Rat(q),
            };
            model
                .set(v.clone(), value)
                .map_err(|e| SmtError::BadResponse(e.to_string()))?;
        }
        Ok(model)
    }

    fn reason_unknown(&mut self) -> String {
        match self.session.query_sexp("(get-info :reason-unknown)") {
            Ok(sexp) => {
                let text = sexp.to_string();
                text.trim_matches(|c| c == '(' || c == ')')
                    .replace(":reason-unknown", "")
                    .trim()
                    .to_string()
            }
            Err(_) => "unknown".into(),
        }
    }

    // ── Quantifier elimination ──────────────────────────────────────

    /// Returns a quantifier-free constraint equivalent to
    /// `exists vars. c`, with free variables inside `free(c) \ vars`.
    pub fn qe(&mut self, vars: &[Var], c: &Constraint) -> Result<Constraint, SmtError> {
        self.stats.qe_calls += 1;
        let mut vars_key: Vec<String> = vars.iter().map(smt_name).collect();
        vars_key.sort();
        let key = format!("q|{}|{}", vars_key.join(","), canonical_key(c));
        if let Some(Cached::Qe(result)) = self.cache_get(&key) {
            self.stats.cache_hits += 1;
            return Ok(result);
        }

        // The quantifier distributes over disjunction; per-disjunct
        // elimination keeps inputs small and cache-friendly.
        if let Constraint::Or(parts) = c {
            let mut eliminated = Vec::with_capacity(parts.len());
            for part in parts {
                eliminated.push(self.qe(vars, part)?);
            }
            let result = simplify(&Constraint::or(eliminated));
            self.cache_put(key, Cached::Qe(result.clone()));
            return Ok(result);
        }

        // Equality substitution first: exact, and it usually leaves the
        // solver nothing to eliminate.
        let (bound, reduced) = crate::constraint::eliminate_equalities(vars, c);
        let frees: Vec<Var> = reduced
            .free_vars()
            .into_iter()
            .filter(|v| !bound.contains(v))
            .collect();

        let result = if bound.is_empty() {
            reduced
        } else {
            let started = Instant::now();
            let out = self.qe_solver(&bound, &reduced, &frees);
            self.stats.elapsed += started.elapsed();
            out?
        };

        // The eliminated variables must be gone.
        let leftover: Vec<String> = result
            .free_vars()
            .iter()
            .filter(|v| bound.contains(v))
            .map(|v| v.to_string())
            .collect();
        if !leftover.is_empty() {
            return Err(SmtError::QeNotSupported(format!(
                "eliminated variables survive: {}",
                leftover.join(", ")
            )));
        }
        let result = simplify(&result);
        self.cache_put(key, Cached::Qe(result.clone()));
        Ok(result)
    }

    fn qe_solver(
        &mut self,
        bound: &[Var],
        c: &Constraint,
        frees: &[Var],
    ) -> Result<Constraint, SmtError> {
        let quantified = format!(
            "(exists ({}) {})",
            binder_list(bound),
            clamped_smt(c, bound)
        );
        let table = var_table(frees);
        match self.session.dialect {
            Dialect::Z3 => {
                let mut last_err = None;
                for tactic in ["(then qe simplify)", "(then qe2 simplify)"] {
                    self.session.command("(push 1)")?;
                    for v in frees {
                        self.session.command(&declare(v))?;
                    }
                    self.session.command(&format!("(assert {quantified})"))?;
                    let goals = self.session.query_sexp(&format!("(apply {tactic})"))?;
                    self.session.command("(pop 1)")?;
                    match parse_goals(&goals, &table) {
                        Ok(c) => return Ok(c),
                        Err(e) => last_err = Some(e),
                    }
                }
                Err(last_err.unwrap_or_else(|| SmtError::QeNotSupported("no tactic".into())))
            }
            Dialect::Cvc5 => {
                self.session.command("(push 1)")?;
                for v in frees {
                    self.session.command(&declare(v))?;
                }
                let term = self.session.query_sexp(&format!("(get-qe {quantified})"))?;
                self.session.command("(pop 1)")?;
                term_to_constraint(&expand_lets(&term), &table)
            }
        }
    }

    // ── Equivalence ─────────────────────────────────────────────────

    /// True iff the two quantifier-free constraints agree on every
    /// assignment. `unknown` surfaces as [`SmtError::Inconclusive`],
    /// never as `false`.
    pub fn equivalent(&mut self, a: &Constraint, b: &Constraint) -> Result<bool, SmtError> {
        self.stats.equiv_checks += 1;
        let ka = canonical_key(a);
        let kb = canonical_key(b);
        if ka == kb {
            self.stats.cache_hits += 1;
            return Ok(true);
        }
        let key = if ka < kb {
            format!("e|{ka}|{kb}")
        } else {
            format!("e|{kb}|{ka}")
        };
        if let Some(Cached::Equiv(answer)) = self.cache_get(&key) {
            self.stats.cache_hits += 1;
            return Ok(answer);
        }
        // Sample-panel refutation: a disagreeing assignment settles the
        // question without the solver.
        if let (Some(fa), Some(fb)) = (self.fingerprint(a, &ka), self.fingerprint(b, &kb)) {
            if fa != fb {
                self.cache_put(key, Cached::Equiv(false));
                return Ok(false);
            }
        }

        let started = Instant::now();
        let frees: BTreeSet<Var> = a.free_vars().union(&b.free_vars()).cloned().collect();
        let frees: Vec<Var> = frees.into_iter().collect();
        self.session.command("(push 1)")?;
        for v in &frees {
            self.session.command(&declare(v))?;
        }
        let clamps = bool_clamps(&frees);
        let body = if clamps.is_empty() {
            format!("(not (= {} {}))", emit(a), emit(b))
        } else {
            format!(
                "(and {} (not (= {} {})))",
                clamps.join(" "),
                emit(a),
                emit(b)
            )
        };
        self.session.command(&format!("(assert {body})"))?;
        let word = self.session.query_word("(check-sat)")?;
        self.session.command("(pop 1)")?;
        self.stats.elapsed += started.elapsed();
        let answer = match word.as_str() {
            "sat" => false,
            "unsat" => true,
            "unknown" => {
                let reason = self.reason_unknown();
                return Err(SmtError::Inconclusive(reason));
            }
            other => return Err(SmtError::BadResponse(format!("check-sat: {other}"))),
        };
        self.cache_put(key, Cached::Equiv(answer));
        Ok(answer)
    }

    /// Syntactic shrink of a constraint for display and caching. In
    /// debug builds the result is verified equivalent to the input.
    pub fn simplified(&mut self, c: &Constraint) -> Result<Constraint, SmtError> {
        let s = simplify(c);
        #[cfg(debug_assertions)]
        {
            if canonical_key(&s) != canonical_key(c) {
                debug_assert!(
                    self.equivalent(c, &s)?,
                    "simplify changed meaning of {c} into {s}"
                );
            }
        }
        Ok(s)
    }
}

// ── Emission ────────────────────────────────────────────────────────

/// SMT-level identifier of a variable; annotations become suffixes
/// (user identifiers cannot contain dots, so these never collide).
fn smt_name(v: &Var) -> String {
    match v.kind {
        VarKind::Plain => v.name.clone(),
        VarKind::Read => format!("{}.r", v.name),
        VarKind::Written => format!("{}.w", v.name),
        VarKind::Placeholder => format!("{}.0", v.name),
    }
}

fn smt_sort(v: &Var) -> &'static str {
    match v.sort {
        Sort::Bool | Sort::Int => "Int",
        Sort::Rat => "Real",
    }
}

fn declare(v: &Var) -> String {
    format!("(declare-const {} {})", smt_name(v), smt_sort(v))
}

fn binder_list(vars: &[Var]) -> String {
    vars.iter()
        .map(|v| format!("({} {})", smt_name(v), smt_sort(v)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn bool_clamps(vars: &[Var]) -> Vec<String> {
    vars.iter()
        .filter(|v| v.sort == Sort::Bool)
        .map(|v| {
            let n = smt_name(v);
            format!("(and (<= 0 {n}) (<= {n} 1))")
        })
        .collect()
}

/// The formula with 0/1 clamps conjoined for the boolean variables in
/// `clamped`, as SMT text.
fn clamped_smt(c: &Constraint, clamped: &[Var]) -> String {
    let clamps = bool_clamps(clamped);
    if clamps.is_empty() {
        emit(c)
    } else {
        format!("(and {} {})", clamps.join(" "), emit(c))
    }
}

fn emit(c: &Constraint) -> String {
    let mut out = String::new();
    emit_constraint(c, &mut out);
    out
}

fn emit_constraint(c: &Constraint, out: &mut String) {
    match c {
        Constraint::BoolConst(b) => out.push_str(if *b { "true" } else { "false" }),
        Constraint::BoolVar(v) => {
            out.push_str("(= ");
            out.push_str(&smt_name(v));
            out.push_str(" 1)");
        }
        Constraint::Atom(a) => emit_atom(a, out),
        Constraint::Not(inner) => {
            out.push_str("(not ");
            emit_constraint(inner, out);
            out.push(')');
        }
        Constraint::And(parts) => emit_junction("and", "true", parts, out),
        Constraint::Or(parts) => emit_junction("or", "false", parts, out),
        Constraint::Exists(vars, body) => {
            out.push_str("(exists (");
            out.push_str(&binder_list(vars));
            out.push_str(") ");
            out.push_str(&clamped_smt(body, vars));
            out.push(')');
        }
    }
}

fn emit_junction(op: &str, empty: &str, parts: &[Constraint], out: &mut String) {
    match parts.len() {
        0 => out.push_str(empty),
        1 => emit_constraint(&parts[0], out),
        _ => {
            out.push('(');
            out.push_str(op);
            for p in parts {
                out.push(' ');
                emit_constraint(p, out);
            }
            out.push(')');
        }
    }
}

fn emit_atom(a: &Atom, out: &mut String) {
    let sort = a
        .lhs
        .var_sort()
        .or_else(|| a.rhs.var_sort())
        .unwrap_or(Sort::Rat);
    let (op, negate) = match a.op {
        CmpOp::Eq => ("=", false),
        CmpOp::Ne => ("=", true),
        CmpOp::Ge => (">=", false),
        CmpOp::Gt => (">", false),
        CmpOp::Le => ("<=", false),
        CmpOp::Lt => ("<", false),
    };
    if negate {
        out.push_str("(not ");
    }
    out.push('(');
    out.push_str(op);
    out.push(' ');
    emit_linterm(&a.lhs, sort, out);
    out.push(' ');
    emit_linterm(&a.rhs, sort, out);
    out.push(')');
    if negate {
        out.push(')');
    }
}

fn emit_linterm(t: &LinTerm, sort: Sort, out: &mut String) {
    let mut pieces: Vec<String> = Vec::new();
    for (v, k) in t.coeffs() {
        if k.is_one() {
            pieces.push(smt_name(v));
        } else {
            pieces.push(format!("(* {} {})", rat_literal(k, sort), smt_name(v)));
        }
    }
    if !t.constant.is_zero() || pieces.is_empty() {
        pieces.push(rat_literal(&t.constant, sort));
    }
    if pieces.len() == 1 {
        out.push_str(&pieces[0]);
    } else {
        out.push_str("(+ ");
        out.push_str(&pieces.join(" "));
        out.push(')');
    }
}

fn rat_literal(q: &Rat, sort: Sort) -> String {
    let body = match sort {
        Sort::Rat => {
            if q.is_integer() {
                format!("{}.0", q.numer().abs())
            } else {
                format!("(/ {}.0 {}.0)", q.numer().abs(), q.denom())
            }
        }
        _ => format!("{}", q.numer().abs()),
    };
    if q.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

// ── Response parsing ────────────────────────────────────────────────

fn var_table(vars: &[Var]) -> HashMap<String, Var> {
    vars.iter().map(|v| (smt_name(v), v.clone())).collect()
}

/// Parses a numeral sexp: `3`, `3.5`, `(- x)`, `(/ a b)`, `(to_real x)`.
fn parse_numeral(s: &Sexp) -> Result<Rat, String> {
    match s {
        Sexp::Sym(text) => parse_numeric_symbol(text),
        Sexp::List(items) => match items.as_slice() {
            [head, x] if head.sym() == Some("-") => Ok(-parse_numeral(x)?),
            [head, x] if head.sym() == Some("to_real") || head.sym() == Some("to_int") => {
                parse_numeral(x)
            }
            [head, a, b] if head.sym() == Some("/") => {
                let d = parse_numeral(b)?;
                if d.is_zero() {
                    return Err("division by zero in numeral".into());
                }
                Ok(parse_numeral(a)? / d)
            }
            _ => Err(format!("not a numeral: {s}")),
        },
    }
}

fn parse_numeric_symbol(text: &str) -> Result<Rat, String> {
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let q = if let Some(dot) = body.find('.') {
        let whole: BigInt = if dot == 0 {
            BigInt::zero()
        } else {
            body[..dot]
                .parse()
                .map_err(|_| format!("bad numeral {text}"))?
        };
        let frac_text = &body[dot + 1..];
        let frac: BigInt = if frac_text.is_empty() {
            BigInt::zero()
        } else {
            frac_text
                .parse()
                .map_err(|_| format!("bad numeral {text}"))?
        };
        let scale = BigInt::from(10u32).pow(frac_text.len() as u32);
        BigRational::from_integer(whole) + BigRational::new(frac, scale)
    } else {
        BigRational::from_integer(body.parse().map_err(|_| format!("bad numeral {text}"))?)
    };
    Ok(if neg { -q } else { q })
}

/// Expands `let` bindings so downstream parsing sees plain terms.
fn expand_lets(s: &Sexp) -> Sexp {
    fn go(s: &Sexp, env: &HashMap<String, Sexp>) -> Sexp {
        match s {
            Sexp::Sym(name) => env.get(name).cloned().unwrap_or_else(|| s.clone()),
            Sexp::List(items) => {
                if items.first().and_then(Sexp::sym) == Some("let") && items.len() == 3 {
                    let mut inner = env.clone();
                    if let Some(bindings) = items[1].list() {
                        for b in bindings {
                            if let Some([name, value]) = b.list().and_then(|it| match it {
                                [a, b] => Some([a, b]),
                                _ => None,
                            }) {
                                if let Some(n) = name.sym() {
                                    let expanded = go(value, &inner);
                                    inner.insert(n.to_string(), expanded);
                                }
                            }
                        }
                    }
                    return go(&items[2], &inner);
                }
                Sexp::List(items.iter().map(|i| go(i, env)).collect())
            }
        }
    }
    go(s, &HashMap::new())
}

/// Parses z3 `(apply ...)` output: `(goals (goal item* :kw v ...))`.
fn parse_goals(goals: &Sexp, table: &HashMap<String, Var>) -> Result<Constraint, SmtError> {
    let items = goals
        .list()
        .filter(|_| goals.head() == Some("goals"))
        .ok_or_else(|| SmtError::BadResponse(format!("expected goals, got {goals}")))?;
    if items.len() != 2 {
        return Err(SmtError::QeNotSupported(format!(
            "tactic split the problem into {} goals",
            items.len().saturating_sub(1)
        )));
    }
    let goal = items[1]
        .list()
        .filter(|_| items[1].head() == Some("goal"))
        .ok_or_else(|| SmtError::BadResponse(format!("expected goal, got {}", items[1])))?;
    let mut conjuncts = Vec::new();
    for item in &goal[1..] {
        if let Some(sym) = item.sym() {
            if sym.starts_with(':') {
                break;
            }
        }
        conjuncts.push(term_to_constraint(&expand_lets(item), table)?);
    }
    Ok(Constraint::and(conjuncts))
}

/// Rebuilds a constraint from a solver term. Atoms over 0/1-lowered
/// boolean variables are translated back to boolean structure via
/// their truth tables.
fn term_to_constraint(s: &Sexp, table: &HashMap<String, Var>) -> Result<Constraint, SmtError> {
    match s {
        Sexp::Sym(text) => match text.as_str() {
            "true" => Ok(Constraint::tt()),
            "false" => Ok(Constraint::ff()),
            name => {
                // A bare Bool symbol can only be a lowered formula alias
                // (shouldn't happen after let expansion).
                Err(SmtError::BadResponse(format!(
                    "bare symbol as formula: {name}"
                )))
            }
        },
        Sexp::List(items) => {
            let head = s
                .head()
                .ok_or_else(|| SmtError::BadResponse(format!("formula: {s}")))?;
            match head {
                "and" => Ok(Constraint::and(
                    items[1..]
                        .iter()
                        .map(|i| term_to_constraint(i, table))
                        .collect::<Result<_, _>>()?,
                )),
                "or" => Ok(Constraint::or(
                    items[1..]
                        .iter()
                        .map(|i| term_to_constraint(i, table))
                        .collect::<Result<_, _>>()?,
                )),
                "not" if items.len() == 2 => {
                    Ok(Constraint::not(term_to_constraint(&items[1], table)?))
                }
                "=>" if items.len() == 3 => {
                    let a = term_to_constraint(&items[1], table)?;
                    let b = term_to_constraint(&items[2], table)?;
                    Ok(Constraint::or(vec![Constraint::not(a), b]))
                }
                "ite" if items.len() == 4 => {
                    let c = term_to_constraint(&items[1], table)?;
                    let a = term_to_constraint(&items[2], table)?;
                    let b = term_to_constraint(&items[3], table)?;
                    Ok(Constraint::or(vec![
                        Constraint::and(vec![c.clone(), a]),
                        Constraint::and(vec![Constraint::not(c), b]),
                    ]))
                }
                "=" | "<" | "<=" | ">" | ">=" | "distinct" if items.len() >= 3 => {
                    // Chainable in SMT-LIB; build pairwise conjunction.
                    let op = match head {
                        "=" => CmpOp::Eq,
                        "<" => CmpOp::Lt,
                        "<=" => CmpOp::Le,
                        ">" => CmpOp::Gt,
                        ">=" => CmpOp::Ge,
                        "distinct" => CmpOp::Ne,
                        _ => unreachable!(),
                    };
                    let mut parts = Vec::new();
                    for pair in items[1..].windows(2) {
                        parts.push(atom_or_iff(&pair[0], op, &pair[1], table)?);
                    }
                    Ok(Constraint::and(parts))
                }
                _ => Err(SmtError::QeNotSupported(format!(
                    "unsupported connective '{head}' in solver output"
                ))),
            }
        }
    }
}

/// One comparison; falls back to formula-level iff when the operands
/// are themselves formulas (z3 sometimes emits Boolean equalities).
fn atom_or_iff(
    l: &Sexp,
    op: CmpOp,
    r: &Sexp,
    table: &HashMap<String, Var>,
) -> Result<Constraint, SmtError> {
    match (parse_linterm(l, table), parse_linterm(r, table)) {
        (Ok(lhs), Ok(rhs)) => lowered_atom(lhs, op, rhs),
        _ if matches!(op, CmpOp::Eq | CmpOp::Ne) => {
            let a = term_to_constraint(l, table)?;
            let b = term_to_constraint(r, table)?;
            let iff = Constraint::or(vec![
                Constraint::and(vec![a.clone(), b.clone()]),
                Constraint::and(vec![Constraint::not(a), Constraint::not(b)]),
            ]);
            Ok(if op == CmpOp::Ne {
                Constraint::not(iff)
            } else {
                iff
            })
        }
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

/// Builds an atom, mapping 0/1-lowered boolean variables back to
/// boolean structure via an exhaustive truth table (at most two
/// boolean variables, which covers clamps and frame equalities).
fn lowered_atom(lhs: LinTerm, op: CmpOp, rhs: LinTerm) -> Result<Constraint, SmtError> {
    let bools: BTreeSet<Var> = lhs
        .vars()
        .chain(rhs.vars())
        .filter(|v| v.sort == Sort::Bool)
        .cloned()
        .collect();
    if bools.is_empty() {
        return Constraint::atom(lhs, op, rhs)
            .map_err(|e| SmtError::BadResponse(format!("ill-sorted solver atom: {e}")));
    }
    let numerics = lhs.vars().chain(rhs.vars()).any(|v| v.sort != Sort::Bool);
    if numerics || bools.len() > 2 {
        return Err(SmtError::QeNotSupported(
            "solver output mixes boolean and numeric variables in one atom".into(),
        ));
    }
    let bools: Vec<Var> = bools.into_iter().collect();
    let eval = |term: &LinTerm, values: &BTreeMap<Var, Rat>| -> Rat {
        let mut acc = term.constant.clone();
        for (v, k) in term.coeffs() {
            acc += k * values.get(v).expect("bool var valued").clone();
        }
        acc
    };
    let mut cases = Vec::new();
    let total = 1u32 << bools.len();
    for mask in 0..total {
        let mut values = BTreeMap::new();
        let mut literals = Vec::new();
        for (i, b) in bools.iter().enumerate() {
            let on = mask & (1 << i) != 0;
            values.insert(b.clone(), if on { Rat::one() } else { Rat::zero() });
            literals.push(if on {
                Constraint::BoolVar(b.clone())
            } else {
                Constraint::not(Constraint::BoolVar(b.clone()))
            });
        }
        if op.holds(&eval(&lhs, &values), &eval(&rhs, &values)) {
            cases.push(Constraint::and(literals));
        }
    }
    if cases.len() == total as usize {
        return Ok(Constraint::tt());
    }
    Ok(simplify(&Constraint::or(cases)))
}

/// Parses an arithmetic term; boolean variables show up with their
/// original sort and are resolved by [`lowered_atom`].
fn parse_linterm(s: &Sexp, table: &HashMap<String, Var>) -> Result<LinTerm, SmtError> {
    match s {
        Sexp::Sym(text) => {
            if let Some(v) = table.get(text) {
                return Ok(LinTerm::var(v.clone()));
            }
            parse_numeric_symbol(text)
                .map(LinTerm::constant)
                .map_err(SmtError::BadResponse)
        }
        Sexp::List(items) => {
            let head = s
                .head()
                .ok_or_else(|| SmtError::BadResponse(format!("term: {s}")))?;
            match head {
                "+" => {
                    let mut acc = LinTerm::constant(Rat::zero());
                    for item in &items[1..] {
                        acc = acc.add(&parse_linterm(item, table)?);
                    }
                    Ok(acc)
                }
                "-" if items.len() == 2 => Ok(parse_linterm(&items[1], table)?.neg()),
                "-" if items.len() >= 3 => {
                    let mut acc = parse_linterm(&items[1], table)?;
                    for item in &items[2..] {
                        acc = acc.sub(&parse_linterm(item, table)?);
                    }
                    Ok(acc)
                }
                "*" => {
                    let mut constant = Rat::one();
                    let mut varpart: Option<LinTerm> = None;
                    for item in &items[1..] {
                        let t = parse_linterm(item, table)?;
                        if t.is_constant() {
                            constant *= t.constant;
                        } else if varpart.is_none() {
                            varpart = Some(t);
                        } else {
                            return Err(SmtError::QeNotSupported(
                                "nonlinear product in solver output".into(),
                            ));
                        }
                    }
                    Ok(match varpart {
                        Some(t) => t.scale(&constant),
                        None => LinTerm::constant(constant),
                    })
                }
                "/" if items.len() == 3 => {
                    let num = parse_linterm(&items[1], table)?;
                    let den = parse_linterm(&items[2], table)?;
                    if !den.is_constant() || den.constant.is_zero() {
                        return Err(SmtError::QeNotSupported(
                            "division by a variable in solver output".into(),
                        ));
                    }
                    Ok(num.scale(&(Rat::one() / den.constant)))
                }
                "to_real" | "to_int" if items.len() == 2 => parse_linterm(&items[1], table),
                "div" | "mod" => Err(SmtError::QeNotSupported(
                    "integer divisibility in eliminated form (extend the guard language or \
                     avoid non-unit coefficients on eliminated integer variables)"
                        .into(),
                )),
                _ => Err(SmtError::BadResponse(format!("unsupported term: {s}"))),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::rat;

    #[test]
    fn numerals_parse_exactly() {
        assert_eq!(parse_numeric_symbol("3").unwrap(), rat(3));
        assert_eq!(parse_numeric_symbol("-3").unwrap(), rat(-3));
        assert_eq!(
            parse_numeric_symbol("0.5").unwrap(),
            crate::constraint::ratio(1, 2)
        );
        let s = sexp::parse("(/ 1.0 2.0)").unwrap();
        assert_eq!(parse_numeral(&s).unwrap(), crate::constraint::ratio(1, 2));
        let s = sexp::parse("(- (/ 7 2))").unwrap();
        assert_eq!(parse_numeral(&s).unwrap(), crate::constraint::ratio(-7, 2));
    }

    #[test]
    fn let_expansion() {
        let s = sexp::parse("(let ((a!1 (>= x 0))) (and a!1 (not a!1)))").unwrap();
        let e = expand_lets(&s);
        assert_eq!(e.to_string(), "(and (>= x 0) (not (>= x 0)))");
    }

    #[test]
    fn bool_atoms_map_back() {
        let b = Var::plain("b", Sort::Bool);
        // b = 1  →  b
        let c = lowered_atom(
            LinTerm::var(b.clone()),
            CmpOp::Eq,
            LinTerm::constant(Rat::one()),
        )
        .unwrap();
        assert_eq!(c, Constraint::BoolVar(b.clone()));
        // b <= 0  →  !b
        let c = lowered_atom(
            LinTerm::var(b.clone()),
            CmpOp::Le,
            LinTerm::constant(Rat::zero()),
        )
        .unwrap();
        assert_eq!(c, Constraint::not(Constraint::BoolVar(b.clone())));
        // 0 <= b  →  true (clamp residue vanishes)
        let c = lowered_atom(LinTerm::constant(Rat::zero()), CmpOp::Le, LinTerm::var(b)).unwrap();
        assert_eq!(c, Constraint::tt());
    }

    #[test]
    fn emits_exact_rationals() {
        let o = Var::plain("o", Sort::Rat);
        let c = Constraint::cmp(
            LinTerm::var(o).scale(&rat(2)),
            CmpOp::Ge,
            LinTerm::constant(crate::constraint::ratio(-1, 2)),
        );
        assert_eq!(emit(&c), "(>= (* 2.0 o) (- (/ 1.0 2.0)))");
    }
}
