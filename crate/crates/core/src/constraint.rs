//! Linear-arithmetic constraint language over typed process variables.
//!
//! Constraints are the lingua franca of the whole crate: guards on net
//! transitions, node labels in constraint graphs, and queries sent to the
//! SMT backend are all values of [`Constraint`]. Arithmetic is exact
//! (arbitrary-precision rationals); nothing in this module ever touches
//! floating point.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact rational number used for all constants and coefficients.
pub type Rat = BigRational;

/// Convenience constructor for an integer-valued rational.
pub fn rat(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

/// `p/q` as an exact rational. Panics if `q == 0`.
pub fn ratio(p: i64, q: i64) -> Rat {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

// ── Sorts, variables, values ────────────────────────────────────────

/// The three variable sorts: booleans, integers, rationals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Bool,
    Int,
    Rat,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Bool => write!(f, "bool"),
            Sort::Int => write!(f, "int"),
            Sort::Rat => write!(f, "rat"),
        }
    }
}

/// How a variable occurrence is annotated.
///
/// `Read`/`Written` are the pre-/post-value copies appearing in guards;
/// `Placeholder` variables are the frozen initial copies used by
/// placeholder constraint graphs. They never appear in guards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    Plain,
    Read,
    Written,
    Placeholder,
}

/// A typed, annotated variable. `(name, kind)` identifies the variable;
/// the read and written copies of `x` share its sort.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub name: String,
    pub sort: Sort,
    pub kind: VarKind,
}

impl Var {
    pub fn plain(name: impl Into<String>, sort: Sort) -> Self {
        Var {
            name: name.into(),
            sort,
            kind: VarKind::Plain,
        }
    }
    pub fn read(name: impl Into<String>, sort: Sort) -> Self {
        Var {
            name: name.into(),
            sort,
            kind: VarKind::Read,
        }
    }
    pub fn written(name: impl Into<String>, sort: Sort) -> Self {
        Var {
            name: name.into(),
            sort,
            kind: VarKind::Written,
        }
    }
    pub fn placeholder(name: impl Into<String>, sort: Sort) -> Self {
        Var {
            name: name.into(),
            sort,
            kind: VarKind::Placeholder,
        }
    }

    /// Same variable with a different annotation.
    pub fn with_kind(&self, kind: VarKind) -> Self {
        Var {
            name: self.name.clone(),
            sort: self.sort,
            kind,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            VarKind::Plain | VarKind::Read => write!(f, "{}", self.name),
            VarKind::Written => write!(f, "{}'", self.name),
            VarKind::Placeholder => write!(f, "{}_0", self.name),
        }
    }
}

/// A concrete value of one of the three sorts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Int(BigInt),
    Rat(Rat),
}

impl Value {
    pub fn int(n: i64) -> Self {
        Value::Int(BigInt::from(n))
    }
    pub fn rational(p: i64, q: i64) -> Self {
        Value::Rat(ratio(p, q))
    }

    pub fn sort(&self) -> Sort {
        match self {
            Value::Bool(_) => Sort::Bool,
            Value::Int(_) => Sort::Int,
            Value::Rat(_) => Sort::Rat,
        }
    }

    /// Numeric view; booleans have none.
    pub fn as_rat(&self) -> Option<Rat> {
        match self {
            Value::Bool(_) => None,
            Value::Int(n) => Some(BigRational::from_integer(n.clone())),
            Value::Rat(q) => Some(q.clone()),
        }
    }

    /// The zero/false default for a sort.
    pub fn zero_of(sort: Sort) -> Self {
        match sort {
            Sort::Bool => Value::Bool(false),
            Sort::Int => Value::Int(BigInt::zero()),
            Sort::Rat => Value::Rat(Rat::zero()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Rat(q) => write!(f, "{q}"),
        }
    }
}

/// A finite map from variables to sort-matching values.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment {
    map: BTreeMap<Var, Value>,
}

impl Assignment {
    pub fn new() -> Self {
        Assignment {
            map: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, var: Var, value: Value) -> Result<(), EvalError> {
        if var.sort != value.sort() {
            return Err(EvalError::SortMismatch {
                var: var.to_string(),
                expected: var.sort,
                got: value.sort(),
            });
        }
        self.map.insert(var, value);
        Ok(())
    }

    pub fn get(&self, var: &Var) -> Option<&Value> {
        self.map.get(var)
    }

    pub fn require(&self, var: &Var) -> Result<&Value, EvalError> {
        self.map
            .get(var)
            .ok_or_else(|| EvalError::UnboundVariable(var.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Value)> {
        self.map.iter()
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.map.keys()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl FromIterator<(Var, Value)> for Assignment {
    fn from_iter<T: IntoIterator<Item = (Var, Value)>>(iter: T) -> Self {
        Assignment {
            map: iter.into_iter().collect(),
        }
    }
}

// ── Errors ──────────────────────────────────────────────────────────

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("variable {0} is not assigned")]
    UnboundVariable(String),
    #[error("sort mismatch on {var}: expected {expected}, got {got}")]
    SortMismatch {
        var: String,
        expected: Sort,
        got: Sort,
    },
    #[error("cannot evaluate a quantified constraint")]
    Quantified,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstraintError {
    #[error("sort mismatch in atom: {0}")]
    SortMismatch(String),
    #[error("substitution would capture bound variable {0}")]
    Capture(String),
    #[error("cannot substitute a term for boolean variable {0}")]
    BoolSubstitution(String),
}

// ── Linear terms ────────────────────────────────────────────────────

/// A linear term `c + k1*v1 + ... + kn*vn` with exact rational
/// coefficients. All variables of a term share one numeric sort;
/// boolean variables never appear here.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinTerm {
    pub constant: Rat,
    coeffs: BTreeMap<Var, Rat>,
}

impl LinTerm {
    pub fn constant(c: Rat) -> Self {
        LinTerm {
            constant: c,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn var(v: Var) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(v, Rat::one());
        LinTerm {
            constant: Rat::zero(),
            coeffs,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&Var, &Rat)> {
        self.coeffs.iter()
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.coeffs.keys()
    }

    /// The shared numeric sort of the variables, if any occur.
    pub fn var_sort(&self) -> Option<Sort> {
        self.coeffs.keys().next().map(|v| v.sort)
    }

    pub fn add(&self, other: &LinTerm) -> LinTerm {
        let mut out = self.clone();
        out.constant += &other.constant;
        for (v, k) in &other.coeffs {
            let entry = out.coeffs.entry(v.clone()).or_insert_with(Rat::zero);
            *entry += k;
            if entry.is_zero() {
                out.coeffs.remove(v);
            }
        }
        out
    }

    pub fn neg(&self) -> LinTerm {
        let mut out = self.clone();
        out.constant = -out.constant;
        for k in out.coeffs.values_mut() {
            *k = -k.clone();
        }
        out
    }

    pub fn sub(&self, other: &LinTerm) -> LinTerm {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &Rat) -> LinTerm {
        if k.is_zero() {
            return LinTerm::constant(Rat::zero());
        }
        let mut out = self.clone();
        out.constant *= k;
        for c in out.coeffs.values_mut() {
            *c *= k;
        }
        out
    }

    pub fn eval(&self, a: &Assignment) -> Result<Rat, EvalError> {
        let mut acc = self.constant.clone();
        for (v, k) in &self.coeffs {
            let value = a.require(v)?;
            let q = value.as_rat().ok_or_else(|| EvalError::SortMismatch {
                var: v.to_string(),
                expected: v.sort,
                got: value.sort(),
            })?;
            acc += k * q;
        }
        Ok(acc)
    }

    /// Substitute variables by terms; used by [`Constraint::rename`].
    fn subst(&self, subst: &Substitution) -> Result<LinTerm, ConstraintError> {
        let mut out = LinTerm::constant(self.constant.clone());
        for (v, k) in &self.coeffs {
            match subst.lookup(v) {
                None => out = out.add(&LinTerm::var(v.clone()).scale(k)),
                Some(SubstTarget::Var(w)) => {
                    if w.sort != v.sort {
                        return Err(ConstraintError::SortMismatch(format!(
                            "{v} ({}) replaced by {w} ({})",
                            v.sort, w.sort
                        )));
                    }
                    out = out.add(&LinTerm::var(w.clone()).scale(k));
                }
                Some(SubstTarget::Term(t)) => {
                    if let (Some(ts), false) = (t.var_sort(), v.sort == Sort::Bool) {
                        if ts != v.sort {
                            return Err(ConstraintError::SortMismatch(format!(
                                "{v} ({}) replaced by term of sort {ts}",
                                v.sort
                            )));
                        }
                    }
                    out = out.add(&t.scale(k));
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for LinTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, k) in &self.coeffs {
            if first {
                if k.is_negative() {
                    write!(f, "-")?;
                }
            } else if k.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let a = k.abs();
            if a.is_one() {
                write!(f, "{v}")?;
            } else {
                write!(f, "{a}*{v}")?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)?;
        } else if !self.constant.is_zero() {
            if self.constant.is_negative() {
                write!(f, " - {}", self.constant.abs())?;
            } else {
                write!(f, " + {}", self.constant)?;
            }
        }
        Ok(())
    }
}

// ── Atoms and constraints ───────────────────────────────────────────

/// Comparison operators. The set is closed under negation so negation
/// can always be pushed down to atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Ge,
    Gt,
    Le,
    Lt,
}

impl CmpOp {
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Lt => CmpOp::Ge,
        }
    }

    pub fn holds(self, lhs: &Rat, rhs: &Rat) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Lt => lhs < rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
        }
    }
}

/// A single comparison between two linear terms of the same sort.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub lhs: LinTerm,
    pub op: CmpOp,
    pub rhs: LinTerm,
}

impl Atom {
    /// Builds an atom, rejecting mixed-sort comparisons and non-integer
    /// constants on integer atoms.
    pub fn new(lhs: LinTerm, op: CmpOp, rhs: LinTerm) -> Result<Atom, ConstraintError> {
        let sorts: BTreeSet<Sort> = lhs.vars().chain(rhs.vars()).map(|v| v.sort).collect();
        if sorts.contains(&Sort::Bool) {
            return Err(ConstraintError::SortMismatch(
                "boolean variable in arithmetic atom".into(),
            ));
        }
        if sorts.len() > 1 {
            return Err(ConstraintError::SortMismatch(format!(
                "atom mixes sorts: {lhs} {} {rhs}",
                op.symbol()
            )));
        }
        if sorts.contains(&Sort::Int) {
            for t in [&lhs, &rhs] {
                if !t.constant.is_integer() || t.coeffs().any(|(_, k)| !k.is_integer()) {
                    return Err(ConstraintError::SortMismatch(format!(
                        "non-integer constant in integer atom: {t}"
                    )));
                }
            }
        }
        Ok(Atom { lhs, op, rhs })
    }

    pub fn eval(&self, a: &Assignment) -> Result<bool, EvalError> {
        let l = self.lhs.eval(a)?;
        let r = self.rhs.eval(a)?;
        Ok(self.op.holds(&l, &r))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

/// The constraint AST.
///
/// Guards read from models use only `BoolConst`/`BoolVar`/`Atom`/`And`/`Or`;
/// negation and quantifiers arise internally (blocked-state formulas and
/// quantifier-elimination inputs).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    BoolConst(bool),
    BoolVar(Var),
    Atom(Atom),
    Not(Box<Constraint>),
    And(Vec<Constraint>),
    Or(Vec<Constraint>),
    Exists(Vec<Var>, Box<Constraint>),
}

impl Constraint {
    pub fn tt() -> Constraint {
        Constraint::BoolConst(true)
    }
    pub fn ff() -> Constraint {
        Constraint::BoolConst(false)
    }

    pub fn atom(lhs: LinTerm, op: CmpOp, rhs: LinTerm) -> Result<Constraint, ConstraintError> {
        Ok(Constraint::Atom(Atom::new(lhs, op, rhs)?))
    }

    /// `lhs op rhs` for plain variables; panics on ill-sorted input, so
    /// only for statically well-typed construction sites.
    pub fn cmp(lhs: LinTerm, op: CmpOp, rhs: LinTerm) -> Constraint {
        Constraint::atom(lhs, op, rhs).expect("well-sorted atom")
    }

    pub fn and(mut parts: Vec<Constraint>) -> Constraint {
        match parts.len() {
            0 => Constraint::tt(),
            1 => parts.pop().unwrap(),
            _ => Constraint::And(parts),
        }
    }

    pub fn or(mut parts: Vec<Constraint>) -> Constraint {
        match parts.len() {
            0 => Constraint::ff(),
            1 => parts.pop().unwrap(),
            _ => Constraint::Or(parts),
        }
    }

    #[allow(clippy::should_implement_trait)] // domain constructor, not ops::Not
    pub fn not(c: Constraint) -> Constraint {
        match c {
            Constraint::BoolConst(b) => Constraint::BoolConst(!b),
            Constraint::Not(inner) => *inner,
            other => Constraint::Not(Box::new(other)),
        }
    }

    /// `x = y` for two variables of the same sort, including booleans
    /// (expanded to `(x ∧ y) ∨ (¬x ∧ ¬y)` since atoms are numeric only).
    pub fn var_eq(x: Var, y: Var) -> Constraint {
        if x.sort == Sort::Bool {
            let both = Constraint::and(vec![
                Constraint::BoolVar(x.clone()),
                Constraint::BoolVar(y.clone()),
            ]);
            let neither = Constraint::and(vec![
                Constraint::not(Constraint::BoolVar(x)),
                Constraint::not(Constraint::BoolVar(y)),
            ]);
            Constraint::or(vec![both, neither])
        } else {
            Constraint::cmp(LinTerm::var(x), CmpOp::Eq, LinTerm::var(y))
        }
    }

    /// `x = v` pinning a variable to a concrete value.
    pub fn var_eq_value(x: Var, v: &Value) -> Constraint {
        match v {
            Value::Bool(true) => Constraint::BoolVar(x),
            Value::Bool(false) => Constraint::not(Constraint::BoolVar(x)),
            Value::Int(n) => Constraint::cmp(
                LinTerm::var(x),
                CmpOp::Eq,
                LinTerm::constant(BigRational::from_integer(n.clone())),
            ),
            Value::Rat(q) => {
                Constraint::cmp(LinTerm::var(x), CmpOp::Eq, LinTerm::constant(q.clone()))
            }
        }
    }

    /// The formula `⋀_v v = α(v)` describing exactly one assignment.
    pub fn of_assignment(a: &Assignment) -> Constraint {
        Constraint::and(
            a.iter()
                .map(|(v, val)| Constraint::var_eq_value(v.clone(), val))
                .collect(),
        )
    }

    /// Evaluates a quantifier-free constraint under a total assignment.
    pub fn evaluate(&self, a: &Assignment) -> Result<bool, EvalError> {
        match self {
            Constraint::BoolConst(b) => Ok(*b),
            Constraint::BoolVar(v) => match a.require(v)? {
                Value::Bool(b) => Ok(*b),
                other => Err(EvalError::SortMismatch {
                    var: v.to_string(),
                    expected: Sort::Bool,
                    got: other.sort(),
                }),
            },
            Constraint::Atom(atom) => atom.eval(a),
            Constraint::Not(c) => Ok(!c.evaluate(a)?),
            Constraint::And(parts) => {
                for p in parts {
                    if !p.evaluate(a)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Constraint::Or(parts) => {
                for p in parts {
                    if p.evaluate(a)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Constraint::Exists(..) => Err(EvalError::Quantified),
        }
    }

    /// Free variables (bound variables of `Exists` excluded).
    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out, &mut Vec::new());
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<Var>, bound: &mut Vec<Var>) {
        match self {
            Constraint::BoolConst(_) => {}
            Constraint::BoolVar(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            Constraint::Atom(atom) => {
                for v in atom.lhs.vars().chain(atom.rhs.vars()) {
                    if !bound.contains(v) {
                        out.insert(v.clone());
                    }
                }
            }
            Constraint::Not(c) => c.collect_free(out, bound),
            Constraint::And(parts) | Constraint::Or(parts) => {
                for p in parts {
                    p.collect_free(out, bound);
                }
            }
            Constraint::Exists(vars, body) => {
                let n = bound.len();
                bound.extend(vars.iter().cloned());
                body.collect_free(out, bound);
                bound.truncate(n);
            }
        }
    }

    /// Simultaneous substitution of variables by variables or terms.
    /// Variables outside the map are unchanged. Substituting a term for
    /// a boolean variable, or capturing a bound variable, is an error.
    pub fn rename(&self, subst: &Substitution) -> Result<Constraint, ConstraintError> {
        match self {
            Constraint::BoolConst(_) => Ok(self.clone()),
            Constraint::BoolVar(v) => match subst.lookup(v) {
                None => Ok(self.clone()),
                Some(SubstTarget::Var(w)) => {
                    if w.sort != Sort::Bool {
                        return Err(ConstraintError::SortMismatch(format!(
                            "boolean {v} replaced by {w} of sort {}",
                            w.sort
                        )));
                    }
                    Ok(Constraint::BoolVar(w.clone()))
                }
                Some(SubstTarget::Term(_)) => Err(ConstraintError::BoolSubstitution(v.to_string())),
            },
            Constraint::Atom(atom) => Ok(Constraint::Atom(Atom::new(
                atom.lhs.subst(subst)?,
                atom.op,
                atom.rhs.subst(subst)?,
            )?)),
            Constraint::Not(c) => Ok(Constraint::Not(Box::new(c.rename(subst)?))),
            Constraint::And(parts) => Ok(Constraint::And(
                parts
                    .iter()
                    .map(|p| p.rename(subst))
                    .collect::<Result<_, _>>()?,
            )),
            Constraint::Or(parts) => Ok(Constraint::Or(
                parts
                    .iter()
                    .map(|p| p.rename(subst))
                    .collect::<Result<_, _>>()?,
            )),
            Constraint::Exists(vars, body) => {
                // Bound variables shadow the substitution; a substituted
                // term may not mention them.
                for v in vars {
                    for (src, tgt) in subst.iter() {
                        if src == v {
                            continue;
                        }
                        let captures = match tgt {
                            SubstTarget::Var(w) => w == v,
                            SubstTarget::Term(t) => t.vars().any(|w| w == v),
                        };
                        if captures {
                            return Err(ConstraintError::Capture(v.to_string()));
                        }
                    }
                }
                let inner = subst.without(vars);
                Ok(Constraint::Exists(
                    vars.clone(),
                    Box::new(body.rename(&inner)?),
                ))
            }
        }
    }

    /// All `Plain` variables whose `Read` copy occurs free.
    pub fn read_vars(&self) -> BTreeSet<Var> {
        self.free_vars()
            .into_iter()
            .filter(|v| v.kind == VarKind::Read)
            .map(|v| v.with_kind(VarKind::Plain))
            .collect()
    }

    /// All `Plain` variables whose `Written` copy occurs free.
    pub fn write_vars(&self) -> BTreeSet<Var> {
        self.free_vars()
            .into_iter()
            .filter(|v| v.kind == VarKind::Written)
            .map(|v| v.with_kind(VarKind::Plain))
            .collect()
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn needs_parens(c: &Constraint, under_and: bool) -> bool {
            match c {
                Constraint::Or(_) => under_and,
                _ => false,
            }
        }
        match self {
            Constraint::BoolConst(b) => write!(f, "{b}"),
            Constraint::BoolVar(v) => write!(f, "{v}"),
            Constraint::Atom(a) => write!(f, "{a}"),
            Constraint::Not(c) => match c.as_ref() {
                Constraint::BoolVar(_) | Constraint::BoolConst(_) => write!(f, "!{c}"),
                _ => write!(f, "!({c})"),
            },
            Constraint::And(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " && ")?;
                    }
                    if needs_parens(p, true) {
                        write!(f, "({p})")?;
                    } else {
                        write!(f, "{p}")?;
                    }
                }
                Ok(())
            }
            Constraint::Or(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " || ")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
            Constraint::Exists(vars, body) => {
                write!(f, "exists ")?;
                for (i, v) in vars.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ". ({body})")
            }
        }
    }
}

// ── Substitutions ───────────────────────────────────────────────────

#[derive(Clone, Debug)]
pub enum SubstTarget {
    Var(Var),
    Term(LinTerm),
}

/// A finite map used by [`Constraint::rename`].
#[derive(Clone, Debug, Default)]
pub struct Substitution {
    map: BTreeMap<Var, SubstTarget>,
}

impl Substitution {
    pub fn new() -> Self {
        Substitution {
            map: BTreeMap::new(),
        }
    }

    pub fn var(mut self, from: Var, to: Var) -> Self {
        self.map.insert(from, SubstTarget::Var(to));
        self
    }

    pub fn term(mut self, from: Var, to: LinTerm) -> Self {
        self.map.insert(from, SubstTarget::Term(to));
        self
    }

    pub fn insert_var(&mut self, from: Var, to: Var) {
        self.map.insert(from, SubstTarget::Var(to));
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    fn lookup(&self, v: &Var) -> Option<&SubstTarget> {
        self.map.get(v)
    }

    fn iter(&self) -> impl Iterator<Item = (&Var, &SubstTarget)> {
        self.map.iter()
    }

    fn without(&self, vars: &[Var]) -> Substitution {
        Substitution {
            map: self
                .map
                .iter()
                .filter(|(k, _)| !vars.contains(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Maps every `Plain` variable in `vars` to its `Placeholder` copy.
    pub fn plain_to_placeholder(vars: &[Var]) -> Substitution {
        let mut s = Substitution::new();
        for v in vars {
            s.insert_var(
                v.with_kind(VarKind::Plain),
                v.with_kind(VarKind::Placeholder),
            );
        }
        s
    }
}

// ── Transition formulas ─────────────────────────────────────────────

/// The transition formula of a guard: the guard itself plus a frame
/// equality `v' = v` for every process variable the guard does not
/// write. Defined over read/written copies of `all_vars`.
pub fn transition_formula(guard: &Constraint, all_vars: &[Var]) -> Constraint {
    let written = guard.write_vars();
    let mut parts = match guard {
        Constraint::BoolConst(true) => Vec::new(),
        Constraint::And(inner) => inner.clone(),
        other => vec![other.clone()],
    };
    for v in all_vars {
        let plain = v.with_kind(VarKind::Plain);
        if !written.contains(&plain) {
            parts.push(Constraint::var_eq(
                v.with_kind(VarKind::Written),
                v.with_kind(VarKind::Read),
            ));
        }
    }
    Constraint::and(parts)
}

// ── Canonical form ──────────────────────────────────────────────────

/// Normalizes an atom to `term ⊙ 0` with integer, gcd-reduced
/// coefficients and `⊙ ∈ {=, !=, <=, <}`; for symmetric operators the
/// leading coefficient is made positive. Used for cache keys and the
/// syntactic-equality fast path, never as a semantic judgment.
fn canonical_atom(atom: &Atom) -> Atom {
    let mut diff = atom.lhs.sub(&atom.rhs);
    let mut op = atom.op;
    // Flip `>=`/`>` so only <=, <, =, != remain.
    match op {
        CmpOp::Ge => {
            diff = diff.neg();
            op = CmpOp::Le;
        }
        CmpOp::Gt => {
            diff = diff.neg();
            op = CmpOp::Lt;
        }
        _ => {}
    }
    // Scale to integer coefficients with gcd 1.
    let mut denom_lcm = BigInt::one();
    for (_, k) in diff.coeffs() {
        denom_lcm = denom_lcm.lcm(k.denom());
    }
    denom_lcm = denom_lcm.lcm(diff.constant.denom());
    diff = diff.scale(&BigRational::from_integer(denom_lcm));
    let mut gcd = BigInt::zero();
    for (_, k) in diff.coeffs() {
        gcd = gcd.gcd(k.numer());
    }
    gcd = gcd.gcd(diff.constant.numer());
    if !gcd.is_zero() && !gcd.is_one() {
        diff = diff.scale(&BigRational::new(BigInt::one(), gcd));
    }
    if matches!(op, CmpOp::Eq | CmpOp::Ne) {
        let leading_negative = diff
            .coeffs()
            .next()
            .map(|(_, k)| k.is_negative())
            .unwrap_or_else(|| diff.constant.is_negative());
        if leading_negative {
            diff = diff.neg();
        }
    }
    Atom {
        lhs: diff,
        op,
        rhs: LinTerm::constant(Rat::zero()),
    }
}

/// Structurally canonical variant: atoms normalized, conjunctions and
/// disjunctions flattened, sorted, and deduplicated, double negation
/// removed. Equal keys imply logically equivalent constraints; the
/// converse does not hold.
pub fn canonicalize(c: &Constraint) -> Constraint {
    match c {
        Constraint::BoolConst(_) | Constraint::BoolVar(_) => c.clone(),
        Constraint::Atom(a) => Constraint::Atom(canonical_atom(a)),
        Constraint::Not(inner) => Constraint::not(canonicalize(inner)),
        Constraint::And(parts) => {
            let mut flat = Vec::new();
            for p in parts {
                match canonicalize(p) {
                    Constraint::BoolConst(true) => {}
                    Constraint::BoolConst(false) => return Constraint::ff(),
                    Constraint::And(inner) => flat.extend(inner),
                    other => flat.push(other),
                }
            }
            flat.sort();
            flat.dedup();
            Constraint::and(flat)
        }
        Constraint::Or(parts) => {
            let mut flat = Vec::new();
            for p in parts {
                match canonicalize(p) {
                    Constraint::BoolConst(false) => {}
                    Constraint::BoolConst(true) => return Constraint::tt(),
                    Constraint::Or(inner) => flat.extend(inner),
                    other => flat.push(other),
                }
            }
            flat.sort();
            flat.dedup();
            Constraint::or(flat)
        }
        Constraint::Exists(vars, body) => {
            Constraint::Exists(vars.clone(), Box::new(canonicalize(body)))
        }
    }
}

/// Stable text key of the canonical form.
pub fn canonical_key(c: &Constraint) -> String {
    fn emit(c: &Constraint, out: &mut String) {
        match c {
            Constraint::BoolConst(b) => out.push_str(if *b { "T" } else { "F" }),
            Constraint::BoolVar(v) => {
                out.push_str("b:");
                emit_var(v, out);
            }
            Constraint::Atom(a) => {
                out.push('(');
                out.push_str(a.op.symbol());
                for (v, k) in a.lhs.coeffs() {
                    out.push(' ');
                    out.push_str(&k.to_string());
                    out.push('*');
                    emit_var(v, out);
                }
                out.push(' ');
                out.push_str(&a.lhs.constant.to_string());
                out.push(')');
            }
            Constraint::Not(inner) => {
                out.push_str("(not ");
                emit(inner, out);
                out.push(')');
            }
            Constraint::And(parts) => {
                out.push_str("(and");
                for p in parts {
                    out.push(' ');
                    emit(p, out);
                }
                out.push(')');
            }
            Constraint::Or(parts) => {
                out.push_str("(or");
                for p in parts {
                    out.push(' ');
                    emit(p, out);
                }
                out.push(')');
            }
            Constraint::Exists(vars, body) => {
                out.push_str("(ex");
                for v in vars {
                    out.push(' ');
                    emit_var(v, out);
                }
                out.push_str(". ");
                emit(body, out);
                out.push(')');
            }
        }
    }
    fn emit_var(v: &Var, out: &mut String) {
        out.push_str(&v.name);
        out.push(match v.kind {
            VarKind::Plain => '#',
            VarKind::Read => '<',
            VarKind::Written => '>',
            VarKind::Placeholder => '0',
        });
        out.push(match v.sort {
            Sort::Bool => 'b',
            Sort::Int => 'i',
            Sort::Rat => 'q',
        });
    }
    let mut out = String::new();
    emit(&canonicalize(c), &mut out);
    out
}

// ── Simplification ──────────────────────────────────────────────────

/// Cheap, purely syntactic simplification: constant folding of ground
/// atoms, flattening, neutral/absorbing elements, duplicate removal,
/// and bound subsumption among single-core conjunct atoms. The result
/// is always logically equivalent to the input.
pub fn simplify(c: &Constraint) -> Constraint {
    match c {
        Constraint::BoolConst(_) | Constraint::BoolVar(_) => c.clone(),
        Constraint::Atom(a) => {
            // A constant difference decides the atom (covers ground
            // atoms and trivia like x = x).
            let diff = a.lhs.sub(&a.rhs);
            if diff.is_constant() {
                Constraint::BoolConst(a.op.holds(&diff.constant, &Rat::zero()))
            } else {
                c.clone()
            }
        }
        Constraint::Not(inner) => match simplify(inner) {
            Constraint::BoolConst(b) => Constraint::BoolConst(!b),
            Constraint::Atom(a) => Constraint::Atom(Atom {
                lhs: a.lhs,
                op: a.op.negate(),
                rhs: a.rhs,
            }),
            other => Constraint::not(other),
        },
        Constraint::And(parts) => {
            let mut flat = Vec::new();
            for p in parts {
                match simplify(p) {
                    Constraint::BoolConst(true) => {}
                    Constraint::BoolConst(false) => return Constraint::ff(),
                    Constraint::And(inner) => flat.extend(inner),
                    other => flat.push(other),
                }
            }
            let flat = prune_conjunct_bounds(flat);
            let mut seen = BTreeSet::new();
            let mut out = Vec::new();
            for p in flat {
                if seen.insert(canonical_key(&p)) {
                    out.push(p);
                }
            }
            Constraint::and(out)
        }
        Constraint::Or(parts) => {
            let mut flat = Vec::new();
            for p in parts {
                match simplify(p) {
                    Constraint::BoolConst(false) => {}
                    Constraint::BoolConst(true) => return Constraint::tt(),
                    Constraint::Or(inner) => flat.extend(inner),
                    other => flat.push(other),
                }
            }
            let mut seen = BTreeSet::new();
            let mut out = Vec::new();
            for p in flat {
                if seen.insert(canonical_key(&p)) {
                    out.push(p);
                }
            }
            Constraint::or(out)
        }
        Constraint::Exists(vars, body) => {
            let body = simplify(body);
            let free = body.free_vars();
            let live: Vec<Var> = vars.iter().filter(|v| free.contains(v)).cloned().collect();
            if live.is_empty() {
                body
            } else {
                Constraint::Exists(live, Box::new(body))
            }
        }
    }
}

/// Exact pre-elimination for `∃ vars. c`: while some top-level
/// conjunct is an equality that pins an eliminated variable (any
/// rational coefficient, or a unit integer coefficient), substitute it
/// away. Returns the variables still requiring real quantifier
/// elimination together with the reduced, equivalent body. Typical
/// updates pin most copies through frame equalities, so this usually
/// leaves little or nothing for the solver.
pub fn eliminate_equalities(vars: &[Var], c: &Constraint) -> (Vec<Var>, Constraint) {
    let mut current = simplify(c);
    let mut candidates: Vec<Var> = vars.to_vec();
    loop {
        let free = current.free_vars();
        candidates.retain(|v| free.contains(v));
        let Some((var, replacement)) = find_pinned(&candidates, &current) else {
            break;
        };
        let subst = Substitution::new().term(var.clone(), replacement);
        match current.rename(&subst) {
            Ok(next) => current = simplify(&next),
            Err(_) => break,
        }
        candidates.retain(|v| v != &var);
    }
    let free = current.free_vars();
    candidates.retain(|v| free.contains(v));
    (candidates, current)
}

fn find_pinned(vars: &[Var], c: &Constraint) -> Option<(Var, LinTerm)> {
    let conjuncts: Vec<&Constraint> = match c {
        Constraint::And(parts) => {
            fn flat<'a>(parts: &'a [Constraint], out: &mut Vec<&'a Constraint>) {
                for p in parts {
                    match p {
                        Constraint::And(inner) => flat(inner, out),
                        other => out.push(other),
                    }
                }
            }
            let mut out = Vec::new();
            flat(parts, &mut out);
            out
        }
        other => vec![other],
    };
    for conjunct in conjuncts {
        let Constraint::Atom(atom) = conjunct else {
            continue;
        };
        if atom.op != CmpOp::Eq {
            continue;
        }
        let diff = atom.lhs.sub(&atom.rhs);
        for var in vars {
            if var.sort == Sort::Bool {
                continue;
            }
            let Some(coeff) = diff
                .coeffs()
                .find(|(v, _)| *v == var)
                .map(|(_, k)| k.clone())
            else {
                continue;
            };
            if var.sort == Sort::Int && !(coeff.is_one() || (-coeff.clone()).is_one()) {
                continue;
            }
            // diff = coeff·var + rest = 0  ⇒  var = -rest/coeff
            let rest = diff.add(&LinTerm::var(var.clone()).scale(&-coeff.clone()));
            let replacement = rest.scale(&(-Rat::one() / coeff));
            return Some((var.clone(), replacement));
        }
    }
    None
}

/// Drops conjunct atoms implied by a tighter bound on the same
/// normalized linear core, e.g. `o > 0 && o > 1` keeps only `o > 1`.
/// Only implication-sound pruning; no integer tightening. Atoms keep
/// their original orientation; normalization (where lower bounds
/// become upper bounds of the negated core) happens on a shadow copy.
fn prune_conjunct_bounds(parts: Vec<Constraint>) -> Vec<Constraint> {
    type Core = BTreeMap<Var, Rat>;
    #[derive(Default)]
    struct Bounds {
        eqs: BTreeSet<Rat>,
        upper: Option<(Rat, bool)>, // (bound, strict)
    }
    let mut atoms: Vec<(Constraint, Atom)> = Vec::new();
    let mut others = Vec::new();
    for p in parts {
        match p {
            Constraint::Atom(ref a) => {
                let canonical = canonical_atom(a);
                if matches!(canonical.op, CmpOp::Le | CmpOp::Lt | CmpOp::Eq) {
                    atoms.push((p.clone(), canonical));
                } else {
                    others.push(p);
                }
            }
            other => others.push(other),
        }
    }
    let core_of = |a: &Atom| -> Core {
        a.lhs
            .coeffs()
            .map(|(v, k)| (v.clone(), k.clone()))
            .collect()
    };
    let mut bounds: BTreeMap<Core, Bounds> = BTreeMap::new();
    for (_, a) in &atoms {
        let bound = -a.lhs.constant.clone();
        let entry = bounds.entry(core_of(a)).or_default();
        match a.op {
            CmpOp::Eq => {
                entry.eqs.insert(bound);
            }
            CmpOp::Le | CmpOp::Lt => {
                let strict = a.op == CmpOp::Lt;
                let tighter = match &entry.upper {
                    None => true,
                    Some((b, s)) => bound < *b || (bound == *b && strict && !s),
                };
                if tighter {
                    entry.upper = Some((bound, strict));
                }
            }
            _ => unreachable!(),
        }
    }
    let mut out = Vec::new();
    for (original, a) in atoms {
        let bound = -a.lhs.constant.clone();
        let entry = &bounds[&core_of(&a)];
        let keep = match a.op {
            // Conflicting equalities are all kept; the solver sees the
            // contradiction. A unique equality survives as-is.
            CmpOp::Eq => true,
            CmpOp::Le | CmpOp::Lt => {
                let is_tightest = entry.upper.as_ref() == Some(&(bound.clone(), a.op == CmpOp::Lt));
                // A sole equality on the same core that meets this bound
                // makes it redundant.
                let implied_by_eq = entry.eqs.len() == 1 && {
                    let e = entry.eqs.iter().next().unwrap();
                    if a.op == CmpOp::Lt {
                        e < &bound
                    } else {
                        e <= &bound
                    }
                };
                is_tightest && !implied_by_eq
            }
            _ => true,
        };
        if keep {
            out.push(original);
        }
    }
    out.extend(others);
    out
}
