//! High-precision evaluation and the randomized zero oracle.

use std::collections::HashMap;

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::atom::{AtomId, Kernel};
use super::poly::Poly;
use super::Expr;

const RM: RoundingMode = RoundingMode::ToEven;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no value bound for `{0}`")]
    Unbound(String),
    #[error("pole: {0}")]
    Pole(String),
    #[error("outside kernel domain: {0}")]
    Domain(String),
}

/// Values for leaf atoms plus working precision.
pub struct EvalEnv {
    bits: usize,
    consts: Consts,
    values: HashMap<AtomId, BigFloat>,
    cache: HashMap<AtomId, BigFloat>,
    tol: BigFloat,
}

impl EvalEnv {
    pub fn new(digits: usize) -> Self {
        let bits = digits * 10 / 3 + 64;
        EvalEnv {
            bits,
            consts: Consts::new().expect("astro-float constants"),
            values: HashMap::new(),
            cache: HashMap::new(),
            tol: BigFloat::from_f64(1e-3, bits),
        }
    }

    pub fn bind(&mut self, a: AtomId, v: &BigRational) {
        let x = rational_to_float(v, self.bits);
        self.values.insert(a, x);
        self.cache.clear();
    }

    pub fn bind_f64(&mut self, a: AtomId, v: f64) {
        self.values.insert(a, BigFloat::from_f64(v, self.bits));
        self.cache.clear();
    }

    fn near_zero(&self, v: &BigFloat) -> bool {
        below(v, &self.tol)
    }

    fn atom(&mut self, a: AtomId) -> Result<BigFloat, EvalError> {
        if let Some(v) = self.values.get(&a) {
            return Ok(v.clone());
        }
        if let Some(v) = self.cache.get(&a) {
            return Ok(v.clone());
        }
        let Some(k) = a.kernel() else {
            return Err(EvalError::Unbound(super::render::atom_text(a, &super::JetNaming::default())));
        };
        let arg = a.arg().unwrap();
        let x = self.eval(&arg)?;
        let p = self.bits;
        let v = match k {
            Kernel::Exp => x.exp(p, RM, &mut self.consts),
            Kernel::Ln => {
                if self.near_zero(&x) {
                    return Err(EvalError::Pole(format!("ln({arg})")));
                }
                x.abs().ln(p, RM, &mut self.consts)
            }
            Kernel::Sin => x.sin(p, RM, &mut self.consts),
            Kernel::Cos => x.cos(p, RM, &mut self.consts),
            Kernel::Arctan => x.atan(p, RM, &mut self.consts),
            Kernel::Sqrt => {
                if x.is_negative() {
                    return Err(EvalError::Domain(format!("sqrt({arg})")));
                }
                x.sqrt(p, RM)
            }
        };
        if v.is_nan() || v.is_inf() {
            return Err(EvalError::Domain(format!("{}({arg})", k.name())));
        }
        self.cache.insert(a, v.clone());
        Ok(v)
    }

    fn poly(&mut self, poly: &Poly) -> Result<BigFloat, EvalError> {
        let p = self.bits;
        let mut acc = BigFloat::from_i64(0, p);
        for (m, c) in poly.terms() {
            let mut t = rational_to_float(c, p);
            for &(a, e) in m.factors() {
                let v = self.atom(a)?;
                let f = if e >= 0 {
                    v.powi(e as usize, p, RM)
                } else {
                    if self.near_zero(&v) {
                        return Err(EvalError::Pole(super::render::atom_text(a, &super::JetNaming::default())));
                    }
                    v.powi((-e) as usize, p, RM).reciprocal(p, RM)
                };
                t = t.mul(&f, p, RM);
            }
            acc = acc.add(&t, p, RM);
        }
        Ok(acc)
    }

    pub fn eval(&mut self, e: &Expr) -> Result<BigFloat, EvalError> {
        let p = self.bits;
        let mut v = self.poly(e.num())?;
        for (f, k) in e.den() {
            let d = self.poly(f)?;
            if self.near_zero(&d) {
                return Err(EvalError::Pole(format!("denominator factor {}", Expr::from_poly(f.clone()))));
            }
            v = v.div(&d.powi(*k as usize, p, RM), p, RM);
        }
        Ok(v)
    }

    pub fn to_f64(&mut self, v: &BigFloat) -> f64 {
        v.format(Radix::Dec, RM, &mut self.consts).ok().and_then(|s| s.parse().ok()).unwrap_or(f64::NAN)
    }
}

/// |v| < tol. `BigFloat::abs_cmp` misorders negative operands, so the sign is stripped first.
fn below(v: &BigFloat, tol: &BigFloat) -> bool {
    v.abs().cmp(tol).is_some_and(|c| c < 0)
}

fn bigint_to_float(n: &BigInt, p: usize) -> BigFloat {
    let (sign, digits) = n.to_u64_digits();
    let base = BigFloat::from_u64(u64::MAX, p).add(&BigFloat::from_u64(1, p), p, RM);
    let mut acc = BigFloat::from_u64(0, p);
    for d in digits.iter().rev() {
        acc = acc.mul(&base, p, RM).add(&BigFloat::from_u64(*d, p), p, RM);
    }
    if sign == Sign::Minus {
        acc = acc.neg();
    }
    acc
}

fn rational_to_float(c: &BigRational, p: usize) -> BigFloat {
    let n = bigint_to_float(c.numer(), p);
    if c.denom() == &BigInt::from(1) {
        return n;
    }
    n.div(&bigint_to_float(c.denom(), p), p, RM)
}

/// Outcome of a zero test.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// Canonical form is literally zero.
    Symbolic,
    /// Below threshold at every sampled point.
    Probabilistic,
    /// Nonzero; carries a sampled magnitude.
    NonZero(String),
    /// Too many sampling failures.
    Undecidable(String),
}

impl Verdict {
    pub fn is_zero(&self) -> bool {
        matches!(self, Verdict::Symbolic | Verdict::Probabilistic)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Symbolic => "symbolic",
            Verdict::Probabilistic => "probabilistic",
            Verdict::NonZero(_) => "nonzero",
            Verdict::Undecidable(_) => "undecidable",
        }
    }
}

/// Randomized zero test at high precision.
#[derive(Clone, Debug)]
pub struct Oracle {
    pub seed: u64,
    pub digits: usize,
    pub samples: usize,
    pub max_draws: usize,
    /// Symbol pairs kept apart while sampling.
    pub distinct: Vec<(AtomId, AtomId)>,
}

impl Default for Oracle {
    fn default() -> Self {
        let digits = std::env::var("JETKIT_PRECISION").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(50);
        Oracle { seed: 0, digits, samples: 24, max_draws: 200, distinct: Vec::new() }
    }
}

impl Oracle {
    pub fn with_seed(seed: u64) -> Self {
        Oracle { seed, ..Oracle::default() }
    }

    /// Decimal exponent of the zero threshold: 30 at the default precision.
    fn threshold_exp(&self) -> i32 {
        (self.digits as i32 * 3 / 5).clamp(4, 30)
    }

    pub fn is_zero(&self, e: &Expr) -> bool {
        self.check(e).is_zero()
    }

    pub fn check(&self, e: &Expr) -> Verdict {
        if e.is_zero() {
            return Verdict::Symbolic;
        }
        if e.leaves().is_empty() && e.atoms().is_empty() {
            return Verdict::NonZero(format!("constant {e}"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let leaves = e.leaves();
        let mut env = EvalEnv::new(self.digits);
        let thr = BigFloat::parse(&format!("1.0e-{}", self.threshold_exp()), Radix::Dec, env.bits, RM, &mut env.consts);
        let mut good = 0;
        let mut last_err = String::new();
        for _ in 0..self.max_draws {
            let mut point = HashMap::new();
            for &a in &leaves {
                let v = sample_rational(&mut rng);
                env.bind(a, &v);
                point.insert(a, v);
            }
            let close = self.distinct.iter().any(|(a, b)| match (point.get(a), point.get(b)) {
                (Some(x), Some(y)) => coef_f64(&(x - y)).abs() < 1e-3,
                _ => false,
            });
            if close {
                last_err = "distinct parameters coincide".into();
                continue;
            }
            match env.eval(e) {
                Ok(v) => {
                    if !below(&v, &thr) {
                        let f = env.to_f64(&v);
                        return Verdict::NonZero(format!("value {f:.3e} at a sampled point"));
                    }
                    good += 1;
                    if good >= self.samples {
                        return Verdict::Probabilistic;
                    }
                }
                Err(err) => last_err = err.to_string(),
            }
        }
        Verdict::Undecidable(format!("undecidable at sampled points ({good} of {} usable; {last_err})", self.samples))
    }
}

/// Rational with numerator and denominator at most 99, magnitude in [1/4, 4], random sign.
pub(crate) fn sample_rational(rng: &mut ChaCha8Rng) -> BigRational {
    loop {
        let n: i64 = rng.gen_range(1..=99);
        let d: i64 = rng.gen_range(1..=99);
        if 4 * n >= d && n <= 4 * d {
            let r = BigRational::new(n.into(), d.into());
            return if rng.gen_bool(0.5) { r } else { -r };
        }
    }
}

impl Expr {
    /// Double-precision evaluation with leaf values from a lookup.
    pub fn eval_f64(&self, vals: &dyn Fn(AtomId) -> Option<f64>) -> f64 {
        let mut cache = HashMap::new();
        eval_f64_expr(self, vals, &mut cache)
    }
}

fn eval_f64_expr(e: &Expr, vals: &dyn Fn(AtomId) -> Option<f64>, cache: &mut HashMap<AtomId, f64>) -> f64 {
    let mut v = eval_f64_poly(e.num(), vals, cache);
    for (f, k) in e.den() {
        v /= eval_f64_poly(f, vals, cache).powi(*k as i32);
    }
    v
}

fn eval_f64_poly(p: &Poly, vals: &dyn Fn(AtomId) -> Option<f64>, cache: &mut HashMap<AtomId, f64>) -> f64 {
    let mut acc = 0.0;
    for (m, c) in p.terms() {
        let mut t = coef_f64(c);
        for &(a, e) in m.factors() {
            t *= eval_f64_atom(a, vals, cache).powi(e);
        }
        acc += t;
    }
    acc
}

fn eval_f64_atom(a: AtomId, vals: &dyn Fn(AtomId) -> Option<f64>, cache: &mut HashMap<AtomId, f64>) -> f64 {
    if let Some(v) = cache.get(&a) {
        return *v;
    }
    let v = match a.kernel() {
        None => vals(a).unwrap_or(f64::NAN),
        Some(k) => {
            let x = eval_f64_expr(&a.arg().unwrap(), vals, cache);
            match k {
                Kernel::Exp => x.exp(),
                Kernel::Ln => x.abs().ln(),
                Kernel::Sin => x.sin(),
                Kernel::Cos => x.cos(),
                Kernel::Arctan => x.atan(),
                Kernel::Sqrt => x.sqrt(),
            }
        }
    };
    cache.insert(a, v);
    v
}

pub(crate) fn coef_f64(c: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    c.to_f64().unwrap_or_else(|| if c.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// Expression compiled for fast repeated double-precision evaluation.
#[derive(Clone, Debug)]
pub struct Compiled {
    root: Node,
}

#[derive(Clone, Debug)]
enum Node {
    Const(f64),
    Slot(usize),
    Sum(Vec<Node>),
    Prod(Vec<(Node, i32)>, f64),
    Quot(Box<Node>, Vec<(Node, i32)>),
    App(Kernel, Box<Node>),
}

impl Compiled {
    /// Compiles `e` with leaf values read from `slots` positions; errors on the first unbound leaf.
    pub fn new(e: &Expr, slots: &[AtomId]) -> Result<Compiled, AtomId> {
        Ok(Compiled { root: compile_expr(e, slots)? })
    }

    pub fn eval(&self, vals: &[f64]) -> f64 {
        eval_node(&self.root, vals)
    }
}

fn compile_expr(e: &Expr, slots: &[AtomId]) -> Result<Node, AtomId> {
    let num = compile_poly(e.num(), slots)?;
    if e.den().is_empty() {
        return Ok(num);
    }
    let den = e.den().iter().map(|(f, k)| Ok((compile_poly(f, slots)?, *k as i32))).collect::<Result<Vec<_>, AtomId>>()?;
    Ok(Node::Quot(Box::new(num), den))
}

fn compile_poly(p: &Poly, slots: &[AtomId]) -> Result<Node, AtomId> {
    let mut terms = Vec::new();
    for (m, c) in p.terms() {
        let f = m.factors().iter().map(|&(a, e)| Ok((compile_atom(a, slots)?, e))).collect::<Result<Vec<_>, AtomId>>()?;
        terms.push(if f.is_empty() { Node::Const(coef_f64(c)) } else { Node::Prod(f, coef_f64(c)) });
    }
    Ok(match terms.len() {
        0 => Node::Const(0.0),
        1 => terms.pop().unwrap(),
        _ => Node::Sum(terms),
    })
}

fn compile_atom(a: AtomId, slots: &[AtomId]) -> Result<Node, AtomId> {
    if let Some(i) = slots.iter().position(|s| *s == a) {
        return Ok(Node::Slot(i));
    }
    match a.kernel() {
        Some(k) => Ok(Node::App(k, Box::new(compile_expr(&a.arg().unwrap(), slots)?))),
        None => Err(a),
    }
}

fn eval_node(n: &Node, v: &[f64]) -> f64 {
    match n {
        Node::Const(c) => *c,
        Node::Slot(i) => v[*i],
        Node::Sum(ts) => ts.iter().map(|t| eval_node(t, v)).sum(),
        Node::Prod(fs, c) => fs.iter().fold(*c, |acc, (f, e)| acc * eval_node(f, v).powi(*e)),
        Node::Quot(num, den) => eval_node(num, v) / den.iter().fold(1.0, |acc, (f, e)| acc * eval_node(f, v).powi(*e)),
        Node::App(k, x) => {
            let x = eval_node(x, v);
            match k {
                Kernel::Exp => x.exp(),
                Kernel::Ln => x.abs().ln(),
                Kernel::Sin => x.sin(),
                Kernel::Cos => x.cos(),
                Kernel::Arctan => x.atan(),
                Kernel::Sqrt => x.sqrt(),
            }
        }
    }
}
