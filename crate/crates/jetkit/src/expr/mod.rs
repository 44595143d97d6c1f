//! Immutable symbolic expressions in rational-function canonical form.
//!
//! An [`Expr`] is a quotient `num / Π fᵢ^kᵢ` where `num` is a Laurent polynomial
//! over interned atoms and each `fᵢ` is a monic polynomial factor.

mod atom;
mod calculus;
mod eval;
mod kernel;
mod poly;
mod render;

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub use atom::{intern, jet_id, sym_id, Atom, AtomId, Kernel, MultiIndex};
pub use eval::{Compiled, EvalEnv, EvalError, Oracle, Verdict};
pub use poly::{q, Coef, Mono, Poly};
pub use render::{canonical, render_with, JetNaming};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("unsupported power: {0}")]
    UnsupportedPower(String),
    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),
    #[error("wrong arity for `{0}`")]
    Arity(String),
}

#[derive(PartialEq, Eq, Hash, Debug)]
pub(crate) struct Frac {
    pub num: Poly,
    pub den: Vec<(Poly, u32)>,
}

/// Normalized symbolic expression; cheap to clone.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Expr(Arc<Frac>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", canonical(self))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", canonical(self))
    }
}

impl Default for Expr {
    fn default() -> Self {
        Expr::zero()
    }
}

impl Expr {
    fn raw(num: Poly, den: Vec<(Poly, u32)>) -> Expr {
        Expr(Arc::new(Frac { num, den }))
    }

    pub fn zero() -> Expr {
        Expr::raw(Poly::zero(), Vec::new())
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn int(n: i64) -> Expr {
        Expr::rat(q(n))
    }

    pub fn frac(n: i64, d: i64) -> Expr {
        Expr::rat(BigRational::new(n.into(), d.into()))
    }

    pub fn rat(c: Coef) -> Expr {
        Expr::raw(Poly::constant(c), Vec::new())
    }

    pub fn sym(name: &str) -> Expr {
        Expr::atom(sym_id(name))
    }

    pub fn jet(name: &str, idx: MultiIndex) -> Expr {
        Expr::atom(jet_id(name, idx))
    }

    pub fn atom(a: AtomId) -> Expr {
        Expr::raw(Poly::atom(a), Vec::new())
    }

    /// Wraps a polynomial already satisfying the kernel side relations.
    pub fn from_poly(p: Poly) -> Expr {
        Expr::raw(p, Vec::new())
    }

    pub fn num(&self) -> &Poly {
        &self.0.num
    }

    pub fn den(&self) -> &[(Poly, u32)] {
        &self.0.den
    }

    pub fn den_poly(&self) -> Poly {
        den_product(&self.0.den)
    }

    pub fn is_zero(&self) -> bool {
        self.0.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.den.is_empty() && self.0.num.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.0.den.is_empty()
    }

    pub fn as_rational(&self) -> Option<Coef> {
        if self.0.den.is_empty() {
            self.0.num.as_constant()
        } else {
            None
        }
    }

    pub fn as_atom(&self) -> Option<AtomId> {
        if !self.0.den.is_empty() {
            return None;
        }
        match self.0.num.as_term() {
            Some((m, c)) if c.is_one() && m.factors().len() == 1 && m.factors()[0].1 == 1 => Some(m.factors()[0].0),
            _ => None,
        }
    }

    /// Top-level atoms of numerator and denominator.
    pub fn atoms(&self) -> Vec<AtomId> {
        let mut v = self.0.num.atoms();
        for (f, _) in &self.0.den {
            v.extend(f.atoms());
        }
        v.sort();
        v.dedup();
        v
    }

    /// Symbol and jet atoms, including those inside kernel arguments.
    pub fn leaves(&self) -> Vec<AtomId> {
        let mut out = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut stack = self.atoms();
        while let Some(a) = stack.pop() {
            if !seen.insert(a) {
                continue;
            }
            if a.is_leaf() {
                out.push(a);
            } else if let Some(arg) = a.arg() {
                stack.extend(arg.atoms());
            }
        }
        out.sort();
        out
    }

    pub fn contains(&self, a: AtomId) -> bool {
        self.leaves().contains(&a) || self.atoms().contains(&a)
    }

    pub fn add(&self, o: &Expr) -> Expr {
        if o.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return o.clone();
        }
        if self.0.den == o.0.den {
            let num = self.0.num.add(&o.0.num);
            if self.0.den.is_empty() {
                return Expr::from_poly(num);
            }
            return normalize_fraction(num, self.0.den.clone());
        }
        Expr::sum([self.clone(), o.clone()])
    }

    pub fn sub(&self, o: &Expr) -> Expr {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Expr {
        Expr::raw(self.0.num.neg(), self.0.den.clone())
    }

    pub fn scale(&self, c: &Coef) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr::raw(self.0.num.scale(c), self.0.den.clone())
    }

    /// Sum of many terms over a common denominator.
    pub fn sum<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
        let mut groups: HashMap<Vec<(Poly, u32)>, Poly> = HashMap::new();
        for e in items {
            if e.is_zero() {
                continue;
            }
            let slot = groups.entry(e.0.den.clone()).or_default();
            *slot = slot.add(&e.0.num);
        }
        groups.retain(|_, p| !p.is_zero());
        match groups.len() {
            0 => return Expr::zero(),
            1 => {
                let (den, num) = groups.into_iter().next().unwrap();
                if den.is_empty() {
                    return Expr::from_poly(num);
                }
                return normalize_fraction(num, den);
            }
            _ => {}
        }
        let mut lcm: Vec<(Poly, u32)> = Vec::new();
        for den in groups.keys() {
            for (f, k) in den {
                match lcm.iter_mut().find(|(g, _)| g == f) {
                    Some(slot) => slot.1 = slot.1.max(*k),
                    None => lcm.push((f.clone(), *k)),
                }
            }
        }
        let mut parts = Vec::with_capacity(groups.len());
        for (den, num) in groups {
            let mut missing = Vec::new();
            for (f, k) in &lcm {
                let have = den.iter().find(|(g, _)| g == f).map_or(0, |p| p.1);
                if *k > have {
                    missing.push((f.clone(), k - have));
                }
            }
            parts.push(num.mul(&den_product(&missing)));
        }
        let mut num = Poly::zero();
        for p in parts {
            num = num.add(&p);
        }
        normalize_fraction(num, lcm)
    }

    pub fn mul(&self, o: &Expr) -> Expr {
        if self.is_zero() || o.is_zero() {
            return Expr::zero();
        }
        if self.0.den.is_empty() && o.0.den.is_empty() {
            return Expr::from_poly(self.0.num.mul(&o.0.num));
        }
        let (mut an, mut ad) = (self.0.num.clone(), self.0.den.clone());
        let (mut bn, mut bd) = (o.0.num.clone(), o.0.den.clone());
        cancel(&mut bn, &mut ad);
        cancel(&mut an, &mut bd);
        let num = an.mul(&bn);
        let mut den = ad;
        for (f, k) in bd {
            match den.iter_mut().find(|(g, _)| *g == f) {
                Some(slot) => slot.1 += k,
                None => den.push((f, k)),
            }
        }
        den.retain(|(_, k)| *k > 0);
        normalize_fraction(num, den)
    }

    pub fn product<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
        items.into_iter().fold(Expr::one(), |a, b| a.mul(&b))
    }

    pub fn recip(&self) -> Result<Expr, ExprError> {
        if self.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        let (n, factors) = invert_poly(&self.0.num);
        let num = n.mul(&den_product(&self.0.den));
        Ok(normalize_fraction(num, factors))
    }

    pub fn checked_div(&self, o: &Expr) -> Result<Expr, ExprError> {
        if let Some(c) = o.as_rational() {
            if c.is_zero() {
                return Err(ExprError::DivisionByZero);
            }
            return Ok(self.scale(&c.recip()));
        }
        Ok(self.mul(&o.recip()?))
    }

    pub fn powi(&self, k: i64) -> Result<Expr, ExprError> {
        if k < 0 {
            return self.recip()?.powi(-k);
        }
        if self.0.den.is_empty() {
            if let Some((m, c)) = self.0.num.as_term() {
                let m = m.pow(k as i32);
                let c = num_traits::pow::Pow::pow(c, k as u32);
                return Ok(Expr::from_poly(Poly::from_terms_rewritten(vec![(m, c)])));
            }
        }
        let mut acc = Expr::one();
        let mut base = self.clone();
        let mut k = k as u64;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = Expr::mul(&base, &base);
            }
        }
        Ok(acc)
    }

    /// Power with a rational exponent whose denominator is 1 or 2.
    pub fn pow_rat(&self, e: &Coef) -> Result<Expr, ExprError> {
        use num_traits::ToPrimitive;
        let n = e.numer().to_i64().ok_or_else(|| ExprError::UnsupportedPower(e.to_string()))?;
        match e.denom().to_i64() {
            Some(1) => self.powi(n),
            Some(2) => Expr::sqrt(self).powi(n),
            _ => Err(ExprError::UnsupportedPower(e.to_string())),
        }
    }

    pub fn pow(&self, e: &Expr) -> Result<Expr, ExprError> {
        match e.as_rational() {
            Some(c) => self.pow_rat(&c),
            None => {
                if let Some(c) = self.as_rational() {
                    if c.is_positive() {
                        return Ok(Expr::exp(&e.mul(&Expr::ln(self))));
                    }
                }
                Err(ExprError::UnsupportedPower(format!("({self})^({e})")))
            }
        }
    }

    /// Generic node constructor by kind name.
    pub fn make(kind: &str, children: &[Expr]) -> Result<Expr, ExprError> {
        let one = |f: fn(&Expr) -> Expr| match children {
            [a] => Ok(f(a)),
            _ => Err(ExprError::Arity(kind.to_string())),
        };
        match kind {
            "sum" => Ok(Expr::sum(children.iter().cloned())),
            "prod" => Ok(Expr::product(children.iter().cloned())),
            "pow" => match children {
                [a, b] => a.pow(b),
                _ => Err(ExprError::Arity(kind.to_string())),
            },
            "div" => match children {
                [a, b] => a.checked_div(b),
                _ => Err(ExprError::Arity(kind.to_string())),
            },
            "exp" => one(Expr::exp),
            "ln" | "log" => one(Expr::ln),
            "sin" => one(Expr::sin),
            "cos" => one(Expr::cos),
            "tan" => match children {
                [a] => Expr::tan(a),
                _ => Err(ExprError::Arity(kind.to_string())),
            },
            "arctan" | "atan" => one(Expr::arctan),
            "sqrt" => one(Expr::sqrt),
            _ => Err(ExprError::UnknownKernel(kind.to_string())),
        }
    }

    /// Rebuilds the canonical form from scratch.
    pub fn normalize(&self) -> Expr {
        self.map_atoms(&|a| a.kernel().map(|k| Expr::apply(k, &a.arg().unwrap().normalize())))
        .expect("normalization of a valid expression")
    }

    /// Structural sign: true when the leading numerator coefficient is negative.
    pub fn lead_negative(&self) -> bool {
        self.0.num.lead_negative()
    }
}

pub(crate) fn den_product(den: &[(Poly, u32)]) -> Poly {
    let mut p = Poly::one();
    for (f, k) in den {
        p = p.mul(&f.pow(*k));
    }
    p
}

/// Removes denominator factors dividing the numerator.
fn cancel(num: &mut Poly, den: &mut Vec<(Poly, u32)>) {
    for (f, k) in den.iter_mut() {
        while *k > 0 {
            match num.div_exact(f) {
                Some(qt) => {
                    *num = qt;
                    *k -= 1;
                }
                None => break,
            }
        }
    }
    den.retain(|(_, k)| *k > 0);
}

/// Splits factors dividing other factors, cancels against the numerator, sorts.
pub(crate) fn normalize_fraction(mut num: Poly, mut den: Vec<(Poly, u32)>) -> Expr {
    if num.is_zero() {
        return Expr::zero();
    }
    let mut extra = Coef::one();
    let mut changed = true;
    let mut rounds = 0;
    while changed && den.len() > 1 && rounds < 16 {
        changed = false;
        rounds += 1;
        'outer: for i in 0..den.len() {
            for j in 0..den.len() {
                if i == j || den[j].0.len() > den[i].0.len() {
                    continue;
                }
                if den[i].0 == den[j].0 {
                    let k = den[j].1;
                    den[i].1 += k;
                    den.remove(j);
                    changed = true;
                    break 'outer;
                }
                if let Some(h) = den[i].0.div_exact(&den[j].0) {
                    let k = den[i].1;
                    den.remove(i);
                    let (hn, hf) = invert_poly(&h);
                    match hn.as_constant() {
                        Some(c) => extra *= num_traits::pow::Pow::pow(&c, k),
                        None => num = num.mul(&hn.pow(k)),
                    }
                    let j = if j > i { j - 1 } else { j };
                    den[j].1 += k;
                    for (g, m) in hf {
                        den.push((g, m * k));
                    }
                    changed = true;
                    break 'outer;
                }
            }
        }
    }
    if !extra.is_one() {
        num = num.scale(&extra);
    }
    cancel(&mut num, &mut den);
    den.sort_by(|a, b| a.0.cmp(&b.0));
    Expr::raw(num, den)
}

/// 1/p = n / Π fᵢ^kᵢ with n a polynomial and each fᵢ a normalized factor.
pub(crate) fn invert_poly(p: &Poly) -> (Poly, Vec<(Poly, u32)>) {
    use atom::Tag;
    let mut n = Poly::one();
    let mut factors: Vec<(Poly, u32)> = Vec::new();
    let mut p = p.clone();
    for _ in 0..24 {
        // Laurent monomial content.
        let mut content = Mono::one();
        for a in p.atoms() {
            if a.laurent() {
                let e = p.min_exp(a);
                if e != 0 {
                    content = content.mul(&Mono::atom(a, e));
                }
            }
        }
        if !content.is_one() {
            p = p.div_exact(&Poly::term(content.clone(), Coef::one())).unwrap();
            n = n.mul(&Poly::term(content.pow(-1), Coef::one()));
        }
        // Common exp factor.
        if p.terms().iter().all(|(m, _)| m.factors().iter().any(|(a, _)| a.tag() == Tag::Exp)) {
            let (lm, _) = p.struct_lead().unwrap();
            let ea = lm.factors().iter().find(|(a, _)| a.tag() == Tag::Exp).unwrap().0;
            let inv = Expr::exp(&ea.arg().unwrap().neg());
            if inv.is_polynomial() {
                p = p.mul(inv.num());
                n = n.mul(inv.num());
                continue;
            }
        }
        // Common powers of sin / cos.
        for a in p.atoms() {
            if matches!(a.tag(), Tag::Sin | Tag::Cos) {
                let e = p.min_exp(a);
                if e > 0 {
                    p = p.div_exact(&Poly::term(Mono::atom(a, e), Coef::one())).unwrap();
                    factors.push((Poly::atom(a), e as u32));
                }
            }
        }
        // Rationalize square roots.
        if let Some(s) = p.atoms().into_iter().find(|a| a.tag() == Tag::Sqrt) {
            let mut conj = Vec::new();
            for (m, c) in p.terms() {
                if m.exp_of(s) != 0 {
                    conj.push((m.clone(), -c.clone()));
                } else {
                    conj.push((m.clone(), c.clone()));
                }
            }
            let conj = Poly::from_terms(conj);
            n = n.mul(&conj);
            p = p.mul(&conj);
            if p.is_zero() {
                break;
            }
            continue;
        }
        break;
    }
    if let Some(c) = p.as_constant() {
        return (n.scale(&c.recip()), merge_factors(factors));
    }
    if let Some((m, c)) = p.as_term() {
        // Leftover single term; keep it as a factor.
        let c = c.clone();
        factors.push((Poly::term(m.clone(), Coef::one()), 1));
        return (n.scale(&c.recip()), merge_factors(factors));
    }
    let lc = p.struct_lead().unwrap().1.clone();
    let p = p.scale(&lc.recip());
    factors.push((p, 1));
    (n.scale(&lc.recip()), merge_factors(factors))
}

fn merge_factors(v: Vec<(Poly, u32)>) -> Vec<(Poly, u32)> {
    let mut out: Vec<(Poly, u32)> = Vec::new();
    for (f, k) in v {
        match out.iter_mut().find(|(g, _)| *g == f) {
            Some(s) => s.1 += k,
            None => out.push((f, k)),
        }
    }
    out
}

macro_rules! binop {
    ($tr:ident, $m:ident, $f:ident) => {
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, o: &Expr) -> Expr {
                Expr::$f(self, o)
            }
        }
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, o: Expr) -> Expr {
                Expr::$f(&self, &o)
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, o: &Expr) -> Expr {
                Expr::$f(&self, o)
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, o: Expr) -> Expr {
                Expr::$f(self, &o)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div_or_panic);

impl Expr {
    fn div_or_panic(&self, o: &Expr) -> Expr {
        self.checked_div(o).expect("symbolic division by zero")
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::int(n)
    }
}
