//! Sparse Laurent polynomials over interned atoms with exact rational coefficients.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use smallvec::SmallVec;

use super::atom::AtomId;
use super::kernel;

pub type Coef = BigRational;

pub fn q(n: i64) -> Coef {
    BigRational::from_integer(n.into())
}

/// Monomial: atoms sorted by id, nonzero exponents.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Debug)]
pub struct Mono(pub(crate) SmallVec<[(AtomId, i32); 4]>);

impl Mono {
    pub fn one() -> Self {
        Mono(SmallVec::new())
    }

    pub fn atom(a: AtomId, e: i32) -> Self {
        let mut m = Mono::one();
        if e != 0 {
            m.0.push((a, e));
        }
        m
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(AtomId, i32)] {
        &self.0
    }

    pub fn exp_of(&self, a: AtomId) -> i32 {
        self.0.iter().find(|(b, _)| *b == a).map_or(0, |p| p.1)
    }

    pub fn degree(&self) -> i32 {
        self.0.iter().map(|p| p.1).sum()
    }

    /// Raw product without kernel side relations.
    pub fn mul(&self, o: &Mono) -> Mono {
        self.combine(o, 1)
    }

    /// Raw quotient without kernel side relations.
    pub fn div(&self, o: &Mono) -> Mono {
        self.combine(o, -1)
    }

    pub fn pow(&self, k: i32) -> Mono {
        if k == 0 {
            return Mono::one();
        }
        Mono(self.0.iter().map(|&(a, e)| (a, e * k)).collect())
    }

    fn combine(&self, o: &Mono, sign: i32) -> Mono {
        let (a, b) = (&self.0, &o.0);
        let mut out = SmallVec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i]);
                i += 1;
            } else if i >= a.len() || b[j].0 < a[i].0 {
                out.push((b[j].0, sign * b[j].1));
                j += 1;
            } else {
                let e = a[i].1 + sign * b[j].1;
                if e != 0 {
                    out.push((a[i].0, e));
                }
                i += 1;
                j += 1;
            }
        }
        Mono(out)
    }

    /// True when the raw product form violates a kernel side relation.
    pub(crate) fn needs_rewrite(&self) -> bool {
        use super::atom::Tag;
        let mut exps = 0;
        for &(a, e) in &self.0 {
            match a.tag() {
                Tag::Exp => {
                    exps += 1;
                    if e != 1 || exps > 1 {
                        return true;
                    }
                }
                Tag::Cos | Tag::Sqrt if e >= 2 => return true,
                Tag::Sin | Tag::Cos | Tag::Sqrt if e < 0 => return true,
                _ => {}
            }
        }
        false
    }
}

/// Lexicographic monomial order with atom priority by id.
pub(crate) fn lex_cmp(a: &Mono, b: &Mono) -> Ordering {
    let (x, y) = (&a.0, &b.0);
    let (mut i, mut j) = (0, 0);
    loop {
        match (x.get(i), y.get(j)) {
            (None, None) => return Ordering::Equal,
            (Some(p), None) => return p.1.cmp(&0),
            (None, Some(p)) => return 0.cmp(&p.1),
            (Some(p), Some(r)) => {
                if p.0 < r.0 {
                    return p.1.cmp(&0);
                } else if r.0 < p.0 {
                    return 0.cmp(&r.1);
                } else if p.1 != r.1 {
                    return p.1.cmp(&r.1);
                }
                i += 1;
                j += 1;
            }
        }
    }
}

/// Lexicographic monomial order with atom priority by structural key.
pub(crate) fn struct_cmp(a: &Mono, b: &Mono) -> Ordering {
    let ka = keyed(a);
    let kb = keyed(b);
    let (mut i, mut j) = (0, 0);
    loop {
        match (ka.get(i), kb.get(j)) {
            (None, None) => return Ordering::Equal,
            (Some(p), None) => return p.1.cmp(&0),
            (None, Some(p)) => return 0.cmp(&p.1),
            (Some(p), Some(r)) => match p.0.cmp(&r.0) {
                Ordering::Less => return p.1.cmp(&0),
                Ordering::Greater => return 0.cmp(&r.1),
                Ordering::Equal => {
                    if p.1 != r.1 {
                        return p.1.cmp(&r.1);
                    }
                    i += 1;
                    j += 1;
                }
            },
        }
    }
}

pub(crate) fn keyed(m: &Mono) -> Vec<(std::sync::Arc<str>, i32)> {
    let mut v: Vec<_> = m.0.iter().map(|&(a, e)| (a.key(), e)).collect();
    v.sort();
    v
}

#[derive(PartialEq, Eq)]
struct LexKey(Mono);

impl Ord for LexKey {
    fn cmp(&self, o: &Self) -> Ordering {
        lex_cmp(&self.0, &o.0)
    }
}

impl PartialOrd for LexKey {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Polynomial: terms sorted by monomial, no zero coefficients.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Debug)]
pub struct Poly {
    pub(crate) terms: Vec<(Mono, Coef)>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(Coef::one())
    }

    pub fn constant(c: Coef) -> Self {
        Poly::term(Mono::one(), c)
    }

    pub fn term(m: Mono, c: Coef) -> Self {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly { terms: vec![(m, c)] }
        }
    }

    pub fn atom(a: AtomId) -> Self {
        Poly::term(Mono::atom(a, 1), Coef::one())
    }

    /// Collects raw terms, merging equal monomials.
    pub fn from_terms<I: IntoIterator<Item = (Mono, Coef)>>(it: I) -> Self {
        let mut map: HashMap<Mono, Coef> = HashMap::new();
        for (m, c) in it {
            *map.entry(m).or_insert_with(Coef::zero) += c;
        }
        Poly::from_map(map)
    }

    fn from_map(map: HashMap<Mono, Coef>) -> Self {
        let mut terms: Vec<_> = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        Poly { terms }
    }

    pub fn terms(&self) -> &[(Mono, Coef)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    pub fn as_constant(&self) -> Option<Coef> {
        match self.terms.as_slice() {
            [] => Some(Coef::zero()),
            [(m, c)] if m.is_one() => Some(c.clone()),
            _ => None,
        }
    }

    pub fn as_term(&self) -> Option<&(Mono, Coef)> {
        match self.terms.as_slice() {
            [t] => Some(t),
            _ => None,
        }
    }

    pub fn atoms(&self) -> Vec<AtomId> {
        let mut v: Vec<AtomId> = self.terms.iter().flat_map(|(m, _)| m.0.iter().map(|p| p.0)).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn contains_atom(&self, a: AtomId) -> bool {
        self.terms.iter().any(|(m, _)| m.exp_of(a) != 0)
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn scale(&self, k: &Coef) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect() }
    }

    /// Raw multiplication by a monomial.
    pub fn mul_mono_raw(&self, m: &Mono, k: &Coef) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        let mut terms: Vec<_> = self.terms.iter().map(|(n, c)| (n.mul(m), c * k)).collect();
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        Poly { terms }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let (a, b) = (&self.terms, &o.terms);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i].clone());
                i += 1;
            } else if i >= a.len() || b[j].0 < a[i].0 {
                out.push(b[j].clone());
                j += 1;
            } else {
                let c = &a[i].1 + &b[j].1;
                if !c.is_zero() {
                    out.push((a[i].0.clone(), c));
                }
                i += 1;
                j += 1;
            }
        }
        Poly { terms: out }
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    /// Raw product without kernel side relations.
    pub fn mul_raw(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut map: HashMap<Mono, Coef> = HashMap::with_capacity(self.len() * o.len());
        for (m, c) in &self.terms {
            for (n, d) in &o.terms {
                let p = c * d;
                match map.get_mut(&m.mul(n)) {
                    Some(v) => *v += p,
                    None => {
                        map.insert(m.mul(n), p);
                    }
                }
            }
        }
        Poly::from_map(map)
    }

    /// Product with kernel side relations applied.
    pub fn mul(&self, o: &Poly) -> Poly {
        Poly::from_terms_rewritten(self.mul_raw(o).terms)
    }

    /// Applies kernel side relations to every term.
    pub(crate) fn from_terms_rewritten(terms: Vec<(Mono, Coef)>) -> Poly {
        if terms.iter().all(|(m, _)| !m.needs_rewrite()) {
            return Poly { terms }.resorted();
        }
        let mut map: HashMap<Mono, Coef> = HashMap::new();
        for (m, c) in terms {
            if m.needs_rewrite() {
                for (n, d) in kernel::rewrite_term(&m).terms {
                    *map.entry(n).or_insert_with(Coef::zero) += d * &c;
                }
            } else {
                *map.entry(m).or_insert_with(Coef::zero) += c;
            }
        }
        Poly::from_map(map)
    }

    fn resorted(mut self) -> Poly {
        if !self.terms.windows(2).all(|w| w[0].0 < w[1].0) {
            return Poly::from_terms(self.terms);
        }
        self.terms.retain(|(_, c)| !c.is_zero());
        self
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut acc = Poly::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Partial derivative treating the atom as an indeterminate.
    pub fn partial(&self, a: AtomId) -> Poly {
        let mut out = Vec::new();
        for (m, c) in &self.terms {
            let e = m.exp_of(a);
            if e != 0 {
                out.push((m.div(&Mono::atom(a, 1)), c * q(e as i64)));
            }
        }
        Poly::from_terms(out)
    }

    /// Leading term under the structural order.
    pub fn struct_lead(&self) -> Option<&(Mono, Coef)> {
        self.terms.iter().max_by(|a, b| struct_cmp(&a.0, &b.0))
    }

    /// Minimum exponent of an atom over all terms.
    pub fn min_exp(&self, a: AtomId) -> i32 {
        self.terms.iter().map(|(m, _)| m.exp_of(a)).min().unwrap_or(0)
    }

    /// Exact quotient self / f, if f divides self with raw monomial arithmetic.
    pub fn div_exact(&self, f: &Poly) -> Option<Poly> {
        if f.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some((m, c)) = f.as_term() {
            let out: Vec<_> = self.terms.iter().map(|(n, d)| (n.div(m), d / c)).collect();
            if out.iter().any(|(n, _)| n.0.iter().any(|&(a, e)| e < 0 && !a.laurent())) {
                return None;
            }
            return Some(Poly::from_terms(out));
        }
        // Newton box bound on quotient exponents.
        let mut atoms = self.atoms();
        atoms.extend(f.atoms());
        atoms.sort();
        atoms.dedup();
        let mut bounds = Vec::with_capacity(atoms.len());
        for &a in &atoms {
            let (nlo, nhi) = exp_range(self, a);
            let (flo, fhi) = exp_range(f, a);
            let mut lo = nlo - flo;
            let hi = nhi - fhi;
            if !a.laurent() {
                lo = lo.max(0);
            }
            if lo > hi {
                return None;
            }
            bounds.push((a, lo, hi));
        }
        let (lm, lc) = f.terms.iter().max_by(|a, b| lex_cmp(&a.0, &b.0)).unwrap();
        let mut r: BTreeMap<LexKey, Coef> = self.terms.iter().map(|(m, c)| (LexKey(m.clone()), c.clone())).collect();
        let mut quot = Vec::new();
        let mut guard = 0usize;
        while let Some((k, c)) = r.pop_last() {
            guard += 1;
            if guard > 200_000 {
                return None;
            }
            let qm = k.0.div(lm);
            for &(a, lo, hi) in &bounds {
                let e = qm.exp_of(a);
                if e < lo || e > hi {
                    return None;
                }
            }
            if qm.0.iter().any(|p| bounds.binary_search_by(|b| b.0.cmp(&p.0)).is_err()) {
                return None;
            }
            let qc = &c / lc;
            for (m, d) in &f.terms {
                if std::ptr::eq(m, lm) {
                    continue;
                }
                let key = LexKey(qm.mul(m));
                let delta = &qc * d;
                match r.get_mut(&key) {
                    Some(v) => {
                        *v -= delta;
                        if v.is_zero() {
                            r.remove(&key);
                        }
                    }
                    None => {
                        r.insert(key, -delta);
                    }
                }
            }
            quot.push((qm, qc));
        }
        Some(Poly::from_terms(quot))
    }

    /// True when the structural leading coefficient is negative.
    pub fn lead_negative(&self) -> bool {
        self.struct_lead().is_some_and(|(_, c)| c.is_negative())
    }
}

fn exp_range(p: &Poly, a: AtomId) -> (i32, i32) {
    let mut lo = i32::MAX;
    let mut hi = i32::MIN;
    for (m, _) in &p.terms {
        let e = m.exp_of(a);
        lo = lo.min(e);
        hi = hi.max(e);
    }
    (lo, hi)
}
