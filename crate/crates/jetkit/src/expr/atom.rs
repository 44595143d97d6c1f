//! Global atom interner: symbols, jet coordinates and kernel applications.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use parking_lot::RwLock;
use smallvec::SmallVec;

use super::Expr;

/// Derivative multi-index σ = (σ₁,…,σₙ).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MultiIndex(SmallVec<[u32; 3]>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(SmallVec::from_elem(0, n))
    }

    pub fn from_slice(s: &[u32]) -> Self {
        MultiIndex(SmallVec::from_slice(s))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&k| k == 0)
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// σ + 1ᵢ
    pub fn inc(&self, i: usize) -> Self {
        let mut v = self.clone();
        v.0[i] += 1;
        v
    }

    /// σ − 1ᵢ, if σᵢ > 0.
    pub fn dec(&self, i: usize) -> Option<Self> {
        if self.0[i] == 0 {
            return None;
        }
        let mut v = self.clone();
        v.0[i] -= 1;
        Some(v)
    }

    /// Componentwise σ ≤ τ.
    pub fn le(&self, other: &Self) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// τ − σ, if σ ≤ τ.
    pub fn sub(&self, other: &Self) -> Option<Self> {
        if !other.le(self) {
            return None;
        }
        Some(MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    pub fn add(&self, other: &Self) -> Self {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Kernel {
    Exp,
    Ln,
    Sin,
    Cos,
    Arctan,
    Sqrt,
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Exp => "exp",
            Kernel::Ln => "ln",
            Kernel::Sin => "sin",
            Kernel::Cos => "cos",
            Kernel::Arctan => "arctan",
            Kernel::Sqrt => "sqrt",
        }
    }

    fn tag(self) -> Tag {
        match self {
            Kernel::Exp => Tag::Exp,
            Kernel::Ln => Tag::Ln,
            Kernel::Sin => Tag::Sin,
            Kernel::Cos => Tag::Cos,
            Kernel::Arctan => Tag::Arctan,
            Kernel::Sqrt => Tag::Sqrt,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Atom {
    Sym(Arc<str>),
    Jet(Arc<str>, MultiIndex),
    App(Kernel, Expr),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub(crate) enum Tag {
    Sym = 0,
    Jet = 1,
    Exp = 2,
    Ln = 3,
    Sin = 4,
    Cos = 5,
    Arctan = 6,
    Sqrt = 7,
}

/// Interned atom handle; the low three bits carry the atom kind.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct AtomId(u32);

impl AtomId {
    pub(crate) fn tag(self) -> Tag {
        match self.0 & 7 {
            0 => Tag::Sym,
            1 => Tag::Jet,
            2 => Tag::Exp,
            3 => Tag::Ln,
            4 => Tag::Sin,
            5 => Tag::Cos,
            6 => Tag::Arctan,
            _ => Tag::Sqrt,
        }
    }

    fn index(self) -> usize {
        (self.0 >> 3) as usize
    }

    /// Atoms that may carry negative exponents inside a numerator.
    pub(crate) fn laurent(self) -> bool {
        matches!(self.tag(), Tag::Sym | Tag::Jet | Tag::Ln | Tag::Arctan)
    }

    pub(crate) fn is_leaf(self) -> bool {
        matches!(self.tag(), Tag::Sym | Tag::Jet)
    }

    pub fn atom(self) -> Atom {
        entry(self).atom.clone()
    }

    pub(crate) fn key(self) -> Arc<str> {
        entry(self).key.clone()
    }

    /// Kernel argument, if this is a kernel application.
    pub fn arg(self) -> Option<Expr> {
        match &entry(self).atom {
            Atom::App(_, a) => Some(a.clone()),
            _ => None,
        }
    }

    pub fn kernel(self) -> Option<Kernel> {
        match &entry(self).atom {
            Atom::App(k, _) => Some(*k),
            _ => None,
        }
    }
}

pub(crate) struct Entry {
    pub atom: Atom,
    pub key: Arc<str>,
    /// Value at a fixed point modulo a prime; equal arguments give equal prints.
    pub print: Option<u64>,
    /// For cos atoms: the sin atom of the same argument.
    pub partner: OnceLock<AtomId>,
}

#[derive(Default)]
struct Interner {
    entries: Vec<Arc<Entry>>,
    map: HashMap<Atom, AtomId>,
    /// Kernel applications by (kernel, print of the argument).
    by_print: HashMap<(Kernel, u64), Vec<AtomId>>,
}

fn interner() -> &'static RwLock<Interner> {
    static I: OnceLock<RwLock<Interner>> = OnceLock::new();
    I.get_or_init(|| RwLock::new(Interner::default()))
}

pub(crate) fn entry(id: AtomId) -> Arc<Entry> {
    interner().read().entries[id.index()].clone()
}

fn sort_key(atom: &Atom) -> String {
    match atom {
        Atom::Sym(n) => format!("0{n}"),
        Atom::Jet(n, idx) => {
            let mut s = format!("1{n}\u{1}{:03}", idx.order());
            for k in idx.as_slice() {
                s.push_str(&format!(".{k:03}"));
            }
            s
        }
        Atom::App(k, a) => format!("2{}({})", k.name(), super::render::canonical(a)),
    }
}

pub fn intern(atom: Atom) -> AtomId {
    if let Some(id) = interner().read().map.get(&atom) {
        return *id;
    }
    let (tag, print) = match &atom {
        Atom::Sym(n) => (Tag::Sym, Some(print::of_name(n, &[]))),
        Atom::Jet(n, idx) => (Tag::Jet, Some(print::of_name(n, idx.as_slice()))),
        Atom::App(k, a) => (k.tag(), print::of_expr(a).map(|p| print::mix(*k as u64, p))),
    };
    // The same argument may arrive with its denominator factored differently.
    let mut alias = None;
    if let (Atom::App(k, a), Some(p)) = (&atom, print) {
        let candidates = interner().read().by_print.get(&(*k, p)).cloned().unwrap_or_default();
        alias = candidates.into_iter().find(|c| c.arg().is_some_and(|b| a.sub(&b).is_zero()));
    }
    let key: Arc<str> = sort_key(&atom).into();
    let mut w = interner().write();
    if let Some(id) = w.map.get(&atom) {
        return *id;
    }
    if let Some(id) = alias {
        w.map.insert(atom, id);
        return id;
    }
    let id = AtomId(((w.entries.len() as u32) << 3) | tag as u32);
    if let (Atom::App(k, _), Some(p)) = (&atom, print) {
        w.by_print.entry((*k, p)).or_default().push(id);
    }
    w.entries.push(Arc::new(Entry { atom: atom.clone(), key, print, partner: OnceLock::new() }));
    w.map.insert(atom, id);
    id
}

pub fn sym_id(name: &str) -> AtomId {
    intern(Atom::Sym(name.into()))
}

pub fn jet_id(name: &str, idx: MultiIndex) -> AtomId {
    intern(Atom::Jet(name.into(), idx))
}

/// The sin atom with the same argument as a cos atom.
pub(crate) fn sin_partner(cos: AtomId) -> AtomId {
    let e = entry(cos);
    *e.partner.get_or_init(|| match &e.atom {
        Atom::App(Kernel::Cos, a) => intern(Atom::App(Kernel::Sin, a.clone())),
        _ => unreachable!("partner requested for non-cos atom"),
    })
}

/// Evaluation modulo the prime 2^61 - 1 at pseudo-random atom values.
mod print {
    use num_bigint::BigInt;
    use num_traits::{ToPrimitive, Zero};

    use super::super::poly::{Coef, Poly};
    use super::super::Expr;
    use super::entry;

    const P: u64 = (1 << 61) - 1;

    fn mul(a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % P as u128) as u64
    }

    fn pow(mut a: u64, mut k: u64) -> u64 {
        let mut r = 1;
        while k > 0 {
            if k & 1 == 1 {
                r = mul(r, a);
            }
            a = mul(a, a);
            k >>= 1;
        }
        r
    }

    fn inv(a: u64) -> Option<u64> {
        (a != 0).then(|| pow(a, P - 2))
    }

    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn mix(a: u64, b: u64) -> u64 {
        splitmix(splitmix(a) ^ b) % P
    }

    pub fn of_name(name: &str, idx: &[u32]) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for b in name.bytes() {
            h = (h ^ b as u64).wrapping_mul(0x100_0000_01b3);
        }
        for &k in idx {
            h = mix(h, k as u64 + 1);
        }
        splitmix(h) % P
    }

    fn of_coef(c: &Coef) -> Option<u64> {
        let p = BigInt::from(P);
        let reduce = |n: &BigInt| {
            let r = n % &p;
            let r = if r < BigInt::zero() { r + &p } else { r };
            r.to_u64()
        };
        Some(mul(reduce(c.numer())?, inv(reduce(c.denom())?)?))
    }

    fn of_poly(f: &Poly) -> Option<u64> {
        let mut sum = 0u64;
        for (m, c) in f.terms() {
            let mut t = of_coef(c)?;
            for &(a, e) in m.factors() {
                let v = entry(a).print?;
                let v = if e < 0 { inv(v)? } else { v };
                t = mul(t, pow(v, e.unsigned_abs() as u64));
            }
            sum = (sum + t) % P;
        }
        Some(sum)
    }

    pub fn of_expr(e: &Expr) -> Option<u64> {
        let mut v = of_poly(&e.0.num)?;
        for (f, k) in &e.0.den {
            v = mul(v, inv(pow(of_poly(f)?, *k as u64))?);
        }
        Some(v)
    }
}
