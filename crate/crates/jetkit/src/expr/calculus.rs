//! Derivations and substitution.

use std::collections::HashMap;

use super::atom::{AtomId, Kernel};
use super::poly::{Mono, Poly};
use super::{Expr, ExprError};

impl Expr {
    /// Applies the derivation determined by its values on symbol and jet atoms.
    ///
    /// `leaf` returns `None` for atoms the derivation annihilates.
    pub fn derive(&self, leaf: &dyn Fn(AtomId) -> Option<Expr>) -> Expr {
        let mut memo = HashMap::new();
        derive_memo(self, leaf, &mut memo)
    }

    /// Partial derivative with respect to a symbol or jet atom.
    pub fn diff(&self, s: AtomId) -> Expr {
        self.derive(&|a| (a == s).then(Expr::one))
    }

    /// Simultaneous substitution of atoms; kernel arguments are rewritten recursively.
    pub fn map_atoms(&self, f: &dyn Fn(AtomId) -> Option<Expr>) -> Result<Expr, ExprError> {
        let mut memo = HashMap::new();
        map_memo(self, f, &mut memo)
    }

    /// Substitution of symbol and jet atoms by expressions.
    pub fn substitute(&self, bindings: &HashMap<AtomId, Expr>) -> Result<Expr, ExprError> {
        if bindings.is_empty() {
            return Ok(self.clone());
        }
        self.map_atoms(&|a| bindings.get(&a).cloned())
    }
}

fn atom_derivative(
    a: AtomId,
    leaf: &dyn Fn(AtomId) -> Option<Expr>,
    memo: &mut HashMap<AtomId, Expr>,
) -> Expr {
    if let Some(d) = memo.get(&a) {
        return d.clone();
    }
    let d = match a.kernel() {
        None => leaf(a).unwrap_or_else(Expr::zero),
        Some(k) => {
            let arg = a.arg().unwrap();
            let da = derive_memo(&arg, leaf, memo);
            if da.is_zero() {
                Expr::zero()
            } else {
                let outer = match k {
                    Kernel::Exp => Expr::atom(a),
                    Kernel::Ln => arg.recip().expect("logarithm of zero"),
                    Kernel::Sin => Expr::cos(&arg),
                    Kernel::Cos => Expr::sin(&arg).neg(),
                    Kernel::Arctan => Expr::one().add(&arg.mul(&arg)).recip().expect("1 + w^2 vanishes"),
                    Kernel::Sqrt => Expr::atom(a).checked_div(&arg.scale(&super::q(2))).expect("sqrt of zero"),
                };
                outer.mul(&da)
            }
        }
    };
    memo.insert(a, d.clone());
    d
}

fn poly_derivative(
    p: &Poly,
    leaf: &dyn Fn(AtomId) -> Option<Expr>,
    memo: &mut HashMap<AtomId, Expr>,
) -> Expr {
    let mut parts = Vec::new();
    for a in p.atoms() {
        let d = atom_derivative(a, leaf, memo);
        if d.is_zero() {
            continue;
        }
        let dp = p.partial(a);
        if dp.is_zero() {
            continue;
        }
        parts.push(Expr::from_poly(Poly::from_terms_rewritten(dp.terms.clone())).mul(&d));
    }
    Expr::sum(parts)
}

fn derive_memo(e: &Expr, leaf: &dyn Fn(AtomId) -> Option<Expr>, memo: &mut HashMap<AtomId, Expr>) -> Expr {
    let dn = poly_derivative(e.num(), leaf, memo);
    if e.den().is_empty() {
        return dn;
    }
    let inv_den = Expr::raw_den(e.den());
    let mut parts = vec![dn.mul(&inv_den)];
    for (f, k) in e.den() {
        let df = poly_derivative(f, leaf, memo);
        if df.is_zero() {
            continue;
        }
        let inv_f = Expr::raw_den(&[(f.clone(), 1)]);
        parts.push(e.mul(&df).mul(&inv_f).scale(&-super::q(*k as i64)));
    }
    Expr::sum(parts)
}

fn map_memo(
    e: &Expr,
    f: &dyn Fn(AtomId) -> Option<Expr>,
    memo: &mut HashMap<AtomId, Option<Expr>>,
) -> Result<Expr, ExprError> {
    let mut changed = false;
    for a in e.atoms() {
        if map_atom(a, f, memo)?.is_some() {
            changed = true;
        }
    }
    if !changed {
        return Ok(e.clone());
    }
    let num = map_poly(e.num(), f, memo)?;
    let mut den = Expr::one();
    for (p, k) in e.den() {
        let v = map_poly(p, f, memo)?;
        den = den.mul(&v.powi(*k as i64)?);
    }
    num.checked_div(&den)
}

fn map_atom(
    a: AtomId,
    f: &dyn Fn(AtomId) -> Option<Expr>,
    memo: &mut HashMap<AtomId, Option<Expr>>,
) -> Result<Option<Expr>, ExprError> {
    if let Some(v) = memo.get(&a) {
        return Ok(v.clone());
    }
    let v = match f(a) {
        Some(v) => Some(v),
        None => match a.kernel() {
            Some(k) => {
                let arg = a.arg().unwrap();
                let new = map_memo(&arg, f, memo)?;
                (new != arg).then(|| Expr::apply(k, &new))
            }
            None => None,
        },
    };
    memo.insert(a, v.clone());
    Ok(v)
}

fn map_poly(
    p: &Poly,
    f: &dyn Fn(AtomId) -> Option<Expr>,
    memo: &mut HashMap<AtomId, Option<Expr>>,
) -> Result<Expr, ExprError> {
    let mut powers: HashMap<(AtomId, i32), Expr> = HashMap::new();
    let mut parts = Vec::with_capacity(p.len());
    for (m, c) in p.terms() {
        let mut kept = Mono::one();
        let mut factor = Expr::one();
        for &(a, e) in m.factors() {
            match map_atom(a, f, memo)? {
                None => kept = kept.mul(&Mono::atom(a, e)),
                Some(v) => {
                    let pw = match powers.get(&(a, e)) {
                        Some(x) => x.clone(),
                        None => {
                            let x = v.powi(e as i64)?;
                            powers.insert((a, e), x.clone());
                            x
                        }
                    };
                    factor = factor.mul(&pw);
                }
            }
        }
        let base = Expr::from_poly(Poly::from_terms_rewritten(vec![(kept, c.clone())]));
        parts.push(base.mul(&factor));
    }
    Ok(Expr::sum(parts))
}

impl Expr {
    /// 1 / Π fᵢ^kᵢ for already normalized factors.
    pub(crate) fn raw_den(den: &[(Poly, u32)]) -> Expr {
        super::normalize_fraction(Poly::one(), den.to_vec())
    }
}

impl Expr {
    /// Renames symbols and jet variables by name.
    pub fn rename(&self, names: &HashMap<String, String>) -> Expr {
        use super::atom::Atom;
        if names.is_empty() {
            return self.clone();
        }
        self.map_atoms(&|a| match a.atom() {
            Atom::Sym(n) => names.get(&*n).map(|m| Expr::sym(m)),
            Atom::Jet(n, idx) => names.get(&*n).map(|m| Expr::jet(m, idx)),
            Atom::App(..) => None,
        })
        .expect("renaming preserves nonzero denominators")
    }
}
