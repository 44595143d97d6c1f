//! Linear ansatz searches for pseudosymmetries and for relations among
//! prolonged invariants.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::expr::{sym_id, AtomId, Coef, Expr, Mono, Oracle};
use crate::forms::HForm;
use crate::jet::{Check, EqSystem};
use crate::morphism::{MorphError, Morphism, Prolongation};
use crate::pseudosym::{check_pseudosymmetry, FieldForm, PseudoError, PseudoField, Prolonger};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("unknowns occur nonlinearly in {0}")]
    Nonlinear(String),
    #[error("equations are inhomogeneous in the unknowns: {0}")]
    Inhomogeneous(String),
    #[error("invariant check failed: {0}")]
    NotInvariant(String),
    #[error(transparent)]
    Pseudo(#[from] PseudoError),
    #[error(transparent)]
    Morph(#[from] MorphError),
}

/// Basis of {v : A v = 0} by exact Gauss-Jordan elimination.
pub fn nullspace(rows: &[Vec<Coef>], ncols: usize) -> Vec<Vec<Coef>> {
    let mut a: Vec<Vec<Coef>> = rows.iter().filter(|r| r.iter().any(|c| !c.is_zero())).cloned().collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        // smallest pivot by bit size keeps entries from swelling
        let best = (r..a.len())
            .filter(|&i| !a[i][c].is_zero())
            .min_by_key(|&i| a[i][c].numer().bits() + a[i][c].denom().bits());
        let Some(p) = best else { continue };
        a.swap(r, p);
        let inv = a[r][c].recip();
        for x in a[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..a.len() {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                let pivot_row = a[r].clone();
                for (x, p) in a[i].iter_mut().zip(&pivot_row).take(ncols) {
                    *x -= &f * p;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == a.len() {
            break;
        }
    }
    let mut basis = Vec::new();
    for free in (0..ncols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![Coef::zero(); ncols];
        v[free] = Coef::one();
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = -a[row][free].clone();
        }
        basis.push(v);
    }
    basis
}

/// Rows of the linear system Σ_k u_k·(coefficient of each monomial) = 0.
fn linear_rows(exprs: &[Expr], unknowns: &[AtomId]) -> Result<Vec<Vec<Coef>>, SearchError> {
    let mut rows: BTreeMap<(usize, Mono), Vec<Coef>> = BTreeMap::new();
    for (ei, e) in exprs.iter().enumerate() {
        for (m, c) in e.num().terms() {
            let mut which = None;
            let mut rest = Mono::one();
            for &(a, k) in m.factors() {
                if let Some(i) = unknowns.iter().position(|u| *u == a) {
                    if k != 1 || which.is_some() {
                        return Err(SearchError::Nonlinear(e.to_string()));
                    }
                    which = Some(i);
                } else {
                    rest = rest.mul(&Mono::atom(a, k));
                }
            }
            let Some(i) = which else {
                return Err(SearchError::Inhomogeneous(e.to_string()));
            };
            let row = rows.entry((ei, rest)).or_insert_with(|| vec![Coef::zero(); unknowns.len()]);
            row[i] += c;
        }
    }
    Ok(rows.into_values().collect())
}

/// Scales a vector so its first nonzero entry is 1.
fn normalize_vec(v: &mut [Coef]) {
    if let Some(lead) = v.iter().find(|c| !c.is_zero()).cloned() {
        for c in v.iter_mut() {
            *c = &*c / &lead;
        }
    }
}

fn unknown_atoms(k: usize) -> Vec<AtomId> {
    (0..k).map(|i| sym_id(&format!("_u{i}"))).collect()
}

/// Which component of a field an ansatz slot fills.
#[derive(Clone, Debug, PartialEq)]
pub enum Slot {
    /// Base component along an independent variable.
    Base(usize),
    /// Vector-field component of a dependent variable.
    Var(String),
}

/// Field template: every slot is a linear combination of the monomials.
#[derive(Clone, Debug, PartialEq)]
pub struct Ansatz {
    pub mu: HForm,
    pub c_values: Vec<Coef>,
    pub slots: Vec<Slot>,
    pub monomials: Vec<Expr>,
}

impl Ansatz {
    /// Default list of scalar multiples scanned when none is given.
    pub fn default_c() -> Vec<Coef> {
        [(0, 1), (1, 1), (-1, 1), (2, 1), (-2, 1), (4, 1), (-4, 1), (1, 2), (-1, 2)]
            .iter()
            .map(|&(n, d)| Coef::new(n.into(), d.into()))
            .collect()
    }

    /// Monomials Π v^k with each power at most the given bound.
    pub fn monomials_upto(bounds: &[(Expr, u32)]) -> Vec<Expr> {
        let mut out = vec![Expr::one()];
        for (v, d) in bounds {
            let mut next = Vec::new();
            for m in &out {
                let mut p = m.clone();
                for _ in 0..=*d {
                    next.push(p.clone());
                    p = p.mul(v);
                }
            }
            out = next;
        }
        out
    }

    pub fn unknown_count(&self) -> usize {
        self.slots.len() * self.monomials.len()
    }

    /// Field whose coefficients are the given values (or fresh unknowns).
    pub fn field(&self, sys: &EqSystem, c: &Coef, coeffs: &[Expr]) -> Result<PseudoField, PseudoError> {
        let n = sys.n();
        let mut a = vec![Expr::zero(); n];
        let mut b: Vec<(String, Vec<Expr>)> = Vec::new();
        let nm = self.monomials.len();
        for (s, slot) in self.slots.iter().enumerate() {
            let comp = Expr::sum((0..nm).map(|k| coeffs[s * nm + k].mul(&self.monomials[k])));
            match slot {
                Slot::Base(i) => a[*i] = comp,
                Slot::Var(v) => b.push((v.clone(), vec![comp])),
            }
        }
        PseudoField::from_vector_field(sys, vec![a], b, FieldForm::Scalar { c: c.clone(), mu: self.mu.clone() })
    }
}

/// Solution space for one value of c.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub c: Coef,
    pub basis: Vec<Vec<Coef>>,
    pub fields: Vec<PseudoField>,
    /// Independent re-verification of every basis field.
    pub checks: Vec<Vec<Check>>,
}

impl SearchOutcome {
    pub fn verified(&self) -> bool {
        self.checks.iter().all(|c| c.iter().all(|k| k.pass()))
    }
}

/// Tangency residuals of the template, linear extraction, exact nullspace.
pub fn search_pseudosymmetry(a: &Ansatz, sys: &EqSystem, oracle: &Oracle) -> Result<Vec<SearchOutcome>, SearchError> {
    let k = a.unknown_count();
    let unknowns = unknown_atoms(k);
    let template: Vec<Expr> = unknowns.iter().map(|&u| Expr::atom(u)).collect();
    let mut out = Vec::new();
    for c in &a.c_values {
        let field = a.field(sys, c, &template)?;
        let p = Prolonger::new(&field, sys)?;
        let mut residuals = Vec::new();
        for r in 0..sys.rules().len() {
            residuals.extend(p.tangency(r)?);
        }
        let rows = linear_rows(&residuals, &unknowns)?;
        let mut basis = nullspace(&rows, k);
        let mut fields = Vec::new();
        let mut checks = Vec::new();
        for v in basis.iter_mut() {
            normalize_vec(v);
            let coeffs: Vec<Expr> = v.iter().map(|q| Expr::rat(q.clone())).collect();
            let f = a.field(sys, c, &coeffs)?;
            checks.push(check_pseudosymmetry(&f, sys, oracle)?);
            fields.push(f);
        }
        out.push(SearchOutcome { c: c.clone(), basis, fields, checks });
    }
    Ok(out)
}

/// Relation Σ c_k·basis_k = 0 among prolonged invariants, with its independent check.
#[derive(Clone, Debug)]
pub struct Relation {
    pub coeffs: Vec<Coef>,
    pub expr: Expr,
    pub check: Check,
}

/// Linear relations among pulled-back target monomials.
///
/// `basis` is written in target coordinates: the names of `inv.nu` and their jets.
pub fn hunt_relations(
    field: Option<&PseudoField>,
    inv: &Morphism,
    basis: &[Expr],
    sys: &EqSystem,
    oracle: &Oracle,
) -> Result<Vec<Relation>, SearchError> {
    if let Some(y) = field {
        for e in inv.xi.iter().chain(inv.nu.iter().map(|(_, e)| e)) {
            for c in crate::pseudosym::is_invariant(y, e, sys, oracle)? {
                if !c.pass() {
                    return Err(SearchError::NotInvariant(c.name));
                }
            }
        }
    }
    let p = Prolongation::new(inv, sys, oracle)?;
    let pulled = basis.iter().map(|b| p.pullback(b)).collect::<Result<Vec<_>, _>>()?;
    let unknowns = unknown_atoms(basis.len());
    let combo = Expr::sum(pulled.iter().zip(&unknowns).map(|(e, &u)| e.mul(&Expr::atom(u))));
    let rows = linear_rows(&[combo], &unknowns)?;
    let mut out = Vec::new();
    for mut v in nullspace(&rows, basis.len()) {
        normalize_vec(&mut v);
        let expr = Expr::sum(v.iter().zip(basis).map(|(c, b)| b.scale(c)));
        let res = p.pullback(&expr);
        let check = sys.check(format!("relation {expr} = 0"), res.map_err(|e| match e {
            MorphError::Jet(j) => j,
            other => crate::jet::JetError::NonTerminating(other.to_string()),
        }), oracle);
        out.push(Relation { coeffs: v, expr, check });
    }
    Ok(out)
}

/// Whether `e`, written over `basis`, is a combination of the relations found.
pub fn spans(relations: &[Relation], basis: &[Expr], e: &Expr) -> Result<bool, SearchError> {
    let k = basis.len();
    let unknowns = unknown_atoms(k + 1);
    let combo = Expr::sum(basis.iter().zip(&unknowns).map(|(b, &u)| b.mul(&Expr::atom(u)))).add(&e.mul(&Expr::atom(unknowns[k])));
    let rows = linear_rows(&[combo], &unknowns)?;
    let Some(v) = nullspace(&rows, k + 1).into_iter().find(|v| !v[k].is_zero()) else {
        return Ok(false);
    };
    let c: Vec<Coef> = v[..k].iter().map(|x| -(x / &v[k])).collect();
    let mut rel: Vec<Vec<Coef>> = relations.iter().map(|r| r.coeffs.clone()).collect();
    let before = nullspace(&rel, k).len();
    rel.push(c);
    Ok(nullspace(&rel, k).len() == before)
}

/// Largest-magnitude coefficient, for reporting.
pub fn max_abs(v: &[Coef]) -> Coef {
    v.iter().map(|c| c.abs()).max().unwrap_or_else(Coef::zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Coef {
        Coef::new(n.into(), d.into())
    }

    #[test]
    fn nullspace_small() {
        let rows = vec![vec![q(1, 1), q(2, 1), q(3, 1)], vec![q(2, 1), q(4, 1), q(6, 1)]];
        let ns = nullspace(&rows, 3);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            for r in &rows {
                let s: Coef = r.iter().zip(v).map(|(a, b)| a * b).sum();
                assert!(s.is_zero());
            }
        }
        assert!(nullspace(&[vec![q(1, 1), q(0, 1)], vec![q(0, 1), q(1, 1)]], 2).is_empty());
    }

    #[test]
    fn monomial_grid() {
        let rho = Expr::sym("rho");
        let m = Ansatz::monomials_upto(&[(rho.clone(), 2)]);
        assert_eq!(m, vec![Expr::one(), rho.clone(), rho.mul(&rho)]);
        let z = Expr::sym("z");
        assert_eq!(Ansatz::monomials_upto(&[(rho, 2), (z, 1)]).len(), 6);
    }
}
