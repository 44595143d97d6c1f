//! C-morphisms given by lower components: prolongation, regularity,
//! pullback and verification against a target system.

use std::cell::RefCell;

use dashmap::DashMap;
use thiserror::Error;

use crate::expr::{Atom, Expr, ExprError, MultiIndex, Oracle, Verdict};
use crate::forms::{FormError, Mat};
use crate::jet::{Check, EqSystem, JetError};
use crate::pseudosym::{is_invariant, PseudoError, PseudoField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MorphError {
    #[error("irregular morphism: det(D_s xi) = {0}")]
    Singular(String),
    #[error("expected {expected} base components, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("unknown target variable `{0}`")]
    UnknownTarget(String),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Form(#[from] FormError),
}

/// Lower components x′_i = ξ^i, u′^j = ν^j on the source.
#[derive(Clone, Debug, PartialEq)]
pub struct Morphism {
    pub xi: Vec<Expr>,
    /// Target variable names with their values.
    pub nu: Vec<(String, Expr)>,
}

impl Morphism {
    /// ξ = identity on the independent variables.
    pub fn with_identity_base(sys: &EqSystem, nu: Vec<(String, Expr)>) -> Morphism {
        Morphism { xi: sys.spec().independent.iter().map(|s| Expr::sym(s)).collect(), nu }
    }

    pub fn identity(sys: &EqSystem) -> Morphism {
        let nu = sys.spec().vars.iter().map(|v| (v.name.clone(), sys.spec().coord(&v.name))).collect();
        Morphism::with_identity_base(sys, nu)
    }

    pub fn is_identity_base(&self, sys: &EqSystem) -> bool {
        self.xi.iter().zip(&sys.spec().independent).all(|(e, s)| e == &Expr::sym(s))
    }
}

/// Memoized table ν^j_σ of a morphism over a source system.
pub struct Prolongation<'a> {
    m: &'a Morphism,
    sys: &'a EqSystem,
    /// minv[k][s] with D_s ν = Σ_k (D_s ξ^k) ν_{+1_k}.
    minv: Mat,
    det: Expr,
    memo: DashMap<(usize, MultiIndex), Expr>,
}

/// Reduced Jacobian matrix M[s][i] = D_s ξ^i.
pub fn jacobian(xi: &[Expr], sys: &EqSystem) -> Result<Mat, MorphError> {
    let n = sys.n();
    if xi.len() != n {
        return Err(MorphError::Arity { expected: n, got: xi.len() });
    }
    let mut rows = Vec::with_capacity(n);
    for s in 0..n {
        rows.push(xi.iter().map(|e| sys.total_derivative(e, s)).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(Mat::new(rows)?)
}

impl<'a> Prolongation<'a> {
    pub fn new(m: &'a Morphism, sys: &'a EqSystem, oracle: &Oracle) -> Result<Prolongation<'a>, MorphError> {
        let jac = jacobian(&m.xi, sys)?;
        let det = sys.reduce(&jac.det()?)?;
        if det.is_zero() || sys.oracle(oracle).is_zero(&det) {
            return Err(MorphError::Singular(sys.render(&det)));
        }
        let minv = jac.inverse()?.map(|e| sys.reduce(e))?;
        Ok(Prolongation { m, sys, minv, det, memo: DashMap::new() })
    }

    pub fn determinant(&self) -> &Expr {
        &self.det
    }

    /// Inverse Jacobian entry (k, s).
    pub fn inverse_jacobian(&self) -> &Mat {
        &self.minv
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.m.nu.iter().position(|(n, _)| n == name)
    }

    /// ν_{+1_k} from ν through the inverse Jacobian.
    pub fn step(&self, v: &Expr, k: usize) -> Result<Expr, MorphError> {
        let n = self.sys.n();
        let mut parts = Vec::with_capacity(n);
        for s in 0..n {
            let c = self.minv.get(k, s);
            if !c.is_zero() {
                parts.push(c.mul(&self.sys.total_derivative(v, s)?));
            }
        }
        Ok(self.sys.reduce(&Expr::sum(parts))?)
    }

    /// ν^j_σ reduced on the source.
    pub fn prolong(&self, j: usize, sigma: &MultiIndex) -> Result<Expr, MorphError> {
        if let Some(v) = self.memo.get(&(j, sigma.clone())) {
            return Ok(v.clone());
        }
        let v = match (0..sigma.len()).find(|&i| sigma.get(i) > 0) {
            None => self.sys.reduce(&self.m.nu[j].1)?,
            Some(k) => {
                let prev = self.prolong(j, &sigma.dec(k).unwrap())?;
                self.step(&prev, k)?
            }
        };
        self.memo.insert((j, sigma.clone()), v.clone());
        Ok(v)
    }

    /// B*(e′): target coordinates replaced by ξ and prolonged ν, reduced on the source.
    pub fn pullback(&self, e: &Expr) -> Result<Expr, MorphError> {
        let err: RefCell<Option<MorphError>> = RefCell::new(None);
        let indep = &self.sys.spec().independent;
        let out = e.map_atoms(&|a| match a.atom() {
            Atom::Sym(name) => indep.iter().position(|s| **s == *name).map(|i| self.m.xi[i].clone()),
            Atom::Jet(name, idx) => {
                let j = self.var_index(&name)?;
                match self.prolong(j, &idx) {
                    Ok(v) => Some(v),
                    Err(x) => {
                        err.borrow_mut().get_or_insert(x);
                        None
                    }
                }
            }
            Atom::App(..) => None,
        })?;
        if let Some(x) = err.into_inner() {
            return Err(x);
        }
        Ok(self.sys.reduce(&out)?)
    }
}

pub fn check_regularity(m: &Morphism, sys: &EqSystem, oracle: &Oracle) -> Check {
    let name = "regularity det(D_s xi)".to_string();
    let det = jacobian(&m.xi, sys).and_then(|j| Ok(sys.reduce(&j.det()?)?));
    match det {
        Ok(d) => {
            let v = sys.oracle(oracle).check(&d);
            let verdict = match v {
                Verdict::NonZero(_) => Verdict::Symbolic,
                Verdict::Symbolic | Verdict::Probabilistic => Verdict::NonZero("determinant vanishes".into()),
                u => u,
            };
            Check { name, verdict, detail: sys.render(&d) }
        }
        Err(e) => Check { name, verdict: Verdict::Undecidable(e.to_string()), detail: e.to_string() },
    }
}

pub fn pullback(m: &Morphism, e: &Expr, sys: &EqSystem, oracle: &Oracle) -> Result<Expr, MorphError> {
    Prolongation::new(m, sys, oracle)?.pullback(e)
}

/// Regularity plus B*(L′ − R′) = 0 for every target rule.
pub fn verify_morphism(m: &Morphism, sys: &EqSystem, target: &EqSystem, oracle: &Oracle) -> Result<Vec<Check>, MorphError> {
    for (name, _) in &m.nu {
        if target.var_index(name).is_none() {
            return Err(MorphError::UnknownTarget(name.clone()));
        }
    }
    let reg = check_regularity(m, sys, oracle);
    if !reg.pass() {
        return Ok(vec![reg]);
    }
    let p = Prolongation::new(m, sys, oracle)?;
    let mut out = vec![reg];
    for rule in target.rules() {
        let lead = Expr::jet(&rule.var, rule.lead.clone());
        let name = format!("pullback {}", target.render(&lead));
        let res = p.pullback(&lead.sub(&rule.rhs));
        out.push(match res {
            Ok(r) => sys.check(name, Ok(r), oracle),
            Err(MorphError::Jet(e)) => sys.check(name, Err(e), oracle),
            Err(e) => return Err(e),
        });
    }
    Ok(out)
}

/// Invariance of every component under Y, then verification of the quotient system.
pub fn factor_check(
    field: &PseudoField,
    m: &Morphism,
    sys: &EqSystem,
    quotient: &EqSystem,
    oracle: &Oracle,
) -> Result<Vec<Check>, PseudoError> {
    let mut out = Vec::new();
    for e in m.xi.iter().chain(m.nu.iter().map(|(_, e)| e)) {
        out.extend(is_invariant(field, e, sys, oracle)?);
    }
    out.extend(verify_morphism(m, sys, quotient, oracle)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::parser::parse_expr_in;

    #[test]
    fn cole_hopf_second_jet() {
        let p = corpus::load("heat_cole_hopf").unwrap();
        let m = p.morphism("B").unwrap();
        let o = Oracle::default();
        let pr = Prolongation::new(m, &p.system, &o).unwrap();
        let v = pr.prolong(0, &MultiIndex::from_slice(&[2, 0])).unwrap();
        let want = parse_expr_in("u_xxx/u - 3*(u_x/u)*(u_xx/u) + 2*(u_x/u)^3", &p.scope()).unwrap();
        assert!(v.sub(&p.system.reduce(&want).unwrap()).is_zero());
    }

    #[test]
    fn miura_third_jet() {
        let p = corpus::load("mkdv_miura").unwrap();
        let m = p.morphism("B").unwrap();
        // on the free jet space the prolongation is a plain total derivative
        let free = crate::jet::EqSystem::new(crate::jet::SystemSpec {
            rules: vec![],
            ..p.system.spec().clone()
        })
        .unwrap();
        let pr = Prolongation::new(m, &free, &Oracle::default()).unwrap();
        let v = pr.prolong(0, &MultiIndex::from_slice(&[3, 0])).unwrap();
        let want = parse_expr_in("-6*u_x*u_xx - 2*u*u_xxx + u_xxxx", &p.scope()).unwrap();
        assert!(v.sub(&want).is_zero());
    }

    #[test]
    fn identity_verifies_against_source() {
        let p = corpus::load("kdv_abt").unwrap();
        let o = Oracle::default();
        let id = Morphism::identity(&p.system);
        let rep = verify_morphism(&id, &p.system, &p.system, &o).unwrap();
        assert!(rep.iter().all(|c| c.verdict == Verdict::Symbolic), "{rep:?}");
    }

    #[test]
    fn singular_base_refused() {
        let p = corpus::load("kdv_abt").unwrap();
        let t = Expr::sym("t");
        let m = Morphism { xi: vec![t.clone(), t], nu: vec![] };
        assert!(!check_regularity(&m, &p.system, &Oracle::default()).pass());
        assert!(matches!(Prolongation::new(&m, &p.system, &Oracle::default()), Err(MorphError::Singular(_))));
    }
}
