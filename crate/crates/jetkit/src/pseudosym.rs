//! Pseudo-prolongations relative to a conservation law or a matrix form, and
//! the tangency and invariance checks built on them.

use dashmap::DashMap;
use thiserror::Error;

use crate::expr::{Coef, Expr, ExprError, MultiIndex, Oracle};
use crate::forms::{flatness_checks, is_conservation_law, FormError, HForm, Mat};
use crate::jet::{Check, EqSystem, JetError};
use crate::morphism::{MorphError, Morphism, Prolongation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PseudoError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unknown dependent variable `{0}`")]
    UnknownVariable(String),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Morph(#[from] MorphError),
}

/// Form against which a field is pseudo-prolonged.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldForm {
    /// U = c·μ with μ a scalar conservation law.
    Scalar { c: Coef, mu: HForm },
    /// U = γ, an r×r matrix form.
    Matrix(HForm),
}

impl FieldForm {
    /// Classical prolongation: U = 0.
    pub fn none(n: usize) -> FieldForm {
        FieldForm::Scalar { c: Coef::from_integer(0.into()), mu: HForm::zero(n) }
    }

    /// Components U_i as r×r matrices.
    pub fn u(&self) -> Vec<Mat> {
        match self {
            FieldForm::Scalar { c, mu } => mu.scale(&Expr::rat(c.clone())).comps().to_vec(),
            FieldForm::Matrix(g) => g.comps().to_vec(),
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            FieldForm::Scalar { .. } => 1,
            FieldForm::Matrix(g) => g.dim(),
        }
    }
}

/// Y = A·D + Σ (D+U)_σ(Φ) ∂_{u_σ} with r rows.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoField {
    /// Base components, r rows of n entries.
    pub a: Vec<Vec<Expr>>,
    /// Generating components per dependent variable, r entries each.
    pub phi: Vec<(String, Vec<Expr>)>,
    pub form: FieldForm,
}

impl PseudoField {
    /// Field from vector-field components: φ^j = b^j − Σ_i a_i u^j_{x_i}.
    pub fn from_vector_field(
        sys: &EqSystem,
        a: Vec<Vec<Expr>>,
        b: Vec<(String, Vec<Expr>)>,
        form: FieldForm,
    ) -> Result<PseudoField, PseudoError> {
        let r = form.rank();
        let n = sys.n();
        if a.len() != r || a.iter().any(|row| row.len() != n) {
            return Err(PseudoError::Shape(format!("base components must be {r}x{n}")));
        }
        let mut phi = Vec::new();
        for v in &sys.spec().vars {
            let bv = b.iter().find(|(name, _)| name == &v.name).map(|(_, c)| c.clone()).unwrap_or_else(|| vec![Expr::zero(); r]);
            if bv.len() != r {
                return Err(PseudoError::Shape(format!("component of `{}` needs {r} entries", v.name)));
            }
            let vi = sys.var_index(&v.name).unwrap();
            let mut col = Vec::with_capacity(r);
            for (k, row) in a.iter().enumerate() {
                let mut e = bv[k].clone();
                for (i, ai) in row.iter().enumerate() {
                    if ai.is_zero() {
                        continue;
                    }
                    let d = sys.coord_value(vi, &MultiIndex::zero(n).inc(i))?;
                    e = e.sub(&ai.mul(&d));
                }
                col.push(sys.reduce(&e)?);
            }
            phi.push((v.name.clone(), col));
        }
        for (name, _) in &b {
            if sys.var_index(name).is_none() {
                return Err(PseudoError::UnknownVariable(name.clone()));
            }
        }
        Ok(PseudoField { a, phi, form })
    }

    pub fn rank(&self) -> usize {
        self.form.rank()
    }

    fn phi_of(&self, var: &str) -> Option<&[Expr]> {
        self.phi.iter().find(|(n, _)| n == var).map(|(_, c)| c.as_slice())
    }
}

/// Memoized pseudo-prolongation of one field on one system.
pub struct Prolonger<'a> {
    field: &'a PseudoField,
    sys: &'a EqSystem,
    u: Vec<Mat>,
    memo: DashMap<(usize, MultiIndex), Vec<Expr>>,
}

impl<'a> Prolonger<'a> {
    pub fn new(field: &'a PseudoField, sys: &'a EqSystem) -> Result<Prolonger<'a>, PseudoError> {
        let r = field.rank();
        let u = field.form.u();
        if u.len() != sys.n() || u.iter().any(|m| m.rows() != r) {
            return Err(PseudoError::Shape(format!("form must have {} components of size {r}", sys.n())));
        }
        if field.a.len() != r {
            return Err(PseudoError::Shape("base components do not match the rank".into()));
        }
        for (name, col) in &field.phi {
            if sys.var_index(name).is_none() {
                return Err(PseudoError::UnknownVariable(name.clone()));
            }
            if col.len() != r {
                return Err(PseudoError::Shape(format!("generating component of `{name}` needs {r} entries")));
            }
        }
        Ok(Prolonger { field, sys, u, memo: DashMap::new() })
    }

    pub fn rank(&self) -> usize {
        self.u[0].rows()
    }

    /// (D_i + U_i) applied to a column.
    pub fn step(&self, col: &[Expr], i: usize) -> Result<Vec<Expr>, PseudoError> {
        let r = self.rank();
        let mut out = Vec::with_capacity(r);
        for k in 0..r {
            let mut e = self.sys.total_derivative(&col[k], i)?;
            for (l, c) in col.iter().enumerate() {
                let ukl = self.u[i].get(k, l);
                if !ukl.is_zero() && !c.is_zero() {
                    e = e.add(&ukl.mul(c));
                }
            }
            out.push(self.sys.reduce(&e)?);
        }
        Ok(out)
    }

    /// Applies the factors in the listed direction order, first entry innermost.
    pub fn along(&self, col: &[Expr], dirs: &[usize]) -> Result<Vec<Expr>, PseudoError> {
        let mut v = col.to_vec();
        for &i in dirs {
            v = self.step(&v, i)?;
        }
        Ok(v)
    }

    /// (D+U)_σ(φ^var): the factor of the first direction is outermost.
    pub fn prolong(&self, var: usize, sigma: &MultiIndex) -> Result<Vec<Expr>, PseudoError> {
        if let Some(v) = self.memo.get(&(var, sigma.clone())) {
            return Ok(v.clone());
        }
        let v = match (0..sigma.len()).find(|&i| sigma.get(i) > 0) {
            None => {
                let name = &self.sys.spec().vars[var].name;
                match self.field.phi_of(name) {
                    Some(c) => c.iter().map(|e| self.sys.reduce(e)).collect::<Result<Vec<_>, _>>()?,
                    None => vec![Expr::zero(); self.rank()],
                }
            }
            Some(i) => {
                let prev = self.prolong(var, &sigma.dec(i).unwrap())?;
                self.step(&prev, i)?
            }
        };
        self.memo.insert((var, sigma.clone()), v.clone());
        Ok(v)
    }

    /// Σ_σ ∂G/∂u_σ · (D+U)_σ(φ), the vertical part of Y(G).
    fn vertical(&self, g: &Expr) -> Result<Vec<Expr>, PseudoError> {
        let r = self.rank();
        let mut parts: Vec<Vec<Expr>> = vec![Vec::new(); r];
        for a in g.leaves() {
            let Some((vi, idx)) = self.sys.jet_of(a) else { continue };
            let d = g.diff(a);
            if d.is_zero() {
                continue;
            }
            let p = self.prolong(vi, &idx)?;
            for k in 0..r {
                if !p[k].is_zero() {
                    parts[k].push(d.mul(&p[k]));
                }
            }
        }
        Ok(parts.into_iter().map(Expr::sum).collect())
    }

    /// Y(G), one entry per row, reduced.
    pub fn apply(&self, g: &Expr) -> Result<Vec<Expr>, PseudoError> {
        let g = self.sys.reduce(g)?;
        let mut out = self.vertical(&g)?;
        for (k, row) in self.field.a.iter().enumerate() {
            for (i, ai) in row.iter().enumerate() {
                if !ai.is_zero() {
                    out[k] = out[k].add(&ai.mul(&self.sys.total_derivative(&g, i)?));
                }
            }
        }
        out.into_iter().map(|e| Ok(self.sys.reduce(&e)?)).collect()
    }

    /// Tangency residual of rule k: (D+U)_lead(φ) − Σ ∂R/∂u_τ (D+U)_τ(φ).
    pub fn tangency(&self, k: usize) -> Result<Vec<Expr>, PseudoError> {
        let rule = &self.sys.rules()[k];
        let vi = self.sys.var_index(&rule.var).unwrap();
        let lead = self.prolong(vi, &rule.lead)?;
        let rhs = self.vertical(&self.sys.reduce(&rule.rhs)?)?;
        lead.iter().zip(rhs).map(|(l, r)| Ok(self.sys.reduce(&l.sub(&r))?)).collect()
    }
}

/// Standalone pseudo-prolongation of a generating column.
pub fn pseudo_prolong(field: &PseudoField, var: &str, sigma: &MultiIndex, sys: &EqSystem) -> Result<Vec<Expr>, PseudoError> {
    let p = Prolonger::new(field, sys)?;
    let vi = sys.var_index(var).ok_or_else(|| PseudoError::UnknownVariable(var.to_string()))?;
    p.prolong(vi, sigma)
}

pub fn apply_field(field: &PseudoField, g: &Expr, sys: &EqSystem) -> Result<Vec<Expr>, PseudoError> {
    Prolonger::new(field, sys)?.apply(g)
}

fn form_checks(field: &PseudoField, sys: &EqSystem, oracle: &Oracle) -> Result<Vec<Check>, PseudoError> {
    Ok(match &field.form {
        FieldForm::Scalar { mu, .. } => is_conservation_law(mu, sys, oracle)?,
        FieldForm::Matrix(g) => flatness_checks(g, sys, oracle)?,
    })
}

fn tangency_checks(field: &PseudoField, sys: &EqSystem, oracle: &Oracle) -> Result<Vec<Check>, PseudoError> {
    let p = Prolonger::new(field, sys)?;
    let r = p.rank();
    let mut out = Vec::new();
    for (k, rule) in sys.rules().iter().enumerate() {
        let lead = sys.render(&Expr::jet(&rule.var, rule.lead.clone()));
        match p.tangency(k) {
            Ok(res) => {
                for (row, e) in res.into_iter().enumerate() {
                    let name = if r == 1 { format!("tangency {lead}") } else { format!("tangency {lead} row {}", row + 1) };
                    out.push(sys.check(name, Ok(e), oracle));
                }
            }
            Err(PseudoError::Jet(e)) => out.push(sys.check(format!("tangency {lead}"), Err(e), oracle)),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Form validity plus tangency to every rule.
pub fn check_pseudosymmetry(field: &PseudoField, sys: &EqSystem, oracle: &Oracle) -> Result<Vec<Check>, PseudoError> {
    if !matches!(field.form, FieldForm::Scalar { .. }) {
        return Err(PseudoError::Shape("scalar pseudosymmetry needs a scalar form".into()));
    }
    let mut out = form_checks(field, sys, oracle)?;
    out.extend(tangency_checks(field, sys, oracle)?);
    Ok(out)
}

/// Matrix form version: zero curvature of D + γ and tangency of every row.
pub fn check_r_pseudosymmetry(field: &PseudoField, sys: &EqSystem, oracle: &Oracle) -> Result<Vec<Check>, PseudoError> {
    let mut out = form_checks(field, sys, oracle)?;
    out.extend(tangency_checks(field, sys, oracle)?);
    Ok(out)
}

pub fn is_invariant(field: &PseudoField, i: &Expr, sys: &EqSystem, oracle: &Oracle) -> Result<Vec<Check>, PseudoError> {
    let res = apply_field(field, i, sys)?;
    let r = res.len();
    Ok(res
        .into_iter()
        .enumerate()
        .map(|(k, e)| {
            let name = if r == 1 { format!("invariant {}", sys.render(i)) } else { format!("invariant {} row {}", sys.render(i), k + 1) };
            sys.check(name, Ok(e), oracle)
        })
        .collect())
}

/// Table ν^j_i = Σ_s [D_s ξ]^{-1}_{is} D_s ν^j of first derived invariants.
pub fn derived_invariants(xi: &[Expr], nu: &[Expr], sys: &EqSystem, oracle: &Oracle) -> Result<Vec<Vec<Expr>>, PseudoError> {
    let m = Morphism {
        xi: xi.to_vec(),
        nu: nu.iter().enumerate().map(|(j, e)| (format!("nu{}", j + 1), e.clone())).collect(),
    };
    let p = Prolongation::new(&m, sys, oracle)?;
    let n = sys.n();
    let mut table = Vec::with_capacity(n);
    for i in 0..n {
        let sigma = MultiIndex::zero(n).inc(i);
        table.push((0..nu.len()).map(|j| p.prolong(j, &sigma)).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn all_pass(c: &[Check]) -> bool {
        c.iter().all(|k| k.pass())
    }

    #[test]
    fn kdv_field_is_pseudosymmetry() {
        let p = corpus::load("kdv_abt").unwrap();
        let y = p.field("Y").unwrap();
        let o = Oracle::default();
        let rep = check_pseudosymmetry(y, &p.system, &o).unwrap();
        assert!(all_pass(&rep), "{rep:?}");
        let inv = crate::parser::parse_expr_in("z + 2*rho^2", &p.scope()).unwrap();
        assert!(all_pass(&is_invariant(y, &inv, &p.system, &o).unwrap()));
        assert!(apply_field(y, &Expr::int(7), &p.system).unwrap()[0].is_zero());
    }

    #[test]
    fn classical_shift_fails_on_kdv() {
        let p = corpus::load("kdv_abt").unwrap();
        let o = Oracle::default();
        let y = PseudoField::from_vector_field(
            &p.system,
            vec![vec![Expr::zero(), Expr::zero()]],
            vec![("z".into(), vec![Expr::one()])],
            FieldForm::none(2),
        )
        .unwrap();
        let rep = check_pseudosymmetry(&y, &p.system, &o).unwrap();
        let bad = rep.iter().find(|c| c.name == "tangency z_xxx").unwrap();
        assert!(!bad.pass());
    }

    #[test]
    fn zero_form_is_plain_prolongation() {
        let p = corpus::load("heat_cole_hopf").unwrap();
        let y = p.field("Y").unwrap();
        let u = p.system.spec().coord("u");
        let pp = pseudo_prolong(y, "u", &MultiIndex::from_slice(&[2, 1]), &p.system).unwrap();
        let direct = p.system.total_derivative_multi(&u, &MultiIndex::from_slice(&[2, 1])).unwrap();
        assert!(pp[0].sub(&direct).is_zero());
    }

    #[test]
    fn miura_field_prolongation() {
        let p = corpus::load("mkdv_miura").unwrap();
        let y = p.field("Y").unwrap();
        let sc = p.scope();
        let px = pseudo_prolong(y, "u", &MultiIndex::from_slice(&[1, 0]), &p.system).unwrap();
        assert!(px[0].sub(&crate::parser::parse_expr_in("2*u", &sc).unwrap()).is_zero());
        let pt = pseudo_prolong(y, "u", &MultiIndex::from_slice(&[0, 1]), &p.system).unwrap();
        assert!(pt[0].sub(&crate::parser::parse_expr_in("2*(u_xx - 2*u^3)", &sc).unwrap()).is_zero());
    }
}
