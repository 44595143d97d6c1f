//! Horizontal 1-forms: conservation laws, zero-curvature representations,
//! gauge transformations and the Riccati covering of a ZCR.

use thiserror::Error;

use crate::covering::Covering;
use crate::expr::{Expr, ExprError, MultiIndex, Oracle};
use crate::jet::{Check, EqSystem, JetError, Rule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("singular matrix: determinant {0}")]
    Singular(String),
    #[error("not a zero-curvature representation: {0}")]
    NotZcr(String),
    #[error("pivot row {0} out of range 1..={1}")]
    PivotOutOfRange(usize, usize),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Dense matrix of expressions.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<Expr>,
}

impl Mat {
    pub fn new(rows: Vec<Vec<Expr>>) -> Result<Mat, FormError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if r == 0 || c == 0 || rows.iter().any(|x| x.len() != c) {
            return Err(FormError::Shape("ragged or empty matrix".into()));
        }
        Ok(Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn scalar(e: Expr) -> Mat {
        Mat { rows: 1, cols: 1, data: vec![e] }
    }

    pub fn column(v: Vec<Expr>) -> Mat {
        Mat { rows: v.len(), cols: 1, data: v }
    }

    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![Expr::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Expr::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: Expr) {
        self.data[i * self.cols + j] = e;
    }

    pub fn entries(&self) -> &[Expr] {
        &self.data
    }

    pub fn row(&self, i: usize) -> Vec<Expr> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn to_rows(&self) -> Vec<Vec<Expr>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn map<E>(&self, f: impl Fn(&Expr) -> Result<Expr, E>) -> Result<Mat, E> {
        let data = self.data.iter().map(f).collect::<Result<Vec<_>, E>>()?;
        Ok(Mat { rows: self.rows, cols: self.cols, data })
    }

    fn same_shape(&self, o: &Mat) -> Result<(), FormError> {
        if self.rows != o.rows || self.cols != o.cols {
            return Err(FormError::Shape(format!("{}x{} vs {}x{}", self.rows, self.cols, o.rows, o.cols)));
        }
        Ok(())
    }

    pub fn add(&self, o: &Mat) -> Result<Mat, FormError> {
        self.same_shape(o)?;
        let data = self.data.iter().zip(&o.data).map(|(a, b)| a.add(b)).collect();
        Ok(Mat { rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, o: &Mat) -> Result<Mat, FormError> {
        self.same_shape(o)?;
        let data = self.data.iter().zip(&o.data).map(|(a, b)| a.sub(b)).collect();
        Ok(Mat { rows: self.rows, cols: self.cols, data })
    }

    pub fn neg(&self) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a.neg()).collect() }
    }

    pub fn scale(&self, c: &Expr) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a.mul(c)).collect() }
    }

    pub fn mul(&self, o: &Mat) -> Result<Mat, FormError> {
        if self.cols != o.rows {
            return Err(FormError::Shape(format!("{}x{} times {}x{}", self.rows, self.cols, o.rows, o.cols)));
        }
        let mut data = Vec::with_capacity(self.rows * o.cols);
        for i in 0..self.rows {
            for j in 0..o.cols {
                data.push(Expr::sum((0..self.cols).map(|k| self.get(i, k).mul(o.get(k, j)))));
            }
        }
        Ok(Mat { rows: self.rows, cols: o.cols, data })
    }

    /// XY − YX.
    pub fn commutator(&self, o: &Mat) -> Result<Mat, FormError> {
        self.mul(o)?.sub(&o.mul(self)?)
    }

    fn minor(&self, skip_r: usize, skip_c: usize) -> Mat {
        let mut data = Vec::new();
        for i in (0..self.rows).filter(|&i| i != skip_r) {
            for j in (0..self.cols).filter(|&j| j != skip_c) {
                data.push(self.get(i, j).clone());
            }
        }
        Mat { rows: self.rows - 1, cols: self.cols - 1, data }
    }

    /// Cofactor expansion along the first row.
    pub fn det(&self) -> Result<Expr, FormError> {
        if !self.is_square() {
            return Err(FormError::Shape("determinant of a non-square matrix".into()));
        }
        Ok(match self.rows {
            1 => self.data[0].clone(),
            2 => self.get(0, 0).mul(self.get(1, 1)).sub(&self.get(0, 1).mul(self.get(1, 0))),
            n => {
                let mut terms = Vec::with_capacity(n);
                for j in 0..n {
                    if self.get(0, j).is_zero() {
                        continue;
                    }
                    let c = self.get(0, j).mul(&self.minor(0, j).det()?);
                    terms.push(if j % 2 == 0 { c } else { c.neg() });
                }
                Expr::sum(terms)
            }
        })
    }

    pub fn adjugate(&self) -> Result<Mat, FormError> {
        if !self.is_square() {
            return Err(FormError::Shape("adjugate of a non-square matrix".into()));
        }
        let n = self.rows;
        if n == 1 {
            return Ok(Mat::identity(1));
        }
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let c = self.minor(j, i).det()?;
                m.set(i, j, if (i + j) % 2 == 0 { c } else { c.neg() });
            }
        }
        Ok(m)
    }

    /// Exact inverse via adjugate and determinant.
    pub fn inverse(&self) -> Result<Mat, FormError> {
        let d = self.det()?;
        if d.is_zero() {
            return Err(FormError::Singular("0".into()));
        }
        let inv = d.recip()?;
        Ok(self.adjugate()?.scale(&inv))
    }
}

/// Which sign the commutator carries in the zero-curvature condition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ZcrConvention {
    /// D_t X − D_x T + [X, T] = 0.
    #[default]
    Standard,
    /// D_t X − D_x T − [X, T] = 0.
    Flipped,
}

/// Horizontal 1-form Σ U_i dx^i with scalar (1×1) or square matrix components.
#[derive(Clone, Debug, PartialEq)]
pub struct HForm {
    comps: Vec<Mat>,
    scalar: bool,
}

impl HForm {
    pub fn scalar(comps: Vec<Expr>) -> HForm {
        HForm { comps: comps.into_iter().map(Mat::scalar).collect(), scalar: true }
    }

    pub fn matrix(comps: Vec<Mat>) -> Result<HForm, FormError> {
        let Some(first) = comps.first() else {
            return Err(FormError::Shape("form without components".into()));
        };
        if !first.is_square() || comps.iter().any(|m| m.rows != first.rows || m.cols != first.cols) {
            return Err(FormError::Shape("components must be square and of equal size".into()));
        }
        Ok(HForm { comps, scalar: false })
    }

    pub fn zero(n: usize) -> HForm {
        HForm::scalar(vec![Expr::zero(); n])
    }

    pub fn is_scalar(&self) -> bool {
        self.scalar
    }

    /// Matrix size ℓ (1 for scalar forms).
    pub fn dim(&self) -> usize {
        self.comps[0].rows
    }

    pub fn n(&self) -> usize {
        self.comps.len()
    }

    pub fn comps(&self) -> &[Mat] {
        &self.comps
    }

    pub fn comp(&self, i: usize) -> &Mat {
        &self.comps[i]
    }

    /// Scalar component i; panics on matrix forms.
    pub fn scalar_comp(&self, i: usize) -> &Expr {
        self.comps[i].get(0, 0)
    }

    pub fn scale(&self, c: &Expr) -> HForm {
        HForm { comps: self.comps.iter().map(|m| m.scale(c)).collect(), scalar: self.scalar }
    }

    pub fn neg(&self) -> HForm {
        HForm { comps: self.comps.iter().map(|m| m.neg()).collect(), scalar: self.scalar }
    }

    pub fn reduced(&self, sys: &EqSystem) -> Result<HForm, FormError> {
        let comps = self.comps.iter().map(|m| m.map(|e| sys.reduce(e))).collect::<Result<Vec<_>, _>>()?;
        Ok(HForm { comps, scalar: self.scalar })
    }

    fn check_n(&self, sys: &EqSystem) -> Result<(), FormError> {
        if self.n() != sys.n() {
            return Err(FormError::Shape(format!("{} components for {} independent variables", self.n(), sys.n())));
        }
        Ok(())
    }
}

fn d_mat(m: &Mat, i: usize, sys: &EqSystem) -> Result<Mat, FormError> {
    Ok(m.map(|e| sys.total_derivative(e, i))?)
}

fn pair_name(sys: &EqSystem, i: usize, j: usize) -> String {
    let v = &sys.spec().independent;
    format!("d{}^d{}", v[i], v[j])
}

/// Entrywise reports for a matrix residual.
fn mat_checks(sys: &EqSystem, name: &str, m: &Mat, oracle: &Oracle) -> Vec<Check> {
    let mut out = Vec::new();
    for i in 0..m.rows {
        for j in 0..m.cols {
            let label = if m.rows == 1 && m.cols == 1 { name.to_string() } else { format!("{name} [{},{}]", i + 1, j + 1) };
            out.push(sys.check(label, sys.reduce(m.get(i, j)), oracle));
        }
    }
    out
}

/// D_i U_j − D_j U_i + [U_i, U_j] for every pair i < j: the curvature of D + U.
pub fn curvature(u: &HForm, sys: &EqSystem) -> Result<Vec<(usize, usize, Mat)>, FormError> {
    u.check_n(sys)?;
    let mut out = Vec::new();
    for i in 0..u.n() {
        for j in i + 1..u.n() {
            let r = d_mat(u.comp(j), i, sys)?.sub(&d_mat(u.comp(i), j, sys)?)?.add(&u.comp(i).commutator(u.comp(j))?)?;
            out.push((i, j, r));
        }
    }
    Ok(out)
}

/// Flatness of D + U, reported entrywise per pair of directions.
pub fn flatness_checks(u: &HForm, sys: &EqSystem, oracle: &Oracle) -> Result<Vec<Check>, FormError> {
    let mut out = Vec::new();
    for (i, j, r) in curvature(u, sys)? {
        out.extend(mat_checks(sys, &format!("flat {}", pair_name(sys, i, j)), &r, oracle));
    }
    Ok(out)
}

/// Closedness of a scalar form: D_i U_j − D_j U_i = 0 for all pairs.
pub fn is_conservation_law(mu: &HForm, sys: &EqSystem, oracle: &Oracle) -> Result<Vec<Check>, FormError> {
    if !mu.is_scalar() {
        return Err(FormError::Shape("conservation law must be scalar".into()));
    }
    mu.check_n(sys)?;
    let mut out = Vec::new();
    for i in 0..mu.n() {
        for j in i + 1..mu.n() {
            let r = sys.total_derivative(mu.scalar_comp(j), i)?.sub(&sys.total_derivative(mu.scalar_comp(i), j)?);
            out.push(sys.check(format!("closed {}", pair_name(sys, i, j)), Ok(r), oracle));
        }
    }
    Ok(out)
}

/// Zero-curvature check D_t X − D_x T ± [X, T] = 0, entrywise.
pub fn is_zcr(alpha: &HForm, sys: &EqSystem, conv: ZcrConvention, oracle: &Oracle) -> Result<Vec<Check>, FormError> {
    alpha.check_n(sys)?;
    let mut out = Vec::new();
    for i in 0..alpha.n() {
        for j in i + 1..alpha.n() {
            let (a, b) = (alpha.comp(i), alpha.comp(j));
            let mut r = d_mat(a, j, sys)?.sub(&d_mat(b, i, sys)?)?;
            let c = a.commutator(b)?;
            r = match conv {
                ZcrConvention::Standard => r.add(&c)?,
                ZcrConvention::Flipped => r.sub(&c)?,
            };
            out.extend(mat_checks(sys, &format!("zcr {}", pair_name(sys, i, j)), &r, oracle));
        }
    }
    Ok(out)
}

/// Second checker: the 2-form d_H α − α∧α evaluated on coordinate bivectors.
pub fn is_zcr_wedge(alpha: &HForm, sys: &EqSystem, oracle: &Oracle) -> Result<Vec<Check>, FormError> {
    alpha.check_n(sys)?;
    let n = alpha.n();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            // dα(e_i, e_j) = D_i α(e_j) − D_j α(e_i)
            let d = d_mat(alpha.comp(j), i, sys)?.sub(&d_mat(alpha.comp(i), j, sys)?)?;
            // (α∧α)(e_i, e_j) = α(e_i)α(e_j) − α(e_j)α(e_i)
            let w = alpha.comp(i).mul(alpha.comp(j))?.sub(&alpha.comp(j).mul(alpha.comp(i))?)?;
            out.extend(mat_checks(sys, &format!("dα-α∧α {}", pair_name(sys, i, j)), &d.sub(&w)?, oracle));
        }
    }
    Ok(out)
}

/// X^S = D_x(S) S⁻¹ + S X S⁻¹ in every direction.
pub fn gauge_transform(alpha: &HForm, s: &Mat, sys: &EqSystem, oracle: &Oracle) -> Result<HForm, FormError> {
    alpha.check_n(sys)?;
    if !s.is_square() || s.rows != alpha.dim() {
        return Err(FormError::Shape("gauge matrix must match the form".into()));
    }
    let det = sys.reduce(&s.det()?)?;
    if sys.oracle(oracle).is_zero(&det) {
        return Err(FormError::Singular(sys.render(&det)));
    }
    let inv = s.inverse()?;
    let mut comps = Vec::new();
    for i in 0..alpha.n() {
        let ds = d_mat(s, i, sys)?;
        let c = ds.mul(&inv)?.add(&s.mul(alpha.comp(i))?.mul(&inv)?)?;
        comps.push(c.map(|e| sys.reduce(e))?);
    }
    HForm::matrix(comps)
}

/// Covering and conservation law produced from a ZCR.
#[derive(Clone, Debug)]
pub struct RiccatiCovering {
    pub covering: Covering,
    pub mu: HForm,
    pub checks: Vec<Check>,
}

/// Projectivized linear problem V_i = U_i V with ρ^j = v^j / v^h.
///
/// `h` is 1-based; `names` lists the new nonlocals for the rows j ≠ h in order.
pub fn riccati_covering(
    alpha: &HForm,
    h: usize,
    names: &[&str],
    sys: &EqSystem,
    oracle: &Oracle,
) -> Result<RiccatiCovering, FormError> {
    let l = alpha.dim();
    if h == 0 || h > l {
        return Err(FormError::PivotOutOfRange(h, l));
    }
    if names.len() != l - 1 {
        return Err(FormError::Shape(format!("{} nonlocal names for a {l}x{l} form", names.len())));
    }
    let zcr = is_zcr(alpha, sys, ZcrConvention::Standard, oracle)?;
    if let Some(bad) = zcr.iter().find(|c| !c.pass()) {
        return Err(FormError::NotZcr(format!("{}: {}", bad.name, bad.detail)));
    }
    let h = h - 1;
    let n = sys.n();
    let zero = MultiIndex::zero(n);
    let mut rho = Vec::with_capacity(l);
    let mut k = 0;
    for s in 0..l {
        if s == h {
            rho.push(Expr::one());
        } else {
            rho.push(Expr::jet(names[k], zero.clone()));
            k += 1;
        }
    }
    let mut rules = Vec::new();
    let mut mu = Vec::new();
    for i in 0..n {
        let u = alpha.comp(i);
        let lin = |row: usize| Expr::sum((0..l).map(|s| u.get(row, s).mul(&rho[s])));
        let pivot = sys.reduce(&lin(h))?;
        let mut k = 0;
        for (j, rj) in rho.iter().enumerate() {
            if j == h {
                continue;
            }
            let rhs = sys.reduce(&lin(j).sub(&rj.mul(&pivot)))?;
            rules.push((k, Rule { var: names[k].to_string(), lead: zero.inc(i), rhs }));
            k += 1;
        }
        mu.push(pivot);
    }
    rules.sort_by_key(|(k, _)| *k);
    let covering = Covering::from_parts(sys.spec(), names, rules.into_iter().map(|(_, r)| r).collect());
    let merged = covering.merge()?;
    let mu = HForm::scalar(mu);
    let mut checks = merged.validate(oracle);
    checks.extend(is_conservation_law(&mu, &merged, oracle)?);
    Ok(RiccatiCovering { covering, mu, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn all_pass(c: &[Check]) -> bool {
        c.iter().all(|k| k.pass())
    }

    #[test]
    fn kdv_zcr_both_checkers() {
        let p = corpus::load("kdv_abt").unwrap();
        let base = p.base_system().unwrap();
        let alpha = p.form("alpha").unwrap();
        let o = Oracle::default();
        assert!(all_pass(&is_zcr(alpha, &base, ZcrConvention::Standard, &o).unwrap()));
        assert!(all_pass(&is_zcr_wedge(alpha, &base, &o).unwrap()));
        assert!(!all_pass(&is_zcr(alpha, &base, ZcrConvention::Flipped, &o).unwrap()));
    }

    #[test]
    fn constant_form_is_zcr() {
        let p = corpus::load("kdv_abt").unwrap();
        let base = p.base_system().unwrap();
        let x = Mat::new(vec![vec![Expr::int(1), Expr::int(2)], vec![Expr::int(3), Expr::int(4)]]).unwrap();
        let a = HForm::matrix(vec![x.clone(), x]).unwrap();
        assert!(all_pass(&is_zcr(&a, &base, ZcrConvention::Standard, &Oracle::default()).unwrap()));
    }

    #[test]
    fn scalar_form_closedness() {
        let p = corpus::load("kdv_abt").unwrap();
        let o = Oracle::default();
        assert!(all_pass(&is_conservation_law(p.form("mu").unwrap(), &p.system, &o).unwrap()));
        assert!(all_pass(&is_conservation_law(&HForm::zero(2), &p.system, &o).unwrap()));
        let free = crate::jet::EqSystem::new(crate::jet::SystemSpec {
            independent: vec!["x".into(), "t".into()],
            vars: vec![crate::jet::Var { name: "z".into(), nonlocal: false }],
            ..Default::default()
        })
        .unwrap();
        let zdx = HForm::scalar(vec![Expr::jet("z", MultiIndex::zero(2)), Expr::zero()]);
        assert!(!all_pass(&is_conservation_law(&zdx, &free, &o).unwrap()));
    }

    #[test]
    fn kdv_riccati_reproduces_covering() {
        let p = corpus::load("kdv_abt").unwrap();
        let base = p.base_system().unwrap();
        let o = Oracle::default();
        let r = riccati_covering(p.form("alpha").unwrap(), 1, &["rho"], &base, &o).unwrap();
        assert!(all_pass(&r.checks));
        for (a, b) in r.covering.spec().rules.iter().zip(p.system.rules()) {
            assert_eq!(a.lead, b.lead);
            assert!(a.rhs.sub(&b.rhs).is_zero(), "{} vs {}", a.rhs, b.rhs);
        }
        let mu = p.form("mu").unwrap();
        for i in 0..2 {
            assert!(r.mu.scalar_comp(i).sub(mu.scalar_comp(i)).is_zero());
        }
        assert!(matches!(riccati_covering(p.form("alpha").unwrap(), 3, &["rho"], &base, &o), Err(FormError::PivotOutOfRange(3, 2))));
    }

    #[test]
    fn gauge_keeps_zcr() {
        let p = corpus::load("kdv_abt").unwrap();
        let base = p.base_system().unwrap();
        let o = Oracle::default();
        let alpha = p.form("alpha").unwrap();
        let ex = Expr::exp(&Expr::sym("x"));
        let s = Mat::new(vec![vec![ex, Expr::zero()], vec![Expr::zero(), Expr::one()]]).unwrap();
        let g = gauge_transform(alpha, &s, &base, &o).unwrap();
        assert!(all_pass(&is_zcr(&g, &base, ZcrConvention::Standard, &o).unwrap()));
        let swap = Mat::new(vec![vec![Expr::zero(), Expr::one()], vec![Expr::one(), Expr::zero()]]).unwrap();
        let g = gauge_transform(alpha, &swap, &base, &o).unwrap();
        assert!(all_pass(&is_zcr(&g, &base, ZcrConvention::Standard, &o).unwrap()));
        let id = gauge_transform(alpha, &Mat::identity(2), &base, &o).unwrap();
        for i in 0..2 {
            assert!(id.comp(i).sub(alpha.comp(i)).unwrap().entries().iter().all(|e| e.is_zero()));
        }
        let sing = Mat::new(vec![vec![Expr::one(), Expr::one()], vec![Expr::one(), Expr::one()]]).unwrap();
        assert!(matches!(gauge_transform(alpha, &sing, &base, &o), Err(FormError::Singular(_))));
    }
}
