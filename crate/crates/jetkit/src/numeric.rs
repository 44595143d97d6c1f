//! Double-precision back end: covering integration over a grid, pointwise
//! morphism application and finite-difference residuals.

use std::collections::HashMap;

use thiserror::Error;

use crate::expr::{jet_id, sym_id, Atom, AtomId, Compiled, Expr, MultiIndex};
use crate::jet::EqSystem;
use crate::morphism::Morphism;
use crate::parser::{Problem, SolitonDecl};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("seed does not solve the base equation: residual {0:.3e}")]
    SeedNotSolution(f64),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("no numeric value for `{0}`")]
    Unbound(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("symbolic step failed: {0}")]
    Symbolic(String),
    #[error("csv output failed: {0}")]
    Csv(String),
}

/// Values whose magnitude marks a Riccati blow-up.
const BLOWUP: f64 = 1e8;
/// Tolerance of the seed spot check.
const SEED_TOL: f64 = 1e-6;
/// Tolerance of the path-independence cross-check.
pub const CROSS_TOL: f64 = 1e-5;

/// Rectangular grid with a given number of steps per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub x0: f64,
    pub x1: f64,
    pub nx: usize,
    pub t0: f64,
    pub t1: f64,
    pub nt: usize,
}

impl Grid {
    /// Square [lo, hi]² grid with step h.
    pub fn square(lo: f64, hi: f64, h: f64) -> Grid {
        let n = ((hi - lo) / h).round() as usize;
        Grid { x0: lo, x1: hi, nx: n, t0: lo, t1: hi, nt: n }
    }

    fn axis(a: f64, b: f64, n: usize) -> Vec<f64> {
        if n == 0 {
            return vec![a];
        }
        let h = (b - a) / n as f64;
        (0..=n).map(|i| a + h * i as f64).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        Grid::axis(self.x0, self.x1, self.nx)
    }

    pub fn ts(&self) -> Vec<f64> {
        Grid::axis(self.t0, self.t1, self.nt)
    }

    fn validate(&self) -> Result<(), NumericError> {
        let ok = |a: f64, b: f64, n: usize| a.is_finite() && b.is_finite() && (n == 0 || b > a);
        if !ok(self.x0, self.x1, self.nx) || !ok(self.t0, self.t1, self.nt) {
            return Err(NumericError::InvalidGrid(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Outcome of the path-independence probe.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CrossCheck {
    pub probes: usize,
    pub max_diff: f64,
}

impl CrossCheck {
    pub fn flagged(&self) -> bool {
        self.max_diff > CROSS_TOL
    }
}

/// Sampled solution on a grid; masked cells hold NaN.
#[derive(Clone, Debug)]
pub struct GridField {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    pub names: Vec<String>,
    /// One array per name, indexed `ix * ts.len() + it`.
    pub values: Vec<Vec<f64>>,
    /// Closed-form local components, used for exact jets.
    pub seed: Vec<(String, Expr)>,
    pub params: Vec<(String, f64)>,
    pub cross: CrossCheck,
}

impl GridField {
    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn nt(&self) -> usize {
        self.ts.len()
    }

    pub fn idx(&self, ix: usize, it: usize) -> usize {
        ix * self.ts.len() + it
    }

    pub fn var(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i].as_slice())
    }

    pub fn get(&self, name: &str, ix: usize, it: usize) -> Option<f64> {
        self.var(name).map(|v| v[self.idx(ix, it)]).filter(|v| v.is_finite())
    }

    pub fn masked(&self, ix: usize, it: usize) -> bool {
        self.values.iter().any(|v| !v[self.idx(ix, it)].is_finite())
    }

    pub fn masked_count(&self) -> usize {
        (0..self.nx()).flat_map(|ix| (0..self.nt()).map(move |it| (ix, it))).filter(|&(ix, it)| self.masked(ix, it)).count()
    }

    /// Max |value − f(x, t)| over unmasked cells.
    pub fn max_deviation(&self, name: &str, f: impl Fn(f64, f64) -> f64) -> Option<f64> {
        let v = self.var(name)?;
        let mut m: f64 = 0.0;
        for (ix, &x) in self.xs.iter().enumerate() {
            for (it, &t) in self.ts.iter().enumerate() {
                let a = v[self.idx(ix, it)];
                if a.is_finite() {
                    m = m.max((a - f(x, t)).abs());
                }
            }
        }
        Some(m)
    }

    /// CSV with header `x,t,<names>`; masked cells are written as `nan`.
    pub fn to_csv(&self) -> Result<String, NumericError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["x".to_string(), "t".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).map_err(|e| NumericError::Csv(e.to_string()))?;
        for (ix, x) in self.xs.iter().enumerate() {
            for (it, t) in self.ts.iter().enumerate() {
                let mut rec = vec![format!("{x}"), format!("{t}")];
                for v in &self.values {
                    let a = v[self.idx(ix, it)];
                    rec.push(if a.is_finite() { format!("{a:.15e}") } else { "nan".into() });
                }
                w.write_record(&rec).map_err(|e| NumericError::Csv(e.to_string()))?;
            }
        }
        let bytes = w.into_inner().map_err(|e| NumericError::Csv(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| NumericError::Csv(e.to_string()))
    }
}

/// Largest internal Runge–Kutta step used by [`integrate_covering`]; coarser grids are substepped.
pub const MAX_STEP: f64 = 1.0 / 256.0;

/// Classical fourth-order Runge–Kutta with `substeps` internal steps per output step of size `h`.
///
/// States after blow-up are `None`.
pub fn rk4_path(f: &dyn Fn(f64, &[f64]) -> Vec<f64>, y0: &[f64], s0: f64, h: f64, steps: usize, substeps: usize) -> Vec<Option<Vec<f64>>> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = y0.to_vec();
    out.push(Some(y.clone()));
    let m = substeps.max(1);
    let dh = h / m as f64;
    let axpy = |y: &[f64], k: &[f64], a: f64| y.iter().zip(k).map(|(y, k)| y + a * k).collect::<Vec<f64>>();
    for n in 0..steps {
        for j in 0..m {
            let s = s0 + n as f64 * h + j as f64 * dh;
            let k1 = f(s, &y);
            let k2 = f(s + dh / 2.0, &axpy(&y, &k1, dh / 2.0));
            let k3 = f(s + dh / 2.0, &axpy(&y, &k2, dh / 2.0));
            let k4 = f(s + dh, &axpy(&y, &k3, dh));
            y = (0..y.len()).map(|i| y[i] + dh / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
        }
        if y.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP) {
            out.resize(steps + 1, None);
            return out;
        }
        out.push(Some(y.clone()));
    }
    out
}

/// ∂^σ of a closed-form seed in the independent symbols.
fn seed_jet(seed: &Expr, sigma: &MultiIndex, indep: &[AtomId]) -> Expr {
    let mut e = seed.clone();
    for (i, &a) in indep.iter().enumerate() {
        for _ in 0..sigma.get(i) {
            e = e.diff(a);
        }
    }
    e
}

/// Replaces jets of seeded local variables by derivatives of the seed.
fn specialize(e: &Expr, seed: &[(String, Expr)], indep: &[AtomId]) -> Result<Expr, NumericError> {
    e.map_atoms(&|a| match a.atom() {
        Atom::Jet(name, idx) => seed.iter().find(|(n, _)| **n == *name).map(|(_, s)| seed_jet(s, &idx, indep)),
        _ => None,
    })
    .map_err(|e| NumericError::Symbolic(e.to_string()))
}

/// Compiles `e` against the slot atoms, naming the first unbound leaf on failure.
fn compile(e: &Expr, slots: &[AtomId], sys: &EqSystem) -> Result<Compiled, NumericError> {
    Compiled::new(e, slots).map_err(|a| NumericError::Unbound(sys.render(&Expr::atom(a))))
}

struct Slots {
    atoms: Vec<AtomId>,
    fixed: Vec<f64>,
}

impl Slots {
    /// x, t, then the listed coordinates, then parameters.
    fn new(sys: &EqSystem, coords: &[String], params: &[(String, f64)]) -> Slots {
        let n = sys.n();
        let mut atoms: Vec<AtomId> = (0..n).map(|i| sys.independent_atom(i)).collect();
        atoms.extend(coords.iter().map(|c| jet_id(c, MultiIndex::zero(n))));
        atoms.extend(params.iter().map(|(p, _)| sym_id(p)));
        Slots { atoms, fixed: params.iter().map(|(_, v)| *v).collect() }
    }

    fn fill(&self, buf: &mut Vec<f64>, x: f64, t: f64, y: &[f64]) {
        buf.clear();
        buf.push(x);
        buf.push(t);
        buf.extend_from_slice(y);
        buf.extend_from_slice(&self.fixed);
    }
}

fn nearest(v: &[f64], x: f64) -> Result<usize, NumericError> {
    let lo = v[0].min(v[v.len() - 1]);
    let hi = v[0].max(v[v.len() - 1]);
    let h = if v.len() > 1 { (v[1] - v[0]).abs() } else { 0.0 };
    if x < lo - h / 2.0 - 1e-12 || x > hi + h / 2.0 + 1e-12 {
        return Err(NumericError::InvalidGrid(format!("origin {x} outside [{lo}, {hi}]")));
    }
    Ok((0..v.len()).min_by(|&a, &b| (v[a] - x).abs().total_cmp(&(v[b] - x).abs())).unwrap())
}

/// Integrates the nonlocal rules over a grid from a closed-form local seed.
///
/// The t-line through the origin is solved first, then every x-line.
pub fn integrate_covering(
    sys: &EqSystem,
    seed: &[(String, Expr)],
    params: &[(String, f64)],
    grid: &Grid,
    origin: (f64, f64),
    ic: &[(String, f64)],
) -> Result<GridField, NumericError> {
    grid.validate()?;
    if sys.n() != 2 {
        return Err(NumericError::Unsupported("numeric integration needs two independent variables".into()));
    }
    let indep: Vec<AtomId> = (0..2).map(|i| sys.independent_atom(i)).collect();
    let locals: Vec<String> = sys.spec().local_vars().map(|v| v.name.clone()).collect();
    for l in &locals {
        if !seed.iter().any(|(n, _)| n == l) {
            return Err(NumericError::Unsupported(format!("no seed for local variable `{l}`")));
        }
    }
    let nonlocals: Vec<String> = sys.spec().nonlocal_vars().map(|v| v.name.clone()).collect();
    let y0: Vec<f64> = nonlocals
        .iter()
        .map(|v| ic.iter().find(|(n, _)| n == v).map(|(_, x)| *x).ok_or_else(|| NumericError::Unbound(v.clone())))
        .collect::<Result<_, _>>()?;
    let slots = Slots::new(sys, &nonlocals, params);
    let (xs, ts) = (grid.xs(), grid.ts());

    // seed spot check on the local rules
    let mut worst: f64 = 0.0;
    for r in sys.rules().iter().filter(|r| locals.contains(&r.var)) {
        let res = Expr::jet(&r.var, r.lead.clone()).sub(&r.rhs);
        let c = compile(&specialize(&res, seed, &indep)?, &slots.atoms, sys)?;
        let mut buf = Vec::new();
        for k in 0..5 {
            let x = xs[(k * xs.len()) / 5];
            let t = ts[((4 - k) * ts.len()) / 5];
            slots.fill(&mut buf, x, t, &vec![0.0; nonlocals.len()]);
            worst = worst.max(c.eval(&buf).abs());
        }
    }
    // NaN counts as a failure
    if worst.is_nan() || worst > SEED_TOL {
        return Err(NumericError::SeedNotSolution(worst));
    }

    // rhs[i][s] for direction i and nonlocal s
    let mut rhs: Vec<Vec<Compiled>> = vec![Vec::new(), Vec::new()];
    for v in &nonlocals {
        for (i, dir) in rhs.iter_mut().enumerate() {
            let r = sys
                .rules()
                .iter()
                .find(|r| &r.var == v && r.lead.get(i) == 1)
                .ok_or_else(|| NumericError::Unsupported(format!("missing rule for `{v}`")))?;
            dir.push(compile(&specialize(&r.rhs, seed, &indep)?, &slots.atoms, sys)?);
        }
    }
    let field_fn = |i: usize, fixed: f64| {
        let rhs = &rhs;
        let slots = &slots;
        move |s: f64, y: &[f64]| -> Vec<f64> {
            let (x, t) = if i == 0 { (s, fixed) } else { (fixed, s) };
            let mut buf = Vec::with_capacity(slots.atoms.len());
            slots.fill(&mut buf, x, t, y);
            rhs[i].iter().map(|c| c.eval(&buf)).collect()
        }
    };
    // both directions from an interior node
    let line = |i: usize, fixed: f64, axis: &[f64], from: usize, y: &[f64]| -> Vec<Option<Vec<f64>>> {
        let f = field_fn(i, fixed);
        let mut out: Vec<Option<Vec<f64>>> = vec![None; axis.len()];
        if axis.len() == 1 {
            out[0] = Some(y.to_vec());
            return out;
        }
        let h = axis[1] - axis[0];
        let sub = (h.abs() / MAX_STEP).ceil() as usize;
        let fwd = rk4_path(&f, y, axis[from], h, axis.len() - 1 - from, sub);
        for (k, v) in fwd.into_iter().enumerate() {
            out[from + k] = v;
        }
        let back = rk4_path(&f, y, axis[from], -h, from, sub);
        for (k, v) in back.into_iter().enumerate().skip(1) {
            out[from - k] = v;
        }
        out
    };

    let ox = nearest(&xs, origin.0)?;
    let ot = nearest(&ts, origin.1)?;
    let tline = line(1, xs[ox], &ts, ot, &y0);
    let ns = nonlocals.len();
    let nl = locals.len();
    let mut values = vec![vec![f64::NAN; xs.len() * ts.len()]; nl + ns];
    let nt = ts.len();
    for (it, start) in tline.iter().enumerate() {
        let Some(start) = start else { continue };
        let xl = line(0, ts[it], &xs, ox, start);
        for (ix, v) in xl.into_iter().enumerate() {
            if let Some(v) = v {
                for s in 0..ns {
                    values[nl + s][ix * nt + it] = v[s];
                }
            }
        }
    }
    // local components from the seed
    for (k, l) in locals.iter().enumerate() {
        let s = &seed.iter().find(|(n, _)| n == l).unwrap().1;
        let c = compile(s, &slots.atoms, sys)?;
        let mut buf = Vec::new();
        for (ix, &x) in xs.iter().enumerate() {
            for (it, &t) in ts.iter().enumerate() {
                if values[nl..].iter().all(|v| v[ix * nt + it].is_finite()) {
                    slots.fill(&mut buf, x, t, &vec![0.0; ns]);
                    values[k][ix * nt + it] = c.eval(&buf);
                }
            }
        }
    }

    // path-independence probe: along x first, then along t
    let mut cross = CrossCheck::default();
    let (qx, qt) = ((xs.len() - 1) / 4, (ts.len() - 1) / 4);
    let probes = [
        (ox + qx, ot + qt),
        (ox.saturating_sub(qx), ot + qt),
        (ox + qx, ot.saturating_sub(qt)),
        (ox.saturating_sub(qx), ot.saturating_sub(qt)),
        (ox + qx / 2, ot + qt / 2),
    ];
    let xline0 = line(0, ts[ot], &xs, ox, &y0);
    for &(ix, it) in &probes {
        let (ix, it) = (ix.min(xs.len() - 1), it.min(ts.len() - 1));
        let Some(start) = &xline0[ix] else { continue };
        let alt = line(1, xs[ix], &ts, ot, start);
        let Some(a) = &alt[it] else { continue };
        let mut d: f64 = 0.0;
        let mut ok = true;
        for s in 0..ns {
            let v = values[nl + s][ix * nt + it];
            if !v.is_finite() {
                ok = false;
            }
            d = d.max((v - a[s]).abs());
        }
        if ok {
            cross.probes += 1;
            cross.max_diff = cross.max_diff.max(d);
        }
    }

    let mut names = locals;
    names.extend(nonlocals);
    Ok(GridField { xs, ts, names, values, seed: seed.to_vec(), params: params.to_vec(), cross })
}

/// Monotone cubic Hermite interpolant (Fritsch–Carlson slopes).
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// `x` strictly increasing, at least two points.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Option<Pchip> {
        let n = x.len();
        if n < 2 || y.len() != n || x.windows(2).any(|w| w[1] <= w[0]) {
            return None;
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = del[0];
            d[1] = del[0];
        } else {
            for k in 1..n - 1 {
                if del[k - 1] * del[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], del[0], del[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        }
        Some(Pchip { x, y, d })
    }

    pub fn eval(&self, t: f64) -> Option<f64> {
        let n = self.x.len();
        if t < self.x[0] || t > self.x[n - 1] {
            return None;
        }
        let k = match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(k) => return Some(self.y[k]),
            Err(k) => k - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (h00, h10, h01, h11) =
            (2.0 * s.powi(3) - 3.0 * s * s + 1.0, s.powi(3) - 2.0 * s * s + s, -2.0 * s.powi(3) + 3.0 * s * s, s.powi(3) - s * s);
        Some(h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1])
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Evaluates a morphism pointwise; a moving x′ is resampled onto the source x-grid.
pub fn apply_morphism_numeric(m: &Morphism, sys: &EqSystem, g: &GridField) -> Result<GridField, NumericError> {
    let n = sys.n();
    if n != 2 {
        return Err(NumericError::Unsupported("numeric morphisms need two independent variables".into()));
    }
    let indep: Vec<AtomId> = (0..2).map(|i| sys.independent_atom(i)).collect();
    let slots = Slots::new(sys, &g.names, &g.params);
    let prep = |e: &Expr| -> Result<Compiled, NumericError> {
        let r = sys.reduce(e).map_err(|x| NumericError::Symbolic(x.to_string()))?;
        compile(&specialize(&r, &g.seed, &indep)?, &slots.atoms, sys)
    };
    let xi: Vec<Compiled> = m.xi.iter().map(&prep).collect::<Result<_, _>>()?;
    let nu: Vec<Compiled> = m.nu.iter().map(|(_, e)| prep(e)).collect::<Result<_, _>>()?;
    let identity = m.is_identity_base(sys);
    if !identity && m.xi[1] != Expr::atom(indep[1]) {
        return Err(NumericError::Unsupported("only x′ may move; t′ must equal t".into()));
    }
    let (nx, nt) = (g.nx(), g.nt());
    let mut xp = vec![f64::NAN; nx * nt];
    let mut vals = vec![vec![f64::NAN; nx * nt]; nu.len()];
    let mut buf = Vec::new();
    let mut y = vec![0.0; g.names.len()];
    for ix in 0..nx {
        for it in 0..nt {
            let k = g.idx(ix, it);
            if g.masked(ix, it) {
                continue;
            }
            for (s, v) in g.values.iter().enumerate() {
                y[s] = v[k];
            }
            slots.fill(&mut buf, g.xs[ix], g.ts[it], &y);
            xp[k] = xi[0].eval(&buf);
            for (j, c) in nu.iter().enumerate() {
                vals[j][k] = c.eval(&buf);
            }
        }
    }
    let names: Vec<String> = m.nu.iter().map(|(n, _)| n.clone()).collect();
    if identity {
        return Ok(GridField { xs: g.xs.clone(), ts: g.ts.clone(), names, values: vals, seed: vec![], params: g.params.clone(), cross: g.cross.clone() });
    }
    let mut out = vec![vec![f64::NAN; nx * nt]; nu.len()];
    for it in 0..nt {
        let mut pts: Vec<(f64, Vec<f64>)> = (0..nx)
            .map(|ix| g.idx(ix, it))
            .filter(|&k| xp[k].is_finite() && vals.iter().all(|v| v[k].is_finite()))
            .map(|k| (xp[k], vals.iter().map(|v| v[k]).collect()))
            .collect();
        if pts.len() < 2 {
            continue;
        }
        if pts[0].0 > pts[pts.len() - 1].0 {
            pts.reverse();
        }
        if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
            continue;
        }
        let xv: Vec<f64> = pts.iter().map(|p| p.0).collect();
        for (j, col) in out.iter_mut().enumerate() {
            let Some(ip) = Pchip::new(xv.clone(), pts.iter().map(|p| p.1[j]).collect()) else { continue };
            for ix in 0..nx {
                if let Some(v) = ip.eval(g.xs[ix]) {
                    col[g.idx(ix, it)] = v;
                }
            }
        }
    }
    Ok(GridField { xs: g.xs.clone(), ts: g.ts.clone(), names, values: out, seed: vec![], params: g.params.clone(), cross: g.cross.clone() })
}

/// Outcome of the seed, covering, morphism pipeline of a `[soliton]` section.
#[derive(Clone, Debug)]
pub struct SolitonRun {
    /// Seed and nonlocal values on the grid.
    pub source: GridField,
    /// Target variables on the same grid.
    pub image: GridField,
    /// Max |image − exact| per variable with a closed form.
    pub deviations: Vec<(String, f64)>,
    /// Finite-difference residual of the target rules; `None` when the grid is too small.
    pub residual: Option<f64>,
}

/// Integrates the covering from the seed, applies the morphism and measures the result.
///
/// `grid` overrides the grid declared in the problem.
pub fn run_soliton(p: &Problem, sd: &SolitonDecl, grid: Option<&Grid>) -> Result<SolitonRun, NumericError> {
    let named = p.morphisms.iter().find(|m| m.name == sd.morphism).ok_or_else(|| NumericError::Unbound(sd.morphism.clone()))?;
    let target = p.target(&named.target).ok_or_else(|| NumericError::Unbound(named.target.clone()))?;
    let grid = grid.unwrap_or(&sd.grid);
    let source = integrate_covering(&p.system, &sd.seed, &sd.params, grid, sd.origin, &sd.ic)?;
    let image = apply_morphism_numeric(&named.morphism, &p.system, &source)?;
    let (xa, ta) = (p.system.independent_atom(0), p.system.independent_atom(1));
    let params: HashMap<AtomId, f64> = sd.params.iter().map(|(n, v)| (sym_id(n), *v)).collect();
    let mut deviations = Vec::new();
    for (name, e) in &sd.exact {
        let dev = image.max_deviation(name, |x, t| {
            e.eval_f64(&|a| if a == xa { Some(x) } else if a == ta { Some(t) } else { params.get(&a).copied() })
        });
        deviations.push((name.clone(), dev.unwrap_or(f64::NAN)));
    }
    let residual = match residual(target, &image) {
        Ok(r) => Some(r),
        Err(NumericError::GridTooCoarse(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SolitonRun { source, image, deviations, residual })
}

/// Fourth-order central stencils for derivative orders 1 to 4: (offsets, weights, power of h).
fn stencil(order: u32) -> (&'static [i64], &'static [f64]) {
    match order {
        1 => (&[-2, -1, 1, 2], &[1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0]),
        2 => (&[-2, -1, 0, 1, 2], &[-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0]),
        3 => (&[-3, -2, -1, 1, 2, 3], &[1.0 / 8.0, -1.0, 13.0 / 8.0, -13.0 / 8.0, 1.0, -1.0 / 8.0]),
        4 => (&[-3, -2, -1, 0, 1, 2, 3], &[-1.0 / 6.0, 2.0, -13.0 / 2.0, 28.0 / 3.0, -13.0 / 2.0, 2.0, -1.0 / 6.0]),
        _ => unreachable!(),
    }
}

/// Derivative of order `k` along one axis; NaN where the stencil leaves the data.
fn fd_axis(v: &[f64], nx: usize, nt: usize, axis: usize, k: u32, h: f64) -> Vec<f64> {
    if k == 0 {
        return v.to_vec();
    }
    if k > 4 {
        let inner = fd_axis(v, nx, nt, axis, k - 4, h);
        return fd_axis(&inner, nx, nt, axis, 4, h);
    }
    let (offs, w) = stencil(k);
    let scale = h.powi(k as i32);
    let mut out = vec![f64::NAN; v.len()];
    for ix in 0..nx {
        for it in 0..nt {
            let mut acc = 0.0;
            let mut ok = true;
            for (o, c) in offs.iter().zip(w) {
                let (jx, jt) = if axis == 0 { (ix as i64 + o, it as i64) } else { (ix as i64, it as i64 + o) };
                if jx < 0 || jt < 0 || jx >= nx as i64 || jt >= nt as i64 {
                    ok = false;
                    break;
                }
                acc += c * v[jx as usize * nt + jt as usize];
            }
            if ok {
                out[ix * nt + it] = acc / scale;
            }
        }
    }
    out
}

/// Max |lead − rhs| over interior unmasked cells, using finite differences.
pub fn residual(sys: &EqSystem, g: &GridField) -> Result<f64, NumericError> {
    if sys.n() != 2 {
        return Err(NumericError::Unsupported("residuals need two independent variables".into()));
    }
    let (nx, nt) = (g.nx(), g.nt());
    if nx < 2 || nt < 2 {
        return Err(NumericError::GridTooCoarse("fewer than two nodes on an axis".into()));
    }
    let (hx, ht) = (g.xs[1] - g.xs[0], g.ts[1] - g.ts[0]);
    let params: HashMap<AtomId, f64> = g.params.iter().map(|(p, v)| (sym_id(p), *v)).collect();
    let mut worst: f64 = 0.0;
    let mut cells = 0usize;
    for rule in sys.rules() {
        let e = Expr::jet(&rule.var, rule.lead.clone()).sub(&rule.rhs);
        let mut slots: Vec<AtomId> = (0..2).map(|i| sys.independent_atom(i)).collect();
        let mut arrays: Vec<Vec<f64>> = Vec::new();
        let mut fixed: Vec<f64> = Vec::new();
        let mut pslots: Vec<AtomId> = Vec::new();
        for a in e.leaves() {
            match a.atom() {
                Atom::Jet(name, idx) => {
                    let v = g.var(&name).ok_or_else(|| NumericError::Unbound(name.to_string()))?;
                    let dx = fd_axis(v, nx, nt, 0, idx.get(0), hx);
                    arrays.push(fd_axis(&dx, nx, nt, 1, idx.get(1), ht));
                    slots.push(a);
                }
                Atom::Sym(_) if slots[..2].contains(&a) => {}
                Atom::Sym(name) => {
                    let v = params.get(&a).ok_or_else(|| NumericError::Unbound(name.to_string()))?;
                    pslots.push(a);
                    fixed.push(*v);
                }
                Atom::App(..) => {}
            }
        }
        slots.extend(pslots);
        let c = compile(&e, &slots, sys)?;
        let mut buf = Vec::with_capacity(slots.len());
        for ix in 0..nx {
            for it in 0..nt {
                let k = ix * nt + it;
                buf.clear();
                buf.push(g.xs[ix]);
                buf.push(g.ts[it]);
                if arrays.iter().any(|a| !a[k].is_finite()) {
                    continue;
                }
                buf.extend(arrays.iter().map(|a| a[k]));
                buf.extend_from_slice(&fixed);
                let r = c.eval(&buf);
                if r.is_finite() {
                    worst = worst.max(r.abs());
                    cells += 1;
                }
            }
        }
    }
    if cells == 0 {
        return Err(NumericError::GridTooCoarse("no interior cell carries a full stencil".into()));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn pchip_reproduces_monotone_data() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| v.tanh()).collect();
        let p = Pchip::new(x, y).unwrap();
        assert!((p.eval(0.55).unwrap() - 0.55f64.tanh()).abs() < 1e-4);
        assert!(p.eval(5.0).is_none());
        assert!(Pchip::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn kdv_riccati_line_is_tanh() {
        let p = corpus::load("kdv_abt").unwrap();
        let g = integrate_covering(
            &p.system,
            &[("z".into(), Expr::zero())],
            &[("lambda".into(), -1.0)],
            &Grid::square(-2.0, 2.0, 1.0 / 64.0),
            (0.0, 0.0),
            &[("rho".into(), 0.0)],
        )
        .unwrap();
        let dev = g.max_deviation("rho", |x, t| (x - 4.0 * t).tanh()).unwrap();
        let band: f64 = (0..g.nx())
            .flat_map(|ix| (0..g.nt()).map(move |it| (ix, it)))
            .filter(|&(ix, it)| (g.xs[ix] - 4.0 * g.ts[it]).abs() <= 2.0)
            .map(|(ix, it)| (g.get("rho", ix, it).unwrap() - (g.xs[ix] - 4.0 * g.ts[it]).tanh()).abs())
            .fold(0.0, f64::max);
        assert!(band < 1e-6, "{band}");
        assert!(dev < 1e-5, "{dev}");
        assert!(!g.cross.flagged());
    }

    #[test]
    fn single_point_grid() {
        let p = corpus::load("kdv_abt").unwrap();
        let grid = Grid { x0: 0.0, x1: 0.0, nx: 0, t0: 0.0, t1: 0.0, nt: 0 };
        let g = integrate_covering(&p.system, &[("z".into(), Expr::zero())], &[("lambda".into(), -1.0)], &grid, (0.0, 0.0), &[("rho".into(), 0.25)])
            .unwrap();
        assert_eq!(g.nx() * g.nt(), 1);
        assert_eq!(g.get("rho", 0, 0), Some(0.25));
    }

    #[test]
    fn bad_seed_rejected() {
        let p = corpus::load("kdv_abt").unwrap();
        let seed = vec![("z".into(), Expr::sym("x").mul(&Expr::sym("x")).mul(&Expr::sym("x")))];
        let r = integrate_covering(&p.system, &seed, &[("lambda".into(), -1.0)], &Grid::square(-1.0, 1.0, 0.25), (0.0, 0.0), &[("rho".into(), 0.0)]);
        assert!(matches!(r, Err(NumericError::SeedNotSolution(_))));
    }

    #[test]
    fn corrupted_cell_is_detected() {
        let sys = crate::jet::EqSystem::new(crate::jet::SystemSpec {
            independent: vec!["x".into(), "t".into()],
            vars: vec![crate::jet::Var { name: "z".into(), nonlocal: false }],
            rules: vec![crate::jet::Rule {
                var: "z".into(),
                lead: MultiIndex::from_slice(&[0, 1]),
                rhs: Expr::jet("z", MultiIndex::from_slice(&[1, 0])),
            }],
            ..Default::default()
        })
        .unwrap();
        let grid = Grid::square(0.0, 1.0, 1.0 / 16.0);
        let (xs, ts) = (grid.xs(), grid.ts());
        let mut v = vec![3.0; xs.len() * ts.len()];
        let mut g = GridField { xs: xs.clone(), ts: ts.clone(), names: vec!["z".into()], values: vec![v.clone()], seed: vec![], params: vec![], cross: CrossCheck::default() };
        assert_eq!(residual(&sys, &g).unwrap(), 0.0);
        v[8 * ts.len() + 8] += 0.1;
        g.values = vec![v];
        assert!(residual(&sys, &g).unwrap() > 0.05);
    }

    #[test]
    fn csv_header_and_rows() {
        let g = GridField {
            xs: vec![0.0, 1.0],
            ts: vec![0.0],
            names: vec!["z".into()],
            values: vec![vec![1.0, f64::NAN]],
            seed: vec![],
            params: vec![],
            cross: CrossCheck::default(),
        };
        let s = g.to_csv().unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "x,t,z");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with("nan"));
    }
}
