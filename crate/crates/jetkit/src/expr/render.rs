//! Deterministic text rendering; the output parses back to the same expression.

use std::cmp::Ordering;

use num_traits::{One, Signed};

use super::atom::{entry, Atom, AtomId};
use super::poly::{struct_cmp, Coef, Mono, Poly};
use super::Expr;

/// Letters used for the `z_xxt` jet sugar.
#[derive(Clone, Debug)]
pub struct JetNaming {
    pub letters: Vec<String>,
}

impl Default for JetNaming {
    fn default() -> Self {
        JetNaming { letters: vec!["x".into(), "t".into()] }
    }
}

impl JetNaming {
    pub fn new<S: AsRef<str>>(letters: &[S]) -> Self {
        JetNaming { letters: letters.iter().map(|s| s.as_ref().to_string()).collect() }
    }

    fn sugar_ok(&self, n: usize) -> bool {
        self.letters.len() == n && self.letters.iter().all(|l| l.chars().count() == 1)
    }
}

pub fn canonical(e: &Expr) -> String {
    render_with(e, &JetNaming::default())
}

pub fn render_with(e: &Expr, nm: &JetNaming) -> String {
    if e.den().is_empty() {
        return poly_text(e.num(), nm);
    }
    let num = poly_text(e.num(), nm);
    let num = if e.num().len() > 1 { format!("({num})") } else { num };
    let mut parts = Vec::new();
    for (f, k) in e.den() {
        let mut s = poly_text(f, nm);
        if f.len() > 1 {
            s = format!("({s})");
        }
        if *k > 1 {
            s = format!("{s}^{k}");
        }
        parts.push(s);
    }
    if parts.len() == 1 {
        format!("{num}/{}", parts[0])
    } else {
        format!("{num}/({})", parts.join("*"))
    }
}

pub(crate) fn atom_text(a: AtomId, nm: &JetNaming) -> String {
    match &entry(a).atom {
        Atom::Sym(n) => n.to_string(),
        Atom::Jet(n, idx) => {
            if idx.is_zero() {
                return n.to_string();
            }
            if nm.sugar_ok(idx.len()) {
                let mut s = format!("{n}_");
                for (i, k) in idx.as_slice().iter().enumerate() {
                    for _ in 0..*k {
                        s.push_str(&nm.letters[i]);
                    }
                }
                s
            } else {
                let v: Vec<String> = idx.as_slice().iter().map(|k| k.to_string()).collect();
                format!("{n}@[{}]", v.join(","))
            }
        }
        Atom::App(k, arg) => format!("{}({})", k.name(), render_with(arg, nm)),
    }
}

fn mono_text(m: &Mono, nm: &JetNaming) -> String {
    let mut f: Vec<(std::sync::Arc<str>, AtomId, i32)> = m.factors().iter().map(|&(a, e)| (a.key(), a, e)).collect();
    f.sort_by(|x, y| x.0.cmp(&y.0));
    let parts: Vec<String> = f
        .iter()
        .map(|(_, a, e)| {
            let t = atom_text(*a, nm);
            match *e {
                1 => t,
                e if e < 0 => format!("{t}^({e})"),
                e => format!("{t}^{e}"),
            }
        })
        .collect();
    parts.join("*")
}

fn coef_text(c: &Coef) -> String {
    if c.denom().is_one() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn term_text(m: &Mono, c: &Coef, nm: &JetNaming) -> String {
    if m.is_one() {
        return coef_text(c);
    }
    let ms = mono_text(m, nm);
    if c.is_one() {
        ms
    } else if (-c).is_one() {
        format!("-{ms}")
    } else {
        format!("{}*{ms}", coef_text(c))
    }
}

pub(crate) fn sorted_terms(p: &Poly) -> Vec<&(Mono, Coef)> {
    let mut terms: Vec<&(Mono, Coef)> = p.terms().iter().collect();
    terms.sort_by(|a, b| match struct_cmp(&b.0, &a.0) {
        Ordering::Equal => a.1.cmp(&b.1),
        o => o,
    });
    terms
}

fn poly_text(p: &Poly, nm: &JetNaming) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut s = String::new();
    for (i, (m, c)) in sorted_terms(p).into_iter().enumerate() {
        if i == 0 {
            s.push_str(&term_text(m, c, nm));
        } else if c.is_negative() {
            s.push_str(" - ");
            s.push_str(&term_text(m, &-c, nm));
        } else {
            s.push_str(" + ");
            s.push_str(&term_text(m, c, nm));
        }
    }
    s
}
