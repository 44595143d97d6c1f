//! Kernel constructors and the side relations between kernel atoms.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};

use super::atom::{intern, sin_partner, Atom, Kernel, Tag};
use super::poly::{q, Coef, Mono, Poly};
use super::{Expr, ExprError};

/// Largest multiple of a base angle expanded by the multiple-angle formulas.
const MAX_MULTIPLE: i64 = 32;

fn app(k: Kernel, arg: Expr) -> Expr {
    Expr::atom(intern(Atom::App(k, arg)))
}

impl Expr {
    pub fn apply(k: Kernel, arg: &Expr) -> Expr {
        match k {
            Kernel::Exp => Expr::exp(arg),
            Kernel::Ln => Expr::ln(arg),
            Kernel::Sin => Expr::sin(arg),
            Kernel::Cos => Expr::cos(arg),
            Kernel::Arctan => Expr::arctan(arg),
            Kernel::Sqrt => Expr::sqrt(arg),
        }
    }

    pub fn exp(a: &Expr) -> Expr {
        if a.is_zero() {
            return Expr::one();
        }
        let mut factor = Expr::one();
        let mut rest = a.clone();
        if a.is_polynomial() {
            let mut kept = Vec::new();
            for (m, c) in a.num().terms() {
                let f = m.factors();
                if f.len() == 1 && f[0].1 == 1 && f[0].0.tag() == Tag::Ln && c.is_integer() {
                    if let (Some(w), Some(k)) = (f[0].0.arg(), c.to_integer().to_i64()) {
                        if let Ok(p) = w.powi(k) {
                            factor = factor.mul(&p);
                            continue;
                        }
                    }
                }
                kept.push((m.clone(), c.clone()));
            }
            rest = Expr::from_poly(Poly::from_terms(kept));
        }
        if rest.is_zero() {
            return factor;
        }
        factor.mul(&app(Kernel::Exp, rest))
    }

    pub fn ln(w: &Expr) -> Expr {
        if w.is_one() {
            return Expr::zero();
        }
        if let Some(a) = w.as_atom() {
            if a.tag() == Tag::Exp {
                return a.arg().unwrap();
            }
        }
        app(Kernel::Ln, w.clone())
    }

    pub fn arctan(w: &Expr) -> Expr {
        if w.is_zero() {
            return Expr::zero();
        }
        if w.lead_negative() {
            return app(Kernel::Arctan, w.neg()).neg();
        }
        app(Kernel::Arctan, w.clone())
    }

    pub fn sin(a: &Expr) -> Expr {
        trig(a).1
    }

    pub fn cos(a: &Expr) -> Expr {
        trig(a).0
    }

    pub fn tan(a: &Expr) -> Result<Expr, ExprError> {
        let (c, s) = trig(a);
        s.checked_div(&c)
    }

    pub fn sqrt(e: &Expr) -> Expr {
        if e.is_zero() {
            return Expr::zero();
        }
        let d = e.den_poly();
        let p = e.num().mul(&d);
        let lc = p.struct_lead().unwrap().1.clone();
        let content = lc.abs();
        let p = p.scale(&content.recip());
        // sqrt(a/b) = s·sqrt(r)/b with a·b = s²·r
        let ab = content.numer() * content.denom();
        let (s, r) = square_split(&ab);
        let mut out = Expr::rat(BigRational::new(s, content.denom().clone()));
        if !r.is_one() {
            out = out.mul(&app(Kernel::Sqrt, Expr::rat(BigRational::from_integer(r))));
        }
        if !p.is_one() {
            out = out.mul(&app(Kernel::Sqrt, Expr::from_poly(p)));
        }
        if !d.is_one() {
            out = out.checked_div(&Expr::from_poly(d)).expect("nonzero denominator");
        }
        out
    }
}

/// n = s²·r with r free of small square factors.
fn square_split(n: &BigInt) -> (BigInt, BigInt) {
    let mut s = BigInt::one();
    let mut r = BigInt::one();
    let mut m = n.clone();
    let mut p = BigInt::from(2u32);
    let limit = BigInt::from(100_000u32);
    while &p * &p <= m && p < limit {
        let mut e = 0u32;
        while m.is_multiple_of(&p) {
            m /= &p;
            e += 1;
        }
        for _ in 0..e / 2 {
            s *= &p;
        }
        if e % 2 == 1 {
            r *= &p;
        }
        p += 1;
    }
    (s, r * m)
}

/// (cos a, sin a) in canonical form.
fn trig(a: &Expr) -> (Expr, Expr) {
    if a.is_zero() {
        return (Expr::one(), Expr::zero());
    }
    if !a.is_polynomial() {
        if a.lead_negative() {
            let b = a.neg();
            return (app(Kernel::Cos, b.clone()), app(Kernel::Sin, b).neg());
        }
        return (app(Kernel::Cos, a.clone()), app(Kernel::Sin, a.clone()));
    }
    let terms = a.num().terms();
    if terms.len() > 1 {
        let lead = a.num().struct_lead().unwrap().clone();
        let rest = Expr::from_poly(a.num().sub(&Poly::term(lead.0.clone(), lead.1.clone())));
        let (c0, s0) = trig(&Expr::from_poly(Poly::term(lead.0, lead.1)));
        let (c1, s1) = trig(&rest);
        let cos = c0.mul(&c1).sub(&s0.mul(&s1));
        let sin = s0.mul(&c1).add(&c0.mul(&s1));
        return (cos, sin);
    }
    let (m, c) = &terms[0];
    if c.is_negative() {
        let (cs, sn) = trig(&Expr::from_poly(Poly::term(m.clone(), -c.clone())));
        return (cs, sn.neg());
    }
    let p = c.numer().to_i64().filter(|p| *p <= MAX_MULTIPLE);
    let Some(p) = p else {
        return (app(Kernel::Cos, a.clone()), app(Kernel::Sin, a.clone()));
    };
    let qd = BigRational::from_integer(c.denom().clone());
    let theta = Expr::from_poly(Poly::term(m.clone(), qd.recip()));
    let (c1, s1) = base_trig(m, &qd, theta);
    let (mut cn, mut sn) = (c1.clone(), s1.clone());
    for _ in 1..p {
        let cc = cn.mul(&c1).sub(&sn.mul(&s1));
        let ss = sn.mul(&c1).add(&cn.mul(&s1));
        cn = cc;
        sn = ss;
    }
    (cn, sn)
}

fn base_trig(m: &Mono, qd: &Coef, theta: Expr) -> (Expr, Expr) {
    let f = m.factors();
    if qd.is_one() && f.len() == 1 && f[0].1 == 1 && f[0].0.tag() == Tag::Arctan {
        let w = f[0].0.arg().unwrap();
        let r = Expr::sqrt(&Expr::one().add(&w.mul(&w)));
        let c = r.recip().expect("positive radicand");
        return (c.clone(), w.mul(&c));
    }
    (app(Kernel::Cos, theta.clone()), app(Kernel::Sin, theta))
}

/// Applies the kernel side relations to a raw monomial.
pub(crate) fn rewrite_term(m: &Mono) -> Poly {
    let mut rest = Mono::one();
    let mut out = Poly::one();
    let mut exp_arg: Option<Expr> = None;
    for &(a, e) in m.factors() {
        match a.tag() {
            Tag::Exp => {
                let t = a.arg().unwrap().scale(&q(e as i64));
                exp_arg = Some(match exp_arg {
                    Some(x) => x.add(&t),
                    None => t,
                });
            }
            Tag::Cos if e >= 2 => {
                let s = Poly::atom(sin_partner(a));
                let one_minus = Poly::one().sub(&s.mul_raw(&s));
                out = out.mul(&one_minus.pow((e / 2) as u32));
                if e % 2 == 1 {
                    rest = rest.mul(&Mono::atom(a, 1));
                }
            }
            Tag::Sqrt if e >= 2 => {
                let arg = a.arg().unwrap();
                debug_assert!(arg.is_polynomial());
                out = out.mul(&arg.num().pow((e / 2) as u32));
                if e % 2 == 1 {
                    rest = rest.mul(&Mono::atom(a, 1));
                }
            }
            _ => rest = rest.mul(&Mono::atom(a, e)),
        }
    }
    if let Some(x) = exp_arg {
        let ex = Expr::exp(&x);
        if ex.is_polynomial() {
            out = out.mul(ex.num());
        } else if !x.is_zero() {
            out = out.mul(&Poly::atom(intern(Atom::App(Kernel::Exp, x))));
        }
    }
    if rest.is_one() {
        out
    } else {
        out.mul(&Poly::term(rest, Coef::one()))
    }
}
