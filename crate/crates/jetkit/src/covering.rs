//! Differentiable coverings: merging, doubling and projection.

use std::collections::HashMap;

use thiserror::Error;

use crate::jet::{EqSystem, JetError, Param, Rule, SystemSpec, Var};
use crate::numeric::{GridField, NumericError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoveringError {
    #[error("name `{0}` already in use")]
    NameCollision(String),
    #[error("`{0}` is not a nonlocal variable or parameter of the covering")]
    NotRenamable(String),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Base equation plus nonlocal variables with one rule per direction.
#[derive(Clone, Debug, PartialEq)]
pub struct Covering {
    spec: SystemSpec,
}

impl Covering {
    pub fn new(spec: SystemSpec) -> Covering {
        Covering { spec }
    }

    /// Covering assembled from a base system and extra nonlocal rules.
    pub fn from_parts(base: &SystemSpec, nonlocals: &[&str], rules: Vec<Rule>) -> Covering {
        let mut spec = base.clone();
        for v in nonlocals {
            spec.vars.push(Var { name: v.to_string(), nonlocal: true });
        }
        spec.rules.extend(rules);
        Covering { spec }
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn nonlocal_names(&self) -> Vec<String> {
        self.spec.nonlocal_vars().map(|v| v.name.clone()).collect()
    }

    /// The base equation with every nonlocal variable and rule removed.
    pub fn base(&self) -> SystemSpec {
        self.project(&[]).spec
    }

    /// Single solved form handling local and nonlocal coordinates.
    pub fn merge(&self) -> Result<EqSystem, JetError> {
        EqSystem::new(self.spec.clone())
    }

    /// Adds a renamed copy of every nonlocal variable and rule.
    ///
    /// `renames` maps each nonlocal variable and each parameter that should vary
    /// independently in the copy; renamed parameter pairs are declared distinct.
    pub fn double(&self, renames: &[(&str, &str)]) -> Result<Covering, CoveringError> {
        let nonlocal: Vec<String> = self.nonlocal_names();
        let params: Vec<String> = self.spec.params.iter().map(|p| p.name.clone()).collect();
        let mut taken: Vec<String> = self.spec.independent.clone();
        taken.extend(self.spec.vars.iter().map(|v| v.name.clone()));
        taken.extend(params.iter().cloned());
        let mut map = HashMap::new();
        for (from, to) in renames {
            if !nonlocal.iter().any(|n| n == from) && !params.iter().any(|n| n == from) {
                return Err(CoveringError::NotRenamable(from.to_string()));
            }
            if taken.iter().any(|n| n == to) || map.values().any(|v: &String| v == to) {
                return Err(CoveringError::NameCollision(to.to_string()));
            }
            map.insert(from.to_string(), to.to_string());
        }
        let mut spec = self.spec.clone();
        for v in &nonlocal {
            let name = map.get(v).cloned().unwrap_or_else(|| format!("{v}2"));
            if taken.contains(&name) && !map.contains_key(v) {
                return Err(CoveringError::NameCollision(name));
            }
            map.insert(v.clone(), name.clone());
            spec.vars.push(Var { name, nonlocal: true });
        }
        for p in &self.spec.params {
            if let Some(to) = map.get(&p.name) {
                spec.params.push(Param { name: to.clone(), nonzero: p.nonzero });
                spec.distinct.push((p.name.clone(), to.clone()));
            }
        }
        for r in &self.spec.rules {
            if nonlocal.contains(&r.var) {
                spec.rules.push(Rule { var: map[&r.var].clone(), lead: r.lead.clone(), rhs: r.rhs.rename(&map) });
            }
        }
        Ok(Covering { spec })
    }

    /// Keeps only the listed nonlocal variables, their rules, and the parameters still in use.
    pub fn project(&self, keep: &[&str]) -> Covering {
        let dropped: Vec<String> =
            self.spec.nonlocal_vars().filter(|v| !keep.contains(&v.name.as_str())).map(|v| v.name.clone()).collect();
        let mut spec = self.spec.clone();
        spec.vars.retain(|v| !dropped.contains(&v.name));
        spec.rules.retain(|r| !dropped.contains(&r.var));
        let used: Vec<String> = spec
            .rules
            .iter()
            .flat_map(|r| r.rhs.leaves())
            .filter_map(|a| match a.atom() {
                crate::expr::Atom::Sym(n) => Some(n.to_string()),
                _ => None,
            })
            .collect();
        let declared_here: Vec<String> = self.spec.distinct.iter().map(|(_, b)| b.clone()).collect();
        spec.params.retain(|p| used.contains(&p.name) || !declared_here.contains(&p.name));
        let names: Vec<String> = spec.params.iter().map(|p| p.name.clone()).collect();
        spec.distinct.retain(|(a, b)| names.contains(a) && names.contains(b));
        Covering { spec }
    }
}

/// Numeric check that the local part of a covering solution solves the base equation.
pub fn project_solution_check(c: &Covering, g: &GridField) -> Result<f64, NumericError> {
    let base = EqSystem::new(c.base()).map_err(|e| NumericError::Symbolic(e.to_string()))?;
    if base.rules().is_empty() {
        return Ok(0.0);
    }
    crate::numeric::residual(&base, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::expr::Oracle;

    #[test]
    fn double_then_project_is_retraction() {
        let p = corpus::load("kdv_abt").unwrap();
        let c = Covering::new(p.system.spec().clone());
        let d = c.double(&[("rho", "q"), ("lambda", "lambdahat")]).unwrap();
        assert_eq!(d.spec().rules.len(), 5);
        assert!(d.merge().unwrap().validate(&Oracle::default()).iter().all(|k| k.pass()));
        let back = d.project(&["rho"]);
        assert_eq!(back.spec(), c.spec());
    }

    #[test]
    fn double_rejects_collisions() {
        let p = corpus::load("kdv_abt").unwrap();
        let c = Covering::new(p.system.spec().clone());
        assert!(matches!(c.double(&[("rho", "z")]), Err(CoveringError::NameCollision(_))));
        assert!(matches!(c.double(&[("z", "w")]), Err(CoveringError::NotRenamable(_))));
    }

    #[test]
    fn base_drops_nonlocals() {
        let p = corpus::load("kdv_abt").unwrap();
        let c = Covering::new(p.system.spec().clone());
        let b = c.base();
        assert_eq!(b.rules.len(), 1);
        assert_eq!(b.vars.len(), 1);
        let empty = Covering::new(b.clone());
        assert_eq!(empty.merge().unwrap().rules().len(), 1);
        assert_eq!(empty.base(), b);
    }
}
