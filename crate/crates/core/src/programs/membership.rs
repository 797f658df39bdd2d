//! Membership of a concrete plan in `Π`, `Π_G` or `Π^bc_G`.

use num_traits::{Signed, Zero};
use serde::Serialize;

use super::constraints::{
    bilinear_residual, compile_bicausal_unchecked, compile_causal_unchecked, compile_marginals, linear_residual,
    sum_of, BilinearConstraintFamily, FamilyKind, LinearConstraintFamily,
};
use super::coupling::Coupling;
use crate::error::{Error, Result};
use crate::model::{CausalGraph, DiscreteMeasure};
use crate::scalar::{rational_to_f64, Rational};

/// Default residual tolerance for membership.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CouplingClass {
    Any,
    Causal,
    Bicausal,
}

/// Two conditional probabilities that ought to agree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalWitness {
    /// Conditional probability given the full conditioning set.
    pub given_all: f64,
    /// The value the family prescribes (mechanism or reduced conditioning).
    pub given_reduced: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub family: FamilyKind,
    pub vertex: Option<usize>,
    pub equation: String,
    pub residual: f64,
    pub conditional: Option<ConditionalWitness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub class: CouplingClass,
    pub member: bool,
    pub max_residual: f64,
    /// First violated equation in family order.
    pub violation: Option<Violation>,
}

fn ratio(a: &Rational, b: &Rational) -> Option<f64> {
    if b.is_zero() {
        None
    } else {
        Some(rational_to_f64(&(a / b)))
    }
}

/// Evaluates the compiled equalities of `cls` on `pi`.
pub fn check_membership(
    pi: &Coupling,
    graph: &CausalGraph,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cls: CouplingClass,
    tol: f64,
) -> Result<MembershipReport> {
    if !pi.matches(mu, nu) {
        return Err(Error::ShapeMismatch("coupling supports differ from the marginals".into()));
    }
    if mu.n() != graph.n() || nu.n() != graph.n() {
        return Err(Error::ShapeMismatch("measures and graph differ in dimension".into()));
    }
    let mut linear: Vec<LinearConstraintFamily> = vec![compile_marginals(mu, nu)];
    let mut bilinear: Vec<BilinearConstraintFamily> = Vec::new();
    if let Some(dag) = graph.dag() {
        let (l, b) = match cls {
            CouplingClass::Any => (Vec::new(), Vec::new()),
            CouplingClass::Causal => compile_causal_unchecked(dag, mu, nu),
            CouplingClass::Bicausal => compile_bicausal_unchecked(dag, mu, nu),
        };
        linear.extend(l);
        bilinear = b;
    }
    let w = pi.weights();
    let mut max_residual = 0.0f64;
    let mut violation: Option<Violation> = None;
    for fam in &linear {
        for eq in &fam.equations {
            let r = rational_to_f64(&linear_residual(w, eq));
            max_residual = max_residual.max(r);
            if r > tol && violation.is_none() {
                let conditional = eq.conditional.as_ref().and_then(|c| {
                    let given = sum_of(w, &c.given);
                    ratio(&sum_of(w, &c.event), &given).map(|g| ConditionalWitness {
                        given_all: g,
                        given_reduced: rational_to_f64(&c.probability),
                    })
                });
                violation = Some(Violation {
                    family: fam.kind,
                    vertex: fam.vertex,
                    equation: eq.context.clone(),
                    residual: r,
                    conditional,
                });
            }
        }
    }
    for fam in &bilinear {
        for eq in &fam.equations {
            let (r, l) = bilinear_residual(w, eq);
            max_residual = max_residual.max(r);
            if r > tol && violation.is_none() {
                let conditional = match (ratio(&l[0], &l[3]), ratio(&l[2], &l[1])) {
                    (Some(a), Some(b)) => Some(ConditionalWitness {
                        given_all: a,
                        given_reduced: b,
                    }),
                    _ => None,
                };
                violation = Some(Violation {
                    family: fam.kind,
                    vertex: Some(fam.vertex),
                    equation: eq.context.clone(),
                    residual: r,
                    conditional,
                });
            }
        }
    }
    if let Some((k, _)) = w.iter().enumerate().find(|(_, x)| x.is_negative()) {
        violation.get_or_insert(Violation {
            family: FamilyKind::Marginal,
            vertex: None,
            equation: format!("nonnegativity of variable {k}"),
            residual: rational_to_f64(&w[k].abs()),
            conditional: None,
        });
    }
    Ok(MembershipReport {
        class: cls,
        member: violation.is_none(),
        max_residual,
        violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CoordinateSpace;
    use crate::scalar::int;

    fn bits(k: usize) -> Vec<CoordinateSpace> {
        (0..k).map(|_| CoordinateSpace::real_line("X", &[int(0), int(1)])).collect()
    }

    #[test]
    fn product_coupling_is_bicausal() {
        let mu = DiscreteMeasure::uniform(bits(3), vec![vec![0, 0, 0], vec![1, 1, 1]]).unwrap();
        let nu = DiscreteMeasure::uniform(bits(3), vec![vec![0, 1, 0], vec![1, 0, 1]]).unwrap();
        for preset in ["empty", "markov", "linear", "full"] {
            let g = CausalGraph::preset(preset, 3).unwrap();
            if crate::model::is_g_compatible(&mu, &g, 0.0).compatible {
                let r = check_membership(&Coupling::product(&mu, &nu), &g, &mu, &nu, CouplingClass::Bicausal, 0.0)
                    .unwrap();
                assert!(r.member, "{preset}");
            }
        }
    }

    #[test]
    fn anticipating_plan_is_not_causal_on_linear_graph() {
        // Y_1 copies X_2: the plan looks into the future of X.
        let mu = DiscreteMeasure::uniform(bits(2), vec![vec![0, 0], vec![0, 1]]).unwrap();
        let nu = DiscreteMeasure::uniform(bits(2), vec![vec![0, 0], vec![1, 0]]).unwrap();
        let w = vec![int(1) / int(2), int(0), int(0), int(1) / int(2)];
        let pi = Coupling::from_weights(&mu, &nu, w).unwrap();
        let g = CausalGraph::preset("linear", 2).unwrap();
        assert!(check_membership(&pi, &g, &mu, &nu, CouplingClass::Any, 0.0).unwrap().member);
        let r = check_membership(&pi, &g, &mu, &nu, CouplingClass::Causal, 1e-8).unwrap();
        assert!(!r.member);
        let v = r.violation.unwrap();
        assert_eq!(v.family, FamilyKind::CausalMechanism);
        let c = v.conditional.unwrap();
        assert!((c.given_all - c.given_reduced).abs() > 0.4);
        assert!(check_membership(&pi, &CausalGraph::Complete(2), &mu, &nu, CouplingClass::Bicausal, 0.0)
            .unwrap()
            .member);
    }

    #[test]
    fn shape_mismatch() {
        let mu = DiscreteMeasure::uniform(bits(1), vec![vec![0], vec![1]]).unwrap();
        let nu = DiscreteMeasure::dirac(bits(1), vec![0]).unwrap();
        let pi = Coupling::product(&mu, &mu);
        assert!(matches!(
            check_membership(&pi, &CausalGraph::Complete(1), &mu, &nu, CouplingClass::Any, 0.0),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
