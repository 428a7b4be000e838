//! Hypotheses of the flux-box non-optimality experiment.
//!
//! With `u0 = p x` on both lines of a symmetric junction and `p` in the
//! congested range, neither `A = A0` nor `A = 0` minimizes the flux-box cost
//! once the box sits inside the free-flow fan and the conditions below hold.

use crate::output::num;
use junction_core::functional::BoxWeight;
use junction_core::{InitialData, JunctionModel};
use serde_json::{json, Value};

#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    /// The inequality in symbols.
    pub statement: &'static str,
    /// The inequality with numbers substituted.
    pub arithmetic: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Condition {
    pub fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "statement": self.statement,
            "arithmetic": self.arithmetic,
            "lhs": num(self.lhs),
            "rhs": num(self.rhs),
            "holds": self.holds,
        })
    }
}

fn short(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Checks the data class and evaluates the four conditions. The `Err`
/// variant reports data outside the class (asymmetric model, nonlinear
/// `u0`, `p` outside the congested range).
pub fn conditions(model: &JunctionModel, u0: &InitialData, b: &BoxWeight) -> Result<Vec<Condition>, String> {
    if model.left() != model.right() {
        return Err("the experiment needs the same Hamiltonian on both lines".into());
    }
    if !u0.breakpoints().is_empty() {
        return Err("the experiment needs a linear initial datum u0 = p x (no breakpoints)".into());
    }
    let h = model.left();
    let p = u0.slopes()[0];
    let (r, p_hat) = (h.capacity(), h.p_hat());
    if !(-r < p && p < p_hat) {
        return Err(format!(
            "p = {} must lie in the congested range (-R, p_hat) = ({}, {})",
            short(p),
            short(-r),
            short(p_hat)
        ));
    }
    let hp = h.eval(p).map_err(|e| e.to_string())?;
    let dh0 = h.slope_at_zero();
    let a0 = model.a0();

    let rhs1 = hp * b.t1 / p;
    let lhs2 = b.t2 * dh0 / (dh0 - hp / p);
    let lhs3 = -b.t2 * a0 / (hp - a0);
    let (g_l, g_r) = (b.x1 / b.t2, b.x2 / b.t3);
    Ok(vec![
        Condition {
            name: "(i)",
            statement: "x2 <= H(p) t1 / p",
            arithmetic: format!(
                "x2 = {} <= H(p) t1 / p = ({})({}) / ({}) = {}",
                short(b.x2),
                short(hp),
                short(b.t1),
                short(p),
                short(rhs1)
            ),
            lhs: b.x2,
            rhs: rhs1,
            holds: b.x2 <= rhs1,
        },
        Condition {
            name: "(ii)",
            statement: "t2 H'(0) / (H'(0) - H(p)/p) < t3",
            arithmetic: format!(
                "t2 H'(0) / (H'(0) - H(p)/p) = ({})({}) / ({} - {}) = {} < t3 = {}",
                short(b.t2),
                short(dh0),
                short(dh0),
                short(hp / p),
                short(lhs2),
                short(b.t3)
            ),
            lhs: lhs2,
            rhs: b.t3,
            holds: lhs2 < b.t3,
        },
        Condition {
            name: "(iii)",
            statement: "-t2 A0 / (H(p) - A0) < t3",
            arithmetic: format!(
                "-t2 A0 / (H(p) - A0) = -({})({}) / ({} - ({})) = {} < t3 = {}",
                short(b.t2),
                short(a0),
                short(hp),
                short(a0),
                short(lhs3),
                short(b.t3)
            ),
            lhs: lhs3,
            rhs: b.t3,
            holds: hp > a0 && lhs3 < b.t3,
        },
        Condition {
            name: "geometry",
            statement: "x1 / t2 > x2 / t3",
            arithmetic: format!(
                "x1 / t2 = {} / {} = {} > x2 / t3 = {} / {} = {}",
                short(b.x1),
                short(b.t2),
                short(g_l),
                short(b.x2),
                short(b.t3),
                short(g_r)
            ),
            lhs: g_l,
            rhs: g_r,
            holds: g_l > g_r,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_arithmetic() {
        let m = JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap();
        let u0 = InitialData::linear(-0.8).unwrap();
        let b = BoxWeight::new(0.1, 0.18, 1.0, 1.5, 4.5, 5.0, 0.01).unwrap();
        let c = conditions(&m, &u0, &b).unwrap();
        assert!(c.iter().all(|c| c.holds));
        assert!((c[0].rhs - 0.2).abs() < 1e-12);
        assert!((c[1].lhs - 1.875).abs() < 1e-12);
        assert!((c[2].lhs - 0.375 / 0.09).abs() < 1e-12);
        assert!((c[3].lhs - 0.1 / 1.5).abs() < 1e-15 && (c[3].rhs - 0.04).abs() < 1e-15);
        assert_eq!(c[0].arithmetic, "x2 = 0.18 <= H(p) t1 / p = (-0.16)(1) / (-0.8) = 0.2");
    }

    #[test]
    fn violated_condition_is_reported() {
        let m = JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap();
        let u0 = InitialData::linear(-0.8).unwrap();
        let b = BoxWeight::new(0.1, 0.25, 1.0, 1.5, 4.5, 5.0, 0.01).unwrap();
        let c = conditions(&m, &u0, &b).unwrap();
        assert!(!c[0].holds);
        assert!(c[1].holds && c[2].holds);
    }

    #[test]
    fn free_flow_slope_is_outside_the_class() {
        let m = JunctionModel::symmetric_quadratic(1.0, 1.0).unwrap();
        let u0 = InitialData::linear(-0.3).unwrap();
        let b = BoxWeight::new(0.1, 0.18, 1.0, 1.5, 4.5, 5.0, 0.01).unwrap();
        assert!(conditions(&m, &u0, &b).is_err());
    }
}
