//! Root assignment by linear solves: maximal multiplicity (generic MID),
//! multiplicity `m+1` with fixed plant coefficients (control-oriented MID),
//! and `n+m+1` coexisting simple real roots (CRRID).
//!
//! All systems are written in Taylor form at the target: row `k` imposes
//! `Δ⁽ᵏ⁾(s₀)/k! = 0`. Delayed unknowns are `c_j = b_j e^{-s₀τ}`, which keeps
//! the matrix free of exponentials; `b_j` is recovered afterwards.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_equilibrated;
use crate::quasipoly::{binomial, factorial, Quasipolynomial};

/// Placement systems with a larger equilibrated condition number are rejected.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Relative residual every imposed condition must meet.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementMode {
    GenericMid,
    ControlMid,
    Crrid,
}

/// A real root location with the multiplicity it is meant to have.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootTarget {
    pub s0: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    Multiple(RootTarget),
    /// Sorted in descending order.
    Simple(Vec<f64>),
}

impl Targets {
    /// The rightmost assigned root.
    pub fn rightmost(&self) -> f64 {
        match self {
            Targets::Multiple(t) => t.s0,
            Targets::Simple(r) => r[0],
        }
    }
}

/// `F = Δ⁽ᵐ⁺¹⁾(s₀)` after eliminating `b`; zero iff the multiplicity reaches `m+2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationValue {
    pub value: f64,
    pub scale: f64,
}

impl RelationValue {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.value.abs() / self.scale
        } else {
            self.value.abs()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementResult {
    pub qp: Quasipolynomial,
    pub mode: PlacementMode,
    pub targets: Targets,
    /// Relative residual of each imposed condition, in the order imposed.
    pub residuals: Vec<f64>,
    #[serde(rename = "condition", alias = "condition_estimate")]
    pub condition_estimate: f64,
    /// Only for control-oriented MID.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<RelationValue>,
}

impl PlacementResult {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Taylor coefficient of order `k` at `s0` of `e^{-τ(s-s₀)} s^l`.
fn delayed_entry(l: usize, k: usize, tau: f64, s0: f64) -> f64 {
    (0..=k.min(l))
        .map(|j| {
            let i = k - j;
            binomial(l, j) * s0.powi((l - j) as i32) * (-tau).powi(i as i32) / factorial(i)
        })
        .sum()
}

/// Taylor coefficient of order `k` at `s0` of `s^i`.
fn power_entry(i: usize, k: usize, s0: f64) -> f64 {
    if i < k {
        0.0
    } else {
        binomial(i, k) * s0.powi((i - k) as i32)
    }
}

fn check_common(tau: f64, s0: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    if !s0.is_finite() {
        return Err(Error::NonFiniteArgument);
    }
    Ok(())
}

/// Relative residuals of `Δ⁽ᵏ⁾(s₀)` for `k < count`.
fn derivative_residuals(qp: &Quasipolynomial, s0: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| qp.derivative_unchecked(Complex64::new(s0, 0.0), k).relative())
        .collect()
}

/// Chooses `a` and `b` so that `s₀` is a root of multiplicity `n + m + 1`.
pub fn solve_generic_mid(n: usize, m: usize, tau: f64, s0: f64) -> Result<PlacementResult> {
    solve_generic_mid_with(n, m, tau, s0, true)
}

pub(crate) fn solve_generic_mid_with(
    n: usize,
    m: usize,
    tau: f64,
    s0: f64,
    absorb_exponential: bool,
) -> Result<PlacementResult> {
    if n == 0 || m > n {
        return Err(Error::InvalidParameter(format!("need 0 <= m <= n and n >= 1, got n = {n}, m = {m}")));
    }
    check_common(tau, s0)?;
    let size = n + m + 1;
    let e = if absorb_exponential { 1.0 } else { (-s0 * tau).exp() };
    let mut mat = DMatrix::zeros(size, size);
    let mut rhs = vec![0.0; size];
    for k in 0..size {
        for i in 0..n {
            mat[(k, i)] = power_entry(i, k, s0);
        }
        for l in 0..=m {
            mat[(k, n + l)] = e * delayed_entry(l, k, tau, s0);
        }
        rhs[k] = -power_entry(n, k, s0);
    }
    let solved = solve_checked(&mat, &rhs, s0, tau)?;
    let a = solved.x[..n].to_vec();
    let back = if absorb_exponential { (s0 * tau).exp() } else { 1.0 };
    let b = solved.x[n..].iter().map(|c| c * back).collect();
    let qp = Quasipolynomial::new(a, b, tau)?;
    let residuals = derivative_residuals(&qp, s0, size);
    Ok(PlacementResult {
        qp,
        mode: PlacementMode::GenericMid,
        targets: Targets::Multiple(RootTarget { s0, multiplicity: size }),
        residuals,
        condition_estimate: solved.condition,
        relation: None,
    })
}

fn solve_checked(mat: &DMatrix<f64>, rhs: &[f64], s0: f64, tau: f64) -> Result<crate::linalg::Solved> {
    match solve_equilibrated(mat, rhs) {
        Some(s) if s.condition <= CONDITION_LIMIT => Ok(s),
        Some(s) => Err(Error::DegeneratePlacement { s0, tau, condition: s.condition }),
        None => Err(Error::DegeneratePlacement { s0, tau, condition: f64::INFINITY }),
    }
}

/// Delayed coefficients `c = b e^{-s₀τ}` imposing `Δ⁽ᵏ⁾(s₀) = 0` for `k ≤ m`,
/// together with the eliminated relation `F = Δ⁽ᵐ⁺¹⁾(s₀)`.
pub(crate) fn control_mid_core(
    a: &[f64],
    m: usize,
    tau: f64,
    s0: f64,
) -> Result<(Vec<f64>, RelationValue, f64)> {
    let n = a.len();
    let size = m + 1;
    let p_taylor = |k: usize| -> (f64, f64) {
        let mut v = power_entry(n, k, s0);
        let mut sc = v.abs();
        for (i, &ai) in a.iter().enumerate() {
            let t = ai * power_entry(i, k, s0);
            v += t;
            sc += t.abs();
        }
        (v, sc)
    };
    let mut mat = DMatrix::zeros(size, size);
    let mut rhs = vec![0.0; size];
    for k in 0..size {
        for l in 0..=m {
            mat[(k, l)] = delayed_entry(l, k, tau, s0);
        }
        rhs[k] = -p_taylor(k).0;
    }
    let solved = solve_checked(&mat, &rhs, s0, tau)?;
    let (mut value, mut scale) = p_taylor(m + 1);
    for (l, c) in solved.x.iter().enumerate() {
        let t = c * delayed_entry(l, m + 1, tau, s0);
        value += t;
        scale += t.abs();
    }
    let f = factorial(m + 1);
    Ok((
        solved.x,
        RelationValue { value: value * f, scale: scale * f },
        solved.condition,
    ))
}

/// With the plant coefficients `a` fixed, chooses `b` so that `Δ⁽ᵏ⁾(s₀) = 0`
/// for `k = 0..=m`. The multiplicity reaches `m+2` iff the returned
/// [`RelationValue`] vanishes.
pub fn solve_control_mid(a: &[f64], m: usize, tau: f64, s0: f64) -> Result<PlacementResult> {
    if a.is_empty() || m > a.len() {
        return Err(Error::InvalidParameter(format!(
            "need n >= 1 and m <= n, got n = {}, m = {m}",
            a.len()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteArgument);
    }
    check_common(tau, s0)?;
    let (c, relation, condition) = control_mid_core(a, m, tau, s0)?;
    let back = (s0 * tau).exp();
    let b = c.iter().map(|c| c * back).collect();
    let qp = Quasipolynomial::new(a.to_vec(), b, tau)?;
    let residuals = derivative_residuals(&qp, s0, m + 1);
    Ok(PlacementResult {
        qp,
        mode: PlacementMode::ControlMid,
        targets: Targets::Multiple(RootTarget { s0, multiplicity: m + 2 }),
        residuals,
        condition_estimate: condition,
        relation: Some(relation),
    })
}

/// Chooses `a` and `b` so that the `n + m + 1` given distinct reals are roots.
pub fn solve_crrid(n: usize, m: usize, tau: f64, roots: &[f64]) -> Result<PlacementResult> {
    if n == 0 || m > n {
        return Err(Error::InvalidParameter(format!("need 0 <= m <= n and n >= 1, got n = {n}, m = {m}")));
    }
    let size = n + m + 1;
    if roots.len() != size {
        return Err(Error::InvalidParameter(format!(
            "expected {size} roots for n = {n}, m = {m}, got {}",
            roots.len()
        )));
    }
    if roots.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFiniteArgument);
    }
    let mut sorted = roots.to_vec();
    sorted.sort_by(|x, y| y.total_cmp(x));
    for w in sorted.windows(2) {
        if (w[0] - w[1]).abs() <= 1e-12 * (1.0 + w[0].abs().max(w[1].abs())) {
            return Err(Error::RootsNotDistinct);
        }
    }
    check_common(tau, sorted[0])?;
    let mut mat = DMatrix::zeros(size, size);
    let mut rhs = vec![0.0; size];
    for (row, &s) in sorted.iter().enumerate() {
        let e = (-s * tau).exp();
        for i in 0..n {
            mat[(row, i)] = s.powi(i as i32);
        }
        for l in 0..=m {
            mat[(row, n + l)] = e * s.powi(l as i32);
        }
        rhs[row] = -s.powi(n as i32);
    }
    let solved = solve_checked(&mat, &rhs, sorted[0], tau)?;
    let qp = Quasipolynomial::new(solved.x[..n].to_vec(), solved.x[n..].to_vec(), tau)?;
    let residuals = sorted
        .iter()
        .map(|&s| qp.derivative_unchecked(Complex64::new(s, 0.0), 0).relative())
        .collect();
    Ok(PlacementResult {
        qp,
        mode: PlacementMode::Crrid,
        targets: Targets::Simple(sorted),
        residuals,
        condition_estimate: solved.condition,
        relation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::E;

    /// Brute-force check of Δ⁽ᵏ⁾(s₀) by symbolic-free repeated differentiation
    /// of the closed form for small orders (independent of the Taylor rows).
    fn derivative_by_definition(a: &[f64], b: &[f64], tau: f64, s0: f64, k: usize) -> f64 {
        // d^k/ds^k [s^i] and d^k/ds^k [e^{-sτ} s^l] via Leibniz written out directly
        let n = a.len();
        let dpow = |i: usize, k: usize| -> f64 {
            if k > i {
                0.0
            } else {
                (0..k).map(|j| (i - j) as f64).product::<f64>() * s0.powi((i - k) as i32)
            }
        };
        let mut total = dpow(n, k);
        for (i, ai) in a.iter().enumerate() {
            total += ai * dpow(i, k);
        }
        for (l, bl) in b.iter().enumerate() {
            let mut acc = 0.0;
            for j in 0..=k {
                let c = (1..=k).product::<usize>() as f64
                    / ((1..=j).product::<usize>() as f64 * (1..=k - j).product::<usize>() as f64);
                acc += c * (-tau).powi((k - j) as i32) * dpow(l, j);
            }
            total += bl * (-s0 * tau).exp() * acc;
        }
        total
    }

    #[test]
    fn generic_mid_second_order_with_first_order_delay() {
        let r = solve_generic_mid(2, 1, 1.0, 0.0).unwrap();
        let a = r.qp.a();
        let b = r.qp.b();
        assert_relative_eq!(a[0], 6.0, epsilon = 1e-10);
        assert_relative_eq!(a[1], -4.0, epsilon = 1e-10);
        assert_relative_eq!(b[0], -6.0, epsilon = 1e-10);
        assert_relative_eq!(b[1], -2.0, epsilon = 1e-10);
        for k in 0..4 {
            assert!(derivative_by_definition(a, b, 1.0, 0.0, k).abs() < 1e-9);
        }
        assert!(r.max_residual() < 1e-12);
    }

    #[test]
    fn generic_mid_first_order() {
        let r = solve_generic_mid(1, 0, 1.0, 0.0).unwrap();
        assert_relative_eq!(r.qp.a()[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(r.qp.b()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn generic_mid_second_order_no_delayed_derivative() {
        let r = solve_generic_mid(2, 0, 1.0, 0.0).unwrap();
        assert_relative_eq!(r.qp.a()[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(r.qp.a()[1], -2.0, epsilon = 1e-12);
        assert_relative_eq!(r.qp.b()[0], -2.0, epsilon = 1e-12);
        for k in 0..3 {
            assert!(derivative_by_definition(r.qp.a(), r.qp.b(), 1.0, 0.0, k).abs() < 1e-11);
        }
    }

    #[test]
    fn control_mid_oscillator() {
        let r = solve_control_mid(&[1.0, 0.0], 1, 1.0, -1.0).unwrap();
        assert_relative_eq!(r.qp.b()[0], -2.0 / E, epsilon = 1e-12);
        assert!(r.qp.b()[1].abs() < 1e-12);
        let rel = r.relation.unwrap();
        assert!(rel.relative() <= 1e-8, "{rel:?}");
    }

    #[test]
    fn control_mid_relation_matches_closed_form() {
        // (n, m) = (2, 1), P = s² + 1: F = τ²(s₀²+1) + 4τs₀ + 2
        for &(s0, tau) in &[(-2.0, 0.5), (-1.0, 1.0), (0.3, 2.0), (-7.0, 0.05)] {
            let r = solve_control_mid(&[1.0, 0.0], 1, tau, s0).unwrap();
            let closed = tau * tau * (s0 * s0 + 1.0) + 4.0 * tau * s0 + 2.0;
            assert_relative_eq!(r.relation.unwrap().value, closed, epsilon = 1e-12, max_relative = 1e-12);
        }
        let r = solve_control_mid(&[1.0, 0.0], 1, 0.5, -2.0).unwrap();
        assert_relative_eq!(r.relation.unwrap().value, -0.75, epsilon = 1e-13);
    }

    #[test]
    fn control_mid_pendulum_and_wind_tunnel() {
        let r = solve_control_mid(&[-5.886, 0.0], 1, 0.1120, -5.0).unwrap();
        assert_relative_eq!(r.qp.b()[0], 11.53, max_relative = 5e-3);
        assert_relative_eq!(r.qp.b()[1], 4.4898, max_relative = 5e-3);

        let r = solve_control_mid(&[5.517, 12.301, 3.385], 2, 0.4140, -2.94675).unwrap();
        assert_relative_eq!(r.qp.b()[0], 1.9993, max_relative = 5e-3);
        assert_relative_eq!(r.qp.b()[2], 0.04167, max_relative = 5e-2);
        assert!(r.max_residual() < 1e-10);
    }

    #[test]
    fn crrid_first_order() {
        // -1 + a₀ + b₀e = 0 and -2 + a₀ + b₀e² = 0
        let r = solve_crrid(1, 0, 1.0, &[-1.0, -2.0]).unwrap();
        assert_relative_eq!(r.qp.a()[0], 1.0 - 1.0 / (E - 1.0), epsilon = 1e-12);
        assert_relative_eq!(r.qp.b()[0], 1.0 / (E * E - E), epsilon = 1e-12);
        assert!(r.max_residual() < 1e-14);

        let r = solve_crrid(1, 0, 1.0, &[0.0, -1.0]).unwrap();
        assert_relative_eq!(r.qp.a()[0], -1.0 / (E - 1.0), epsilon = 1e-12);
        assert_relative_eq!(r.qp.b()[0], 1.0 / (E - 1.0), epsilon = 1e-12);
    }

    #[test]
    fn crrid_rejects_repeated_roots() {
        assert_eq!(solve_crrid(1, 0, 1.0, &[-1.0, -1.0]).unwrap_err(), Error::RootsNotDistinct);
    }

    #[test]
    fn crrid_sorts_descending() {
        let r = solve_crrid(2, 1, 0.5, &[-3.0, -1.0, -4.0, -2.0]).unwrap();
        assert_eq!(r.targets, Targets::Simple(vec![-1.0, -2.0, -3.0, -4.0]));
        assert_eq!(r.targets.rightmost(), -1.0);
    }

    #[test]
    fn rejects_invalid_orders() {
        assert!(solve_generic_mid(1, 2, 1.0, 0.0).is_err());
        assert!(solve_generic_mid(2, 1, -1.0, 0.0).is_err());
        assert!(solve_control_mid(&[], 0, 1.0, 0.0).is_err());
        assert!(solve_crrid(1, 0, 1.0, &[-1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn generic_back_substitution(n in 1usize..6, mfrac in 0.0f64..1.0, tau in 0.1f64..3.0, s0 in -3.0f64..1.0) {
            let m = ((n + 1) as f64 * mfrac) as usize;
            let m = m.min(n);
            let r = solve_generic_mid(n, m, tau, s0).unwrap();
            prop_assert_eq!(r.residuals.len(), n + m + 1);
            prop_assert!(r.max_residual() <= RESIDUAL_TOLERANCE, "{:?}", r.residuals);
        }

        #[test]
        fn control_agrees_with_generic(n in 1usize..5, mfrac in 0.0f64..1.0, tau in 0.1f64..2.0, s0 in -3.0f64..1.0) {
            let m = (((n + 1) as f64 * mfrac) as usize).min(n);
            let g = solve_generic_mid(n, m, tau, s0).unwrap();
            let c = solve_control_mid(g.qp.a(), m, tau, s0).unwrap();
            for (x, y) in g.qp.b().iter().zip(c.qp.b()) {
                prop_assert!((x - y).abs() <= 1e-7 * (1.0 + x.abs()), "{x} vs {y}");
            }
            prop_assert!(c.relation.unwrap().relative() <= 1e-8);
        }

        #[test]
        fn exponential_substitution_invariance(n in 1usize..5, mfrac in 0.0f64..1.0, tau in 0.2f64..2.0, s0 in -2.5f64..2.5) {
            prop_assume!((s0 * tau).abs() <= 5.0);
            let m = (((n + 1) as f64 * mfrac) as usize).min(n);
            let scaled = solve_generic_mid_with(n, m, tau, s0, true).unwrap();
            let raw = solve_generic_mid_with(n, m, tau, s0, false).unwrap();
            for (x, y) in scaled.qp.b().iter().zip(raw.qp.b()) {
                prop_assert!((x - y).abs() <= 1e-6 * x.abs().max(1e-12) + 1e-12, "{x} vs {y}");
            }
        }

        #[test]
        fn crrid_assigned_roots(n in 1usize..4, mfrac in 0.0f64..1.0, tau in 0.2f64..1.5,
                                start in -2.0f64..0.5, gap in 0.3f64..1.0) {
            let m = (((n + 1) as f64 * mfrac) as usize).min(n);
            let roots: Vec<f64> = (0..n + m + 1).map(|j| start - gap * j as f64).collect();
            let r = solve_crrid(n, m, tau, &roots).unwrap();
            prop_assert!(r.max_residual() <= RESIDUAL_TOLERANCE, "{:?}", r.residuals);
        }
    }
}
