//! Factorized forms of a quasipolynomial with a root of maximal multiplicity.
//!
//! With `Δ̃` the normalization at `s₀` and `M = n+m+1`, the forms are
//!
//! ```text
//! Δ̃(z) = z^M R(z)                                  (deflation)
//! Δ̃(z) = z^M ∫₀¹ w(t) e^{-zt} dt                   (integral form)
//! Δ̃(z) = z^M c B(m+1, n+1) M(m+1, n+m+2, -z)      (hypergeometric form)
//! ```
//!
//! with `w(t) = c tᵐ(1-t)ⁿ`. Every reported form has been checked against
//! direct evaluation at a fixed set of probe points.

use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_equilibrated;
use crate::quasipoly::{binomial, factorial, Quasipolynomial};

/// Largest Taylor order handled by [`deflate`].
pub const ORDER_CAP: usize = 150;
pub const DEFAULT_REMAINDER_LENGTH: usize = 16;
/// Relative size below which a Taylor coefficient counts as zero.
pub const DEFLATION_TOLERANCE: f64 = 1e-8;
pub const VALIDATION_TOLERANCE: f64 = 1e-8;
/// `|z|` limit of the Kummer series.
pub const SERIES_RADIUS: f64 = 50.0;
pub const QUADRATURE_NODES: usize = 64;

/// Where the closed forms are compared against `Δ̃`.
pub fn probe_points() -> [Complex64; 8] {
    let c = Complex64::new;
    [c(1.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0), c(-2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 1.0), c(-3.0, 0.0)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// `c tᵐ(1-t)ⁿ`.
    Beta,
    /// Degree `M-1` polynomial fitted to the first `M` remainder coefficients.
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub a: f64,
    pub b: f64,
    /// Constant `c` of the Beta weight.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizedForm {
    pub s0: f64,
    pub tau: f64,
    pub n: usize,
    pub m: usize,
    pub multiplicity: usize,
    pub weight_kind: WeightKind,
    /// Ascending monomial coefficients of `w(t)` on `[0, 1]`.
    pub weight_coeffs: Vec<f64>,
    pub hyper_params: Option<HyperParams>,
    /// Largest relative mismatch over the probe points.
    pub validation_residual: f64,
}

impl FactorizedForm {
    /// Evaluates `w(t)`.
    pub fn weight(&self, t: f64) -> f64 {
        self.weight_coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// `z^M ∫₀¹ w(t) e^{-zt} dt`.
    pub fn integral_value(&self, z: Complex64) -> Complex64 {
        z.powu(self.multiplicity as u32) * weighted_laplace(&self.weight_coeffs, z)
    }

    /// `z^M c B(m+1, n+1) M(m+1, n+m+2, -z)`; `None` without hypergeometric parameters.
    pub fn hypergeometric_value(&self, z: Complex64) -> Option<Result<Complex64>> {
        let h = self.hyper_params?;
        let beta = beta_int(self.m + 1, self.n + 1);
        Some(kummer_m(h.a, h.b, -z).map(|k| z.powu(self.multiplicity as u32) * h.scale * beta * k))
    }

    /// Human-readable statement of the form in the original variable `s`.
    pub fn formula(&self) -> String {
        let (n, m, mm) = (self.n, self.m, self.multiplicity);
        let kappa = format!("τ^-{}", n);
        match self.hyper_params {
            Some(h) => format!(
                "Δ(s) = {kappa} · (τ(s−s0))^{mm} · c · B({}, {}) · M({}, {}, −τ(s−s0)),  s0 = {:.4}, τ = {:.4}, c = {:.6}",
                m + 1,
                n + 1,
                h.a,
                h.b,
                self.s0,
                self.tau,
                h.scale
            ),
            None => format!(
                "Δ(s) = {kappa} · (τ(s−s0))^{mm} · ∫₀¹ w(t) e^(−τ(s−s0)t) dt,  s0 = {:.4}, τ = {:.4}",
                self.s0, self.tau
            ),
        }
    }
}

fn gauss_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let rule = GaussLegendre::new(QUADRATURE_NODES.try_into().expect("nonzero"));
        // map [-1, 1] onto [0, 1]
        rule.as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
    })
}

/// `∫₀¹ w(t) e^{-zt} dt` by 64-node Gauss–Legendre quadrature.
pub fn weighted_laplace(weight: &[f64], z: Complex64) -> Complex64 {
    gauss_rule()
        .iter()
        .map(|&(t, wq)| {
            let w = weight.iter().rev().fold(0.0, |acc, c| acc * t + c);
            (-z * t).exp() * (w * wq)
        })
        .sum()
}

/// `B(a, b)` for positive integers.
pub fn beta_int(a: usize, b: usize) -> f64 {
    factorial(a - 1) * factorial(b - 1) / factorial(a + b - 1)
}

/// Taylor coefficients of `R(z) = Δ̃(z)/z^M` at 0, `Δ̃` the normalization at `s₀`.
///
/// Fails when one of the first `M` coefficients of `Δ̃` is not numerically zero
/// or when the `M`-th one is (the multiplicity would then exceed `M`).
pub fn deflate(qp: &Quasipolynomial, s0: f64, multiplicity: usize, length: usize) -> Result<Vec<f64>> {
    let total = multiplicity + length;
    if total > ORDER_CAP {
        return Err(Error::OrderExceedsCap { requested: total, cap: ORDER_CAP });
    }
    if length == 0 {
        return Err(Error::InvalidParameter("remainder length must be positive".into()));
    }
    let normalized = qp.normalize(s0)?;
    let (coeffs, scales) = normalized.taylor_at(0.0, total);
    let vanishes = |k: usize| coeffs[k].abs() <= DEFLATION_TOLERANCE * scales[k].max(f64::MIN_POSITIVE);
    if let Some(order) = (0..multiplicity).find(|&k| !vanishes(k)) {
        return Err(Error::MultiplicityConditionViolated { order });
    }
    if vanishes(multiplicity) {
        return Err(Error::MultiplicityConditionViolated { order: multiplicity });
    }
    Ok(coeffs[multiplicity..].to_vec())
}

fn validate(normalized: &Quasipolynomial, form: impl Fn(Complex64) -> Result<Complex64>) -> Result<f64> {
    let mut worst = 0.0f64;
    for z in probe_points() {
        let direct = normalized.evaluate(z)?;
        let diff = (form(z)? - direct.value).norm() / direct.scale.max(f64::MIN_POSITIVE);
        worst = worst.max(diff);
    }
    Ok(worst)
}

/// Integral factorization at `s₀` with `M = n+m+1`.
pub fn integral_form(qp: &Quasipolynomial, s0: f64, multiplicity: usize) -> Result<FactorizedForm> {
    let (n, m) = (qp.n(), qp.m());
    let remainder = deflate(qp, s0, multiplicity, DEFAULT_REMAINDER_LENGTH.max(multiplicity))?;
    let normalized = qp.normalize(s0)?;
    let mut form = FactorizedForm {
        s0,
        tau: qp.tau(),
        n,
        m,
        multiplicity,
        weight_kind: WeightKind::Beta,
        weight_coeffs: Vec::new(),
        hyper_params: None,
        validation_residual: f64::INFINITY,
    };

    if multiplicity == n + m + 1 {
        let c = remainder[0] / beta_int(m + 1, n + 1);
        let mut w = vec![0.0; n + m + 1];
        for j in 0..=n {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            w[m + j] = c * sign * binomial(n, j);
        }
        form.weight_coeffs = w;
        form.validation_residual = validate(&normalized, |z| Ok(form.integral_value(z)))?;
        if form.validation_residual <= VALIDATION_TOLERANCE {
            form.hyper_params = Some(HyperParams { a: (m + 1) as f64, b: (n + m + 2) as f64, scale: c });
            return Ok(form);
        }
    }

    // r_k = (-1)^k/k! Σ_j w_j/(j+k+1)
    let size = multiplicity;
    let a = DMatrix::from_fn(size, size, |k, j| {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign / (factorial(k) * (j + k + 1) as f64)
    });
    let fallback = solve_equilibrated(&a, &remainder[..size]).ok_or(Error::FactorizationNotRepresentable {
        residual: form.validation_residual,
    })?;
    form.weight_kind = WeightKind::General;
    form.weight_coeffs = fallback.x;
    form.hyper_params = None;
    form.validation_residual = validate(&normalized, |z| Ok(form.integral_value(z)))?;
    if form.validation_residual <= VALIDATION_TOLERANCE {
        Ok(form)
    } else {
        Err(Error::FactorizationNotRepresentable { residual: form.validation_residual })
    }
}

/// Hypergeometric factorization; requires the Beta weight.
pub fn hypergeometric_form(qp: &Quasipolynomial, s0: f64, multiplicity: usize) -> Result<FactorizedForm> {
    let mut form = integral_form(qp, s0, multiplicity)?;
    if form.weight_kind != WeightKind::Beta {
        return Err(Error::HypergeometricUnavailable);
    }
    let normalized = qp.normalize(s0)?;
    let residual = validate(&normalized, |z| form.hypergeometric_value(z).expect("parameters set"))?;
    if residual > VALIDATION_TOLERANCE {
        return Err(Error::FactorizationNotRepresentable { residual });
    }
    form.validation_residual = form.validation_residual.max(residual);
    Ok(form)
}

/// Confluent hypergeometric function `M(a, b, z) = Σ (a)_k z^k / ((b)_k k!)`.
///
/// Summed directly for `Re z ≥ 0`; for `Re z < 0` through Kummer's
/// transformation `M(a, b, z) = e^z M(b-a, b, -z)` to avoid cancellation.
pub fn kummer_m(a: f64, b: f64, z: Complex64) -> Result<Complex64> {
    if !(a.is_finite() && b.is_finite() && z.is_finite()) {
        return Err(Error::NonFiniteArgument);
    }
    if !(a > 0.0 && b >= a) {
        return Err(Error::InvalidParameter(format!("need 0 < a <= b, got a = {a}, b = {b}")));
    }
    if z.norm() > SERIES_RADIUS {
        return Err(Error::ArgumentOutsideSeriesRegime(z.norm()));
    }
    if z.re < 0.0 {
        return Ok(z.exp() * kummer_series(b - a, b, -z));
    }
    Ok(kummer_series(a, b, z))
}

fn kummer_series(a: f64, b: f64, z: Complex64) -> Complex64 {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for k in 0..500 {
        let k = k as f64;
        term *= z * ((a + k) / ((b + k) * (k + 1.0)));
        sum += term;
        if term.norm() < 1e-16 * sum.norm() {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::solve_generic_mid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // z - 1 + e^{-z}
    fn first_order() -> Quasipolynomial {
        Quasipolynomial::new(vec![-1.0], vec![1.0], 1.0).unwrap()
    }

    #[test]
    fn deflation_of_first_order_example() {
        let r = deflate(&first_order(), 0.0, 2, 16).unwrap();
        assert_relative_eq!(r[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(r[1], -1.0 / 6.0, epsilon = 1e-15);
        // e^{-z} tail: r_k = (-1)^k/(k+2)!
        for (k, rk) in r.iter().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert_relative_eq!(*rk, sign / factorial(k + 2), max_relative = 1e-12);
        }
        assert_eq!(
            deflate(&first_order(), 0.0, 3, 16).unwrap_err(),
            Error::MultiplicityConditionViolated { order: 2 }
        );
    }

    #[test]
    fn deflation_matches_derivative() {
        let r = solve_generic_mid(2, 1, 1.0, -1.0).unwrap();
        let norm = r.qp.normalize(-1.0).unwrap();
        let rem = deflate(&r.qp, -1.0, 4, 16).unwrap();
        let d4 = norm.evaluate_derivative(c(0.0, 0.0), 4).unwrap();
        assert!((rem[0] - d4.value.re / 24.0).abs() <= 1e-10 * d4.scale);
        assert!(rem[0].abs() > 0.0);
    }

    #[test]
    fn deflation_order_cap() {
        assert_eq!(
            deflate(&first_order(), 0.0, 2, 149).unwrap_err(),
            Error::OrderExceedsCap { requested: 151, cap: ORDER_CAP }
        );
    }

    #[test]
    fn integral_form_first_order() {
        let f = integral_form(&first_order(), 0.0, 2).unwrap();
        assert_eq!(f.weight_kind, WeightKind::Beta);
        assert_relative_eq!(f.weight_coeffs[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(f.weight_coeffs[1], -1.0, epsilon = 1e-14);
        assert!(f.validation_residual <= 1e-12);
        // z = 0 limit of the integral is r₀
        assert_relative_eq!(weighted_laplace(&f.weight_coeffs, c(0.0, 0.0)).re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn integral_form_second_order() {
        // z² - 2z + 2 - 2e^{-z}
        let qp = Quasipolynomial::new(vec![2.0, -2.0], vec![-2.0], 1.0).unwrap();
        let f = integral_form(&qp, 0.0, 3).unwrap();
        assert_eq!(f.weight_kind, WeightKind::Beta);
        // r₀ = Δ̃'''(0)/3! = 1/3 = c·B(1, 3)
        let cst = f.hyper_params.unwrap().scale;
        assert_relative_eq!(cst, 1.0, epsilon = 1e-12);
        assert!(f.validation_residual <= VALIDATION_TOLERANCE);
    }

    #[test]
    fn hypergeometric_first_order() {
        let f = hypergeometric_form(&first_order(), 0.0, 2).unwrap();
        let h = f.hyper_params.unwrap();
        assert_eq!((h.a, h.b), (1.0, 3.0));
        // w(t) = 1 - t, so c = 1 and c·B(1, 2) = r₀ = 1/2
        assert_relative_eq!(h.scale, 1.0, epsilon = 1e-14);
        // z = 1: 1 - 1 + 1/e
        let v = f.hypergeometric_value(c(1.0, 0.0)).unwrap().unwrap();
        assert_relative_eq!(v.re, (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn generic_mid_forms() {
        for &(n, m, tau, s0) in &[(2, 1, 1.0, -1.0), (3, 2, 0.5, -2.0), (4, 0, 2.0, 0.3), (2, 2, 1.0, -1.5)] {
            let r = solve_generic_mid(n, m, tau, s0).unwrap();
            let f = hypergeometric_form(&r.qp, s0, n + m + 1).unwrap();
            assert_eq!(f.weight_kind, WeightKind::Beta);
            for z in probe_points() {
                let a = f.integral_value(z);
                let b = f.hypergeometric_value(z).unwrap().unwrap();
                assert!((a - b).norm() <= 1e-10 * (1.0 + a.norm()), "{n},{m} at {z}");
            }
        }
    }

    #[test]
    fn general_weight_fallback() {
        // multiplicity 2 but (n, m) = (1, 1) asks for M = 3: Beta weight unusable
        let qp = Quasipolynomial::new(vec![-1.0], vec![1.0, 0.0], 1.0).unwrap();
        let f = integral_form(&qp, 0.0, 2).unwrap();
        assert_eq!(f.weight_kind, WeightKind::General);
        assert_eq!(hypergeometric_form(&qp, 0.0, 2).unwrap_err(), Error::HypergeometricUnavailable);
    }

    #[test]
    fn not_representable() {
        // simple root at 0 of a quadratic: M = 1 weight is constant, cannot match
        let qp = Quasipolynomial::new(vec![0.0, 1.0], vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(integral_form(&qp, 0.0, 1), Err(Error::FactorizationNotRepresentable { .. })));
    }

    #[test]
    fn kummer_identities() {
        for (a, b) in [(1.0, 2.0), (0.5, 3.0), (2.0, 2.0)] {
            assert_eq!(kummer_m(a, b, c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        }
        for z in [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)] {
            assert!((kummer_m(1.0, 1.0, z).unwrap() - z.exp()).norm() <= 1e-12);
        }
        for z in [c(1.0, 0.0), c(-2.0, 0.0), c(0.0, 1.0)] {
            let expected = (z.exp() - 1.0) / z;
            assert!((kummer_m(1.0, 2.0, z).unwrap() - expected).norm() <= 1e-12);
        }
        assert!(matches!(kummer_m(1.0, 2.0, c(51.0, 0.0)), Err(Error::ArgumentOutsideSeriesRegime(_))));
        assert!(kummer_m(2.0, 1.0, c(1.0, 0.0)).is_err());
        assert!(kummer_m(0.0, 1.0, c(1.0, 0.0)).is_err());
    }

    #[test]
    fn kummer_matches_integral_representation() {
        // M(a, b, z) = Γ(b)/(Γ(a)Γ(b-a)) ∫₀¹ e^{zt} t^{a-1}(1-t)^{b-a-1} dt
        let z = c(1.0, 0.0);
        let integral: Complex64 = gauss_rule().iter().map(|&(t, w)| (z * t).exp() * (t * (1.0 - t) * w)).sum();
        let expected = integral / beta_int(2, 2);
        assert!((kummer_m(2.0, 4.0, z).unwrap() - expected).norm() <= 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn integral_form_holds_off_the_probe_set(r in 0.0f64..5.0, theta in 0.0f64..std::f64::consts::TAU) {
            let qp = solve_generic_mid(2, 1, 1.0, -1.0).unwrap().qp;
            let f = integral_form(&qp, -1.0, 4).unwrap();
            let norm = qp.normalize(-1.0).unwrap();
            let z = Complex64::from_polar(r, theta);
            let direct = norm.evaluate(z).unwrap();
            prop_assert!((f.integral_value(z) - direct.value).norm() <= VALIDATION_TOLERANCE * direct.scale);
        }

        #[test]
        fn deflation_reproduces_small_z(r in 1e-3f64..5e-2, theta in 0.0f64..std::f64::consts::TAU) {
            let qp = solve_generic_mid(2, 1, 1.0, -1.0).unwrap().qp;
            let rem = deflate(&qp, -1.0, 4, 16).unwrap();
            let norm = qp.normalize(-1.0).unwrap();
            let z = Complex64::from_polar(r, theta);
            let series = rem.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &k| acc * z + k) * z.powu(4);
            let direct = norm.evaluate(z).unwrap();
            prop_assert!((series - direct.value).norm() <= 1e-12 * direct.scale);
        }
    }
}
