//! Characteristic quasipolynomials of single-delay linear DDEs.
//!
//! A [`Quasipolynomial`] stores
//!
//! ```text
//! Δ(s) = P(s) + e^{-sτ} Q(s),   P(s) = sⁿ + a_{n-1}s^{n-1} + … + a₀,   Q(s) = b_m s^m + … + b₀
//! ```
//!
//! with coefficients in ascending order and the leading `1` of `P` implicit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of derivative orders allowed beyond the quasipolynomial degree.
pub const DERIVATIVE_ORDER_SLACK: usize = 5;

/// Type of the delay equation a quasipolynomial belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Retarded,
    Neutral,
}

/// `Δ(s) = P(s) + e^{-sτ}Q(s)` with monic `P` of degree `n` and `Q` of degree `m ≤ n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Canonical", into = "Canonical")]
pub struct Quasipolynomial {
    a: Vec<f64>,
    b: Vec<f64>,
    tau: f64,
}

/// Canonical serialized shape: `{"n":2,"m":1,"a":[..],"b":[..],"tau":1.0}`.
#[derive(Serialize, Deserialize)]
struct Canonical {
    n: usize,
    m: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    tau: f64,
}

impl TryFrom<Canonical> for Quasipolynomial {
    type Error = Error;

    fn try_from(c: Canonical) -> Result<Self> {
        if c.a.len() != c.n {
            return Err(Error::InvalidQuasipolynomial(format!(
                "length(a) = {} but n = {}",
                c.a.len(),
                c.n
            )));
        }
        if c.b.len() != c.m + 1 {
            return Err(Error::InvalidQuasipolynomial(format!(
                "length(b) = {} but m + 1 = {}",
                c.b.len(),
                c.m + 1
            )));
        }
        Quasipolynomial::new(c.a, c.b, c.tau)
    }
}

impl From<Quasipolynomial> for Canonical {
    fn from(q: Quasipolynomial) -> Self {
        Canonical {
            n: q.n(),
            m: q.m(),
            a: q.a,
            b: q.b,
            tau: q.tau,
        }
    }
}

/// A value of `Δ` (or one of its derivatives) together with the sum of the
/// magnitudes of the terms that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: Complex64,
    pub scale: f64,
}

impl Evaluation {
    /// `|value| / scale`, or `|value|` when the scale vanishes.
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.value.norm() / self.scale
        } else {
            self.value.norm()
        }
    }
}

impl Quasipolynomial {
    /// Builds `Δ` from `a = [a₀..a_{n-1}]`, `b = [b₀..b_m]` and the delay.
    pub fn new(a: Vec<f64>, b: Vec<f64>, tau: f64) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidQuasipolynomial("n must be at least 1".into()));
        }
        if b.is_empty() {
            return Err(Error::InvalidQuasipolynomial("b must hold at least b0".into()));
        }
        if b.len() > a.len() + 1 {
            return Err(Error::InvalidQuasipolynomial(format!(
                "m = {} exceeds n = {}",
                b.len() - 1,
                a.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidQuasipolynomial("coefficients must be finite".into()));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidQuasipolynomial(format!("tau must be positive, got {tau}")));
        }
        Ok(Self { a, b, tau })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn m(&self) -> usize {
        self.b.len() - 1
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Same polynomial parts with a different delay.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), tau)
    }

    /// Same `P` and delay with a different delayed part.
    pub fn with_b(&self, b: Vec<f64>) -> Result<Self> {
        Self::new(self.a.clone(), b, self.tau)
    }

    /// `n + m + 1`, the largest multiplicity a root can have.
    pub fn degree(&self) -> usize {
        self.n() + self.m() + 1
    }

    pub fn classify(&self) -> Kind {
        if self.m() < self.n() {
            Kind::Retarded
        } else {
            Kind::Neutral
        }
    }

    /// Highest derivative order accepted by [`Self::evaluate_derivative`].
    pub fn derivative_cap(&self) -> usize {
        self.degree() + DERIVATIVE_ORDER_SLACK
    }

    /// Coefficients of `P` including the implicit leading one.
    pub fn p_coeffs(&self) -> Vec<f64> {
        let mut p = self.a.clone();
        p.push(1.0);
        p
    }

    /// `Δ(s)` and its term-magnitude scale.
    pub fn evaluate(&self, s: Complex64) -> Result<Evaluation> {
        self.evaluate_derivative(s, 0)
    }

    /// `Δ⁽ᵏ⁾(s) = P⁽ᵏ⁾(s) + e^{-sτ} Σⱼ C(k,j)(-τ)^{k-j} Q⁽ʲ⁾(s)`.
    pub fn evaluate_derivative(&self, s: Complex64, k: usize) -> Result<Evaluation> {
        if !(s.re.is_finite() && s.im.is_finite()) {
            return Err(Error::NonFiniteArgument);
        }
        let cap = self.derivative_cap();
        if k > cap {
            return Err(Error::DerivativeOrderTooLarge { requested: k, cap });
        }
        Ok(self.derivative_unchecked(s, k))
    }

    pub(crate) fn derivative_unchecked(&self, s: Complex64, k: usize) -> Evaluation {
        let (p, p_scale) = poly_derivative(&self.p_coeffs(), k, s);
        let e = (-s * self.tau).exp();
        let mut q = Complex64::new(0.0, 0.0);
        let mut q_scale = 0.0;
        let mut weight = 1.0; // C(k,j) τ^{k-j}, built from j = k downward
        for j in (0..=k).rev() {
            if j <= self.m() {
                let (qj, qj_scale) = poly_derivative(&self.b, j, s);
                let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
                q += qj * (sign * weight);
                q_scale += qj_scale * weight;
            }
            if j > 0 {
                weight *= self.tau * j as f64 / (k - j + 1) as f64;
            }
        }
        Evaluation {
            value: p + e * q,
            scale: p_scale + e.norm() * q_scale,
        }
    }

    /// Rewrites `Δ` in the variable `z = τ(s - s₀)` with unit delay:
    /// `Δ̃(z) = τⁿ Δ(s₀ + z/τ)`, which is again monic.
    ///
    /// `z` is a root of multiplicity `μ` of the result iff `s₀ + z/τ` is a root
    /// of multiplicity `μ` of `self`.
    pub fn normalize(&self, s0: f64) -> Result<Self> {
        if !s0.is_finite() {
            return Err(Error::NonFiniteArgument);
        }
        let n = self.n();
        let tau = self.tau;
        let p = self.p_coeffs();
        let shift = |coeffs: &[f64], outer: f64| -> Vec<f64> {
            // coefficient of z^j in outer·Σ_k c_k (s₀ + z/τ)^k
            (0..coeffs.len())
                .map(|j| {
                    let mut acc = 0.0;
                    for (k, &c) in coeffs.iter().enumerate().skip(j) {
                        acc += c * binomial(k, j) * s0.powi((k - j) as i32);
                    }
                    acc * outer * tau.powi(-(j as i32))
                })
                .collect()
        };
        let tau_n = tau.powi(n as i32);
        let mut a = shift(&p, tau_n);
        a.pop();
        let b = shift(&self.b, tau_n * (-s0 * tau).exp());
        Self::new(a, b, 1.0)
    }

    /// `κ = τⁿ`: `Δ̃(z) = κ Δ(s₀ + z/τ)` for the output of [`Self::normalize`].
    pub fn normalization_factor(&self) -> f64 {
        self.tau.powi(self.n() as i32)
    }

    /// Taylor coefficients `Δ⁽ᵏ⁾(s₀)/k!` at a real point for `k < count`,
    /// with per-coefficient magnitude scales. Not bounded by the derivative cap.
    pub fn taylor_at(&self, s0: f64, count: usize) -> (Vec<f64>, Vec<f64>) {
        let p = self.p_coeffs();
        let shifted = |coeffs: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let mut v = vec![0.0; coeffs.len()];
            let mut sc = vec![0.0; coeffs.len()];
            for j in 0..coeffs.len() {
                for (k, &c) in coeffs.iter().enumerate().skip(j) {
                    let t = c * binomial(k, j) * s0.powi((k - j) as i32);
                    v[j] += t;
                    sc[j] += t.abs();
                }
            }
            (v, sc)
        };
        let (pv, ps) = shifted(&p);
        let (qv, qs) = shifted(&self.b);
        let e = (-s0 * self.tau).exp();
        let mut out = vec![0.0; count];
        let mut scale = vec![0.0; count];
        for k in 0..count {
            if k < pv.len() {
                out[k] += pv[k];
                scale[k] += ps[k];
            }
            // e^{-τ(s-s₀)} = Σ_i (-τ)^i (s-s₀)^i / i!
            let mut ecoef = 1.0;
            for i in 0..=k {
                if i > 0 {
                    ecoef *= -self.tau / i as f64;
                }
                let j = k - i;
                if j < qv.len() {
                    out[k] += e * ecoef * qv[j];
                    scale[k] += e * ecoef.abs() * qs[j];
                }
            }
        }
        (out, scale)
    }
}

/// `p⁽ᵏ⁾(s)` for ascending coefficients, with the matching magnitude scale.
pub(crate) fn poly_derivative(coeffs: &[f64], k: usize, s: Complex64) -> (Complex64, f64) {
    if k >= coeffs.len() {
        return (Complex64::new(0.0, 0.0), 0.0);
    }
    let r = s.norm();
    let mut value = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for i in (k..coeffs.len()).rev() {
        let c = coeffs[i] * falling_factorial(i, k);
        value = value * s + c;
        scale = scale * r + c.abs();
    }
    (value, scale)
}

/// `i (i-1) … (i-k+1)`.
pub(crate) fn falling_factorial(i: usize, k: usize) -> f64 {
    (0..k).map(|j| (i - j) as f64).product()
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}
