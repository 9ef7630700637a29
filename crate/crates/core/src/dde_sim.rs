//! Time-domain integration of the closed loop
//! `y⁽ⁿ⁾(t) + Σ a_k y⁽ᵏ⁾(t) + Σ b_k y⁽ᵏ⁾(t-τ) = 0` by the method of steps.
//!
//! Classical RK4 on the companion system. Delayed values come from cubic
//! Hermite interpolation of the stored grid states and their derivatives, or
//! from the initial history on `[-τ, 0]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quasipoly::{Kind, Quasipolynomial};

/// Largest admissible step as a fraction of the delay.
pub const MAX_STEP_FRACTION: f64 = 0.1;

/// Initial function on `[-τ, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HistorySpec {
    Constant { value: f64 },
    /// `y(t) = Σ c_k t^k`, ascending.
    Polynomial { coeffs: Vec<f64> },
    /// Uniform samples ending at `t = 0`: `values[i]` is `y(-(len-1-i)·dt)`.
    Sampled { dt: f64, values: Vec<f64> },
}

impl HistorySpec {
    fn validate(&self, tau: f64, h: f64) -> Result<()> {
        match self {
            Self::Constant { value } if !value.is_finite() => Err(Error::NonFiniteArgument),
            Self::Polynomial { coeffs } if coeffs.iter().any(|c| !c.is_finite()) => Err(Error::NonFiniteArgument),
            Self::Sampled { dt, values } => {
                if !(dt.is_finite() && *dt > 0.0) || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteArgument);
                }
                if values.len() < 4 {
                    return Err(Error::InvalidParameter("sampled history needs at least 4 samples".into()));
                }
                if *dt > h * (1.0 + 1e-12) {
                    return Err(Error::InvalidParameter(format!("history sample spacing {dt} exceeds the step {h}")));
                }
                if (values.len() - 1) as f64 * dt < tau * (1.0 - 1e-12) {
                    return Err(Error::InvalidParameter("sampled history does not cover [-tau, 0]".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `y⁽ʲ⁾(t)` for `j < count`.
    pub fn derivatives(&self, t: f64, count: usize) -> Vec<f64> {
        let mut out = vec![0.0; count];
        match self {
            Self::Constant { value } => {
                if count > 0 {
                    out[0] = *value;
                }
            }
            Self::Polynomial { coeffs } => {
                let mut c = coeffs.clone();
                for slot in out.iter_mut() {
                    *slot = c.iter().rev().fold(0.0, |acc, k| acc * t + k);
                    c = c.iter().enumerate().skip(1).map(|(i, k)| i as f64 * k).collect();
                }
            }
            Self::Sampled { dt, values } => {
                let last = values.len() - 1;
                let start = -(last as f64) * dt;
                // four nodes around t, clamped to the sample range
                let pos = (t - start) / dt;
                let j = (pos.floor() as i64 - 1).clamp(0, last as i64 - 3) as usize;
                let f = &values[j..j + 4];
                let d1 = f[1] - f[0];
                let d2 = f[2] - 2.0 * f[1] + f[0];
                let d3 = f[3] - 3.0 * f[2] + 3.0 * f[1] - f[0];
                // p(u) = c0 + c1 u + c2 u² + c3 u³ with u = (t - t_j)/dt
                let mut c = vec![f[0], d1 - d2 / 2.0 + d3 / 3.0, d2 / 2.0 - d3 / 2.0, d3 / 6.0];
                let u = pos - j as f64;
                let mut inv = 1.0;
                for slot in out.iter_mut() {
                    *slot = c.iter().rev().fold(0.0, |acc, k| acc * u + k) * inv;
                    c = c.iter().enumerate().skip(1).map(|(i, k)| i as f64 * k).collect();
                    inv /= dt;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    /// `y⁽ʲ⁾(T)` for `j < n`.
    pub final_derivatives: Vec<f64>,
    /// Envelope slope over the second half of the run, when one can be formed.
    pub decay_estimate: Option<f64>,
    /// Step actually used: `T / ceil(T/h)`.
    pub step: f64,
}

impl SimulationResult {
    /// `t,y` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,y\n");
        for (t, y) in self.t.iter().zip(&self.y) {
            out.push_str(&format!("{t},{y}\n"));
        }
        out
    }
}

struct Integrator<'a> {
    qp: &'a Quasipolynomial,
    history: &'a HistorySpec,
    h: f64,
    states: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
}

impl Integrator<'_> {
    /// Delayed state `(y, …, y⁽ⁿ⁻¹⁾)` at `t ≤ current time`.
    fn delayed(&self, t: f64) -> Vec<f64> {
        let n = self.qp.n();
        if t <= 0.0 {
            return self.history.derivatives(t, n);
        }
        let pos = t / self.h;
        let i = (pos.floor() as usize).min(self.states.len().saturating_sub(2));
        let theta = pos - i as f64;
        let (h00, h10, h01, h11) = hermite(theta);
        (0..n)
            .map(|k| {
                h00 * self.states[i][k]
                    + h10 * self.h * self.slopes[i][k]
                    + h01 * self.states[i + 1][k]
                    + h11 * self.h * self.slopes[i + 1][k]
            })
            .collect()
    }

    fn rhs(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let n = self.qp.n();
        let lagged = self.delayed(t - self.qp.tau());
        let mut dx = Vec::with_capacity(n);
        dx.extend_from_slice(&x[1..]);
        let own: f64 = self.qp.a().iter().zip(x).map(|(a, v)| a * v).sum();
        let delayed: f64 = self.qp.b().iter().zip(&lagged).map(|(b, v)| b * v).sum();
        dx.push(-own - delayed);
        dx
    }
}

fn hermite(theta: f64) -> (f64, f64, f64, f64) {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    (2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + theta, -2.0 * t3 + 3.0 * t2, t3 - t2)
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(x, k)| x + a * k).collect()
}

/// Integrates over `[0, T]` with step at most `h ≤ τ/10`.
pub fn simulate(qp: &Quasipolynomial, history: &HistorySpec, t_end: f64, h: f64) -> Result<SimulationResult> {
    if qp.classify() == Kind::Neutral {
        return Err(Error::SimulationRestrictedToRetarded);
    }
    if !(t_end.is_finite() && h.is_finite()) {
        return Err(Error::NonFiniteArgument);
    }
    if t_end <= 0.0 || h <= 0.0 {
        return Err(Error::InvalidParameter("T and h must be positive".into()));
    }
    let limit = MAX_STEP_FRACTION * qp.tau();
    if h > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { h, limit });
    }
    history.validate(qp.tau(), h)?;

    let steps = ((t_end / h) - 1e-9).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let n = qp.n();
    let mut sim = Integrator {
        qp,
        history,
        h,
        states: Vec::with_capacity(steps + 1),
        slopes: Vec::with_capacity(steps + 1),
    };
    let x0 = history.derivatives(0.0, n);
    let k0 = sim.rhs(0.0, &x0);
    sim.states.push(x0);
    sim.slopes.push(k0);

    for i in 0..steps {
        let t = i as f64 * h;
        let x = sim.states[i].clone();
        let k1 = sim.slopes[i].clone();
        // stages read delayed values at t + h - τ ≤ t - 9h, all stored already
        let k2 = sim.rhs(t + 0.5 * h, &axpy(&x, 0.5 * h, &k1));
        let k3 = sim.rhs(t + 0.5 * h, &axpy(&x, 0.5 * h, &k2));
        let k4 = sim.rhs(t + h, &axpy(&x, h, &k3));
        let next: Vec<f64> = (0..n)
            .map(|j| x[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
            .collect();
        let slope = sim.rhs(t + h, &next);
        sim.states.push(next);
        sim.slopes.push(slope);
    }

    let t: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
    let y: Vec<f64> = sim.states.iter().map(|x| x[0]).collect();
    let final_derivatives = sim.states.last().cloned().unwrap_or_default();
    let mut result = SimulationResult { t, y, final_derivatives, decay_estimate: None, step: h };
    result.decay_estimate = estimate_decay_rate(&result, (0.5 * t_end, t_end)).ok();
    Ok(result)
}

fn window_samples(res: &SimulationResult, (t1, t2): (f64, f64)) -> Result<Vec<(f64, f64)>> {
    if !(t1.is_finite() && t2.is_finite()) {
        return Err(Error::NonFiniteArgument);
    }
    let pts: Vec<(f64, f64)> = res
        .t
        .iter()
        .zip(&res.y)
        .filter(|(t, _)| **t >= t1 && **t <= t2)
        .map(|(t, y)| (*t, *y))
        .collect();
    if pts.len() < 3 {
        return Err(Error::SignalTooShort);
    }
    Ok(pts)
}

fn slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::SignalTooShort);
    }
    let k = points.len() as f64;
    let (mt, ml) = points.iter().fold((0.0, 0.0), |(a, b), (t, l)| (a + t / k, b + l / k));
    let (num, den) = points
        .iter()
        .fold((0.0, 0.0), |(n, d), (t, l)| (n + (t - mt) * (l - ml), d + (t - mt) * (t - mt)));
    if den == 0.0 {
        return Err(Error::SignalTooShort);
    }
    Ok(num / den)
}

/// Least-squares slope of `ln|y|` over the window: through the peaks of `|y|`
/// when there are at least three, through all nonzero samples otherwise.
pub fn estimate_decay_rate(res: &SimulationResult, window: (f64, f64)) -> Result<f64> {
    let pts = window_samples(res, window)?;
    let peaks: Vec<(f64, f64)> = pts
        .windows(3)
        .filter(|w| w[1].1.abs() > w[0].1.abs() && w[1].1.abs() >= w[2].1.abs())
        .map(|w| (w[1].0, w[1].1.abs().ln()))
        .collect();
    if peaks.len() >= 3 {
        return slope(&peaks);
    }
    let logs: Vec<(f64, f64)> = pts.iter().filter(|(_, y)| *y != 0.0).map(|(t, y)| (*t, y.abs().ln())).collect();
    slope(&logs)
}

/// Exponent `λ` of the best fit `y(t) ≈ (p₀ + p₁t + … + p_{μ-1}t^{μ-1}) e^{λt}`
/// over the window.
///
/// A root of multiplicity `μ` contributes exactly such a term; the plain log
/// slope of [`estimate_decay_rate`] is biased by the polynomial factor.
pub fn estimate_decay_rate_with_multiplicity(res: &SimulationResult, window: (f64, f64), multiplicity: usize) -> Result<f64> {
    if multiplicity == 0 {
        return Err(Error::InvalidParameter("multiplicity must be positive".into()));
    }
    let pts = window_samples(res, window)?;
    if pts.len() < multiplicity + 2 {
        return Err(Error::SignalTooShort);
    }
    let (t1, t2) = (pts[0].0, pts[pts.len() - 1].0);
    let span = (t2 - t1).max(f64::MIN_POSITIVE);
    let peak = pts.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::SignalTooShort);
    }
    let y = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1 / peak));
    let misfit = |lambda: f64| -> f64 {
        let basis = DMatrix::from_fn(pts.len(), multiplicity, |i, k| {
            let u = (pts[i].0 - t1) / span;
            u.powi(k as i32) * (lambda * (pts[i].0 - t1)).exp()
        });
        match basis.clone().svd(true, true).solve(&y, 1e-14) {
            Ok(p) => (&basis * p - &y).norm_squared(),
            Err(_) => f64::INFINITY,
        }
    };
    // coarse scan around the plain estimate, then golden-section refinement
    let guess = estimate_decay_rate(res, window).unwrap_or(0.0);
    let reach = 5.0 * (1.0 + guess.abs());
    let (lo, hi) = (guess - reach, guess + reach);
    let grid = 400;
    let at = |i: usize| lo + (hi - lo) * i as f64 / grid as f64;
    let best = (0..=grid)
        .map(|i| (i, misfit(at(i))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let (mut a, mut b) = (at(best.saturating_sub(1)), at((best + 1).min(grid)));
    const G: f64 = 0.618_033_988_749_895;
    let mut x1 = b - G * (b - a);
    let mut x2 = a + G * (b - a);
    let (mut f1, mut f2) = (misfit(x1), misfit(x2));
    for _ in 0..100 {
        if (b - a).abs() <= 1e-10 * (1.0 + a.abs()) {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - G * (b - a);
            f1 = misfit(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + G * (b - a);
            f2 = misfit(x2);
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn oscillator(b0: f64) -> Quasipolynomial {
        Quasipolynomial::new(vec![1.0, 0.0], vec![b0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn open_loop_oscillator_is_a_cosine() {
        let r = simulate(&oscillator(0.0), &HistorySpec::Constant { value: 1.0 }, 20.0, 1e-2).unwrap();
        assert_eq!(r.t.len(), r.y.len());
        assert_relative_eq!(*r.t.last().unwrap(), 20.0, epsilon = 1e-12);
        let err = r.t.iter().zip(&r.y).map(|(t, y)| (y - t.cos()).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn designed_oscillator_decays() {
        let r = simulate(&oscillator(-2.0 / E), &HistorySpec::Constant { value: 0.1 }, 30.0, 1e-2).unwrap();
        assert!(r.y.last().unwrap().abs() <= 1e-9, "{}", r.y.last().unwrap());
        let plain = estimate_decay_rate(&r, (10.0, 25.0)).unwrap();
        assert!(plain < -0.5, "{plain}");
        let fitted = estimate_decay_rate_with_multiplicity(&r, (10.0, 25.0), 3).unwrap();
        assert!((fitted + 1.0).abs() <= 0.1, "{fitted}");
    }

    #[test]
    fn designed_pendulum_decays_at_the_placed_rate() {
        let a = [-5.886, 0.0];
        let tau = crate::admissibility::solve_for_tau(&a, 1, -5.0).unwrap()[0];
        let qp = crate::placement::solve_control_mid(&a, 1, tau, -5.0).unwrap().qp;
        let r = simulate(&qp, &HistorySpec::Constant { value: 0.01 }, 3.0, 1e-3).unwrap();
        let fitted = estimate_decay_rate_with_multiplicity(&r, (1.0, 2.5), 3).unwrap();
        assert!((fitted + 5.0).abs() <= 0.5, "{fitted}");
    }

    #[test]
    fn open_loop_pendulum_grows() {
        let qp = Quasipolynomial::new(vec![-5.886, 0.0], vec![0.0, 0.0], 0.1).unwrap();
        let r = simulate(&qp, &HistorySpec::Constant { value: 1e-6 }, 3.0, 1e-3).unwrap();
        let rate = estimate_decay_rate(&r, (1.0, 3.0)).unwrap();
        assert!((rate - 5.886f64.sqrt()).abs() <= 0.05 * 5.886f64.sqrt(), "{rate}");
    }

    #[test]
    fn pure_exponential_slope() {
        let t: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
        let y = t.iter().map(|t| (-2.0 * t).exp()).collect();
        let r = SimulationResult { t, y, final_derivatives: vec![], decay_estimate: None, step: 1e-3 };
        assert_relative_eq!(estimate_decay_rate(&r, (0.0, 1.0)).unwrap(), -2.0, epsilon = 1e-3);
        assert_relative_eq!(estimate_decay_rate_with_multiplicity(&r, (0.0, 1.0), 1).unwrap(), -2.0, epsilon = 1e-6);
        assert_eq!(estimate_decay_rate(&r, (2.0, 3.0)), Err(Error::SignalTooShort));
    }

    #[test]
    fn fit_recovers_polynomial_times_exponential() {
        let t: Vec<f64> = (0..=1500).map(|i| 1.0 + i as f64 * 1e-3).collect();
        let y = t.iter().map(|t| (0.3 - t + 2.0 * t * t) * (-5.0 * t).exp()).collect();
        let r = SimulationResult { t, y, final_derivatives: vec![], decay_estimate: None, step: 1e-3 };
        assert_relative_eq!(estimate_decay_rate_with_multiplicity(&r, (1.0, 2.5), 3).unwrap(), -5.0, epsilon = 1e-6);
    }

    #[test]
    fn rejects_bad_input() {
        let neutral = Quasipolynomial::new(vec![1.0], vec![0.1, 0.2], 1.0).unwrap();
        let hist = HistorySpec::Constant { value: 1.0 };
        assert_eq!(simulate(&neutral, &hist, 1.0, 0.01), Err(Error::SimulationRestrictedToRetarded));
        assert!(matches!(simulate(&oscillator(0.0), &hist, 1.0, 0.2), Err(Error::StepTooLarge { .. })));
        let coarse = HistorySpec::Sampled { dt: 0.5, values: vec![0.0; 5] };
        assert!(simulate(&oscillator(0.0), &coarse, 1.0, 0.1).is_err());
        let short = HistorySpec::Sampled { dt: 0.1, values: vec![0.0; 5] };
        assert!(simulate(&oscillator(0.0), &short, 1.0, 0.1).is_err());
    }

    #[test]
    fn history_kinds_agree() {
        // y = 1 + t/2 on [-1, 0] as polynomial and as samples
        let poly = HistorySpec::Polynomial { coeffs: vec![1.0, 0.5] };
        let values: Vec<f64> = (0..=100).map(|i| 1.0 + 0.5 * (-1.0 + i as f64 * 0.01)).collect();
        let sampled = HistorySpec::Sampled { dt: 0.01, values };
        for t in [-1.0, -0.735, -0.5, -0.001, 0.0] {
            let a = poly.derivatives(t, 2);
            let b = sampled.derivatives(t, 2);
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-10, "{t}: {a:?} {b:?}");
        }
        let qp = oscillator(-0.3);
        let ra = simulate(&qp, &poly, 5.0, 0.01).unwrap();
        let rb = simulate(&qp, &sampled, 5.0, 0.01).unwrap();
        let diff = ra.y.iter().zip(&rb.y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn fourth_order_convergence() {
        // smooth history y = cos t so no derivative jumps at t = 0
        let qp = oscillator(-0.3);
        let hist = HistorySpec::Polynomial { coeffs: vec![1.0, 0.0, -0.5, 0.0, 1.0 / 24.0] };
        let y = |h: f64| *simulate(&qp, &hist, 4.0, h).unwrap().y.last().unwrap();
        let (a, b, c) = (y(0.04), y(0.02), y(0.01));
        let order = ((a - b) / (b - c)).abs().log2();
        assert!(order >= 3.5, "{order}");
    }

    #[test]
    fn linear_in_history() {
        let qp = oscillator(-2.0 / E);
        let a = simulate(&qp, &HistorySpec::Constant { value: 0.1 }, 10.0, 0.01).unwrap();
        let b = simulate(&qp, &HistorySpec::Constant { value: 0.2 }, 10.0, 0.01).unwrap();
        assert!(a.y.iter().zip(&b.y).all(|(x, y)| 2.0 * x == *y));
    }

    #[test]
    fn csv_export() {
        let r = simulate(&oscillator(0.0), &HistorySpec::Constant { value: 1.0 }, 1.0, 0.1).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("t,y\n0,1\n"));
        assert_eq!(csv.lines().count(), 12);
    }
}
