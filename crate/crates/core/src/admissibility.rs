//! Where in the `(s₀, τ)` plane a root of multiplicity `m+2` can be assigned
//! when the plant coefficients are fixed.
//!
//! For each pair the delayed coefficients are eliminated with the `m+1`
//! conditions `Δ⁽ᵏ⁾(s₀) = 0`, leaving the scalar relation
//! `F(s₀, τ) = Δ⁽ᵐ⁺¹⁾(s₀)`. Its zero set is the admissible set: generically a
//! union of curves. After the elimination `F` is a polynomial in `(s₀, τ)`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::{control_mid_core, RelationValue};
use crate::roots1d::{refine_bracket, scan_roots, Sampled};

/// Largest grid resolution per axis unless the caller lifts the limit.
pub const MAX_GRID_RESOLUTION: usize = 2000;

/// Relative tolerance on `F` for refined curve vertices and 1-D solutions.
pub const CURVE_TOLERANCE: f64 = 1e-10;

/// Default sample count for the 1-D solves.
pub const DEFAULT_SAMPLES: usize = 2048;

/// `F(s₀, τ)`; zero iff some real `b` makes `s₀` a root of multiplicity `≥ m+2`.
pub fn relation_value(a: &[f64], m: usize, s0: f64, tau: f64) -> Result<RelationValue> {
    validate(a, m)?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    if !s0.is_finite() {
        return Err(Error::NonFiniteArgument);
    }
    Ok(control_mid_core(a, m, tau, s0)?.1)
}

fn validate(a: &[f64], m: usize) -> Result<()> {
    if a.is_empty() || m > a.len() {
        return Err(Error::InvalidParameter(format!(
            "need n >= 1 and m <= n, got n = {}, m = {m}",
            a.len()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteArgument);
    }
    Ok(())
}

fn sampled(a: &[f64], m: usize, s0: f64, tau: f64) -> Sampled {
    control_mid_core(a, m, tau, s0)
        .ok()
        .map(|(_, r, _)| (r.value, r.scale))
}

/// An ordered vertex list `(s₀, τ)` tracing `F = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

/// `F` sampled on `[s0_min, 0] × (0, tau_max]` with its zero curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityGrid {
    pub s0_min: f64,
    pub tau_max: f64,
    pub ns0: usize,
    pub ntau: usize,
    /// `values[i][j] = F(s0(i), tau(j))`.
    pub values: Vec<Vec<f64>>,
    pub curves: Vec<Polyline>,
}

impl AdmissibilityGrid {
    /// `s0_min + i·|s0_min|/(ns0-1)`, so the last column is `s₀ = 0`.
    pub fn s0_at(&self, i: usize) -> f64 {
        s0_sample(self.s0_min, self.ns0, i)
    }

    /// `tau_max·(j+1)/ntau`; the delay axis starts one step above zero.
    pub fn tau_at(&self, j: usize) -> f64 {
        tau_sample(self.tau_max, self.ntau, j)
    }

    /// `s0,tau,F` rows, `s₀`-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.ns0 * self.ntau * 32 + 16);
        out.push_str("s0,tau,F\n");
        for i in 0..self.ns0 {
            for j in 0..self.ntau {
                out.push_str(&format!("{},{},{}\n", self.s0_at(i), self.tau_at(j), self.values[i][j]));
            }
        }
        out
    }
}

fn s0_sample(s0_min: f64, ns0: usize, i: usize) -> f64 {
    if i + 1 == ns0 {
        0.0
    } else {
        s0_min - s0_min * i as f64 / (ns0 - 1) as f64
    }
}

fn tau_sample(tau_max: f64, ntau: usize, j: usize) -> f64 {
    tau_max * (j + 1) as f64 / ntau as f64
}

/// Samples `F` and extracts its zero curves with the default resolution cap.
pub fn compute_grid(a: &[f64], m: usize, s0_min: f64, tau_max: f64, ns0: usize, ntau: usize) -> Result<AdmissibilityGrid> {
    compute_grid_with_cap(a, m, s0_min, tau_max, ns0, ntau, Some(MAX_GRID_RESOLUTION))
}

/// As [`compute_grid`], with an explicit cap (`None` lifts it).
pub fn compute_grid_with_cap(
    a: &[f64],
    m: usize,
    s0_min: f64,
    tau_max: f64,
    ns0: usize,
    ntau: usize,
    cap: Option<usize>,
) -> Result<AdmissibilityGrid> {
    validate(a, m)?;
    if !(s0_min.is_finite() && s0_min < 0.0 && tau_max.is_finite() && tau_max > 0.0) {
        return Err(Error::InvalidParameter("need s0_min < 0 < tau_max".into()));
    }
    if ns0 < 2 || ntau < 2 {
        return Err(Error::InvalidParameter("grid resolution must be at least 2".into()));
    }
    if let Some(cap) = cap {
        let requested = ns0.max(ntau);
        if requested > cap {
            return Err(Error::GridTooLarge { requested, cap });
        }
    }

    let values: Vec<Vec<f64>> = (0..ns0)
        .into_par_iter()
        .map(|i| {
            let s0 = s0_sample(s0_min, ns0, i);
            (0..ntau)
                .map(|j| relation_value(a, m, s0, tau_sample(tau_max, ntau, j)).map(|r| r.value))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let curves = zero_curves(a, m, s0_min, tau_max, &values);
    Ok(AdmissibilityGrid { s0_min, tau_max, ns0, ntau, values, curves })
}

/// Grid edge identified by its lower-left node and direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    /// From node `(i, j)` to `(i+1, j)`: constant delay.
    AlongS0(usize, usize),
    /// From node `(i, j)` to `(i, j+1)`: constant `s₀`.
    AlongTau(usize, usize),
}

fn zero_curves(a: &[f64], m: usize, s0_min: f64, tau_max: f64, values: &[Vec<f64>]) -> Vec<Polyline> {
    let ns0 = values.len();
    let ntau = values[0].len();
    let pos = |v: f64| v > 0.0;
    let node = |i: usize, j: usize| (s0_sample(s0_min, ns0, i), tau_sample(tau_max, ntau, j));

    // segments per cell, as pairs of crossed edges
    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for i in 0..ns0 - 1 {
        for j in 0..ntau - 1 {
            let v00 = values[i][j];
            let v10 = values[i + 1][j];
            let v11 = values[i + 1][j + 1];
            let v01 = values[i][j + 1];
            let bottom = Edge::AlongS0(i, j);
            let right = Edge::AlongTau(i + 1, j);
            let top = Edge::AlongS0(i, j + 1);
            let left = Edge::AlongTau(i, j);
            let mut crossed = Vec::with_capacity(4);
            if pos(v00) != pos(v10) {
                crossed.push(bottom);
            }
            if pos(v10) != pos(v11) {
                crossed.push(right);
            }
            if pos(v11) != pos(v01) {
                crossed.push(top);
            }
            if pos(v01) != pos(v00) {
                crossed.push(left);
            }
            match crossed.len() {
                2 => segments.push((crossed[0], crossed[1])),
                4 => {
                    // saddle: the centre sign decides which corners connect
                    let centre = pos(0.25 * (v00 + v10 + v11 + v01));
                    if centre == pos(v00) {
                        segments.push((bottom, right));
                        segments.push((top, left));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                _ => {}
            }
        }
    }
    if segments.is_empty() {
        return Vec::new();
    }

    // refined crossing point per edge
    let mut edges: Vec<Edge> = segments.iter().flat_map(|(x, y)| [*x, *y]).collect();
    edges.sort_by_key(|e| match *e {
        Edge::AlongS0(i, j) => (0, i, j),
        Edge::AlongTau(i, j) => (1, i, j),
    });
    edges.dedup();
    let refined: HashMap<Edge, (f64, f64)> = edges
        .par_iter()
        .map(|&e| {
            let ((s_a, t_a), (s_b, t_b), va, vb) = match e {
                Edge::AlongS0(i, j) => (node(i, j), node(i + 1, j), values[i][j], values[i + 1][j]),
                Edge::AlongTau(i, j) => (node(i, j), node(i, j + 1), values[i][j], values[i][j + 1]),
            };
            let f = |u: f64| sampled(a, m, s_a + u * (s_b - s_a), t_a + u * (t_b - t_a));
            let u = refine_bracket(&f, 0.0, 1.0, va, vb, CURVE_TOLERANCE);
            (e, (s_a + u * (s_b - s_a), t_a + u * (t_b - t_a)))
        })
        .collect();

    // chain segments through shared edges
    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, (x, y)) in segments.iter().enumerate() {
        by_edge.entry(*x).or_default().push(k);
        by_edge.entry(*y).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut curves = Vec::new();
    let other = |k: usize, e: Edge| if segments[k].0 == e { segments[k].1 } else { segments[k].0 };
    let next_segment = |e: Edge, k: usize, used: &[bool]| -> Option<usize> {
        by_edge[&e].iter().copied().find(|&s| s != k && !used[s])
    };

    // open chains start at edges used by a single segment
    let mut starts: Vec<usize> = (0..segments.len())
        .filter(|&k| by_edge[&segments[k].0].len() == 1 || by_edge[&segments[k].1].len() == 1)
        .collect();
    starts.extend(0..segments.len());
    for start in starts {
        if used[start] {
            continue;
        }
        let first_edge = if by_edge[&segments[start].0].len() == 1 {
            segments[start].0
        } else {
            segments[start].1
        };
        let mut chain = vec![first_edge];
        let mut k = start;
        let mut entry = first_edge;
        let mut closed = false;
        loop {
            used[k] = true;
            let exit = other(k, entry);
            chain.push(exit);
            if exit == first_edge {
                closed = true;
                break;
            }
            match next_segment(exit, k, &used) {
                Some(n) => {
                    k = n;
                    entry = exit;
                }
                None => break,
            }
        }
        let points = chain.iter().map(|e| refined[e]).collect();
        curves.push(Polyline { points, closed });
    }
    curves
}

/// Search limits for the 1-D solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Lower end of the `s₀` search; `None` means `-50/τ`.
    pub s0_min: Option<f64>,
    pub tau_max: f64,
    pub samples: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { s0_min: None, tau_max: 10.0, samples: DEFAULT_SAMPLES }
    }
}

/// All `s₀ ≤ 0` with `F(s₀, τ) = 0`, rightmost first.
pub fn solve_for_s0(a: &[f64], m: usize, tau: f64) -> Result<Vec<f64>> {
    solve_for_s0_with(a, m, tau, &SearchOptions::default())
}

pub fn solve_for_s0_with(a: &[f64], m: usize, tau: f64, opts: &SearchOptions) -> Result<Vec<f64>> {
    validate(a, m)?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let lo = opts.s0_min.unwrap_or(-50.0 / tau);
    let f = |s0: f64| sampled(a, m, s0, tau);
    let mut roots = scan_roots(&f, lo, 0.0, opts.samples, CURVE_TOLERANCE);
    roots.reverse();
    Ok(roots)
}

/// All `τ ∈ (0, tau_max]` with `F(s₀, τ) = 0`, smallest first.
pub fn solve_for_tau(a: &[f64], m: usize, s0: f64) -> Result<Vec<f64>> {
    solve_for_tau_with(a, m, s0, &SearchOptions::default())
}

pub fn solve_for_tau_with(a: &[f64], m: usize, s0: f64, opts: &SearchOptions) -> Result<Vec<f64>> {
    validate(a, m)?;
    if !s0.is_finite() {
        return Err(Error::NonFiniteArgument);
    }
    let f = |tau: f64| sampled(a, m, s0, tau);
    let step = opts.tau_max / opts.samples as f64;
    Ok(scan_roots(&f, step, opts.tau_max, opts.samples, CURVE_TOLERANCE))
}

/// Largest delay for which a strictly negative `s₀` of multiplicity `m+2`
/// exists, to within `1e-4`. Returns the search bound when solutions persist
/// up to it and `0` when none exist at all.
pub fn max_stabilizable_tau(a: &[f64], m: usize) -> Result<f64> {
    max_stabilizable_tau_with(a, m, &SearchOptions::default())
}

pub fn max_stabilizable_tau_with(a: &[f64], m: usize, opts: &SearchOptions) -> Result<f64> {
    validate(a, m)?;
    const COARSE: usize = 200;
    let admissible = |tau: f64| -> Result<bool> {
        Ok(solve_for_s0_with(a, m, tau, opts)?.iter().any(|&s| s < 0.0))
    };
    let taus: Vec<f64> = (1..=COARSE).map(|j| opts.tau_max * j as f64 / COARSE as f64).collect();
    let flags: Vec<bool> = taus.par_iter().map(|&t| admissible(t)).collect::<Result<_>>()?;
    let Some(last) = flags.iter().rposition(|&f| f) else {
        // below the first coarse sample
        let mut lo = 0.0;
        let mut hi = taus[0];
        let mut found = false;
        while hi - lo > 1e-4 {
            let mid = 0.5 * (lo + hi);
            if admissible(mid)? {
                lo = mid;
                found = true;
            } else {
                hi = mid;
            }
        }
        return Ok(if found { lo } else { 0.0 });
    };
    if last + 1 == COARSE {
        return Ok(opts.tau_max);
    }
    let (mut lo, mut hi) = (taus[last], taus[last + 1]);
    while hi - lo > 1e-5 {
        let mid = 0.5 * (lo + hi);
        if admissible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const OSC: [f64; 2] = [1.0, 0.0];
    const PENDULUM: [f64; 2] = [-5.886, 0.0];

    /// Hand elimination for (n, m) = (2, 1), P = s² + 1.
    fn oscillator_closed_form(s0: f64, tau: f64) -> f64 {
        tau * tau * (s0 * s0 + 1.0) + 4.0 * tau * s0 + 2.0
    }

    #[test]
    fn relation_at_worked_example_design_points() {
        let r = relation_value(&OSC, 1, -1.0, 1.0).unwrap();
        assert!(r.value.abs() <= 1e-10 * r.scale);
        assert_relative_eq!(relation_value(&OSC, 1, -2.0, 0.5).unwrap().value, -0.75, epsilon = 1e-13);
        let r = relation_value(&PENDULUM, 1, -5.0, 0.11198).unwrap();
        assert!(r.relative() <= 1e-4, "{r:?}");
    }

    #[test]
    fn relation_matches_closed_form_on_a_lattice() {
        for i in 0..20 {
            for j in 1..20 {
                let s0 = -4.0 + 0.21 * i as f64;
                let tau = 0.1 * j as f64;
                let v = relation_value(&OSC, 1, s0, tau).unwrap().value;
                assert_relative_eq!(v, oscillator_closed_form(s0, tau), epsilon = 1e-11, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn oscillator_s0_branches() {
        let r = solve_for_s0(&OSC, 1, 1.0).unwrap();
        assert_eq!(r.len(), 2);
        assert_relative_eq!(r[0], -1.0, epsilon = 1e-9);
        assert_relative_eq!(r[1], -3.0, epsilon = 1e-9);

        let r = solve_for_s0(&OSC, 1, 2f64.sqrt()).unwrap();
        assert_eq!(r.len(), 1, "{r:?}");
        assert_relative_eq!(r[0], -(2f64.sqrt()), epsilon = 1e-6);

        assert!(solve_for_s0(&OSC, 1, 2.0).unwrap().is_empty());
    }

    #[test]
    fn tau_branches() {
        // 19.114τ² - 20τ + 2 = 0
        let disc = (400.0f64 - 8.0 * 19.114).sqrt();
        let expected = [(20.0 - disc) / 38.228, (20.0 + disc) / 38.228];
        let r = solve_for_tau(&PENDULUM, 1, -5.0).unwrap();
        assert_eq!(r.len(), 2);
        assert_relative_eq!(r[0], expected[0], epsilon = 1e-9);
        assert_relative_eq!(r[1], expected[1], epsilon = 1e-9);
        assert!((r[0] - 0.1120).abs() < 1e-3 && (r[1] - 0.9343).abs() < 1e-3);

        let r = solve_for_tau(&[5.517, 12.301, 3.385], 2, -2.94675).unwrap();
        assert!(r.iter().any(|t| (t - 0.4140).abs() < 1e-3), "{r:?}");

        assert!(solve_for_tau(&OSC, 1, 0.0).unwrap().is_empty());
    }

    #[test]
    fn max_delay() {
        let t = max_stabilizable_tau(&OSC, 1).unwrap();
        assert!((t - 2f64.sqrt()).abs() < 1e-3, "{t}");

        assert!(max_stabilizable_tau(&PENDULUM, 1).unwrap() >= 0.9343);

        // n = 1, m = 0, P = s - 1: F = 1 + τ(s₀ - 1), negative root iff τ < 1
        let t = max_stabilizable_tau(&[-1.0], 0).unwrap();
        let brute = (1..=10_000)
            .map(|k| k as f64 * 1e-3)
            .filter(|&tau| 1.0 - 1.0 / tau < 0.0)
            .fold(0.0, f64::max);
        assert!(t.is_finite() && t > 0.0);
        assert!((t - brute).abs() < 2e-3, "{t} vs {brute}");
    }

    #[test]
    fn oscillator_grid_reaches_root_two() {
        let g = compute_grid(&OSC, 1, -4.0, 2.0, 200, 200).unwrap();
        assert!(!g.curves.is_empty());
        let top = g
            .curves
            .iter()
            .flat_map(|c| c.points.iter())
            .map(|p| p.1)
            .fold(0.0, f64::max);
        assert!((top - 2f64.sqrt()).abs() < 1e-2, "{top}");
        for c in &g.curves {
            for &(s0, tau) in &c.points {
                let r = crate::placement::solve_control_mid(&OSC, 1, tau, s0).unwrap();
                let rel = r.relation.unwrap();
                assert!(rel.value.abs() <= 10.0 * CURVE_TOLERANCE * rel.scale);
            }
        }
    }

    #[test]
    fn constant_sign_grid_has_no_curves() {
        // oscillator F > 0 for s₀ ≥ 0
        let g = compute_grid(&OSC, 1, -0.1, 0.3, 20, 20).unwrap();
        assert!(g.values.iter().flatten().all(|v| *v > 0.0));
        assert!(g.curves.is_empty());
    }

    #[test]
    fn pendulum_grid_passes_through_design() {
        let g = compute_grid(&PENDULUM, 1, -10.0, 1.5, 200, 200).unwrap();
        let d = g
            .curves
            .iter()
            .flat_map(|c| c.points.iter())
            .map(|&(s, t)| ((s + 5.0) / 10.0).hypot((t - 0.112) / 1.5))
            .fold(f64::INFINITY, f64::min);
        assert!(d < 1.0 / 200.0, "{d}");
    }

    #[test]
    fn grid_limits() {
        assert!(matches!(
            compute_grid(&OSC, 1, -4.0, 2.0, 2001, 10),
            Err(Error::GridTooLarge { .. })
        ));
        assert!(compute_grid(&OSC, 1, 1.0, 2.0, 10, 10).is_err());
        let g = compute_grid(&OSC, 1, -4.0, 2.0, 4, 3).unwrap();
        let csv = g.to_csv();
        assert!(csv.starts_with("s0,tau,F\n"));
        assert_eq!(csv.lines().count(), 1 + 12);
    }

    #[test]
    fn s0_tau_round_trip() {
        for &tau in &[0.3, 0.7, 1.0, 1.3] {
            for s0 in solve_for_s0(&OSC, 1, tau).unwrap() {
                let taus = solve_for_tau(&OSC, 1, s0).unwrap();
                assert!(taus.iter().any(|t| (t - tau).abs() <= 1e-6 * (1.0 + tau)), "{tau} {s0} {taus:?}");
            }
        }
    }
}
