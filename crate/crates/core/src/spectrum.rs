//! Characteristic roots in a rectangular window, certified by the argument
//! principle, plus dominance certificates and delay-sensitivity sweeps.
//!
//! Roots are located by sampling `Δ` on a grid over the upper half of the
//! window, refining candidates with Newton's method and clustering the
//! results. The total count (conjugates included) must equal the winding
//! number of `Δ` along the window boundary; a mismatch triggers one grid
//! refinement and then an error.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precise;
use crate::quasipoly::{Kind, Quasipolynomial};
use crate::roots1d::scan_roots;

/// Contour samples with `|Δ| < CONTOUR_SAFETY·scale` are treated as hitting a root.
/// Compared against the extended-precision value.
pub const CONTOUR_SAFETY: f64 = 1e-24;
/// Below this relative size the double-precision value is recomputed in extended precision.
const ESCALATE_BELOW: f64 = 1e-10;
/// Newton stopping tolerance on the relative residual.
pub const NEWTON_TOLERANCE: f64 = 1e-12;
pub const NEWTON_MAX_ITERATIONS: usize = 50;
/// Largest relative residual for a reported root.
pub const ROOT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_GRID: (usize, usize) = (400, 400);
/// Distance kept between a neutral window and the asymptotic root chain.
pub const NEUTRAL_MARGIN: f64 = 1e-2;

const NUDGES: [f64; 3] = [1e-6, 1e-5, 1e-4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub x_min: f64,
    pub x_max: f64,
    /// Half-height; the window is symmetric about the real axis.
    pub y_max: f64,
}

impl SpectralWindow {
    pub fn new(x_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && y_max.is_finite()) {
            return Err(Error::NonFiniteArgument);
        }
        if x_min >= x_max || y_max <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "window needs x_min < x_max and y_max > 0, got [{x_min}, {x_max}] x {y_max}"
            )));
        }
        Ok(Self { x_min, x_max, y_max })
    }

    fn contains(&self, s: Complex64) -> bool {
        s.re >= self.x_min && s.re <= self.x_max && s.im.abs() <= self.y_max
    }

    fn grown(&self, d: f64) -> Self {
        Self { x_min: self.x_min - d, x_max: self.x_max + d, y_max: self.y_max + d }
    }
}

/// A root (or a tight cluster counted with multiplicity) with `im ≥ 0`;
/// the conjugate is implied when `im > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootEstimate {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
    /// `|Δ(value)| / scale`.
    pub residual: f64,
}

impl RootEstimate {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn is_real(&self) -> bool {
        self.im == 0.0
    }

    /// Multiplicity including the implied conjugate.
    pub fn weight(&self) -> usize {
        if self.is_real() {
            self.multiplicity
        } else {
            2 * self.multiplicity
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// The window actually searched (neutral windows may be clipped).
    pub window: SpectralWindow,
    /// Sorted by decreasing real part.
    pub roots: Vec<RootEstimate>,
    /// Largest real part among the located roots; `-inf` when there are none.
    #[serde(with = "finite_or_null")]
    pub abscissa: f64,
    pub certified_count: usize,
}

impl Spectrum {
    /// `re,im,multiplicity,residual` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,multiplicity,residual\n");
        for r in &self.roots {
            out.push_str(&format!("{},{},{},{}\n", r.re, r.im, r.multiplicity, r.residual));
        }
        out
    }
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

fn eval(qp: &Quasipolynomial, s: Complex64, k: usize) -> (Complex64, f64) {
    let e = qp.derivative_unchecked(s, k);
    (e.value, e.scale)
}

fn relative(value: Complex64, scale: f64) -> f64 {
    if scale > 0.0 {
        value.norm() / scale
    } else {
        value.norm()
    }
}

/// Clips the window for neutral type and rejects unbounded root chains.
fn admissible_window(qp: &Quasipolynomial, window: &SpectralWindow) -> Result<SpectralWindow> {
    if qp.classify() == Kind::Retarded {
        return Ok(*window);
    }
    let bn = qp.b()[qp.n()].abs();
    if bn >= 1.0 {
        return Err(Error::NeutralChainUnbounded(bn));
    }
    if bn == 0.0 {
        return Ok(*window);
    }
    let chain = bn.ln() / qp.tau();
    let x_min = window.x_min.max(chain + NEUTRAL_MARGIN);
    SpectralWindow::new(x_min, window.x_max, window.y_max)
}

/// Winding number of `Δ` along the boundary of the window (counter-clockwise),
/// i.e. the number of roots inside counted with multiplicity.
pub fn count_roots(qp: &Quasipolynomial, window: &SpectralWindow) -> Result<i64> {
    let size = 1.0 + window.x_max.abs().max(window.x_min.abs()).max(window.y_max);
    let mut result = winding_rectangle(qp, window);
    // a root of multiplicity μ keeps |Δ| tiny over a distance ~ safety^{1/μ}
    for nudge in NUDGES {
        if result != Err(Error::ContourThroughRoot) {
            break;
        }
        result = winding_rectangle(qp, &window.grown(nudge * size));
    }
    result
}

fn winding_rectangle(qp: &Quasipolynomial, w: &SpectralWindow) -> Result<i64> {
    let corners = [
        Complex64::new(w.x_min, -w.y_max),
        Complex64::new(w.x_max, -w.y_max),
        Complex64::new(w.x_max, w.y_max),
        Complex64::new(w.x_min, w.y_max),
    ];
    let path: Vec<(Complex64, Complex64)> = (0..4).map(|i| (corners[i], corners[(i + 1) % 4])).collect();
    winding_along(qp, &path)
}

/// Total phase change of `Δ` along a closed chain of straight segments, in turns.
///
/// A segment is split until its phase step is below π/4 and its length is
/// below half the Newton distance `|Δ/Δ'|` at both ends, so root clusters
/// close to the contour are not stepped over.
fn winding_along(qp: &Quasipolynomial, path: &[(Complex64, Complex64)]) -> Result<i64> {
    const INITIAL_PIECES: usize = 64;
    let mut total = 0.0;
    for &(from, to) in path {
        let edge = Edge { qp, from, to, length: (to - from).norm() };
        let mut prev = edge.sample(0.0)?;
        for k in 1..=INITIAL_PIECES {
            let next = edge.sample(k as f64 / INITIAL_PIECES as f64)?;
            total += edge.phase_change(prev, next, 0)?;
            prev = next;
        }
    }
    let turns = total / (2.0 * PI);
    Ok(turns.round() as i64)
}

#[derive(Clone, Copy)]
struct ContourSample {
    t: f64,
    value: Complex64,
    reach: f64,
}

struct Edge<'a> {
    qp: &'a Quasipolynomial,
    from: Complex64,
    to: Complex64,
    length: f64,
}

impl Edge<'_> {
    fn sample(&self, t: f64) -> Result<ContourSample> {
        let s = self.from + (self.to - self.from) * t;
        let (value, scale) = eval(self.qp, s, 0);
        if !value.is_finite() {
            return Err(Error::NonFiniteArgument);
        }
        let value = if relative(value, scale) >= ESCALATE_BELOW {
            value
        } else {
            let v = precise::evaluate(self.qp, s);
            if relative(v, scale) < CONTOUR_SAFETY {
                return Err(Error::ContourThroughRoot);
            }
            v
        };
        let (d, _) = eval(self.qp, s, 1);
        let reach = if d.norm() > 0.0 { value.norm() / d.norm() } else { f64::INFINITY };
        Ok(ContourSample { t, value, reach })
    }

    fn phase_change(&self, a: ContourSample, b: ContourSample, depth: usize) -> Result<f64> {
        let step = (b.value / a.value).arg();
        let h = self.length * (b.t - a.t);
        if step.abs() < PI / 4.0 && h <= 0.5 * a.reach.min(b.reach) {
            return Ok(step);
        }
        if depth > 60 {
            return Err(Error::ContourThroughRoot);
        }
        let m = self.sample(0.5 * (a.t + b.t))?;
        Ok(self.phase_change(a, m, depth + 1)? + self.phase_change(m, b, depth + 1)?)
    }
}

/// Number of roots inside a circle, by the same phase-continuation scheme.
fn count_in_disc(qp: &Quasipolynomial, centre: Complex64, radius: f64) -> Result<i64> {
    const SIDES: usize = 32;
    let vertices: Vec<Complex64> = (0..SIDES)
        .map(|k| centre + Complex64::from_polar(radius, 2.0 * PI * k as f64 / SIDES as f64))
        .collect();
    let path: Vec<_> = (0..SIDES).map(|k| (vertices[k], vertices[(k + 1) % SIDES])).collect();
    winding_along(qp, &path)
}

/// Newton's method on `Δ/Δ'`, which converges quadratically to roots of any
/// multiplicity. Steps are halved while the residual grows.
fn newton(qp: &Quasipolynomial, start: Complex64, real_only: bool) -> Option<(Complex64, f64)> {
    let mut s = start;
    let (mut v, sc) = eval(qp, s, 0);
    let mut res = relative(v, sc);
    for _ in 0..NEWTON_MAX_ITERATIONS {
        if v.norm() == 0.0 {
            break;
        }
        let (d, _) = eval(qp, s, 1);
        let (dd, _) = eval(qp, s, 2);
        let denom = d * d - v * dd;
        let mut step = if denom.norm() > 0.0 && denom.is_finite() {
            v * d / denom
        } else if d.norm() > 0.0 {
            v / d
        } else {
            return None;
        };
        if real_only {
            step.im = 0.0;
        }
        let mut accepted = false;
        for _ in 0..8 {
            let cand = s - step;
            let (cv, csc) = eval(qp, cand, 0);
            let cres = relative(cv, csc);
            if cv.is_finite() && cres <= res {
                s = cand;
                v = cv;
                res = cres;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || (res <= NEWTON_TOLERANCE && step.norm() <= 1e-13 * (1.0 + s.norm())) {
            break;
        }
    }
    (res <= ROOT_TOLERANCE && s.is_finite()).then_some((s, res))
}

/// Newton on `Δ^{(μ-1)}`, whose root is simple at a root of multiplicity `μ`.
fn polish_multiple(qp: &Quasipolynomial, start: Complex64, multiplicity: usize, real_only: bool) -> Complex64 {
    let k = multiplicity - 1;
    let mut s = start;
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let (v, _) = eval(qp, s, k);
        let (d, _) = eval(qp, s, k + 1);
        if d.norm() == 0.0 || !d.is_finite() {
            break;
        }
        let mut step = v / d;
        if real_only {
            step.im = 0.0;
        }
        s -= step;
        if step.norm() <= 1e-15 * (1.0 + s.norm()) {
            break;
        }
    }
    s
}

fn cluster_radius(s: Complex64) -> f64 {
    1e-3 * (1.0 + s.norm())
}

/// Locates and certifies all roots in the window with the default grid.
pub fn compute_spectrum(qp: &Quasipolynomial, window: &SpectralWindow) -> Result<Spectrum> {
    compute_spectrum_with_grid(qp, window, DEFAULT_GRID)
}

pub fn compute_spectrum_with_grid(qp: &Quasipolynomial, window: &SpectralWindow, grid: (usize, usize)) -> Result<Spectrum> {
    if grid.0 < 2 || grid.1 < 2 {
        return Err(Error::InvalidParameter("spectrum grid needs at least 2 x 2 samples".into()));
    }
    let window = admissible_window(qp, window)?;
    let certified = count_roots(qp, &window)?;
    let mut last = 0;
    for refinement in [1, 2] {
        let roots = locate(qp, &window, (grid.0 * refinement, grid.1 * refinement))?;
        let located: usize = roots.iter().map(RootEstimate::weight).sum();
        if located as i64 == certified {
            let abscissa = roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max);
            return Ok(Spectrum { window, roots, abscissa, certified_count: located });
        }
        last = located as i64;
    }
    Err(Error::CertificationFailed { winding: certified, located: last })
}

fn locate(qp: &Quasipolynomial, w: &SpectralWindow, (nx, ny): (usize, usize)) -> Result<Vec<RootEstimate>> {
    let xs: Vec<f64> = (0..nx).map(|i| w.x_min + (w.x_max - w.x_min) * i as f64 / (nx - 1) as f64).collect();
    let ys: Vec<f64> = (0..ny).map(|j| w.y_max * j as f64 / (ny - 1) as f64).collect();
    let samples: Vec<Vec<(Complex64, f64)>> = ys
        .par_iter()
        .map(|&y| xs.iter().map(|&x| eval(qp, Complex64::new(x, y), 0)).collect())
        .collect();

    let mut candidates: Vec<Complex64> = Vec::new();
    let sgn = |v: f64| v > 0.0;
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let corners = [samples[j][i].0, samples[j][i + 1].0, samples[j + 1][i].0, samples[j + 1][i + 1].0];
            let re_change = corners.iter().any(|c| sgn(c.re)) && corners.iter().any(|c| !sgn(c.re));
            let im_change = corners.iter().any(|c| sgn(c.im)) && corners.iter().any(|c| !sgn(c.im));
            if re_change && im_change {
                candidates.push(Complex64::new(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])));
            }
        }
    }
    // local minima of |Δ|/scale catch multiple roots and near-tangent zero curves
    for j in 0..ny {
        for i in 0..nx {
            let here = relative(samples[j][i].0, samples[j][i].1);
            let mut is_min = true;
            'nb: for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= nx as i64 || jj >= ny as i64 {
                        continue;
                    }
                    let (v, sc) = samples[jj as usize][ii as usize];
                    if relative(v, sc) < here {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                candidates.push(Complex64::new(xs[i], ys[j]));
            }
        }
    }
    // real axis, where Im Δ vanishes identically
    let real_part = |x: f64| {
        let (v, sc) = eval(qp, Complex64::new(x, 0.0), 0);
        Some((v.re, sc))
    };
    let real_roots = scan_roots(&real_part, w.x_min, w.x_max, 4 * nx, NEWTON_TOLERANCE);
    candidates.extend(real_roots.iter().map(|&x| Complex64::new(x, 0.0)));

    let mut found: Vec<Complex64> = candidates
        .par_iter()
        .filter_map(|&c| {
            let (s, _) = newton(qp, c, c.im == 0.0)?;
            let s = if s.im.abs() <= 1e-7 * (1.0 + s.norm()) {
                match newton(qp, Complex64::new(s.re, 0.0), true) {
                    Some((r, _)) => Complex64::new(r.re, 0.0),
                    None => s,
                }
            } else {
                s
            };
            let s = Complex64::new(s.re, s.im.abs());
            w.contains(s).then_some(s)
        })
        .collect();
    found.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    // single-linkage clustering
    let mut parent: Vec<usize> = (0..found.len()).collect();
    fn root_of(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..found.len() {
        for j in i + 1..found.len() {
            if found[j].re - found[i].re > cluster_radius(found[i]) {
                break;
            }
            if (found[j] - found[i]).norm() <= cluster_radius(found[i]) {
                let (ri, rj) = (root_of(&mut parent, i), root_of(&mut parent, j));
                parent[rj] = ri;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<Complex64>> = Default::default();
    for i in 0..found.len() {
        let r = root_of(&mut parent, i);
        groups.entry(r).or_default().push(found[i]);
    }

    let mut roots: Vec<(Complex64, f64)> = Vec::new();
    for members in groups.into_values() {
        let mut centre = members.iter().sum::<Complex64>() / members.len() as f64;
        let spread = members.iter().map(|s| (s - centre).norm()).fold(0.0, f64::max);
        if members.iter().all(|s| s.im == 0.0) || centre.im < cluster_radius(centre) {
            centre.im = 0.0;
        }
        let radius = cluster_radius(centre) + spread;
        if roots.iter().any(|&(c, r)| (c - centre).norm() <= r.max(radius)) {
            continue;
        }
        roots.push((centre, radius));
    }
    let mut roots: Vec<RootEstimate> = roots
        .into_iter()
        .map(|(centre, radius)| -> Result<Option<RootEstimate>> {
            let count = count_in_disc(qp, centre, radius).or_else(|_| count_in_disc(qp, centre, 1.5 * radius))?;
            if count <= 0 {
                return Ok(None);
            }
            let multiplicity = count as usize;
            let mut centre = centre;
            if multiplicity > 1 {
                let p = polish_multiple(qp, centre, multiplicity, centre.im == 0.0);
                if (p - centre).norm() <= radius {
                    centre = p;
                }
            }
            let (v, sc) = eval(qp, centre, 0);
            Ok(Some(RootEstimate { re: centre.re, im: centre.im, multiplicity, residual: relative(v, sc) }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    Ok(roots)
}

/// `Y` such that every root with `Re s ≥ x` has `|s| ≤ Y` (hence `|Im s| ≤ Y`).
///
/// Largest positive solution of `rⁿ = Σ|a_k| r^k + e^{-τx} Σ|b_k| r^k`.
pub fn imaginary_bound(qp: &Quasipolynomial, x: f64) -> Result<f64> {
    if qp.classify() == Kind::Neutral {
        return Err(Error::BoundUnavailableForNeutral);
    }
    if !x.is_finite() {
        return Err(Error::NonFiniteArgument);
    }
    let n = qp.n();
    let e = (-qp.tau() * x).exp();
    let coeffs: Vec<f64> = (0..n)
        .map(|k| qp.a()[k].abs() + qp.b().get(k).map_or(0.0, |b| e * b.abs()))
        .collect();
    let total: f64 = coeffs.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    if !total.is_finite() {
        return Err(Error::InvalidParameter(format!("envelope overflows at x = {x}")));
    }
    // rⁿ - Σ c_k r^k has a single positive root; it lies below max(1, Σc_k)
    let excess = |r: f64| r.powi(n as i32) - coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c);
    let (mut lo, mut hi) = (0.0, total.max(1.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Outcome of a dominance check: no roots in the certified region right of `s₀ + ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceCertificate {
    pub dominant: bool,
    /// The region whose boundary winding number was computed.
    pub window: SpectralWindow,
    pub winding_number: i64,
    pub imaginary_bound: f64,
}

/// Window enclosing every root with `Re s ≥ x`.
pub fn right_region(qp: &Quasipolynomial, x: f64) -> Result<SpectralWindow> {
    let y = imaginary_bound(qp, x)?;
    let outer = y + 1.0;
    SpectralWindow::new(x, outer.max(x + 1.0), outer)
}

/// Certifies that no root lies strictly right of `s₀ + ε`.
pub fn check_dominance(qp: &Quasipolynomial, s0: f64, epsilon: f64) -> Result<DominanceCertificate> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let x = s0 + epsilon;
    let y = imaginary_bound(qp, x)?;
    let window = right_region(qp, x)?;
    let winding_number = count_roots(qp, &window)?;
    Ok(DominanceCertificate { dominant: winding_number == 0, window, winding_number, imaginary_bound: y })
}

/// One tracked root at one delay value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub re: f64,
    pub im: f64,
    /// Residual met `ROOT_TOLERANCE` within the iteration budget.
    pub converged: bool,
    /// Left the disc of radius `10(1+|s₀|)` around `s₀`; frozen afterwards.
    pub diverged: bool,
}

impl BranchPoint {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTrace {
    pub taus: Vec<f64>,
    /// `branches[k]` holds the `m+2` tracked roots at `taus[k]`.
    pub branches: Vec<Vec<BranchPoint>>,
    pub step: f64,
    pub newton_iterations: usize,
    /// Index of the delay nearest the design value, where tracking starts.
    pub seed_index: usize,
}

impl SensitivityTrace {
    /// `tau,branch_index,re,im,converged` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,branch_index,re,im,converged\n");
        for (tau, row) in self.taus.iter().zip(&self.branches) {
            for (j, p) in row.iter().enumerate() {
                out.push_str(&format!("{},{},{},{},{}\n", tau, j, p.re, p.im, p.converged));
            }
        }
        out
    }
}

/// Follows the `m+2` roots born from the multiple root at `s₀` while the delay
/// moves over `[τ*(1-span), τ*(1+span)]` with `b` held fixed.
///
/// All branches are updated together with the Aberth correction, so
/// coincident starting points separate instead of collapsing onto one root.
pub fn sensitivity_sweep(
    qp: &Quasipolynomial,
    s0: f64,
    span: f64,
    steps: usize,
    newton_iterations: usize,
) -> Result<SensitivityTrace> {
    if !(span > 0.0 && span < 1.0) {
        return Err(Error::InvalidParameter(format!("span must lie in (0, 1), got {span}")));
    }
    if steps < 2 {
        return Err(Error::InvalidParameter("steps must be at least 2".into()));
    }
    if newton_iterations == 0 {
        return Err(Error::InvalidParameter("newton_iterations must be positive".into()));
    }
    if !s0.is_finite() {
        return Err(Error::NonFiniteArgument);
    }
    let tau_star = qp.tau();
    let lo = tau_star * (1.0 - span);
    let step = 2.0 * span * tau_star / (steps - 1) as f64;
    let taus: Vec<f64> = (0..steps).map(|k| lo + step * k as f64).collect();
    let seed_index = ((tau_star - lo) / step).round() as usize;
    let count = qp.m() + 2;
    let r = 1e-3 * (1.0 + s0.abs());
    let escape = 10.0 * (1.0 + s0.abs());
    let centre = Complex64::new(s0, 0.0);

    let seeds: Vec<BranchPoint> = (0..count)
        .map(|j| {
            let z = centre + Complex64::from_polar(r, 2.0 * PI * j as f64 / count as f64);
            BranchPoint { re: z.re, im: z.im, converged: false, diverged: false }
        })
        .collect();

    let mut branches: Vec<Vec<BranchPoint>> = vec![Vec::new(); steps];
    let track = |tau: f64, start: &[BranchPoint]| -> Result<Vec<BranchPoint>> {
        let q = qp.with_tau(tau)?;
        Ok(aberth(&q, start, newton_iterations, centre, escape))
    };
    branches[seed_index] = track(taus[seed_index], &seeds)?;
    for k in seed_index + 1..steps {
        branches[k] = track(taus[k], &branches[k - 1])?;
    }
    for k in (0..seed_index).rev() {
        branches[k] = track(taus[k], &branches[k + 1])?;
    }
    Ok(SensitivityTrace { taus, branches, step, newton_iterations, seed_index })
}

fn aberth(qp: &Quasipolynomial, start: &[BranchPoint], iterations: usize, centre: Complex64, escape: f64) -> Vec<BranchPoint> {
    let mut z: Vec<Complex64> = start.iter().map(BranchPoint::value).collect();
    let mut diverged: Vec<bool> = start.iter().map(|p| p.diverged).collect();
    let residual = |s: Complex64| {
        let (v, sc) = eval(qp, s, 0);
        relative(v, sc)
    };
    for _ in 0..iterations {
        if (0..z.len()).all(|j| diverged[j] || residual(z[j]) <= NEWTON_TOLERANCE) {
            break;
        }
        for j in 0..z.len() {
            if diverged[j] {
                continue;
            }
            let (v, sc) = eval(qp, z[j], 0);
            if relative(v, sc) <= NEWTON_TOLERANCE * 1e-3 {
                continue;
            }
            let (d, _) = eval(qp, z[j], 1);
            if d.norm() == 0.0 {
                continue;
            }
            let ratio = v / d;
            let repulsion: Complex64 = (0..z.len())
                .filter(|&k| k != j && !diverged[k])
                .map(|k| {
                    let diff = z[j] - z[k];
                    if diff.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        diff.inv()
                    }
                })
                .sum();
            let denom = Complex64::new(1.0, 0.0) - ratio * repulsion;
            let correction = if denom.norm() > 1e-300 { ratio / denom } else { ratio };
            if correction.is_finite() {
                z[j] -= correction;
            }
            if !z[j].is_finite() || (z[j] - centre).norm() > escape {
                diverged[j] = true;
            }
        }
    }
    z.iter()
        .zip(&diverged)
        .map(|(&s, &d)| BranchPoint {
            re: s.re,
            im: s.im,
            converged: !d && residual(s) <= ROOT_TOLERANCE,
            diverged: d,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn designed_oscillator() -> Quasipolynomial {
        Quasipolynomial::new(vec![1.0, 0.0], vec![-2.0 / E, 0.0], 1.0).unwrap()
    }

    #[test]
    fn polynomial_case() {
        let qp = Quasipolynomial::new(vec![1.0, 0.0], vec![0.0, 0.0], 1.0).unwrap();
        let w = SpectralWindow::new(-1.0, 1.0, 2.0).unwrap();
        assert_eq!(count_roots(&qp, &w).unwrap(), 2);
        let sp = compute_spectrum(&qp, &w).unwrap();
        assert_eq!(sp.certified_count, 2);
        assert_eq!(sp.roots.len(), 1);
        assert!((sp.roots[0].value() - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn oscillator_triple_root_is_rightmost() {
        let qp = designed_oscillator();
        let w = SpectralWindow::new(-5.0, 1.0, 20.0).unwrap();
        let sp = compute_spectrum(&qp, &w).unwrap();
        let top = sp.roots[0];
        assert_eq!(top.multiplicity, 3);
        assert!(top.is_real());
        assert!((top.re + 1.0).abs() < 1e-6, "{top:?}");
        assert!(sp.roots.iter().skip(1).all(|r| r.re <= -1.0 + 1e-3));
        assert_relative_eq!(sp.abscissa, -1.0, epsilon = 1e-6);
        assert!(sp.roots.iter().all(|r| r.residual <= ROOT_TOLERANCE));
    }

    fn designed(a: &[f64], m: usize, s0: f64, tau_guess: f64) -> Quasipolynomial {
        let taus = crate::admissibility::solve_for_tau(a, m, s0).unwrap();
        let tau = taus.into_iter().min_by(|x, y| (x - tau_guess).abs().total_cmp(&(y - tau_guess).abs())).unwrap();
        crate::placement::solve_control_mid(a, m, tau, s0).unwrap().qp
    }

    #[test]
    fn pendulum_and_wind_tunnel_designs_are_dominant() {
        for (a, m, s0, tau, mult) in [
            (vec![-5.886, 0.0], 1, -5.0, 0.112, 3),
            (vec![5.517, 12.301, 3.385], 2, -2.94675, 0.414, 4),
        ] {
            let qp = designed(&a, m, s0, tau);
            let y = imaginary_bound(&qp, s0 - 1e-3).unwrap();
            let w = SpectralWindow::new(s0 - 1e-3, y + 1.0, y + 1.0).unwrap();
            assert_eq!(count_roots(&qp, &w).unwrap(), mult as i64);
            assert!(check_dominance(&qp, s0, 1e-3).unwrap().dominant);
            let sp = compute_spectrum(&qp, &SpectralWindow::new(3.0 * s0, 1.0, 60.0).unwrap()).unwrap();
            assert_eq!(sp.roots[0].multiplicity, mult, "{:?}", &sp.roots[..3]);
            assert!((sp.roots[0].re - s0).abs() < 1e-4);
        }
    }

    #[test]
    fn first_order_double_root_at_origin() {
        let qp = Quasipolynomial::new(vec![-1.0], vec![1.0], 1.0).unwrap();
        let sp = compute_spectrum(&qp, &SpectralWindow::new(-1.0, 1.0, 5.0).unwrap()).unwrap();
        assert_eq!(sp.roots[0].multiplicity, 2);
        assert!(sp.roots[0].value().norm() < 1e-7);
        assert_eq!(count_roots(&qp, &SpectralWindow::new(1e-3, 1.0, 5.0).unwrap()).unwrap(), 0);
    }

    #[test]
    fn small_box_around_triple_root() {
        let qp = designed_oscillator();
        let w = SpectralWindow::new(-1.0 - 1e-2, -1.0 + 1e-2, 1e-2).unwrap();
        assert_eq!(count_roots(&qp, &w).unwrap(), 3);
    }

    #[test]
    fn no_roots_right_of_origin() {
        let qp = designed_oscillator();
        let y = imaginary_bound(&qp, 0.0).unwrap();
        assert_eq!(count_roots(&qp, &SpectralWindow::new(0.0, 5.0, y).unwrap()).unwrap(), 0);
    }

    #[test]
    fn bound_for_polynomial() {
        let qp = Quasipolynomial::new(vec![1.0, 0.0], vec![0.0, 0.0], 1.0).unwrap();
        for x in [-3.0, 0.0, 2.0] {
            let y = imaginary_bound(&qp, x).unwrap();
            assert!((1.0..=2.0).contains(&y), "{y}");
        }
    }

    #[test]
    fn bound_covers_found_roots() {
        let qp = designed_oscillator();
        let y = imaginary_bound(&qp, -1.0).unwrap();
        assert!(y.is_finite());
        let sp = compute_spectrum(&qp, &SpectralWindow::new(-1.0 - 1e-3, 3.0, 4.0 * y).unwrap()).unwrap();
        assert!(sp.roots.iter().all(|r| r.re < -1.0 + 1e-6 || r.im.abs() <= y));
    }

    #[test]
    fn bound_rejects_neutral() {
        let qp = Quasipolynomial::new(vec![1.0], vec![0.5, 0.5], 1.0).unwrap();
        assert_eq!(imaginary_bound(&qp, 0.0), Err(Error::BoundUnavailableForNeutral));
    }

    #[test]
    fn dominance() {
        let cert = check_dominance(&designed_oscillator(), -1.0, 1e-3).unwrap();
        assert!(cert.dominant);
        let open = Quasipolynomial::new(vec![1.0, 0.0], vec![0.0, 0.0], 1.0).unwrap();
        let cert = check_dominance(&open, -1.0, 1e-3).unwrap();
        assert!(!cert.dominant);
        assert_eq!(cert.winding_number, 2);
    }

    #[test]
    fn neutral_windows() {
        let unbounded = Quasipolynomial::new(vec![1.0], vec![0.0, 1.5], 1.0).unwrap();
        let w = SpectralWindow::new(-2.0, 1.0, 10.0).unwrap();
        assert!(matches!(compute_spectrum(&unbounded, &w), Err(Error::NeutralChainUnbounded(_))));

        // chain at Re s = ln(0.5) ≈ -0.693; window gets clipped to its right
        let qp = Quasipolynomial::new(vec![2.0], vec![0.3, 0.5], 1.0).unwrap();
        let sp = compute_spectrum(&qp, &w).unwrap();
        assert!(sp.window.x_min > 0.5f64.ln());
        assert_eq!(sp.certified_count as i64, count_roots(&qp, &sp.window).unwrap());
    }

    #[test]
    fn contour_nudged_off_a_root() {
        // ±i lie exactly on the left edge
        let qp = Quasipolynomial::new(vec![1.0, 0.0], vec![0.0, 0.0], 1.0).unwrap();
        let w = SpectralWindow::new(0.0, 1.0, 2.0).unwrap();
        assert_eq!(winding_rectangle(&qp, &w), Err(Error::ContourThroughRoot));
        assert_eq!(count_roots(&qp, &w).unwrap(), 2);
    }

    #[test]
    fn sweep_starts_at_the_triple_root() {
        let qp = designed_oscillator();
        let trace = sensitivity_sweep(&qp, -1.0, 0.2, 41, 50).unwrap();
        assert_eq!(trace.taus.len(), 41);
        assert_eq!(trace.seed_index, 20);
        for p in &trace.branches[20] {
            assert!((p.value() + 1.0).norm() < 1e-3, "{p:?}");
        }
        for (k, (row, tau)) in trace.branches.iter().zip(&trace.taus).enumerate() {
            assert_eq!(row.len(), 3);
            // the triple root itself is only resolved to about the cube root of the residual
            let tol = if k == trace.seed_index { 1e-3 } else { 1e-6 };
            let q = qp.with_tau(*tau).unwrap();
            for p in row.iter().filter(|p| p.converged) {
                let ev = q.evaluate(p.value()).unwrap();
                assert!(ev.value.norm() <= ROOT_TOLERANCE * ev.scale);
            }
            // conjugate-symmetric as a set
            for p in row {
                let mirrored = row.iter().any(|q| (q.value() - p.value().conj()).norm() <= tol);
                assert!(mirrored, "tau {tau}: {row:?}");
            }
        }
        assert!(trace.to_csv().starts_with("tau,branch_index,re,im,converged\n"));
    }

    #[test]
    fn sweep_matches_spectrum_locally() {
        let qp = designed_oscillator();
        let trace = sensitivity_sweep(&qp, -1.0, 0.2, 41, 50).unwrap();
        for k in [0, 10, 15, 30, 40] {
            let q = qp.with_tau(trace.taus[k]).unwrap();
            let sp = compute_spectrum(&q, &SpectralWindow::new(-12.0, 0.5, 25.0).unwrap()).unwrap();
            for p in trace.branches[k].iter().filter(|p| p.converged) {
                let v = Complex64::new(p.re, p.im.abs());
                let d = sp.roots.iter().map(|r| (r.value() - v).norm()).fold(f64::INFINITY, f64::min);
                assert!(d <= 1e-6, "tau {}: {p:?} vs {:?}", trace.taus[k], sp.roots);
            }
        }
    }

    #[test]
    fn sweep_validates_settings() {
        let qp = designed_oscillator();
        assert!(sensitivity_sweep(&qp, -1.0, 1.5, 10, 5).is_err());
        assert!(sensitivity_sweep(&qp, -1.0, 0.2, 1, 5).is_err());
        assert!(sensitivity_sweep(&qp, -1.0, 0.2, 10, 0).is_err());
    }

    #[test]
    fn csv_header() {
        let qp = designed_oscillator();
        let sp = compute_spectrum(&qp, &SpectralWindow::new(-2.0, 1.0, 3.0).unwrap()).unwrap();
        let csv = sp.to_csv();
        assert!(csv.starts_with("re,im,multiplicity,residual\n"));
        assert_eq!(csv.lines().count(), 1 + sp.roots.len());
    }
}
