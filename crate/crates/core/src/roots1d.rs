//! Real root isolation on an interval by sampling, bracketing and tangency detection.

/// A scalar function value with the magnitude scale it should be compared against.
pub(crate) type Sampled = Option<(f64, f64)>;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Refines a sign-change bracket with the Illinois variant of regula falsi,
/// falling back to bisection when progress stalls. Stops once
/// `|f| <= rel_tol * scale` or the bracket collapses to rounding level.
pub(crate) fn refine_bracket<F>(f: &F, mut lo: f64, mut hi: f64, mut flo: f64, mut fhi: f64, rel_tol: f64) -> f64
where
    F: Fn(f64) -> Sampled,
{
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    let mut side = 0i8;
    for iter in 0..200 {
        let width = hi - lo;
        if width.abs() <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1e-300) {
            break;
        }
        let mut x = if iter % 4 == 3 {
            0.5 * (lo + hi)
        } else {
            (lo * fhi - hi * flo) / (fhi - flo)
        };
        if !(x > lo.min(hi) && x < lo.max(hi)) {
            x = 0.5 * (lo + hi);
        }
        let Some((fx, scale)) = f(x) else {
            return 0.5 * (lo + hi);
        };
        if fx == 0.0 || fx.abs() <= rel_tol * scale {
            return x;
        }
        if (fx > 0.0) == (fhi > 0.0) {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        } else {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        }
    }
    0.5 * (lo + hi)
}

/// Extremum of `sign·f` on `[lo, hi]` by golden-section search (minimizes `sign·f`).
fn golden_min<F>(f: &F, sign: f64, mut lo: f64, mut hi: f64) -> Option<(f64, f64, f64)>
where
    F: Fn(f64) -> Sampled,
{
    let eval = |x: f64| f(x).map(|(v, s)| (sign * v, s));
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    for _ in 0..120 {
        if (hi - lo).abs() <= 1e-14 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1.0 < f2.0 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    let (x, (v, s)) = if f1.0 < f2.0 { (x1, f1) } else { (x2, f2) };
    Some((x, sign * v, s))
}

/// All roots of `f` on `[lo, hi]` from `samples` uniform samples (endpoints included).
///
/// Sign changes between neighbours are refined by [`refine_bracket`]. Interior
/// local minima of `|f|` without a sign change are searched for a tangency: if
/// the extremum crosses zero the two resulting brackets are refined, and if it
/// merely touches zero within `rel_tol` it is reported once as a double root.
/// Returned in ascending order.
pub(crate) fn scan_roots<F>(f: &F, lo: f64, hi: f64, samples: usize, rel_tol: f64) -> Vec<f64>
where
    F: Fn(f64) -> Sampled,
{
    let samples = samples.max(3);
    let xs: Vec<f64> = (0..samples)
        .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
        .collect();
    let vals: Vec<Sampled> = xs.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();

    for i in 0..samples {
        let Some((vi, si)) = vals[i] else { continue };
        if vi == 0.0 || vi.abs() <= rel_tol * si {
            roots.push(xs[i]);
            continue;
        }
        if i + 1 < samples {
            if let Some((vn, sn)) = vals[i + 1] {
                let next_is_root = vn == 0.0 || vn.abs() <= rel_tol * sn;
                if !next_is_root && (vi > 0.0) != (vn > 0.0) {
                    roots.push(refine_bracket(f, xs[i], xs[i + 1], vi, vn, rel_tol));
                    continue;
                }
            }
        }
        if i == 0 || i + 1 == samples {
            continue;
        }
        let (Some((vp, _)), Some((vn, _))) = (vals[i - 1], vals[i + 1]) else { continue };
        let same_sign = (vp > 0.0) == (vi > 0.0) && (vi > 0.0) == (vn > 0.0);
        if !(same_sign && vi.abs() <= vp.abs() && vi.abs() < vn.abs()) {
            continue;
        }
        let sign = vi.signum();
        let Some((xm, vm, sm)) = golden_min(f, sign, xs[i - 1], xs[i + 1]) else { continue };
        if (vm > 0.0) != (vi > 0.0) && vm.abs() > rel_tol * sm {
            roots.push(refine_bracket(f, xs[i - 1], xm, vp, vm, rel_tol));
            roots.push(refine_bracket(f, xm, xs[i + 1], vm, vn, rel_tol));
        } else if vm.abs() <= rel_tol * sm {
            roots.push(xm);
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + a.abs()));
    roots
}
