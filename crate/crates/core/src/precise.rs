//! Extended-precision evaluation of `Δ`, used where double precision cancels
//! down to rounding noise (contours passing close to multiple roots).

use std::cell::RefCell;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_complex::Complex64;

use crate::quasipoly::Quasipolynomial;

const PRECISION: usize = 192;
const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constant cache"));
}

#[derive(Clone)]
struct Big {
    re: BigFloat,
    im: BigFloat,
}

fn big(x: f64) -> BigFloat {
    BigFloat::from_f64(x, PRECISION)
}

impl Big {
    fn real(x: f64) -> Self {
        Self { re: big(x), im: big(0.0) }
    }

    fn add(&self, o: &Self) -> Self {
        Self { re: self.re.add(&o.re, PRECISION, RM), im: self.im.add(&o.im, PRECISION, RM) }
    }

    fn mul(&self, o: &Self) -> Self {
        let rr = self.re.mul(&o.re, PRECISION, RM);
        let ii = self.im.mul(&o.im, PRECISION, RM);
        let ri = self.re.mul(&o.im, PRECISION, RM);
        let ir = self.im.mul(&o.re, PRECISION, RM);
        Self { re: rr.sub(&ii, PRECISION, RM), im: ri.add(&ir, PRECISION, RM) }
    }
}

fn horner(coeffs: &[f64], s: &Big) -> Big {
    coeffs.iter().rev().fold(Big::real(0.0), |acc, &c| acc.mul(s).add(&Big::real(c)))
}

fn to_f64(x: &BigFloat) -> f64 {
    let Some((words, _, sign, exp, _)) = x.as_raw_parts() else {
        return if x.is_zero() { 0.0 } else { f64::NAN };
    };
    if words.is_empty() {
        return 0.0;
    }
    let n = words.len();
    let top = words[n - 1] as f64;
    let next = if n >= 2 { words[n - 2] as f64 } else { 0.0 };
    let m = top + next / 18_446_744_073_709_551_616.0;
    let v = m * 2f64.powi(exp - 64);
    if sign == Sign::Neg {
        -v
    } else {
        v
    }
}

/// `Δ(s)` computed with 192-bit intermediates and rounded once at the end.
pub(crate) fn evaluate(qp: &Quasipolynomial, s: Complex64) -> Complex64 {
    let z = Big { re: big(s.re), im: big(s.im) };
    let p = horner(&qp.p_coeffs(), &z);
    let q = horner(qp.b(), &z);
    let tau = big(qp.tau());
    let x = z.re.mul(&tau, PRECISION, RM).neg();
    let y = z.im.mul(&tau, PRECISION, RM);
    let delay = CONSTS.with(|c| {
        let mut c = c.borrow_mut();
        let mag = x.exp(PRECISION, RM, &mut c);
        let cos = y.cos(PRECISION, RM, &mut c);
        let sin = y.sin(PRECISION, RM, &mut c);
        Big { re: mag.mul(&cos, PRECISION, RM), im: mag.mul(&sin, PRECISION, RM).neg() }
    });
    let v = p.add(&delay.mul(&q));
    Complex64::new(to_f64(&v.re), to_f64(&v.im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agrees_with_double_evaluation() {
        let qp = Quasipolynomial::new(vec![5.517, 12.301, 3.385], vec![2.0, -1.9, 0.04], 0.41).unwrap();
        for s in [Complex64::new(-2.9, 0.3), Complex64::new(1.0, -7.0), Complex64::new(0.0, 0.0)] {
            let d = qp.evaluate(s).unwrap();
            assert!((evaluate(&qp, s) - d.value).norm() <= 1e-14 * d.scale);
        }
    }

    #[test]
    fn resolves_cancellation() {
        // Δ(s) = s + 1 - e^{-s}: at s = 1e-9 the exact value is 1e-9 + 1 - e^{-1e-9} ≈ 2e-9 - 5e-19
        let qp = Quasipolynomial::new(vec![1.0], vec![-1.0], 1.0).unwrap();
        let s: f64 = 1e-9;
        let exact = s + (-(-s).exp_m1());
        let v = evaluate(&qp, Complex64::new(s, 0.0));
        assert!((v.re - exact).abs() <= 1e-24, "{} vs {}", v.re, exact);
    }
}
