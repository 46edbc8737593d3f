//! Quadrature building blocks: fixed Gauss-Legendre rules, graded meshes for
//! endpoint singularities, and a two-split adaptive routine.

use crate::{Error, Result};

/// 16-point Gauss-Legendre nodes/weights on [-1, 1] (positive half; mirrored).
const GL16_X: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003_0,
    0.865_631_202_387_831_7,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL16_W: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_54,
    0.149_595_988_816_576_73,
    0.124_628_971_255_533_87,
    0.095_158_511_682_492_79,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_095,
];

/// Integrate f on [a, b] with a single 16-point Gauss-Legendre rule.
pub fn gl16<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for i in 0..8 {
        s += GL16_W[i] * (f(c + h * GL16_X[i]) + f(c - h * GL16_X[i]));
    }
    s * h
}

/// Integrate f on [a, b] where f may have an integrable singularity at `a`:
/// dyadic cells shrinking toward `a` with GL16 on each, continued until the
/// cells stop contributing. Handles exponents down to roughly x^{-0.99}.
pub fn graded_left<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    graded_sub(f, a, b, 1)
}

/// Integrate f on [a, b] with grading toward both endpoints.
pub fn graded_both<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let left = graded_left(f, a, mid);
    // mirrored integrand, written so the singular endpoint is the variable
    let right = graded_left(&|u: f64| f(a + b - u), a, mid);
    left + right
}

/// Adaptive refinement: graded quadrature at two panel resolutions must
/// settle within `rtol`.
pub fn adaptive_left<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rtol: f64) -> Result<f64> {
    let coarse = graded_sub(f, a, b, 1);
    let fine = graded_sub(f, a, b, 3);
    let scale = fine.abs().max(coarse.abs()).max(1e-300);
    if (fine - coarse).abs() <= rtol * scale {
        Ok(fine)
    } else {
        let finer = graded_sub(f, a, b, 6);
        if (finer - fine).abs() <= rtol * finer.abs().max(1e-300) {
            Ok(finer)
        } else {
            Err(Error::QuadratureFailure(format!(
                "graded quadrature on [{a}, {b}] did not settle: {coarse} vs {fine} vs {finer}"
            )))
        }
    }
}

/// Dyadic grading toward `a` with each cell split into `sub` GL16 panels.
fn graded_sub<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, sub: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut total = 0.0;
    let mut hi = b;
    for level in 0..2100 {
        let lo = a + 0.5 * (hi - a);
        let w = (hi - lo) / sub as f64;
        let mut cell = 0.0;
        for s in 0..sub {
            cell += gl16(f, lo + s as f64 * w, lo + (s + 1) as f64 * w);
        }
        total += cell;
        hi = lo;
        if hi - a < 1e-307 || (level > 8 && cell.abs() <= 1e-17 * total.abs()) {
            break;
        }
    }
    total
}

/// Integrate f over [a, inf) by geometric segments [a, 2a], [2a, 4a], ...
/// stopping when segments fall below `rtol` times the accumulated value.
/// Returns the integral and the last segment magnitude (tail indicator).
pub fn geometric_tail<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    rtol: f64,
    max_segments: usize,
) -> Result<(f64, f64)> {
    assert!(a > 0.0);
    let mut lo = a;
    let mut total = 0.0;
    let mut last = f64::INFINITY;
    let mut grew = 0usize;
    for _ in 0..max_segments {
        let hi = lo * 2.0;
        let seg = gl16(f, lo, hi);
        total += seg;
        if seg.abs() > last && last.is_finite() {
            grew += 1;
            if grew > 8 {
                return Err(Error::DivergentIntegral(format!(
                    "geometric tail from {a} keeps growing at z = {lo:.3e}"
                )));
            }
        }
        last = seg.abs();
        lo = hi;
        if last <= rtol * total.abs().max(1e-300) {
            return Ok((total, last));
        }
    }
    Ok((total, last))
}

/// Ordinary-least-squares fit of y = slope * x + intercept; returns
/// (slope, intercept, r_squared).
pub fn ols_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;

    #[test]
    fn gl16_polynomial_exact() {
        let f = |x: f64| 3.0 * x * x;
        assert!((gl16(&f, 0.0, 2.0) - 8.0).abs() < 1e-13);
    }

    #[test]
    fn graded_power_singularity() {
        // int_0^1 x^{-0.8} dx = 5
        let f = |x: f64| x.powf(-0.8);
        let v = graded_left(&f, 0.0, 1.0);
        assert!((v - 5.0).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn adaptive_detects_settled() {
        let f = |x: f64| x.powf(-0.5) * (-x).exp();
        let v = adaptive_left(&f, 0.0, 1.0, 1e-10).unwrap();
        // int_0^1 x^{-1/2} e^{-x} dx = sqrt(pi) erf(1) = 1.493648265624854
        assert!((v - 1.493_648_265_624_854).abs() < 1e-8, "got {v}");
    }

    #[test]
    fn geometric_tail_exponential() {
        let f = |x: f64| (-x).exp();
        let (v, _) = geometric_tail(&f, 1.0, 1e-14, 80).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn tail_power_times_gamma_density() {
        // int_0^inf e^{-z} z^{-0.5} dz = Gamma(0.5)
        let f = |z: f64| (-z).exp() * z.powf(-0.5);
        let head = graded_left(&f, 0.0, 1.0);
        let (tail, _) = geometric_tail(&f, 1.0, 1e-14, 80).unwrap();
        assert!((head + tail - gamma(0.5)).abs() < 1e-9);
    }
}
