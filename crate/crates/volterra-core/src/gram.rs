//! Gram matrices of kernel systems, smallest-eigenvalue nondegeneracy scans,
//! and the parameter balance checker.

use crate::kernels::{product_integral, KernelSpec, MatrixKernelSpec};
use crate::quad::ols_fit;
use crate::resolvents::PiTable;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

/// Hard cap on system size; every use in this toolkit is small.
pub const MAX_DIM: usize = 64;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major).
/// Returns eigenvalues ascending and eigenvectors (row k = k-th vector).
pub fn sym_eigen(mat: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n <= MAX_DIM && mat.len() == n * n);
    let mut a = mat.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if frob == 0.0 {
        return (vec![0.0; n], v);
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= 1e-15 * frob {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- J^T A J applied on columns then rows
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[p * n + k];
                    let vkq = v[q * n + k];
                    v[p * n + k] = c * vkp - s * vkq;
                    v[q * n + k] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    idx.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let vals = idx.iter().map(|&i| diag[i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (k, &i) in idx.iter().enumerate() {
        vecs[k * n..(k + 1) * n].copy_from_slice(&v[i * n..(i + 1) * n]);
    }
    (vals, vecs)
}

/// `G_{ll'}(h) = sum_i int_0^h Ktilde_{li} Ktilde_{l'i}` (row-major, symmetric
/// by construction).
pub fn gram_matrix(kernels: &MatrixKernelSpec, h: f64) -> Result<Vec<f64>> {
    if h <= 0.0 {
        return Err(Error::InvalidParams(format!("h must be > 0, got {h}")));
    }
    let n = kernels.n_rows;
    if n > MAX_DIM {
        return Err(Error::InvalidParams(format!(
            "system of {n} rows exceeds the cap {MAX_DIM}"
        )));
    }
    let mut g = vec![0.0; n * n];
    for l in 0..n {
        for l2 in l..n {
            let mut acc = 0.0;
            for (col, k1) in &kernels.rows[l] {
                if let Some(k2) = kernels.entry(l2, *col) {
                    acc += product_integral(k1, k2, 0.0, h);
                }
            }
            g[l * n + l2] = acc;
            g[l2 * n + l] = acc;
        }
    }
    Ok(g)
}

/// Per-block sub-report for diagonal-like systems.
#[derive(Debug, Clone, Serialize)]
pub struct GramBlockReport {
    pub column: usize,
    pub rows: Vec<usize>,
    pub fitted_gamma_star: f64,
    pub fit_r2: f64,
}

/// Result of a nondegeneracy scan.
///
/// Estimated, never certified: the underlying notion is a liminf as h -> 0,
/// which no finite scan can decide.
#[derive(Debug, Clone, Serialize)]
pub struct GramScanReport {
    pub h_values: Vec<f64>,
    pub lambda_min: Vec<f64>,
    /// Slowly-varying correction column, `lambda_min / l_min(1/h)^2`
    /// (equals `lambda_min` when no log modifier is present).
    pub corrected: Vec<f64>,
    /// Half the fitted log-log slope of lambda_min over the fit window.
    pub fitted_gamma_star: f64,
    pub fit_r2: f64,
    pub fit_window: (f64, f64),
    pub blocks: Vec<GramBlockReport>,
}

/// Default fit window; slopes are asymptotic, large h is excluded by default.
pub const DEFAULT_FIT_WINDOW: (f64, f64) = (1e-6, 1e-2);

/// Scan lambda_min(G(h)) over `h_list` and fit the nondegeneracy exponent.
pub fn nondegeneracy_scan(
    kernels: &MatrixKernelSpec,
    h_list: &[f64],
    fit_window: Option<(f64, f64)>,
) -> Result<GramScanReport> {
    if h_list.len() < 3 {
        return Err(Error::InvalidParams("need at least 3 scan points".into()));
    }
    let h_max = h_list.iter().cloned().fold(f64::MIN, f64::max);
    let h_min = h_list.iter().cloned().fold(f64::MAX, f64::min);
    if h_min <= 0.0 || h_max / h_min < 999.0 {
        return Err(Error::InvalidParams(
            "h_list must be positive and span at least 3 decades".into(),
        ));
    }
    let mut hs = h_list.to_vec();
    hs.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let n = kernels.n_rows;
    let lambda: Vec<(f64, f64)> = hs
        .par_iter()
        .map(|&h| {
            let g = gram_matrix(kernels, h)?;
            let (vals, _) = sym_eigen(&g, n);
            Ok((vals[0], vals[n - 1]))
        })
        .collect::<Result<Vec<_>>>()?;

    // degeneracy is judged at the largest h
    let (lmin0, lmax0) = lambda[0];
    if lmin0 < 1e-14 * lmax0 {
        return Err(Error::DegenerateSystem(lmin0 / lmax0));
    }

    let lambda_min: Vec<f64> = lambda.iter().map(|(l, _)| *l).collect();
    let corrected: Vec<f64> = hs
        .iter()
        .zip(&lambda_min)
        .map(|(&h, &l)| {
            let ell = kernels
                .rows
                .iter()
                .flat_map(|r| r.iter())
                .map(|(_, k)| k.slowly_varying_factor(h))
                .fold(f64::MAX, f64::min);
            l / (ell * ell)
        })
        .collect();

    let window = fit_window.unwrap_or(DEFAULT_FIT_WINDOW);
    let (gamma, r2) = fit_exponent(&hs, &lambda_min, window);

    let mut blocks = Vec::new();
    if kernels.is_diagonal_like() {
        for (col, rows) in kernels.partition().into_iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let specs: Vec<KernelSpec> = rows
                .iter()
                .map(|&r| kernels.rows[r][0].1.clone())
                .collect();
            let stack = MatrixKernelSpec::column_stack(specs)?;
            let bl: Vec<f64> = hs
                .iter()
                .map(|&h| {
                    let g = gram_matrix(&stack, h)?;
                    let (vals, _) = sym_eigen(&g, stack.n_rows);
                    Ok(vals[0])
                })
                .collect::<Result<Vec<_>>>()?;
            let (bg, br2) = fit_exponent(&hs, &bl, window);
            blocks.push(GramBlockReport {
                column: col,
                rows,
                fitted_gamma_star: bg,
                fit_r2: br2,
            });
        }
    }

    Ok(GramScanReport {
        h_values: hs,
        lambda_min,
        corrected,
        fitted_gamma_star: gamma,
        fit_r2: r2,
        fit_window: window,
        blocks,
    })
}

fn fit_exponent(hs: &[f64], lambda: &[f64], window: (f64, f64)) -> (f64, f64) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&h, &l) in hs.iter().zip(lambda) {
        if h >= window.0 * 0.999 && h <= window.1 * 1.001 && l > 0.0 {
            xs.push(h.ln());
            ys.push(l.ln());
        }
    }
    if xs.len() < 2 {
        for (&h, &l) in hs.iter().zip(lambda) {
            if l > 0.0 {
                xs.push(h.ln());
                ys.push(l.ln());
            }
        }
    }
    let (slope, _, r2) = ols_fit(&xs, &ys);
    (0.5 * slope, r2)
}

/// Scan report for the affine two-kernel matrix built from (K, K_z).
#[derive(Debug, Clone, Serialize)]
pub struct MzScanReport {
    pub h_values: Vec<f64>,
    pub lambda_min: Vec<f64>,
    pub fitted_gamma_star: f64,
    pub fit_r2: f64,
    /// `min(gamma, 1/2) + gamma/2` for the supplied gamma.
    pub condition_rhs: f64,
    pub condition_holds: bool,
}

/// Build `M_z(h)` from the kernel and the `K_z` table and fit its
/// nondegeneracy exponent; reports whether `gamma* < min(gamma,1/2) + gamma/2`.
pub fn affine_mz_scan(
    kernel: &KernelSpec,
    pi: &PiTable,
    h_list: &[f64],
    gamma: f64,
    fit_window: Option<(f64, f64)>,
) -> Result<MzScanReport> {
    if pi.kz.is_empty() {
        return Err(Error::InvalidParams(
            "PiTable has no K_z column; run kz_kernel first".into(),
        ));
    }
    let h_max = h_list.iter().cloned().fold(f64::MIN, f64::max);
    if h_max > pi.kz.len() as f64 * pi.dt {
        return Err(Error::InvalidParams(format!(
            "K_z table covers [0, {}], scan needs {h_max}",
            pi.kz.len() as f64 * pi.dt
        )));
    }
    // K_z as a table kernel with a linear backward extension to t = 0
    // (K_z is regular at the origin)
    let kz0 = if pi.kz.len() >= 2 {
        (2.0 * pi.kz[0] - pi.kz[1]).max(0.0)
    } else {
        pi.kz[0]
    };
    let mut grid = vec![0.0];
    let mut values = vec![kz0];
    for (i, v) in pi.kz.iter().enumerate() {
        grid.push((i + 1) as f64 * pi.dt);
        values.push(*v);
    }
    let kz = KernelSpec::TableDefined { grid, values };
    let stack = MatrixKernelSpec::column_stack(vec![kernel.clone(), kz])?;

    let mut hs = h_list.to_vec();
    hs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let lambda_min: Vec<f64> = hs
        .par_iter()
        .map(|&h| {
            let g = gram_matrix(&stack, h)?;
            let (vals, _) = sym_eigen(&g, 2);
            Ok(vals[0])
        })
        .collect::<Result<Vec<_>>>()?;
    let window = fit_window.unwrap_or(DEFAULT_FIT_WINDOW);
    let (gs, r2) = fit_exponent(&hs, &lambda_min, window);
    let rhs = gamma.min(0.5) + 0.5 * gamma;
    Ok(MzScanReport {
        h_values: hs,
        lambda_min,
        fitted_gamma_star: gs,
        fit_r2: r2,
        condition_rhs: rhs,
        condition_holds: gs < rhs,
    })
}

/// Inputs of the balance checker.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct BalanceParams {
    /// Nondegeneracy exponent(s); one entry per coordinate in diagonal mode.
    pub gamma_star: Vec<f64>,
    pub gamma_b: f64,
    pub gamma_sigma: f64,
    pub gamma_k: f64,
    pub chi_b: f64,
    pub chi_sigma: f64,
    pub diagonal: bool,
    pub h_b: f64,
    pub h_sigma: f64,
}

/// Verdict with signed margins (positive margin = inequality satisfied).
#[derive(Debug, Clone, Serialize)]
pub struct BalanceReport {
    /// Margin of `gamma* < min(gamma_b + 1/2 + chi_b gamma_K,
    /// gamma_sigma + chi_sigma gamma_K)` per coordinate.
    pub density_margins: Vec<f64>,
    pub density_ok: bool,
    /// Margin of `max(H_b, H_sigma) < 1/2 + chi min(H_b, H_sigma)`.
    pub balance_margin: f64,
    pub balance_ok: bool,
    pub chi: f64,
    pub pass: bool,
}

/// Evaluate the density condition and the kernel balance condition.
pub fn balance_check(p: &BalanceParams) -> Result<BalanceReport> {
    if p.chi_sigma <= 0.0 {
        return Err(Error::InvalidParams("chi_sigma must be > 0".into()));
    }
    for v in [p.gamma_b, p.gamma_sigma, p.gamma_k, p.chi_b, p.h_b, p.h_sigma] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidParams(
                "balance parameters must be finite and nonnegative".into(),
            ));
        }
    }
    let rhs = (p.gamma_b + 0.5 + p.chi_b * p.gamma_k).min(p.gamma_sigma + p.chi_sigma * p.gamma_k);
    let stars: Vec<f64> = if p.diagonal {
        p.gamma_star.clone()
    } else {
        vec![p.gamma_star.iter().cloned().fold(f64::MIN, f64::max)]
    };
    let density_margins: Vec<f64> = stars.iter().map(|g| rhs - g).collect();
    let density_ok = density_margins.iter().all(|m| *m > 0.0);

    let chi = if p.h_sigma < p.h_b {
        p.chi_sigma
    } else {
        p.chi_sigma.min(0.5 * (1.0 + p.chi_b))
    };
    let balance_margin = 0.5 + chi * p.h_b.min(p.h_sigma) - p.h_b.max(p.h_sigma);
    let balance_ok = balance_margin > 0.0;
    Ok(BalanceReport {
        density_margins,
        density_ok,
        balance_margin,
        balance_ok,
        chi,
        pass: density_ok && balance_ok,
    })
}

/// Log-spaced scan points, descending.
pub fn log_spaced(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| hi * (lo / hi).powf(i as f64 / (points - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma as gamma_fn;

    fn pure_power(h: f64) -> KernelSpec {
        // c t^{H-1/2} with unit front coefficient
        KernelSpec::Fractional {
            hurst: h,
            scale: gamma_fn(h + 0.5),
        }
    }

    #[test]
    fn jacobi_matches_closed_form_2x2() {
        let m = [2.0, 0.5, 0.5, 1.0];
        let (vals, vecs) = sym_eigen(&m, 2);
        let disc = (0.25f64 + 0.25).sqrt(); // sqrt(((a-c)/2)^2 + b^2)
        let lo = 1.5 - disc;
        let hi = 1.5 + disc;
        assert!((vals[0] - lo).abs() < 1e-14 && (vals[1] - hi).abs() < 1e-14);
        let v = &vecs[0..2];
        let r0 = m[0] * v[0] + m[1] * v[1] - vals[0] * v[0];
        let r1 = m[2] * v[0] + m[3] * v[1] - vals[0] * v[1];
        assert!(r0.abs() < 1e-12 && r1.abs() < 1e-12);
    }

    #[test]
    fn gram_single_fractional_row_closed_form() {
        let k = MatrixKernelSpec::column_stack(vec![pure_power(0.3)]).unwrap();
        let g = gram_matrix(&k, 0.25).unwrap();
        let expect = 0.25f64.powf(0.6) / 0.6;
        assert!((g[0] - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn gram_two_fractional_rows_eigen_oracle() {
        // 2x2 eigenvalue oracle on the closed-form entries at h = 0.01
        let k = MatrixKernelSpec::column_stack(vec![pure_power(0.1), pure_power(0.3)]).unwrap();
        let g = gram_matrix(&k, 0.01).unwrap();
        let (vals, _) = sym_eigen(&g, 2);
        let (a, b, c) = (
            0.01f64.powf(0.2) / 0.2,
            0.01f64.powf(0.4) / 0.4,
            0.01f64.powf(0.6) / 0.6,
        );
        let tr = a + c;
        let det = a * c - b * b;
        let lam = 0.5 * (tr - (tr * tr - 4.0 * det).sqrt());
        assert!((vals[0] - lam).abs() < 1e-12);
        assert!((vals[0] - 2.53e-2).abs() < 2e-4, "lambda_min {}", vals[0]);
    }

    #[test]
    fn gram_diagonal_like_is_block_diagonal() {
        let m = MatrixKernelSpec::new(
            vec![
                vec![(0, pure_power(0.3))],
                vec![(1, KernelSpec::exponential(1.0, 2.0))],
            ],
            2,
        )
        .unwrap();
        let g = gram_matrix(&m, 0.5).unwrap();
        assert_eq!(g[1], 0.0);
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn scan_fractional_pair_recovers_h_max() {
        let k = MatrixKernelSpec::column_stack(vec![pure_power(0.1), pure_power(0.3)]).unwrap();
        let hs = log_spaced(1e-6, 1e-2, 25);
        let rep = nondegeneracy_scan(&k, &hs, None).unwrap();
        assert!(
            (rep.fitted_gamma_star - 0.3).abs() < 0.03,
            "gamma* = {}",
            rep.fitted_gamma_star
        );
        assert!(rep.fit_r2 > 0.999);
    }

    #[test]
    fn scan_duplicated_row_degenerate() {
        let k = MatrixKernelSpec::column_stack(vec![pure_power(0.3), pure_power(0.3)]).unwrap();
        let hs = log_spaced(1e-6, 1e-2, 10);
        assert!(matches!(
            nondegeneracy_scan(&k, &hs, None),
            Err(Error::DegenerateSystem(_))
        ));
    }

    #[test]
    fn cauchy_matrix_limit() {
        // normalized Gram of damped power kernels approaches
        // J_ij = 1/(H_i + H_j); checked at h = 1e-8 within 1%
        let hursts = [0.1, 0.3, 0.45];
        let kernels: Vec<KernelSpec> = hursts
            .iter()
            .map(|&h| KernelSpec::Gamma {
                hurst: h,
                damping: 1.0,
                scale: gamma_fn(h + 0.5),
            })
            .collect();
        let stack = MatrixKernelSpec::column_stack(kernels).unwrap();
        let h = 1e-8;
        let g = gram_matrix(&stack, h).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d = h.powf(hursts[i] + hursts[j]);
                let jij = 1.0 / (hursts[i] + hursts[j]);
                let rel = (g[i * 3 + j] / d - jij).abs() / jij;
                assert!(rel < 0.01, "entry ({i},{j}): rel {rel}");
            }
        }
    }

    #[test]
    fn scaling_equivariance_of_slope() {
        let hs = log_spaced(1e-6, 1e-2, 25);
        let base =
            MatrixKernelSpec::column_stack(vec![pure_power(0.15), pure_power(0.35)]).unwrap();
        let scaled = MatrixKernelSpec::column_stack(vec![
            pure_power(0.15),
            KernelSpec::Fractional {
                hurst: 0.35,
                scale: 7.0 * gamma_fn(0.85),
            },
        ])
        .unwrap();
        let r1 = nondegeneracy_scan(&base, &hs, None).unwrap();
        let r2 = nondegeneracy_scan(&scaled, &hs, None).unwrap();
        assert!(
            (r1.fitted_gamma_star - r2.fitted_gamma_star).abs() < 0.02,
            "{} vs {}",
            r1.fitted_gamma_star,
            r2.fitted_gamma_star
        );
    }

    #[test]
    fn psd_property_mixed_system() {
        let k = MatrixKernelSpec::column_stack(vec![
            pure_power(0.2),
            KernelSpec::exponential(1.0, 1.0),
            KernelSpec::constant(0.5),
        ])
        .unwrap();
        for &h in &[1e-5, 1e-3, 0.1, 1.0] {
            let g = gram_matrix(&k, h).unwrap();
            let (vals, _) = sym_eigen(&g, 3);
            assert!(vals[0] >= -1e-12 * vals[2].abs(), "h={h}: {vals:?}");
        }
    }

    #[test]
    fn balance_worked_examples() {
        let p1 = BalanceParams {
            gamma_star: vec![0.3],
            gamma_b: 0.3,
            gamma_sigma: 0.3,
            gamma_k: 0.3,
            chi_b: 1.0,
            chi_sigma: 0.5,
            diagonal: false,
            h_b: 0.3,
            h_sigma: 0.3,
        };
        assert!(balance_check(&p1).unwrap().pass);

        let p2 = BalanceParams {
            gamma_star: vec![1.0],
            gamma_b: 0.5,
            gamma_sigma: 0.5,
            gamma_k: 0.5,
            chi_b: 1.0,
            chi_sigma: 0.5,
            diagonal: false,
            h_b: 0.5,
            h_sigma: 0.5,
        };
        let r2 = balance_check(&p2).unwrap();
        assert!(!r2.density_ok && !r2.pass);

        let p3 = BalanceParams {
            gamma_star: vec![0.3],
            gamma_b: 0.2,
            gamma_sigma: 0.8,
            gamma_k: 0.2,
            chi_b: 1.0,
            chi_sigma: 1.0,
            diagonal: false,
            h_b: 0.2,
            h_sigma: 0.8,
        };
        let r3 = balance_check(&p3).unwrap();
        assert!(!r3.balance_ok && !r3.pass);
    }

    #[test]
    fn balance_rejects_nonpositive_chi_sigma() {
        let mut p = BalanceParams {
            gamma_star: vec![0.3],
            gamma_b: 0.3,
            gamma_sigma: 0.3,
            gamma_k: 0.3,
            chi_b: 1.0,
            chi_sigma: 0.0,
            diagonal: false,
            h_b: 0.3,
            h_sigma: 0.3,
        };
        assert!(balance_check(&p).is_err());
        p.chi_sigma = 0.5;
        assert!(balance_check(&p).is_ok());
    }
}
