//! Discrete Volterra resolvent calculus.
//!
//! The resolvent of the first kind is represented as an atom at zero plus a
//! piecewise-constant density `L0` (values per grid cell). `E_K` solves
//! `E_K = K + beta (K * E_K)`; it is stored through the correction
//! `c = K * E_K`, which is continuous even when the kernel is singular, so
//! that `E_K = K + beta c` inherits the exact singularity of `K`.

use crate::grid::TimeGrid;
use crate::kernels::KernelSpec;
use crate::{Error, Result};
use serde::Serialize;

/// Grid tables for the resolvent of the first kind and `E_K`.
#[derive(Debug, Clone)]
pub struct ResolventTables {
    pub kernel: KernelSpec,
    pub grid: TimeGrid,
    pub beta: f64,
    /// `K(0)^{-1}` with the convention `inf^{-1} = 0` for singular kernels.
    pub atom: f64,
    /// Piecewise-constant density of L0: value on cell ((j-1) dt, j dt].
    l0: Vec<f64>,
    /// Exact kernel cell integrals, `w[m-1] = int_{(m-1)dt}^{m dt} K`.
    w: Vec<f64>,
    /// Kernel values at cell midpoints.
    kmid: Vec<f64>,
    /// Correction `c = K * E_K` at the nodes (c[0] = 0).
    c: Vec<f64>,
    /// Prefix sums of E_K cell masses: `int_0^{t_i} E_K`.
    ek_mass_prefix: Vec<f64>,
    /// Reported residual of `K * L = 1`: max over collocation-offset points
    /// with t >= horizon/64 (the head at t ~ dt is scheme-self-similar and
    /// dt-independent; kept separately).
    pub residual: f64,
    /// Residual maximum over the entire grid including the head.
    pub residual_full: f64,
}

impl ResolventTables {
    pub fn l0_density(&self) -> &[f64] {
        &self.l0
    }

    /// Kernel cell integrals.
    pub fn kernel_cells(&self) -> &[f64] {
        &self.w
    }

    /// `K * E_K` at node i.
    pub fn k_conv_ek(&self, i: usize) -> f64 {
        self.c[i]
    }

    /// E_K evaluated at a node index (i >= 1 when the kernel is singular).
    pub fn ek_node(&self, i: usize) -> f64 {
        self.kernel.value(self.grid.node(i)) + self.beta * self.c[i]
    }

    /// E_K at an arbitrary time (t > 0 for singular kernels), interpolating
    /// the continuous correction linearly.
    pub fn ek_value(&self, t: f64) -> f64 {
        let dt = self.grid.dt;
        let pos = (t / dt).min((self.grid.n_steps) as f64).max(0.0);
        let i = (pos.floor() as usize).min(self.grid.n_steps - 1);
        let wfrac = pos - i as f64;
        let c = self.c[i] * (1.0 - wfrac) + self.c[i + 1] * wfrac;
        self.kernel.value(t) + self.beta * c
    }

    /// Mass of E_K on cell j (1-based), `int_{(j-1)dt}^{j dt} E_K`.
    pub fn ek_cell_mass(&self, j: usize) -> f64 {
        self.w[j - 1] + self.beta * self.grid.dt * 0.5 * (self.c[j - 1] + self.c[j])
    }

    /// `int_0^{t_i} E_K(s) ds`.
    pub fn ek_integral_to(&self, i: usize) -> f64 {
        self.ek_mass_prefix[i]
    }

    /// E_K midpoint value on cell j (1-based).
    pub fn ek_mid(&self, j: usize) -> f64 {
        self.kmid[j - 1] + self.beta * 0.5 * (self.c[j - 1] + self.c[j])
    }
}

/// Resolvent of the first kind of a completely monotone kernel.
pub fn resolvent_first_kind(kernel: &KernelSpec, grid: &TimeGrid) -> Result<ResolventTables> {
    resolvent_ek(kernel, 0.0, grid)
}

/// Build L0 and E_K tables; `beta` is the drift slope of the affine model.
pub fn resolvent_ek(kernel: &KernelSpec, beta: f64, grid: &TimeGrid) -> Result<ResolventTables> {
    kernel.validate()?;
    if !kernel.is_completely_monotone() {
        return Err(Error::NotCompletelyMonotone(format!(
            "resolvent of the first kind needs a completely monotone kernel, got {kernel:?}"
        )));
    }
    let n = grid.n_steps;
    let dt = grid.dt;
    let w: Vec<f64> = (1..=n)
        .map(|m| kernel.cell_integral((m - 1) as f64 * dt, m as f64 * dt))
        .collect();
    if w[0] <= 0.0 || !w[0].is_finite() {
        return Err(Error::SingularSystem);
    }
    let atom = if kernel.is_singular_at_zero() {
        0.0
    } else {
        let k0 = kernel.value(0.0);
        if k0 <= 0.0 {
            return Err(Error::SingularSystem);
        }
        1.0 / k0
    };
    let kmid: Vec<f64> = (1..=n)
        .map(|m| kernel.value((m as f64 - 0.5) * dt))
        .collect();

    // node collocation of  atom K(t_i) + sum_j l0_j int_{cell_j} K(t_i - s) ds = 1
    let mut l0 = vec![0.0; n];
    for i in 1..=n {
        let mut acc = atom * kernel.value(i as f64 * dt);
        for j in 1..i {
            acc += l0[j - 1] * w[i - j];
        }
        l0[i - 1] = (1.0 - acc) / w[0];
    }

    // residual of the reconstruction at collocation-offset points t_{i-1/2}
    let s0 = kernel.cell_integral(0.0, 0.5 * dt);
    let smid: Vec<f64> = (1..n)
        .map(|m| kernel.cell_integral((m as f64 - 0.5) * dt, (m as f64 + 0.5) * dt))
        .collect();
    let mut residual_full = 0.0f64;
    let mut residual = 0.0f64;
    let burn_in = (n / 64).max(1);
    for i in 1..=n {
        let mut acc = atom * kmid[i - 1] + l0[i - 1] * s0;
        for m in 1..i {
            acc += l0[i - m - 1] * smid[m - 1];
        }
        let r = (acc - 1.0).abs();
        residual_full = residual_full.max(r);
        if i >= burn_in {
            residual = residual.max(r);
        }
    }

    // E_K through the continuous correction c = K * E_K, solving
    // c = K*K + beta K*c with trapezoidal cells for c and exact cells for K.
    let mut c = vec![0.0; n + 1];
    for i in 1..=n {
        let q = conv_kk(kernel, &w, &kmid, grid, i);
        let mut acc = 0.0;
        for j in 1..i {
            acc += w[i - j] * 0.5 * (c[j - 1] + c[j]);
        }
        acc += w[0] * 0.5 * c[i - 1];
        let denom = 1.0 - beta * w[0] * 0.5;
        if denom.abs() < 1e-14 {
            return Err(Error::SingularSystem);
        }
        c[i] = (q + beta * acc) / denom;
    }
    let mut ek_mass_prefix = vec![0.0; n + 1];
    for j in 1..=n {
        ek_mass_prefix[j] =
            ek_mass_prefix[j - 1] + w[j - 1] + beta * dt * 0.5 * (c[j - 1] + c[j]);
    }

    Ok(ResolventTables {
        kernel: kernel.clone(),
        grid: *grid,
        beta,
        atom,
        l0,
        w,
        kmid,
        c,
        ek_mass_prefix,
        residual,
        residual_full,
    })
}

/// `(K * K)(t_i)`: closed forms for the power and exponential families,
/// symmetric product rule otherwise.
fn conv_kk(kernel: &KernelSpec, w: &[f64], kmid: &[f64], grid: &TimeGrid, i: usize) -> f64 {
    use crate::special::gamma;
    let t = grid.node(i);
    match kernel {
        KernelSpec::Fractional { hurst, scale } => {
            let a = hurst + 0.5;
            scale * scale * t.powf(2.0 * a - 1.0) / gamma(2.0 * a)
        }
        KernelSpec::Gamma {
            hurst,
            damping,
            scale,
        } => {
            let a = hurst + 0.5;
            scale * scale * (-damping * t).exp() * t.powf(2.0 * a - 1.0) / gamma(2.0 * a)
        }
        KernelSpec::Constant { scale } => scale * scale * t,
        KernelSpec::ExpSum { terms } => exp_conv_pair(terms, t),
        KernelSpec::BernsteinQuadrature { nodes } => exp_conv_pair(nodes, t),
        _ => {
            // symmetric product rule: each summand carries the exact cell
            // integral on one side of the singularity
            let mut acc = 0.0;
            for j in 1..=i {
                acc += 0.5 * (kmid[i - j] * w[j - 1] + w[i - j] * kmid[j - 1]);
            }
            acc
        }
    }
}

fn exp_conv_pair(terms: &[(f64, f64)], t: f64) -> f64 {
    let mut acc = 0.0;
    for (a1, l1) in terms {
        for (a2, l2) in terms {
            acc += if (l1 - l2).abs() < 1e-12 * (1.0 + l1.abs()) {
                a1 * a2 * t * (-l1 * t).exp()
            } else {
                a1 * a2 * ((-l1 * t).exp() - (-l2 * t).exp()) / (l2 - l1)
            };
        }
    }
    acc
}

/// Grid tables of the path-dependence measure `Pi_z` and the kernel `K_z`.
#[derive(Debug, Clone, Serialize)]
pub struct PiTable {
    pub z: f64,
    pub z_cells: usize,
    pub dt: f64,
    /// `Pi_z(t_i)` for i = 0..=n_out.
    pub pi: Vec<f64>,
    /// Cell masses of `d Pi_z` on (t_j, t_{j+1}], j = 0..n_out-1 (exact
    /// increments of the quadrature measure).
    pub d_pi: Vec<f64>,
    /// Differentiated-form masses computed with finite-difference L0'
    /// (cross-check; the dominant error source near the L0 singularity).
    pub d_pi_fd: Vec<f64>,
    /// `K_z` at nodes t_1..t_{n_out}; filled by [`kz_kernel`].
    pub kz: Vec<f64>,
    /// Max discrepancy between the integral route and the convolution
    /// definition of `Pi_z`.
    pub route_discrepancy: f64,
    /// Max discrepancy between increment and finite-difference d_pi masses.
    pub fd_discrepancy: f64,
}

/// Compute `Pi_z` on the first `n_out` nodes (defaults to every node the
/// tables can serve, `n - z_cells`).
pub fn pi_z(tables: &ResolventTables, z: f64, n_out: Option<usize>) -> Result<PiTable> {
    let dt = tables.grid.dt;
    let zn = (z / dt).round() as usize;
    if zn == 0 || ((zn as f64) * dt - z).abs() > 1e-9 * z.max(dt) {
        return Err(Error::GridMismatch(z));
    }
    let n = tables.grid.n_steps;
    if zn >= n {
        return Err(Error::InvalidParams(format!(
            "tables cover {} cells, z needs {zn} of them plus output room",
            n
        )));
    }
    let n_out = n_out.unwrap_or(n - zn).min(n - zn);
    let v = &tables.l0;
    let m_ek: Vec<f64> = (1..=zn).map(|j| tables.ek_cell_mass(j)).collect();

    // integral route: Pi_z(t_i) = -sum_j mE_j * L0(t_i + z - t_{j-1/2})
    let mut pi = vec![0.0; n_out + 1];
    for (i, slot) in pi.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, m) in m_ek.iter().enumerate() {
            // argument t_i + z - t_{j+1/2} lies in cell i + zn - j (1-based)
            acc += m * v[i + zn - (j + 1)];
        }
        *slot = -acc;
    }

    // convolution-definition route:
    // (Delta_z E_K * L)(t_i) - (E_K * L)(t_i + z); atoms cancel.
    let mut route_discrepancy = 0.0f64;
    for i in 0..=n_out {
        let ti = i as f64 * dt;
        let mut a = 0.0;
        for j in 1..=i {
            let arg = ti + z - (j as f64 - 0.5) * dt;
            a += v[j - 1] * dt * tables.ek_value(arg);
        }
        let mut b = 0.0;
        for j in 1..(i + zn) {
            let arg = ti + z - (j as f64 - 0.5) * dt;
            b += v[j - 1] * dt * tables.ek_value(arg);
        }
        b += v[i + zn - 1] * tables.ek_cell_mass(1);
        let pib = a - b;
        route_discrepancy = route_discrepancy.max((pib - pi[i]).abs());
    }

    // increments (exact cell masses of the quadrature measure)
    let d_pi: Vec<f64> = (0..n_out).map(|j| pi[j + 1] - pi[j]).collect();

    // differentiated form with finite-difference L0'
    let nv = v.len();
    let mut dv = vec![0.0; nv];
    for j in 0..nv {
        dv[j] = if j == 0 {
            if nv >= 3 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt)
            } else {
                (v[1] - v[0]) / dt
            }
        } else if j == nv - 1 {
            (v[nv - 1] - v[nv - 2]) / dt
        } else {
            (v[j + 1] - v[j - 1]) / (2.0 * dt)
        };
    }
    let mut d_pi_fd = vec![0.0; n_out];
    let mut fd_discrepancy = 0.0f64;
    for (j, slot) in d_pi_fd.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, m) in m_ek.iter().enumerate() {
            acc += m * dv[j + zn - (k + 1)];
        }
        *slot = -dt * acc;
        fd_discrepancy = fd_discrepancy.max((*slot - d_pi[j]).abs());
    }

    Ok(PiTable {
        z,
        z_cells: zn,
        dt,
        pi,
        d_pi,
        d_pi_fd,
        kz: Vec::new(),
        route_discrepancy,
        fd_discrepancy,
    })
}

/// Route-consistency guard: integral vs convolution definition of `Pi_z`.
pub fn check_pi_routes(tables: &ResolventTables, pi: &PiTable, tol_factor: f64) -> Result<()> {
    let scale = pi.pi.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-30);
    let tol = (tol_factor * tables.residual).max(1e-9) * scale.max(1.0);
    if pi.route_discrepancy > tol {
        return Err(Error::InconsistentRoutes(format!(
            "Pi_z routes differ by {:.3e} (tolerance {:.3e})",
            pi.route_discrepancy, tol
        )));
    }
    Ok(())
}

/// Bound report of the `K_z` sandwich.
#[derive(Debug, Clone, Serialize)]
pub struct KzBoundReport {
    pub f_z: f64,
    /// True when `d Pi_z` vanishes to tolerance (single-exponential kernels):
    /// the sandwich denominator degenerates and the check is skipped.
    pub degenerate: bool,
    /// Worst signed violation of the sandwich (negative = inside bounds).
    pub worst_margin: f64,
    pub slack: f64,
}

/// Fill `pi.kz` with `K_z(t) = int_[0,t] K(t-s) Pi_z(ds)` and verify the
/// shifted-kernel sandwich within `slack`.
pub fn kz_kernel(
    tables: &ResolventTables,
    pi: &mut PiTable,
    slack: f64,
) -> Result<KzBoundReport> {
    let dt = pi.dt;
    let n_out = pi.d_pi.len();
    let w = tables.kernel_cells();
    let mut kz = vec![0.0; n_out];
    for i in 1..=n_out {
        let mut acc = 0.0;
        for (j, m) in pi.d_pi[..i].iter().enumerate() {
            acc += m * w[i - j - 1];
        }
        kz[i - 1] = acc / dt;
    }
    pi.kz = kz;

    let pi_scale = pi.pi[0].abs().max(1e-30);
    let degenerate = pi.d_pi.iter().all(|m| m.abs() <= 1e-10 * pi_scale.max(1.0));
    let mut f_z = 0.0f64;
    if tables.beta != 0.0 {
        let zn = pi.z_cells;
        let sup_c = (0..=zn).fold(0.0f64, |a, i| a.max(tables.c[i].abs()));
        f_z = tables.beta.abs() * sup_c / tables.kernel.value(pi.z);
    }
    let mut worst = f64::NEG_INFINITY;
    if !degenerate {
        for i in 1..=n_out {
            let t = i as f64 * dt;
            let denom = tables.kernel.value(t + pi.z)
                - tables.kernel.value(pi.z) * tables.atom * tables.kernel.value(t);
            if denom.abs() < 1e-12 * tables.kernel.value(pi.z).abs() {
                continue;
            }
            let ratio = pi.kz[i - 1] / denom;
            let lo = 1.0 - f_z - slack;
            let hi = 1.0 + f_z + slack;
            worst = worst.max(lo - ratio).max(ratio - hi);
        }
        if worst > 0.0 {
            return Err(Error::BoundViolation(format!(
                "K_z sandwich violated by {worst:.3e} (f(z) = {f_z:.3e}, slack {slack:.1e})"
            )));
        }
    }
    Ok(KzBoundReport {
        f_z,
        degenerate,
        worst_margin: if worst.is_finite() { worst } else { 0.0 },
        slack,
    })
}

/// Coefficients of the affine conditional-mean formula
/// `E[X_T | F_t] = c0 + c1_x0 + c2 X_t + sum_j X_{t - s_j} dPi_j`.
#[derive(Debug, Clone, Serialize)]
pub struct CondExpCoeffs {
    pub c0: f64,
    pub c1_x0: f64,
    pub c2: f64,
    /// Cell masses of `d Pi_{T-t}` on (t_j, t_{j+1}], j = 0..i_t-1.
    pub d_pi: Vec<f64>,
    pub t_index: usize,
    /// Set when the point-mass coefficient uses the right-limit of the
    /// shifted E_K under a positive atom.
    pub uses_right_limit: bool,
}

pub fn cond_exp_coeffs(
    tables: &ResolventTables,
    pi: &PiTable,
    t: f64,
    t_final: f64,
    drift_const: f64,
    x0: f64,
) -> Result<CondExpCoeffs> {
    let dt = tables.grid.dt;
    let it = ((t / dt).round()) as usize;
    if (it as f64 * dt - t).abs() > 1e-9 * dt.max(t) {
        return Err(Error::GridMismatch(t));
    }
    let i_final = ((t_final / dt).round()) as usize;
    if (i_final as f64 * dt - t_final).abs() > 1e-9 * dt.max(t_final) {
        return Err(Error::GridMismatch(t_final));
    }
    let z = t_final - t;
    if (z - pi.z).abs() > 1e-9 * pi.z.max(dt) {
        return Err(Error::InvalidParams(format!(
            "pi table was built for z = {}, requested T - t = {z}",
            pi.z
        )));
    }
    if it > pi.d_pi.len() {
        return Err(Error::InvalidParams(format!(
            "pi table covers {} cells, t needs {it}",
            pi.d_pi.len()
        )));
    }
    let c0 = drift_const * tables.ek_integral_to(pi.z_cells);
    let c1_x0 = -pi.pi[it] * x0;
    let c2 = tables.atom * tables.ek_value(z);
    Ok(CondExpCoeffs {
        c0,
        c1_x0,
        c2,
        d_pi: pi.d_pi[..it].to_vec(),
        t_index: it,
        uses_right_limit: tables.atom > 0.0,
    })
}

impl CondExpCoeffs {
    /// Apply the formula to a path sampled on the grid (values at nodes
    /// 0..=t_index at least).
    pub fn apply(&self, path: &[f64]) -> f64 {
        let it = self.t_index;
        let mut acc = self.c0 + self.c1_x0 + self.c2 * path[it];
        for (j, m) in self.d_pi.iter().enumerate() {
            // cell (t_j, t_{j+1}]: X_{t-s} averaged at the cell endpoints
            acc += m * 0.5 * (path[it - j] + path[it - j - 1]);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::graded_left;
    use crate::special::gamma;

    fn grid(p: u32, horizon: f64) -> TimeGrid {
        let dt = 0.5f64.powi(p as i32);
        TimeGrid::with_horizon(dt, horizon).unwrap()
    }

    #[test]
    fn constant_kernel_resolvent_is_pure_atom() {
        let g = grid(8, 1.0);
        let t = resolvent_first_kind(&KernelSpec::constant(1.0), &g).unwrap();
        assert_eq!(t.atom, 1.0);
        assert!(t.l0_density().iter().all(|v| v.abs() < 1e-12));
        assert!(t.residual_full < 1e-12);
    }

    #[test]
    fn exponential_kernel_resolvent_closed_form() {
        // K = e^{-2t}: atom 1, L0 = 2; oracle: e^{-lt} + l int_0^t e^{-l(t-s)} ds = 1
        let g = grid(8, 1.0);
        let t = resolvent_first_kind(&KernelSpec::exponential(1.0, 2.0), &g).unwrap();
        assert!((t.atom - 1.0).abs() < 1e-14);
        for v in t.l0_density() {
            assert!((v - 2.0).abs() < 1e-10, "L0 = {v}");
        }
    }

    #[test]
    fn fractional_resolvent_matches_convolution_identity() {
        // oracle: t^{a-1}/Gamma(a) * t^{-a}/Gamma(1-a) = 1 with a = H + 1/2,
        // so L0(t) = t^{-(H+1/2)}/Gamma(1/2 - H)
        let h = 0.3;
        let g = grid(10, 1.0);
        let t = resolvent_first_kind(&KernelSpec::fractional(h), &g).unwrap();
        assert_eq!(t.atom, 0.0);
        let a = h + 0.5;
        // compare cell masses away from the self-similar head
        for j in [128usize, 512, 1024] {
            let lo = (j - 1) as f64 * g.dt;
            let hi = j as f64 * g.dt;
            let exact = (hi.powf(1.0 - a) - lo.powf(1.0 - a)) / ((1.0 - a) * gamma(1.0 - a));
            let got = t.l0_density()[j - 1] * g.dt;
            assert!(
                ((got - exact) / exact).abs() < 1e-2,
                "cell {j}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn residual_decreases_under_refinement() {
        let k = KernelSpec::fractional(0.3);
        let r12 = resolvent_first_kind(&k, &grid(12, 1.0)).unwrap().residual;
        let r13 = resolvent_first_kind(&k, &grid(13, 1.0)).unwrap().residual;
        assert!(r12 < 1e-3, "residual at 2^-12: {r12}");
        assert!(r12 / r13 >= 1.5, "ratio {}", r12 / r13);
    }

    #[test]
    fn ek_beta_zero_is_kernel() {
        let g = grid(8, 1.0);
        let k = KernelSpec::fractional(0.3);
        let t = resolvent_ek(&k, 0.0, &g).unwrap();
        for i in [1usize, 17, 200] {
            assert_eq!(t.ek_node(i), k.value(g.node(i)));
        }
    }

    #[test]
    fn ek_constant_kernel_exponential_solution() {
        // ODE oracle: u = 1 + beta int u  =>  u = e^{beta t}
        let g = grid(10, 1.0);
        let t = resolvent_ek(&KernelSpec::constant(1.0), 0.5, &g).unwrap();
        for i in [128usize, 512, 1024] {
            let exact = (0.5 * g.node(i)).exp();
            assert!(
                (t.ek_node(i) - exact).abs() < 1e-6 * exact,
                "E_K({}) = {} vs {exact}",
                g.node(i),
                t.ek_node(i)
            );
        }
    }

    #[test]
    fn ek_exponential_kernel_shifted_rate() {
        // K = e^{-t}, beta = 0.3  =>  E_K = e^{-0.7 t}
        let g = grid(10, 1.0);
        let t = resolvent_ek(&KernelSpec::exponential(1.0, 1.0), 0.3, &g).unwrap();
        for i in [64usize, 512, 1024] {
            let exact = (-0.7 * g.node(i)).exp();
            assert!(
                (t.ek_node(i) - exact).abs() < 1e-6,
                "E_K({}) = {}",
                g.node(i),
                t.ek_node(i)
            );
        }
    }

    #[test]
    fn pi_vanishes_for_constant_kernel() {
        let g = grid(8, 1.25);
        let t = resolvent_ek(&KernelSpec::constant(1.0), 0.0, &g).unwrap();
        let pi = pi_z(&t, 0.25, None).unwrap();
        assert!(pi.pi.iter().all(|p| p.abs() < 1e-12));
    }

    #[test]
    fn dpi_vanishes_for_single_exponential() {
        // L0' = 0: Pi_z constant in t
        let g = grid(9, 1.25);
        let t = resolvent_ek(&KernelSpec::exponential(1.0, 2.0), 0.0, &g).unwrap();
        let pi = pi_z(&t, 0.25, None).unwrap();
        let scale = pi.pi[0].abs();
        assert!(scale > 0.1); // Pi_z itself is nonzero
        for m in &pi.d_pi {
            assert!(m.abs() < 1e-9 * scale, "dPi = {m}");
        }
    }

    #[test]
    fn pi_fractional_matches_quadrature_oracle() {
        // oracle: Pi_z(0) = -int_0^z K(r) L0(z-r) dr with the exact closed
        // forms of K and L0
        let h = 0.3;
        let z = 0.25;
        let g = grid(12, 1.25);
        let t = resolvent_ek(&KernelSpec::fractional(h), 0.0, &g).unwrap();
        let pi = pi_z(&t, z, None).unwrap();
        let a = h + 0.5;
        // split at z/2; each half written with its own singular endpoint as
        // the integration variable (no cancellation in the argument)
        let f_left = |r: f64| r.powf(a - 1.0) / gamma(a) * (z - r).powf(-a) / gamma(1.0 - a);
        let f_right = |u: f64| (z - u).powf(a - 1.0) / gamma(a) * u.powf(-a) / gamma(1.0 - a);
        let mid = 0.5 * z;
        let oracle = -(graded_left(&f_left, 0.0, mid) + graded_left(&f_right, 0.0, mid));
        assert!(
            ((pi.pi[0] - oracle) / oracle).abs() < 2e-3,
            "Pi(0) = {} oracle {}",
            pi.pi[0],
            oracle
        );
        // beta = 0 and singular kernel: Pi_z(0) = -1 exactly in the continuum
        assert!((oracle + 1.0).abs() < 1e-9);
    }

    #[test]
    fn pi_route_consistency() {
        let g = grid(11, 1.25);
        let t = resolvent_ek(&KernelSpec::fractional(0.3), -0.5, &g).unwrap();
        let pi = pi_z(&t, 0.25, None).unwrap();
        check_pi_routes(&t, &pi, 10.0).unwrap();
        // monotone structure: Pi <= 0, dPi >= 0
        assert!(pi.pi.iter().all(|p| *p <= 1e-12));
        assert!(pi.d_pi.iter().all(|m| *m >= -1e-12));
    }

    #[test]
    fn kz_equals_shifted_kernel_for_beta_zero() {
        let h = 0.3;
        let z = 0.25;
        let g = grid(12, 1.25);
        let k = KernelSpec::fractional(h);
        let t = resolvent_ek(&k, 0.0, &g).unwrap();
        let mut pi = pi_z(&t, z, None).unwrap();
        let rep = kz_kernel(&t, &mut pi, 1e-2).unwrap();
        assert!(!rep.degenerate);
        assert!((rep.f_z).abs() < 1e-14);
        let mut worst = 0.0f64;
        for i in 1..=pi.kz.len() {
            let exact = k.value(i as f64 * g.dt + z);
            worst = worst.max(((pi.kz[i - 1] - exact) / exact).abs());
        }
        assert!(worst < 5e-3, "max rel deviation {worst}");
    }

    #[test]
    fn kz_constant_kernel_is_zero() {
        let g = grid(8, 1.25);
        let t = resolvent_ek(&KernelSpec::constant(1.0), 0.0, &g).unwrap();
        let mut pi = pi_z(&t, 0.25, None).unwrap();
        let rep = kz_kernel(&t, &mut pi, 1e-2).unwrap();
        assert!(rep.degenerate);
        assert!(pi.kz.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn kz_sandwich_with_negative_beta() {
        let g = grid(11, 1.25);
        let t = resolvent_ek(&KernelSpec::fractional(0.3), -1.0, &g).unwrap();
        let mut pi = pi_z(&t, 0.25, None).unwrap();
        let rep = kz_kernel(&t, &mut pi, 1e-2).unwrap();
        assert!(!rep.degenerate);
        assert!(rep.f_z > 0.0 && rep.worst_margin <= 0.0);
    }

    #[test]
    fn cond_exp_constant_kernel_classical_case() {
        // K = 1, beta = 0: E[X_T | F_t] = b (T - t) + X_t
        let g = grid(8, 1.0);
        let t = resolvent_ek(&KernelSpec::constant(1.0), 0.0, &g).unwrap();
        let pi = pi_z(&t, 0.25, None).unwrap();
        let co = cond_exp_coeffs(&t, &pi, 0.5, 0.75, 0.4, 0.3).unwrap();
        assert!((co.c0 - 0.4 * 0.25).abs() < 1e-12);
        assert!(co.c1_x0.abs() < 1e-12);
        assert!((co.c2 - 1.0).abs() < 1e-12);
        assert!(co.d_pi.iter().all(|m| m.abs() < 1e-12));
    }

    #[test]
    fn cond_exp_exponential_kernel_matches_classical_cir_mean() {
        // K = e^{-kappa t}, beta = 0: classical oracle
        // E[X_T|F_t] = (b/kappa)(1-e^{-kappa z}) + (1-e^{-kappa z}) x0 + e^{-kappa z} X_t
        let kappa = 1.3;
        let (b, x0) = (0.35, 0.2);
        let g = grid(10, 1.0);
        let t = resolvent_ek(&KernelSpec::exponential(1.0, kappa), 0.0, &g).unwrap();
        let z = 0.25;
        let pi = pi_z(&t, z, None).unwrap();
        let co = cond_exp_coeffs(&t, &pi, 0.5, 0.75, b, x0).unwrap();
        let ez = (-kappa * z as f64).exp();
        assert!((co.c0 - b / kappa * (1.0 - ez)).abs() < 1e-6);
        assert!((co.c1_x0 - x0 * (1.0 - ez)).abs() < 1e-6);
        assert!((co.c2 - ez).abs() < 1e-9);
        let dsum: f64 = co.d_pi.iter().sum();
        assert!(dsum.abs() < 1e-9);
    }

    #[test]
    fn cond_exp_grid_mismatch() {
        let g = grid(8, 1.0);
        let t = resolvent_ek(&KernelSpec::constant(1.0), 0.0, &g).unwrap();
        let pi = pi_z(&t, 0.25, None).unwrap();
        assert!(matches!(
            cond_exp_coeffs(&t, &pi, 0.5001, 0.7501, 0.4, 0.3),
            Err(Error::GridMismatch(_))
        ));
    }
}
