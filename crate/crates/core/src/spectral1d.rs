//! One-dimensional reductions: Hill operators −ψ'' + uψ = Eψ and the
//! Zakharov–Shabat system obtained from y-only Dirac potentials.

use crate::dirac2d::{self, DiracPotential};
use crate::error::{Error, Result};
use crate::fft::fft1;
use crate::format::fmt_f64;
use crate::quasi::QuasiPeriodicFunction;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt::Write as _;

type M2 = [[C64; 2]; 2];

const Z: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

fn mm(a: &M2, b: &M2) -> M2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn lin(terms: &[(f64, &M2)]) -> M2 {
    let mut out = [[Z; 2]; 2];
    for (s, m) in terms {
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += m[i][j] * *s;
            }
        }
    }
    out
}

fn max_abs_diff(a: &M2, b: &M2) -> f64 {
    let mut w: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            w = w.max((a[i][j] - b[i][j]).norm());
        }
    }
    w
}

/// Periodic potential u(x) = Σ c_n e^{2πinx/T}.
#[derive(Debug, Clone, PartialEq)]
pub struct HillPotential {
    pub period: f64,
    pub coeffs: Vec<(i64, C64)>,
}

impl HillPotential {
    pub fn new(period: f64, coeffs: Vec<(i64, C64)>) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::InvalidInput("period must be positive".into()));
        }
        Ok(Self { period, coeffs })
    }

    pub fn zero(period: f64) -> Result<Self> {
        Self::new(period, vec![])
    }

    /// Trigonometric interpolant of samples u(jT/K), j = 0..K.
    pub fn from_samples(period: f64, samples: &[C64]) -> Result<Self> {
        let k = samples.len();
        if k == 0 {
            return Err(Error::InvalidInput("no potential samples".into()));
        }
        let mut a = samples.to_vec();
        fft1(&mut a, false);
        let half = (k as i64 - 1) / 2;
        let coeffs = (-half..=half)
            .map(|n| (n, a[n.rem_euclid(k as i64) as usize] / k as f64))
            .filter(|(_, c)| *c != Z)
            .collect();
        Self::new(period, coeffs)
    }

    pub fn eval(&self, x: f64) -> C64 {
        let w = 2.0 * PI / self.period;
        self.coeffs.iter().map(|&(n, c)| c * C64::from_polar(1.0, w * n as f64 * x)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|(_, c)| c.norm()).sum()
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|&(n, c)| {
            let partner = self.coeffs.iter().find(|(m, _)| *m == -n).map(|p| p.1).unwrap_or(Z);
            (c - partner.conj()).norm() < 1e-14
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonodromyMatrix {
    pub matrix: [[C64; 2]; 2],
    /// Spectral parameter (E for Hill, k for the Zakharov–Shabat system).
    pub parameter: C64,
    pub period: f64,
}

impl MonodromyMatrix {
    pub fn trace(&self) -> C64 {
        self.matrix[0][0] + self.matrix[1][1]
    }

    pub fn det(&self) -> C64 {
        self.matrix[0][0] * self.matrix[1][1] - self.matrix[0][1] * self.matrix[1][0]
    }

    /// Eigenvalues, the one with |κ| ≥ 1 first.
    pub fn multipliers(&self) -> (C64, C64) {
        let t = self.trace();
        let d = self.det();
        let r = (t * t - 4.0 * d).sqrt();
        let (a, b) = ((t + r) / 2.0, (t - r) / 2.0);
        if a.norm() >= b.norm() {
            (a, b)
        } else {
            (b, a)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HillOptions {
    /// RK4 steps per period; `None` picks a count from |E| and the potential size.
    pub steps: Option<usize>,
    /// Largest accepted Richardson error estimate of the monodromy entries.
    pub accuracy_tol: f64,
    pub check_accuracy: bool,
}

impl Default for HillOptions {
    fn default() -> Self {
        Self { steps: None, accuracy_tol: 1e-10, check_accuracy: true }
    }
}

fn auto_steps(period: f64, scale: f64) -> usize {
    let k = (period * (scale + 1.0).sqrt() / (2.0 * PI)).ceil().max(1.0) as usize;
    4096 * k
}

/// Result of one Hill integration: M, dM/dE, d²M/dE².
struct HillSolution {
    m: M2,
    dm: M2,
    ddm: M2,
}

fn integrate_hill(u: &HillPotential, e: C64, steps: usize, derivatives: bool) -> HillSolution {
    let h = u.period / steps as f64;
    let samples: Vec<C64> = (0..=2 * steps).map(|j| u.eval(j as f64 * h / 2.0)).collect();
    let a = |j: usize| -> M2 { [[Z, ONE], [samples[j] - e, Z]] };
    let ae: M2 = [[Z, Z], [-ONE, Z]];
    let mut y: M2 = [[ONE, Z], [Z, ONE]];
    let mut ye: M2 = [[Z; 2]; 2];
    let mut yee: M2 = [[Z; 2]; 2];
    // State (Y, Y_E, Y_EE) with Y' = AY, Y_E' = AY_E + A_E Y, Y_EE' = AY_EE + 2A_E Y_E.
    let f = |a: &M2, y: &M2, ye: &M2, yee: &M2| -> (M2, M2, M2) {
        let d0 = mm(a, y);
        if !derivatives {
            return (d0, [[Z; 2]; 2], [[Z; 2]; 2]);
        }
        let d1 = lin(&[(1.0, &mm(a, ye)), (1.0, &mm(&ae, y))]);
        let d2 = lin(&[(1.0, &mm(a, yee)), (2.0, &mm(&ae, ye))]);
        (d0, d1, d2)
    };
    for s in 0..steps {
        let (a0, a1, a2) = (a(2 * s), a(2 * s + 1), a(2 * s + 2));
        let k1 = f(&a0, &y, &ye, &yee);
        let s2 = (lin(&[(1.0, &y), (h / 2.0, &k1.0)]), lin(&[(1.0, &ye), (h / 2.0, &k1.1)]), lin(&[(1.0, &yee), (h / 2.0, &k1.2)]));
        let k2 = f(&a1, &s2.0, &s2.1, &s2.2);
        let s3 = (lin(&[(1.0, &y), (h / 2.0, &k2.0)]), lin(&[(1.0, &ye), (h / 2.0, &k2.1)]), lin(&[(1.0, &yee), (h / 2.0, &k2.2)]));
        let k3 = f(&a1, &s3.0, &s3.1, &s3.2);
        let s4 = (lin(&[(1.0, &y), (h, &k3.0)]), lin(&[(1.0, &ye), (h, &k3.1)]), lin(&[(1.0, &yee), (h, &k3.2)]));
        let k4 = f(&a2, &s4.0, &s4.1, &s4.2);
        let c = h / 6.0;
        y = lin(&[(1.0, &y), (c, &k1.0), (2.0 * c, &k2.0), (2.0 * c, &k3.0), (c, &k4.0)]);
        if derivatives {
            ye = lin(&[(1.0, &ye), (c, &k1.1), (2.0 * c, &k2.1), (2.0 * c, &k3.1), (c, &k4.1)]);
            yee = lin(&[(1.0, &yee), (c, &k1.2), (2.0 * c, &k2.2), (2.0 * c, &k3.2), (c, &k4.2)]);
        }
    }
    HillSolution { m: y, dm: ye, ddm: yee }
}

fn hill_steps(u: &HillPotential, e: C64, opts: &HillOptions) -> usize {
    opts.steps.unwrap_or_else(|| auto_steps(u.period, e.norm() + u.max_abs()))
}

fn accuracy_check(u: &HillPotential, e: C64, steps: usize, m: &M2, opts: &HillOptions) -> Result<()> {
    if !opts.check_accuracy {
        return Ok(());
    }
    if steps < 8 {
        return Err(Error::Accuracy(format!("{steps} steps per period is too few")));
    }
    let coarse = integrate_hill(u, e, steps / 2, false).m;
    let est = max_abs_diff(m, &coarse) / 15.0;
    if !(est <= opts.accuracy_tol) {
        return Err(Error::Accuracy(format!(
            "monodromy error estimate {est:.3e} at E = {e} exceeds {:.1e} with {steps} steps",
            opts.accuracy_tol
        )));
    }
    Ok(())
}

/// Monodromy of −ψ'' + uψ = Eψ over one period in the basis (ψ, ψ').
pub fn schrodinger_monodromy(u: &HillPotential, e: C64, opts: &HillOptions) -> Result<MonodromyMatrix> {
    let steps = hill_steps(u, e, opts);
    let sol = integrate_hill(u, e, steps, false);
    accuracy_check(u, e, steps, &sol.m, opts)?;
    Ok(MonodromyMatrix { matrix: sol.m, parameter: e, period: u.period })
}

/// Δ(E) = tr M(E).
pub fn discriminant(u: &HillPotential, e: C64, opts: &HillOptions) -> Result<C64> {
    Ok(schrodinger_monodromy(u, e, opts)?.trace())
}

/// Δ, Δ′ and Δ″ at E from the variational equations.
pub fn discriminant_derivatives(u: &HillPotential, e: C64, opts: &HillOptions) -> Result<(C64, C64, C64, M2)> {
    let steps = hill_steps(u, e, opts);
    let sol = integrate_hill(u, e, steps, true);
    accuracy_check(u, e, steps, &sol.m, opts)?;
    let tr = |m: &M2| m[0][0] + m[1][1];
    Ok((tr(&sol.m), tr(&sol.dm), tr(&sol.ddm), sol.m))
}

/// |M_s − M_{2s}| / |M_{2s} − M_{4s}|, ≈ 16 for a fourth-order integrator.
pub fn richardson_factor(u: &HillPotential, e: C64, steps: usize) -> f64 {
    let a = integrate_hill(u, e, steps, false).m;
    let b = integrate_hill(u, e, 2 * steps, false).m;
    let c = integrate_hill(u, e, 4 * steps, false).m;
    max_abs_diff(&a, &b) / max_abs_diff(&b, &c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    /// M = ±I: an unglued resonant pair.
    Diagonalizable,
    /// M ∓ I nilpotent and nonzero: the pair is glued.
    Jordan,
    /// Between the two thresholds.
    Indeterminate,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResonantPoint {
    pub energy: C64,
    /// +1 for Δ = 2, −1 for Δ = −2.
    pub sign: i32,
    pub classification: Classification,
    pub trace_defect: f64,
    pub off_diagonal: f64,
    pub distance_from_identity: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ResonanceOptions {
    pub hill: HillOptions,
    /// Scan density along the real energy axis.
    pub points_per_unit: usize,
    pub diagonal_tol: f64,
    pub jordan_tol: f64,
    pub trace_tol: f64,
}

impl Default for ResonanceOptions {
    fn default() -> Self {
        Self { hill: HillOptions::default(), points_per_unit: 400, diagonal_tol: 1e-8, jordan_tol: 1e-3, trace_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceScan {
    pub resonant: Vec<ResonantPoint>,
    /// Simple roots of Δ ∓ 2 (band edges), which are not resonant.
    pub branch_points: Vec<(C64, i32)>,
}

fn classify(m: &M2, sign: f64, opts: &ResonanceOptions) -> (Classification, f64, f64) {
    let off = m[0][1].norm().max(m[1][0].norm());
    let id: M2 = [[C64::new(sign, 0.0), Z], [Z, C64::new(sign, 0.0)]];
    let dist = max_abs_diff(m, &id);
    let c = if off < opts.diagonal_tol && dist < opts.diagonal_tol {
        Classification::Diagonalizable
    } else if dist > opts.jordan_tol {
        Classification::Jordan
    } else {
        Classification::Indeterminate
    };
    (c, off, dist)
}

fn newton<F: Fn(C64) -> Result<(C64, C64)>>(f: F, mut x: C64, tol: f64) -> Result<Option<C64>> {
    for _ in 0..60 {
        let (v, dv) = f(x)?;
        if dv.norm() == 0.0 || !dv.is_finite() {
            return Ok(None);
        }
        let step = v / dv;
        x -= step;
        if step.norm() < tol {
            return Ok(Some(x));
        }
        if step.norm() > 1.0 {
            return Ok(None);
        }
    }
    Ok(None)
}

/// Energies in [e_min, e_max] (refined into the complex plane) where Δ = ±2.
///
/// Local minima of |Δ ∓ 2| on the scan are polished by Newton on Δ′; a double
/// root with |Δ ∓ 2| below the trace tolerance is a resonant point. Otherwise
/// Newton on Δ ∓ 2 locates a simple root, reported as a branch point.
pub fn resonance_scan(u: &HillPotential, window: (f64, f64), sign: i32, opts: &ResonanceOptions) -> Result<ResonanceScan> {
    let (a, b) = window;
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(Error::InvalidInput("energy window must be a bounded interval".into()));
    }
    if sign != 1 && sign != -1 {
        return Err(Error::InvalidInput("sign must be +1 or -1".into()));
    }
    let s = 2.0 * sign as f64;
    let n = ((b - a) * opts.points_per_unit as f64).ceil() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|j| a + (b - a) * j as f64 / (n - 1) as f64).collect();
    let vals: Vec<f64> = grid
        .par_iter()
        .map(|&e| discriminant(u, C64::new(e, 0.0), &opts.hill).map(|d| (d - s).norm()))
        .collect::<Result<_>>()?;
    let mut resonant: Vec<ResonantPoint> = Vec::new();
    let mut branch: Vec<(C64, i32)> = Vec::new();
    let near = |list: &[C64], x: C64| list.iter().any(|y| (x - y).norm() < 1e-7);
    for j in 0..n {
        let left = if j > 0 { vals[j - 1] } else { f64::INFINITY };
        let right = if j + 1 < n { vals[j + 1] } else { f64::INFINITY };
        if !(vals[j] <= left && vals[j] <= right && vals[j] < 0.05) {
            continue;
        }
        let e0 = C64::new(grid[j], 0.0);
        let d1 = |x: C64| discriminant_derivatives(u, x, &opts.hill).map(|(_, d1, d2, _)| (d1, d2));
        let mut found = false;
        if let Some(x) = newton(d1, e0, 1e-13)? {
            let (d, _, _, m) = discriminant_derivatives(u, x, &opts.hill)?;
            let defect = (d - s).norm();
            let inside = x.re >= a - 1e-9 && x.re <= b + 1e-9;
            if defect < opts.trace_tol && inside {
                found = true;
                let known: Vec<C64> = resonant.iter().map(|r| r.energy).collect();
                if !near(&known, x) {
                    let (classification, off, dist) = classify(&m, sign as f64, opts);
                    resonant.push(ResonantPoint {
                        energy: x,
                        sign,
                        classification,
                        trace_defect: defect,
                        off_diagonal: off,
                        distance_from_identity: dist,
                    });
                }
            }
        }
        if !found {
            let g = |x: C64| discriminant_derivatives(u, x, &opts.hill).map(|(d, d1, _, _)| (d - s, d1));
            match newton(g, e0, 1e-13)? {
                Some(x) => {
                    let known: Vec<C64> = branch.iter().map(|p| p.0).collect();
                    let inside = x.re >= a - 1e-9 && x.re <= b + 1e-9;
                    if inside && !near(&known, x) {
                        branch.push((x, sign));
                    }
                }
                None => {
                    return Err(Error::NonConvergence(format!(
                        "root of Δ ∓ 2 near E = {:.6} did not converge",
                        grid[j]
                    )))
                }
            }
        }
    }
    resonant.sort_by(|p, q| p.energy.re.total_cmp(&q.energy.re));
    branch.sort_by(|p, q| p.0.re.total_cmp(&q.0.re));
    Ok(ResonanceScan { resonant, branch_points: branch })
}

/// Resonant points only; see [`resonance_scan`].
pub fn resonant_points(u: &HillPotential, window: (f64, f64), sign: i32, opts: &ResonanceOptions) -> Result<Vec<ResonantPoint>> {
    Ok(resonance_scan(u, window, sign, opts)?.resonant)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanRow {
    pub energy: C64,
    pub delta: C64,
    pub kappa_plus: C64,
    pub kappa_minus: C64,
}

pub fn discriminant_scan(u: &HillPotential, energies: &[C64], opts: &HillOptions) -> Result<Vec<ScanRow>> {
    energies
        .par_iter()
        .map(|&e| {
            let m = schrodinger_monodromy(u, e, opts)?;
            let (kp, km) = m.multipliers();
            Ok(ScanRow { energy: e, delta: m.trace(), kappa_plus: kp, kappa_minus: km })
        })
        .collect()
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut s = String::from("E_re,E_im,delta_re,delta_im,kappa_plus_re,kappa_plus_im,kappa_minus_re,kappa_minus_im\n");
    for r in rows {
        let v = [r.energy, r.delta, r.kappa_plus, r.kappa_minus];
        let cols: Vec<String> = v.iter().flat_map(|c| [fmt_f64(c.re), fmt_f64(c.im)]).collect();
        let _ = writeln!(s, "{}", cols.join(","));
    }
    s
}

fn y_profile(pot: &DiracPotential) -> Result<(Vec<(i64, C64)>, f64)> {
    let l = pot.lattice();
    if !l.is_rectangular() || l.gamma1.im.abs() > 1e-14 || l.gamma2.re.abs() > 1e-14 {
        return Err(Error::InvalidInput("y-reduction needs a rectangular lattice (a, ib)".into()));
    }
    if pot.u.support().iter().any(|&(m, _)| m != 0) {
        return Err(Error::InvalidInput("potential depends on x".into()));
    }
    let coeffs = pot.u.support().into_iter().map(|(_, n)| (n, pot.u.coeff(0, n))).collect();
    Ok((coeffs, l.gamma2.im))
}

/// Monodromy over one y-period of Y′ = [[ik, −2iŪ], [−2iU, −ik]]Y, the x-reduction
/// of D at x-exponent k.
pub fn nls_monodromy(pot: &DiracPotential, k: C64, steps: Option<usize>) -> Result<MonodromyMatrix> {
    let (coeffs, period) = y_profile(pot)?;
    let u = HillPotential::new(period, coeffs)?;
    let steps = steps.unwrap_or_else(|| auto_steps(period, 4.0 * (k.norm() + 2.0 * u.max_abs()).powi(2)));
    let h = period / steps as f64;
    let samples: Vec<C64> = (0..=2 * steps).map(|j| u.eval(j as f64 * h / 2.0)).collect();
    let a = |j: usize| -> M2 {
        let v = samples[j];
        [[I * k, -2.0 * I * v.conj()], [-2.0 * I * v, -I * k]]
    };
    let mut y: M2 = [[ONE, Z], [Z, ONE]];
    for s in 0..steps {
        let (a0, a1, a2) = (a(2 * s), a(2 * s + 1), a(2 * s + 2));
        let k1 = mm(&a0, &y);
        let k2 = mm(&a1, &lin(&[(1.0, &y), (h / 2.0, &k1)]));
        let k3 = mm(&a1, &lin(&[(1.0, &y), (h / 2.0, &k2)]));
        let k4 = mm(&a2, &lin(&[(1.0, &y), (h, &k3)]));
        let c = h / 6.0;
        y = lin(&[(1.0, &y), (c, &k1), (2.0 * c, &k2), (2.0 * c, &k3), (c, &k4)]);
    }
    Ok(MonodromyMatrix { matrix: y, parameter: k, period })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionCheck {
    pub defect: f64,
    pub nls_multipliers: (C64, C64),
    /// y-multipliers e^{iTθ} from the converged part of the x-exponent slice.
    pub slice_multipliers: Vec<C64>,
}

/// Compares the Zakharov–Shabat multipliers at k with the y-multipliers of the
/// truncated 2D operator restricted to x-exponent μ + ν = k.
pub fn reduction_crosscheck(pot: &DiracPotential, k: C64, cutoff: usize) -> Result<ReductionCheck> {
    let (_, period) = y_profile(pot)?;
    let m = nls_monodromy(pot, k, None)?;
    let (kp, km) = m.multipliers();
    let thetas = dirac2d::theta_slice(pot, k, false, cutoff)?;
    let window = cutoff as f64 / 4.0;
    let mut slice = Vec::new();
    let mut defect: f64 = 0.0;
    let rel = |a: C64, b: C64| (a - b).norm() / a.norm().max(b.norm()).max(1.0);
    for (theta, _) in &thetas {
        if theta.norm() > window {
            continue;
        }
        let kappa = (I * theta * period).exp();
        defect = defect.max(rel(kappa, kp).min(rel(kappa, km)));
        slice.push(kappa);
    }
    for target in [kp, km] {
        let best = slice.iter().map(|&s| rel(s, target)).fold(f64::INFINITY, f64::min);
        defect = defect.max(best);
    }
    Ok(ReductionCheck { defect, nls_multipliers: (kp, km), slice_multipliers: slice })
}

/// x-exponent μ + ν of a y-only quasi-periodic function.
fn x_exponent(f: &QuasiPeriodicFunction) -> C64 {
    f.exponents.mu + f.exponents.nu
}

/// Explicit kernel for y-only data: ω = (a₁b₁ − a₂b₂)/(s_a + s_b), where
/// s = μ + ν is the x-exponent. With a = ψ and b = Φᴰ this solves
/// ∂ω = Φᴰ₁ψ₁, ∂̄ω = −Φᴰ₂ψ₂; with a = φ and b = Ψᴰ it gives the dual kernel.
/// The denominator is k(λ) − k₁.
pub fn omega_1d(a: &QuasiPeriodicFunction, b: &QuasiPeriodicFunction) -> Result<QuasiPeriodicFunction> {
    if !a.is_spinor() || !b.is_spinor() {
        return Err(Error::InvalidInput("ω needs two spinors".into()));
    }
    for f in [a, b] {
        if f.components.iter().any(|c| c.support().iter().any(|&(m, _)| m != 0)) {
            return Err(Error::InvalidInput("explicit kernels need y-only spinors".into()));
        }
    }
    let denom = x_exponent(a) + x_exponent(b);
    if denom.norm() < 1e-10 {
        return Err(Error::Pole(format!("k(λ) − k₁ = {denom:.3e}")));
    }
    let num = &a.component(0).mul_full(b.component(0))? - &a.component(1).mul_full(b.component(1))?;
    Ok(QuasiPeriodicFunction::scalar(a.exponents.add(&b.exponents), num.scale(denom.inv())))
}
