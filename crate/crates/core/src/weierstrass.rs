//! Immersed tori in R⁴ from a pair of spinors (Ψ solving D, Φ solving D∨).

use crate::dirac2d::DiracPotential;
use crate::error::{Error, Result};
use crate::field::{cell_point, PeriodicField};
use crate::format::fmt_f64;
use crate::lattice::{ExponentPair, Lattice};
use crate::linalg;
use crate::quasi::QuasiPeriodicFunction;
use faer::Mat;
use num_complex::Complex64 as C64;
use std::fmt::Write as _;

fn periodic_product(a: &PeriodicField, ea: ExponentPair, b: &PeriodicField, eb: ExponentPair) -> Result<PeriodicField> {
    let q = QuasiPeriodicFunction::scalar(ea.add(&eb), a.mul_full(b)?);
    Ok(q.rebase(ExponentPair::zero())?.components.remove(0))
}

/// The four derivatives x^k_z.
pub fn coordinate_derivatives(psi: &QuasiPeriodicFunction, phi: &QuasiPeriodicFunction) -> Result<[PeriodicField; 4]> {
    if !psi.is_spinor() || !phi.is_spinor() {
        return Err(Error::InvalidInput("coordinate derivatives need two spinors".into()));
    }
    let (k1, k2) = psi.multipliers();
    if k1.im.abs() > 1e-10 * k1.norm() || k2.im.abs() > 1e-10 * k2.norm() {
        return Err(Error::InvalidInput(format!("multipliers of Ψ are not real: ({k1:.6}, {k2:.6})")));
    }
    let (h1, h2) = phi.multipliers();
    if (k1 * h1 - 1.0).norm() > 1e-10 || (k2 * h2 - 1.0).norm() > 1e-10 {
        return Err(Error::InvalidInput("multipliers of Φ are not reciprocal to those of Ψ".into()));
    }
    let (ep, ef) = (psi.exponents, phi.exponents);
    let (epc, efc) = (ep.conj(), ef.conj());
    let (p1, p2) = (psi.component(0), psi.component(1));
    let (f1, f2) = (phi.component(0), phi.component(1));
    let (p2c, f2c) = (p2.conj(), f2.conj());
    let a = periodic_product(&f2c, efc, &p2c, epc)?; // conj Φ₂ · conj Ψ₂
    let b = periodic_product(f1, ef, p1, ep)?; // Φ₁Ψ₁
    let c = periodic_product(&f2c, efc, p1, ep)?; // conj Φ₂ · Ψ₁
    let d = periodic_product(f1, ef, &p2c, epc)?; // Φ₁ · conj Ψ₂
    let half = C64::new(0.5, 0.0);
    let ihalf = C64::new(0.0, 0.5);
    Ok([(&a + &b).scale(ihalf), (&a - &b).scale(half), (&c + &d).scale(half), (&c - &d).scale(ihalf)])
}

/// Surface x: cell → R⁴, each coordinate a real periodic part plus a linear part.
#[derive(Debug, Clone)]
pub struct ImmersedTorus {
    pub lattice: Lattice,
    /// Real-valued periodic parts, normalized so that x(0) = 0.
    pub periodic: [PeriodicField; 4],
    /// x^k ⊃ linear[k][0]·x + linear[k][1]·y.
    pub linear: [[f64; 2]; 4],
    /// |x^k(γ_j) − x^k(0)|.
    pub period_residuals: [[f64; 2]; 4],
    /// Largest coefficient of the discarded imaginary part, relative to the field.
    pub imaginary_defect: f64,
}

/// x^k = Re(∂⁻¹ x^k_z) − basepoint value, with zero modes a₀ giving 2Re(a₀z).
pub fn integrate_surface(xz: &[PeriodicField; 4]) -> ImmersedTorus {
    let l = *xz[0].lattice();
    let mut linear = [[0.0; 2]; 4];
    let mut residuals = [[0.0; 2]; 4];
    let mut imag: f64 = 0.0;
    let periodic = std::array::from_fn(|k| {
        let a = &xz[k];
        let a0 = a.coeff(0, 0);
        linear[k] = [2.0 * a0.re, -2.0 * a0.im];
        for (j, g) in [l.gamma1, l.gamma2].into_iter().enumerate() {
            residuals[k][j] = (2.0 * (a0 * g).re).abs();
        }
        let g = a.map_modes(|m, n, c| if (m, n) == (0, 0) { C64::new(0.0, 0.0) } else { c / l.symbols(m, n).0 });
        let re = g.real_part();
        let im_part = &g - &re;
        imag = imag.max(im_part.norm() / g.norm().max(1e-300));
        let mut re = re;
        let at0: f64 = re.coeffs().iter().map(|c| c.re).sum();
        re.set(0, 0, C64::new(-at0, 0.0));
        re
    });
    ImmersedTorus { lattice: l, periodic, linear, period_residuals: residuals, imaginary_defect: imag }
}

impl ImmersedTorus {
    pub fn eval(&self, z: C64) -> [f64; 4] {
        std::array::from_fn(|k| self.periodic[k].eval(z).re + self.linear[k][0] * z.re + self.linear[k][1] * z.im)
    }

    /// Points at (i/g)γ₁ + (j/g)γ₂, row-major in i.
    pub fn sample(&self, g: usize) -> Vec<[f64; 4]> {
        let vals: Vec<Vec<C64>> = self.periodic.iter().map(|f| f.eval_grid(g)).collect();
        (0..g * g)
            .map(|idx| {
                let z = cell_point(&self.lattice, idx / g, idx % g, g);
                std::array::from_fn(|k| vals[k][idx].re + self.linear[k][0] * z.re + self.linear[k][1] * z.im)
            })
            .collect()
    }

    pub fn max_period_residual(&self) -> f64 {
        self.period_residuals.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn is_closed(&self, tol: f64) -> bool {
        self.max_period_residual() <= tol
    }

    pub fn translated(&self, v: [f64; 4]) -> Self {
        let mut out = self.clone();
        for k in 0..4 {
            let c = out.periodic[k].coeff(0, 0);
            out.periodic[k].set(0, 0, c + v[k]);
        }
        out
    }

    /// Mesh text: `v x1 x2 x3 x4` per vertex, triangulated grid quads (wrapping when closed).
    pub fn to_obj(&self, g: usize) -> String {
        let closed = self.is_closed(1e-8);
        let side = if closed { g } else { g + 1 };
        let mut s = String::new();
        let vals: Vec<Vec<C64>> = if closed { self.periodic.iter().map(|f| f.eval_grid(g)).collect() } else { vec![] };
        for i in 0..side {
            for j in 0..side {
                let p = if closed {
                    let z = cell_point(&self.lattice, i, j, g);
                    let idx = i * g + j;
                    std::array::from_fn::<f64, 4, _>(|k| {
                        vals[k][idx].re + self.linear[k][0] * z.re + self.linear[k][1] * z.im
                    })
                } else {
                    self.eval(cell_point(&self.lattice, i, j, g))
                };
                let _ = writeln!(s, "v {} {} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]), fmt_f64(p[3]));
            }
        }
        let id = |i: usize, j: usize| (i % side) * side + (j % side) + 1;
        for i in 0..g {
            for j in 0..g {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                let _ = writeln!(s, "f {a} {b} {c}");
                let _ = writeln!(s, "f {a} {c} {d}");
            }
        }
        s
    }
}

/// W = 4·area·Σ|U_k|², i.e. 4∫|U|² over one cell.
pub fn willmore(pot: &DiracPotential) -> f64 {
    4.0 * pot.lattice().area() * pot.u.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SphereFit {
    pub center: [f64; 4],
    pub radius: f64,
    pub max_deviation: f64,
}

/// Least-squares sphere |x − c|² = r² through the surface sampled on a `g × g` grid.
pub fn sphere_fit(t: &ImmersedTorus, g: usize) -> Result<SphereFit> {
    let pts = t.sample(g);
    // |x|² = 2c·x + (r² − |c|²), linear in (c, k).
    let a = Mat::from_fn(pts.len(), 5, |i, j| if j < 4 { 2.0 * pts[i][j] } else { 1.0 });
    let b: Vec<f64> = pts.iter().map(|p| p.iter().map(|v| v * v).sum()).collect();
    let sol = linalg::lstsq_real(&a, &b)?;
    let center = [sol[0], sol[1], sol[2], sol[3]];
    let r2 = sol[4] + center.iter().map(|v| v * v).sum::<f64>();
    if !(r2 > 1e-20) {
        return Err(Error::Numerical("degenerate sphere fit".into()));
    }
    let radius = r2.sqrt();
    let max_deviation = pts
        .iter()
        .map(|p| ((0..4).map(|k| (p[k] - center[k]).powi(2)).sum::<f64>().sqrt() - radius).abs())
        .fold(0.0, f64::max);
    Ok(SphereFit { center, radius, max_deviation })
}
