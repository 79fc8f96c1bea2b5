//! Infinitesimal Darboux deformations in the (p, q) form
//!
//! L:  ∂̄ψ₁ = pψ₂,  ∂ψ₂ = qψ₁        dual:  ∂̄φ₁ = −qφ₂,  ∂φ₂ = −pφ₁
//!
//! With p = Ū and q = −U these are exactly D and D∨, so slice
//! eigenfunctions can be used without conversion.

use crate::dirac2d::{self, DiracPotential, SliceOptions};
use crate::error::{Error, Result};
use crate::field::{Direction, PeriodicField};
use crate::lattice::ExponentPair;
use crate::quasi::QuasiPeriodicFunction;
use num_complex::Complex64 as C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Residual bound for pair members (coefficient norm, relative to the spinor).
pub const PAIR_RESIDUAL_TOL: f64 = 1e-8;
/// Tolerance on κ(Ψᴰ)·κ(Φᴰ) = (1, 1).
pub const RECIPROCITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PQPotential {
    pub p: PeriodicField,
    pub q: PeriodicField,
}

impl PQPotential {
    pub fn from_dirac(pot: &DiracPotential) -> Self {
        Self { p: pot.u.conj(), q: -&pot.u }
    }

    /// U = −q; fails unless p = conj U.
    pub fn to_dirac(&self) -> Result<DiracPotential> {
        let u = -&self.q;
        if (&self.p - &u.conj()).norm() > 1e-12 * (1.0 + u.norm()) {
            return Err(Error::InvalidInput("p ≠ conj(−q): not of Dirac type".into()));
        }
        Ok(DiracPotential::general(u))
    }

    /// Periodic parts of (∂̄ψ₁ − pψ₂, ∂ψ₂ − qψ₁).
    pub fn residual(&self, psi: &QuasiPeriodicFunction) -> Result<[PeriodicField; 2]> {
        let e = psi.exponents;
        let (a, b) = (psi.component(0), psi.component(1));
        Ok([
            &a.apply_shifted(Direction::Antiholomorphic, e.nu) - &self.p.mul_full(b)?,
            &b.apply_shifted(Direction::Holomorphic, e.mu) - &self.q.mul_full(a)?,
        ])
    }

    /// Periodic parts of (∂̄φ₁ + qφ₂, ∂φ₂ + pφ₁).
    pub fn dual_residual(&self, phi: &QuasiPeriodicFunction) -> Result<[PeriodicField; 2]> {
        let e = phi.exponents;
        let (a, b) = (phi.component(0), phi.component(1));
        Ok([
            &a.apply_shifted(Direction::Antiholomorphic, e.nu) + &self.q.mul_full(b)?,
            &b.apply_shifted(Direction::Holomorphic, e.mu) + &self.p.mul_full(a)?,
        ])
    }
}

fn pair_norm(r: &[PeriodicField; 2]) -> f64 {
    (r[0].norm().powi(2) + r[1].norm().powi(2)).sqrt()
}

/// Distinguished solutions Ψᴰ of L and Φᴰ of the dual system with reciprocal multipliers.
#[derive(Debug, Clone)]
pub struct DarbouxPair {
    pub pq: PQPotential,
    pub psi_d: QuasiPeriodicFunction,
    pub phi_d: QuasiPeriodicFunction,
}

impl DarbouxPair {
    pub fn new(pq: PQPotential, psi_d: QuasiPeriodicFunction, phi_d: QuasiPeriodicFunction) -> Result<Self> {
        if !psi_d.is_spinor() || !phi_d.is_spinor() {
            return Err(Error::InvalidPair("pair members must be spinors".into()));
        }
        let r1 = pair_norm(&pq.residual(&psi_d)?) / psi_d.norm().max(1e-300);
        let r2 = pair_norm(&pq.dual_residual(&phi_d)?) / phi_d.norm().max(1e-300);
        if r1 > PAIR_RESIDUAL_TOL {
            return Err(Error::InvalidPair(format!("Ψᴰ residual {r1:.3e}")));
        }
        if r2 > PAIR_RESIDUAL_TOL {
            return Err(Error::InvalidPair(format!("Φᴰ residual {r2:.3e}")));
        }
        let (a1, a2) = psi_d.multipliers();
        let (b1, b2) = phi_d.multipliers();
        let (p1, p2) = (a1 * b1, a2 * b2);
        let bad = (p1 - 1.0).norm().max((p2 - 1.0).norm());
        if !(bad <= RECIPROCITY_TOL) {
            return Err(Error::InvalidPair(format!(
                "multipliers are not reciprocal: products ({p1:.6}, {p2:.6})"
            )));
        }
        Ok(Self { pq, psi_d, phi_d })
    }

    /// κ̂ = multipliers of Ψᴰ.
    pub fn multipliers(&self) -> (C64, C64) {
        self.psi_d.multipliers()
    }
}

/// Pair from slice eigenfunctions: Ψᴰ from the μ-slice of D, Φᴰ from the μ-slice of D∨.
pub fn build_pair(
    pot: &DiracPotential,
    mu_psi: C64,
    index_psi: usize,
    mu_phi: C64,
    index_phi: usize,
    opts: &SliceOptions,
) -> Result<DarbouxPair> {
    let psi = dirac2d::floquet_function(pot, mu_psi, index_psi, false, opts)?;
    let phi = dirac2d::floquet_function(pot, mu_phi, index_phi, true, opts)?;
    DarbouxPair::new(PQPotential::from_dirac(pot), psi, phi)
}

/// Solution of the dual system with multipliers 1/κ̂ for a given Ψᴰ.
///
/// The μ-slice of D∨ at −ν̄ contains the exponents of 1/conj κ̂; the star
/// involution (φ₁, φ₂) ↦ (conj φ₂, −conj φ₁) then conjugates the multipliers.
pub fn reciprocal_partner(pot: &DiracPotential, psi_d: &QuasiPeriodicFunction, opts: &SliceOptions) -> Result<QuasiPeriodicFunction> {
    let e = psi_d.exponents;
    let (mu, target) = (-e.nu.conj(), -e.mu.conj());
    let o = SliceOptions { keep_vectors: false, residual_tol: f64::INFINITY, ..*opts };
    let slice = dirac2d::slice_spectrum(pot, mu, true, &o)?;
    let (index, gap) = slice
        .nus()
        .iter()
        .enumerate()
        .map(|(k, nu)| (k, (nu - target).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::InvalidPair("empty dual slice".into()))?;
    if gap > 1e-8 * (1.0 + target.norm()) {
        return Err(Error::InvalidPair(format!("no dual solution with reciprocal multipliers (gap {gap:.3e})")));
    }
    dirac2d::floquet_function(pot, mu, index, true, opts)?.star_involution()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Side {
    /// ω from (ψ, Φᴰ): ∂ω = Φᴰ₁ψ₁, ∂̄ω = −Φᴰ₂ψ₂.
    Direct,
    /// ω∨ from (φ, Ψᴰ): ∂ω∨ = φ₁Ψᴰ₁, ∂̄ω∨ = −φ₂Ψᴰ₂.
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// The unique quasi-periodic solution; needs a multiplier ratio ≠ (1, 1).
    Floquet,
    /// ω(0) = c; needs ratio (1, 1) and vanishing periods.
    Basepoint(C64),
}

/// Closed 1-form a dz + b dz̄ with quasi-periodic coefficients on common exponents.
#[derive(Debug, Clone)]
pub struct ClosedForm {
    pub exponents: ExponentPair,
    pub dz: PeriodicField,
    pub dzbar: PeriodicField,
}

impl ClosedForm {
    /// ‖∂̄a − ∂b‖ relative to the coefficient norms.
    pub fn closedness_defect(&self) -> f64 {
        let e = self.exponents;
        let lhs = self.dz.apply_shifted(Direction::Antiholomorphic, e.nu);
        let rhs = self.dzbar.apply_shifted(Direction::Holomorphic, e.mu);
        (&lhs - &rhs).norm() / (lhs.norm() + rhs.norm()).max(1e-300)
    }

    /// Multipliers of the primitive, i.e. of the exponent pair.
    pub fn multipliers(&self) -> (C64, C64) {
        self.exponents.multipliers(self.dz.lattice())
    }
}

fn scalar_parts(x: &QuasiPeriodicFunction, k: usize, y: &QuasiPeriodicFunction, l: usize) -> Result<PeriodicField> {
    x.component(k).mul_full(y.component(l))
}

/// The form dω for `psi` (Direct) or dω∨ for a dual solution `psi` (Dual).
pub fn form(psi: &QuasiPeriodicFunction, pair: &DarbouxPair, side: Side) -> Result<ClosedForm> {
    if !psi.is_spinor() {
        return Err(Error::InvalidInput("ω needs a spinor".into()));
    }
    let other = match side {
        Side::Direct => &pair.phi_d,
        Side::Dual => &pair.psi_d,
    };
    Ok(ClosedForm {
        exponents: psi.exponents.add(&other.exponents),
        dz: scalar_parts(other, 0, psi, 0)?,
        dzbar: -&scalar_parts(other, 1, psi, 1)?,
    })
}

fn exprel(a: C64) -> C64 {
    if a.norm() < 1e-5 {
        1.0 + a / 2.0 + a * a / 6.0 + a * a * a / 24.0
    } else {
        (a.exp() - 1.0) / a
    }
}

/// ∫₀^{γ_j} of the form along straight segments, integrated mode by mode in closed form.
pub fn form_periods(f: &ClosedForm) -> (C64, C64) {
    let l = *f.dz.lattice();
    let e = f.exponents;
    let n = f.dz.cutoff().max(f.dzbar.cutoff());
    let a = f.dz.with_cutoff(n);
    let b = f.dzbar.with_cutoff(n);
    let mut out = [ZERO; 2];
    for (j, g) in [l.gamma1, l.gamma2].into_iter().enumerate() {
        for (m, nn, ak) in a.modes() {
            let bk = b.coeff(m, nn);
            if ak == ZERO && bk == ZERO {
                continue;
            }
            let (d, db) = l.symbols(m, nn);
            let rate = (e.mu + d) * g + (e.nu + db) * g.conj();
            out[j] += exprel(rate) * (ak * g + bk * g.conj());
        }
    }
    (out[0], out[1])
}

/// (I₁, I₂) for ω built from `psi` and the pair (direct side).
pub fn period_integrals(psi: &QuasiPeriodicFunction, pair: &DarbouxPair) -> Result<(C64, C64)> {
    Ok(form_periods(&form(psi, pair, Side::Direct)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Primary {
    Del,
    Delbar,
}

/// Primitive of a closed form. The `Del` variant solves the ∂-equation mode by
/// mode and falls back to the ∂̄-equation on ∂-resonant modes; `Delbar` the reverse.
fn primitive(f: &ClosedForm, norm: Normalization, primary: Primary) -> Result<QuasiPeriodicFunction> {
    let l = *f.dz.lattice();
    let e = f.exponents;
    let (k1, k2) = f.multipliers();
    let trivial = (k1 - 1.0).norm() < 1e-10 && (k2 - 1.0).norm() < 1e-10;
    let scale = f.dz.norm() + f.dzbar.norm();
    let (i1, i2) = form_periods(f);
    let periods_vanish = i1.norm().max(i2.norm()) <= 1e-10 * (1.0 + scale);
    match norm {
        Normalization::Floquet if trivial => {
            return Err(if periods_vanish {
                Error::InvalidInput(
                    "multiplier ratio is (1, 1): the Floquet normalization is not unique, use a basepoint".into(),
                )
            } else {
                Error::Obstruction(format!("multiplier ratio (1, 1) with nonzero periods ({i1:.3e}, {i2:.3e})"))
            });
        }
        Normalization::Basepoint(_) if !trivial => {
            return Err(Error::InvalidInput(format!(
                "basepoint normalization needs multiplier ratio (1, 1), got ({k1:.6}, {k2:.6})"
            )));
        }
        Normalization::Basepoint(_) if !periods_vanish => {
            return Err(Error::Obstruction(format!("nonzero periods ({i1:.3e}, {i2:.3e})")));
        }
        _ => {}
    }
    let n = f.dz.cutoff().max(f.dzbar.cutoff());
    let a = f.dz.with_cutoff(n);
    let b = f.dzbar.with_cutoff(n);
    let mut w = PeriodicField::zeros(l, n);
    let mut free: Option<(i64, i64)> = None;
    for (m, nn, ak) in a.modes() {
        let bk = b.coeff(m, nn);
        let (d, db) = l.symbols(m, nn);
        let (sd, sdb) = (d + e.mu, db + e.nu);
        let tol_d = 1e-10 * (1.0 + e.mu.norm());
        let tol_db = 1e-10 * (1.0 + e.nu.norm());
        let res_d = sd.norm() < tol_d;
        let res_db = sdb.norm() < tol_db;
        let v = match (res_d, res_db, primary) {
            (false, _, Primary::Del) | (false, true, Primary::Delbar) => ak / sd,
            (_, false, Primary::Delbar) | (true, false, Primary::Del) => bk / sdb,
            (true, true, _) => {
                // Constant of integration; its weight in the form is a period.
                if ak.norm().max(bk.norm()) > 1e-10 * (1.0 + scale) {
                    return Err(Error::Obstruction(format!(
                        "form has weight {:.3e} on the fully resonant mode ({m},{nn})",
                        ak.norm().max(bk.norm())
                    )));
                }
                free = Some((m, nn));
                ZERO
            }
        };
        w.set(m, nn, v);
    }
    if let Normalization::Basepoint(c) = norm {
        let (m, nn) = match free {
            Some(k) => k,
            None => {
                // Resonant mode outside the truncation: extend so it is representable.
                let k = l
                    .mode_of_symbol(-e.mu, 1e-9)
                    .ok_or_else(|| Error::Numerical("trivial multipliers but no resonant mode".into()))?;
                let need = k.0.unsigned_abs().max(k.1.unsigned_abs()) as usize;
                w = w.with_cutoff(need.max(n));
                k
            }
        };
        // ω(0) = Σ w_k since the prefactor is 1 at the origin.
        let sum: C64 = w.coeffs().iter().sum();
        w.set(m, nn, c - sum);
    }
    Ok(QuasiPeriodicFunction::scalar(e, w))
}

/// Kernel ω (Direct) or ω∨ (Dual) for `psi`.
pub fn omega(
    psi: &QuasiPeriodicFunction,
    pair: &DarbouxPair,
    side: Side,
    normalization: Normalization,
) -> Result<QuasiPeriodicFunction> {
    primitive(&form(psi, pair, side)?, normalization, Primary::Del)
}

/// Same kernel built by solving the ∂̄-equation first.
pub fn omega_dbar_first(
    psi: &QuasiPeriodicFunction,
    pair: &DarbouxPair,
    side: Side,
    normalization: Normalization,
) -> Result<QuasiPeriodicFunction> {
    primitive(&form(psi, pair, side)?, normalization, Primary::Delbar)
}

/// Primitive of an arbitrary closed form, solving ∂ first.
pub fn integrate_form(f: &ClosedForm, normalization: Normalization) -> Result<QuasiPeriodicFunction> {
    primitive(f, normalization, Primary::Del)
}

/// max of the relative defects of ∂ω = a and ∂̄ω = b.
pub fn primitive_defect(w: &QuasiPeriodicFunction, f: &ClosedForm) -> Result<f64> {
    let w = w.rebase(f.exponents)?;
    let p = w.component(0);
    let e = f.exponents;
    let r1 = &p.apply_shifted(Direction::Holomorphic, e.mu) - &f.dz;
    let r2 = &p.apply_shifted(Direction::Antiholomorphic, e.nu) - &f.dzbar;
    let s = (f.dz.norm() + f.dzbar.norm()).max(1e-300);
    Ok(r1.norm().max(r2.norm()) / s)
}

#[derive(Debug, Clone)]
pub struct Deformation {
    pub delta_p: PeriodicField,
    pub delta_q: PeriodicField,
    /// Dirac-form variation δU = −δq.
    pub delta_u: PeriodicField,
    pub delta_psi: QuasiPeriodicFunction,
}

/// δp = −Ψᴰ₁Φᴰ₂, δq = Ψᴰ₂Φᴰ₁ (the pair's exponents cancel).
pub fn potential_variation(pair: &DarbouxPair) -> Result<(PeriodicField, PeriodicField)> {
    let e = pair.psi_d.exponents.add(&pair.phi_d.exponents);
    let lift = |f: PeriodicField| -> Result<PeriodicField> {
        let q = QuasiPeriodicFunction::scalar(e, f).rebase(ExponentPair::zero())?;
        Ok(q.components.into_iter().next().expect("scalar"))
    };
    let dp = lift(-&scalar_parts(&pair.psi_d, 0, &pair.phi_d, 1)?)?;
    let dq = lift(scalar_parts(&pair.psi_d, 1, &pair.phi_d, 0)?)?;
    Ok((dp, dq))
}

/// Variations of the potential and of ψ: δψ = ωΨᴰ with the exponents of ψ.
pub fn deform(pair: &DarbouxPair, psi: &QuasiPeriodicFunction, omega: &QuasiPeriodicFunction) -> Result<Deformation> {
    let (delta_p, delta_q) = potential_variation(pair)?;
    let delta_psi = multiply_scalar(omega, &pair.psi_d)?.rebase(psi.exponents)?;
    Ok(Deformation { delta_u: -&delta_q, delta_p, delta_q, delta_psi })
}

/// δφ = ω∨Φᴰ with the exponents of φ.
pub fn deform_dual(
    pair: &DarbouxPair,
    phi: &QuasiPeriodicFunction,
    omega_dual: &QuasiPeriodicFunction,
) -> Result<QuasiPeriodicFunction> {
    multiply_scalar(omega_dual, &pair.phi_d)?.rebase(phi.exponents)
}

fn multiply_scalar(w: &QuasiPeriodicFunction, s: &QuasiPeriodicFunction) -> Result<QuasiPeriodicFunction> {
    let w0 = w.component(0);
    Ok(QuasiPeriodicFunction {
        exponents: w.exponents.add(&s.exponents),
        components: s.components.iter().map(|c| w0.mul_full(c)).collect::<Result<_>>()?,
    })
}

/// Relative residuals of the linearized equations
/// ∂̄δψ₁ − pδψ₂ − δp ψ₂ = 0 and ∂δψ₂ − qδψ₁ − δq ψ₁ = 0.
pub fn linearized_residual(
    pq: &PQPotential,
    psi: &QuasiPeriodicFunction,
    delta_psi: &QuasiPeriodicFunction,
    delta_p: &PeriodicField,
    delta_q: &PeriodicField,
) -> Result<f64> {
    let dpsi = delta_psi.rebase(psi.exponents)?;
    let [r1, r2] = pq.residual(&dpsi)?;
    let s1 = delta_p.mul_full(psi.component(1))?;
    let s2 = delta_q.mul_full(psi.component(0))?;
    let e1 = &r1 - &s1;
    let e2 = &r2 - &s2;
    let scale = (s1.norm() + s2.norm() + r1.norm() + r2.norm()).max(1e-300);
    Ok((e1.norm().powi(2) + e2.norm().powi(2)).sqrt() / scale)
}

/// Dual counterpart: ∂̄δφ₁ + qδφ₂ + δq φ₂ = 0 and ∂δφ₂ + pδφ₁ + δp φ₁ = 0.
pub fn linearized_dual_residual(
    pq: &PQPotential,
    phi: &QuasiPeriodicFunction,
    delta_phi: &QuasiPeriodicFunction,
    delta_p: &PeriodicField,
    delta_q: &PeriodicField,
) -> Result<f64> {
    let dphi = delta_phi.rebase(phi.exponents)?;
    let [r1, r2] = pq.dual_residual(&dphi)?;
    let s1 = delta_q.mul_full(phi.component(1))?;
    let s2 = delta_p.mul_full(phi.component(0))?;
    let e1 = &r1 + &s1;
    let e2 = &r2 + &s2;
    let scale = (s1.norm() + s2.norm() + r1.norm() + r2.norm()).max(1e-300);
    Ok((e1.norm().powi(2) + e2.norm().powi(2)).sqrt() / scale)
}

/// Largest windowed matched |Δν| between the μ-slices of U + ε·δU and U.
pub fn isospectral_defect(pot: &DiracPotential, delta_u: &PeriodicField, mu: C64, eps: f64, cutoff: usize) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    let moved = DiracPotential::general(&pot.u + &delta_u.scale(C64::new(eps, 0.0)));
    let a = dirac2d::slice_eigenvalues(pot, mu, false, cutoff)?;
    let b = dirac2d::slice_eigenvalues(&moved, mu, false, cutoff)?;
    Ok(dirac2d::nu_set_distance(&b, &a, &dirac2d::DistanceOptions::for_cutoff(cutoff)))
}
