//! Clifford tori: the constant potential on S³, its stereographic image in R³,
//! and Baker–Akhiezer functions for the R³ potential.

use crate::darboux::{DarbouxPair, PQPotential};
use crate::dirac2d::{self, DiracPotential};
use crate::error::{Error, Result};
use crate::field::PeriodicField;
use crate::lattice::{ExponentPair, Lattice};
use crate::linalg::{self, cmat};
use crate::quasi::QuasiPeriodicFunction;
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::{PI, SQRT_2};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Debug, Clone)]
pub struct CliffordS3Data {
    pub lattice: Lattice,
    pub potential: DiracPotential,
    /// Solution of D, multipliers (−1, −1).
    pub psi: QuasiPeriodicFunction,
    /// Solution of D∨, multipliers (−1, −1)⁻¹.
    pub phi: QuasiPeriodicFunction,
}

pub fn clifford_s3() -> CliffordS3Data {
    let l = Lattice::square();
    let u = PeriodicField::constant(l, 0, c(0.25, 0.25));
    let a = 1.0 / SQRT_2;
    let b = 1.0 / (2.0 * SQRT_2);
    let psi = QuasiPeriodicFunction::spinor(
        ExponentPair::new(c(-0.25, -0.25), c(0.25, -0.25)),
        PeriodicField::constant(l, 0, c(a, 0.0)),
        PeriodicField::constant(l, 0, c(a, 0.0)),
    );
    let phi = QuasiPeriodicFunction::spinor(
        ExponentPair::new(c(0.25, -0.25), c(-0.25, -0.25)),
        PeriodicField::constant(l, 0, c(-b, 0.0)),
        PeriodicField::constant(l, 0, c(b, 0.0)),
    );
    CliffordS3Data { lattice: l, potential: DiracPotential::general(u), psi, phi }
}

impl CliffordS3Data {
    /// Self-pair (Ψ, Φ*) with Φ* = (conj Φ₂, −conj Φ₁), again a solution of D∨.
    pub fn darboux_pair(&self) -> Result<DarbouxPair> {
        DarbouxPair::new(PQPotential::from_dirac(&self.potential), self.psi.clone(), self.phi.star_involution()?)
    }

    /// Companion pair (Ψ*, Φ); Ψ* = (conj Ψ₂, −conj Ψ₁) again solves D.
    pub fn conjugate_pair(&self) -> Result<DarbouxPair> {
        DarbouxPair::new(PQPotential::from_dirac(&self.potential), self.psi.star_involution()?, self.phi.clone())
    }

    /// Sum of the Dirac-form variations of both pairs, the initial velocity
    /// Φ₁·conj Ψ₁ − conj Φ₂·Ψ₂ = −cos(y)/2 of the conformal flow.
    pub fn tau_variation(&self) -> Result<PeriodicField> {
        let (_, q1) = crate::darboux::potential_variation(&self.darboux_pair()?)?;
        let (_, q2) = crate::darboux::potential_variation(&self.conjugate_pair()?)?;
        Ok(-&(&q1 + &q2))
    }
}

/// Coefficient cutoff used to store the R³ potential; far beyond where it decays to roundoff.
pub const R3_CUTOFF: usize = 64;

#[derive(Debug, Clone)]
pub struct CliffordR3Data {
    pub lattice: Lattice,
    pub potential: DiracPotential,
    pub poles: [C64; 3],
    pub glued: [(C64, C64); 2],
    pub u: C64,
}

/// U(y) = sin y / (2√2 (sin y − √2)).
pub fn r3_potential_value(y: f64) -> f64 {
    y.sin() / (2.0 * SQRT_2 * (y.sin() - SQRT_2))
}

pub fn clifford_r3() -> CliffordR3Data {
    clifford_r3_with_cutoff(R3_CUTOFF)
}

pub fn clifford_r3_with_cutoff(cutoff: usize) -> CliffordR3Data {
    let l = Lattice::square();
    let grid = (4 * cutoff + 4).max(256);
    let samples: Vec<C64> = uniform_ygrid(grid).into_iter().map(|y| c(r3_potential_value(y), 0.0)).collect();
    let u = y_profile_field(&l, &samples, cutoff).real_part();
    let s = c(-4.0, -2.0).sqrt();
    let base = c(-1.0, 1.0);
    let poles = [(base + s) / (4.0 * SQRT_2), (base - s) / (4.0 * SQRT_2), c(1.0 / 8f64.sqrt(), 0.0)];
    let glued = [(c(0.25, 0.25), c(-0.25, 0.25)), (c(-0.25, -0.25), c(0.25, -0.25))];
    CliffordR3Data {
        lattice: l,
        potential: DiracPotential { u, real_reduction: true },
        poles,
        glued,
        u: c(0.25, 0.25),
    }
}

/// Multipliers of e^{λz − (|u|²/λ) z̄} on the square lattice, |u|² = 1/8.
pub fn prefactor_multipliers(lambda: C64) -> (C64, C64) {
    ba_exponents(lambda).multipliers(&Lattice::square())
}

fn ba_exponents(lambda: C64) -> ExponentPair {
    ExponentPair::new(lambda, -0.125 / lambda)
}

#[derive(Debug, Clone)]
pub struct BakerAkhiezerSamples {
    pub lambda: C64,
    pub exponents: ExponentPair,
    pub y: Vec<f64>,
    /// Periodic profiles r₁(y), r₂(y): ψ_j = e^{λz − z̄/(8λ)} r_j(y).
    pub psi1: Vec<C64>,
    pub psi2: Vec<C64>,
    pub q: Vec<[C64; 2]>,
    pub t: Vec<[C64; 2]>,
    pub max_condition: f64,
}

fn rational(lambda: C64, coeffs: [C64; 2], poles: &[C64; 3], first: bool) -> C64 {
    let f = |p: C64| if first { lambda / (lambda - p) } else { p / (p - lambda) };
    coeffs[0] * f(poles[0]) + coeffs[1] * f(poles[1]) + (1.0 - coeffs[0] - coeffs[1]) * f(poles[2])
}

/// Solves e^{iy} r(λa) = r(λb), e^{−iy} r(λc) = r(λd) for the two free coefficients.
fn glue(y: f64, poles: &[C64; 3], glued: &[(C64, C64); 2], first: bool) -> Result<([C64; 2], f64)> {
    let basis = |lambda: C64, k: usize| -> C64 {
        let mut e = [C64::new(0.0, 0.0); 2];
        if k < 2 {
            e[k] = c(1.0, 0.0);
            rational(lambda, e, poles, first) - rational(lambda, [C64::new(0.0, 0.0); 2], poles, first)
        } else {
            rational(lambda, e, poles, first)
        }
    };
    let phases = [C64::from_polar(1.0, y), C64::from_polar(1.0, -y)];
    let mut a = [[C64::new(0.0, 0.0); 2]; 2];
    let mut rhs = [C64::new(0.0, 0.0); 2];
    for (row, ((la, lb), ph)) in glued.iter().zip(phases).enumerate() {
        for k in 0..2 {
            a[row][k] = ph * basis(*la, k) - basis(*lb, k);
        }
        rhs[row] = -(ph * basis(*la, 2) - basis(*lb, 2));
    }
    let m = cmat(2, 2, |i, j| a[i][j]);
    let cond = linalg::condition_number(&m)?;
    if !(cond < 1e12) {
        return Err(Error::SingularSystem(format!("gluing system singular at y = {y}")));
    }
    let x = linalg::solve(&m, &rhs)?;
    Ok(([x[0], x[1]], cond))
}

/// Baker–Akhiezer spinor for the R³ potential at `lambda`, sampled on `ygrid`.
pub fn baker_akhiezer_r3(lambda: C64, ygrid: &[f64]) -> Result<BakerAkhiezerSamples> {
    let data = clifford_r3_with_cutoff(8);
    let bad = lambda.norm() < 1e-12 || data.poles.iter().any(|p| (lambda - p).norm() < 1e-12);
    if bad {
        return Err(Error::InvalidInput(format!("λ = {lambda} is a pole of the ansatz")));
    }
    let mut out = BakerAkhiezerSamples {
        lambda,
        exponents: ba_exponents(lambda),
        y: ygrid.to_vec(),
        psi1: Vec::with_capacity(ygrid.len()),
        psi2: Vec::with_capacity(ygrid.len()),
        q: Vec::with_capacity(ygrid.len()),
        t: Vec::with_capacity(ygrid.len()),
        max_condition: 0.0,
    };
    for &y in ygrid {
        let (q, c1) = glue(y, &data.poles, &data.glued, true)?;
        let (t, c2) = glue(y, &data.poles, &data.glued, false)?;
        out.psi1.push(rational(lambda, q, &data.poles, true));
        out.psi2.push(rational(lambda, t, &data.poles, false));
        out.q.push(q);
        out.t.push(t);
        out.max_condition = out.max_condition.max(c1).max(c2);
    }
    Ok(out)
}

/// Field with modes (0, n), |n| ≤ cutoff, interpolating samples on the uniform y-grid.
pub fn y_profile_field(lattice: &Lattice, samples: &[C64], cutoff: usize) -> PeriodicField {
    let k = samples.len();
    let mut a = samples.to_vec();
    crate::fft::fft1(&mut a, false);
    let mut f = PeriodicField::zeros(*lattice, cutoff);
    for n in -(cutoff as i64)..=cutoff as i64 {
        f.set(0, n, a[n.rem_euclid(k as i64) as usize] / k as f64);
    }
    f
}

/// The uniform grid y_k = 2πk/K.
pub fn uniform_ygrid(k: usize) -> Vec<f64> {
    (0..k).map(|j| 2.0 * PI * j as f64 / k as f64).collect()
}

impl BakerAkhiezerSamples {
    /// Spinor from samples on the uniform grid (modes (0, n), |n| < K/2).
    pub fn to_spinor(&self) -> Result<QuasiPeriodicFunction> {
        let k = self.y.len();
        let uniform = uniform_ygrid(k);
        if k < 4 || self.y.iter().zip(&uniform).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err(Error::InvalidInput("spinor assembly needs the uniform grid 2πk/K".into()));
        }
        let l = Lattice::square();
        let cutoff = (k - 1) / 2;
        let f1 = y_profile_field(&l, &self.psi1, cutoff);
        let f2 = y_profile_field(&l, &self.psi2, cutoff);
        Ok(QuasiPeriodicFunction::spinor(self.exponents, f1, f2))
    }

    /// Largest deviation of the coefficient profiles from 2π-periodicity, sampled at y and y + 2π.
    pub fn periodicity_defect(&self) -> Result<f64> {
        let shifted: Vec<f64> = self.y.iter().map(|y| y + 2.0 * PI).collect();
        let other = baker_akhiezer_r3(self.lambda, &shifted)?;
        let mut worst: f64 = 0.0;
        for i in 0..self.y.len() {
            for j in 0..2 {
                worst = worst.max((self.q[i][j] - other.q[i][j]).norm());
                worst = worst.max((self.t[i][j] - other.t[i][j]).norm());
            }
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelCount {
    pub count: usize,
    pub threshold: f64,
    pub singular_values: Vec<f64>,
    /// First singular value above the counted ones.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DoublePointReport {
    pub multipliers: (C64, C64),
    pub cutoff: usize,
    pub s3: KernelCount,
    pub r3: KernelCount,
}

fn count_kernel(pot: &DiracPotential, threshold: f64, cutoff: usize) -> Result<KernelCount> {
    let s = dirac2d::kernel_singular_values(pot, (c(-1.0, 0.0), c(-1.0, 0.0)), 8, false, cutoff)?;
    let count = dirac2d::kernel_dimension(&s, threshold, false);
    let margin = s.get(count).copied().unwrap_or(f64::INFINITY);
    Ok(KernelCount { count, threshold, singular_values: s, margin })
}

/// Kernel dimensions of both Clifford potentials at the double points (−1, −1).
pub fn double_point_report(cutoff: usize) -> Result<DoublePointReport> {
    Ok(DoublePointReport {
        multipliers: (c(-1.0, 0.0), c(-1.0, 0.0)),
        cutoff,
        s3: count_kernel(&clifford_s3().potential, 1e-8, cutoff)?,
        r3: count_kernel(&clifford_r3().potential, 1e-6, cutoff)?,
    })
}
