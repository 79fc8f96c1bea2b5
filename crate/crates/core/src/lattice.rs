//! Period lattices, Fourier symbols and the exponent/multiplier dictionary.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Dual basis α₁, α₂ of the lattice spanned by `g1`, `g2`: ⟨α_j, γ_k⟩ = 2π δ_jk.
pub fn dual_basis(g1: C64, g2: C64) -> Result<[[f64; 2]; 2]> {
    let det = g1.re * g2.im - g1.im * g2.re;
    let scale = g1.norm() * g2.norm();
    if !det.is_finite() || scale == 0.0 || det.abs() <= 1e-12 * scale {
        return Err(Error::InvalidInput(format!(
            "degenerate lattice: periods {g1} and {g2} are collinear"
        )));
    }
    // Rows of 2π (Gᵀ)⁻¹ where G has rows γ₁, γ₂.
    let f = 2.0 * PI / det;
    Ok([[f * g2.im, -f * g2.re], [-f * g1.im, f * g1.re]])
}

/// A period lattice Λ = γ₁Z + γ₂Z with positively oriented generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub gamma1: C64,
    pub gamma2: C64,
    alpha: [[f64; 2]; 2],
}

impl Lattice {
    pub fn new(gamma1: C64, gamma2: C64) -> Result<Self> {
        let alpha = dual_basis(gamma1, gamma2)?;
        if (gamma1.conj() * gamma2).im <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "periods {gamma1}, {gamma2} are negatively oriented"
            )));
        }
        Ok(Self { gamma1, gamma2, alpha })
    }

    /// The square lattice (2π, 2πi).
    pub fn square() -> Self {
        Self::new(C64::new(2.0 * PI, 0.0), C64::new(0.0, 2.0 * PI)).expect("square lattice")
    }

    pub fn gamma(&self, j: usize) -> C64 {
        match j {
            1 => self.gamma1,
            2 => self.gamma2,
            _ => panic!("lattice generator index must be 1 or 2"),
        }
    }

    pub fn dual(&self) -> [[f64; 2]; 2] {
        self.alpha
    }

    /// Area of the fundamental cell.
    pub fn area(&self) -> f64 {
        (self.gamma1.conj() * self.gamma2).im
    }

    /// True for γ₁ real and γ₂ purely imaginary.
    pub fn is_rectangular(&self) -> bool {
        self.gamma1.im.abs() <= 1e-14 * self.gamma1.norm()
            && self.gamma2.re.abs() <= 1e-14 * self.gamma2.norm()
    }

    /// Wave vector mα₁ + nα₂ of the mode e_{mn}.
    pub fn wave_vector(&self, m: i64, n: i64) -> [f64; 2] {
        let (m, n) = (m as f64, n as f64);
        [
            m * self.alpha[0][0] + n * self.alpha[1][0],
            m * self.alpha[0][1] + n * self.alpha[1][1],
        ]
    }

    /// Symbols (d, d̄) of ∂ and ∂̄ on e_{mn}, so that e_{mn} = exp(d z + d̄ z̄).
    pub fn symbols(&self, m: i64, n: i64) -> (C64, C64) {
        let [kx, ky] = self.wave_vector(m, n);
        (C64::new(ky, kx) * 0.5, C64::new(-ky, kx) * 0.5)
    }

    /// The mode whose ∂-symbol is `d`, if `d` lies within `tol` of the symbol lattice.
    pub fn mode_of_symbol(&self, d: C64, tol: f64) -> Option<(i64, i64)> {
        let (kx, ky) = (2.0 * d.im, 2.0 * d.re);
        let m = (kx * self.gamma1.re + ky * self.gamma1.im) / (2.0 * PI);
        let n = (kx * self.gamma2.re + ky * self.gamma2.im) / (2.0 * PI);
        let (mr, nr) = (m.round(), n.round());
        if (m - mr).abs() <= tol && (n - nr).abs() <= tol {
            Some((mr as i64, nr as i64))
        } else {
            None
        }
    }
}

/// Exponents of the factor exp(μz + νz̄).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair {
    pub mu: C64,
    pub nu: C64,
}

impl ExponentPair {
    pub fn new(mu: C64, nu: C64) -> Self {
        Self { mu, nu }
    }

    pub fn zero() -> Self {
        Self::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    }

    /// Logarithms μγ_j + νγ̄_j of the multipliers (unreduced).
    pub fn log_multipliers(&self, lattice: &Lattice) -> (C64, C64) {
        let g1 = lattice.gamma1;
        let g2 = lattice.gamma2;
        (self.mu * g1 + self.nu * g1.conj(), self.mu * g2 + self.nu * g2.conj())
    }

    /// κ_j = exp(μγ_j + νγ̄_j).
    pub fn multipliers(&self, lattice: &Lattice) -> (C64, C64) {
        let (l1, l2) = self.log_multipliers(lattice);
        (l1.exp(), l2.exp())
    }

    /// Representative exponents for given multipliers, principal logarithms.
    pub fn from_multipliers(k1: C64, k2: C64, lattice: &Lattice) -> Result<Self> {
        if k1.norm() == 0.0 || k2.norm() == 0.0 || !k1.is_finite() || !k2.is_finite() {
            return Err(Error::InvalidInput("multipliers must be finite and nonzero".into()));
        }
        Ok(Self::from_logs(k1.ln(), k2.ln(), lattice))
    }

    /// Exponents whose log-multipliers are exactly (l1, l2).
    pub fn from_logs(l1: C64, l2: C64, lattice: &Lattice) -> Self {
        let (g1, g2) = (lattice.gamma1, lattice.gamma2);
        // [[g1, ḡ1], [g2, ḡ2]] (μ, ν)ᵀ = (l1, l2)ᵀ; determinant is -2i·area ≠ 0.
        let det = g1 * g2.conj() - g1.conj() * g2;
        let mu = (l1 * g2.conj() - g1.conj() * l2) / det;
        let nu = (g1 * l2 - g2 * l1) / det;
        Self { mu, nu }
    }

    /// Exponents of e_{mn}·exp(μz+νz̄) written as a pure exponential.
    pub fn shifted_by_mode(&self, m: i64, n: i64, lattice: &Lattice) -> Self {
        let (d, db) = lattice.symbols(m, n);
        Self::new(self.mu + d, self.nu + db)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.mu + other.mu, self.nu + other.nu)
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.mu, -self.nu)
    }

    /// Exponents of the complex conjugate function: (ν̄, μ̄).
    pub fn conj(&self) -> Self {
        Self::new(self.nu.conj(), self.mu.conj())
    }

    /// The mode k with self = other + symbols(k), if any.
    pub fn mode_offset(&self, other: &Self, lattice: &Lattice, tol: f64) -> Option<(i64, i64)> {
        let dmu = self.mu - other.mu;
        let dnu = self.nu - other.nu;
        let scale = 1.0 + dmu.norm();
        if (dnu + dmu.conj()).norm() > tol * scale {
            return None;
        }
        let k = lattice.mode_of_symbol(dmu, tol)?;
        let (d, db) = lattice.symbols(k.0, k.1);
        if (d - dmu).norm() <= tol * scale && (db - dnu).norm() <= tol * scale {
            Some(k)
        } else {
            None
        }
    }

    /// Whether two exponent pairs induce the same multipliers: each
    /// Δμγ_j + Δνγ̄_j must lie within `tol` of 2πiZ.
    pub fn same_multipliers(&self, other: &Self, lattice: &Lattice, tol: f64) -> bool {
        let diff = Self::new(self.mu - other.mu, self.nu - other.nu);
        let (a1, a2) = diff.log_multipliers(lattice);
        [a1, a2].iter().all(|a| {
            let k = a.im / (2.0 * PI);
            a.re.abs() <= tol && (k - k.round()).abs() * 2.0 * PI <= tol
        })
    }
}

/// Multipliers of the given exponents on the lattice.
pub fn multipliers_of(exponents: &ExponentPair, lattice: &Lattice) -> (C64, C64) {
    exponents.multipliers(lattice)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn square_dual_basis_is_identity() {
        let a = dual_basis(c(2.0 * PI, 0.0), c(0.0, 2.0 * PI)).unwrap();
        assert!((a[0][0] - 1.0).abs() < 1e-15 && a[0][1].abs() < 1e-15);
        assert!(a[1][0].abs() < 1e-15 && (a[1][1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn oblique_dual_basis() {
        let a = dual_basis(c(2.0 * PI, 0.0), c(PI, 2.0 * PI)).unwrap();
        let want = [[1.0, -0.5], [0.0, 1.0]];
        for j in 0..2 {
            for k in 0..2 {
                assert!((a[j][k] - want[j][k]).abs() < 1e-14, "{a:?}");
            }
        }
    }

    #[test]
    fn collinear_periods_rejected() {
        assert!(matches!(
            dual_basis(c(2.0 * PI, 0.0), c(4.0 * PI, 0.0)),
            Err(Error::InvalidInput(_))
        ));
        assert!(Lattice::new(c(0.0, 2.0 * PI), c(2.0 * PI, 0.0)).is_err());
    }

    #[test]
    fn square_symbols() {
        let l = Lattice::square();
        let (d, db) = l.symbols(1, 0);
        assert!((d - c(0.0, 0.5)).norm() < 1e-15);
        assert!((db - c(0.0, 0.5)).norm() < 1e-15);
        let (d, db) = l.symbols(0, 1);
        assert!((d - c(0.5, 0.0)).norm() < 1e-15);
        assert!((db - c(-0.5, 0.0)).norm() < 1e-15);
        assert_eq!(l.mode_of_symbol(c(1.5, -1.0), 1e-12), Some((-2, 3)));
    }

    #[test]
    fn clifford_multipliers() {
        let l = Lattice::square();
        let e = ExponentPair::new(c(-0.25, -0.25), c(0.25, -0.25));
        let (k1, k2) = e.multipliers(&l);
        assert!((k1 + 1.0).norm() < 1e-14 && (k2 + 1.0).norm() < 1e-14);
        let f = ExponentPair::new(c(0.25, 0.25), c(-0.25, 0.25));
        let (k1, k2) = f.multipliers(&l);
        assert!((k1 + 1.0).norm() < 1e-14 && (k2 + 1.0).norm() < 1e-14);
        assert!(e.same_multipliers(&f, &l, 1e-12));
        assert_eq!(f.mode_offset(&e, &l, 1e-12), Some((1, 1)));
    }

    #[test]
    fn logs_round_trip() {
        let l = Lattice::new(c(2.0, 0.3), c(-0.4, 1.7)).unwrap();
        let e = ExponentPair::new(c(0.1, -0.2), c(0.35, 0.05));
        let (l1, l2) = e.log_multipliers(&l);
        let back = ExponentPair::from_logs(l1, l2, &l);
        assert!((back.mu - e.mu).norm() < 1e-14 && (back.nu - e.nu).norm() < 1e-14);
        let (k1, k2) = e.multipliers(&l);
        let rep = ExponentPair::from_multipliers(k1, k2, &l).unwrap();
        assert!(rep.same_multipliers(&e, &l, 1e-12));
        assert!(rep.mode_offset(&e, &l, 1e-10).is_some());
    }
}
