//! Quasi-periodic functions exp(μz + νz̄)·p(z) with periodic p.

use crate::error::{Error, Result};
use crate::field::PeriodicField;
use crate::lattice::{ExponentPair, Lattice};
use num_complex::Complex64 as C64;

/// Tolerance for deciding that two exponent pairs differ by a lattice mode.
pub const MODE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiPeriodicFunction {
    pub exponents: ExponentPair,
    pub components: Vec<PeriodicField>,
}

impl QuasiPeriodicFunction {
    pub fn scalar(exponents: ExponentPair, f: PeriodicField) -> Self {
        Self { exponents, components: vec![f] }
    }

    pub fn spinor(exponents: ExponentPair, f1: PeriodicField, f2: PeriodicField) -> Self {
        Self { exponents, components: vec![f1, f2] }
    }

    pub fn lattice(&self) -> &Lattice {
        self.components[0].lattice()
    }

    pub fn is_spinor(&self) -> bool {
        self.components.len() == 2
    }

    pub fn component(&self, k: usize) -> &PeriodicField {
        &self.components[k]
    }

    pub fn multipliers(&self) -> (C64, C64) {
        self.exponents.multipliers(self.lattice())
    }

    pub fn prefactor(&self, z: C64) -> C64 {
        (self.exponents.mu * z + self.exponents.nu * z.conj()).exp()
    }

    /// Values of every component at z.
    pub fn eval(&self, z: C64) -> Vec<C64> {
        let e = self.prefactor(z);
        self.components.iter().map(|f| e * f.eval(z)).collect()
    }

    /// ψ* = (conj ψ₂, −conj ψ₁) with exponents (ν̄, μ̄).
    pub fn star_involution(&self) -> Result<Self> {
        if !self.is_spinor() {
            return Err(Error::InvalidInput("star involution needs a two-component spinor".into()));
        }
        Ok(Self::spinor(
            self.exponents.conj(),
            self.components[1].conj(),
            -&self.components[0].conj(),
        ))
    }

    /// Componentwise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            exponents: self.exponents.conj(),
            components: self.components.iter().map(PeriodicField::conj).collect(),
        }
    }

    /// The same function written with exponents `target`, which must differ
    /// from the current ones by a lattice mode. Lossless.
    pub fn rebase(&self, target: ExponentPair) -> Result<Self> {
        let (m, n) = self
            .exponents
            .mode_offset(&target, self.lattice(), MODE_TOL)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "exponents {:?} and {:?} do not differ by a lattice mode",
                    self.exponents, target
                ))
            })?;
        Ok(Self {
            exponents: target,
            components: self.components.iter().map(|f| f.shift_modes(m, n)).collect(),
        })
    }

    /// Periodic function equal to this one when the multipliers are (1, 1).
    pub fn to_periodic(&self) -> Result<Vec<PeriodicField>> {
        Ok(self.rebase(ExponentPair::zero())?.components)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            exponents: self.exponents,
            components: self.components.iter().map(|f| f.scale(s)).collect(),
        }
    }

    /// Coefficient l² norm over all components.
    pub fn norm(&self) -> f64 {
        self.components.iter().map(|f| f.norm().powi(2)).sum::<f64>().sqrt()
    }

    /// Maximum of the pointwise Euclidean norm of the periodic parts on a grid.
    pub fn periodic_sup_norm(&self, grid: usize) -> f64 {
        let vals: Vec<Vec<C64>> = self.components.iter().map(|f| f.eval_grid(grid)).collect();
        (0..grid * grid)
            .map(|k| vals.iter().map(|v| v[k].norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest |f(z+γ_j) − κ_j f(z)| over a sample of points, relative to |f|.
    pub fn quasi_periodicity_defect(&self, points: &[C64]) -> f64 {
        let (k1, k2) = self.multipliers();
        let l = *self.lattice();
        let mut worst: f64 = 0.0;
        for &z in points {
            let base = self.eval(z);
            let scale = base.iter().map(|v| v.norm()).fold(1e-300, f64::max);
            for (g, k) in [(l.gamma1, k1), (l.gamma2, k2)] {
                let shifted = self.eval(z + g);
                for (a, b) in shifted.iter().zip(&base) {
                    worst = worst.max((a - k * b).norm() / scale);
                }
            }
        }
        worst
    }
}

/// Product of two scalar quasi-periodic functions (exact, cutoffs add).
pub fn product(
    a: &QuasiPeriodicFunction,
    k: usize,
    b: &QuasiPeriodicFunction,
    l: usize,
) -> Result<QuasiPeriodicFunction> {
    Ok(QuasiPeriodicFunction::scalar(
        a.exponents.add(&b.exponents),
        a.components[k].mul_full(&b.components[l])?,
    ))
}

/// Star involution, see [`QuasiPeriodicFunction::star_involution`].
pub fn star_involution(psi: &QuasiPeriodicFunction) -> Result<QuasiPeriodicFunction> {
    psi.star_involution()
}
