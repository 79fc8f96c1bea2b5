//! Doubly periodic complex functions stored as truncated Fourier series.
//!
//! A field with cutoff N holds c_{mn} for |m|, |n| ≤ N and represents
//! f(z) = Σ c_{mn} e_{mn}(z), e_{mn} = exp(i⟨mα₁ + nα₂, (x, y)⟩).
//! Writing z = sγ₁ + tγ₂ gives e_{mn} = exp(2πi(ms + nt)), so sampling on the
//! unit cell is a plain 2D DFT for every lattice.

use crate::error::{Error, Result};
use crate::fft::fft2;
use crate::format::fmt_f64;
use crate::lattice::Lattice;
use num_complex::Complex64 as C64;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Which first-order operator a shifted inversion refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// ∂ = (∂x − i∂y)/2
    Holomorphic,
    /// ∂̄ = (∂x + i∂y)/2
    Antiholomorphic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    lattice: Lattice,
    cutoff: usize,
    coeffs: Vec<C64>,
}

impl PeriodicField {
    pub fn zeros(lattice: Lattice, cutoff: usize) -> Self {
        let side = 2 * cutoff + 1;
        Self { lattice, cutoff, coeffs: vec![ZERO; side * side] }
    }

    pub fn constant(lattice: Lattice, cutoff: usize, value: C64) -> Self {
        let mut f = Self::zeros(lattice, cutoff);
        f.set(0, 0, value);
        f
    }

    /// c·e_{mn}, with the cutoff enlarged if needed.
    pub fn mode(lattice: Lattice, cutoff: usize, m: i64, n: i64, value: C64) -> Self {
        let cutoff = cutoff.max(m.unsigned_abs() as usize).max(n.unsigned_abs() as usize);
        let mut f = Self::zeros(lattice, cutoff);
        f.set(m, n, value);
        f
    }

    pub fn from_modes(
        lattice: Lattice,
        cutoff: usize,
        modes: impl IntoIterator<Item = (i64, i64, C64)>,
    ) -> Result<Self> {
        let mut f = Self::zeros(lattice, cutoff);
        for (m, n, c) in modes {
            if !f.contains(m, n) {
                return Err(Error::InvalidInput(format!("mode ({m},{n}) exceeds cutoff {cutoff}")));
            }
            f.set(m, n, f.coeff(m, n) + c);
        }
        Ok(f)
    }

    /// Coefficients from a raw row-major array of side 2N+1.
    pub fn from_coeffs(lattice: Lattice, cutoff: usize, coeffs: Vec<C64>) -> Result<Self> {
        let side = 2 * cutoff + 1;
        if coeffs.len() != side * side {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients for cutoff {cutoff}, got {}",
                side * side,
                coeffs.len()
            )));
        }
        Ok(Self { lattice, cutoff, coeffs })
    }

    /// Samples `f` on a `grid × grid` cell grid and keeps modes up to `cutoff`.
    pub fn from_fn(lattice: Lattice, cutoff: usize, grid: usize, f: impl Fn(C64) -> C64) -> Self {
        let g = grid.max(2 * cutoff + 1);
        let mut samples = Vec::with_capacity(g * g);
        for i in 0..g {
            for j in 0..g {
                samples.push(f(cell_point(&lattice, i, j, g)));
            }
        }
        Self::from_grid(lattice, cutoff, g, samples)
    }

    /// Fourier coefficients of grid samples (`grid ≥ 2N+1`), see [`Self::eval_grid`].
    pub fn from_grid(lattice: Lattice, cutoff: usize, grid: usize, mut samples: Vec<C64>) -> Self {
        assert!(grid > 2 * cutoff, "grid {grid} too small for cutoff {cutoff}");
        fft2(&mut samples, grid, false);
        let scale = 1.0 / (grid * grid) as f64;
        let mut out = Self::zeros(lattice, cutoff);
        let n = cutoff as i64;
        for m in -n..=n {
            for k in -n..=n {
                let v = samples[wrap(m, grid) * grid + wrap(k, grid)] * scale;
                out.set(m, k, v);
            }
        }
        out
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn side(&self) -> usize {
        2 * self.cutoff + 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn contains(&self, m: i64, n: i64) -> bool {
        let c = self.cutoff as i64;
        m.abs() <= c && n.abs() <= c
    }

    pub fn index(&self, m: i64, n: i64) -> usize {
        let c = self.cutoff as i64;
        ((m + c) as usize) * self.side() + (n + c) as usize
    }

    /// Coefficient of e_{mn}; zero outside the cutoff.
    pub fn coeff(&self, m: i64, n: i64) -> C64 {
        if self.contains(m, n) {
            self.coeffs[self.index(m, n)]
        } else {
            ZERO
        }
    }

    pub fn set(&mut self, m: i64, n: i64, value: C64) {
        let i = self.index(m, n);
        self.coeffs[i] = value;
    }

    /// All stored modes in lexicographic (m, n) order.
    pub fn modes(&self) -> impl Iterator<Item = (i64, i64, C64)> + '_ {
        let c = self.cutoff as i64;
        let side = self.side();
        self.coeffs.iter().enumerate().map(move |(k, v)| {
            ((k / side) as i64 - c, (k % side) as i64 - c, *v)
        })
    }

    /// Modes with nonzero coefficient.
    pub fn support(&self) -> Vec<(i64, i64)> {
        self.modes().filter(|(_, _, c)| *c != ZERO).map(|(m, n, _)| (m, n)).collect()
    }

    pub fn mean(&self) -> C64 {
        self.coeff(0, 0)
    }

    pub fn eval(&self, z: C64) -> C64 {
        let a = self.lattice.dual();
        let t1 = a[0][0] * z.re + a[0][1] * z.im;
        let t2 = a[1][0] * z.re + a[1][1] * z.im;
        let mut acc = ZERO;
        for (m, n, c) in self.modes() {
            if c != ZERO {
                acc += c * C64::from_polar(1.0, m as f64 * t1 + n as f64 * t2);
            }
        }
        acc
    }

    /// Values at z = (i/g)γ₁ + (j/g)γ₂, row-major in (i, j). Exact for any g.
    pub fn eval_grid(&self, grid: usize) -> Vec<C64> {
        let mut data = vec![ZERO; grid * grid];
        for (m, n, c) in self.modes() {
            data[wrap(m, grid) * grid + wrap(n, grid)] += c;
        }
        fft2(&mut data, grid, true);
        data
    }

    /// Copy with a different cutoff (zero-padded or truncated).
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        let mut out = Self::zeros(self.lattice, cutoff);
        let c = cutoff.min(self.cutoff) as i64;
        for m in -c..=c {
            for n in -c..=c {
                out.set(m, n, self.coeff(m, n));
            }
        }
        out
    }

    fn check_lattice(&self, other: &Self) -> Result<()> {
        let (a, b) = (&self.lattice, &other.lattice);
        let tol = 1e-12 * (a.gamma1.norm() + a.gamma2.norm());
        if (a.gamma1 - b.gamma1).norm() > tol || (a.gamma2 - b.gamma2).norm() > tol {
            return Err(Error::InvalidInput("lattice mismatch".into()));
        }
        Ok(())
    }

    /// Product truncated to the larger of the two cutoffs; alias-free.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let n = self.cutoff.max(other.cutoff);
        self.mul_to(other, n)
    }

    /// Exact product with cutoff N_f + N_g.
    pub fn mul_full(&self, other: &Self) -> Result<Self> {
        self.mul_to(other, self.cutoff + other.cutoff)
    }

    /// Product truncated to `cutoff`, computed on an oversampled grid.
    pub fn mul_to(&self, other: &Self, cutoff: usize) -> Result<Self> {
        self.check_lattice(other)?;
        let need = (self.cutoff + other.cutoff + cutoff + 1).max(2 * (2 * cutoff + 1));
        let g = fft_friendly(need);
        let a = self.eval_grid(g);
        let b = other.eval_grid(g);
        let prod: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Ok(Self::from_grid(self.lattice, cutoff, g, prod))
    }

    /// Complex conjugate: coefficients conj(c_{−m,−n}).
    pub fn conj(&self) -> Self {
        let mut out = Self::zeros(self.lattice, self.cutoff);
        for (m, n, c) in self.modes() {
            out.set(-m, -n, c.conj());
        }
        out
    }

    /// Multiplication by e_{dm,dn}; the cutoff grows so nothing is lost.
    pub fn shift_modes(&self, dm: i64, dn: i64) -> Self {
        let grow = dm.unsigned_abs().max(dn.unsigned_abs()) as usize;
        let mut out = Self::zeros(self.lattice, self.cutoff + grow);
        for (m, n, c) in self.modes() {
            out.set(m + dm, n + dn, c);
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            lattice: self.lattice,
            cutoff: self.cutoff,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    fn combine(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        let n = self.cutoff.max(other.cutoff);
        let mut out = Self::zeros(self.lattice, n);
        let c = n as i64;
        for m in -c..=c {
            for k in -c..=c {
                out.set(m, k, f(self.coeff(m, k), other.coeff(m, k)));
            }
        }
        out
    }

    /// Coefficient-wise map with access to the mode.
    pub fn map_modes(&self, f: impl Fn(i64, i64, C64) -> C64) -> Self {
        let mut out = self.clone();
        let side = self.side();
        let c = self.cutoff as i64;
        for (k, v) in out.coeffs.iter_mut().enumerate() {
            *v = f((k / side) as i64 - c, (k % side) as i64 - c, *v);
        }
        out
    }

    /// ∂f.
    pub fn del(&self) -> Self {
        let l = self.lattice;
        self.map_modes(|m, n, c| c * l.symbols(m, n).0)
    }

    /// ∂̄f.
    pub fn delbar(&self) -> Self {
        let l = self.lattice;
        self.map_modes(|m, n, c| c * l.symbols(m, n).1)
    }

    /// (∂ + shift)f or (∂̄ + shift)f.
    pub fn apply_shifted(&self, dir: Direction, shift: C64) -> Self {
        let l = self.lattice;
        self.map_modes(|m, n, c| c * (symbol(&l, dir, m, n) + shift))
    }

    /// Coefficient l² norm, equal to the RMS of f over the cell.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Norm of the modes with max(|m|, |n|) > k.
    pub fn tail_norm(&self, k: usize) -> f64 {
        let k = k as i64;
        self.modes()
            .filter(|(m, n, _)| m.abs() > k || n.abs() > k)
            .map(|(_, _, c)| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// max |f| over a `grid × grid` sample of the cell.
    pub fn sup_norm(&self, grid: usize) -> f64 {
        self.eval_grid(grid).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// ‖f − conj f‖ relative to ‖f‖.
    pub fn reality_defect(&self) -> f64 {
        let n = self.norm();
        if n == 0.0 {
            return 0.0;
        }
        (self - &self.conj()).norm() / n
    }

    /// Real part (f + conj f)/2.
    pub fn real_part(&self) -> Self {
        (self + &self.conj()).scale(C64::new(0.5, 0.0))
    }

    /// CSV serialization: lattice, cutoff, then `m,n,re,im` for every mode.
    pub fn to_csv(&self) -> String {
        let l = &self.lattice;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "#lattice,{},{},{},{}",
            fmt_f64(l.gamma1.re),
            fmt_f64(l.gamma1.im),
            fmt_f64(l.gamma2.re),
            fmt_f64(l.gamma2.im)
        );
        let _ = writeln!(s, "#cutoff,{}", self.cutoff);
        for (m, n, c) in self.modes() {
            let _ = writeln!(s, "{m},{n},{},{}", fmt_f64(c.re), fmt_f64(c.im));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let head = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))?;
        let parts: Vec<&str> = head.split(',').collect();
        if parts.len() != 5 || parts[0] != "#lattice" {
            return Err(Error::Parse(format!("bad lattice line: {head}")));
        }
        let nums: Vec<f64> = parts[1..].iter().map(|p| parse_f64(p)).collect::<Result<_>>()?;
        let lattice = Lattice::new(C64::new(nums[0], nums[1]), C64::new(nums[2], nums[3]))?;
        let cut = lines.next().ok_or_else(|| Error::Parse("missing cutoff line".into()))?;
        let cutoff = cut
            .strip_prefix("#cutoff,")
            .and_then(|v| v.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("bad cutoff line: {cut}")))?;
        let mut f = Self::zeros(lattice, cutoff);
        for line in lines {
            let p: Vec<&str> = line.split(',').map(str::trim).collect();
            if p.len() != 4 {
                return Err(Error::Parse(format!("bad mode line: {line}")));
            }
            let m: i64 = p[0].parse().map_err(|_| Error::Parse(format!("bad index: {line}")))?;
            let n: i64 = p[1].parse().map_err(|_| Error::Parse(format!("bad index: {line}")))?;
            if !f.contains(m, n) {
                return Err(Error::Parse(format!("mode ({m},{n}) exceeds cutoff {cutoff}")));
            }
            f.set(m, n, C64::new(parse_f64(p[2])?, parse_f64(p[3])?));
        }
        Ok(f)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number: {s}")))
}

/// Symbol of ∂ or ∂̄ on e_{mn}.
pub fn symbol(lattice: &Lattice, dir: Direction, m: i64, n: i64) -> C64 {
    let (d, db) = lattice.symbols(m, n);
    match dir {
        Direction::Holomorphic => d,
        Direction::Antiholomorphic => db,
    }
}

/// Solves (∂ + shift)f = g or (∂̄ + shift)f = g mode by mode.
///
/// A resonant mode (|symbol + shift| < 1e−10(1 + |shift|)) is an error when g
/// has weight there; otherwise f is set to zero on it.
pub fn solve_shifted(dir: Direction, shift: C64, g: &PeriodicField) -> Result<PeriodicField> {
    let tol = 1e-10 * (1.0 + shift.norm());
    let l = *g.lattice();
    let mut out = g.clone();
    for (m, n, c) in g.modes() {
        let s = symbol(&l, dir, m, n) + shift;
        if s.norm() < tol {
            if c != ZERO {
                return Err(Error::Resonance { m, n, magnitude: s.norm() });
            }
            out.set(m, n, ZERO);
        } else {
            out.set(m, n, c / s);
        }
    }
    Ok(out)
}

/// Point (i/g)γ₁ + (j/g)γ₂ of the cell grid.
pub fn cell_point(lattice: &Lattice, i: usize, j: usize, g: usize) -> C64 {
    lattice.gamma1 * (i as f64 / g as f64) + lattice.gamma2 * (j as f64 / g as f64)
}

fn wrap(k: i64, g: usize) -> usize {
    k.rem_euclid(g as i64) as usize
}

/// Smallest integer ≥ n whose prime factors are 2, 3 and 5.
fn fft_friendly(n: usize) -> usize {
    let mut k = n.max(1);
    loop {
        let mut r = k;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return k;
        }
        k += 1;
    }
}

impl Add for &PeriodicField {
    type Output = PeriodicField;
    fn add(self, rhs: &PeriodicField) -> PeriodicField {
        self.combine(rhs, |a, b| a + b)
    }
}

impl Sub for &PeriodicField {
    type Output = PeriodicField;
    fn sub(self, rhs: &PeriodicField) -> PeriodicField {
        self.combine(rhs, |a, b| a - b)
    }
}

impl Neg for &PeriodicField {
    type Output = PeriodicField;
    fn neg(self) -> PeriodicField {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul<C64> for &PeriodicField {
    type Output = PeriodicField;
    fn mul(self, rhs: C64) -> PeriodicField {
        self.scale(rhs)
    }
}

impl Mul<f64> for &PeriodicField {
    type Output = PeriodicField;
    fn mul(self, rhs: f64) -> PeriodicField {
        self.scale(C64::new(rhs, 0.0))
    }
}
