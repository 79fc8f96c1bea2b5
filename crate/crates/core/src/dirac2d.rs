//! Truncated Dirac operators D = [[U, ∂+μ], [−(∂̄+ν), Ū]] and their
//! zero-level multiplier sets.
//!
//! Spinor coefficients are stacked as (ψ₁; ψ₂) over the modes |m|, |n| ≤ N.
//! Modes are only coupled through differences in supp U ∪ −supp U, so every
//! dense computation runs block by block over the connected components.

use crate::error::{Error, Result};
use crate::field::PeriodicField;
use crate::lattice::{ExponentPair, Lattice};
use crate::linalg::{self, cmat, CMat};
use crate::quasi::QuasiPeriodicFunction;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Potential of the operator; `real_reduction` marks U = Ū (tori in R³).
#[derive(Debug, Clone, PartialEq)]
pub struct DiracPotential {
    pub u: PeriodicField,
    pub real_reduction: bool,
}

impl DiracPotential {
    pub fn new(u: PeriodicField, real_reduction: bool) -> Result<Self> {
        if real_reduction && (&u - &u.conj()).norm() > 1e-12 * u.norm() {
            return Err(Error::InvalidInput("potential flagged real is not real-valued".into()));
        }
        Ok(Self { u, real_reduction })
    }

    /// Potential without the reality flag.
    pub fn general(u: PeriodicField) -> Self {
        Self { u, real_reduction: false }
    }

    pub fn lattice(&self) -> &Lattice {
        self.u.lattice()
    }

    /// Potentials (A, B) on the diagonal of D (adjoint = false) or D∨.
    fn diagonal(&self, adjoint: bool) -> (PeriodicField, PeriodicField) {
        if adjoint {
            (self.u.conj(), self.u.clone())
        } else {
            (self.u.clone(), self.u.conj())
        }
    }
}

/// Connected components of the mode graph on |m|, |n| ≤ `cutoff`.
pub fn mode_blocks(u: &PeriodicField, cutoff: usize) -> Vec<Vec<(i64, i64)>> {
    let side = 2 * cutoff + 1;
    let c = cutoff as i64;
    let idx = |m: i64, n: i64| ((m + c) as usize) * side + (n + c) as usize;
    let mut parent: Vec<usize> = (0..side * side).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let steps: Vec<(i64, i64)> = u.support().into_iter().filter(|&(m, n)| (m, n) != (0, 0)).collect();
    for m in -c..=c {
        for n in -c..=c {
            for &(dm, dn) in &steps {
                let (m2, n2) = (m + dm, n + dn);
                if m2.abs() <= c && n2.abs() <= c {
                    let (a, b) = (find(&mut parent, idx(m, n)), find(&mut parent, idx(m2, n2)));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<(i64, i64)>> = Default::default();
    for m in -c..=c {
        for n in -c..=c {
            let r = find(&mut parent, idx(m, n));
            groups.entry(r).or_default().push((m, n));
        }
    }
    groups.into_values().collect()
}

/// Convolution matrix of multiplication by `f` restricted to `modes`.
fn conv_block(f: &PeriodicField, modes: &[(i64, i64)]) -> CMat {
    cmat(modes.len(), modes.len(), |i, j| {
        f.coeff(modes[i].0 - modes[j].0, modes[i].1 - modes[j].1)
    })
}

fn dirac_block(pot: &DiracPotential, modes: &[(i64, i64)], e: &ExponentPair, adjoint: bool) -> CMat {
    let l = pot.lattice();
    let k = modes.len();
    let (a, b) = pot.diagonal(adjoint);
    let ca = conv_block(&a, modes);
    let cb = conv_block(&b, modes);
    let mut m = CMat::zeros(2 * k, 2 * k);
    for i in 0..k {
        let (d, db) = l.symbols(modes[i].0, modes[i].1);
        for j in 0..k {
            m[(i, j)] = ca[(i, j)];
            m[(k + i, k + j)] = cb[(i, j)];
        }
        m[(i, k + i)] = d + e.mu;
        m[(k + i, i)] = -(db + e.nu);
    }
    m
}

fn all_modes(cutoff: usize) -> Vec<(i64, i64)> {
    let c = cutoff as i64;
    (-c..=c).flat_map(|m| (-c..=c).map(move |n| (m, n))).collect()
}

/// Dense matrix of D(μ,ν) (or D∨ when `adjoint`) on the modes |m|, |n| ≤ `cutoff`.
pub fn assemble_dirac(pot: &DiracPotential, e: &ExponentPair, adjoint: bool, cutoff: usize) -> CMat {
    dirac_block(pot, &all_modes(cutoff), e, adjoint)
}

/// All singular values of the truncated operator at the given exponents, ascending.
pub fn singular_values_at(
    pot: &DiracPotential,
    e: &ExponentPair,
    adjoint: bool,
    cutoff: usize,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for block in mode_blocks(&pot.u, cutoff) {
        out.extend(linalg::singular_values(&dirac_block(pot, &block, e, adjoint))?);
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// The `k` smallest singular values at multipliers (κ₁, κ₂), principal logarithms.
pub fn kernel_singular_values(
    pot: &DiracPotential,
    multipliers: (C64, C64),
    k: usize,
    adjoint: bool,
    cutoff: usize,
) -> Result<Vec<f64>> {
    let e = ExponentPair::from_multipliers(multipliers.0, multipliers.1, pot.lattice())?;
    let mut s = singular_values_at(pot, &e, adjoint, cutoff)?;
    s.truncate(k);
    Ok(s)
}

/// Number of singular values below `tol`, or below `tol·σ_max` when `relative`.
pub fn kernel_dimension(singular_values: &[f64], tol: f64, relative: bool) -> usize {
    let smax = singular_values.iter().copied().fold(0.0, f64::max);
    let t = if relative { tol * smax } else { tol };
    singular_values.iter().filter(|&&s| s < t).count()
}

/// The truncated matrices satisfy D(μ,ν)ᴴ = D∨(−ν̄, −μ̄); this is the
/// multiplier pair at which D∨ carries the kernel dimension of D at (κ₁, κ₂).
pub fn hermitian_partner(multipliers: (C64, C64)) -> (C64, C64) {
    (multipliers.0.conj().inv(), multipliers.1.conj().inv())
}

#[derive(Debug, Clone, Copy)]
pub struct SliceOptions {
    pub cutoff: usize,
    /// Eigenpairs with larger full-system residual are discarded.
    pub residual_tol: f64,
    pub keep_vectors: bool,
}

impl Default for SliceOptions {
    fn default() -> Self {
        Self { cutoff: 16, residual_tol: 1e-8, keep_vectors: true }
    }
}

#[derive(Debug, Clone)]
pub struct SliceEigenpair {
    pub nu: C64,
    pub block: usize,
    pub psi1: Vec<C64>,
    pub psi2: Vec<C64>,
    pub residual: f64,
}

/// All ν with nontrivial kernel of the truncated D(μ,ν), ordered by (Re ν, Im ν).
#[derive(Debug, Clone)]
pub struct SliceSpectrum {
    pub mu: C64,
    pub cutoff: usize,
    pub adjoint: bool,
    pub blocks: Vec<Vec<(i64, i64)>>,
    pub pairs: Vec<SliceEigenpair>,
    /// Eigenpairs dropped for exceeding the residual threshold.
    pub rejected: usize,
}

impl SliceSpectrum {
    pub fn nus(&self) -> Vec<C64> {
        self.pairs.iter().map(|p| p.nu).collect()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.residual).collect()
    }

    /// Eigenpair `index` as a spinor with exponents (μ, ν).
    pub fn spinor(&self, index: usize, lattice: &Lattice) -> Result<QuasiPeriodicFunction> {
        let p = self
            .pairs
            .get(index)
            .ok_or_else(|| Error::InvalidInput(format!("slice has no eigenpair {index}")))?;
        if p.psi1.is_empty() {
            return Err(Error::InvalidInput("slice computed without eigenvectors".into()));
        }
        let mut f1 = PeriodicField::zeros(*lattice, self.cutoff);
        let mut f2 = PeriodicField::zeros(*lattice, self.cutoff);
        for (k, &(m, n)) in self.blocks[p.block].iter().enumerate() {
            f1.set(m, n, p.psi1[k]);
            f2.set(m, n, p.psi2[k]);
        }
        Ok(QuasiPeriodicFunction::spinor(ExponentPair::new(self.mu, p.nu), f1, f2))
    }
}

fn resonance_check(lattice: &Lattice, mu: C64, cutoff: usize) -> Result<()> {
    let tol = 1e-10 * (1.0 + mu.norm());
    for (m, n) in all_modes(cutoff) {
        let s = lattice.symbols(m, n).0 + mu;
        if s.norm() < tol {
            return Err(Error::Resonance { m, n, magnitude: s.norm() });
        }
    }
    Ok(())
}

/// Resonance handling for one block: Ok(true) means the block contributes no ν.
///
/// A resonant mode d + μ = 0 that forms its own block decouples as
/// [[a, 0], [−(d̄+ν), b]], which has a kernel for no ν when ab ≠ 0.
/// Resonances inside coupled blocks are errors.
fn resonant_block(lattice: &Lattice, mu: C64, modes: &[(i64, i64)], ca: &CMat, cb: &CMat) -> Result<bool> {
    let tol = 1e-10 * (1.0 + mu.norm());
    for &(m, n) in modes {
        let s = lattice.symbols(m, n).0 + mu;
        if s.norm() < tol {
            if modes.len() == 1 && (ca[(0, 0)] * cb[(0, 0)]).norm() > 1e-20 {
                return Ok(true);
            }
            return Err(Error::Resonance { m, n, magnitude: s.norm() });
        }
    }
    Ok(false)
}

/// Eigenvalues ν of T(μ) = −∂̄ − B(∂+μ)⁻¹A with ψ₂ = −(∂+μ)⁻¹Aψ₁, where
/// (A, B) = (U, Ū) for D and (Ū, U) for D∨.
pub fn slice_spectrum(pot: &DiracPotential, mu: C64, adjoint: bool, opts: &SliceOptions) -> Result<SliceSpectrum> {
    let l = *pot.lattice();
    let blocks = mode_blocks(&pot.u, opts.cutoff);
    let (a, b) = pot.diagonal(adjoint);
    let mut pairs = Vec::new();
    let mut rejected = 0;
    for (bi, modes) in blocks.iter().enumerate() {
        let k = modes.len();
        let ca = conv_block(&a, modes);
        let cb = conv_block(&b, modes);
        if resonant_block(&l, mu, modes, &ca, &cb)? {
            continue;
        }
        let sym: Vec<(C64, C64)> = modes.iter().map(|&(m, n)| l.symbols(m, n)).collect();
        let inv: Vec<C64> = sym.iter().map(|s| (s.0 + mu).inv()).collect();
        // T = −diag(d̄) − B·diag(1/(d+μ))·A
        let scaled_a = cmat(k, k, |i, j| inv[i] * ca[(i, j)]);
        let mut t = &cb * &scaled_a;
        for i in 0..k {
            for j in 0..k {
                t[(i, j)] = -t[(i, j)];
            }
            t[(i, i)] -= sym[i].1;
        }
        let (vals, vecs) = linalg::eigen(&t)?;
        for (j, &nu) in vals.iter().enumerate() {
            let psi1: Vec<C64> = (0..k).map(|i| vecs[(i, j)]).collect();
            let apsi: Vec<C64> = (0..k).map(|i| (0..k).map(|q| ca[(i, q)] * psi1[q]).sum()).collect();
            let psi2: Vec<C64> = (0..k).map(|i| -inv[i] * apsi[i]).collect();
            let mut r = 0.0;
            for i in 0..k {
                let r1 = apsi[i] + (sym[i].0 + mu) * psi2[i];
                let bpsi: C64 = (0..k).map(|q| cb[(i, q)] * psi2[q]).sum();
                let r2 = -(sym[i].1 + nu) * psi1[i] + bpsi;
                r += r1.norm_sqr() + r2.norm_sqr();
            }
            let norm = psi1.iter().chain(&psi2).map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let residual = r.sqrt() / norm;
            if !(residual <= opts.residual_tol) {
                rejected += 1;
                continue;
            }
            let (psi1, psi2) = if opts.keep_vectors {
                (psi1.iter().map(|v| v / norm).collect(), psi2.iter().map(|v| v / norm).collect())
            } else {
                (vec![], vec![])
            };
            pairs.push(SliceEigenpair { nu, block: bi, psi1, psi2, residual });
        }
    }
    pairs.sort_by(|p, q| p.nu.re.total_cmp(&q.nu.re).then(p.nu.im.total_cmp(&q.nu.im)));
    Ok(SliceSpectrum { mu, cutoff: opts.cutoff, adjoint, blocks, pairs, rejected })
}

/// Eigenvalues ν of T(μ) only (no residual screening).
pub fn slice_eigenvalues(pot: &DiracPotential, mu: C64, adjoint: bool, cutoff: usize) -> Result<Vec<C64>> {
    let l = *pot.lattice();
    let (a, b) = pot.diagonal(adjoint);
    let mut out = Vec::new();
    for modes in mode_blocks(&pot.u, cutoff) {
        let k = modes.len();
        let ca = conv_block(&a, &modes);
        let cb = conv_block(&b, &modes);
        if resonant_block(&l, mu, &modes, &ca, &cb)? {
            continue;
        }
        let sym: Vec<(C64, C64)> = modes.iter().map(|&(m, n)| l.symbols(m, n)).collect();
        let scaled_a = cmat(k, k, |i, j| (sym[i].0 + mu).inv() * ca[(i, j)]);
        let mut t = &cb * &scaled_a;
        for i in 0..k {
            for j in 0..k {
                t[(i, j)] = -t[(i, j)];
            }
            t[(i, i)] -= sym[i].1;
        }
        out.extend(linalg::eigenvalues(&t)?);
    }
    Ok(out)
}

/// Coefficient norm of Dψ (or D∨ψ) computed with untruncated products.
pub fn dirac_residual(pot: &DiracPotential, psi: &QuasiPeriodicFunction, adjoint: bool) -> Result<f64> {
    let [r1, r2] = dirac_apply(pot, psi, adjoint)?;
    Ok((r1.norm().powi(2) + r2.norm().powi(2)).sqrt())
}

/// max over a `grid × grid` cell sample of |periodic part of Dψ|.
pub fn dirac_residual_grid(
    pot: &DiracPotential,
    psi: &QuasiPeriodicFunction,
    adjoint: bool,
    grid: usize,
) -> Result<f64> {
    let [r1, r2] = dirac_apply(pot, psi, adjoint)?;
    let (g1, g2) = (r1.eval_grid(grid), r2.eval_grid(grid));
    Ok(g1.iter().zip(&g2).map(|(a, b)| (a.norm_sqr() + b.norm_sqr()).sqrt()).fold(0.0, f64::max))
}

/// Periodic parts of the two rows of Dψ.
pub fn dirac_apply(pot: &DiracPotential, psi: &QuasiPeriodicFunction, adjoint: bool) -> Result<[PeriodicField; 2]> {
    if !psi.is_spinor() {
        return Err(Error::InvalidInput("Dirac operator acts on spinors".into()));
    }
    let (a, b) = pot.diagonal(adjoint);
    let (p1, p2) = (psi.component(0), psi.component(1));
    let e = psi.exponents;
    let r1 = &a.mul_full(p1)? + &p2.apply_shifted(crate::field::Direction::Holomorphic, e.mu);
    let r2 = &b.mul_full(p2)? - &p1.apply_shifted(crate::field::Direction::Antiholomorphic, e.nu);
    Ok([r1, r2])
}

/// Eigenpair `index` of the μ-slice as a spinor scaled to periodic sup-norm 1.
pub fn floquet_function(
    pot: &DiracPotential,
    mu: C64,
    index: usize,
    adjoint: bool,
    opts: &SliceOptions,
) -> Result<QuasiPeriodicFunction> {
    let mut o = *opts;
    o.keep_vectors = true;
    o.residual_tol = f64::INFINITY;
    let slice = slice_spectrum(pot, mu, adjoint, &o)?;
    let psi = slice.spinor(index, pot.lattice())?;
    let grid = 4 * opts.cutoff + 4;
    let scale = psi.periodic_sup_norm(grid);
    if scale == 0.0 {
        return Err(Error::Numerical("zero eigenvector".into()));
    }
    let psi = psi.scale(C64::new(1.0 / scale, 0.0));
    let residual = dirac_residual(pot, &psi, adjoint)?;
    if residual > opts.residual_tol {
        return Err(Error::SpuriousMode(format!(
            "eigenpair {index} at mu = {mu} has residual {residual:.3e}"
        )));
    }
    Ok(psi)
}

/// U·exp(ā + b̄z̄ − a − bz); requires Im(bγ_j) ∈ πZ.
pub fn gauge_transform(pot: &DiracPotential, a: C64, b: C64) -> Result<DiracPotential> {
    let l = pot.lattice();
    let mut mode = [0i64; 2];
    for (j, g) in [l.gamma1, l.gamma2].into_iter().enumerate() {
        let t = (b * g).im / PI;
        if (t - t.round()).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "gauge parameter b = {b} is inadmissible: Im(b·γ{}) = {:.6}π",
                j + 1,
                t
            )));
        }
        // The factor is exp(−2i Im(bz)) = e_{mn} with m = −Im(bγ₁)/π, n = −Im(bγ₂)/π.
        mode[j] = -(t.round() as i64);
    }
    let phase = C64::from_polar(1.0, -2.0 * a.im);
    let u = pot.u.shift_modes(mode[0], mode[1]).scale(phase);
    let real = u.reality_defect() <= 1e-12;
    Ok(DiracPotential { u, real_reduction: real && pot.real_reduction })
}

#[derive(Debug, Clone, Serialize)]
pub struct CloudRecord {
    pub mu: C64,
    pub nu: C64,
    pub kappa1: C64,
    pub kappa2: C64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct CloudSample {
    pub index: usize,
    pub mu: C64,
    /// Reason the sample was skipped, if it was.
    pub skipped: Option<String>,
    pub records: Vec<CloudRecord>,
}

/// Sampled multiplier set: per contour point, the retained (μ, κ₁, κ₂).
#[derive(Debug, Clone)]
pub struct MultiplierCloud {
    pub lattice: Lattice,
    pub cutoff: Option<usize>,
    pub samples: Vec<CloudSample>,
}

#[derive(Debug, Clone, Copy)]
pub struct CloudOptions {
    pub cutoff: usize,
    /// Eigenvalues must move less than this when the cutoff grows by 2.
    pub delta_conv: f64,
    pub residual_tol: f64,
}

impl Default for CloudOptions {
    fn default() -> Self {
        Self { cutoff: 16, delta_conv: 1e-6, residual_tol: 1e-8 }
    }
}

/// Multiplier cloud over `contour`; samples are evaluated in parallel and kept in contour order.
pub fn multiplier_cloud(pot: &DiracPotential, contour: &[C64], opts: &CloudOptions) -> MultiplierCloud {
    let lattice = *pot.lattice();
    let samples = contour
        .par_iter()
        .enumerate()
        .map(|(index, &mu)| match cloud_sample(pot, mu, opts) {
            Ok(records) => CloudSample { index, mu, skipped: None, records },
            Err(e) => CloudSample { index, mu, skipped: Some(e.to_string()), records: vec![] },
        })
        .collect();
    MultiplierCloud { lattice, cutoff: Some(opts.cutoff), samples }
}

fn cloud_sample(pot: &DiracPotential, mu: C64, opts: &CloudOptions) -> Result<Vec<CloudRecord>> {
    let l = *pot.lattice();
    resonance_check(&l, mu, opts.cutoff + 2)?;
    let slice = slice_spectrum(
        pot,
        mu,
        false,
        &SliceOptions { cutoff: opts.cutoff, residual_tol: opts.residual_tol, keep_vectors: false },
    )?;
    let mut finer = slice_eigenvalues(pot, mu, false, opts.cutoff + 2)?;
    finer.sort_by(|a, b| a.re.total_cmp(&b.re));
    let mut records = Vec::new();
    for p in &slice.pairs {
        if nearest_distance(&finer, p.nu) < opts.delta_conv {
            let e = ExponentPair::new(mu, p.nu);
            let (kappa1, kappa2) = e.multipliers(&l);
            records.push(CloudRecord { mu, nu: p.nu, kappa1, kappa2, residual: p.residual });
        }
    }
    sort_records(&mut records);
    Ok(records)
}

fn sort_records(records: &mut [CloudRecord]) {
    records.sort_by(|a, b| {
        a.kappa2
            .norm()
            .total_cmp(&b.kappa2.norm())
            .then(a.kappa2.arg().total_cmp(&b.kappa2.arg()))
    });
}

/// Distance from `x` to the nearest element of `sorted` (sorted by real part).
fn nearest_distance(sorted: &[C64], x: C64) -> f64 {
    let start = sorted.partition_point(|v| v.re < x.re);
    let mut best = f64::INFINITY;
    for v in sorted[start..].iter() {
        if v.re - x.re > best {
            break;
        }
        best = best.min((v - x).norm());
    }
    for v in sorted[..start].iter().rev() {
        if x.re - v.re > best {
            break;
        }
        best = best.min((v - x).norm());
    }
    best
}

impl MultiplierCloud {
    pub fn len(&self) -> usize {
        self.samples.iter().map(|s| s.records.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Image under the gauge action with parameter b: μ ↦ μ + b and κ_j ↦ e^{bγ_j}κ_j,
    /// the cloud of `gauge_transform(U, a, b)` on the shifted contour.
    pub fn gauge_rescaled(&self, b: C64) -> MultiplierCloud {
        let l = self.lattice;
        let f1 = (b * l.gamma1).exp();
        let f2 = (b * l.gamma2).exp();
        let samples = self
            .samples
            .iter()
            .map(|s| CloudSample {
                index: s.index,
                mu: s.mu + b,
                skipped: s.skipped.clone(),
                records: s
                    .records
                    .iter()
                    .map(|r| CloudRecord {
                        mu: r.mu + b,
                        nu: r.nu,
                        kappa1: r.kappa1 * f1,
                        kappa2: r.kappa2 * f2,
                        residual: r.residual,
                    })
                    .collect(),
            })
            .collect();
        MultiplierCloud { lattice: l, cutoff: self.cutoff, samples }
    }

    /// The cloud with every multiplier pair conjugated, (κ₁, κ₂) ↦ (κ̄₁, κ̄₂),
    /// re-indexed by the conjugate exponent μ ↦ ν̄ of the star involution.
    pub fn conjugated_records(&self) -> Vec<CloudRecord> {
        self.samples
            .iter()
            .flat_map(|s| s.records.iter())
            .map(|r| CloudRecord {
                mu: r.nu.conj(),
                nu: r.mu.conj(),
                kappa1: r.kappa1.conj(),
                kappa2: r.kappa2.conj(),
                residual: r.residual,
            })
            .collect()
    }

    /// CSV with header `mu_re,mu_im,kappa1_re,kappa1_im,kappa2_re,kappa2_im,residual`.
    pub fn to_csv(&self) -> String {
        use crate::format::fmt_f64 as f;
        let mut s = String::from("mu_re,mu_im,kappa1_re,kappa1_im,kappa2_re,kappa2_im,residual\n");
        for sample in &self.samples {
            for r in &sample.records {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    f(r.mu.re),
                    f(r.mu.im),
                    f(r.kappa1.re),
                    f(r.kappa1.im),
                    f(r.kappa2.re),
                    f(r.kappa2.im),
                    f(r.residual)
                );
            }
        }
        s
    }

    /// Parses the CSV format; samples are the distinct μ values in order of appearance.
    /// ν is recovered from (μ, κ₁, κ₂), which determine it uniquely.
    pub fn from_csv(text: &str, lattice: Lattice) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty cloud file".into()))?;
        if header.trim() != "mu_re,mu_im,kappa1_re,kappa1_im,kappa2_re,kappa2_im,residual" {
            return Err(Error::Parse(format!("unexpected cloud header: {header}")));
        }
        let mut samples: Vec<CloudSample> = Vec::new();
        for line in lines {
            let v: Vec<f64> = line
                .split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number in: {line}"))))
                .collect::<Result<_>>()?;
            if v.len() != 7 {
                return Err(Error::Parse(format!("expected 7 columns: {line}")));
            }
            let mu = C64::new(v[0], v[1]);
            let (kappa1, kappa2) = (C64::new(v[2], v[3]), C64::new(v[4], v[5]));
            let nu = nu_from_multipliers(mu, kappa1, kappa2, &lattice)?;
            let rec = CloudRecord { mu, nu, kappa1, kappa2, residual: v[6] };
            match samples.last_mut() {
                Some(s) if s.mu == mu => s.records.push(rec),
                _ => samples.push(CloudSample { index: samples.len(), mu, skipped: None, records: vec![rec] }),
            }
        }
        Ok(Self { lattice, cutoff: None, samples })
    }
}

/// The unique ν with exp(μγ_j + νγ̄_j) = κ_j, if it exists.
pub fn nu_from_multipliers(mu: C64, k1: C64, k2: C64, lattice: &Lattice) -> Result<C64> {
    let rep = ExponentPair::from_multipliers(k1, k2, lattice)?;
    // (μ, ν) − rep must be a mode symbol (d_k, d̄_k) with d_k = μ − μ_rep.
    let d = mu - rep.mu;
    let k = lattice
        .mode_of_symbol(d, 1e-6)
        .ok_or_else(|| Error::InvalidInput(format!("μ = {mu} is incompatible with the multipliers")))?;
    let (dk, dbk) = lattice.symbols(k.0, k.1);
    if (dk - d).norm() > 1e-6 * (1.0 + d.norm()) {
        return Err(Error::InvalidInput(format!("μ = {mu} is incompatible with the multipliers")));
    }
    Ok(rep.nu + dbk)
}

#[derive(Debug, Clone, Copy)]
pub struct DistanceOptions {
    /// Only ν with |ν| ≤ window are required to match; `None` means all.
    pub window: Option<f64>,
    /// Partners may lie up to this much outside the window.
    pub margin: f64,
}

impl DistanceOptions {
    /// Window of a quarter of the cutoff, the radius where truncated slices have converged.
    pub fn for_cutoff(cutoff: usize) -> Self {
        Self { window: Some(cutoff as f64 / 4.0), margin: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CloudDistance {
    pub distance: f64,
    pub per_sample: Vec<f64>,
    pub diagnostics: Vec<String>,
}

/// Matched distance between two clouds on the same contour.
///
/// Per sample, the ν inside the window of each cloud are matched injectively
/// (minimum total cost) to ν of the other cloud within window + margin; the
/// sample distance is the largest matched |Δ log κ₂| = |Δν||γ₂|. Multipliers
/// are compared through ν, which is the lifted logarithm of κ₂ at fixed μ and
/// is continuous along the contour. Cardinality failures give an infinite distance.
pub fn cloud_distance(a: &MultiplierCloud, b: &MultiplierCloud, opts: &DistanceOptions) -> CloudDistance {
    let mut diagnostics = Vec::new();
    let scale = a.lattice.gamma2.norm();
    if a.samples.len() != b.samples.len() {
        diagnostics.push(format!("sample counts differ: {} vs {}", a.samples.len(), b.samples.len()));
        return CloudDistance { distance: f64::INFINITY, per_sample: vec![], diagnostics };
    }
    let mut per_sample = Vec::with_capacity(a.samples.len());
    for (sa, sb) in a.samples.iter().zip(&b.samples) {
        if (sa.mu - sb.mu).norm() > 1e-12 * (1.0 + sa.mu.norm()) {
            diagnostics.push(format!("sample {}: contour points differ ({} vs {})", sa.index, sa.mu, sb.mu));
            per_sample.push(f64::INFINITY);
            continue;
        }
        match (&sa.skipped, &sb.skipped) {
            (Some(_), Some(_)) => {
                per_sample.push(0.0);
                diagnostics.push(format!("sample {}: skipped in both clouds", sa.index));
                continue;
            }
            (Some(r), None) | (None, Some(r)) => {
                per_sample.push(f64::INFINITY);
                diagnostics.push(format!("sample {}: skipped in one cloud only ({r})", sa.index));
                continue;
            }
            _ => {}
        }
        let na: Vec<C64> = sa.records.iter().map(|r| r.nu).collect();
        let nb: Vec<C64> = sb.records.iter().map(|r| r.nu).collect();
        let d1 = one_sided(&na, &nb, opts);
        let d2 = one_sided(&nb, &na, opts);
        let d = d1.max(d2) * scale;
        if !d.is_finite() {
            diagnostics.push(format!("sample {}: cardinality mismatch inside the window", sa.index));
        }
        per_sample.push(d);
    }
    let distance = per_sample.iter().copied().fold(0.0, f64::max);
    CloudDistance { distance, per_sample, diagnostics }
}

/// Symmetric windowed matched distance |Δν| between two sets of ν.
pub fn nu_set_distance(a: &[C64], b: &[C64], opts: &DistanceOptions) -> f64 {
    one_sided(a, b, opts).max(one_sided(b, a, opts))
}

/// Largest matched distance from the windowed part of `xs` into `ys`.
fn one_sided(xs: &[C64], ys: &[C64], opts: &DistanceOptions) -> f64 {
    let (inner, outer) = match opts.window {
        Some(r) => (r, r + opts.margin),
        None => (f64::INFINITY, f64::INFINITY),
    };
    let rows: Vec<C64> = xs.iter().copied().filter(|v| v.norm() <= inner).collect();
    let cols: Vec<C64> = ys.iter().copied().filter(|v| v.norm() <= outer).collect();
    if rows.len() > cols.len() {
        return f64::INFINITY;
    }
    if rows.is_empty() {
        return 0.0;
    }
    // Nearest neighbours; if they are distinct they are optimal for any monotone cost.
    let mut nn = Vec::with_capacity(rows.len());
    for x in &rows {
        let (j, d) = cols
            .iter()
            .enumerate()
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("nonempty");
        nn.push((j, d));
    }
    let mut seen = vec![false; cols.len()];
    let injective = nn.iter().all(|&(j, _)| !std::mem::replace(&mut seen[j], true));
    if injective {
        return nn.iter().map(|p| p.1).fold(0.0, f64::max);
    }
    let cost: Vec<f64> = rows.iter().flat_map(|x| cols.iter().map(move |y| (x - y).norm())).collect();
    let assign = linalg::assignment(&cost, rows.len(), cols.len());
    assign.iter().enumerate().map(|(i, &j)| cost[i * cols.len() + j]).fold(0.0, f64::max)
}

/// Slice in the x-exponent: fixes s = μ + ν and returns the θ = μ − ν (with
/// spinors) for which the truncated D((s+θ)/2, (s−θ)/2) has a kernel on the
/// modes (0, n). Requires a potential supported on those modes.
pub fn theta_slice(pot: &DiracPotential, s: C64, adjoint: bool, cutoff: usize) -> Result<Vec<(C64, QuasiPeriodicFunction)>> {
    if pot.u.support().iter().any(|&(m, _)| m != 0) {
        return Err(Error::InvalidInput("x-exponent slice needs a potential depending on y only".into()));
    }
    let l = *pot.lattice();
    let c = cutoff as i64;
    let modes: Vec<(i64, i64)> = (-c..=c).map(|n| (0, n)).collect();
    let k = modes.len();
    let half = C64::new(0.5, 0.0);
    let m0 = dirac_block(pot, &modes, &ExponentPair::new(s * half, s * half), adjoint);
    // (M0 + θJ) f = 0 with J = [[0, I/2], [I/2, 0]]  ⇒  θ f = −J⁻¹ M0 f.
    let t = cmat(2 * k, 2 * k, |i, j| {
        let src = if i < k { i + k } else { i - k };
        -m0[(src, j)] * 2.0
    });
    let (vals, vecs) = linalg::eigen(&t)?;
    let mut out = Vec::with_capacity(vals.len());
    for (j, &theta) in vals.iter().enumerate() {
        let mut f1 = PeriodicField::zeros(l, cutoff);
        let mut f2 = PeriodicField::zeros(l, cutoff);
        for (i, &(m, n)) in modes.iter().enumerate() {
            f1.set(m, n, vecs[(i, j)]);
            f2.set(m, n, vecs[(k + i, j)]);
        }
        let e = ExponentPair::new((s + theta) * half, (s - theta) * half);
        out.push((theta, QuasiPeriodicFunction::spinor(e, f1, f2)));
    }
    out.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
    Ok(out)
}

/// Closed-form ν for a constant potential c at μ: ν = −d̄_k − |c|²/(d_k + μ) for every
/// mode with d_k + μ ≠ 0 (a resonant mode carries no finite ν).
pub fn constant_potential_nus(lattice: &Lattice, c: C64, mu: C64, cutoff: usize) -> Vec<C64> {
    let tol = 1e-10 * (1.0 + mu.norm());
    all_modes(cutoff)
        .into_iter()
        .filter(|&(m, n)| (lattice.symbols(m, n).0 + mu).norm() >= tol)
        .map(|(m, n)| {
            let (d, db) = lattice.symbols(m, n);
            -db - c.norm_sqr() / (d + mu)
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn match_sets(a: &[C64], b: &[C64]) -> f64 {
        assert_eq!(a.len(), b.len());
        let cost: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| (x - y).norm())).collect();
        let m = linalg::assignment(&cost, a.len(), b.len());
        m.iter().enumerate().map(|(i, &j)| cost[i * b.len() + j]).fold(0.0, f64::max)
    }

    #[test]
    fn constant_potential_slice_is_closed_form() {
        let l = Lattice::square();
        let u0 = c(0.3, -0.2);
        let pot = DiracPotential::general(PeriodicField::constant(l, 0, u0));
        let mu = c(0.17, 0.31);
        let opts = SliceOptions { cutoff: 3, ..Default::default() };
        let s = slice_spectrum(&pot, mu, false, &opts).unwrap();
        assert_eq!(s.blocks.len(), 49);
        let expect = constant_potential_nus(&l, u0, mu, 3);
        assert!(match_sets(&s.nus(), &expect) < 1e-13);
        assert!(s.residuals().iter().all(|&r| r < 1e-13));
    }

    #[test]
    fn zero_potential_kernel_at_trivial_multipliers() {
        let l = Lattice::square();
        let pot = DiracPotential::general(PeriodicField::zeros(l, 0));
        let s = kernel_singular_values(&pot, (c(1.0, 0.0), c(1.0, 0.0)), 3, false, 2).unwrap();
        assert!(s[0] < 1e-15 && s[1] < 1e-15 && s[2] > 0.1);
        assert_eq!(kernel_dimension(&s, 1e-10, false), 2);
    }

    #[test]
    fn hermitian_adjoint_identity() {
        let l = Lattice::square();
        let u = PeriodicField::from_modes(l, 1, [(0, 1, c(0.2, 0.1)), (1, -1, c(-0.3, 0.05))]).unwrap();
        let pot = DiracPotential::general(u);
        let e = ExponentPair::new(c(0.13, -0.4), c(0.2, 0.07));
        let d = assemble_dirac(&pot, &e, false, 2);
        let partner = ExponentPair::new(-e.nu.conj(), -e.mu.conj());
        let dv = assemble_dirac(&pot, &partner, true, 2);
        let mut worst: f64 = 0.0;
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                worst = worst.max((d[(j, i)].conj() - dv[(i, j)]).norm());
            }
        }
        assert!(worst < 1e-15);
        let (k1, k2) = e.multipliers(&l);
        let (p1, p2) = partner.multipliers(&l);
        let (h1, h2) = hermitian_partner((k1, k2));
        assert!((p1 - h1).norm() < 1e-12 && (p2 - h2).norm() < 1e-12);
    }

    #[test]
    fn blocks_of_a_y_only_potential() {
        let l = Lattice::square();
        let u = PeriodicField::from_modes(l, 1, [(0, 1, c(0.5, 0.0)), (0, -1, c(0.5, 0.0))]).unwrap();
        let b = mode_blocks(&u, 3);
        assert_eq!(b.len(), 7);
        assert!(b.iter().all(|blk| blk.len() == 7 && blk.iter().all(|&(m, _)| m == blk[0].0)));
    }

    #[test]
    fn resonant_slice_is_reported() {
        let l = Lattice::square();
        let u = PeriodicField::from_modes(l, 1, [(0, 0, c(0.5, 0.0)), (0, 1, c(0.1, 0.0))]).unwrap();
        let err = slice_spectrum(&DiracPotential::general(u), c(0.0, 0.0), false, &SliceOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Resonance { m: 0, n: 0, .. }));
        // A decoupled resonant mode simply carries no eigenvalue.
        let pot = DiracPotential::general(PeriodicField::constant(l, 0, c(0.5, 0.0)));
        let s = slice_spectrum(&pot, c(0.0, 0.0), false, &SliceOptions { cutoff: 2, ..Default::default() }).unwrap();
        assert_eq!(s.pairs.len(), 24);
        let zero = DiracPotential::general(PeriodicField::zeros(l, 0));
        assert!(slice_spectrum(&zero, c(0.0, 0.0), false, &SliceOptions::default()).is_err());
    }

    #[test]
    fn floquet_function_solves_the_equation() {
        let l = Lattice::square();
        let u = PeriodicField::from_modes(l, 1, [(0, 0, c(0.5, 0.0)), (1, 0, c(0.1, 0.05))]).unwrap();
        let pot = DiracPotential::general(u);
        let opts = SliceOptions { cutoff: 12, residual_tol: 1e-8, keep_vectors: true };
        let slice = slice_spectrum(&pot, c(0.1, 0.2), false, &opts).unwrap();
        let target = slice.nus().iter().position(|v| v.norm() < 1.0).unwrap();
        let psi = floquet_function(&pot, c(0.1, 0.2), target, false, &opts).unwrap();
        assert!((psi.periodic_sup_norm(52) - 1.0).abs() < 1e-12);
        assert!(dirac_residual_grid(&pot, &psi, false, 32).unwrap() < 1e-8);
    }

    #[test]
    fn gauge_transform_matches_pointwise_factor() {
        let l = Lattice::square();
        let pot = DiracPotential::new(PeriodicField::constant(l, 0, c(0.5, 0.0)), true).unwrap();
        assert!(gauge_transform(&pot, c(0.0, 0.0), c(0.1, 0.0)).is_err());
        let (a, b) = (c(0.2, 0.3), c(0.5, 1.5));
        let g = gauge_transform(&pot, a, b).unwrap();
        for z in [c(0.3, 1.1), c(-2.0, 0.4)] {
            let f = (a.conj() + b.conj() * z.conj() - a - b * z).exp();
            assert!((g.u.eval(z) - 0.5 * f).norm() < 1e-14);
        }
    }

    #[test]
    fn cloud_csv_round_trip() {
        let l = Lattice::square();
        let pot = DiracPotential::general(PeriodicField::constant(l, 0, c(0.5, 0.0)));
        let contour = [c(0.0, 0.1), c(0.0, 0.2)];
        let cloud = multiplier_cloud(&pot, &contour, &CloudOptions { cutoff: 4, ..Default::default() });
        assert!(!cloud.is_empty());
        let back = MultiplierCloud::from_csv(&cloud.to_csv(), l).unwrap();
        assert_eq!(back.len(), cloud.len());
        let d = cloud_distance(&cloud, &back, &DistanceOptions { window: None, margin: 0.5 });
        assert!(d.distance < 1e-12, "{d:?}");
    }
}
