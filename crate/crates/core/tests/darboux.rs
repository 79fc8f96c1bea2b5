use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use torus_spectra::darboux::{self, Normalization, Side};
use torus_spectra::dirac2d::{self, SliceOptions};
use torus_spectra::fixtures::clifford_s3;
use torus_spectra::weierstrass::{coordinate_derivatives, integrate_surface};
use torus_spectra::{Error, PeriodicField};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn sample_points() -> Vec<C64> {
    (0..7).map(|k| c(0.37 + 0.81 * k as f64, 1.9 - 0.53 * k as f64)).collect()
}

#[test]
fn self_pair_kernel_is_a_complex_coordinate() {
    let d = clifford_s3();
    let pair = d.darboux_pair().unwrap();
    let w = darboux::omega(&d.psi, &pair, Side::Direct, Normalization::Basepoint(c(0.0, 0.0))).unwrap();
    let t = integrate_surface(&coordinate_derivatives(&d.psi, &d.phi).unwrap());
    for z in sample_points() {
        let x = t.eval(z);
        let expect = c(x[2], -x[3]);
        assert!((w.eval(z)[0] - expect).norm() < 1e-10, "z = {z}");
    }
}

#[test]
fn tau_combination_is_minus_half_cos_y() {
    let d = clifford_s3();
    let du = d.tau_variation().unwrap();
    for z in sample_points() {
        assert!((du.eval(z) - c(-0.5 * z.im.cos(), 0.0)).norm() < 1e-14, "{z} {}", du.eval(z));
    }
    // Each pair alone contributes a single plane wave of modulus 1/4.
    let (_, dq) = darboux::potential_variation(&d.darboux_pair().unwrap()).unwrap();
    assert!((dq.eval(c(0.3, 0.2)).norm() - 0.25).abs() < 1e-14);
}

#[test]
fn self_pair_deformation_solves_linearized_equations() {
    let d = clifford_s3();
    let pair = d.darboux_pair().unwrap();
    let w = darboux::omega(&d.psi, &pair, Side::Direct, Normalization::Basepoint(c(0.0, 0.0))).unwrap();
    let def = darboux::deform(&pair, &d.psi, &w).unwrap();
    let r = darboux::linearized_residual(&pair.pq, &d.psi, &def.delta_psi, &def.delta_p, &def.delta_q).unwrap();
    assert!(r < 1e-12, "{r}");
    let phi = pair.phi_d.clone();
    let wd = darboux::omega(&phi, &pair, Side::Dual, Normalization::Basepoint(c(0.0, 0.0))).unwrap();
    let dphi = darboux::deform_dual(&pair, &phi, &wd).unwrap();
    let r = darboux::linearized_dual_residual(&pair.pq, &phi, &dphi, &def.delta_p, &def.delta_q).unwrap();
    assert!(r < 1e-12, "{r}");
}

#[test]
fn darboux_variation_is_isospectral_to_first_order() {
    let d = clifford_s3();
    let du = d.tau_variation().unwrap();
    let mu = c(0.0, 0.3);
    let a = darboux::isospectral_defect(&d.potential, &du, mu, 1e-3, 8).unwrap();
    let b = darboux::isospectral_defect(&d.potential, &du, mu, 5e-4, 8).unwrap();
    let ratio = a / b;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn zero_mode_variation_moves_the_spectrum_at_first_order() {
    let d = clifford_s3();
    let du = PeriodicField::constant(d.lattice, 0, c(1.0, 0.0));
    let mu = c(0.0, 0.3);
    let a = darboux::isospectral_defect(&d.potential, &du, mu, 1e-3, 8).unwrap();
    let b = darboux::isospectral_defect(&d.potential, &du, mu, 5e-4, 8).unwrap();
    let ratio = a / b;
    assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
}

/// Index of the slice eigenvalue closest to the origin (best resolved).
fn central(pot: &dirac2d::DiracPotential, mu: C64, adjoint: bool, opts: &SliceOptions) -> usize {
    let o = SliceOptions { residual_tol: f64::INFINITY, keep_vectors: false, ..*opts };
    let s = dirac2d::slice_spectrum(pot, mu, adjoint, &o).unwrap();
    let nus = s.nus();
    (0..nus.len()).min_by(|&a, &b| nus[a].norm().total_cmp(&nus[b].norm())).unwrap()
}

/// Floquet kernels on a generic potential, ψ taken at an unrelated μ.
fn generic_setup() -> (dirac2d::DiracPotential, darboux::DarbouxPair, torus_spectra::QuasiPeriodicFunction) {
    let l = torus_spectra::Lattice::square();
    let u = PeriodicField::from_modes(l, 1, [(0, 0, c(0.2, 0.1)), (0, 1, c(0.05, -0.02)), (1, 0, c(-0.03, 0.04))]).unwrap();
    let pot = dirac2d::DiracPotential::general(u);
    let opts = SliceOptions { cutoff: 10, ..Default::default() };
    let mu = c(0.13, 0.41);
    let psi_d = dirac2d::floquet_function(&pot, mu, central(&pot, mu, false, &opts), false, &opts).unwrap();
    let phi_d = darboux::reciprocal_partner(&pot, &psi_d, &opts).unwrap();
    let pair = darboux::DarbouxPair::new(darboux::PQPotential::from_dirac(&pot), psi_d, phi_d).unwrap();
    let mu = c(0.31, -0.22);
    let psi = dirac2d::floquet_function(&pot, mu, central(&pot, mu, false, &opts), false, &opts).unwrap();
    (pot, pair, psi)
}

#[test]
fn floquet_kernel_properties() {
    let (_, pair, psi) = generic_setup();
    let f = darboux::form(&psi, &pair, Side::Direct).unwrap();
    assert!(f.closedness_defect() < 1e-10, "{}", f.closedness_defect());
    let w = darboux::omega(&psi, &pair, Side::Direct, Normalization::Floquet).unwrap();
    assert!(darboux::primitive_defect(&w, &f).unwrap() < 1e-10);
    let (k1, k2) = psi.multipliers();
    let (h1, h2) = pair.multipliers();
    let (w1, w2) = w.multipliers();
    assert!((w1 - k1 / h1).norm() < 1e-10 * w1.norm() && (w2 - k2 / h2).norm() < 1e-10 * w2.norm());
    assert!(w.quasi_periodicity_defect(&sample_points()) < 1e-10);

    let other = darboux::omega_dbar_first(&psi, &pair, Side::Direct, Normalization::Floquet).unwrap();
    for z in sample_points() {
        let (a, b) = (w.eval(z)[0], other.eval(z)[0]);
        assert!((a - b).norm() < 1e-10 * (1.0 + a.norm()));
    }

    let (i1, i2) = darboux::period_integrals(&psi, &pair).unwrap();
    let lhs = i1 * (k2 / h2 - 1.0);
    let rhs = i2 * (k1 / h1 - 1.0);
    assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()), "{lhs} vs {rhs}");
}

#[test]
fn floquet_deformation_solves_linearized_equations() {
    let (_, pair, psi) = generic_setup();
    let w = darboux::omega(&psi, &pair, Side::Direct, Normalization::Floquet).unwrap();
    let def = darboux::deform(&pair, &psi, &w).unwrap();
    let r = darboux::linearized_residual(&pair.pq, &psi, &def.delta_psi, &def.delta_p, &def.delta_q).unwrap();
    assert!(r < 1e-8, "{r}");
}

#[test]
fn basepoint_kernel_rejects_nontrivial_ratio() {
    let (_, pair, psi) = generic_setup();
    let err = darboux::omega(&psi, &pair, Side::Direct, Normalization::Basepoint(c(0.0, 0.0))).unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)));
}

#[test]
fn willmore_is_stationary_under_the_tau_variation() {
    let d = clifford_s3();
    let du = d.tau_variation().unwrap();
    let u = &d.potential.u;
    let du = du.with_cutoff(u.cutoff().max(du.cutoff()));
    let u = u.with_cutoff(du.cutoff());
    let dw: f64 = u.coeffs().iter().zip(du.coeffs()).map(|(a, b)| (a.conj() * b).re).sum();
    assert!((8.0 * 4.0 * PI * PI * dw).abs() < 1e-14);
}
