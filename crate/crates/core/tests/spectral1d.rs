use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use torus_spectra::darboux::{self, Normalization, Side};
use torus_spectra::dirac2d::{self, SliceOptions};
use torus_spectra::fixtures::clifford_r3;
use torus_spectra::spectral1d::{self, Classification, HillOptions, HillPotential, ResonanceOptions};
use torus_spectra::{Error, QuasiPeriodicFunction};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn free() -> HillPotential {
    HillPotential::zero(2.0 * PI).unwrap()
}

fn one_sided(eps: f64) -> HillPotential {
    HillPotential::new(2.0 * PI, vec![(1, c(eps, 0.0))]).unwrap()
}

fn energy_grid() -> impl Iterator<Item = f64> {
    (0..=200).map(|j| 4.0 * j as f64 / 200.0)
}

#[test]
fn free_discriminant_closed_form() {
    let o = HillOptions::default();
    for e in energy_grid() {
        let d = spectral1d::discriminant(&free(), c(e, 0.0), &o).unwrap();
        assert!((d - 2.0 * (2.0 * PI * e.sqrt()).cos()).norm() < 1e-9, "E = {e}");
    }
}

#[test]
fn resonant_points_free_and_glued() {
    let o = ResonanceOptions::default();
    for (u, expect) in [(free(), Classification::Diagonalizable), (one_sided(0.5), Classification::Jordan)] {
        let mut found = Vec::new();
        for sign in [1, -1] {
            found.extend(spectral1d::resonant_points(&u, (0.1, 4.1), sign, &o).unwrap());
        }
        found.sort_by(|a, b| a.energy.re.total_cmp(&b.energy.re));
        assert_eq!(found.len(), 4, "{found:?}");
        for (j, p) in found.iter().enumerate() {
            let e = ((j + 1) * (j + 1)) as f64 / 4.0;
            assert!((p.energy - e).norm() < 1e-6, "{p:?}");
            assert_eq!(p.sign, if j % 2 == 0 { -1 } else { 1 });
            assert!(p.trace_defect < 1e-8);
            assert_eq!(p.classification, expect, "{p:?}");
        }
    }
}

#[test]
fn one_sided_potentials_keep_the_free_discriminant() {
    let o = HillOptions::default();
    for eps in [0.1, 0.3, 0.5] {
        let u = one_sided(eps);
        let worst = energy_grid()
            .map(|e| {
                let a = spectral1d::discriminant(&u, c(e, 0.0), &o).unwrap();
                let b = spectral1d::discriminant(&free(), c(e, 0.0), &o).unwrap();
                (a - b).norm()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "eps {eps}: {worst}");
        let r = spectral1d::resonant_points(&u, (0.2, 0.3), -1, &ResonanceOptions::default()).unwrap();
        assert_eq!(r[0].classification, Classification::Jordan);
    }
}

#[test]
fn monodromy_is_unimodular() {
    let o = HillOptions::default();
    let u = HillPotential::new(2.0 * PI, vec![(1, c(0.4, 0.1)), (-2, c(-0.2, 0.3))]).unwrap();
    let energies = energy_grid().map(|e| c(e, 0.0)).chain([c(1.7, -0.4), c(0.8, 0.3), c(3.9, 0.1)]);
    for e in energies {
        let m = spectral1d::schrodinger_monodromy(&u, e, &o).unwrap();
        assert!((m.det() - 1.0).norm() < 1e-10);
        let (a, b) = m.multipliers();
        assert!((a * b - 1.0).norm() < 1e-9 && a.norm() >= b.norm());
    }
}

#[test]
fn runge_kutta_order() {
    let r = spectral1d::richardson_factor(&one_sided(0.5), c(2.2, 0.0), 128);
    assert!((12.8..=19.2).contains(&r), "{r}");
}

#[test]
fn too_coarse_integration_is_rejected() {
    let o = HillOptions { steps: Some(8), ..Default::default() };
    let err = spectral1d::schrodinger_monodromy(&free(), c(3.0, 0.0), &o).unwrap_err();
    assert!(matches!(err, Error::Accuracy(_)));
}

#[test]
fn real_gap_edges_are_not_resonant() {
    let u = HillPotential::new(2.0 * PI, vec![(1, c(0.5, 0.0)), (-1, c(0.5, 0.0))]).unwrap();
    let scan = spectral1d::resonance_scan(&u, (-0.5, 1.5), -1, &ResonanceOptions::default()).unwrap();
    assert!(scan.resonant.is_empty(), "{scan:?}");
    assert!(scan.branch_points.len() >= 2);
    let o = HillOptions::default();
    for &(e, s) in &scan.branch_points {
        let m = spectral1d::schrodinger_monodromy(&u, e, &o).unwrap();
        assert!((m.trace() - 2.0 * s as f64).norm() < 1e-8);
        assert!(m.matrix[0][1].norm().max(m.matrix[1][0].norm()) > 1e-3);
    }
}

#[test]
fn nls_multiplier_at_the_double_point() {
    let pot = clifford_r3().potential;
    for k in [c(0.0, 0.5), c(0.0, -0.5)] {
        let m = spectral1d::nls_monodromy(&pot, k, None).unwrap();
        assert!((m.det() - 1.0).norm() < 1e-10);
        assert!((m.trace() + 2.0).norm() < 1e-8);
        // −1 is a double root, so the eigenvalues only resolve to √ of the integration error.
        let (a, b) = m.multipliers();
        assert!((a + 1.0).norm().min((b + 1.0).norm()) < 1e-6, "{a} {b}");
    }
}

#[test]
fn reduction_matches_the_two_dimensional_slice() {
    let pot = clifford_r3().potential;
    for k in [c(0.3, 0.2), c(-0.1, 0.45)] {
        let r = spectral1d::reduction_crosscheck(&pot, k, 24).unwrap();
        assert!(r.defect < 1e-6, "{r:?}");
    }
}

/// Moves the single x-mode of a y-only block eigenvector into the exponent.
fn y_only(f: &QuasiPeriodicFunction) -> QuasiPeriodicFunction {
    let l = *f.lattice();
    let m = f.components.iter().flat_map(|c| c.support()).map(|(m, _)| m).next().unwrap();
    for s in [m, -m] {
        let g = f.rebase(f.exponents.shifted_by_mode(s, 0, &l)).unwrap();
        if g.components.iter().all(|c| c.support().iter().all(|&(m, _)| m == 0)) {
            return g;
        }
    }
    panic!("not a single x-mode");
}

#[test]
fn explicit_kernel_agrees_with_the_general_one() {
    let pot = clifford_r3().potential;
    let opts = SliceOptions { cutoff: 24, ..Default::default() };
    let pick = |mu: C64| {
        let s = dirac2d::slice_spectrum(&pot, mu, false, &SliceOptions { keep_vectors: false, ..opts }).unwrap();
        let nus = s.nus();
        let i = (0..nus.len()).min_by(|&a, &b| nus[a].norm().total_cmp(&nus[b].norm())).unwrap();
        dirac2d::floquet_function(&pot, mu, i, false, &opts).unwrap()
    };
    let psi_d = pick(c(0.21, 0.37));
    let phi_d = darboux::reciprocal_partner(&pot, &psi_d, &opts).unwrap();
    let pair = darboux::DarbouxPair::new(darboux::PQPotential::from_dirac(&pot), psi_d, phi_d.clone()).unwrap();
    let psi = pick(c(-0.17, 0.12));
    let w = darboux::omega(&psi, &pair, Side::Direct, Normalization::Floquet).unwrap();
    let w1 = spectral1d::omega_1d(&y_only(&psi), &y_only(&phi_d)).unwrap();
    for z in [c(0.3, 0.1), c(2.0, -1.2), c(-0.7, 4.0)] {
        let (a, b) = (w.eval(z)[0], w1.eval(z)[0]);
        assert!((a - b).norm() < 1e-8 * (1.0 + a.norm()), "{a} vs {b}");
    }
}
