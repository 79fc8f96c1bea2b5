use num_complex::Complex64 as C64;
use proptest::prelude::*;
use std::f64::consts::PI;
use torus_spectra::darboux::{self, Normalization, Side};
use torus_spectra::dirac2d::{self, CloudOptions, DiracPotential, DistanceOptions, SliceOptions};
use torus_spectra::spectral1d::{self, HillOptions, HillPotential};
use torus_spectra::{solve_shifted, weierstrass, Direction, ExponentPair, Lattice, PeriodicField, QuasiPeriodicFunction};

fn cplx(r: f64) -> impl Strategy<Value = C64> {
    (-r..r, -r..r).prop_map(|(a, b)| C64::new(a, b))
}

/// Band-limited field with modes |m|, |n| ≤ `band`.
fn field(band: i64, amp: f64) -> impl Strategy<Value = PeriodicField> {
    let n = ((2 * band + 1) * (2 * band + 1)) as usize;
    prop::collection::vec(cplx(amp), n).prop_map(move |cs| {
        let l = Lattice::square();
        let mut f = PeriodicField::zeros(l, band as usize);
        let mut it = cs.into_iter();
        for m in -band..=band {
            for n in -band..=band {
                f.set(m, n, it.next().unwrap());
            }
        }
        f
    })
}

fn y_only_field(band: i64, amp: f64) -> impl Strategy<Value = PeriodicField> {
    prop::collection::vec(cplx(amp), (2 * band + 1) as usize).prop_map(move |cs| {
        let mut f = PeriodicField::zeros(Lattice::square(), band as usize);
        for (n, c) in (-band..=band).zip(cs) {
            f.set(0, n, c);
        }
        f
    })
}

fn central(pot: &DiracPotential, mu: C64, opts: &SliceOptions) -> usize {
    let o = SliceOptions { residual_tol: f64::INFINITY, keep_vectors: false, ..*opts };
    let nus = dirac2d::slice_spectrum(pot, mu, false, &o).unwrap().nus();
    (0..nus.len()).min_by(|&a, &b| nus[a].norm().total_cmp(&nus[b].norm())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn products_are_exact_below_the_cutoff(f in field(3, 1.0), g in field(3, 1.0), z in cplx(7.0)) {
        let h = f.mul_full(&g).unwrap();
        let d = (h.eval(z) - f.eval(z) * g.eval(z)).norm();
        prop_assert!(d <= 1e-10 * f.norm() * g.norm());
    }

    #[test]
    fn shifted_solve_round_trips(g in field(4, 1.0), shift in cplx(0.45), holo in any::<bool>()) {
        let dir = if holo { Direction::Holomorphic } else { Direction::Antiholomorphic };
        let shift = shift + C64::new(0.013, 0.007);
        let f = solve_shifted(dir, shift, &g).unwrap();
        prop_assert!((&f.apply_shifted(dir, shift) - &g).norm() <= 1e-12 * g.norm());
    }

    #[test]
    fn star_preserves_residual_norms(u in field(2, 0.5), a in field(2, 1.0), b in field(2, 1.0), mu in cplx(0.5), nu in cplx(0.5)) {
        let pot = DiracPotential::general(u);
        let psi = QuasiPeriodicFunction::spinor(ExponentPair::new(mu, nu), a, b);
        let r = dirac2d::dirac_residual_grid(&pot, &psi, false, 16).unwrap();
        let s = dirac2d::dirac_residual_grid(&pot, &psi.star_involution().unwrap(), false, 16).unwrap();
        prop_assert!((r - s).abs() <= 1e-12 * r.max(1.0));
    }

    #[test]
    fn willmore_is_gauge_invariant(u in field(2, 0.5), a in cplx(1.0), bm in -2i32..=2, bn in -2i32..=2) {
        let pot = DiracPotential::general(u);
        let b = C64::new(bm as f64 / 2.0, bn as f64 / 2.0);
        let g = dirac2d::gauge_transform(&pot, a, b).unwrap();
        prop_assert!((weierstrass::willmore(&g) - weierstrass::willmore(&pot)).abs() <= 1e-12 * weierstrass::willmore(&pot).max(1.0));
    }

    #[test]
    fn monodromy_is_unimodular(cs in prop::collection::vec(cplx(0.5), 5), e in 0.0f64..4.0) {
        let u = HillPotential::new(2.0 * PI, (-2..=2).zip(cs).collect()).unwrap();
        let m = spectral1d::schrodinger_monodromy(&u, C64::new(e, 0.0), &HillOptions::default()).unwrap();
        prop_assert!((m.det() - 1.0).norm() < 1e-10);
    }

    #[test]
    fn real_discriminant_commutes_with_conjugation(cs in prop::collection::vec(cplx(0.5), 2), e in cplx(2.0)) {
        // u real: c₋ₙ = conj cₙ.
        let mut coeffs = vec![(0, C64::new(cs[0].re, 0.0))];
        coeffs.push((1, cs[1]));
        coeffs.push((-1, cs[1].conj()));
        let u = HillPotential::new(2.0 * PI, coeffs).unwrap();
        let e = e + C64::new(2.0, 0.0);
        let o = HillOptions::default();
        let a = spectral1d::discriminant(&u, e, &o).unwrap();
        let b = spectral1d::discriminant(&u, e.conj(), &o).unwrap();
        prop_assert!((a.conj() - b).norm() < 1e-10 * a.norm().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    /// D(μ,ν)ᴴ = D∨(−ν̄,−μ̄): kernel dimensions match at the hermitian partner multipliers.
    #[test]
    fn adjoint_symmetry_at_the_hermitian_partner(u in field(1, 0.5), mu in cplx(0.5), nu in cplx(0.5)) {
        let pot = DiracPotential::general(u);
        let l = *pot.lattice();
        let k = ExponentPair::new(mu, nu).multipliers(&l);
        let a = dirac2d::singular_values_at(&pot, &ExponentPair::new(mu, nu), false, 6).unwrap();
        let p = dirac2d::hermitian_partner(k);
        let b = dirac2d::singular_values_at(&pot, &ExponentPair::new(-nu.conj(), -mu.conj()), true, 6).unwrap();
        let kp = ExponentPair::new(-nu.conj(), -mu.conj()).multipliers(&l);
        prop_assert!((kp.0 - p.0).norm() < 1e-10 * p.0.norm() && (kp.1 - p.1).norm() < 1e-10 * p.1.norm());
        prop_assert_eq!(a.len(), b.len());
        let smax = a.last().copied().unwrap_or(1.0);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10 * smax);
        }
        prop_assert_eq!(dirac2d::kernel_dimension(&a, 1e-8, true), dirac2d::kernel_dimension(&b, 1e-8, true));
    }

    #[test]
    fn slices_converge_in_the_cutoff(u in field(1, 0.05), mu in cplx(0.5)) {
        let pot = DiracPotential::general(u);
        let mu = mu + C64::new(0.011, 0.017);
        let get = |n: usize| {
            let o = SliceOptions { cutoff: n, keep_vectors: false, residual_tol: f64::INFINITY };
            let mut v: Vec<C64> = dirac2d::slice_spectrum(&pot, mu, false, &o).unwrap().nus().into_iter().filter(|v| v.norm() < 1.0).collect();
            v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            v
        };
        let (a, b) = (get(6), get(10));
        prop_assert!(!a.is_empty());
        let d = dirac2d::nu_set_distance(&a, &b, &DistanceOptions::for_cutoff(8));
        prop_assert!(d < 1e-10, "{}", d);
    }

    #[test]
    fn reduction_matches_the_slice(u in y_only_field(2, 0.2), k in cplx(0.4)) {
        let pot = DiracPotential::general(u);
        let k = k + C64::new(0.013, 0.021);
        let r = spectral1d::reduction_crosscheck(&pot, k, 16).unwrap();
        prop_assert!(r.defect < 1e-6, "{:?}", r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    /// If ν lies in the slice at μ, then μ̄ lies in the slice at ν̄.
    #[test]
    fn slices_are_closed_under_conjugation(u in field(1, 0.3), mu in cplx(0.5)) {
        let pot = DiracPotential::general(u);
        let mu = mu + C64::new(0.011, 0.017);
        let opts = SliceOptions { cutoff: 10, keep_vectors: false, ..Default::default() };
        let nus = dirac2d::slice_spectrum(&pot, mu, false, &opts).unwrap().nus();
        let nu = nus.iter().copied().min_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
        let back = dirac2d::slice_spectrum(&pot, nu.conj(), false, &opts).unwrap().nus();
        let best = back.iter().map(|v| (v - mu.conj()).norm()).fold(f64::INFINITY, f64::min);
        prop_assert!(best < 1e-8, "{}", best);
    }

    #[test]
    fn gauge_covariance(u in field(1, 0.1), mu in cplx(0.4), bm in -1i32..=1, bn in -1i32..=1) {
        let pot = DiracPotential::general(u);
        let b = C64::new(bm as f64 / 2.0, bn as f64 / 2.0);
        let gauged = dirac2d::gauge_transform(&pot, C64::new(0.2, -0.1), b).unwrap();
        let mu = mu + C64::new(0.011, 0.017);
        let contour = [mu];
        let moved: Vec<C64> = contour.iter().map(|m| m + b).collect();
        let opts = CloudOptions { cutoff: 8, ..Default::default() };
        let a = dirac2d::multiplier_cloud(&pot, &contour, &opts).gauge_rescaled(b);
        let g = dirac2d::multiplier_cloud(&gauged, &moved, &opts);
        let d = dirac2d::cloud_distance(&a, &g, &DistanceOptions::for_cutoff(5));
        prop_assert!(d.distance < 1e-10, "{:?}", d);
    }

    #[test]
    fn floquet_kernel_identities(u in field(1, 0.05), m1 in cplx(0.4), m2 in cplx(0.4)) {
        let pot = DiracPotential::general(u);
        let opts = SliceOptions { cutoff: 10, ..Default::default() };
        let m1 = m1 + C64::new(0.013, 0.029);
        let m2 = m2 + C64::new(-0.021, 0.011);
        let psi_d = dirac2d::floquet_function(&pot, m1, central(&pot, m1, &opts), false, &opts).unwrap();
        let phi_d = darboux::reciprocal_partner(&pot, &psi_d, &opts).unwrap();
        let pair = darboux::DarbouxPair::new(darboux::PQPotential::from_dirac(&pot), psi_d, phi_d).unwrap();
        let psi = dirac2d::floquet_function(&pot, m2, central(&pot, m2, &opts), false, &opts).unwrap();

        let f = darboux::form(&psi, &pair, Side::Direct).unwrap();
        prop_assert!(f.closedness_defect() < 1e-10);
        let (k1, k2) = psi.multipliers();
        let (h1, h2) = pair.multipliers();
        let (i1, i2) = darboux::period_integrals(&psi, &pair).unwrap();
        let lhs = i1 * (k2 / h2 - 1.0);
        let rhs = i2 * (k1 / h1 - 1.0);
        prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));

        let w = darboux::omega(&psi, &pair, Side::Direct, Normalization::Floquet).unwrap();
        let pts: Vec<C64> = (0..5).map(|j| C64::new(0.7 * j as f64, 1.3 - 0.4 * j as f64)).collect();
        prop_assert!(w.quasi_periodicity_defect(&pts) < 1e-10);
        let def = darboux::deform(&pair, &psi, &w).unwrap();
        let r = darboux::linearized_residual(&pair.pq, &psi, &def.delta_psi, &def.delta_p, &def.delta_q).unwrap();
        prop_assert!(r < 1e-8, "{}", r);
    }
}
