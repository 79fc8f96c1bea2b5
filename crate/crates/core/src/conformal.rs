//! Conformal flow of (U, Ψ, Φ) generated by x ↦ x + τ·V(x),
//! V(x) = (2x¹x³, 2x²x³, (x³)² − (x¹)² − (x²)² − (x⁴)², 2x⁴x³).

use crate::dirac2d::{self, CloudOptions, DiracPotential, DistanceOptions};
use crate::error::{Error, Result};
use crate::field::PeriodicField;
use crate::lattice::ExponentPair;
use crate::quasi::QuasiPeriodicFunction;
use crate::weierstrass::{self, ImmersedTorus};
use num_complex::Complex64 as C64;
use serde::Serialize;

pub fn conformal_vector_field(x: [f64; 4]) -> [f64; 4] {
    [
        2.0 * x[0] * x[2],
        2.0 * x[1] * x[2],
        x[2] * x[2] - x[0] * x[0] - x[1] * x[1] - x[3] * x[3],
        2.0 * x[3] * x[2],
    ]
}

/// (x¹, x², x³)/(1 − x⁴).
pub fn stereographic_project(x: [f64; 4]) -> Result<[f64; 3]> {
    let d = 1.0 - x[3];
    if d.abs() <= 1e-12 {
        return Err(Error::InvalidInput("point is the projection pole".into()));
    }
    Ok([x[0] / d, x[1] / d, x[2] / d])
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub potential: DiracPotential,
    pub psi: QuasiPeriodicFunction,
    pub phi: QuasiPeriodicFunction,
    pub tau: f64,
}

impl FlowState {
    /// State with every field carried at `cutoff`.
    pub fn new(potential: DiracPotential, psi: QuasiPeriodicFunction, phi: QuasiPeriodicFunction, cutoff: usize) -> Self {
        let lift = |q: QuasiPeriodicFunction| QuasiPeriodicFunction {
            exponents: q.exponents,
            components: q.components.iter().map(|f| f.with_cutoff(cutoff)).collect(),
        };
        Self {
            potential: DiracPotential { u: potential.u.with_cutoff(cutoff), real_reduction: potential.real_reduction },
            psi: lift(psi),
            phi: lift(phi),
            tau: 0.0,
        }
    }

    pub fn cutoff(&self) -> usize {
        self.potential.u.cutoff()
    }

    pub fn surface(&self) -> Result<ImmersedTorus> {
        Ok(weierstrass::integrate_surface(&weierstrass::coordinate_derivatives(&self.psi, &self.phi)?))
    }

    /// max(‖DΨ‖/‖Ψ‖, ‖D∨Φ‖/‖Φ‖) in coefficient norm.
    pub fn residual(&self) -> Result<f64> {
        let a = dirac2d::dirac_residual(&self.potential, &self.psi, false)? / self.psi.norm();
        let b = dirac2d::dirac_residual(&self.potential, &self.phi, true)? / self.phi.norm();
        Ok(a.max(b))
    }
}

/// Closure tolerance on period residuals of the reconstructed surface. Intermediate
/// RK stages are only O(h²)-close to closed surfaces, so this is looser than the
/// closure of accepted states; linear parts are dropped when forming coordinates.
pub const CLOSURE_TOL: f64 = 1e-4;

/// τ-derivatives of U, Ψ and Φ, truncated to the state cutoff.
#[derive(Debug, Clone)]
pub struct TauDerivatives {
    pub d_u: PeriodicField,
    pub d_psi: QuasiPeriodicFunction,
    pub d_phi: QuasiPeriodicFunction,
}

fn to_exponents(f: &PeriodicField, from: ExponentPair, to: ExponentPair) -> Result<PeriodicField> {
    Ok(QuasiPeriodicFunction::scalar(from, f.clone()).rebase(to)?.components.remove(0))
}

pub fn tau_derivatives(s: &FlowState) -> Result<TauDerivatives> {
    let n = s.cutoff();
    let surf = s.surface()?;
    if !surf.is_closed(CLOSURE_TOL) {
        return Err(Error::Obstruction(format!(
            "surface does not close: period residual {:.3e}",
            surf.max_period_residual()
        )));
    }
    let x = &surf.periodic;
    let i = C64::new(0.0, 1.0);
    let w_minus = &x[2] - &x[3].scale(i); // x³ − ix⁴
    let w_plus = &x[2] + &x[3].scale(i); // x³ + ix⁴
    let v = &x[0] - &x[1].scale(i); // x¹ − ix²
    let (ep, ef) = (s.psi.exponents, s.phi.exponents);
    let (p1, p2) = (s.psi.component(0), s.psi.component(1));
    let (f1, f2) = (s.phi.component(0), s.phi.component(1));
    let zero = ExponentPair::zero();

    let a = to_exponents(&f1.mul_to(&p1.conj(), n + 2)?, ef.add(&ep.conj()), zero)?;
    let b = to_exponents(&f2.conj().mul_to(p2, n + 2)?, ef.conj().add(&ep), zero)?;
    let d_u = (&a - &b).with_cutoff(n);

    // conj Ψ_k and conj Φ_k written with the exponents of Ψ and Φ.
    let cp1 = to_exponents(&p1.conj(), ep.conj(), ep)?;
    let cp2 = to_exponents(&p2.conj(), ep.conj(), ep)?;
    let cf1 = to_exponents(&f1.conj(), ef.conj(), ef)?;
    let cf2 = to_exponents(&f2.conj(), ef.conj(), ef)?;
    let m = |a: &PeriodicField, b: &PeriodicField| a.mul_to(b, n);
    let d_p1 = &m(&w_minus, p1)? - &m(&v, &cp2)?.scale(i);
    let d_p2 = &m(&w_minus, p2)? + &m(&v, &cp1)?.scale(i);
    let d_f1 = &m(&w_plus, f1)? - &m(&v, &cf2)?.scale(i);
    let d_f2 = &m(&w_plus, f2)? + &m(&v, &cf1)?.scale(i);
    Ok(TauDerivatives {
        d_u,
        d_psi: QuasiPeriodicFunction::spinor(ep, d_p1, d_p2),
        d_phi: QuasiPeriodicFunction::spinor(ef, d_f1, d_f2),
    })
}

fn axpy(s: &FlowState, d: &TauDerivatives, h: f64) -> FlowState {
    let hc = C64::new(h, 0.0);
    let q = |a: &QuasiPeriodicFunction, b: &QuasiPeriodicFunction| QuasiPeriodicFunction {
        exponents: a.exponents,
        components: a.components.iter().zip(&b.components).map(|(x, y)| x + &y.scale(hc)).collect(),
    };
    FlowState {
        potential: DiracPotential { u: &s.potential.u + &d.d_u.scale(hc), real_reduction: s.potential.real_reduction },
        psi: q(&s.psi, &d.d_psi),
        phi: q(&s.phi, &d.d_phi),
        tau: s.tau + h,
    }
}

fn rk4_step(s: &FlowState, h: f64) -> Result<FlowState> {
    let k1 = tau_derivatives(s)?;
    let k2 = tau_derivatives(&axpy(s, &k1, h / 2.0))?;
    let k3 = tau_derivatives(&axpy(s, &k2, h / 2.0))?;
    let k4 = tau_derivatives(&axpy(s, &k3, h))?;
    let comb = |a: &PeriodicField, b: &PeriodicField, c: &PeriodicField, d: &PeriodicField| {
        let t = &(a + &b.scale(C64::new(2.0, 0.0))) + &(&c.scale(C64::new(2.0, 0.0)) + d);
        t.scale(C64::new(h / 6.0, 0.0))
    };
    let combq = |f: fn(&TauDerivatives) -> &QuasiPeriodicFunction| QuasiPeriodicFunction {
        exponents: f(&k1).exponents,
        components: (0..2)
            .map(|j| {
                comb(
                    &f(&k1).components[j],
                    &f(&k2).components[j],
                    &f(&k3).components[j],
                    &f(&k4).components[j],
                )
            })
            .collect(),
    };
    let incr = TauDerivatives {
        d_u: comb(&k1.d_u, &k2.d_u, &k3.d_u, &k4.d_u),
        d_psi: combq(|d| &d.d_psi),
        d_phi: combq(|d| &d.d_phi),
    };
    let mut next = axpy(s, &incr, 1.0);
    next.tau = s.tau + h;
    Ok(next)
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    /// A state whose residual exceeds this aborts the trajectory.
    pub residual_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { residual_tol: 1e-6 }
    }
}

/// Trajectory ended early; `trajectory` holds every valid state.
#[derive(Debug, Clone)]
pub struct FlowAborted {
    pub step: usize,
    pub reason: Error,
    pub trajectory: Vec<FlowState>,
}

impl std::fmt::Display for FlowAborted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "flow aborted at step {}: {}", self.step, self.reason)
    }
}

impl std::error::Error for FlowAborted {}

impl From<FlowAborted> for Error {
    fn from(a: FlowAborted) -> Self {
        match a.reason {
            Error::Obstruction(m) => Error::Obstruction(format!("flow aborted at step {}: {m}", a.step)),
            other => Error::NonConvergence(format!("flow aborted at step {}: {other}", a.step)),
        }
    }
}

/// Classical RK4 with step `dtau`; every state is re-validated.
pub fn flow(s0: &FlowState, dtau: f64, steps: usize, opts: &FlowOptions) -> std::result::Result<Vec<FlowState>, FlowAborted> {
    let mut traj = vec![s0.clone()];
    for step in 1..=steps {
        let last = traj.last().expect("nonempty");
        let next = rk4_step(last, dtau).and_then(|n| {
            let r = n.residual()?;
            if !(r <= opts.residual_tol) {
                return Err(Error::NonConvergence(format!("residual {r:.3e} exceeds {:.1e}", opts.residual_tol)));
            }
            if !n.potential.u.coeffs().iter().all(|c| c.is_finite()) {
                return Err(Error::Numerical("non-finite potential".into()));
            }
            Ok(n)
        });
        match next {
            Ok(n) => traj.push(n),
            Err(reason) => return Err(FlowAborted { step, reason, trajectory: traj }),
        }
    }
    Ok(traj)
}

/// Pointwise RK4 of dx/dτ = V(x) from the initial surface on a `grid × grid` sample.
pub fn integrate_points(start: &[[f64; 4]], dtau: f64, steps: usize) -> Vec<[f64; 4]> {
    let add = |x: [f64; 4], k: [f64; 4], h: f64| std::array::from_fn::<f64, 4, _>(|i| x[i] + h * k[i]);
    start
        .iter()
        .map(|&x0| {
            let mut x = x0;
            for _ in 0..steps {
                let k1 = conformal_vector_field(x);
                let k2 = conformal_vector_field(add(x, k1, dtau / 2.0));
                let k3 = conformal_vector_field(add(x, k2, dtau / 2.0));
                let k4 = conformal_vector_field(add(x, k3, dtau));
                x = std::array::from_fn(|i| x[i] + dtau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
            }
            x
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    pub cloud: CloudOptions,
    /// Cutoff for kernel dimensions along the trajectory.
    pub kernel_cutoff: usize,
    pub kernel_tol: f64,
    /// Multipliers at which kernel dimensions are traced.
    pub kernel_multipliers: (C64, C64),
    pub grid: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            cloud: CloudOptions { cutoff: 8, ..Default::default() },
            kernel_cutoff: 8,
            kernel_tol: 1e-6,
            kernel_multipliers: (C64::new(-1.0, 0.0), C64::new(-1.0, 0.0)),
            grid: 32,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelTracePoint {
    pub tau: f64,
    pub count: usize,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub cloud_drift: f64,
    pub willmore_drift: f64,
    pub max_residual: f64,
    pub coord_crosscheck: f64,
    pub kernel_trace: Vec<KernelTracePoint>,
    pub potential_change: f64,
    pub tau: f64,
    pub steps: usize,
}

/// Drift diagnostics between the first and last states of a trajectory.
pub fn invariance_report(traj: &[FlowState], contour: &[C64], opts: &ReportOptions) -> Result<InvarianceReport> {
    let first = traj.first().ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
    let last = traj.last().expect("nonempty");
    let steps = traj.len() - 1;
    let (cloud_drift, willmore_drift, coord_crosscheck) = if steps == 0 {
        (0.0, 0.0, 0.0)
    } else {
        let a = dirac2d::multiplier_cloud(&first.potential, contour, &opts.cloud);
        let b = dirac2d::multiplier_cloud(&last.potential, contour, &opts.cloud);
        let d = dirac2d::cloud_distance(&a, &b, &DistanceOptions::for_cutoff(opts.cloud.cutoff));
        let w0 = weierstrass::willmore(&first.potential);
        let w1 = weierstrass::willmore(&last.potential);
        let start = first.surface()?.sample(opts.grid);
        let dtau = (last.tau - first.tau) / steps as f64;
        let moved = integrate_points(&start, dtau, steps);
        let end = last.surface()?.sample(opts.grid);
        let cross = moved
            .iter()
            .zip(&end)
            .map(|(p, q)| (0..4).map(|k| (p[k] - q[k]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        (d.distance, (w1 - w0).abs() / w0.abs().max(1e-300), cross)
    };
    let mut max_residual: f64 = 0.0;
    let mut kernel_trace = Vec::with_capacity(traj.len());
    for s in traj {
        max_residual = max_residual.max(s.residual()?);
        let sv = dirac2d::kernel_singular_values(&s.potential, opts.kernel_multipliers, 6, false, opts.kernel_cutoff)?;
        kernel_trace.push(KernelTracePoint {
            tau: s.tau,
            count: dirac2d::kernel_dimension(&sv, opts.kernel_tol, false),
            singular_values: sv,
        });
    }
    Ok(InvarianceReport {
        cloud_drift,
        willmore_drift,
        max_residual,
        coord_crosscheck,
        kernel_trace,
        potential_change: (&last.potential.u - &first.potential.u).norm(),
        tau: last.tau,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::clifford_s3;
    use std::f64::consts::PI;

    #[test]
    fn vector_field_examples() {
        assert_eq!(conformal_vector_field([0.0, 0.0, 1.0, 0.0]), [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(conformal_vector_field([1.0, 0.0, 0.0, 0.0]), [0.0, 0.0, -1.0, 0.0]);
        assert_eq!(conformal_vector_field([0.0; 4]), [0.0; 4]);
    }

    #[test]
    fn stereographic_examples() {
        assert_eq!(stereographic_project([0.0, 0.0, 1.0, 0.0]).unwrap(), [0.0, 0.0, 1.0]);
        assert_eq!(stereographic_project([0.0, 0.0, 0.0, -1.0]).unwrap(), [0.0, 0.0, 0.0]);
        assert!(stereographic_project([0.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn clifford_initial_derivative() {
        let d = clifford_s3();
        let s = FlowState::new(d.potential, d.psi, d.phi, 4);
        let t = tau_derivatives(&s).unwrap();
        for z in [C64::new(0.4, 1.3), C64::new(-2.0, 0.2)] {
            assert!((t.d_u.eval(z) + 0.5 * z.im.cos()).norm() < 1e-14);
        }
        // d/dτ of 4∫|U|² is 8·area·Re Σ conj(U_k) dU_k.
        let dw: f64 = s.potential.u.coeffs().iter().zip(t.d_u.coeffs()).map(|(a, b)| (a.conj() * b).re).sum();
        assert!((8.0 * 4.0 * PI * PI * dw).abs() < 1e-14);
    }

    #[test]
    fn zero_steps_is_trivial() {
        let d = clifford_s3();
        let s = FlowState::new(d.potential, d.psi, d.phi, 2);
        let traj = flow(&s, 1e-3, 0, &FlowOptions::default()).unwrap();
        assert_eq!(traj.len(), 1);
        let opts = ReportOptions { kernel_cutoff: 3, ..Default::default() };
        let r = invariance_report(&traj, &[C64::new(0.0, 0.1)], &opts).unwrap();
        assert_eq!((r.cloud_drift, r.willmore_drift, r.coord_crosscheck), (0.0, 0.0, 0.0));
    }
}
