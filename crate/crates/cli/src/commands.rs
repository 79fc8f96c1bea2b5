use crate::{Command, FixtureName, Source};
use num_complex::Complex64 as C64;
use serde_json::json;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use torus_spectra::conformal::{self, FlowOptions, FlowState, ReportOptions};
use torus_spectra::darboux::{self, Normalization, Side};
use torus_spectra::dirac2d::{self, CloudOptions, DiracPotential, DistanceOptions, MultiplierCloud, SliceOptions};
use torus_spectra::fixtures::{self, clifford_r3, clifford_s3};
use torus_spectra::format::{fmt_f64, to_json};
use torus_spectra::spectral1d::{self, HillOptions, HillPotential, ResonanceOptions};
use torus_spectra::{weierstrass, Error, Lattice, PeriodicField, QuasiPeriodicFunction};

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(Error),
    Verify(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e)
        } else {
            CliError::Input(e.to_string())
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn fail(e: &CliError) -> ExitCode {
    let (code, tag, detail) = match e {
        CliError::Input(d) => (2, "invalid-input", d.clone()),
        CliError::Numerical(err) => (3, err.code(), err.to_string()),
        CliError::Verify(d) => (4, "verify", d.clone()),
    };
    eprintln!("ERROR {tag}: {}", detail.replace('\n', " "));
    ExitCode::from(code)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(CliError::Input("empty output path".into()));
    }
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Input(format!("--{name} must be positive, got {v}")))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(CliError::Input(format!("--{name} must be at least 1")))
    }
}

fn load(source: &Source) -> Result<DiracPotential> {
    match (&source.potential, source.fixture) {
        (Some(p), _) => Ok(DiracPotential::general(PeriodicField::from_csv(&read(p)?)?)),
        (None, Some(FixtureName::CliffordS3)) => Ok(clifford_s3().potential),
        (None, Some(FixtureName::CliffordR3)) => Ok(clifford_r3().potential),
        (None, None) => Err(CliError::Input("need --potential or --fixture".into())),
    }
}

fn c_json(z: C64) -> serde_json::Value {
    json!([z.re, z.im])
}

pub fn run(cmd: Command) -> Result<String> {
    match cmd {
        Command::Fixture { name, out, cutoff } => fixture(name, &out, cutoff),
        Command::Slice { source, mu, cutoff, adjoint, residual_tol, out } => {
            at_least_one("cutoff", cutoff)?;
            positive("residual-tol", residual_tol)?;
            let pot = load(&source)?;
            let opts = SliceOptions { cutoff, residual_tol, keep_vectors: false };
            let s = dirac2d::slice_spectrum(&pot, mu, adjoint, &opts)?;
            let mut csv = String::from("nu_re,nu_im,residual\n");
            for p in &s.pairs {
                let _ = writeln!(csv, "{},{},{}", fmt_f64(p.nu.re), fmt_f64(p.nu.im), fmt_f64(p.residual));
            }
            if let Some(o) = out {
                write(&o, &csv)?;
            }
            Ok(format!("slice mu={mu} cutoff={cutoff} eigenvalues={}", s.pairs.len()))
        }
        Command::Cloud { source, contour, cutoff, delta_conv, out } => {
            at_least_one("cutoff", cutoff)?;
            positive("delta-conv", delta_conv)?;
            let pot = load(&source)?;
            let opts = CloudOptions { cutoff, delta_conv, ..Default::default() };
            let cloud = dirac2d::multiplier_cloud(&pot, &contour.0, &opts);
            write(&out, &cloud.to_csv())?;
            let skipped = cloud.samples.iter().filter(|s| s.skipped.is_some()).count();
            Ok(format!("cloud samples={} skipped={skipped} records={}", contour.0.len(), cloud.len()))
        }
        Command::CloudDist { a, b, cutoff, gamma1, gamma2, verify, out } => {
            at_least_one("cutoff", cutoff)?;
            let lattice = Lattice::new(gamma1, gamma2)?;
            let ca = MultiplierCloud::from_csv(&read(&a)?, lattice)?;
            let cb = MultiplierCloud::from_csv(&read(&b)?, lattice)?;
            let d = dirac2d::cloud_distance(&ca, &cb, &DistanceOptions::for_cutoff(cutoff));
            if let Some(o) = out {
                write(&o, &to_json(&d))?;
            }
            if let Some(tol) = verify {
                positive("verify", tol)?;
                if !(d.distance <= tol) {
                    return Err(CliError::Verify(format!("cloud distance {} exceeds {tol}", fmt_f64(d.distance))));
                }
            }
            Ok(format!("cloud-dist distance={}", fmt_f64(d.distance)))
        }
        Command::KernelDim { source, kappa1, kappa2, cutoff, count, tol, relative, adjoint, out } => {
            at_least_one("cutoff", cutoff)?;
            at_least_one("count", count)?;
            positive("tol", tol)?;
            let pot = load(&source)?;
            let s = dirac2d::kernel_singular_values(&pot, (kappa1, kappa2), count, adjoint, cutoff)?;
            let dim = dirac2d::kernel_dimension(&s, tol, relative);
            if let Some(o) = out {
                let v = json!({
                    "kappa1": c_json(kappa1),
                    "kappa2": c_json(kappa2),
                    "adjoint": adjoint,
                    "cutoff": cutoff,
                    "tol": tol,
                    "relative": relative,
                    "singular_values": s,
                    "dimension": dim,
                });
                write(&o, &to_json(&v))?;
            }
            let next = s.get(dim).map_or("none".to_string(), |v| fmt_f64(*v));
            Ok(format!("kernel-dim dimension={dim} next={next}"))
        }
        Command::Darboux { source, mu_pair, mu_psi, mu, cutoff, eps, out, report, verify } => {
            at_least_one("cutoff", cutoff)?;
            positive("eps", eps)?;
            darboux_cmd(&source, mu_pair, mu_psi, mu, cutoff, eps, out.as_deref(), report.as_deref(), verify)
        }
        Command::Flow { fixture, dtau, steps, contour, cutoff, cloud_cutoff, report, out, verify } => {
            positive("dtau", dtau)?;
            at_least_one("steps", steps)?;
            at_least_one("cutoff", cutoff)?;
            at_least_one("cloud-cutoff", cloud_cutoff)?;
            flow_cmd(fixture, dtau, steps, &contour.0, cutoff, cloud_cutoff, report.as_deref(), out.as_deref(), verify)
        }
        Command::Willmore { source } => {
            let w = weierstrass::willmore(&load(&source)?);
            Ok(format!("willmore {}", fmt_f64(w)))
        }
        Command::Surface { fixture, grid, out } => {
            at_least_one("grid", grid)?;
            let FixtureName::CliffordS3 = fixture else {
                return Err(CliError::Input("surface needs spinors; only clifford-s3 carries them".into()));
            };
            let d = clifford_s3();
            let t = weierstrass::integrate_surface(&weierstrass::coordinate_derivatives(&d.psi, &d.phi)?);
            write(&out, &t.to_obj(grid))?;
            let fit = weierstrass::sphere_fit(&t, grid.max(4))?;
            Ok(format!(
                "surface vertices={} closure={} sphere_radius={}",
                grid * grid,
                fmt_f64(t.max_period_residual()),
                fmt_f64(fit.radius)
            ))
        }
        Command::Hill { coeffs, samples, period, energies, out, resonances, steps } => {
            positive("period", period)?;
            hill_cmd(coeffs, samples.as_deref(), period, &energies.0, out.as_deref(), resonances.as_deref(), steps)
        }
        Command::Nls { source, k, crosscheck, out } => {
            let pot = load(&source)?;
            let m = spectral1d::nls_monodromy(&pot, k, None)?;
            let (kp, km) = m.multipliers();
            let check = match crosscheck {
                Some(n) => {
                    at_least_one("crosscheck", n)?;
                    Some(spectral1d::reduction_crosscheck(&pot, k, n)?)
                }
                None => None,
            };
            if let Some(o) = out {
                let v = json!({
                    "k": c_json(k),
                    "monodromy": m.matrix.iter().map(|r| r.iter().map(|&z| c_json(z)).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    "multipliers": [c_json(kp), c_json(km)],
                    "crosscheck_defect": check.as_ref().map(|c| c.defect),
                });
                write(&o, &to_json(&v))?;
            }
            let mut s = format!("nls k={k} kappa_plus={kp} kappa_minus={km}");
            if let Some(c) = check {
                let _ = write!(s, " crosscheck_defect={}", fmt_f64(c.defect));
            }
            Ok(s)
        }
    }
}

fn fixture(name: FixtureName, out: &Path, cutoff: usize) -> Result<String> {
    fs::create_dir_all(out).map_err(|e| CliError::Input(format!("cannot create {}: {e}", out.display())))?;
    let spinor = |prefix: &str, f: &QuasiPeriodicFunction| -> Result<serde_json::Value> {
        for (k, c) in f.components.iter().enumerate() {
            write(&out.join(format!("{prefix}{}.csv", k + 1)), &c.to_csv())?;
        }
        Ok(json!({ "mu": c_json(f.exponents.mu), "nu": c_json(f.exponents.nu) }))
    };
    let manifest = match name {
        FixtureName::CliffordS3 => {
            let d = clifford_s3();
            write(&out.join("potential.csv"), &d.potential.u.to_csv())?;
            json!({
                "fixture": "clifford-s3",
                "potential": "potential.csv",
                "psi": spinor("psi", &d.psi)?,
                "phi": spinor("phi", &d.phi)?,
                "willmore": weierstrass::willmore(&d.potential),
            })
        }
        FixtureName::CliffordR3 => {
            at_least_one("cutoff", cutoff)?;
            let d = fixtures::clifford_r3_with_cutoff(cutoff);
            write(&out.join("potential.csv"), &d.potential.u.to_csv())?;
            json!({
                "fixture": "clifford-r3",
                "potential": "potential.csv",
                "cutoff": cutoff,
                "poles": d.poles.iter().map(|&p| c_json(p)).collect::<Vec<_>>(),
                "glued": d.glued.iter().map(|&(a, b)| [c_json(a), c_json(b)]).collect::<Vec<_>>(),
                "u": c_json(d.u),
                "willmore": weierstrass::willmore(&d.potential),
            })
        }
    };
    write(&out.join("manifest.json"), &to_json(&manifest))?;
    Ok(format!("fixture {} written to {}", manifest["fixture"].as_str().unwrap_or(""), out.display()))
}

#[allow(clippy::too_many_arguments)]
fn darboux_cmd(
    source: &Source,
    mu_pair: C64,
    mu_psi: C64,
    mu: C64,
    cutoff: usize,
    eps: f64,
    out: Option<&Path>,
    report: Option<&Path>,
    verify: bool,
) -> Result<String> {
    let (pot, du, residual) = if matches!(source.fixture, Some(FixtureName::CliffordS3)) && source.potential.is_none() {
        let d = clifford_s3();
        let pair = d.darboux_pair()?;
        let w = darboux::omega(&d.psi, &pair, Side::Direct, Normalization::Basepoint(C64::new(0.0, 0.0)))?;
        let def = darboux::deform(&pair, &d.psi, &w)?;
        let r = darboux::linearized_residual(&pair.pq, &d.psi, &def.delta_psi, &def.delta_p, &def.delta_q)?;
        (d.potential.clone(), d.tau_variation()?, r)
    } else {
        let pot = load(source)?;
        let opts = SliceOptions { cutoff, ..Default::default() };
        let pick = |m: C64| -> Result<QuasiPeriodicFunction> {
            let o = SliceOptions { residual_tol: f64::INFINITY, keep_vectors: false, ..opts };
            let nus = dirac2d::slice_spectrum(&pot, m, false, &o)?.nus();
            let i = (0..nus.len())
                .min_by(|&a, &b| nus[a].norm().total_cmp(&nus[b].norm()))
                .ok_or_else(|| CliError::Numerical(Error::NonConvergence(format!("empty slice at mu = {m}"))))?;
            Ok(dirac2d::floquet_function(&pot, m, i, false, &opts)?)
        };
        let psi_d = pick(mu_pair)?;
        let phi_d = darboux::reciprocal_partner(&pot, &psi_d, &opts)?;
        let pair = darboux::DarbouxPair::new(darboux::PQPotential::from_dirac(&pot), psi_d, phi_d)?;
        let psi = pick(mu_psi)?;
        let w = darboux::omega(&psi, &pair, Side::Direct, Normalization::Floquet)?;
        let def = darboux::deform(&pair, &psi, &w)?;
        let r = darboux::linearized_residual(&pair.pq, &psi, &def.delta_psi, &def.delta_p, &def.delta_q)?;
        (pot, def.delta_u, r)
    };
    let a = darboux::isospectral_defect(&pot, &du, mu, eps, cutoff)?;
    let b = darboux::isospectral_defect(&pot, &du, mu, eps / 2.0, cutoff)?;
    let ratio = a / b;
    if let Some(o) = out {
        write(o, &du.to_csv())?;
    }
    if let Some(o) = report {
        let v = json!({
            "linearized_residual": residual,
            "defect": a,
            "defect_half": b,
            "ratio": ratio,
            "mu": c_json(mu),
            "eps": eps,
            "cutoff": cutoff,
        });
        write(o, &to_json(&v))?;
    }
    if verify && !((3.5..=4.5).contains(&ratio) && residual < 1e-8) {
        return Err(CliError::Verify(format!("defect ratio {} residual {}", fmt_f64(ratio), fmt_f64(residual))));
    }
    Ok(format!("darboux residual={} ratio={}", fmt_f64(residual), fmt_f64(ratio)))
}

#[allow(clippy::too_many_arguments)]
fn flow_cmd(
    fixture: FixtureName,
    dtau: f64,
    steps: usize,
    contour: &[C64],
    cutoff: usize,
    cloud_cutoff: usize,
    report: Option<&Path>,
    out: Option<&Path>,
    verify: bool,
) -> Result<String> {
    let FixtureName::CliffordS3 = fixture else {
        return Err(CliError::Input("flow needs spinors; only clifford-s3 carries them".into()));
    };
    let d = clifford_s3();
    let s0 = FlowState::new(d.potential, d.psi, d.phi, cutoff);
    let traj = conformal::flow(&s0, dtau, steps, &FlowOptions::default()).map_err(|e| CliError::Numerical(e.reason))?;
    let opts = ReportOptions { cloud: CloudOptions { cutoff: cloud_cutoff, ..Default::default() }, ..Default::default() };
    let r = conformal::invariance_report(&traj, contour, &opts)?;
    if let Some(o) = report {
        write(o, &to_json(&r))?;
    }
    if let Some(o) = out {
        let last = traj.last().expect("flow returns the initial state");
        write(o, &last.potential.u.to_csv())?;
    }
    if verify && !(r.cloud_drift < 1e-6 && r.willmore_drift < 1e-8 && r.coord_crosscheck < 1e-6) {
        return Err(CliError::Verify(format!(
            "cloud_drift {} willmore_drift {} coord_crosscheck {}",
            fmt_f64(r.cloud_drift),
            fmt_f64(r.willmore_drift),
            fmt_f64(r.coord_crosscheck)
        )));
    }
    Ok(format!(
        "flow tau={} cloud_drift={} willmore_drift={} coord_crosscheck={}",
        fmt_f64(r.tau),
        fmt_f64(r.cloud_drift),
        fmt_f64(r.willmore_drift),
        fmt_f64(r.coord_crosscheck)
    ))
}

fn hill_cmd(
    coeffs: Vec<(i64, C64)>,
    samples: Option<&Path>,
    period: f64,
    energies: &[C64],
    out: Option<&Path>,
    resonances: Option<&Path>,
    steps: Option<usize>,
) -> Result<String> {
    let u = match samples {
        Some(p) => {
            let vals = read(p)?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| crate::parse::complex(l).map_err(CliError::Input))
                .collect::<Result<Vec<_>>>()?;
            HillPotential::from_samples(period, &vals)?
        }
        None if coeffs.is_empty() => HillPotential::zero(period)?,
        None => HillPotential::new(period, coeffs)?,
    };
    if let Some(s) = steps {
        at_least_one("steps", s)?;
    }
    let opts = HillOptions { steps, ..Default::default() };
    let rows = spectral1d::discriminant_scan(&u, energies, &opts)?;
    if let Some(o) = out {
        write(o, &spectral1d::scan_csv(&rows))?;
    }
    let mut found = Vec::new();
    if let Some(o) = resonances {
        let lo = energies.iter().map(|e| e.re).fold(f64::INFINITY, f64::min);
        let hi = energies.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
        let ro = ResonanceOptions { hill: opts, ..Default::default() };
        for sign in [1, -1] {
            found.extend(spectral1d::resonant_points(&u, (lo, hi), sign, &ro)?);
        }
        found.sort_by(|a, b| a.energy.re.total_cmp(&b.energy.re));
        write(o, &to_json(&found))?;
    }
    Ok(format!("hill energies={} resonant={}", rows.len(), found.len()))
}
