use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torus-spectra"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn fixture_writes_potential_spinors_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["fixture", "clifford-s3", "--out", "s3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["potential.csv", "psi1.csv", "psi2.csv", "phi1.csv", "phi2.csv", "manifest.json"] {
        assert!(dir.path().join("s3").join(f).is_file(), "missing {f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s3/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["potential"], "potential.csv");
}

#[test]
fn fixture_potential_round_trips_through_slice() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["fixture", "clifford-s3", "--out", "s3"])), 0);
    let args = |src: &[&'static str], out: &'static str| {
        let mut v = vec!["slice"];
        v.extend_from_slice(src);
        v.extend_from_slice(&["--mu", "0.1+0.3i", "--cutoff", "4", "--out", out]);
        v
    };
    assert_eq!(code(&run(dir.path(), &args(&["--potential", "s3/potential.csv"], "a.csv"))), 0);
    assert_eq!(code(&run(dir.path(), &args(&["--fixture", "clifford-s3"], "b.csv"))), 0);
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    assert!(a.starts_with(b"nu_re,nu_im,residual\n"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let hill = |out: &'static str| {
        ["hill", "--coeff", "1=0.5", "--coeff", "-1=0.5", "--energies", "0:2:41", "--out", out]
    };
    assert_eq!(code(&run(dir.path(), &hill("h1.csv"))), 0);
    assert_eq!(code(&run(dir.path(), &hill("h2.csv"))), 0);
    assert_eq!(fs::read(dir.path().join("h1.csv")).unwrap(), fs::read(dir.path().join("h2.csv")).unwrap());

    let cloud = |out: &'static str| ["cloud", "--fixture", "clifford-s3", "--contour", "0.1i:1.1i:4", "--cutoff", "5", "--out", out];
    assert_eq!(code(&run(dir.path(), &cloud("c1.csv"))), 0);
    assert_eq!(code(&run(dir.path(), &["--threads", "1", "cloud", "--fixture", "clifford-s3", "--contour", "0.1i:1.1i:4", "--cutoff", "5", "--out", "c2.csv"])), 0);
    assert_eq!(fs::read(dir.path().join("c1.csv")).unwrap(), fs::read(dir.path().join("c2.csv")).unwrap());
}

#[test]
fn invalid_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["slice", "--fixture", "clifford-s3", "--mu", "0.5,0", "--cutoff", "-1"][..],
        &["slice", "--fixture", "clifford-s3", "--mu", "zero"],
        &["slice", "--potential", "missing.csv", "--mu", "0.3"],
        &["slice", "--fixture", "clifford-s3", "--potential", "p.csv", "--mu", "0.3"],
        &["cloud", "--fixture", "clifford-s3", "--contour", "0:i:0", "--out", "c.csv"],
        &["hill", "--coeff", "1=0.5", "--period", "-2"],
    ] {
        let o = run(dir.path(), args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("ERROR "), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["hill", "--coeff", "1=0.5", "--energies", "0:2:3", "--steps", "8"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).starts_with("ERROR accuracy:"), "{}", stderr(&o));
}

#[test]
fn verify_violation_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = |fx: &'static str, out: &'static str| ["cloud", "--fixture", fx, "--contour", "0.1i:1.1i:2", "--cutoff", "5", "--out", out];
    assert_eq!(code(&run(dir.path(), &cloud("clifford-s3", "a.csv"))), 0);
    assert_eq!(code(&run(dir.path(), &cloud("clifford-r3", "b.csv"))), 0);

    let same = run(dir.path(), &["cloud-dist", "a.csv", "a.csv", "--cutoff", "5", "--verify", "1e-12"]);
    assert_eq!(code(&same), 0, "{}", stderr(&same));
    let differ = run(dir.path(), &["cloud-dist", "a.csv", "b.csv", "--cutoff", "5", "--verify", "1e-12"]);
    assert_eq!(code(&differ), 4);
    assert!(stderr(&differ).starts_with("ERROR verify:"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.conf"), "# slice settings\nfixture = clifford-s3\nmu = 0.1+0.3i\ncutoff = 3\nadjoint = false\n").unwrap();
    let o = run(dir.path(), &["slice", "--config", "run.conf"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("cutoff=3"));
    let o = run(dir.path(), &["slice", "--config", "run.conf", "--cutoff", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("cutoff=4"));
}

#[test]
fn darboux_and_flow_verify_on_the_s3_torus() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["darboux", "--fixture", "clifford-s3", "--cutoff", "6", "--verify", "--report", "d.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("d.json").is_file());
    let o = run(
        dir.path(),
        &["flow", "--steps", "2", "--contour", "0.1i:1.1i:2", "--cutoff", "6", "--cloud-cutoff", "4", "--report", "f.json", "--out", "u.csv", "--verify"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("f.json")).unwrap()).unwrap();
    assert!(report["cloud_drift"].as_f64().unwrap() < 1e-8);
}

#[test]
fn willmore_of_the_s3_torus() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["willmore", "--fixture", "clifford-s3"]);
    assert_eq!(code(&o), 0);
    let s = String::from_utf8_lossy(&o.stdout);
    let w: f64 = s.trim().strip_prefix("willmore ").unwrap().parse().unwrap();
    assert!((w - 2.0 * std::f64::consts::PI * std::f64::consts::PI).abs() < 1e-10, "{w}");
}
