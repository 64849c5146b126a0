//! Golden-file scenarios for the `covsel` binary. Set `COVSEL_UPDATE_GOLDEN=1`
//! to rewrite the expected files.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn tests_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests")
}

/// Runs the binary from the tests directory so relative input paths, and
/// therefore the recorded metadata, do not depend on the checkout location.
pub fn covsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covsel"))
        .args(args)
        .current_dir(tests_dir())
        .env_remove("COVSEL_OUT")
        .output()
        .expect("failed to launch covsel")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

/// One comparison against a checked-in file.
#[derive(Debug)]
pub struct GoldenCheck {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

fn compare(name: &str, actual: &str) -> GoldenCheck {
    let path = tests_dir().join("golden").join(name);
    if std::env::var_os("COVSEL_UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
    }
    match fs::read_to_string(&path) {
        Ok(expected) if expected == actual => GoldenCheck {
            name: name.into(),
            ok: true,
            detail: String::new(),
        },
        Ok(expected) => GoldenCheck {
            name: name.into(),
            ok: false,
            detail: format!("--- expected\n{expected}\n--- actual\n{actual}"),
        },
        Err(e) => GoldenCheck {
            name: name.into(),
            ok: false,
            detail: format!("cannot read {}: {e}", path.display()),
        },
    }
}

fn status(name: &str, out: &Output, expected: i32) -> GoldenCheck {
    GoldenCheck {
        name: format!("{name} exit code"),
        ok: code(out) == expected,
        detail: format!(
            "expected {expected}, got {}\nstdout: {}\nstderr: {}",
            code(out),
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        ),
    }
}

fn compare_files(prefix: &str, dir: &Path, files: &[&str]) -> Vec<GoldenCheck> {
    files
        .iter()
        .map(|f| {
            let actual = fs::read_to_string(dir.join(f)).unwrap_or_else(|e| format!("<missing: {e}>"));
            compare(&format!("{prefix}/{f}"), &actual)
        })
        .collect()
}

const ESTIMATE_FILES: [&str; 6] = [
    "precision.csv",
    "covariance.csv",
    "second_moment.csv",
    "edges.csv",
    "certificate.json",
    "run_meta.json",
];

fn certify_checks(name: &str, dir: &Path) -> Vec<GoldenCheck> {
    let out = covsel(&["certify", "--dir", dir.to_str().unwrap()]);
    let mut checks = vec![status(&format!("{name} certify"), &out, 0)];
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap_or_default();
    checks.push(GoldenCheck {
        name: format!("{name} certify report"),
        ok: report["matches"] == true && report["within_epsilon"] == true,
        detail: String::from_utf8_lossy(&out.stdout).into_owned(),
    });
    checks
}

/// Runs every scenario and returns one check per compared artifact.
pub fn golden_suite() -> Vec<GoldenCheck> {
    let tmp = tempfile::tempdir().unwrap();
    let mut checks = Vec::new();

    // Gaussian estimate from a moment matrix.
    let dir = tmp.path().join("moment");
    let out = covsel(&[
        "estimate",
        "--input",
        "data/moment3.csv",
        "--kind",
        "moment",
        "--n",
        "50",
        "--lambda",
        "0.1",
        "--solver",
        "bcd",
        "--epsilon",
        "1e-10",
        "--out",
        dir.to_str().unwrap(),
    ]);
    checks.push(status("estimate moment", &out, 0));
    checks.extend(compare_files("estimate_moment", &dir, &ESTIMATE_FILES));
    checks.extend(certify_checks("estimate moment", &dir));

    // Gaussian estimate from samples with the automatic penalty.
    let dir = tmp.path().join("auto");
    let out = covsel(&[
        "estimate",
        "--input",
        "data/samples.csv",
        "--lambda",
        "auto:0.05:relaxed",
        "--out",
        dir.to_str().unwrap(),
    ]);
    checks.push(status("estimate auto", &out, 0));
    checks.extend(compare_files("estimate_auto", &dir, &ESTIMATE_FILES));
    checks.extend(certify_checks("estimate auto", &dir));

    // Binary pipeline: 0/1 coding, blanks imputed as "no".
    let dir = tmp.path().join("binary");
    let out = covsel(&[
        "estimate",
        "--input",
        "data/spins.csv",
        "--binary",
        "--impute",
        "-1",
        "--lambda",
        "auto:0.05",
        "--out",
        dir.to_str().unwrap(),
    ]);
    checks.push(status("estimate binary", &out, 0));
    let mut files = ESTIMATE_FILES.to_vec();
    files.push("theta_linear.csv");
    checks.extend(compare_files("estimate_binary", &dir, &files));
    checks.extend(certify_checks("estimate binary", &dir));

    // Penalty report.
    let out = covsel(&["penalty", "--input", "data/samples.csv", "--alpha", "0.05"]);
    checks.push(status("penalty", &out, 0));
    checks.push(compare("penalty/stdout.json", &String::from_utf8_lossy(&out.stdout)));
    let out = covsel(&[
        "penalty",
        "--input",
        "data/spins.csv",
        "--binary",
        "--impute",
        "-1",
        "--alpha",
        "0.05",
        "--relaxed",
    ]);
    checks.push(status("penalty binary", &out, 0));
    checks.push(compare(
        "penalty/binary_stdout.json",
        &String::from_utf8_lossy(&out.stdout),
    ));

    // Path table.
    let dir = tmp.path().join("path");
    let out = covsel(&[
        "path",
        "--input",
        "data/samples.csv",
        "--lambdas",
        "0.05,0.1,0.2,0.5,1,2,5",
        "--epsilon",
        "1e-9",
        "--out",
        dir.to_str().unwrap(),
    ]);
    checks.push(status("path", &out, 0));
    checks.extend(compare_files("path", &dir, &["path.csv", "path_entries.csv"]));

    // Tampering with an emitted matrix must be caught.
    let dir = tmp.path().join("moment");
    let cov = dir.join("covariance.csv");
    let text = fs::read_to_string(&cov).unwrap_or_default();
    fs::write(&cov, text.replacen("1.1000000000000001e0", "1.2000000000000000e0", 1)).unwrap();
    let out = covsel(&["certify", "--dir", dir.to_str().unwrap()]);
    checks.push(status("certify tampered", &out, 1));

    checks
}
