use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use widthlab::equidist::{Instance, MembershipCertificate, Verdict};
use widthlab::io::{read_csv, ProfileFile, BERGER_HEADER, CESARO_HEADER, TRACE_HEADER};
use widthlab::FORMAT_VERSION;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_widthlab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn berger_scan_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let o = run(&["berger-scan", "--rho-min", "1e-3", "--rho-max", "1e4", "--n", "50", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(t.header, BERGER_HEADER);
    assert_eq!(t.rows.len(), 50);
    assert!(t.comments.iter().any(|c| c == &format!("format_version: {FORMAT_VERSION}")));
    let config = t.comments.iter().find_map(|c| c.strip_prefix("config: ")).unwrap();
    let config: Value = serde_json::from_str(config).unwrap();
    assert_eq!(config["n"], 50);
    let rho = t.numeric("rho").unwrap();
    assert_eq!(rho[0], 1e-3);
    assert_eq!(*rho.last().unwrap(), 1e4);
    assert!(rho.windows(2).all(|w| w[0] < w[1]));
    // exact width formula: W = normalized width * volume^(2/3), volume = 2 pi^2 rho
    for (r, row) in t.rows.iter().enumerate() {
        let v: f64 = row[3].parse().unwrap();
        assert!((v - 2.0 * std::f64::consts::PI.powi(2) * rho[r]).abs() <= 1e-12 * v);
    }
}

#[test]
fn yamabe_round_profile_converges() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let summary = dir.path().join("summary.json");
    let o = run(&[
        "yamabe-run",
        "--profile",
        s(&data("round.json")),
        "--t-end",
        "1",
        "--summary",
        s(&summary),
        "-o",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(t.header, TRACE_HEADER);
    assert!(t.comments.contains(&"status: converged".to_string()));
    assert!(t.numeric("sup_R_minus_r").unwrap().iter().all(|&d| d < 1e-10));
    let j: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(j["format_version"], FORMAT_VERSION);
    assert_eq!(j["status"], "converged");
    assert_eq!(j["config"]["t_end"], 1.0);
}

#[test]
fn yamabe_short_flow_trace() {
    let o = run(&["yamabe-run", "--n", "51", "--t-end", "0.01", "--sample-every", "100"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_csv(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert!(t.comments.contains(&"status: reached-end".to_string()));
    let time = t.numeric("t").unwrap();
    assert_eq!(time.len(), 11);
    assert!((time.last().unwrap() - 0.01).abs() < 1e-12);
    let vol = t.numeric("volume").unwrap();
    assert!(vol.iter().all(|v| (v - vol[0]).abs() <= 1e-12 * vol[0]));
    let energy = t.numeric("energy").unwrap();
    assert!(energy.windows(2).all(|w| w[1] <= w[0] + 1e-8));
}

#[test]
fn equidist_non_member_certificate() {
    let o = run(&["equidist-check", "--input", s(&data("nonmember.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(j["format_version"], FORMAT_VERSION);
    let cert: MembershipCertificate = serde_json::from_value(j["certificate"].clone()).unwrap();
    assert_eq!(cert.verdict, Verdict::NonMember);
    let inst: Instance = serde_json::from_str(&std::fs::read_to_string(data("nonmember.json")).unwrap()).unwrap();
    let (mu0, fam) = inst.into_parts().unwrap();
    assert!(cert.is_sound(&mu0, &fam));
    assert!(cert.is_sound_exact(&mu0, &fam));
    assert_eq!(j["sound_exact"], true);
    let pairings = j["mean_zero_functional"]["member_pairings"].as_array().unwrap();
    assert!(pairings.iter().all(|v| v.as_f64().unwrap() > 0.0));
}

#[test]
fn equidist_member_and_sequence() {
    let o = run(&["equidist-check", "--input", s(&data("member.json"))]);
    assert_eq!(o.status.code(), Some(0));
    let j: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(j["certificate"]["verdict"], "member");

    let o = run(&["equidist-sequence", "--input", s(&data("member.json")), "--k-max", "2000"]);
    assert_eq!(o.status.code(), Some(0));
    let t = read_csv(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(t.header, CESARO_HEADER);
    let err = t.numeric("error").unwrap();
    assert_eq!(err.len(), 2000);
    assert!(*err.last().unwrap() < 5e-2);

    let o = run(&["equidist-sequence", "--input", s(&data("structured.json")), "--weighted", "true", "--k-max", "500"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    // a sequence for a non-member is a validation error
    let o = run(&["equidist-sequence", "--input", s(&data("nonmember.json"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let o = run(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    assert_eq!(run(&["berger-scan", "--n", "1"]).status.code(), Some(1));
    assert_eq!(run(&["berger-scan", "--rho-min", "-1"]).status.code(), Some(1));
    assert_eq!(run(&["equidist-check"]).status.code(), Some(1));
    assert_eq!(run(&["conformal-analyze", "--profile", "/nonexistent.json"]).status.code(), Some(1));

    // numerical failures
    assert_eq!(
        run(&["berger-scan", "--n", "3", "--max-depth", "1", "--abs-tol", "1e-15"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["yamabe-run", "--n", "51", "--policy", "strict", "--dt", "0.1", "--t-end", "1"]).status.code(),
        Some(2)
    );
}

#[test]
fn bad_thread_count_is_a_validation_error() {
    let o = bin().args(["berger-scan", "--n", "3"]).env("WIDTHLAB_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin().args(["berger-scan", "--n", "3"]).env("WIDTHLAB_THREADS", "2").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"rho_min": 0.5, "rho_max": 2.0, "n": 4}"#);
    let o = run(&["berger-scan", "--config", s(&cfg), "--n", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let t = read_csv(&String::from_utf8(o.stdout).unwrap()).unwrap();
    let rho = t.numeric("rho").unwrap();
    assert_eq!(rho.len(), 7);
    assert_eq!((rho[0], rho[6]), (0.5, 2.0));

    let bad = write(dir.path(), "bad.json", r#"{"rho_minimum": 0.5}"#);
    assert_eq!(run(&["berger-scan", "--config", s(&bad)]).status.code(), Some(1));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let member = data("member.json");
    let runs: [&[&str]; 3] = [
        &["berger-scan", "--n", "20"],
        &["berger-certify", "--mc-samples", "20000", "--grid-n", "10", "--seed", "7"],
        &["equidist-sequence", "--input", s(&member), "--k-max", "300"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let a = dir.path().join(format!("a{i}"));
        let b = dir.path().join(format!("b{i}"));
        for (p, threads) in [(&a, "1"), (&b, "4")] {
            let o = bin()
                .args(*args)
                .args(["-o", s(p)])
                .env("WIDTHLAB_THREADS", threads)
                .output()
                .unwrap();
            assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        }
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{args:?}");
    }
}

#[test]
fn seed_changes_monte_carlo() {
    let get = |seed: &str| {
        let o = run(&["berger-certify", "--mc-samples", "5000", "--grid-n", "5", "--seed", seed]);
        let j: Value = serde_json::from_slice(&o.stdout).unwrap();
        j["monte_carlo_volume"][0]["estimate"]["mean"].as_f64().unwrap()
    };
    assert_ne!(get("1"), get("2"));
    assert_eq!(get("3"), get("3"));
}

#[test]
fn conformal_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("analysis.json");
    let o = run(&["conformal-analyze", "--profile", s(&data("round.json")), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(j["format_version"], FORMAT_VERSION);
    let spheres = j["star"]["minimal_spheres"].as_array().unwrap();
    assert_eq!(spheres.len(), 1);
    assert_eq!(spheres[0]["index"], 1);
    assert_eq!(spheres[0]["nullity"], 3);
    let w = j["width_upper_bound"].as_f64().unwrap();
    assert!((w - 4.0 * std::f64::consts::PI).abs() < 1e-8);

    let p: ProfileFile = serde_json::from_str(&std::fs::read_to_string(data("cos03.json")).unwrap()).unwrap();
    assert!(p.to_profile().is_ok());
}

#[test]
fn roundcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("round.json");
    let o = run(&["roundcheck", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().count() >= 8);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
    let j: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(j["pass"], true);
}

#[test]
fn output_is_replaced_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let out = write(dir.path(), "scan.csv", "old contents\n");
    assert_eq!(run(&["berger-scan", "--n", "3", "-o", s(&out)]).status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# format_version"));
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(leftovers.len(), 1);
    // a failing run leaves the previous output untouched
    assert_eq!(run(&["berger-scan", "--n", "1", "-o", s(&out)]).status.code(), Some(1));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), text);
}
