use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use widthlab::berger::{self, BergerParameter};
use widthlab::conformal::{self, AxisymProfile};
use widthlab::equidist::{self, Instance, Verdict};
use widthlab::io::{self, ProfileFile};
use widthlab::numerics::QuadratureConfig;
use widthlab::yamabe::{self, FlowConfig, FlowStatus};
use widthlab::{Error, Result, FORMAT_VERSION};

use crate::config::*;
use crate::Outcome;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("bad {what} {}: {e}", path.display())))
}

fn read_profile(path: &Path) -> Result<AxisymProfile<f64>> {
    read_json::<ProfileFile>(path, "profile")?.to_profile()
}

fn header_comments<C: Serialize>(command: &str, cfg: &C) -> Vec<String> {
    vec![
        format!("format_version: {FORMAT_VERSION}"),
        format!("command: {command}"),
        format!("config: {}", serde_json::to_string(cfg).expect("config serializes")),
    ]
}

fn json_report<C: Serialize>(command: &str, cfg: &C, body: Value) -> String {
    let mut doc = json!({
        "format_version": FORMAT_VERSION,
        "command": command,
        "config": cfg,
    });
    if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
        d.extend(b);
    }
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

fn ok(body: String) -> Outcome {
    Outcome { body, pass: true }
}

pub fn berger_scan(cfg: &BergerScanConfig) -> Result<Outcome> {
    let q = QuadratureConfig::new(cfg.abs_tol, cfg.max_depth)?;
    let reports = berger::scan(cfg.rho_min, cfg.rho_max, cfg.n, &q)?;
    Ok(ok(io::write_csv(
        &header_comments("berger-scan", cfg),
        &io::BERGER_HEADER,
        &io::berger_rows(&reports),
    )))
}

pub fn berger_certify(cfg: &BergerCertifyConfig) -> Result<Outcome> {
    let q = QuadratureConfig::new(cfg.abs_tol, cfg.max_depth)?;
    let round = BergerParameter::round();
    let nw1 = berger::normalized_width(&round, &q)?;
    let w1 = berger::width(&round, &q)?;
    let expected = (16.0 / std::f64::consts::PI).cbrt();

    let certificates = cfg
        .steps
        .iter()
        .map(|&h| berger::local_min_certificate(h, &q))
        .collect::<Result<Vec<_>>>()?;

    let small = BergerParameter::new(cfg.small_rho)?;
    let large = BergerParameter::new(cfg.large_rho)?;
    let nw_small = berger::normalized_width(&small, &q)?;
    let nw_large = berger::normalized_width(&large, &q)?;

    let grid = berger::log_grid(1.99f64.powi(-10), 1.99, cfg.grid_n)?;
    let checks = grid
        .iter()
        .map(|&rho| berger::scalar_normalized_bound_check(&BergerParameter::new(rho)?, &q))
        .collect::<Result<Vec<_>>>()?;
    let equality_at: Vec<f64> = checks.iter().filter(|c| c.equality).map(|c| c.rho).collect();
    let max_product = checks.iter().map(|c| c.product).fold(f64::NEG_INFINITY, f64::max);

    let mc = cfg
        .mc_rhos
        .iter()
        .enumerate()
        .map(|(i, &rho)| {
            let est = berger::monte_carlo_volume(rho, cfg.mc_samples, cfg.seed.wrapping_add(i as u64))?;
            let exact = berger::volume(&BergerParameter::new(rho)?);
            let rel = (est.mean - exact).abs() / exact;
            Ok(json!({
                "rho": rho,
                "estimate": est,
                "exact": exact,
                "relative_error": rel,
                "pass": rel < 5e-3,
            }))
        })
        .collect::<Result<Vec<_>>>()?;

    let body = json!({
        "round": {
            "normalized_width": nw1,
            "expected": expected,
            "abs_error": (nw1 - expected).abs(),
            "width": w1,
            "width_expected": 4.0 * std::f64::consts::PI,
            "pass": (nw1 - expected).abs() < 1e-6 && (w1 - 4.0 * std::f64::consts::PI).abs() < 1e-5,
        },
        "local_minimum": {
            "certificates": certificates,
            "pass": certificates.iter().all(|c| c.pass),
        },
        "unbounded": {
            "small_rho": cfg.small_rho,
            "small_normalized_width": nw_small,
            "small_ricci_positive": berger::has_positive_ricci(&small),
            "large_rho": cfg.large_rho,
            "large_normalized_width": nw_large,
            "factor": cfg.unbounded_factor,
            "pass": nw_small > cfg.unbounded_factor * nw1 && nw_large > cfg.unbounded_factor * nw1,
        },
        "scalar_bound": {
            "points": checks.len(),
            "max_product": max_product,
            "bound": 24.0 * std::f64::consts::PI,
            "equality_at": equality_at,
            "pass": checks.iter().all(|c| c.pass)
                && equality_at.iter().all(|r| (r - 1.0).abs() < 1e-9),
        },
        "monte_carlo_volume": mc,
    });
    Ok(ok(json_report("berger-certify", cfg, body)))
}

pub fn conformal_analyze(cfg: &ConformalConfig) -> Result<Outcome> {
    let path = require_input(&cfg.input, "conformal-analyze")?;
    let p = read_profile(&path)?;
    let rfield = conformal::scalar_curvature_field(&p);
    let r = rfield.values();
    let (theta_max, bound) = conformal::width_upper_bound_at(&p);
    let star = conformal::star_scan(&p)?;
    let spheres = star
        .minimal_spheres
        .iter()
        .map(|s| {
            Ok(json!({
                "theta": s.theta,
                "spectrum": conformal::jacobi_spectrum(&p, s.theta, conformal::SPECTRUM_K_MAX)?,
                "curvature_integral": conformal::curvature_integral_over_sphere(&p, s.theta)?,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let body = json!({
        "n": p.n(),
        "volume": conformal::volume(&p),
        "scalar_curvature_min": r.iter().copied().fold(f64::INFINITY, f64::min),
        "scalar_curvature_max": r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "width_upper_bound": bound,
        "width_upper_bound_theta": theta_max,
        "star": star,
        "spectra": spheres,
        "isoperimetric": conformal::isoperimetric_check(&p, cfg.isoperimetric_tol),
    });
    Ok(ok(json_report("conformal-analyze", cfg, body)))
}

/// Returns the CSV trace and the JSON summary.
pub fn yamabe_run(cfg: &YamabeConfig) -> Result<(Outcome, String)> {
    let mut cfg = cfg.clone();
    let p0 = match &cfg.input {
        Some(path) => {
            let p = read_profile(path)?;
            cfg.n = p.n();
            p
        }
        None => {
            let a = cfg.amplitude;
            AxisymProfile::from_fn(cfg.n, |t: f64| 1.0 + a * t.cos())?
        }
    };
    let flow = FlowConfig {
        sample_every: cfg.sample_every,
        convergence_tol: cfg.convergence_tol,
        policy: cfg.policy,
        ..FlowConfig::new(cfg.t_end, cfg.dt)
    };
    let trace = yamabe::run(&p0, &flow)?;
    let last = trace.final_state();
    let status = match trace.status {
        FlowStatus::Converged => "converged",
        FlowStatus::ReachedEnd => "reached-end",
    };

    let mut comments = header_comments("yamabe-run", &cfg);
    comments.push(format!("status: {status}"));
    comments.push(format!("final_time: {}", io::fmt_g17(last.time)));
    let csv = io::write_csv(&comments, &io::TRACE_HEADER, &io::trace_rows(&trace.monitors, cfg.sample_every));

    let derivative = match yamabe::width_derivative_monitor(&trace) {
        Ok(r) => json!({
            "max_abs_residual": r.max_abs_residual,
            "max_abs_rhs": r.max_abs_rhs,
            "relative_residual": r.relative_residual,
        }),
        Err(_) => Value::Null,
    };
    let summary = json!({
        "status": trace.status,
        "steps": trace.monitors.len() - 1,
        "step_size": trace.step_size,
        "final_time": last.time,
        "final_r_avg": last.r_avg,
        "final_energy": last.energy,
        "final_volume": last.volume,
        "final_width_bound": last.width_bound,
        "final_sup_R_minus_r": last.sup_r_minus_r,
        "initial_volume": trace.initial_volume,
        "max_volume_drift": trace.max_volume_drift,
        "max_energy_increase": trace.max_energy_increase,
        "theorem1": yamabe::theorem1_monitor(&trace, cfg.theorem_tol),
        "width_derivative": derivative,
    });
    Ok((ok(csv), json_report("yamabe-run", &cfg, summary)))
}

fn read_instance(input: &Option<std::path::PathBuf>, what: &str) -> Result<Instance> {
    read_json(&require_input(input, what)?, "instance")
}

pub fn equidist_check(cfg: &EquidistCheckConfig) -> Result<Outcome> {
    let (mu0, fam) = read_instance(&cfg.input, "equidist-check")?.into_parts()?;
    let cert = equidist::cone_hull_membership(&mu0, &fam, cfg.tol)?;
    let violating = match (&cert.verdict, &cert.separating_f) {
        (Verdict::NonMember, Some(f)) => {
            let f0 = equidist::mean_zero_functional(&mu0, f);
            let margins: Vec<f64> = fam.members().iter().map(|m| m.integrate(&f0)).collect();
            json!({ "f0": f0, "mu0_pairing": mu0.integrate(&f0), "member_pairings": margins })
        }
        _ => Value::Null,
    };
    let body = json!({
        "sound": cert.is_sound(&mu0, &fam),
        "sound_exact": cert.is_sound_exact(&mu0, &fam),
        "certificate": cert,
        "mean_zero_functional": violating,
    });
    Ok(ok(json_report("equidist-check", cfg, body)))
}

pub fn equidist_sequence(cfg: &EquidistSequenceConfig) -> Result<Outcome> {
    let (mu0, fam) = read_instance(&cfg.input, "equidist-sequence")?.into_parts()?;
    let trace = if cfg.weighted {
        equidist::weighted_cesaro_structured_with(&mu0, &fam, cfg.k_max, cfg.rule)?
    } else {
        equidist::cesaro_sequence_with(&mu0, &fam, cfg.k_max, cfg.rule)?
    };
    let mut comments = header_comments("equidist-sequence", cfg);
    comments.push(format!("final_error: {}", io::fmt_g17(trace.final_error())));
    comments.push(format!("monotonicity_violations: {}", trace.monotonicity_violations));
    Ok(ok(io::write_csv(&comments, &io::CESARO_HEADER, &io::cesaro_rows(&trace))))
}

struct Item {
    name: &'static str,
    pass: bool,
    detail: String,
}

/// Returns the JSON report and the printed pass/fail lines.
pub fn roundcheck(cfg: &RoundcheckConfig) -> Result<(Outcome, String)> {
    use std::f64::consts::PI;
    let mut items = Vec::new();
    let q = QuadratureConfig::default();
    let round = BergerParameter::round();

    let nw = berger::normalized_width(&round, &q)?;
    let expected = (16.0 / PI).cbrt();
    items.push(Item {
        name: "berger-normalized-width",
        pass: (nw - expected).abs() < 1e-6,
        detail: format!("{nw:.9} vs {expected:.9}"),
    });
    let w = berger::width(&round, &q)?;
    items.push(Item {
        name: "berger-width",
        pass: (w - 4.0 * PI).abs() < 1e-5,
        detail: format!("{w:.9} vs {:.9}", 4.0 * PI),
    });

    let p = AxisymProfile::constant(cfg.n, 1.0)?;
    let vol = conformal::volume(&p);
    items.push(Item {
        name: "conformal-volume",
        pass: (vol - 2.0 * PI * PI).abs() < 1e-8,
        detail: format!("{vol:.12} vs {:.12}", 2.0 * PI * PI),
    });
    let rdev = conformal::scalar_curvature_field(&p)
        .values()
        .iter()
        .map(|r| (r - 6.0).abs())
        .fold(0.0, f64::max);
    items.push(Item {
        name: "conformal-scalar-curvature",
        pass: rdev < 1e-8,
        detail: format!("sup |R - 6| = {rdev:.3e}"),
    });
    let wb = conformal::width_upper_bound(&p);
    items.push(Item {
        name: "conformal-width",
        pass: (wb - 4.0 * PI).abs() < 1e-8,
        detail: format!("{wb:.12} vs {:.12}", 4.0 * PI),
    });
    let spec = conformal::jacobi_spectrum(&p, PI / 2.0, conformal::SPECTRUM_K_MAX)?;
    items.push(Item {
        name: "conformal-equator-index",
        pass: spec.index == 1 && spec.nullity == 3 && (spec.q - 2.0).abs() < 1e-3,
        detail: format!("index {}, nullity {}, Q = {:.6}", spec.index, spec.nullity, spec.q),
    });

    let trace = yamabe::run(&p, &FlowConfig::new(1e-3, yamabe::DEFAULT_DT))?;
    let dev = trace.monitors.iter().map(|m| m.sup_r_minus_r).fold(0.0, f64::max);
    items.push(Item {
        name: "yamabe-stationary",
        pass: trace.status == FlowStatus::Converged && dev < 1e-8 && trace.max_volume_drift < 1e-12,
        detail: format!("status {:?}, sup |R - r| = {dev:.3e}", trace.status),
    });

    let mu = |w: &[f64]| equidist::FiniteMeasure::new(w.to_vec());
    let fam = equidist::MeasureFamily::new(vec![mu(&[1.0, 0.0])?, mu(&[0.0, 1.0])?])?;
    let member = mu(&[0.25, 0.75])?;
    let cert = equidist::cone_hull_membership(&member, &fam, equidist::MEMBERSHIP_TOL)?;
    items.push(Item {
        name: "equidist-member",
        pass: cert.verdict == Verdict::Member && cert.is_sound(&member, &fam),
        detail: format!("{:?}", cert.verdict),
    });
    let line = equidist::MeasureFamily::new(vec![mu(&[1.0, 1.0])?])?;
    let off = mu(&[1.0, 2.0])?;
    let cert = equidist::cone_hull_membership(&off, &line, equidist::MEMBERSHIP_TOL)?;
    items.push(Item {
        name: "equidist-non-member",
        pass: cert.verdict == Verdict::NonMember && cert.is_sound_exact(&off, &line),
        detail: format!("{:?}", cert.verdict),
    });
    let seq = equidist::cesaro_sequence(&member, &fam, 1000)?;
    items.push(Item {
        name: "equidist-cesaro",
        pass: seq.final_error() < equidist::CESARO_TOL,
        detail: format!("error {:.3e} at k = 1000", seq.final_error()),
    });

    let all = items.iter().all(|i| i.pass);
    let mut lines = String::new();
    for i in &items {
        lines.push_str(&format!("{} {} ({})\n", if i.pass { "PASS" } else { "FAIL" }, i.name, i.detail));
    }
    let body = json!({
        "pass": all,
        "items": items
            .iter()
            .map(|i| json!({ "name": i.name, "pass": i.pass, "detail": i.detail }))
            .collect::<Vec<_>>(),
    });
    Ok((
        Outcome {
            body: json_report("roundcheck", cfg, body),
            pass: all,
        },
        lines,
    ))
}
