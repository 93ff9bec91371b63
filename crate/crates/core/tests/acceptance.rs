//! End-to-end acceptance criteria. Prints one `PASS`/`FAIL` line per
//! criterion and exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use spectral_cert::model_manifold::{DecayClass, ManifoldSpec};
use spectral_cert::oracle::{discretize_radial, kth_eigenvalue, sturm_count};
use spectral_cert::scenario::{
    builtin, matrix_weyl_summary, run_scenario, ScenarioReport, EXIT_EXPECTED_FAILURE, EXIT_OK,
};
use spectral_cert::Error;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

const MANIFOLD_BUDGET: Duration = Duration::from_secs(60);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(name: &str) -> Result<(ScenarioReport, Duration), String> {
    let cfg = builtin(name).ok_or_else(|| format!("no builtin {name}"))?;
    let t = Instant::now();
    let rep = run_scenario(&cfg, None).map_err(|e| format!("{name}: {e}"))?;
    Ok((rep, t.elapsed()))
}

fn failed_checks(rep: &ScenarioReport) -> Vec<String> {
    rep.checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect()
}

fn euclidean(reports: &mut Vec<ScenarioReport>) -> Outcome {
    let mut detail = Vec::new();
    for name in ["euclidean2d", "euclidean3d"] {
        let (rep, took) = run(name)?;
        ensure(rep.exit_code == EXIT_OK, || format!("{name} exit {}: {:?}", rep.exit_code, rep.failures))?;
        ensure(took <= MANIFOLD_BUDGET, || format!("{name} took {took:?}"))?;
        ensure(rep.certificates.len() == 3, || format!("{name}: {} certificates", rep.certificates.len()))?;
        for c in &rep.certificates {
            ensure(c.sigma <= 1e-3, || format!("{name} λ = {}: σ = {:e}", c.lambda, c.sigma))?;
            ensure(c.epsilon <= (c.lambda + 1.0) / 10.0, || {
                format!("{name} λ = {}: ε = {} > (λ+1)/10", c.lambda, c.epsilon)
            })?;
        }
        let v = rep.validation.as_ref().ok_or(format!("{name}: no validation"))?;
        ensure(v.valid && v.entries.iter().all(|e| e.validated), || format!("{name}: {v:?}"))?;
        let max_sigma = rep.certificates.iter().map(|c| c.sigma).fold(0.0, f64::max);
        detail.push(format!("{name} max σ {max_sigma:.2e} in {:.1}s", took.as_secs_f64()));
        reports.push(rep);
    }
    Ok(detail.join("; "))
}

fn hyperbolic() -> Outcome {
    let (rep, _) = run("hyperbolic2d")?;
    let a = rep.asymptotic.as_ref().ok_or("no asymptotic report")?;
    ensure((a.limsup_delta_r - 1.0).abs() <= 0.01, || format!("limsup Δr = {}", a.limsup_delta_r))?;
    ensure(rep.exit_code == EXIT_EXPECTED_FAILURE, || format!("unweighted exit {}", rep.exit_code))?;
    ensure(
        rep.failures.iter().any(|f| f.lambda == Some(0.1) && f.kind == "certification_impossible"),
        || format!("{:?}", rep.failures),
    )?;

    let (w, _) = run("hyperbolic2d_weighted")?;
    ensure(w.exit_code == EXIT_OK, || format!("weighted exit {}: {:?}", w.exit_code, w.failures))?;
    let lambdas: Vec<f64> = w.certificates.iter().map(|c| c.lambda).collect();
    ensure(lambdas == [0.3, 0.5, 1.0], || format!("weighted certificates at {lambdas:?}"))?;

    let m = ManifoldSpec::new("hyperbolic", 2, 1.0)
        .with_param("curvature", 1.0)
        .build()
        .map_err(|e| e.to_string())?;
    let t = discretize_radial(&m, 40.0, 4000).map_err(|e| e.to_string())?;
    let mu0 = kth_eigenvalue(&t, 0, 1e-10).map_err(|e| e.to_string())?;
    ensure(mu0 >= 0.25 - 0.05, || format!("lowest oracle eigenvalue {mu0}"))?;
    Ok(format!(
        "limsup Δr {:.4}; weighted σ {:?}; lowest eigenvalue {mu0:.4}",
        a.limsup_delta_r,
        w.certificates.iter().map(|c| format!("{:.2e}", c.sigma)).collect::<Vec<_>>()
    ))
}

fn power_cusp() -> Outcome {
    let (rep, took) = run("power_cusp")?;
    let a = rep.asymptotic.as_ref().ok_or("no asymptotic report")?;
    ensure(matches!(a.decay_class, DecayClass::Polynomial { .. }), || format!("{:?}", a.decay_class))?;
    ensure(a.volume_finite, || "volume reported infinite".into())?;
    ensure(rep.exit_code == EXIT_OK, || format!("exit {}: {:?}", rep.exit_code, rep.failures))?;
    let lambdas: Vec<f64> = rep.certificates.iter().map(|c| c.lambda).collect();
    ensure(lambdas == [0.2, 0.5, 1.0], || format!("certificates at {lambdas:?}"))?;
    ensure(rep.certificates.iter().all(|c| c.sigma <= 1e-2), || "σ above 1e-2".into())?;
    Ok(format!("{:?}, 3 certificates in {:.1}s", a.decay_class, took.as_secs_f64()))
}

fn exp_cusp() -> Outcome {
    let (rep, _) = run("exp_cusp")?;
    let a = rep.asymptotic.as_ref().ok_or("no asymptotic report")?;
    let DecayClass::Exponential { epsilon0 } = a.decay_class else {
        return Err(format!("decay class {:?}", a.decay_class));
    };
    ensure((epsilon0 - 1.0).abs() <= 0.02, || format!("ε₀ = {epsilon0}"))?;
    ensure(rep.exit_code == EXIT_EXPECTED_FAILURE, || format!("exit {}: {:?}", rep.exit_code, rep.failures))?;
    let cfg = builtin("exp_cusp").expect("builtin");
    let o = cfg.oracle.expect("oracle section");
    let m = cfg.manifold.expect("manifold").build().map_err(|e| e.to_string())?;
    let t = discretize_radial(&m, o.length, o.m).map_err(|e| e.to_string())?;
    let below = sturm_count(&t, 0.2);
    ensure(below == 0, || format!("{below} oracle eigenvalues below 0.2"))?;
    Ok(format!("ε₀ = {epsilon0:.4}; negative control exit 2; none below 0.2"))
}

fn soliton(euclid: &[ScenarioReport]) -> Outcome {
    let (rep, _) = run("soliton_gaussian")?;
    ensure(rep.exit_code == EXIT_OK, || format!("exit {}: {:?}", rep.exit_code, rep.failures))?;
    let flat = euclid
        .iter()
        .find(|r| r.scenario == "euclidean2d")
        .ok_or("euclidean2d report missing")?;
    let mut detail = Vec::new();
    for l in [0.5, 1.0] {
        let s = rep.certificates.iter().find(|c| c.lambda == l).ok_or(format!("no soliton certificate at {l}"))?;
        let e = flat.certificates.iter().find(|c| c.lambda == l).ok_or(format!("no euclidean certificate at {l}"))?;
        let ratio = s.sigma / e.sigma;
        ensure((ratio - 1.0).abs() <= 0.1, || format!("λ = {l}: σ ratio {ratio}"))?;
        detail.push(format!("λ = {l}: ratio {ratio:.4}"));
    }
    Ok(detail.join(", "))
}

fn cylinder() -> Outcome {
    let (rep, _) = run("cylinder")?;
    let bad = failed_checks(&rep);
    ensure(bad.is_empty() && rep.exit_code == EXIT_OK, || bad.join("; "))?;
    let m = &rep.measurements;
    Ok(format!(
        "jump(0) = {:.4}, jump(1) = {:.4}",
        m["cylinder_jump x=0"], m["cylinder_jump x=1"]
    ))
}

fn matrix_weyl(summary: &spectral_cert::scenario::MatrixSuiteSummary) -> Outcome {
    ensure(summary.instances == 200 && summary.necessity_worst <= 1e-10, || {
        format!("necessity worst {:e}", summary.necessity_worst)
    })?;
    ensure(summary.diag_q_lin == 0.0, || format!("q_lin = {}", summary.diag_q_lin))?;
    ensure((summary.diag_q_f - 2.0 / 3.0).abs() <= 1e-12, || format!("q_f = {}", summary.diag_q_f))?;
    ensure(summary.gap_instances > 0 && summary.gap_agreements == summary.gap_instances, || {
        format!("{}/{} gap instances agree", summary.gap_agreements, summary.gap_instances)
    })?;
    Ok(format!(
        "worst {:.1e} over 200; q_f = {:.15}; {}/{} gap agreements",
        summary.necessity_worst, summary.diag_q_f, summary.gap_agreements, summary.gap_instances
    ))
}

fn resolvent(summary: &spectral_cert::scenario::MatrixSuiteSummary) -> Outcome {
    ensure(summary.m_matrices == 100 && summary.resolvent_worst <= 1.0 + 1e-10, || {
        format!("worst ratio {}", summary.resolvent_worst)
    })?;
    Ok(format!("worst ratio {:.12} over 100 Laplacians", summary.resolvent_worst))
}

fn mollifier() -> Outcome {
    let (rep, _) = run("mollify_suite")?;
    let bad = failed_checks(&rep);
    ensure(bad.is_empty() && rep.exit_code == EXIT_OK, || bad.join("; "))?;
    Ok(format!(
        "‖b‖₁ = {:.3e} after {} halvings; 50 random functions",
        rep.measurements["blend_b_l1"], rep.measurements["blend_halvings"]
    ))
}

fn tents() -> Outcome {
    let (rep, _) = run("boundary_tents")?;
    let bad = failed_checks(&rep);
    ensure(bad.is_empty() && rep.exit_code == EXIT_OK, || bad.join("; "))?;
    ensure(rep.certificates.len() == 4, || format!("{} tent certificates", rep.certificates.len()))?;
    let sigmas: Vec<String> = rep.certificates.iter().map(|c| format!("{:.2e}", c.sigma)).collect();
    Ok(format!("σ_k = [{}]; L² criterion inapplicable", sigmas.join(", ")))
}

fn main() -> ExitCode {
    let mut euclid = Vec::new();
    let summary = matrix_weyl_summary(200, 100, builtin("matrix_weyl_suite").expect("builtin").seed)
        .map_err(|e: Error| e.to_string());
    let criteria: Vec<Criterion> = vec![
        ("euclidean R2 and R3 certification", Box::new(|| euclidean(&mut euclid))),
        ("hyperbolic plane", Box::new(hyperbolic)),
        ("finite-volume polynomial cusp", Box::new(power_cusp)),
        ("exponential cusp negative control", Box::new(exp_cusp)),
    ];
    let mut outcomes: Vec<(&str, Outcome)> = criteria.into_iter().map(|(n, f)| (n, f())).collect();
    outcomes.push(("gaussian soliton", soliton(&euclid)));
    outcomes.push(("cylinder cut locus", cylinder()));
    outcomes.push(("matrix weyl suite", summary.as_ref().map_err(Clone::clone).and_then(matrix_weyl)));
    outcomes.push(("resolvent contractivity", summary.as_ref().map_err(Clone::clone).and_then(resolvent)));
    outcomes.push(("mollifier suite", mollifier()));
    outcomes.push(("boundary tent sequence", tents()));

    let mut failed = 0;
    for (i, (name, outcome)) in outcomes.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
