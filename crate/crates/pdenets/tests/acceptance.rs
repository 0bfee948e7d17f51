//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Thresholds are fixed here and never tuned to the results.

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use pdenets::emulators::{
    emulate, pairwise_product_with, verify_1d, verify_grid, EmulationSpec, EmulationTarget, SquareDesign,
};
use pdenets::finite_diff::{make_stencil_1d, Bias, MAX_STENCIL_ORDER};
use pdenets::harness::{self, ConvergenceReport, ExperimentConfig, Format};
use pdenets::mlp::{mlp_estimate, mlp_network_realization, probe_points, MlpEmulations, SemilinearProblem};
use pdenets::operator::{build_pi_deeponet, Multiplier, PiDeepOnetParams, SpectralMultiplierOracle};
use pdenets::residual::pido_rate_transfer_exact;

type Verdict = Result<String, String>;

fn run(json: &str) -> Result<(ConvergenceReport, Duration), String> {
    let cfg = ExperimentConfig::from_json(json).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let rep = harness::run(&cfg).map_err(|e| e.to_string())?;
    Ok((rep, start.elapsed()))
}

fn report_verdict(rep: &ConvergenceReport) -> Verdict {
    let failed: Vec<String> = rep.failed_checks().iter().map(|c| format!("{} = {:e} vs {:e}", c.name, c.value, c.threshold)).collect();
    if failed.is_empty() {
        Ok(format!("{} checks", rep.checks.len()))
    } else {
        Err(failed.join("; "))
    }
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!("{what} took {elapsed:?} > {limit:?}"))
    }
}

fn fd_orders() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for r in [1usize, 2, 4] {
        for l in [1usize, 2] {
            for dim in [1usize, 2] {
                let h0 = if r == 4 { 0.1 } else { 0.04 };
                let hs: Vec<f64> = (0..4).map(|k| h0 / 2f64.powi(k)).collect();
                let json = format!(
                    r#"{{"schema_version":1,"kind":"fd-order","order":{l},"accuracy":{r},"dim":{dim},"bias":"forward","h":{hs:?},"slope_tol":0.2,"seeds":[0]}}"#
                );
                let (rep, _) = run(&json)?;
                let slope = rep.slope.as_ref().unwrap().slope;
                worst = worst.max((slope - r as f64).abs());
                report_verdict(&rep).map_err(|e| format!("r={r} l={l} dim={dim}: {e}"))?;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(5), "sweep")?;
    Ok(format!("max |slope - r| = {worst:.3} over 12 cells in {:?}", start.elapsed()))
}

fn stencil_exactness() -> Verdict {
    let mut count = 0;
    for l in 1..=MAX_STENCIL_ORDER {
        for r in 1..=8usize.saturating_sub(l) {
            for bias in [Bias::Forward, Bias::Backward, Bias::Central] {
                let Ok(st) = make_stencil_1d(l, r, bias) else { continue };
                let fact: BigInt = (1..=l).map(BigInt::from).product();
                for m in 0..(l + st.attained) {
                    let want = if m == l { BigRational::from_integer(fact.clone()) } else { BigRational::zero() };
                    if st.moment(m) != want {
                        return Err(format!("l={l} r={r} {bias:?}: moment {m} = {}", st.moment(m)));
                    }
                }
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err("no stencils generated".into());
    }
    Ok(format!("{count} stencils exact"))
}

fn partition_of_unity() -> Verdict {
    let n: Vec<usize> = (1..=64).collect();
    let mut notes = Vec::new();
    for eps in [1e-3, 1e-6] {
        let json = format!(r#"{{"schema_version":1,"kind":"pou-check","n":{n:?},"eps":{eps:e},"t_end":1.0,"grid":2001,"seeds":[0]}}"#);
        let (rep, _) = run(&json)?;
        report_verdict(&rep)?;
        notes.push(format!("eps={eps:e}: defect {:.1e}, off-window {:.2e}", rep.checks[0].value, rep.checks[1].value));
    }
    Ok(notes.join("; "))
}

fn interpolation() -> Verdict {
    let (rep, t) = run(r#"{"schema_version":1,"kind":"interp-decay","n":[2,4,8,16],"seeds":[0]}"#)?;
    report_verdict(&rep)?;
    within(t, Duration::from_secs(10), "interp-decay")?;
    let v: Vec<String> = rep.checks.iter().map(|c| format!("{}={:.3e}", c.name, c.value)).collect();
    Ok(v.join(", "))
}

fn emulators() -> Verdict {
    let targets = [
        (EmulationTarget::Identity, 3.0),
        (EmulationTarget::Monomial(2), 1.0),
        (EmulationTarget::Monomial(3), 2.0),
        (EmulationTarget::Product(2), 1.0),
        (EmulationTarget::Product(3), 1.0),
        (EmulationTarget::Cos, 4.0),
        (EmulationTarget::Sin, 4.0),
        (EmulationTarget::Legendre(vec![3]), 1.0),
        (EmulationTarget::Legendre(vec![1, 2]), 1.0),
    ];
    let mut built = 0;
    for tol in [1e-3, 1e-6] {
        for (target, bound) in &targets {
            let spec = EmulationSpec { target: target.clone(), domain_bound: *bound, tolerance: tol, derivative_order_checked: 0 };
            let (_, rep) = emulate(&spec).map_err(|e| format!("{target:?} at {tol:e}: {e}"))?;
            if rep.achieved_sup_error > tol {
                return Err(format!("{target:?}: {:e} > {tol:e}", rep.achieved_sup_error));
            }
            built += 1;
        }
    }
    let prod = |h: f64| {
        let net = pairwise_product_with(1.0, SquareDesign { levels: 1, h });
        verify_grid(&net, &|x: &[f64]| x[0] * x[1], &[(-1.0, 1.0), (-1.0, 1.0)])
    };
    let sq = |h: f64| {
        let net = pairwise_product_with(1.0, SquareDesign { levels: 1, h });
        verify_1d(&net.precompose_affine(&[vec![1.0], vec![1.0]], &[0.0, 0.0]).unwrap(), &|x| x * x, None, -1.0, 1.0, 2001).0
    };
    let mut ratios = Vec::new();
    for h in [0.2, 0.1, 0.05] {
        let r = prod(h) / prod(h / 2.0);
        if !(r >= 3.0) {
            return Err(format!("product step {h} -> {}: ratio {r:.3} < 3", h / 2.0));
        }
        ratios.push(r);
    }
    let diag = sq(0.1) / sq(0.05);
    if !(diag >= 3.0) {
        return Err(format!("diagonal ratio {diag:.3} < 3"));
    }
    Ok(format!("{built} nets within tolerance; halving ratios {ratios:.2?}"))
}

fn mlp_validity() -> Verdict {
    let (rep, t) = run(
        r#"{"schema_version":1,"kind":"mlp-validate","n":[1,2,3,4],"m":[1,2,3,4,5],"t_end":1.0,
            "replicates":100,"reference_modes":32,"reference_dt":1e-3,"seeds":[7]}"#,
    )?;
    report_verdict(&rep)?;
    within(t, Duration::from_secs(600), "mlp-validate")?;
    let closed = rep.checks.last().unwrap();
    Ok(format!("20 cells within bound, closed-form deviation {:.1e}, {t:.1?}", closed.value))
}

fn mlp_scaling() -> Verdict {
    let (rep, t) = run(r#"{"schema_version":1,"kind":"mlp-scaling","d":[1,5,10],"n":3,"m":3,"replicates":4000,"repeats":3,"seeds":[3]}"#)?;
    report_verdict(&rep)?;
    within(t, Duration::from_secs(300), "mlp-scaling")?;
    let v: Vec<String> = rep.checks.iter().map(|c| format!("{:.2} <= {:.1}", c.value, c.threshold)).collect();
    Ok(format!("time ratios {}", v.join(", ")))
}

fn mlp_realization() -> Verdict {
    let p = SemilinearProblem::allen_cahn(1, 1.0);
    let probes = probe_points(1, 64);
    let mut worst = 0.0f64;
    for n in 1..=2usize {
        let emu = MlpEmulations::fit_1d(&p, n, 1e-8, 2.0).map_err(|e| e.to_string())?;
        let g_sup = verify_1d(&emu.g_hat, &|_| 0.0, None, -(n as f64) * std::f64::consts::PI - 0.5, 2.0 * std::f64::consts::PI + n as f64 * std::f64::consts::PI + 0.5, 4001).0;
        let f_sup = verify_1d(&emu.f_hat, &|_| 0.0, None, -emu.f_range, emu.f_range, 4001).0;
        for m in [2usize, 3] {
            for seed in [0u64, 1] {
                let real = mlp_network_realization(&p, &emu, n, m, 0.0, seed).map_err(|e| e.to_string())?;
                let mut disc = 0.0f64;
                for x in &probes {
                    let est = mlp_estimate(&p, n, m, 0.0, x, seed).map_err(|e| e.to_string())?;
                    disc = disc.max((real.net.eval1(x).unwrap() - est).abs());
                }
                if disc > real.budget {
                    return Err(format!("n={n} m={m} seed={seed}: discrepancy {disc:e} > budget {:e}", real.budget));
                }
                worst = worst.max(disc / real.budget);
                for k in 0..=n {
                    let uk = mlp_network_realization(&p, &emu, k, m, 0.0, seed).map_err(|e| e.to_string())?;
                    let sup = verify_1d(&uk.net, &|_| 0.0, None, 0.0, 2.0 * std::f64::consts::PI, 2001).0;
                    let cap = g_sup + 2.0 * p.t_end * f_sup * k as f64;
                    if sup > cap {
                        return Err(format!("|U_{k}| = {sup} > {cap} (n={n} m={m} seed={seed})"));
                    }
                }
            }
        }
    }
    Ok(format!("max discrepancy / budget = {worst:.2e}; sup growth bound holds"))
}

fn spacetime_rate() -> Verdict {
    let (rep, t) = run(
        r#"{"schema_version":1,"kind":"spacetime-rate","m":[2,4,8,16],"s":2,"eps":1e-6,"snapshot_eps":1e-8,
            "t_end":1.0,"residual_points":4000,"seeds":[11]}"#,
    )?;
    report_verdict(&rep)?;
    within(t, Duration::from_secs(300), "spacetime-rate")?;
    let ratio = rep.checks.iter().find(|c| c.name.starts_with("residual")).unwrap().value;
    Ok(format!("L2 slope {:.3}, residual(8)/residual(2) = {ratio:.3}", rep.slope.unwrap().slope))
}

fn fno_rate() -> Verdict {
    let (rep, _) = run(r#"{"schema_version":1,"kind":"fno-rate","n":[4,8,16,32],"t_end":0.1,"regularity":3.0,"input_degree":256,"seeds":[1]}"#)?;
    report_verdict(&rep)?;
    Ok(format!("L2 slope {:.3}, band limit exact", rep.slope.unwrap().slope))
}

fn deeponet_equivalence() -> Verdict {
    let (rep, _) = run(
        r#"{"schema_version":1,"kind":"deeponet-equiv","n":[2],"d":1,"eps":1e-6,"inputs":100,"queries":1000,
            "multiplier":"identity","seeds":[2]}"#,
    )?;
    report_verdict(&rep)?;
    let oracle = std::sync::Arc::new(SpectralMultiplierOracle::new(1, Multiplier::Heat));
    for (s, m, n) in [(1usize, 1usize, 1usize), (2, 2, 2), (2, 3, 1), (3, 2, 2)] {
        let params = PiDeepOnetParams { m, s, n, z: n, eps: 1e-3, t_end: 1.0 };
        let pi = build_pi_deeponet(oracle.clone(), &params).map_err(|e| e.to_string())?;
        let want = s * m * (2 * n + 1);
        if pi.onet.p() != want {
            return Err(format!("s={s} M={m} N={n}: p = {} != {want}", pi.onet.p()));
        }
    }
    Ok(format!("sup discrepancy {:.2e} <= 1e-6; p = sM(2N+1) for 4 shapes", rep.checks[0].value))
}

fn generalization_bound() -> Verdict {
    let (rep, _) = run(r#"{"schema_version":1,"kind":"gen-bound","trials":100,"samples":200,"width":8,"test_samples":2000,"noise":0.1,"seeds":[4]}"#)?;
    report_verdict(&rep)?;
    let passes = rep.rows.iter().find(|r| r.metric == "passes").unwrap().value;
    Ok(format!("formula deviation {:.1e}, threshold {:.3}, {passes}/100 trials", rep.checks[0].value,
        rep.rows.iter().find(|r| r.metric == "precondition_threshold").unwrap().value))
}

fn rate_transfer() -> Verdict {
    let q = |n: i64| BigRational::from_integer(n.into());
    let (beta, lambda) = pido_rate_transfer_exact(&q(4), &q(1), 4, 2).map_err(|e| e.to_string())?;
    if beta != q(3) / q(2) {
        return Err(format!("beta = {beta}"));
    }
    if lambda != q(4) {
        return Err(format!("lambda round trip = {lambda}"));
    }
    Ok(format!("beta = {beta}, lambda recovered = {lambda}"))
}

fn determinism() -> Verdict {
    let configs = [
        r#"{"schema_version":1,"kind":"gen-bound","trials":20,"samples":100,"width":6,"test_samples":500,"noise":0.1,"seeds":[5]}"#,
        r#"{"schema_version":1,"kind":"mlp-validate","n":[2],"m":[3],"t_end":1.0,"replicates":20,"reference_modes":16,"reference_dt":1e-2,"seeds":[6]}"#,
        r#"{"schema_version":1,"kind":"fno-rate","n":[4,8,16],"t_end":0.1,"regularity":3.0,"input_degree":64,"seeds":[8]}"#,
        r#"{"schema_version":1,"kind":"mlp-scaling","d":[1,2],"n":2,"m":2,"replicates":10,"repeats":1,"seeds":[1]}"#,
    ];
    let dir = std::env::temp_dir().join(format!("pdenets-determinism-{}", std::process::id()));
    for json in configs {
        let mut bytes = Vec::new();
        for round in 0..2 {
            let (rep, _) = run(json)?;
            let path = harness::emit(&rep, Format::Csv, &dir.join(round.to_string())).map_err(|e| e.to_string())?;
            bytes.push(std::fs::read(path).map_err(|e| e.to_string())?);
        }
        if bytes[0] != bytes[1] {
            return Err(format!("CSV differs between runs for {json}"));
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(format!("{} experiments byte-identical on rerun", configs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 14] = [
        ("finite-difference orders", fd_orders),
        ("stencil moment exactness", stencil_exactness),
        ("partition of unity", partition_of_unity),
        ("trigonometric interpolation", interpolation),
        ("emulator tolerances", emulators),
        ("multilevel Picard validity", mlp_validity),
        ("multilevel Picard dimension scaling", mlp_scaling),
        ("multilevel Picard network realization", mlp_realization),
        ("space-time rate", spacetime_rate),
        ("FNO rate", fno_rate),
        ("DeepONet equivalence", deeponet_equivalence),
        ("generalization bound", generalization_bound),
        ("rate transfer", rate_transfer),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or(e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or("panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(msg) => println!("PASS {:>2} {name}: {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {msg} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
