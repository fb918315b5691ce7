//! Acceptance criteria 1 to 11. Runs without the libtest harness so that the
//! one-line verdicts are always printed. Pass criterion numbers as arguments
//! to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use tacnode::correlation::{endpoint_block_rho, rho};
use tacnode::finite::{kernel_finite, GridPoint, ModelParams, Scheme};
use tacnode::limits::{
    branch_of, kernel_gue_limit, kernel_pearcey, pearcey_single_closed, pearcey_single_quadrature,
    scaled_finite_for_tacnode, scaled_tacnode_for_gue, scaled_tacnode_for_pearcey,
    ChiNormalization, GuePoint, PearceyPoint,
};
use tacnode::macro_geometry::{
    boundary_curve, boundary_point, cusp_points, density_xi0, f_derivatives, Classifier,
    MacroPoint, Region,
};
use tacnode::simulator::{init_config, run_trial, simulate_statistics, SimConfig, Targets};
use tacnode::tacnode::{chi_term_bessel, chi_term_quadrature, kernel_tacnode, TacnodeParams, TacnodePoint};
use tacnode::verify::{deform_suite, recurrence_suite, symmetry_suite, SuiteOptions, SuiteReport};
use tacnode::C64;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn suite_detail(r: &SuiteReport) -> String {
    r.checks
        .iter()
        .filter(|c| !c.informational)
        .map(|c| format!("{} {:.2e} (≤ {:.0e})", c.name, c.max_residual, c.threshold))
        .collect::<Vec<_>>()
        .join(", ")
}

fn c1_deform() -> Verdict {
    let r = deform_suite(&SuiteOptions::default()).unwrap();
    verdict(r.passed(), suite_detail(&r))
}

fn c2_recurrences() -> Verdict {
    let r = recurrence_suite(&SuiteOptions::default()).unwrap();
    verdict(r.passed(), suite_detail(&r))
}

fn c3_symmetries() -> Verdict {
    let r = symmetry_suite(&SuiteOptions::default()).unwrap();
    verdict(r.passed(), suite_detail(&r))
}

const TOL: f64 = 1e-10;

fn c4_tacnode_limit() -> Verdict {
    let eps_tac = 0.5;
    let tuples = [
        (0, 0.0, 0, 0.0),
        (1, 0.0, 0, 0.0),
        (0, -0.5, 1, 0.5),
        (-1, 0.5, 0, 0.0),
        (2, 0.3, -1, -0.2),
    ];
    let params = TacnodeParams::new(eps_tac).unwrap().with_tol(TOL);
    let mut sup = Vec::new();
    for l in [8.0, 16.0, 32.0] {
        let mut worst: f64 = 0.0;
        for (x1, m1, x2, m2) in tuples {
            let (a, b) = (TacnodePoint::new(x1, m1), TacnodePoint::new(x2, m2));
            let lim = kernel_tacnode(&a, &b, &params).unwrap();
            let app = scaled_finite_for_tacnode(l, eps_tac, &a, &b, TOL).unwrap();
            worst = worst.max((app.value - lim.value).norm());
        }
        sup.push(worst);
    }
    verdict(
        strictly_decreasing(&sup) && sup[2] <= 0.05,
        format!("sup err L=8,16,32: {:.3e}, {:.3e}, {:.3e}", sup[0], sup[1], sup[2]),
    )
}

const GUE_TUPLES: [(i64, f64, i64, f64); 10] = [
    (1, 0.0, 0, 0.5),
    (0, -0.5, 2, 0.5),
    (3, -0.5, 0, 0.5),
    (2, 0.3, 1, -0.2),
    (0, 0.0, 1, 0.4),
    (-2, 0.0, -1, 0.5),
    (-1, -0.5, -3, 0.5),
    (-3, -0.5, -1, 0.5),
    (-2, 0.3, -1, -0.2),
    (-1, 0.0, -2, 0.4),
];

fn gue_errors(norm: ChiNormalization) -> Vec<[f64; 3]> {
    GUE_TUPLES
        .iter()
        .map(|&(x1, m1, x2, m2)| {
            let (a, b) = (GuePoint::new(x1, m1), GuePoint::new(x2, m2));
            let br = branch_of(&a, &b).unwrap();
            let lim = kernel_gue_limit(&a, &b, br, norm, TOL).unwrap();
            let mut e = [0.0; 3];
            for (i, eps) in [0.5, 0.25, 0.125].into_iter().enumerate() {
                let app = scaled_tacnode_for_gue(eps, &a, &b, br, TOL).unwrap();
                e[i] = (app.value - lim.value).norm();
            }
            e
        })
        .collect()
}

fn c5_gue_limit() -> Verdict {
    let fact = gue_errors(ChiNormalization::Factorial);
    let plain = gue_errors(ChiNormalization::Plain);
    let ok = fact.iter().all(|e| strictly_decreasing(e));
    let last = |v: &[[f64; 3]]| v.iter().map(|e| e[2]).fold(0.0, f64::max);
    let (lf, lp) = (last(&fact), last(&plain));
    let selected = if lf <= lp { "factorial" } else { "plain" };
    verdict(
        ok,
        format!(
            "10 tuples decreasing at ϵ=0.5,0.25,0.125; sup err at 0.125: factorial {lf:.3e}, plain {lp:.3e}; data selects {selected}"
        ),
    )
}

fn c6_pearcey_limit() -> Verdict {
    let tuples = [
        (0.0, 0.0, 0.0, 0.0),
        (0.0, 0.4, -1.0, 0.0),
        (-0.5, 0.2, 0.5, 0.6),
        (0.7, 0.1, 0.2, 0.1),
        (1.0, -0.3, 0.0, 0.2),
    ];
    let ms = [4.0, 8.0, 16.0];
    let (mut ok, mut worst_final, mut worst_rate) = (true, 0.0f64, 0.0f64);
    for (x1, n1, x2, n2) in tuples {
        let (a, b) = (PearceyPoint::new(x1, n1), PearceyPoint::new(x2, n2));
        let errs: Vec<f64> = ms
            .iter()
            .map(|&m| {
                let (app, ea, eb) = scaled_tacnode_for_pearcey(m, &a, &b, TOL).unwrap();
                let lim = kernel_pearcey(&ea, &eb, TOL).unwrap();
                (app.value - lim.value).norm()
            })
            .collect();
        ok &= strictly_decreasing(&errs);
        worst_final = worst_final.max(errs[2]);
        let scaled: Vec<f64> = errs.iter().zip(ms).map(|(e, m)| e * m.sqrt()).collect();
        let hi = scaled.iter().cloned().fold(0.0, f64::max);
        let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        worst_rate = worst_rate.max(hi / lo);
    }
    verdict(
        ok && worst_final <= 0.05 && worst_rate <= 4.0,
        format!(
            "5 tuples decreasing at M=4,8,16: {ok}; max final err {worst_final:.3e}; max spread of err·√M {worst_rate:.2}"
        ),
    )
}

fn c7_single_terms() -> Verdict {
    let mut worst_p: f64 = 0.0;
    for dnu in [0.1, 0.5, 2.0] {
        for dxi in [0.0, 0.7, -1.5] {
            let (a, b) = (PearceyPoint::new(0.2, -0.3), PearceyPoint::new(0.2 + dxi, -0.3 + dnu));
            let q = pearcey_single_quadrature(&a, &b, 1e-12).unwrap();
            worst_p = worst_p.max((q.value.re - pearcey_single_closed(&a, &b)).abs());
        }
    }
    let mut worst_b: f64 = 0.0;
    for k in [-5, -2, 0, 1, 5] {
        for a in [0.1, 1.0, 5.0] {
            let q = chi_term_quadrature(k, a, 1e-13).unwrap();
            worst_b = worst_b.max((q.value - C64::new(chi_term_bessel(k, a), 0.0)).norm());
        }
    }
    verdict(
        worst_p <= 1e-9 && worst_b <= 1e-9,
        format!("Pearcey single 9 pairs {worst_p:.2e}; Bessel 15 pairs {worst_b:.2e} (≤ 1e-9)"),
    )
}

fn c8_simulator() -> Verdict {
    let start = Instant::now();
    let cfg = SimConfig {
        levels: 6,
        eps: 0.3,
        t_end: 0.5,
        trials: 20_000,
        seed: 2024,
    };
    let pair = (GridPoint::new(-1, 2).unwrap(), GridPoint::new(3, 4).unwrap());
    let end = GridPoint::new(2, 3).unwrap();
    let targets = Targets {
        pairs: vec![pair],
        endpoints: vec![end],
    };
    let stats = simulate_statistics(&cfg, &targets).unwrap();
    let p = ModelParams::new(cfg.eps, cfg.t_end).unwrap();
    let k = |a: &GridPoint, b: &GridPoint| kernel_finite(a, b, &p, Scheme::Deformed, TOL);
    let sites: Vec<GridPoint> = init_config(6)
        .levels
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l.iter().map(move |&x2| GridPoint { m: i as u32 + 1, x2 }))
        .collect();
    let mut inside = 0;
    for s in &sites {
        let kv = k(s, s).unwrap();
        let e = stats.occupancy[s];
        if (e.freq() - kv.value.re).abs() <= 3.0 * (e.stderr() + kv.err) {
            inside += 1;
        }
    }
    let occ_ok = inside as f64 >= 0.95 * sites.len() as f64;

    let r2 = rho(&[pair.0, pair.1], k).unwrap();
    let ep = stats.pairs[0];
    let pair_z = (ep.freq() - r2.value).abs() / (ep.stderr() + r2.err);
    let re = endpoint_block_rho(&[end], &p, Scheme::Deformed, TOL).unwrap();
    let ee = stats.endpoints[0];
    let end_z = (ee.freq() - re.value).abs() / (ee.stderr() + re.err);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        occ_ok && pair_z <= 3.0 && end_z <= 3.0 && secs < 300.0,
        format!(
            "occupancy {inside}/{} sites within 3σ; pair {:.5} vs {:.5} ({pair_z:.2}σ); endpoint {:.5} vs {:.5} ({end_z:.2}σ); {secs:.1} s",
            sites.len(),
            ep.freq(),
            r2.value,
            ee.freq(),
            re.value
        ),
    )
}

fn c9_skellam() -> Verdict {
    let cfg = SimConfig {
        levels: 1,
        eps: 0.25,
        t_end: 2.0,
        trials: 100_000,
        seed: 99,
    };
    let n = cfg.trials as f64;
    let xs: Vec<f64> = (0..cfg.trials as u64)
        .map(|i| run_trial(&cfg, i).levels[0][0] as f64 / 2.0)
        .collect();
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // rates 1/ε right, ε left
    let (m, v) = (cfg.t_end * (1.0 / cfg.eps - cfg.eps), cfg.t_end * (1.0 / cfg.eps + cfg.eps));
    // every cumulant of even order equals v
    let mu4 = 3.0 * v * v + v;
    let (sm, sv) = ((v / n).sqrt(), ((mu4 - v * v) / n).sqrt());
    verdict(
        (mean - m).abs() <= 3.0 * sm && (var - v).abs() <= 3.0 * sv,
        format!("mean {mean:.4} vs {m} (σ {sm:.4}); variance {var:.4} vs {v} (σ {sv:.4})"),
    )
}

fn c10_macro_geometry() -> Verdict {
    let (eps, tau) = (0.5, 0.5);
    let mut ok = true;
    let mut notes = Vec::new();

    for e in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let (lo, hi) = cusp_points(e);
        ok &= lo == e + 1.0 / e - 2.0 && hi == e + 1.0 / e + 2.0;
    }
    let (lo, hi) = cusp_points(eps);
    let b_up = boundary_point(eps, tau, 1.0).unwrap();
    let b_dn = boundary_point(eps, tau, -1.0).unwrap();
    let cusp_err = (b_up.xi.abs() + b_dn.xi.abs())
        .max((b_up.mu.min(b_dn.mu) - lo).abs())
        .max((b_up.mu.max(b_dn.mu) - hi).abs());
    ok &= cusp_err <= 1e-9;
    notes.push(format!("cusps ({lo}, {hi}), curve at z=±1 off by {cusp_err:.1e}"));

    let cls = Classifier::new(eps, tau).unwrap();
    let mut worst_d: f64 = 0.0;
    for i in 0..10 {
        let mu = lo + (hi - lo) * (i as f64 + 0.5) / 10.0;
        let r = cls.saddle(0.0, mu).unwrap();
        let exact = density_xi0(eps, tau, mu).unwrap();
        ok &= r.region == Region::D1;
        worst_d = worst_d.max((r.density - exact).abs());
    }
    ok &= worst_d <= 1e-9;
    notes.push(format!("ξ=0 density {worst_d:.1e}"));

    let zs: Vec<f64> = (0..=240).map(|i| -6.0 + 0.05 * i as f64 + 0.0123).collect();
    let (pts, _) = boundary_curve(eps, tau, &zs);
    let mut worst_b: f64 = 0.0;
    for b in &pts {
        let p = MacroPoint::new(b.xi, b.mu, tau, eps).unwrap();
        let scale = 1.0 + tau + b.mu.abs() + b.xi.abs();
        let (_, f1, f2) = f_derivatives(C64::new(b.z_real, 0.0), &p).unwrap();
        worst_b = worst_b.max(f1.norm().max(f2.norm()) / scale);
    }
    ok &= !pts.is_empty() && worst_b <= 1e-9;
    notes.push(format!("{} boundary points, max |F'|,|F''|/scale {worst_b:.1e}", pts.len()));

    // density continuity across every crossing of three vertical lines
    let mut worst_c: f64 = 0.0;
    let mut crossings = 0;
    for xi in [0.3, 1.0, -1.7] {
        for c in cls.crossings(xi) {
            let below = cls.saddle(xi, (c.mu - 1e-3).max(0.0)).unwrap();
            let above = cls.saddle(xi, c.mu + 1e-3).unwrap();
            let (liquid, other) = match (below.region, above.region) {
                (Region::D1, r) if r != Region::D1 => (below, above),
                (r, Region::D1) if r != Region::D1 => (above, below),
                _ => {
                    ok = false;
                    continue;
                }
            };
            crossings += 1;
            worst_c = worst_c.max((liquid.density - other.density).abs());
        }
    }
    ok &= crossings > 0 && worst_c <= 0.02;
    notes.push(format!("{crossings} crossings, max density jump {worst_c:.3}"));
    verdict(ok, notes.join("; "))
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tacnode"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn c11_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    std::fs::write(
        d("targets.json"),
        r#"{"pairs": [[[-1, 2], [3, 4]]], "endpoints": [[2, 3]]}"#,
    )
    .unwrap();
    let runs: Vec<(&str, Vec<String>, Vec<&str>)> = vec![
        (
            "kernel",
            vec!["kernel", "--family", "finite", "--eps", "0.3", "--t", "0.5", "--args", "0,1,0,1;0.5,2,-0.5,4", "--out"]
                .into_iter()
                .map(String::from)
                .collect(),
            vec!["kernel.csv"],
        ),
        (
            "simulate",
            [
                "simulate", "--levels", "5", "--eps", "0.3", "--t", "0.5", "--trials", "3000",
                "--seed", "11", "--snapshot-trials", "3",
            ]
            .into_iter()
            .map(String::from)
            .chain(["--endpoints".into(), d("targets.json"), "--events-out".into(), d("events.csv"), "--snapshots".into(), d("snap.csv"), "--out".into()])
            .collect(),
            vec!["occupancy.csv", "events.csv", "snap.csv"],
        ),
        (
            "density-map",
            ["density-map", "--xi-steps", "21", "--mu-steps", "21", "--out"].into_iter().map(String::from).collect(),
            vec!["density.csv"],
        ),
        (
            "boundary",
            ["boundary", "--z-steps", "101", "--out"].into_iter().map(String::from).collect(),
            vec!["boundary.csv"],
        ),
        (
            "converge",
            ["converge", "--target", "tacnode", "--scales", "4,8", "--args", "0,0,1,0.5", "--out"]
                .into_iter()
                .map(String::from)
                .collect(),
            vec!["converge.csv"],
        ),
        (
            "verify",
            ["verify", "--suite", "symmetry", "--json"].into_iter().map(String::from).collect(),
            vec!["verify.json"],
        ),
    ];
    let mut ok = true;
    let mut failed = Vec::new();
    for (name, mut args, files) in runs {
        let primary = d(files[0]);
        args.push(primary);
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let argv: Vec<&str> = args.iter().map(String::as_str).collect();
            let out = cli(&argv);
            let mut bytes = out.stdout.clone();
            for f in &files {
                bytes.extend(std::fs::read(d(f)).unwrap_or_default());
                let _ = std::fs::remove_file(d(f));
            }
            outputs.push((out.status.code(), bytes));
        }
        let same = outputs[0] == outputs[1] && outputs[0].0 == Some(0) && !outputs[0].1.is_empty();
        if !same {
            failed.push(name);
        }
        ok &= same;
    }
    verdict(
        ok,
        if failed.is_empty() {
            "6 commands byte-identical across two runs".to_string()
        } else {
            format!("differing or failing: {failed:?}")
        },
    )
}

type Criterion = (u32, &'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "deformation equivalence", c1_deform),
        (2, "recurrence identities", c2_recurrences),
        (3, "symmetries", c3_symmetries),
        (4, "tacnode limit", c4_tacnode_limit),
        (5, "GUE limit", c5_gue_limit),
        (6, "Pearcey limit", c6_pearcey_limit),
        (7, "single-term closed forms", c7_single_terms),
        (8, "simulator vs kernel", c8_simulator),
        (9, "Skellam oracle", c9_skellam),
        (10, "macro geometry", c10_macro_geometry),
        (11, "CLI determinism", c11_determinism),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|_| verdict(false, "panicked"));
        let status = if v.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {n:>2} {name}: {status} [{:.1} s] {}",
            start.elapsed().as_secs_f64(),
            v.detail
        );
        if !v.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        println!("{failures} criterion/criteria failed");
        std::process::exit(1);
    }
}
