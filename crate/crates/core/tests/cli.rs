use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tacnode::macro_geometry::{cusp_points, density_xi0};

fn tacnode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tacnode"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn stdout(o: &Output) -> String {
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Same arguments and header as the pinned file, values within `tol`.
fn assert_matches_golden(out: &str, name: &str, tol: f64) -> Vec<Vec<String>> {
    let pinned = fs::read_to_string(golden(name)).unwrap();
    assert_eq!(out.lines().next(), pinned.lines().next());
    let (a, b) = (rows(out), rows(&pinned));
    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.iter().zip(&b) {
        assert_eq!(ra[..5], rb[..5]);
        for c in 5..7 {
            assert!((num(&ra[c]) - num(&rb[c])).abs() <= tol, "{ra:?} vs {rb:?}");
        }
    }
    a
}

#[test]
fn golden_finite_at_time_zero_is_the_packed_indicator() {
    let out = stdout(&tacnode(&[
        "kernel", "--family", "finite", "--eps", "0.3", "--t", "0", "--args",
        "0,1,0,1;2,1,2,1;-0.5,2,-0.5,2;1.5,2,1.5,2;1,3,1,3;-1,5,-1,5;3,5,3,5",
    ]));
    let r = assert_matches_golden(&out, "kernel_finite_t0.csv", 1e-12);
    // packed sites satisfy |x| ≤ (m-1)/2
    for row in r {
        let (x, m) = (num(&row[1]), num(&row[2]));
        let packed = if x.abs() <= (m - 1.0) / 2.0 { 1.0 } else { 0.0 };
        assert!((num(&row[5]) - packed).abs() < 1e-12, "{row:?}");
    }
}

#[test]
fn golden_pearcey_is_reflection_symmetric() {
    let out = stdout(&tacnode(&[
        "kernel", "--family", "pearcey", "--args",
        "0.3,0.1,-0.4,0.5;-0.3,0.1,0.4,0.5;0.5,0.2,0.1,-0.3;-0.5,0.2,-0.1,-0.3",
    ]));
    let r = assert_matches_golden(&out, "kernel_pearcey.csv", 1e-11);
    for pair in r.chunks(2) {
        assert!((num(&pair[0][5]) - num(&pair[1][5])).abs() < 1e-11);
    }
}

#[test]
fn golden_tacnode_satisfies_both_symmetries() {
    let out = stdout(&tacnode(&[
        "kernel", "--family", "tacnode", "--eps-tac", "0.5", "--args",
        "-2,0.3,-1,0.7;1,0.3,0,0.7;0,0.4,0,0.4;0,-0.4,0,-0.4",
    ]));
    let r = assert_matches_golden(&out, "kernel_tacnode.csv", 1e-11);
    let v: Vec<f64> = r.iter().map(|row| num(&row[5])).collect();
    assert!((v[0] - v[1]).abs() < 1e-11);
    assert!((v[2] + v[3] - 1.0).abs() < 1e-11);
}

#[test]
fn help_and_exit_codes() {
    let h = tacnode(&["--help"]);
    assert_eq!(h.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&h.stdout).contains("Usage"));
    let kh = tacnode(&["kernel", "--help"]);
    assert_eq!(kh.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&kh.stdout).contains("--family"));

    let bad = [
        vec!["kernel", "--family", "bogus", "--args", "0,0,0,0"],
        vec!["kernel", "--family", "finite", "--eps", "0.3", "--t", "0.5", "--args", "0,2,0,1"],
        vec!["kernel", "--family", "tacnode", "--args", "0,0,0,0"],
        vec!["converge", "--target", "tacnode", "--scales", "", "--args", "0,0,0,0"],
        vec!["converge", "--target", "gue", "--scales", "0.5", "--args", "1,0,-1,0.5"],
        vec!["simulate", "--levels", "0", "--eps", "0.3", "--t", "1"],
        vec!["simulate", "--levels", "3", "--eps", "1.5", "--t", "1"],
        vec!["verify", "--suite", "nope"],
        vec!["density-map", "--mu-min", "-1"],
        vec!["frobnicate"],
    ];
    for args in bad {
        let o = tacnode(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn verify_threshold_override_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let ok = tacnode(&["verify", "--suite", "symmetry", "--json", json.to_str().unwrap()]);
    let text = stdout(&ok);
    assert!(text.contains("reflection") && text.contains("PASS"));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["passed"], true);
    let checks = doc["suites"][0]["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["max_residual"].as_f64().unwrap() < 1e-8));

    let strict = tacnode(&["verify", "--suite", "symmetry", "--threshold", "1e-30"]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&strict.stdout).contains("FAIL"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"schema": 1, "kernel": {"family": "tacnode", "eps_tac": 0.5, "args": "0,0.4,0,0.4"}}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let from_config = stdout(&tacnode(&["--config", c, "kernel"]));
    assert!((num(&rows(&from_config)[0][5]) - 0.62435477790832605).abs() < 1e-11);

    let overridden = stdout(&tacnode(&["--config", c, "kernel", "--args", "0,-0.4,0,-0.4"]));
    assert!((num(&rows(&overridden)[0][5]) - 0.37564522209167417).abs() < 1e-11);

    fs::write(&cfg, r#"{"schema": 2, "kernel": {}}"#).unwrap();
    assert_eq!(tacnode(&["--config", c, "kernel"]).status.code(), Some(2));
    fs::write(&cfg, r#"{"schema": 1, "kernel": {"famliy": "gue"}}"#).unwrap();
    assert_eq!(tacnode(&["--config", c, "kernel"]).status.code(), Some(2));
}

#[test]
fn simulate_at_time_zero_gives_the_packed_start() {
    let out = stdout(&tacnode(&[
        "simulate", "--levels", "4", "--eps", "0.4", "--t", "0", "--trials", "50", "--seed", "3",
    ]));
    assert_eq!(out.lines().next(), Some("m,x2,freq,stderr,trials"));
    let r = rows(&out);
    assert_eq!(r.len(), 10);
    for row in r {
        assert_eq!((row[2].as_str(), row[3].as_str(), row[4].as_str()), ("1", "0", "50"));
    }
}

#[test]
fn simulate_events_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    fs::write(p("t.json"), r#"{"pairs": [[[-1, 2], [3, 4]]], "endpoints": [[2, 3]]}"#).unwrap();
    let o = tacnode(&[
        "simulate", "--levels", "5", "--eps", "0.3", "--t", "0.5", "--trials", "400", "--seed",
        "1", "--endpoints", &p("t.json"), "--events-out", &p("ev.csv"), "--snapshots",
        &p("snap.csv"), "--snapshot-trials", "2", "--out", &p("occ.csv"),
    ]);
    stdout(&o);
    let ev = fs::read_to_string(p("ev.csv")).unwrap();
    assert_eq!(ev.lines().next(), Some("kind,x2_a,m_a,x2_b,m_b,freq,stderr,trials"));
    let r = rows(&ev);
    assert_eq!(r[0][..5], ["pair", "-1", "2", "3", "4"]);
    assert_eq!(r[1][..5], ["endpoint", "2", "3", "2", "5"]);
    let snap = fs::read_to_string(p("snap.csv")).unwrap();
    assert_eq!(snap.lines().next(), Some("trial,m,x2"));
    // 15 particles per trial
    assert_eq!(rows(&snap).len(), 30);

    fs::write(p("t.json"), r#"{"endpoints": [[1, 4]]}"#).unwrap();
    let even = tacnode(&[
        "simulate", "--levels", "6", "--eps", "0.3", "--t", "0.5", "--endpoints", &p("t.json"),
        "--events-out", &p("ev.csv"),
    ]);
    assert_eq!(even.status.code(), Some(2));
}

#[test]
fn density_map_cusps_and_closed_form() {
    // grid step 0.125 in μ hits both cusps of ε = 0.5 exactly
    let out = stdout(&tacnode(&[
        "density-map", "--eps", "0.5", "--xi-min", "-1", "--xi-max", "1", "--xi-steps", "5",
        "--mu-min", "0", "--mu-max", "6", "--mu-steps", "49",
    ]));
    assert_eq!(out.lines().next(), Some("xi,mu,region,density"));
    let (lo, hi) = cusp_points(0.5);
    let r = rows(&out);
    let mut seen = [false, false];
    for row in &r {
        let (xi, mu, d) = (num(&row[0]), num(&row[1]), num(&row[3]));
        assert!((0.0..=1.0).contains(&d));
        assert!(["D1", "D2", "out"].contains(&row[2].as_str()));
        if xi == 0.0 {
            seen[0] |= mu == lo;
            seen[1] |= mu == hi;
            if mu > lo && mu < hi {
                assert_eq!(row[2], "D1");
                assert!((d - density_xi0(0.5, 0.5, mu).unwrap()).abs() < 1e-9);
            }
            if mu > hi {
                assert_eq!(row[2], "D2");
            }
            if mu < lo {
                assert_eq!(row[2], "out");
            }
        }
    }
    assert_eq!(seen, [true, true]);
}

#[test]
fn boundary_passes_through_the_cusps() {
    let out = stdout(&tacnode(&[
        "boundary", "--eps", "0.5", "--z-min", "-3", "--z-max", "3", "--z-steps", "25",
    ]));
    assert_eq!(out.lines().next(), Some("z,xi,mu"));
    let (lo, hi) = cusp_points(0.5);
    let r = rows(&out);
    let at = |z: f64| r.iter().find(|row| num(&row[0]) == z).unwrap().clone();
    let (up, down) = (at(1.0), at(-1.0));
    assert!(num(&up[1]).abs() < 1e-12 && num(&down[1]).abs() < 1e-12);
    let mut mus = [num(&up[2]), num(&down[2])];
    mus.sort_by(f64::total_cmp);
    assert!((mus[0] - lo).abs() < 1e-12 && (mus[1] - hi).abs() < 1e-12);
    assert!(r.iter().all(|row| num(&row[2]) >= 0.0));
}

#[test]
fn converge_schema_and_decrease() {
    let out = stdout(&tacnode(&[
        "converge", "--target", "tacnode", "--scales", "8,16", "--args", "1,0,0,0;0,-0.5,1,0.5",
    ]));
    assert_eq!(
        out.lines().next(),
        Some("scale,x1,mu1_or_nu1,x2,mu2_or_nu2,approx_re,approx_im,limit_re,limit_im,abs_err")
    );
    let r = rows(&out);
    assert_eq!(r.len(), 4);
    for pair in r.chunks(2) {
        assert!(num(&pair[1][9]) < num(&pair[0][9]));
    }
    let near = stdout(&tacnode(&[
        "converge", "--target", "nearby-sections", "--scales", "4,8", "--args", "0,0,0,0", "--dm",
        "2",
    ]));
    assert_eq!(rows(&near).len(), 2);
}
