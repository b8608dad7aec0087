use std::path::{Path, PathBuf};
use std::process::Command;

use matlaw_core::{cost_j, BarMember, BoundaryProgram, MaxoutDensity, Reference, Specimen, reduced_neo_hookean};
use serde_json::{json, Value};

struct Sandbox {
    dir: tempfile::TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Sandbox { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn scenario(&self, name: &str, value: &Value) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, serde_json::to_string(value).unwrap()).unwrap();
        p
    }
}

fn run(cmd: &str, scenario: &Path, out: &Path, extra: &[&str]) -> (i32, String, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_matlaw-id"))
        .arg(cmd)
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap();
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stdout).into_owned(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

fn quadratic_bar(samples: usize) -> Value {
    json!({
        "schema_version": 1,
        "specimen": {"kind": "one_bar", "member": {"area": 1.0, "length": 1.0}},
        "model": {"kind": "quadratic", "modulus": 1.0},
        "stretch_domain": {"min": 0.5, "max": 2.0},
        "program": {"delta_min": 0.0, "delta_max": 1.0, "samples": samples}
    })
}

fn neo_hookean_two_bars() -> Value {
    json!({
        "schema_version": 1,
        "specimen": {"kind": "parallel_bars", "members": [{"area": 1.0, "length": 1.0}, {"area": 1.0, "length": 2.0}]},
        "model": {"kind": "neo_hookean", "mu": 1.0},
        "stretch_domain": {"min": 0.5, "max": 2.0}
    })
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn knots(doc: &Value) -> Vec<f64> {
    doc["result"]["knots"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect()
}

#[test]
fn simulate_quadratic_bar() {
    let sb = Sandbox::new();
    let sc = sb.scenario("q.json", &quadratic_bar(11));
    let out = sb.path("d.csv");
    let (code, stdout, _) = run("simulate", &sc, &out, &[]);
    assert_eq!(code, 0);
    assert!(stdout.contains("11 samples"));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "delta,energy");
    assert_eq!(lines.len(), 12);
    assert!(lines.contains(&"0.5,0.125"));

    let sc = sb.scenario("q2.json", &quadratic_bar(2));
    let (code, _, _) = run("simulate", &sc, &out, &[]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "delta,energy\n0,0\n1,0.5\n");
}

#[test]
fn empty_admissible_program_exits_3_without_output() {
    let sb = Sandbox::new();
    let mut sc = neo_hookean_two_bars();
    sc["stretch_domain"] = json!({"min": 1.2, "max": 1.3});
    let sc = sb.scenario("e.json", &sc);
    let out = sb.path("d.csv");
    let (code, _, stderr) = run("simulate", &sc, &out, &[]);
    assert_eq!(code, 3, "{stderr}");
    assert!(!out.exists());
}

#[test]
fn program_outside_the_domain_is_infeasible() {
    let sb = Sandbox::new();
    let mut sc = quadratic_bar(5);
    sc["program"]["delta_max"] = json!(1.5);
    let sc = sb.scenario("o.json", &sc);
    let (code, _, _) = run("simulate", &sc, &sb.path("d.csv"), &[]);
    assert_eq!(code, 3);
}

#[test]
fn bad_configuration_exits_2() {
    let sb = Sandbox::new();
    let out = sb.path("x");
    let bad = sb.path("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(run("simulate", &bad, &out, &[]).0, 2);
    let mut sc = quadratic_bar(5);
    sc["model"] = json!({"kind": "neo_hookean", "mu": -1.0});
    assert_eq!(run("simulate", &sb.scenario("m.json", &sc), &out, &[]).0, 2);
    let mut sc = quadratic_bar(5);
    sc["schema_version"] = json!(2);
    assert_eq!(run("simulate", &sb.scenario("v.json", &sc), &out, &[]).0, 2);
    assert_eq!(run("identify", &sb.scenario("n.json", &quadratic_bar(5)), &out, &[]).0, 2);
    assert!(!out.exists());
}

#[test]
fn identify_quadratic_bar_gives_uniform_knots() {
    let sb = Sandbox::new();
    let sc = sb.scenario("q.json", &quadratic_bar(11));
    let out = sb.path("r.json");
    let (code, _, stderr) = run("identify", &sc, &out, &["--neurons", "4"]);
    assert_eq!(code, 0, "{stderr}");
    let doc = read_json(&out);
    assert_eq!(doc["schema_version"], 1);
    for (k, want) in knots(&doc).iter().zip([0.0, 0.25, 0.5, 0.75, 1.0]) {
        assert!((k - want).abs() < 1e-8);
    }
    assert!((doc["cost"].as_f64().unwrap() - 1.0 / 128.0).abs() < 1e-10);

    let (code, _, _) = run("identify", &sc, &out, &["--neurons", "1"]);
    assert_eq!(code, 0);
    let doc = read_json(&out);
    assert_eq!(knots(&doc), vec![0.0, 1.0]);
    assert_eq!(doc["result"]["density"]["pieces"].as_array().unwrap().len(), 1);
}

#[test]
fn identify_round_trip_reproduces_cost() {
    let sb = Sandbox::new();
    let sc = sb.scenario("nh.json", &neo_hookean_two_bars());
    let out = sb.path("r.json");
    let (code, _, stderr) = run("identify", &sc, &out, &["--neurons", "4"]);
    assert_eq!(code, 0, "{stderr}");
    let doc = read_json(&out);
    assert_eq!(doc["result"]["knot_space"], "stretch");
    let density: MaxoutDensity = serde_json::from_value(doc["result"]["density"].clone()).unwrap();
    let program: BoundaryProgram = serde_json::from_value(doc["program"].clone()).unwrap();
    let specimen = Specimen::parallel_bars(vec![
        BarMember::new(1.0, 1.0).unwrap(),
        BarMember::new(1.0, 2.0).unwrap(),
    ])
    .unwrap();
    let w = reduced_neo_hookean(1.0).unwrap();
    let e0 = specimen.energy_profile(&w).unwrap();
    let again = cost_j(&specimen, &density, Reference::Continuum(&e0), &program).unwrap();
    let stored = doc["cost"].as_f64().unwrap();
    assert!((again.cost - stored).abs() <= 1e-12, "{} vs {stored}", again.cost);
}

#[test]
fn identify_is_deterministic() {
    let sb = Sandbox::new();
    let sc = sb.scenario("nh.json", &neo_hookean_two_bars());
    let (a, b) = (sb.path("a.json"), sb.path("b.json"));
    assert_eq!(run("identify", &sc, &a, &["--neurons", "5"]).0, 0);
    assert_eq!(run("identify", &sc, &b, &["--neurons", "5"]).0, 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn solver_failure_writes_partial() {
    let sb = Sandbox::new();
    let mut sc = neo_hookean_two_bars();
    sc["solver"] = json!({"max_iters": 2});
    let sc = sb.scenario("f.json", &sc);
    let out = sb.path("r.json");
    let (code, _, stderr) = run("identify", &sc, &out, &["--neurons", "4"]);
    assert_eq!(code, 4, "{stderr}");
    assert!(!out.exists());
    let partial = read_json(&sb.path("r.json.partial"));
    assert_eq!(partial["status"], "partial");
    assert_eq!(knots(&partial).len(), 5);
}

#[test]
fn identify_in_grid_mode_with_positions() {
    let sb = Sandbox::new();
    let mut sc = quadratic_bar(101);
    sc["program"] = json!({"position_min": 1.0, "position_max": 2.0, "samples": 101});
    let sc = sb.scenario("g.json", &sc);
    let out = sb.path("r.json");
    let (code, _, stderr) = run("identify", &sc, &out, &["--neurons", "2", "--mode", "grid"]);
    assert_eq!(code, 0, "{stderr}");
    let doc = read_json(&out);
    assert_eq!(doc["mode"], "grid");
    // the grid contains the interval midpoints 0.25 and 0.75
    assert!((doc["cost"].as_f64().unwrap() - 1.0 / 32.0).abs() < 1e-10);
}

fn csv_rows(p: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn convergence_tables() {
    let sb = Sandbox::new();
    let sc = sb.scenario("q.json", &quadratic_bar(11));
    let out = sb.path("c.csv");
    let (code, _, stderr) = run("convergence", &sc, &out, &["--neurons-list", "2,3,4,5"]);
    assert_eq!(code, 0, "{stderr}");
    let header = std::fs::read_to_string(&out).unwrap();
    assert!(header.starts_with("N,cost_optimal,cost_interpolant,bound_lipschitz,bound_c2\n"));
    for row in csv_rows(&out) {
        let n = row[0];
        assert!((row[1] - 1.0 / (8.0 * n * n)).abs() < 1e-10);
    }
    let (code, _, _) = run("convergence", &sc, &out, &["--neurons", "3"]);
    assert_eq!(code, 0);
    assert_eq!(csv_rows(&out).len(), 1);

    let sc = sb.scenario("nh.json", &neo_hookean_two_bars());
    let (code, _, _) = run("convergence", &sc, &out, &["--neurons-list", "2,4,8,16,32"]);
    assert_eq!(code, 0);
    let rows = csv_rows(&out);
    let last_ratio = rows[4][1] / rows[3][1];
    assert!((last_ratio - 0.25).abs() < 0.02, "{last_ratio}");
    let json_out = sb.path("c.json");
    assert_eq!(run("convergence", &sc, &json_out, &["--neurons-list", "2,4"]).0, 0);
    assert_eq!(read_json(&json_out)["records"].as_array().unwrap().len(), 2);
}

#[test]
fn diagnose_defaults_pass() {
    let sb = Sandbox::new();
    let sc = sb.scenario("q.json", &quadratic_bar(11));
    let out = sb.path("g.json");
    let (code, stdout, stderr) = run("diagnose", &sc, &out, &[]);
    assert_eq!(code, 0, "{stdout}{stderr}");
    let doc = read_json(&out);
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["reports"].as_array().unwrap().len(), 5);
}

#[test]
fn diagnose_with_injected_infeasible_density() {
    let sb = Sandbox::new();
    let mut sc = neo_hookean_two_bars();
    sc["diagnostics"] = json!({"checks": ["monotonicity", "lipschitz_in_u"], "inject_infeasible": true});
    let sc = sb.scenario("i.json", &sc);
    let out = sb.path("g.json");
    let (code, _, stderr) = run("diagnose", &sc, &out, &[]);
    assert_eq!(code, 0, "{stderr}");
    let doc = read_json(&out);
    let mono = &doc["reports"][0];
    assert_eq!(mono["passed"], true);
    assert_eq!(mono["witnesses"][0]["measured"], json!(["inf", "inf"]));
    assert!(!mono["notes"].as_array().unwrap().is_empty());
    assert_eq!(doc["reports"][1]["passed"], true);
    assert!(!doc["notes"].as_array().unwrap().is_empty());
}

#[test]
fn diagnose_separating_records_decay() {
    let sb = Sandbox::new();
    let mut sc = neo_hookean_two_bars();
    sc["diagnostics"] = json!({"checks": ["separating_defect"], "separating_power": 2.0});
    let sc = sb.scenario("s.json", &sc);
    let out = sb.path("g.json");
    assert_eq!(run("diagnose", &sc, &out, &[]).0, 0);
    let doc = read_json(&out);
    for w in doc["reports"][0]["witnesses"].as_array().unwrap() {
        let ratio = w["measured"][0].as_f64().unwrap();
        assert!((ratio - 0.5).abs() < 1e-12);
    }
}

#[test]
fn diagnose_unknown_check_exits_2() {
    let sb = Sandbox::new();
    let mut sc = quadratic_bar(11);
    sc["diagnostics"] = json!({"checks": ["no_such_check"]});
    let out = sb.path("g.json");
    assert_eq!(run("diagnose", &sb.scenario("u.json", &sc), &out, &[]).0, 2);
    assert!(!out.exists());
}
