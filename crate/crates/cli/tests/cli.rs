use std::fs;
use std::path::Path;
use std::process::Command;

const COARSE: &str = "\
[geometry]
resolution = 12

[axial]
n_slot = 2
n_overhang = 2

[outputs]
probe_samples = 11
";

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_quasitherm"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, name: &str, extra: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, format!("{COARSE}{extra}")).unwrap();
    path.to_str().unwrap().to_string()
}

fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|t| t.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {line}"))
        .parse()
        .unwrap()
}

#[test]
fn mesh_default_fill_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let (code, stdout, stderr) = run(&["mesh", "--out", a.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let fill = field(stdout.lines().next().unwrap(), "fill_factor");
    assert!((0.578..=0.602).contains(&fill), "{fill}");
    assert_eq!(run(&["mesh", "--out", b.to_str().unwrap()]).0, 0);
    assert_eq!(
        fs::read(a.join("mesh.txt")).unwrap(),
        fs::read(b.join("mesh.txt")).unwrap()
    );
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "mesh");
    assert_eq!(meta["mesh_hash"].as_str().unwrap().len(), 64);
    assert_eq!(meta["config"]["materials"]["current_density"], "10 A/mm2");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[materials]\nlambda_copper = 400\n").unwrap();
    let (code, _, stderr) = run(&[
        "mesh",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(stderr.contains("lambda_copper"), "{stderr}");

    let missing = dir.path().join("nope.toml");
    let (code, _, _) = run(&["solve", "--config", missing.to_str().unwrap()]);
    assert_eq!(code, 2);

    let (code, _, _) = run(&["frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn solve_default_creates_outputs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/run");
    let (code, stdout, stderr) = run(&["solve", "--out", out.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(code, 0, "{stderr}");
    let summary = stdout.lines().next().unwrap();
    assert!(field(summary, "energy_mismatch") <= 1e-6, "{summary}");
    assert!(field(summary, "iterations") > 0.0);
    let location = stdout.lines().nth(1).unwrap();
    assert!(
        location.contains("(slot)") && location.contains("cooled overhang surface"),
        "{location}"
    );
    for f in [
        "probes.csv",
        "metadata.json",
        "section_000.00mm.vtk",
        "section_083.30mm.vtk",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(out.join("probes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 102);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["solver"]["method"], "cg_tensor");
    assert_eq!(meta["threads"], 1);
}

#[test]
fn loose_tolerance_changes_the_peak_little() {
    let dir = tempfile::tempdir().unwrap();
    let peak = |tol: &str| {
        let cfg = write_config(
            dir.path(),
            &format!("t{tol}.toml"),
            &format!("\n[solver]\ntol = {tol}\n"),
        );
        let (code, stdout, stderr) = run(&[
            "solve",
            "--config",
            &cfg,
            "--out",
            dir.path().join(tol).to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{stderr}");
        field(stdout.lines().next().unwrap(), "theta_max")
    };
    let (tight, loose) = (peak("1e-10"), peak("1e-4"));
    assert!((tight - loose).abs() <= 1e-3, "{tight} {loose}");
}

#[test]
fn solver_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "\n[solver]\nmethod = \"cg_jacobi\"\nmax_iter = 2\n",
    );
    let (code, _, stderr) = run(&[
        "solve",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("solve:"), "{stderr}");
}

fn sweep_column(stdout: &str, col: usize) -> Vec<f64> {
    stdout
        .lines()
        .skip(1)
        .take_while(|l| !l.starts_with("sweep:"))
        .map(|l| l.split_whitespace().nth(col).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn sweeps_are_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "");
    let out = dir.path().to_str().unwrap();
    let (code, stdout, stderr) = run(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        out,
        "--parameter",
        "J",
        "--values",
        "10,20,30,40",
        "--unit",
        "A/mm2",
    ]);
    assert_eq!(code, 0, "{stderr}");
    let max = sweep_column(&stdout, 1);
    assert_eq!(max.len(), 4);
    assert!(max.windows(2).all(|w| w[1] > w[0]), "{max:?}");
    assert!(fs::read_to_string(dir.path().join("sweep.csv"))
        .unwrap()
        .starts_with("current_density,"));

    let (code, stdout, stderr) = run(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        out,
        "--parameter",
        "h_spray",
        "--values",
        "0.25,5,22.5",
        "--unit",
        "kW/Km2",
    ]);
    assert_eq!(code, 0, "{stderr}");
    let max = sweep_column(&stdout, 1);
    assert!(max.windows(2).all(|w| w[1] < w[0]), "{max:?}");
}

#[test]
fn sweep_from_config_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.toml",
        "\n[sweep]\nparameter = \"J\"\nvalues = [\"10 A/mm2\", \"20 A/mm2\"]\n",
    );
    let (code, stdout, stderr) = run(&["sweep", "--config", &cfg, "--out", out]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(sweep_column(&stdout, 1).len(), 2);

    let plain = write_config(dir.path(), "p.toml", "");
    assert_eq!(
        run(&[
            "sweep",
            "--config",
            &plain,
            "--out",
            out,
            "--parameter",
            "J"
        ])
        .0,
        2
    );
    assert_eq!(run(&["sweep", "--config", &plain, "--out", out]).0, 2);
    assert_eq!(
        run(&[
            "sweep",
            "--config",
            &plain,
            "--out",
            out,
            "--parameter",
            "speed",
            "--values",
            "1"
        ])
        .0,
        2
    );
    assert_eq!(
        run(&[
            "sweep",
            "--config",
            &plain,
            "--out",
            out,
            "--parameter",
            "J",
            "--values",
            "10 mm"
        ])
        .0,
        2
    );
}

#[test]
fn spray_classification_of_reference_impacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for (we, re, delta, regime) in [
        ("78", "300", "0.33", "below_threshold_deposition"),
        ("700", "900", "0.33", "below_threshold_deposition"),
        ("1224", "604", "0.04", "splash"),
    ] {
        let (code, stdout, stderr) = run(&[
            "spray-classify",
            "--out",
            out,
            "--we",
            we,
            "--re",
            re,
            "--delta",
            delta,
        ]);
        assert_eq!(code, 0, "{stderr}");
        assert!(stdout.contains(&format!("regime={regime} ")), "{stdout}");
    }
    let (code, stdout, _) = run(&["spray-classify", "--out", out]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("We="), "{stdout}");
}

#[test]
fn validate_subset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, stdout, stderr) = run(&[
        "validate",
        "--out",
        out,
        "--check",
        "joule_loss",
        "--check",
        "patch_test",
        "--check",
        "fin_balance",
    ]);
    assert_eq!(code, 0, "{stderr}");
    let lines: Vec<&str> = stdout.lines().take(3).collect();
    assert!(lines[0].starts_with("fin_balance: pass "), "{stdout}");
    assert!(
        lines.iter().all(|l| l.split_whitespace().count() >= 4),
        "{stdout}"
    );
    assert!(stdout.contains("all checks passed"));
    let (code, _, stderr) = run(&["validate", "--out", out, "--check", "nope"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("nope"));
}
