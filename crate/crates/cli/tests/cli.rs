use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_schmidt-energetics"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

/// Header and columns of a CSV written by the tool.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for l in lines {
        for (c, x) in l.split(',').enumerate() {
            cols[c].push(x.parse::<f64>().unwrap());
        }
    }
    (header, cols)
}

fn column<'a>(csv: &'a (Vec<String>, Vec<Vec<f64>>), name: &str) -> &'a [f64] {
    let i = csv.0.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    &csv.1[i]
}

#[test]
fn reference_run_writes_conserved_energy_and_zero_bare_work() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["run", "--preset", "two-qubit-paper", "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let e = read_csv(&out.join("energies.csv"));
    let u0 = column(&e, "U0");
    assert_eq!(u0.len(), 10001);
    assert!(u0.iter().all(|u| (u + 0.3).abs() <= 1e-9));
    let f = read_csv(&out.join("fluxes_bare-alicki.csv"));
    for c in ["W_1", "W_2", "dW_1", "dW_2"] {
        assert!(column(&f, c).iter().all(|w| *w == 0.0), "{c}");
    }
    for name in ["entropy.csv", "spectrum.csv", "residuals.csv", "schmidt.csv", "flags.json", "metadata.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["system"], "two-qubit-reference");
    assert_eq!(meta["sec"]["is_sec"], false);
    assert_eq!(meta["grid"]["steps"], 10001);
}

#[test]
fn csv_preamble_labels_every_column() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"system":{"preset":"two-qubit-paper"},"grid":{"t1":0.5,"dt":0.01},"outputs":["fluxes"]}"#);
    let out = tmp.path().join("o");
    assert!(run(&["run", "-q", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let text = fs::read_to_string(out.join("fluxes_eff-alicki.csv")).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    for name in header.split(',') {
        let tag = format!("# column {name}: ");
        let row = text.lines().find(|l| l.starts_with(&tag)).unwrap_or_else(|| panic!("{name} unlabeled"));
        if name != "t" {
            assert!(row.contains("[eff-alicki]"), "{row}");
        }
    }
    assert!(text.starts_with("# system: two-qubit-reference\n"));
    assert!(!out.join("energies.csv").exists());
}

#[test]
fn resonant_exchange_is_strictly_conserving() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = run(&["run", "-q", "--preset", "resonant-exchange", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["sec"]["is_sec"], true);
    let e = read_csv(&out.join("energies.csv"));
    let hint = column(&e, "interaction");
    assert!(hint.iter().all(|x| (x - hint[0]).abs() <= 1e-9));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"system":{"preset":"two-qubit-paper"},"initial":{"thermal":{"beta":1.0}},"grid":{"t1":1,"dt":0.005}}"#,
    );
    let dirs = ["a", "b"].map(|d| tmp.path().join(d));
    for d in &dirs {
        let o = run(&["run", "-q", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap(), "--workers", "3"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut files: Vec<PathBuf> = Vec::new();
    let mut stack = vec![dirs[0].clone()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p);
            }
        }
    }
    assert!(files.iter().any(|p| p.ends_with("branch_3/schmidt.csv")));
    for f in files {
        let rel = f.strip_prefix(&dirs[0]).unwrap();
        assert_eq!(fs::read(&f).unwrap(), fs::read(dirs[1].join(rel)).unwrap(), "{}", rel.display());
    }
}

#[test]
fn validate_passes_on_the_reference_grid_and_fails_when_coarse() {
    let o = run(&["validate", "--preset", "two-qubit-paper"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains(" 0 failed"));

    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"system":{"preset":"two-qubit-paper"},"grid":{"t1":10,"dt":0.1}}"#);
    let out = tmp.path().join("o");
    let o = run(&["validate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL  energy/additivity"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("validation.json")).unwrap()).unwrap();
    assert!(report["failed"].as_u64().unwrap() > 0);
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len() as u64, report["passed"].as_u64().unwrap() + report["failed"].as_u64().unwrap());
}

#[test]
fn validate_decoupled_system() {
    let tmp = tempfile::tempdir().unwrap();
    let z = "[[0,0],[0,0],[0,0],[0,0]]";
    let json = format!(
        r#"{{"system":{{"h1":[[[0.5,0],[0,0]],[[0,0],[-0.5,0]]],"h2":[[[0,0],[0,-2.5]],[[0,2.5],[0,0]]],"hint":[{z},{z},{z},{z}]}},
            "initial":{{"product":{{"first":[[1,0],[2,0]],"second":[[1,0],[0,3]]}}}},"grid":{{"t1":5,"dt":0.001}}}}"#
    );
    let cfg = write_config(tmp.path(), "c.json", &json);
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("PASS  decoupled/effective_equals_bare_1"));
    assert!(text.contains("PASS  decoupled/effective_equals_bare_2"));
}

#[test]
fn config_errors_exit_2_with_a_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"system":{"preset":"two-qubit-paper"},"grid":{"t1":1,"dt":0.01,"tt":1}}"#, "grid.tt"),
        (r#"{"system":{"preset":"two-qubit-paper"},"grid":{"t1":1,"dt":0}}"#, "grid.dt"),
        (r#"{"system":{"preset":"two-qubit-paper"},"grid":{"t0":2,"t1":1,"dt":0.01}}"#, "grid.t1"),
        (r#"{"system":{"preset":"nope"},"grid":{"t1":1,"dt":0.01}}"#, "system.preset"),
        (r#"{"system":{"preset":"two-qubit-paper"},"grid":{"t1":1,"dt":0.01},"gauge":{"policy":"linear-shift"}}"#, "gauge.alpha"),
        (r#"{"system":{"preset":"two-qubit-paper"},"grid":{"t1":1,"dt":0.01},"initial":{"ket":[[1,0],[1,0],[0,0],[0,0]]}}"#, "initial.ket"),
        (r#"{"system":{"preset":"two-qubit-paper"},"grid":{"t1":1,"dt":0.01},"initial":{"thermal":{"beta":-1}}}"#, "initial.thermal.beta"),
    ];
    for (i, (json, path)) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("c{i}.json"), json);
        let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(o.status.code(), Some(2), "{json}: {err}");
        assert!(err.contains(&format!("`{path}`")), "{json}: {err}");
    }
    assert_eq!(run(&["run"]).status.code(), Some(2));
    assert_eq!(run(&["run", "--config", "/definitely/missing.json"]).status.code(), Some(2));
}

#[test]
fn flags_escalate_to_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    // The coarse grid leaves large anti-Hermitian residuals: warnings, no errors.
    let base = r#"{"system":{"preset":"two-qubit-paper"},"grid":{"t1":10,"dt":0.2},"fail_on_flags":"#;
    let warn = write_config(tmp.path(), "w.json", &format!("{base}\"warning\"}}"));
    let err = write_config(tmp.path(), "e.json", &format!("{base}\"error\"}}"));
    let out = tmp.path().join("o");
    assert_eq!(run(&["run", "-q", "--config", warn.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(), Some(4));
    let flags: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("flags.json")).unwrap()).unwrap();
    let flags = flags.as_array().unwrap();
    assert!(!flags.is_empty());
    assert!(flags.iter().all(|f| f["severity"] == "warning"));
    assert_eq!(run(&["run", "-q", "--config", err.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"system":{"preset":"two-qubit-paper"},"grid":{"t1":2,"dt":0.001},"outputs":["energies"]}"#);
    let out = tmp.path().join("s");
    let o = run(&["sweep", "-q", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--values", "1.3,0.5,0", "--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_csv(&out.join("sweep.csv"));
    assert_eq!(column(&s, "g"), &[1.3, 0.5, 0.0]);
    let d1 = column(&s, "max_deviation_1");
    assert!(d1[0] > d1[1] && d1[1] > d1[2]);
    assert!(d1[2] <= 1e-6);
    for g in ["g_1.3", "g_0.5", "g_0"] {
        assert!(out.join(g).join("energies.csv").exists(), "{g}");
    }
    let o = run(&["sweep", "--preset", "two-qubit-paper", "--parameter", "omega2", "--values", "1"]);
    assert_eq!(o.status.code(), Some(2));
}
