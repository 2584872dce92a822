use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dipcoal(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dipcoal"))
        .args(args)
        .env("DIPCOAL_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn same_seed_same_bytes_any_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"model":{"model":"random_fitness","n_pop":200,"fitness":{"law":"pareto","alpha":1.5,"x_min":1.0}},
            "n":5,"replicates":300,"seed":17}"#,
    );
    let mut outs = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out = tmp.path().join(format!("o{i}"));
        let r = dipcoal(&["simulate-forward", "--config", &cfg, "--out", out.to_str().unwrap()], threads);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        outs.push(read_dir_bytes(&out));
    }
    assert_eq!(outs[0], outs[1]);
    assert!(outs[0].iter().any(|(n, _)| n == "events.csv"));
}

#[test]
fn every_csv_has_header_and_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let r = dipcoal(
        &["rates", "--measure", "beta:k=4:alpha=1.5", "--seed", "3", "--out", out.to_str().unwrap(), "--quadrature"],
        "1",
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    for (name, bytes) in read_dir_bytes(&out) {
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("spec,") || lines[0].starts_with("measure,"), "{name}");
        assert_eq!(lines[lines.len() - 2], "# seed=3");
        assert!(lines[lines.len() - 1].starts_with("# version="));
    }
}

#[test]
fn invalid_alpha_exits_2_naming_domain() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"seed":1,"model":{"model":"random_fitness","n_pop":100,"fitness":{"law":"pareto","alpha":2.0,"x_min":1.0}}}"#,
    );
    let r = dipcoal(&["estimate-cn", "--config", &cfg, "--reps", "100"], "1");
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("model.fitness.alpha") && err.contains("(1,2)"), "{err}");

    let r = dipcoal(&["rates", "--measure", "beta:k=2:alpha=2.0", "--seed", "1"], "1");
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("(1,2)"));
}

#[test]
fn missing_seed_is_a_config_error() {
    let r = dipcoal(&["rates", "--measure", "kingman"], "1");
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("seed"));
}

#[test]
fn recipe_wf_kingman_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let r = dipcoal(&["recipe", "wf-kingman", "--seed", "5", "--out", out.to_str().unwrap()], "1");
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stdout));
    let verdicts: serde_json::Value = serde_json::from_slice(&fs::read(out.join("verdicts.json")).unwrap()).unwrap();
    let arr = verdicts.as_array().unwrap();
    assert_eq!(arr.len(), 3);
    for v in arr {
        assert_eq!(v["pass"], true);
        assert_eq!(v["seed"], 5);
        assert!(v.get("test").is_some() && v.get("statistic").is_some() && v.get("threshold").is_some());
    }
}

#[test]
fn failing_checks_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"model":{"model":"wright_fisher","n_pop":50},"measure":"beta:k=4:alpha=1.1","n":6,"replicates":2000,"seed":9}"#,
    );
    let out = tmp.path().join("o");
    let r = dipcoal(&["compare", "--config", &cfg, "--out", out.to_str().unwrap()], "1");
    assert_eq!(r.status.code(), Some(1), "{}", String::from_utf8_lossy(&r.stdout));
    assert!(out.join("verdicts.json").exists());
}

#[test]
fn compare_matching_limit_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"model":{"model":"wright_fisher","n_pop":300},"measure":"kingman","n":4,"replicates":2000,"seed":10}"#,
    );
    let out = tmp.path().join("o");
    let r = dipcoal(&["compare", "--config", &cfg, "--out", out.to_str().unwrap()], "1");
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stdout));
}

#[test]
fn mohle_and_estimate_cn_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"model":{"model":"fixed_couples","n_couples":50},"n":2,"n_grid":[100,200],"replicates":2000,"seed":4}"#,
    );
    let out = tmp.path().join("o");
    let r = dipcoal(&["mohle", "--config", &cfg, "--out", out.to_str().unwrap()], "1");
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("generator.csv").exists());
    let r = dipcoal(&["estimate-cn", "--config", &cfg, "--out", out.to_str().unwrap()], "1");
    assert!(r.status.success());
    let text = fs::read_to_string(out.join("cn.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 + 2);
}

#[test]
fn recipe_list_names_all() {
    let r = dipcoal(&["recipe", "--list"], "1");
    assert!(r.status.success());
    let s = String::from_utf8_lossy(&r.stdout);
    assert!(s.contains("wf-kingman") && s.contains("four-group"));
}
