use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rectilens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rectilens")).args(args).output().expect("run rectilens")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn count_files(dir: &Path, suffix: &str) -> usize {
    fs::read_dir(dir).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(suffix)).count()
}

fn write_inputs(dir: &Path, n: u32) {
    fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        let img = image::RgbImage::from_fn(80, 60, |x, y| image::Rgb([(x * 3 + i * 40) as u8, (y * 4) as u8, ((x ^ y) * 2) as u8]));
        img.save(dir.join(format!("img{i}.png"))).unwrap();
    }
    fs::write(dir.join("notes.txt"), "not an image").unwrap();
}

/// Synthesizes `scenes` procedural groups at a small size into `dir`.
fn small_dataset(dir: &Path, scenes: &str) {
    let out = rectilens(&["synth", "--scenes", scenes, "--size", "65", "--seed", "3", "--out", p(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_from_directory_counts_and_repeats() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    write_inputs(&input, 3);
    let mut manifests = Vec::new();
    for run in ["a", "b"] {
        let out_dir = tmp.path().join(run);
        let out = rectilens(&["synth", "--in-dir", p(&input), "--out", p(&out_dir), "--seed", "7", "--size", "65"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stderr).contains("notes.txt"));
        let distorted = out_dir.join("distorted");
        assert_eq!(count_files(&distorted, ".png") - count_files(&distorted, "_mask.png"), 18);
        assert_eq!(count_files(&out_dir, "manifest.json"), 1);
        let manifest = json(&out_dir.join("manifest.json"));
        assert_eq!(manifest["groups"].as_array().unwrap().len(), 3);
        assert_eq!(manifest["seed"], 7);
        manifests.push(fs::read(out_dir.join("manifest.json")).unwrap());
    }
    assert_eq!(manifests[0], manifests[1]);
}

#[test]
fn synth_rejects_empty_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rectilens(&["synth", "--in-dir", p(tmp.path()), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no images"));
}

#[test]
fn estimate_defaults_traces_and_rejects_inter_only() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data, "1");
    let manifest = data.join("manifest.json");
    let est = tmp.path().join("est");
    let out = rectilens(&["estimate", "--manifest", p(&manifest), "--out", p(&est), "--trace", "--max-sweeps", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let echo = json(&est.join("estimate_config.json"));
    assert_eq!(echo["pairs"], "m4");
    assert_eq!(echo["loss"], "intra+inter");
    let result = json(&est.join("estimates/g0000.json"));
    assert_eq!(result["estimates"].as_array().unwrap().len(), 6);
    assert!(result.get("trace").is_none());

    let trace = json(&est.join("traces/g0000.json"));
    let entries = trace["entries"].as_array().unwrap().len() as u64;
    let sweeps = trace["sweeps"].as_u64().unwrap();
    let coords = trace["coordinates"].as_u64().unwrap();
    assert_eq!(coords, 6);
    assert_eq!(entries, sweeps * coords + trace["pattern_moves"].as_u64().unwrap());

    let out = rectilens(&["estimate", "--manifest", p(&manifest), "--out", p(&tmp.path().join("x")), "--loss", "inter"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trivial solution"));

    fs::write(tmp.path().join("bad.json"), "{\"seed\": 1}").unwrap();
    let out = rectilens(&["estimate", "--manifest", p(&tmp.path().join("bad.json")), "--out", p(&tmp.path().join("y"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rectify_writes_image_and_binary_mask() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data, "1");
    let image = data.join("distorted/g0000_dm_1.png");
    let mask = data.join("distorted/g0000_dm_1_mask.png");
    let out_dir = tmp.path().join("r");
    let out = rectilens(&["rectify", "--image", p(&image), "--mask", p(&mask), "--model", "DM", "--k", "-0.4", "--out", p(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rect_mask = image::open(out_dir.join("g0000_dm_1_rectified_mask.png")).unwrap().to_luma8();
    assert!(rect_mask.pixels().all(|p| p.0[0] == 0 || p.0[0] == 255));
    assert!(rect_mask.pixels().any(|p| p.0[0] == 255));
    assert_eq!(image::open(out_dir.join("g0000_dm_1_rectified.png")).unwrap().width(), 65);

    let out = rectilens(&["rectify", "--image", p(&image), "--model", "DM", "--k", "0.5", "--out", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));

    let est = tmp.path().join("est");
    let manifest = data.join("manifest.json");
    assert!(rectilens(&["estimate", "--manifest", p(&manifest), "--out", p(&est), "--max-sweeps", "1"]).status.success());
    let estimate = est.join("estimates/g0000.json");
    let from_est = tmp.path().join("r2");
    let out = rectilens(&["rectify", "--image", p(&image), "--model", "DM", "--estimate", p(&estimate), "--out", p(&from_est)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let k_est = json(&estimate)["estimates"].as_array().unwrap().iter().find(|e| e["model"] == "DM" && e["slot"] == 1).unwrap()["k_raw"]
        .as_f64()
        .unwrap();
    assert_eq!(json(&from_est.join("rectify_config.json"))["k"].as_f64().unwrap(), k_est);
}

#[test]
fn eval_oracle_matrix_and_full_frame() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = rectilens(&["synth", "--scenes", "5", "--size", "129", "--seed", "1", "--out", p(&data)]);
    assert!(out.status.success());
    let manifest = data.join("manifest.json");
    let masked = tmp.path().join("masked");
    assert!(rectilens(&["eval", "--manifest", p(&manifest), "--use-true-k", "--out", p(&masked)]).status.success());
    let csv = fs::read_to_string(masked.join("eval.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 3 * 3 + 3);
    for model in ["FOV", "DM", "ED"] {
        let row = rows.iter().find(|r| r.starts_with(&format!("{model},{model},"))).unwrap();
        let psnr: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert!(psnr > 28.0, "{row}");
    }
    assert!(csv.lines().next().unwrap().contains("masked=true"));

    let full = tmp.path().join("full");
    assert!(rectilens(&["eval", "--manifest", p(&manifest), "--use-true-k", "--full-frame", "--out", p(&full)]).status.success());
    let header = fs::read_to_string(full.join("eval.csv")).unwrap();
    assert!(header.lines().next().unwrap().contains("masked=false"));
    assert_eq!(json(&full.join("eval.json"))["header"]["masked"], false);
}

#[test]
fn replay_reproduces_synth() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data, "2");
    let replayed = tmp.path().join("again");
    let mut echo = json(&data.join("synth_config.json"));
    echo["out"] = Value::String(p(&replayed).into());
    let echo_path = tmp.path().join("echo.json");
    fs::write(&echo_path, serde_json::to_vec(&echo).unwrap()).unwrap();
    assert!(rectilens(&["replay", "--config", p(&echo_path)]).status.success());
    assert_eq!(fs::read(data.join("manifest.json")).unwrap(), fs::read(replayed.join("manifest.json")).unwrap());
    assert_eq!(fs::read(data.join("distorted/g0001_ed_2.png")).unwrap(), fs::read(replayed.join("distorted/g0001_ed_2.png")).unwrap());
}

#[test]
fn selftest_passes_and_detects_corruption() {
    let out = rectilens(&["selftest"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let out = rectilens(&["selftest", "--corrupt-radial", "1.001"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("radial_round_trip"));
}
