use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qsonify::score::{decode_midi_notes, score_from_json};
use qsonify::synth::decode_wav;
use qsonify::wigner::WignerField;
use serde_json::Value;

fn qsonify(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsonify"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Path, args: &[&str]) {
    let o = qsonify(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn no_arguments_prints_help_and_exits_2() {
    let o = Command::new(env!("CARGO_BIN_EXE_qsonify")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn usage_and_runtime_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qsonify(dir.path(), &["wigner", "--points", "x"]).status.code(), Some(2));
    assert_eq!(qsonify(dir.path(), &["wigner", "--state", "squeezed:r=1"]).status.code(), Some(2));
    let missing = qsonify(dir.path(), &["map", "--method", "b", "--in-csv", "/nonexistent/field.csv"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("qsonify: error["));
}

#[test]
fn wigner_grid_csv_has_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["wigner", "--state", "fock:m=1", "--points", "30", "--out-pgm", "w.pgm"]);
    let text = fs::read_to_string(dir.path().join("wigner.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("x,p,w"));
    assert_eq!(text.lines().count(), 901);
    let field = WignerField::from_csv(&text).unwrap();
    assert!(field.min() < 0.0);

    let m = manifest(dir.path());
    assert_eq!(m["tool"], "qsonify");
    assert_eq!(m["entropy"]["seed"], 0);
    assert_eq!(m["command"]["name"], "wigner");
    assert_eq!(m["command"]["points"], 30);
    assert_eq!(m["artifacts"], serde_json::json!(["wigner.csv", "w.pgm"]));
    assert!(fs::read(dir.path().join("w.pgm")).unwrap().starts_with(b"P5"));
}

#[test]
fn artifacts_must_stay_inside_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsonify(dir.path(), &["wigner", "--out-csv", "../escape.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().parent().unwrap().join("escape.csv").exists());
}

#[test]
fn quartet_pipeline_from_a_cat_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csvs = Vec::new();
    for (k, da) in ["-3", "-2", "-1"].iter().enumerate() {
        let name = format!("cat{k}.csv");
        ok(d, &["wigner", "--state", &format!("cat:alpha=0,dalpha={da}"), "--out-csv", &name]);
        csvs.push(d.join(name));
    }
    let mut map = vec!["map", "--method", "c", "--out-json", "chunks.json"];
    for c in &csvs {
        map.extend(["--in-csv", path(c)]);
    }
    ok(d, &map);
    ok(d, &["score", "--method", "c", "--in-json", path(&d.join("chunks.json"))]);
    let score = score_from_json(&fs::read_to_string(d.join("score.json")).unwrap()).unwrap();
    assert_eq!(score.events.len(), 12);
    let notes = decode_midi_notes(&fs::read(d.join("score.mid")).unwrap()).unwrap();
    assert_eq!(notes.len(), 12);

    ok(d, &["synth", "--in-json", path(&d.join("chunks.json")), "--step-seconds", "0.5"]);
    let wav = decode_wav(&fs::read(d.join("sound.wav")).unwrap()).unwrap();
    assert!((wav.duration() - 1.51).abs() < 1e-3, "{}", wav.duration());
}

#[test]
fn rabi_record_feeds_the_palette_and_timeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "9", "rabi-sim", "--trajectories", "50"]);
    let hist = fs::read_to_string(d.join("rabi_hist.csv")).unwrap();
    assert_eq!(hist.lines().count(), 13);
    let rabi = path(&d.join("rabi.json")).to_owned();
    ok(d, &["map", "--method", "palette", "--in-json", &rabi, "--out-json", "events.json"]);
    let events = path(&d.join("events.json")).to_owned();
    ok(d, &["score", "--method", "timeline", "--in-json", &events]);
    let cues = fs::read_to_string(d.join("timeline.csv")).unwrap();
    assert_eq!(cues.lines().next(), Some("start_s,duration_s,n_partials,added_harmonic_index"));
    ok(d, &["synth", "--in-json", &events, "--out-wav", "palette.wav"]);
    assert!(d.join("palette.wav").exists());
}

#[test]
fn entropy_file_is_recorded_and_exhaustion_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bytes: Vec<u8> = (0..80_000u32).map(|k| (k.wrapping_mul(2654435761) >> 13) as u8).collect();
    let file = d.join("pool.bin");
    fs::write(&file, &bytes).unwrap();
    ok(d, &["--entropy-file", path(&file), "rabi-sim", "--trajectories", "20", "--duration", "50"]);
    assert_eq!(manifest(d)["entropy"]["file"], path(&file));

    fs::write(&file, &bytes[..16]).unwrap();
    let o = qsonify(d, &["--entropy-file", path(&file), "rabi-sim", "--trajectories", "20"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error[entropy]"));
}

#[test]
fn lattice_run_writes_one_snapshot_per_ramp_point() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["bh-sim", "--dims", "8x6", "--ramp", "0.01:0.05:3", "--trap", "0.01", "--out-pgm"]);
    for k in 0..3 {
        let csv = fs::read_to_string(d.join(format!("bh_{k:03}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 49);
        assert!(d.join(format!("bh_mean_{k:03}.pgm")).exists());
        assert!(d.join(format!("bh_std_{k:03}.pgm")).exists());
    }
    assert_eq!(manifest(d)["artifacts"].as_array().unwrap().len(), 10);
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        ok(d, &["--seed", "17", "rabi-sim", "--trajectories", "40"]);
    }
    for f in ["rabi.json", "rabi_hist.csv", "manifest.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let c = tempfile::tempdir().unwrap();
    ok(c.path(), &["--seed", "18", "rabi-sim", "--trajectories", "40"]);
    assert_ne!(fs::read(a.path().join("rabi.json")).unwrap(), fs::read(c.path().join("rabi.json")).unwrap());
}
