use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ovc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ovc")).args(args).output().expect("ovc runs")
}

fn ovc_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ovc")).args(args).env(key, value).output().expect("ovc runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_track_render() {
    let dir = tempfile::tempdir().unwrap();
    let (clips, out, frames) = (dir.path().join("c"), dir.path().join("t"), dir.path().join("r"));
    assert_eq!(ovc(&["generate", "--seed", "4", "--scenario", "static", "--out", p(&clips)]).status.code(), Some(0));
    assert!(clips.join("clip_0000.json").exists());
    assert!(clips.join("manifest.json").exists());

    let o = ovc(&["track", "--in", p(&clips), "--out", p(&out), "--beta2", "0.5", "--tmem", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("scenario,seed,id_switches,assoc_acc,mean_iou"));
    assert!(rows.next().unwrap().starts_with("static,4,0,"));

    let o = ovc(&["render", "--in", p(&clips), "--tracks", p(&out.join("tracks.json")), "--out", p(&frames)]);
    assert_eq!(o.status.code(), Some(0));
    let ppm = fs::read(frames.join("frame_0000.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n64 48\n255\n"));
    assert_eq!(ppm.len(), b"P6\n64 48\n255\n".len() + 48 * 64 * 3);
    assert!(fs::read_to_string(frames.join("trajectories.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn losses_report() {
    let dir = tempfile::tempdir().unwrap();
    let clips = dir.path().join("c");
    ovc(&["generate", "--seed", "1", "--scenario", "parade", "--out", p(&clips)]);
    let o = ovc(&["losses", "--in", p(&clips), "--check-grads"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for name in ["typical_mask", "inter_mask", "cls_focal", "box_giou", "init_sem", "init_reid", "total"] {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap_or_else(|| panic!("{name} missing"));
        let v: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert!(v.is_finite() && v >= 0.0, "{line}");
    }
    assert_eq!(text.lines().filter(|l| l.starts_with("grad ") && l.ends_with("ok")).count(), 8);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Parse and validation errors are 1.
    assert_eq!(ovc(&["generate", "--scenario", "nope", "--out", p(dir.path())]).status.code(), Some(1));
    assert_eq!(ovc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ovc(&["track", "--in", p(dir.path()), "--out", p(&dir.path().join("o"))]).status.code(), Some(1));

    let clips = dir.path().join("c");
    ovc(&["generate", "--seed", "2", "--scenario", "static", "--out", p(&clips)]);
    let out = p(&dir.path().join("o")).to_string();
    assert_eq!(ovc(&["track", "--in", p(&clips), "--out", &out, "--set", "epsilon=2"]).status.code(), Some(1));
    assert_eq!(ovc(&["track", "--in", p(&clips), "--out", &out, "--set", "bogus=1"]).status.code(), Some(1));
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "beta1 = 0\nbeta2 = 0\n").unwrap();
    assert_eq!(ovc(&["track", "--config", p(&cfg), "--in", p(&clips), "--out", &out]).status.code(), Some(1));

    let first = clips.join("clip_0000.json");
    let text = fs::read_to_string(&first).unwrap();
    fs::write(&first, &text[..text.len() / 2]).unwrap();
    let o = ovc(&["track", "--in", p(&clips), "--out", &out]);
    assert_eq!(o.status.code(), Some(1));

    assert_eq!(ovc(&["selftest", "--suite", "99"]).status.code(), Some(1));
    assert_eq!(ovc(&["selftest", "--suite", "2"]).status.code(), Some(0));
    assert_eq!(ovc(&["--help"]).status.code(), Some(0));
}

#[test]
fn thread_count_from_environment() {
    assert_eq!(ovc_env(&["selftest", "--suite", "4"], "OVC_THREADS", "2").status.code(), Some(0));
    assert_eq!(ovc_env(&["selftest", "--suite", "4"], "OVC_THREADS", "0").status.code(), Some(1));
    assert_eq!(ovc_env(&["selftest", "--suite", "4"], "OVC_THREADS", "many").status.code(), Some(1));
}

#[test]
fn render_rejects_mismatched_canvas() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, out) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("t"));
    ovc(&["generate", "--seed", "1", "--scenario", "static", "--out", p(&a)]);
    ovc(&["track", "--in", p(&a), "--out", p(&out)]);
    let dump = fs::read_to_string(out.join("tracks.json")).unwrap().replacen("[48,64]", "[40,64]", 1);
    fs::write(out.join("tracks.json"), dump).unwrap();
    let o = ovc(&["render", "--in", p(&a), "--tracks", p(&out.join("tracks.json")), "--out", p(&b)]);
    assert_eq!(o.status.code(), Some(1));
}
