use std::fs;

use ovc_core::io::{
    load_config, read_clip_dir, read_clip_record, read_track_dump, render_frame, render_trajectories,
    write_clip_record, write_metrics_csv, write_track_dump, Metrics, MetricsRow, RunConfig, CONFIG_KEYS, PALETTE,
};
use ovc_core::mask::Bitmap;
use ovc_core::synthetic::{
    build_scenario, crossing_scenario, render_scenario, scenario_trajectories, track_scenario, ClipLayout,
    ScenarioKind,
};
use ovc_core::tracker::TrackerConfig;
use ovc_core::Error;

#[test]
fn clip_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let clips = render_scenario(&build_scenario(ScenarioKind::Parade, 8), ClipLayout::default()).unwrap();
    // Written out of order on purpose; reading sorts by clip index.
    for c in clips.iter().rev() {
        write_clip_record(c, &dir.path().join(ovc_core::io::clip_file_name(c.clip_index))).unwrap();
    }
    fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    assert_eq!(read_clip_dir(dir.path()).unwrap(), clips);
}

#[test]
fn missing_rle_size_cites_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clip.json");
    let clips = render_scenario(&build_scenario(ScenarioKind::Static, 1), ClipLayout::default()).unwrap();
    write_clip_record(&clips[0], &path).unwrap();
    let text = fs::read_to_string(&path).unwrap().replacen(r#""size":[48,64],"#, "", 1);
    fs::write(&path, text).unwrap();
    match read_clip_record(&path) {
        Err(Error::Parse { path, message }) => {
            assert_eq!(path, "detections[0].masks[0]");
            assert!(message.contains("missing field `size`"), "{message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn truncated_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clip.json");
    let clips = render_scenario(&build_scenario(ScenarioKind::Static, 1), ClipLayout::default()).unwrap();
    write_clip_record(&clips[0], &path).unwrap();
    let bytes = fs::read(&path).unwrap();
    for cut in [1, bytes.len() / 3, bytes.len() - 2] {
        fs::write(&path, &bytes[..cut]).unwrap();
        assert!(matches!(read_clip_record(&path), Err(Error::Io(_))), "cut at {cut}");
    }
}

#[test]
fn track_dump_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (tracks, _) = track_scenario(&build_scenario(ScenarioKind::Crossing, 2), &TrackerConfig::default()).unwrap();
    let path = dir.path().join("tracks.json");
    write_track_dump(&tracks, &path).unwrap();
    assert_eq!(read_track_dump(&path).unwrap(), tracks);
}

/// Value the file sets, value the command line sets, and a reader.
fn key_cases() -> Vec<(&'static str, &'static str, &'static str, fn(&RunConfig) -> String)> {
    vec![
        ("clip_len", "6", "8", |c| c.clip_len.to_string()),
        ("overlap", "1", "2", |c| c.overlap().to_string()),
        ("grid", "2x2", "3x5", |c| format!("{}x{}", c.grid.rows, c.grid.cols)),
        ("w", "3", "7", |c| c.window.to_string()),
        ("epsilon", "0.2", "0.3", |c| c.epsilon.to_string()),
        ("alpha", "3", "4", |c| c.alpha.to_string()),
        ("beta1", "0.5", "0.25", |c| c.beta1.to_string()),
        ("beta2", "0.5", "0.25", |c| c.beta2.to_string()),
        ("t_mem", "5", "6", |c| c.t_mem.to_string()),
        ("tau_conf", "0.4", "0.5", |c| c.tau_conf.to_string()),
        ("tau_new", "0.1", "0.3", |c| c.tau_new.to_string()),
        ("lambda1", "1", "3", |c| c.loss_weights.cls.to_string()),
        ("lambda2", "1", "3", |c| c.loss_weights.boxes.to_string()),
        ("lambda3", "1", "3", |c| c.loss_weights.inter_mask.to_string()),
        ("lambda4", "1", "3", |c| c.loss_weights.init_sem.to_string()),
        ("lambda5", "1", "3", |c| c.loss_weights.init_reid.to_string()),
        ("focal_gamma", "1", "3", |c| c.focal_gamma.to_string()),
        ("focal_alpha", "0.5", "0.75", |c| c.focal_alpha.to_string()),
        ("seed", "11", "12", |c| c.seed.to_string()),
        ("match_class", "true", "false", |c| c.match_class.to_string()),
    ]
}

#[test]
fn precedence_for_every_key() {
    let cases = key_cases();
    assert_eq!(cases.iter().map(|c| c.0).collect::<Vec<_>>(), CONFIG_KEYS);
    let dir = tempfile::tempdir().unwrap();
    let defaults = RunConfig::default();
    for (key, file_value, cli_value, read) in cases {
        let path = dir.path().join(format!("{key}.cfg"));
        fs::write(&path, format!("# only {key}\n{key} = {file_value}\n")).unwrap();
        let from_file = load_config(Some(&path), &[]).unwrap();
        assert_ne!(read(&from_file), read(&defaults), "{key}: file value equals the default");
        assert_eq!(read(&from_file), file_value, "{key}: file ignored");
        let from_cli = load_config(Some(&path), &[(key.into(), cli_value.into())]).unwrap();
        assert_eq!(read(&from_cli), cli_value, "{key}: command line did not win");
        let cli_only = load_config(None, &[(key.into(), cli_value.into())]).unwrap();
        assert_eq!(read(&cli_only), cli_value, "{key}: command line over defaults");
    }
}

#[test]
fn invalid_configs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, "epsilon = 1.5\n").unwrap();
    assert!(matches!(load_config(Some(&path), &[]), Err(Error::Config(_))));
    fs::write(&path, "bogus = 1\n").unwrap();
    let msg = load_config(Some(&path), &[]).unwrap_err().to_string();
    assert!(msg.contains("valid keys") && msg.contains("tau_new"), "{msg}");
    fs::write(&path, "").unwrap();
    assert_eq!(load_config(Some(&path), &[]).unwrap(), RunConfig::default());
}

#[test]
fn frame_images() {
    let ppm = render_frame(3, 4, &[]);
    assert_eq!(ppm, [b"P6\n4 3\n255\n".as_slice(), &[0u8; 36]].concat());
    let full = Bitmap::new(3, 4, vec![true; 12]).unwrap();
    let ppm = render_frame(3, 4, &[(0, &full)]);
    assert!(ppm[11..].chunks(3).all(|px| px == PALETTE[0]));
    assert_eq!(render_frame(3, 4, &[(0, &full)]), ppm);
}

#[test]
fn crossing_trajectory_svg() {
    let s = crossing_scenario(0);
    let svg = render_trajectories(s.height, s.width, &scenario_trajectories(&s));
    let lines: Vec<&str> = svg.lines().filter(|l| l.starts_with("<polyline")).collect();
    assert_eq!(lines.len(), 2);
    for l in lines {
        let points = l.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
        assert_eq!(points.split(' ').count(), s.frames);
    }
}

#[test]
fn metrics_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("metrics.csv");
    let row = MetricsRow {
        scenario: "crossing".into(),
        seed: 1,
        metrics: Metrics { id_switches: 0, assoc_acc: 1.0, mean_iou: 1.0 },
    };
    write_metrics_csv(&[row.clone(), row], &path).unwrap();
    assert_eq!(
        fs::read_to_string(&path).unwrap(),
        "scenario,seed,id_switches,assoc_acc,mean_iou\ncrossing,1,0,1.0,1.0\ncrossing,1,0,1.0,1.0\n"
    );
}
