//! PPM frames, SVG trajectories and the metrics CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::mask::Bitmap;
use crate::tracker::VideoTracks;

/// Instance colors, indexed by `id % 12`.
pub const PALETTE: [[u8; 3]; 12] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [220, 190, 255],
];

pub fn palette_color(id: u64) -> [u8; 3] {
    PALETTE[(id % PALETTE.len() as u64) as usize]
}

/// RGB pixels of one frame, row-major. Background is black; where masks
/// overlap the lowest id wins.
pub fn render_rgb(height: usize, width: usize, masks: &[(u64, &Bitmap)]) -> Vec<u8> {
    let mut sorted: Vec<_> = masks.to_vec();
    sorted.sort_by_key(|m| std::cmp::Reverse(m.0));
    let mut rgb = vec![0u8; height * width * 3];
    for (id, m) in sorted {
        let c = palette_color(id);
        for y in 0..height.min(m.height) {
            for x in 0..width.min(m.width) {
                if m.get(y, x) {
                    let o = (y * width + x) * 3;
                    rgb[o..o + 3].copy_from_slice(&c);
                }
            }
        }
    }
    rgb
}

/// Binary PPM (`P6`) of one frame.
pub fn render_frame(height: usize, width: usize, masks: &[(u64, &Bitmap)]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend(render_rgb(height, width, masks));
    out
}

/// Centroid path of one track, `(x, y)` in pixel coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub id: u64,
    pub points: Vec<(f64, f64)>,
}

/// Mask centroids of every track, in frame order.
pub fn track_trajectories(tracks: &VideoTracks) -> Vec<Trajectory> {
    tracks
        .tracks
        .iter()
        .map(|t| Trajectory {
            id: t.id,
            points: t.masks.values().filter_map(|m| m.centroid()).map(|(y, x)| (x, y)).collect(),
        })
        .collect()
}

/// SVG with one polyline per trajectory, stroked in the palette color.
pub fn render_trajectories(height: usize, width: usize, trajectories: &[Trajectory]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="black"/>"#);
    for t in trajectories {
        let [r, g, b] = palette_color(t.id);
        let pts: Vec<String> = t.points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            s,
            r#"<polyline data-id="{}" fill="none" stroke="rgb({r},{g},{b})" stroke-width="1" points="{}"/>"#,
            t.id,
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Tracking quality of one run against ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub id_switches: usize,
    pub assoc_acc: f64,
    pub mean_iou: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub scenario: String,
    pub seed: u64,
    pub metrics: Metrics,
}

pub const METRICS_HEADER: &str = "scenario,seed,id_switches,assoc_acc,mean_iou\n";

/// CSV text; reals use the shortest round-trip form with at least one
/// decimal (`1.0`, `0.75`).
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::from(METRICS_HEADER);
    for r in rows {
        let m = r.metrics;
        let _ = writeln!(s, "{},{},{},{:?},{:?}", r.scenario, r.seed, m.id_switches, m.assoc_acc, m.mean_iou);
    }
    s
}

pub fn write_metrics_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    fs::write(path, metrics_csv(rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_frame_is_black() {
        let ppm = render_frame(2, 3, &[]);
        let mut expected = b"P6\n3 2\n255\n".to_vec();
        expected.extend([0u8; 18]);
        assert_eq!(ppm, expected);
    }

    #[test]
    fn full_mask_takes_first_color() {
        let m = Bitmap::new(2, 2, vec![true; 4]).unwrap();
        let ppm = render_frame(2, 2, &[(0, &m)]);
        assert_eq!(&ppm[..11], b"P6\n2 2\n255\n");
        assert!(ppm[11..].chunks(3).all(|c| c == PALETTE[0]));
    }

    #[test]
    fn lowest_id_wins_and_palette_cycles() {
        let a = Bitmap::new(1, 2, vec![true, true]).unwrap();
        let b = Bitmap::new(1, 2, vec![true, false]).unwrap();
        let rgb = render_rgb(1, 2, &[(13, &a), (5, &b)]);
        assert_eq!(&rgb[..3], &PALETTE[5]);
        assert_eq!(&rgb[3..], &PALETTE[1]);
    }

    #[test]
    fn polyline_per_track() {
        let t = vec![
            Trajectory { id: 0, points: vec![(1.0, 2.0), (3.5, 4.25)] },
            Trajectory { id: 1, points: vec![] },
        ];
        let svg = render_trajectories(10, 20, &t);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(r#"points="1.00,2.00 3.50,4.25""#));
        assert!(svg.contains(r#"stroke="rgb(230,25,75)""#));
    }

    #[test]
    fn csv_rows() {
        assert_eq!(metrics_csv(&[]), METRICS_HEADER);
        let perfect = MetricsRow {
            scenario: "static".into(),
            seed: 3,
            metrics: Metrics { id_switches: 0, assoc_acc: 1.0, mean_iou: 1.0 },
        };
        let csv = metrics_csv(std::slice::from_ref(&perfect));
        assert!(csv.lines().nth(1).unwrap().ends_with(",0,1.0,1.0"));
        let two = metrics_csv(&[perfect.clone(), perfect]);
        assert_eq!(two.lines().count(), 3);
        assert!(two.ends_with('\n') && !two.contains('\r'));
    }
}
