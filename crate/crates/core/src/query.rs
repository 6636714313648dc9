//! Query initialization: grid-guided peak selection on the activation map
//! and windowed association of frame-level queries to the central frame.

use crate::error::{Error, Result};

/// Dense `[channels][frames][height][width]` array.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMap {
    channels: usize,
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

/// Class-aware activation map, one channel per class.
pub type ActivationMap = ChannelMap;
pub type FeatureMap = ChannelMap;
pub type EmbeddingMap = ChannelMap;

impl ChannelMap {
    pub fn new(channels: usize, frames: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || frames == 0 || height == 0 || width == 0 {
            return Err(Error::dim(format!(
                "map needs positive extents, got {channels}x{frames}x{height}x{width}"
            )));
        }
        if data.len() != channels * frames * height * width {
            return Err(Error::dim(format!(
                "map {channels}x{frames}x{height}x{width} expects {} values, got {}",
                channels * frames * height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("map contains non-finite values".into()));
        }
        Ok(Self { channels, frames, height, width, data })
    }

    pub fn from_fn(
        shape: [usize; 4],
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let [c, t, h, w] = shape;
        let mut data = Vec::with_capacity(c * t * h * w);
        for ci in 0..c {
            for ti in 0..t {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f(ci, ti, y, x));
                    }
                }
            }
        }
        Self::new(c, t, h, w, data)
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.channels, self.frames, self.height, self.width]
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, c: usize, t: usize, y: usize, x: usize) -> f64 {
        self.data[((c * self.frames + t) * self.height + y) * self.width + x]
    }

    /// The channel vector at one location.
    pub fn column(&self, t: usize, y: usize, x: usize) -> Vec<f64> {
        (0..self.channels).map(|c| self.get(c, t, y, x)).collect()
    }
}

/// Single-channel `[frames][height][width]` response.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseMap {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl ResponseMap {
    pub fn get(&self, t: usize, y: usize, x: usize) -> f64 {
        self.data[(t * self.height + y) * self.width + x]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    /// Pixel rows covered by cell row `gy` of a map with `height` rows.
    /// Remainder pixels go to the last row of cells.
    pub fn row_span(&self, gy: usize, height: usize) -> (usize, usize) {
        split(height, self.rows, gy)
    }

    pub fn col_span(&self, gx: usize, width: usize) -> (usize, usize) {
        split(width, self.cols, gx)
    }
}

fn split(extent: usize, parts: usize, idx: usize) -> (usize, usize) {
    let base = extent / parts;
    let start = idx * base;
    let end = if idx + 1 == parts { extent } else { start + base };
    (start, end)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameQuery {
    pub frame: usize,
    /// `(y, x)` on the map grid.
    pub position: (usize, usize),
    /// `(gy, gx)` of the cell the query was selected from.
    pub grid_cell: (usize, usize),
    pub feature: Vec<f64>,
    pub embedding: Vec<f64>,
    pub peak_value: f64,
}

/// Frame-level queries where index `n` names the same putative object in
/// every frame.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedQuerySet {
    pub central: usize,
    pub queries: Vec<Vec<FrameQuery>>,
}

/// Per-pixel maximum over the class channels.
pub fn class_agnostic_response(map: &ActivationMap) -> ResponseMap {
    let [c, t, h, w] = map.shape();
    let plane = t * h * w;
    let mut data = map.data[..plane].to_vec();
    for ci in 1..c {
        for (d, &v) in data.iter_mut().zip(&map.data[ci * plane..(ci + 1) * plane]) {
            if v > *d {
                *d = v;
            }
        }
    }
    ResponseMap { frames: t, height: h, width: w, data }
}

/// Selects the peak of every grid cell in every frame. Ties go to the first
/// pixel in row-major order within the cell.
pub fn grid_select(
    response: &ResponseMap,
    grid: GridSpec,
    features: &FeatureMap,
    embeddings: &EmbeddingMap,
) -> Result<Vec<Vec<FrameQuery>>> {
    let (t, h, w) = (response.frames, response.height, response.width);
    if grid.rows == 0 || grid.cols == 0 || grid.rows > h || grid.cols > w {
        return Err(Error::dim(format!(
            "grid {}x{} does not fit a {h}x{w} map",
            grid.rows, grid.cols
        )));
    }
    for (name, m) in [("feature", features), ("embedding", embeddings)] {
        if m.shape()[1..] != [t, h, w] {
            return Err(Error::dim(format!(
                "{name} map is {:?}, response is {t}x{h}x{w}",
                &m.shape()[1..]
            )));
        }
    }

    let mut out = Vec::with_capacity(t);
    for ti in 0..t {
        let mut frame = Vec::with_capacity(grid.cells());
        for gy in 0..grid.rows {
            let (y0, y1) = grid.row_span(gy, h);
            for gx in 0..grid.cols {
                let (x0, x1) = grid.col_span(gx, w);
                let mut best = (y0, x0);
                let mut best_v = response.get(ti, y0, x0);
                for y in y0..y1 {
                    for x in x0..x1 {
                        let v = response.get(ti, y, x);
                        if v > best_v {
                            best_v = v;
                            best = (y, x);
                        }
                    }
                }
                frame.push(FrameQuery {
                    frame: ti,
                    position: best,
                    grid_cell: (gy, gx),
                    feature: features.column(ti, best.0, best.1),
                    embedding: embeddings.column(ti, best.0, best.1),
                    peak_value: best_v,
                });
            }
        }
        out.push(frame);
    }
    Ok(out)
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn chebyshev(a: (usize, usize), b: (usize, usize)) -> usize {
    a.0.abs_diff(b.0).max(a.1.abs_diff(b.1))
}

/// Aligns every frame to the central frame `central`: for each central query
/// `n` and frame `t`, picks the most similar query (cosine over embeddings)
/// whose cell lies within Chebyshev radius `window * |t - central|` of cell
/// `n`. Ties prefer the nearer cell, then the lower index. Matching is per
/// pair, so one query may be matched by several central queries.
pub fn associate_frames(queries: &[Vec<FrameQuery>], central: usize, window: usize) -> Result<AlignedQuerySet> {
    let anchors = queries.get(central).ok_or(Error::Index { index: central, len: queries.len() })?;
    let n = anchors.len();
    if let Some(bad) = queries.iter().position(|f| f.len() != n) {
        return Err(Error::dim(format!("frame {bad} has {} queries, expected {n}", queries[bad].len())));
    }

    let mut aligned = Vec::with_capacity(queries.len());
    for (t, frame) in queries.iter().enumerate() {
        if t == central {
            aligned.push(anchors.clone());
            continue;
        }
        let radius = window * t.abs_diff(central);
        let matched = anchors
            .iter()
            .map(|anchor| {
                let mut best: Option<(f64, usize, usize)> = None;
                for (idx, cand) in frame.iter().enumerate() {
                    let dist = chebyshev(anchor.grid_cell, cand.grid_cell);
                    if dist > radius {
                        continue;
                    }
                    let sim = cosine(&anchor.embedding, &cand.embedding);
                    let better = match best {
                        None => true,
                        Some((s, d, _)) => sim > s || (sim == s && dist < d),
                    };
                    if better {
                        best = Some((sim, dist, idx));
                    }
                }
                best.map(|(_, _, idx)| frame[idx].clone()).ok_or_else(|| {
                    Error::dim(format!("frame {t} has no query near cell {:?}", anchor.grid_cell))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        aligned.push(matched);
    }
    Ok(AlignedQuerySet { central, queries: aligned })
}
