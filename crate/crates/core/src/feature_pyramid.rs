//! Frames, 31-channel HOG features and multi-scale feature pyramids.
//!
//! Features follow the DPM layout per cell: 18 contrast-sensitive orientation
//! channels, 9 contrast-insensitive channels and 4 block-energy channels.
//! Each cell is normalized against the four 2x2 blocks that contain it and every
//! normalized term is truncated at 0.2. One cell of border is dropped on each
//! side so that every retained cell has all four normalization blocks.
//!
//! A level is described by an image resize factor and a cell size. With the top
//! octave enabled the first `interval` levels reuse the resize factors of the
//! next octave with half-size cells, which doubles feature resolution without
//! upsampling the image. All geometry goes through [`LevelGeometry`], so
//! cropped feature windows and full levels share one cell grid.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Channels per HOG cell.
pub const HOG_CHANNELS: usize = 31;
const ORIENTATIONS: usize = 9;
const TRUNCATION: f64 = 0.2;
const NORM_EPS: f64 = 1e-4;
const TEXTURE_WEIGHT: f64 = 0.2357;

/// Upper bound of an orientation channel (four truncated terms, halved).
pub const ORIENTATION_BOUND: f64 = 0.5 * 4.0 * TRUNCATION;
/// Upper bound of a block-energy channel.
pub const TEXTURE_BOUND: f64 = TEXTURE_WEIGHT * 18.0 * TRUNCATION;

/// Grayscale image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::OutOfBounds(format!(
                "frame data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(*v));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Converts an RGB triple to luma with Rec. 601 weights.
    pub fn luma(r: f64, g: f64, b: f64) -> f64 {
        0.299 * r + 0.587 * g + 0.114 * b
    }

    pub fn from_image(img: &image::DynamicImage) -> Self {
        if img.color().has_color() {
            let rgb = img.to_rgb8();
            Frame::from_fn(rgb.width() as usize, rgb.height() as usize, |x, y| {
                let p = rgb.get_pixel(x as u32, y as u32).0;
                Frame::luma(p[0] as f64, p[1] as f64, p[2] as f64) / 255.0
            })
        } else {
            let gray = img.to_luma8();
            Frame::from_fn(gray.width() as usize, gray.height() as usize, |x, y| {
                gray.get_pixel(x as u32, y as u32).0[0] as f64 / 255.0
            })
        }
    }

    /// Loads an 8-bit PNG or PNM file; color images are converted to luma.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path)?;
        Ok(Self::from_image(&img))
    }

    pub fn to_gray8(&self) -> image::GrayImage {
        image::GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let v = self.get(x as usize, y as usize).clamp(0.0, 1.0);
            image::Luma([(v * 255.0).round() as u8])
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_gray8()
            .save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }
}

/// Dense HOG feature grid, possibly a cropped window of a pyramid level.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    /// Resize factor applied to the original image.
    pub scale: f64,
    /// Cell size in pixels of the resized image.
    pub cell_size: usize,
    /// Position of this map's cell (0, 0) in the full level grid.
    pub row0: usize,
    pub col0: usize,
    /// Absolute pyramid level index.
    pub level: usize,
}

impl FeatureMap {
    /// Builds a map from raw values, mostly useful for tests and synthetic data.
    pub fn from_data(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols * HOG_CHANNELS {
            return Err(Error::OutOfBounds(format!(
                "feature data has {} values, expected {}x{}x{}",
                data.len(),
                rows,
                cols,
                HOG_CHANNELS
            )));
        }
        Ok(Self {
            rows,
            cols,
            data,
            scale: 1.0,
            cell_size: 8,
            row0: 0,
            col0: 0,
            level: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn cell(&self, row: usize, col: usize) -> &[f64] {
        let i = (row * self.cols + col) * HOG_CHANNELS;
        &self.data[i..i + HOG_CHANNELS]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.cols + col) * HOG_CHANNELS + channel]
    }

    pub fn pixels_per_cell(&self) -> f64 {
        self.cell_size as f64 / self.scale
    }

    /// Returns a copy of `rows x cols` cells starting at `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, rows: usize, cols: usize) -> Result<FeatureMap> {
        if row + rows > self.rows || col + cols > self.cols {
            return Err(Error::OutOfBounds(format!(
                "crop {}x{} at ({}, {}) exceeds {}x{}",
                rows, cols, row, col, self.rows, self.cols
            )));
        }
        let mut data = Vec::with_capacity(rows * cols * HOG_CHANNELS);
        for r in row..row + rows {
            let start = (r * self.cols + col) * HOG_CHANNELS;
            data.extend_from_slice(&self.data[start..start + cols * HOG_CHANNELS]);
        }
        Ok(FeatureMap {
            rows,
            cols,
            data,
            scale: self.scale,
            cell_size: self.cell_size,
            row0: self.row0 + row,
            col0: self.col0 + col,
            level: self.level,
        })
    }
}

/// Pyramid construction parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PyramidConfig {
    pub cell_size: usize,
    /// Levels per octave.
    pub interval: usize,
    /// Minimum level grid (rows, cols) in cells.
    pub min_level_dims: (usize, usize),
    /// Prepend an octave at twice the native feature resolution.
    pub top_octave: bool,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        Self {
            cell_size: 8,
            interval: 5,
            min_level_dims: (1, 1),
            top_octave: true,
        }
    }
}

/// Cell grid of one pyramid level over the full frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelGeometry {
    pub index: usize,
    pub image_scale: f64,
    pub cell_size: usize,
    /// Full-grid dimensions after the boundary trim.
    pub rows: usize,
    pub cols: usize,
}

impl LevelGeometry {
    pub fn pixels_per_cell(&self) -> f64 {
        self.cell_size as f64 / self.image_scale
    }

    /// Image-space rectangle covered by a filter of `dims` (rows, cols) whose
    /// top-left cell is `(row, col)`.
    pub fn cell_box(&self, row: usize, col: usize, dims: (usize, usize)) -> Result<BBox> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::OutOfBounds(format!(
                "cell ({}, {}) outside level {} grid {}x{}",
                row, col, self.index, self.rows, self.cols
            )));
        }
        let ppc = self.pixels_per_cell();
        Ok(BBox::new(
            (col as f64 + 1.0) * ppc,
            (row as f64 + 1.0) * ppc,
            dims.1 as f64 * ppc,
            dims.0 as f64 * ppc,
        ))
    }

    /// Continuous cell coordinates (col, row) of an image point, inverse of the
    /// cell origin mapping used by [`LevelGeometry::cell_box`].
    pub fn point_to_cell(&self, x: f64, y: f64) -> (f64, f64) {
        let ppc = self.pixels_per_cell();
        (x / ppc - 1.0, y / ppc - 1.0)
    }

    /// Top-left cell of a filter of `dims` whose box is centered at `(x, y)`.
    pub fn center_to_cell(&self, x: f64, y: f64, dims: (usize, usize)) -> (i64, i64) {
        let (c, r) = self.point_to_cell(x, y);
        (
            (r - dims.0 as f64 / 2.0).round() as i64,
            (c - dims.1 as f64 / 2.0).round() as i64,
        )
    }
}

/// Level layout of a pyramid for a given frame size.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidPlan {
    pub levels: Vec<LevelGeometry>,
    pub interval: usize,
    pub scale_step: f64,
    /// Number of leading half-cell levels (0 without the top octave).
    pub octave_levels: usize,
    pub frame_width: usize,
    pub frame_height: usize,
}

fn grid_dim(pixels: usize, scale: f64, cell: usize) -> usize {
    let resized = resized_len(pixels, scale);
    (resized / cell).saturating_sub(2)
}

fn resized_len(pixels: usize, scale: f64) -> usize {
    ((pixels as f64 * scale).round() as usize).max(1)
}

impl PyramidPlan {
    pub fn new(width: usize, height: usize, config: &PyramidConfig) -> Result<Self> {
        if config.interval == 0 {
            return Err(Error::InvalidConfig("pyramid interval must be >= 1".into()));
        }
        if config.cell_size < 2 || (config.top_octave && config.cell_size % 2 != 0) {
            return Err(Error::InvalidConfig(format!(
                "cell size {} unsupported",
                config.cell_size
            )));
        }
        let step = 2f64.powf(1.0 / config.interval as f64);
        let (min_r, min_c) = config.min_level_dims;
        let octave_levels = if config.top_octave { config.interval } else { 0 };

        let native = |k: usize| {
            let s = step.powi(-(k as i32));
            (
                s,
                grid_dim(height, s, config.cell_size),
                grid_dim(width, s, config.cell_size),
            )
        };
        let (_, r0, c0) = native(0);
        if r0 < min_r.max(1) || c0 < min_c.max(1) {
            return Err(Error::FrameTooSmall(format!(
                "{}x{} frame gives a {}x{} cell grid, need at least {}x{}",
                width,
                height,
                r0,
                c0,
                min_r.max(1),
                min_c.max(1)
            )));
        }

        let mut levels = Vec::new();
        for k in 0..octave_levels {
            let s = step.powi(-(k as i32));
            let cell = config.cell_size / 2;
            levels.push(LevelGeometry {
                index: k,
                image_scale: s,
                cell_size: cell,
                rows: grid_dim(height, s, cell),
                cols: grid_dim(width, s, cell),
            });
        }
        let mut k = 0;
        loop {
            let (s, rows, cols) = native(k);
            if rows < min_r.max(1) || cols < min_c.max(1) {
                break;
            }
            levels.push(LevelGeometry {
                index: octave_levels + k,
                image_scale: s,
                cell_size: config.cell_size,
                rows,
                cols,
            });
            k += 1;
        }
        Ok(Self {
            levels,
            interval: config.interval,
            scale_step: step,
            octave_levels,
            frame_width: width,
            frame_height: height,
        })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, index: usize) -> Option<&LevelGeometry> {
        self.levels.get(index)
    }

    /// Total number of cells over every level.
    pub fn total_cells(&self) -> usize {
        self.levels.iter().map(|l| l.rows * l.cols).sum()
    }
}

/// A cell window `[row0, row0 + rows) x [col0, col0 + cols)` on a pyramid level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelWindow {
    pub level: usize,
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
}

/// Multi-scale stack of feature maps; may hold only a subset of the planned
/// levels, each possibly cropped.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid {
    pub plan: PyramidPlan,
    maps: Vec<Option<FeatureMap>>,
}

impl FeaturePyramid {
    pub fn interval(&self) -> usize {
        self.plan.interval
    }

    pub fn scale_step(&self) -> f64 {
        self.plan.scale_step
    }

    pub fn num_levels(&self) -> usize {
        self.plan.len()
    }

    pub fn geometry(&self, level: usize) -> Option<&LevelGeometry> {
        self.plan.level(level)
    }

    pub fn level(&self, level: usize) -> Option<&FeatureMap> {
        self.maps.get(level).and_then(|m| m.as_ref())
    }

    /// Iterator over the levels that were actually computed.
    pub fn levels(&self) -> impl Iterator<Item = &FeatureMap> {
        self.maps.iter().flatten()
    }

    /// Number of feature cells held by this pyramid.
    pub fn computed_cells(&self) -> usize {
        self.levels().map(|m| m.rows() * m.cols()).sum()
    }

    /// Image-space box of a filter placed at a full-grid cell of `level`.
    pub fn cell_to_pixel_box(
        &self,
        level: usize,
        root_cell: (usize, usize),
        filter_dims: (usize, usize),
    ) -> Result<BBox> {
        self.geometry(level)
            .ok_or_else(|| Error::OutOfBounds(format!("level {level} does not exist")))?
            .cell_box(root_cell.0, root_cell.1, filter_dims)
    }
}

/// Area-averaging resampler for one axis: per output index, the contributing
/// source indices and normalized weights.
fn axis_weights(src_len: usize, scale: f64, out_start: i64, out_len: usize) -> Vec<Vec<(usize, f64)>> {
    let resized = resized_len(src_len, scale) as i64;
    (0..out_len as i64)
        .map(|i| {
            let o = (out_start + i).clamp(0, resized - 1);
            if scale == 1.0 {
                return vec![(o as usize, 1.0)];
            }
            let a = o as f64 / scale;
            let b = ((o + 1) as f64 / scale).min(src_len as f64);
            let a = a.min(src_len as f64 - 1.0);
            let mut taps = Vec::new();
            let mut total = 0.0;
            let mut s = a.floor() as usize;
            while (s as f64) < b && s < src_len {
                let lo = (s as f64).max(a);
                let hi = ((s + 1) as f64).min(b);
                let w = hi - lo;
                if w > 0.0 {
                    taps.push((s, w));
                    total += w;
                }
                s += 1;
            }
            if taps.is_empty() {
                taps.push((a as usize, 1.0));
                total = 1.0;
            }
            for t in &mut taps {
                t.1 /= total;
            }
            taps
        })
        .collect()
}

/// Pixels `[x0, x0 + w) x [y0, y0 + h)` of the frame resized by `scale`, with
/// coordinates outside the resized image clamped to its border.
pub fn resample_region(frame: &Frame, scale: f64, x0: i64, y0: i64, w: usize, h: usize) -> Frame {
    let wx = axis_weights(frame.width, scale, x0, w);
    let wy = axis_weights(frame.height, scale, y0, h);
    let src_rows: Vec<usize> = {
        let lo = wy.iter().flat_map(|t| t.iter().map(|p| p.0)).min().unwrap_or(0);
        let hi = wy.iter().flat_map(|t| t.iter().map(|p| p.0)).max().unwrap_or(0);
        (lo..=hi).collect()
    };
    let base = src_rows[0];
    let mut horiz = vec![0.0; src_rows.len() * w];
    for (ri, &sy) in src_rows.iter().enumerate() {
        let row = &frame.data[sy * frame.width..(sy + 1) * frame.width];
        for (x, taps) in wx.iter().enumerate() {
            horiz[ri * w + x] = taps.iter().map(|&(sx, wt)| row[sx] * wt).sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for (y, taps) in wy.iter().enumerate() {
        for x in 0..w {
            out[y * w + x] = taps
                .iter()
                .map(|&(sy, wt)| horiz[(sy - base) * w + x] * wt)
                .sum();
        }
    }
    Frame {
        width: w,
        height: h,
        data: out,
    }
}

/// Unit vectors of the 9 undirected orientation bins.
fn orientation_basis() -> [(f64, f64); ORIENTATIONS] {
    let mut basis = [(0.0, 0.0); ORIENTATIONS];
    for (o, b) in basis.iter_mut().enumerate() {
        let a = o as f64 * std::f64::consts::PI / ORIENTATIONS as f64;
        *b = (a.cos(), a.sin());
    }
    basis
}

/// HOG features for a grid of `hist_rows x hist_cols` cells whose pixels sit
/// inside `region` behind a one-pixel margin. Returns the interior
/// `(hist_rows - 2) x (hist_cols - 2)` features.
fn hog_from_region(region: &Frame, cell: usize, hist_rows: usize, hist_cols: usize) -> Vec<f64> {
    let basis = orientation_basis();
    let mut hist = vec![0.0; hist_rows * hist_cols * 2 * ORIENTATIONS];
    let w = region.width;
    for py in 0..hist_rows * cell {
        let y = py + 1;
        let hrow = py / cell;
        for px in 0..hist_cols * cell {
            let x = px + 1;
            let dx = region.data[y * w + x + 1] - region.data[y * w + x - 1];
            let dy = region.data[(y + 1) * w + x] - region.data[(y - 1) * w + x];
            let mag = (dx * dx + dy * dy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut best = 0.0;
            let mut best_o = 0;
            for (o, &(ux, uy)) in basis.iter().enumerate() {
                let dot = ux * dx + uy * dy;
                if dot > best {
                    best = dot;
                    best_o = o;
                } else if -dot > best {
                    best = -dot;
                    best_o = o + ORIENTATIONS;
                }
            }
            let hcol = px / cell;
            hist[(hrow * hist_cols + hcol) * 2 * ORIENTATIONS + best_o] += mag;
        }
    }

    let norm: Vec<f64> = hist
        .chunks_exact(2 * ORIENTATIONS)
        .map(|h| {
            (0..ORIENTATIONS)
                .map(|o| (h[o] + h[o + ORIENTATIONS]).powi(2))
                .sum()
        })
        .collect();
    let block = |r: usize, c: usize| {
        let s = norm[r * hist_cols + c]
            + norm[r * hist_cols + c + 1]
            + norm[(r + 1) * hist_cols + c]
            + norm[(r + 1) * hist_cols + c + 1];
        1.0 / (s + NORM_EPS).sqrt()
    };

    let out_rows = hist_rows - 2;
    let out_cols = hist_cols - 2;
    let mut feat = vec![0.0; out_rows * out_cols * HOG_CHANNELS];
    for r in 0..out_rows {
        for c in 0..out_cols {
            let (hr, hc) = (r + 1, c + 1);
            let n = [
                block(hr, hc),
                block(hr - 1, hc),
                block(hr, hc - 1),
                block(hr - 1, hc - 1),
            ];
            let h = &hist[(hr * hist_cols + hc) * 2 * ORIENTATIONS..][..2 * ORIENTATIONS];
            let dst = &mut feat[(r * out_cols + c) * HOG_CHANNELS..][..HOG_CHANNELS];
            let mut texture = [0.0; 4];
            for o in 0..2 * ORIENTATIONS {
                let mut sum = 0.0;
                for (i, ni) in n.iter().enumerate() {
                    let t = (h[o] * ni).min(TRUNCATION);
                    sum += t;
                    texture[i] += t;
                }
                dst[o] = 0.5 * sum;
            }
            for o in 0..ORIENTATIONS {
                let v = h[o] + h[o + ORIENTATIONS];
                dst[2 * ORIENTATIONS + o] =
                    0.5 * n.iter().map(|ni| (v * ni).min(TRUNCATION)).sum::<f64>();
            }
            for (i, t) in texture.iter().enumerate() {
                dst[3 * ORIENTATIONS + i] = TEXTURE_WEIGHT * t;
            }
        }
    }
    feat
}

/// Features of `window` (in full-grid cells) on a level of `plan`.
pub fn compute_level_window(frame: &Frame, geom: &LevelGeometry, window: LevelWindow) -> FeatureMap {
    let cell = geom.cell_size;
    let hist_rows = window.rows + 2;
    let hist_cols = window.cols + 2;
    let x0 = (window.col0 * cell) as i64 - 1;
    let y0 = (window.row0 * cell) as i64 - 1;
    let region = resample_region(
        frame,
        geom.image_scale,
        x0,
        y0,
        hist_cols * cell + 2,
        hist_rows * cell + 2,
    );
    let data = hog_from_region(&region, cell, hist_rows, hist_cols);
    FeatureMap {
        rows: window.rows,
        cols: window.cols,
        data,
        scale: geom.image_scale,
        cell_size: cell,
        row0: window.row0,
        col0: window.col0,
        level: geom.index,
    }
}

/// 31-channel HOG of a frame at native scale.
pub fn compute_hog(frame: &Frame, cell_size: usize) -> Result<FeatureMap> {
    if cell_size == 0 {
        return Err(Error::InvalidConfig("cell size must be positive".into()));
    }
    let rows = (frame.height / cell_size).saturating_sub(2);
    let cols = (frame.width / cell_size).saturating_sub(2);
    if rows == 0 || cols == 0 {
        return Err(Error::FrameTooSmall(format!(
            "{}x{} frame has no interior {}px cell",
            frame.width, frame.height, cell_size
        )));
    }
    let geom = LevelGeometry {
        index: 0,
        image_scale: 1.0,
        cell_size,
        rows,
        cols,
    };
    Ok(compute_level_window(
        frame,
        &geom,
        LevelWindow {
            level: 0,
            row0: 0,
            col0: 0,
            rows,
            cols,
        },
    ))
}

/// Native-resolution pyramid: level 0 at scale 1, each next level smaller by
/// `2^(1/interval)`, stopping before a level falls under `min_level_dims`
/// (rows, cols) cells. Uses 8-pixel cells.
pub fn build_pyramid(frame: &Frame, interval: usize, min_level_dims: (usize, usize)) -> Result<FeaturePyramid> {
    build_pyramid_with(
        frame,
        &PyramidConfig {
            cell_size: 8,
            interval,
            min_level_dims,
            top_octave: false,
        },
    )
}

pub fn build_pyramid_with(frame: &Frame, config: &PyramidConfig) -> Result<FeaturePyramid> {
    let plan = PyramidPlan::new(frame.width, frame.height, config)?;
    let windows: Vec<LevelWindow> = plan
        .levels
        .iter()
        .map(|g| LevelWindow {
            level: g.index,
            row0: 0,
            col0: 0,
            rows: g.rows,
            cols: g.cols,
        })
        .collect();
    Ok(build_pyramid_windows(frame, plan, &windows))
}

/// Computes only the requested windows of a planned pyramid. Windows are
/// clipped to their level grids; empty or unknown windows are skipped.
pub fn build_pyramid_windows(frame: &Frame, plan: PyramidPlan, windows: &[LevelWindow]) -> FeaturePyramid {
    let mut maps: Vec<Option<FeatureMap>> = vec![None; plan.len()];
    for w in windows {
        let Some(geom) = plan.level(w.level) else {
            continue;
        };
        let row1 = (w.row0 + w.rows).min(geom.rows);
        let col1 = (w.col0 + w.cols).min(geom.cols);
        if w.row0 >= row1 || w.col0 >= col1 {
            continue;
        }
        let clipped = LevelWindow {
            level: w.level,
            row0: w.row0,
            col0: w.col0,
            rows: row1 - w.row0,
            cols: col1 - w.col0,
        };
        maps[w.level] = Some(compute_level_window(frame, geom, clipped));
    }
    FeaturePyramid { plan, maps }
}
