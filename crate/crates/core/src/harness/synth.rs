//! Deterministic synthetic sequences: a textured target moving over a flat,
//! cluttered background with optional scale and gain ramps and opaque
//! occluder bars. Also builds a tracking model from the target's own texture.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_pyramid::{compute_hog, Frame, HOG_CHANNELS};
use crate::geometry::BBox;
use crate::model::{
    default_subset_candidates, spread_anchors, ComponentSpec, Deformation, Filter, MixtureModel,
    PartSpec,
};

/// How the target's appearance is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TextureRecipe {
    /// Random oriented strokes on a block grid.
    Glyphs { block: usize },
    /// HOG-glyph picture of a random synthetic root filter.
    ModelFilter { model_seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    /// Size in pixels at scale 1.
    pub width: usize,
    pub height: usize,
    pub texture: TextureRecipe,
}

/// Target center at a given frame; centers between waypoints are linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Top,
    Bottom,
    Left,
    Right,
}

/// Opaque bar tracking the target over `[start, end]` (inclusive) and
/// covering `fraction` of it from `side`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccluderEvent {
    pub start: usize,
    pub end: usize,
    pub fraction: f64,
    pub side: Side,
    pub intensity: f64,
    /// Extra bar length beyond the target on each end, in pixels.
    #[serde(default)]
    pub overhang: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub background: f64,
    /// Static clutter rectangles scattered over the background.
    pub clutter: usize,
    pub target: TargetSpec,
    pub path: Vec<Waypoint>,
    /// Per-frame std-dev of the target center, in pixels.
    pub jitter: f64,
    /// Target scale at frame t is `scale_rate^t`.
    pub scale_rate: f64,
    /// Global gain at frame t is `gain_rate^t`.
    pub gain_rate: f64,
    pub occluders: Vec<OccluderEvent>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            width: 320,
            height: 240,
            frames: 50,
            background: 0.3,
            clutter: 6,
            target: TargetSpec {
                width: 48,
                height: 72,
                texture: TextureRecipe::Glyphs { block: 8 },
            },
            path: vec![Waypoint { frame: 0, x: 160.0, y: 120.0 }],
            jitter: 0.0,
            scale_rate: 1.0,
            gain_rate: 1.0,
            occluders: Vec::new(),
        }
    }
}

/// Per-frame rate that compounds to `total` over `frames` frames.
pub fn ramp_rate(total: f64, frames: usize) -> f64 {
    if frames < 2 {
        1.0
    } else {
        total.powf(1.0 / (frames - 1) as f64)
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::SpecInvalid(m.to_string()));
        if self.frames == 0 || self.width < 16 || self.height < 16 {
            return bad("need at least one frame and a 16x16 canvas");
        }
        if self.target.width < 8 || self.target.height < 8 {
            return bad("target smaller than 8x8");
        }
        if let TextureRecipe::Glyphs { block } = self.target.texture {
            if block < 2 {
                return bad("glyph block must be >= 2");
            }
        }
        if !(self.scale_rate > 0.0 && self.scale_rate.is_finite()) || !(self.gain_rate > 0.0 && self.gain_rate.is_finite()) {
            return bad("scale and gain rates must be positive");
        }
        if !(self.jitter >= 0.0) || !(0.0..=1.0).contains(&self.background) {
            return bad("jitter must be >= 0 and background in [0, 1]");
        }
        if self.path.is_empty() || self.path.windows(2).any(|w| w[0].frame >= w[1].frame) {
            return bad("path needs strictly increasing waypoint frames");
        }
        for ev in &self.occluders {
            if ev.start > ev.end || ev.end >= self.frames {
                return bad("occluder span outside the sequence");
            }
            if !(ev.fraction > 0.0 && ev.fraction <= 1.0) || !(0.0..=1.0).contains(&ev.intensity) {
                return bad("occluder fraction must be in (0, 1] and intensity in [0, 1]");
            }
        }
        Ok(())
    }

    fn center(&self, t: usize) -> (f64, f64) {
        let p = &self.path;
        if t <= p[0].frame {
            return (p[0].x, p[0].y);
        }
        for w in p.windows(2) {
            if t <= w[1].frame {
                let a = (t - w[0].frame) as f64 / (w[1].frame - w[0].frame) as f64;
                return (w[0].x + a * (w[1].x - w[0].x), w[0].y + a * (w[1].y - w[0].y));
            }
        }
        let last = p[p.len() - 1];
        (last.x, last.y)
    }

    /// Ground-truth boxes (integer pixels) for every frame.
    pub fn ground_truth(&self) -> Result<Vec<BBox>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x6a09_e667);
        let jitter = Normal::new(0.0, self.jitter.max(f64::MIN_POSITIVE)).expect("finite std-dev");
        let mut out = Vec::with_capacity(self.frames);
        for t in 0..self.frames {
            let (mut cx, mut cy) = self.center(t);
            if self.jitter > 0.0 {
                cx += jitter.sample(&mut rng);
                cy += jitter.sample(&mut rng);
            }
            let s = self.scale_rate.powi(t as i32);
            let w = (self.target.width as f64 * s).round().max(1.0);
            let h = (self.target.height as f64 * s).round().max(1.0);
            let x = (cx - w / 2.0).round();
            let y = (cy - h / 2.0).round();
            if x < 0.0 || y < 0.0 || x + w > self.width as f64 || y + h > self.height as f64 {
                return Err(Error::SpecInvalid(format!("target leaves the canvas at frame {t}")));
            }
            out.push(BBox::new(x, y, w, h));
        }
        Ok(out)
    }

    /// Occluder rectangle at frame `t` for a target at `gt`, if active.
    pub fn occluder_box(&self, t: usize, gt: &BBox) -> Option<(BBox, f64)> {
        let ev = self.occluders.iter().find(|e| (e.start..=e.end).contains(&t))?;
        let o = ev.overhang as f64;
        let b = match ev.side {
            Side::Bottom => {
                let h = (gt.h * ev.fraction).round();
                BBox::new(gt.x - o, gt.y + gt.h - h, gt.w + 2.0 * o, h + o)
            }
            Side::Top => {
                let h = (gt.h * ev.fraction).round();
                BBox::new(gt.x - o, gt.y - o, gt.w + 2.0 * o, h + o)
            }
            Side::Left => {
                let w = (gt.w * ev.fraction).round();
                BBox::new(gt.x - o, gt.y - o, w + o, gt.h + 2.0 * o)
            }
            Side::Right => {
                let w = (gt.w * ev.fraction).round();
                BBox::new(gt.x + gt.w - w, gt.y - o, w + o, gt.h + 2.0 * o)
            }
        };
        Some((b, ev.intensity))
    }
}

/// Base appearance of the target at scale 1.
pub fn target_texture(spec: &SyntheticSpec) -> Frame {
    let (w, h) = (spec.target.width, spec.target.height);
    match spec.target.texture {
        TextureRecipe::Glyphs { block } => glyph_texture(spec.seed, w, h, block),
        TextureRecipe::ModelFilter { model_seed } => {
            let cell = 8;
            let root = crate::model::make_synthetic_model(model_seed, 1, 0, (h.div_ceil(cell), w.div_ceil(cell)), (1, 1))
                .components
                .remove(0)
                .root;
            let pic = render_filter(&root, cell);
            Frame::from_fn(w, h, |x, y| pic.get(x.min(pic.width() - 1), y.min(pic.height() - 1)))
        }
    }
}

/// Random strokes, one or two per block, dark or bright on a mid tone.
pub fn glyph_texture(seed: u64, width: usize, height: usize, block: usize) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1));
    let mut f = Frame::filled(width, height, 0.25);
    for by in (0..height).step_by(block) {
        for bx in (0..width).step_by(block) {
            let strokes = rng.gen_range(1..=2);
            for _ in 0..strokes {
                let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
                let tone = if rng.gen_bool(0.5) { 0.05 } else { 0.45 };
                let (cx, cy) = (
                    bx as f64 + rng.gen_range(0.3..0.7) * block as f64,
                    by as f64 + rng.gen_range(0.3..0.7) * block as f64,
                );
                let (dx, dy) = (theta.cos(), theta.sin());
                for y in by..(by + block).min(height) {
                    for x in bx..(bx + block).min(width) {
                        let (px, py) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                        // distance to the stroke's line
                        if (px * dy - py * dx).abs() <= 1.0 {
                            f.set(x, y, tone);
                        }
                    }
                }
            }
        }
    }
    f
}

/// Picture of a filter: each cell gets a stroke per orientation, drawn along
/// the edge direction, with brightness from the positive weight of that bin.
pub fn render_filter(filter: &Filter, cell: usize) -> Frame {
    let (rows, cols) = filter.dims();
    let mut f = Frame::filled(cols * cell, rows * cell, 0.25);
    let max = filter.weights.iter().cloned().fold(1e-12f64, f64::max);
    for r in 0..rows {
        for c in 0..cols {
            let w = filter.cell(r, c);
            for o in 0..9 {
                let v = (w[o].max(0.0) + w[o + 9].max(0.0) + w[18 + o].max(0.0)) / (3.0 * max);
                if v <= 0.1 {
                    continue;
                }
                // gradient bin o points at angle o·20°; the edge runs across it
                let theta = o as f64 * std::f64::consts::PI / 9.0 + std::f64::consts::FRAC_PI_2;
                let (dx, dy) = (theta.cos(), theta.sin());
                let (cx, cy) = ((c as f64 + 0.5) * cell as f64, (r as f64 + 0.5) * cell as f64);
                for y in r * cell..(r + 1) * cell {
                    for x in c * cell..(c + 1) * cell {
                        let (px, py) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                        if (px * dy - py * dx).abs() <= 0.75 {
                            f.set(x, y, 0.25 + 0.2 * v.min(1.0));
                        }
                    }
                }
            }
        }
    }
    f
}

fn bilinear(tex: &Frame, u: f64, v: f64) -> f64 {
    let u = u.clamp(0.0, (tex.width() - 1) as f64);
    let v = v.clamp(0.0, (tex.height() - 1) as f64);
    let (x0, y0) = (u.floor() as usize, v.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(tex.width() - 1), (y0 + 1).min(tex.height() - 1));
    let (a, b) = (u - x0 as f64, v - y0 as f64);
    let top = tex.get(x0, y0) * (1.0 - a) + tex.get(x1, y0) * a;
    let bot = tex.get(x0, y1) * (1.0 - a) + tex.get(x1, y1) * a;
    top * (1.0 - b) + bot * b
}

/// Draws `tex` stretched to fill `b` (integer box), with 2x2 supersampling.
fn paint_texture(frame: &mut Frame, tex: &Frame, b: &BBox) {
    let (x0, y0) = (b.x as usize, b.y as usize);
    let sx = tex.width() as f64 / b.w;
    let sy = tex.height() as f64 / b.h;
    for y in 0..b.h as usize {
        for x in 0..b.w as usize {
            let mut acc = 0.0;
            for (ox, oy) in [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)] {
                acc += bilinear(tex, (x as f64 + ox) * sx - 0.5, (y as f64 + oy) * sy - 0.5);
            }
            frame.set(x0 + x, y0 + y, acc / 4.0);
        }
    }
}

fn fill_rect(frame: &mut Frame, b: &BBox, value: f64) {
    let x0 = b.x.max(0.0) as usize;
    let y0 = b.y.max(0.0) as usize;
    let x1 = ((b.x + b.w).max(0.0) as usize).min(frame.width());
    let y1 = ((b.y + b.h).max(0.0) as usize).min(frame.height());
    for y in y0..y1 {
        for x in x0..x1 {
            frame.set(x, y, value);
        }
    }
}

fn background(spec: &SyntheticSpec) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xbb67_ae85);
    let mut f = Frame::filled(spec.width, spec.height, spec.background);
    for _ in 0..spec.clutter {
        let w = rng.gen_range(8..=32).min(spec.width) as f64;
        let h = rng.gen_range(8..=32).min(spec.height) as f64;
        let x = rng.gen_range(0..=spec.width - w as usize) as f64;
        let y = rng.gen_range(0..=spec.height - h as usize) as f64;
        let v = rng.gen_range(0.15..0.45);
        fill_rect(&mut f, &BBox::new(x, y, w, h), v);
    }
    f
}

/// Frames before gain and clipping, with ground truth.
pub fn generate_unclipped(spec: &SyntheticSpec) -> Result<(Vec<Frame>, Vec<BBox>)> {
    let gt = spec.ground_truth()?;
    let tex = target_texture(spec);
    let bg = background(spec);
    let frames = gt
        .iter()
        .enumerate()
        .map(|(t, b)| {
            let mut f = bg.clone();
            paint_texture(&mut f, &tex, b);
            if let Some((occ, v)) = spec.occluder_box(t, b) {
                fill_rect(&mut f, &occ, v);
            }
            let gain = spec.gain_rate.powi(t as i32);
            f.map(|p| p * gain)
        })
        .collect();
    Ok((frames, gt))
}

/// Deterministic frames (clipped to [0, 1]) and ground-truth boxes.
pub fn generate_synthetic_sequence(spec: &SyntheticSpec) -> Result<(Vec<Frame>, Vec<BBox>)> {
    let (frames, gt) = generate_unclipped(spec)?;
    Ok((frames.into_iter().map(|f| f.map(|p| p.clamp(0.0, 1.0))).collect(), gt))
}

/// Shape of a model fitted to a texture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextureModelSpec {
    pub parts: usize,
    /// Part size in part-level cells (rows, cols).
    pub part_dims: (usize, usize),
    /// Response of each filter to the exact texture.
    pub target_score: f64,
    pub quadratic: f64,
    pub bias: f64,
    /// Add a second component fitted to the mirrored texture.
    pub mirrored: bool,
}

impl Default for TextureModelSpec {
    fn default() -> Self {
        Self {
            parts: 4,
            part_dims: (6, 6),
            target_score: 4.0,
            quadratic: 0.1,
            bias: 0.0,
            mirrored: false,
        }
    }
}

/// Template `s (φ - μ) / |φ - μ|²` with μ the per-channel mean, so the
/// response to φ itself is exactly `s`.
fn template(phi: &[f64], cells: usize, s: f64) -> Vec<f64> {
    let mut mu = [0.0; HOG_CHANNELS];
    for cell in phi.chunks(HOG_CHANNELS) {
        for (m, v) in mu.iter_mut().zip(cell) {
            *m += v / cells as f64;
        }
    }
    let centered: Vec<f64> = phi
        .iter()
        .enumerate()
        .map(|(i, v)| v - mu[i % HOG_CHANNELS])
        .collect();
    let norm: f64 = centered.iter().map(|v| v * v).sum();
    if norm <= 0.0 {
        return vec![0.0; phi.len()];
    }
    centered.iter().map(|v| s * v / norm).collect()
}

/// Fits a star model to a texture whose size is a multiple of `cell`:
/// the root at `cell` pixels per cell, parts one octave finer.
pub fn model_from_texture(tex: &Frame, background: f64, cell: usize, spec: &TextureModelSpec) -> Result<MixtureModel> {
    if tex.width() % cell != 0 || tex.height() % cell != 0 || cell % 2 != 0 {
        return Err(Error::SpecInvalid(format!(
            "texture {}x{} is not a multiple of the even cell size {cell}",
            tex.width(),
            tex.height()
        )));
    }
    let mut components = vec![component_from_texture(tex, background, cell, spec)?];
    if spec.mirrored {
        let flipped = Frame::from_fn(tex.width(), tex.height(), |x, y| tex.get(tex.width() - 1 - x, y));
        components.push(component_from_texture(&flipped, background, cell, spec)?);
    }
    Ok(MixtureModel {
        class: "synthetic-target".into(),
        provenance: format!("model_from_texture({}x{}, cell {cell})", tex.width(), tex.height()),
        components,
    })
}

fn component_from_texture(tex: &Frame, background: f64, cell: usize, spec: &TextureModelSpec) -> Result<ComponentSpec> {
    let pad = 2 * cell;
    let canvas = Frame::from_fn(tex.width() + 2 * pad, tex.height() + 2 * pad, |x, y| {
        if x >= pad && y >= pad && x < pad + tex.width() && y < pad + tex.height() {
            tex.get(x - pad, y - pad)
        } else {
            background
        }
    });
    let (rows, cols) = (tex.height() / cell, tex.width() / cell);
    // cell (r, c) starts at pixel (c + 1)·cell, so the texture starts at cell pad/cell - 1
    let coarse = compute_hog(&canvas, cell)?;
    let off = pad / cell - 1;
    let root_phi = coarse.crop(off, off, rows, cols)?;
    let root = Filter::new(rows, cols, template(root_phi.data(), rows * cols, spec.target_score))?;

    let half = cell / 2;
    let fine = compute_hog(&canvas, half)?;
    let fine_off = pad / half - 1;
    let (pr, pc) = spec.part_dims;
    let extent = (2 * rows, 2 * cols);
    if pr > extent.0 || pc > extent.1 {
        return Err(Error::SpecInvalid("part larger than the root extent".into()));
    }
    let mut parts = Vec::with_capacity(spec.parts);
    for (ax, ay) in spread_anchors(spec.parts, extent, spec.part_dims) {
        let phi = fine.crop(fine_off + ay as usize, fine_off + ax as usize, pr, pc)?;
        parts.push(PartSpec {
            filter: Filter::new(pr, pc, template(phi.data(), pr * pc, spec.target_score))?,
            anchor: (ax, ay),
            deform: Deformation::new(0.0, 0.0, spec.quadratic, spec.quadratic),
            resolution_offset: 1,
        });
    }
    let subset_candidates = default_subset_candidates(&root, &parts);
    Ok(ComponentSpec {
        root,
        parts,
        bias: spec.bias,
        subset_candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_pyramid::FeatureMap;
    use crate::scoring::filter_response;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            seed: 5,
            frames: 12,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn static_sequence_is_constant() {
        let (frames, gt) = generate_synthetic_sequence(&spec()).unwrap();
        assert_eq!(frames.len(), 12);
        assert!(frames.windows(2).all(|w| w[0] == w[1]));
        assert!(gt.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(gt[0], BBox::new(136.0, 84.0, 48.0, 72.0));
    }

    #[test]
    fn identical_specs_give_identical_frames() {
        let mut s = spec();
        s.jitter = 1.5;
        s.path.push(Waypoint { frame: 11, x: 200.0, y: 100.0 });
        let a = generate_synthetic_sequence(&s).unwrap();
        let b = generate_synthetic_sequence(&s).unwrap();
        assert_eq!(a, b);
        s.seed += 1;
        assert_ne!(generate_synthetic_sequence(&s).unwrap().0, a.0);
    }

    #[test]
    fn gain_ramp_doubles_mean_intensity() {
        let mut s = spec();
        s.gain_rate = ramp_rate(2.0, s.frames);
        let (frames, _) = generate_unclipped(&s).unwrap();
        let ratio = frames[11].mean() / frames[0].mean();
        assert!((ratio - 2.0).abs() < 1e-9, "ratio {ratio}");
    }

    #[test]
    fn occluder_coverage_is_exact_in_span() {
        let mut s = spec();
        s.frames = 80;
        s.path = vec![Waypoint { frame: 0, x: 100.0, y: 120.0 }, Waypoint { frame: 79, x: 220.0, y: 110.0 }];
        s.occluders.push(OccluderEvent {
            start: 40,
            end: 70,
            fraction: 0.5,
            side: Side::Bottom,
            intensity: 0.6,
            overhang: 4,
        });
        let (frames, gt) = generate_synthetic_sequence(&s).unwrap();
        for (t, (f, b)) in frames.iter().zip(&gt).enumerate() {
            // count target pixels painted with the occluder value
            let mut covered = 0usize;
            for y in b.y as usize..(b.y + b.h) as usize {
                for x in b.x as usize..(b.x + b.w) as usize {
                    covered += (f.get(x, y) == 0.6) as usize;
                }
            }
            let frac = covered as f64 / b.area();
            if (40..=70).contains(&t) {
                assert!(frac >= 0.5, "frame {t}: {frac}");
            } else {
                assert_eq!(frac, 0.0, "frame {t}");
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = spec();
        s.scale_rate = 0.0;
        assert!(matches!(generate_synthetic_sequence(&s), Err(Error::SpecInvalid(_))));
        let mut s = spec();
        s.occluders.push(OccluderEvent {
            start: 5,
            end: 40,
            fraction: 0.5,
            side: Side::Top,
            intensity: 0.5,
            overhang: 0,
        });
        assert!(s.validate().is_err());
        let mut s = spec();
        s.path = vec![Waypoint { frame: 0, x: 5.0, y: 5.0 }];
        assert!(s.ground_truth().is_err());
    }

    #[test]
    fn fitted_templates_respond_with_target_score() {
        let s = spec();
        let tex = target_texture(&s);
        let model = model_from_texture(&tex, s.background, 8, &TextureModelSpec::default()).unwrap();
        let comp = &model.components[0];
        assert_eq!(comp.root.dims(), (9, 6));
        assert_eq!(comp.parts.len(), 4);
        // the root template dotted with its own features
        let pad = 16;
        let canvas = Frame::from_fn(48 + 2 * pad, 72 + 2 * pad, |x, y| {
            if (pad..pad + 48).contains(&x) && (pad..pad + 72).contains(&y) {
                tex.get(x - pad, y - pad)
            } else {
                s.background
            }
        });
        let hog: FeatureMap = compute_hog(&canvas, 8).unwrap();
        let resp = filter_response(&hog, &comp.root).unwrap();
        assert!((resp.get(1, 1) - 4.0).abs() < 1e-9);
        assert!(crate::model::validate_model(&model).is_empty());
    }

    #[test]
    fn rendered_filter_has_filter_size() {
        let m = crate::model::make_synthetic_model(2, 1, 0, (3, 5), (1, 1));
        let pic = render_filter(&m.components[0].root, 8);
        assert_eq!((pic.width(), pic.height()), (40, 24));
        assert!(pic.data().iter().any(|&v| v > 0.25));
    }
}
