//! Dynamic CRF tracking over per-vertex visibility posteriors.
//!
//! Each frame, candidate placements inside a search window around the previous
//! root are scored per vertex. A vertex's local energy is its observation term
//! (logistic probability, or raw score in [`EnergyMode::RawScore`]) weighted by
//! the expected temporal potential under last frame's posterior. The placement
//! energy is the best subset mean of those local energies; the partition
//! function is never needed because only the ordering of energies matters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_pyramid::{
    build_pyramid_windows, build_pyramid_with, FeaturePyramid, Frame, LevelGeometry, LevelWindow,
    PyramidConfig, PyramidPlan,
};
use crate::geometry::BBox;
use crate::model::{ComponentSpec, MixtureModel};
use crate::occlusion::{
    logistic, part_probability_with_temperature, select_subset, subset_mean, GreedyConfig,
    SubsetSelection, SubsetStrategy,
};
use crate::scoring::{component_score_map, part_level, score_pyramid, ComponentScoreMap, Placement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    /// Weight the logistic vertex probability.
    Probability,
    /// Weight the raw vertex score.
    RawScore,
}

/// Which subset family the tracker searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetMode {
    /// The component's own candidate family.
    Model,
    /// Only the full vertex set (no occlusion handling).
    FullOnly,
    /// Greedy prefixes of at least `min_size` vertices (default: half).
    Greedy { min_size: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Covariance over (dcol, drow, dlevel) in previous-level cells and levels.
    pub motion_covariance: [[f64; 3]; 3],
    pub level_half_width: usize,
    /// Search radius in standard deviations of the spatial motion.
    pub radius_multiplier: f64,
    pub tau_lost: f64,
    /// Consecutive low-energy frames before the track is lost.
    pub patience: usize,
    pub energy_mode: EnergyMode,
    pub subsets: SubsetMode,
    pub temperature: f64,
    /// Minimum IoU with the initial box for an initialization candidate.
    pub init_overlap: f64,
    pub pyramid: PyramidConfig,
    /// Re-run initialization from the last box after a loss.
    pub redetect: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        let interval = PyramidConfig::default().interval;
        Self {
            motion_covariance: [[16.0, 0.0, 0.0], [0.0, 16.0, 0.0], [0.0, 0.0, 1.0]],
            level_half_width: interval,
            radius_multiplier: 3.0,
            tau_lost: 0.4,
            patience: 10,
            energy_mode: EnergyMode::Probability,
            subsets: SubsetMode::Model,
            temperature: 1.0,
            init_overlap: 0.7,
            pyramid: PyramidConfig::default(),
            redetect: false,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        MotionKernel::new(&self.motion_covariance)?;
        if self.radius_multiplier <= 0.0 || !self.radius_multiplier.is_finite() {
            return Err(Error::InvalidConfig("radius multiplier must be positive".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidConfig("temperature must be positive".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidConfig("patience must be >= 1".into()));
        }
        if let SubsetMode::Greedy { min_size: Some(m) } = self.subsets {
            if m < 2 {
                return Err(Error::InvalidConfig("greedy min_size must be >= 2".into()));
            }
        }
        Ok(())
    }

    /// Subset search used for `component`.
    pub fn strategy_for(&self, component: &ComponentSpec) -> SubsetStrategy {
        match self.subsets {
            SubsetMode::Model => SubsetStrategy::Candidates(component.subset_candidates.clone()),
            SubsetMode::FullOnly => SubsetStrategy::Candidates(vec![component.full_set()]),
            SubsetMode::Greedy { min_size } => {
                let mut cfg = GreedyConfig::for_vertices(component.num_vertices());
                if let Some(m) = min_size {
                    cfg.min_size = m.max(cfg.min_size).min(component.num_vertices());
                }
                SubsetStrategy::Greedy(cfg)
            }
        }
    }
}

/// Trivariate normal density with precomputed inverse and normalizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionKernel {
    inverse: [[f64; 3]; 3],
    norm: f64,
    sigma_xy: (f64, f64),
}

impl MotionKernel {
    pub fn new(cov: &[[f64; 3]; 3]) -> Result<Self> {
        // Cholesky; fails unless symmetric positive definite.
        for i in 0..3 {
            for j in 0..3 {
                if !cov[i][j].is_finite() || (cov[i][j] - cov[j][i]).abs() > 1e-12 * (1.0 + cov[i][j].abs()) {
                    return Err(Error::SingularCovariance);
                }
            }
        }
        let mut l = [[0.0f64; 3]; 3];
        for i in 0..3 {
            for j in 0..=i {
                let mut s = cov[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::SingularCovariance);
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        let det = (l[0][0] * l[1][1] * l[2][2]).powi(2);
        // inverse of L, then L^-T L^-1
        let mut li = [[0.0f64; 3]; 3];
        for i in 0..3 {
            li[i][i] = 1.0 / l[i][i];
            for j in 0..i {
                let mut s = 0.0;
                for k in j..i {
                    s -= l[i][k] * li[k][j];
                }
                li[i][j] = s / l[i][i];
            }
        }
        let mut inverse = [[0.0f64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                inverse[i][j] = (0..3).map(|k| li[k][i] * li[k][j]).sum();
            }
        }
        Ok(Self {
            inverse,
            norm: (2.0 * std::f64::consts::PI).powf(-1.5) / det.sqrt(),
            sigma_xy: (cov[0][0].sqrt(), cov[1][1].sqrt()),
        })
    }

    pub fn mahalanobis_sq(&self, d: [f64; 3]) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += d[i] * self.inverse[i][j] * d[j];
            }
        }
        s
    }

    pub fn density(&self, d: [f64; 3]) -> f64 {
        self.norm * (-0.5 * self.mahalanobis_sq(d)).exp()
    }

    /// Density at the mode.
    pub fn peak(&self) -> f64 {
        self.norm
    }

    /// Density relative to the mode, in (0, 1].
    pub fn relative(&self, d: [f64; 3]) -> f64 {
        (-0.5 * self.mahalanobis_sq(d)).exp()
    }
}

fn deformation_sigmoid(v_now: (f64, f64), v_prev: (f64, f64)) -> f64 {
    let d2 = (v_now.0 - v_prev.0).powi(2) + (v_now.1 - v_prev.1).powi(2);
    1.0 / (1.0 + (-d2).exp())
}

/// Transition potential between a vertex's state now and last frame: motion
/// density when the states agree, deformation-change sigmoid when they differ.
pub fn temporal_potential(
    state_now: bool,
    state_prev: bool,
    pos_delta: [f64; 3],
    v_now: (f64, f64),
    v_prev: (f64, f64),
    covariance: &[[f64; 3]; 3],
) -> Result<f64> {
    let kernel = MotionKernel::new(covariance)?;
    Ok(if state_now == state_prev {
        kernel.density(pos_delta)
    } else {
        deformation_sigmoid(v_now, v_prev)
    })
}

/// Per-vertex posterior carried between frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexPosterior {
    /// Marginal probability that the vertex is visible.
    pub p_visible: f64,
    /// Pixel center of the vertex box (latent best position when occluded).
    pub center: (f64, f64),
    pub pixels_per_cell: f64,
    pub level: usize,
    /// Part displacement from its anchor, in part cells.
    pub displacement: (i32, i32),
}

impl VertexPosterior {
    pub fn p_hidden(&self) -> f64 {
        1.0 - self.p_visible
    }
}

/// A vertex of a candidate placement, relative to last frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexCandidate {
    pub pos_delta: [f64; 3],
    pub displacement: (f64, f64),
}

/// `sum_b V(1 | b) p(b)` over the previous binary state of the vertex.
pub fn expected_temporal(
    posterior: &VertexPosterior,
    candidate: &VertexCandidate,
    covariance: &[[f64; 3]; 3],
) -> Result<f64> {
    let prev_v = (posterior.displacement.0 as f64, posterior.displacement.1 as f64);
    let same = temporal_potential(true, true, candidate.pos_delta, candidate.displacement, prev_v, covariance)?;
    let diff = temporal_potential(true, false, candidate.pos_delta, candidate.displacement, prev_v, covariance)?;
    Ok(posterior.p_visible * same + posterior.p_hidden() * diff)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub placement: Placement,
    pub posteriors: Vec<VertexPosterior>,
    pub component: usize,
    pub visible: Vec<bool>,
    pub root_box: BBox,
    pub low_energy_count: usize,
    pub frame_index: usize,
    pub lost: bool,
}

/// Per-frame structured output.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub frame: usize,
    pub root_box: BBox,
    pub part_boxes: Vec<BBox>,
    pub visible: Vec<bool>,
    pub component: usize,
    pub level: usize,
    pub energy: f64,
    pub psi_prime: f64,
    pub lost: bool,
    /// Feature cells computed for this frame.
    pub feature_cells: usize,
}

pub fn is_lost(state: &TrackState, config: &TrackerConfig) -> bool {
    state.lost || state.low_energy_count >= config.patience
}

fn box_at(geom: &LevelGeometry, cell: (i64, i64), dims: (usize, usize)) -> BBox {
    let ppc = geom.pixels_per_cell();
    BBox::new(
        (cell.1 as f64 + 1.0) * ppc,
        (cell.0 as f64 + 1.0) * ppc,
        dims.1 as f64 * ppc,
        dims.0 as f64 * ppc,
    )
}

/// Root and part boxes of a placement.
pub fn placement_boxes(plan: &PyramidPlan, component: &ComponentSpec, p: &Placement) -> (BBox, Vec<BBox>) {
    let geom = &plan.levels[p.level];
    let root = box_at(geom, (p.root_cell.0 as i64, p.root_cell.1 as i64), component.root.dims());
    let parts = p
        .parts
        .iter()
        .zip(&component.parts)
        .map(|(pp, spec)| box_at(&plan.levels[pp.level], pp.cell, spec.filter.dims()))
        .collect();
    (root, parts)
}

fn vertex_posteriors(plan: &PyramidPlan, component: &ComponentSpec, p: &Placement, q: &[f64]) -> Vec<VertexPosterior> {
    let (root, parts) = placement_boxes(plan, component, p);
    let mut out = vec![VertexPosterior {
        p_visible: q[0],
        center: root.center(),
        pixels_per_cell: plan.levels[p.level].pixels_per_cell(),
        level: p.level,
        displacement: (0, 0),
    }];
    for (j, (b, pp)) in parts.iter().zip(&p.parts).enumerate() {
        out.push(VertexPosterior {
            p_visible: q[j + 1],
            center: b.center(),
            pixels_per_cell: plan.levels[pp.level].pixels_per_cell(),
            level: pp.level,
            displacement: pp.displacement,
        });
    }
    out
}

fn probabilities(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    scores
        .iter()
        .map(|&s| part_probability_with_temperature(s, temperature))
        .collect()
}

/// Smallest root level admitting every part level of the model.
fn min_root_level(model: &MixtureModel, interval: usize) -> usize {
    model
        .components
        .iter()
        .map(|c| c.max_resolution_offset() as usize * interval)
        .max()
        .unwrap_or(0)
}

fn pyramid_config_for(model: &MixtureModel, config: &TrackerConfig) -> PyramidConfig {
    let min_r = model.components.iter().map(|c| c.root.rows).min().unwrap_or(1);
    let min_c = model.components.iter().map(|c| c.root.cols).min().unwrap_or(1);
    PyramidConfig {
        min_level_dims: (min_r, min_c),
        ..config.pyramid.clone()
    }
}

/// Full-pyramid scoring of a frame.
pub fn full_pyramid(frame: &Frame, model: &MixtureModel, config: &TrackerConfig) -> Result<(FeaturePyramid, Vec<ComponentScoreMap>)> {
    let pyr = build_pyramid_with(frame, &pyramid_config_for(model, config))?;
    let maps = score_pyramid(&pyr, &model.components);
    Ok((pyr, maps))
}

/// Initializes from the best occlusion-aware placement overlapping `gt_box`
/// by at least `config.init_overlap`.
pub fn initialize(frame: &Frame, model: &MixtureModel, gt_box: &BBox, config: &TrackerConfig) -> Result<TrackState> {
    config.validate()?;
    let frame_box = BBox::new(0.0, 0.0, frame.width() as f64, frame.height() as f64);
    if gt_box.area() <= 0.0 || frame_box.intersection(gt_box) < gt_box.area() * 0.5 {
        return Err(Error::OutOfBounds(format!("initial box {gt_box:?} is not inside the frame")));
    }
    let (pyr, maps) = full_pyramid(frame, model, config)?;
    let mut best: Option<(f64, Placement, Vec<f64>, SubsetSelection)> = None;
    for map in &maps {
        let comp = &model.components[map.component];
        let geom = &pyr.plan.levels[map.level];
        let strategy = config.strategy_for(comp);
        for cell in map.valid_cells() {
            let b = box_at(geom, (cell.0 as i64, cell.1 as i64), comp.root.dims());
            if b.iou(gt_box) < config.init_overlap {
                continue;
            }
            let Some(p) = map.placement(cell) else { continue };
            let q = probabilities(&p.vertex_scores, config.temperature)?;
            let sel = select_subset(&q, &strategy)?;
            if best.as_ref().map_or(true, |(v, ..)| sel.psi_prime > *v) {
                best = Some((sel.psi_prime, p, q, sel));
            }
        }
    }
    let (_, placement, q, sel) = best.ok_or(Error::NoValidInitialization)?;
    let comp = &model.components[placement.component];
    let (root_box, _) = placement_boxes(&pyr.plan, comp, &placement);
    Ok(TrackState {
        posteriors: vertex_posteriors(&pyr.plan, comp, &placement, &q),
        component: placement.component,
        visible: sel.visible,
        root_box,
        placement,
        low_energy_count: 0,
        frame_index: 0,
        lost: false,
    })
}

/// Root cells searched for one component on one level (inclusive bounds).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchWindow {
    pub component: usize,
    pub level: usize,
    pub rows: (usize, usize),
    pub cols: (usize, usize),
}

impl SearchWindow {
    pub fn contains(&self, cell: (usize, usize)) -> bool {
        (self.rows.0..=self.rows.1).contains(&cell.0) && (self.cols.0..=self.cols.1).contains(&cell.1)
    }

    pub fn cells(&self) -> usize {
        (self.rows.1 - self.rows.0 + 1) * (self.cols.1 - self.cols.0 + 1)
    }
}

/// Search windows for the next frame, one per (component, level).
pub fn search_windows(state: &TrackState, plan: &PyramidPlan, model: &MixtureModel, config: &TrackerConfig) -> Result<Vec<SearchWindow>> {
    let kernel = MotionKernel::new(&config.motion_covariance)?;
    let prev = &state.posteriors[0];
    let lo = state
        .placement
        .level
        .saturating_sub(config.level_half_width)
        .max(min_root_level(model, plan.interval));
    let hi = (state.placement.level + config.level_half_width).min(plan.len().saturating_sub(1));
    let mut out = Vec::new();
    for level in lo..=hi {
        let geom = &plan.levels[level];
        let rel = prev.pixels_per_cell / geom.pixels_per_cell();
        let rad_c = (config.radius_multiplier * kernel.sigma_xy.0 * rel).ceil() as i64;
        let rad_r = (config.radius_multiplier * kernel.sigma_xy.1 * rel).ceil() as i64;
        for (ci, comp) in model.components.iter().enumerate() {
            let (fr, fc) = comp.root.dims();
            if fr > geom.rows || fc > geom.cols {
                continue;
            }
            let (r, c) = geom.center_to_cell(prev.center.0, prev.center.1, (fr, fc));
            let max_r = (geom.rows - fr) as i64;
            let max_c = (geom.cols - fc) as i64;
            let r0 = (r - rad_r).max(0);
            let r1 = (r + rad_r).min(max_r);
            let c0 = (c - rad_c).max(0);
            let c1 = (c + rad_c).min(max_c);
            if r0 > r1 || c0 > c1 {
                continue;
            }
            out.push(SearchWindow {
                component: ci,
                level,
                rows: (r0 as usize, r1 as usize),
                cols: (c0 as usize, c1 as usize),
            });
        }
    }
    Ok(out)
}

/// Feature windows needed to score every search window exactly.
fn feature_windows(windows: &[SearchWindow], model: &MixtureModel, plan: &PyramidPlan) -> Vec<LevelWindow> {
    // (row0, row1, col0, col1) inclusive, per level
    let mut spans: Vec<Option<(i64, i64, i64, i64)>> = vec![None; plan.len()];
    let mut add = |level: usize, r0: i64, r1: i64, c0: i64, c1: i64| {
        let g = &plan.levels[level];
        let (r0, c0) = (r0.max(0), c0.max(0));
        let (r1, c1) = (r1.min(g.rows as i64 - 1), c1.min(g.cols as i64 - 1));
        if r0 > r1 || c0 > c1 {
            return;
        }
        spans[level] = Some(match spans[level] {
            None => (r0, r1, c0, c1),
            Some((a, b, c, d)) => (a.min(r0), b.max(r1), c.min(c0), d.max(c1)),
        });
    };
    for w in windows {
        let comp = &model.components[w.component];
        let (fr, fc) = comp.root.dims();
        add(
            w.level,
            w.rows.0 as i64,
            (w.rows.1 + fr - 1) as i64,
            w.cols.0 as i64,
            (w.cols.1 + fc - 1) as i64,
        );
        for part in &comp.parts {
            let Some(pl) = w.level.checked_sub(part.resolution_offset as usize * plan.interval) else {
                continue;
            };
            let f = part.projection_factor() as i64;
            let margin = part.filter.rows.max(part.filter.cols) as i64;
            let (ax, ay) = part.anchor;
            let pr0 = f * (w.rows.0 as i64 + 1) - 1 + ay - margin;
            let pr1 = f * (w.rows.1 as i64 + 1) - 1 + ay + margin + part.filter.rows as i64 - 1;
            let pc0 = f * (w.cols.0 as i64 + 1) - 1 + ax - margin;
            let pc1 = f * (w.cols.1 as i64 + 1) - 1 + ax + margin + part.filter.cols as i64 - 1;
            add(pl, pr0, pr1, pc0, pc1);
        }
    }
    spans
        .iter()
        .enumerate()
        .filter_map(|(level, s)| {
            s.map(|(r0, r1, c0, c1)| LevelWindow {
                level,
                row0: r0 as usize,
                col0: c0 as usize,
                rows: (r1 - r0 + 1) as usize,
                cols: (c1 - c0 + 1) as usize,
            })
        })
        .collect()
}

/// A scored candidate placement with its per-vertex terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub placement: Placement,
    /// Logistic vertex probabilities.
    pub q: Vec<f64>,
    /// Temporal factors relative to the motion kernel's mode.
    pub temporal: Vec<f64>,
    /// Local energies (observation term times temporal factor).
    pub energies: Vec<f64>,
    /// Squashed component bias added to the subset mean.
    pub bias_term: f64,
}

/// Everything computed for one frame before the argmax.
#[derive(Debug, Clone)]
pub struct StepEvaluation {
    pub candidates: Vec<Candidate>,
    pub windows: Vec<SearchWindow>,
    pub pyramid: FeaturePyramid,
}

/// Scores every candidate placement in the restricted search region.
pub fn evaluate_step(state: &TrackState, frame: &Frame, model: &MixtureModel, config: &TrackerConfig) -> Result<StepEvaluation> {
    let kernel = MotionKernel::new(&config.motion_covariance)?;
    let plan = PyramidPlan::new(frame.width(), frame.height(), &pyramid_config_for(model, config))?;
    let windows = search_windows(state, &plan, model, config)?;
    if windows.is_empty() {
        return Err(Error::EmptySearchWindow);
    }
    let needed = feature_windows(&windows, model, &plan);
    let pyramid = build_pyramid_windows(frame, plan, &needed);
    let prev_level = state.placement.level as f64;
    let mut candidates = Vec::new();
    for w in &windows {
        let comp = &model.components[w.component];
        if w.level < min_root_level(model, pyramid.interval())
            || comp
                .parts
                .iter()
                .any(|p| part_level(&pyramid, w.level, p.resolution_offset).is_none())
        {
            continue;
        }
        let map = match component_score_map(&pyramid, w.component, comp, w.level) {
            Ok(m) => m,
            Err(Error::MissingLevel(_)) | Err(Error::FilterTooLarge { .. }) => continue,
            Err(e) => return Err(e),
        };
        let same_component = w.component == state.component;
        for row in w.rows.0..=w.rows.1 {
            for col in w.cols.0..=w.cols.1 {
                let Some(placement) = map.placement((row, col)) else { continue };
                let q = probabilities(&placement.vertex_scores, config.temperature)?;
                let (root_box, part_boxes) = placement_boxes(&pyramid.plan, comp, &placement);
                let dl = placement.level as f64 - prev_level;
                let root_prev = &state.posteriors[0];
                let mut temporal = Vec::with_capacity(q.len());
                let mut vertex_factor = |center: (f64, f64), v: (i32, i32), prev: &VertexPosterior, v_prev: (i32, i32)| {
                    let d = [
                        (center.0 - prev.center.0) / prev.pixels_per_cell,
                        (center.1 - prev.center.1) / prev.pixels_per_cell,
                        dl,
                    ];
                    let same = kernel.relative(d);
                    let diff = deformation_sigmoid(
                        (v.0 as f64, v.1 as f64),
                        (v_prev.0 as f64, v_prev.1 as f64),
                    );
                    temporal.push(prev.p_visible * same + prev.p_hidden() * diff);
                };
                vertex_factor(root_box.center(), (0, 0), root_prev, (0, 0));
                for (j, (b, pp)) in part_boxes.iter().zip(&placement.parts).enumerate() {
                    if same_component {
                        let prev = &state.posteriors[j + 1];
                        vertex_factor(b.center(), pp.displacement, prev, prev.displacement);
                    } else {
                        // no vertex correspondence across components: parts
                        // inherit the root's motion and a neutral deformation
                        let shifted = (
                            root_prev.center.0 + (b.center().0 - root_box.center().0),
                            root_prev.center.1 + (b.center().1 - root_box.center().1),
                        );
                        let proxy = VertexPosterior {
                            center: shifted,
                            ..root_prev.clone()
                        };
                        vertex_factor(b.center(), pp.displacement, &proxy, (0, 0));
                    }
                }
                let energies = match config.energy_mode {
                    EnergyMode::Probability => q.iter().zip(&temporal).map(|(a, t)| a * t).collect(),
                    EnergyMode::RawScore => placement
                        .vertex_scores
                        .iter()
                        .zip(&temporal)
                        .map(|(s, t)| s * t)
                        .collect(),
                };
                candidates.push(Candidate {
                    bias_term: logistic(comp.bias) - 0.5,
                    placement,
                    q,
                    temporal,
                    energies,
                });
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::EmptySearchWindow);
    }
    Ok(StepEvaluation {
        candidates,
        windows,
        pyramid,
    })
}

/// Best candidate under energies multiplied by `scale`; returns its index,
/// the subset chosen over its weighted energies and the placement energy.
pub fn choose_candidate(
    candidates: &[Candidate],
    model: &MixtureModel,
    config: &TrackerConfig,
    scale: f64,
) -> Result<(usize, SubsetSelection, f64)> {
    let mut best: Option<(usize, SubsetSelection, f64)> = None;
    for (i, cand) in candidates.iter().enumerate() {
        let comp = &model.components[cand.placement.component];
        let scaled: Vec<f64> = cand.energies.iter().map(|e| e * scale).collect();
        let sel = select_subset(&scaled, &config.strategy_for(comp))?;
        let energy = sel.psi_prime + scale * cand.bias_term;
        if best.as_ref().map_or(true, |(_, _, e)| energy > *e) {
            best = Some((i, sel, energy));
        }
    }
    best.ok_or(Error::EmptySearchWindow)
}

/// One DCRF filtering step.
pub fn track_step(state: &TrackState, frame: &Frame, model: &MixtureModel, config: &TrackerConfig) -> Result<(TrackState, FrameOutput)> {
    if is_lost(state, config) {
        return Err(Error::TrackLost);
    }
    let eval = evaluate_step(state, frame, model, config)?;
    let (idx, sel, energy) = choose_candidate(&eval.candidates, model, config, 1.0)?;
    let cand = &eval.candidates[idx];
    let comp = &model.components[cand.placement.component];
    let (root_box, part_boxes) = placement_boxes(&eval.pyramid.plan, comp, &cand.placement);
    let psi_prime = subset_mean(&cand.q, &sel.subset)?;
    let low_energy_count = if energy < config.tau_lost {
        state.low_energy_count + 1
    } else {
        0
    };
    let lost = low_energy_count >= config.patience;
    let next = TrackState {
        posteriors: vertex_posteriors(&eval.pyramid.plan, comp, &cand.placement, &cand.q),
        component: cand.placement.component,
        visible: sel.visible.clone(),
        root_box,
        placement: cand.placement.clone(),
        low_energy_count,
        frame_index: state.frame_index + 1,
        lost,
    };
    let out = FrameOutput {
        frame: next.frame_index,
        root_box,
        part_boxes,
        visible: sel.visible,
        component: cand.placement.component,
        level: cand.placement.level,
        energy,
        psi_prime,
        lost,
        feature_cells: eval.pyramid.computed_cells(),
    };
    Ok((next, out))
}

/// Output record describing the initialization frame.
pub fn initial_output(state: &TrackState, frame: &Frame, model: &MixtureModel, config: &TrackerConfig) -> Result<FrameOutput> {
    let plan = PyramidPlan::new(frame.width(), frame.height(), &pyramid_config_for(model, config))?;
    let comp = &model.components[state.component];
    let (root_box, part_boxes) = placement_boxes(&plan, comp, &state.placement);
    let q: Vec<f64> = state.posteriors.iter().map(|p| p.p_visible).collect();
    let subset: Vec<usize> = (0..q.len()).filter(|&i| state.visible[i]).collect();
    let psi_prime = subset_mean(&q, &subset)?;
    Ok(FrameOutput {
        frame: state.frame_index,
        root_box,
        part_boxes,
        visible: state.visible.clone(),
        component: state.component,
        level: state.placement.level,
        energy: psi_prime + logistic(comp.bias) - 0.5,
        psi_prime,
        lost: false,
        feature_cells: plan.total_cells(),
    })
}
