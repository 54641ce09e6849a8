//! Full-pyramid detection with greedy non-maximum suppression.

use serde::Serialize;

use crate::error::Result;
use crate::feature_pyramid::Frame;
use crate::geometry::BBox;
use crate::model::MixtureModel;
use crate::occlusion::select_subset;
use crate::tracker::{full_pyramid, placement_boxes, TrackerConfig};

pub const NMS_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    pub bbox: BBox,
    /// ψ without occlusion handling, ψ' with it.
    pub score: f64,
    pub component: usize,
    pub level: usize,
    pub root_cell: (usize, usize),
    pub visible: Vec<bool>,
    pub part_boxes: Vec<BBox>,
}

/// Greedy highest-first suppression of boxes overlapping a kept one by more
/// than `overlap`. Equal scores keep their input order.
pub fn nms(mut dets: Vec<Detection>, overlap: f64) -> Vec<Detection> {
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut kept: Vec<Detection> = Vec::new();
    for d in dets {
        if kept.iter().all(|k| k.bbox.iou(&d.bbox) <= overlap) {
            kept.push(d);
        }
    }
    kept
}

/// Every placement scoring at least `threshold`, before suppression.
pub fn detect_all(frame: &Frame, model: &MixtureModel, threshold: f64, occlusion: bool, config: &TrackerConfig) -> Result<Vec<Detection>> {
    let (pyr, maps) = full_pyramid(frame, model, config)?;
    let mut out = Vec::new();
    for map in &maps {
        let comp = &model.components[map.component];
        let strategy = config.strategy_for(comp);
        for cell in map.valid_cells() {
            let psi = map.psi_at(cell).unwrap_or(f64::NEG_INFINITY);
            // ψ' needs the per-vertex terms; skip that work when ψ alone decides
            if !occlusion && psi < threshold {
                continue;
            }
            let Some(p) = map.placement(cell) else { continue };
            let (score, visible) = if occlusion {
                let q: Vec<f64> = p
                    .vertex_scores
                    .iter()
                    .map(|&s| crate::occlusion::part_probability_with_temperature(s, config.temperature))
                    .collect::<Result<_>>()?;
                let sel = select_subset(&q, &strategy)?;
                (sel.psi_prime, sel.visible)
            } else {
                (psi, vec![true; comp.num_vertices()])
            };
            if score < threshold {
                continue;
            }
            let (bbox, part_boxes) = placement_boxes(&pyr.plan, comp, &p);
            out.push(Detection {
                bbox,
                score,
                component: p.component,
                level: p.level,
                root_cell: p.root_cell,
                visible,
                part_boxes,
            });
        }
    }
    Ok(out)
}

/// Scored boxes after NMS, best first.
pub fn detect(frame: &Frame, model: &MixtureModel, threshold: f64, occlusion: bool, config: &TrackerConfig) -> Result<Vec<Detection>> {
    Ok(nms(detect_all(frame, model, threshold, occlusion, config)?, NMS_OVERLAP))
}
