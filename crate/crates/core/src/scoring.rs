//! Filter responses, generalized distance transforms and per-component score
//! maps over a feature pyramid.
//!
//! Placements are addressed in full-grid cells of their level. A root at cell
//! `r` projects to part cell `f*(r + 1) - 1 + anchor` on the level `f = 2^offset`
//! times finer, which lines up the pixel origins of both grids.

use crate::error::{Error, Result};
use crate::feature_pyramid::{FeatureMap, FeaturePyramid, HOG_CHANNELS};
use crate::model::{ComponentSpec, Filter};

pub use crate::model::Deformation;

/// Valid-mode filter responses on one level (or a cropped window of it).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub level: usize,
    /// Full-grid cell of entry (0, 0).
    pub row0: usize,
    pub col0: usize,
}

impl ScoreMap {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self {
            rows,
            cols,
            data,
            level: 0,
            row0: 0,
            col0: 0,
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// Value at a full-grid cell, `None` outside the map.
    pub fn at(&self, row: i64, col: i64) -> Option<f64> {
        let r = row - self.row0 as i64;
        let c = col - self.col0 as i64;
        if r < 0 || c < 0 || r >= self.rows as i64 || c >= self.cols as i64 {
            None
        } else {
            Some(self.get(r as usize, c as usize))
        }
    }
}

/// Max-over-displacement scores with the attaining displacement `(dx, dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformedScoreMap {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub argmax: Vec<(i32, i32)>,
    pub level: usize,
    pub row0: usize,
    pub col0: usize,
}

impl DeformedScoreMap {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> (f64, (i32, i32)) {
        let i = row * self.cols + col;
        (self.values[i], self.argmax[i])
    }

    pub fn at(&self, row: i64, col: i64) -> Option<(f64, (i32, i32))> {
        let r = row - self.row0 as i64;
        let c = col - self.col0 as i64;
        if r < 0 || c < 0 || r >= self.rows as i64 || c >= self.cols as i64 {
            None
        } else {
            Some(self.get(r as usize, c as usize))
        }
    }
}

/// Cross-correlation of a 31-channel filter with a feature map (valid mode).
pub fn filter_response(level: &FeatureMap, filter: &Filter) -> Result<ScoreMap> {
    if filter.rows > level.rows() || filter.cols > level.cols() || filter.rows == 0 || filter.cols == 0 {
        return Err(Error::FilterTooLarge {
            filter_rows: filter.rows,
            filter_cols: filter.cols,
            level_rows: level.rows(),
            level_cols: level.cols(),
        });
    }
    let rows = level.rows() - filter.rows + 1;
    let cols = level.cols() - filter.cols + 1;
    let stride = level.cols() * HOG_CHANNELS;
    let span = filter.cols * HOG_CHANNELS;
    let feats = level.data();
    let mut data = vec![0.0; rows * cols];
    for r in 0..rows {
        for fr in 0..filter.rows {
            let w = &filter.weights[fr * span..(fr + 1) * span];
            let line = &feats[(r + fr) * stride..];
            for c in 0..cols {
                let x = &line[c * HOG_CHANNELS..c * HOG_CHANNELS + span];
                data[r * cols + c] += w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }
    Ok(ScoreMap {
        rows,
        cols,
        data,
        level: level.level,
        row0: level.row0,
        col0: level.col0,
    })
}

/// One-dimensional transform: `out[p] = max_q f[q] - a*(q-p) - b*(q-p)^2` over
/// `|q - p| <= window`. Ties go to the smaller `|q - p|`, then to `q < p`.
fn transform_1d(f: &[f64], a: f64, b: f64, window: usize, val: &mut [f64], arg: &mut [i32]) {
    let n = f.len();
    let scan = |p: usize| -> (f64, i32) {
        let mut best = f[p];
        let mut best_d = 0i64;
        for k in 1..=window as i64 {
            for d in [-k, k] {
                let q = p as i64 + d;
                if q < 0 || q >= n as i64 {
                    continue;
                }
                let v = f[q as usize] - a * d as f64 - b * (d * d) as f64;
                if v > best {
                    best = v;
                    best_d = d;
                }
            }
        }
        (best, best_d as i32)
    };

    if b <= 0.0 {
        for p in 0..n {
            let (v, d) = scan(p);
            val[p] = v;
            arg[p] = d;
        }
        return;
    }

    // Lower envelope of the lines g(q) - 2bq*p, with g(q) = -f(q) + a*q + b*q^2.
    let g = |q: usize| -f[q] + a * q as f64 + b * (q * q) as f64;
    let cross = |q1: usize, q2: usize| (g(q2) - g(q1)) / (2.0 * b * (q2 - q1) as f64);
    let mut hull: Vec<usize> = Vec::with_capacity(n);
    for q in 0..n {
        while hull.len() >= 2 {
            let k = hull.len();
            if cross(hull[k - 2], q) <= cross(hull[k - 2], hull[k - 1]) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(q);
    }
    let mut ptr = 0;
    for p in 0..n {
        while ptr + 1 < hull.len() && cross(hull[ptr], hull[ptr + 1]) < p as f64 {
            ptr += 1;
        }
        let q = hull[ptr];
        let d = q as i64 - p as i64;
        if d.unsigned_abs() as usize <= window {
            val[p] = f[q] - a * d as f64 - b * (d * d) as f64;
            arg[p] = d as i32;
        } else {
            let (v, d) = scan(p);
            val[p] = v;
            arg[p] = d;
        }
    }
}

/// `value[c] = max_{|dx|,|dy| <= max_displacement} score[c + d] - penalty(d)`,
/// computed as two separable passes (columns then rows). With positive
/// quadratic weights each pass uses the linear-time lower envelope. `None`
/// means the displacement is limited only by the map.
///
/// Exact ties are resolved per pass (smaller displacement first), which
/// prefers a smaller `|dy|` over a smaller `|dx|` when both tie.
pub fn generalized_distance_transform(
    score: &ScoreMap,
    deform: &Deformation,
    max_displacement: Option<usize>,
) -> Result<DeformedScoreMap> {
    for q in [deform.dxx, deform.dyy] {
        if !(q >= 0.0) || !q.is_finite() {
            return Err(Error::NonPositiveQuadratic(q));
        }
    }
    let (rows, cols) = (score.rows, score.cols);
    let window_x = max_displacement.unwrap_or(cols).min(cols);
    let window_y = max_displacement.unwrap_or(rows).min(rows);

    let mut tmp = vec![0.0; rows * cols];
    let mut ix = vec![0i32; rows * cols];
    for r in 0..rows {
        let span = r * cols..(r + 1) * cols;
        transform_1d(
            &score.data[span.clone()],
            deform.dx,
            deform.dxx,
            window_x,
            &mut tmp[span.clone()],
            &mut ix[span],
        );
    }

    let mut values = vec![0.0; rows * cols];
    let mut argmax = vec![(0, 0); rows * cols];
    let mut column = vec![0.0; rows];
    let mut col_val = vec![0.0; rows];
    let mut col_arg = vec![0i32; rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = tmp[r * cols + c];
        }
        transform_1d(&column, deform.dy, deform.dyy, window_y, &mut col_val, &mut col_arg);
        for r in 0..rows {
            let dy = col_arg[r];
            let src = (r as i64 + dy as i64) as usize;
            values[r * cols + c] = col_val[r];
            argmax[r * cols + c] = (ix[src * cols + c], dy);
        }
    }
    Ok(DeformedScoreMap {
        rows,
        cols,
        values,
        argmax,
        level: score.level,
        row0: score.row0,
        col0: score.col0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartPlacement {
    pub level: usize,
    /// Full-grid (row, col) of the part's top-left cell.
    pub cell: (i64, i64),
    /// (dx, dy) from the anchor, in part cells.
    pub displacement: (i32, i32),
}

/// A complete hypothesis: component, root cell and part placements with the
/// per-vertex scores and their aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub component: usize,
    pub level: usize,
    pub root_cell: (usize, usize),
    pub parts: Vec<PartPlacement>,
    /// Root response followed by each part's deformed score.
    pub vertex_scores: Vec<f64>,
    /// Sum of vertex scores plus the component bias.
    pub psi: f64,
}

/// Anchor-projected top-left cell of a part for a root at `root_cell`.
pub fn project_anchor(root_cell: (usize, usize), anchor: (i64, i64), factor: usize) -> (i64, i64) {
    let f = factor as i64;
    (
        f * (root_cell.0 as i64 + 1) - 1 + anchor.1,
        f * (root_cell.1 as i64 + 1) - 1 + anchor.0,
    )
}

/// Scores of one component at one root level.
#[derive(Debug, Clone)]
pub struct ComponentScoreMap {
    pub component: usize,
    pub level: usize,
    pub bias: f64,
    pub root: ScoreMap,
    pub parts: Vec<DeformedScoreMap>,
    anchors: Vec<(i64, i64)>,
    factors: Vec<usize>,
    /// ψ over the root map's cells; `-inf` where a part falls off its level.
    pub psi: Vec<f64>,
}

impl ComponentScoreMap {
    pub fn rows(&self) -> usize {
        self.root.rows
    }

    pub fn cols(&self) -> usize {
        self.root.cols
    }

    /// Full-grid cells covered, as (row0, col0, rows, cols).
    pub fn extent(&self) -> (usize, usize, usize, usize) {
        (self.root.row0, self.root.col0, self.root.rows, self.root.cols)
    }

    pub fn psi_at(&self, root_cell: (usize, usize)) -> Option<f64> {
        let r = root_cell.0.checked_sub(self.root.row0)?;
        let c = root_cell.1.checked_sub(self.root.col0)?;
        if r >= self.root.rows || c >= self.root.cols {
            return None;
        }
        Some(self.psi[r * self.root.cols + c])
    }

    fn part_entry(&self, j: usize, root_cell: (usize, usize)) -> Option<((i64, i64), f64, (i32, i32))> {
        let (pr, pc) = project_anchor(root_cell, self.anchors[j], self.factors[j]);
        let (v, d) = self.parts[j].at(pr, pc)?;
        Some(((pr, pc), v, d))
    }

    /// Score of vertex 0 (root) or `j >= 1` (part `j - 1`) for a root at `root_cell`.
    pub fn vertex_score(&self, vertex: usize, root_cell: (usize, usize)) -> Result<f64> {
        let oob = || {
            Error::OutOfBounds(format!(
                "vertex {vertex} for root cell {root_cell:?} on level {}",
                self.level
            ))
        };
        if vertex == 0 {
            self.root
                .at(root_cell.0 as i64, root_cell.1 as i64)
                .ok_or_else(oob)
        } else if vertex <= self.parts.len() {
            self.part_entry(vertex - 1, root_cell)
                .map(|e| e.1)
                .ok_or_else(oob)
        } else {
            Err(oob())
        }
    }

    /// Vertex scores for a root cell, `None` if any part is out of range.
    pub fn vertex_scores(&self, root_cell: (usize, usize)) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(self.parts.len() + 1);
        out.push(self.root.at(root_cell.0 as i64, root_cell.1 as i64)?);
        for j in 0..self.parts.len() {
            out.push(self.part_entry(j, root_cell)?.1);
        }
        Some(out)
    }

    pub fn placement(&self, root_cell: (usize, usize)) -> Option<Placement> {
        let psi = self.psi_at(root_cell)?;
        if !psi.is_finite() {
            return None;
        }
        let mut vertex_scores = vec![self.root.at(root_cell.0 as i64, root_cell.1 as i64)?];
        let mut parts = Vec::with_capacity(self.parts.len());
        for j in 0..self.parts.len() {
            let ((pr, pc), v, (dx, dy)) = self.part_entry(j, root_cell)?;
            vertex_scores.push(v);
            parts.push(PartPlacement {
                level: self.parts[j].level,
                cell: (pr + dy as i64, pc + dx as i64),
                displacement: (dx, dy),
            });
        }
        Some(Placement {
            component: self.component,
            level: self.level,
            root_cell,
            parts,
            vertex_scores,
            psi,
        })
    }

    /// Root cells with a finite ψ, in row-major order.
    pub fn valid_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (r0, c0, rows, cols) = self.extent();
        (0..rows).flat_map(move |r| {
            (0..cols).filter_map(move |c| {
                if self.psi[r * cols + c].is_finite() {
                    Some((r0 + r, c0 + c))
                } else {
                    None
                }
            })
        })
    }
}

/// Level at which a part of `component` is scored for a root at `level`.
pub fn part_level(pyramid: &FeaturePyramid, level: usize, offset: u32) -> Option<usize> {
    level.checked_sub(offset as usize * pyramid.interval())
}

/// ψ over every root cell of `level` for one component: root response plus
/// each part's deformed score at its projected anchor plus the bias.
pub fn component_score_map(
    pyramid: &FeaturePyramid,
    component_index: usize,
    component: &ComponentSpec,
    level: usize,
) -> Result<ComponentScoreMap> {
    let root_map = pyramid.level(level).ok_or(Error::MissingLevel(level))?;
    let root = filter_response(root_map, &component.root)?;
    let mut parts = Vec::with_capacity(component.parts.len());
    let mut anchors = Vec::with_capacity(component.parts.len());
    let mut factors = Vec::with_capacity(component.parts.len());
    for part in &component.parts {
        let pl = part_level(pyramid, level, part.resolution_offset)
            .ok_or(Error::MissingLevel(level))?;
        let map = pyramid.level(pl).ok_or(Error::MissingLevel(pl))?;
        let response = filter_response(map, &part.filter)?;
        let window = part.filter.rows.max(part.filter.cols);
        parts.push(generalized_distance_transform(&response, &part.deform, Some(window))?);
        anchors.push(part.anchor);
        factors.push(part.projection_factor());
    }

    let mut out = ComponentScoreMap {
        component: component_index,
        level,
        bias: component.bias,
        root,
        parts,
        anchors,
        factors,
        psi: Vec::new(),
    };
    let (r0, c0, rows, cols) = out.extent();
    let mut psi = vec![f64::NEG_INFINITY; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let cell = (r0 + r, c0 + c);
            let mut total = out.root.get(r, c);
            let mut ok = true;
            for j in 0..out.parts.len() {
                match out.part_entry(j, cell) {
                    Some((_, v, _)) => total += v,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                psi[r * cols + c] = total + component.bias;
            }
        }
    }
    out.psi = psi;
    Ok(out)
}

/// Every (component, level) score map the pyramid supports. Levels where a
/// filter does not fit or a part level is missing are skipped.
pub fn score_pyramid(pyramid: &FeaturePyramid, components: &[ComponentSpec]) -> Vec<ComponentScoreMap> {
    let mut out = Vec::new();
    for (ci, comp) in components.iter().enumerate() {
        for level in 0..pyramid.num_levels() {
            if pyramid.level(level).is_none() {
                continue;
            }
            match component_score_map(pyramid, ci, comp, level) {
                Ok(m) => out.push(m),
                Err(Error::MissingLevel(_)) | Err(Error::FilterTooLarge { .. }) => {}
                Err(e) => log::warn!("component {ci} level {level}: {e}"),
            }
        }
    }
    out
}
