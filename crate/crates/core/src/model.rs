//! Mixture-of-star models: root and part filters, deformation weights, anchors
//! and per-component biases, with JSON persistence and validation.
//!
//! Part anchors are integer offsets in the part's own grid, measured from the
//! root cell projected down `resolution_offset` octaves. The deformation of a
//! displacement `(dx, dy)` costs `w_dx*dx + w_dy*dy + w_dxx*dx^2 + w_dyy*dy^2`
//! and is subtracted from the part response.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_pyramid::HOG_CHANNELS;

/// Weights of a `rows x cols x 31` template, row-major with channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
}

impl Filter {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != rows * cols * HOG_CHANNELS {
            return Err(Error::Validation(format!(
                "filter {}x{} needs {} weights, got {}",
                rows,
                cols,
                rows * cols * HOG_CHANNELS,
                weights.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            weights,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols * HOG_CHANNELS],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn cell(&self, row: usize, col: usize) -> &[f64] {
        let i = (row * self.cols + col) * HOG_CHANNELS;
        &self.weights[i..i + HOG_CHANNELS]
    }
}

/// Deformation weights `(w_dx, w_dy, w_dxx, w_dyy)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Deformation {
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dyy: f64,
}

impl Deformation {
    pub fn new(dx: f64, dy: f64, dxx: f64, dyy: f64) -> Self {
        Self { dx, dy, dxx, dyy }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.dx, self.dy, self.dxx, self.dyy]
    }

    /// Cost of displacing a part by `(dx, dy)` cells from its anchor.
    #[inline]
    pub fn penalty(&self, dx: i64, dy: i64) -> f64 {
        let (x, y) = (dx as f64, dy as f64);
        self.dx * x + self.dy * y + self.dxx * x * x + self.dyy * y * y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartSpec {
    pub filter: Filter,
    /// (col, row) offset in the part grid.
    pub anchor: (i64, i64),
    pub deform: Deformation,
    /// Octaves below the root level at which the part is scored.
    pub resolution_offset: u32,
}

impl PartSpec {
    pub fn projection_factor(&self) -> usize {
        1usize << self.resolution_offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpec {
    pub root: Filter,
    pub parts: Vec<PartSpec>,
    pub bias: f64,
    /// Vertex index sets (0 = root, `j` = part `j - 1`) eligible as the
    /// visible subset.
    pub subset_candidates: Vec<Vec<usize>>,
}

impl ComponentSpec {
    pub fn num_vertices(&self) -> usize {
        self.parts.len() + 1
    }

    pub fn full_set(&self) -> Vec<usize> {
        (0..self.num_vertices()).collect()
    }

    /// Finest resolution offset over all parts.
    pub fn max_resolution_offset(&self) -> u32 {
        self.parts
            .iter()
            .map(|p| p.resolution_offset)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    pub class: String,
    pub provenance: String,
    pub components: Vec<ComponentSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    NoComponents,
    FilterShape,
    NonFiniteWeight,
    /// Quadratic deformation weights must be strictly positive.
    Concavity,
    AnchorOutsideRoot,
    EmptySubset,
    SubsetIndexOutOfRange,
    SubsetMissingRoot,
    MissingFullSet,
    DuplicateSubset,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::NoComponents => "no-components",
            Rule::FilterShape => "filter-shape",
            Rule::NonFiniteWeight => "non-finite-weight",
            Rule::Concavity => "concavity",
            Rule::AnchorOutsideRoot => "anchor-outside-root",
            Rule::EmptySubset => "empty-subset",
            Rule::SubsetIndexOutOfRange => "subset-index-out-of-range",
            Rule::SubsetMissingRoot => "subset-missing-root",
            Rule::MissingFullSet => "missing-full-set",
            Rule::DuplicateSubset => "duplicate-subset",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub severity: Severity,
    pub rule: Rule,
    pub component: Option<usize>,
    pub part: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.rule)?;
        if let Some(c) = self.component {
            write!(f, " component {c}")?;
        }
        if let Some(p) = self.part {
            write!(f, " part {p}")?;
        }
        write!(f, ": {}", self.message)
    }
}

fn check_filter(out: &mut Vec<Violation>, filter: &Filter, c: usize, part: Option<usize>) {
    let mut push = |rule, message: String| {
        out.push(Violation {
            severity: Severity::Error,
            rule,
            component: Some(c),
            part,
            message,
        })
    };
    if filter.rows == 0 || filter.cols == 0 {
        push(Rule::FilterShape, format!("dims {}x{}", filter.rows, filter.cols));
    } else if filter.weights.len() != filter.rows * filter.cols * HOG_CHANNELS {
        push(
            Rule::FilterShape,
            format!(
                "{} weights for {}x{}x{}",
                filter.weights.len(),
                filter.rows,
                filter.cols,
                HOG_CHANNELS
            ),
        );
    }
    if filter.weights.iter().any(|w| !w.is_finite()) {
        push(Rule::NonFiniteWeight, "filter weight is not finite".into());
    }
}

/// Lists every broken invariant; an empty list means the model is valid.
/// Duplicate subset candidates are reported as warnings.
pub fn validate_model(model: &MixtureModel) -> Vec<Violation> {
    let mut out = Vec::new();
    if model.components.is_empty() {
        out.push(Violation {
            severity: Severity::Error,
            rule: Rule::NoComponents,
            component: None,
            part: None,
            message: "a model needs at least one component".into(),
        });
    }
    for (c, comp) in model.components.iter().enumerate() {
        check_filter(&mut out, &comp.root, c, None);
        if !comp.bias.is_finite() {
            out.push(Violation {
                severity: Severity::Error,
                rule: Rule::NonFiniteWeight,
                component: Some(c),
                part: None,
                message: "bias is not finite".into(),
            });
        }
        for (j, part) in comp.parts.iter().enumerate() {
            check_filter(&mut out, &part.filter, c, Some(j));
            let d = part.deform;
            if d.as_array().iter().any(|v| !v.is_finite()) {
                out.push(Violation {
                    severity: Severity::Error,
                    rule: Rule::NonFiniteWeight,
                    component: Some(c),
                    part: Some(j),
                    message: "deformation weight is not finite".into(),
                });
            } else if d.dxx <= 0.0 || d.dyy <= 0.0 {
                out.push(Violation {
                    severity: Severity::Error,
                    rule: Rule::Concavity,
                    component: Some(c),
                    part: Some(j),
                    message: format!(
                        "quadratic deformation weights must be > 0 (got {}, {})",
                        d.dxx, d.dyy
                    ),
                });
            }
            let f = part.projection_factor() as i64;
            let (ext_r, ext_c) = (comp.root.rows as i64 * f, comp.root.cols as i64 * f);
            let (ax, ay) = part.anchor;
            if ax < 0
                || ay < 0
                || ax + part.filter.cols as i64 > ext_c
                || ay + part.filter.rows as i64 > ext_r
            {
                out.push(Violation {
                    severity: Severity::Error,
                    rule: Rule::AnchorOutsideRoot,
                    component: Some(c),
                    part: Some(j),
                    message: format!(
                        "anchor ({ax}, {ay}) with dims {}x{} leaves the {}x{} root extent",
                        part.filter.rows, part.filter.cols, ext_r, ext_c
                    ),
                });
            }
        }

        let n_vertices = comp.num_vertices();
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        let full = comp.full_set();
        let mut has_full = false;
        for (k, cand) in comp.subset_candidates.iter().enumerate() {
            let mut err = |rule, message: String| {
                out.push(Violation {
                    severity: Severity::Error,
                    rule,
                    component: Some(c),
                    part: None,
                    message,
                })
            };
            if cand.is_empty() {
                err(Rule::EmptySubset, format!("subset candidate {k} is empty"));
                continue;
            }
            if cand.iter().any(|&i| i >= n_vertices) {
                err(
                    Rule::SubsetIndexOutOfRange,
                    format!("subset candidate {k} has an index >= {n_vertices}"),
                );
            }
            if !cand.contains(&0) {
                err(
                    Rule::SubsetMissingRoot,
                    format!("subset candidate {k} does not contain the root"),
                );
            }
            let mut sorted = cand.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted == full {
                has_full = true;
            }
            if !seen.insert(sorted) {
                out.push(Violation {
                    severity: Severity::Warning,
                    rule: Rule::DuplicateSubset,
                    component: Some(c),
                    part: None,
                    message: format!("subset candidate {k} duplicates an earlier one"),
                });
            }
        }
        if !has_full {
            out.push(Violation {
                severity: Severity::Error,
                rule: Rule::MissingFullSet,
                component: Some(c),
                part: None,
                message: "the full vertex set is not a subset candidate".into(),
            });
        }
    }
    out
}

fn ensure_valid(model: &MixtureModel) -> Result<()> {
    let errors: Vec<String> = validate_model(model)
        .into_iter()
        .filter(|v| v.severity == Severity::Error)
        .map(|v| v.to_string())
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(errors.join("; ")))
    }
}

// On-disk layout.

#[derive(Serialize, Deserialize)]
struct FilterFile {
    dims: [usize; 2],
    filter: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PartFile {
    anchor: [i64; 2],
    deform: [f64; 4],
    dims: [usize; 2],
    filter: Vec<f64>,
    resolution_offset: u32,
}

#[derive(Serialize, Deserialize)]
struct ComponentFile {
    bias: f64,
    parts: Vec<PartFile>,
    root: FilterFile,
    subset_candidates: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    class: String,
    components: Vec<ComponentFile>,
    #[serde(default)]
    provenance: String,
}

impl MixtureModel {
    fn to_file(&self) -> ModelFile {
        ModelFile {
            class: self.class.clone(),
            provenance: self.provenance.clone(),
            components: self
                .components
                .iter()
                .map(|c| ComponentFile {
                    bias: c.bias,
                    root: FilterFile {
                        dims: [c.root.rows, c.root.cols],
                        filter: c.root.weights.clone(),
                    },
                    parts: c
                        .parts
                        .iter()
                        .map(|p| PartFile {
                            anchor: [p.anchor.0, p.anchor.1],
                            deform: p.deform.as_array(),
                            dims: [p.filter.rows, p.filter.cols],
                            filter: p.filter.weights.clone(),
                            resolution_offset: p.resolution_offset,
                        })
                        .collect(),
                    subset_candidates: c.subset_candidates.clone(),
                })
                .collect(),
        }
    }

    fn from_file(file: ModelFile) -> Self {
        MixtureModel {
            class: file.class,
            provenance: file.provenance,
            components: file
                .components
                .into_iter()
                .map(|c| ComponentSpec {
                    bias: c.bias,
                    root: Filter {
                        rows: c.root.dims[0],
                        cols: c.root.dims[1],
                        weights: c.root.filter,
                    },
                    parts: c
                        .parts
                        .into_iter()
                        .map(|p| PartSpec {
                            filter: Filter {
                                rows: p.dims[0],
                                cols: p.dims[1],
                                weights: p.filter,
                            },
                            anchor: (p.anchor[0], p.anchor[1]),
                            deform: Deformation::new(
                                p.deform[0],
                                p.deform[1],
                                p.deform[2],
                                p.deform[3],
                            ),
                            resolution_offset: p.resolution_offset,
                        })
                        .collect(),
                    subset_candidates: c.subset_candidates,
                })
                .collect(),
        }
    }

    /// Canonical JSON: keys sorted, shortest round-trip float formatting.
    pub fn to_json(&self) -> Result<String> {
        ensure_valid(self)?;
        let value = serde_json::to_value(self.to_file())?;
        let mut s = serde_json::to_string(&value)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        let model = Self::from_file(file);
        ensure_valid(&model)?;
        Ok(model)
    }
}

pub fn load_model(path: &Path) -> Result<MixtureModel> {
    let text = std::fs::read_to_string(path)?;
    MixtureModel::from_json(&text, path)
}

pub fn save_model(model: &MixtureModel, path: &Path) -> Result<()> {
    let text = model.to_json()?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Default occlusion candidates: full set, then top, left and right halves of
/// the parts by anchor center (each with the root). Duplicates are dropped.
pub fn default_subset_candidates(root: &Filter, parts: &[PartSpec]) -> Vec<Vec<usize>> {
    let half = |pred: &dyn Fn(f64, f64, f64, f64) -> bool| -> Vec<usize> {
        let mut v = vec![0];
        for (j, p) in parts.iter().enumerate() {
            let f = p.projection_factor() as f64;
            let cx = p.anchor.0 as f64 + p.filter.cols as f64 / 2.0;
            let cy = p.anchor.1 as f64 + p.filter.rows as f64 / 2.0;
            if pred(cx, cy, root.cols as f64 * f / 2.0, root.rows as f64 * f / 2.0) {
                v.push(j + 1);
            }
        }
        v
    };
    let mut out: Vec<Vec<usize>> = vec![(0..=parts.len()).collect()];
    for cand in [
        half(&|_, cy, _, my| cy < my),
        half(&|cx, _, mx, _| cx < mx),
        half(&|cx, _, mx, _| cx >= mx),
    ] {
        if !out.contains(&cand) {
            out.push(cand);
        }
    }
    out
}

/// Anchors for `n` parts spread on a grid over the root extent.
pub fn spread_anchors(n: usize, extent: (usize, usize), part_dims: (usize, usize)) -> Vec<(i64, i64)> {
    if n == 0 {
        return Vec::new();
    }
    let grid_c = (n as f64).sqrt().ceil() as usize;
    let grid_r = n.div_ceil(grid_c);
    let free_r = extent.0.saturating_sub(part_dims.0) as f64;
    let free_c = extent.1.saturating_sub(part_dims.1) as f64;
    (0..n)
        .map(|i| {
            let (gr, gc) = (i / grid_c, i % grid_c);
            let ty = if grid_r > 1 { gr as f64 / (grid_r - 1) as f64 } else { 0.5 };
            let tx = if grid_c > 1 { gc as f64 / (grid_c - 1) as f64 } else { 0.5 };
            ((tx * free_c).round() as i64, (ty * free_r).round() as i64)
        })
        .collect()
}

/// Deterministic random model with `components` components of `parts` parts.
/// Dims are (rows, cols) in cells; parts are scored one octave below the root.
pub fn make_synthetic_model(
    seed: u64,
    components: usize,
    parts: usize,
    root_dims: (usize, usize),
    part_dims: (usize, usize),
) -> MixtureModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_filter = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| Filter {
        rows,
        cols,
        weights: (0..rows * cols * HOG_CHANNELS)
            .map(|_| rng.gen_range(-0.5..0.5))
            .collect(),
    };
    let comps = (0..components.max(1))
        .map(|_| {
            let root = random_filter(root_dims.0, root_dims.1, &mut rng);
            let extent = (root_dims.0 * 2, root_dims.1 * 2);
            let part_specs: Vec<PartSpec> = spread_anchors(parts, extent, part_dims)
                .into_iter()
                .map(|anchor| PartSpec {
                    filter: random_filter(part_dims.0, part_dims.1, &mut rng),
                    anchor,
                    deform: Deformation::new(
                        rng.gen_range(-0.05..0.05),
                        rng.gen_range(-0.05..0.05),
                        rng.gen_range(0.02..0.2),
                        rng.gen_range(0.02..0.2),
                    ),
                    resolution_offset: 1,
                })
                .collect();
            let subset_candidates = default_subset_candidates(&root, &part_specs);
            ComponentSpec {
                root,
                parts: part_specs,
                bias: rng.gen_range(-1.0..1.0),
                subset_candidates,
            }
        })
        .collect();
    MixtureModel {
        class: "synthetic".into(),
        provenance: format!("make_synthetic_model(seed={seed})"),
        components: comps,
    }
}
