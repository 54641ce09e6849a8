//! Ground truth, frame directories and trajectory CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::feature_pyramid::Frame;
use crate::geometry::BBox;
use crate::tracker::FrameOutput;

use super::run::Trajectory;

fn parse_err(path: &Path, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message,
    }
}

/// Parses `x y w h` integer lines; trailing blank lines are allowed, gaps are not.
pub fn parse_ground_truth(text: &str, origin: &Path) -> Result<Vec<BBox>> {
    let lines: Vec<&str> = text.trim_end().lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let fields: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
        if fields.len() != 4 {
            return Err(parse_err(origin, format!("line {}: expected `x y w h`, got {line:?}", i + 1)));
        }
        let mut v = [0i64; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f
                .parse()
                .map_err(|_| parse_err(origin, format!("line {}: {f:?} is not an integer", i + 1)))?;
        }
        if v[2] <= 0 || v[3] <= 0 {
            return Err(parse_err(origin, format!("line {}: non-positive box size", i + 1)));
        }
        out.push(BBox::new(v[0] as f64, v[1] as f64, v[2] as f64, v[3] as f64));
    }
    Ok(out)
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<BBox>> {
    parse_ground_truth(&std::fs::read_to_string(path)?, path)
}

pub fn format_ground_truth(boxes: &[BBox]) -> String {
    let mut s = String::new();
    for b in boxes {
        let _ = writeln!(s, "{} {} {} {}", b.x.round() as i64, b.y.round() as i64, b.w.round() as i64, b.h.round() as i64);
    }
    s
}

pub fn write_ground_truth(path: &Path, boxes: &[BBox]) -> Result<()> {
    std::fs::write(path, format_ground_truth(boxes))?;
    Ok(())
}

const FRAME_EXTENSIONS: [&str; 4] = ["png", "pgm", "ppm", "pnm"];

/// Frame files of a directory: the order of `manifest.txt` when present,
/// otherwise image files sorted by name.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest = dir.join("manifest.txt");
    if manifest.is_file() {
        let text = std::fs::read_to_string(&manifest)?;
        return Ok(text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| dir.join(l))
            .collect());
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_frames(dir: &Path) -> Result<Vec<Frame>> {
    list_frames(dir)?.iter().map(|p| Frame::load(p)).collect()
}

/// Writes `frame_00000.png`, ... and a manifest listing them.
pub fn save_frames(dir: &Path, frames: &[Frame]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for (i, f) in frames.iter().enumerate() {
        let name = format!("frame_{i:05}.png");
        f.save_png(&dir.join(&name))?;
        manifest.push_str(&name);
        manifest.push('\n');
    }
    std::fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}

/// One trajectory CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub frame: usize,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub component: usize,
    pub energy: f64,
    pub psi_prime: f64,
    pub lost: bool,
    /// Part centers and visibility flags.
    pub parts: Vec<(f64, f64, bool)>,
}

impl TrajectoryRow {
    pub fn from_output(o: &FrameOutput) -> Self {
        let (cx, cy) = o.root_box.center();
        Self {
            frame: o.frame,
            cx,
            cy,
            w: o.root_box.w,
            h: o.root_box.h,
            component: o.component,
            energy: o.energy,
            psi_prime: o.psi_prime,
            lost: o.lost,
            parts: o
                .part_boxes
                .iter()
                .enumerate()
                .map(|(j, b)| {
                    let (x, y) = b.center();
                    (x, y, o.visible.get(j + 1).copied().unwrap_or(false))
                })
                .collect(),
        }
    }

    pub fn root_box(&self) -> BBox {
        BBox::from_center(self.cx, self.cy, self.w, self.h)
    }
}

pub fn trajectory_rows(traj: &Trajectory) -> Vec<TrajectoryRow> {
    traj.outputs.iter().map(TrajectoryRow::from_output).collect()
}

/// CSV with the fixed column order; rows with fewer parts leave the trailing
/// triples empty. Floats use shortest round-trip formatting.
pub fn format_trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let max_parts = rows.iter().map(|r| r.parts.len()).max().unwrap_or(0);
    let mut s = String::from("frame,cx,cy,w,h,component,energy,psi_prime,lost_flag");
    for i in 0..max_parts {
        let _ = write!(s, ",px_{i},py_{i},vis_{i}");
    }
    s.push('\n');
    for r in rows {
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.frame, r.cx, r.cy, r.w, r.h, r.component, r.energy, r.psi_prime, r.lost as u8
        );
        for i in 0..max_parts {
            match r.parts.get(i) {
                Some((x, y, v)) => {
                    let _ = write!(s, ",{x},{y},{}", *v as u8);
                }
                None => s.push_str(",,,"),
            }
        }
        s.push('\n');
    }
    s
}

pub fn parse_trajectory_csv(text: &str, origin: &Path) -> Result<Vec<TrajectoryRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(origin, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 9 || cols[..9] != ["frame", "cx", "cy", "w", "h", "component", "energy", "psi_prime", "lost_flag"] || (cols.len() - 9) % 3 != 0 {
        return Err(parse_err(origin, format!("unexpected header {header:?}")));
    }
    let n_parts = (cols.len() - 9) / 3;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = |what: &str| parse_err(origin, format!("row {}: bad {what}", i + 1));
        if f.len() != cols.len() {
            return Err(bad("field count"));
        }
        let num = |k: usize, what: &str| f[k].parse::<f64>().map_err(|_| bad(what));
        let flag = |k: usize, what: &str| match f[k] {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad(what)),
        };
        let mut parts = Vec::new();
        for p in 0..n_parts {
            let k = 9 + 3 * p;
            if f[k].is_empty() && f[k + 1].is_empty() && f[k + 2].is_empty() {
                continue;
            }
            parts.push((num(k, "px")?, num(k + 1, "py")?, flag(k + 2, "vis")?));
        }
        rows.push(TrajectoryRow {
            frame: f[0].parse().map_err(|_| bad("frame"))?,
            cx: num(1, "cx")?,
            cy: num(2, "cy")?,
            w: num(3, "w")?,
            h: num(4, "h")?,
            component: f[5].parse().map_err(|_| bad("component"))?,
            energy: num(6, "energy")?,
            psi_prime: num(7, "psi_prime")?,
            lost: flag(8, "lost_flag")?,
            parts,
        });
    }
    if rows.windows(2).any(|w| w[0].frame >= w[1].frame) {
        return Err(parse_err(origin, "frame indices must increase strictly".into()));
    }
    Ok(rows)
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectoryRow>> {
    parse_trajectory_csv(&std::fs::read_to_string(path)?, path)
}
