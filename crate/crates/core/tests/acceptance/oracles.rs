use std::time::Instant;

use parttrack_core::feature_pyramid::{build_pyramid_with, FeatureMap, PyramidConfig};
use parttrack_core::occlusion::{select_from_family, select_greedy, GreedyConfig};
use parttrack_core::scoring::score_pyramid;
use parttrack_core::tracker::temporal_potential as potential;
use parttrack_core::{
    filter_response, generalized_distance_transform, make_synthetic_model, part_probability, Deformation, Filter,
    Frame, ScoreMap, HOG_CHANNELS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Outcome};

/// Window scan preferring higher value, then smaller squared displacement,
/// then lexicographically smaller (dx, dy).
fn brute_dt(score: &ScoreMap, d: &Deformation, w: i64) -> (Vec<f64>, Vec<(i32, i32)>) {
    let (rows, cols) = (score.rows as i64, score.cols as i64);
    let mut vals = Vec::new();
    let mut args = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let mut best: Option<(f64, i64, (i64, i64))> = None;
            for dy in -w..=w {
                for dx in -w..=w {
                    let (rr, cc) = (r + dy, c + dx);
                    if rr < 0 || cc < 0 || rr >= rows || cc >= cols {
                        continue;
                    }
                    let v = score.data[(rr * cols + cc) as usize]
                        - (d.dx * dx as f64 + d.dy * dy as f64 + d.dxx * (dx * dx) as f64 + d.dyy * (dy * dy) as f64);
                    let mag = dx * dx + dy * dy;
                    let better = match best {
                        None => true,
                        Some((bv, bm, bd)) => v > bv || (v == bv && (mag < bm || (mag == bm && (dx, dy) < bd))),
                    };
                    if better {
                        best = Some((v, mag, (dx, dy)));
                    }
                }
            }
            let (v, _, (dx, dy)) = best.expect("window contains the cell itself");
            vals.push(v);
            args.push((dx as i32, dy as i32));
        }
    }
    (vals, args)
}

pub fn dt_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let (rows, cols) = (40, 30);
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let map = ScoreMap::new(rows, cols, data);
        let d = Deformation::new(
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(0.01..1.0),
            rng.gen_range(0.01..1.0),
        );
        let w = rng.gen_range(1..=8usize);
        let got = generalized_distance_transform(&map, &d, Some(w)).map_err(|e| e.to_string())?;
        let (vals, args) = brute_dt(&map, &d, w as i64);
        for i in 0..vals.len() {
            let diff = (got.values[i] - vals[i]).abs();
            worst = worst.max(diff);
            ensure!(diff < 1e-9, "trial {trial} cell {i}: value diff {diff}");
            ensure!(got.argmax[i] == args[i], "trial {trial} cell {i}: argmax {:?} vs {:?}", got.argmax[i], args[i]);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 5.0, "suite took {secs:.2}s");
    Ok(format!("100 maps 40x30, max |diff| {worst:.1e}"))
}

fn random_level(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> FeatureMap {
    let data = (0..rows * cols * HOG_CHANNELS).map(|_| rng.gen_range(0.0..0.4)).collect();
    FeatureMap::from_data(rows, cols, data).expect("consistent dims")
}

fn random_filter(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Filter {
    let w = (0..rows * cols * HOG_CHANNELS).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Filter::new(rows, cols, w).expect("consistent dims")
}

fn dot_at(level: &FeatureMap, f: &Filter, r: usize, c: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..f.rows {
        for j in 0..f.cols {
            for k in 0..HOG_CHANNELS {
                s += f.weights[(i * f.cols + j) * HOG_CHANNELS + k] * level.get(r + i, c + j, k);
            }
        }
    }
    s
}

pub fn convolution_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let (lr, lc) = (rng.gen_range(6..30), rng.gen_range(6..30));
        let (fr, fc) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let level = random_level(lr, lc, &mut rng);
        let f = random_filter(fr, fc, &mut rng);
        let got = filter_response(&level, &f).map_err(|e| e.to_string())?;
        ensure!(got.rows == lr - fr + 1 && got.cols == lc - fc + 1, "trial {trial}: dims");
        for r in 0..got.rows {
            for c in 0..got.cols {
                let diff = (got.get(r, c) - dot_at(&level, &f, r, c)).abs();
                worst = worst.max(diff);
                ensure!(diff < 1e-9, "trial {trial} ({r},{c}): diff {diff}");
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 5.0, "suite took {secs:.2}s");
    Ok(format!("100 pairs, max |diff| {worst:.1e}"))
}

pub fn score_decomposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut checked = 0;
    let mut worst = 0.0f64;
    let mut seed = 0;
    while checked < 1000 {
        seed += 1;
        let parts = rng.gen_range(0..=5);
        let model = make_synthetic_model(seed, rng.gen_range(1..=3), parts, (rng.gen_range(2..=5), rng.gen_range(2..=5)), (2, 2));
        let frame = Frame::from_fn(112, 96, |_, _| rng.gen_range(0.0..1.0));
        let config = PyramidConfig {
            interval: 3,
            min_level_dims: (5, 5),
            ..PyramidConfig::default()
        };
        let pyr = build_pyramid_with(&frame, &config).map_err(|e| e.to_string())?;
        let maps = score_pyramid(&pyr, &model.components);
        for _ in 0..100 {
            if maps.is_empty() {
                break;
            }
            let map = &maps[rng.gen_range(0..maps.len())];
            let cells: Vec<_> = map.valid_cells().collect();
            if cells.is_empty() {
                continue;
            }
            let cell = cells[rng.gen_range(0..cells.len())];
            let p = map.placement(cell).ok_or("valid cell without placement")?;
            let comp = &model.components[p.component];
            let root_level = pyr.level(p.level).ok_or("missing root level")?;
            let mut sum = dot_at(root_level, &comp.root, cell.0, cell.1);
            for (pp, spec) in p.parts.iter().zip(&comp.parts) {
                let lvl = pyr.level(pp.level).ok_or("missing part level")?;
                let (dx, dy) = (pp.displacement.0 as f64, pp.displacement.1 as f64);
                let d = &spec.deform;
                sum += dot_at(lvl, &spec.filter, pp.cell.0 as usize, pp.cell.1 as usize)
                    - (d.dx * dx + d.dy * dy + d.dxx * dx * dx + d.dyy * dy * dy);
            }
            sum += comp.bias;
            let rel = (p.psi - sum).abs() / sum.abs().max(1.0);
            worst = worst.max(rel);
            ensure!(rel < 1e-9, "seed {seed} cell {cell:?}: relative diff {rel}");
            checked += 1;
            if checked == 1000 {
                break;
            }
        }
    }
    Ok(format!("{checked} placements from {seed} models, max rel diff {worst:.1e}"))
}

pub fn logistic_properties() -> Outcome {
    let p = |s: f64| part_probability(s).map_err(|e| e.to_string());
    ensure!(p(0.0)? == 0.5, "midpoint {}", p(0.0)?);
    let mut worst = 0.0f64;
    let grid: Vec<f64> = (0..10_000).map(|i| -20.0 + 40.0 * i as f64 / 9_999.0).collect();
    for &s in &grid {
        let dev = (p(s)? + p(-s)? - 1.0).abs();
        worst = worst.max(dev);
        ensure!(dev <= 1e-12, "symmetry at {s}: {dev}");
    }
    for s in [1e6, -1e6] {
        let v = p(s)?;
        ensure!(v.is_finite() && (0.0..=1.0).contains(&v), "overflow at {s}: {v}");
    }
    ensure!(p(1e6)? == 1.0 && p(-1e6)? == 0.0, "saturation values");
    for w in grid.windows(2) {
        ensure!(p(w[1])? > p(w[0])?, "not strictly increasing between {} and {}", w[0], w[1]);
    }
    Ok(format!("10^4-point grid on [-20, 20], max symmetry error {worst:.1e}"))
}

fn mean_sorted(q: &[f64], set: &[usize]) -> f64 {
    let mut idx = set.to_vec();
    idx.sort_unstable();
    idx.iter().map(|&i| q[i]).sum::<f64>() / idx.len() as f64
}

pub fn subset_selection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for trial in 0..500 {
        let n = rng.gen_range(2..=9);
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut family: Vec<Vec<usize>> = vec![(0..n).collect()];
        for _ in 0..rng.gen_range(1..6) {
            let mut s: Vec<usize> = std::iter::once(0).chain((1..n).filter(|_| rng.gen_bool(0.5))).collect();
            s.sort_unstable();
            if !family.contains(&s) {
                family.push(s);
            }
        }
        let got = select_from_family(&q, &family).map_err(|e| e.to_string())?;
        let mut best: Option<(f64, &Vec<usize>)> = None;
        for s in &family {
            let m = mean_sorted(&q, s);
            if best.map_or(true, |(bm, _)| m > bm) {
                best = Some((m, s));
            }
        }
        let (bm, bs) = best.expect("non-empty family");
        ensure!(got.subset == *bs && got.psi_prime == bm, "trial {trial}: {:?} vs {:?}", got.subset, bs);
    }
    let mut greedy_trials = 0;
    for parts in 0..=8usize {
        let n = parts + 1;
        let cfg = GreedyConfig::for_vertices(n);
        for trial in 0..200 {
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let got = select_greedy(&q, &cfg).map_err(|e| e.to_string())?;
            let mut best: Option<(f64, Vec<usize>)> = None;
            for mask in 0u32..(1 << n) {
                if mask & 1 == 0 || (mask.count_ones() as usize) < cfg.min_size {
                    continue;
                }
                let set: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
                let m = mean_sorted(&q, &set);
                if best.as_ref().map_or(true, |(bm, _)| m > *bm) {
                    best = Some((m, set));
                }
            }
            let (bm, bs) = best.expect("full set qualifies");
            ensure!(got.subset == bs && got.psi_prime == bm, "{parts} parts, trial {trial}: {:?} vs {bs:?}", got.subset);
            greedy_trials += 1;
        }
    }
    Ok(format!("500 family trials, {greedy_trials} greedy trials"))
}

pub fn temporal_potential() -> Outcome {
    let eye = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let v = |a, b, d, vn, vp| potential(a, b, d, vn, vp, &eye).map_err(|e| e.to_string());
    let mode = v(true, true, [0.0; 3], (0.0, 0.0), (0.0, 0.0))?;
    let expect = (2.0 * std::f64::consts::PI).powf(-1.5);
    ensure!((mode - expect).abs() <= 1e-12, "mode {mode} vs {expect}");
    let half = v(true, false, [1.0, 2.0, 0.0], (1.5, -0.5), (1.5, -0.5))?;
    ensure!(half == 0.5, "equal displacements gave {half}");
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut lo, mut hi) = (1.0f64, 0.0f64);
    for _ in 0..10_000 {
        let d = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-2.0..2.0)];
        let vn = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let vp = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let (a, b) = if rng.gen_bool(0.5) { (true, false) } else { (false, true) };
        let f = v(a, b, d, vn, vp)?;
        lo = lo.min(f);
        hi = hi.max(f);
        ensure!(f > 0.5 && f < 1.0, "factor {f} for {vn:?} vs {vp:?}");
    }
    Ok(format!("differing-state factor range [{lo:.6}, {hi:.12}]"))
}
