//! Product-integration weights for `L` on a uniform grid with `Δt = Δr`.
//!
//! The field is replaced by its bilinear interpolant in `(λ, τ)` and the
//! kernel is integrated exactly against each hat function, cell by cell.
//! With `Δt = Δr` every singular line of the kernel (`s = λ + r` and
//! `s = |λ − r|`, with `s = t − τ`) is a cell diagonal, so each cell is
//! either smooth or split into two triangles with the singularity on an
//! edge. Homogeneity of the kernel makes the weights functions of integer
//! indices times `Δ²`.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{GridSpec, SpacetimeField};
use crate::kernels::wave_kernel;
use crate::quadrature::gauss_legendre;

/// Weights for one observation radius `r_i`.
#[derive(Debug, Clone, Default)]
struct RadiusWeights {
    /// For each lag `d`, the first radial node and offset into `hat`.
    hat_start: Vec<usize>,
    hat_off: Vec<usize>,
    hat: Vec<f64>,
    /// Half-hat weights for the initial time level, indexed by lag `d = n`.
    first_start: Vec<usize>,
    first_off: Vec<usize>,
    first: Vec<f64>,
}

impl RadiusWeights {
    fn hat_row(&self, d: usize) -> (usize, &[f64]) {
        (self.hat_start[d], &self.hat[self.hat_off[d]..self.hat_off[d + 1]])
    }

    fn first_row(&self, d: usize) -> (usize, &[f64]) {
        (self.first_start[d], &self.first[self.first_off[d]..self.first_off[d + 1]])
    }
}

/// Precomputed discrete Duhamel operator on a fixed grid.
#[derive(Debug, Clone)]
pub struct GridOperator {
    grid: GridSpec,
    radii: Vec<RadiusWeights>,
}

/// Gauss–Legendre rules on `[0, 1]`, indexed by node count.
fn rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        (0..=MAX_NODES)
            .map(|n| {
                if n == 0 {
                    return (Vec::new(), Vec::new());
                }
                let (x, w) = gauss_legendre(n);
                (x.iter().map(|v| 0.5 * (v + 1.0)).collect(), w.iter().map(|v| 0.5 * v).collect())
            })
            .collect()
    });
    &rules[n]
}

const MAX_NODES: usize = 12;

/// Nodes across the cell diagonal, clustered as `d = d* ± q^CLUSTER_POWER`
/// toward a logarithmic or inverse-square-root line `d*`.
const CLUSTER_NODES: usize = 12;
const CLUSTER_POWER: i32 = 4;
/// Nodes along lines parallel to the singular one, where the kernel is smooth.
const ALONG_NODES: usize = 8;
/// Nodes across the diagonal on pieces away from the singular line.
const PIECE_NODES: usize = 8;

/// Tensor rule size for a cell whose nearest logarithmic line has diagonal
/// offset `o` (`|o| ≥ 2`, so the line at most touches a neighbouring cell).
fn tensor_nodes(o: i64) -> usize {
    match o.unsigned_abs() {
        0..=2 => 12,
        3 => 8,
        4..=5 => 6,
        6..=10 => 4,
        _ => 3,
    }
}

/// Bilinear moments `∫∫ λ b(x, y) K dx dy` of one unit cell
/// `λ = j + x`, `s = c + y`, observation radius `i`, with `b` in the order
/// `(1−x)(1−y), x(1−y), (1−x)y, xy`.
///
/// In cell coordinates the kernel is singular only on lattice diagonals:
/// logarithmic on `y − x = j + i − c` (`s = λ + r`), and it switches on across
/// `y − x = j − i − c` (`s = λ − r`) and `x + y = i − j − c` (`s = r − λ`).
/// On the axis the first two coincide and the singularity is `1/√(s − λ)`.
/// Cells touched by any of these lines are integrated in `(d, x)` with
/// `d = y − x`, clustering `d` toward the singular line and clipping the
/// range to the region where the kernel is on.
fn cell_moments(i: usize, j: usize, c: usize) -> [f64; 4] {
    let (fi, fj, fc) = (i as f64, j as f64, c as f64);
    let (ii, jj, cc) = (i as i64, j as i64, c as i64);
    let o_log = jj + ii - cc;
    let o_jump = jj - ii - cc;
    let o_anti = ii - jj - cc;
    let mut m = [0.0; 4];
    let mut add = |x: f64, y: f64, w: f64| {
        let lambda = fj + x;
        let k = wave_kernel(lambda, fi, fc + y);
        if k == 0.0 || !k.is_finite() {
            return;
        }
        let v = w * lambda * k;
        m[0] += v * (1.0 - x) * (1.0 - y);
        m[1] += v * x * (1.0 - y);
        m[2] += v * (1.0 - x) * y;
        m[3] += v * x * y;
    };

    let touches_log = o_log.abs() <= 1;
    let cut = o_jump.abs() < 1 || (o_anti > 0 && o_anti < 2);
    if !touches_log && !cut {
        let nearest = if i == 0 { o_log } else { o_log.abs().min(o_jump.abs()) };
        let (xs, ws) = rule(tensor_nodes(nearest));
        for (&x, &wx) in xs.iter().zip(ws) {
            for (&y, &wy) in xs.iter().zip(ws) {
                add(x, y, wx * wy);
            }
        }
        return m;
    }

    // Segment of the line y = x + d inside the cell where the kernel is on.
    let segment = |d: f64| -> (f64, f64) {
        let lo = (-d).max(0.0).max(0.5 * (o_anti as f64 - d));
        let hi = (1.0 - d).min(1.0);
        (lo, hi)
    };
    let line = |d: f64, w: f64, add: &mut dyn FnMut(f64, f64, f64)| {
        let (lo, hi) = segment(d);
        if hi <= lo {
            return;
        }
        let (xs, ws) = rule(if j == 0 { MAX_NODES } else { ALONG_NODES });
        for (&q, &wq) in xs.iter().zip(ws) {
            if j == 0 {
                // λ → 0 at the lower end, where every singular line meets.
                let x = lo + (hi - lo) * q * q * q;
                add(x, x + d, w * wq * (hi - lo) * 3.0 * q * q);
            } else {
                let x = lo + (hi - lo) * q;
                add(x, x + d, w * wq * (hi - lo));
            }
        }
    };
    // s > λ − r is d > o_jump; on the axis this is also the singular line.
    let d_lo = (-1.0f64).max(o_jump as f64);
    let d_hi = 1.0;
    // Segment length is piecewise linear in d; split where it kinks.
    let star = touches_log.then_some(o_log as f64);
    let oa = o_anti as f64;
    let mut cuts = vec![d_lo, d_hi, 0.0, -oa, oa, 2.0 - oa];
    cuts.extend(star);
    cuts.retain(|&d| d >= d_lo && d <= d_hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let toward = match star {
            Some(st) if st == a => Some((a, b)),
            Some(st) if st == b => Some((b, a)),
            _ => None,
        };
        match toward {
            Some((from, to)) => {
                let span = to - from;
                let (qs, wq) = rule(CLUSTER_NODES);
                for (&q, &w) in qs.iter().zip(wq) {
                    let d = from + span * q.powi(CLUSTER_POWER);
                    line(d, w * span.abs() * CLUSTER_POWER as f64 * q.powi(CLUSTER_POWER - 1), &mut add);
                }
            }
            None => {
                let (qs, wq) = rule(PIECE_NODES);
                for (&q, &w) in qs.iter().zip(wq) {
                    line(a + (b - a) * q, w * (b - a), &mut add);
                }
            }
        }
    }
    m
}

/// Whether the kernel vanishes on the whole cell (`s ≤ |λ − r|` throughout).
fn cell_is_dark(i: usize, j: usize, c: usize) -> bool {
    (j >= i && c < j - i) || (j + 1 <= i && c + 1 <= i - j - 1)
}

impl GridOperator {
    /// Precompute weights; requires `Δt = Δr`.
    pub fn new(grid: GridSpec) -> Result<Self> {
        if !grid.is_uniform() {
            return Err(Error::Config(format!(
                "the grid operator needs dt = dr (got dr = {}, dt = {})",
                grid.dr, grid.dt
            )));
        }
        let n_r = grid.n_r();
        let radii = (0..=n_r).into_par_iter().map(|i| Self::radius_weights(&grid, i)).collect();
        Ok(Self { grid, radii })
    }

    fn radius_weights(grid: &GridSpec, i: usize) -> RadiusWeights {
        let n_t = grid.n_t();
        let n_r = grid.n_r();
        let scale = grid.dr * grid.dr;
        // Largest radial node that can be nonzero at time level m.
        let reach = |m: usize| (grid.cone_edge(m) + 1).min(n_r);
        // Node range of the hat weights at lag d.
        let hat_range = |d: usize| {
            let lo = i.saturating_sub(d + 1);
            let hi = (i + d + 1).min(reach(n_t - d.min(n_t)));
            (lo, hi)
        };
        let first_range = |d: usize| (i.saturating_sub(d + 1), (i + d + 1).min(reach(0)));

        // Cell moments for s-cells c = 0..n_t−1 over the λ-cells the ranges touch.
        let mut cells: Vec<(usize, Vec<[f64; 4]>)> = Vec::with_capacity(n_t);
        for c in 0..n_t {
            let (lo_a, hi_a) = hat_range(c);
            let (lo_b, hi_b) = hat_range(c + 1);
            let (lo_f, hi_f) = first_range(c + 1);
            let j_lo = lo_a.min(lo_b).min(lo_f).saturating_sub(1);
            let j_hi = hi_a.max(hi_b).max(hi_f).min(n_r.saturating_sub(1));
            let row = (j_lo..=j_hi)
                .map(|j| if cell_is_dark(i, j, c) { [0.0; 4] } else { cell_moments(i, j, c) })
                .collect();
            cells.push((j_lo, row));
        }
        let moment = |j: isize, c: isize, corner: usize| -> f64 {
            if j < 0 || c < 0 || c as usize >= n_t {
                return 0.0;
            }
            let (start, row) = &cells[c as usize];
            let j = j as usize;
            if j < *start || j >= start + row.len() {
                return 0.0;
            }
            row[j - start][corner]
        };

        let mut w = RadiusWeights::default();
        w.hat_off.push(0);
        for d in 0..n_t {
            let (lo, hi) = hat_range(d);
            w.hat_start.push(lo);
            for node in lo..=hi {
                let (jn, dn) = (node as isize, d as isize);
                let v = moment(jn, dn, 0) + moment(jn - 1, dn, 1) + moment(jn, dn - 1, 2) + moment(jn - 1, dn - 1, 3);
                w.hat.push(scale * v);
            }
            w.hat_off.push(w.hat.len());
        }
        w.first_off.push(0);
        for d in 0..=n_t {
            let (lo, hi) = first_range(d);
            w.first_start.push(lo);
            if d > 0 {
                for node in lo..=hi {
                    let (jn, dn) = (node as isize, d as isize);
                    w.first.push(scale * (moment(jn, dn - 1, 2) + moment(jn - 1, dn - 1, 3)));
                }
            }
            w.first_off.push(w.first.len());
        }
        w
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Number of stored weights.
    pub fn len(&self) -> usize {
        self.radii.iter().map(|w| w.hat.len() + w.first.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `L(Ψ)` at every node inside the cone, zero elsewhere.
    pub fn apply(&self, psi: &SpacetimeField) -> Result<SpacetimeField> {
        if psi.grid() != &self.grid {
            return Err(Error::Config("field grid differs from the operator grid".into()));
        }
        let g = self.grid;
        let nodes: Vec<(usize, usize)> =
            (1..=g.n_t()).flat_map(|n| (0..=g.cone_edge(n)).map(move |i| (i, n))).collect();
        let values: Vec<f64> = nodes.par_iter().map(|&(i, n)| self.apply_at(psi, i, n)).collect();
        let mut out = SpacetimeField::zeros(g);
        for (&(i, n), v) in nodes.iter().zip(values) {
            out.set(i, n, v);
        }
        Ok(out)
    }

    /// `L(Ψ)(r_i, t_n)`.
    pub fn apply_at(&self, psi: &SpacetimeField, i: usize, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let g = &self.grid;
        let w = &self.radii[i];
        let mut acc = 0.0;
        for d in 0..n {
            let m = n - d;
            let (start, weights) = w.hat_row(d);
            let row = psi.row(m);
            let end = (start + weights.len()).min(g.cone_edge(m) + 2).min(row.len());
            if end > start {
                acc += dot(&weights[..end - start], &row[start..end]);
            }
        }
        let (start, weights) = w.first_row(n);
        let row = psi.row(0);
        let end = (start + weights.len()).min(row.len());
        if end > start {
            acc += dot(&weights[..end - start], &row[start..end]);
        }
        acc
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators let the compiler vectorise.
    let mut s = [0.0; 4];
    let chunks = a.len() / 4;
    for q in 0..chunks {
        for l in 0..4 {
            s[l] += a[4 * q + l] * b[4 * q + l];
        }
    }
    let mut tail = 0.0;
    for l in 4 * chunks..a.len() {
        tail += a[l] * b[l];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}
