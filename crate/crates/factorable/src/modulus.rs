//! Empirical moduli of continuity: the pathwise modulus
//! Δ(f, δ) = sup{|f(x) − f(y)| : d(x, y) ≤ δ}, its norm across an ensemble
//! (the θ function), and the rectangle difference operator with its modulus
//! for fields on tensor grids.
//!
//! The δ-sweep sorts point pairs by distance once and accumulates a running
//! maximum, so a whole threshold grid costs one pass over the pairs per
//! realization.  Line spaces get a lag-banded fast path with sequential
//! memory access.

use crate::error::{Error, Result};
use crate::fields::{Coords, FieldEnsemble};
use crate::metric::DiscreteMetricSpace;
use crate::orlicz::{luxemburg_norm, OrliczFunction};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Monotone knot function δ ↦ value with piecewise-linear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalModulus {
    knots: Vec<(f64, f64)>,
}

impl EmpiricalModulus {
    pub fn from_knots(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::rejected("modulus needs at least one knot"));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::rejected("modulus deltas must be strictly increasing"));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::rejected("modulus values must be non-decreasing"));
            }
        }
        if knots.iter().any(|&(d, v)| !d.is_finite() || !v.is_finite() || d < 0.0 || v < 0.0) {
            return Err(Error::rejected("modulus knots must be finite and nonnegative"));
        }
        Ok(Self { knots })
    }

    /// Build from possibly noisy values by isotonic (pool-adjacent-violators)
    /// regression; returns the largest adjustment applied.
    pub fn from_noisy_knots(mut knots: Vec<(f64, f64)>) -> Result<(Self, f64)> {
        if knots.is_empty() {
            return Err(Error::rejected("modulus needs at least one knot"));
        }
        knots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let ys: Vec<f64> = knots.iter().map(|&(_, v)| v).collect();
        let fit = isotonic_non_decreasing(&ys);
        let max_adj = ys
            .iter()
            .zip(&fit)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        for (k, v) in knots.iter_mut().zip(&fit) {
            k.1 = *v;
        }
        Ok((Self::from_knots(knots)?, max_adj))
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn max_value(&self) -> f64 {
        self.knots.last().unwrap().1
    }

    pub fn max_delta(&self) -> f64 {
        self.knots.last().unwrap().0
    }

    /// Piecewise-linear evaluation, clamped to the end values outside the
    /// knot range.
    pub fn eval(&self, delta: f64) -> f64 {
        let k = &self.knots;
        if delta <= k[0].0 {
            return k[0].1;
        }
        let last = k.len() - 1;
        if delta >= k[last].0 {
            return k[last].1;
        }
        let idx = k.partition_point(|&(d, _)| d <= delta);
        let (d0, v0) = k[idx - 1];
        let (d1, v1) = k[idx];
        v0 + (delta - d0) * (v1 - v0) / (d1 - d0)
    }

    /// Largest δ in the knot range with value ≤ `target` under the linear
    /// interpolation (the maximal solution of eval(δ) = target).  `None`
    /// when even the first knot exceeds the target.
    pub fn maximal_solution(&self, target: f64) -> Option<f64> {
        let k = &self.knots;
        if k[0].1 > target {
            return None;
        }
        // rightmost knot with value <= target
        let mut idx = k.partition_point(|&(_, v)| v <= target);
        idx -= 1; // safe: k[0].1 <= target
        if idx == k.len() - 1 {
            return Some(k[idx].0);
        }
        let (d0, v0) = k[idx];
        let (d1, v1) = k[idx + 1];
        debug_assert!(v1 > target);
        if v1 <= v0 {
            return Some(d1);
        }
        Some(d0 + (d1 - d0) * (target - v0) / (v1 - v0))
    }

    /// CSV rows `delta,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "delta,value")?;
        for &(d, v) in &self.knots {
            writeln!(w, "{},{}", crate::fields::format_float(d), crate::fields::format_float(v))?;
        }
        Ok(())
    }
}

/// Unweighted L2 isotonic regression, non-decreasing.
pub fn isotonic_non_decreasing(ys: &[f64]) -> Vec<f64> {
    // pool adjacent violators with block means
    let mut means: Vec<f64> = Vec::with_capacity(ys.len());
    let mut counts: Vec<usize> = Vec::with_capacity(ys.len());
    for &y in ys {
        means.push(y);
        counts.push(1);
        while means.len() > 1 && means[means.len() - 2] > means[means.len() - 1] {
            let (m2, c2) = (means.pop().unwrap(), counts.pop().unwrap());
            let k = means.len() - 1;
            let c1 = counts[k];
            means[k] = (means[k] * c1 as f64 + m2 * c2 as f64) / (c1 + c2) as f64;
            counts[k] = c1 + c2;
        }
    }
    let mut out = Vec::with_capacity(ys.len());
    for (m, c) in means.into_iter().zip(counts) {
        out.extend(std::iter::repeat(m).take(c));
    }
    out
}

enum SweepKind {
    /// Strictly increasing 1-d coordinates with d = |cᵢ − cⱼ|: pairs grouped
    /// by lag, per-lag min/max spans precomputed (both non-decreasing in the
    /// lag).
    Lags { coords: Vec<f64>, dmin: Vec<f64>, dmax: Vec<f64> },
    /// General space: pair list sorted by distance.
    Sorted { i: Vec<u32>, j: Vec<u32>, d: Vec<f64> },
}

/// Precomputed pair order of one space, reused across realizations.
pub struct PairSweep {
    kind: SweepKind,
    diam: f64,
    n: usize,
}

impl PairSweep {
    pub fn new(space: &DiscreteMetricSpace) -> Self {
        let n = space.len();
        if let Some(coords) = space.coords() {
            if n >= 2 && coords.iter().all(|c| c.len() == 1) {
                let line: Vec<f64> = coords.iter().map(|c| c[0]).collect();
                let increasing = line.windows(2).all(|w| w[1] > w[0]);
                let matches_line_metric = increasing
                    && (0..n).all(|i| (i + 1..n).all(|j| space.d(i, j) == (line[j] - line[i]).abs()));
                if matches_line_metric {
                    let mut dmin = Vec::with_capacity(n - 1);
                    let mut dmax = Vec::with_capacity(n - 1);
                    for lag in 1..n {
                        let mut lo = f64::INFINITY;
                        let mut hi = 0.0_f64;
                        for idx in 0..(n - lag) {
                            let d = line[idx + lag] - line[idx];
                            lo = lo.min(d);
                            hi = hi.max(d);
                        }
                        dmin.push(lo);
                        dmax.push(hi);
                    }
                    return Self { kind: SweepKind::Lags { coords: line, dmin, dmax }, diam: space.diam(), n };
                }
            }
        }
        let pairs = n * (n - 1) / 2;
        let mut is = Vec::with_capacity(pairs);
        let mut js = Vec::with_capacity(pairs);
        let mut ds = Vec::with_capacity(pairs);
        for a in 0..n {
            for b in (a + 1)..n {
                is.push(a as u32);
                js.push(b as u32);
                ds.push(space.d(a, b));
            }
        }
        let mut order: Vec<usize> = (0..pairs).collect();
        order.sort_by(|&x, &y| ds[x].partial_cmp(&ds[y]).unwrap());
        let i = order.iter().map(|&o| is[o]).collect();
        let j = order.iter().map(|&o| js[o]).collect();
        let d = order.iter().map(|&o| ds[o]).collect();
        Self { kind: SweepKind::Sorted { i, j, d }, diam: space.diam(), n }
    }

    pub fn diam(&self) -> f64 {
        self.diam
    }

    /// Representative threshold grid: the distinct pair distances (per-lag
    /// spans on line spaces), evenly subsampled down to `cap`, always keeping
    /// the largest.
    pub fn distinct_distances(&self, cap: usize) -> Vec<f64> {
        let mut vals: Vec<f64> = match &self.kind {
            SweepKind::Lags { dmax, .. } => dmax.clone(),
            SweepKind::Sorted { d, .. } => d.clone(),
        };
        vals.dedup();
        if vals.len() > cap && cap >= 2 {
            let step = (vals.len() - 1) as f64 / (cap - 1) as f64;
            let picked: Vec<f64> = (0..cap).map(|k| vals[(k as f64 * step).round() as usize]).collect();
            vals = picked;
            vals.dedup();
        }
        vals
    }

    /// Modulus of one realization at each threshold (thresholds must be
    /// sorted ascending).  Exact closed-ball semantics per pair.
    pub fn moduli(&self, path: &[f64], thresholds: &[f64]) -> Vec<f64> {
        debug_assert_eq!(path.len(), self.n);
        debug_assert!(thresholds.windows(2).all(|w| w[1] >= w[0]));
        match &self.kind {
            SweepKind::Lags { coords, dmin, dmax } => {
                let n = self.n;
                // per-lag sup of |increments| and its running maximum
                let mut lagmax = vec![0.0_f64; n - 1];
                for (lag, slot) in lagmax.iter_mut().enumerate() {
                    let k = lag + 1;
                    let mut hi = 0.0_f64;
                    for idx in 0..(n - k) {
                        let d = (path[idx + k] - path[idx]).abs();
                        if d > hi {
                            hi = d;
                        }
                    }
                    *slot = hi;
                }
                let mut prefix = vec![0.0_f64; n];
                for k in 1..n {
                    prefix[k] = prefix[k - 1].max(lagmax[k - 1]);
                }
                thresholds
                    .iter()
                    .map(|&t| {
                        if t < 0.0 {
                            return 0.0;
                        }
                        // lags fully admissible: dmax <= t (dmax non-decreasing)
                        let full = dmax.partition_point(|&v| v <= t);
                        let mut out = prefix[full];
                        // boundary lags: dmin <= t < dmax, scanned pairwise
                        let edge_hi = dmin.partition_point(|&v| v <= t);
                        for lag in full..edge_hi {
                            let k = lag + 1;
                            for idx in 0..(self.n - k) {
                                if coords[idx + k] - coords[idx] <= t {
                                    let d = (path[idx + k] - path[idx]).abs();
                                    if d > out {
                                        out = d;
                                    }
                                }
                            }
                        }
                        out
                    })
                    .collect()
            }
            SweepKind::Sorted { i, j, d } => {
                let mut out = Vec::with_capacity(thresholds.len());
                let mut run = 0.0_f64;
                let mut p = 0usize;
                for &t in thresholds {
                    while p < d.len() && d[p] <= t {
                        let diff = (path[i[p] as usize] - path[j[p] as usize]).abs();
                        if diff > run {
                            run = diff;
                        }
                        p += 1;
                    }
                    out.push(run);
                }
                out
            }
        }
    }

    /// Moduli of every realization (row-major realizations × thresholds).
    pub fn moduli_matrix(&self, ensemble: &FieldEnsemble, thresholds: &[f64]) -> Vec<f64> {
        let t = thresholds.len();
        let mut out = vec![0.0; ensemble.realizations() * t];
        out.par_chunks_exact_mut(t)
            .zip(ensemble.values().par_chunks_exact(ensemble.points()))
            .for_each(|(row_out, path)| {
                row_out.copy_from_slice(&self.moduli(path, thresholds));
            });
        out
    }
}

/// Threshold grid specification for modulus / factorization pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DeltaGrid {
    /// Distinct pair distances of the space, capped by even subsampling.
    Distinct { cap: usize },
    /// Log-spaced between `min` and `max`.
    Log { min: f64, max: f64, count: usize },
    /// Linearly spaced between `min` and `max`.
    Linear { min: f64, max: f64, count: usize },
    Explicit { deltas: Vec<f64> },
}

impl DeltaGrid {
    pub fn materialize(&self, sweep: &PairSweep) -> Result<Vec<f64>> {
        let grid = match self {
            DeltaGrid::Distinct { cap } => {
                if *cap < 2 {
                    return Err(Error::rejected("distinct grid cap must be >= 2"));
                }
                sweep.distinct_distances(*cap)
            }
            DeltaGrid::Log { min, max, count } => {
                if !(*min > 0.0 && max > min && *count >= 2) {
                    return Err(Error::rejected("log grid needs 0 < min < max and count >= 2"));
                }
                let (lo, hi) = (min.ln(), max.ln());
                (0..*count)
                    .map(|k| (lo + (hi - lo) * k as f64 / (*count - 1) as f64).exp())
                    .collect()
            }
            DeltaGrid::Linear { min, max, count } => {
                if !(*min >= 0.0 && max > min && *count >= 2) {
                    return Err(Error::rejected("linear grid needs 0 <= min < max and count >= 2"));
                }
                (0..*count)
                    .map(|k| min + (max - min) * k as f64 / (*count - 1) as f64)
                    .collect()
            }
            DeltaGrid::Explicit { deltas } => {
                if deltas.is_empty() {
                    return Err(Error::rejected("explicit grid is empty"));
                }
                let mut v = deltas.clone();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                v
            }
        };
        if grid.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
            return Err(Error::rejected("delta grid must be nonnegative and finite"));
        }
        Ok(grid)
    }
}

/// Pathwise modulus of one realization over a δ-grid.
///
/// The δ = 0 knot holds the oscillation across zero-distance point pairs
/// (pseudometric twins), which is 0 for genuine metrics.
pub fn path_modulus(path: &[f64], space: &DiscreteMetricSpace, delta_grid: &[f64]) -> Result<EmpiricalModulus> {
    if delta_grid.is_empty() {
        return Err(Error::rejected("empty delta grid"));
    }
    if path.len() != space.len() {
        return Err(Error::rejected("realization length must match the space"));
    }
    let diam = space.diam();
    if delta_grid.iter().any(|&d| !(d >= 0.0) || d > diam * (1.0 + 1e-12)) {
        return Err(Error::rejected("delta grid must lie in [0, diam]"));
    }
    let mut thresholds: Vec<f64> = delta_grid.to_vec();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    if thresholds[0] > 0.0 {
        thresholds.insert(0, 0.0);
    }
    let sweep = PairSweep::new(space);
    let values = sweep.moduli(path, &thresholds);
    EmpiricalModulus::from_knots(thresholds.into_iter().zip(values).collect())
}

/// Norm choice for θ-type functionals.
#[derive(Debug, Clone, PartialEq)]
pub enum NormSpec {
    Luxemburg(OrliczFunction),
    Gls { psi: crate::orlicz::PsiFunction, p_grid: Vec<f64> },
}

impl NormSpec {
    pub fn norm(&self, samples: &[f64]) -> Result<f64> {
        match self {
            NormSpec::Luxemburg(phi) => luxemburg_norm(samples, phi),
            NormSpec::Gls { psi, p_grid } => crate::orlicz::grand_lebesgue_norm(samples, psi, p_grid),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            NormSpec::Luxemburg(phi) => format!("luxemburg[{}]", phi.describe()),
            NormSpec::Gls { psi, .. } => format!("gls[{}]", psi.describe()),
        }
    }
}

/// θ(δ) = norm across realizations of the pathwise modulus at δ, isotonic-
/// regressed into a monotone knot function (norm bisection leaves noise of
/// order 1e-9).
pub fn theta_function(
    ensemble: &FieldEnsemble,
    space: &DiscreteMetricSpace,
    delta_grid: &[f64],
    norm: &NormSpec,
) -> Result<EmpiricalModulus> {
    if ensemble.realizations() < 2 {
        return Err(Error::rejected("theta needs at least 2 realizations"));
    }
    if ensemble.points() != space.len() {
        return Err(Error::rejected("ensemble and space disagree on the point count"));
    }
    let mut thresholds: Vec<f64> = delta_grid.to_vec();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    if thresholds.is_empty() {
        return Err(Error::rejected("empty delta grid"));
    }
    if thresholds[0] > 0.0 {
        thresholds.insert(0, 0.0);
    }
    let sweep = PairSweep::new(space);
    theta_from_sweep(ensemble, &sweep, &thresholds, norm).map(|(m, _)| m)
}

/// θ plus the realizations × thresholds moduli matrix (reused by the
/// factorization pipeline).
pub fn theta_from_sweep(
    ensemble: &FieldEnsemble,
    sweep: &PairSweep,
    thresholds: &[f64],
    norm: &NormSpec,
) -> Result<(EmpiricalModulus, Vec<f64>)> {
    let t = thresholds.len();
    let m = ensemble.realizations();
    let matrix = sweep.moduli_matrix(ensemble, thresholds);
    // transpose for contiguous per-threshold sample vectors
    let mut col = vec![0.0; m];
    let mut knots = Vec::with_capacity(t);
    for ti in 0..t {
        for r in 0..m {
            col[r] = matrix[r * t + ti];
        }
        knots.push((thresholds[ti], norm.norm(&col)?));
    }
    let (theta, _adj) = EmpiricalModulus::from_noisy_knots(knots)?;
    Ok((theta, matrix))
}

/// Axis-aligned tensor grid for rectangle operators, d ≤ 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectGrid {
    axes: Vec<Vec<f64>>,
}

impl RectGrid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(Error::rejected("rectangle grids support 1 to 3 axes"));
        }
        for ax in &axes {
            if ax.len() < 2 {
                return Err(Error::rejected("each axis needs at least 2 coordinates"));
            }
            if ax.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::rejected("axis coordinates must be strictly increasing"));
            }
        }
        Ok(Self { axes })
    }

    pub fn from_coords(coords: &Coords) -> Result<Self> {
        match coords {
            Coords::Rect(axes) => Self::new(axes.clone()),
            Coords::Line(line) => Self::new(vec![line.clone()]),
            Coords::Abstract(_) => Err(Error::rejected("rectangle operators need grid coordinates")),
        }
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn points(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    /// Flat column index, axis 0 slowest.
    pub fn index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (a, &i) in multi.iter().enumerate() {
            idx = idx * self.axes[a].len() + i;
        }
        idx
    }

    pub fn side_lengths(&self) -> Vec<f64> {
        self.axes.iter().map(|ax| ax[ax.len() - 1] - ax[0]).collect()
    }
}

/// Alternating-sign sum of f over the 2^d corners of the box spanned by
/// multi-indices x and y: the iterated per-axis difference operator.
pub fn rectangle_difference(values: &[f64], grid: &RectGrid, x: &[usize], y: &[usize]) -> Result<f64> {
    let d = grid.dims();
    if x.len() != d || y.len() != d {
        return Err(Error::rejected(format!("corner arity must be {d}")));
    }
    for a in 0..d {
        let n = grid.axes()[a].len();
        if x[a] >= n || y[a] >= n {
            return Err(Error::rejected("corner index out of range"));
        }
    }
    if values.len() != grid.points() {
        return Err(Error::rejected("value buffer does not match the grid"));
    }
    let mut acc = 0.0;
    let mut corner = [0usize; 3];
    for mask in 0..(1u32 << d) {
        let mut sign = if d % 2 == 0 { 1.0 } else { -1.0 };
        for (a, slot) in corner.iter_mut().enumerate().take(d) {
            if mask & (1 << a) != 0 {
                *slot = y[a];
                sign = -sign;
            } else {
                *slot = x[a];
            }
        }
        acc += sign * values[grid.index(&corner[..d])];
    }
    Ok(acc)
}

/// Ω(f, δ⃗): sup of |rectangle_difference| over componentwise-ordered corner
/// pairs with per-axis gaps bounded by δ⃗ (sign symmetry makes the ordered
/// restriction exact for the sup of absolute values).
pub fn rectangle_modulus(values: &[f64], grid: &RectGrid, delta_vec: &[f64]) -> Result<f64> {
    let d = grid.dims();
    if delta_vec.len() != d {
        return Err(Error::rejected(format!("delta vector arity must be {d}")));
    }
    let sides = grid.side_lengths();
    for a in 0..d {
        if !(delta_vec[a] >= 0.0) || delta_vec[a] > sides[a] * (1.0 + 1e-12) {
            return Err(Error::rejected(format!("delta[{a}] outside [0, side]")));
        }
    }
    if values.len() != grid.points() {
        return Err(Error::rejected("value buffer does not match the grid"));
    }
    let pairs: Vec<Vec<(usize, usize)>> = (0..d).map(|a| axis_pairs(&grid.axes()[a], delta_vec[a])).collect();
    if pairs.iter().any(Vec::is_empty) {
        return Ok(0.0);
    }
    let mut sup = 0.0_f64;
    let mut x = [0usize; 3];
    let mut y = [0usize; 3];
    let mut cursor = vec![0usize; d];
    'outer: loop {
        for a in 0..d {
            let (lo, hi) = pairs[a][cursor[a]];
            x[a] = lo;
            y[a] = hi;
        }
        let v = rectangle_difference(values, grid, &x[..d], &y[..d])?.abs();
        if v > sup {
            sup = v;
        }
        // odometer over the per-axis pair lists
        for a in (0..d).rev() {
            cursor[a] += 1;
            if cursor[a] < pairs[a].len() {
                continue 'outer;
            }
            cursor[a] = 0;
            if a == 0 {
                break 'outer;
            }
        }
    }
    Ok(sup)
}

/// Proper ordered pairs (i < j) on one axis with gap ≤ delta.
fn axis_pairs(axis: &[f64], delta: f64) -> Vec<(usize, usize)> {
    let n = axis.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if axis[j] - axis[i] <= delta {
                out.push((i, j));
            } else {
                break;
            }
        }
    }
    out
}

/// γ(ξ, δ⃗) = Luxemburg norm across realizations of Ω(ξ(ω), δ⃗), one value
/// per requested δ⃗; componentwise monotone in the gaps.
pub fn gamma_function(
    ensemble: &FieldEnsemble,
    grid: &RectGrid,
    delta_vecs: &[Vec<f64>],
    phi: &OrliczFunction,
) -> Result<Vec<f64>> {
    if ensemble.points() != grid.points() {
        return Err(Error::rejected("ensemble and grid disagree on the point count"));
    }
    if delta_vecs.is_empty() {
        return Err(Error::rejected("no delta vectors supplied"));
    }
    let mut out = Vec::with_capacity(delta_vecs.len());
    for dv in delta_vecs {
        let per_path: Result<Vec<f64>> = ensemble
            .values()
            .par_chunks_exact(ensemble.points())
            .map(|path| rectangle_modulus(path, grid, dv))
            .collect();
        out.push(luxemburg_norm(&per_path?, phi)?);
    }
    Ok(out)
}

/// Precomputed box order for sweeping the rectangle modulus along a monotone
/// path δ⃗(s) = s · direction: each proper box becomes admissible at
/// s = max_a(gap_a / direction_a).
pub struct BoxSweep {
    corners: Vec<[u16; 6]>,
    activation: Vec<f64>,
    grid: RectGrid,
}

impl BoxSweep {
    pub fn new(grid: &RectGrid, direction: &[f64]) -> Result<Self> {
        let d = grid.dims();
        if direction.len() != d || direction.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::rejected("path direction must be strictly positive per axis"));
        }
        if grid.axes().iter().any(|ax| ax.len() > u16::MAX as usize) {
            return Err(Error::rejected("axis too large for the box sweep"));
        }
        let mut corners = Vec::new();
        let mut activation = Vec::new();
        let all_pairs: Vec<Vec<(usize, usize, f64)>> = (0..d)
            .map(|a| {
                let ax = &grid.axes()[a];
                let mut v = Vec::new();
                for i in 0..ax.len() {
                    for j in (i + 1)..ax.len() {
                        v.push((i, j, (ax[j] - ax[i]) / direction[a]));
                    }
                }
                v
            })
            .collect();
        let mut cursor = vec![0usize; d];
        'outer: loop {
            let mut c = [0u16; 6];
            let mut s = 0.0_f64;
            for a in 0..d {
                let (i, j, act) = all_pairs[a][cursor[a]];
                c[2 * a] = i as u16;
                c[2 * a + 1] = j as u16;
                s = s.max(act);
            }
            corners.push(c);
            activation.push(s);
            for a in (0..d).rev() {
                cursor[a] += 1;
                if cursor[a] < all_pairs[a].len() {
                    continue 'outer;
                }
                cursor[a] = 0;
                if a == 0 {
                    break 'outer;
                }
            }
        }
        let mut order: Vec<usize> = (0..corners.len()).collect();
        order.sort_by(|&x, &y| activation[x].partial_cmp(&activation[y]).unwrap());
        Ok(Self {
            corners: order.iter().map(|&o| corners[o]).collect(),
            activation: order.iter().map(|&o| activation[o]).collect(),
            grid: grid.clone(),
        })
    }

    /// Largest admissible path parameter (every box active).
    pub fn max_parameter(&self) -> f64 {
        *self.activation.last().unwrap()
    }

    /// Rectangle moduli of one realization at sorted path parameters.
    pub fn moduli(&self, path: &[f64], s_thresholds: &[f64]) -> Vec<f64> {
        let d = self.grid.dims();
        let mut out = Vec::with_capacity(s_thresholds.len());
        let mut run = 0.0_f64;
        let mut p = 0usize;
        let mut x = [0usize; 3];
        let mut y = [0usize; 3];
        for &s in s_thresholds {
            while p < self.activation.len() && self.activation[p] <= s {
                let c = &self.corners[p];
                for a in 0..d {
                    x[a] = c[2 * a] as usize;
                    y[a] = c[2 * a + 1] as usize;
                }
                let v = rectangle_difference(path, &self.grid, &x[..d], &y[..d])
                    .expect("sweep corners are in range")
                    .abs();
                if v > run {
                    run = v;
                }
                p += 1;
            }
            out.push(run);
        }
        out
    }

    pub fn moduli_matrix(&self, ensemble: &FieldEnsemble, s_thresholds: &[f64]) -> Vec<f64> {
        let t = s_thresholds.len();
        let mut out = vec![0.0; ensemble.realizations() * t];
        out.par_chunks_exact_mut(t)
            .zip(ensemble.values().par_chunks_exact(ensemble.points()))
            .for_each(|(row_out, path)| {
                row_out.copy_from_slice(&self.moduli(path, s_thresholds));
            });
        out
    }
}
