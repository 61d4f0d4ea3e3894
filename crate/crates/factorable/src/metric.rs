//! Finite discretizations of compact metric spaces: distance matrices with
//! symmetry and triangle audits, the extended-integer example space, the
//! natural / Orlicz / Gaussian distances generated by a field ensemble,
//! balls, covering numbers, metric entropy and measure ball-masses.

use crate::error::{Error, Result};
use crate::fields::FieldEnsemble;
use crate::orlicz::{grand_lebesgue_norm, luxemburg_norm, OrliczFunction, PsiFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Relative tolerance of the symmetry / triangle audits; empirical distance
/// matrices carry bisection and rounding noise of this order.
const AUDIT_REL_TOL: f64 = 1e-7;

/// Dense symmetric nonnegative matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::rejected("distance matrix must be square"));
        }
        Ok(Self { n, data: rows.into_iter().flatten().collect() })
    }

    pub fn from_flat(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::rejected("flat matrix length mismatch"));
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &v| m.max(v))
    }
}

/// Finite point set with a distance matrix standing in for a compact metric
/// space.  Pseudometrics (distinct points at distance zero) are allowed and
/// flagged, not rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMetricSpace {
    labels: Vec<String>,
    coords: Option<Vec<Vec<f64>>>,
    dist: SymMatrix,
    pseudo: bool,
}

impl DiscreteMetricSpace {
    pub fn new(labels: Vec<String>, coords: Option<Vec<Vec<f64>>>, dist: SymMatrix) -> Result<Self> {
        let n = dist.n();
        if labels.len() != n {
            return Err(Error::rejected("label count must match the matrix"));
        }
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(Error::rejected("coordinate count must match the matrix"));
            }
        }
        let scale = dist.max();
        if !scale.is_finite() {
            return Err(Error::MetricAudit("non-finite distance".into()));
        }
        let tol = AUDIT_REL_TOL * scale.max(1e-300);
        let mut pseudo = false;
        for i in 0..n {
            if dist.get(i, i) != 0.0 {
                return Err(Error::MetricAudit(format!("dist({i},{i}) = {} != 0", dist.get(i, i))));
            }
            for j in (i + 1)..n {
                let dij = dist.get(i, j);
                if dij < 0.0 {
                    return Err(Error::MetricAudit(format!("negative distance at ({i},{j})")));
                }
                if (dij - dist.get(j, i)).abs() > tol {
                    return Err(Error::MetricAudit(format!("asymmetry at ({i},{j})")));
                }
                if dij == 0.0 {
                    pseudo = true;
                }
            }
        }
        audit_triangle(&dist, tol)?;
        Ok(Self { labels, coords, dist, pseudo })
    }

    /// Points on the real line with the absolute-difference metric.
    pub fn from_line(coords: &[f64]) -> Result<Self> {
        let n = coords.len();
        let mut dist = SymMatrix::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                dist.set_sym(i, j, (coords[i] - coords[j]).abs());
            }
        }
        Self::new(
            (0..n).map(|i| i.to_string()).collect(),
            Some(coords.iter().map(|&c| vec![c]).collect()),
            dist,
        )
    }

    pub fn len(&self) -> usize {
        self.dist.n()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn coords(&self) -> Option<&Vec<Vec<f64>>> {
        self.coords.as_ref()
    }

    pub fn dist(&self) -> &SymMatrix {
        &self.dist
    }

    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist.get(i, j)
    }

    /// True when two distinct points sit at distance zero.
    pub fn is_pseudometric(&self) -> bool {
        self.pseudo
    }

    pub fn diam(&self) -> f64 {
        self.dist.max()
    }

    /// Smallest strictly positive pairwise distance, if any.
    pub fn min_positive_distance(&self) -> Option<f64> {
        let n = self.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.d(i, j);
                if d > 0.0 && d < best {
                    best = d;
                }
            }
        }
        best.is_finite().then_some(best)
    }
}

/// Exhaustive triangle audit for n ≤ 200, otherwise 10⁵ seeded random triples.
fn audit_triangle(dist: &SymMatrix, tol: f64) -> Result<()> {
    let n = dist.n();
    let check = |i: usize, j: usize, k: usize| -> Result<()> {
        let direct = dist.get(i, k);
        let via = dist.get(i, j) + dist.get(j, k);
        if direct > via + tol {
            return Err(Error::MetricAudit(format!(
                "triangle violated: d({i},{k}) = {direct} > {via} via {j}"
            )));
        }
        Ok(())
    };
    if n <= 200 {
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    check(i, j, k)?;
                    check(i, k, j)?;
                    check(j, i, k)?;
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0xfac7_0a0d);
        for _ in 0..100_000 {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let k = rng.random_range(0..n);
            check(i, j, k)?;
        }
    }
    Ok(())
}

/// Probability measure on the points of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::rejected("empty measure"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::rejected("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::rejected(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Self {
        Self { weights: vec![1.0 / n as f64; n] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }
}

/// The extended positive integers {1..n_max, ∞} with
/// d(m, n) = |1/n − 1/m|, d(n, ∞) = 1/n, d(∞, ∞) = 0.  The final point is ∞.
pub fn extended_integer_space(n_max: usize) -> Result<DiscreteMetricSpace> {
    if n_max < 2 {
        return Err(Error::rejected(format!("n_max must be >= 2, got {n_max}")));
    }
    // isometric embedding n -> 1/n, ∞ -> 0
    let mut labels: Vec<String> = (1..=n_max).map(|i| i.to_string()).collect();
    labels.push("inf".to_string());
    let embed: Vec<f64> = (1..=n_max).map(|i| 1.0 / i as f64).chain(std::iter::once(0.0)).collect();
    let n = embed.len();
    let mut dist = SymMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            dist.set_sym(i, j, (embed[i] - embed[j]).abs());
        }
    }
    DiscreteMetricSpace::new(labels, Some(embed.into_iter().map(|c| vec![c]).collect()), dist)
}

/// Column-transposed copy of the ensemble values (points × realizations).
fn transposed(ensemble: &FieldEnsemble) -> Vec<f64> {
    let (m, n) = (ensemble.realizations(), ensemble.points());
    let vals = ensemble.values();
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &vals[i * n..(i + 1) * n];
        for (x, &v) in row.iter().enumerate() {
            out[x * m + i] = v;
        }
    }
    out
}

fn space_from_increment_norm<F>(ensemble: &FieldEnsemble, norm: F, name: &str) -> Result<DiscreteMetricSpace>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let (m, n) = (ensemble.realizations(), ensemble.points());
    let t = transposed(ensemble);
    let mut dist = SymMatrix::zeros(n);
    let results: Vec<Result<(usize, usize, f64)>> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let a = &t[i * m..(i + 1) * m];
            let b = &t[j * m..(j + 1) * m];
            let inc: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            norm(&inc).map(|d| (i, j, d))
        })
        .collect();
    for r in results {
        let (i, j, d) = r?;
        dist.set_sym(i, j, d);
    }
    let labels = (0..n).map(|i| i.to_string()).collect();
    let coords = match ensemble.coords() {
        crate::fields::Coords::Line(c) => Some(c.iter().map(|&x| vec![x]).collect()),
        _ => None,
    };
    DiscreteMetricSpace::new(labels, coords, dist).map_err(|e| match e {
        Error::MetricAudit(msg) => Error::MetricAudit(format!("{name}: {msg}")),
        other => other,
    })
}

/// Natural distance d_ξ(x, y) = ||ξ(x) − ξ(y)||_{Gψ} of an ensemble.
///
/// With a degenerate ψ_(2) this is the empirical L₂ increment distance and
/// is computed by a Gram-matrix pass instead of per-pair moment loops.
pub fn natural_distance(ensemble: &FieldEnsemble, psi: &PsiFunction, p_grid: &[f64]) -> Result<DiscreteMetricSpace> {
    if psi.is_degenerate_zero() {
        return Err(Error::degenerate("natural distance needs a nonzero psi"));
    }
    if let crate::orlicz::PsiKind::Degenerate { r } = psi.kind() {
        if (*r - 2.0).abs() < 1e-12 {
            return l2_increment_space(ensemble, "natural_distance");
        }
    }
    space_from_increment_norm(ensemble, |inc| grand_lebesgue_norm(inc, psi, p_grid), "natural_distance")
}

/// Orlicz distance d_Φ(x, y) = ||ξ(x) − ξ(y)||_Φ (Luxemburg norm of
/// increments).
pub fn orlicz_distance(ensemble: &FieldEnsemble, phi: &OrliczFunction) -> Result<DiscreteMetricSpace> {
    space_from_increment_norm(ensemble, |inc| luxemburg_norm(inc, phi), "orlicz_distance")
}

fn l2_increment_space(ensemble: &FieldEnsemble, name: &str) -> Result<DiscreteMetricSpace> {
    let (m, n) = (ensemble.realizations(), ensemble.points());
    let t = transposed(ensemble);
    let mf = m as f64;
    let mut dist = SymMatrix::zeros(n);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = &t[i * m..(i + 1) * m];
            let mut out = vec![0.0; n];
            for j in (i + 1)..n {
                let b = &t[j * m..(j + 1) * m];
                let mut acc = 0.0;
                for (x, y) in a.iter().zip(b) {
                    let d = x - y;
                    acc += d * d;
                }
                out[j] = (acc / mf).sqrt();
            }
            out
        })
        .collect();
    for (i, row) in rows.iter().enumerate() {
        for j in (i + 1)..n {
            dist.set_sym(i, j, row[j]);
        }
    }
    let labels = (0..n).map(|i| i.to_string()).collect();
    let coords = match ensemble.coords() {
        crate::fields::Coords::Line(c) => Some(c.iter().map(|&x| vec![x]).collect()),
        _ => None,
    };
    DiscreteMetricSpace::new(labels, coords, dist).map_err(|e| match e {
        Error::MetricAudit(msg) => Error::MetricAudit(format!("{name}: {msg}")),
        other => other,
    })
}

/// Gaussian distance d_G(x, y) = empirical standard deviation of
/// ξ(x) − ξ(y).
pub fn gaussian_distance(ensemble: &FieldEnsemble) -> Result<DiscreteMetricSpace> {
    if ensemble.realizations() < 2 {
        return Err(Error::rejected("gaussian distance needs at least 2 realizations"));
    }
    let mf = ensemble.realizations() as f64;
    space_from_increment_norm(
        ensemble,
        |inc| {
            let mean: f64 = inc.iter().sum::<f64>() / mf;
            let var: f64 = inc.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / mf;
            Ok(var.max(0.0).sqrt())
        },
        "gaussian_distance",
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringNumbers {
    /// Size of a greedy 2ε-separated set: a lower bound on N(ε).
    pub lower: usize,
    /// Size of a greedy set cover by closed ε-balls: an upper bound.
    pub upper: usize,
    /// Exhaustive minimum when the subset has at most 12 points.
    pub exact: Option<usize>,
    /// ln(upper); the conservative side for every downstream bound.
    pub entropy_upper: f64,
}

/// Covering numbers of a subset under closed balls centered in the subset.
pub fn covering_number(space: &DiscreteMetricSpace, subset: &[usize], eps: f64) -> Result<CoveringNumbers> {
    if !(eps > 0.0) {
        return Err(Error::rejected(format!("eps must be positive, got {eps}")));
    }
    if subset.is_empty() {
        return Err(Error::rejected("empty subset"));
    }
    let n = space.len();
    if subset.iter().any(|&i| i >= n) {
        return Err(Error::rejected("subset index out of range"));
    }
    let k = subset.len();

    // greedy max-coverage with incremental uncovered counts
    let ball: Vec<Vec<usize>> = subset
        .iter()
        .map(|&c| {
            subset
                .iter()
                .enumerate()
                .filter(|&(_, &p)| space.d(c, p) <= eps)
                .map(|(idx, _)| idx)
                .collect()
        })
        .collect();
    let mut counts: Vec<usize> = ball.iter().map(Vec::len).collect();
    let mut covered = vec![false; k];
    let mut remaining = k;
    let mut upper = 0usize;
    while remaining > 0 {
        let (best, _) = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .unwrap();
        if counts[best] == 0 {
            // every point covers itself, so this cannot happen; guard anyway
            return Err(Error::Numeric("greedy cover stalled".into()));
        }
        upper += 1;
        let newly: Vec<usize> = ball[best].iter().copied().filter(|&p| !covered[p]).collect();
        for &p in &newly {
            covered[p] = true;
            remaining -= 1;
            for &c in &ball[p] {
                counts[c] = counts[c].saturating_sub(1);
            }
        }
    }

    // greedy packing at separation 2ε: lower bound via ball-disjointness
    let mut chosen: Vec<usize> = Vec::new();
    for (idx, &p) in subset.iter().enumerate() {
        if chosen.iter().all(|&c| space.d(subset[c], p) > 2.0 * eps) {
            chosen.push(idx);
        }
    }
    let lower = chosen.len().max(1);

    let exact = (k <= 12).then(|| exact_cover(space, subset, eps));

    Ok(CoveringNumbers { lower, upper, exact, entropy_upper: (upper as f64).ln() })
}

/// Exhaustive minimal cover for tiny subsets via subset DP over bitmasks.
fn exact_cover(space: &DiscreteMetricSpace, subset: &[usize], eps: f64) -> usize {
    let k = subset.len();
    let full: u32 = if k == 32 { u32::MAX } else { (1u32 << k) - 1 };
    let masks: Vec<u32> = subset
        .iter()
        .map(|&c| {
            let mut m = 0u32;
            for (idx, &p) in subset.iter().enumerate() {
                if space.d(c, p) <= eps {
                    m |= 1 << idx;
                }
            }
            m
        })
        .collect();
    let mut dp = vec![u32::MAX; (full as usize) + 1];
    dp[0] = 0;
    for state in 0..=full {
        if dp[state as usize] == u32::MAX {
            continue;
        }
        // cover the lowest uncovered point with every candidate ball
        let uncovered = !state & full;
        if uncovered == 0 {
            continue;
        }
        let pivot = uncovered.trailing_zeros();
        for mask in masks.iter().filter(|m| *m & (1 << pivot) != 0) {
            let next = (state | mask) as usize;
            dp[next] = dp[next].min(dp[state as usize] + 1);
        }
    }
    dp[full as usize] as usize
}

/// Mass of the closed ball B(r, x) under the measure.
pub fn ball_mass(space: &DiscreteMetricSpace, measure: &DiscreteMeasure, x: usize, r: f64) -> f64 {
    let n = space.len();
    debug_assert_eq!(measure.weights().len(), n);
    let mut acc = 0.0;
    for j in 0..n {
        if space.d(x, j) <= r {
            acc += measure.weight(j);
        }
    }
    acc
}

/// JSON document form: `{points, dist, weights}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceDocument {
    pub points: Vec<String>,
    pub dist: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<f64>>>,
}

impl SpaceDocument {
    pub fn from_space(space: &DiscreteMetricSpace, measure: Option<&DiscreteMeasure>) -> Self {
        let n = space.len();
        Self {
            points: space.labels().to_vec(),
            dist: (0..n).map(|i| space.dist().row(i).to_vec()).collect(),
            weights: measure.map(|m| m.weights().to_vec()),
            coords: space.coords().cloned(),
        }
    }

    pub fn into_space(self) -> Result<(DiscreteMetricSpace, Option<DiscreteMeasure>)> {
        let dist = SymMatrix::from_rows(self.dist)?;
        let space = DiscreteMetricSpace::new(self.points, self.coords, dist)?;
        let measure = self.weights.map(DiscreteMeasure::new).transpose()?;
        Ok((space, measure))
    }
}

/// CSV edge list `point_i,point_j,distance` over i < j.
pub fn write_edge_list<W: Write>(space: &DiscreteMetricSpace, mut w: W) -> Result<()> {
    writeln!(w, "point_i,point_j,distance")?;
    let n = space.len();
    for i in 0..n {
        for j in (i + 1)..n {
            writeln!(w, "{},{},{}", space.labels()[i], space.labels()[j], crate::fields::format_float(space.d(i, j)))?;
        }
    }
    Ok(())
}

/// Rebuild a space from an edge list (labels inferred, missing edges
/// rejected).
pub fn read_edge_list(text: &str) -> Result<DiscreteMetricSpace> {
    let mut labels: Vec<String> = Vec::new();
    let mut edges: Vec<(String, String, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 && line.trim() == "point_i,point_j,distance" {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::rejected(format!("bad edge-list line {}", lineno + 1)));
        }
        let d: f64 = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::rejected(format!("bad distance on line {}", lineno + 1)))?;
        let (a, b) = (parts[0].trim().to_string(), parts[1].trim().to_string());
        if !labels.contains(&a) {
            labels.push(a.clone());
        }
        if !labels.contains(&b) {
            labels.push(b.clone());
        }
        edges.push((a, b, d));
    }
    let n = labels.len();
    if n == 0 {
        return Err(Error::rejected("empty edge list"));
    }
    let index = |l: &str| labels.iter().position(|x| x == l).unwrap();
    let mut seen = vec![false; n * n];
    let mut dist = SymMatrix::zeros(n);
    for (a, b, d) in edges {
        let (i, j) = (index(&a), index(&b));
        dist.set_sym(i, j, d);
        seen[i * n + j] = true;
        seen[j * n + i] = true;
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && !seen[i * n + j] {
                return Err(Error::rejected(format!("edge list misses pair ({}, {})", labels[i], labels[j])));
            }
        }
    }
    DiscreteMetricSpace::new(labels, None, dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{simulate_brownian, Coords, RngStreamSpec};

    #[test]
    fn extended_integers_match_the_stated_distance() {
        let s = extended_integer_space(8).unwrap();
        let inf = s.len() - 1;
        // labels are 1..=8 then inf; index i holds integer i+1
        assert_eq!(s.d(2, inf), 1.0 / 3.0);
        assert_eq!(s.d(inf, inf), 0.0);
        assert_eq!(s.d(1, 3), 0.25); // |1/4 - 1/2|
        assert!(extended_integer_space(1).is_err());
    }

    #[test]
    fn extended_integers_embed_isometrically() {
        let s = extended_integer_space(12).unwrap();
        let coords = s.coords().unwrap();
        for i in 0..s.len() {
            for j in 0..s.len() {
                assert!((s.d(i, j) - (coords[i][0] - coords[j][0]).abs()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn triangle_audit_rejects_violations() {
        let rows = vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ];
        let dist = SymMatrix::from_rows(rows).unwrap();
        let out = DiscreteMetricSpace::new(vec!["a".into(), "b".into(), "c".into()], None, dist);
        assert!(matches!(out, Err(Error::MetricAudit(_))));
    }

    #[test]
    fn pseudometric_is_flagged_not_rejected() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let s = DiscreteMetricSpace::new(vec!["a".into(), "b".into()], None, SymMatrix::from_rows(rows).unwrap()).unwrap();
        assert!(s.is_pseudometric());
    }

    #[test]
    fn identical_columns_give_zero_distances() {
        // xi(x) identical for all points -> all distances 0, flagged pseudo
        let values = vec![1.0, 1.0, -2.0, -2.0, 0.5, 0.5];
        let ens = FieldEnsemble::new(values, 3, Coords::Line(vec![0.0, 1.0]), "toy", None).unwrap();
        let psi = PsiFunction::constant(1.0).unwrap();
        let s = natural_distance(&ens, &psi, &[2.0]).unwrap();
        assert_eq!(s.d(0, 1), 0.0);
        assert!(s.is_pseudometric());
        let so = orlicz_distance(&ens, &OrliczFunction::power(2.0).unwrap()).unwrap();
        assert_eq!(so.d(0, 1), 0.0);
    }

    #[test]
    fn two_point_symmetric_ensemble_natural_distance() {
        // xi(x1) = 0, xi(x2) = ±1, psi ≡ 1 -> d = sup_p |±1|_p = 1
        let values = vec![0.0, 1.0, 0.0, -1.0];
        let ens = FieldEnsemble::new(values, 2, Coords::Line(vec![0.0, 1.0]), "toy", None).unwrap();
        let psi = PsiFunction::constant(1.0).unwrap();
        let s = natural_distance(&ens, &psi, &[2.0, 3.0, 4.0]).unwrap();
        assert!((s.d(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brownian_natural_distance_tracks_sqrt_gap() {
        let grid: Vec<f64> = (0..33).map(|i| i as f64 / 32.0).collect();
        let m = 6000;
        let ens = simulate_brownian(&grid, m, RngStreamSpec::new(21)).unwrap();
        let psi = PsiFunction::degenerate(2.0).unwrap();
        let s = natural_distance(&ens, &psi, &[2.0]).unwrap();
        // MC oracle: |w(t)-w(s)|_2 = sqrt(|t-s|), se of the squared estimate
        for (i, j) in [(0usize, 32usize), (8, 24), (4, 8)] {
            let gap: f64 = (grid[j] - grid[i]).abs();
            let d = s.d(i, j);
            let se = (2.0 * gap * gap / m as f64).sqrt();
            assert!((d * d - gap).abs() <= 3.0 * se, "({i},{j}): {} vs {gap}", d * d);
        }
    }

    #[test]
    fn gaussian_distance_of_linear_field_is_euclidean() {
        // xi(x) = x * eta: d_G(x, y) = |x - y| * sd(eta)
        let pts = [0.0, 0.3, 1.0];
        let mut values = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = 4000;
        for _ in 0..m {
            let eta: f64 = rng.random_range(-1.0..1.0); // any centered law works
            for &x in &pts {
                values.push(x * eta);
            }
        }
        let ens = FieldEnsemble::new(values, m, Coords::Line(pts.to_vec()), "toy", None).unwrap();
        let s = gaussian_distance(&ens).unwrap();
        let sd_eta = {
            // recompute from the stored first column scaled back
            let mut col = vec![0.0; m];
            ens.column_into(2, &mut col);
            let mean: f64 = col.iter().sum::<f64>() / m as f64;
            (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64).sqrt()
        };
        for (i, j) in [(0usize, 1usize), (1, 2), (0, 2)] {
            let expect = (pts[i] - pts[j]).abs() * sd_eta;
            assert!((s.d(i, j) - expect).abs() < 1e-9, "({i},{j})");
        }
        assert!(gaussian_distance(&ens.prefix(1).unwrap()).is_err());
    }

    #[test]
    fn covering_trivial_when_eps_reaches_diam() {
        let s = DiscreteMetricSpace::from_line(&[0.0, 0.4, 1.0]).unwrap();
        let all: Vec<usize> = (0..3).collect();
        let c = covering_number(&s, &all, 1.0).unwrap();
        assert_eq!((c.lower, c.upper, c.exact), (1, 1, Some(1)));
        assert_eq!(c.entropy_upper, 0.0);
        assert!(covering_number(&s, &all, 0.0).is_err());
    }

    #[test]
    fn covering_unit_interval_quarter_balls() {
        let coords: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let s = DiscreteMetricSpace::from_line(&coords).unwrap();
        let all: Vec<usize> = (0..coords.len()).collect();
        let c = covering_number(&s, &all, 0.25).unwrap();
        assert_eq!(c.upper, 2);
        assert!(c.lower <= 2);
    }

    #[test]
    fn covering_extended_integers_against_exhaustive_oracle() {
        let s = extended_integer_space(64).unwrap();
        let all: Vec<usize> = (0..s.len()).collect();
        let c = covering_number(&s, &all, 0.1).unwrap();
        // brute-force minimal cover oracle (greedy-independent, increasing k)
        let oracle = {
            let n = s.len();
            let balls: Vec<Vec<bool>> = (0..n)
                .map(|c| (0..n).map(|p| s.d(c, p) <= 0.1).collect())
                .collect();
            let mut best = None;
            'k: for k in 1..=6usize {
                let mut combo: Vec<usize> = (0..k).collect();
                loop {
                    let covered = (0..n).all(|p| combo.iter().any(|&c| balls[c][p]));
                    if covered {
                        best = Some(k);
                        break 'k;
                    }
                    // next combination
                    let mut i = k;
                    loop {
                        if i == 0 {
                            break;
                        }
                        i -= 1;
                        if combo[i] != i + n - k {
                            combo[i] += 1;
                            for j in (i + 1)..k {
                                combo[j] = combo[j - 1] + 1;
                            }
                            break;
                        }
                        if i == 0 {
                            combo.clear();
                            break;
                        }
                    }
                    if combo.is_empty() {
                        break;
                    }
                }
            }
            best.unwrap()
        };
        assert_eq!(oracle, 4);
        assert!(c.lower <= oracle && oracle <= c.upper, "{} <= {oracle} <= {}", c.lower, c.upper);
    }

    #[test]
    fn covering_exact_small_is_bracketed() {
        let s = extended_integer_space(10).unwrap();
        let sub: Vec<usize> = (0..11).collect();
        for eps in [0.05, 0.11, 0.3] {
            let c = covering_number(&s, &sub, eps).unwrap();
            let e = c.exact.unwrap();
            assert!(c.lower <= e && e <= c.upper);
        }
    }

    #[test]
    fn covering_monotone_in_eps() {
        let s = extended_integer_space(40).unwrap();
        let all: Vec<usize> = (0..s.len()).collect();
        let mut prev = usize::MAX;
        for eps in [0.02, 0.05, 0.1, 0.2, 0.5] {
            let c = covering_number(&s, &all, eps).unwrap();
            assert!(c.upper <= prev);
            prev = c.upper;
        }
    }

    #[test]
    fn ball_mass_steps_and_saturates() {
        let s = DiscreteMetricSpace::from_line(&[0.0, 1.0]).unwrap();
        let m = DiscreteMeasure::uniform(2);
        assert_eq!(ball_mass(&s, &m, 0, 0.0), 0.5);
        assert_eq!(ball_mass(&s, &m, 0, 0.5), 0.5);
        assert_eq!(ball_mass(&s, &m, 0, 1.0), 1.0);
        let s3 = DiscreteMetricSpace::from_line(&[0.0, 0.2, 0.9]).unwrap();
        let m3 = DiscreteMeasure::uniform(3);
        let mut prev = 0.0;
        for r in [0.0, 0.1, 0.2, 0.5, 0.9, 2.0] {
            let mass = ball_mass(&s3, &m3, 0, r);
            assert!(mass >= prev);
            prev = mass;
        }
        assert_eq!(prev, 1.0);
    }

    #[test]
    fn measure_validates() {
        assert!(DiscreteMeasure::new(vec![0.5, 0.4]).is_err());
        assert!(DiscreteMeasure::new(vec![-0.5, 1.5]).is_err());
        assert!(DiscreteMeasure::new(vec![0.25; 4]).is_ok());
    }

    #[test]
    fn json_document_round_trip() {
        let s = extended_integer_space(5).unwrap();
        let m = DiscreteMeasure::uniform(6);
        let doc = SpaceDocument::from_space(&s, Some(&m));
        let json = serde_json::to_string(&doc).unwrap();
        let back: SpaceDocument = serde_json::from_str(&json).unwrap();
        let (s2, m2) = back.into_space().unwrap();
        assert_eq!(s2.dist(), s.dist());
        assert_eq!(m2.unwrap().weights(), m.weights());
    }

    #[test]
    fn edge_list_round_trip() {
        let s = extended_integer_space(4).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back = read_edge_list(&text).unwrap();
        assert_eq!(back.len(), s.len());
        for i in 0..s.len() {
            for j in 0..s.len() {
                assert!((back.d(i, j) - s.d(i, j)).abs() < 1e-15);
            }
        }
    }
}
