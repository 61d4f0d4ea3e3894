//! Monte Carlo generators for random-field ensembles on discretized domains:
//! Wiener paths, general centered Gaussian fields, fractional Brownian
//! motion, symmetric α-stable paths, the Brownian sheet, and the heavy-tail
//! compression transform Z_m.
//!
//! Reproducibility: every realization draws from its own counter-derived
//! stream of a ChaCha8 generator, so regenerating with the same master seed
//! is bit-identical regardless of thread count or scheduling.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Master seed plus the per-realization stream derivation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStreamSpec {
    pub master: u64,
}

impl RngStreamSpec {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    /// Independent stream for realization `i`: same key, distinct nonce.
    pub fn stream(&self, i: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(i);
        rng
    }
}

/// Point layout of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Coords {
    /// 1-d coordinates (one per column).
    Line(Vec<f64>),
    /// Tensor grid, axis 0 slowest; column index = i0 * n1 * ... + i1 * ... .
    Rect(Vec<Vec<f64>>),
    /// Unstructured points, count only.
    Abstract(usize),
}

impl Coords {
    pub fn len(&self) -> usize {
        match self {
            Coords::Line(v) => v.len(),
            Coords::Rect(axes) => axes.iter().map(Vec::len).product(),
            Coords::Abstract(n) => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// M independent realizations of a field sampled at a fixed point set.
/// Row = one realization, column = one point, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEnsemble {
    values: Vec<f64>,
    m: usize,
    n: usize,
    coords: Coords,
    generator: String,
    seed: Option<RngStreamSpec>,
}

impl FieldEnsemble {
    pub fn new(values: Vec<f64>, m: usize, coords: Coords, generator: impl Into<String>, seed: Option<RngStreamSpec>) -> Result<Self> {
        let n = coords.len();
        if m == 0 || n == 0 {
            return Err(Error::rejected("ensemble needs at least one realization and one point"));
        }
        if values.len() != m * n {
            return Err(Error::rejected(format!(
                "value buffer has {} entries, expected {}x{}",
                values.len(),
                m,
                n
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::rejected("ensemble contains non-finite values"));
        }
        Ok(Self { values, m, n, coords, generator: generator.into(), seed })
    }

    pub fn realizations(&self) -> usize {
        self.m
    }

    pub fn points(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> &Coords {
        &self.coords
    }

    pub fn generator(&self) -> &str {
        &self.generator
    }

    pub fn seed(&self) -> Option<RngStreamSpec> {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n)
    }

    pub fn column_into(&self, x: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.m);
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.values[i * self.n + x];
        }
    }

    /// First `k` realizations as a new ensemble (shares coords and metadata).
    pub fn prefix(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.m {
            return Err(Error::rejected(format!("prefix {k} out of range 1..={}", self.m)));
        }
        Ok(Self {
            values: self.values[..k * self.n].to_vec(),
            m: k,
            n: self.n,
            coords: self.coords.clone(),
            generator: self.generator.clone(),
            seed: self.seed,
        })
    }

    /// Scale every value by `c`.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::rejected("scale factor must be finite"));
        }
        Ok(Self {
            values: self.values.iter().map(|v| v * c).collect(),
            m: self.m,
            n: self.n,
            coords: self.coords.clone(),
            generator: format!("{} * {c}", self.generator),
            seed: self.seed,
        })
    }

    /// Per-realization sup of |ξ(x)| over the points.
    pub fn sup_abs(&self) -> Vec<f64> {
        self.rows()
            .map(|r| r.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            .collect()
    }
}

fn validate_time_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::rejected("time grid needs at least 2 points"));
    }
    if grid[0] != 0.0 {
        return Err(Error::rejected("time grid must start at 0"));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(Error::rejected("time grid must be strictly increasing and finite"));
        }
    }
    Ok(())
}

fn generate_rows<F>(m: usize, n: usize, seed: RngStreamSpec, fill: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let mut values = vec![0.0; m * n];
    values
        .par_chunks_exact_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            let mut rng = seed.stream(i as u64);
            fill(&mut rng, row);
        });
    values
}

/// Wiener process on the grid: w(0) = 0, independent centered Gaussian
/// increments with variance equal to the grid spacing.
pub fn simulate_brownian(grid: &[f64], m: usize, seed: RngStreamSpec) -> Result<FieldEnsemble> {
    validate_time_grid(grid)?;
    if m == 0 {
        return Err(Error::rejected("need at least one realization"));
    }
    let n = grid.len();
    let sds: Vec<f64> = grid.windows(2).map(|w| (w[1] - w[0]).sqrt()).collect();
    let values = generate_rows(m, n, seed, |rng, row| {
        row[0] = 0.0;
        let mut level = 0.0;
        for (j, sd) in sds.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            level += sd * z;
            row[j + 1] = level;
        }
    });
    FieldEnsemble::new(values, m, Coords::Line(grid.to_vec()), "brownian", Some(seed))
}

/// Symmetric square root of a covariance matrix via eigendecomposition,
/// with small negative eigenvalues (above the floor) clipped to zero.
fn symmetric_sqrt(cov: &[f64], n: usize) -> Result<DMatrix<f64>> {
    let mat = DMatrix::from_fn(n, n, |i, j| cov[i * n + j]);
    let scale = mat.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (mat[(i, j)] - mat[(j, i)]).abs() > 1e-8 * scale {
                return Err(Error::rejected(format!(
                    "covariance not symmetric at ({i}, {j}): {} vs {}",
                    mat[(i, j)],
                    mat[(j, i)]
                )));
            }
        }
    }
    let sym = 0.5 * (&mat + mat.transpose());
    let eig = SymmetricEigen::new(sym);
    let floor = -1e-10 * scale;
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < floor {
            return Err(Error::rejected(format!("covariance indefinite: eigenvalue {v}")));
        }
        *v = v.max(0.0).sqrt();
    }
    let q = eig.eigenvectors;
    Ok(&q * DMatrix::from_diagonal(&roots) * q.transpose())
}

/// Centered Gaussian field with the given covariance matrix (row-major,
/// `points.len()` square), sampled by a symmetric square-root factorization.
pub fn simulate_gaussian_field(points: &[f64], cov: &[f64], m: usize, seed: RngStreamSpec) -> Result<FieldEnsemble> {
    let n = points.len();
    if n == 0 || m == 0 {
        return Err(Error::rejected("need at least one point and one realization"));
    }
    if cov.len() != n * n {
        return Err(Error::rejected(format!("covariance must be {n}x{n}")));
    }
    let root = symmetric_sqrt(cov, n)?;
    let values = generate_rows(m, n, seed, |rng, row| {
        let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for i in 0..n {
            let mut acc = 0.0;
            for (j, zj) in z.iter().enumerate() {
                acc += root[(i, j)] * zj;
            }
            row[i] = acc;
        }
    });
    FieldEnsemble::new(values, m, Coords::Line(points.to_vec()), "gaussian_field", Some(seed))
}

/// Fractional Brownian motion with Hurst index H ∈ (0, 1) via the exact
/// covariance ½(s^{2H} + t^{2H} − |t−s|^{2H}).
pub fn simulate_fbm(hurst: f64, grid: &[f64], m: usize, seed: RngStreamSpec) -> Result<FieldEnsemble> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::rejected(format!("hurst must lie in (0, 1), got {hurst}")));
    }
    validate_time_grid(grid)?;
    let n = grid.len();
    let h2 = 2.0 * hurst;
    let mut cov = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (s, t) = (grid[i], grid[j]);
            cov[i * n + j] = 0.5 * (s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2));
        }
    }
    let mut out = simulate_gaussian_field(grid, &cov, m, seed)?;
    out.generator = format!("fbm(h={hurst})");
    Ok(out)
}

/// One standard symmetric α-stable variate (Chambers–Mallows–Stuck).
fn sample_symmetric_stable(alpha: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
    let e: f64 = {
        // inverse-cdf exponential keeps the draw count per realization fixed
        let x: f64 = rng.random_range(0.0_f64..1.0);
        -(1.0 - x).ln()
    };
    if alpha == 1.0 {
        return u.tan();
    }
    let s = (alpha * u).sin() / u.cos().powf(1.0 / alpha);
    s * (((1.0 - alpha) * u).cos() / e).powf((1.0 - alpha) / alpha)
}

/// Symmetric α-stable path: independent increments scaled by spacing^{1/α}.
pub fn simulate_stable(alpha: f64, grid: &[f64], m: usize, seed: RngStreamSpec) -> Result<FieldEnsemble> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::rejected(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    validate_time_grid(grid)?;
    let n = grid.len();
    let scales: Vec<f64> = grid.windows(2).map(|w| (w[1] - w[0]).powf(1.0 / alpha)).collect();
    let values = generate_rows(m, n, seed, |rng, row| {
        row[0] = 0.0;
        let mut level = 0.0;
        for (j, sc) in scales.iter().enumerate() {
            level += sc * sample_symmetric_stable(alpha, rng);
            row[j + 1] = level;
        }
    });
    FieldEnsemble::new(values, m, Coords::Line(grid.to_vec()), format!("stable(alpha={alpha})"), Some(seed))
}

/// Brownian sheet on a rectangular grid (both axes from 0): cumulative sums
/// of independent N(0, cell area) increments, covariance ∏ min(sᵢ, tᵢ).
pub fn simulate_brownian_sheet(grid_x: &[f64], grid_y: &[f64], m: usize, seed: RngStreamSpec) -> Result<FieldEnsemble> {
    validate_time_grid(grid_x)?;
    validate_time_grid(grid_y)?;
    if m == 0 {
        return Err(Error::rejected("need at least one realization"));
    }
    let (nx, ny) = (grid_x.len(), grid_y.len());
    let n = nx * ny;
    let dx: Vec<f64> = grid_x.windows(2).map(|w| w[1] - w[0]).collect();
    let dy: Vec<f64> = grid_y.windows(2).map(|w| w[1] - w[0]).collect();
    let values = generate_rows(m, n, seed, |rng, row| {
        // increments on interior cells, then 2-d prefix sums
        row.fill(0.0);
        for i in 1..nx {
            for j in 1..ny {
                let sd = (dx[i - 1] * dy[j - 1]).sqrt();
                let z: f64 = rng.sample(StandardNormal);
                row[i * ny + j] = sd * z;
            }
        }
        for i in 1..nx {
            for j in 1..ny {
                row[i * ny + j] += row[(i - 1) * ny + j] + row[i * ny + (j - 1)] - row[(i - 1) * ny + (j - 1)];
            }
        }
    });
    FieldEnsemble::new(
        values,
        m,
        Coords::Rect(vec![grid_x.to_vec(), grid_y.to_vec()]),
        "brownian_sheet",
        Some(seed),
    )
}

/// Heavy-tail compression Z_m(y) = sign(y)·[ln(1 + |y|)]^m applied
/// elementwise; continuous, odd, strictly increasing, Z_m(0) = 0.
pub fn apply_zm(ensemble: &FieldEnsemble, m_exp: f64) -> Result<FieldEnsemble> {
    if !(m_exp > 0.0) || !m_exp.is_finite() {
        return Err(Error::rejected(format!("zm exponent must be positive, got {m_exp}")));
    }
    let values: Vec<f64> = ensemble.values.iter().map(|&y| zm(y, m_exp)).collect();
    Ok(FieldEnsemble {
        values,
        m: ensemble.m,
        n: ensemble.n,
        coords: ensemble.coords.clone(),
        generator: format!("zm(m={m_exp}) . {}", ensemble.generator),
        seed: ensemble.seed,
    })
}

pub fn zm(y: f64, m_exp: f64) -> f64 {
    y.signum() * y.abs().ln_1p().powf(m_exp)
}

/// Nested-prefix p-moment estimates used as a heavy-tail blow-up diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlowupDiagnostic {
    pub prefixes: Vec<usize>,
    pub estimates: Vec<f64>,
    /// Strictly increasing estimates with at least a 10x overall rise.
    pub fires: bool,
}

/// Estimate |ξ|_p over nested realization prefixes, pooling all points.
/// An estimate that keeps growing as the sample grows signals an infinite
/// p-moment.
pub fn p_moment_blowup(ensemble: &FieldEnsemble, p: f64, prefixes: &[usize]) -> Result<BlowupDiagnostic> {
    if prefixes.is_empty() {
        return Err(Error::rejected("need at least one prefix"));
    }
    let mut estimates = Vec::with_capacity(prefixes.len());
    for &k in prefixes {
        if k == 0 || k > ensemble.m {
            return Err(Error::rejected(format!("prefix {k} out of range")));
        }
        let slice = &ensemble.values[..k * ensemble.n];
        let mean: f64 = slice.iter().map(|v| v.abs().powf(p)).sum::<f64>() / slice.len() as f64;
        estimates.push(mean.powf(1.0 / p));
    }
    let increasing = estimates.windows(2).all(|w| w[1] > w[0]);
    let fires = increasing && estimates.last().unwrap() / estimates.first().unwrap().max(f64::MIN_POSITIVE) > 10.0;
    Ok(BlowupDiagnostic { prefixes: prefixes.to_vec(), estimates, fires })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub rows: usize,
    pub cols: usize,
    pub generator: String,
    pub seed: Option<u64>,
    pub coords: Coords,
}

impl FieldEnsemble {
    /// Raw little-endian f64 matrix plus a JSON sidecar.
    pub fn write_bin(&self, bin_path: &Path, meta_path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::File::create(bin_path)?.write_all(&buf)?;
        let meta = EnsembleMeta {
            rows: self.m,
            cols: self.n,
            generator: self.generator.clone(),
            seed: self.seed.map(|s| s.master),
            coords: self.coords.clone(),
        };
        let json = serde_json::to_string_pretty(&meta)?;
        std::fs::write(meta_path, json)?;
        Ok(())
    }

    pub fn read_bin(bin_path: &Path, meta_path: &Path) -> Result<Self> {
        let meta: EnsembleMeta = serde_json::from_str(&std::fs::read_to_string(meta_path)?)?;
        let mut raw = Vec::new();
        std::fs::File::open(bin_path)?.read_to_end(&mut raw)?;
        if raw.len() != meta.rows * meta.cols * 8 {
            return Err(Error::rejected(format!(
                "binary payload is {} bytes, expected {}",
                raw.len(),
                meta.rows * meta.cols * 8
            )));
        }
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        FieldEnsemble::new(values, meta.rows, meta.coords, meta.generator, meta.seed.map(RngStreamSpec::new))
    }

    /// CSV export: `realization,point,value` with 17-significant-digit floats.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "realization,point,value")?;
        for (i, row) in self.rows().enumerate() {
            for (j, v) in row.iter().enumerate() {
                writeln!(w, "{i},{j},{}", format_float(*v))?;
            }
        }
        Ok(())
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, t: f64) -> Vec<f64> {
        (0..n).map(|i| t * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn brownian_starts_at_zero_and_has_linear_variance() {
        let g = grid(65, 1.0);
        let ens = simulate_brownian(&g, 4000, RngStreamSpec::new(1)).unwrap();
        for row in ens.rows() {
            assert_eq!(row[0], 0.0);
        }
        // E w(t)^2 = t within 3 standard errors (Var(w(t)^2) = 2 t^2)
        for &x in &[16usize, 32, 64] {
            let t = g[x];
            let mut col = vec![0.0; ens.realizations()];
            ens.column_into(x, &mut col);
            let m2: f64 = col.iter().map(|v| v * v).sum::<f64>() / col.len() as f64;
            let se = (2.0 * t * t / col.len() as f64).sqrt();
            assert!((m2 - t).abs() <= 3.0 * se, "t={t}: {m2} vs {t} (se {se})");
        }
    }

    #[test]
    fn brownian_disjoint_increments_uncorrelated() {
        let g = grid(5, 1.0);
        let ens = simulate_brownian(&g, 8000, RngStreamSpec::new(2)).unwrap();
        let (mut sa, mut sb, mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for row in ens.rows() {
            let a = row[1] - row[0];
            let b = row[3] - row[2];
            sa += a;
            sb += b;
            sab += a * b;
            saa += a * a;
            sbb += b * b;
        }
        let m = ens.realizations() as f64;
        let corr = (sab / m - sa / m * sb / m) / ((saa / m - (sa / m).powi(2)) * (sbb / m - (sb / m).powi(2))).sqrt();
        assert!(corr.abs() <= 3.0 / m.sqrt(), "corr = {corr}");
    }

    #[test]
    fn brownian_rejects_bad_grids() {
        assert!(simulate_brownian(&[0.0, 0.5, 0.25], 10, RngStreamSpec::new(0)).is_err());
        assert!(simulate_brownian(&[0.1, 0.5], 10, RngStreamSpec::new(0)).is_err());
    }

    #[test]
    fn determinism_same_seed_bit_identical() {
        let g = grid(33, 1.0);
        let a = simulate_brownian(&g, 50, RngStreamSpec::new(7)).unwrap();
        let b = simulate_brownian(&g, 50, RngStreamSpec::new(7)).unwrap();
        assert_eq!(a.values(), b.values());
        let c = simulate_stable(1.2, &g, 50, RngStreamSpec::new(7)).unwrap();
        let d = simulate_stable(1.2, &g, 50, RngStreamSpec::new(7)).unwrap();
        assert_eq!(c.values(), d.values());
    }

    #[test]
    fn prefix_realizations_are_stream_stable() {
        // first k realizations of a larger run equal a smaller run
        let g = grid(17, 1.0);
        let big = simulate_brownian(&g, 40, RngStreamSpec::new(9)).unwrap();
        let small = simulate_brownian(&g, 10, RngStreamSpec::new(9)).unwrap();
        assert_eq!(&big.values()[..10 * 17], small.values());
    }

    #[test]
    fn gaussian_field_identity_covariance() {
        let pts = grid(8, 1.0);
        let mut cov = vec![0.0; 64];
        for i in 0..8 {
            cov[i * 8 + i] = 1.0;
        }
        let ens = simulate_gaussian_field(&pts, &cov, 6000, RngStreamSpec::new(3)).unwrap();
        let m = ens.realizations() as f64;
        let mut col = vec![0.0; ens.realizations()];
        for x in 0..8 {
            ens.column_into(x, &mut col);
            let var: f64 = col.iter().map(|v| v * v).sum::<f64>() / m;
            assert!((var - 1.0).abs() <= 3.0 * (2.0 / m).sqrt());
        }
        let mut c01 = 0.0;
        for row in ens.rows() {
            c01 += row[0] * row[1];
        }
        assert!((c01 / m).abs() <= 3.0 / m.sqrt());
    }

    #[test]
    fn gaussian_field_zero_covariance_is_zero() {
        let pts = grid(4, 1.0);
        let ens = simulate_gaussian_field(&pts, &vec![0.0; 16], 10, RngStreamSpec::new(0)).unwrap();
        assert!(ens.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gaussian_field_rejects_bad_covariance() {
        let pts = grid(3, 1.0);
        let mut asym = vec![0.0; 9];
        asym[1] = 1.0; // asymmetric
        assert!(simulate_gaussian_field(&pts, &asym, 5, RngStreamSpec::new(0)).is_err());
        let indef = vec![0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0];
        assert!(simulate_gaussian_field(&pts, &indef, 5, RngStreamSpec::new(0)).is_err());
    }

    #[test]
    fn fbm_half_is_brownian_covariance() {
        let g = grid(9, 1.0);
        let n = g.len();
        let h2 = 1.0;
        for i in 0..n {
            for j in 0..n {
                let c = 0.5 * (g[i].powf(h2) + g[j].powf(h2) - (g[i] - g[j]).abs().powf(h2));
                assert!((c - g[i].min(g[j])).abs() < 1e-12);
            }
        }
        let ens = simulate_fbm(0.5, &g, 3000, RngStreamSpec::new(4)).unwrap();
        let mut col = vec![0.0; 3000];
        ens.column_into(n - 1, &mut col);
        let var: f64 = col.iter().map(|v| v * v).sum::<f64>() / 3000.0;
        assert!((var - 1.0).abs() <= 3.0 * (2.0 / 3000.0_f64).sqrt());
    }

    #[test]
    fn fbm_increment_scaling_exponent() {
        let hurst = 0.7;
        let g = grid(129, 1.0);
        let ens = simulate_fbm(hurst, &g, 1500, RngStreamSpec::new(5)).unwrap();
        // |increment over gap d|_2 = d^H for fbm; fit log-log slope
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for lag in [1usize, 2, 4, 8, 16, 32] {
            let mut acc = 0.0;
            let mut cnt = 0usize;
            for row in ens.rows() {
                for j in 0..(g.len() - lag) {
                    let d = row[j + lag] - row[j];
                    acc += d * d;
                    cnt += 1;
                }
            }
            xs.push((g[lag] - g[0]).ln());
            ys.push(0.5 * (acc / cnt as f64).ln());
        }
        let nf = xs.len() as f64;
        let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
        let sxx: f64 = xs.iter().map(|v| v * v).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
        let slope = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
        assert!((slope - hurst).abs() <= 0.05, "slope {slope} vs H {hurst}");
    }

    #[test]
    fn fbm_rejects_bad_hurst() {
        assert!(simulate_fbm(0.0, &grid(5, 1.0), 2, RngStreamSpec::new(0)).is_err());
        assert!(simulate_fbm(1.0, &grid(5, 1.0), 2, RngStreamSpec::new(0)).is_err());
    }

    #[test]
    fn stable_path_starts_at_zero_and_rejects_bad_alpha() {
        let g = grid(17, 1.0);
        let ens = simulate_stable(1.2, &g, 20, RngStreamSpec::new(6)).unwrap();
        for row in ens.rows() {
            assert_eq!(row[0], 0.0);
        }
        assert!(simulate_stable(2.0, &g, 5, RngStreamSpec::new(0)).is_err());
        assert!(simulate_stable(0.0, &g, 5, RngStreamSpec::new(0)).is_err());
    }

    #[test]
    fn stable_tail_index_regression() {
        let alpha = 1.2;
        let g = grid(65, 1.0);
        let ens = simulate_stable(alpha, &g, 16000, RngStreamSpec::new(8)).unwrap();
        // pooled increments over the uniform spacing, tail survival regression
        let h = g[1] - g[0];
        let mut incs: Vec<f64> = Vec::with_capacity(ens.realizations() * 64);
        for row in ens.rows() {
            for j in 0..(g.len() - 1) {
                incs.push(((row[j + 1] - row[j]) / h.powf(1.0 / alpha)).abs());
            }
        }
        incs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = incs.len();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for q in [0.99, 0.995, 0.998, 0.999, 0.9995, 0.9999] {
            let idx = ((n as f64) * q) as usize;
            xs.push(incs[idx].ln());
            ys.push((1.0 - q).ln());
        }
        let nf = xs.len() as f64;
        let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
        let sxx: f64 = xs.iter().map(|v| v * v).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
        let slope = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
        let est = -slope;
        assert!((est - alpha).abs() <= 0.2, "tail index {est} vs alpha {alpha}");
    }

    #[test]
    fn stable_near_two_close_to_gaussian() {
        // KS distance of standardized increments to N(0,1); alpha -> 2 limit
        let alpha = 1.97;
        let g = grid(5, 1.0);
        let ens = simulate_stable(alpha, &g, 4000, RngStreamSpec::new(10)).unwrap();
        let h: f64 = g[1] - g[0];
        let mut incs: Vec<f64> = ens
            .rows()
            .map(|row| (row[1] - row[0]) / (2.0 * h.powf(2.0 / alpha)).sqrt())
            .collect();
        incs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = incs.len() as f64;
        let mut ks = 0.0_f64;
        for (i, &x) in incs.iter().enumerate() {
            let cdf = 0.5 * (1.0 + erf(x / 2.0_f64.sqrt()));
            ks = ks.max((cdf - i as f64 / n).abs()).max(((i + 1) as f64 / n - cdf).abs());
        }
        assert!(ks < 0.05, "ks = {ks}");
    }

    fn erf(x: f64) -> f64 {
        // Abramowitz-Stegun 7.1.26, enough for a KS sanity check
        let t = 1.0 / (1.0 + 0.3275911 * x.abs());
        let y = 1.0
            - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t + 0.254829592)
                * t
                * (-x * x).exp();
        if x >= 0.0 {
            y
        } else {
            -y
        }
    }

    #[test]
    fn zm_fixed_points_and_oddness() {
        assert_eq!(zm(0.0, 1.0), 0.0);
        assert!((zm(std::f64::consts::E - 1.0, 1.0) - 1.0).abs() < 1e-12);
        for &y in &[0.3, 1.7, 42.0, 1e12] {
            for &m in &[0.5, 1.0, 2.5] {
                assert_eq!(zm(-y, m), -zm(y, m));
                assert!(zm(y, m).is_finite());
            }
        }
    }

    #[test]
    fn zm_strictly_monotone_and_sign_preserving_on_ensemble() {
        let g = grid(17, 1.0);
        let ens = simulate_stable(1.2, &g, 50, RngStreamSpec::new(11)).unwrap();
        let out = apply_zm(&ens, 1.0).unwrap();
        let mut pairs: Vec<(f64, f64)> = ens.values().iter().copied().zip(out.values().iter().copied()).collect();
        for &(x, y) in &pairs {
            assert_eq!(x.signum(), y.signum());
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in pairs.windows(2) {
            if w[1].0 > w[0].0 {
                assert!(w[1].1 > w[0].1);
            }
        }
    }

    #[test]
    fn zm_lightens_stable_moments() {
        let g = grid(33, 1.0);
        let ens = simulate_stable(1.2, &g, 8000, RngStreamSpec::new(3)).unwrap();
        let raw = p_moment_blowup(&ens, 4.0, &[80, 800, 8000]).unwrap();
        let z = apply_zm(&ens, 1.0).unwrap();
        let light = p_moment_blowup(&z, 4.0, &[80, 800, 8000]).unwrap();
        // transformed estimates stay within a small factor while raw ones explode
        let spread = light.estimates.last().unwrap() / light.estimates.first().unwrap();
        assert!(spread < 3.0, "transformed spread {spread}");
        assert!(raw.estimates.last().unwrap() / raw.estimates.first().unwrap() > spread);
    }

    #[test]
    fn sheet_variance_is_product_of_times() {
        let gx = grid(9, 1.0);
        let gy = grid(9, 1.0);
        let ens = simulate_brownian_sheet(&gx, &gy, 4000, RngStreamSpec::new(12)).unwrap();
        let idx = 8 * 9 + 8; // corner (1, 1)
        let mut col = vec![0.0; 4000];
        ens.column_into(idx, &mut col);
        let var: f64 = col.iter().map(|v| v * v).sum::<f64>() / 4000.0;
        assert!((var - 1.0).abs() <= 3.0 * (2.0 / 4000.0_f64).sqrt(), "var {var}");
        // edges with a zero coordinate vanish
        for j in 0..9 {
            let mut c = vec![0.0; 4000];
            ens.column_into(j, &mut c);
            assert!(c.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn bin_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid(9, 1.0);
        let ens = simulate_brownian(&g, 7, RngStreamSpec::new(13)).unwrap();
        let bin = dir.path().join("e.bin");
        let meta = dir.path().join("e.meta.json");
        ens.write_bin(&bin, &meta).unwrap();
        let back = FieldEnsemble::read_bin(&bin, &meta).unwrap();
        assert_eq!(back.values(), ens.values());
        assert_eq!(back.coords(), ens.coords());
        assert_eq!(back.generator(), ens.generator());
    }
}
