//! Classical upper bounds the factorization builds on: the entropy integral
//! 9·∫₀^δ exp[v_*(ln 2 + H(ε))] dε for the Grand Lebesgue modulus norm, and
//! the minorizing-measure machinery (the V functional, the w distance, the
//! per-pair factor bound with its unit-mean random coefficient, and the
//! w-ball modulus bound δ/C₂).

use crate::error::{Error, Result};
use crate::fields::FieldEnsemble;
use crate::metric::{ball_mass, covering_number, DiscreteMeasure, DiscreteMetricSpace, SymMatrix};
use crate::orlicz::{c2_constant, luxemburg_norm, p_moment, v_star, OrliczFunction, PsiFunction};
use serde::{Deserialize, Serialize};

/// Default node count of the log-spaced ε-grid of the entropy quadrature.
pub const ENTROPY_QUAD_NODES: usize = 512;

/// Precomputed integrand table of the entropy bound, shared across δ values.
///
/// The entropy H(ε) = ln N_upper(ε) is constant below the smallest positive
/// distance, so that head integrates exactly; past it the integrand sits on
/// a log-spaced trapezoid grid.
#[derive(Debug, Clone)]
pub struct EntropyBoundTable {
    eps_min: f64,
    head_rate: f64,
    nodes: Vec<f64>,
    integrand: Vec<f64>,
    cumulative: Vec<f64>,
}

pub fn entropy_bound_table(
    space: &DiscreteMetricSpace,
    psi: &PsiFunction,
    max_delta: f64,
    node_count: usize,
) -> Result<EntropyBoundTable> {
    if psi.is_degenerate_zero() {
        return Err(Error::rejected("psi is identically zero"));
    }
    if !(max_delta > 0.0) {
        return Err(Error::rejected("max_delta must be positive"));
    }
    let all: Vec<usize> = (0..space.len()).collect();
    let ln2 = std::f64::consts::LN_2;
    let rate_at = |eps: f64| -> Result<f64> {
        let h = covering_number(space, &all, eps)?.entropy_upper;
        let v = v_star(psi, ln2 + h)?;
        let rate = v.exp();
        if !rate.is_finite() {
            return Err(Error::rejected(format!("entropy integrand is not finite at eps = {eps}")));
        }
        Ok(rate)
    };
    let eps_min = space.min_positive_distance().unwrap_or(f64::INFINITY).min(max_delta);
    let head_rate = if eps_min.is_finite() {
        rate_at(eps_min * 0.5)?
    } else {
        // every distance is zero: one ball covers the space at any radius
        let v = v_star(psi, ln2)?;
        v.exp()
    };
    if !eps_min.is_finite() || eps_min >= max_delta {
        return Ok(EntropyBoundTable {
            eps_min: max_delta,
            head_rate,
            nodes: Vec::new(),
            integrand: Vec::new(),
            cumulative: Vec::new(),
        });
    }
    let count = node_count.max(8);
    let (lo, hi) = (eps_min.ln(), max_delta.ln());
    let nodes: Vec<f64> = (0..count)
        .map(|k| (lo + (hi - lo) * k as f64 / (count - 1) as f64).exp())
        .collect();
    let integrand: Vec<f64> = {
        use rayon::prelude::*;
        let vals: Vec<Result<f64>> = nodes.par_iter().map(|&e| rate_at(e)).collect();
        vals.into_iter().collect::<Result<Vec<f64>>>()?
    };
    let mut cumulative = vec![0.0; count];
    for k in 1..count {
        cumulative[k] =
            cumulative[k - 1] + 0.5 * (integrand[k] + integrand[k - 1]) * (nodes[k] - nodes[k - 1]);
    }
    Ok(EntropyBoundTable { eps_min, head_rate, nodes, integrand, cumulative })
}

impl EntropyBoundTable {
    /// 9·∫₀^δ exp[v_*(ln 2 + H(ε))] dε, monotone non-decreasing in δ.
    pub fn bound(&self, delta: f64) -> Result<f64> {
        if !(delta >= 0.0) {
            return Err(Error::rejected(format!("delta must be nonnegative, got {delta}")));
        }
        if delta == 0.0 {
            return Ok(0.0);
        }
        if delta <= self.eps_min || self.nodes.is_empty() {
            return Ok(9.0 * delta * self.head_rate);
        }
        let head = self.eps_min * self.head_rate;
        let last = self.nodes.len() - 1;
        let tail = if delta >= self.nodes[last] {
            self.cumulative[last] + (delta - self.nodes[last]) * self.integrand[last]
        } else {
            let idx = self.nodes.partition_point(|&x| x <= delta);
            let (x0, x1) = (self.nodes[idx - 1], self.nodes[idx]);
            let (f0, f1) = (self.integrand[idx - 1], self.integrand[idx]);
            let f_at = f0 + (delta - x0) * (f1 - f0) / (x1 - x0);
            self.cumulative[idx - 1] + 0.5 * (f0 + f_at) * (delta - x0)
        };
        Ok(9.0 * (head + tail))
    }
}

/// One-off evaluation of the entropy bound at a single δ.
pub fn entropy_integral_bound(
    space: &DiscreteMetricSpace,
    psi: &PsiFunction,
    delta: f64,
    node_count: usize,
) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::rejected(format!("delta must be nonnegative, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(0.0);
    }
    entropy_bound_table(space, psi, delta, node_count)?.bound(delta)
}

/// V(d) = ΣΣ Φ(|f(x₁) − f(x₂)|/d(x₁, x₂)) m(x₁) m(x₂) for one realization.
/// Zero-distance pairs with equal values contribute Φ(0) = 0; zero-distance
/// pairs with differing values are rejected.
pub fn v_functional(
    f_values: &[f64],
    space: &DiscreteMetricSpace,
    measure: &DiscreteMeasure,
    phi: &OrliczFunction,
) -> Result<f64> {
    let n = space.len();
    if f_values.len() != n || measure.weights().len() != n {
        return Err(Error::rejected("function and measure must match the space"));
    }
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = space.d(i, j);
            let diff = (f_values[i] - f_values[j]).abs();
            if d == 0.0 {
                if diff > 0.0 {
                    return Err(Error::rejected(format!(
                        "zero distance with differing values at pair ({i}, {j})"
                    )));
                }
                continue;
            }
            acc += phi.eval(diff / d) * measure.weight(i) * measure.weight(j);
        }
    }
    Ok(acc)
}

/// Mean of the V functional over the realizations of an ensemble.
pub fn v_functional_mean(
    ensemble: &FieldEnsemble,
    space: &DiscreteMetricSpace,
    measure: &DiscreteMeasure,
    phi: &OrliczFunction,
) -> Result<f64> {
    let n = space.len();
    if ensemble.points() != n {
        return Err(Error::rejected("ensemble and space disagree on the point count"));
    }
    let m = ensemble.realizations() as f64;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = space.d(i, j);
            let (wi, wj) = (measure.weight(i), measure.weight(j));
            if wi * wj == 0.0 && d > 0.0 {
                continue;
            }
            let mut pair_mean = 0.0;
            for row in ensemble.rows() {
                let diff = (row[i] - row[j]).abs();
                if d == 0.0 {
                    if diff > 0.0 {
                        return Err(Error::rejected(format!(
                            "zero distance with differing values at pair ({i}, {j})"
                        )));
                    }
                    continue;
                }
                pair_mean += phi.eval(diff / d);
            }
            if d > 0.0 {
                acc += pair_mean / m * wi * wj;
            }
        }
    }
    Ok(acc)
}

/// w(x₁, x₂) = 6·∫₀^{d(x₁,x₂)} [Φ⁻¹(4V/m²(B(r,x₁))) + Φ⁻¹(4V/m²(B(r,x₂)))] dr,
/// integrated exactly over the step structure of the ball masses.  Returns
/// +∞ when a positive-length stretch carries zero mass (the measure is not
/// minorizing for this pair).
pub fn kr_w_distance(
    space: &DiscreteMetricSpace,
    measure: &DiscreteMeasure,
    x1: usize,
    x2: usize,
    v: f64,
    phi: &OrliczFunction,
) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(Error::rejected(format!("V must be nonnegative, got {v}")));
    }
    let n = space.len();
    if x1 >= n || x2 >= n {
        return Err(Error::rejected("pair index out of range"));
    }
    let upper = space.d(x1, x2);
    if upper == 0.0 {
        return Ok(0.0);
    }
    // merged breakpoints of both centers' ball-mass step functions
    let mut breaks: Vec<f64> = Vec::with_capacity(2 * n + 2);
    breaks.push(0.0);
    for j in 0..n {
        for &c in &[x1, x2] {
            let d = space.d(c, j);
            if d > 0.0 && d < upper {
                breaks.push(d);
            }
        }
    }
    breaks.push(upper);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let mut acc = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let len = hi - lo;
        if len <= 0.0 {
            continue;
        }
        // closed balls: mass is constant on [lo, hi)
        let m1 = ball_mass(space, measure, x1, lo);
        let m2 = ball_mass(space, measure, x2, lo);
        if v > 0.0 && (m1 == 0.0 || m2 == 0.0) {
            return Ok(f64::INFINITY);
        }
        let term = |mass: f64| -> Result<f64> {
            if v == 0.0 {
                return Ok(0.0);
            }
            phi.inverse(4.0 * v / (mass * mass))
        };
        acc += len * (term(m1)? + term(m2)?);
    }
    Ok(6.0 * acc)
}

/// All-pairs w distances.
pub fn kr_w_matrix(
    space: &DiscreteMetricSpace,
    measure: &DiscreteMeasure,
    v: f64,
    phi: &OrliczFunction,
) -> Result<SymMatrix> {
    let n = space.len();
    let mut out = SymMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            out.set_sym(i, j, kr_w_distance(space, measure, i, j, v, phi)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KrFactorReport {
    /// C(θ) used by the bound (calibrated on the r-grid when not supplied).
    pub c_theta: f64,
    pub p: f64,
    pub theta_reg: f64,
    /// Minimal per-realization coefficient Ẑ(ω) making the pairwise bound
    /// tight; the abstract dominating variable has unit expectation.
    pub z_hat: Vec<f64>,
    pub z_mean: f64,
}

/// Deterministic right side of the pairwise factor bound at distance d.
pub fn kr_pair_coefficient(d: f64, p: f64, theta_reg: f64, c_theta: f64) -> f64 {
    12.0 * 4.0_f64.powf(1.0 / p) * c_theta.powf(1.0 / p) * d.powf(1.0 - theta_reg / p)
        / (1.0 - theta_reg / p)
}

/// Audit the moment-versus-distance and ball-mass regularity preconditions,
/// then extract the empirical per-realization factor
/// Ẑ(ω) = max over pairs [|increment| / coefficient]^p.
pub fn kr_factor_bound(
    ensemble: &FieldEnsemble,
    space: &DiscreteMetricSpace,
    measure: &DiscreteMeasure,
    p: f64,
    theta_reg: f64,
    c_theta: Option<f64>,
    r_grid: &[f64],
) -> Result<KrFactorReport> {
    let n = space.len();
    if ensemble.points() != n {
        return Err(Error::rejected("ensemble and space disagree on the point count"));
    }
    if !(p > theta_reg) || !(theta_reg > 0.0) {
        return Err(Error::precondition(format!("need p > theta > 0, got p = {p}, theta = {theta_reg}")));
    }
    if r_grid.is_empty() || r_grid.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::rejected("r-grid must lie in (0, 1]"));
    }

    // moment audit: |xi(x1) - xi(x2)|_p <= d(x1, x2)
    let m = ensemble.realizations();
    let mut inc = vec![0.0; m];
    for i in 0..n {
        for j in (i + 1)..n {
            for (r, row) in ensemble.rows().enumerate() {
                inc[r] = row[i] - row[j];
            }
            let moment = p_moment(&inc, p)?;
            let d = space.d(i, j);
            if moment > d * (1.0 + 1e-9) {
                return Err(Error::precondition(format!(
                    "moment audit failed at pair ({i}, {j}): |increment|_p = {moment} > d = {d}"
                )));
            }
        }
    }

    // ball-mass regularity audit / calibration: m²(B(r, x)) ≥ r^θ / C(θ)
    let mut needed = 0.0_f64;
    for &r in r_grid {
        for x in 0..n {
            let mass = ball_mass(space, measure, x, r);
            if mass == 0.0 {
                return Err(Error::precondition(format!(
                    "ball mass vanishes at center {x}, radius {r}"
                )));
            }
            needed = needed.max(r.powf(theta_reg) / (mass * mass));
        }
    }
    let c_theta = match c_theta {
        Some(c) => {
            if needed > c * (1.0 + 1e-9) {
                return Err(Error::precondition(format!(
                    "supplied C(theta) = {c} fails the mass audit (needs {needed})"
                )));
            }
            c
        }
        None => needed,
    };

    let mut z_hat = vec![0.0_f64; m];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = space.d(i, j);
            if d == 0.0 {
                continue; // moment audit already forced the increments to 0
            }
            let coef = kr_pair_coefficient(d, p, theta_reg, c_theta);
            for (r, row) in ensemble.rows().enumerate() {
                let ratio = (row[i] - row[j]).abs() / coef;
                if ratio > z_hat[r] {
                    z_hat[r] = ratio;
                }
            }
        }
    }
    for z in z_hat.iter_mut() {
        *z = z.powf(p);
    }
    let z_mean = z_hat.iter().sum::<f64>() / m as f64;
    Ok(KrFactorReport { c_theta, p, theta_reg, z_hat, z_mean })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KrModulusBound {
    pub delta: f64,
    pub c2: f64,
    /// δ/C₂, the norm bound for the w-constrained oscillation.
    pub bound: f64,
    /// Empirical Luxemburg norm of sup{ξ(x₁) − ξ(x₂) : w(x₁, x₂) ≤ δ} when an
    /// ensemble was supplied.
    pub empirical: Option<f64>,
}

/// ‖ sup over w(x₁,x₂) ≤ δ of (ξ(x₁) − ξ(x₂)) ‖_Φ ≤ δ/C₂, with
/// C₂ = Φ⁻¹(1)/(54 K²) from the ∇₂ constant attached to Φ.
pub fn kr_modulus_bound(
    w: &SymMatrix,
    phi: &OrliczFunction,
    delta: f64,
    ensemble: Option<&FieldEnsemble>,
) -> Result<KrModulusBound> {
    if !(delta >= 0.0) {
        return Err(Error::rejected(format!("delta must be nonnegative, got {delta}")));
    }
    let k = phi
        .nabla2_k()
        .ok_or_else(|| Error::precondition("no finite nabla2 constant attached to phi".to_string()))?;
    let c2 = c2_constant(phi, k)?;
    let bound = delta / c2;
    let empirical = match ensemble {
        None => None,
        Some(ens) => {
            let n = w.n();
            if ens.points() != n {
                return Err(Error::rejected("ensemble and w matrix disagree on the point count"));
            }
            let sups: Vec<f64> = ens
                .rows()
                .map(|row| {
                    let mut best = 0.0_f64;
                    for i in 0..n {
                        for j in (i + 1)..n {
                            if w.get(i, j) <= delta {
                                best = best.max((row[i] - row[j]).abs());
                            }
                        }
                    }
                    best
                })
                .collect();
            Some(luxemburg_norm(&sups, phi)?)
        }
    };
    Ok(KrModulusBound { delta, c2, bound, empirical })
}
