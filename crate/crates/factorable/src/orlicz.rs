//! Young–Orlicz functions, ψ-functions, empirical Luxemburg and Grand
//! Lebesgue norms, and the Legendre-type transforms used by the entropy
//! integral.
//!
//! A Young–Orlicz function Φ is even, convex, continuous, Φ(0) = 0 and
//! Φ(u) → ∞.  The empirical Luxemburg norm of a sample set is
//! `inf{k > 0 : mean Φ(|ζᵢ|/k) ≤ 1}`, computed by bisection.  The Grand
//! Lebesgue norm is `sup_p |ζ|_p / ψ(p)` over a caller-supplied p-grid,
//! with the degenerate ψ_(r) reducing exactly to the p-moment |ζ|_r.

use crate::error::{Error, Result};
use crate::fields::FieldEnsemble;
use serde::{Deserialize, Serialize};

/// Relative tolerance of the Luxemburg-norm bisection.
pub const LUXEMBURG_REL_TOL: f64 = 1e-9;
/// Iteration cap for all monotone bisections in this module.
pub const BISECT_MAX_ITER: usize = 200;
/// Absolute-ish tolerance of Φ⁻¹ bisection.
pub const INVERSE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OrliczFamily {
    /// Φ_p(u) = |u|^p, p ≥ 1.
    Power { p: f64 },
    /// Θ_p(u) = exp(|u|^p) − 1, p > 0.
    ExpPower { p: f64 },
    /// Φ_G(u) = exp(u²/2) − 1.
    Gaussian,
    /// Piecewise-linear table on u ≥ 0, first knot (0, 0), extrapolated
    /// linearly past the last knot.  Evaluated at |u|.
    Table { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrliczFunction {
    family: OrliczFamily,
    /// Optional ∇₂ constant K with Φ(x)Φ(y) ≤ Φ(K(x+y)).
    nabla2_k: Option<f64>,
}

impl OrliczFunction {
    pub fn power(p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::rejected(format!("power family needs p >= 1, got {p}")));
        }
        Ok(Self { family: OrliczFamily::Power { p }, nabla2_k: None })
    }

    /// Θ_p(u) = exp(|u|^p) − 1.  Restricted to p ≥ 1: below that the inner
    /// power is concave near the origin and the function stops being convex,
    /// breaking the halving inequality Φ(u/2) ≤ Φ(u)/2.
    pub fn exp_power(p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::rejected(format!("exp_power family needs p >= 1, got {p}")));
        }
        Ok(Self { family: OrliczFamily::ExpPower { p }, nabla2_k: None })
    }

    pub fn gaussian() -> Self {
        Self { family: OrliczFamily::Gaussian, nabla2_k: None }
    }

    /// Build a table-backed Orlicz function.  The knots must start at (0, 0),
    /// have strictly increasing abscissae and values past the origin, and
    /// non-decreasing slopes (convexity on the sampled grid).
    pub fn table(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::rejected("table needs at least 2 knots"));
        }
        if knots[0] != (0.0, 0.0) {
            return Err(Error::rejected("table must start at (0, 0)"));
        }
        let mut prev_slope = f64::NEG_INFINITY;
        for w in knots.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if !(x1 > x0) || !(y1 > y0) || !x1.is_finite() || !y1.is_finite() {
                return Err(Error::rejected("table knots must be finite and strictly increasing"));
            }
            let slope = (y1 - y0) / (x1 - x0);
            if slope < prev_slope * (1.0 - 1e-12) {
                return Err(Error::rejected("table knots are not convex"));
            }
            prev_slope = slope;
        }
        Ok(Self { family: OrliczFamily::Table { knots }, nabla2_k: None })
    }

    pub fn with_nabla2(mut self, k: f64) -> Self {
        self.nabla2_k = Some(k);
        self
    }

    pub fn nabla2_k(&self) -> Option<f64> {
        self.nabla2_k
    }

    pub fn family(&self) -> &OrliczFamily {
        &self.family
    }

    pub fn describe(&self) -> String {
        match &self.family {
            OrliczFamily::Power { p } => format!("power(p={p})"),
            OrliczFamily::ExpPower { p } => format!("exp_power(p={p})"),
            OrliczFamily::Gaussian => "gaussian".to_string(),
            OrliczFamily::Table { knots } => format!("table({} knots)", knots.len()),
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        let a = u.abs();
        match &self.family {
            OrliczFamily::Power { p } => a.powf(*p),
            OrliczFamily::ExpPower { p } => {
                let g = a.powf(*p);
                if g > 709.0 {
                    f64::INFINITY
                } else {
                    g.exp_m1()
                }
            }
            OrliczFamily::Gaussian => {
                let g = 0.5 * a * a;
                if g > 709.0 {
                    f64::INFINITY
                } else {
                    g.exp_m1()
                }
            }
            OrliczFamily::Table { knots } => table_eval(knots, a),
        }
    }

    /// ln Φ(u), computed in a way that survives arguments where Φ itself
    /// overflows (needed by the asymptotic Δ₂ / weaker-than probes).
    pub fn ln_eval(&self, u: f64) -> f64 {
        let a = u.abs();
        if a == 0.0 {
            return f64::NEG_INFINITY;
        }
        match &self.family {
            OrliczFamily::Power { p } => p * a.ln(),
            OrliczFamily::ExpPower { p } => ln_expm1(a.powf(*p)),
            OrliczFamily::Gaussian => ln_expm1(0.5 * a * a),
            OrliczFamily::Table { knots } => table_eval(knots, a).ln(),
        }
    }

    /// Monotone bisection for Φ⁻¹(y), y ≥ 0.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::rejected(format!("inverse needs y >= 0, got {y}")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        if y.is_infinite() {
            return Ok(f64::INFINITY);
        }
        let mut hi = 1.0_f64;
        let mut grow = 0;
        while self.eval(hi) < y {
            hi *= 2.0;
            grow += 1;
            if grow > BISECT_MAX_ITER {
                return Err(Error::Numeric(format!("inverse bracket failed for y={y}")));
            }
        }
        let mut lo = 0.0_f64;
        for _ in 0..BISECT_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) >= y {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= INVERSE_TOL * hi.max(1.0) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn table_eval(knots: &[(f64, f64)], a: f64) -> f64 {
    let last = knots.len() - 1;
    if a >= knots[last].0 {
        // linear extrapolation with the final slope
        let (x0, y0) = knots[last - 1];
        let (x1, y1) = knots[last];
        return y1 + (a - x1) * (y1 - y0) / (x1 - x0);
    }
    let idx = knots.partition_point(|&(x, _)| x <= a);
    let (x0, y0) = knots[idx - 1];
    let (x1, y1) = knots[idx];
    y0 + (a - x0) * (y1 - y0) / (x1 - x0)
}

/// ln(e^g − 1) without overflow.
fn ln_expm1(g: f64) -> f64 {
    if g > 36.0 {
        // ln(e^g − 1) = g + ln(1 − e^{−g}); the correction is below f64 eps
        g
    } else {
        g.exp_m1().ln()
    }
}

/// One random variable's realizations; finite and non-empty by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples(Vec<f64>);

impl Samples {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate_samples(&values)?;
        Ok(Self(values))
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn validate_samples(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::rejected("empty sample set"));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::rejected(format!("non-finite sample {bad}")));
    }
    Ok(())
}

fn mean_phi(values: &[f64], phi: &OrliczFunction, k: f64) -> f64 {
    let mut acc = 0.0;
    for &v in values {
        let t = phi.eval(v / k);
        if t.is_infinite() {
            return f64::INFINITY;
        }
        acc += t;
    }
    acc / values.len() as f64
}

/// Empirical Luxemburg norm `inf{k > 0 : mean Φ(|ζᵢ|/k) ≤ 1}`.
///
/// Bisection with relative tolerance [`LUXEMBURG_REL_TOL`]; returns 0 iff
/// every sample is 0 and is positively homogeneous within that tolerance.
pub fn luxemburg_norm(values: &[f64], phi: &OrliczFunction) -> Result<f64> {
    validate_samples(values)?;
    let mx = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if mx == 0.0 {
        return Ok(0.0);
    }
    let m = values.len() as f64;
    // mean ≤ Φ(mx/k) so k = mx/Φ⁻¹(1) is always an upper bracket
    let inv1 = phi.inverse(1.0)?;
    if !(inv1 > 0.0) {
        return Err(Error::rejected("orlicz function has no positive Φ⁻¹(1)"));
    }
    let mut hi = mx / inv1;
    let mut grow = 0;
    while mean_phi(values, phi, hi) > 1.0 {
        hi *= 2.0;
        grow += 1;
        if grow > BISECT_MAX_ITER {
            return Err(Error::Numeric("luxemburg upper bracket failed".into()));
        }
    }
    // mean ≥ Φ(mx/k)/M so k = mx/Φ⁻¹(M) is a lower bracket candidate
    let mut lo = mx / phi.inverse(m)?.max(f64::MIN_POSITIVE);
    let mut shrink = 0;
    while mean_phi(values, phi, lo) <= 1.0 {
        lo *= 0.5;
        shrink += 1;
        if shrink > BISECT_MAX_ITER {
            // mean stays ≤ 1 arbitrarily close to 0: all mass at 0
            return Ok(0.0);
        }
    }
    for _ in 0..BISECT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mean_phi(values, phi, mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= LUXEMBURG_REL_TOL * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Empirical p-moment `(mean |ζ|^p)^{1/p}`.
pub fn p_moment(values: &[f64], p: f64) -> Result<f64> {
    validate_samples(values)?;
    if !(p >= 1.0) {
        return Err(Error::rejected(format!("p-moment needs p >= 1, got {p}")));
    }
    let m = values.len() as f64;
    let s: f64 = values.iter().map(|v| v.abs().powf(p)).sum();
    Ok((s / m).powf(1.0 / p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PsiKind {
    /// ψ_(r): 1 at p = r, +∞ elsewhere; r ∈ (1, ∞).
    Degenerate { r: f64 },
    /// ψ ≡ c on (1, ∞).
    Constant { c: f64 },
    /// ψ(p) = p^q on (1, ∞).
    Power { q: f64 },
    /// Piecewise-linear knots (p, ψ(p)); clamped to the boundary values
    /// outside the knot range (used by natural functions built on a grid).
    Table { knots: Vec<(f64, f64)>, upper: f64 },
}

/// Generating function of a Grand Lebesgue norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiFunction {
    kind: PsiKind,
}

impl PsiFunction {
    pub fn degenerate(r: f64) -> Result<Self> {
        if !(r > 1.0) || !r.is_finite() {
            return Err(Error::rejected(format!("degenerate psi needs r in (1, inf), got {r}")));
        }
        Ok(Self { kind: PsiKind::Degenerate { r } })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::rejected(format!("constant psi needs c > 0, got {c}")));
        }
        Ok(Self { kind: PsiKind::Constant { c } })
    }

    pub fn power(q: f64) -> Result<Self> {
        if !q.is_finite() || q < 0.0 {
            return Err(Error::rejected(format!("power psi needs q >= 0, got {q}")));
        }
        Ok(Self { kind: PsiKind::Power { q } })
    }

    pub fn table(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::rejected("empty psi table"));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::rejected("psi table abscissae must increase"));
            }
        }
        if knots.iter().any(|&(_, v)| !v.is_finite() || v < 0.0) {
            return Err(Error::rejected("psi table values must be finite and nonnegative"));
        }
        let upper = knots.last().unwrap().0;
        Ok(Self { kind: PsiKind::Table { knots, upper } })
    }

    pub fn kind(&self) -> &PsiKind {
        &self.kind
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self.kind, PsiKind::Degenerate { .. })
    }

    /// A natural function built from an identically-zero ensemble is flagged
    /// here and rejected by the norm operations (0/0 guard).
    pub fn is_degenerate_zero(&self) -> bool {
        match &self.kind {
            PsiKind::Table { knots, .. } => knots.iter().all(|&(_, v)| v == 0.0),
            PsiKind::Constant { c } => *c == 0.0,
            _ => false,
        }
    }

    /// Upper endpoint b of the support interval (1, b).
    pub fn support_upper(&self) -> f64 {
        match &self.kind {
            PsiKind::Table { upper, .. } => *upper,
            _ => f64::INFINITY,
        }
    }

    /// Evaluate ψ(p); +∞ off the pin of a degenerate function.  Table kinds
    /// clamp to the boundary knot values outside their range.
    pub fn eval(&self, p: f64) -> f64 {
        match &self.kind {
            PsiKind::Degenerate { r } => {
                if (p - r).abs() <= 1e-12 * r.max(1.0) {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            PsiKind::Constant { c } => *c,
            PsiKind::Power { q } => p.powf(*q),
            PsiKind::Table { knots, .. } => {
                if p <= knots[0].0 {
                    return knots[0].1;
                }
                let last = knots.len() - 1;
                if p >= knots[last].0 {
                    return knots[last].1;
                }
                let idx = knots.partition_point(|&(x, _)| x <= p);
                let (x0, y0) = knots[idx - 1];
                let (x1, y1) = knots[idx];
                y0 + (p - x0) * (y1 - y0) / (x1 - x0)
            }
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            PsiKind::Degenerate { r } => format!("degenerate(r={r})"),
            PsiKind::Constant { c } => format!("constant(c={c})"),
            PsiKind::Power { q } => format!("power(q={q})"),
            PsiKind::Table { knots, .. } => format!("table({} knots)", knots.len()),
        }
    }
}

/// Empirical Grand Lebesgue norm `sup_p |ζ|_p / ψ(p)` over the grid.
///
/// With a degenerate ψ_(r) this is exactly the p-moment |ζ|_r, independent of
/// the grid.
pub fn grand_lebesgue_norm(values: &[f64], psi: &PsiFunction, p_grid: &[f64]) -> Result<f64> {
    validate_samples(values)?;
    if psi.is_degenerate_zero() {
        return Err(Error::degenerate("psi is identically zero"));
    }
    if let PsiKind::Degenerate { r } = psi.kind() {
        return p_moment(values, *r);
    }
    if p_grid.is_empty() {
        return Err(Error::rejected("empty p-grid"));
    }
    let b = psi.support_upper();
    let mut sup = 0.0_f64;
    for &p in p_grid {
        if !(p >= 1.0) || p > b {
            return Err(Error::rejected(format!("p = {p} outside psi support (1, {b}]")));
        }
        let denom = psi.eval(p);
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(Error::rejected(format!("psi({p}) = {denom} unusable in norm")));
        }
        sup = sup.max(p_moment(values, p)? / denom);
    }
    Ok(sup)
}

/// Natural function of an ensemble: ψ_ξ(p) = max over points of the
/// empirical p-moment, tabulated on the supplied grid.
pub fn natural_psi(ensemble: &FieldEnsemble, p_grid: &[f64]) -> Result<PsiFunction> {
    if p_grid.is_empty() {
        return Err(Error::rejected("empty p-grid"));
    }
    if ensemble.realizations() == 0 || ensemble.points() == 0 {
        return Err(Error::rejected("empty ensemble"));
    }
    let mut knots = Vec::with_capacity(p_grid.len());
    let mut col = vec![0.0; ensemble.realizations()];
    for &p in p_grid {
        if !(p >= 1.0) {
            return Err(Error::rejected(format!("natural psi grid needs p >= 1, got {p}")));
        }
        let mut best = 0.0_f64;
        for x in 0..ensemble.points() {
            ensemble.column_into(x, &mut col);
            best = best.max(p_moment(&col, p)?);
        }
        knots.push((p, best));
    }
    PsiFunction::table(knots)
}

#[derive(Debug, Clone)]
pub struct Delta2Report {
    /// Numeric verdict: the ratio Φ(2u)/Φ(u) looked bounded over the grid
    /// tail.  A finite-grid heuristic, not a proof.
    pub holds: bool,
    /// (u, ln ratio) trace so callers can audit the decision.
    pub trace: Vec<(f64, f64)>,
}

/// Probe the Δ₂ condition `limsup Φ(2u)/Φ(u) < ∞` on a grid.
pub fn check_delta2(phi: &OrliczFunction, u_grid: &[f64]) -> Result<Delta2Report> {
    if u_grid.is_empty() {
        return Err(Error::rejected("empty u-grid"));
    }
    let mut prev = f64::NEG_INFINITY;
    for &u in u_grid {
        if !(u > 0.0) || u <= prev {
            return Err(Error::rejected("u-grid must be positive and increasing"));
        }
        prev = u;
    }
    let trace: Vec<(f64, f64)> = u_grid
        .iter()
        .map(|&u| (u, phi.ln_eval(2.0 * u) - phi.ln_eval(u)))
        .collect();
    let tail_start = trace.len() - (trace.len() / 2).max(1);
    let tail = &trace[tail_start..];
    let first = tail.first().unwrap().1;
    let last = tail.last().unwrap().1;
    let holds = last.is_finite() && first.is_finite() && last - first <= 0.1;
    Ok(Delta2Report { holds, trace })
}

/// Smallest K on a log-spaced search grid with Φ(x)Φ(y) ≤ Φ(K(x+y)) for all
/// supplied pairs, or `None` when no K up to the cap works.
pub fn nabla2_constant(phi: &OrliczFunction, pairs: &[(f64, f64)], k_cap: f64) -> Option<f64> {
    let candidates: Vec<f64> = {
        let mut v = vec![1.0];
        let steps = 160;
        for i in 1..=steps {
            v.push((k_cap.ln() * i as f64 / steps as f64).exp());
        }
        v
    };
    'outer: for &k in &candidates {
        for &(x, y) in pairs {
            if x < 0.0 || y < 0.0 {
                continue;
            }
            let lhs = phi.ln_eval(x) + phi.ln_eval(y);
            let rhs = phi.ln_eval(k * (x + y));
            if lhs > rhs + 1e-12 {
                continue 'outer;
            }
        }
        return Some(k);
    }
    None
}

/// C₂(Φ) = Φ⁻¹(1) / (54 K²).
pub fn c2_constant(phi: &OrliczFunction, k: f64) -> Result<f64> {
    if !(k >= 1.0) {
        return Err(Error::rejected(format!("c2 constant needs K >= 1, got {k}")));
    }
    Ok(phi.inverse(1.0)? / (54.0 * k * k))
}

/// Discrete Legendre (Young–Fenchel) transform of a knot function:
/// f*(λ) = max over the knots of (|λ|·p − f(p)).
pub fn legendre_transform(knots: &[(f64, f64)], lambda_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if knots.is_empty() {
        return Err(Error::rejected("empty knot function"));
    }
    if lambda_grid.is_empty() {
        return Err(Error::rejected("empty lambda grid"));
    }
    Ok(lambda_grid
        .iter()
        .map(|&l| {
            let a = l.abs();
            let sup = knots
                .iter()
                .map(|&(p, f)| a * p - f)
                .fold(f64::NEG_INFINITY, f64::max);
            (l, sup)
        })
        .collect())
}

/// v_*(w) = inf over z ∈ (0,1) of (z·w + ln ψ(1/z)).
///
/// For a degenerate ψ_(r) the only admissible probe is z = 1/r, giving w/r
/// exactly.  Otherwise the infimum is taken over a two-sided log-spaced
/// z-grid and refined by golden-section search around the best node.
pub fn v_star(psi: &PsiFunction, w: f64) -> Result<f64> {
    if psi.is_degenerate_zero() {
        return Err(Error::rejected("psi is identically zero; log undefined"));
    }
    if let PsiKind::Degenerate { r } = psi.kind() {
        // v(1/r) = ln ψ(r) = 0
        return Ok(w / r);
    }
    let objective = |z: f64| -> Result<f64> {
        let v = psi.eval(1.0 / z);
        if !(v > 0.0) {
            return Err(Error::rejected(format!("psi(1/z) = {v} at z = {z}; log undefined")));
        }
        Ok(z * w + v.ln())
    };
    // log-spaced toward both open endpoints
    let mut nodes = Vec::with_capacity(513);
    let steps = 256;
    for i in 0..=steps {
        let t = (1e-12_f64.ln() * (1.0 - i as f64 / steps as f64) + 0.5_f64.ln() * (i as f64 / steps as f64)).exp();
        nodes.push(t);
        nodes.push(1.0 - t);
    }
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = f64::INFINITY;
    let mut best_i = 0;
    for (i, &z) in nodes.iter().enumerate() {
        let val = objective(z)?;
        if val < best {
            best = val;
            best_i = i;
        }
    }
    // golden-section refinement in the bracketing interval
    let mut a = nodes[best_i.saturating_sub(1)];
    let mut b = nodes[(best_i + 1).min(nodes.len() - 1)];
    let inv_phi = 0.618_033_988_749_894_9;
    for _ in 0..80 {
        let c = b - inv_phi * (b - a);
        let d = a + inv_phi * (b - a);
        if objective(c)? < objective(d)? {
            b = d;
        } else {
            a = c;
        }
    }
    let refined = objective(0.5 * (a + b))?;
    Ok(best.min(refined))
}

#[derive(Debug, Clone)]
pub struct WeakerReport {
    /// Ψ(uv)/Φ(u) fell below the decay threshold at the grid tail for every
    /// probed v.  Finite-grid heuristic.
    pub holds: bool,
    /// Worst tail ratio observed over all probes.
    pub worst_tail_ratio: f64,
}

/// Decay threshold for the weaker-than probe.
pub const WEAKER_THRESHOLD: f64 = 1e-6;

/// Probe `Ψ << Φ`, i.e. Ψ(uv)/Φ(u) → 0 for every v > 0, on finite grids.
pub fn is_weaker(
    weaker: &OrliczFunction,
    stronger: &OrliczFunction,
    v_probes: &[f64],
    u_grid: &[f64],
) -> Result<WeakerReport> {
    if v_probes.is_empty() || u_grid.is_empty() {
        return Err(Error::rejected("empty probe grids"));
    }
    let mut prev = 0.0;
    for &u in u_grid {
        if !(u > 0.0) || u <= prev {
            return Err(Error::rejected("u-grid must be positive and increasing"));
        }
        prev = u;
    }
    let tail = (u_grid.len() / 5).max(1);
    let mut worst = 0.0_f64;
    for &v in v_probes {
        if !(v > 0.0) {
            return Err(Error::rejected(format!("v probe must be positive, got {v}")));
        }
        for &u in &u_grid[u_grid.len() - tail..] {
            let ratio = (weaker.ln_eval(u * v) - stronger.ln_eval(u)).exp();
            worst = worst.max(ratio);
        }
    }
    Ok(WeakerReport { holds: worst <= WEAKER_THRESHOLD, worst_tail_ratio: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn phi2() -> OrliczFunction {
        OrliczFunction::power(2.0).unwrap()
    }

    #[test]
    fn luxemburg_constant_samples_under_power_is_the_constant() {
        let phi = OrliczFunction::power(3.0).unwrap();
        let n = luxemburg_norm(&[2.5; 17], &phi).unwrap();
        assert_relative_eq!(n, 2.5, max_relative = 1e-9);
    }

    #[test]
    fn luxemburg_all_zero_is_zero() {
        assert_eq!(luxemburg_norm(&[0.0; 5], &phi2()).unwrap(), 0.0);
    }

    #[test]
    fn luxemburg_signs_under_phi2() {
        let n = luxemburg_norm(&[1.0, -1.0, 1.0, -1.0], &phi2()).unwrap();
        assert_relative_eq!(n, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn luxemburg_rejects_non_finite() {
        assert!(luxemburg_norm(&[1.0, f64::NAN], &phi2()).is_err());
        assert!(luxemburg_norm(&[], &phi2()).is_err());
    }

    #[test]
    fn luxemburg_matches_p_moment_for_power_family() {
        // closed-form identity: ||ζ||_{Φ_p} = |ζ|_p
        let samples = [0.3, -1.7, 2.2, 0.0, -0.9, 1.1, 3.4];
        for p in [1.0, 2.0, 3.5] {
            let phi = OrliczFunction::power(p).unwrap();
            let lux = luxemburg_norm(&samples, &phi).unwrap();
            let lp = p_moment(&samples, p).unwrap();
            assert!((lux - lp).abs() <= 1e-9 * lp.max(1.0), "p={p}: {lux} vs {lp}");
        }
    }

    #[test]
    fn gls_degenerate_equals_p_moment_exactly() {
        let psi = PsiFunction::degenerate(3.0).unwrap();
        let samples = [1.0, -2.0, 0.5, 4.0];
        let gls = grand_lebesgue_norm(&samples, &psi, &[2.0, 3.0]).unwrap();
        assert_eq!(gls, p_moment(&samples, 3.0).unwrap());
    }

    #[test]
    fn gls_constant_psi_one_recovers_sup_of_moments() {
        let psi = PsiFunction::constant(1.0).unwrap();
        let gls = grand_lebesgue_norm(&[3.0; 9], &psi, &[2.0, 4.0, 8.0]).unwrap();
        assert_relative_eq!(gls, 3.0, max_relative = 1e-12);
        let zeros = grand_lebesgue_norm(&[0.0; 4], &psi, &[2.0]).unwrap();
        assert_eq!(zeros, 0.0);
    }

    #[test]
    fn gls_rejects_p_outside_support() {
        let psi = PsiFunction::table(vec![(2.0, 1.0), (4.0, 2.0)]).unwrap();
        assert!(grand_lebesgue_norm(&[1.0], &psi, &[8.0]).is_err());
    }

    #[test]
    fn delta2_power_holds_with_constant_ratio() {
        let grid: Vec<f64> = (1..=40).map(|i| i as f64).collect();
        let rep = check_delta2(&OrliczFunction::power(3.0).unwrap(), &grid).unwrap();
        assert!(rep.holds);
        for &(_, lr) in &rep.trace {
            assert_relative_eq!(lr, 3.0 * 2.0_f64.ln(), max_relative = 1e-9);
        }
    }

    #[test]
    fn delta2_fails_for_exponential_families() {
        let grid: Vec<f64> = (1..=40).map(|i| i as f64).collect();
        assert!(!check_delta2(&OrliczFunction::exp_power(2.0).unwrap(), &grid).unwrap().holds);
        assert!(!check_delta2(&OrliczFunction::gaussian(), &grid).unwrap().holds);
    }

    #[test]
    fn nabla2_fails_for_pure_powers() {
        // Φ(x)Φ(y) = (xy)^p outruns Φ(K(x+y)) along x = y once x > 2K, so a
        // pair grid reaching past twice the cap defeats every candidate
        let pairs: Vec<(f64, f64)> = (1..=200).map(|i| (i as f64, i as f64)).collect();
        assert_eq!(nabla2_constant(&phi2(), &pairs, 64.0), None);
    }

    #[test]
    fn nabla2_theta1_is_one() {
        // grid-search oracle over x, y in (0, 10]
        let mut pairs = Vec::new();
        for i in 1..=20 {
            for j in 1..=20 {
                pairs.push((i as f64 * 0.5, j as f64 * 0.5));
            }
        }
        let theta1 = OrliczFunction::exp_power(1.0).unwrap();
        assert_eq!(nabla2_constant(&theta1, &pairs, 64.0), Some(1.0));
    }

    #[test]
    fn nabla2_vacuous_on_zero_pair() {
        assert_eq!(nabla2_constant(&phi2(), &[(0.0, 0.0)], 64.0), Some(1.0));
    }

    #[test]
    fn c2_gaussian_k1() {
        // oracle: solve exp(u²/2) − 1 = 1 by hand-rolled bisection
        let (mut lo, mut hi) = (0.0_f64, 4.0_f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if (0.5 * mid * mid).exp_m1() >= 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let expected = 0.5 * (lo + hi) / 54.0;
        let c2 = c2_constant(&OrliczFunction::gaussian(), 1.0).unwrap();
        assert_relative_eq!(c2, expected, max_relative = 1e-9);
        assert_relative_eq!(c2, (2.0 * 2.0_f64.ln()).sqrt() / 54.0, max_relative = 1e-9);
    }

    #[test]
    fn c2_scales_inverse_square_in_k() {
        let phi = OrliczFunction::gaussian();
        let at1 = c2_constant(&phi, 1.0).unwrap();
        let at2 = c2_constant(&phi, 2.0).unwrap();
        assert_relative_eq!(at2, at1 / 4.0, max_relative = 1e-12);
        assert!(c2_constant(&phi, 0.5).is_err());
    }

    #[test]
    fn c2_abs_value_function() {
        let phi1 = OrliczFunction::power(1.0).unwrap();
        assert_relative_eq!(c2_constant(&phi1, 1.0).unwrap(), 1.0 / 54.0, max_relative = 1e-9);
    }

    #[test]
    fn legendre_quadratic_is_self_dual() {
        let knots: Vec<(f64, f64)> = (0..=4000)
            .map(|i| {
                let p = i as f64 * 0.005;
                (p, 0.5 * p * p)
            })
            .collect();
        let out = legendre_transform(&knots, &[0.5, 1.0, 2.0, 5.0]).unwrap();
        for (l, v) in out {
            assert_relative_eq!(v, 0.5 * l * l, epsilon = 1e-4);
        }
    }

    #[test]
    fn legendre_linear_is_indicator_like() {
        let knots: Vec<(f64, f64)> = (0..=1000).map(|i| (i as f64 * 0.01, 2.0 * i as f64 * 0.01)).collect();
        let out = legendre_transform(&knots, &[1.0, 1.9, 2.0, 3.0]).unwrap();
        assert!(out[0].1.abs() < 1e-12); // |λ| < c: sup at p = 0
        assert!(out[1].1.abs() < 1e-12);
        assert!(out[3].1 > 9.0); // grid-capped blow-up past the slope
    }

    #[test]
    fn legendre_biconjugate_recovers_convex_input() {
        let h = 0.001;
        let knots: Vec<(f64, f64)> = (0..=4000)
            .map(|i| {
                let p = i as f64 * h;
                (p, (p * p * 0.5) + 0.25 * p)
            })
            .collect();
        let lam: Vec<f64> = (0..=4500).map(|i| i as f64 * h).collect();
        let star = legendre_transform(&knots, &lam).unwrap();
        let back = legendre_transform(&star, &knots.iter().map(|&(p, _)| p).collect::<Vec<_>>()).unwrap();
        for (i, &(p, f)) in knots.iter().enumerate() {
            if p < 0.5 || p > 3.0 {
                continue; // boundary effects of the finite grid
            }
            assert!((back[i].1 - f).abs() < 1e-6, "p={p}: {} vs {f}", back[i].1);
        }
    }

    #[test]
    fn legendre_fenchel_young_holds_on_grid_pairs() {
        let knots: Vec<(f64, f64)> = (0..=200).map(|i| (i as f64 * 0.05, (i as f64 * 0.05).powi(3))).collect();
        let lam: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let star = legendre_transform(&knots, &lam).unwrap();
        for &(l, fs) in &star {
            for &(p, f) in &knots {
                assert!(l * p <= f + fs + 1e-12);
            }
        }
    }

    #[test]
    fn v_star_constant_psi_is_log_c() {
        let psi = PsiFunction::constant(3.0).unwrap();
        for w in [0.0, 0.5, 4.0] {
            let v = v_star(&psi, w).unwrap();
            assert!((v - 3.0_f64.ln()).abs() < 1e-8, "w={w}: {v}");
        }
    }

    #[test]
    fn v_star_identity_psi_matches_calculus() {
        // ψ(p) = p: v(z) = −ln z, minimizer z = 1/w, value 1 + ln w for w ≥ 1
        let psi = PsiFunction::power(1.0).unwrap();
        for w in [1.0, 2.0, 7.5, 40.0] {
            let v = v_star(&psi, w).unwrap();
            assert!((v - (1.0 + w.ln())).abs() < 1e-6, "w={w}: {v}");
        }
    }

    #[test]
    fn v_star_upper_bounded_by_every_probe() {
        let psi = PsiFunction::power(2.0).unwrap();
        let w = 3.0;
        let v = v_star(&psi, w).unwrap();
        for z in [0.01, 0.1, 0.3, 0.5, 0.9, 0.99] {
            assert!(v <= z * w + psi.eval(1.0 / z).ln() + 1e-10);
        }
    }

    #[test]
    fn v_star_degenerate_is_w_over_r() {
        let psi = PsiFunction::degenerate(2.0).unwrap();
        assert_eq!(v_star(&psi, 3.0).unwrap(), 1.5);
    }

    #[test]
    fn weaker_theta1_vs_theta2() {
        let grid: Vec<f64> = (1..=60).map(|i| i as f64).collect();
        let t1 = OrliczFunction::exp_power(1.0).unwrap();
        let t2 = OrliczFunction::exp_power(2.0).unwrap();
        let rep = is_weaker(&t1, &t2, &[0.5, 1.0, 2.0, 5.0], &grid).unwrap();
        assert!(rep.holds);
    }

    #[test]
    fn weaker_is_irreflexive_at_v_one() {
        let grid: Vec<f64> = (1..=60).map(|i| i as f64).collect();
        let rep = is_weaker(&phi2(), &phi2(), &[1.0], &grid).unwrap();
        assert!(!rep.holds);
        assert_relative_eq!(rep.worst_tail_ratio, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn weaker_power_vs_exponential() {
        let grid: Vec<f64> = (1..=60).map(|i| i as f64).collect();
        let t1 = OrliczFunction::exp_power(1.0).unwrap();
        let rep = is_weaker(&phi2(), &t1, &[0.5, 1.0, 3.0], &grid).unwrap();
        assert!(rep.holds);
    }

    #[test]
    fn halving_inequality_on_probes() {
        let probes: Vec<f64> = (1..=1000).map(|i| i as f64 * 0.02).collect();
        let functions = [
            OrliczFunction::power(1.0).unwrap(),
            OrliczFunction::power(2.7).unwrap(),
            OrliczFunction::exp_power(1.0).unwrap(),
            OrliczFunction::exp_power(2.0).unwrap(),
            OrliczFunction::gaussian(),
        ];
        for phi in &functions {
            for &u in &probes {
                let half = phi.eval(0.5 * u);
                let full = phi.eval(u);
                if full.is_finite() {
                    assert!(half <= 0.5 * full + 1e-12, "{} at u={u}", phi.describe());
                }
            }
        }
    }

    #[test]
    fn orlicz_invariants_on_sampled_grid() {
        assert!(OrliczFunction::exp_power(0.5).is_err());
        assert!(OrliczFunction::power(0.5).is_err());
        let phi = OrliczFunction::exp_power(1.5).unwrap();
        assert_eq!(phi.eval(0.0), 0.0);
        let mut prev = 0.0;
        for i in 1..200 {
            let u = i as f64 * 0.05;
            assert_eq!(phi.eval(u), phi.eval(-u));
            let v = phi.eval(u);
            assert!(v > prev);
            prev = v;
            // midpoint convexity against a second probe
            let u2 = u + 1.3;
            let mid = phi.eval(0.5 * (u + u2));
            assert!(mid <= 0.5 * (phi.eval(u) + phi.eval(u2)) + 1e-12);
        }
    }

    #[test]
    fn inverse_round_trips() {
        for phi in [OrliczFunction::power(2.0).unwrap(), OrliczFunction::gaussian()] {
            for y in [0.0, 0.25, 1.0, 7.0, 1e4] {
                let u = phi.inverse(y).unwrap();
                assert!((phi.eval(u) - y).abs() <= 1e-9 * y.max(1.0));
            }
        }
    }

    #[test]
    fn table_family_validates_and_evaluates() {
        assert!(OrliczFunction::table(vec![(0.0, 0.0)]).is_err());
        assert!(OrliczFunction::table(vec![(0.0, 0.1), (1.0, 1.0)]).is_err());
        // concave table rejected
        assert!(OrliczFunction::table(vec![(0.0, 0.0), (1.0, 10.0), (2.0, 11.0)]).is_err());
        let t = OrliczFunction::table(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 4.0)]).unwrap();
        assert_relative_eq!(t.eval(1.5), 2.5);
        assert_relative_eq!(t.eval(-1.5), 2.5);
        assert_relative_eq!(t.eval(3.0), 7.0); // extrapolated with last slope
    }

    #[test]
    fn samples_newtype_validates() {
        assert!(Samples::new(vec![]).is_err());
        assert!(Samples::new(vec![f64::INFINITY]).is_err());
        assert_eq!(Samples::new(vec![1.0, 2.0]).unwrap().as_slice(), &[1.0, 2.0]);
    }
}
