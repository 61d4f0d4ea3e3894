//! The factorable decomposition Δ(ξ, δ) ≤ τ(ω)·g(δ): weight sequences, knot
//! solving θ(δ_n) = a_n, the random factor τ = Σ b_n Δ(ξ, δ_n)/a_n, and the
//! piecewise-linear scaling function with its normalized form, plus the
//! weaker-Orlicz, heavy-tail and rectangle variants of the same pipeline.
//!
//! The pathwise inequality Δ(ξ(ω), δ_n) ≤ τ(ω)·a_n/b_n at retained knots is
//! an algebraic identity of the construction (each series term already
//! dominates), so it holds for every realization used to build τ, with no
//! statistical error.

use crate::error::{Error, Result};
use crate::fields::{apply_zm, FieldEnsemble};
use crate::metric::DiscreteMetricSpace;
use crate::modulus::{
    theta_from_sweep, BoxSweep, DeltaGrid, EmpiricalModulus, NormSpec, PairSweep, RectGrid,
};
use crate::orlicz::{is_weaker, luxemburg_norm, OrliczFunction};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Ratio drop a_N/b_N ≤ (a_1/b_1) · DECAY_AUDIT_FACTOR marks a plan whose
/// truncated tail has visibly decayed.  Informational: the default sequences
/// at small N fail it while remaining perfectly usable, so it is a flag, not
/// an error.
pub const DECAY_AUDIT_FACTOR: f64 = 1e-2;

/// Weight sequences of the construction: a_n strictly decreasing toward 0,
/// b_n positive and strictly decreasing with Σ b_n = 1 after truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencePlan {
    a: Vec<f64>,
    b: Vec<f64>,
    /// (ν, θ) when built from the default families.
    params: Option<(f64, f64)>,
    /// a_N/b_N dropped below 1e-2 of a_1/b_1 over the truncation.
    decay_ok: bool,
}

impl SequencePlan {
    /// Validate and renormalize explicit sequences.
    pub fn explicit(a: Vec<f64>, mut b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() || a.len() < 3 {
            return Err(Error::rejected("plan needs matching sequences of length >= 3"));
        }
        if a.iter().any(|v| !(v.is_finite() && *v > 0.0)) || b.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::rejected("plan entries must be positive and finite"));
        }
        if a.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::rejected("a must be strictly decreasing"));
        }
        if b.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::rejected("b must be strictly decreasing"));
        }
        let total: f64 = b.iter().sum();
        for v in &mut b {
            *v /= total;
        }
        let n = a.len();
        let decay_ok = a[n - 1] / b[n - 1] <= a[0] / b[0] * DECAY_AUDIT_FACTOR;
        Ok(Self { a, b, params: None, decay_ok })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn params(&self) -> Option<(f64, f64)> {
        self.params
    }

    pub fn decay_ok(&self) -> bool {
        self.decay_ok
    }
}

/// Default families a_n = n^{−1−θ}, b_n = ν n^{−1} ln^{−1−ν}(n+1), truncated
/// at N and renormalized so Σ b_n = 1.
pub fn default_sequences(nu: f64, theta_param: f64, n: usize) -> Result<SequencePlan> {
    if !(nu > 0.0) || !(theta_param > 0.0) {
        return Err(Error::rejected("plan parameters must be positive"));
    }
    if n < 3 {
        return Err(Error::rejected("plan truncation must be at least 3"));
    }
    let a: Vec<f64> = (1..=n).map(|k| (k as f64).powf(-1.0 - theta_param)).collect();
    let b: Vec<f64> = (1..=n)
        .map(|k| nu / k as f64 * ((k + 1) as f64).ln().powf(-1.0 - nu))
        .collect();
    let mut plan = SequencePlan::explicit(a, b)?;
    plan.params = Some((nu, theta_param));
    Ok(plan)
}

/// δ_n per plan index, with the clamp flags for levels the empirical θ never
/// reaches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotSolution {
    pub delta: Vec<f64>,
    pub clamped: Vec<bool>,
}

/// Maximal solutions of θ(δ_n) = a_n on the monotone interpolant.  Levels
/// above θ(diam) clamp to the θ domain end and are flagged; they are
/// excluded from the active set downstream.
pub fn solve_knots(theta: &EmpiricalModulus, plan: &SequencePlan) -> Result<KnotSolution> {
    if theta.max_value() <= 0.0 {
        return Err(Error::degenerate("theta is identically zero"));
    }
    let top = theta.max_value();
    let end = theta.max_delta();
    let mut delta = Vec::with_capacity(plan.len());
    let mut clamped = Vec::with_capacity(plan.len());
    for &an in plan.a() {
        if an > top {
            delta.push(end);
            clamped.push(true);
        } else {
            let d = theta.maximal_solution(an).ok_or_else(|| {
                Error::precondition(format!("theta(0) already exceeds the level {an}"))
            })?;
            delta.push(d);
            clamped.push(false);
        }
    }
    debug_assert!(delta.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    Ok(KnotSolution { delta, clamped })
}

/// τ(ω) = Σ_n b_n · moduli[ω][n] / a_n, summed in plan order.
pub fn tau_from_moduli(moduli: &[f64], a: &[f64], b: &[f64], realizations: usize) -> Vec<f64> {
    let k = a.len();
    debug_assert_eq!(moduli.len(), realizations * k);
    debug_assert_eq!(b.len(), k);
    let weights: Vec<f64> = a.iter().zip(b).map(|(an, bn)| bn / an).collect();
    (0..realizations)
        .map(|r| {
            let row = &moduli[r * k..(r + 1) * k];
            row.iter().zip(&weights).map(|(m, w)| m * w).sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FactorizationVariant {
    Standard,
    /// All norms taken in the weaker Orlicz function; records the audited
    /// Luxemburg norm of sup_x |ξ(x)| under the stronger one.
    WeakerNorm { strong: String, weak: String, sup_field_norm_strong: f64 },
    /// Modified (weak) factorable modulus of a heavy-tailed field after the
    /// Z_m compression.
    HeavyTail { m: f64 },
    /// Rectangle modulus along the monotone path δ⃗(s) = s · direction; the
    /// knot coordinates are path parameters s.
    Rectangle { direction: Vec<f64> },
}

/// Output of the construction: knots, the raw and normalized scaling
/// functions, the τ samples and their norm.
#[derive(Debug, Clone)]
pub struct FactorizationResult {
    pub variant: FactorizationVariant,
    pub plan: SequencePlan,
    /// δ_n per plan index (path parameter s_n for the rectangle variant).
    pub delta_knots: Vec<f64>,
    pub clamped: Vec<bool>,
    /// Plan indices kept after clamping, ascending n.
    pub active: Vec<usize>,
    /// b renormalized over the active set.
    pub b_active: Vec<f64>,
    /// Exact modulus at the active knots, row-major realizations × active.
    pub modulus_at_knots: Vec<f64>,
    pub tau: Vec<f64>,
    pub tau_norm: f64,
    /// τ/‖τ‖, the normalized factor with unit norm.
    pub tau0: Vec<f64>,
    /// (δ, a_n/b_n) knots through (0, 0), monotonized when flagged.
    pub g1_knots: Vec<(f64, f64)>,
    /// g = ‖τ‖ · g₁.
    pub g_knots: Vec<(f64, f64)>,
    /// The raw knot ratios were not increasing in δ and a running maximum
    /// was applied (possible for head-heavy b sequences).
    pub ratio_adjusted: bool,
    pub norm_desc: String,
    pub theta: EmpiricalModulus,
}

impl FactorizationResult {
    pub fn g(&self, delta: f64) -> f64 {
        interp_clamped(&self.g_knots, delta)
    }

    pub fn g1(&self, delta: f64) -> f64 {
        interp_clamped(&self.g1_knots, delta)
    }

    /// Count of (realization, active knot) pairs violating
    /// Δ(ξ(ω), δ_n) ≤ τ(ω)·a_n/b_n beyond the relative tolerance.
    pub fn pathwise_violations(&self, rel_tol: f64) -> usize {
        let k = self.active.len();
        let mut bad = 0usize;
        for (r, &t) in self.tau.iter().enumerate() {
            let row = &self.modulus_at_knots[r * k..(r + 1) * k];
            for (slot, &idx) in row.iter().zip(&self.active) {
                let cap = t * self.plan.a()[idx] / self.b_active_for(idx);
                if *slot > cap * (1.0 + rel_tol) {
                    bad += 1;
                }
            }
        }
        bad
    }

    fn b_active_for(&self, plan_idx: usize) -> f64 {
        let pos = self.active.iter().position(|&i| i == plan_idx).unwrap();
        self.b_active[pos]
    }

    /// JSON document with knots, scaling values, plan and norms.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "variant": self.variant,
            "plan": { "a": self.plan.a(), "b": self.plan.b(), "params": self.plan.params(), "decay_ok": self.plan.decay_ok() },
            "delta_knots": self.delta_knots,
            "clamped": self.clamped,
            "active": self.active,
            "b_active": self.b_active,
            "tau_norm": self.tau_norm,
            "g1_knots": self.g1_knots,
            "g_knots": self.g_knots,
            "ratio_adjusted": self.ratio_adjusted,
            "norm": self.norm_desc,
            "theta_knots": self.theta.knots(),
        })
    }

    /// CSV rows `realization,tau,tau0`.
    pub fn write_tau_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "realization,tau,tau0")?;
        for (i, (t, t0)) in self.tau.iter().zip(&self.tau0).enumerate() {
            writeln!(
                w,
                "{i},{},{}",
                crate::fields::format_float(*t),
                crate::fields::format_float(*t0)
            )?;
        }
        Ok(())
    }
}

fn interp_clamped(knots: &[(f64, f64)], x: f64) -> f64 {
    if knots.is_empty() {
        return 0.0;
    }
    if x <= knots[0].0 {
        return knots[0].1;
    }
    let last = knots.len() - 1;
    if x >= knots[last].0 {
        return knots[last].1;
    }
    let idx = knots.partition_point(|&(d, _)| d <= x);
    let (x0, y0) = knots[idx - 1];
    let (x1, y1) = knots[idx];
    y0 + (x - x0) * (y1 - y0) / (x1 - x0)
}

/// Shared tail of every factorization pipeline, once the per-knot moduli are
/// known.
fn assemble(
    variant: FactorizationVariant,
    plan: &SequencePlan,
    knots: KnotSolution,
    modulus_at_knots: Vec<f64>,
    realizations: usize,
    norm: &NormSpec,
    theta: EmpiricalModulus,
) -> Result<FactorizationResult> {
    let active: Vec<usize> = (0..plan.len()).filter(|&i| !knots.clamped[i]).collect();
    if active.len() < 3 {
        return Err(Error::degenerate(format!(
            "only {} usable knots (need 3): theta tops out at {} against a_1 = {}",
            active.len(),
            theta.max_value(),
            plan.a()[0]
        )));
    }
    let b_sum: f64 = active.iter().map(|&i| plan.b()[i]).sum();
    let b_active: Vec<f64> = active.iter().map(|&i| plan.b()[i] / b_sum).collect();
    let a_active: Vec<f64> = active.iter().map(|&i| plan.a()[i]).collect();
    let tau = tau_from_moduli(&modulus_at_knots, &a_active, &b_active, realizations);
    let tau_norm = norm.norm(&tau)?;
    if !(tau_norm > 0.0) {
        return Err(Error::degenerate("tau has zero norm"));
    }
    let tau0: Vec<f64> = tau.iter().map(|t| t / tau_norm).collect();

    // ratio knots by increasing delta (= reversed active order)
    let mut by_delta: Vec<(f64, f64)> = active
        .iter()
        .zip(&b_active)
        .map(|(&i, &bn)| (knots.delta[i], plan.a()[i] / bn))
        .collect();
    by_delta.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut ratio_adjusted = false;
    let mut run = 0.0_f64;
    for kv in by_delta.iter_mut() {
        if kv.1 < run {
            kv.1 = run;
            ratio_adjusted = true;
        } else {
            run = kv.1;
        }
    }
    // collapse duplicate deltas (flat theta stretches), keeping the dominant value
    let mut g1_knots: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for (d, r) in by_delta {
        match g1_knots.last_mut() {
            Some(last) if (last.0 - d).abs() <= f64::EPSILON * d.abs() => last.1 = last.1.max(r),
            _ => g1_knots.push((d, r)),
        }
    }
    let g_knots: Vec<(f64, f64)> = g1_knots.iter().map(|&(d, r)| (d, tau_norm * r)).collect();

    Ok(FactorizationResult {
        variant,
        plan: plan.clone(),
        delta_knots: knots.delta,
        clamped: knots.clamped,
        active,
        b_active,
        modulus_at_knots,
        tau,
        tau_norm,
        tau0,
        g1_knots,
        g_knots,
        ratio_adjusted,
        norm_desc: norm.describe(),
        theta,
    })
}

/// The main construction: estimate θ on the grid, solve the knots, build τ
/// from the exact per-knot moduli and normalize the scaling function.
pub fn build_factorization(
    ensemble: &FieldEnsemble,
    space: &DiscreteMetricSpace,
    plan: &SequencePlan,
    norm: &NormSpec,
    delta_grid: &DeltaGrid,
) -> Result<FactorizationResult> {
    if ensemble.points() != space.len() {
        return Err(Error::rejected("ensemble and space disagree on the point count"));
    }
    if ensemble.realizations() < 2 {
        return Err(Error::rejected("factorization needs at least 2 realizations"));
    }
    let sweep = PairSweep::new(space);
    let mut thresholds = delta_grid.materialize(&sweep)?;
    let diam = space.diam();
    if *thresholds.last().unwrap() < diam {
        thresholds.push(diam);
    }
    thresholds.retain(|&t| t <= diam * (1.0 + 1e-12));
    if thresholds[0] > 0.0 {
        thresholds.insert(0, 0.0);
    }
    let (theta, _grid_moduli) = theta_from_sweep(ensemble, &sweep, &thresholds, norm)?;
    let knots = solve_knots(&theta, plan)?;

    // exact moduli at the solved knots (dedup shared thresholds)
    let active: Vec<usize> = (0..plan.len()).filter(|&i| !knots.clamped[i]).collect();
    let mut knot_thresholds: Vec<f64> = active.iter().map(|&i| knots.delta[i]).collect();
    knot_thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    knot_thresholds.dedup();
    let matrix = sweep.moduli_matrix(ensemble, &knot_thresholds);
    let t = knot_thresholds.len();
    let m = ensemble.realizations();
    let k = active.len();
    let mut modulus_at_knots = vec![0.0; m * k];
    let col_of: Vec<usize> = active
        .iter()
        .map(|&i| knot_thresholds.partition_point(|&x| x < knots.delta[i]))
        .collect();
    for r in 0..m {
        for (slot, &c) in col_of.iter().enumerate() {
            modulus_at_knots[r * k + slot] = matrix[r * t + c];
        }
    }
    assemble(FactorizationVariant::Standard, plan, knots, modulus_at_knots, m, norm, theta)
}

/// Probe grids of the weaker-than audit.
fn weaker_probe_grids() -> (Vec<f64>, Vec<f64>) {
    let v = vec![0.5, 1.0, 2.0, 5.0];
    let u: Vec<f64> = (1..=60).map(|i| i as f64).collect();
    (v, u)
}

/// Theorem-4.1 pipeline: the same construction with every norm taken in a
/// weaker Orlicz function Ψ << Φ.
pub fn weaker_norm_factorization(
    ensemble: &FieldEnsemble,
    space: &DiscreteMetricSpace,
    phi_strong: &OrliczFunction,
    psi_weak: &OrliczFunction,
    plan: &SequencePlan,
    delta_grid: &DeltaGrid,
) -> Result<FactorizationResult> {
    let (v, u) = weaker_probe_grids();
    let report = is_weaker(psi_weak, phi_strong, &v, &u)?;
    if !report.holds {
        return Err(Error::precondition(format!(
            "{} is not weaker than {} (tail ratio {})",
            psi_weak.describe(),
            phi_strong.describe(),
            report.worst_tail_ratio
        )));
    }
    // empirical proxy of ||sup_x xi(x)||_Φ < ∞
    let sup_norm = luxemburg_norm(&ensemble.sup_abs(), phi_strong)?;
    if !sup_norm.is_finite() {
        return Err(Error::precondition("sup-field norm under the stronger function is not finite"));
    }
    let norm = NormSpec::Luxemburg(psi_weak.clone());
    let mut out = build_factorization(ensemble, space, plan, &norm, delta_grid)?;
    out.variant = FactorizationVariant::WeakerNorm {
        strong: phi_strong.describe(),
        weak: psi_weak.describe(),
        sup_field_norm_strong: sup_norm,
    };
    Ok(out)
}

/// §5 pipeline: compress the heavy-tailed field with Z_m, then factor the
/// transformed field.
pub fn heavy_tail_factorization(
    ensemble_heavy: &FieldEnsemble,
    space: &DiscreteMetricSpace,
    m_exp: f64,
    plan: &SequencePlan,
    norm: &NormSpec,
    delta_grid: &DeltaGrid,
) -> Result<FactorizationResult> {
    let transformed = apply_zm(ensemble_heavy, m_exp)?;
    let mut out = build_factorization(&transformed, space, plan, norm, delta_grid)?;
    out.variant = FactorizationVariant::HeavyTail { m: m_exp };
    Ok(out)
}

/// Rectangle pipeline: Ω in place of Δ and γ in place of θ along the
/// monotone path δ⃗(s) = s · direction, s ∈ (0, s_max].
pub fn rectangle_factorization(
    ensemble: &FieldEnsemble,
    grid: &RectGrid,
    direction: &[f64],
    plan: &SequencePlan,
    phi: &OrliczFunction,
    s_grid_cap: usize,
) -> Result<FactorizationResult> {
    if ensemble.points() != grid.points() {
        return Err(Error::rejected("ensemble and grid disagree on the point count"));
    }
    let sweep = BoxSweep::new(grid, direction)?;
    let mut thresholds: Vec<f64> = {
        let mut acts = vec![0.0];
        let cap = s_grid_cap.max(2);
        let smax = sweep.max_parameter();
        for k in 1..=cap {
            acts.push(smax * k as f64 / cap as f64);
        }
        acts
    };
    thresholds.dedup();
    let m = ensemble.realizations();
    if m < 2 {
        return Err(Error::rejected("factorization needs at least 2 realizations"));
    }
    let matrix = sweep.moduli_matrix(ensemble, &thresholds);
    let t = thresholds.len();
    let mut col = vec![0.0; m];
    let mut knots_raw = Vec::with_capacity(t);
    for ti in 0..t {
        for r in 0..m {
            col[r] = matrix[r * t + ti];
        }
        knots_raw.push((thresholds[ti], luxemburg_norm(&col, phi)?));
    }
    let (gamma, _) = EmpiricalModulus::from_noisy_knots(knots_raw)?;
    let knots = solve_knots(&gamma, plan)?;

    let active: Vec<usize> = (0..plan.len()).filter(|&i| !knots.clamped[i]).collect();
    let mut knot_thresholds: Vec<f64> = active.iter().map(|&i| knots.delta[i]).collect();
    knot_thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    knot_thresholds.dedup();
    let km = sweep.moduli_matrix(ensemble, &knot_thresholds);
    let kt = knot_thresholds.len();
    let k = active.len();
    let mut modulus_at_knots = vec![0.0; m * k];
    let col_of: Vec<usize> = active
        .iter()
        .map(|&i| knot_thresholds.partition_point(|&x| x < knots.delta[i]))
        .collect();
    for r in 0..m {
        for (slot, &c) in col_of.iter().enumerate() {
            modulus_at_knots[r * k + slot] = km[r * kt + c];
        }
    }
    let norm = NormSpec::Luxemburg(phi.clone());
    let mut out = assemble(
        FactorizationVariant::Rectangle { direction: direction.to_vec() },
        plan,
        knots,
        modulus_at_knots,
        m,
        &norm,
        gamma,
    )?;
    out.variant = FactorizationVariant::Rectangle { direction: direction.to_vec() };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Coords;

    #[test]
    fn default_sequences_shape() {
        let plan = default_sequences(1.0, 1.0, 40).unwrap();
        assert_eq!(plan.a()[0], 1.0);
        assert!((plan.b().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(plan.a().windows(2).all(|w| w[1] < w[0]));
        assert!(plan.b().windows(2).all(|w| w[1] < w[0]));
        assert!(default_sequences(0.0, 1.0, 40).is_err());
        assert!(default_sequences(1.0, -1.0, 40).is_err());
        assert!(default_sequences(1.0, 1.0, 2).is_err());
    }

    #[test]
    fn solve_knots_on_linear_theta() {
        let theta = EmpiricalModulus::from_knots(vec![(0.0, 0.0), (1.0, 1.0)]).unwrap();
        let plan = default_sequences(1.0, 1.0, 6).unwrap();
        let sol = solve_knots(&theta, &plan).unwrap();
        for (i, (&d, &c)) in sol.delta.iter().zip(&sol.clamped).enumerate() {
            let n = (i + 1) as f64;
            assert!(!c);
            assert!((d - n.powi(-2)).abs() < 1e-12, "n={n}: {d}");
        }
    }

    #[test]
    fn solve_knots_clamps_unreachable_levels() {
        let theta = EmpiricalModulus::from_knots(vec![(0.0, 0.0), (2.0, 0.5)]).unwrap();
        let a = vec![1.0, 0.25, 0.04, 0.01];
        let b = vec![0.4, 0.3, 0.2, 0.1];
        let plan = SequencePlan::explicit(a, b).unwrap();
        let sol = solve_knots(&theta, &plan).unwrap();
        assert!(sol.clamped[0]);
        assert_eq!(sol.delta[0], 2.0);
        assert!(!sol.clamped[1]);
        assert!((sol.delta[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solve_knots_rejects_flat_zero_theta() {
        let theta = EmpiricalModulus::from_knots(vec![(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let plan = default_sequences(1.0, 1.0, 4).unwrap();
        assert!(matches!(solve_knots(&theta, &plan), Err(Error::DegenerateField(_))));
    }

    #[test]
    fn tau_formula_single_knot_substitution() {
        // constant modulus c at one knot with b = 1, a = c gives tau ≡ 1
        let c = 0.7;
        let moduli = vec![c, c, c];
        let tau = tau_from_moduli(&moduli, &[c], &[1.0], 3);
        for t in tau {
            assert!((t - 1.0).abs() < 1e-15);
        }
    }

    fn linear_toy(m: usize, n: usize, amp: f64) -> (FieldEnsemble, DiscreteMetricSpace) {
        // xi(x) = amp * x * eta with eta = ±1 equiprobable
        let coords: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let mut values = Vec::with_capacity(m * n);
        for r in 0..m {
            let eta = if r % 2 == 0 { 1.0 } else { -1.0 };
            values.extend(coords.iter().map(|&x| amp * eta * x));
        }
        let space = DiscreteMetricSpace::from_line(&coords).unwrap();
        let ens = FieldEnsemble::new(values, m, Coords::Line(coords), "toy", None).unwrap();
        (ens, space)
    }

    #[test]
    fn linear_toy_factorization_is_exact() {
        let (ens, space) = linear_toy(8, 41, 1.0);
        // theta(delta) = delta exactly, so knots land at a_n while a_n stays
        // above the smallest grid spacing; b keeps the ratios a/b strictly
        // monotone so g needs no adjustment
        let a = vec![0.8, 0.4, 0.2, 0.1];
        let b = vec![0.4, 0.25, 0.2, 0.15];
        let plan = SequencePlan::explicit(a.clone(), b).unwrap();
        let norm = NormSpec::Luxemburg(OrliczFunction::power(2.0).unwrap());
        let res = build_factorization(&ens, &space, &plan, &norm, &DeltaGrid::Distinct { cap: 64 }).unwrap();
        assert_eq!(res.active.len(), 4);
        for (i, &d) in res.delta_knots.iter().enumerate() {
            assert!((d - a[i]).abs() < 1e-9, "knot {i}: {d} vs {}", a[i]);
        }
        // Δ(ξ, δ_n) = δ_n = a_n: every tau sample is Σ b = 1
        for &t in &res.tau {
            assert!((t - 1.0).abs() < 1e-9);
        }
        assert!((res.tau_norm - 1.0).abs() < 1e-8);
        assert_eq!(res.pathwise_violations(1e-12), 0);
        assert_eq!(res.g1_knots[0], (0.0, 0.0));
        assert!(!res.ratio_adjusted);
        assert!(res.g_knots.windows(2).all(|w| w[1].1 > w[0].1));
        // tau0 has unit norm by construction
        let n0 = norm.norm(&res.tau0).unwrap();
        assert!((n0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_ensemble_is_rejected_as_degenerate() {
        let coords: Vec<f64> = (0..9).map(|i| i as f64 / 8.0).collect();
        let space = DiscreteMetricSpace::from_line(&coords).unwrap();
        let ens = FieldEnsemble::new(vec![0.0; 4 * 9], 4, Coords::Line(coords), "zero", None).unwrap();
        let plan = default_sequences(1.0, 1.0, 5).unwrap();
        let norm = NormSpec::Luxemburg(OrliczFunction::power(2.0).unwrap());
        let out = build_factorization(&ens, &space, &plan, &norm, &DeltaGrid::Distinct { cap: 16 });
        assert!(matches!(out, Err(Error::DegenerateField(_))));
    }

    #[test]
    fn scaling_covariance_on_the_linear_toy() {
        let (ens, space) = linear_toy(8, 41, 1.0);
        // c = 2 keeps the re-solved knots a_n/c on the 1/40 grid, so the
        // step modulus evaluates exactly at them
        let c = 2.0;
        let scaled = ens.scale(c).unwrap();
        let a = vec![0.8, 0.4, 0.2, 0.1];
        let b = vec![0.4, 0.25, 0.2, 0.15];
        let plan = SequencePlan::explicit(a.clone(), b).unwrap();
        let norm = NormSpec::Luxemburg(OrliczFunction::power(2.0).unwrap());
        let grid = DeltaGrid::Distinct { cap: 64 };
        let base = build_factorization(&ens, &space, &plan, &norm, &grid).unwrap();
        let big = build_factorization(&scaled, &space, &plan, &norm, &grid).unwrap();
        // knots re-solve at delta/c, tau is unchanged, g compresses: g_c(x) = g(cx)
        for (d_big, d_base) in big.delta_knots.iter().zip(&base.delta_knots) {
            assert!((d_big * c - d_base).abs() < 1e-9);
        }
        for (tb, t0) in big.tau.iter().zip(&base.tau) {
            assert!((tb - t0).abs() < 1e-9);
        }
        for &x in &[0.05, 0.1, 0.3] {
            assert!((big.g(x) - base.g(c * x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn weaker_norm_rejects_non_weaker_pairs() {
        let (ens, space) = linear_toy(8, 21, 1.0);
        let plan = SequencePlan::explicit(vec![0.8, 0.4, 0.2], vec![0.5, 0.3, 0.2]).unwrap();
        let phi = OrliczFunction::gaussian();
        let out = weaker_norm_factorization(&ens, &space, &phi, &phi, &plan, &DeltaGrid::Distinct { cap: 32 });
        assert!(matches!(out, Err(Error::Precondition(_))));
    }

    #[test]
    fn weaker_norm_runs_for_theta1_under_gaussian() {
        let (ens, space) = linear_toy(16, 21, 1.0);
        let plan = SequencePlan::explicit(vec![0.8, 0.4, 0.2], vec![0.5, 0.3, 0.2]).unwrap();
        let strong = OrliczFunction::gaussian();
        let weak = OrliczFunction::exp_power(1.0).unwrap();
        let res = weaker_norm_factorization(&ens, &space, &strong, &weak, &plan, &DeltaGrid::Distinct { cap: 32 }).unwrap();
        match &res.variant {
            FactorizationVariant::WeakerNorm { sup_field_norm_strong, .. } => {
                assert!(sup_field_norm_strong.is_finite());
            }
            other => panic!("unexpected variant {other:?}"),
        }
        let norm = NormSpec::Luxemburg(weak);
        let n0 = norm.norm(&res.tau0).unwrap();
        assert!((n0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn heavy_tail_of_gaussian_matches_direct_factorization_of_transform() {
        let (ens, space) = linear_toy(8, 41, 3.0);
        let plan = SequencePlan::explicit(vec![0.5, 0.25, 0.125], vec![0.5, 0.3, 0.2]).unwrap();
        let norm = NormSpec::Luxemburg(OrliczFunction::power(2.0).unwrap());
        let grid = DeltaGrid::Distinct { cap: 64 };
        let via_pipeline = heavy_tail_factorization(&ens, &space, 1.0, &plan, &norm, &grid).unwrap();
        let transformed = crate::fields::apply_zm(&ens, 1.0).unwrap();
        let direct = build_factorization(&transformed, &space, &plan, &norm, &grid).unwrap();
        assert_eq!(via_pipeline.tau, direct.tau);
        assert_eq!(via_pipeline.delta_knots, direct.delta_knots);
        assert!(matches!(via_pipeline.variant, FactorizationVariant::HeavyTail { .. }));
    }

    #[test]
    fn rectangle_factorization_product_toy() {
        // xi = eta * x1 * x2: Omega((s, s)) = s^2, knots solve s_n^2 = a_n
        let ax: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let grid = RectGrid::new(vec![ax.clone(), ax.clone()]).unwrap();
        let m = 8;
        let mut values = Vec::with_capacity(m * grid.points());
        for r in 0..m {
            let eta = if r % 2 == 0 { 1.0 } else { -1.0 };
            for &x1 in &ax {
                for &x2 in &ax {
                    values.push(eta * x1 * x2);
                }
            }
        }
        let ens = FieldEnsemble::new(values, m, Coords::Rect(vec![ax.clone(), ax.clone()]), "toy", None).unwrap();
        let plan = SequencePlan::explicit(vec![0.64, 0.16, 0.04], vec![0.5, 0.3, 0.2]).unwrap();
        let phi = OrliczFunction::power(2.0).unwrap();
        let res = rectangle_factorization(&ens, &grid, &[1.0, 1.0], &plan, &phi, 400).unwrap();
        for (i, &s) in res.delta_knots.iter().enumerate() {
            let expect = res.plan.a()[i].sqrt();
            assert!((s - expect).abs() <= 0.06, "knot {i}: {s} vs {expect}");
        }
        assert_eq!(res.pathwise_violations(1e-12), 0);
    }

    #[test]
    fn decay_audit_flags_slow_default_tails() {
        let plan = default_sequences(1.0, 1.0, 40).unwrap();
        assert!(!plan.decay_ok());
        let fast = SequencePlan::explicit(
            (1..=40).map(|n| (n as f64).powf(-2.0)).collect(),
            (1..=40).map(|n| (n as f64).powf(-0.5)).collect(),
        )
        .unwrap();
        assert!(fast.decay_ok());
    }
}
