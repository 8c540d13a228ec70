//! Fixed-point amplitude amplification.
//!
//! Angles follow the Chebyshev construction
//! `α_j = 2 cot⁻¹(tan(2πj/L)·√(1 − γ²))`, `β_j = −α_{ℓ−j+1}` with
//! `γ⁻¹ = cosh(arccosh(1/ε)/L)`. Which selective phase goes first and with
//! which sign is not fixed by the formulas, so every schedule is validated on
//! the ideal two-dimensional model and carries the convention that passed.

use std::f64::consts::PI;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{synthesize_filter, ChebyshevFilter};
use crate::gadget::{
    apply_conjugated_gadget, build_exact_gadget, build_gadget, build_oracle_unitary,
    conjugated_gadget_queries, JointState, OracleUnitary, SelectivePhaseGadget,
    DEFAULT_CONJUGATION_QUERIES,
};
use crate::markov::MarkovChain;
use crate::walk::{WalkSpectrum, C64};

/// Points of the `[p_lower, 1]` grid used to validate a schedule.
pub const VALIDATION_POINTS: usize = 50;
/// Longest schedule [`make_schedule`] will synthesize.
pub const MAX_SCHEDULE_LENGTH: usize = 2_000_001;

/// Ordering and sign choices for turning `(α, β)` into a phase word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convention {
    /// Within each pair, apply the target-side phase before the source-side
    /// one.
    pub target_first: bool,
    pub negate_source: bool,
    pub negate_target: bool,
    /// Source uses the `β` list and target the `α` list.
    pub swap: bool,
    /// Pairs are consumed from `j = ℓ` down to `j = 1`.
    pub reverse: bool,
}

impl Convention {
    /// Every candidate, the literal transcription first.
    pub fn candidates() -> Vec<Convention> {
        let mut out = Vec::with_capacity(32);
        for bits in 0u8..32 {
            out.push(Convention {
                target_first: bits & 1 != 0,
                negate_source: bits & 2 != 0,
                negate_target: bits & 4 != 0,
                swap: bits & 8 != 0,
                reverse: bits & 16 != 0,
            });
        }
        out
    }
}

static CONVENTION_CACHE: Mutex<Option<Convention>> = Mutex::new(None);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    #[serde(rename = "L")]
    pub l: usize,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub p_lower: f64,
    pub eps_fp: f64,
    #[serde(skip_serializing, default)]
    pub gamma: f64,
    #[serde(skip_serializing, default = "literal_convention")]
    pub convention: Convention,
}

fn literal_convention() -> Convention {
    Convention::candidates()[0]
}

impl PhaseSchedule {
    pub fn pairs(&self) -> usize {
        (self.l - 1) / 2
    }

    /// Selective phases in application order.
    pub fn word(&self) -> Vec<(Side, f64)> {
        word_with(&self.alphas, &self.betas, self.convention)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("schedule serializes")
    }
}

fn word_with(alphas: &[f64], betas: &[f64], c: Convention) -> Vec<(Side, f64)> {
    let (src, tgt) = if c.swap { (betas, alphas) } else { (alphas, betas) };
    let ss = if c.negate_source { -1.0 } else { 1.0 };
    let ts = if c.negate_target { -1.0 } else { 1.0 };
    let l = src.len();
    let mut out = Vec::with_capacity(2 * l);
    for k in 0..l {
        let j = if c.reverse { l - 1 - k } else { k };
        let s = (Side::Source, ss * src[j]);
        let t = (Side::Target, ts * tgt[j]);
        if c.target_first {
            out.push(t);
            out.push(s);
        } else {
            out.push(s);
            out.push(t);
        }
    }
    out
}

/// `γ(L)` for a residual `eps`.
pub fn chebyshev_gamma(l: usize, eps: f64) -> f64 {
    1.0 / ((1.0 / eps).acosh() / l as f64).cosh()
}

/// Smallest odd `L` with `√(1 − γ(L)²) ≤ √p_lower`.
pub fn schedule_length(p_lower: f64, eps_fp: f64) -> Result<usize> {
    check_schedule_params(p_lower, eps_fp)?;
    let mut l = 1;
    loop {
        let g = chebyshev_gamma(l, eps_fp);
        if (1.0 - g * g).max(0.0).sqrt() <= p_lower.sqrt() {
            return Ok(l);
        }
        l += 2;
        if l > MAX_SCHEDULE_LENGTH {
            return Err(Error::NumericFailure(format!(
                "schedule length exceeds {MAX_SCHEDULE_LENGTH} for p = {p_lower}"
            )));
        }
    }
}

fn check_schedule_params(p_lower: f64, eps_fp: f64) -> Result<()> {
    if !(p_lower > 0.0 && p_lower <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "overlap bound must lie in (0, 1], got {p_lower}"
        )));
    }
    if !(eps_fp > 0.0 && eps_fp < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fixed-point residual must lie in (0, 1), got {eps_fp}"
        )));
    }
    Ok(())
}

pub fn make_schedule(p_lower: f64, eps_fp: f64) -> Result<PhaseSchedule> {
    let l = schedule_length(p_lower, eps_fp)?;
    let gamma = chebyshev_gamma(l, eps_fp);
    let s = (1.0 - gamma * gamma).max(0.0).sqrt();
    let half = (l - 1) / 2;
    let alphas: Vec<f64> = (1..=half)
        .map(|j| {
            let t = (2.0 * PI * j as f64 / l as f64).tan() * s;
            // cot⁻¹ on its principal branch (0, π).
            2.0 * (1.0f64).atan2(t)
        })
        .collect();
    let betas: Vec<f64> = (1..=half).map(|j| -alphas[half - j]).collect();

    let mut schedule = PhaseSchedule {
        l,
        alphas,
        betas,
        p_lower,
        eps_fp,
        gamma,
        convention: literal_convention(),
    };
    if l == 1 {
        return Ok(schedule);
    }
    let cached = *CONVENTION_CACHE.lock().expect("convention cache");
    let mut order = Convention::candidates();
    if let Some(c) = cached {
        order.retain(|x| *x != c);
        order.insert(0, c);
    }
    for c in order {
        schedule.convention = c;
        if validate_schedule(&schedule, VALIDATION_POINTS) <= eps_fp {
            *CONVENTION_CACHE.lock().expect("convention cache") = Some(c);
            return Ok(schedule);
        }
    }
    Err(Error::NumericFailure(format!(
        "no phase convention meets ε = {eps_fp} for p ≥ {p_lower} (L = {l})"
    )))
}

/// Largest ideal trace distance over an evenly spaced grid of `[p_lower, 1]`.
pub fn validate_schedule(schedule: &PhaseSchedule, points: usize) -> f64 {
    p_grid(schedule.p_lower, points)
        .into_iter()
        .map(|p| ideal_fpaa_2d(p, schedule).trace_distance)
        .fold(0.0, f64::max)
}

pub fn p_grid(p_lower: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![p_lower];
    }
    (0..points)
        .map(|k| p_lower + (1.0 - p_lower) * k as f64 / (points - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fpaa2d {
    pub final_overlap: f64,
    pub trace_distance: f64,
}

/// Runs the word on `span{|s⟩, |t⟩}` with `⟨s|t⟩ = √p`.
pub fn ideal_fpaa_2d(p_actual: f64, schedule: &PhaseSchedule) -> Fpaa2d {
    let p = p_actual.clamp(0.0, 1.0);
    let s = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let t = [C64::new(p.sqrt(), 0.0), C64::new((1.0 - p).sqrt(), 0.0)];
    let mut v = s;
    for (side, angle) in schedule.word() {
        let axis = match side {
            Side::Source => &s,
            Side::Target => &t,
        };
        let proj = axis[0].conj() * v[0] + axis[1].conj() * v[1];
        let e = C64::from_polar(1.0, angle) - 1.0;
        v[0] += e * proj * axis[0];
        v[1] += e * proj * axis[1];
    }
    let ov = (t[0].conj() * v[0] + t[1].conj() * v[1]).norm().min(1.0);
    Fpaa2d {
        final_overlap: ov,
        trace_distance: (1.0 - ov * ov).max(0.0).sqrt(),
    }
}

/// Walk, oracle and stationary QSample for one chain of the sequence.
#[derive(Debug, Clone)]
pub struct WalkBundle {
    pub spec: WalkSpectrum,
    pub oracle: OracleUnitary,
}

impl WalkBundle {
    pub fn new(chain: &MarkovChain) -> Result<Self> {
        Ok(Self {
            spec: WalkSpectrum::new(chain)?,
            oracle: build_oracle_unitary(chain),
        })
    }

    pub fn chain(&self) -> &MarkovChain {
        self.spec.chain()
    }

    /// `|0⟩_a ⊗ |π⟩ ⊗ |0⟩_w`.
    pub fn embedded_qsample(&self) -> JointState {
        JointState::embed_real(self.chain().qsample().as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectorMode {
    /// Gadgets use the exact projector onto `θ = 0`.
    Exact,
    /// Gadgets use the Chebyshev filter at the stage's `ε^W`.
    Compiled,
}

#[derive(Debug, Clone)]
pub struct StagePlan {
    pub schedule: PhaseSchedule,
    /// Filter attenuation; required whenever `L > 1`.
    pub eps_w: Option<f64>,
    pub mode: ProjectorMode,
    pub conjugation_queries: u64,
}

impl StagePlan {
    pub fn new(schedule: PhaseSchedule, eps_w: Option<f64>, mode: ProjectorMode) -> Self {
        Self {
            schedule,
            eps_w,
            mode,
            conjugation_queries: DEFAULT_CONJUGATION_QUERIES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageOutcome {
    #[serde(rename = "L")]
    pub l: usize,
    pub d_source: u32,
    pub d_target: u32,
    pub gadgets: usize,
    pub queries: u64,
    pub d_tr_measured: f64,
}

/// Filters for both sides of a stage, or `None` for an empty word.
pub fn stage_filters(
    source: &WalkSpectrum,
    target: &WalkSpectrum,
    plan: &StagePlan,
) -> Result<Option<(ChebyshevFilter, ChebyshevFilter)>> {
    if plan.schedule.l == 1 {
        return Ok(None);
    }
    let eps_w = match plan.eps_w {
        Some(e) if e > 0.0 && e < 1.0 => e,
        other => {
            return Err(Error::Configuration(format!(
                "schedule of length {} needs a filter attenuation in (0, 1), got {other:?}",
                plan.schedule.l
            )))
        }
    };
    Ok(Some((
        synthesize_filter(source.phase_gap(), eps_w)?,
        synthesize_filter(target.phase_gap(), eps_w)?,
    )))
}

/// Query count of a stage from its schedule and filter degrees alone.
pub fn stage_queries(l: usize, d_source: u32, d_target: u32, conjugation: u64) -> u64 {
    let pairs = ((l - 1) / 2) as u64;
    pairs * (conjugated_gadget_queries(d_source, conjugation) + conjugated_gadget_queries(d_target, conjugation))
}

fn stage_gadget<'a>(
    spec: &'a WalkSpectrum,
    filter: &ChebyshevFilter,
    mode: ProjectorMode,
) -> Result<SelectivePhaseGadget<'a>> {
    match mode {
        ProjectorMode::Compiled => build_gadget(spec, filter, 0.0),
        ProjectorMode::Exact => Ok(build_exact_gadget(spec, 0.0)),
    }
}

/// One FPAA stage built from oracle-conjugated gadgets on both walks.
pub fn compiled_stage(
    state: &JointState,
    source: &WalkBundle,
    target: &WalkBundle,
    plan: &StagePlan,
) -> Result<(JointState, StageOutcome)> {
    if source.spec.n() != target.spec.n() || state.dim() != source.spec.n() {
        return Err(Error::Configuration(
            "source, target and state must share one state space".into(),
        ));
    }
    let target_state = target.embedded_qsample();
    let Some((fs, ft)) = stage_filters(&source.spec, &target.spec, plan)? else {
        return Ok((
            state.clone(),
            StageOutcome {
                l: 1,
                d_source: 0,
                d_target: 0,
                gadgets: 0,
                queries: 0,
                d_tr_measured: joint_trace_distance(state, &target_state),
            },
        ));
    };
    let gs = stage_gadget(&source.spec, &fs, plan.mode)?;
    let gt = stage_gadget(&target.spec, &ft, plan.mode)?;

    let mut out = state.clone();
    let word = plan.schedule.word();
    for (side, angle) in &word {
        out = match side {
            Side::Source => apply_conjugated_gadget(&gs.with_phi(*angle), &source.oracle, &out),
            Side::Target => apply_conjugated_gadget(&gt.with_phi(*angle), &target.oracle, &out),
        };
    }
    let queries = stage_queries(plan.schedule.l, fs.d, ft.d, plan.conjugation_queries);
    Ok((
        out.clone(),
        StageOutcome {
            l: plan.schedule.l,
            d_source: fs.d,
            d_target: ft.d,
            gadgets: word.len(),
            queries,
            d_tr_measured: joint_trace_distance(&out, &target_state),
        },
    ))
}

/// `√(1 − |⟨a|b⟩|²)` for normalized joint states, evaluated as the norm of
/// the component of `a` orthogonal to `b`.
pub fn joint_trace_distance(a: &JointState, b: &JointState) -> f64 {
    let c = -b.inner(a);
    let mut r = a.clone();
    r.anc0.axpy(c, &b.anc0);
    r.anc1.axpy(c, &b.anc1);
    r.norm().min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{build_glauber_chain, IsingLadder};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn length_anchors() {
        assert_eq!(schedule_length(0.25, 0.1).unwrap(), 7);
        let g5 = chebyshev_gamma(5, 0.1);
        let g7 = chebyshev_gamma(7, 0.1);
        assert!(((1.0 - g5 * g5).sqrt() - 0.536).abs() < 1e-3);
        assert!(((1.0 - g7 * g7).sqrt() - 0.403).abs() < 1e-3);
        assert_eq!(schedule_length(1.0, 0.1).unwrap(), 1);
        assert_eq!(schedule_length(1.0 / 15.0, 0.005).unwrap(), 23);
        assert_eq!(schedule_length(0.5, 1e-3).unwrap(), 9);
        assert_eq!(schedule_length(0.1, 1e-2).unwrap(), 17);
        // L = 1 exactly when p ≥ 1 − ε².
        assert_eq!(schedule_length(0.99, 0.1).unwrap(), 1);
        assert_eq!(schedule_length(0.9899, 0.1).unwrap(), 3);
    }

    #[test]
    fn angles_and_shape() {
        let s = make_schedule(0.25, 0.1).unwrap();
        assert_eq!(s.l, 7);
        assert_eq!(s.alphas.len(), 3);
        assert_eq!(s.betas.len(), 3);
        let w = (1.0 - s.gamma * s.gamma).sqrt();
        for (j, a) in s.alphas.iter().enumerate() {
            let t = (2.0 * PI * (j + 1) as f64 / 7.0).tan() * w;
            // cot(α/2) = t
            assert!(((a / 2.0).cos() / (a / 2.0).sin() - t).abs() < 1e-10);
            assert!(*a > 0.0 && *a < 2.0 * PI);
        }
        for j in 0..3 {
            assert_eq!(s.betas[j], -s.alphas[2 - j]);
        }
        let one = make_schedule(1.0, 0.1).unwrap();
        assert_eq!(one.l, 1);
        assert!(one.alphas.is_empty() && one.betas.is_empty());
        let v = s.to_json();
        for k in ["L", "alphas", "betas", "p_lower", "eps_fp"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }

    #[test]
    fn fixed_point_property() {
        for p in [1.0 / 15.0, 0.1, 0.25, 0.5] {
            for eps in [1e-1, 1e-2, 1e-3] {
                let s = make_schedule(p, eps).unwrap();
                for q in p_grid(p, 50) {
                    let r = ideal_fpaa_2d(q, &s);
                    assert!(r.trace_distance <= eps, "p={p} eps={eps} q={q}");
                }
                assert!(ideal_fpaa_2d(1.0, &s).trace_distance < 1e-7);
            }
        }
    }

    #[test]
    fn convention_is_target_first() {
        let s = make_schedule(0.1, 1e-2).unwrap();
        assert!(s.convention.target_first);
        assert_ne!(s.convention.negate_source, s.convention.negate_target);
        let mut lit = s.clone();
        lit.convention = literal_convention();
        assert!(validate_schedule(&lit, 50) > 1e-2);
    }

    #[test]
    fn empty_word() {
        let s = make_schedule(1.0, 0.2).unwrap();
        for p in [0.3, 0.7, 1.0] {
            let r = ideal_fpaa_2d(p, &s);
            assert!((r.trace_distance - (1.0 - p).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn length_scaling() {
        let eps = 1e-2;
        let ps: Vec<f64> = (0..12).map(|k| 1e-3 * (500.0f64).powf(k as f64 / 11.0)).collect();
        let xs: Vec<f64> = ps.iter().map(|p| (1.0 / p.sqrt()).ln()).collect();
        let ys: Vec<f64> = ps
            .iter()
            .map(|p| (schedule_length(*p, eps).unwrap() as f64 + 1.0).ln())
            .collect();
        let slope = ls_slope(&xs, &ys);
        assert!((0.8..=1.2).contains(&slope), "slope {slope}");
        // Downward from 1/15; near p = 1/2 the odd-L rounding alone can
        // push the ratio past 2.
        for k in 0..16 {
            let p = (1.0 / 15.0) * 0.7f64.powi(k);
            let a = schedule_length(p, 0.005).unwrap();
            let b = schedule_length(p / 4.0, 0.005).unwrap();
            assert!(b < 2 * (a + 1), "p={p}: {a} -> {b}");
        }
    }

    fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        sxy / sxx
    }

    fn two_state(a: f64, b: f64) -> MarkovChain {
        MarkovChain::from_rows(&[vec![1.0 - a, a], vec![b, 1.0 - b]]).unwrap()
    }

    fn overlap(a: &MarkovChain, b: &MarkovChain) -> f64 {
        a.qsample().dot(&b.qsample()).powi(2)
    }

    #[test]
    fn exact_mode_matches_ideal() {
        let pairs = [
            (two_state(0.3, 0.6), two_state(0.7, 0.1)),
            (
                build_glauber_chain(&IsingLadder::new(2).unwrap(), 0.0, true).unwrap(),
                build_glauber_chain(&IsingLadder::new(2).unwrap(), 1.2, true).unwrap(),
            ),
        ];
        for (c0, c1) in pairs {
            let p = overlap(&c0, &c1);
            let src = WalkBundle::new(&c0).unwrap();
            let tgt = WalkBundle::new(&c1).unwrap();
            for eps in [1e-1, 1e-2] {
                let sched = make_schedule(p * 0.999, eps).unwrap();
                let plan = StagePlan::new(sched.clone(), Some(eps / 4.0), ProjectorMode::Exact);
                let (out, rep) = compiled_stage(&src.embedded_qsample(), &src, &tgt, &plan).unwrap();
                let ideal = ideal_fpaa_2d(p, &sched).trace_distance;
                assert!((rep.d_tr_measured - ideal).abs() < 1e-9, "{} vs {ideal}", rep.d_tr_measured);
                assert!((out.norm() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn compiled_mode_bound() {
        let c0 = build_glauber_chain(&IsingLadder::new(2).unwrap(), 0.3, true).unwrap();
        let c1 = build_glauber_chain(&IsingLadder::new(2).unwrap(), 1.2, true).unwrap();
        let p = overlap(&c0, &c1);
        let src = WalkBundle::new(&c0).unwrap();
        let tgt = WalkBundle::new(&c1).unwrap();
        for eps_fp in [1e-1, 1e-2, 1e-3] {
            let sched = make_schedule(p * 0.99, eps_fp).unwrap();
            assert!(sched.l > 1);
            for eps_w in [1e-1, 1e-2, 1e-3] {
                let plan = StagePlan::new(sched.clone(), Some(eps_w), ProjectorMode::Compiled);
                let (_, rep) = compiled_stage(&src.embedded_qsample(), &src, &tgt, &plan).unwrap();
                let bound = 2.0 * (sched.l - 1) as f64 * eps_w;
                let ideal = ideal_fpaa_2d(p, &sched).trace_distance;
                assert!(rep.d_tr_measured <= bound + eps_fp + 1e-8);
                assert!(rep.d_tr_measured - ideal <= bound + 1e-8);
                assert_eq!(rep.gadgets, sched.l - 1);
                let recount: u64 = (0..sched.pairs())
                    .map(|_| 4 * (rep.d_source + rep.d_target) as u64 + 4)
                    .sum();
                assert_eq!(rep.queries, recount);
            }
        }
    }

    #[test]
    fn stage_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c0 = two_state(0.2, 0.5);
        let c1 = two_state(0.6, 0.3);
        let src = WalkBundle::new(&c0).unwrap();
        let tgt = WalkBundle::new(&c1).unwrap();
        let sched = make_schedule(0.3, 1e-2).unwrap();
        let plan = StagePlan::new(sched, Some(1e-2), ProjectorMode::Compiled);
        for _ in 0..20 {
            let s = JointState::random(2, &mut rng);
            let (out, _) = compiled_stage(&s, &src, &tgt, &plan).unwrap();
            assert!((out.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn trivial_stage() {
        let c = two_state(0.2, 0.5);
        let b = WalkBundle::new(&c).unwrap();
        let plan = StagePlan::new(make_schedule(1.0, 0.1).unwrap(), None, ProjectorMode::Compiled);
        let s = b.embedded_qsample();
        let (out, rep) = compiled_stage(&s, &b, &b, &plan).unwrap();
        assert_eq!(out, s);
        assert_eq!(rep.queries, 0);
        assert!(rep.d_tr_measured < 1e-12);

        let plan = StagePlan::new(make_schedule(0.5, 0.1).unwrap(), None, ProjectorMode::Compiled);
        assert!(matches!(compiled_stage(&s, &b, &b, &plan), Err(Error::Configuration(_))));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_schedule(0.0, 0.1).is_err());
        assert!(make_schedule(0.5, 1.0).is_err());
        assert!(make_schedule(1.5, 0.1).is_err());
        assert!(make_schedule(0.5, 0.0).is_err());
    }
}
