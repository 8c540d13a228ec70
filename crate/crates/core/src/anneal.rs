//! The annealing loop: budget the per-stage errors, run one FPAA stage per
//! adjacent pair of chains and certify the accumulated trace distance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::synthesize_filter;
use crate::fpaa::{
    compiled_stage, joint_trace_distance, make_schedule, stage_queries, ProjectorMode, StagePlan,
    WalkBundle,
};
use crate::gadget::{JointState, DEFAULT_CONJUGATION_QUERIES};
use crate::markov::MarkovChain;
use crate::walk::C64;

/// Tolerance on normalization of inputs to the distance functions.
pub const NORMALIZATION_TOL: f64 = 1e-8;
/// Overlaps this close to 1 count as identical states.
const UNIT_OVERLAP_TOL: f64 = 1e-12;
/// Slack on the per-stage recursion and end-to-end certificates.
pub const CERTIFICATE_SLACK: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct AnnealConfig {
    pub chains: Vec<MarkovChain>,
    pub eps: f64,
    pub p_lower_overrides: Option<Vec<f64>>,
    pub mode: ProjectorMode,
    pub conjugation_queries: u64,
}

impl AnnealConfig {
    pub fn new(chains: Vec<MarkovChain>, eps: f64, mode: ProjectorMode) -> Self {
        Self {
            chains,
            eps,
            p_lower_overrides: None,
            mode,
            conjugation_queries: DEFAULT_CONJUGATION_QUERIES,
        }
    }

    pub fn ell(&self) -> usize {
        self.chains.len().saturating_sub(1)
    }

    fn validate(&self) -> Result<usize> {
        let ell = self.ell();
        if ell == 0 {
            return Err(Error::Configuration(
                "annealing needs at least two chains (ℓ ≥ 1)".into(),
            ));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "total error must lie in (0, 1), got {}",
                self.eps
            )));
        }
        let n = self.chains[0].n();
        if self.chains.iter().any(|c| c.n() != n) {
            return Err(Error::Configuration(
                "all chains must act on the same state space".into(),
            ));
        }
        if let Some(o) = &self.p_lower_overrides {
            if o.len() != ell {
                return Err(Error::Configuration(format!(
                    "{} overlap bounds given for {ell} stages",
                    o.len()
                )));
            }
        }
        Ok(ell)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageBudget {
    pub eps_i: f64,
    pub eps_fp: f64,
    /// `None` when `L = 1` and no filter is needed.
    pub eps_w: Option<f64>,
    #[serde(rename = "L")]
    pub l: usize,
}

impl StageBudget {
    /// `ε^FP + 2(L − 1) ε^W`.
    pub fn spent(&self) -> f64 {
        self.eps_fp + 2.0 * (self.l as f64 - 1.0) * self.eps_w.unwrap_or(0.0)
    }
}

/// Uniform split `ε_i = ε/ℓ`, `ε^FP = ε_i/2`, `ε^W = ε_i/(4(L − 1))`.
pub fn budget_errors(eps: f64, ell: usize, p_bounds: &[f64]) -> Result<Vec<StageBudget>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "total error must lie in (0, 1), got {eps}"
        )));
    }
    if ell == 0 || p_bounds.len() != ell {
        return Err(Error::Configuration(format!(
            "{} overlap bounds given for {ell} stages",
            p_bounds.len()
        )));
    }
    let eps_i = eps / ell as f64;
    let eps_fp = eps_i / 2.0;
    p_bounds
        .iter()
        .map(|&p| {
            let sched_l = crate::fpaa::schedule_length(p, eps_fp)?;
            let eps_w = (sched_l > 1).then(|| eps_i / (4.0 * (sched_l as f64 - 1.0)));
            Ok(StageBudget {
                eps_i,
                eps_fp,
                eps_w,
                l: sched_l,
            })
        })
        .collect()
}

/// `|⟨π_i|π_{i+1}⟩|²` for each adjacent pair.
pub fn exact_overlaps(chains: &[MarkovChain]) -> Vec<f64> {
    chains
        .windows(2)
        .map(|w| {
            let p = w[0].qsample().dot(&w[1].qsample()).powi(2);
            if p >= 1.0 - UNIT_OVERLAP_TOL {
                1.0
            } else {
                p
            }
        })
        .collect()
}

/// `p` rounded down to three significant figures.
pub fn default_p_bound(p: f64) -> f64 {
    if p >= 1.0 {
        return 1.0;
    }
    let scale = 10f64.powi(2 - p.log10().floor() as i32);
    let b = (p * scale).floor() / scale;
    // Guard against the rounding in `p * scale` itself.
    if b > p {
        ((p * scale).floor() - 1.0) / scale
    } else {
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub i: usize,
    pub p_bound: f64,
    pub p_actual: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub eps_i: f64,
    pub eps_fp: f64,
    pub eps_w: Option<f64>,
    pub d_source: u32,
    pub d_target: u32,
    pub gadgets: usize,
    pub queries: u64,
    pub d_tr_measured: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnealReport {
    pub mode: ProjectorMode,
    pub eps: f64,
    pub ell: usize,
    pub n: usize,
    pub stages: Vec<StageReport>,
    pub total_queries: u64,
    pub final_d_tr: f64,
    pub final_tvd: f64,
    pub ancilla_count: u32,
    pub register_qubits: u32,
}

impl AnnealReport {
    pub const CSV_HEADER: &'static str = "eps,total_queries,final_d_tr,ancilla_count";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.eps, self.total_queries, self.final_d_tr, self.ancilla_count
        )
    }

    /// Sum of the per-stage counts.
    pub fn recount_queries(&self) -> u64 {
        self.stages.iter().map(|s| s.queries).sum()
    }
}

/// `2⌈log₂ n⌉ + 1`.
pub fn register_qubits(n: usize) -> u32 {
    let bits = if n <= 1 { 0 } else { usize::BITS - (n - 1).leading_zeros() };
    2 * bits + 1
}

/// Per-stage plans: overlap bounds, budgets and schedules.
#[derive(Debug, Clone)]
pub struct AnnealPlan {
    pub p_actual: Vec<f64>,
    pub p_bounds: Vec<f64>,
    pub budgets: Vec<StageBudget>,
}

pub fn plan_anneal(config: &AnnealConfig) -> Result<AnnealPlan> {
    let ell = config.validate()?;
    let p_actual = exact_overlaps(&config.chains);
    let p_bounds: Vec<f64> = match &config.p_lower_overrides {
        Some(o) => o.clone(),
        None => p_actual.iter().map(|&p| default_p_bound(p)).collect(),
    };
    for (i, (pa, pb)) in p_actual.iter().zip(&p_bounds).enumerate() {
        if !(*pb > 0.0 && *pb <= 1.0) {
            return Err(Error::Precondition {
                stage: i,
                message: format!("overlap bound {pb} outside (0, 1]"),
            });
        }
        if *pa < pb - UNIT_OVERLAP_TOL {
            return Err(Error::Precondition {
                stage: i,
                message: format!("exact overlap {pa} is below the bound {pb}"),
            });
        }
    }
    let budgets = budget_errors(config.eps, ell, &p_bounds)?;
    let cap = config.eps / ell as f64 + 1e-12;
    for (i, b) in budgets.iter().enumerate() {
        if b.spent() > cap {
            return Err(Error::Certification(format!(
                "stage {i} budget {} exceeds ε/ℓ = {}",
                b.spent(),
                config.eps / ell as f64
            )));
        }
    }
    Ok(AnnealPlan {
        p_actual,
        p_bounds,
        budgets,
    })
}

/// Query total from schedules and filter degrees alone, without evolving a
/// state.
pub fn estimate_queries(config: &AnnealConfig) -> Result<(AnnealPlan, Vec<u64>)> {
    let plan = plan_anneal(config)?;
    let gaps: Vec<f64> = config
        .chains
        .par_iter()
        .map(|c| crate::walk::WalkSpectrum::new(c).map(|s| s.phase_gap()))
        .collect::<Result<_>>()?;
    let mut per_stage = Vec::with_capacity(plan.budgets.len());
    for (i, b) in plan.budgets.iter().enumerate() {
        let q = match b.eps_w {
            None => 0,
            Some(eps_w) => {
                let ds = synthesize_filter(gaps[i], eps_w)?.d;
                let dt = synthesize_filter(gaps[i + 1], eps_w)?.d;
                stage_queries(b.l, ds, dt, config.conjugation_queries)
            }
        };
        per_stage.push(q);
    }
    Ok((plan, per_stage))
}

pub fn run_anneal(config: &AnnealConfig) -> Result<AnnealReport> {
    let plan = plan_anneal(config)?;
    let ell = config.ell();
    let bundles: Vec<WalkBundle> = config
        .chains
        .par_iter()
        .map(WalkBundle::new)
        .collect::<Result<_>>()?;

    let mut state = bundles[0].embedded_qsample();
    let mut stages = Vec::with_capacity(ell);
    let mut prev = 0.0;
    let mut budget_sum = 0.0;
    for (i, b) in plan.budgets.iter().enumerate() {
        let schedule = make_schedule(plan.p_bounds[i], b.eps_fp)?;
        let stage_plan = StagePlan {
            schedule,
            eps_w: b.eps_w,
            mode: config.mode,
            conjugation_queries: config.conjugation_queries,
        };
        let (next, out) = compiled_stage(&state, &bundles[i], &bundles[i + 1], &stage_plan)?;
        state = next;
        if out.d_tr_measured > prev + b.eps_i + CERTIFICATE_SLACK {
            return Err(Error::Certification(format!(
                "stage {i}: trace distance {} exceeds {} + ε_i = {}",
                out.d_tr_measured,
                prev,
                prev + b.eps_i
            )));
        }
        prev = out.d_tr_measured;
        budget_sum += b.spent();
        stages.push(StageReport {
            i,
            p_bound: plan.p_bounds[i],
            p_actual: plan.p_actual[i],
            l: out.l,
            eps_i: b.eps_i,
            eps_fp: b.eps_fp,
            eps_w: b.eps_w,
            d_source: out.d_source,
            d_target: out.d_target,
            gadgets: out.gadgets,
            queries: out.queries,
            d_tr_measured: out.d_tr_measured,
        });
    }

    let last = &bundles[ell];
    let final_d_tr = joint_trace_distance(&state, &last.embedded_qsample());
    let final_tvd = tv_distance(&state.system_marginal(), last.chain().stationary().as_slice())?;
    if final_d_tr > budget_sum + CERTIFICATE_SLACK || final_d_tr > config.eps {
        return Err(Error::Certification(format!(
            "final trace distance {final_d_tr} exceeds the budget {budget_sum} (ε = {})",
            config.eps
        )));
    }
    if final_tvd > final_d_tr + CERTIFICATE_SLACK {
        return Err(Error::Certification(format!(
            "measured TVD {final_tvd} exceeds trace distance {final_d_tr}"
        )));
    }
    let total_queries = stages.iter().map(|s| s.queries).sum();
    let n = last.chain().n();
    Ok(AnnealReport {
        mode: config.mode,
        eps: config.eps,
        ell,
        n,
        stages,
        total_queries,
        final_d_tr,
        final_tvd,
        ancilla_count: 1,
        register_qubits: register_qubits(n),
    })
}

/// Initial state `|0⟩_a ⊗ |π₀⟩ ⊗ |0⟩_w` for a chain.
pub fn initial_state(chain: &MarkovChain) -> JointState {
    JointState::embed_real(chain.qsample().as_slice())
}

fn check_normalized(v: &[C64], what: &str) -> Result<()> {
    let n2: f64 = v.iter().map(|a| a.norm_sqr()).sum();
    if (n2 - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidState(format!(
            "{what} has squared norm {n2}, expected 1"
        )));
    }
    Ok(())
}

/// `√(1 − |⟨a|b⟩|²)` for normalized pure states.
pub fn trace_distance(a: &[C64], b: &[C64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidState(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    check_normalized(a, "first state")?;
    check_normalized(b, "second state")?;
    let ov: C64 = b.iter().zip(a).map(|(x, y)| x.conj() * y).sum();
    let r: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - ov * y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(r.clamp(0.0, 1.0))
}

/// Half the ℓ₁ distance between two distributions.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidState(format!(
            "dimension mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    for (d, what) in [(p, "first"), (q, "second")] {
        let s: f64 = d.iter().sum();
        if (s - 1.0).abs() > NORMALIZATION_TOL || d.iter().any(|x| *x < -NORMALIZATION_TOL) {
            return Err(Error::InvalidState(format!(
                "{what} distribution sums to {s}, expected 1"
            )));
        }
    }
    let d = 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(d.clamp(0.0, 1.0))
}

/// TVD between the Born distributions of two QSamples, alongside their
/// trace distance; the first never exceeds the second.
pub fn tv_and_trace(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let sa: Vec<C64> = a.iter().map(|x| C64::new(x.sqrt(), 0.0)).collect();
    let sb: Vec<C64> = b.iter().map(|x| C64::new(x.sqrt(), 0.0)).collect();
    Ok((tv_distance(a, b)?, trace_distance(&sa, &sb)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{build_glauber_chain, IsingLadder};

    fn ladder_chains(cols: usize, betas: &[f64]) -> Vec<MarkovChain> {
        let l = IsingLadder::new(cols).unwrap();
        betas
            .iter()
            .map(|b| build_glauber_chain(&l, *b, true).unwrap())
            .collect()
    }

    const FIG2: [f64; 5] = [0.0, 0.3, 0.6, 0.9, 1.2];

    #[test]
    fn budgets() {
        let b = budget_errors(0.04, 4, &[0.5; 4]).unwrap();
        for s in &b {
            assert!((s.eps_i - 0.01).abs() < 1e-15);
            assert!((s.eps_fp - 0.005).abs() < 1e-15);
            assert!(s.spent() <= 0.01 + 1e-12);
        }
        let b = budget_errors(0.01, 1, &[0.25]).unwrap()[0];
        let l = make_schedule(0.25, 0.005).unwrap().l;
        assert_eq!(b.l, l);
        assert!((b.eps_w.unwrap() - 0.01 / (4.0 * (l as f64 - 1.0))).abs() < 1e-18);
        let b = budget_errors(0.01, 1, &[1.0]).unwrap()[0];
        assert_eq!(b.l, 1);
        assert_eq!(b.eps_w, None);
        assert!(budget_errors(1.0, 1, &[0.5]).is_err());
        assert!(budget_errors(0.1, 2, &[0.5]).is_err());
    }

    #[test]
    fn p_bound_rounding() {
        assert_eq!(default_p_bound(0.97536), 0.975);
        assert_eq!(default_p_bound(1.0), 1.0);
        assert_eq!(default_p_bound(0.0012345), 0.00123);
        for p in [0.1, 0.5, 0.123, 0.999999, 1e-5] {
            let b = default_p_bound(p);
            assert!(b <= p && b > 0.0 && (p - b) / p < 1e-2);
        }
    }

    #[test]
    fn qubit_count() {
        assert_eq!(register_qubits(2), 3);
        assert_eq!(register_qubits(16), 9);
        assert_eq!(register_qubits(17), 11);
        assert_eq!(register_qubits(64), 13);
    }

    #[test]
    fn distances() {
        let a = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let b = [C64::new(0.0, 0.0), C64::new(0.0, 1.0)];
        let h = [C64::new(0.5, 0.0), C64::new(0.75f64.sqrt(), 0.0)];
        assert_eq!(trace_distance(&a, &a).unwrap(), 0.0);
        assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert!((trace_distance(&a, &h).unwrap() - 0.75f64.sqrt()).abs() < 1e-15);
        assert!(trace_distance(&[C64::new(2.0, 0.0)], &[C64::new(1.0, 0.0)]).is_err());
        assert_eq!(tv_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!(tv_distance(&[0.3, 0.6], &[0.5, 0.5]).is_err());
        let (tv, tr) = tv_and_trace(&[0.2, 0.3, 0.5], &[0.6, 0.1, 0.3]).unwrap();
        assert!(tv <= tr);
    }

    #[test]
    fn identical_chains() {
        let c = ladder_chains(1, &[0.7, 0.7]);
        let r = run_anneal(&AnnealConfig::new(c, 0.1, ProjectorMode::Compiled)).unwrap();
        assert_eq!(r.total_queries, 0);
        assert!(r.final_d_tr < 1e-12);
        assert_eq!(r.ancilla_count, 1);
        assert_eq!(r.stages[0].l, 1);
    }

    #[test]
    fn ladder_2x2_end_to_end() {
        let chains = ladder_chains(2, &FIG2);
        for eps in [0.1, 0.01] {
            let cfg = AnnealConfig::new(chains.clone(), eps, ProjectorMode::Compiled);
            let r = run_anneal(&cfg).unwrap();
            assert!(r.final_d_tr <= eps);
            assert!(r.final_tvd <= r.final_d_tr + 1e-12);
            assert_eq!(r.ancilla_count, 1);
            assert_eq!(r.register_qubits, 9);
            assert_eq!(r.total_queries, r.recount_queries());
            let (_, est) = estimate_queries(&cfg).unwrap();
            let est_q: Vec<u64> = r.stages.iter().map(|s| s.queries).collect();
            assert_eq!(est, est_q);
            let mut prev = 0.0;
            for s in &r.stages {
                assert!(s.d_tr_measured <= prev + s.eps_i + 1e-8);
                prev = s.d_tr_measured;
                let per = (s.l as u64 - 1) / 2;
                assert_eq!(s.queries, per * (4 * u64::from(s.d_source) + 2 + 4 * u64::from(s.d_target) + 2));
            }

            let exact = run_anneal(&AnnealConfig::new(chains.clone(), eps, ProjectorMode::Exact)).unwrap();
            let fp_sum: f64 = exact.stages.iter().map(|s| s.eps_fp).sum();
            assert!(exact.final_d_tr <= fp_sum + 1e-9);
            assert_eq!(exact.total_queries, r.total_queries);
        }
    }

    #[test]
    fn overlap_violation_names_stage() {
        let chains = ladder_chains(1, &[0.0, 0.5, 3.0]);
        let mut cfg = AnnealConfig::new(chains, 0.1, ProjectorMode::Compiled);
        cfg.p_lower_overrides = Some(vec![0.5, 0.9999]);
        match run_anneal(&cfg) {
            Err(Error::Precondition { stage, .. }) => assert_eq!(stage, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_row() {
        let chains = ladder_chains(1, &[0.0, 0.5]);
        let r = run_anneal(&AnnealConfig::new(chains, 0.1, ProjectorMode::Compiled)).unwrap();
        assert_eq!(AnnealReport::CSV_HEADER.split(',').count(), r.csv_row().split(',').count());
    }

    #[test]
    fn needs_two_chains() {
        let chains = ladder_chains(1, &[0.0]);
        assert!(run_anneal(&AnnealConfig::new(chains, 0.1, ProjectorMode::Compiled)).is_err());
    }
}
