//! Gibbs QSamples on the Ising ladder: exact partition functions, the
//! adjacent-temperature overlap identity and the annealed preparation.

use serde::{Deserialize, Serialize};

use crate::anneal::{register_qubits, run_anneal, AnnealConfig, AnnealReport};
use crate::error::{Error, Result};
use crate::fpaa::ProjectorMode;
use crate::markov::{build_glauber_chain, IsingLadder, MarkovChain, MAX_LADDER_SPINS};

/// Minimum adjacent overlap a schedule must keep.
pub const OVERLAP_THRESHOLD: f64 = 1.0 / 15.0;
/// Allowed disagreement between the overlap identity and the direct inner
/// product.
pub const OVERLAP_CROSS_CHECK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GibbsModel {
    ladder: IsingLadder,
    betas: Vec<f64>,
    histogram: Vec<u64>,
}

impl GibbsModel {
    pub fn new(cols: usize, betas: Vec<f64>) -> Result<Self> {
        let ladder = IsingLadder::new(cols)?;
        Self::from_ladder(ladder, betas)
    }

    pub fn from_ladder(ladder: IsingLadder, betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidParameter("empty β schedule".into()));
        }
        if betas.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "inverse temperatures must be finite and ≥ 0: {betas:?}"
            )));
        }
        if betas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter(format!(
                "β schedule must be nondecreasing: {betas:?}"
            )));
        }
        let histogram = ladder.energy_histogram();
        Ok(Self {
            ladder,
            betas,
            histogram,
        })
    }

    pub fn ladder(&self) -> &IsingLadder {
        &self.ladder
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `N_k`, the number of configurations with `k` unsatisfied bonds.
    pub fn histogram(&self) -> &[u64] {
        &self.histogram
    }

    pub fn n_max(&self) -> usize {
        self.ladder.n_bonds()
    }

    /// `Z(β) = Σ_k N_k e^{−βk}`.
    pub fn partition_function(&self, beta: f64) -> f64 {
        self.histogram
            .iter()
            .enumerate()
            .map(|(k, &c)| c as f64 * (-beta * k as f64).exp())
            .sum()
    }

    /// `Z(β)` summed configuration by configuration.
    pub fn partition_function_enumerated(&self, beta: f64) -> f64 {
        self.ladder
            .energies()
            .iter()
            .map(|&h| (-beta * f64::from(h)).exp())
            .sum()
    }

    /// Amplitudes `√μ_β(x)`.
    pub fn qsample(&self, beta: f64) -> Vec<f64> {
        self.ladder
            .gibbs_distribution(beta)
            .iter()
            .map(|p| p.sqrt())
            .collect()
    }

    pub fn chains(&self) -> Result<Vec<MarkovChain>> {
        self.betas
            .iter()
            .map(|b| build_glauber_chain(&self.ladder, *b, true))
            .collect()
    }
}

pub fn partition_function(model: &GibbsModel, beta: f64) -> Result<f64> {
    if model.ladder.n_spins() > MAX_LADDER_SPINS {
        return Err(Error::SizeGuard {
            what: "partition-function enumeration",
            n: model.ladder.n_spins(),
            limit: MAX_LADDER_SPINS,
        });
    }
    Ok(model.partition_function(beta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapCheck {
    /// `Z((βi+βj)/2)² / (Z(βi) Z(βj))`.
    pub identity: f64,
    /// `|⟨μ_βi|μ_βj⟩|²` from the amplitude vectors.
    pub direct: f64,
}

pub fn overlap_check(model: &GibbsModel, beta_i: f64, beta_j: f64) -> Result<OverlapCheck> {
    if beta_i < 0.0 || beta_j < 0.0 || !beta_i.is_finite() || !beta_j.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "inverse temperatures must be finite and ≥ 0, got {beta_i}, {beta_j}"
        )));
    }
    let zm = partition_function(model, 0.5 * (beta_i + beta_j))?;
    let identity = zm * zm / (model.partition_function(beta_i) * model.partition_function(beta_j));
    let a = model.qsample(beta_i);
    let b = model.qsample(beta_j);
    let ip: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    Ok(OverlapCheck {
        identity,
        direct: ip * ip,
    })
}

/// Adjacent overlap from the partition-function identity, cross-checked
/// against the direct inner product.
pub fn gibbs_overlap(model: &GibbsModel, beta_i: f64, beta_j: f64) -> Result<f64> {
    let c = overlap_check(model, beta_i, beta_j)?;
    if (c.identity - c.direct).abs() > OVERLAP_CROSS_CHECK {
        return Err(Error::NumericFailure(format!(
            "overlap identity {} disagrees with the inner product {}",
            c.identity, c.direct
        )));
    }
    Ok(c.identity.min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleCheck {
    pub overlaps: Vec<f64>,
    pub min_overlap: f64,
    pub pass: bool,
    pub ell: usize,
    /// `ℓ / √(ln|Ω| · ln n_max)`, informational.
    pub length_ratio: f64,
}

pub fn verify_schedule(model: &GibbsModel) -> Result<ScheduleCheck> {
    let overlaps: Vec<f64> = model
        .betas
        .windows(2)
        .map(|w| gibbs_overlap(model, w[0], w[1]))
        .collect::<Result<_>>()?;
    let min_overlap = overlaps.iter().cloned().fold(1.0, f64::min);
    let ell = overlaps.len();
    let omega = model.ladder.n_states() as f64;
    let scale = (omega.ln() * (model.n_max() as f64).ln()).sqrt();
    Ok(ScheduleCheck {
        pass: min_overlap >= OVERLAP_THRESHOLD,
        overlaps,
        min_overlap,
        ell,
        length_ratio: if scale > 0.0 { ell as f64 / scale } else { f64::NAN },
    })
}

/// Anneals through the Glauber chains of the schedule.
pub fn gibbs_qsample_run(model: &GibbsModel, eps: f64, mode: ProjectorMode) -> Result<AnnealReport> {
    let check = verify_schedule(model)?;
    if !check.pass {
        let stage = check
            .overlaps
            .iter()
            .position(|o| *o < OVERLAP_THRESHOLD)
            .unwrap_or(0);
        return Err(Error::Precondition {
            stage,
            message: format!(
                "adjacent overlap {} is below 1/15",
                check.overlaps[stage]
            ),
        });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "total error must lie in (0, 1), got {eps}"
        )));
    }
    let chains = model.chains()?;
    if chains.len() == 1 {
        // |π₀⟩ is prepared exactly.
        let n = chains[0].n();
        return Ok(AnnealReport {
            mode,
            eps,
            ell: 0,
            n,
            stages: Vec::new(),
            total_queries: 0,
            final_d_tr: 0.0,
            final_tvd: 0.0,
            ancilla_count: 1,
            register_qubits: register_qubits(n),
        });
    }
    run_anneal(&AnnealConfig::new(chains, eps, mode))
}

/// Model file: `{"rows": 2, "cols": c, "betas": [...], "eps": ε}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsModelFile {
    pub rows: usize,
    pub cols: usize,
    pub betas: Vec<f64>,
    pub eps: f64,
}

impl GibbsModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text).map_err(|e| {
            Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        if f.rows != 2 {
            return Err(Error::InvalidParameter(format!(
                "only two-row ladders are supported, got rows = {}",
                f.rows
            )));
        }
        Ok(f)
    }

    pub fn model(&self) -> Result<GibbsModel> {
        GibbsModel::new(self.cols, self.betas.clone())
    }
}

/// Default β schedule of the ladder benchmark.
pub const BENCHMARK_BETAS: [f64; 5] = [0.0, 0.3, 0.6, 0.9, 1.2];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bond() {
        let m = GibbsModel::new(1, vec![0.0, 0.3]).unwrap();
        assert_eq!(m.partition_function(0.0), 4.0);
        for b in [0.0f64, 0.3, 1.7] {
            let want = 2.0 + 2.0 * (-b).exp();
            assert!((m.partition_function(b) - want).abs() < 1e-14);
            assert!((m.partition_function_enumerated(b) - want).abs() < 1e-14);
        }
        let z = |b: f64| 2.0 + 2.0 * (-b).exp();
        let want = z(0.15).powi(2) / (z(0.0) * z(0.3));
        assert!((gibbs_overlap(&m, 0.0, 0.3).unwrap() - want).abs() < 1e-14);
        assert_eq!(gibbs_overlap(&m, 0.7, 0.7).unwrap(), 1.0);
    }

    #[test]
    fn histogram_matches_enumeration() {
        let m = GibbsModel::new(3, BENCHMARK_BETAS.to_vec()).unwrap();
        for b in [0.0, 0.3, 0.77, 1.2, 5.0] {
            let a = m.partition_function(b);
            let e = m.partition_function_enumerated(b);
            assert!((a - e).abs() <= 1e-12 * a.max(1.0));
        }
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let z = m.partition_function(0.1 * k as f64);
            assert!(z < prev);
            prev = z;
        }
        assert_eq!(m.partition_function(0.0), 64.0);
    }

    #[test]
    fn benchmark_schedules_pass() {
        for cols in [2, 3, 4] {
            let m = GibbsModel::new(cols, BENCHMARK_BETAS.to_vec()).unwrap();
            let c = verify_schedule(&m).unwrap();
            assert!(c.pass, "cols {cols}: {:?}", c.overlaps);
            assert!(c.min_overlap > 0.5);
            for w in BENCHMARK_BETAS.windows(2) {
                let o = overlap_check(&m, w[0], w[1]).unwrap();
                assert!((o.identity - o.direct).abs() < 1e-12);
                let zm = m.partition_function(0.5 * (w[0] + w[1]));
                assert!(zm * zm <= m.partition_function(w[0]) * m.partition_function(w[1]) * (1.0 + 1e-15));
            }
        }
    }

    #[test]
    fn adversarial_and_constant() {
        let m = GibbsModel::new(4, vec![0.0, 50.0]).unwrap();
        let c = verify_schedule(&m).unwrap();
        assert!(!c.pass);
        assert!(matches!(
            gibbs_qsample_run(&m, 0.1, ProjectorMode::Compiled),
            Err(Error::Precondition { stage: 0, .. })
        ));
        let m = GibbsModel::new(2, vec![0.5, 0.5, 0.5]).unwrap();
        let c = verify_schedule(&m).unwrap();
        assert_eq!(c.min_overlap, 1.0);
        assert!(c.pass);
    }

    #[test]
    fn qsample_run() {
        let m = GibbsModel::new(2, BENCHMARK_BETAS.to_vec()).unwrap();
        let r = gibbs_qsample_run(&m, 0.1, ProjectorMode::Compiled).unwrap();
        assert!(r.final_d_tr <= 0.1);
        assert!(r.final_tvd <= r.final_d_tr);
        assert_eq!(r.ancilla_count, 1);

        let loose = gibbs_qsample_run(&m, 0.999, ProjectorMode::Compiled).unwrap();
        assert!(loose.total_queries <= r.total_queries);

        let single = GibbsModel::new(2, vec![0.0]).unwrap();
        let r = gibbs_qsample_run(&single, 0.1, ProjectorMode::Compiled).unwrap();
        assert_eq!(r.total_queries, 0);
        assert_eq!(r.final_d_tr, 0.0);
    }

    #[test]
    fn stationarity() {
        let m = GibbsModel::new(2, vec![0.0, 0.8]).unwrap();
        for (c, b) in m.chains().unwrap().iter().zip(m.betas()) {
            let mu = m.ladder().gibbs_distribution(*b);
            assert!((c.stationary() - mu).amax() < 1e-10);
        }
    }

    #[test]
    fn model_file() {
        let f = GibbsModelFile::from_json(r#"{"rows": 2, "cols": 2, "betas": [0, 0.3], "eps": 0.1}"#).unwrap();
        assert_eq!(f.model().unwrap().betas().len(), 2);
        assert!(GibbsModelFile::from_json(r#"{"rows": 3, "cols": 2, "betas": [0], "eps": 0.1}"#).is_err());
        let e = GibbsModelFile::from_json("{\n\"rows\": 2,\n\"cols\": }").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        assert!(GibbsModel::new(2, vec![0.5, 0.2]).is_err());
    }
}
