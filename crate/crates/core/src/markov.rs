//! Reversible ergodic Markov chains and the Ising-ladder Glauber dynamics
//! used as the annealing benchmark.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row sums of a transition matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance on the stationary fixed-point residual and on detailed balance.
pub const BALANCE_TOL: f64 = 1e-10;
/// Largest state count handled by the dense stationary solve.
pub const DENSE_STATIONARY_LIMIT: usize = 4096;

const POWER_ITERATION_BUDGET: usize = 1_000_000;

/// Second-largest eigenvalue of a reversible chain and the matching spectral gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    pub lambda2: f64,
    pub delta: f64,
}

/// A validated reversible Markov chain on `n` states.
///
/// Construction checks stochasticity, solves for the stationary
/// distribution, certifies detailed balance and computes `λ₂` from the
/// symmetric discriminant `D(x,y) = √(P(x,y)P(y,x))`. Instances are
/// immutable afterwards.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    p: DMatrix<f64>,
    pi: DVector<f64>,
    gap: SpectralGap,
    balance_residual: f64,
}

impl MarkovChain {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        validate_stochastic(&p)?;
        let pi = stationary_distribution(&p)?;
        Self::with_stationary(p, pi)
    }

    /// Builds a chain whose stationary distribution is already known (for
    /// instance a Gibbs measure). `pi` is checked, not trusted.
    pub fn with_stationary(p: DMatrix<f64>, pi: DVector<f64>) -> Result<Self> {
        validate_stochastic(&p)?;
        if pi.len() != p.nrows() {
            return Err(Error::InvalidParameter(format!(
                "stationary vector has length {} for a {}-state chain",
                pi.len(),
                p.nrows()
            )));
        }
        let fixed = fixed_point_residual(&p, &pi);
        if fixed > BALANCE_TOL || (pi.sum() - 1.0).abs() > BALANCE_TOL {
            return Err(Error::NumericFailure(format!(
                "stationary residual {fixed:.3e} exceeds tolerance"
            )));
        }
        let balance_residual = detailed_balance_residual(&p, &pi);
        let gap = spectral_gap_of(&p, &pi)?;
        Ok(Self {
            p,
            pi,
            gap,
            balance_residual,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter(
                "transition matrix must be square".into(),
            ));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn stationary(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn lambda2(&self) -> f64 {
        self.gap.lambda2
    }

    pub fn delta(&self) -> f64 {
        self.gap.delta
    }

    pub fn spectral_gap(&self) -> SpectralGap {
        self.gap
    }

    pub fn detailed_balance_residual(&self) -> f64 {
        self.balance_residual
    }

    /// The QSample amplitudes `√π(x)`.
    pub fn qsample(&self) -> DVector<f64> {
        self.pi.map(f64::sqrt)
    }

    /// `D(x,y) = √(P(x,y) P(y,x))`.
    pub fn discriminant(&self) -> DMatrix<f64> {
        discriminant(&self.p)
    }

    /// `(I + P) / 2`; the stationary distribution carries over unchanged.
    pub fn lazify(&self) -> MarkovChain {
        let n = self.n();
        let p = (DMatrix::identity(n, n) + &self.p) * 0.5;
        let balance_residual = detailed_balance_residual(&p, &self.pi);
        let lambda2 = 0.5 * (1.0 + self.gap.lambda2);
        MarkovChain {
            p,
            pi: self.pi.clone(),
            gap: SpectralGap {
                lambda2,
                delta: 1.0 - lambda2,
            },
            balance_residual,
        }
    }

    pub fn to_file(&self) -> ChainFile {
        let n = self.n();
        ChainFile {
            n,
            p: (0..n)
                .map(|i| (0..n).map(|j| self.p[(i, j)]).collect())
                .collect(),
            pi: Some(self.pi.iter().copied().collect()),
        }
    }
}

/// JSON chain format: `{ "n": .., "P": [[..], ..], "pi": [..] }`, `P`
/// row-major, `pi` optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainFile {
    pub n: usize,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
}

impl ChainFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Parse(format!(
                "line {} column {}: {}",
                e.line(),
                e.column(),
                e
            ))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain file serializes")
    }

    pub fn into_chain(self) -> Result<MarkovChain> {
        if self.p.len() != self.n {
            return Err(Error::Parse(format!(
                "declared n = {} but P has {} rows",
                self.n,
                self.p.len()
            )));
        }
        let chain = MarkovChain::from_rows(&self.p)?;
        if let Some(pi) = self.pi {
            if pi.len() != self.n {
                return Err(Error::Parse("pi has the wrong length".into()));
            }
            let diff = pi
                .iter()
                .zip(chain.stationary().iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if diff > 1e-8 {
                return Err(Error::InvalidParameter(format!(
                    "supplied pi differs from the computed stationary distribution by {diff:.3e}"
                )));
            }
        }
        Ok(chain)
    }
}

pub fn validate_stochastic(p: &DMatrix<f64>) -> Result<()> {
    let n = p.nrows();
    if n < 2 || p.ncols() != n {
        return Err(Error::InvalidParameter(format!(
            "transition matrix must be square with at least 2 states, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    for (i, row) in p.row_iter().enumerate() {
        if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::NotStochastic(format!(
                "row {i} has invalid entry {v}"
            )));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::NotStochastic(format!(
                "row {i} sums to {s:.15}"
            )));
        }
    }
    Ok(())
}

/// Left eigenvector of `P` for eigenvalue 1, normalized to a probability
/// vector.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    let pi = if n <= DENSE_STATIONARY_LIMIT {
        dense_stationary(p)?
    } else {
        power_stationary(p)?
    };
    if pi.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NumericFailure(
            "stationary distribution is not entrywise positive (reducible chain?)".into(),
        ));
    }
    let residual = fixed_point_residual(p, &pi);
    if residual > BALANCE_TOL {
        return Err(Error::NumericFailure(format!(
            "stationary solve residual {residual:.3e}"
        )));
    }
    Ok(pi)
}

// (Pᵀ − I) π = 0 with the last equation replaced by Σ π = 1.
fn dense_stationary(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NumericFailure("singular stationary system".into()))?;
    let s = pi.sum();
    Ok(pi / s)
}

fn power_stationary(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    let pt = p.transpose();
    let mut pi = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..POWER_ITERATION_BUDGET {
        // lazy step so periodic chains still converge
        let next = (&pt * &pi + &pi) * 0.5;
        let diff = (&next - &pi).amax();
        pi = next;
        if diff < 1e-15 {
            let s = pi.sum();
            return Ok(pi / s);
        }
    }
    Err(Error::NumericFailure(
        "power iteration did not converge".into(),
    ))
}

/// `‖πᵀP − πᵀ‖∞`.
pub fn fixed_point_residual(p: &DMatrix<f64>, pi: &DVector<f64>) -> f64 {
    (p.tr_mul(pi) - pi).amax()
}

/// `max_{x,y} |π(x)P(x,y) − π(y)P(y,x)|`.
pub fn detailed_balance_residual(p: &DMatrix<f64>, pi: &DVector<f64>) -> f64 {
    let n = p.nrows();
    let mut worst = 0.0f64;
    for x in 0..n {
        for y in (x + 1)..n {
            worst = worst.max((pi[x] * p[(x, y)] - pi[y] * p[(y, x)]).abs());
        }
    }
    worst
}

pub fn discriminant(p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    DMatrix::from_fn(n, n, |x, y| (p[(x, y)] * p[(y, x)]).sqrt())
}

/// `λ₂` and `δ = 1 − λ₂` for a reversible chain, from the symmetric
/// discriminant.
pub fn spectral_gap_of(p: &DMatrix<f64>, pi: &DVector<f64>) -> Result<SpectralGap> {
    let residual = detailed_balance_residual(p, pi);
    if residual > BALANCE_TOL {
        return Err(Error::ReversibilityViolation { residual });
    }
    let mut eig = SymmetricEigen::new(discriminant(p)).eigenvalues.as_slice().to_vec();
    eig.sort_by(|a, b| b.total_cmp(a));
    if (eig[0] - 1.0).abs() > 1e-9 {
        return Err(Error::NumericFailure(format!(
            "leading discriminant eigenvalue {} is not 1",
            eig[0]
        )));
    }
    let lambda2 = eig[1];
    Ok(SpectralGap {
        lambda2,
        delta: 1.0 - lambda2,
    })
}

/// Open-boundary `2 × cols` Ising ladder with unit ferromagnetic coupling.
///
/// The energy of a configuration is its number of unsatisfied bonds, an
/// integer in `0..=n_bonds`. Spin `(r, k)` has index `r * cols + k` and
/// is bit `r * cols + k` of the configuration index (bit set = spin down).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsingLadder {
    cols: usize,
    bonds: Vec<(usize, usize)>,
}

/// Enumeration limit on ladder spins.
pub const MAX_LADDER_SPINS: usize = 20;

impl IsingLadder {
    pub fn new(cols: usize) -> Result<Self> {
        if cols == 0 || 2 * cols > MAX_LADDER_SPINS {
            return Err(Error::SizeGuard {
                what: "ladder spins",
                n: 2 * cols,
                limit: MAX_LADDER_SPINS,
            });
        }
        let idx = |r: usize, k: usize| r * cols + k;
        let mut bonds = Vec::with_capacity(3 * cols - 2);
        for k in 0..cols {
            bonds.push((idx(0, k), idx(1, k)));
        }
        for r in 0..2 {
            for k in 0..cols.saturating_sub(1) {
                bonds.push((idx(r, k), idx(r, k + 1)));
            }
        }
        Ok(Self { cols, bonds })
    }

    pub fn rows(&self) -> usize {
        2
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    pub fn n_spins(&self) -> usize {
        2 * self.cols
    }

    pub fn n_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn n_states(&self) -> usize {
        1 << self.n_spins()
    }

    /// Number of unsatisfied bonds in configuration `x`.
    pub fn energy(&self, x: usize) -> u32 {
        self.bonds
            .iter()
            .filter(|(a, b)| ((x >> a) & 1) != ((x >> b) & 1))
            .count() as u32
    }

    pub fn energies(&self) -> Vec<u32> {
        (0..self.n_states()).map(|x| self.energy(x)).collect()
    }

    /// `N_k` = number of configurations with energy `k`, for `k = 0..=n_bonds`.
    pub fn energy_histogram(&self) -> Vec<u64> {
        let mut hist = vec![0u64; self.n_bonds() + 1];
        for x in 0..self.n_states() {
            hist[self.energy(x) as usize] += 1;
        }
        hist
    }

    /// Gibbs weights `exp(−β H(x)) / Z(β)`.
    pub fn gibbs_distribution(&self, beta: f64) -> DVector<f64> {
        let w = DVector::from_iterator(
            self.n_states(),
            self.energies().into_iter().map(|e| (-beta * e as f64).exp()),
        );
        let z = w.sum();
        w / z
    }
}

/// Random-scan single-site heat-bath Glauber dynamics at inverse
/// temperature `beta`, optionally lazified to `(I + G) / 2`.
///
/// The random-scan kernel is the uniform mixture of the single-site
/// kernels, so it stays reversible with respect to the Gibbs measure.
pub fn build_glauber_chain(ladder: &IsingLadder, beta: f64, lazy: bool) -> Result<MarkovChain> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "inverse temperature must be finite and non-negative, got {beta}"
        )));
    }
    let n = ladder.n_states();
    let spins = ladder.n_spins();
    let energy = ladder.energies();
    let scale = 1.0 / spins as f64;
    let mut g = DMatrix::zeros(n, n);
    for x in 0..n {
        for s in 0..spins {
            let y = x ^ (1 << s);
            let de = energy[y] as f64 - energy[x] as f64;
            let flip = 1.0 / (1.0 + (beta * de).exp());
            g[(x, y)] += scale * flip;
            g[(x, x)] += scale * (1.0 - flip);
        }
    }
    // Row sums drift by a few ulps; renormalise exactly.
    for mut row in g.row_iter_mut() {
        let s: f64 = row.iter().sum();
        row /= s;
    }
    let chain = MarkovChain::new(g)?;
    Ok(if lazy { chain.lazify() } else { chain })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_gibbs(ladder: &IsingLadder, beta: f64) -> Vec<f64> {
        // independent recount of the unsatisfied bonds
        let cols = ladder.cols();
        let mut w = Vec::new();
        for x in 0..ladder.n_states() {
            let spin = |r: usize, k: usize| (x >> (r * cols + k)) & 1;
            let mut h = 0;
            for k in 0..cols {
                h += (spin(0, k) != spin(1, k)) as i32;
                if k + 1 < cols {
                    h += (spin(0, k) != spin(0, k + 1)) as i32;
                    h += (spin(1, k) != spin(1, k + 1)) as i32;
                }
            }
            w.push((-beta * h as f64).exp());
        }
        let z: f64 = w.iter().sum();
        w.into_iter().map(|v| v / z).collect()
    }

    #[test]
    fn two_state_symmetric_chains() {
        let c = MarkovChain::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!((c.stationary()[0] - 0.5).abs() < 1e-15);
        assert!(c.lambda2().abs() < 1e-15);
        assert!((c.delta() - 1.0).abs() < 1e-15);

        let c = MarkovChain::from_rows(&[vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap();
        assert!((c.stationary()[1] - 0.5).abs() < 1e-15);
        assert!((c.lambda2() - 0.5).abs() < 1e-14);
        assert!((c.delta() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn lazify_two_state() {
        let c = MarkovChain::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let l = c.lazify();
        assert_eq!(l.transition()[(0, 0)], 0.75);
        assert_eq!(l.transition()[(0, 1)], 0.25);
        assert!((l.lambda2() - 0.5).abs() < 1e-15);
        let direct = MarkovChain::new(l.transition().clone()).unwrap();
        assert!((direct.lambda2() - l.lambda2()).abs() < 1e-12);
    }

    #[test]
    fn ladder_counts() {
        for cols in 1..=4 {
            let l = IsingLadder::new(cols).unwrap();
            assert_eq!(l.n_bonds(), cols + 2 * (cols - 1));
            assert_eq!(l.n_states(), 1 << (2 * cols));
            assert_eq!(l.energy(0), 0);
            let all = l.n_states() - 1;
            for x in 0..l.n_states() {
                assert_eq!(l.energy(x), l.energy(all ^ x));
                assert!(l.energy(x) as usize <= l.n_bonds());
            }
        }
        assert!(IsingLadder::new(11).is_err());
    }

    #[test]
    fn infinite_temperature_heat_bath() {
        let l = IsingLadder::new(1).unwrap();
        let c = build_glauber_chain(&l, 0.0, false).unwrap();
        for x in 0..4 {
            assert!((c.stationary()[x] - 0.25).abs() < 1e-14);
            for s in 0..2 {
                // conditional flip probability 1/2, site chosen with probability 1/2
                assert!((c.transition()[(x, x ^ (1 << s))] - 0.25).abs() < 1e-15);
            }
            assert!((c.transition()[(x, x)] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn lazy_glauber_holding_probability() {
        for cols in 1..=3 {
            let l = IsingLadder::new(cols).unwrap();
            let c = build_glauber_chain(&l, 0.3, true).unwrap();
            for x in 0..c.n() {
                assert!(c.transition()[(x, x)] >= 0.5);
            }
        }
    }

    #[test]
    fn glauber_stationary_is_gibbs() {
        let l = IsingLadder::new(2).unwrap();
        for beta in [0.6, 0.9] {
            let c = build_glauber_chain(&l, beta, false).unwrap();
            let oracle = brute_force_gibbs(&l, beta);
            for x in 0..16 {
                assert!((c.stationary()[x] - oracle[x]).abs() < 1e-12);
            }
            assert!(c.detailed_balance_residual() < 1e-12);
        }
    }

    #[test]
    fn lazify_preserves_stationary() {
        let l = IsingLadder::new(2).unwrap();
        let c = build_glauber_chain(&l, 0.3, false).unwrap();
        let lazy = c.lazify();
        let recomputed = stationary_distribution(lazy.transition()).unwrap();
        assert!((recomputed - c.stationary()).amax() < 1e-12);
    }

    #[test]
    fn discriminant_spectrum_matches_transition() {
        let l = IsingLadder::new(2).unwrap();
        let c = build_glauber_chain(&l, 0.9, true).unwrap();
        let mut d = SymmetricEigen::new(c.discriminant()).eigenvalues.as_slice().to_vec();
        let mut p: Vec<f64> = c
            .transition()
            .complex_eigenvalues()
            .iter()
            .map(|z| {
                assert!(z.im.abs() < 1e-10);
                z.re
            })
            .collect();
        d.sort_by(f64::total_cmp);
        p.sort_by(f64::total_cmp);
        for (a, b) in d.iter().zip(&p) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn gap_on_beta_grid_matches_dense_diagonalization() {
        let l = IsingLadder::new(3).unwrap();
        for k in 0..=4 {
            let beta = 0.3 * k as f64;
            let c = build_glauber_chain(&l, beta, false).unwrap();
            let mut eig: Vec<f64> = c
                .transition()
                .complex_eigenvalues()
                .iter()
                .map(|z| z.re)
                .collect();
            eig.sort_by(|a, b| b.total_cmp(a));
            assert!((c.lambda2() - eig[1]).abs() < 1e-9, "beta {beta}");
            assert!(c.delta() > 0.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            MarkovChain::from_rows(&[vec![0.5, 0.6], vec![0.5, 0.5]]),
            Err(Error::NotStochastic(_))
        ));
        // stochastic but not reversible: a 3-cycle with drift
        let cyc = [
            vec![0.1, 0.8, 0.1],
            vec![0.1, 0.1, 0.8],
            vec![0.8, 0.1, 0.1],
        ];
        assert!(matches!(
            MarkovChain::from_rows(&cyc),
            Err(Error::ReversibilityViolation { .. })
        ));
        let l = IsingLadder::new(1).unwrap();
        assert!(build_glauber_chain(&l, f64::NAN, true).is_err());
        assert!(build_glauber_chain(&l, f64::INFINITY, true).is_err());
    }

    #[test]
    fn chain_file_roundtrip_and_errors() {
        let text = r#"{"n": 2, "P": [[0.5, 0.5], [0.5, 0.5]]}"#;
        let chain = ChainFile::from_json(text).unwrap().into_chain().unwrap();
        assert_eq!(chain.delta(), 1.0);
        let again = ChainFile::from_json(&chain.to_file().to_json())
            .unwrap()
            .into_chain()
            .unwrap();
        assert_eq!(again.transition(), chain.transition());

        let err = ChainFile::from_json("{\n \"n\": 2,\n \"P\": [[0.5, 0.5],\n [0.5 0.5]]}")
            .unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
    }
}
