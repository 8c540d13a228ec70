//! One-ancilla selective-phase gadget `C†(P_φ ⊗ I)C` and its oracle
//! conjugation.
//!
//! `C` acts per eigenphase of `W` as the real 2×2 rotation
//! `C_θ = [[υ, −w], [w, υ]]` with `υ = Υ(θ)`, `w = √(1 − υ²)`; index 0 is
//! the ancilla `|0⟩` branch, which also carries the phase `e^{iφ}`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::filter::ChebyshevFilter;
use crate::markov::MarkovChain;
use crate::walk::{LiftedVector, WalkSpectrum, C64};

/// Oracle queries added by the `O … O†` conjugation of one gadget.
pub const DEFAULT_CONJUGATION_QUERIES: u64 = 2;
/// Slack allowed when comparing a filter's gap with the walk's.
const GAP_SLACK: f64 = 1e-12;

pub type Block = [[C64; 2]; 2];

/// Queries charged for one conjugated gadget built on a degree-`d` filter:
/// `d` controlled walks in each of `C` and `C†`, two queries per walk.
pub fn conjugated_gadget_queries(d: u32, conjugation: u64) -> u64 {
    4 * u64::from(d) + conjugation
}

/// Source of the per-phase amplitude `υ_θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseFilter {
    Chebyshev(ChebyshevFilter),
    /// `υ_θ` is the indicator of `θ = 0`: the gadget becomes the exact
    /// selective phase about the full 1-eigenspace.
    ExactProjector,
}

impl PhaseFilter {
    pub fn upsilon(&self, theta: f64) -> f64 {
        match self {
            PhaseFilter::Chebyshev(f) => f.eval(theta),
            PhaseFilter::ExactProjector => {
                if theta == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn chebyshev(&self) -> Option<&ChebyshevFilter> {
        match self {
            PhaseFilter::Chebyshev(f) => Some(f),
            PhaseFilter::ExactProjector => None,
        }
    }
}

/// Ancilla-resolved state: `|0⟩_a ⊗ anc0 + |1⟩_a ⊗ anc1`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub anc0: LiftedVector,
    pub anc1: LiftedVector,
}

impl JointState {
    pub fn zeros(n: usize) -> Self {
        Self {
            anc0: LiftedVector::zeros(n),
            anc1: LiftedVector::zeros(n),
        }
    }

    /// `|0⟩_a ⊗ |v⟩ ⊗ |0⟩_w`.
    pub fn embed_clean(v: &[C64]) -> Self {
        let n = v.len();
        let mut s = Self::zeros(n);
        for (x, a) in v.iter().enumerate() {
            s.anc0.set(x, 0, *a);
        }
        s
    }

    pub fn embed_real(v: &[f64]) -> Self {
        let c: Vec<C64> = v.iter().map(|x| C64::new(*x, 0.0)).collect();
        Self::embed_clean(&c)
    }

    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        let mut s = Self {
            anc0: LiftedVector::random(n, rng),
            anc1: LiftedVector::random(n, rng),
        };
        let inv = C64::new(1.0 / s.norm(), 0.0);
        s.anc0.scale(inv);
        s.anc1.scale(inv);
        s
    }

    pub fn dim(&self) -> usize {
        self.anc0.dim()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.anc0.norm_sqr() + self.anc1.norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.anc0.inner(&other.anc0) + self.anc1.inner(&other.anc1)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            anc0: &self.anc0 - &other.anc0,
            anc1: &self.anc1 - &other.anc1,
        }
    }

    /// Born-rule distribution of the first system register.
    pub fn system_marginal(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|x| {
                self.anc0.row(x).iter().map(|a| a.norm_sqr()).sum::<f64>()
                    + self.anc1.row(x).iter().map(|a| a.norm_sqr()).sum::<f64>()
            })
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.anc0
            .max_abs_diff(&other.anc0)
            .max(self.anc1.max_abs_diff(&other.anc1))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseBlock {
    pub theta: f64,
    pub upsilon: f64,
    #[serde(skip)]
    pub block: Block,
}

/// `S̃_φ(Π₀)` for one walk.
#[derive(Debug, Clone)]
pub struct SelectivePhaseGadget<'a> {
    spec: &'a WalkSpectrum,
    filter: PhaseFilter,
    phi: f64,
}

pub fn build_gadget<'a>(
    spec: &'a WalkSpectrum,
    filter: &ChebyshevFilter,
    phi: f64,
) -> Result<SelectivePhaseGadget<'a>> {
    if filter.delta > spec.phase_gap() + GAP_SLACK {
        return Err(Error::GapMismatch {
            filter_gap: filter.delta,
            walk_gap: spec.phase_gap(),
        });
    }
    if !phi.is_finite() {
        return Err(Error::InvalidParameter(format!("phase must be finite, got {phi}")));
    }
    Ok(SelectivePhaseGadget {
        spec,
        filter: PhaseFilter::Chebyshev(*filter),
        phi,
    })
}

/// Gadget with the filter replaced by the exact projector onto `θ = 0`.
pub fn build_exact_gadget(spec: &WalkSpectrum, phi: f64) -> SelectivePhaseGadget<'_> {
    SelectivePhaseGadget {
        spec,
        filter: PhaseFilter::ExactProjector,
        phi,
    }
}

/// `M_θ = C_θ† diag(e^{iφ}, 1) C_θ` for a real amplitude `υ`.
pub fn phase_block(upsilon: f64, phi: f64) -> Block {
    let u2 = upsilon * upsilon;
    let w2 = (1.0 - u2).max(0.0);
    let off = upsilon * w2.sqrt();
    let e = C64::from_polar(1.0, phi);
    let one = C64::new(1.0, 0.0);
    [
        [e * u2 + w2, (one - e) * off],
        [(one - e) * off, e * w2 + u2],
    ]
}

impl<'a> SelectivePhaseGadget<'a> {
    pub fn spec(&self) -> &'a WalkSpectrum {
        self.spec
    }

    pub fn filter(&self) -> &PhaseFilter {
        &self.filter
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn with_phi(&self, phi: f64) -> Self {
        Self { phi, ..self.clone() }
    }

    pub fn block(&self, theta: f64) -> Block {
        phase_block(self.filter.upsilon(theta), self.phi)
    }

    /// Blocks for every busy eigenphase followed by the complement phases
    /// `π` (swap-symmetric) and `0` (swap-antisymmetric).
    pub fn per_phase_blocks(&self) -> Vec<PhaseBlock> {
        self.spec
            .busy_phases()
            .into_iter()
            .chain([PI, 0.0])
            .map(|theta| PhaseBlock {
                theta,
                upsilon: self.filter.upsilon(theta),
                block: self.block(theta),
            })
            .collect()
    }

    pub fn apply(&self, s: &JointState) -> JointState {
        if C64::from_polar(1.0, self.phi) == C64::new(1.0, 0.0) {
            // S₀ = I for any filter.
            return s.clone();
        }
        let (anc0, anc1) = self
            .spec
            .apply_block_function(|t| self.block(t), &s.anc0, &s.anc1);
        JointState { anc0, anc1 }
    }

    /// `‖S̃_φ(Π₀)(|0⟩⊗I)T − (|0⟩⊗I)T S_φ(Π_π)‖` via the Gram matrix of the
    /// `n` difference columns.
    pub fn error_norm(&self) -> f64 {
        let n = self.spec.n();
        let cols: Vec<JointState> = (0..n)
            .map(|x| {
                let lifted = self.spec.lift(&basis(n, x));
                let out = self.apply(&JointState {
                    anc0: lifted,
                    anc1: LiftedVector::zeros(n),
                });
                out.sub(&self.ideal_column(x))
            })
            .collect();
        largest_singular_value(&cols)
    }

    /// The same norm for the oracle-conjugated gadget on clean workspace.
    pub fn conjugated_error_norm(&self, oracle: &OracleUnitary) -> f64 {
        let n = self.spec.n();
        let sqrt_pi = self.spec.chain().qsample();
        let e = C64::from_polar(1.0, self.phi) - 1.0;
        let cols: Vec<JointState> = (0..n)
            .map(|x| {
                let out = apply_conjugated_gadget(self, oracle, &JointState::embed_clean(&basis(n, x)));
                let target: Vec<C64> = (0..n)
                    .map(|y| {
                        let delta = if x == y { 1.0 } else { 0.0 };
                        C64::new(delta, 0.0) + e * (sqrt_pi[x] * sqrt_pi[y])
                    })
                    .collect();
                out.sub(&JointState::embed_clean(&target))
            })
            .collect();
        largest_singular_value(&cols)
    }

    /// `(|0⟩ ⊗ I) T S_φ(Π_π) e_x = T e_x + (e^{iφ} − 1) √π(x) ψ`.
    fn ideal_column(&self, x: usize) -> JointState {
        let n = self.spec.n();
        let sqrt_pi = self.spec.chain().qsample();
        let e = C64::from_polar(1.0, self.phi) - 1.0;
        let mut anc0 = self.spec.lift(&basis(n, x));
        anc0.axpy(e * sqrt_pi[x], self.spec.psi());
        JointState {
            anc0,
            anc1: LiftedVector::zeros(n),
        }
    }
}

pub fn apply_gadget(g: &SelectivePhaseGadget<'_>, s: &JointState) -> JointState {
    g.apply(s)
}

pub fn gadget_error_norm(g: &SelectivePhaseGadget<'_>) -> f64 {
    g.error_norm()
}

fn basis(n: usize, x: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[x] = C64::new(1.0, 0.0);
    v
}

/// Largest singular value of the map whose columns are `cols`.
pub fn largest_singular_value(cols: &[JointState]) -> f64 {
    let n = cols.len();
    if n == 0 {
        return 0.0;
    }
    let gram = DMatrix::from_fn(n, n, |i, j| cols[i].inner(&cols[j]));
    let eig = SymmetricEigen::new(gram);
    eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max).sqrt()
}

/// `O_P = Σ_x |x⟩⟨x| ⊗ H_x` with Householder reflections `H_x|0⟩ = |p_x⟩`.
#[derive(Debug, Clone)]
pub struct OracleUnitary {
    n: usize,
    /// Reflection vectors `e_0 − p_x` scaled to unit norm; `None` when
    /// `p_x = e_0` and `H_x = I`.
    normals: Vec<Option<Vec<f64>>>,
}

pub fn build_oracle_unitary(chain: &MarkovChain) -> OracleUnitary {
    let n = chain.n();
    let p = chain.transition();
    let normals = (0..n)
        .map(|x| {
            let mut w: Vec<f64> = (0..n).map(|y| -p[(x, y)].sqrt()).collect();
            w[0] += 1.0;
            let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            // p_x ≥ 0 entrywise, so e_0 − p_x never degenerates to the
            // antipodal case and a single reflection always suffices.
            if norm < 1e-14 {
                None
            } else {
                Some(w.into_iter().map(|a| a / norm).collect())
            }
        })
        .collect();
    OracleUnitary { n, normals }
}

impl OracleUnitary {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `H_x` as a dense matrix.
    pub fn row_unitary(&self, x: usize) -> DMatrix<f64> {
        let mut h = DMatrix::identity(self.n, self.n);
        if let Some(w) = &self.normals[x] {
            for i in 0..self.n {
                for j in 0..self.n {
                    h[(i, j)] -= 2.0 * w[i] * w[j];
                }
            }
        }
        h
    }

    pub fn apply(&self, u: &LiftedVector) -> LiftedVector {
        let mut out = u.clone();
        for (x, normal) in self.normals.iter().enumerate() {
            if let Some(w) = normal {
                let row = out.row_mut(x);
                let dot: C64 = row.iter().zip(w).map(|(a, b)| a * *b).sum();
                for (a, b) in row.iter_mut().zip(w) {
                    *a -= dot * (2.0 * b);
                }
            }
        }
        out
    }

    /// Real symmetric reflections are self-inverse.
    pub fn apply_adjoint(&self, u: &LiftedVector) -> LiftedVector {
        self.apply(u)
    }

    pub fn apply_joint(&self, s: &JointState) -> JointState {
        JointState {
            anc0: self.apply(&s.anc0),
            anc1: self.apply(&s.anc1),
        }
    }
}

/// `(I_a ⊗ O†) S̃_φ (I_a ⊗ O)`.
pub fn apply_conjugated_gadget(
    g: &SelectivePhaseGadget<'_>,
    oracle: &OracleUnitary,
    s: &JointState,
) -> JointState {
    let inner = g.apply(&oracle.apply_joint(s));
    JointState {
        anc0: oracle.apply_adjoint(&inner.anc0),
        anc1: oracle.apply_adjoint(&inner.anc1),
    }
}
