//! The qubitized Szegedy walk `W = (2TT† − I)S` on the doubled register.
//!
//! Everything here is matrix-free on `n × n` amplitude grids. Spectral
//! functions of `W` are applied through the busy subspace
//! `B = col(T) + S·col(T)` plus a closed-form treatment of its complement,
//! where `W = −S`.
//!
//! The busy subspace is organized by the discriminant `D = T†ST`: every
//! eigenvector `v` of `D` with eigenvalue `λ ∈ (−1, 1)` spans the invariant
//! plane `{Tv, STv}` on which `W` has eigenvalues `e^{±i arccos λ}`. The
//! stationary vector (`λ = 1`) contributes the single fixed point
//! `ψ = T√π`, and an eigenvalue `λ = −1` contributes one phase-`π` line.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::ops::{Add, AddAssign, Mul, Sub};

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::MarkovChain;

pub type C64 = Complex<f64>;

/// Chains with `δ` at or below this are rejected by [`WalkSpectrum::new`].
pub const MIN_SPECTRAL_GAP: f64 = 1e-12;
/// Eigenphases this close to 0 are snapped to exactly 0.
pub const PHASE_SNAP: f64 = 1e-12;
/// Largest chain accepted by [`dense_walk_matrix`].
pub const DENSE_WALK_LIMIT: usize = 16;

const ZERO: C64 = C64::new(0.0, 0.0);

/// A vector in `C^n ⊗ C^n`, stored row-major: entry `(x, y)` at `x * n + y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedVector {
    n: usize,
    amps: Vec<C64>,
}

impl LiftedVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            amps: vec![ZERO; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut amps = Vec::with_capacity(n * n);
        for x in 0..n {
            for y in 0..n {
                amps.push(f(x, y));
            }
        }
        Self { n, amps }
    }

    pub fn basis(n: usize, x: usize, y: usize) -> Self {
        let mut v = Self::zeros(n);
        v.amps[x * n + y] = C64::new(1.0, 0.0);
        v
    }

    /// Normalized vector with independent uniform real and imaginary parts.
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        let mut v = Self::from_fn(n, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let norm = v.norm();
        v.scale(C64::new(1.0 / norm, 0.0));
        v
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> C64 {
        self.amps[x * self.n + y]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: C64) {
        self.amps[x * self.n + y] = v;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.amps
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn row(&self, x: usize) -> &[C64] {
        &self.amps[x * self.n..(x + 1) * self.n]
    }

    pub fn row_mut(&mut self, x: usize) -> &mut [C64] {
        let n = self.n;
        &mut self.amps[x * n..(x + 1) * n]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        debug_assert_eq!(self.n, other.n);
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&mut self, c: C64) {
        for a in &mut self.amps {
            *a *= c;
        }
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: C64, other: &Self) {
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += c * b;
        }
    }

    /// The swap operator `S|x,y⟩ = |y,x⟩`, i.e. the grid transpose.
    pub fn swapped(&self) -> Self {
        Self::from_fn(self.n, |x, y| self.get(y, x))
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Debug dump as a row-major grid of `[re, im]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.n)
            .map(|x| self.row(x).iter().map(|a| [a.re, a.im]).collect())
            .collect();
        serde_json::json!({ "n": self.n, "amplitudes": rows })
    }
}

impl Add for &LiftedVector {
    type Output = LiftedVector;
    fn add(self, rhs: Self) -> LiftedVector {
        let mut out = self.clone();
        out.axpy(C64::new(1.0, 0.0), rhs);
        out
    }
}

impl Sub for &LiftedVector {
    type Output = LiftedVector;
    fn sub(self, rhs: Self) -> LiftedVector {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), rhs);
        out
    }
}

impl AddAssign<&LiftedVector> for LiftedVector {
    fn add_assign(&mut self, rhs: &LiftedVector) {
        self.axpy(C64::new(1.0, 0.0), rhs);
    }
}

impl Mul<C64> for &LiftedVector {
    type Output = LiftedVector;
    fn mul(self, c: C64) -> LiftedVector {
        let mut out = self.clone();
        out.scale(c);
        out
    }
}

fn sqrt_transition(chain: &MarkovChain) -> DMatrix<f64> {
    chain.transition().map(f64::sqrt)
}

/// `T v`: amplitudes `v(x) √P(x,y)`.
pub fn lift_state(chain: &MarkovChain, v: &[C64]) -> LiftedVector {
    lift_with(&sqrt_transition(chain), v)
}

/// `T† u`: `v(x) = Σ_y √P(x,y) u(x,y)`.
pub fn unlift_state(chain: &MarkovChain, u: &LiftedVector) -> Vec<C64> {
    unlift_with(&sqrt_transition(chain), u)
}

/// `W u = (2TT† − I) S u`, in `O(n²)`.
pub fn apply_walk(chain: &MarkovChain, u: &LiftedVector) -> LiftedVector {
    walk_with(&sqrt_transition(chain), u)
}

fn lift_with(sqrt_p: &DMatrix<f64>, v: &[C64]) -> LiftedVector {
    let n = sqrt_p.nrows();
    LiftedVector::from_fn(n, |x, y| v[x] * sqrt_p[(x, y)])
}

fn unlift_with(sqrt_p: &DMatrix<f64>, u: &LiftedVector) -> Vec<C64> {
    let n = sqrt_p.nrows();
    (0..n)
        .map(|x| {
            u.row(x)
                .iter()
                .enumerate()
                .map(|(y, a)| a * sqrt_p[(x, y)])
                .sum()
        })
        .collect()
}

// T†S u without materializing S u.
fn unlift_swapped_with(sqrt_p: &DMatrix<f64>, u: &LiftedVector) -> Vec<C64> {
    let n = sqrt_p.nrows();
    (0..n)
        .map(|x| (0..n).map(|y| u.get(y, x) * sqrt_p[(x, y)]).sum())
        .collect()
}

fn walk_with(sqrt_p: &DMatrix<f64>, u: &LiftedVector) -> LiftedVector {
    let n = sqrt_p.nrows();
    let mut s = u.swapped();
    for x in 0..n {
        let row = s.row_mut(x);
        let c: C64 = row
            .iter()
            .enumerate()
            .map(|(y, a)| a * sqrt_p[(x, y)])
            .sum();
        for (y, a) in row.iter_mut().enumerate() {
            *a = 2.0 * c * sqrt_p[(x, y)] - *a;
        }
    }
    s
}

/// How one discriminant eigenvector sits inside the busy subspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModeKind {
    /// `λ = 1`: `Tv = STv = ψ`, eigenphase 0.
    Stationary,
    /// `λ = −1`: `Tv = −STv`, eigenphase π.
    Antipodal,
    /// `λ ∈ (−1, 1)`: a plane with eigenphases `±arccos λ`.
    Pair,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminantMode {
    pub lambda: f64,
    /// `√(1 − λ²)`, zero for the one-dimensional kinds.
    pub sin: f64,
    pub kind: ModeKind,
}

/// A busy-subspace eigenvector of `W`, expressed in the orthonormal
/// coordinates `(e1, e2)` of its mode, where `e1 = Tv` and
/// `e2 = (STv − λTv)/√(1 − λ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusyEigenvector {
    pub mode: usize,
    pub phase: f64,
    pub coords: [C64; 2],
}

/// Coordinates of a vector in the eigenbasis of `W`: one complex
/// coefficient per busy eigenvector plus the two complement sectors,
/// which are kept as vectors.
#[derive(Debug, Clone)]
pub struct SpectralCoefficients {
    pub busy: Vec<C64>,
    /// Swap-symmetric part of the complement of `B` (`W = −1`, phase π).
    pub symmetric: LiftedVector,
    /// Swap-antisymmetric part of the complement of `B` (`W = +1`, phase 0).
    pub antisymmetric: LiftedVector,
}

/// Spectral data of the walk for one chain.
#[derive(Debug, Clone)]
pub struct WalkSpectrum {
    chain: MarkovChain,
    sqrt_p: DMatrix<f64>,
    /// Columns are orthonormal eigenvectors of the discriminant.
    modes_basis: DMatrix<f64>,
    modes: Vec<DiscriminantMode>,
    busy: Vec<BusyEigenvector>,
    phase_gap: f64,
    psi: LiftedVector,
}

impl WalkSpectrum {
    pub fn new(chain: &MarkovChain) -> Result<Self> {
        let delta = chain.delta();
        if !(delta > MIN_SPECTRAL_GAP) {
            return Err(Error::GapTooSmall { delta });
        }
        let n = chain.n();
        let sqrt_p = sqrt_transition(chain);
        let eig = SymmetricEigen::new(chain.discriminant());

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let sqrt_pi = chain.qsample();
        let mut modes_basis = DMatrix::zeros(n, n);
        let mut modes = Vec::with_capacity(n);
        for (k, &src) in order.iter().enumerate() {
            let lambda = eig.eigenvalues[src].clamp(-1.0, 1.0);
            let kind = if k == 0 {
                let overlap = eig.eigenvectors.column(src).dot(&sqrt_pi).abs();
                if (overlap - 1.0).abs() > 1e-10 || (lambda - 1.0).abs() > 1e-10 {
                    return Err(Error::Structural(format!(
                        "leading discriminant mode (λ = {lambda}) does not match √π (overlap {overlap})"
                    )));
                }
                ModeKind::Stationary
            } else if lambda >= 1.0 - MIN_SPECTRAL_GAP {
                return Err(Error::Structural(
                    "more than one unit discriminant eigenvalue: chain is not ergodic".into(),
                ));
            } else if lambda <= -1.0 + MIN_SPECTRAL_GAP {
                ModeKind::Antipodal
            } else {
                ModeKind::Pair
            };
            let (lambda, sin) = match kind {
                ModeKind::Stationary => (1.0, 0.0),
                ModeKind::Antipodal => (-1.0, 0.0),
                ModeKind::Pair => (lambda, (1.0 - lambda * lambda).sqrt()),
            };
            if kind == ModeKind::Stationary {
                modes_basis.set_column(k, &sqrt_pi);
            } else {
                modes_basis.set_column(k, &eig.eigenvectors.column(src));
            }
            modes.push(DiscriminantMode { lambda, sin, kind });
        }

        let mut busy = Vec::with_capacity(2 * n);
        let one = C64::new(1.0, 0.0);
        for (k, m) in modes.iter().enumerate() {
            match m.kind {
                ModeKind::Stationary => busy.push(BusyEigenvector {
                    mode: k,
                    phase: 0.0,
                    coords: [one, ZERO],
                }),
                ModeKind::Antipodal => busy.push(BusyEigenvector {
                    mode: k,
                    phase: PI,
                    coords: [one, ZERO],
                }),
                ModeKind::Pair => {
                    let mut theta = m.lambda.acos();
                    if theta.abs() < PHASE_SNAP {
                        theta = 0.0;
                    }
                    let h = FRAC_1_SQRT_2;
                    busy.push(BusyEigenvector {
                        mode: k,
                        phase: theta,
                        coords: [C64::new(0.0, -h), C64::new(h, 0.0)],
                    });
                    busy.push(BusyEigenvector {
                        mode: k,
                        phase: -theta,
                        coords: [C64::new(0.0, h), C64::new(h, 0.0)],
                    });
                }
            }
        }

        // The complement's symmetric sector (phase π) is non-empty for n ≥ 2,
        // so π caps the gap.
        let phase_gap = busy
            .iter()
            .map(|b| b.phase.abs())
            .filter(|t| *t > 0.0)
            .fold(PI, f64::min);

        let psi = lift_with(&sqrt_p, &to_complex(&sqrt_pi));
        Ok(Self {
            chain: chain.clone(),
            sqrt_p,
            modes_basis,
            modes,
            busy,
            phase_gap,
            psi,
        })
    }

    pub fn chain(&self) -> &MarkovChain {
        &self.chain
    }

    pub fn n(&self) -> usize {
        self.chain.n()
    }

    pub fn phase_gap(&self) -> f64 {
        self.phase_gap
    }

    /// `ψ = T|π⟩`.
    pub fn psi(&self) -> &LiftedVector {
        &self.psi
    }

    pub fn modes(&self) -> &[DiscriminantMode] {
        &self.modes
    }

    pub fn busy_eigenvectors(&self) -> &[BusyEigenvector] {
        &self.busy
    }

    pub fn busy_phases(&self) -> Vec<f64> {
        self.busy.iter().map(|b| b.phase).collect()
    }

    pub fn busy_dim(&self) -> usize {
        self.busy.len()
    }

    /// Dimensions of the complement's (symmetric, antisymmetric) sectors.
    pub fn complement_dims(&self) -> (usize, usize) {
        let n = self.n();
        let antipodal = self
            .modes
            .iter()
            .filter(|m| m.kind == ModeKind::Antipodal)
            .count();
        // B ∩ Sym is spanned by Tv + STv over non-antipodal modes; B ∩ Anti
        // by Tv − STv over non-stationary modes.
        let sym = n * (n + 1) / 2 - (n - antipodal);
        let anti = n * (n - 1) / 2 - (n - 1);
        (sym, anti)
    }

    pub fn lift(&self, v: &[C64]) -> LiftedVector {
        lift_with(&self.sqrt_p, v)
    }

    pub fn unlift(&self, u: &LiftedVector) -> Vec<C64> {
        unlift_with(&self.sqrt_p, u)
    }

    pub fn apply_walk(&self, u: &LiftedVector) -> LiftedVector {
        walk_with(&self.sqrt_p, u)
    }

    fn mode_vector(&self, k: usize) -> Vec<C64> {
        to_complex(&self.modes_basis.column(k).into_owned())
    }

    /// The orthonormal busy basis: `e1` for every mode, `e2` for every
    /// pair mode.
    pub fn busy_basis(&self) -> Vec<LiftedVector> {
        let mut out = Vec::with_capacity(self.busy.len());
        for (k, m) in self.modes.iter().enumerate() {
            let v = self.mode_vector(k);
            let tv = self.lift(&v);
            if m.kind == ModeKind::Pair {
                let stv = tv.swapped();
                let mut e2 = &stv - &(&tv * C64::new(m.lambda, 0.0));
                e2.scale(C64::new(1.0 / m.sin, 0.0));
                out.push(tv);
                out.push(e2);
            } else {
                out.push(tv);
            }
        }
        out
    }

    /// Materializes busy eigenvector `i` as a lifted vector.
    pub fn busy_eigenvector(&self, i: usize) -> LiftedVector {
        let mut coeffs = vec![ZERO; self.busy.len()];
        coeffs[i] = C64::new(1.0, 0.0);
        self.recompose_busy(&coeffs)
    }

    /// `W` restricted to `B` in the basis returned by [`Self::busy_basis`].
    pub fn restricted_walk_matrix(&self) -> DMatrix<C64> {
        let basis = self.busy_basis();
        let images: Vec<LiftedVector> = basis.iter().map(|b| self.apply_walk(b)).collect();
        let d = basis.len();
        DMatrix::from_fn(d, d, |i, j| basis[i].inner(&images[j]))
    }

    /// Splits `u` into busy eigen-coefficients and the two complement
    /// sectors.
    pub fn decompose(&self, u: &LiftedVector) -> SpectralCoefficients {
        let a = self.unlift(u);
        let b = unlift_swapped_with(&self.sqrt_p, u);
        let ak = self.to_modes(&a);
        let bk = self.to_modes(&b);

        let mut busy = Vec::with_capacity(self.busy.len());
        for ev in &self.busy {
            let m = &self.modes[ev.mode];
            let c1 = ak[ev.mode];
            let c2 = match m.kind {
                ModeKind::Pair => (bk[ev.mode] - m.lambda * ak[ev.mode]) / m.sin,
                _ => ZERO,
            };
            busy.push(ev.coords[0].conj() * c1 + ev.coords[1].conj() * c2);
        }

        let projected = self.recompose_busy(&busy);
        let rest = u - &projected;
        let swapped = rest.swapped();
        let mut symmetric = &rest + &swapped;
        symmetric.scale(C64::new(0.5, 0.0));
        let mut antisymmetric = &rest - &swapped;
        antisymmetric.scale(C64::new(0.5, 0.0));
        SpectralCoefficients {
            busy,
            symmetric,
            antisymmetric,
        }
    }

    pub fn recompose(&self, coeffs: &SpectralCoefficients) -> LiftedVector {
        let mut out = self.recompose_busy(&coeffs.busy);
        out += &coeffs.symmetric;
        out += &coeffs.antisymmetric;
        out
    }

    fn recompose_busy(&self, busy: &[C64]) -> LiftedVector {
        let n = self.n();
        let mut c1 = vec![ZERO; n];
        let mut c2 = vec![ZERO; n];
        for (ev, c) in self.busy.iter().zip(busy) {
            c1[ev.mode] += ev.coords[0] * c;
            c2[ev.mode] += ev.coords[1] * c;
        }
        // c1·e1 + c2·e2 = T v (c1 − λ c2 / s) + S T v (c2 / s)
        let mut alpha = vec![ZERO; n];
        let mut gamma = vec![ZERO; n];
        for (k, m) in self.modes.iter().enumerate() {
            match m.kind {
                ModeKind::Pair => {
                    alpha[k] = c1[k] - m.lambda * c2[k] / m.sin;
                    gamma[k] = c2[k] / m.sin;
                }
                _ => alpha[k] = c1[k],
            }
        }
        let direct = self.from_modes(&alpha);
        let swapped = self.from_modes(&gamma);
        LiftedVector::from_fn(n, |x, y| {
            direct[x] * self.sqrt_p[(x, y)] + swapped[y] * self.sqrt_p[(y, x)]
        })
    }

    fn to_modes(&self, v: &[C64]) -> Vec<C64> {
        let n = self.n();
        (0..n)
            .map(|k| {
                self.modes_basis
                    .column(k)
                    .iter()
                    .zip(v)
                    .map(|(b, a)| a * *b)
                    .sum()
            })
            .collect()
    }

    fn from_modes(&self, c: &[C64]) -> Vec<C64> {
        let n = self.n();
        let mut out = vec![ZERO; n];
        for (k, ck) in c.iter().enumerate() {
            if *ck == ZERO {
                continue;
            }
            for (x, o) in out.iter_mut().enumerate() {
                *o += ck * self.modes_basis[(x, k)];
            }
        }
        out
    }

    /// `f(W) u` for a scalar function of the eigenphase.
    pub fn apply_spectral_function(&self, f: impl Fn(f64) -> C64, u: &LiftedVector) -> LiftedVector {
        let mut c = self.decompose(u);
        for (coef, ev) in c.busy.iter_mut().zip(&self.busy) {
            *coef *= f(ev.phase);
        }
        c.symmetric.scale(f(PI));
        c.antisymmetric.scale(f(0.0));
        self.recompose(&c)
    }

    /// `f(W)` applied blockwise to a pair of vectors, `f` returning a 2×2
    /// matrix per eigenphase: `(u0', u1') = Σ_θ f(θ) (Π_θ u0, Π_θ u1)`.
    pub fn apply_block_function(
        &self,
        f: impl Fn(f64) -> [[C64; 2]; 2],
        u0: &LiftedVector,
        u1: &LiftedVector,
    ) -> (LiftedVector, LiftedVector) {
        let mut c0 = self.decompose(u0);
        let mut c1 = self.decompose(u1);
        for ((a, b), ev) in c0.busy.iter_mut().zip(c1.busy.iter_mut()).zip(&self.busy) {
            let m = f(ev.phase);
            let (x, y) = (*a, *b);
            *a = m[0][0] * x + m[0][1] * y;
            *b = m[1][0] * x + m[1][1] * y;
        }
        for (theta, s0, s1) in [
            (PI, &mut c0.symmetric, &mut c1.symmetric),
            (0.0, &mut c0.antisymmetric, &mut c1.antisymmetric),
        ] {
            let m = f(theta);
            let x = s0.clone();
            let y = s1.clone();
            *s0 = &(&x * m[0][0]) + &(&y * m[0][1]);
            *s1 = &(&x * m[1][0]) + &(&y * m[1][1]);
        }
        (self.recompose(&c0), self.recompose(&c1))
    }
}

fn to_complex(v: &DVector<f64>) -> Vec<C64> {
    v.iter().map(|x| C64::new(*x, 0.0)).collect()
}

/// Explicit `n² × n²` matrix of `W`, built from `T` and `S` as dense
/// matrices. Index `(x, y)` maps to `x * n + y`.
pub fn dense_walk_matrix(chain: &MarkovChain) -> Result<DMatrix<f64>> {
    let n = chain.n();
    if n > DENSE_WALK_LIMIT {
        return Err(Error::SizeGuard {
            what: "dense walk matrix",
            n,
            limit: DENSE_WALK_LIMIT,
        });
    }
    let nn = n * n;
    let p = chain.transition();
    let t = DMatrix::from_fn(nn, n, |row, col| {
        let (x, y) = (row / n, row % n);
        if x == col {
            p[(x, y)].sqrt()
        } else {
            0.0
        }
    });
    let s = DMatrix::from_fn(nn, nn, |row, col| {
        let (x, y) = (row / n, row % n);
        if col == y * n + x {
            1.0
        } else {
            0.0
        }
    });
    let reflection = 2.0 * &t * t.transpose() - DMatrix::identity(nn, nn);
    Ok(reflection * s)
}

/// Eigenphase magnitudes `|θ|` of a real orthogonal matrix, read off the
/// spectrum `cos θ` of its symmetric part. Used as the dense oracle for
/// walk spectra.
pub fn dense_phase_magnitudes(w: &DMatrix<f64>) -> Vec<f64> {
    let sym = (w + w.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .map(|c| c.clamp(-1.0, 1.0).acos())
        .collect()
}
