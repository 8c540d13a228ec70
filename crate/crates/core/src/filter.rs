//! Chebyshev gap filter `Υ(θ) = T_d(m(cos θ)) / T_d(m(1))`.
//!
//! `m(c) = (2c + 1 − cos Δ)/(1 + cos Δ)` sends `[−1, cos Δ]` onto `[−1, 1]`,
//! so `|Υ| ≤ 1/T_d(m(1))` whenever `|θ| ≥ Δ`, while `Υ(0) = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `1 + cos Δ` below this is treated as `Δ = π`.
const ANTIPODAL_TOL: f64 = 1e-14;
/// Hard ceiling on the synthesized degree.
pub const MAX_FILTER_DEGREE: u32 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevFilter {
    #[serde(rename = "Delta")]
    pub delta: f64,
    pub eps_target: f64,
    pub d: u32,
    pub achieved_eps: f64,
    #[serde(skip)]
    pub m1: f64,
}

/// Chebyshev polynomial `T_d(x)` on the whole real line.
pub fn chebyshev_t(d: u32, x: f64) -> f64 {
    let df = f64::from(d);
    if x.abs() <= 1.0 {
        (df * x.acos()).cos()
    } else if x > 1.0 {
        (df * x.acosh()).cosh()
    } else if d % 2 == 0 {
        (df * (-x).acosh()).cosh()
    } else {
        -(df * (-x).acosh()).cosh()
    }
}

/// `T_d(m1) ≥ 1/eps` certified in log form (`ln T_d(m1)` for `m1 > 1`).
fn ln_chebyshev_above_one(d: u32, m1: f64) -> f64 {
    let a = f64::from(d) * m1.acosh();
    // ln cosh a = a + ln(1 + e^{−2a}) − ln 2
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl ChebyshevFilter {
    pub fn synthesize(delta: f64, eps: f64) -> Result<Self> {
        synthesize_filter(delta, eps)
    }

    fn antipodal(&self) -> bool {
        self.m1.is_infinite()
    }

    fn map(&self, c: f64) -> f64 {
        let cd = self.delta.cos();
        (2.0 * c + 1.0 - cd) / (1.0 + cd)
    }

    /// `Υ(θ)`, real and even in `θ`.
    pub fn eval(&self, theta: f64) -> f64 {
        if self.antipodal() {
            return (1.0 + theta.cos()) / 2.0;
        }
        let x = self.map(theta.cos());
        if x <= 1.0 {
            // Numerator bounded by 1 in magnitude.
            return chebyshev_t(self.d, x.max(-1.0)) * self.achieved_eps;
        }
        let x = x.min(self.m1);
        let a = f64::from(self.d) * x.acosh();
        let b = f64::from(self.d) * self.m1.acosh();
        // cosh a / cosh b without overflow.
        (a - b).exp() * (1.0 + (-2.0 * a).exp()) / (1.0 + (-2.0 * b).exp())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("filter serializes")
    }
}

pub fn synthesize_filter(delta: f64, eps: f64) -> Result<ChebyshevFilter> {
    if !(delta > 0.0 && delta <= std::f64::consts::PI + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "filter gap must lie in (0, π], got {delta}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "filter attenuation must lie in (0, 1), got {eps}"
        )));
    }
    let cd = delta.cos();
    if 1.0 + cd < ANTIPODAL_TOL {
        // Every nonzero phase is π: (1 + cos θ)/2 vanishes there exactly.
        return Ok(ChebyshevFilter {
            delta,
            eps_target: eps,
            d: 1,
            achieved_eps: 0.0,
            m1: f64::INFINITY,
        });
    }
    let m1 = (3.0 - cd) / (1.0 + cd);
    let target = (1.0 / eps).ln();
    let mut d = ((1.0 / eps).acosh() / m1.acosh()).ceil().max(1.0) as u32;
    while d > 1 && ln_chebyshev_above_one(d - 1, m1) >= target {
        d -= 1;
    }
    while ln_chebyshev_above_one(d, m1) < target {
        d += 1;
        if d > MAX_FILTER_DEGREE {
            return Err(Error::NumericFailure(format!(
                "filter degree exceeds {MAX_FILTER_DEGREE} for Δ = {delta}, eps = {eps}"
            )));
        }
    }
    let achieved_eps = (-ln_chebyshev_above_one(d, m1)).exp().min(eps);
    Ok(ChebyshevFilter {
        delta,
        eps_target: eps,
        d,
        achieved_eps,
        m1,
    })
}

pub fn eval_filter(filter: &ChebyshevFilter, theta: f64) -> f64 {
    filter.eval(theta)
}

/// Degrees for a sweep of attenuations at a fixed gap.
pub fn filter_degree_curve(delta: f64, eps_list: &[f64]) -> Result<Vec<(f64, u32)>> {
    eps_list
        .iter()
        .map(|&e| synthesize_filter(delta, e).map(|f| (e, f.d)))
        .collect()
}
