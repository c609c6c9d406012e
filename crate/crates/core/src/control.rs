//! Controllers for the normal form `ż = Φ + Γû`.
//!
//! * Dynamic feedback linearization: `û = G⁻¹(−φ + v)`, `v = −K e`.
//! * Inverse optimal (Sontag) law on the CLF `V = ½ eᵀPe`:
//!   `û = −(c0 + λ)β` with `λ = (α + √(α² + b²)) / b`, `b = βᵀβ`,
//!   and `û = 0` when `β` vanishes.
//!
//! The helpers below also reconstruct the cost that the Sontag law minimizes
//! and the closed-form Lyapunov decrease it guarantees.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, SMatrix, Vector2};

use crate::clf::ClfEvaluation;
use crate::{Error, Result, Vector8};

/// `û = (f̂̈, τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    /// Second derivative of the transformed thrust.
    pub u1: f64,
    /// Rolling moment.
    pub u2: f64,
}

impl ControlCommand {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.u1, self.u2)
    }

    pub fn from_vector(v: &Vector2<f64>) -> Self {
        Self { u1: v.x, u2: v.y }
    }

    /// Applies the input-gain perturbation `diag(δ_f, δ_τ)`.
    pub fn scaled(&self, delta: (f64, f64)) -> Self {
        Self {
            u1: delta.0 * self.u1,
            u2: delta.1 * self.u2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControllerKind {
    /// Dynamic feedback linearization with pole-placement state feedback.
    Fbl,
    /// Sontag-formula inverse optimal law.
    InvOpt,
}

impl ControllerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::Fbl => "fbl",
            ControllerKind::InvOpt => "invopt",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fbl" => Ok(ControllerKind::Fbl),
            "invopt" => Ok(ControllerKind::InvOpt),
            other => Err(Error::Domain {
                name: "controller",
                reason: format!("expected `fbl` or `invopt`, got `{other}`"),
            }),
        }
    }
}

/// `K = I₂ ⊗ K0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FblGains {
    pub k0: [f64; 4],
}

impl FblGains {
    /// Places the single-channel poles at −1, −0.75 and −0.4 ± 0.3i.
    pub const PUBLISHED_K0: [f64; 4] = [0.1875, 1.0375, 2.4, 2.55];

    pub fn new(k0: [f64; 4]) -> Result<Self> {
        let g = Self { k0 };
        if !k0.iter().all(|k| k.is_finite()) {
            return Err(Error::Domain {
                name: "k0",
                reason: "gains must be finite".into(),
            });
        }
        if !routh_hurwitz_quartic(g.characteristic_polynomial())? {
            return Err(Error::Domain {
                name: "k0",
                reason: format!("closed loop with K0 = {k0:?} is not Hurwitz"),
            });
        }
        Ok(g)
    }

    /// `s⁴ + k4 s³ + k3 s² + k2 s + k1`, highest power first.
    pub fn characteristic_polynomial(&self) -> [f64; 5] {
        let k = self.k0;
        [1.0, k[3], k[2], k[1], k[0]]
    }

    pub fn k(&self) -> SMatrix<f64, 2, 8> {
        let mut k = SMatrix::<f64, 2, 8>::zeros();
        for (j, &kj) in self.k0.iter().enumerate() {
            k[(0, j)] = kj;
            k[(1, j + 4)] = kj;
        }
        k
    }
}

impl Default for FblGains {
    fn default() -> Self {
        Self {
            k0: Self::PUBLISHED_K0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SontagParams {
    pub c0: f64,
    /// Relative floor: `β` counts as zero when `b ≤ b_floor · (1 + eᵀe)`.
    pub b_floor: f64,
    /// Smallest `|f̂|` for which `G` is inverted.
    pub fhat_floor: f64,
}

impl SontagParams {
    pub fn new(c0: f64) -> Result<Self> {
        let p = Self {
            c0,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c0", self.c0),
            ("b_floor", self.b_floor),
            ("fhat_floor", self.fhat_floor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        Ok(())
    }

    /// Absolute threshold on `b` at error state `e`.
    pub fn beta_floor(&self, e: &Vector8) -> f64 {
        self.b_floor * (1.0 + e.norm_squared())
    }
}

impl Default for SontagParams {
    fn default() -> Self {
        Self {
            c0: 1.0,
            b_floor: 1e-12,
            fhat_floor: 1e-6,
        }
    }
}

/// Target for the transformed position `(x̂, ŷ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SetPoint {
    pub x_ref: f64,
    pub y_ref: f64,
}

/// `e = z − [x_ref, 0, 0, 0, y_ref, 0, 0, 0]`. `Φ` and `Γ` do not depend on
/// `z1`, `z5`, so `e` obeys the same normal form.
pub fn reference_shift(z: &Vector8, r: &SetPoint) -> Vector8 {
    let mut e = *z;
    e[0] -= r.x_ref;
    e[4] -= r.y_ref;
    e
}

/// `û = G⁻¹(−φ + v)`, `v = −K e`, where `φ`, `G` are rows 4 and 8 of `Φ`, `Γ`.
pub fn fbl_control(
    e: &Vector8,
    phi: &Vector2<f64>,
    g: &Matrix2<f64>,
    gains: &FblGains,
    fhat_floor: f64,
) -> Result<ControlCommand> {
    // det G = f̂
    let fhat = g.determinant();
    if !(fhat.abs() >= fhat_floor) {
        return Err(Error::SingularThrust {
            fhat,
            floor: fhat_floor,
        });
    }
    let v = -(gains.k() * e);
    let rhs = v - phi;
    // explicit 2×2 inverse keeps the result bit-reproducible
    let u1 = (g[(1, 1)] * rhs.x - g[(0, 1)] * rhs.y) / fhat;
    let u2 = (-g[(1, 0)] * rhs.x + g[(0, 0)] * rhs.y) / fhat;
    Ok(ControlCommand { u1, u2 })
}

/// `λ = (α + √(α² + b²)) / b`, evaluated without cancellation for `α < 0`.
/// Requires `b > 0`.
pub fn sontag_lambda(alpha: f64, b: f64) -> f64 {
    let r = alpha.hypot(b);
    if alpha >= 0.0 {
        (alpha + r) / b
    } else {
        b / (r - alpha)
    }
}

/// Sontag's formula; `b_floor` is the absolute threshold from
/// [`SontagParams::beta_floor`].
pub fn sontag_control(eval: &ClfEvaluation, params: &SontagParams, b_floor: f64) -> ControlCommand {
    if eval.b <= b_floor {
        return ControlCommand::zero();
    }
    let mu = params.c0 + sontag_lambda(eval.alpha, eval.b);
    ControlCommand::from_vector(&(-mu * eval.beta))
}

/// `μ = c0 + λ`, or `c0` on the zero branch. Always `≥ c0`.
pub fn mu_value(eval: &ClfEvaluation, params: &SontagParams, b_floor: f64) -> f64 {
    if eval.b <= b_floor {
        params.c0
    } else {
        params.c0 + sontag_lambda(eval.alpha, eval.b)
    }
}

/// `(μ/2) b + ûᵀû / (2μ)`.
pub fn cost_integrand(eval: &ClfEvaluation, u: &ControlCommand, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::Domain {
            name: "mu",
            reason: format!("must be > 0, got {mu}"),
        });
    }
    Ok(0.5 * mu * eval.b + u.as_vector().norm_squared() / (2.0 * mu))
}

/// State penalty reconstructed from the value function:
/// `Q = −α − ½ βᵀû`, which equals `−α + ½ μ b` under the Sontag law.
pub fn theorem2_q(eval: &ClfEvaluation, u: &ControlCommand) -> f64 {
    -eval.alpha - 0.5 * eval.beta.dot(&u.as_vector())
}

/// The tabulated state weight `½ μ βᵀβ`. Differs from [`theorem2_q`] by `α`;
/// kept for reporting only.
pub fn prop2_q(eval: &ClfEvaluation, mu: f64) -> f64 {
    0.5 * mu * eval.b
}

/// `V̇ = α + βᵀû = −c0 b − √(α² + b²)` under the Sontag law.
pub fn vdot_closed_form(eval: &ClfEvaluation, params: &SontagParams) -> f64 {
    -params.c0 * eval.b - eval.alpha.hypot(eval.b)
}

/// Routh–Hurwitz test for a real polynomial given highest power first.
///
/// A non-positive coefficient already rules out stability. Otherwise a zero
/// in the first column leaves the test inconclusive.
pub fn routh_hurwitz(coeffs: &[f64]) -> Result<bool> {
    match coeffs.first() {
        Some(&a0) if a0 > 0.0 => {}
        _ => {
            return Err(Error::Domain {
                name: "coeffs",
                reason: "leading coefficient must be > 0".into(),
            })
        }
    }
    if coeffs.iter().any(|&c| !(c > 0.0)) {
        return Ok(false);
    }
    let n = coeffs.len();
    let width = n.div_ceil(2);
    let mut rows: Vec<Vec<f64>> = vec![
        coeffs.iter().step_by(2).copied().collect(),
        coeffs.iter().skip(1).step_by(2).copied().collect(),
    ];
    for r in rows.iter_mut() {
        r.resize(width, 0.0);
    }
    for i in 2..n {
        let (above, prev) = (&rows[i - 2], &rows[i - 1]);
        let pivot = prev[0];
        if pivot == 0.0 {
            return Err(Error::RouthInconclusive(i - 1));
        }
        let mut row = vec![0.0; width];
        for j in 0..width - 1 {
            row[j] = (pivot * above[j + 1] - above[0] * prev[j + 1]) / pivot;
        }
        rows.push(row);
    }
    for (i, r) in rows.iter().enumerate() {
        if r[0] == 0.0 {
            return Err(Error::RouthInconclusive(i));
        }
        if r[0] < 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Routh–Hurwitz for `a0 s⁴ + a1 s³ + a2 s² + a3 s + a4`.
pub fn routh_hurwitz_quartic(coeffs: [f64; 5]) -> Result<bool> {
    routh_hurwitz(&coeffs)
}
