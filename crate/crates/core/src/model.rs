//! Normalized PVTOL dynamics and the flat-output normal form.
//!
//! The plant is
//!
//! ```text
//! ẍ = ε τ cosθ − f sinθ
//! ÿ = ε τ sinθ + f cosθ − g
//! θ̈ = τ
//! ```
//!
//! Shifting the outputs to `x̂ = x − ε sinθ`, `ŷ = y + ε(cosθ − 1)` removes the
//! rolling moment from their second derivatives. Extending the plant with two
//! integrators on `f̂ = f − ε θ̇²` gives a system whose outputs have relative
//! degree four each, with normal form `ż = Φ + Γ û`, `û = (f̂̈, τ)`.

use nalgebra::{Matrix2, Vector2};

use crate::{Error, Matrix8x2, Result, Vector8};

/// Normalized plant parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// Coupling between rolling moment and lateral acceleration.
    pub epsilon: f64,
    pub gravity: f64,
}

impl PlantParams {
    pub fn new(epsilon: f64, gravity: f64) -> Result<Self> {
        let p = Self { epsilon, gravity };
        p.validate()?;
        Ok(p)
    }

    /// ε = 1, g = 9.81.
    pub fn nominal() -> Self {
        Self {
            epsilon: 1.0,
            gravity: 9.81,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Domain {
                name: "epsilon",
                reason: format!("must be finite and >= 0, got {}", self.epsilon),
            });
        }
        if !(self.gravity.is_finite() && self.gravity > 0.0) {
            return Err(Error::Domain {
                name: "gravity",
                reason: format!("must be finite and > 0, got {}", self.gravity),
            });
        }
        Ok(())
    }
}

impl Default for PlantParams {
    fn default() -> Self {
        Self::nominal()
    }
}

/// Physical vehicle parameters in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionalParams {
    pub mass: f64,
    pub inertia: f64,
    /// Moment arm of the lateral force `F1`.
    pub arm: f64,
    pub gravity: f64,
}

impl DimensionalParams {
    pub fn new(mass: f64, inertia: f64, arm: f64, gravity: f64) -> Result<Self> {
        for (name, v) in [
            ("mass", mass),
            ("inertia", inertia),
            ("arm", arm),
            ("gravity", gravity),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        Ok(Self {
            mass,
            inertia,
            arm,
            gravity,
        })
    }

    /// ε = J / (m r).
    pub fn normalize(&self) -> PlantParams {
        PlantParams {
            epsilon: self.inertia / (self.mass * self.arm),
            gravity: self.gravity,
        }
    }

    /// Maps the lateral force `F1` and main thrust `F2` to `(f, τ)`.
    pub fn normalize_input(&self, lateral_force: f64, thrust: f64) -> PlantInput {
        PlantInput {
            f: thrust / self.mass,
            tau: self.arm * lateral_force / self.inertia,
        }
    }
}

/// Physical state. `theta` is never wrapped.
///
/// The same layout doubles as the time derivative returned by [`plant_deriv`],
/// where each field holds the rate of the corresponding state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub xdot: f64,
    pub ydot: f64,
    pub thetadot: f64,
}

impl PlantState {
    pub fn at_rest(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            ..Self::default()
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.x,
            self.y,
            self.theta,
            self.xdot,
            self.ydot,
            self.thetadot,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            x: a[0],
            y: a[1],
            theta: a[2],
            xdot: a[3],
            ydot: a[4],
            thetadot: a[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Normalized plant input: thrust `f = F2/m` and rolling moment `τ = r F1 / J`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantInput {
    pub f: f64,
    pub tau: f64,
}

/// Dynamic extension states `(f̂, ḟ̂)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompensatorState {
    pub fhat: f64,
    pub fhatdot: f64,
}

impl CompensatorState {
    /// `(g, 0)`, the hover equilibrium of the extension.
    pub fn hover(p: &PlantParams) -> Self {
        Self {
            fhat: p.gravity,
            fhatdot: 0.0,
        }
    }
}

/// `z = [x̂, x̂′, x̂″, x̂‴, ŷ, ŷ′, ŷ″, ŷ‴]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormState(pub Vector8);

impl NormalFormState {
    pub fn zeros() -> Self {
        Self(Vector8::zeros())
    }

    pub fn as_vector(&self) -> &Vector8 {
        &self.0
    }
}

/// Normalized plant vector field. The returned state holds
/// `(ẋ, ẏ, θ̇, ẍ, ÿ, θ̈)` in the `(x, y, theta, xdot, ydot, thetadot)` slots.
pub fn plant_deriv(s: &PlantState, u: &PlantInput, p: &PlantParams) -> PlantState {
    let (sin, cos) = s.theta.sin_cos();
    PlantState {
        x: s.xdot,
        y: s.ydot,
        theta: s.thetadot,
        xdot: p.epsilon * u.tau * cos - u.f * sin,
        ydot: p.epsilon * u.tau * sin + u.f * cos - p.gravity,
        thetadot: u.tau,
    }
}

/// Matrix multiplying `(f, τ)` in `(ẍ, ÿ)`. Its determinant is `−ε`.
pub fn decoupling_matrix(theta: f64, p: &PlantParams) -> Matrix2<f64> {
    let (sin, cos) = theta.sin_cos();
    Matrix2::new(-sin, p.epsilon * cos, cos, p.epsilon * sin)
}

/// Static linearizing input making `(ẍ, ÿ) = v`. Leaves the attitude to the
/// (unstable) zero dynamics.
pub fn static_fbl(theta: f64, v: &Vector2<f64>, p: &PlantParams) -> Result<PlantInput> {
    if p.epsilon == 0.0 {
        return Err(Error::SingularCoupling);
    }
    let (sin, cos) = theta.sin_cos();
    let v2g = v.y + p.gravity;
    Ok(PlantInput {
        f: -sin * v.x + cos * v2g,
        tau: (cos * v.x + sin * v2g) / p.epsilon,
    })
}

/// Zero dynamics `θ̈ = (g/ε) sinθ`, returned as `(θ̇, θ̈)`.
pub fn zero_dynamics_deriv(theta: f64, thetadot: f64, p: &PlantParams) -> Result<(f64, f64)> {
    if p.epsilon == 0.0 {
        return Err(Error::SingularCoupling);
    }
    Ok((thetadot, p.gravity / p.epsilon * theta.sin()))
}

/// Transformed outputs and their first derivatives, `(x̂, ŷ, x̂′, ŷ′)`.
pub fn to_transformed(s: &PlantState, p: &PlantParams) -> (f64, f64, f64, f64) {
    let (sin, cos) = s.theta.sin_cos();
    let eps = p.epsilon;
    (
        s.x - eps * sin,
        s.y + eps * (cos - 1.0),
        s.xdot - eps * s.thetadot * cos,
        s.ydot - eps * s.thetadot * sin,
    )
}

pub fn lift_to_normal_form(
    s: &PlantState,
    c: &CompensatorState,
    p: &PlantParams,
) -> NormalFormState {
    let (xh, yh, xh1, yh1) = to_transformed(s, p);
    let (sin, cos) = s.theta.sin_cos();
    let (fh, fhd, w) = (c.fhat, c.fhatdot, s.thetadot);
    NormalFormState(Vector8::from([
        xh,
        xh1,
        -fh * sin,
        -fhd * sin - fh * w * cos,
        yh,
        yh1,
        fh * cos - p.gravity,
        fhd * cos - fh * w * sin,
    ]))
}

/// Drift `Φ` and input matrix `Γ` of the normal form.
pub fn normal_form_fields(
    s: &PlantState,
    c: &CompensatorState,
    p: &PlantParams,
) -> (Vector8, Matrix8x2) {
    let z = lift_to_normal_form(s, c, p).0;
    fields_from_parts(&z, s.theta, s.thetadot, c.fhat, c.fhatdot)
}

/// `Φ`, `Γ` given the lifted `z` and the attitude / extension states they
/// depend on. Shared by the physical-plant and the direct normal-form paths.
pub(crate) fn fields_from_parts(
    z: &Vector8,
    theta: f64,
    thetadot: f64,
    fhat: f64,
    fhatdot: f64,
) -> (Vector8, Matrix8x2) {
    let (sin, cos) = theta.sin_cos();
    let w2 = thetadot * thetadot;
    let phi = Vector8::from([
        z[1],
        z[2],
        z[3],
        fhat * w2 * sin - 2.0 * fhatdot * thetadot * cos,
        z[5],
        z[6],
        z[7],
        -fhat * w2 * cos - 2.0 * fhatdot * thetadot * sin,
    ]);
    let mut gamma = Matrix8x2::zeros();
    gamma[(3, 0)] = -sin;
    gamma[(3, 1)] = -fhat * cos;
    gamma[(7, 0)] = cos;
    gamma[(7, 1)] = -fhat * sin;
    (phi, gamma)
}

/// Rows 4 and 8 of `Γ`; `det G = f̂`.
pub fn input_block(gamma: &Matrix8x2) -> Matrix2<f64> {
    Matrix2::new(
        gamma[(3, 0)],
        gamma[(3, 1)],
        gamma[(7, 0)],
        gamma[(7, 1)],
    )
}

/// Rows 4 and 8 of `Φ`.
pub fn drift_block(phi: &Vector8) -> Vector2<f64> {
    Vector2::new(phi[3], phi[7])
}

/// `f = f̂ + ε θ̇²`, with `τ` passed through.
pub fn recover_plant_input(
    c: &CompensatorState,
    s: &PlantState,
    tau: f64,
    p: &PlantParams,
) -> PlantInput {
    PlantInput {
        f: c.fhat + p.epsilon * s.thetadot * s.thetadot,
        tau,
    }
}

/// Attitude and extension states recovered from `z` alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormAttitude {
    /// Principal value in `(−π, π]`.
    pub theta: f64,
    pub thetadot: f64,
    pub fhat: f64,
    pub fhatdot: f64,
}

/// Inverts the lift on the `f̂ > 0` branch: `(z3, z7 + g) = f̂(−sinθ, cosθ)`
/// fixes `(f̂, θ)`, and `(z4, z8) = G (ḟ̂, θ̇)` with the same `G` as the input
/// block fixes the rates.
pub fn attitude_from_normal_form(z: &Vector8, p: &PlantParams) -> Result<NormalFormAttitude> {
    let a = -z[2];
    let b = z[6] + p.gravity;
    let fhat = a.hypot(b);
    if !(fhat > 0.0) {
        return Err(Error::SingularThrust {
            fhat,
            floor: 0.0,
        });
    }
    let theta = a.atan2(b);
    let (sin, cos) = theta.sin_cos();
    // G = [[-s, -f c], [c, -f s]], G^{-1} = (1/f) [[-f s, f c], [-c, -s]]
    let fhatdot = -sin * z[3] + cos * z[7];
    let thetadot = (-cos * z[3] - sin * z[7]) / fhat;
    Ok(NormalFormAttitude {
        theta,
        thetadot,
        fhat,
        fhatdot,
    })
}
