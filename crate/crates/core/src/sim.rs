//! Fixed-step closed-loop simulation.
//!
//! The integrated state is the physical plant, the dynamic extension
//! `(f̂, ḟ̂)` and the running cost `Ĵ`. A run is strictly sequential and
//! deterministic: the same [`SimConfig`] yields bit-identical records.

use crate::clf::{build_clf, evaluate_clf, ClfEvaluation, ClfMatrix};
use crate::control::{
    cost_integrand, fbl_control, mu_value, reference_shift, sontag_control, ControlCommand,
    ControllerKind, FblGains, SetPoint, SontagParams,
};
use crate::model::{
    attitude_from_normal_form, drift_block, fields_from_parts, input_block, lift_to_normal_form,
    plant_deriv, recover_plant_input, zero_dynamics_deriv, CompensatorState, PlantInput,
    PlantParams, PlantState,
};
use crate::{Error, Matrix8x2, Result, Vector8};

/// Any state component beyond this magnitude counts as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e9;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub plant: PlantParams,
    pub controller: ControllerKind,
    pub fbl: FblGains,
    pub sontag: SontagParams,
    /// CLF gains; also used to score FBL runs.
    pub kx: f64,
    pub ky: f64,
    pub setpoint: SetPoint,
    pub dt: f64,
    pub t_final: f64,
    /// Keep every `decimation`-th step (the final step is always kept).
    pub decimation: usize,
    /// RK4 substeps per `dt`. The inverse optimal loop has a fast mode near
    /// `−1250 μ δ_τ` rad/s, outside the RK4 stability region at `dt = 1e-3`.
    pub substeps: usize,
    /// Input-gain perturbation `(δ_f, δ_τ)`.
    pub delta: (f64, f64),
    pub initial_plant: PlantState,
    pub initial_compensator: CompensatorState,
}

impl Default for SimConfig {
    fn default() -> Self {
        let plant = PlantParams::nominal();
        Self {
            plant,
            controller: ControllerKind::InvOpt,
            fbl: FblGains::default(),
            sontag: SontagParams::default(),
            kx: 1.0,
            ky: 1.0,
            setpoint: SetPoint::default(),
            dt: 1e-3,
            t_final: 30.0,
            decimation: 10,
            substeps: 16,
            delta: (1.0, 1.0),
            initial_plant: PlantState::default(),
            initial_compensator: CompensatorState::hover(&plant),
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            reason: format!("must be finite and > 0, got {v}"),
        })
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.sontag.validate()?;
        positive("dt", self.dt)?;
        positive("t_final", self.t_final)?;
        positive("delta_f", self.delta.0)?;
        positive("delta_tau", self.delta.1)?;
        positive("kx", self.kx)?;
        positive("ky", self.ky)?;
        if self.decimation == 0 {
            return Err(Error::Domain {
                name: "decimation",
                reason: "must be >= 1".into(),
            });
        }
        if self.substeps == 0 {
            return Err(Error::Domain {
                name: "substeps",
                reason: "must be >= 1".into(),
            });
        }
        if self.dt > self.t_final {
            return Err(Error::Domain {
                name: "dt",
                reason: format!("step {} exceeds t_final {}", self.dt, self.t_final),
            });
        }
        let finite = self.initial_plant.is_finite()
            && self.initial_compensator.fhat.is_finite()
            && self.initial_compensator.fhatdot.is_finite()
            && self.setpoint.x_ref.is_finite()
            && self.setpoint.y_ref.is_finite();
        if !finite {
            return Err(Error::Domain {
                name: "initial state",
                reason: "must be finite".into(),
            });
        }
        FblGains::new(self.fbl.k0)?;
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Integration step `dt / substeps`.
    pub fn h(&self) -> f64 {
        self.dt / self.substeps as f64
    }
}

/// Integration state: plant, compensator and cost accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AugmentedState {
    pub plant: PlantState,
    pub compensator: CompensatorState,
    pub cost: f64,
}

impl AugmentedState {
    pub fn to_array(&self) -> [f64; 9] {
        let p = self.plant.to_array();
        [
            p[0],
            p[1],
            p[2],
            p[3],
            p[4],
            p[5],
            self.compensator.fhat,
            self.compensator.fhatdot,
            self.cost,
        ]
    }

    pub fn from_array(a: [f64; 9]) -> Self {
        Self {
            plant: PlantState::from_array([a[0], a[1], a[2], a[3], a[4], a[5]]),
            compensator: CompensatorState {
                fhat: a[6],
                fhatdot: a[7],
            },
            cost: a[8],
        }
    }
}

fn check_bounded<const N: usize>(a: &[f64; N]) -> Result<()> {
    if a.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_BOUND) {
        Ok(())
    } else {
        Err(Error::Diverged)
    }
}

/// One classical Runge–Kutta step of `ẋ = f(x)`.
pub fn rk4<const N: usize, F>(x: &[f64; N], dt: f64, mut f: F) -> Result<[f64; N]>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N]>,
{
    let k1 = f(x)?;
    rk4_from(x, &k1, dt, f)
}

/// RK4 step reusing an already evaluated first stage.
fn rk4_from<const N: usize, F>(x: &[f64; N], k1: &[f64; N], dt: f64, mut f: F) -> Result<[f64; N]>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N]>,
{
    let offset = |k: &[f64; N], h: f64| -> [f64; N] { std::array::from_fn(|i| x[i] + h * k[i]) };
    let k2 = f(&offset(k1, 0.5 * dt))?;
    let k3 = f(&offset(&k2, 0.5 * dt))?;
    let k4 = f(&offset(&k3, dt))?;
    Ok(std::array::from_fn(|i| {
        x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

/// Everything the controller computes at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawOutput {
    pub error: Vector8,
    pub clf: ClfEvaluation,
    pub mu: f64,
    /// Controller output before the gain perturbation.
    pub command: ControlCommand,
    /// `diag(δ_f, δ_τ) · command`.
    pub applied: ControlCommand,
    pub cost_rate: f64,
}

/// A validated configuration with its CLF weight built once.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub config: SimConfig,
    pub clf: ClfMatrix,
}

impl ClosedLoop {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let clf = build_clf(config.kx, config.ky)?;
        Ok(Self { config, clf })
    }

    /// Runs the configured controller on the normal-form quantities.
    pub fn law(&self, z: &Vector8, phi: &Vector8, gamma: &Matrix8x2) -> Result<LawOutput> {
        let cfg = &self.config;
        let e = reference_shift(z, &cfg.setpoint);
        let clf = evaluate_clf(&self.clf, &e, phi, gamma);
        let floor = cfg.sontag.beta_floor(&e);
        let command = match cfg.controller {
            ControllerKind::Fbl => fbl_control(
                &e,
                &drift_block(phi),
                &input_block(gamma),
                &cfg.fbl,
                cfg.sontag.fhat_floor,
            )?,
            ControllerKind::InvOpt => sontag_control(&clf, &cfg.sontag, floor),
        };
        let applied = command.scaled(cfg.delta);
        let mu = mu_value(&clf, &cfg.sontag, floor);
        let cost_rate = cost_integrand(&clf, &applied, mu)?;
        Ok(LawOutput {
            error: e,
            clf,
            mu,
            command,
            applied,
            cost_rate,
        })
    }

    /// Closed-loop vector field with the controller diagnostics at `a`.
    pub fn evaluate(&self, a: &AugmentedState) -> Result<(AugmentedState, LawOutput, PlantInput)> {
        let p = &self.config.plant;
        let (s, c) = (&a.plant, &a.compensator);
        let z = lift_to_normal_form(s, c, p).0;
        let (phi, gamma) = fields_from_parts(&z, s.theta, s.thetadot, c.fhat, c.fhatdot);
        let law = self.law(&z, &phi, &gamma)?;
        let input = recover_plant_input(c, s, law.applied.u2, p);
        let deriv = AugmentedState {
            plant: plant_deriv(s, &input, p),
            compensator: CompensatorState {
                fhat: c.fhatdot,
                fhatdot: law.applied.u1,
            },
            cost: law.cost_rate,
        };
        if !deriv.to_array().iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged);
        }
        Ok((deriv, law, input))
    }

    pub fn closed_loop_deriv(&self, a: &AugmentedState) -> Result<AugmentedState> {
        self.evaluate(a).map(|(d, _, _)| d)
    }

    /// Advances one sample interval `dt` in `substeps` RK4 steps; `deriv` is
    /// the vector field already evaluated at `a`.
    fn advance(&self, a: &AugmentedState, deriv: &AugmentedState) -> Result<AugmentedState> {
        let h = self.config.h();
        let f = |x: &[f64; 9]| {
            self.closed_loop_deriv(&AugmentedState::from_array(*x))
                .map(|d| d.to_array())
        };
        let mut x = rk4_from(&a.to_array(), &deriv.to_array(), h, f)?;
        check_bounded(&x)?;
        for _ in 1..self.config.substeps {
            x = rk4(&x, h, f)?;
            check_bounded(&x)?;
        }
        Ok(AugmentedState::from_array(x))
    }

    pub fn rk4_step(&self, a: &AugmentedState, dt: f64) -> Result<AugmentedState> {
        let next = rk4(&a.to_array(), dt, |x| {
            self.closed_loop_deriv(&AugmentedState::from_array(*x))
                .map(|d| d.to_array())
        })?;
        check_bounded(&next)?;
        Ok(AugmentedState::from_array(next))
    }
}

/// One retained sample of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRecord {
    pub t: f64,
    pub plant: PlantState,
    pub compensator: CompensatorState,
    /// Input applied to the plant, perturbation included.
    pub input: PlantInput,
    /// Controller command before perturbation.
    pub command: ControlCommand,
    pub v: f64,
    /// Cumulative cost `Ĵ(t)`.
    pub cost: f64,
    /// `‖z − z_ref‖`.
    pub error_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Completed,
    Diverged { t: f64 },
    Singular { t: f64 },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Diverged { .. } => "diverged",
            RunStatus::Singular { .. } => "singular",
        }
    }

    fn from_error(e: &Error, t: f64) -> Self {
        match e {
            Error::SingularThrust { .. } => RunStatus::Singular { t },
            _ => RunStatus::Diverged { t },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub records: Vec<SimRecord>,
    pub status: RunStatus,
}

impl SimRun {
    pub fn last(&self) -> Option<&SimRecord> {
        self.records.last()
    }
}

/// Integrates `cfg` from 0 to `t_final`. Only an invalid configuration is an
/// error; divergence and thrust singularities end the run with a status.
pub fn run(cfg: &SimConfig) -> Result<SimRun> {
    let cl = ClosedLoop::new(cfg.clone())?;
    let n = cfg.n_steps();
    let dt = cfg.dt;
    let mut a = AugmentedState {
        plant: cfg.initial_plant,
        compensator: cfg.initial_compensator,
        cost: 0.0,
    };
    let mut records = Vec::with_capacity(n / cfg.decimation + 2);
    for k in 0..=n {
        let t = k as f64 * dt;
        let (deriv, law, input) = match cl.evaluate(&a) {
            Ok(v) => v,
            Err(e) => {
                return Ok(SimRun {
                    records,
                    status: RunStatus::from_error(&e, t),
                })
            }
        };
        if k % cfg.decimation == 0 || k == n {
            records.push(SimRecord {
                t,
                plant: a.plant,
                compensator: a.compensator,
                input,
                command: law.command,
                v: law.clf.v,
                cost: a.cost,
                error_norm: law.error.norm(),
            });
        }
        if k == n {
            break;
        }
        match cl.advance(&a, &deriv) {
            Ok(next) => a = next,
            Err(e) => {
                return Ok(SimRun {
                    records,
                    status: RunStatus::from_error(&e, t + dt),
                })
            }
        }
    }
    Ok(SimRun {
        records,
        status: RunStatus::Completed,
    })
}

/// Samples of a run integrated directly in normal-form coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormRun {
    pub times: Vec<f64>,
    pub z: Vec<Vector8>,
    pub cost: Vec<f64>,
    pub status: RunStatus,
}

impl ClosedLoop {
    /// `(ż, J̇)` for the normal form closed on itself: the attitude and
    /// extension states entering `Φ`, `Γ` are recovered from `z`.
    pub fn normal_form_deriv(&self, x: &[f64; 9]) -> Result<[f64; 9]> {
        let z = Vector8::from_fn(|i, _| x[i]);
        let att = attitude_from_normal_form(&z, &self.config.plant)?;
        let (phi, gamma) = fields_from_parts(&z, att.theta, att.thetadot, att.fhat, att.fhatdot);
        let law = self.law(&z, &phi, &gamma)?;
        let zdot = phi + gamma * law.applied.as_vector();
        let mut out = [0.0; 9];
        out[..8].copy_from_slice(zdot.as_slice());
        out[8] = law.cost_rate;
        if !out.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged);
        }
        Ok(out)
    }
}

/// Same closed loop as [`run`], integrated as `ż = Φ + Γû` from the lifted
/// initial condition. Sampling follows `cfg.decimation`.
pub fn run_normal_form(cfg: &SimConfig) -> Result<NormalFormRun> {
    let cl = ClosedLoop::new(cfg.clone())?;
    let z0 = lift_to_normal_form(&cfg.initial_plant, &cfg.initial_compensator, &cfg.plant).0;
    let mut x = [0.0; 9];
    x[..8].copy_from_slice(z0.as_slice());
    let n = cfg.n_steps();
    let mut out = NormalFormRun {
        times: Vec::new(),
        z: Vec::new(),
        cost: Vec::new(),
        status: RunStatus::Completed,
    };
    for k in 0..=n {
        let t = k as f64 * cfg.dt;
        if k % cfg.decimation == 0 || k == n {
            out.times.push(t);
            out.z.push(Vector8::from_fn(|i, _| x[i]));
            out.cost.push(x[8]);
        }
        if k == n {
            break;
        }
        let step = (0..cfg.substeps).try_fold(x, |x, _| {
            let next = rk4(&x, cfg.h(), |s| cl.normal_form_deriv(s))?;
            check_bounded(&next).map(|_| next)
        });
        match step {
            Ok(next) => x = next,
            Err(e) => {
                out.status = RunStatus::from_error(&e, t + cfg.dt);
                break;
            }
        }
    }
    Ok(out)
}

/// `(t, θ, θ̇)` samples of the zero dynamics `θ̈ = (g/ε) sinθ`.
pub fn run_zero_dynamics(
    theta0: f64,
    thetadot0: f64,
    duration: f64,
    dt: f64,
    p: &PlantParams,
) -> Result<Vec<(f64, f64, f64)>> {
    positive("duration", duration)?;
    positive("dt", dt)?;
    p.validate()?;
    let n = (duration / dt).round() as usize;
    let mut x = [theta0, thetadot0];
    let mut out = Vec::with_capacity(n + 1);
    out.push((0.0, x[0], x[1]));
    for k in 1..=n {
        x = rk4(&x, dt, |s| {
            zero_dynamics_deriv(s[0], s[1], p).map(|(a, b)| [a, b])
        })?;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged);
        }
        out.push((k as f64 * dt, x[0], x[1]));
    }
    Ok(out)
}
