//! Nominal controller comparison and the Monte-Carlo input-gain study.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::{ControllerKind, SetPoint};
use crate::model::{CompensatorState, PlantParams, PlantState};
use crate::sim::{run, RunStatus, SimConfig, SimRecord, SimRun};
use crate::{Error, Result};

/// Length of the trailing window used for the oscillation metric.
pub const TAIL_WINDOW: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    pub config: SimConfig,
}

impl Scenario {
    pub fn with_controller(&self, kind: ControllerKind) -> SimConfig {
        SimConfig {
            controller: kind,
            ..self.config.clone()
        }
    }
}

/// At rest at the origin in hover, commanded to `(x̂, ŷ) = (5, 5)` over 30 s.
pub fn canonical_scenario() -> Scenario {
    let plant = PlantParams::nominal();
    Scenario {
        name: "canonical",
        description: "hover at the origin, step to (5, 5), eps = 1, g = 9.81, 30 s",
        config: SimConfig {
            plant,
            setpoint: SetPoint {
                x_ref: 5.0,
                y_ref: 5.0,
            },
            initial_plant: PlantState::at_rest(0.0, 0.0),
            initial_compensator: CompensatorState::hover(&plant),
            dt: 1e-3,
            t_final: 30.0,
            ..SimConfig::default()
        },
    }
}

/// Already hovering at the setpoint; every trajectory stays put.
pub fn hover_scenario() -> Scenario {
    let plant = PlantParams::nominal();
    Scenario {
        name: "hover",
        description: "hover at the setpoint (0, 0)",
        config: SimConfig {
            plant,
            initial_compensator: CompensatorState::hover(&plant),
            ..SimConfig::default()
        },
    }
}

pub fn registry() -> Vec<Scenario> {
    vec![canonical_scenario(), hover_scenario()]
}

pub fn scenario_by_name(name: &str) -> Result<Scenario> {
    registry()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Domain {
            name: "scenario",
            reason: format!("unknown scenario `{name}`"),
        })
}

/// Both controllers on one scenario, scored with the same cost.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub invopt: SimRun,
    pub fbl: SimRun,
    pub j_invopt: f64,
    pub j_fbl: f64,
}

impl Comparison {
    pub fn ratio(&self) -> f64 {
        self.j_fbl / self.j_invopt
    }
}

pub fn compare_nominal(s: &Scenario) -> Result<Comparison> {
    let invopt = run(&s.with_controller(ControllerKind::InvOpt))?;
    let fbl = run(&s.with_controller(ControllerKind::Fbl))?;
    let final_cost = |r: &SimRun| r.last().map_or(f64::NAN, |rec| rec.cost);
    Ok(Comparison {
        j_invopt: final_cost(&invopt),
        j_fbl: final_cost(&fbl),
        invopt,
        fbl,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloConfig {
    pub n_runs: usize,
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            n_runs: 100,
            delta_lo: 0.2,
            delta_hi: 5.0,
            seed: 42,
        }
    }
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Domain {
                name: "n_runs",
                reason: "must be >= 1".into(),
            });
        }
        if !(self.delta_lo > 0.0 && self.delta_lo <= self.delta_hi && self.delta_hi.is_finite()) {
            return Err(Error::Domain {
                name: "delta range",
                reason: format!("need 0 < lo <= hi, got [{}, {}]", self.delta_lo, self.delta_hi),
            });
        }
        Ok(())
    }

    /// `(δ_f, δ_τ)` of run `id`, independent uniform draws from a generator
    /// keyed by `(seed, id)`.
    pub fn draw(&self, id: usize) -> (f64, f64) {
        if self.delta_lo == self.delta_hi {
            return (self.delta_lo, self.delta_lo);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id as u64);
        let range = self.delta_lo..=self.delta_hi;
        (rng.gen_range(range.clone()), rng.gen_range(range))
    }

    pub fn draws(&self) -> Vec<(f64, f64)> {
        (0..self.n_runs).map(|i| self.draw(i)).collect()
    }
}

/// Per-run metrics. Absent when the run did not complete.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub id: usize,
    pub delta: (f64, f64),
    pub status: RunStatus,
    pub final_err: Option<f64>,
    pub final_cost: Option<f64>,
    pub peak_theta: Option<f64>,
    /// `max |θ| − mean |θ|` over the trailing window.
    pub tail_osc: Option<f64>,
}

/// `max |θ| − mean |θ|` over `t ∈ [T − 5, T]`, the mean taken by the
/// trapezoid rule.
pub fn tail_oscillation(records: &[SimRecord]) -> Result<f64> {
    let end = records.last().ok_or(Error::EmptyRecords)?.t;
    let start = (end - TAIL_WINDOW).max(0.0);
    let tail: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.t >= start - 1e-9)
        .map(|r| (r.t, r.plant.theta.abs()))
        .collect();
    let max = tail.iter().fold(0.0f64, |m, &(_, a)| m.max(a));
    let mean = if tail.len() < 2 {
        max
    } else {
        let area: f64 = tail
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum();
        area / (tail[tail.len() - 1].0 - tail[0].0)
    };
    Ok(max - mean)
}

pub fn summarize(id: usize, delta: (f64, f64), run: &SimRun) -> Result<RunSummary> {
    let last = run.records.last().ok_or(Error::EmptyRecords)?;
    let mut s = RunSummary {
        id,
        delta,
        status: run.status,
        final_err: None,
        final_cost: None,
        peak_theta: None,
        tail_osc: None,
    };
    if run.status.is_completed() {
        s.final_err = Some(last.error_norm);
        s.final_cost = Some(last.cost);
        s.peak_theta = Some(
            run.records
                .iter()
                .fold(0.0f64, |m, r| m.max(r.plant.theta.abs())),
        );
        s.tail_osc = Some(tail_oscillation(&run.records)?);
    }
    Ok(s)
}

/// Signals covered by the envelope, in column order.
pub const ENVELOPE_SIGNALS: [&str; 5] = ["x", "y", "theta", "f", "tau"];

fn envelope_values(r: &SimRecord) -> [f64; 5] {
    [r.plant.x, r.plant.y, r.plant.theta, r.input.f, r.input.tau]
}

/// Per-sample min/max over all runs that reached that sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeRow {
    pub t: f64,
    pub min: [f64; 5],
    pub max: [f64; 5],
    pub count: usize,
}

pub fn envelope(runs: &[SimRun]) -> Vec<EnvelopeRow> {
    let len = runs.iter().map(|r| r.records.len()).max().unwrap_or(0);
    (0..len)
        .map(|k| {
            let mut row = EnvelopeRow {
                t: f64::NAN,
                min: [f64::INFINITY; 5],
                max: [f64::NEG_INFINITY; 5],
                count: 0,
            };
            for rec in runs.iter().filter_map(|r| r.records.get(k)) {
                row.t = rec.t;
                row.count += 1;
                for (i, v) in envelope_values(rec).into_iter().enumerate() {
                    row.min[i] = row.min[i].min(v);
                    row.max[i] = row.max[i].max(v);
                }
            }
            row
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub controller: ControllerKind,
    pub runs: Vec<SimRun>,
    pub summaries: Vec<RunSummary>,
    pub envelope: Vec<EnvelopeRow>,
}

impl MonteCarloReport {
    pub fn count(&self, label: &str) -> usize {
        self.summaries
            .iter()
            .filter(|s| s.status.label() == label)
            .count()
    }

    pub fn all_completed(&self) -> bool {
        self.summaries.iter().all(|s| s.status.is_completed())
    }
}

/// Runs `mc.n_runs` perturbed simulations of `s` on `jobs` worker threads.
/// Results are ordered by run id and do not depend on `jobs`.
pub fn monte_carlo(
    s: &Scenario,
    mc: &MonteCarloConfig,
    kind: ControllerKind,
    jobs: usize,
) -> Result<MonteCarloReport> {
    mc.validate()?;
    let base = s.with_controller(kind);
    base.validate()?;
    let draws = mc.draws();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    let runs: Vec<SimRun> = pool.install(|| {
        draws
            .par_iter()
            .map(|&delta| {
                run(&SimConfig {
                    delta,
                    ..base.clone()
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let summaries = runs
        .iter()
        .zip(&draws)
        .enumerate()
        .map(|(id, (r, &d))| summarize(id, d, r))
        .collect::<Result<Vec<_>>>()?;
    let envelope = envelope(&runs);
    Ok(MonteCarloReport {
        controller: kind,
        runs,
        summaries,
        envelope,
    })
}
