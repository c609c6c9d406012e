//! Subcommand bodies. Each returns the process exit code; `Err` means a
//! configuration or I/O problem (exit 1).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use vtol_core::clf::{
    build_clf, certify_positive_definite, p0, sweep_gain_grid, sweep_points, CLAIMED_GAIN_RANGE,
};
use vtol_core::experiments::{compare_nominal, monte_carlo, Scenario};
use vtol_core::output::{
    write_clf_sweep, write_envelope, write_summary, write_timeseries, write_zero_dynamics,
};
use vtol_core::sim::{run, run_zero_dynamics};
use vtol_core::{RunStatus, SimRun};

use crate::config::{keyed, Settings};

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUN_FAILED: u8 = 2;
pub const EXIT_MC_FAILED: u8 = 3;
pub const EXIT_CLF_FAILED: u8 = 4;

/// Where a command writes its files.
pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write<F>(&self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> vtol_core::Result<()>,
    {
        let path = self.path(name);
        let file =
            File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        let mut w = BufWriter::new(file);
        body(&mut w).with_context(|| format!("cannot write {}", path.display()))?;
        w.flush()
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    /// Records the effective configuration next to the results.
    pub fn write_config(&self, settings: &Settings) -> Result<()> {
        let path = self.path("config.toml");
        std::fs::write(&path, settings.to_toml())
            .with_context(|| format!("cannot write {}", path.display()))
    }
}

fn scenario(settings: &Settings) -> Scenario {
    Scenario {
        name: "configured",
        description: "effective configuration",
        config: settings.sim.clone(),
    }
}

fn report_status(what: &str, status: &RunStatus) -> bool {
    match status {
        RunStatus::Completed => true,
        RunStatus::Diverged { t } => {
            eprintln!("{what}: run diverged at t = {t}");
            false
        }
        RunStatus::Singular { t } => {
            eprintln!("{what}: thrust singularity at t = {t}");
            false
        }
    }
}

fn timeseries(out: &Output, name: &str, run: &SimRun) -> Result<PathBuf> {
    out.write(name, |w| write_timeseries(w, &run.records))
}

pub fn simulate(settings: &Settings, out: &Output) -> Result<u8> {
    out.write_config(settings)?;
    let result = run(&settings.sim).map_err(keyed)?;
    let path = timeseries(out, "timeseries.csv", &result)?;
    if let Some(last) = result.last() {
        println!(
            "controller={} t={} err={:e} J={:e} -> {}",
            settings.sim.controller,
            last.t,
            last.error_norm,
            last.cost,
            path.display()
        );
    }
    let ok = report_status(settings.sim.controller.as_str(), &result.status);
    Ok(if ok { EXIT_OK } else { EXIT_RUN_FAILED })
}

pub fn compare(settings: &Settings, out: &Output) -> Result<u8> {
    out.write_config(settings)?;
    let cmp = compare_nominal(&scenario(settings)).map_err(keyed)?;
    timeseries(out, "invopt.csv", &cmp.invopt)?;
    timeseries(out, "fbl.csv", &cmp.fbl)?;
    println!(
        "J_invopt={:e} J_fbl={:e} ratio={:e}",
        cmp.j_invopt,
        cmp.j_fbl,
        cmp.ratio()
    );
    let ok = report_status("invopt", &cmp.invopt.status) & report_status("fbl", &cmp.fbl.status);
    Ok(if ok { EXIT_OK } else { EXIT_RUN_FAILED })
}

pub fn montecarlo(settings: &Settings, out: &Output, jobs: usize) -> Result<u8> {
    out.write_config(settings)?;
    let kind = settings.sim.controller;
    let report = monte_carlo(&scenario(settings), &settings.montecarlo, kind, jobs).map_err(keyed)?;
    out.write("summary.csv", |w| write_summary(w, &report.summaries))?;
    out.write("envelope.csv", |w| write_envelope(w, &report.envelope))?;
    println!(
        "controller={kind} runs={} completed={} diverged={} singular={} seed={}",
        report.summaries.len(),
        report.count("completed"),
        report.count("diverged"),
        report.count("singular"),
        settings.montecarlo.seed
    );
    Ok(if report.all_completed() {
        EXIT_OK
    } else {
        EXIT_MC_FAILED
    })
}

pub fn verify_clf(settings: &Settings, out: &Output) -> Result<u8> {
    out.write_config(settings)?;
    let p0_cert = certify_positive_definite(&p0()).map_err(keyed)?;
    let unit = build_clf(1.0, 1.0).map_err(keyed)?;
    let grid = &settings.clf;
    let sweep = match &grid.gains {
        Some(g) => sweep_points(g, g),
        None => sweep_gain_grid(grid.k_min, grid.k_max, grid.n),
    }
    .map_err(keyed)?;
    out.write("clf_sweep.csv", |w| write_clf_sweep(w, &sweep))?;
    let (lo, hi) = CLAIMED_GAIN_RANGE;
    let violations: Vec<_> = sweep.violations().collect();
    for v in &violations {
        eprintln!(
            "not negative definite at kx={:e} ky={:e} (margin {:e})",
            v.kx, v.ky, v.margin
        );
    }
    let outside = sweep.points.iter().filter(|p| !p.in_claim).count();
    println!(
        "P0 definite={} margin={:e}; unit-gain residual margin={:e}; points={} outside [{lo:e}, {hi:e}]={outside} in-claim violations={}",
        p0_cert.definite,
        p0_cert.margin,
        unit.certificate.margin,
        sweep.points.len(),
        violations.len()
    );
    Ok(if p0_cert.definite && violations.is_empty() {
        EXIT_OK
    } else {
        EXIT_CLF_FAILED
    })
}

pub fn zero_dynamics(settings: &Settings, out: &Output) -> Result<u8> {
    out.write_config(settings)?;
    let zd = settings.zero_dynamics;
    let samples = run_zero_dynamics(zd.theta0, zd.thetadot0, zd.duration, zd.dt, &settings.sim.plant)
        .map_err(keyed)?;
    let path = out.write("zero_dynamics.csv", |w| write_zero_dynamics(w, &samples))?;
    match samples.iter().find(|s| s.1.abs() >= 0.1) {
        Some(s) => println!("|theta| reached 0.1 at t={} -> {}", s.0, path.display()),
        None => println!("|theta| stayed below 0.1 -> {}", path.display()),
    }
    Ok(EXIT_OK)
}
