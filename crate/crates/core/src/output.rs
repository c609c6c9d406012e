//! CSV tables. Every file starts with a `# schema=1` comment line followed by
//! a header row; floats carry 17 significant digits so they parse back to the
//! identical `f64`.

use std::io::Write;

use crate::clf::GainSweep;
use crate::experiments::{EnvelopeRow, RunSummary, ENVELOPE_SIGNALS};
use crate::sim::SimRecord;
use crate::Result;

pub const SCHEMA_LINE: &str = "# schema=1";

pub const TIMESERIES_HEADER: [&str; 15] = [
    "t", "x", "y", "theta", "xdot", "ydot", "thetadot", "fhat", "fhatdot", "f", "tau", "u1", "u2",
    "V", "J",
];

pub const SUMMARY_HEADER: [&str; 8] = [
    "id",
    "delta_f",
    "delta_tau",
    "status",
    "final_err",
    "final_cost",
    "peak_theta",
    "tail_osc",
];

pub const CLF_HEADER: [&str; 4] = ["kx", "ky", "negdef", "margin"];

/// 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn writer<W: Write>(mut w: W) -> Result<csv::Writer<W>> {
    writeln!(w, "{SCHEMA_LINE}")?;
    Ok(csv::Writer::from_writer(w))
}

pub fn write_timeseries<W: Write>(w: W, records: &[SimRecord]) -> Result<()> {
    let mut out = writer(w)?;
    out.write_record(TIMESERIES_HEADER)?;
    for r in records {
        let p = &r.plant;
        let row = [
            r.t,
            p.x,
            p.y,
            p.theta,
            p.xdot,
            p.ydot,
            p.thetadot,
            r.compensator.fhat,
            r.compensator.fhatdot,
            r.input.f,
            r.input.tau,
            r.command.u1,
            r.command.u2,
            r.v,
            r.cost,
        ];
        out.write_record(row.iter().map(|&v| fmt_f64(v)))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(w: W, summaries: &[RunSummary]) -> Result<()> {
    let mut out = writer(w)?;
    out.write_record(SUMMARY_HEADER)?;
    for s in summaries {
        out.write_record([
            s.id.to_string(),
            fmt_f64(s.delta.0),
            fmt_f64(s.delta.1),
            s.status.label().to_string(),
            fmt_opt(s.final_err),
            fmt_opt(s.final_cost),
            fmt_opt(s.peak_theta),
            fmt_opt(s.tail_osc),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn envelope_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for s in ENVELOPE_SIGNALS {
        h.push(format!("{s}_min"));
        h.push(format!("{s}_max"));
    }
    h.push("n".to_string());
    h
}

pub fn write_envelope<W: Write>(w: W, rows: &[EnvelopeRow]) -> Result<()> {
    let mut out = writer(w)?;
    out.write_record(envelope_header())?;
    for r in rows {
        let mut row = vec![fmt_f64(r.t)];
        for i in 0..ENVELOPE_SIGNALS.len() {
            row.push(fmt_f64(r.min[i]));
            row.push(fmt_f64(r.max[i]));
        }
        row.push(r.count.to_string());
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_clf_sweep<W: Write>(w: W, sweep: &GainSweep) -> Result<()> {
    let mut out = writer(w)?;
    out.write_record(CLF_HEADER)?;
    for p in &sweep.points {
        out.write_record([
            fmt_f64(p.kx),
            fmt_f64(p.ky),
            u8::from(p.negdef).to_string(),
            fmt_f64(p.margin),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_zero_dynamics<W: Write>(w: W, samples: &[(f64, f64, f64)]) -> Result<()> {
    let mut out = writer(w)?;
    out.write_record(["t", "theta", "thetadot"])?;
    for &(t, th, w) in samples {
        out.write_record([fmt_f64(t), fmt_f64(th), fmt_f64(w)])?;
    }
    out.flush()?;
    Ok(())
}
