//! CSV writers. Floats use 17 significant digits in `%.17g` style so values
//! round-trip exactly.

use std::io::{self, Write};

use super::config::Experiment;
use super::{ControlResult, PredictionResult};
use crate::actor_critic::StepRecord;

pub const PREDICTION_HEADER: &str = "trial,run,lambda,delta,mu,algo,rms";
pub const CONTROL_HEADER: &str = "run,lambda,delta,algo,metric,terminated_by";
pub const EPISODES_HEADER: &str = "run,lambda,trial,steps,terminated_by";

/// `%.17g`.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let fixed = format!("{:.*}", (16 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_prediction_csv<W: Write>(mut w: W, result: &PredictionResult) -> io::Result<()> {
    let cfg = &result.config;
    writeln!(w, "{PREDICTION_HEADER}")?;
    for r in &result.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.trial,
            r.run,
            format_float(r.lambda),
            format_float(cfg.delta),
            format_float(cfg.mu),
            cfg.algorithm,
            format_float(r.rms)
        )?;
    }
    Ok(())
}

pub fn write_control_csv<W: Write>(mut w: W, result: &ControlResult) -> io::Result<()> {
    let cfg = &result.config;
    writeln!(w, "{CONTROL_HEADER}")?;
    for r in &result.rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.run,
            format_float(r.lambda),
            format_float(cfg.delta),
            cfg.algorithm,
            format_float(r.metric),
            r.terminated_by
        )?;
    }
    Ok(())
}

/// One line per learning trial.
pub fn write_episodes_csv<W: Write>(mut w: W, result: &ControlResult) -> io::Result<()> {
    writeln!(w, "{EPISODES_HEADER}")?;
    for r in &result.rows {
        for (i, e) in r.episodes.iter().enumerate() {
            writeln!(w, "{},{},{},{},{}", r.run, format_float(r.lambda), i + 1, e.steps, e.terminated_by)?;
        }
    }
    Ok(())
}

/// Column names of a step log for each control task.
pub fn trace_header(experiment: Experiment) -> &'static str {
    match experiment {
        Experiment::AcrobotControl => "step,theta1,theta1_dot,theta2,theta2_dot,torque",
        _ => "step,theta,theta_dot,x,x_dot,force",
    }
}

pub fn write_trace_csv<W: Write>(mut w: W, experiment: Experiment, records: &[StepRecord]) -> io::Result<()> {
    writeln!(w, "{}", trace_header(experiment))?;
    for r in records {
        let o = r.observation;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.step,
            format_float(o[0]),
            format_float(o[1]),
            format_float(o[2]),
            format_float(o[3]),
            format_float(r.action)
        )?;
    }
    Ok(())
}
