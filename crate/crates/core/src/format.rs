//! Scenario files and CSV output.
//!
//! A scenario file is flat TOML whose keys mirror the [`Scenario`] fields:
//!
//! ```toml
//! source1 = [300.0, 300.0]
//! dest1 = [500.0, 645.0]
//! source2 = [390.0, 257.0]
//! dest2 = [590.0, 603.0]
//! p1 = 0.1
//! p2 = 0.1
//! p_r = 0.08
//! sigma2 = 1e-13
//! alpha = 0.8
//! b = 1e-5
//! M = 80
//! omega = 1e6
//! # optional, defaults 0.097 and 4
//! pathloss_const = 0.097
//! pathloss_exp = 4.0
//! ```
//!
//! CSV numbers are written with `{:e}`, the shortest scientific form that
//! reads back to the same `f64`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bargaining::RegionSample;
use crate::error::{Error, Result};
use crate::experiments::{ConcavityRecord, SweepRecord};
use crate::game::EquilibriumReport;
use crate::system_model::{Point, Scenario, DEFAULT_PATHLOSS_CONST, DEFAULT_PATHLOSS_EXP};

/// The bundled two-user reference deployment.
pub const REFERENCE_SCENARIO: &str = include_str!("../scenarios/reference_scenario.toml");

pub const SWEEP_HEADER: &str = "xr,yr,w1_ne,w2_ne,w1_nbs,w2_nbs,u1_ne,u2_ne,u1_nbs,u2_nbs,gain_bw_u1_pct,gain_bw_u2_pct,gain_bw_total_pct,gain_sw_pct,lambda1,lambda2,strictly_concave,converged,cg_matched_oracle";
pub const REGION_HEADER: &str = "w1,w2,u1,u2,on_hull,on_pareto";
pub const CONCAVITY_HEADER: &str = "xr,yr,lambda1,lambda2,strictly_concave";

const UNITS_COMMENT: &str = "# lengths in meters, powers in Watt, band in Hz\n";

fn default_pathloss_const() -> f64 {
    DEFAULT_PATHLOSS_CONST
}

fn default_pathloss_exp() -> f64 {
    DEFAULT_PATHLOSS_EXP
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    source1: [f64; 2],
    dest1: [f64; 2],
    source2: [f64; 2],
    dest2: [f64; 2],
    p1: f64,
    p2: f64,
    p_r: f64,
    sigma2: f64,
    alpha: f64,
    b: f64,
    #[serde(rename = "M")]
    m: u32,
    omega: f64,
    #[serde(default = "default_pathloss_const")]
    pathloss_const: f64,
    #[serde(default = "default_pathloss_exp")]
    pathloss_exp: f64,
}

fn point(p: [f64; 2]) -> Point {
    Point::new(p[0], p[1])
}

/// Parses and validates a scenario file.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let f: ScenarioFile =
        toml::from_str(text).map_err(|e| Error::Format(e.message().to_owned()))?;
    let scenario = Scenario {
        sources: [point(f.source1), point(f.source2)],
        destinations: [point(f.dest1), point(f.dest2)],
        tx_power: [f.p1, f.p2],
        relay_power: f.p_r,
        noise_power: f.sigma2,
        spectral_efficiency: f.alpha,
        price: f.b,
        symbols_per_packet: f.m,
        total_band: f.omega,
        pathloss_const: f.pathloss_const,
        pathloss_exp: f.pathloss_exp,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn write_scenario(s: &Scenario) -> String {
    let file = ScenarioFile {
        source1: [s.sources[0].x, s.sources[0].y],
        dest1: [s.destinations[0].x, s.destinations[0].y],
        source2: [s.sources[1].x, s.sources[1].y],
        dest2: [s.destinations[1].x, s.destinations[1].y],
        p1: s.tx_power[0],
        p2: s.tx_power[1],
        p_r: s.relay_power,
        sigma2: s.noise_power,
        alpha: s.spectral_efficiency,
        b: s.price,
        m: s.symbols_per_packet,
        omega: s.total_band,
        pathloss_const: s.pathloss_const,
        pathloss_exp: s.pathloss_exp,
    };
    let body = toml::to_string(&file).expect("scenario fields always serialize");
    format!("{UNITS_COMMENT}{body}")
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = String::with_capacity(256 * (records.len() + 1));
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in records {
        let _ = write!(out, "{},{}", num(r.relay.x), num(r.relay.y));
        match &r.outcome {
            Ok(p) => {
                let fields = [
                    p.ne.allocation.w1,
                    p.ne.allocation.w2,
                    p.nbs.allocation.w1,
                    p.nbs.allocation.w2,
                    p.ne.utilities.u1,
                    p.ne.utilities.u2,
                    p.nbs.utilities.u1,
                    p.nbs.utilities.u2,
                    p.gain_bw_u1_pct,
                    p.gain_bw_u2_pct,
                    p.gain_bw_total_pct,
                    p.gain_sw_pct.unwrap_or(f64::NAN),
                    p.eigen.lambda1,
                    p.eigen.lambda2,
                ];
                for v in fields {
                    let _ = write!(out, ",{}", num(v));
                }
                let matched = match p.cg_matched_oracle {
                    Some(m) => m.to_string(),
                    None => "na".to_owned(),
                };
                let _ = writeln!(
                    out,
                    ",{},{},{}",
                    p.strictly_concave, p.nbs.converged, matched
                );
            }
            Err(_) => {
                for _ in 0..14 {
                    out.push_str(",NaN");
                }
                out.push_str(",false,false,na\n");
            }
        }
    }
    out
}

pub fn region_csv(region: &RegionSample) -> String {
    let on_hull = region.is_on_hull();
    let on_pareto = region.is_on_pareto();
    let mut out = String::with_capacity(96 * (region.samples.len() + 1));
    out.push_str(REGION_HEADER);
    out.push('\n');
    for (k, (a, u)) in region.samples.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(a.w1),
            num(a.w2),
            num(u.u1),
            num(u.u2),
            on_hull[k],
            on_pareto[k]
        );
    }
    out
}

pub fn concavity_csv(records: &[ConcavityRecord]) -> String {
    let mut out = String::new();
    out.push_str(CONCAVITY_HEADER);
    out.push('\n');
    for r in records {
        let _ = write!(out, "{},{}", num(r.relay.x), num(r.relay.y));
        match &r.outcome {
            Ok((e, flag)) => {
                let _ = writeln!(out, ",{},{},{}", num(e.lambda1), num(e.lambda2), flag);
            }
            Err(_) => out.push_str(",NaN,NaN,false\n"),
        }
    }
    out
}

/// Human-readable key/value block for one equilibrium report.
pub fn report_text(label: &str, r: &EquilibriumReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[{label}]");
    let _ = writeln!(out, "kind = {:?}", r.kind);
    let _ = writeln!(out, "w1 = {}", num(r.allocation.w1));
    let _ = writeln!(out, "w2 = {}", num(r.allocation.w2));
    let _ = writeln!(out, "u1 = {}", num(r.utilities.u1));
    let _ = writeln!(out, "u2 = {}", num(r.utilities.u2));
    let _ = writeln!(out, "iterations = {}", r.iterations);
    let _ = writeln!(out, "residual = {}", num(r.residual));
    let _ = writeln!(out, "converged = {}", r.converged);
    let d = &r.diagnostics;
    let _ = writeln!(out, "curvature_fallbacks = {}", d.curvature_fallbacks);
    let _ = writeln!(out, "direction_restarts = {}", d.direction_restarts);
    let _ = writeln!(out, "oracle_fallback = {}", d.oracle_fallback);
    let _ = writeln!(out, "rejected_below_threat = {}", d.rejected_below_threat);
    out
}
