//! Geometry, path loss, link SNRs and the packet efficiency function.
//!
//! Everything here is a pure function of its arguments. Channel gains are
//! deterministic path-loss values (`pathloss_const / d^pathloss_exp`); no
//! fading is drawn.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A node position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Default path-loss constant of the gain law `c / d^n`.
pub const DEFAULT_PATHLOSS_CONST: f64 = 0.097;
/// Default path-loss exponent.
pub const DEFAULT_PATHLOSS_EXP: f64 = 4.0;

/// A complete static problem instance.
///
/// Index 0 of each array is source/user 1, index 1 is source/user 2.
/// Lengths are in meters, powers in Watt and bandwidths in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sources: [Point; 2],
    pub destinations: [Point; 2],
    /// Transmit power of each source.
    pub tx_power: [f64; 2],
    pub relay_power: f64,
    /// Noise power σ².
    pub noise_power: f64,
    /// Spectral efficiency α in bit/s/Hz.
    pub spectral_efficiency: f64,
    /// Linear price `b` charged per Hz² of relay band.
    pub price: f64,
    /// Symbols per packet `M` in the efficiency function.
    pub symbols_per_packet: u32,
    /// Total band ω in Hz; each strategy lives in `[0, total_band]`.
    pub total_band: f64,
    pub pathloss_const: f64,
    pub pathloss_exp: f64,
}

impl Scenario {
    /// The two-user reference deployment: S1(300,300), D1(500,645),
    /// S2(390,257), D2(590,603), 0.1 W sources, 0.08 W relay, 1e-13 W noise,
    /// α = 0.8, b = 1e-5, M = 80 and a 1 MHz band.
    pub fn reference() -> Self {
        Self {
            sources: [Point::new(300.0, 300.0), Point::new(390.0, 257.0)],
            destinations: [Point::new(500.0, 645.0), Point::new(590.0, 603.0)],
            tx_power: [0.1, 0.1],
            relay_power: 0.08,
            noise_power: 1e-13,
            spectral_efficiency: 0.8,
            price: 1e-5,
            symbols_per_packet: 80,
            total_band: 1e6,
            pathloss_const: DEFAULT_PATHLOSS_CONST,
            pathloss_exp: DEFAULT_PATHLOSS_EXP,
        }
    }

    /// Checks every field invariant, naming the first offending key.
    pub fn validate(&self) -> Result<()> {
        fn invalid(key: &'static str, reason: impl Into<String>) -> Error {
            Error::InvalidScenario {
                key,
                reason: reason.into(),
            }
        }
        let points = [
            ("source1", self.sources[0]),
            ("source2", self.sources[1]),
            ("dest1", self.destinations[0]),
            ("dest2", self.destinations[1]),
        ];
        for (key, p) in points {
            if !p.is_finite() {
                return Err(invalid(key, "must have finite coordinates"));
            }
        }
        let positive = [
            ("p1", self.tx_power[0]),
            ("p2", self.tx_power[1]),
            ("p_r", self.relay_power),
            ("sigma2", self.noise_power),
            ("alpha", self.spectral_efficiency),
            ("omega", self.total_band),
            ("pathloss_const", self.pathloss_const),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(key, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.price.is_finite() && self.price >= 0.0) {
            return Err(invalid(
                "b",
                format!("must be finite and >= 0, got {}", self.price),
            ));
        }
        if self.symbols_per_packet < 1 {
            return Err(invalid("M", "must be >= 1"));
        }
        if !(self.pathloss_exp.is_finite() && self.pathloss_exp >= 0.0) {
            return Err(invalid(
                "pathloss_exp",
                format!("must be finite and >= 0, got {}", self.pathloss_exp),
            ));
        }
        Ok(())
    }
}

/// Channel gains and SNRs of one source for a fixed relay position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserLink {
    /// |h_ii|², source to own destination.
    pub h_direct_sq: f64,
    /// |h_ir|², source to relay.
    pub h_to_relay_sq: f64,
    /// |h_ri|², relay to destination.
    pub h_from_relay_sq: f64,
    pub gamma_direct: f64,
    pub gamma_relayed: f64,
    /// Equivalent amplify-and-forward SNR, `gamma_direct + gamma_relayed`.
    pub gamma_af: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub users: [UserLink; 2],
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Path-loss power gain at distance `d`.
pub fn channel_gain(d: f64, scenario: &Scenario) -> Result<f64> {
    if d <= 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "link endpoints at distance {d}"
        )));
    }
    Ok(scenario.pathloss_const / d.powf(scenario.pathloss_exp))
}

fn link_gain(a: Point, b: Point, what: &str, scenario: &Scenario) -> Result<f64> {
    let d = distance(a, b);
    if d == 0.0 {
        return Err(Error::DegenerateGeometry(what.to_owned()));
    }
    channel_gain(d, scenario)
}

pub fn snr_direct(power: f64, h_sq: f64, noise_power: f64) -> f64 {
    power * h_sq / noise_power
}

/// End-to-end SNR of the relayed (second phase) path.
pub fn snr_relayed(
    source_power: f64,
    relay_power: f64,
    h_to_relay_sq: f64,
    h_from_relay_sq: f64,
    noise_power: f64,
) -> f64 {
    let a = source_power * h_to_relay_sq;
    let b = relay_power * h_from_relay_sq;
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    // a*b / (σ²(a + b + σ²)) written with both SNR factors normalized first,
    // which keeps the product in range for tiny gains.
    let sa = a / noise_power;
    let sb = b / noise_power;
    sa * sb / (sa + sb + 1.0)
}

pub fn link_budget(scenario: &Scenario, relay: Point) -> Result<LinkBudget> {
    let mut users = [None, None];
    for (i, slot) in users.iter_mut().enumerate() {
        let n = i + 1;
        let src = scenario.sources[i];
        let dst = scenario.destinations[i];
        let h_direct_sq = link_gain(src, dst, &format!("source{n} and dest{n}"), scenario)?;
        let h_to_relay_sq = link_gain(src, relay, &format!("source{n} and relay"), scenario)?;
        let h_from_relay_sq = link_gain(relay, dst, &format!("relay and dest{n}"), scenario)?;
        let power = scenario.tx_power[i];
        let gamma_direct = snr_direct(power, h_direct_sq, scenario.noise_power);
        let gamma_relayed = snr_relayed(
            power,
            scenario.relay_power,
            h_to_relay_sq,
            h_from_relay_sq,
            scenario.noise_power,
        );
        *slot = Some(UserLink {
            h_direct_sq,
            h_to_relay_sq,
            h_from_relay_sq,
            gamma_direct,
            gamma_relayed,
            gamma_af: gamma_direct + gamma_relayed,
        });
    }
    let [Some(u1), Some(u2)] = users else {
        unreachable!("both users filled above")
    };
    Ok(LinkBudget { users: [u1, u2] })
}

/// Packet success rate `(1 - e^{-x/2})^M`.
pub fn efficiency(snr: f64, symbols_per_packet: u32) -> f64 {
    let success = -(-0.5 * snr).exp_m1();
    success.powf(f64::from(symbols_per_packet))
}
