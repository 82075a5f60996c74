//! Plain-text optimizer checkpoints.
//!
//! ```text
//! format = blockgrad-state
//! version = 1
//! kind = bagm
//! t = 100
//! eps = 1.0000000000000000e-8
//! ...
//! v_hat = 2 : 1.2500000000000000e1 3.0000000000000000e0
//! ```
//!
//! The first two entries are fixed. Floats are written with 17 significant
//! digits, which round-trips every `f64` exactly. Arrays carry their length so
//! a truncated file is detected.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::schedules::{EmaSchedule, MomentumSchedule, StepsizeSchedule};

use super::{Accumulation, BagState, BagmConfig, BagmState};

const FORMAT: &str = "blockgrad-state";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Bag(BagState),
    Bagm(BagmState),
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn array(xs: &[f64]) -> String {
    let mut s = format!("{} :", xs.len());
    for x in xs {
        write!(s, " {}", num(*x)).unwrap();
    }
    s
}

fn header(kind: &str, t: u64) -> String {
    format!("format = {FORMAT}\nversion = {VERSION}\nkind = {kind}\nt = {t}\n")
}

impl BagState {
    pub fn to_text(&self) -> String {
        let mut s = header("bag", self.t);
        writeln!(s, "eta = {}", num(self.eta)).unwrap();
        writeln!(s, "eps = {}", num(self.eps)).unwrap();
        writeln!(s, "v = {}", array(&self.v)).unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        match state_from_text(text)? {
            OptimizerState::Bag(s) => Ok(s),
            OptimizerState::Bagm(_) => Err(bad("expected a bag checkpoint, found bagm")),
        }
    }
}

impl BagmState {
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = header("bagm", self.t);
        writeln!(s, "eps = {}", num(c.eps)).unwrap();
        writeln!(s, "allow_zero_eps = {}", c.allow_zero_eps).unwrap();
        writeln!(s, "weights = {}", c.weights).unwrap();
        let acc = match c.accumulation {
            Accumulation::Ema => "ema",
            Accumulation::Direct => "direct",
        };
        writeln!(s, "accumulation = {acc}").unwrap();
        writeln!(s, "stepsize = {}", c.stepsize).unwrap();
        writeln!(s, "momentum = {}", c.momentum).unwrap();
        match c.clip_norm {
            Some(x) => writeln!(s, "clip_norm = {}", num(x)).unwrap(),
            None => writeln!(s, "clip_norm = none").unwrap(),
        }
        writeln!(s, "weight_decay = {}", num(c.weight_decay)).unwrap();
        writeln!(s, "a_total = {}", num(self.a_total)).unwrap();
        writeln!(s, "v = {}", array(&self.v)).unwrap();
        writeln!(s, "v_hat = {}", array(&self.v_hat)).unwrap();
        writeln!(s, "m = {}", array(&self.m)).unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        match state_from_text(text)? {
            OptimizerState::Bagm(s) => Ok(s),
            OptimizerState::Bag(_) => Err(bad("expected a bagm checkpoint, found bag")),
        }
    }
}

impl OptimizerState {
    pub fn to_text(&self) -> String {
        match self {
            OptimizerState::Bag(s) => s.to_text(),
            OptimizerState::Bagm(s) => s.to_text(),
        }
    }
}

pub fn state_serialize(state: &OptimizerState) -> Vec<u8> {
    state.to_text().into_bytes()
}

pub fn state_deserialize(bytes: &[u8]) -> Result<OptimizerState> {
    let text = std::str::from_utf8(bytes).map_err(|_| bad("not valid UTF-8"))?;
    state_from_text(text)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct Fields<'a> {
    map: HashMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn get(&self, key: &str) -> Result<&'a str> {
        self.map
            .get(key)
            .copied()
            .ok_or_else(|| bad(format!("missing field `{key}` (truncated?)")))
    }

    fn float(&self, key: &str) -> Result<f64> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| bad(format!("field `{key}`: `{v}` is not a number")))
    }

    fn array(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.get(key)?;
        let (len, rest) = v
            .split_once(':')
            .ok_or_else(|| bad(format!("field `{key}`: missing length prefix")))?;
        let len: usize = len
            .trim()
            .parse()
            .map_err(|_| bad(format!("field `{key}`: bad length")))?;
        let xs = rest
            .split_whitespace()
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad(format!("field `{key}`: bad number")))?;
        if xs.len() != len {
            return Err(bad(format!(
                "field `{key}`: expected {len} values, found {}",
                xs.len()
            )));
        }
        Ok(xs)
    }
}

fn split(l: &str) -> Option<(&str, &str)> {
    l.split_once('=').map(|(k, v)| (k.trim(), v.trim()))
}

fn state_from_text(text: &str) -> Result<OptimizerState> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));

    match lines.next().and_then(split) {
        Some(("format", FORMAT)) => {}
        _ => return Err(bad("corrupted header")),
    }
    match lines.next().and_then(split) {
        Some(("version", v)) if v == VERSION.to_string() => {}
        Some(("version", v)) => return Err(bad(format!("unsupported version {v}"))),
        _ => return Err(bad("corrupted header")),
    }
    let mut map = HashMap::new();
    for l in lines {
        let (k, v) = split(l).ok_or_else(|| bad(format!("malformed line `{l}`")))?;
        if map.insert(k, v).is_some() {
            return Err(bad(format!("duplicate field `{k}`")));
        }
    }
    let f = Fields { map };
    let t: u64 = f
        .get("t")?
        .parse()
        .map_err(|_| bad("field `t`: not an integer"))?;

    match f.get("kind")? {
        "bag" => Ok(OptimizerState::Bag(BagState {
            v: f.array("v")?,
            t,
            eta: f.float("eta")?,
            eps: f.float("eps")?,
        })),
        "bagm" => {
            let momentum: MomentumSchedule = f.get("momentum")?.parse()?;
            let config = BagmConfig {
                weights: f.get("weights")?.parse::<EmaSchedule>()?,
                accumulation: match f.get("accumulation")? {
                    "ema" => Accumulation::Ema,
                    "direct" => Accumulation::Direct,
                    other => return Err(bad(format!("unknown accumulation `{other}`"))),
                },
                stepsize: StepsizeSchedule::parse(f.get("stepsize")?, momentum)?,
                momentum,
                eps: f.float("eps")?,
                allow_zero_eps: f
                    .get("allow_zero_eps")?
                    .parse()
                    .map_err(|_| bad("field `allow_zero_eps`: expected true/false"))?,
                clip_norm: match f.get("clip_norm")? {
                    "none" => None,
                    _ => Some(f.float("clip_norm")?),
                },
                weight_decay: f.float("weight_decay")?,
            };
            config.validate()?;
            let v = f.array("v")?;
            let v_hat = f.array("v_hat")?;
            if v.len() != v_hat.len() {
                return Err(bad("`v` and `v_hat` lengths differ"));
            }
            Ok(OptimizerState::Bagm(BagmState {
                config,
                v,
                v_hat,
                m: f.array("m")?,
                a_total: f.float("a_total")?,
                t,
            }))
        }
        other => Err(bad(format!("unknown kind `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::BlockPartition;
    use crate::schedules::WeightSequence;
    use crate::Rng;

    fn bagm_config() -> BagmConfig {
        let momentum = MomentumSchedule::constant(0.9).unwrap();
        let mut c = BagmConfig::new(
            WeightSequence::exponential(0.999).unwrap(),
            StepsizeSchedule::bias_corrected(0.01, momentum).unwrap(),
            momentum,
            1e-8,
        );
        c.clip_norm = Some(0.25);
        c
    }

    #[test]
    fn fresh_state_round_trip() {
        let p = BlockPartition::from_sizes(&[3, 2]).unwrap();
        let s = BagmState::new(bagm_config(), &p).unwrap();
        let back = state_deserialize(&state_serialize(&OptimizerState::Bagm(s.clone()))).unwrap();
        assert_eq!(back, OptimizerState::Bagm(s));

        let b = BagState::for_partition(&p, 0.01, 1e-8).unwrap();
        assert_eq!(BagState::from_text(&b.to_text()).unwrap(), b);
    }

    #[test]
    fn resume_is_bit_identical() {
        let p = BlockPartition::from_sizes(&[4, 3, 1]).unwrap();
        let mut rng = Rng::new(21);
        let grads: Vec<Vec<f64>> = (0..200).map(|_| rng.normal_vec(8)).collect();

        let mut full = BagmState::new(bagm_config(), &p).unwrap();
        let mut theta_full = vec![0.5; 8];
        for g in &grads {
            full.step(&mut theta_full, g, &p).unwrap();
        }

        let mut first = BagmState::new(bagm_config(), &p).unwrap();
        let mut theta = vec![0.5; 8];
        for g in &grads[..100] {
            first.step(&mut theta, g, &p).unwrap();
        }
        let mut resumed = BagmState::from_text(&first.to_text()).unwrap();
        assert_eq!(resumed, first);
        for g in &grads[100..] {
            resumed.step(&mut theta, g, &p).unwrap();
        }
        assert_eq!(resumed, full);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&theta), bits(&theta_full));
    }

    #[test]
    fn bag_resume_is_bit_identical() {
        let p = BlockPartition::from_sizes(&[2, 2]).unwrap();
        let mut rng = Rng::new(4);
        let grads: Vec<Vec<f64>> = (0..200).map(|_| rng.normal_vec(4)).collect();
        let mut full = BagState::for_partition(&p, 0.1, 1e-8).unwrap();
        let mut a = vec![0.0; 4];
        for g in &grads {
            full.step(&mut a, g, &p).unwrap();
        }
        let mut part = BagState::for_partition(&p, 0.1, 1e-8).unwrap();
        let mut b = vec![0.0; 4];
        for g in &grads[..100] {
            part.step(&mut b, g, &p).unwrap();
        }
        let mut part = BagState::from_text(&part.to_text()).unwrap();
        for g in &grads[100..] {
            part.step(&mut b, g, &p).unwrap();
        }
        assert_eq!(part, full);
        assert_eq!(a, b);
    }

    #[test]
    fn corrupted_and_truncated_streams() {
        let p = BlockPartition::from_sizes(&[3, 2]).unwrap();
        let text = BagmState::new(bagm_config(), &p).unwrap().to_text();

        let corrupted = text.replacen("blockgrad-state", "blockgrad-stat", 1);
        assert!(matches!(
            state_deserialize(corrupted.as_bytes()),
            Err(Error::Checkpoint(_))
        ));

        let future = text.replacen("version = 1", "version = 2", 1);
        match state_deserialize(future.as_bytes()) {
            Err(Error::Checkpoint(m)) => assert!(m.contains("version")),
            other => panic!("unexpected {other:?}"),
        }

        let cut = &text[..text.len() - 30];
        assert!(state_deserialize(cut.as_bytes()).is_err());
        assert!(state_deserialize(b"").is_err());
    }
}
