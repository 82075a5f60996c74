//! Weight sequences for second-moment averaging, stepsize schedules and
//! momentum schedules.
//!
//! A weight sequence `a_t` defines the weighted average
//! `v̂_t = Σ_{i≤t} (a_i / A_t) x_i` with `A_t = Σ_{i≤t} a_i`, which can be
//! maintained as an exponential moving average with coefficient
//! `α_t = 1 − a_t / A_t`. The three supported sequences are constant
//! (`a_t = a`), polynomial (`a_t = t^τ`) and exponential (`a_t = α^{−t}`).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

fn check_step(t: u64) -> Result<()> {
    if t < 1 {
        return Err(Error::Schedule {
            name: "t",
            reason: "steps are numbered from 1".into(),
        });
    }
    Ok(())
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Schedule {
            name,
            reason: format!("must be positive and finite, got {v}"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightSequence {
    Constant { a: f64 },
    Polynomial { tau: f64 },
    Exponential { alpha: f64 },
}

impl WeightSequence {
    pub fn constant(a: f64) -> Result<Self> {
        Ok(WeightSequence::Constant {
            a: positive("a", a)?,
        })
    }

    pub fn polynomial(tau: f64) -> Result<Self> {
        Ok(WeightSequence::Polynomial {
            tau: positive("tau", tau)?,
        })
    }

    pub fn exponential(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Schedule {
                name: "alpha",
                reason: format!("must lie in (0, 1), got {alpha}"),
            });
        }
        Ok(WeightSequence::Exponential { alpha })
    }

    /// `a_t`. May be `+inf` for the exponential sequence at large `t`.
    pub fn weight(&self, t: u64) -> Result<f64> {
        check_step(t)?;
        Ok(match *self {
            WeightSequence::Constant { a } => a,
            WeightSequence::Polynomial { tau } => (t as f64).powf(tau),
            WeightSequence::Exponential { alpha } => alpha.powf(-(t as f64)),
        })
    }

    /// `A_t = Σ_{i≤t} a_i`, recomputed from scratch.
    pub fn cumulative(&self, t: u64) -> Result<f64> {
        check_step(t)?;
        Ok(match *self {
            WeightSequence::Constant { a } => a * t as f64,
            WeightSequence::Polynomial { tau } => (1..=t).map(|i| (i as f64).powf(tau)).sum(),
            WeightSequence::Exponential { alpha } => {
                (alpha.powf(-(t as f64)) - 1.0) / (1.0 - alpha)
            }
        })
    }

    /// `(a_t, A_t)`
    pub fn weight_at(&self, t: u64) -> Result<(f64, f64)> {
        Ok((self.weight(t)?, self.cumulative(t)?))
    }

    /// EMA coefficient `α_t = 1 − a_t / A_t`.
    ///
    /// The exponential sequence uses `α(1 − α^{t−1}) / (1 − α^t)`, which stays
    /// finite where `α^{−t}` overflows.
    pub fn ema_coeff(&self, t: u64) -> Result<f64> {
        check_step(t)?;
        Ok(match *self {
            WeightSequence::Constant { .. } => 1.0 - 1.0 / t as f64,
            WeightSequence::Exponential { alpha } => exp_ema_coeff(alpha, t),
            WeightSequence::Polynomial { .. } => {
                let (a, big_a) = self.weight_at(t)?;
                1.0 - a / big_a
            }
        })
    }

    /// The smallest `ω` with `A_t / (A_{t−1} + a_1) ≤ ω` for all `t`.
    pub fn omega(&self) -> f64 {
        match *self {
            WeightSequence::Constant { .. } => 1.0,
            WeightSequence::Polynomial { tau } => (1.0 + 2f64.powf(tau)) / 2.0,
            WeightSequence::Exponential { alpha } => (1.0 + 1.0 / alpha) / 2.0,
        }
    }

    pub fn accumulator(&self) -> WeightAccumulator {
        WeightAccumulator {
            seq: *self,
            t: 0,
            total: 0.0,
        }
    }
}

fn exp_ema_coeff(alpha: f64, t: u64) -> f64 {
    if t == 1 {
        return 0.0;
    }
    // α(1 − α^{t−1}) / (1 − α^t), written with expm1 for accuracy near α → 1
    let ln_a = alpha.ln();
    let num = -(ln_a * (t - 1) as f64).exp_m1();
    let den = -(ln_a * t as f64).exp_m1();
    alpha * num / den
}

impl fmt::Display for WeightSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSequence::Constant { a } => write!(f, "constant {a}"),
            WeightSequence::Polynomial { tau } => write!(f, "poly {tau}"),
            WeightSequence::Exponential { alpha } => write!(f, "exp {alpha}"),
        }
    }
}

impl FromStr for WeightSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, args) = split_words(s);
        match (head, args.as_slice()) {
            ("constant" | "const", [a]) => WeightSequence::constant(parse_num("a", a)?),
            ("poly" | "polynomial", [tau]) => WeightSequence::polynomial(parse_num("tau", tau)?),
            ("exp" | "exponential", [alpha]) => {
                WeightSequence::exponential(parse_num("alpha", alpha)?)
            }
            _ => Err(Error::config(
                "weight_seq",
                format!("expected `constant A`, `poly TAU` or `exp ALPHA`, got `{s}`"),
            )),
        }
    }
}

/// Incremental `(a_t, A_t)` generator.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightAccumulator {
    seq: WeightSequence,
    t: u64,
    total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightStep {
    pub t: u64,
    pub weight: f64,
    pub total: f64,
    pub ema_coeff: f64,
}

impl WeightAccumulator {
    pub fn step(&self) -> u64 {
        self.t
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn next_step(&mut self) -> Result<WeightStep> {
        self.t += 1;
        let weight = self.seq.weight(self.t)?;
        self.total += weight;
        let ema_coeff = match self.seq {
            WeightSequence::Exponential { alpha } => exp_ema_coeff(alpha, self.t),
            _ => 1.0 - weight / self.total,
        };
        Ok(WeightStep {
            t: self.t,
            weight,
            total: self.total,
            ema_coeff,
        })
    }
}

/// Coefficients for the EMA form of the second-moment estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmaSchedule {
    Weights(WeightSequence),
    /// `α_t = 1 − (c + 1) / (t + c)`; EMA-only, no weight sequence behind it.
    PolynomialDecay {
        c: f64,
    },
}

impl EmaSchedule {
    pub fn polynomial_decay(c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::Schedule {
                name: "c",
                reason: format!("must be non-negative, got {c}"),
            });
        }
        Ok(EmaSchedule::PolynomialDecay { c })
    }

    pub fn ema_coeff(&self, t: u64) -> Result<f64> {
        match self {
            EmaSchedule::Weights(w) => w.ema_coeff(t),
            EmaSchedule::PolynomialDecay { c } => {
                check_step(t)?;
                Ok(1.0 - (c + 1.0) / (t as f64 + c))
            }
        }
    }
}

impl fmt::Display for EmaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmaSchedule::Weights(w) => w.fmt(f),
            EmaSchedule::PolynomialDecay { c } => write!(f, "polydecay {c}"),
        }
    }
}

impl FromStr for EmaSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, args) = split_words(s);
        match (head, args.as_slice()) {
            ("polydecay", [c]) => EmaSchedule::polynomial_decay(parse_num("c", c)?),
            _ => Ok(EmaSchedule::Weights(s.parse()?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentumSchedule {
    Constant {
        beta: f64,
    },
    /// `β_t = β (1 − 1 / t^τ)`
    Increasing {
        beta: f64,
        tau: f64,
    },
}

impl MomentumSchedule {
    pub fn constant(beta: f64) -> Result<Self> {
        Ok(MomentumSchedule::Constant {
            beta: check_beta(beta)?,
        })
    }

    pub fn increasing(beta: f64, tau: f64) -> Result<Self> {
        Ok(MomentumSchedule::Increasing {
            beta: check_beta(beta)?,
            tau: positive("tau", tau)?,
        })
    }

    pub fn beta_at(&self, t: u64) -> Result<f64> {
        check_step(t)?;
        Ok(match *self {
            MomentumSchedule::Constant { beta } => beta,
            MomentumSchedule::Increasing { beta, tau } => beta * (1.0 - (t as f64).powf(-tau)),
        })
    }

    /// `β̃_t = Π_{i≤t} β_i`
    pub fn cumulative_product(&self, t: u64) -> Result<f64> {
        check_step(t)?;
        Ok(match *self {
            MomentumSchedule::Constant { beta } => beta.powf(t as f64),
            MomentumSchedule::Increasing { .. } => {
                let mut p = 1.0;
                for i in 1..=t {
                    p *= self.beta_at(i)?;
                    if p == 0.0 {
                        break;
                    }
                }
                p
            }
        })
    }
}

fn check_beta(beta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::Schedule {
            name: "beta",
            reason: format!("must lie in [0, 1), got {beta}"),
        });
    }
    Ok(beta)
}

impl fmt::Display for MomentumSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MomentumSchedule::Constant { beta } => write!(f, "const {beta}"),
            MomentumSchedule::Increasing { beta, tau } => write!(f, "increasing {beta} {tau}"),
        }
    }
}

impl FromStr for MomentumSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, args) = split_words(s);
        match (head, args.as_slice()) {
            ("const" | "constant", [beta]) => MomentumSchedule::constant(parse_num("beta", beta)?),
            ("increasing", [beta]) => MomentumSchedule::increasing(parse_num("beta", beta)?, 1.0),
            ("increasing", [beta, tau]) => {
                MomentumSchedule::increasing(parse_num("beta", beta)?, parse_num("tau", tau)?)
            }
            _ => Err(Error::config(
                "momentum",
                format!("expected `const BETA` or `increasing BETA [TAU]`, got `{s}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepsizeSchedule {
    Constant {
        eta: f64,
    },
    InvSqrt {
        eta: f64,
    },
    /// `η_t = η / (√t (1 − β̃_t))`
    BiasCorrectedInvSqrt {
        eta: f64,
        momentum: MomentumSchedule,
    },
}

impl StepsizeSchedule {
    pub fn constant(eta: f64) -> Result<Self> {
        Ok(StepsizeSchedule::Constant {
            eta: positive("eta", eta)?,
        })
    }

    pub fn inv_sqrt(eta: f64) -> Result<Self> {
        Ok(StepsizeSchedule::InvSqrt {
            eta: positive("eta", eta)?,
        })
    }

    pub fn bias_corrected(eta: f64, momentum: MomentumSchedule) -> Result<Self> {
        Ok(StepsizeSchedule::BiasCorrectedInvSqrt {
            eta: positive("eta", eta)?,
            momentum,
        })
    }

    pub fn eta(&self) -> f64 {
        match *self {
            StepsizeSchedule::Constant { eta }
            | StepsizeSchedule::InvSqrt { eta }
            | StepsizeSchedule::BiasCorrectedInvSqrt { eta, .. } => eta,
        }
    }

    pub fn stepsize_at(&self, t: u64) -> Result<f64> {
        check_step(t)?;
        match *self {
            StepsizeSchedule::Constant { eta } => Ok(eta),
            StepsizeSchedule::InvSqrt { eta } => Ok(eta / (t as f64).sqrt()),
            StepsizeSchedule::BiasCorrectedInvSqrt { eta, momentum } => {
                let prod = momentum.cumulative_product(t)?;
                if prod >= 1.0 {
                    return Err(Error::Schedule {
                        name: "beta",
                        reason: "cumulative momentum product reached 1".into(),
                    });
                }
                Ok(eta / ((t as f64).sqrt() * (1.0 - prod)))
            }
        }
    }

    /// Parses `const ETA`, `invsqrt ETA` or `bias_corrected ETA`; the last one
    /// is paired with `momentum`.
    pub fn parse(s: &str, momentum: MomentumSchedule) -> Result<Self> {
        let (head, args) = split_words(s);
        match (head, args.as_slice()) {
            ("const" | "constant", [eta]) => StepsizeSchedule::constant(parse_num("eta", eta)?),
            ("invsqrt", [eta]) => StepsizeSchedule::inv_sqrt(parse_num("eta", eta)?),
            ("bias_corrected", [eta]) => {
                StepsizeSchedule::bias_corrected(parse_num("eta", eta)?, momentum)
            }
            _ => Err(Error::config(
                "stepsize",
                format!("expected `const ETA`, `invsqrt ETA` or `bias_corrected ETA`, got `{s}`"),
            )),
        }
    }
}

impl fmt::Display for StepsizeSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepsizeSchedule::Constant { eta } => write!(f, "const {eta}"),
            StepsizeSchedule::InvSqrt { eta } => write!(f, "invsqrt {eta}"),
            StepsizeSchedule::BiasCorrectedInvSqrt { eta, .. } => write!(f, "bias_corrected {eta}"),
        }
    }
}

fn split_words(s: &str) -> (&str, Vec<&str>) {
    let mut it = s.split_whitespace();
    let head = it.next().unwrap_or("");
    (head, it.collect())
}

fn parse_num(name: &'static str, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Schedule {
        name,
        reason: format!("`{s}` is not a number"),
    })
}
