use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Probabilities are kept inside `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Logit,
    #[serde(alias = "log-log")]
    LogLog,
    #[serde(alias = "clog-log")]
    CLogLog,
}

impl Link {
    pub const ALL: [Link; 3] = [Link::Logit, Link::LogLog, Link::CLogLog];

    pub fn name(self) -> &'static str {
        match self {
            Link::Logit => "logit",
            Link::LogLog => "loglog",
            Link::CLogLog => "cloglog",
        }
    }

    /// `g(p)`.
    pub fn forward(self, p: f64) -> f64 {
        match self {
            Link::Logit => (p / (1.0 - p)).ln(),
            Link::LogLog => -(-p.ln()).ln(),
            Link::CLogLog => (-(-p).ln_1p()).ln(),
        }
    }

    /// `g^{-1}(x)`, clamped to the open unit interval.
    pub fn inverse(self, x: f64) -> f64 {
        self.inverse_unclamped(x)
            .clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
    }

    fn inverse_unclamped(self, x: f64) -> f64 {
        match self {
            Link::Logit => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            Link::LogLog => (-(-x).exp()).exp(),
            Link::CLogLog => -(-x.exp()).exp_m1(),
        }
    }

    /// `(ln p, ln(1 - p))` at `p = g^{-1}(x)`, computed without forming
    /// `1 - p` and floored at `ln(PROB_CLAMP)`.
    pub fn log_probs(self, x: f64) -> (f64, f64) {
        let floor = PROB_CLAMP.ln();
        let (lp, lq) = match self {
            Link::Logit => {
                let lp = -softplus(-x);
                (lp, lp - x)
            }
            Link::LogLog => {
                let t = (-x).exp();
                (-t, ln_one_minus_exp_neg(t))
            }
            Link::CLogLog => {
                let t = x.exp();
                (ln_one_minus_exp_neg(t), -t)
            }
        };
        (lp.max(floor), lq.max(floor))
    }
}

/// `ln(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln(1 - e^{-t})` for `t >= 0`.
fn ln_one_minus_exp_neg(t: f64) -> f64 {
    if t > std::f64::consts::LN_2 {
        (-(-t).exp()).ln_1p()
    } else {
        (-(-t).exp_m1()).ln()
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "logit" => Ok(Link::Logit),
            "loglog" | "log-log" => Ok(Link::LogLog),
            "cloglog" | "clog-log" => Ok(Link::CLogLog),
            other => Err(Error::InvalidArgument(format!(
                "unknown link '{other}' (expected logit, loglog or cloglog)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_at_zero() {
        assert!((Link::Logit.inverse(0.0) - 0.5).abs() < 1e-15);
        assert!((Link::CLogLog.inverse(0.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((Link::CLogLog.inverse(0.0) - 0.632121).abs() < 1e-6);
        assert!((Link::LogLog.inverse(0.0) - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn round_trip_across_range() {
        for link in Link::ALL {
            for i in 0..=600 {
                let x = -30.0 + 0.1 * f64::from(i);
                let p = link.inverse_unclamped(x);
                if p <= 0.0 || p >= 1.0 {
                    continue;
                }
                let back = link.forward(p);
                // forward is ill-conditioned where p saturates; compare in
                // the probability scale there
                let ok =
                    (back - x).abs() < 1e-10 || (link.inverse_unclamped(back) - p).abs() < 1e-15;
                assert!(ok, "{link}: x={x} p={p} back={back}");
            }
            for p in [1e-6, 0.01, 0.2, 0.5, 0.8, 0.99, 1.0 - 1e-6] {
                assert!(
                    (link.inverse(link.forward(p)) - p).abs() < 1e-10,
                    "{link} {p}"
                );
            }
        }
    }

    #[test]
    fn strictly_increasing() {
        for link in Link::ALL {
            let mut prev = 0.0;
            // beyond |x| = 3 the double exponential links saturate at the clamp
            for i in 0..=200 {
                let x = -3.0 + 0.03 * f64::from(i);
                let p = link.inverse(x);
                assert!(p > prev, "{link} at {x}");
                prev = p;
            }
        }
    }

    #[test]
    fn log_probs_agree_with_direct_logs() {
        for link in Link::ALL {
            for x in [-5.0, -1.3, 0.0, 0.7, 2.5, 5.0] {
                let p = link.inverse(x);
                if !(1e-9..=1.0 - 1e-9).contains(&p) {
                    continue;
                }
                let (lp, lq) = link.log_probs(x);
                assert!((lp - p.ln()).abs() < 1e-9, "{link} {x}");
                assert!((lq - (1.0 - p).ln()).abs() < 1e-9, "{link} {x}");
            }
            let (lp, lq) = link.log_probs(1e6);
            assert!(lp.is_finite() && lq.is_finite());
            let (lp, lq) = link.log_probs(-1e6);
            assert!(lp.is_finite() && lq.is_finite());
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("clog-log".parse::<Link>().unwrap(), Link::CLogLog);
        assert_eq!("LOGLOG".parse::<Link>().unwrap(), Link::LogLog);
        assert!("probit".parse::<Link>().is_err());
        assert_eq!(
            serde_json::to_string(&Link::CLogLog).unwrap(),
            "\"cloglog\""
        );
    }
}
