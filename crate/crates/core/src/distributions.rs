//! Message-length laws and their exponential-moment machinery.
//!
//! Every law is described by its moment generating function
//! `φ(θ) = E e^{θξ}`, finite for `θ < θ₊`. Three families are built in:
//!
//! | descriptor          | law                                              | φ(θ)                              |
//! |---------------------|--------------------------------------------------|-----------------------------------|
//! | `exp:c=<c>`         | exponential with rate `c`                        | `c/(c−θ)`                         |
//! | `mix:c=<c>,g=<g>`   | ½·Exp(c+g) + ½·Exp(c−g)                          | `1 + θ(c−θ)/((c−θ)²−g²)`          |
//! | `det:c=<c>`         | constant length `1/c`                            | `e^{θ/c}`                         |
//!
//! Most solvers in this crate work with the *secant slope*
//! `s(θ) = (φ(θ)−1)/θ` rather than with `φ` itself: it is continuous at 0
//! (where it equals the mean), strictly increasing, and free of the
//! cancellation in `φ(θ)−1` for small `θ`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{bisect_increasing, bracket_upward};

/// Largest tilt explored for laws with an unbounded MGF domain, in units of
/// the mean length. Keeps `e^{θ/c}` finite.
const UNBOUNDED_SEARCH_LIMIT: f64 = 700.0;

/// A message-length law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MessageLengthModel {
    /// Exponential lengths with rate `c`.
    Exponential { c: f64 },
    /// Equal-weight mixture of exponentials with rates `c+g` and `c−g`.
    TwoPhaseMixture { c: f64, g: f64 },
    /// Every message has length `1/c`.
    Deterministic { c: f64 },
}

/// Maximiser and value of the Legendre transform at a given slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Legendre {
    pub value: f64,
    pub theta: f64,
}

impl MessageLengthModel {
    pub fn exponential(c: f64) -> Result<Self> {
        let m = Self::Exponential { c };
        m.validate()?;
        Ok(m)
    }

    pub fn mixture(c: f64, g: f64) -> Result<Self> {
        let m = Self::TwoPhaseMixture { c, g };
        m.validate()?;
        Ok(m)
    }

    pub fn deterministic(c: f64) -> Result<Self> {
        let m = Self::Deterministic { c };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.c();
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Domain(format!("rate parameter c must be positive, got {c}")));
        }
        if let Self::TwoPhaseMixture { g, .. } = *self {
            if !(g.is_finite() && (0.0..c).contains(&g)) {
                return Err(Error::Domain(format!("spread g must satisfy 0 <= g < c, got g={g}, c={c}")));
            }
        }
        Ok(())
    }

    fn c(&self) -> f64 {
        match *self {
            Self::Exponential { c } | Self::TwoPhaseMixture { c, .. } | Self::Deterministic { c } => c,
        }
    }

    /// Right end of the MGF domain; `+∞` for the deterministic law.
    pub fn theta_plus(&self) -> f64 {
        match *self {
            Self::Exponential { c } => c,
            Self::TwoPhaseMixture { c, g } => c - g,
            Self::Deterministic { .. } => f64::INFINITY,
        }
    }

    /// Upper limit for numeric searches over `θ`: `θ₊ − ε_dom` with
    /// `ε_dom = 10⁻¹²·max(1, θ₊)`, or a large finite cap when `θ₊ = ∞`.
    pub fn search_cap(&self) -> f64 {
        let tp = self.theta_plus();
        if tp.is_finite() {
            tp - 1e-12 * tp.max(1.0)
        } else {
            UNBOUNDED_SEARCH_LIMIT * self.mean()
        }
    }

    fn check_domain(&self, theta: f64) -> Result<()> {
        if theta.is_nan() || theta >= self.theta_plus() {
            return Err(Error::Domain(format!(
                "tilt {theta} outside the MGF domain (theta_plus = {})",
                self.theta_plus()
            )));
        }
        Ok(())
    }

    /// `φ(θ) = E e^{θξ}`.
    pub fn mgf(&self, theta: f64) -> Result<f64> {
        Ok(1.0 + self.mgf_minus_one(theta)?)
    }

    /// `φ(θ) − 1`, computed without cancellation near `θ = 0`.
    pub fn mgf_minus_one(&self, theta: f64) -> Result<f64> {
        self.check_domain(theta)?;
        Ok(match *self {
            Self::Exponential { c } => theta / (c - theta),
            Self::TwoPhaseMixture { c, g } => {
                let u = c - theta;
                theta * u / (u * u - g * g)
            }
            Self::Deterministic { c } => (theta / c).exp_m1(),
        })
    }

    /// Secant slope `(φ(θ) − 1)/θ`, extended continuously by the mean at 0.
    pub fn mgf_secant(&self, theta: f64) -> Result<f64> {
        self.check_domain(theta)?;
        Ok(match *self {
            Self::Exponential { c } => 1.0 / (c - theta),
            Self::TwoPhaseMixture { c, g } => {
                let u = c - theta;
                u / (u * u - g * g)
            }
            Self::Deterministic { c } => {
                let x = theta / c;
                if x == 0.0 {
                    1.0 / c
                } else {
                    x.exp_m1() / theta
                }
            }
        })
    }

    /// `φ′(θ)`.
    pub fn mgf_prime(&self, theta: f64) -> Result<f64> {
        self.check_domain(theta)?;
        Ok(match *self {
            Self::Exponential { c } => c / ((c - theta) * (c - theta)),
            Self::TwoPhaseMixture { c, g } => {
                let (r1, r2) = (c + g, c - g);
                0.5 * (r1 / ((r1 - theta) * (r1 - theta)) + r2 / ((r2 - theta) * (r2 - theta)))
            }
            Self::Deterministic { c } => (theta / c).exp() / c,
        })
    }

    /// Mean message length, `φ′(0)`.
    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { c } | Self::Deterministic { c } => 1.0 / c,
            Self::TwoPhaseMixture { c, g } => c / (c * c - g * g),
        }
    }

    /// Per-flow stability boundary `λ̂ = 1/φ′(0)`.
    pub fn hat_lambda(&self) -> f64 {
        match *self {
            Self::Exponential { c } | Self::Deterministic { c } => c,
            Self::TwoPhaseMixture { c, g } => (c * c - g * g) / c,
        }
    }

    /// Solve `φ′(θ) = target` for `θ ≥ 0`; `target` must be at least the mean.
    pub fn invert_mgf_prime(&self, target: f64) -> Result<f64> {
        let mean = self.mean();
        if !(target >= mean) {
            return Err(Error::Domain(format!("φ′ target {target} below the mean {mean}")));
        }
        if target == mean {
            return Ok(0.0);
        }
        if let Self::Exponential { c } = *self {
            return Ok(c - (c / target).sqrt());
        }
        let cap = self.search_cap();
        let f = |th: f64| self.mgf_prime(th).unwrap_or(f64::INFINITY) - target;
        let start = (1e-3 * cap).min(1e-3);
        let (lo, hi) = bracket_upward(f, 0.0, start, cap)
            .ok_or_else(|| Error::NoRoot(format!("φ′ stays below {target} on [0, {cap}]")))?;
        Ok(bisect_increasing(f, lo, hi, 0.0))
    }

    /// Legendre transform `sup_θ {θa − λ[φ(θ)−1]}` at slope `a`, together
    /// with its maximiser. Only slopes at or above the mean slope `λφ′(0)`
    /// are accepted.
    pub fn legendre(&self, lambda: f64, a: f64) -> Result<Legendre> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("rate must be positive, got {lambda}")));
        }
        let mean_slope = lambda * self.mean();
        if !(a >= mean_slope * (1.0 - 1e-12)) {
            return Err(Error::Domain(format!("slope {a} below the mean slope {mean_slope}")));
        }
        if a <= mean_slope {
            return Ok(Legendre { value: 0.0, theta: 0.0 });
        }
        let theta = self.invert_mgf_prime(a / lambda)?;
        let value = theta * a - lambda * self.mgf_minus_one(theta)?;
        Ok(Legendre { value: value.max(0.0), theta })
    }

    /// Sampler for the nominal law.
    pub fn sampler(&self) -> LengthSampler {
        match *self {
            Self::Exponential { c } => LengthSampler::exponential(c),
            Self::TwoPhaseMixture { c, g } => LengthSampler::hyper(0.5, c + g, c - g),
            Self::Deterministic { c } => LengthSampler::Constant(1.0 / c),
        }
    }

    /// Sampler for the exponentially tilted law with density
    /// `e^{θx} f(x) / φ(θ)`.
    pub fn tilted_sampler(&self, theta: f64) -> Result<LengthSampler> {
        self.check_domain(theta)?;
        Ok(match *self {
            Self::Exponential { c } => LengthSampler::exponential(c - theta),
            Self::TwoPhaseMixture { c, g } => {
                let (r1, r2) = (c + g, c - g);
                let w1 = r1 / (r1 - theta);
                let w2 = r2 / (r2 - theta);
                LengthSampler::hyper(w1 / (w1 + w2), r1 - theta, r2 - theta)
            }
            Self::Deterministic { c } => LengthSampler::Constant(1.0 / c),
        })
    }

    /// Draw one message length.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().sample(rng)
    }
}

/// A concrete sampler: exponential, two-phase hyperexponential, or constant.
#[derive(Debug, Clone, Copy)]
pub enum LengthSampler {
    Exponential(Exp<f64>),
    Hyper { p_first: f64, first: Exp<f64>, second: Exp<f64> },
    Constant(f64),
}

impl LengthSampler {
    fn exponential(rate: f64) -> Self {
        Self::Exponential(Exp::new(rate).expect("positive rate"))
    }

    fn hyper(p_first: f64, r1: f64, r2: f64) -> Self {
        Self::Hyper {
            p_first,
            first: Exp::new(r1).expect("positive rate"),
            second: Exp::new(r2).expect("positive rate"),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Exponential(e) => e.sample(rng),
            Self::Hyper { p_first, first, second } => {
                if rng.random::<f64>() < *p_first {
                    first.sample(rng)
                } else {
                    second.sample(rng)
                }
            }
            Self::Constant(x) => *x,
        }
    }
}

impl fmt::Display for MessageLengthModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Exponential { c } => write!(f, "exp:c={c}"),
            Self::TwoPhaseMixture { c, g } => write!(f, "mix:c={c},g={g}"),
            Self::Deterministic { c } => write!(f, "det:c={c}"),
        }
    }
}

impl FromStr for MessageLengthModel {
    type Err = Error;

    /// Parses `exp:c=<f>`, `mix:c=<f>,g=<f>` or `det:c=<f>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::Parse { input: s.to_string(), reason: reason.to_string() };
        let (kind, args) = s.trim().split_once(':').ok_or_else(|| bad("expected `<kind>:<params>`"))?;
        let mut c = None;
        let mut g = None;
        for part in args.split(',') {
            let (key, value) = part.split_once('=').ok_or_else(|| bad("expected `key=value`"))?;
            let value: f64 = value.trim().parse().map_err(|_| bad("parameter is not a number"))?;
            match key.trim() {
                "c" => c = Some(value),
                "g" => g = Some(value),
                other => return Err(bad(&format!("unknown parameter `{other}`"))),
            }
        }
        let c = c.ok_or_else(|| bad("missing `c`"))?;
        let model = match kind.trim() {
            "exp" if g.is_none() => Self::Exponential { c },
            "det" if g.is_none() => Self::Deterministic { c },
            "mix" => Self::TwoPhaseMixture { c, g: g.ok_or_else(|| bad("missing `g`"))? },
            "exp" | "det" => return Err(bad("`g` only applies to `mix`")),
            _ => return Err(bad("unknown kind; expected exp, mix or det")),
        };
        model.validate().map_err(|e| bad(&e.to_string()))?;
        Ok(model)
    }
}
