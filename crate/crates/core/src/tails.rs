//! Exponential tail bounds for `W` when `W + L + c` dominates a copy of a
//! Bernoulli sum `M`, with `L` a Bernoulli sum independent of `W`.
//!
//! Lower tail, any `λ >= 0`:
//! `P(W < ξ) <= exp(-λ(μ - ξ - c) + λ²/2 · (μ + κ s2))`.
//!
//! Upper tail, `λ ∈ [0, ln 2]`:
//! `P(W >= ξ) <= exp(-λ(ξ - μ) + λ² (μ + 4 s2))`.
//!
//! Here `μ = E[M] - E[L]` and `s2 = Σ E[Y_i]²` over the Bernoulli summands
//! `Y_i` of `L`. Bounds are computed in log space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IdlaError, Result};
use crate::walk::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBoundInput {
    pub mu: f64,
    pub xi: f64,
    pub c: f64,
    pub kappa: f64,
    pub s2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lambda: f64,
    /// The exponent itself; may be positive.
    pub log_bound: f64,
    /// `min(1, exp(log_bound))`.
    pub bound: f64,
}

impl Bound {
    fn from_log(lambda: f64, log_bound: f64) -> Self {
        Bound { lambda, log_bound, bound: log_bound.min(0.0).exp() }
    }
}

pub const UPPER_LAMBDA_MAX: f64 = std::f64::consts::LN_2;

impl TailBoundInput {
    fn check(&self, which: Tail) -> Result<()> {
        let finite = [self.mu, self.xi, self.c, self.kappa, self.s2].iter().all(|v| v.is_finite());
        if !finite {
            return Err(IdlaError::InvalidInput("tail bound inputs must be finite".into()));
        }
        if self.mu < 0.0 {
            return Err(IdlaError::InvalidInput(format!("mu must be >= 0, got {}", self.mu)));
        }
        if self.s2 < 0.0 {
            return Err(IdlaError::InvalidInput(format!("s2 must be >= 0, got {}", self.s2)));
        }
        if which == Tail::Lower {
            if self.kappa <= 1.0 {
                return Err(IdlaError::InvalidInput(format!("kappa must be > 1, got {}", self.kappa)));
            }
            if self.c < 0.0 {
                return Err(IdlaError::InvalidInput(format!("c must be >= 0, got {}", self.c)));
            }
        }
        Ok(())
    }

    pub fn lower_exponent(&self, lambda: f64) -> f64 {
        -lambda * (self.mu - self.xi - self.c) + 0.5 * lambda * lambda * (self.mu + self.kappa * self.s2)
    }

    pub fn upper_exponent(&self, lambda: f64) -> f64 {
        -lambda * (self.xi - self.mu) + lambda * lambda * (self.mu + 4.0 * self.s2)
    }
}

pub fn lower_tail_bound(input: &TailBoundInput, lambda: f64) -> Result<Bound> {
    input.check(Tail::Lower)?;
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(IdlaError::InvalidInput(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(Bound::from_log(lambda, input.lower_exponent(lambda)))
}

pub fn upper_tail_bound(input: &TailBoundInput, lambda: f64) -> Result<Bound> {
    input.check(Tail::Upper)?;
    if !(0.0..=UPPER_LAMBDA_MAX).contains(&lambda) {
        return Err(IdlaError::LambdaOutOfRange { lambda, max: UPPER_LAMBDA_MAX });
    }
    Ok(Bound::from_log(lambda, input.upper_exponent(lambda)))
}

/// Minimizes the exponent over the admissible `λ`.
pub fn optimize_lambda(input: &TailBoundInput, which: Tail) -> Result<Bound> {
    input.check(which)?;
    match which {
        Tail::Lower => {
            let gain = input.mu - input.xi - input.c;
            let curvature = input.mu + input.kappa * input.s2;
            let lambda = if gain <= 0.0 || curvature <= 0.0 { 0.0 } else { gain / curvature };
            Ok(Bound::from_log(lambda, input.lower_exponent(lambda)))
        }
        Tail::Upper => {
            let gain = input.xi - input.mu;
            let curvature = input.mu + 4.0 * input.s2;
            let lambda = if gain <= 0.0 {
                0.0
            } else if curvature <= 0.0 {
                UPPER_LAMBDA_MAX
            } else {
                (gain / (2.0 * curvature)).min(UPPER_LAMBDA_MAX)
            };
            Ok(Bound::from_log(lambda, input.upper_exponent(lambda)))
        }
    }
}

/// Success probabilities of the Bernoulli summands of `M` and of `L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliSpec {
    pub m: Vec<f64>,
    pub l: Vec<f64>,
}

impl BernoulliSpec {
    pub fn mu(&self) -> f64 {
        self.m.iter().sum::<f64>() - self.l.iter().sum::<f64>()
    }

    pub fn s2(&self) -> f64 {
        self.l.iter().map(|p| p * p).sum()
    }

    /// Summands of `M` left after removing one copy of each `L` summand.
    fn extras(&self) -> Result<Vec<f64>> {
        let mut rest = self.m.clone();
        for p in &self.l {
            let pos = rest
                .iter()
                .position(|q| q == p)
                .ok_or_else(|| IdlaError::InvalidInput(format!("L summand {p} has no matching M summand")))?;
            rest.swap_remove(pos);
        }
        Ok(rest)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub tail: Tail,
    pub trials: u64,
    pub hits: u64,
    pub frequency: f64,
    pub bound: Bound,
    pub input: TailBoundInput,
    /// `frequency <= bound + 3·sqrt(f(1-f)/trials)`.
    pub holds: bool,
}

/// Monte Carlo check of a bound on the extremal coupling. With `M` realized
/// as the sum over all its summands and `L` as the sum over a matching
/// sub-family, `W = M - L - c` (lower) or `W = M - L` (upper) is the sum of
/// the remaining summands, independent of `L`.
pub fn validate_bound(
    spec: &BernoulliSpec,
    xi: f64,
    c: f64,
    kappa: f64,
    tail: Tail,
    trials: u64,
    source: RandomSource,
) -> Result<Validation> {
    let mu = spec.mu();
    if mu < 0.0 {
        return Err(IdlaError::HypothesisViolated { name: "H2", detail: format!("E[M] - E[L] = {mu} < 0") });
    }
    if spec.m.iter().chain(&spec.l).any(|p| !(0.0..=1.0).contains(p)) {
        return Err(IdlaError::InvalidInput("Bernoulli parameters must lie in [0,1]".into()));
    }
    if tail == Tail::Lower {
        let limit = (kappa - 1.0) / kappa;
        if let Some(p) = spec.l.iter().copied().find(|&p| p >= limit) {
            return Err(IdlaError::HypothesisViolated { name: "H1", detail: format!("E[Y] = {p} >= (κ-1)/κ = {limit}") });
        }
    }
    let extras = spec.extras()?;
    let shift = if tail == Tail::Lower { c } else { 0.0 };
    let input = TailBoundInput { mu, xi, c: shift, kappa, s2: spec.s2() };
    let bound = optimize_lambda(&input, tail)?;
    let mut rng = source.rng();
    let mut hits = 0u64;
    for _ in 0..trials {
        let sum = extras.iter().filter(|&&p| rng.random::<f64>() < p).count() as f64;
        let w = sum - shift;
        let event = match tail {
            Tail::Lower => w < xi,
            Tail::Upper => w >= xi,
        };
        hits += event as u64;
    }
    let frequency = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
    let se = crate::stats::binomial_se(frequency, trials);
    Ok(Validation { tail, trials, hits, frequency, bound, input, holds: frequency <= bound.bound + 3.0 * se })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub spec: BernoulliSpec,
    pub xi: f64,
    pub c: f64,
    pub kappa: f64,
    pub tail: Tail,
}

/// Fifty cells: five Bernoulli families, five lower and five upper
/// thresholds each.
pub fn default_grid() -> Vec<GridCell> {
    let rep = |n: usize, p: f64| vec![p; n];
    let ramp: Vec<f64> = (0..100).map(|i| 0.05 + 0.4 * i as f64 / 99.0).collect();
    let families: Vec<(BernoulliSpec, f64)> = vec![
        (BernoulliSpec { m: rep(60, 0.3), l: rep(30, 0.3) }, 2.0),
        (BernoulliSpec { l: ramp.iter().step_by(2).copied().collect(), m: ramp }, 2.0),
        (BernoulliSpec { m: [rep(40, 0.1), rep(40, 0.4)].concat(), l: [rep(20, 0.4), rep(10, 0.1)].concat() }, 2.0),
        (BernoulliSpec { m: rep(200, 0.05), l: rep(100, 0.05) }, 1.5),
        (BernoulliSpec { m: rep(30, 0.45), l: rep(10, 0.45) }, 2.5),
    ];
    let mut cells = Vec::new();
    for (spec, kappa) in families {
        let mu = spec.mu();
        for (j, f) in [0.3, 0.5, 0.7, 0.85, 1.0].into_iter().enumerate() {
            let c = if j % 2 == 0 { 0.0 } else { 1.0 };
            cells.push(GridCell { spec: spec.clone(), xi: (f * mu).round(), c, kappa, tail: Tail::Lower });
        }
        for f in [1.1, 1.3, 1.5, 1.8, 2.2] {
            cells.push(GridCell { spec: spec.clone(), xi: (f * mu).round(), c: 0.0, kappa, tail: Tail::Upper });
        }
    }
    cells
}
