//! Path functionals on the asset block of a trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::TimeGrid;
use crate::linalg::{dot, Matrix};
use crate::models::PathView;

const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffKind {
    AsianBasketCall,
    AsianBasketKnockout,
}

/// Quadrature for the time average of the basket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    #[default]
    Trapezoidal,
    LeftRiemann,
}

/// Open corridor `(lower, upper)` the basket must stay in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec {
    kind: PayoffKind,
    weights: Vec<f64>,
    strike: f64,
    barrier: Option<Barrier>,
    averaging: Averaging,
}

/// Per-path result with the counters behind κ and θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffOutcome {
    pub value: f64,
    /// The time average exceeds the strike.
    pub in_money: bool,
    /// `None` for payoffs without a barrier.
    pub knocked_out: Option<bool>,
}

/// Anything the estimators can price along a path.
pub trait PathFunctional: Sync {
    fn outcome(&self, path: &PathView<'_>, grid: &TimeGrid) -> Result<PayoffOutcome>;

    fn has_barrier(&self) -> bool {
        false
    }
}

impl PayoffSpec {
    pub fn asian_call(weights: Vec<f64>, strike: f64) -> Result<Self> {
        Self::new(PayoffKind::AsianBasketCall, weights, strike, None, Averaging::default())
    }

    pub fn asian_knockout(weights: Vec<f64>, strike: f64, barrier: Barrier) -> Result<Self> {
        Self::new(
            PayoffKind::AsianBasketKnockout,
            weights,
            strike,
            Some(barrier),
            Averaging::default(),
        )
    }

    pub fn new(
        kind: PayoffKind,
        weights: Vec<f64>,
        strike: f64,
        barrier: Option<Barrier>,
        averaging: Averaging,
    ) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: "need at least one finite weight".into(),
            });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: format!("must sum to 1, got {total}"),
            });
        }
        if !(strike.is_finite() && strike > 0.0) {
            return Err(Error::InvalidParameter {
                name: "strike",
                reason: format!("must be positive, got {strike}"),
            });
        }
        match (kind, barrier) {
            (PayoffKind::AsianBasketKnockout, None) => {
                return Err(Error::InvalidParameter {
                    name: "barrier",
                    reason: "knock-out payoff needs barriers".into(),
                })
            }
            (PayoffKind::AsianBasketCall, Some(_)) => {
                return Err(Error::InvalidParameter {
                    name: "barrier",
                    reason: "plain Asian call takes no barrier".into(),
                })
            }
            (_, Some(b)) if !(b.lower < b.upper) => {
                return Err(Error::InvalidParameter {
                    name: "barrier",
                    reason: format!("need lower < upper, got {} and {}", b.lower, b.upper),
                })
            }
            _ => {}
        }
        Ok(PayoffSpec {
            kind,
            weights,
            strike,
            barrier,
            averaging,
        })
    }

    pub fn with_averaging(mut self, averaging: Averaging) -> Self {
        self.averaging = averaging;
        self
    }

    pub fn kind(&self) -> PayoffKind {
        self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn barrier(&self) -> Option<Barrier> {
        self.barrier
    }

    pub fn averaging(&self) -> Averaging {
        self.averaging
    }

    fn basket(&self, path: &PathView<'_>, k: usize) -> Result<f64> {
        let s = path.assets(k);
        if s.len() != self.weights.len() {
            return Err(Error::dims("basket assets", self.weights.len(), s.len()));
        }
        let b = dot(&self.weights, s);
        if b.is_nan() {
            return Err(Error::NonFinite("path state"));
        }
        Ok(b)
    }

    /// `(1/u) ∫₀ᵘ ⟨w, S_t⟩ dt` by the configured quadrature.
    pub fn average(&self, path: &PathView<'_>, grid: &TimeGrid) -> Result<f64> {
        let n = grid.n_steps();
        if path.n_nodes() != n + 1 {
            return Err(Error::dims("path nodes", n + 1, path.n_nodes()));
        }
        let mut acc = 0.0;
        let mut prev = self.basket(path, 0)?;
        for k in 0..n {
            let next = self.basket(path, k + 1)?;
            acc += match self.averaging {
                Averaging::Trapezoidal => 0.5 * (prev + next) * grid.dt(k),
                Averaging::LeftRiemann => prev * grid.dt(k),
            };
            prev = next;
        }
        Ok(acc / grid.horizon())
    }

    /// `1` iff `L < ⟨w, S_{t_k}⟩ < U` at every node including both ends.
    /// Always `1` without a barrier.
    pub fn knockout_indicator(&self, path: &PathView<'_>) -> Result<f64> {
        let Some(b) = self.barrier else {
            return Ok(1.0);
        };
        for k in 0..path.n_nodes() {
            let v = self.basket(path, k)?;
            if !(b.lower < v && v < b.upper) {
                return Ok(0.0);
            }
        }
        Ok(1.0)
    }

    pub fn evaluate(&self, path: &PathView<'_>, grid: &TimeGrid) -> Result<f64> {
        Ok(self.outcome(path, grid)?.value)
    }
}

impl PathFunctional for PayoffSpec {
    fn outcome(&self, path: &PathView<'_>, grid: &TimeGrid) -> Result<PayoffOutcome> {
        let avg = self.average(path, grid)?;
        let call = (avg - self.strike).max(0.0);
        let (value, knocked_out) = match self.barrier {
            Some(_) => {
                let alive = self.knockout_indicator(path)?;
                (call * alive, Some(alive == 0.0))
            }
            None => (call, None),
        };
        Ok(PayoffOutcome {
            value,
            in_money: avg > self.strike,
            knocked_out,
        })
    }

    fn has_barrier(&self) -> bool {
        self.barrier.is_some()
    }
}

/// `w_k ∝ μ_k / |σ_k|` over the asset rows of `Σ`, normalized to sum to one.
pub fn basket_weights(mu: &[f64], sigma: &Matrix) -> Result<Vec<f64>> {
    let n = mu.len();
    if sigma.rows() < n {
        return Err(Error::dims("sigma rows", n, sigma.rows()));
    }
    let mut raw = Vec::with_capacity(n);
    for (k, m) in mu.iter().enumerate() {
        let norm = sigma.row_norm(k);
        if norm == 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("row {k} is the zero vector"),
            });
        }
        raw.push(m / norm);
    }
    let total: f64 = raw.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::InvalidParameter {
            name: "mu",
            reason: "weights μ_k/|σ_k| sum to zero".into(),
        });
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}
