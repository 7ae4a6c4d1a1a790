use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which problem the driver solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    ConvexMin,
    NonConvexMin,
    /// monotone DR-submodular maximization (continuous greedy update from 0)
    DrMax,
}

impl ObjectiveMode {
    pub fn is_max(self) -> bool {
        self == ObjectiveMode::DrMax
    }
}

/// Step size `η_t`, `t = 1, 2, …`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum StepRule {
    /// `1/t`
    InverseT,
    /// `T^{−p}` for horizon `T`
    HorizonPower { power: f64 },
    /// `2/(t + 1)`, i.e. `2/(k + 2)` with `k = t − 1`
    TwoOverTPlusTwo,
    Constant { eta: f64 },
    /// `min{1, c/(t + 1)^a}`
    Grid { c: f64, a: f64 },
}

impl StepRule {
    pub fn eta(&self, t: usize, horizon: usize) -> f64 {
        let t = t as f64;
        match *self {
            StepRule::InverseT => 1.0 / t,
            StepRule::HorizonPower { power } => (horizon.max(1) as f64).powf(-power),
            StepRule::TwoOverTPlusTwo => 2.0 / (t + 1.0),
            StepRule::Constant { eta } => eta,
            StepRule::Grid { c, a } => (c / (t + 1.0).powf(a)).min(1.0),
        }
    }
}

/// Momentum weight `ρ_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum RhoRule {
    /// `(t − 1)^{−α}` for `t ≥ 2`
    Power { alpha: f64 },
    /// `scale/(t + shift)^α`, capped at 1
    Shifted { scale: f64, shift: f64, alpha: f64 },
    Constant { rho: f64 },
}

impl RhoRule {
    pub fn rho(&self, t: usize) -> f64 {
        let tf = t as f64;
        match *self {
            RhoRule::Power { alpha } => {
                if t <= 1 {
                    1.0
                } else {
                    (tf - 1.0).powf(-alpha)
                }
            }
            RhoRule::Shifted { scale, shift, alpha } => (scale / (tf + shift).powf(alpha)).min(1.0),
            RhoRule::Constant { rho } => rho,
        }
    }

    /// The decay exponent, if the rule has one.
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            RhoRule::Power { alpha } | RhoRule::Shifted { alpha, .. } => Some(alpha),
            RhoRule::Constant { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputRule {
    /// `x_{T+1}`
    Last,
    /// `x_o` with `o` uniform on `{1, …, T}`
    UniformRandomIterate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub horizon: usize,
    pub mode: ObjectiveMode,
    pub eta: StepRule,
    pub rho: RhoRule,
    pub output: OutputRule,
}

impl Schedule {
    /// `ρ_t = (t−1)^{−1}`, `η_t = 1/t`, last iterate.
    pub fn convex_min(horizon: usize) -> Self {
        Self {
            horizon,
            mode: ObjectiveMode::ConvexMin,
            eta: StepRule::InverseT,
            rho: RhoRule::Power { alpha: 1.0 },
            output: OutputRule::Last,
        }
    }

    /// `ρ_t = (t−1)^{−2/3}`, `η_t = T^{−2/3}`, uniformly random iterate.
    pub fn nonconvex_min(horizon: usize) -> Self {
        Self {
            horizon,
            mode: ObjectiveMode::NonConvexMin,
            eta: StepRule::HorizonPower { power: 2.0 / 3.0 },
            rho: RhoRule::Power { alpha: 2.0 / 3.0 },
            output: OutputRule::UniformRandomIterate,
        }
    }

    /// `ρ_t = (t−1)^{−1}`, `η_t = 1/T`, start at 0, last iterate.
    pub fn dr_max(horizon: usize) -> Self {
        Self {
            horizon,
            mode: ObjectiveMode::DrMax,
            eta: StepRule::HorizonPower { power: 1.0 },
            rho: RhoRule::Power { alpha: 1.0 },
            output: OutputRule::Last,
        }
    }

    pub fn preset(mode: ObjectiveMode, horizon: usize) -> Self {
        match mode {
            ObjectiveMode::ConvexMin => Self::convex_min(horizon),
            ObjectiveMode::NonConvexMin => Self::nonconvex_min(horizon),
            ObjectiveMode::DrMax => Self::dr_max(horizon),
        }
    }

    /// Momentum-only baseline weights `ρ_t = (t + 3)^{−2/3}`.
    pub fn scg(mode: ObjectiveMode, horizon: usize) -> Self {
        Self { rho: RhoRule::Shifted { scale: 1.0, shift: 3.0, alpha: 2.0 / 3.0 }, ..Self::preset(mode, horizon) }
    }

    /// Black-box continuous greedy: `ρ_t = 2/(t + 3)^{2/3}`, `η = 1/T`.
    pub fn bcg(horizon: usize) -> Self {
        Self { rho: RhoRule::Shifted { scale: 2.0, shift: 3.0, alpha: 2.0 / 3.0 }, ..Self::dr_max(horizon) }
    }

    pub fn eta(&self, t: usize) -> f64 {
        self.eta.eta(t, self.horizon)
    }

    pub fn rho(&self, t: usize) -> f64 {
        self.rho.rho(t)
    }

    /// Checks `η_t ∈ (0, 1]` and `ρ_t ∈ [0, 1]` for every `t ≤ T`.
    pub fn validate(&self) -> Result<()> {
        for t in 1..=self.horizon {
            let e = self.eta(t);
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::InvalidParameter(format!("η_{t} = {e} outside (0, 1]")));
            }
            let r = self.rho(t);
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidParameter(format!("ρ_{t} = {r} outside [0, 1]")));
            }
        }
        if self.mode == ObjectiveMode::DrMax && self.output != OutputRule::Last {
            return Err(Error::InvalidParameter("the maximization mode outputs the last iterate".into()));
        }
        Ok(())
    }
}

/// The step-size grid `min{1, c/(t+1)^a}`, `c ∈ {0.1, 0.25, 0.5, 1, 2}`,
/// `a ∈ {1, 2/3, 1/2}`.
pub fn step_grid() -> Vec<StepRule> {
    let mut out = Vec::new();
    for &c in &[0.1, 0.25, 0.5, 1.0, 2.0] {
        for &a in &[1.0, 2.0 / 3.0, 0.5] {
            out.push(StepRule::Grid { c, a });
        }
    }
    out
}
