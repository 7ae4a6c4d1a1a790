use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::OutputRule;

/// Quantization levels are capped here to bound the level width.
pub const LEVEL_CAP: u32 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QfwSetting {
    FiniteConvex,
    StochConvex,
    FiniteNonConvex,
    StochNonConvex,
}

impl QfwSetting {
    pub fn is_convex(self) -> bool {
        matches!(self, QfwSetting::FiniteConvex | QfwSetting::StochConvex)
    }

    pub fn is_finite(self) -> bool {
        matches!(self, QfwSetting::FiniteConvex | QfwSetting::FiniteNonConvex)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkMode {
    Quantized,
    /// full-precision vectors charged 32 bits per coordinate
    Unquantized,
    /// federated heuristic: local FW steps, then model averaging; no
    /// convergence guarantee and may diverge
    Fl,
}

/// Period length `p_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum PeriodRule {
    /// `2^{i−1}`
    Doubling,
    Fixed { p: usize },
}

/// Per-worker sample count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum BatchRule {
    /// every local component (finite sums only)
    Full,
    Fixed { size: usize },
    /// `⌈p_i / M⌉`
    PeriodOverWorkers,
    /// `⌈σ² p_i² / (M L² D²)⌉`
    Variance { sigma2: f64, l: f64, diameter: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum QfwStep {
    /// `2/(p_i + k)`
    PeriodDecay,
    /// `T^{−1/2}`
    InverseSqrtHorizon,
    Fixed { eta: f64 },
}

/// Quantization levels `(s₁, s₂)` for the up- and down-link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum LevelRule {
    /// `k = 1`: `√(d p_i²/M)`, `√(d p_i²)`; `k ≥ 2`: `√(d p_i/M)`, `√(d p_i)`
    ConvexTheory,
    /// `k = 1`: `√(T d/M)`, `√(T d)`; `k ≥ 2`: `d^{1/2} n^{1/4}/√M`, `d^{1/2} n^{1/4}`
    NonConvexTheory,
    Fixed { s1: u32, s2: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfwConfig {
    pub workers: usize,
    pub setting: QfwSetting,
    pub horizon: usize,
    /// components per worker (finite sums); ignored for stochastic runs
    pub local_size: usize,
    pub mode: LinkMode,
    pub period: PeriodRule,
    pub anchor_batch: BatchRule,
    pub batch: BatchRule,
    pub step: QfwStep,
    pub levels: LevelRule,
    pub output: OutputRule,
    /// local FW steps per round in `fl` mode
    #[serde(default = "default_local_steps")]
    pub local_steps: usize,
    /// run the worker phase on the rayon pool
    #[serde(default)]
    pub parallel: bool,
}

fn default_local_steps() -> usize {
    5
}

fn ceil_pos(x: f64) -> usize {
    if x.is_finite() {
        (x.ceil() as usize).max(1)
    } else {
        usize::MAX
    }
}

fn level(x: f64) -> u32 {
    if !x.is_finite() || x >= LEVEL_CAP as f64 {
        LEVEL_CAP
    } else {
        (x.ceil() as u32).clamp(1, LEVEL_CAP)
    }
}

/// Constants needed by the stochastic convex anchor batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConstants {
    pub sigma2: f64,
    pub l: f64,
    pub diameter: f64,
}

/// Rate-optimal presets per setting. `n` is the per-worker component count for finite sums.
pub fn schedule_from_theorem(
    setting: QfwSetting,
    workers: usize,
    n: usize,
    horizon: usize,
    noise: Option<NoiseConstants>,
) -> Result<QfwConfig> {
    if workers == 0 {
        return Err(Error::InvalidParameter("at least one worker is needed".into()));
    }
    let root_n = ceil_pos((n as f64).sqrt());
    let cfg = match setting {
        QfwSetting::FiniteConvex => QfwConfig {
            workers,
            setting,
            horizon,
            local_size: n,
            mode: LinkMode::Quantized,
            period: PeriodRule::Doubling,
            anchor_batch: BatchRule::Full,
            batch: BatchRule::PeriodOverWorkers,
            step: QfwStep::PeriodDecay,
            levels: LevelRule::ConvexTheory,
            output: OutputRule::Last,
            local_steps: default_local_steps(),
            parallel: false,
        },
        QfwSetting::StochConvex => {
            let c = noise.ok_or_else(|| {
                Error::InvalidParameter("the stochastic convex preset needs σ², L and D".into())
            })?;
            if !(c.sigma2 >= 0.0 && c.l > 0.0 && c.diameter > 0.0) {
                return Err(Error::InvalidParameter("need σ² ≥ 0, L > 0 and D > 0".into()));
            }
            QfwConfig {
                anchor_batch: BatchRule::Variance { sigma2: c.sigma2, l: c.l, diameter: c.diameter },
                setting,
                ..schedule_from_theorem(QfwSetting::FiniteConvex, workers, n, horizon, None)?
            }
        }
        QfwSetting::FiniteNonConvex | QfwSetting::StochNonConvex => QfwConfig {
            workers,
            setting,
            horizon,
            local_size: n,
            mode: LinkMode::Quantized,
            period: PeriodRule::Fixed { p: root_n },
            anchor_batch: BatchRule::Full,
            batch: BatchRule::Fixed { size: ceil_pos(root_n as f64 / workers as f64) },
            step: QfwStep::InverseSqrtHorizon,
            levels: LevelRule::NonConvexTheory,
            output: OutputRule::UniformRandomIterate,
            local_steps: default_local_steps(),
            parallel: false,
        },
    };
    Ok(cfg)
}

impl QfwConfig {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::InvalidParameter("at least one worker is needed".into()));
        }
        if matches!(self.period, PeriodRule::Fixed { p: 0 }) {
            return Err(Error::InvalidParameter("empty period".into()));
        }
        if let LevelRule::Fixed { s1, s2 } = self.levels {
            if s1 == 0 || s2 == 0 {
                return Err(Error::InvalidParameter("quantization levels must be ≥ 1".into()));
            }
        }
        if let QfwStep::Fixed { eta } = self.step {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::InvalidParameter(format!("η = {eta} outside (0, 1]")));
            }
        }
        for b in [self.anchor_batch, self.batch] {
            if matches!(b, BatchRule::Fixed { size: 0 }) {
                return Err(Error::InvalidParameter("batch size must be ≥ 1".into()));
            }
        }
        if self.mode == LinkMode::Fl && self.local_steps == 0 {
            return Err(Error::InvalidParameter("fl mode needs at least one local step".into()));
        }
        Ok(())
    }

    /// `p_i` for period `i ≥ 1`.
    pub fn period_len(&self, i: usize) -> usize {
        match self.period {
            PeriodRule::Doubling => 1usize.checked_shl((i - 1) as u32).unwrap_or(usize::MAX),
            PeriodRule::Fixed { p } => p,
        }
    }

    /// Maps round `t ≥ 1` to `(i, k)` with `t = Σ_{j<i} p_j + k`.
    pub fn locate(&self, t: usize) -> (usize, usize) {
        let mut i = 1;
        let mut rest = t;
        loop {
            let p = self.period_len(i);
            if rest <= p {
                return (i, rest);
            }
            rest -= p;
            i += 1;
        }
    }

    /// `S_{i,k}`, or `None` for "every local component".
    pub fn batch_size(&self, i: usize, k: usize) -> Option<usize> {
        let rule = if k == 1 { self.anchor_batch } else { self.batch };
        let p = self.period_len(i) as f64;
        let m = self.workers as f64;
        match rule {
            BatchRule::Full => None,
            BatchRule::Fixed { size } => Some(size),
            BatchRule::PeriodOverWorkers => Some(ceil_pos(p / m)),
            BatchRule::Variance { sigma2, l, diameter } => {
                Some(ceil_pos(sigma2 * p * p / (m * l * l * diameter * diameter)))
            }
        }
    }

    pub fn eta(&self, i: usize, k: usize) -> f64 {
        match self.step {
            QfwStep::PeriodDecay => 2.0 / (self.period_len(i) as f64 + k as f64),
            QfwStep::InverseSqrtHorizon => 1.0 / (self.horizon.max(1) as f64).sqrt(),
            QfwStep::Fixed { eta } => eta,
        }
    }

    /// `(s₁, s₂)` at `(i, k)` for dimension `d`.
    pub fn levels_at(&self, i: usize, k: usize, d: usize) -> (u32, u32) {
        let d = d as f64;
        let m = self.workers as f64;
        let p = self.period_len(i) as f64;
        match self.levels {
            LevelRule::ConvexTheory => {
                let base = if k == 1 { d * p * p } else { d * p };
                (level((base / m).sqrt()), level(base.sqrt()))
            }
            LevelRule::NonConvexTheory => {
                if k == 1 {
                    let base = self.horizon as f64 * d;
                    (level((base / m).sqrt()), level(base.sqrt()))
                } else {
                    let base = d.sqrt() * (self.local_size as f64).powf(0.25);
                    (level(base / m.sqrt()), level(base))
                }
            }
            LevelRule::Fixed { s1, s2 } => (s1, s2),
        }
    }
}
