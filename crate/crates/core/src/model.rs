//! Domain types shared by every other module: sub-population preferences,
//! the latent-alpha market model, the time grid and the finite game.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// Preferences and initial-inventory law of one sub-population.
#[derive(Debug, Clone, PartialEq)]
pub struct SubPopulationSpec {
    /// Temporary impact (price per unit trading rate).
    pub a: f64,
    /// Running inventory penalty.
    pub phi: f64,
    /// Terminal liquidation penalty.
    pub psi: f64,
    /// Limiting proportion of the total population.
    pub p: f64,
    /// Mean initial inventory.
    pub m0: f64,
    /// Standard deviation of the initial inventory.
    pub s0: f64,
}

impl SubPopulationSpec {
    fn validate(&self, k: usize) -> Result<()> {
        let field = |name: &str| format!("population.subpop[{k}].{name}");
        let finite = [
            ("a", self.a),
            ("phi", self.phi),
            ("psi", self.psi),
            ("p", self.p),
            ("m0", self.m0),
            ("s0", self.s0),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::validation(field(name), "must be finite"));
            }
        }
        if self.a <= 0.0 {
            return Err(Error::validation(field("a"), "temporary impact must be positive"));
        }
        if self.phi < 0.0 {
            return Err(Error::validation(field("phi"), "running penalty must be non-negative"));
        }
        if self.psi <= 0.0 {
            return Err(Error::validation(field("psi"), "terminal penalty must be positive"));
        }
        if !(self.p > 0.0 && self.p < 1.0) && !(self.p == 1.0) {
            return Err(Error::validation(field("p"), "proportion must lie in (0, 1)"));
        }
        if self.s0 < 0.0 {
            return Err(Error::validation(
                field("s0"),
                "initial inventory standard deviation must be non-negative",
            ));
        }
        Ok(())
    }
}

/// The full set of sub-populations plus the permanent impact coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub subpops: Vec<SubPopulationSpec>,
    /// Permanent impact (price per unit average trading rate).
    pub lambda: f64,
}

impl PopulationSpec {
    pub fn k(&self) -> usize {
        self.subpops.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.subpops.is_empty() {
            return Err(Error::validation(
                "population.subpop",
                "at least one sub-population is required",
            ));
        }
        if !self.lambda.is_finite() {
            return Err(Error::validation("population.lambda", "must be finite"));
        }
        for (k, sub) in self.subpops.iter().enumerate() {
            sub.validate(k)?;
        }
        // a single population carries the whole mass
        if self.k() > 1 && self.subpops.iter().any(|s| s.p >= 1.0) {
            return Err(Error::validation(
                "population.subpop.p",
                "proportion must lie in (0, 1)",
            ));
        }
        let total: f64 = self.subpops.iter().map(|s| s.p).sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::validation(
                "population.subpop.p",
                format!("proportions must sum to 1 (got {total})"),
            ));
        }
        Ok(())
    }

    pub fn proportions(&self) -> DVector<f64> {
        DVector::from_iterator(self.k(), self.subpops.iter().map(|s| s.p))
    }

    pub fn initial_means(&self) -> DVector<f64> {
        DVector::from_iterator(self.k(), self.subpops.iter().map(|s| s.m0))
    }

    /// `Λ` with every row equal to `λ (p_1, …, p_K)`.
    pub fn impact_matrix(&self) -> DMatrix<f64> {
        let k = self.k();
        DMatrix::from_fn(k, k, |_, j| self.lambda * self.subpops[j].p)
    }

    /// `(2a)^{-1}` as a diagonal matrix.
    pub fn half_inverse_impact(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.k(),
            self.subpops.iter().map(|s| 0.5 / s.a),
        ))
    }

    pub fn phi_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.k(),
            self.subpops.iter().map(|s| s.phi),
        ))
    }

    pub fn psi_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.k(),
            self.subpops.iter().map(|s| s.psi),
        ))
    }
}

/// Pure-jump latent-alpha price model: the unimpacted price `F` moves by one
/// tick at the jumps of two counting processes whose intensities mean-revert
/// `F` towards a hidden Markov chain `Θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMarketModel {
    pub theta_states: Vec<f64>,
    /// Generator of the latent chain (rows sum to zero).
    pub generator: DMatrix<f64>,
    pub prior: Vec<f64>,
    pub kappa: f64,
    pub sigma: f64,
    pub alpha_tick: f64,
    pub f0: f64,
    pub horizon: f64,
}

impl LatentMarketModel {
    pub fn n_states(&self) -> usize {
        self.theta_states.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.n_states();
        if m == 0 {
            return Err(Error::validation("market.theta_states", "at least one state is required"));
        }
        if self.theta_states.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("market.theta_states", "must be finite"));
        }
        if self.generator.nrows() != m || self.generator.ncols() != m {
            return Err(Error::validation(
                "market.generator",
                format!("must be {m}x{m} to match theta_states"),
            ));
        }
        for i in 0..m {
            let mut row = 0.0;
            for j in 0..m {
                let c = self.generator[(i, j)];
                if !c.is_finite() {
                    return Err(Error::validation("market.generator", "must be finite"));
                }
                if i != j && c < 0.0 {
                    return Err(Error::validation(
                        "market.generator",
                        format!("off-diagonal entry ({i},{j}) is negative"),
                    ));
                }
                row += c;
            }
            if row.abs() > SUM_TOLERANCE {
                return Err(Error::validation(
                    "market.generator",
                    format!("row {i} sums to {row}, expected 0"),
                ));
            }
        }
        if self.prior.len() != m {
            return Err(Error::validation("market.prior", format!("must have {m} entries")));
        }
        if self.prior.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::validation("market.prior", "entries must be non-negative"));
        }
        let total: f64 = self.prior.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::validation(
                "market.prior",
                format!("must sum to 1 (got {total})"),
            ));
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::validation("market.kappa", "must be non-negative"));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::validation("market.sigma", "must be non-negative"));
        }
        if !(self.alpha_tick > 0.0) || !self.alpha_tick.is_finite() {
            return Err(Error::validation("market.alpha_tick", "tick size must be positive"));
        }
        if !self.f0.is_finite() {
            return Err(Error::validation("market.f0", "must be finite"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::validation("market.horizon", "must be positive"));
        }
        Ok(())
    }

    /// Up-jump intensity `σ + κ (θ − F)_+`.
    pub fn gamma_up(&self, theta: f64, f: f64) -> f64 {
        self.sigma + self.kappa * (theta - f).max(0.0)
    }

    /// Down-jump intensity `σ + κ (θ − F)_-`.
    pub fn gamma_down(&self, theta: f64, f: f64) -> f64 {
        self.sigma + self.kappa * (f - theta).max(0.0)
    }

    pub fn gamma_total(&self, theta: f64, f: f64) -> f64 {
        2.0 * self.sigma + self.kappa * (theta - f).abs()
    }

    /// Mean-reversion speed of `F` in price units per unit time: `ακ`.
    pub fn reversion_rate(&self) -> f64 {
        self.alpha_tick * self.kappa
    }
}

/// Uniform time grid on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub t: Vec<f64>,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::validation("run.horizon", "must be positive"));
        }
        if n_steps == 0 {
            return Err(Error::validation("run.n_steps", "must be at least 1"));
        }
        let dt = horizon / n_steps as f64;
        let mut t: Vec<f64> = (0..=n_steps).map(|i| i as f64 * dt).collect();
        t[n_steps] = horizon;
        Ok(TimeGrid { t, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.t[self.n_steps]
    }

    pub fn dt(&self) -> f64 {
        self.horizon() / self.n_steps as f64
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Index of the grid interval `[t_i, t_{i+1})` containing `time`.
    pub fn interval_of(&self, time: f64) -> usize {
        let i = (time / self.dt()).floor() as isize;
        i.clamp(0, self.n_steps as isize - 1) as usize
    }
}

/// Law of the initial inventories of one sub-population.
pub trait InitialInventoryLaw: Send + Sync {
    fn sample<R: Rng + ?Sized>(&self, sub: &SubPopulationSpec, rng: &mut R) -> f64;
}

/// `𝒩(m0, s0²)` draws.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianInventories;

impl InitialInventoryLaw for GaussianInventories {
    fn sample<R: Rng + ?Sized>(&self, sub: &SubPopulationSpec, rng: &mut R) -> f64 {
        if sub.s0 == 0.0 {
            return sub.m0;
        }
        Normal::new(sub.m0, sub.s0)
            .expect("validated standard deviation")
            .sample(rng)
    }
}

/// Every agent starts exactly at its sub-population mean.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanInventories;

impl InitialInventoryLaw for MeanInventories {
    fn sample<R: Rng + ?Sized>(&self, sub: &SubPopulationSpec, _rng: &mut R) -> f64 {
        sub.m0
    }
}

/// Finite-player game: population, market and head counts.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub population: PopulationSpec,
    pub market: LatentMarketModel,
    pub n_agents_per_subpop: Vec<usize>,
    /// Per-agent trading target `𝔔_T`; the engine trades the shifted
    /// initial inventory `𝔔_0 − 𝔔_T`.
    pub target_shift: Option<Vec<f64>>,
}

impl GameSpec {
    pub fn n_agents(&self) -> usize {
        self.n_agents_per_subpop.iter().sum()
    }

    /// Sub-population index of every agent, agents ordered by sub-population.
    pub fn agent_subpops(&self) -> Vec<usize> {
        self.n_agents_per_subpop
            .iter()
            .enumerate()
            .flat_map(|(k, &n)| std::iter::repeat_n(k, n))
            .collect()
    }

    pub fn validate(self) -> Result<Self> {
        self.population.validate()?;
        self.market.validate()?;
        if self.n_agents_per_subpop.len() != self.population.k() {
            return Err(Error::validation(
                "population.subpop.n_agents",
                format!(
                    "expected {} head counts, got {}",
                    self.population.k(),
                    self.n_agents_per_subpop.len()
                ),
            ));
        }
        if let Some(k) = self.n_agents_per_subpop.iter().position(|&n| n == 0) {
            return Err(Error::validation(
                format!("population.subpop[{k}].n_agents"),
                "every sub-population needs at least one agent",
            ));
        }
        if let Some(shift) = &self.target_shift {
            if shift.len() != self.n_agents() {
                return Err(Error::validation(
                    "target_shift",
                    format!("expected {} entries, got {}", self.n_agents(), shift.len()),
                ));
            }
            if shift.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation("target_shift", "must be finite"));
            }
        }
        Ok(self)
    }
}

/// `N_k / N` for each sub-population.
pub fn empirical_proportions(n_agents_per_subpop: &[usize]) -> Vec<f64> {
    let total: usize = n_agents_per_subpop.iter().sum();
    n_agents_per_subpop
        .iter()
        .map(|&n| n as f64 / total as f64)
        .collect()
}

/// Splits `total` agents across sub-populations in proportions `p` by
/// largest-remainder rounding, giving every sub-population at least one agent.
pub fn proportional_counts(total: usize, p: &[f64]) -> Vec<usize> {
    let k = p.len();
    assert!(total >= k, "need at least one agent per sub-population");
    let raw: Vec<f64> = p.iter().map(|&pk| pk * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|&r| (r.floor() as usize).max(1)).collect();
    let mut assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        let ri = raw[i] - raw[i].floor();
        let rj = raw[j] - raw[j].floor();
        rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
    });
    let mut idx = 0;
    while assigned < total {
        counts[order[idx % k]] += 1;
        assigned += 1;
        idx += 1;
    }
    while assigned > total {
        let k_max = (0..k).max_by_key(|&i| counts[i]).unwrap();
        counts[k_max] -= 1;
        assigned -= 1;
    }
    counts
}

#[cfg(test)]
pub(crate) use tests::table_spec;
