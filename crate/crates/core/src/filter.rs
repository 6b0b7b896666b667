//! Posterior of the latent chain `Θ` given the observed jumps of `F`, and the
//! predictive alpha curve `E[A_u | ℱ_t]` that drives `g₁`.
//!
//! Between jumps the unnormalised posterior obeys the Zakai equation
//! `dρ = (Cᵀ − diag γ_tot(θ, F)) ρ dt`; at a jump it is reweighted by the
//! jump intensity of each state.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::LatentMarketModel;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub t: f64,
    /// `P(Θ_t = θ_m | ℱ_t)`.
    pub posterior: DVector<f64>,
    /// Current (reconstructed) unimpacted price.
    pub f: f64,
}

impl FilterState {
    pub fn initial(market: &LatentMarketModel) -> Self {
        FilterState {
            t: 0.0,
            posterior: DVector::from_column_slice(&market.prior),
            f: market.f0,
        }
    }

    pub fn mean_theta(&self, market: &LatentMarketModel) -> f64 {
        self.posterior
            .iter()
            .zip(&market.theta_states)
            .map(|(p, th)| p * th)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpDirection {
    Up,
    Down,
}

impl JumpDirection {
    pub fn sign(self) -> f64 {
        match self {
            JumpDirection::Up => 1.0,
            JumpDirection::Down => -1.0,
        }
    }
}

/// Time stepping of the posterior between jumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterScheme {
    /// Matrix exponential of the Zakai generator; exact for constant `F`.
    #[default]
    Exact,
    /// One explicit Euler step of the normalised Kolmogorov equation, with
    /// negative entries clamped to zero.
    Explicit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterDiagnostics {
    pub steps: usize,
    pub clamped: usize,
}

impl FilterDiagnostics {
    /// Fails when more than 1% of the explicit steps needed clamping.
    pub fn check(&self) -> Result<()> {
        if self.clamped * 100 > self.steps {
            Err(Error::ExcessiveClamping {
                clamped: self.clamped,
                steps: self.steps,
            })
        } else {
            Ok(())
        }
    }
}

fn normalise(v: &mut DVector<f64>) {
    let total = v.sum();
    *v /= total;
}

/// Advances the posterior over `dt` during which no jump was observed.
pub fn propagate(
    market: &LatentMarketModel,
    state: &FilterState,
    dt: f64,
    scheme: FilterScheme,
    diagnostics: &mut FilterDiagnostics,
) -> FilterState {
    let m = market.n_states();
    let rates: Vec<f64> = market
        .theta_states
        .iter()
        .map(|&th| market.gamma_total(th, state.f))
        .collect();
    let mut posterior = match scheme {
        FilterScheme::Exact => {
            let mut gen = market.generator.transpose();
            for (i, r) in rates.iter().enumerate() {
                gen[(i, i)] -= r;
            }
            // shift by the smallest rate so the exponential stays O(1)
            let shift = rates.iter().cloned().fold(f64::INFINITY, f64::min);
            for i in 0..m {
                gen[(i, i)] += shift;
            }
            let mut rho = (gen * dt).exp() * &state.posterior;
            rho.iter_mut().for_each(|x| *x = x.max(0.0));
            rho
        }
        FilterScheme::Explicit => {
            let mean_rate: f64 = state.posterior.iter().zip(&rates).map(|(p, r)| p * r).sum();
            let drift = market.generator.transpose() * &state.posterior
                - DVector::from_iterator(
                    m,
                    state.posterior.iter().zip(&rates).map(|(p, r)| p * (r - mean_rate)),
                );
            let mut next = &state.posterior + drift * dt;
            if next.iter().any(|&x| x < 0.0) {
                diagnostics.clamped += 1;
                next.iter_mut().for_each(|x| *x = x.max(0.0));
            }
            next
        }
    };
    diagnostics.steps += 1;
    normalise(&mut posterior);
    FilterState {
        t: state.t + dt,
        posterior,
        f: state.f,
    }
}

/// Bayes update at an observed jump of `F`, followed by the tick move.
pub fn jump_update(
    market: &LatentMarketModel,
    state: &FilterState,
    direction: JumpDirection,
) -> Result<FilterState> {
    let mut posterior = state.posterior.clone();
    for (p, &th) in posterior.iter_mut().zip(&market.theta_states) {
        *p *= match direction {
            JumpDirection::Up => market.gamma_up(th, state.f),
            JumpDirection::Down => market.gamma_down(th, state.f),
        };
    }
    if !(posterior.sum() > 0.0) {
        return Err(Error::DegenerateLikelihood {
            direction: match direction {
                JumpDirection::Up => "up",
                JumpDirection::Down => "down",
            },
        });
    }
    normalise(&mut posterior);
    Ok(FilterState {
        t: state.t,
        posterior,
        f: state.f + direction.sign() * market.alpha_tick,
    })
}

/// Linear propagator of the conditional moments `z = (P(Θ_u = θ·), E[F_u])`,
/// `dz/du = G z` with `G = [[Cᵀ, 0], [ακ θᵀ, −ακ]]`, and the alpha readout
/// `E[A_u] = ακ (θᵀ p_u − m_F(u)) = c·z`.
#[derive(Debug, Clone)]
pub struct ForecastDynamics {
    pub generator: DMatrix<f64>,
    pub readout: DVector<f64>,
}

impl ForecastDynamics {
    pub fn new(market: &LatentMarketModel) -> Self {
        let m = market.n_states();
        let rate = market.reversion_rate();
        let mut generator = DMatrix::zeros(m + 1, m + 1);
        generator
            .view_mut((0, 0), (m, m))
            .copy_from(&market.generator.transpose());
        for (i, &th) in market.theta_states.iter().enumerate() {
            generator[(m, i)] = rate * th;
        }
        generator[(m, m)] = -rate;
        let mut readout = DVector::zeros(m + 1);
        for (i, &th) in market.theta_states.iter().enumerate() {
            readout[i] = rate * th;
        }
        readout[m] = -rate;
        ForecastDynamics { generator, readout }
    }

    pub fn state(&self, filter: &FilterState) -> DVector<f64> {
        let m = filter.posterior.len();
        let mut z = DVector::zeros(m + 1);
        z.rows_mut(0, m).copy_from(&filter.posterior);
        z[m] = filter.f;
        z
    }

    /// `e^{h G}`.
    pub fn step(&self, h: f64) -> DMatrix<f64> {
        (&self.generator * h).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaForecast {
    pub base_time: f64,
    pub horizon_grid: Vec<f64>,
    /// `E[A_u | ℱ_t]` for each `u` in `horizon_grid`.
    pub values: Vec<f64>,
}

/// Predictive alpha curve at the horizon times `u ≥ t`.
pub fn alpha_forecast(
    state: &FilterState,
    market: &LatentMarketModel,
    horizon_grid: &[f64],
) -> AlphaForecast {
    let dyn_ = ForecastDynamics::new(market);
    let mut z = dyn_.state(state);
    let mut u = state.t;
    let mut values = Vec::with_capacity(horizon_grid.len());
    for &next in horizon_grid {
        assert!(next >= u - 1e-12, "horizon grid must be non-decreasing from the base time");
        if next > u {
            z = dyn_.step(next - u) * z;
            u = next;
        }
        values.push(dyn_.readout.dot(&z));
    }
    AlphaForecast {
        base_time: state.t,
        horizon_grid: horizon_grid.to_vec(),
        values,
    }
}
