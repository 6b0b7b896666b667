//! Mean-field equilibrium: the alpha-driven gain `g₁`, the sub-population
//! mean-field rates `ν̄ = (2a)⁻¹(g₁ + g₂ q̄)` and inventories `q̄`, and each
//! agent's feedback control around its sub-population mean.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::filter::{AlphaForecast, FilterState, ForecastDynamics};
use crate::model::{LatentMarketModel, PopulationSpec, TimeGrid};
use crate::riccati::{
    h2_gain, h2_log_weight, ordered_exponential, solve_g2, OrderedExponentialTable,
    RiccatiSolution,
};

#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    pub grid: TimeGrid,
    pub g1: Vec<DVector<f64>>,
    pub g2: Vec<DMatrix<f64>>,
    /// Instantaneous mean-field rate at each grid point.
    pub nu_bar: Vec<DVector<f64>>,
    /// Average mean-field rate over `[t_i, t_{i+1})`, i.e. `(q̄_{i+1} − q̄_i)/Δt`.
    pub nu_bar_interval: Vec<DVector<f64>>,
    pub q_bar: Vec<DVector<f64>>,
    pub h2: Vec<DVector<f64>>,
}

/// One agent's position in the finite game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub subpop: usize,
    /// Inventory (shares).
    pub q: f64,
    /// Cash.
    pub x: f64,
}

/// One step of the mean-field inventory recursion.
#[derive(Debug, Clone)]
pub struct MeanFieldStep {
    pub nu_bar: DVector<f64>,
    pub nu_bar_interval: DVector<f64>,
    pub q_bar_next: DVector<f64>,
}

/// Everything about the equilibrium that does not depend on the observed
/// price path, precomputed once per (population, market, grid).
#[derive(Debug, Clone)]
pub struct EquilibriumEngine {
    pub population: PopulationSpec,
    pub grid: TimeGrid,
    pub riccati: RiccatiSolution,
    pub ordered: OrderedExponentialTable,
    pub forecast: ForecastDynamics,
    /// `g₁_i = kernel_i · z_i` for forecast state `z_i`.
    kernel: Vec<DMatrix<f64>>,
    mf_hom: Vec<DMatrix<f64>>,
    mf_inh: Vec<DMatrix<f64>>,
    /// `h₂ᵏ(t_i)`.
    pub h2: Vec<DVector<f64>>,
    /// `ln wᵏ(T − t_i)`; successive differences are `∫ h₂ᵏ/(2aₖ)`.
    log_weight: Vec<DVector<f64>>,
}

impl EquilibriumEngine {
    pub fn new(
        population: &PopulationSpec,
        market: &LatentMarketModel,
        grid: &TimeGrid,
    ) -> Result<Self> {
        let k = population.k();
        let n = grid.n_steps;
        let dt = grid.dt();
        let horizon = grid.horizon();
        let riccati = solve_g2(population, grid)?;
        let ordered = ordered_exponential(population, &riccati);
        let forecast = ForecastDynamics::new(market);
        let step = forecast.step(dt);

        let ones_c = DMatrix::from_fn(k, forecast.readout.len(), |_, c| forecast.readout[c]);
        let half = &ones_c * (0.5 * dt);
        let mut acc = vec![DMatrix::zeros(0, 0); n + 1];
        acc[n] = half.clone();
        for i in (0..n).rev() {
            acc[i] = &ones_c * dt + &ordered.factors[i] * &acc[i + 1] * &step;
        }
        let kernel = acc.into_iter().map(|v| v - &half).collect();

        let j = population.half_inverse_impact();
        let id = DMatrix::<f64>::identity(k, k);
        let mut mf_hom = Vec::with_capacity(n);
        let mut mf_inh = Vec::with_capacity(n);
        for i in 0..n {
            let lhs = &id - &j * &riccati.g2[i + 1] * (0.5 * dt);
            let rhs = &id + &j * &riccati.g2[i] * (0.5 * dt);
            let inv = lhs.try_inverse().expect("implicit mean-field step is invertible");
            mf_hom.push(&inv * rhs);
            mf_inh.push(inv * &j * dt);
        }

        let h2 = grid
            .t
            .iter()
            .map(|&t| {
                DVector::from_iterator(k, population.subpops.iter().map(|s| h2_gain(s, t, horizon)))
            })
            .collect();
        let log_weight = grid
            .t
            .iter()
            .map(|&t| {
                DVector::from_iterator(
                    k,
                    population.subpops.iter().map(|s| h2_log_weight(s, t, horizon)),
                )
            })
            .collect();

        Ok(EquilibriumEngine {
            population: population.clone(),
            grid: grid.clone(),
            riccati,
            ordered,
            forecast,
            kernel,
            mf_hom,
            mf_inh,
            h2,
            log_weight,
        })
    }

    pub fn k(&self) -> usize {
        self.population.k()
    }

    /// `g₁(t_i)` given the filter at `t_i`; equals [`compute_g1`] applied to
    /// the forecast curve from that filter state.
    pub fn g1_from_filter(&self, i: usize, state: &FilterState) -> DVector<f64> {
        &self.kernel[i] * self.forecast.state(state)
    }

    /// `g₁` on the whole grid for an alpha path known in advance.
    pub fn g1_from_alpha_path(&self, alpha: &[f64]) -> Vec<DVector<f64>> {
        let n = self.grid.n_steps;
        assert_eq!(alpha.len(), n + 1);
        let k = self.k();
        let dt = self.grid.dt();
        let ones = DVector::from_element(k, 1.0);
        let mut acc = &ones * (0.5 * dt * alpha[n]);
        let mut g1 = vec![DVector::zeros(k); n + 1];
        for i in (0..n).rev() {
            acc = &ones * (dt * alpha[i]) + &self.ordered.factors[i] * acc;
            g1[i] = &acc - &ones * (0.5 * dt * alpha[i]);
        }
        g1
    }

    /// Mean-field rate at `t_i` and inventory at `t_{i+1}`, with `g₁` held
    /// at its `t_i` value over the interval and `g₂ q̄` integrated by the
    /// trapezoidal rule.
    pub fn advance_mean_field(&self, i: usize, q_bar: &DVector<f64>, g1: &DVector<f64>) -> MeanFieldStep {
        let j = self.population.half_inverse_impact();
        let nu_bar = &j * (g1 + &self.riccati.g2[i] * q_bar);
        let q_bar_next = &self.mf_hom[i] * q_bar + &self.mf_inh[i] * g1;
        let nu_bar_interval = (&q_bar_next - q_bar) / self.grid.dt();
        MeanFieldStep {
            nu_bar,
            nu_bar_interval,
            q_bar_next,
        }
    }

    /// `e^{∫_{t_i}^{t_{i+1}} h₂ᵏ/(2aₖ)}`: the factor by which an agent's gap to
    /// its sub-population mean shrinks over one interval.
    pub fn gap_decay(&self, k: usize, i: usize) -> f64 {
        (self.log_weight[i + 1][k] - self.log_weight[i][k]).exp()
    }

    /// `∫_{t_i}^{t_j} h₂ᵏ/(2aₖ)`.
    pub fn gap_log_decay(&self, k: usize, i: usize, j: usize) -> f64 {
        self.log_weight[j][k] - self.log_weight[i][k]
    }

    /// Full equilibrium for an alpha path known in advance.
    pub fn solve_deterministic(&self, alpha: &[f64], q_bar0: &DVector<f64>) -> EquilibriumSolution {
        let g1 = self.g1_from_alpha_path(alpha);
        self.assemble(g1, q_bar0)
    }

    /// Full equilibrium from a sequence of filter states, one per grid point.
    pub fn solve_filtered(&self, states: &[FilterState], q_bar0: &DVector<f64>) -> EquilibriumSolution {
        let g1 = states
            .iter()
            .enumerate()
            .map(|(i, s)| self.g1_from_filter(i, s))
            .collect();
        self.assemble(g1, q_bar0)
    }

    fn assemble(&self, g1: Vec<DVector<f64>>, q_bar0: &DVector<f64>) -> EquilibriumSolution {
        let n = self.grid.n_steps;
        let mut q_bar = Vec::with_capacity(n + 1);
        let mut nu_bar = Vec::with_capacity(n + 1);
        let mut nu_bar_interval = Vec::with_capacity(n);
        q_bar.push(q_bar0.clone());
        for i in 0..n {
            let step = self.advance_mean_field(i, &q_bar[i], &g1[i]);
            nu_bar.push(step.nu_bar);
            nu_bar_interval.push(step.nu_bar_interval);
            q_bar.push(step.q_bar_next);
        }
        let j = self.population.half_inverse_impact();
        nu_bar.push(&j * (&g1[n] + &self.riccati.g2[n] * &q_bar[n]));
        EquilibriumSolution {
            grid: self.grid.clone(),
            g1,
            g2: self.riccati.g2.clone(),
            nu_bar,
            nu_bar_interval,
            q_bar,
            h2: self.h2.clone(),
        }
    }
}

/// Trapezoidal quadrature of `∫_t^T η(t, u) 𝟏 E[A_u | ℱ_t] du` on the grid,
/// where `t = forecast.base_time` must be a grid point and the forecast is
/// sampled on the remaining grid points.
pub fn compute_g1(
    population: &PopulationSpec,
    riccati: &RiccatiSolution,
    ordered: &OrderedExponentialTable,
    forecast: &AlphaForecast,
) -> DVector<f64> {
    let k = population.k();
    let grid = &riccati.grid;
    let dt = grid.dt();
    let i0 = (forecast.base_time / dt).round() as usize;
    let n = grid.n_steps;
    assert_eq!(forecast.values.len(), n + 1 - i0, "forecast must cover the remaining grid");
    let ones = DVector::from_element(k, 1.0);
    let mut eta = DMatrix::identity(k, k);
    let mut g1 = DVector::zeros(k);
    for (offset, &alpha) in forecast.values.iter().enumerate() {
        let j = i0 + offset;
        let w = if j == i0 || j == n { 0.5 * dt } else { dt };
        if j == i0 && j == n {
            break;
        }
        g1 += &eta * &ones * (w * alpha);
        if j < n {
            eta *= &ordered.factors[j];
        }
    }
    g1
}

/// Stand-alone mean-field step (see [`EquilibriumEngine::advance_mean_field`]).
pub fn advance_mean_field(
    population: &PopulationSpec,
    g2_now: &DMatrix<f64>,
    g2_next: &DMatrix<f64>,
    q_bar: &DVector<f64>,
    g1: &DVector<f64>,
    dt: f64,
) -> MeanFieldStep {
    let k = population.k();
    let j = population.half_inverse_impact();
    let id = DMatrix::<f64>::identity(k, k);
    let nu_bar = &j * (g1 + g2_now * q_bar);
    let lhs = &id - &j * g2_next * (0.5 * dt);
    let rhs = (&id + &j * g2_now * (0.5 * dt)) * q_bar + &j * g1 * dt;
    let q_bar_next = lhs.lu().solve(&rhs).expect("implicit mean-field step is invertible");
    let nu_bar_interval = (&q_bar_next - q_bar) / dt;
    MeanFieldStep {
        nu_bar,
        nu_bar_interval,
        q_bar_next,
    }
}

/// Feedback control `ν̄ᵏ + h₂ᵏ/(2aₖ) (q − q̄ᵏ)`.
pub fn agent_control(q: f64, nu_bar_k: f64, q_bar_k: f64, h2_k: f64, a_k: f64) -> f64 {
    nu_bar_k + h2_k / (2.0 * a_k) * (q - q_bar_k)
}

/// Average rate over one interval of the feedback control when the gap to
/// the mean field is advanced exactly: `ν̄ᵏ_int + gap (decay − 1)/Δt`.
pub fn agent_interval_rate(gap: f64, nu_bar_interval_k: f64, decay: f64, dt: f64) -> f64 {
    nu_bar_interval_k + gap * (decay - 1.0) / dt
}
