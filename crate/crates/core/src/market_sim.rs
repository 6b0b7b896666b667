//! Pure-jump latent market and the finite-player game played on it.
//!
//! The latent chain and the jumps of the unimpacted price `F` are simulated
//! in continuous time. Agents observe the price only through the grid: at
//! each grid time they reconstruct `F`, update their filter, and trade at a
//! constant rate until the next grid time.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::equilibrium::{agent_control, agent_interval_rate, EquilibriumEngine};
use crate::error::{Error, Result};
use crate::filter::{
    jump_update, propagate, FilterDiagnostics, FilterScheme, FilterState, JumpDirection,
};
use crate::model::{GameSpec, InitialInventoryLaw, LatentMarketModel, TimeGrid};

const MARKET_STREAM: u64 = 0;
const INVENTORY_STREAM: u64 = 1;

/// Random stream for one replication; the market and the initial
/// inventories draw from independent streams of the same seed.
pub fn replication_rng(seed: u64, replication: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ replication);
    rng.set_stream(stream);
    rng
}

pub fn market_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    replication_rng(seed, replication, MARKET_STREAM)
}

pub fn inventory_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    replication_rng(seed, replication, INVENTORY_STREAM)
}

/// Piecewise-constant path of the latent state index.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaPath {
    /// Times at which the state changes; `switch_times[0] = 0`.
    pub switch_times: Vec<f64>,
    pub states: Vec<usize>,
}

impl ThetaPath {
    pub fn state_at(&self, t: f64) -> usize {
        let idx = self.switch_times.partition_point(|&s| s <= t);
        self.states[idx.saturating_sub(1)]
    }

    /// Builds a path from `(time, state index)` pairs; the first pair must
    /// start at time 0.
    pub fn forced(market: &LatentMarketModel, points: &[(f64, usize)]) -> Result<Self> {
        let Some(&(t0, _)) = points.first() else {
            return Err(Error::InvalidForcedPath("path is empty".into()));
        };
        if t0 != 0.0 {
            return Err(Error::InvalidForcedPath(format!(
                "first entry must be at t = 0, got {t0}"
            )));
        }
        let mut prev = f64::NEG_INFINITY;
        for &(t, idx) in points {
            if idx >= market.n_states() {
                return Err(Error::InvalidForcedPath(format!(
                    "state index {idx} outside 0..{}",
                    market.n_states()
                )));
            }
            if !(t >= prev) || !(t <= market.horizon) {
                return Err(Error::InvalidForcedPath(format!(
                    "times must be non-decreasing within [0, {}], got {t}",
                    market.horizon
                )));
            }
            prev = t;
        }
        Ok(ThetaPath {
            switch_times: points.iter().map(|p| p.0).collect(),
            states: points.iter().map(|p| p.1).collect(),
        })
    }

    /// Samples the chain with exact exponential holding times.
    pub fn sample<R: Rng + ?Sized>(market: &LatentMarketModel, rng: &mut R) -> Self {
        let mut state = sample_index(&market.prior, rng);
        let mut t = 0.0;
        let mut switch_times = vec![0.0];
        let mut states = vec![state];
        loop {
            let rate = -market.generator[(state, state)];
            if rate <= 0.0 {
                break;
            }
            let hold: f64 = Exp1.sample(rng);
            t += hold / rate;
            if t >= market.horizon {
                break;
            }
            let weights: Vec<f64> = (0..market.n_states())
                .map(|j| if j == state { 0.0 } else { market.generator[(state, j)] })
                .collect();
            state = sample_index(&weights, rng);
            switch_times.push(t);
            states.push(state);
        }
        ThetaPath { switch_times, states }
    }
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub t: f64,
    pub direction: JumpDirection,
}

/// One realisation of `(Θ, F)` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPath {
    pub theta: ThetaPath,
    pub jumps: Vec<JumpEvent>,
    pub f0: f64,
    pub alpha_tick: f64,
    /// Largest realised-to-proposed intensity ratio among thinning
    /// candidates; never exceeds 1.
    pub max_thinning_ratio: f64,
}

impl MarketPath {
    /// Right-continuous `F_t`.
    pub fn f_at(&self, t: f64) -> f64 {
        let n = self.jumps.partition_point(|j| j.t <= t);
        self.f0 + self.alpha_tick * self.jumps[..n].iter().map(|j| j.direction.sign()).sum::<f64>()
    }

    /// Indices of the jumps in `(t0, t1]`.
    pub fn jumps_in(&self, t0: f64, t1: f64) -> std::ops::Range<usize> {
        let lo = self.jumps.partition_point(|j| j.t <= t0);
        let hi = self.jumps.partition_point(|j| j.t <= t1);
        lo..hi
    }

    /// `∫_{t0}^{t1} F_s ds`, exact for the piecewise-constant path.
    pub fn integral_f(&self, t0: f64, t1: f64) -> f64 {
        let mut f = self.f_at(t0);
        let mut s = t0;
        let mut acc = 0.0;
        for j in &self.jumps[self.jumps_in(t0, t1)] {
            acc += f * (j.t - s);
            f += self.alpha_tick * j.direction.sign();
            s = j.t;
        }
        acc + f * (t1 - s)
    }
}

/// Simulates `Θ` (or uses the forced path) and the jumps of `F` by thinning
/// the combined counting process `L⁺ + L⁻` with the bound
/// `2σ + κ max_m |θ_m − F|`, recomputed after every event.
pub fn simulate_latent_and_price<R: Rng + ?Sized>(
    market: &LatentMarketModel,
    rng: &mut R,
    forced_theta: Option<&[(f64, usize)]>,
) -> Result<MarketPath> {
    let theta = match forced_theta {
        Some(points) => ThetaPath::forced(market, points)?,
        None => ThetaPath::sample(market, rng),
    };
    let mut f = market.f0;
    let mut t = 0.0;
    let mut jumps = Vec::new();
    let mut max_ratio: f64 = 0.0;
    loop {
        let spread = market
            .theta_states
            .iter()
            .map(|th| (th - f).abs())
            .fold(0.0, f64::max);
        let bound = 2.0 * market.sigma + market.kappa * spread;
        if bound <= 0.0 {
            break;
        }
        let wait: f64 = Exp1.sample(rng);
        t += wait / bound;
        if t > market.horizon {
            break;
        }
        let th = market.theta_states[theta.state_at(t)];
        let up = market.gamma_up(th, f);
        let total = market.gamma_total(th, f);
        max_ratio = max_ratio.max(total / bound);
        let u = rng.random::<f64>() * bound;
        if u < total {
            let direction = if u < up { JumpDirection::Up } else { JumpDirection::Down };
            f += direction.sign() * market.alpha_tick;
            jumps.push(JumpEvent { t, direction });
        }
    }
    Ok(MarketPath {
        theta,
        jumps,
        f0: market.f0,
        alpha_tick: market.alpha_tick,
        max_thinning_ratio: max_ratio,
    })
}

/// Additive deviation `ε ω` from the equilibrium rate for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct RateAdjustment {
    pub agent: usize,
    /// One value per grid interval.
    pub add: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct GameOptions {
    pub filter_scheme: FilterScheme,
    /// Keep per-agent inventory, cash and rate paths.
    pub record_agents: bool,
    pub adjustments: Vec<RateAdjustment>,
    pub initial_cash: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GameDiagnostics {
    pub filter: FilterDiagnostics,
    pub max_thinning_ratio: f64,
    /// Largest `|F̂ − F|` at grid times.
    pub max_reconstruction_error: f64,
}

/// One simulated realisation of the finite game.
#[derive(Debug, Clone)]
pub struct GameTrajectory {
    pub grid: TimeGrid,
    pub s_path: Vec<f64>,
    pub f_path: Vec<f64>,
    /// Agents' reconstruction `S − λ p·q̄` at grid times.
    pub f_hat_path: Vec<f64>,
    pub theta_path: Vec<usize>,
    pub posterior_path: Vec<DVector<f64>>,
    pub q_bar: Vec<DVector<f64>>,
    pub nu_bar: Vec<DVector<f64>>,
    pub nu_bar_interval: Vec<DVector<f64>>,
    pub g1: Vec<DVector<f64>>,
    pub agent_subpop: Vec<usize>,
    pub initial_inventory: Vec<f64>,
    /// `[agent][i]`, filled when `record_agents` is set.
    pub inventory: Vec<Vec<f64>>,
    pub cash: Vec<Vec<f64>>,
    /// Rate held over `[t_i, t_{i+1})`; the last entry is the feedback rate at `T`.
    pub control: Vec<Vec<f64>>,
    /// Sub-population average inventory at each grid time.
    pub subpop_mean_inventory: Vec<DVector<f64>>,
    /// Sub-population average rate over each interval.
    pub subpop_mean_rate: Vec<DVector<f64>>,
    pub terminal_inventory: Vec<f64>,
    pub terminal_cash: Vec<f64>,
    pub max_abs_inventory: Vec<f64>,
    pub running_penalty: Vec<f64>,
    pub objective: Vec<f64>,
    pub rng_seed: u64,
    pub diagnostics: GameDiagnostics,
}

/// `∫ q²` over an interval on which `q` is linear.
fn square_integral(q0: f64, q1: f64, dt: f64) -> f64 {
    dt * (q0 * q0 + q0 * q1 + q1 * q1) / 3.0
}

/// Plays the finite game on a given market path.
///
/// Every agent runs the equilibrium feedback control. Agent `j` of
/// sub-population `k` holds `q_j = q̄ᵏ + gap_j + offset_j`, where the gap
/// shrinks by the exact factor `e^{∫h₂/(2a)}` each interval and the offset
/// accumulates any [`RateAdjustment`].
pub fn run_finite_game(
    spec: &GameSpec,
    engine: &EquilibriumEngine,
    market_path: &MarketPath,
    initial_inventory: &[f64],
    options: &GameOptions,
    rng_seed: u64,
) -> Result<GameTrajectory> {
    let market = &spec.market;
    let pop = &spec.population;
    let grid = &engine.grid;
    let n = grid.n_steps;
    let dt = grid.dt();
    let k_count = pop.k();
    let agent_subpop = spec.agent_subpops();
    let n_agents = agent_subpop.len();
    assert_eq!(initial_inventory.len(), n_agents);
    let lambda = pop.lambda;
    let p = pop.proportions();
    let counts: Vec<f64> = spec.n_agents_per_subpop.iter().map(|&c| c as f64).collect();

    let mut adjust: Vec<Option<&[f64]>> = vec![None; n_agents];
    for adj in &options.adjustments {
        assert_eq!(adj.add.len(), n, "adjustment must have one value per interval");
        adjust[adj.agent] = Some(&adj.add);
    }

    let q_bar0 = pop.initial_means();
    let mut q_bar = q_bar0.clone();
    let mut gap: Vec<f64> = initial_inventory
        .iter()
        .zip(&agent_subpop)
        .map(|(q, &k)| q - q_bar0[k])
        .collect();
    let mut offset = vec![0.0; n_agents];
    let mut q: Vec<f64> = initial_inventory.to_vec();
    let mut cash = vec![options.initial_cash; n_agents];
    let mut penalty = vec![0.0; n_agents];
    let mut max_abs: Vec<f64> = q.iter().map(|v| v.abs()).collect();

    let record = options.record_agents;
    let mut inv_path = if record { vec![Vec::with_capacity(n + 1); n_agents] } else { Vec::new() };
    let mut cash_path = inv_path.clone();
    let mut ctrl_path = inv_path.clone();

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let subpop_mean = |v: &[f64]| {
        let mut m = DVector::zeros(k_count);
        for (x, &k) in v.iter().zip(&agent_subpop) {
            m[k] += x;
        }
        for k in 0..k_count {
            m[k] /= counts[k];
        }
        m
    };

    let mut s_path = Vec::with_capacity(n + 1);
    let mut f_path = Vec::with_capacity(n + 1);
    let mut f_hat_path = Vec::with_capacity(n + 1);
    let mut theta_path = Vec::with_capacity(n + 1);
    let mut posterior_path = Vec::with_capacity(n + 1);
    let mut q_bar_path = Vec::with_capacity(n + 1);
    let mut nu_bar_path = Vec::with_capacity(n + 1);
    let mut nu_int_path = Vec::with_capacity(n);
    let mut g1_path = Vec::with_capacity(n + 1);
    let mut sub_inv = Vec::with_capacity(n + 1);
    let mut sub_rate = Vec::with_capacity(n);
    let mut diagnostics = GameDiagnostics {
        max_thinning_ratio: market_path.max_thinning_ratio,
        ..Default::default()
    };

    let mut filter = FilterState::initial(market);
    let mut rates = vec![0.0; n_agents];
    for i in 0..=n {
        let t = grid.t[i];
        let f_true = market_path.f_at(t);
        let s = f_true + lambda * mean(&q);
        let f_hat = s - lambda * p.dot(&q_bar);
        diagnostics.max_reconstruction_error =
            diagnostics.max_reconstruction_error.max((f_hat - f_true).abs());
        filter.f = f_hat;
        filter.t = t;

        s_path.push(s);
        f_path.push(f_true);
        f_hat_path.push(f_hat);
        theta_path.push(market_path.theta.state_at(t));
        posterior_path.push(filter.posterior.clone());
        q_bar_path.push(q_bar.clone());
        sub_inv.push(subpop_mean(&q));
        if record {
            for a in 0..n_agents {
                inv_path[a].push(q[a]);
                cash_path[a].push(cash[a]);
            }
        }

        let g1 = engine.g1_from_filter(i, &filter);
        if i == n {
            let j = pop.half_inverse_impact();
            let nu_bar = &j * (&g1 + &engine.riccati.g2[n] * &q_bar);
            if record {
                for a in 0..n_agents {
                    let k = agent_subpop[a];
                    let sub = &pop.subpops[k];
                    ctrl_path[a].push(agent_control(q[a], nu_bar[k], q_bar[k], engine.h2[n][k], sub.a));
                }
            }
            nu_bar_path.push(nu_bar);
            g1_path.push(g1);
            break;
        }
        let step = engine.advance_mean_field(i, &q_bar, &g1);

        // trading over [t_i, t_{i+1})
        let q_start = q.clone();
        for a in 0..n_agents {
            let k = agent_subpop[a];
            let decay = engine.gap_decay(k, i);
            let mut rate = agent_interval_rate(gap[a], step.nu_bar_interval[k], decay, dt);
            gap[a] *= decay;
            if let Some(add) = adjust[a] {
                rate += add[i];
                offset[a] += add[i] * dt;
            }
            rates[a] = rate;
            q[a] = step.q_bar_next[k] + gap[a] + offset[a];
        }
        let t_next = grid.t[i + 1];
        let int_f = market_path.integral_f(t, t_next);
        let int_s = int_f + lambda * dt * 0.5 * (mean(&q_start) + mean(&q));
        for a in 0..n_agents {
            let sub = &pop.subpops[agent_subpop[a]];
            cash[a] -= rates[a] * int_s + sub.a * rates[a] * rates[a] * dt;
            penalty[a] += square_integral(q_start[a], q[a], dt);
            max_abs[a] = max_abs[a].max(q[a].abs());
            if record {
                ctrl_path[a].push(rates[a]);
            }
        }
        sub_rate.push(subpop_mean(&rates));

        // filter over (t_i, t_{i+1}]: F̂ moves with the observed ticks
        let mut clock = t;
        for e in &market_path.jumps[market_path.jumps_in(t, t_next)] {
            filter = propagate(market, &filter, e.t - clock, options.filter_scheme, &mut diagnostics.filter);
            filter = jump_update(market, &filter, e.direction)?;
            clock = e.t;
        }
        filter = propagate(market, &filter, t_next - clock, options.filter_scheme, &mut diagnostics.filter);

        nu_bar_path.push(step.nu_bar);
        nu_int_path.push(step.nu_bar_interval);
        g1_path.push(g1);
        q_bar = step.q_bar_next;
    }
    if options.filter_scheme == FilterScheme::Explicit {
        diagnostics.filter.check()?;
    }

    let s_t = s_path[n];
    let objective: Vec<f64> = (0..n_agents)
        .map(|a| {
            let sub = &pop.subpops[agent_subpop[a]];
            cash[a] + q[a] * (s_t - sub.psi * q[a]) - sub.phi * penalty[a]
        })
        .collect();
    if objective.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("objective"));
    }

    Ok(GameTrajectory {
        grid: grid.clone(),
        s_path,
        f_path,
        f_hat_path,
        theta_path,
        posterior_path,
        q_bar: q_bar_path,
        nu_bar: nu_bar_path,
        nu_bar_interval: nu_int_path,
        g1: g1_path,
        agent_subpop,
        initial_inventory: initial_inventory.to_vec(),
        inventory: inv_path,
        cash: cash_path,
        control: ctrl_path,
        subpop_mean_inventory: sub_inv,
        subpop_mean_rate: sub_rate,
        terminal_inventory: q,
        terminal_cash: cash,
        max_abs_inventory: max_abs,
        running_penalty: penalty,
        objective,
        rng_seed,
        diagnostics,
    })
}

/// Initial inventories `𝔔₀ʲ − 𝔔_Tʲ` for every agent, drawn from `law`.
pub fn draw_initial_inventories<L: InitialInventoryLaw, R: Rng + ?Sized>(
    spec: &GameSpec,
    law: &L,
    rng: &mut R,
) -> Vec<f64> {
    spec.agent_subpops()
        .into_iter()
        .enumerate()
        .map(|(j, k)| {
            let q0 = law.sample(&spec.population.subpops[k], rng);
            q0 - spec.target_shift.as_ref().map_or(0.0, |s| s[j])
        })
        .collect()
}

/// Simulates one replication end to end with the replication's own streams.
pub fn simulate_replication<L: InitialInventoryLaw>(
    spec: &GameSpec,
    engine: &EquilibriumEngine,
    law: &L,
    forced_theta: Option<&[(f64, usize)]>,
    options: &GameOptions,
    seed: u64,
    replication: u64,
) -> Result<GameTrajectory> {
    let mut mrng = market_rng(seed, replication);
    let path = simulate_latent_and_price(&spec.market, &mut mrng, forced_theta)?;
    let mut irng = inventory_rng(seed, replication);
    let q0 = draw_initial_inventories(spec, law, &mut irng);
    run_finite_game(spec, engine, &path, &q0, options, seed ^ replication)
}

/// Pathwise objective `X_T + q_T(S_T − Ψ q_T) − φ ∫ q²` of one agent.
pub fn evaluate_objective(trajectory: &GameTrajectory, spec: &GameSpec, agent: usize) -> f64 {
    let sub = &spec.population.subpops[trajectory.agent_subpop[agent]];
    let q_t = trajectory.terminal_inventory[agent];
    let s_t = *trajectory.s_path.last().unwrap();
    trajectory.terminal_cash[agent] + q_t * (s_t - sub.psi * q_t)
        - sub.phi * trajectory.running_penalty[agent]
}
