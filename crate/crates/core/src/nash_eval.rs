//! Optimality and ε-Nash diagnostics.
//!
//! Two surrogates for the uncomputable supremum over adapted controls:
//!
//! * an exact discrete best response in a deterministic scenario (forced
//!   latent path, `F` following its mean dynamics, every agent starting at
//!   its sub-population mean), where each agent's problem is a concave
//!   quadratic program in its `n` interval rates;
//! * a perturbation family `ν* + εω` in the stochastic game, which gives a
//!   Monte Carlo lower bound on the gap.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::equilibrium::EquilibriumEngine;
use crate::error::{Error, Result};
use crate::market_sim::{simulate_replication, GameOptions, RateAdjustment, ThetaPath};
use crate::model::{
    empirical_proportions, proportional_counts, GameSpec, InitialInventoryLaw, LatentMarketModel,
    PopulationSpec, SubPopulationSpec, TimeGrid,
};

/// Smallest replication count accepted by the perturbation method.
pub const MIN_PERTURBATION_REPLICATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NashMethod {
    DeterministicBestResponse,
    PerturbationFamily,
}

impl NashMethod {
    pub fn tag(self) -> &'static str {
        match self {
            NashMethod::DeterministicBestResponse => "deterministic-best-response",
            NashMethod::PerturbationFamily => "perturbation-family",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashGapReport {
    pub n_values: Vec<usize>,
    pub gaps: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub method: NashMethod,
    /// Realised `max_k |N_k/N − p_k|` for each population size.
    pub proportion_error: Vec<f64>,
}

/// Forced latent path with `F` following `dF = ακ(Θ − F) dt` exactly.
#[derive(Debug, Clone)]
pub struct DeterministicScenario {
    pub population: PopulationSpec,
    pub grid: TimeGrid,
    pub f_path: Vec<f64>,
    /// `A = ακ(Θ − F)` on the grid.
    pub alpha: Vec<f64>,
}

impl DeterministicScenario {
    pub fn new(
        population: &PopulationSpec,
        market: &LatentMarketModel,
        grid: &TimeGrid,
        forced_theta: &[(f64, usize)],
    ) -> Result<Self> {
        let path = ThetaPath::forced(market, forced_theta)?;
        let rate = market.reversion_rate();
        let mut f = market.f0;
        let mut f_path = Vec::with_capacity(grid.len());
        let mut alpha = Vec::with_capacity(grid.len());
        let mut t_prev = 0.0;
        for &t in &grid.t {
            // relax towards each Θ segment between t_prev and t
            let mut s: f64 = t_prev;
            for (idx, &sw) in path.switch_times.iter().enumerate() {
                let end = path.switch_times.get(idx + 1).copied().unwrap_or(f64::INFINITY);
                let lo = s.max(sw);
                let hi = t.min(end);
                if hi > lo {
                    let th = market.theta_states[path.states[idx]];
                    f = th + (f - th) * (-rate * (hi - lo)).exp();
                    s = hi;
                }
            }
            t_prev = t;
            f_path.push(f);
            alpha.push(rate * (market.theta_states[path.state_at(t)] - f));
        }
        Ok(DeterministicScenario {
            population: population.clone(),
            grid: grid.clone(),
            f_path,
            alpha,
        })
    }

    /// Scenario without alpha: `F ≡ F₀`.
    pub fn flat(population: &PopulationSpec, f0: f64, grid: &TimeGrid) -> Self {
        DeterministicScenario {
            population: population.clone(),
            grid: grid.clone(),
            f_path: vec![f0; grid.len()],
            alpha: vec![0.0; grid.len()],
        }
    }
}

/// Grid operators of the discrete control problem: inventory `q = q₀𝟏 + ΔtLν`
/// with `L` the strictly lower-triangular ones matrix, and the exact
/// `∫q² = qᵀWq` for piecewise-linear `q`.
#[derive(Debug, Clone)]
struct DiscreteOperators {
    n: usize,
    dt: f64,
    /// `LᵀWL` (n × n).
    ltwl: DMatrix<f64>,
    /// `LᵀW𝟏`.
    ltw1: DVector<f64>,
    /// Trapezoid-averaged `L`: 1 below the diagonal, ½ on it.
    mavg_l: DMatrix<f64>,
}

impl DiscreteOperators {
    fn new(grid: &TimeGrid) -> Self {
        let n = grid.n_steps;
        let dt = grid.dt();
        let w = |i: usize, j: usize| -> f64 {
            if i == j {
                if i == 0 || i == n { dt / 3.0 } else { 2.0 * dt / 3.0 }
            } else if i.abs_diff(j) == 1 {
                dt / 6.0
            } else {
                0.0
            }
        };
        // row sums of W restricted to columns > m', then suffix sums over rows
        let mut r = DMatrix::zeros(n + 2, n + 1);
        for i in 0..=n {
            let mut acc = 0.0;
            for m in (0..=n).rev() {
                // r[i][m] = Σ_{i' > m} W[i][i']
                r[(i, m)] = acc;
                acc += w(i, m);
            }
        }
        let mut ltwl = DMatrix::zeros(n, n);
        let mut col = vec![0.0; n + 1];
        for m in (0..n).rev() {
            // col[m'] = Σ_{i > m} r[i][m']
            for (mp, c) in col.iter_mut().enumerate() {
                *c += r[(m + 1, mp)];
            }
            for mp in 0..n {
                ltwl[(m, mp)] = col[mp];
            }
        }
        let ltw1 = DVector::from_iterator(
            n,
            (0..n).map(|m| (m + 1..=n).map(|i| (0..=n).map(|j| w(i, j)).sum::<f64>()).sum()),
        );
        let mavg_l = DMatrix::from_fn(n, n, |i, m| {
            if m < i {
                1.0
            } else if m == i {
                0.5
            } else {
                0.0
            }
        });
        DiscreteOperators { n, dt, ltwl, ltw1, mavg_l }
    }

    fn inventory(&self, q0: f64, nu: &DVector<f64>) -> Vec<f64> {
        let mut q = Vec::with_capacity(self.n + 1);
        q.push(q0);
        for i in 0..self.n {
            q.push(q[i] + self.dt * nu[i]);
        }
        q
    }

    /// `(Δt (x_i + x_{i+1})/2)_i`.
    fn trapezoid(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.n, (0..self.n).map(|i| 0.5 * self.dt * (x[i] + x[i + 1])))
    }
}

/// One agent's discrete problem: the price it faces is `S = S^ex + β q`
/// where `β = λ/N` is its own permanent impact.
#[derive(Debug, Clone)]
pub struct LqAgentProblem {
    pub sub: SubPopulationSpec,
    pub q0: f64,
    pub s_ex: Vec<f64>,
    pub beta: f64,
    ops: std::sync::Arc<DiscreteOperators>,
}

impl LqAgentProblem {
    fn new_with(ops: std::sync::Arc<DiscreteOperators>, sub: &SubPopulationSpec, q0: f64, s_ex: Vec<f64>, beta: f64) -> Self {
        assert_eq!(s_ex.len(), ops.n + 1);
        LqAgentProblem { sub: sub.clone(), q0, s_ex, beta, ops }
    }

    pub fn new(grid: &TimeGrid, sub: &SubPopulationSpec, q0: f64, s_ex: Vec<f64>, beta: f64) -> Self {
        Self::new_with(std::sync::Arc::new(DiscreteOperators::new(grid)), sub, q0, s_ex, beta)
    }

    pub fn n(&self) -> usize {
        self.ops.n
    }

    /// `X_T + q_T(S_T − Ψ q_T) − φ∫q²` with `X₀ = 0`, evaluated directly.
    pub fn objective(&self, nu: &DVector<f64>) -> f64 {
        let dt = self.ops.dt;
        let q = self.ops.inventory(self.q0, nu);
        let n = self.n();
        let s: Vec<f64> = self.s_ex.iter().zip(&q).map(|(x, qi)| x + self.beta * qi).collect();
        let mut cash = 0.0;
        let mut penalty = 0.0;
        for i in 0..n {
            cash -= nu[i] * 0.5 * dt * (s[i] + s[i + 1]) + self.sub.a * nu[i] * nu[i] * dt;
            penalty += dt * (q[i] * q[i] + q[i] * q[i + 1] + q[i + 1] * q[i + 1]) / 3.0;
        }
        cash + q[n] * (s[n] - self.sub.psi * q[n]) - self.sub.phi * penalty
    }

    pub fn gradient(&self, nu: &DVector<f64>) -> DVector<f64> {
        let ops = &self.ops;
        let dt = ops.dt;
        let n = ops.n;
        let q_n = self.q0 + dt * nu.sum();
        let coef = self.s_ex[n] * dt + 2.0 * (0.5 * self.beta - self.sub.psi) * q_n * dt;
        let wq = &ops.ltw1 * self.q0 + &ops.ltwl * nu * dt;
        -ops.trapezoid(&self.s_ex) + DVector::from_element(n, coef)
            - wq * (2.0 * self.sub.phi * dt)
            - nu * (2.0 * self.sub.a * dt)
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        let ops = &self.ops;
        let dt = ops.dt;
        let n = ops.n;
        let mut h = &ops.ltwl * (-2.0 * self.sub.phi * dt * dt);
        h.add_scalar_mut(2.0 * (0.5 * self.beta - self.sub.psi) * dt * dt);
        for i in 0..n {
            h[(i, i)] -= 2.0 * self.sub.a * dt;
        }
        h
    }

    /// Maximiser of the concave quadratic and the improvement it offers over
    /// `reference`, computed as `½ gᵀ(−∇²H)⁻¹g` to avoid cancellation.
    pub fn best_response(&self, reference: &DVector<f64>) -> Result<BestResponse> {
        let neg_h = -self.hessian();
        let chol = neg_h.cholesky().ok_or(Error::IndefiniteHessian)?;
        let g = self.gradient(reference);
        let step = chol.solve(&g);
        let control = reference + &step;
        if control.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("best response"));
        }
        let improvement = 0.5 * g.dot(&step);
        Ok(BestResponse {
            objective: self.objective(&control),
            reference_objective: self.objective(reference),
            improvement,
            control,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BestResponse {
    pub control: DVector<f64>,
    pub objective: f64,
    pub reference_objective: f64,
    /// `H(BR) − H(reference) ≥ 0`.
    pub improvement: f64,
}

/// Discrete mean-field equilibrium of the deterministic scenario: every
/// sub-population's representative agent is optimal against
/// `S̄ = F + λ Σ_k p_k q̄_k` with consistent `q̄_k`. Returns one rate path per
/// sub-population.
pub fn discrete_mean_field_equilibrium(scenario: &DeterministicScenario) -> Result<Vec<DVector<f64>>> {
    let ops = DiscreteOperators::new(&scenario.grid);
    let pop = &scenario.population;
    let kk = pop.k();
    let n = ops.n;
    let dt = ops.dt;
    let lambda = pop.lambda;
    let m0 = pop.initial_means();
    let p = pop.proportions();
    let s0: Vec<f64> = scenario.f_path.iter().map(|f| f + lambda * p.dot(&m0)).collect();
    let trap_s0 = ops.trapezoid(&s0);

    let mut a = DMatrix::zeros(kk * n, kk * n);
    let mut b = DVector::zeros(kk * n);
    let ones = DMatrix::from_element(n, n, 1.0);
    for k in 0..kk {
        let sub = &pop.subpops[k];
        let mut own = &ops.ltwl * (-2.0 * sub.phi * dt * dt);
        own += &ones * (-2.0 * sub.psi * dt * dt);
        for i in 0..n {
            own[(i, i)] -= 2.0 * sub.a * dt;
        }
        { let mut v = a.view_mut((k * n, k * n), (n, n)); v += &own; }
        for kp in 0..kk {
            let coupling = (&ones - &ops.mavg_l) * (lambda * p[kp] * dt * dt);
            let mut v = a.view_mut((k * n, kp * n), (n, n));
            v += &coupling;
        }
        let rhs = -&trap_s0
            + DVector::from_element(n, s0[n] * dt - 2.0 * sub.psi * m0[k] * dt)
            - &ops.ltw1 * (2.0 * sub.phi * dt * m0[k]);
        b.rows_mut(k * n, n).copy_from(&rhs);
    }
    let sol = a.lu().solve(&(-b)).ok_or(Error::IndefiniteHessian)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("discrete equilibrium"));
    }
    Ok((0..kk).map(|k| sol.rows(k * n, n).into_owned()).collect())
}

/// Inventory path `q = q₀ + Δt Σ ν` on the grid.
pub fn inventory_path(grid: &TimeGrid, q0: f64, nu: &DVector<f64>) -> Vec<f64> {
    let mut q = Vec::with_capacity(grid.len());
    q.push(q0);
    for i in 0..grid.n_steps {
        q.push(q[i] + grid.dt() * nu[i]);
    }
    q
}

/// Best response of a sub-population-`k` agent in an `N`-player
/// deterministic game where everybody else plays `equilibrium`.
pub fn best_response_oracle(
    scenario: &DeterministicScenario,
    counts: &[usize],
    k: usize,
    equilibrium: &[DVector<f64>],
) -> Result<BestResponse> {
    let ops = std::sync::Arc::new(DiscreteOperators::new(&scenario.grid));
    best_response_with(&ops, scenario, counts, k, equilibrium)
}

fn best_response_with(
    ops: &std::sync::Arc<DiscreteOperators>,
    scenario: &DeterministicScenario,
    counts: &[usize],
    k: usize,
    equilibrium: &[DVector<f64>],
) -> Result<BestResponse> {
    let pop = &scenario.population;
    let total: usize = counts.iter().sum();
    let lambda = pop.lambda;
    let paths: Vec<Vec<f64>> = (0..pop.k())
        .map(|kp| inventory_path(&scenario.grid, pop.subpops[kp].m0, &equilibrium[kp]))
        .collect();
    let s_ex: Vec<f64> = (0..scenario.grid.len())
        .map(|i| {
            let others: f64 = (0..pop.k())
                .map(|kp| {
                    let c = counts[kp] - usize::from(kp == k);
                    c as f64 * paths[kp][i]
                })
                .sum();
            scenario.f_path[i] + lambda * others / total as f64
        })
        .collect();
    let problem = LqAgentProblem::new_with(
        ops.clone(),
        &pop.subpops[k],
        pop.subpops[k].m0,
        s_ex,
        lambda / total as f64,
    );
    problem.best_response(&equilibrium[k])
}

/// `|H_j(ν, ν*⁻ʲ) − H̄_j(ν)|` for a sub-population-`k` agent playing `nu`
/// in the `N`-player deterministic game.
pub fn objective_distance(
    scenario: &DeterministicScenario,
    counts: &[usize],
    k: usize,
    equilibrium: &[DVector<f64>],
    nu: &DVector<f64>,
) -> f64 {
    let pop = &scenario.population;
    let total: usize = counts.iter().sum();
    let paths: Vec<Vec<f64>> = (0..pop.k())
        .map(|kp| inventory_path(&scenario.grid, pop.subpops[kp].m0, &equilibrium[kp]))
        .collect();
    let len = scenario.grid.len();
    let s_ex: Vec<f64> = (0..len)
        .map(|i| {
            let others: f64 = (0..pop.k())
                .map(|kp| (counts[kp] - usize::from(kp == k)) as f64 * paths[kp][i])
                .sum();
            scenario.f_path[i] + pop.lambda * others / total as f64
        })
        .collect();
    let finite = LqAgentProblem::new(&scenario.grid, &pop.subpops[k], pop.subpops[k].m0, s_ex, pop.lambda / total as f64);
    let q_bar: Vec<DVector<f64>> = (0..len)
        .map(|i| DVector::from_fn(pop.k(), |kp, _| paths[kp][i]))
        .collect();
    let limit = limiting_problem(scenario, k, &q_bar);
    (finite.objective(nu) - limit.objective(nu)).abs()
}

fn proportion_error(counts: &[usize], p: &DVector<f64>) -> f64 {
    empirical_proportions(counts)
        .iter()
        .zip(p.iter())
        .map(|(e, q)| (e - q).abs())
        .fold(0.0, f64::max)
}

/// Largest best-response improvement over all agents for each `N`, with
/// counts grown proportionally to `p`.
pub fn nash_gap_curve_oracle(scenario: &DeterministicScenario, n_values: &[usize]) -> Result<NashGapReport> {
    let equilibrium = discrete_mean_field_equilibrium(scenario)?;
    let ops = std::sync::Arc::new(DiscreteOperators::new(&scenario.grid));
    let p = scenario.population.proportions();
    let p_vec: Vec<f64> = p.iter().copied().collect();
    let results: Vec<Result<(f64, f64)>> = n_values
        .par_iter()
        .map(|&n_total| {
            let counts = proportional_counts(n_total, &p_vec);
            let mut gap: f64 = 0.0;
            for k in 0..scenario.population.k() {
                let br = best_response_with(&ops, scenario, &counts, k, &equilibrium)?;
                gap = gap.max(br.improvement);
            }
            Ok((gap, proportion_error(&counts, &p)))
        })
        .collect();
    let mut gaps = Vec::new();
    let mut delta = Vec::new();
    for r in results {
        let (g, d) = r?;
        gaps.push(g);
        delta.push(d);
    }
    Ok(NashGapReport {
        n_values: n_values.to_vec(),
        std_errors: vec![0.0; gaps.len()],
        gaps,
        method: NashMethod::DeterministicBestResponse,
        proportion_error: delta,
    })
}

/// Indicators of the ten consecutive tenths of the horizon.
pub fn tenth_directions(n: usize) -> Vec<DVector<f64>> {
    (0..10)
        .map(|d| DVector::from_fn(n, |i, _| if i * 10 / n == d { 1.0 } else { 0.0 }))
        .collect()
}

#[derive(Debug, Clone)]
pub struct GateauxReport {
    /// Central difference `(H̄(ν+εω) − H̄(ν−εω))/(2ε)` per direction.
    pub derivatives: Vec<f64>,
    /// `(H̄(ν+εω) + H̄(ν−εω) − 2H̄(ν))/ε²` per direction.
    pub second_differences: Vec<f64>,
    /// `|H̄(ν)| / T`.
    pub scale: f64,
}

impl GateauxReport {
    pub fn max_abs_derivative(&self) -> f64 {
        self.derivatives.iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// Limiting objective `H̄` of a sub-population-`k` agent facing the
/// mean-field price `S̄ = F + λ Σ p_k q̄_k` (no own impact).
pub fn limiting_problem(scenario: &DeterministicScenario, k: usize, q_bar: &[DVector<f64>]) -> LqAgentProblem {
    let pop = &scenario.population;
    let p = pop.proportions();
    let s_bar: Vec<f64> = scenario
        .f_path
        .iter()
        .zip(q_bar)
        .map(|(f, q)| f + pop.lambda * p.dot(q))
        .collect();
    LqAgentProblem::new(&scenario.grid, &pop.subpops[k], pop.subpops[k].m0, s_bar, 0.0)
}

/// Closed-form mean-field equilibrium of the scenario: per sub-population
/// interval rates and the grid inventory means.
pub fn closed_form_equilibrium(
    engine: &EquilibriumEngine,
    scenario: &DeterministicScenario,
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let sol = engine.solve_deterministic(&scenario.alpha, &scenario.population.initial_means());
    let n = scenario.grid.n_steps;
    let rates = (0..engine.k())
        .map(|k| DVector::from_fn(n, |i, _| sol.nu_bar_interval[i][k]))
        .collect();
    (rates, sol.q_bar)
}

/// Central-difference directional derivatives of `H̄` at `nu`.
pub fn gateaux_check(problem: &LqAgentProblem, nu: &DVector<f64>, directions: &[DVector<f64>], eps: f64) -> GateauxReport {
    let base = problem.objective(nu);
    let mut derivatives = Vec::with_capacity(directions.len());
    let mut second = Vec::with_capacity(directions.len());
    for w in directions {
        let up = problem.objective(&(nu + w * eps));
        let down = problem.objective(&(nu - w * eps));
        derivatives.push((up - down) / (2.0 * eps));
        second.push((up + down - 2.0 * base) / (eps * eps));
    }
    GateauxReport {
        derivatives,
        second_differences: second,
        scale: base.abs() / problem.ops.dt / problem.n() as f64,
    }
}

/// Monte Carlo lower bound on the Nash gap from the family `ν* + sω`: per
/// direction the best `s` of the fitted quadratic gains `D̄²/(2|Q̄|)`.
#[allow(clippy::too_many_arguments)]
pub fn nash_gap_curve_perturbation<L: InitialInventoryLaw>(
    template: &GameSpec,
    engine: &EquilibriumEngine,
    law: &L,
    forced_theta: Option<&[(f64, usize)]>,
    n_values: &[usize],
    replications: usize,
    seed: u64,
    eps: f64,
) -> Result<NashGapReport> {
    if replications < MIN_PERTURBATION_REPLICATIONS {
        return Err(Error::validation(
            "run.replications",
            format!("perturbation method needs at least {MIN_PERTURBATION_REPLICATIONS} replications"),
        ));
    }
    let n = engine.grid.n_steps;
    let directions = tenth_directions(n);
    let p = template.population.proportions();
    let p_vec: Vec<f64> = p.iter().copied().collect();
    let mut gaps = Vec::new();
    let mut errors = Vec::new();
    let mut delta = Vec::new();
    for &n_total in n_values {
        let counts = proportional_counts(n_total, &p_vec);
        let spec = GameSpec {
            n_agents_per_subpop: counts.clone(),
            target_shift: None,
            ..template.clone()
        }
        .validate()?;
        // first agent of every sub-population
        let probes: Vec<usize> = counts
            .iter()
            .scan(0, |start, &c| {
                let a = *start;
                *start += c;
                Some(a)
            })
            .collect();
        let per_rep: Vec<Result<Vec<(f64, f64)>>> = (0..replications as u64)
            .into_par_iter()
            .map(|rep| {
                let base = simulate_replication(&spec, engine, law, forced_theta, &GameOptions::default(), seed, rep)?;
                let mut out = Vec::with_capacity(probes.len() * directions.len());
                for &agent in &probes {
                    for w in &directions {
                        let run = |sign: f64| {
                            let opts = GameOptions {
                                adjustments: vec![RateAdjustment {
                                    agent,
                                    add: w.iter().map(|x| sign * eps * x).collect(),
                                }],
                                ..Default::default()
                            };
                            simulate_replication(&spec, engine, law, forced_theta, &opts, seed, rep)
                                .map(|t| t.objective[agent])
                        };
                        let up = run(1.0)?;
                        let down = run(-1.0)?;
                        let h0 = base.objective[agent];
                        out.push(((up - down) / (2.0 * eps), (up + down - 2.0 * h0) / (eps * eps)));
                    }
                }
                Ok(out)
            })
            .collect();
        let samples: Vec<Vec<(f64, f64)>> = per_rep.into_iter().collect::<Result<_>>()?;
        let r = samples.len() as f64;
        let mut best = (0.0, 0.0);
        for c in 0..samples[0].len() {
            let d_mean = samples.iter().map(|s| s[c].0).sum::<f64>() / r;
            let q_mean = samples.iter().map(|s| s[c].1).sum::<f64>() / r;
            let var_d = samples.iter().map(|s| (s[c].0 - d_mean).powi(2)).sum::<f64>() / (r - 1.0);
            let var_q = samples.iter().map(|s| (s[c].1 - q_mean).powi(2)).sum::<f64>() / (r - 1.0);
            let cov = samples.iter().map(|s| (s[c].0 - d_mean) * (s[c].1 - q_mean)).sum::<f64>() / (r - 1.0);
            let curv = q_mean.abs();
            let gain = d_mean * d_mean / (2.0 * curv);
            // delta method on (D̄, Q̄)
            let dg_dd = d_mean / curv;
            let dg_dq = d_mean * d_mean / (2.0 * curv * curv);
            let var = (dg_dd * dg_dd * var_d + dg_dq * dg_dq * var_q - 2.0 * dg_dd * dg_dq * cov * q_mean.signum()) / r;
            if gain > best.0 {
                best = (gain, var.max(0.0).sqrt());
            }
        }
        gaps.push(best.0);
        errors.push(best.1);
        delta.push(proportion_error(&counts, &p));
    }
    Ok(NashGapReport {
        n_values: n_values.to_vec(),
        gaps,
        std_errors: errors,
        method: NashMethod::PerturbationFamily,
        proportion_error: delta,
    })
}
