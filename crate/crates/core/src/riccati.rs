//! Matrix Riccati gain `g₂`, the scalar agent gain `h₂` and time-ordered
//! exponentials of `(Λ + g₂)(2a)⁻¹`.
//!
//! `g₂` solves `−dg₂ = ((Λ + g₂)(2a)⁻¹ g₂ − 2φ) dt` with `g₂(T) = −2Ψ`.
//! It is obtained from the linear lift `Y_t = e^{(T−t)B} (I; −2Ψ)` with
//! `B = [[0, −(2a)⁻¹], [−2φ, Λ(2a)⁻¹]]` as `g₂ = Y₂ Y₁⁻¹`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{PopulationSpec, SubPopulationSpec, TimeGrid};

/// Largest tolerated condition number of the `Y₁` block.
pub const MAX_Y1_CONDITION: f64 = 1e12;

/// Below this ratio `φ/a` the gain uses the `φ = 0` closed form.
const PHI_LIMIT_RATIO: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub grid: TimeGrid,
    /// `g₂` at every grid point.
    pub g2: Vec<DMatrix<f64>>,
    /// Smallest reciprocal condition number of `Y₁` seen on the grid.
    pub y1_min_condition: f64,
}

/// Block generator `B` of the linear lift.
fn lift_generator(population: &PopulationSpec) -> DMatrix<f64> {
    let k = population.k();
    let j = population.half_inverse_impact();
    let lambda_j = population.impact_matrix() * &j;
    let mut b = DMatrix::zeros(2 * k, 2 * k);
    b.view_mut((0, k), (k, k)).copy_from(&(-&j));
    b.view_mut((k, 0), (k, k))
        .copy_from(&(population.phi_matrix() * -2.0));
    b.view_mut((k, k), (k, k)).copy_from(&lambda_j);
    b
}

fn reciprocal_condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if max == 0.0 || !max.is_finite() {
        0.0
    } else {
        min / max
    }
}

struct Lift {
    b: DMatrix<f64>,
    terminal: DMatrix<f64>,
    horizon: f64,
    k: usize,
}

impl Lift {
    fn new(population: &PopulationSpec, horizon: f64) -> Self {
        let k = population.k();
        let mut terminal = DMatrix::zeros(2 * k, k);
        terminal
            .view_mut((0, 0), (k, k))
            .copy_from(&DMatrix::identity(k, k));
        terminal
            .view_mut((k, 0), (k, k))
            .copy_from(&(population.psi_matrix() * -2.0));
        Lift {
            b: lift_generator(population),
            terminal,
            horizon,
            k,
        }
    }

    /// `(g₂(t), rcond(Y₁))`.
    fn eval(&self, t: f64) -> Result<(DMatrix<f64>, f64)> {
        let k = self.k;
        let tau = (self.horizon - t).max(0.0);
        if tau == 0.0 {
            return Ok((self.terminal.rows(k, k).into_owned(), 1.0));
        }
        let y = (&self.b * tau).exp() * &self.terminal;
        let y1 = y.rows(0, k).into_owned();
        let y2 = y.rows(k, k).into_owned();
        let rcond = reciprocal_condition(&y1);
        if !(rcond * MAX_Y1_CONDITION >= 1.0) {
            return Err(Error::SingularY1 {
                t,
                condition: 1.0 / rcond,
            });
        }
        // g₂ = Y₂ Y₁⁻¹  ⇔  Y₁ᵀ g₂ᵀ = Y₂ᵀ
        let g2t = y1
            .transpose()
            .lu()
            .solve(&y2.transpose())
            .ok_or(Error::SingularY1 { t, condition: f64::INFINITY })?;
        let g2 = g2t.transpose();
        if g2.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("g2"));
        }
        Ok((g2, rcond))
    }
}

/// `g₂` at a single time.
pub fn g2_at(population: &PopulationSpec, horizon: f64, t: f64) -> Result<DMatrix<f64>> {
    Lift::new(population, horizon).eval(t).map(|(g, _)| g)
}

/// Solves the `g₂` Riccati equation on every grid point.
pub fn solve_g2(population: &PopulationSpec, grid: &TimeGrid) -> Result<RiccatiSolution> {
    let lift = Lift::new(population, grid.horizon());
    let mut min_rcond = f64::INFINITY;
    let mut g2 = Vec::with_capacity(grid.len());
    for &t in &grid.t {
        let (g, rc) = lift.eval(t)?;
        min_rcond = min_rcond.min(rc);
        g2.push(g);
    }
    g2[grid.n_steps] = population.psi_matrix() * -2.0;
    Ok(RiccatiSolution {
        grid: grid.clone(),
        g2,
        y1_min_condition: min_rcond,
    })
}

/// Time derivative `dg₂/dt = 2φ − (Λ + g₂)(2a)⁻¹ g₂`.
pub fn riccati_rhs(population: &PopulationSpec, g2: &DMatrix<f64>) -> DMatrix<f64> {
    let j = population.half_inverse_impact();
    population.phi_matrix() * 2.0 - (population.impact_matrix() + g2) * j * g2
}

fn tanhc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 3.0
    } else {
        x.tanh() / x
    }
}

fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

fn gamma_of(sub: &SubPopulationSpec) -> f64 {
    if sub.phi < PHI_LIMIT_RATIO * sub.a {
        0.0
    } else {
        (sub.phi / sub.a).sqrt()
    }
}

/// Agent gain `h₂(t)`, solving `−dh₂ = (h₂²/(2a) − 2φ) dt`, `h₂(T) = −2Ψ`.
///
/// Written as `h₂ = −2a w′/w` with `w(τ) = a cosh(γτ) + Ψ sinh(γτ)/γ`,
/// `τ = T − t`, which reduces to `−2aΨ/(a + Ψτ)` when `φ = 0`.
pub fn h2_gain(sub: &SubPopulationSpec, t: f64, horizon: f64) -> f64 {
    let tau = (horizon - t).max(0.0);
    let gamma = gamma_of(sub);
    let x = gamma * tau;
    let num = sub.a * gamma * x.tanh() + sub.psi;
    let den = sub.a + sub.psi * tau * tanhc(x);
    -2.0 * sub.a * num / den
}

/// `ln w(T − t)`; differences give `∫ h₂/(2a) dt` exactly.
pub fn h2_log_weight(sub: &SubPopulationSpec, t: f64, horizon: f64) -> f64 {
    let tau = (horizon - t).max(0.0);
    let gamma = gamma_of(sub);
    let x = gamma * tau;
    if x > 20.0 {
        let e = (-2.0 * x).exp();
        x + ((sub.a * (1.0 + e) + sub.psi / gamma * (1.0 - e)) / 2.0).ln()
    } else {
        (sub.a * x.cosh() + sub.psi * tau * sinhc(x)).ln()
    }
}

/// `∫_{t₁}^{t₂} h₂(u)/(2a) du`.
pub fn h2_log_decay(sub: &SubPopulationSpec, t1: f64, t2: f64, horizon: f64) -> f64 {
    h2_log_weight(sub, t2, horizon) - h2_log_weight(sub, t1, horizon)
}

/// Per-interval factors of the time-ordered exponential `:e^{∫ f}:` where
/// `η(t, u) = Φ_i Φ_{i+1} ⋯ Φ_{j−1}` for `t = t_i`, `u = t_j`.
#[derive(Debug, Clone)]
pub struct OrderedExponentialTable {
    pub grid: TimeGrid,
    pub factors: Vec<DMatrix<f64>>,
}

impl OrderedExponentialTable {
    /// Midpoint exponential factors `exp(Δt f(t_i + Δt/2))`.
    pub fn from_generator<F>(grid: &TimeGrid, mut f: F) -> Self
    where
        F: FnMut(f64) -> DMatrix<f64>,
    {
        let dt = grid.dt();
        let factors = (0..grid.n_steps)
            .map(|i| (f(grid.t[i] + 0.5 * dt) * dt).exp())
            .collect();
        OrderedExponentialTable {
            grid: grid.clone(),
            factors,
        }
    }

    pub fn dim(&self) -> usize {
        self.factors.first().map_or(0, |f| f.nrows())
    }

    /// `η(t_i, t_j)` for `i ≤ j`.
    pub fn product(&self, i: usize, j: usize) -> DMatrix<f64> {
        assert!(i <= j && j <= self.grid.n_steps);
        let k = self.dim();
        self.factors[i..j]
            .iter()
            .fold(DMatrix::identity(k, k), |acc, f| acc * f)
    }
}

/// Ordered exponential of `(Λ + g₂)(2a)⁻¹` on the Riccati grid.
///
/// The row block `V(u) = [−g₂(t), I] e^{(u−t)B}` annihilates `Y(u)` for all
/// `u`, so its second block obeys `dV₂/du = V₂ (Λ + g₂(u))(2a)⁻¹` with
/// `V₂(t) = I`. Each factor is therefore exact:
/// `Φ_i = E₂₂ − g₂(t_i) E₁₂` with `E = e^{Δt B}`.
pub fn ordered_exponential(
    population: &PopulationSpec,
    riccati: &RiccatiSolution,
) -> OrderedExponentialTable {
    let k = population.k();
    let e = (lift_generator(population) * riccati.grid.dt()).exp();
    let e12 = e.view((0, k), (k, k)).into_owned();
    let e22 = e.view((k, k), (k, k)).into_owned();
    let factors = riccati.g2[..riccati.grid.n_steps]
        .iter()
        .map(|g| &e22 - g * &e12)
        .collect();
    OrderedExponentialTable {
        grid: riccati.grid.clone(),
        factors,
    }
}
