//! Scenario files, orchestration and CSV output.
//!
//! Scenarios are TOML documents with three tables, `[population]`,
//! `[market]` and `[run]`. Unknown keys are rejected.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{EquilibriumEngine, EquilibriumSolution};
use crate::error::{Error, Result};
use crate::filter::{alpha_forecast, FilterScheme, FilterState};
use crate::market_sim::{simulate_replication, GameOptions, GameTrajectory};
use crate::model::{
    GameSpec, GaussianInventories, LatentMarketModel, PopulationSpec, SubPopulationSpec, TimeGrid,
};
use crate::nash_eval::{
    nash_gap_curve_oracle, nash_gap_curve_perturbation, DeterministicScenario, NashGapReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Equilibrium,
    Simulate,
    NashGap,
    FilterDemo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NashMethodConfig {
    #[default]
    DeterministicBestResponse,
    PerturbationFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterSchemeConfig {
    #[default]
    Exact,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubPopulationConfig {
    pub a: f64,
    pub phi: f64,
    pub psi: f64,
    pub p: f64,
    pub m0: f64,
    pub s0: f64,
    pub n_agents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub lambda: f64,
    pub subpop: Vec<SubPopulationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub theta_states: Vec<f64>,
    pub generator: Vec<Vec<f64>>,
    pub prior: Vec<f64>,
    pub kappa: f64,
    pub sigma: f64,
    pub alpha_tick: f64,
    pub f0: f64,
    pub horizon: f64,
}

fn default_nash_n_values() -> Vec<usize> {
    vec![5, 10, 30, 100, 300]
}

fn default_perturbation_eps() -> f64 {
    1.0
}

fn default_max_path_files() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: RunMode,
    pub n_steps: usize,
    pub seed: u64,
    pub replications: usize,
    pub output_dir: PathBuf,
    /// `(time, state index)` pairs; the first must sit at `t = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forced_theta: Option<Vec<(f64, usize)>>,
    #[serde(default = "default_nash_n_values")]
    pub nash_n_values: Vec<usize>,
    #[serde(default)]
    pub nash_method: NashMethodConfig,
    #[serde(default = "default_perturbation_eps")]
    pub perturbation_eps: f64,
    #[serde(default)]
    pub filter_scheme: FilterSchemeConfig,
    /// Replications whose full paths are written as `paths_<rep>.csv`.
    #[serde(default = "default_max_path_files")]
    pub max_path_files: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub population: PopulationConfig,
    pub market: MarketConfig,
    pub run: RunConfig,
}

/// Command-line values that win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<RunMode>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub n_steps: Option<usize>,
    pub replications: Option<usize>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config {
            path: origin.to_string(),
            message: e.to_string().trim_end().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical TOML rendering; `from_toml_str` inverts it exactly.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config is always representable")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(m) = o.mode {
            self.run.mode = m;
        }
        if let Some(s) = o.seed {
            self.run.seed = s;
        }
        if let Some(d) = &o.output_dir {
            self.run.output_dir = d.clone();
        }
        if let Some(n) = o.n_steps {
            self.run.n_steps = n;
        }
        if let Some(r) = o.replications {
            self.run.replications = r;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.game_spec()?;
        let run = &self.run;
        if run.n_steps == 0 {
            return Err(Error::validation("run.n_steps", "must be at least 1"));
        }
        if run.replications == 0 {
            return Err(Error::validation("run.replications", "must be at least 1"));
        }
        if run.nash_n_values.iter().any(|&n| n < self.population.subpop.len()) {
            return Err(Error::validation(
                "run.nash_n_values",
                "every population size must leave room for one agent per sub-population",
            ));
        }
        if !(run.perturbation_eps > 0.0 && run.perturbation_eps.is_finite()) {
            return Err(Error::validation("run.perturbation_eps", "must be positive"));
        }
        if let Some(f) = &run.forced_theta {
            crate::market_sim::ThetaPath::forced(&self.market_model(), f)?;
        }
        Ok(())
    }

    pub fn market_model(&self) -> LatentMarketModel {
        let m = &self.market;
        let rows = m.generator.len();
        let cols = m.generator.first().map_or(0, Vec::len);
        let generator = if m.generator.iter().all(|r| r.len() == cols) {
            DMatrix::from_fn(rows, cols, |i, j| m.generator[i][j])
        } else {
            // ragged rows: leave a shape the model validator rejects
            DMatrix::zeros(rows, 0)
        };
        LatentMarketModel {
            theta_states: m.theta_states.clone(),
            generator,
            prior: m.prior.clone(),
            kappa: m.kappa,
            sigma: m.sigma,
            alpha_tick: m.alpha_tick,
            f0: m.f0,
            horizon: m.horizon,
        }
    }

    pub fn population_spec(&self) -> PopulationSpec {
        PopulationSpec {
            subpops: self
                .population
                .subpop
                .iter()
                .map(|s| SubPopulationSpec { a: s.a, phi: s.phi, psi: s.psi, p: s.p, m0: s.m0, s0: s.s0 })
                .collect(),
            lambda: self.population.lambda,
        }
    }

    /// Validated game described by the document.
    pub fn game_spec(&self) -> Result<GameSpec> {
        GameSpec {
            population: self.population_spec(),
            market: self.market_model(),
            n_agents_per_subpop: self.population.subpop.iter().map(|s| s.n_agents).collect(),
            target_shift: None,
        }
        .validate()
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.market.horizon, self.run.n_steps)
    }

    fn filter_scheme(&self) -> FilterScheme {
        match self.run.filter_scheme {
            FilterSchemeConfig::Exact => FilterScheme::Exact,
            FilterSchemeConfig::Explicit => FilterScheme::Explicit,
        }
    }
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    ScenarioConfig::from_toml_str(&text, &path.display().to_string())
}

/// Files written by one run, relative to the output directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let out = &cfg.run.output_dir;
    fs::create_dir_all(out)?;
    let header = header_line(cfg);
    let spec = cfg.game_spec()?;
    let grid = cfg.grid()?;
    let engine = EquilibriumEngine::new(&spec.population, &spec.market, &grid)?;
    let mut files = Vec::new();
    let mut emit = |name: String, body: String| -> Result<()> {
        fs::write(out.join(&name), format!("{header}\n{body}"))?;
        files.push(PathBuf::from(name));
        Ok(())
    };
    match cfg.run.mode {
        RunMode::Equilibrium => {
            let alpha = match &cfg.run.forced_theta {
                Some(f) => DeterministicScenario::new(&spec.population, &spec.market, &grid, f)?.alpha,
                None => alpha_forecast(&FilterState::initial(&spec.market), &spec.market, &grid.t).values,
            };
            let sol = engine.solve_deterministic(&alpha, &spec.population.initial_means());
            emit("equilibrium.csv".into(), equilibrium_csv(&sol))?;
        }
        RunMode::Simulate | RunMode::FilterDemo => {
            let agents = cfg.run.mode == RunMode::Simulate;
            let options = GameOptions {
                filter_scheme: cfg.filter_scheme(),
                record_agents: agents,
                ..Default::default()
            };
            let forced = cfg.run.forced_theta.as_deref();
            let trajectories: Vec<GameTrajectory> = (0..cfg.run.replications as u64)
                .into_par_iter()
                .map(|rep| {
                    let mut t = simulate_replication(&spec, &engine, &GaussianInventories, forced, &options, cfg.run.seed, rep)?;
                    if rep as usize >= cfg.run.max_path_files {
                        // keep only what the objective table needs
                        t.inventory.clear();
                        t.control.clear();
                        t.cash.clear();
                        t.posterior_path.clear();
                    }
                    Ok(t)
                })
                .collect::<Result<_>>()?;
            for (rep, traj) in trajectories.iter().enumerate().take(cfg.run.max_path_files) {
                emit(format!("paths_{rep}.csv"), paths_csv(traj, &spec.market, agents))?;
            }
            if agents {
                emit("objectives.csv".into(), objectives_csv(&trajectories))?;
            }
        }
        RunMode::NashGap => {
            let report = nash_gap(cfg, &spec, &engine, &grid)?;
            emit("nash_gap.csv".into(), nash_gap_csv(&report))?;
        }
    }
    Ok(RunSummary { files })
}

fn nash_gap(cfg: &ScenarioConfig, spec: &GameSpec, engine: &EquilibriumEngine, grid: &TimeGrid) -> Result<NashGapReport> {
    match cfg.run.nash_method {
        NashMethodConfig::DeterministicBestResponse => {
            let forced = cfg.run.forced_theta.as_deref().ok_or_else(|| {
                Error::validation("run.forced_theta", "the deterministic best-response method needs a forced latent path")
            })?;
            let scenario = DeterministicScenario::new(&spec.population, &spec.market, grid, forced)?;
            nash_gap_curve_oracle(&scenario, &cfg.run.nash_n_values)
        }
        NashMethodConfig::PerturbationFamily => nash_gap_curve_perturbation(
            spec,
            engine,
            &GaussianInventories,
            cfg.run.forced_theta.as_deref(),
            &cfg.run.nash_n_values,
            cfg.run.replications,
            cfg.run.seed,
            cfg.run.perturbation_eps,
        ),
    }
}

/// `# latent-mfg <version> config=<resolved config as compact JSON>`.
pub fn header_line(cfg: &ScenarioConfig) -> String {
    let json = serde_json::to_string(cfg).expect("scenario config serialises");
    format!("# latent-mfg {} config={json}", env!("CARGO_PKG_VERSION"))
}

fn push_row(buf: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            buf.push(',');
        }
        first = false;
        write!(buf, "{v:.16e}").unwrap();
    }
    buf.push('\n');
}

pub fn equilibrium_csv(sol: &EquilibriumSolution) -> String {
    let k = sol.g1[0].len();
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=k).map(|i| format!("g1_{i}")));
    for i in 1..=k {
        cols.extend((1..=k).map(|j| format!("g2_{i}_{j}")));
    }
    cols.extend((1..=k).map(|i| format!("nu_bar_{i}")));
    cols.extend((1..=k).map(|i| format!("q_bar_{i}")));
    cols.extend((1..=k).map(|i| format!("h2_{i}")));
    let mut buf = cols.join(",") + "\n";
    for (i, &t) in sol.grid.t.iter().enumerate() {
        let mut row = vec![t];
        row.extend(sol.g1[i].iter());
        for r in 0..k {
            row.extend((0..k).map(|c| sol.g2[i][(r, c)]));
        }
        row.extend(sol.nu_bar[i].iter());
        row.extend(sol.q_bar[i].iter());
        row.extend(sol.h2[i].iter());
        push_row(&mut buf, row);
    }
    buf
}

pub fn paths_csv(traj: &GameTrajectory, market: &LatentMarketModel, agents: bool) -> String {
    let m = market.n_states();
    let n_agents = if agents { traj.inventory.len() } else { 0 };
    let mut cols = vec!["t".to_string(), "S".into(), "F".into(), "theta".into()];
    cols.extend((1..=m).map(|i| format!("posterior_{i}")));
    cols.extend((1..=n_agents).map(|j| format!("q_{j}")));
    cols.extend((1..=n_agents).map(|j| format!("nu_{j}")));
    let mut buf = cols.join(",") + "\n";
    for (i, &t) in traj.grid.t.iter().enumerate() {
        let mut row = vec![t, traj.s_path[i], traj.f_path[i], market.theta_states[traj.theta_path[i]]];
        row.extend(traj.posterior_path[i].iter());
        row.extend((0..n_agents).map(|j| traj.inventory[j][i]));
        row.extend((0..n_agents).map(|j| traj.control[j][i]));
        push_row(&mut buf, row);
    }
    buf
}

/// Replication-averaged objective per agent.
pub fn objectives_csv(trajectories: &[GameTrajectory]) -> String {
    let mut buf = String::from("agent,subpop,H\n");
    let r = trajectories.len() as f64;
    let first = &trajectories[0];
    for (j, &k) in first.agent_subpop.iter().enumerate() {
        let mean = trajectories.iter().map(|t| t.objective[j]).sum::<f64>() / r;
        writeln!(buf, "{},{},{mean:.16e}", j + 1, k + 1).unwrap();
    }
    buf
}

pub fn nash_gap_csv(report: &NashGapReport) -> String {
    let mut buf = String::from("N,gap,stderr,method\n");
    let tag = report.method.tag();
    for ((n, g), s) in report.n_values.iter().zip(&report.gaps).zip(&report.std_errors) {
        writeln!(buf, "{n},{g:.16e},{s:.16e},{tag}").unwrap();
    }
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE_CFG: &str = include_str!("../configs/table1_table2.cfg");

    #[test]
    fn shipped_config_is_the_table_scenario() {
        let cfg = ScenarioConfig::from_toml_str(TABLE_CFG, "table1_table2.cfg").unwrap();
        let spec = cfg.game_spec().unwrap();
        let expected = crate::model::table_spec();
        assert_eq!(spec.population, expected.population);
        assert_eq!(spec.market, expected.market);
        assert_eq!(spec.n_agents_per_subpop, vec![20, 10]);
        assert_eq!(cfg.run.forced_theta, Some(vec![(0.0, 0), (0.5, 1)]));
        assert_eq!(cfg.run.n_steps, 1000);
    }

    #[test]
    fn canonical_emitter_round_trips() {
        let mut cfg = ScenarioConfig::from_toml_str(TABLE_CFG, "t").unwrap();
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string(), "emitted").unwrap();
        assert_eq!(again, cfg);
        cfg.run.forced_theta = None;
        cfg.run.nash_method = NashMethodConfig::PerturbationFamily;
        cfg.population.lambda = 1.0 / 3.0;
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string(), "emitted").unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn missing_key_is_named() {
        let text = TABLE_CFG.replace("lambda = 1e-3", "");
        let err = ScenarioConfig::from_toml_str(&text, "x.cfg").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("lambda"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = TABLE_CFG.replace("lambda = 1e-3", "lambda = 1e-3\nlamda = 1e-3");
        let err = ScenarioConfig::from_toml_str(&text, "x.cfg").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("lamda"), "{err}");
    }

    #[test]
    fn invalid_values_are_validation_errors() {
        let text = TABLE_CFG.replacen("a = 1e-4", "a = -1e-4", 1);
        let err = ScenarioConfig::from_toml_str(&text, "x.cfg").unwrap_err();
        assert!(matches!(err, Error::Validation { .. }), "{err}");
        let text = TABLE_CFG.replace("[0.5, 1]", "[0.5, 7]");
        assert_eq!(ScenarioConfig::from_toml_str(&text, "x.cfg").unwrap_err().exit_code(), 1);
    }

    #[test]
    fn overrides_win() {
        let mut cfg = ScenarioConfig::from_toml_str(TABLE_CFG, "t").unwrap();
        cfg.apply(&Overrides { seed: Some(9), n_steps: Some(50), replications: Some(3), ..Default::default() });
        assert_eq!((cfg.run.seed, cfg.run.n_steps, cfg.run.replications), (9, 50, 3));
    }

    #[test]
    fn floats_carry_seventeen_digits() {
        let mut buf = String::new();
        push_row(&mut buf, [0.1, -2.0 / 3.0]);
        assert_eq!(buf, "1.0000000000000001e-1,-6.6666666666666663e-1\n");
        for s in buf.trim().split(',') {
            let v: f64 = s.parse().unwrap();
            assert_eq!(format!("{v:.16e}"), s);
        }
    }

    #[test]
    fn header_declares_version_and_config() {
        let cfg = ScenarioConfig::from_toml_str(TABLE_CFG, "t").unwrap();
        let h = header_line(&cfg);
        assert!(h.starts_with(&format!("# latent-mfg {} config={{", env!("CARGO_PKG_VERSION"))));
        let json = h.split_once("config=").unwrap().1;
        let back: ScenarioConfig = serde_json::from_str(json).unwrap();
        assert_eq!(back, cfg);
    }
}
