//! Run configuration shared by the CLI commands.
//!
//! Values come from three layers, later ones winning: built-in defaults, a
//! TOML file, then command-line flags. Every key is optional in the file and
//! unknown keys are rejected.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{AnnealSchedule, BpConfig, SupervisedConfig, BRUTE_FORCE_CAP};
use crate::dqn::DqnConfig;
use crate::env::RewardScheme;
use crate::error::{Error, Result};
use crate::mcts::MctsConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trainer {
    #[default]
    Dqn,
    Mcts,
}

impl FromStr for Trainer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dqn" => Ok(Trainer::Dqn),
            "mcts" => Ok(Trainer::Mcts),
            other => Err(Error::InvalidConfig(format!("unknown trainer {other:?} (expected dqn or mcts)"))),
        }
    }
}

impl fmt::Display for Trainer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trainer::Dqn => "dqn",
            Trainer::Mcts => "mcts",
        })
    }
}

/// Inference engine: one network pass per step, or a budgeted tree search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Greedy,
    Mcts,
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" | "greedy-policy" => Ok(Engine::Greedy),
            "mcts" => Ok(Engine::Mcts),
            other => Err(Error::InvalidConfig(format!("unknown engine {other:?} (expected greedy or mcts)"))),
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Greedy => "greedy",
            Engine::Mcts => "mcts",
        })
    }
}

/// Solvers `eval` can run. `greedy` and `mcts` need policy parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Unary,
    Brute,
    Icm,
    Bp,
    Anneal,
    Supervised,
    Greedy,
    Mcts,
}

impl Solver {
    pub const ALL: [Solver; 8] = [
        Solver::Unary,
        Solver::Brute,
        Solver::Icm,
        Solver::Bp,
        Solver::Anneal,
        Solver::Supervised,
        Solver::Greedy,
        Solver::Mcts,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Unary => "unary",
            Solver::Brute => "brute",
            Solver::Icm => "icm",
            Solver::Bp => "bp",
            Solver::Anneal => "anneal",
            Solver::Supervised => "supervised",
            Solver::Greedy => "greedy",
            Solver::Mcts => "mcts",
        }
    }

    pub fn needs_params(self) -> bool {
        matches!(self, Solver::Greedy | Solver::Mcts)
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Solver::ALL.iter().map(|v| v.name()).collect();
                Error::InvalidConfig(format!("unknown solver {s:?} (expected one of {})", names.join(", ")))
            })
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which dataset items an evaluation covers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    /// The validation split, or every item when it is empty.
    #[default]
    Validation,
    Train,
    All,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "validation" => Ok(Split::Validation),
            "train" => Ok(Split::Train),
            "all" => Ok(Split::All),
            other => Err(Error::InvalidConfig(format!(
                "unknown split {other:?} (expected validation, train or all)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub solvers: Vec<Solver>,
    pub split: Split,
    /// Instances with more joint labelings than this get no brute-force
    /// reference (their gap column stays empty).
    pub brute_force_cap: u64,
    /// Also write the scheme-1 reward histogram of greedy policy episodes.
    pub reward_histogram: bool,
    pub histogram_bins: usize,
    pub bp: BpConfig,
    pub anneal: AnnealSchedule,
    pub supervised: SupervisedConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            solvers: vec![Solver::Unary, Solver::Icm, Solver::Anneal, Solver::Brute],
            split: Split::Validation,
            brute_force_cap: BRUTE_FORCE_CAP as u64,
            reward_histogram: false,
            histogram_bins: 20,
            bp: BpConfig::default(),
            anneal: AnnealSchedule::default(),
            supervised: SupervisedConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    /// Node counts; each becomes the most square grid with exactly that many cells.
    pub sizes: Vec<usize>,
    pub num_labels: usize,
    /// Timed runs per size and engine; the fastest is reported.
    pub repeats: usize,
    pub mcts_n_sim: usize,
    pub mcts_d_sim: usize,
    pub rounds: usize,
    pub embed_dim: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![50, 250, 500, 1000, 2000],
            num_labels: 3,
            repeats: 5,
            mcts_n_sim: 4,
            mcts_d_sim: 2,
            rounds: 3,
            embed_dim: 32,
        }
    }
}

/// Everything a command may need. Sections irrelevant to a command are ignored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// When set, replaces the seed of every trainer, solver and generator.
    pub seed: Option<u64>,
    /// When set, replaces the reward scheme of both trainers.
    pub scheme: Option<RewardScheme>,
    pub trainer: Trainer,
    pub engine: Engine,
    /// Record the per-step selection distribution during `infer`.
    pub trace: bool,
    pub dqn: DqnConfig,
    pub mcts: MctsConfig,
    pub eval: EvalConfig,
    pub bench: BenchConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Pushes the top-level `seed` and `scheme` into the trainer sections.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        if let Some(seed) = self.seed {
            out.dqn.seed = seed;
            out.mcts.seed = seed;
        }
        if let Some(scheme) = self.scheme {
            out.dqn.scheme = scheme;
            out.mcts.scheme = scheme;
        }
        out
    }

    pub fn base_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}
