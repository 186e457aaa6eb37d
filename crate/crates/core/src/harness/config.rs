use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::attacks::Budget;
use crate::error::{Error, Result};
use crate::graph::{FeatureKind, Graph};
use crate::models::{Architecture, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    /// Clean evaluation only.
    None,
    SingleNode,
    SingleEdge,
    MultiEdge,
    ZeroFeatures,
    Injection,
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => Self::None,
            "single-node" => Self::SingleNode,
            "single-edge" => Self::SingleEdge,
            "multi-edge" => Self::MultiEdge,
            "zero-features" => Self::ZeroFeatures,
            "injection" => Self::Injection,
            _ => return Err(Error::Config(format!("unknown attack `{s}`"))),
        })
    }
}

/// How the attacker node is picked for each victim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackerChoice {
    Random,
    Hops,
    Direct,
    GradChoice,
    Topology,
}

impl std::str::FromStr for AttackerChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "random" => Self::Random,
            "hops" => Self::Hops,
            "direct" => Self::Direct,
            "gradchoice" => Self::GradChoice,
            "topology" => Self::Topology,
            _ => return Err(Error::Config(format!("unknown attacker strategy `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    NonTargeted,
    /// A fixed class for every victim.
    Class(usize),
    /// Uniform over the classes other than the victim's prediction.
    Random,
}

impl std::str::FromStr for TargetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "none" => Ok(Self::NonTargeted),
            c => c
                .parse()
                .map(Self::Class)
                .map_err(|_| Error::Config(format!("target must be a class id or `random`, got `{c}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub attacker: AttackerChoice,
    pub num_attackers: usize,
    pub budget: Budget,
    pub target: TargetMode,
    pub edge_budget: usize,
    /// Edge attacks: candidates from the whole graph instead of one attacker.
    pub global_edges: bool,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, budget: Budget) -> Self {
        Self {
            kind,
            attacker: AttackerChoice::Random,
            num_attackers: 1,
            budget,
            target: TargetMode::NonTargeted,
            edge_budget: 1,
            global_edges: false,
        }
    }

    pub fn none() -> Self {
        Self::new(AttackKind::None, Budget::discrete(0.0))
    }

    pub fn validate(&self, g: &Graph) -> Result<()> {
        if matches!(self.kind, AttackKind::SingleNode | AttackKind::Injection) {
            self.budget.validate(g.feature_kind())?;
        }
        if self.num_attackers == 0 {
            return Err(Error::Config("need at least one attacker".into()));
        }
        if self.num_attackers > 1
            && !matches!(self.attacker, AttackerChoice::Random | AttackerChoice::Hops)
        {
            return Err(Error::Config(
                "several attackers need the random or hops strategy".into(),
            ));
        }
        if self.kind == AttackKind::MultiEdge && self.edge_budget == 0 {
            return Err(Error::Config("edge budget must be at least 1".into()));
        }
        if let TargetMode::Class(c) = self.target {
            if c >= g.num_classes() {
                return Err(Error::Config(format!("target class {c} with {} classes", g.num_classes())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub arch: Architecture,
    /// Training recipe; its `seed` is replaced by each entry of `seeds`.
    pub train: TrainConfig,
    pub attack: AttackSpec,
    pub seeds: Vec<u64>,
    /// Reuses `<arch>-L<layers>-seed<s>.ckpt` from here, training and saving
    /// on a miss.
    #[serde(default)]
    pub checkpoint_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(dataset: impl Into<PathBuf>, arch: Architecture, attack: AttackSpec) -> Self {
        Self {
            dataset: dataset.into(),
            arch,
            train: TrainConfig::default(),
            attack,
            seeds: vec![0, 1, 2, 3, 4],
            checkpoint_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.train.validate()
    }
}

/// Default budgets per dataset.
pub mod presets {
    use super::*;

    /// Cora/CiteSeer: ε0 = 0.01 bit flips. PubMed: ε0 = 0.05 with ε∞ = 0.04.
    /// Other continuous graphs get the PubMed values.
    pub fn default_budget(g: &Graph) -> Budget {
        match g.feature_kind() {
            FeatureKind::Binary => Budget::discrete(0.01),
            FeatureKind::Continuous => Budget::continuous(0.05, 0.04),
        }
    }

    /// Continuous graphs with the wider ε∞ = 0.1 box.
    pub fn wide_linf_budget(g: &Graph) -> Budget {
        match g.feature_kind() {
            FeatureKind::Binary => Budget::discrete(0.01),
            FeatureKind::Continuous => Budget::continuous(0.05, 0.1),
        }
    }

    /// Injected nodes start empty, so the ℓ0 cap is lifted; continuous
    /// values stay within ε∞ = 0.1.
    pub fn injection_budget(g: &Graph) -> Budget {
        match g.feature_kind() {
            FeatureKind::Binary => Budget::discrete(0.01),
            FeatureKind::Continuous => Budget::continuous(1.0, 0.1),
        }
    }

    /// Looks a preset up by name: `default`, `wide-linf`, or `injection`.
    pub fn by_name(name: &str, g: &Graph) -> Result<Budget> {
        match name {
            "default" => Ok(default_budget(g)),
            "wide-linf" => Ok(wide_linf_budget(g)),
            "injection" => Ok(injection_budget(g)),
            _ => Err(Error::Config(format!("unknown preset `{name}`"))),
        }
    }
}
