use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use gnnevade::advtrain::{adversarial_train, AdvStrategy, AdvTrainConfig};
use gnnevade::harness::{
    attacker_count_study_on, distance_study_on, prepare_models, presets, run_on, sweep_eps_on, AttackKind, AttackSpec,
    AttackerChoice, ExperimentConfig, ExperimentReport, SeedModel, Stat, TargetMode, VictimRecord,
};
use gnnevade::models::{accuracy, save_checkpoint};
use gnnevade::{load_bundle, Architecture, Error, FrozenModel, Graph, TrainConfig};

#[derive(Parser)]
#[command(name = "gnnevade", version, about = "Train GNNs and attack them with single-node and single-edge perturbations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per seed and report clean test accuracy.
    Train(TrainArgs),
    /// Attack every test node under every seed's model.
    Attack(AttackArgs),
    /// Sweep eps0 / eps_inf, or the number of attackers.
    Sweep(SweepArgs),
    /// Accuracy against attackers at each exact distance from the victim.
    Distance(AttackArgs),
    /// Adversarially train, then evaluate the attack against the result.
    Advtrain(AdvArgs),
    /// Load a graph bundle and print its summary.
    ValidateBundle(ValidateArgs),
}

#[derive(Args)]
struct Shared {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "gcn")]
    model: Architecture,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    /// Report path; a CSV and a per-victim JSONL log are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    /// Defaults to 2, or 8 for `distance`.
    #[arg(long)]
    layers: Option<usize>,
    /// Reuse trained models from here, saving new ones on a miss.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct AttackFlags {
    #[arg(long, default_value = "single-node")]
    attack: AttackKind,
    #[arg(long, default_value = "random")]
    attacker: AttackerChoice,
    #[arg(long, default_value_t = 1)]
    num_attackers: usize,
    /// Budget preset: default, wide-linf, or injection. Injection attacks
    /// use the injection preset unless told otherwise.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    eps0: Option<f64>,
    #[arg(long)]
    epsinf: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Target class id, or `random` for a random wrong class per victim.
    #[arg(long)]
    targeted: Option<TargetMode>,
    #[arg(long, default_value_t = 1)]
    edge_budget: usize,
    #[arg(long)]
    global_edges: bool,
    #[arg(long)]
    clamp_nonneg: bool,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    shared: Shared,
    #[command(flatten)]
    attack: AttackFlags,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    shared: Shared,
    #[command(flatten)]
    attack: AttackFlags,
    #[arg(long, value_delimiter = ',')]
    eps0_grid: Vec<f64>,
    /// Continuous graphs only; defaults to the active eps_inf.
    #[arg(long, value_delimiter = ',')]
    epsinf_grid: Vec<f64>,
    /// Sweep the attacker count instead of the budget.
    #[arg(long, value_delimiter = ',')]
    attacker_counts: Vec<usize>,
}

#[derive(Args)]
struct AdvArgs {
    #[command(flatten)]
    shared: Shared,
    #[command(flatten)]
    attack: AttackFlags,
    #[arg(long, default_value = "random", value_parser = parse_strategy)]
    strategy: AdvStrategy,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    dataset: PathBuf,
}

fn parse_strategy(s: &str) -> Result<AdvStrategy, String> {
    match s {
        "random" => Ok(AdvStrategy::Random),
        "topology" => Ok(AdvStrategy::Topology),
        _ => Err(format!("unknown strategy `{s}` (random or topology)")),
    }
}

/// A failure tagged with its exit code.
struct Failure(u8, String);

const CONFIG: u8 = 1;
const DATA: u8 = 2;
const RUNTIME: u8 = 3;

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(classify(&e), e.to_string())
    }
}

fn classify(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Budget(_) | Error::Goal(_) => CONFIG,
        Error::Parse(_) | Error::Validation { .. } | Error::Checkpoint(_) => DATA,
        Error::Victim { source, .. } => classify(source),
        _ => RUNTIME,
    }
}

fn load(path: &Path) -> Result<Graph, Failure> {
    load_bundle(path).map_err(|e| Failure(DATA, format!("{}: {e}", path.display())))
}

impl Shared {
    fn train_config(&self, default_layers: usize) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden,
            layers: self.layers.unwrap_or(default_layers),
            ..TrainConfig::default()
        }
    }

    fn config(&self, attack: AttackSpec, default_layers: usize) -> Result<ExperimentConfig, Failure> {
        let mut cfg = ExperimentConfig::new(self.dataset.clone(), self.model, attack);
        cfg.train = self.train_config(default_layers);
        cfg.seeds = self.seeds.clone();
        cfg.checkpoint_dir = self.checkpoint_dir.clone();
        cfg.validate()?;
        Ok(cfg)
    }

    fn models(&self, g: &Graph, cfg: &ExperimentConfig) -> Result<Vec<SeedModel>, Failure> {
        Ok(prepare_models(g, cfg.arch, &cfg.train, &cfg.seeds, cfg.checkpoint_dir.as_deref())?)
    }
}

impl AttackFlags {
    fn spec(&self, g: &Graph) -> Result<AttackSpec, Failure> {
        let preset = self.preset.as_deref().unwrap_or(match self.attack {
            AttackKind::Injection => "injection",
            _ => "default",
        });
        let mut budget = presets::by_name(preset, g)?;
        if let Some(e) = self.eps0 {
            budget.eps0 = e;
        }
        if let Some(e) = self.epsinf {
            budget.eps_inf = Some(e);
        }
        if let Some(k) = self.iters {
            budget.iters = k;
        }
        budget.gamma = self.gamma.or(budget.gamma);
        budget.clamp_nonneg |= self.clamp_nonneg;
        let mut spec = AttackSpec::new(self.attack, budget);
        spec.attacker = self.attacker;
        spec.num_attackers = self.num_attackers;
        spec.target = self.targeted.unwrap_or(TargetMode::NonTargeted);
        spec.edge_budget = self.edge_budget;
        spec.global_edges = self.global_edges;
        spec.validate(g)?;
        Ok(spec)
    }
}

fn summarize(report: &ExperimentReport) {
    let pct = |s: &Stat| format!("{:6.2} ± {:5.2}", 100.0 * s.mean, 100.0 * s.std);
    println!("dataset {}  clean accuracy {}", report.dataset, pct(&report.clean_accuracy));
    for c in &report.cells {
        println!(
            "{:<28} accuracy {}  success {}  unattacked {}",
            c.name,
            pct(&c.accuracy),
            pct(&c.success_rate),
            c.unattacked.iter().sum::<usize>()
        );
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    println!("wall time {:.1}s", report.wall_time_secs);
}

fn finish(out: Option<&Path>, mut report: ExperimentReport, records: Vec<VictimRecord>) -> Result<(), Failure> {
    if let Some(out) = out {
        report
            .write(out, &records)
            .map_err(|e| Failure(RUNTIME, format!("writing {}: {e}", out.display())))?;
    }
    summarize(&report);
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let s = &a.shared;
    let cfg = s.config(AttackSpec::none(), 2)?;
    let g = load(&s.dataset)?;
    let models = s.models(&g, &cfg)?;
    let (report, records) = run_on(&g, &cfg, &models, start)?;
    finish(s.out.as_deref(), report, records)
}

fn attack_cmd(a: &AttackArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let g = load(&a.shared.dataset)?;
    let cfg = a.shared.config(a.attack.spec(&g)?, 2)?;
    let models = a.shared.models(&g, &cfg)?;
    let (report, records) = run_on(&g, &cfg, &models, start)?;
    finish(a.shared.out.as_deref(), report, records)
}

fn sweep_cmd(a: &SweepArgs) -> Result<(), Failure> {
    let start = Instant::now();
    if a.attacker_counts.is_empty() && a.eps0_grid.is_empty() {
        return Err(Failure(CONFIG, "give --eps0-grid or --attacker-counts".into()));
    }
    let g = load(&a.shared.dataset)?;
    let cfg = a.shared.config(a.attack.spec(&g)?, 2)?;
    let models = a.shared.models(&g, &cfg)?;
    let (report, records) = if a.attacker_counts.is_empty() {
        sweep_eps_on(&g, &cfg, &models, &a.eps0_grid, &a.epsinf_grid, start)?
    } else {
        attacker_count_study_on(&g, &cfg, &models, &a.attacker_counts, start)?
    };
    finish(a.shared.out.as_deref(), report, records)
}

fn distance_cmd(a: &AttackArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let g = load(&a.shared.dataset)?;
    let cfg = a.shared.config(a.attack.spec(&g)?, 8)?;
    let models = a.shared.models(&g, &cfg)?;
    let (report, records) = distance_study_on(&g, &cfg, &models, start)?;
    finish(a.shared.out.as_deref(), report, records)
}

fn advtrain_cmd(a: &AdvArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let s = &a.shared;
    let g = load(&s.dataset)?;
    let spec = a.attack.spec(&g)?;
    let mut cfg = s.config(spec.clone(), 2)?;
    // attacks run against the adversarially trained weights, never a cached
    // clean checkpoint
    cfg.checkpoint_dir = None;
    let mut models = Vec::new();
    for &seed in &cfg.seeds {
        let base = TrainConfig { seed, ..cfg.train.clone() };
        let adv = AdvTrainConfig::new(base, a.strategy, spec.budget.clone());
        let trained = adversarial_train(&g, cfg.arch, &adv)?;
        if let Some(dir) = &s.checkpoint_dir {
            std::fs::create_dir_all(dir).map_err(|e| Failure(RUNTIME, e.to_string()))?;
            let path = dir.join(format!("{}-{}-L{}-h{}-seed{seed}.adv.ckpt", g.name(), cfg.arch, adv.base.layers, adv.base.hidden));
            let echo = serde_json::to_value(&adv).map_err(|e| Failure(RUNTIME, e.to_string()))?;
            save_checkpoint(&path, &trained, Some(echo))?;
        }
        let model = FrozenModel::new(trained.params().clone(), &g)?;
        let clean_accuracy = accuracy(model.predictions(), &g, g.test_mask())?;
        models.push(SeedModel {
            seed,
            model,
            clean_accuracy,
        });
    }
    let (mut report, records) = run_on(&g, &cfg, &models, start)?;
    report.notes.push(format!(
        "models adversarially trained with the {} strategy",
        match a.strategy {
            AdvStrategy::Random => "random",
            AdvStrategy::Topology => "topology",
        }
    ));
    finish(s.out.as_deref(), report, records)
}

fn validate_cmd(a: &ValidateArgs) -> Result<(), Failure> {
    let g = load(&a.dataset)?;
    println!(
        "{}: {} nodes, {} edges, {} features ({:?}), {} classes, split {}/{}/{}",
        g.name(),
        g.num_nodes(),
        g.edges().len(),
        g.num_features(),
        g.feature_kind(),
        g.num_classes(),
        g.train_mask().len(),
        g.val_mask().len(),
        g.test_mask().len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Train(a) => train_cmd(a),
        Command::Attack(a) => attack_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Distance(a) => distance_cmd(a),
        Command::Advtrain(a) => advtrain_cmd(a),
        Command::ValidateBundle(a) => validate_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
