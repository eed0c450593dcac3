//! Subcommand implementations for the `sail` binary.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sail_core::experiment::{self, SweepAxis};
use sail_core::mdp::{self, DEFAULT_VI_TOL};
use sail_core::metrics::{self, DEFAULT_IMPROVEMENT_EPS};
use sail_core::{Error, LossVariant, RunConfig, RunOutcome, RunRecord, SummaryRow, TabularMdp};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUN_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sail", version, about = "Self-imitation advantage learning lab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one configuration on every seed and write a CSV per seed.
    Train(RunFlags),
    /// Relative improvement of A over baseline B. Each input is a run CSV or a config file.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Compare the advantage-learning fixed point with value iteration.
    Oracle {
        /// MDP text file; a seeded random 5x3 MDP when omitted.
        mdp: Option<PathBuf>,
        #[arg(long, default_value_t = 0.9)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Discount of the random MDP.
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
    },
    /// Run a configuration over several values of one axis.
    Sweep {
        #[arg(long, value_enum)]
        axis: AxisKind,
        /// Comma-separated axis values; defaults depend on the axis.
        #[arg(long)]
        values: Option<String>,
        #[command(flatten)]
        flags: RunFlags,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisKind {
    Variant,
    Stickiness,
    Alpha,
}

/// Flags shared by the commands that train.
#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Repeatable; replaces the configured seed list.
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<LossVariant>,
    #[arg(long)]
    pub sticky: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub steps: Option<u64>,
}

impl RunFlags {
    /// Loads the config file (or defaults) and applies the flag overrides.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        self.apply(config)
    }

    fn apply(&self, mut config: RunConfig) -> Result<RunConfig, CliError> {
        if !self.seeds.is_empty() {
            config.run.seeds = self.seeds.clone();
        }
        if let Some(out) = &self.out {
            config.run.out = out.clone();
        }
        if let Some(v) = self.variant {
            config.agent.loss_variant = v;
        }
        if let Some(p) = self.sticky {
            config.env.sticky = p;
        }
        if let Some(a) = self.alpha {
            config.agent.alpha = a;
        }
        if let Some(steps) = self.steps {
            config.run.steps = steps;
        }
        config.validate()?;
        Ok(config)
    }
}

/// A failed command and the exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config or input files.
    Usage(String),
    /// A run started but did not complete.
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Run(_) => EXIT_RUN_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Run(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_) | Error::Consistency(_) => CliError::Run(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let text = match cli.command {
        Command::Train(flags) => cmd_train(&flags.resolve()?)?,
        Command::Compare { a, b, flags } => {
            let out_dir = flags.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let (summary, path) = cmd_compare(&a, &b, &flags, &out_dir)?;
            let mut text = format!("wrote {}\n", path.display());
            for row in summary {
                text += &format!(
                    "{} vs {} on {}: {:+.2}% (final mean {:.3}, median {:.3})\n",
                    row.method,
                    label_of(&b),
                    row.env,
                    100.0 * row.rel_improvement_vs_baseline,
                    row.final_score_mean,
                    row.final_score_median
                );
            }
            text
        }
        Command::Oracle { mdp, alpha, seed, gamma } => {
            let model = match &mdp {
                Some(path) => TabularMdp::load(path)?,
                None => TabularMdp::random(5, 3, gamma, &mut sail_core::rng::stream(seed, "oracle"))?,
            };
            cmd_oracle(&model, alpha)?.to_string()
        }
        Command::Sweep { axis, values, flags } => {
            let axis = parse_axis(axis, values.as_deref())?;
            cmd_sweep(&flags.resolve()?, &axis)?
        }
    };
    out.write_all(text.as_bytes()).map_err(|e| CliError::Usage(format!("cannot write output: {e}")))
}

fn failures(outcomes: &[RunOutcome]) -> Option<String> {
    let failed: Vec<String> = outcomes
        .iter()
        .filter_map(|o| o.failure.as_ref().map(|f| format!("{} seed {}: {f}", o.method, o.seed)))
        .collect();
    (!failed.is_empty()).then(|| failed.join("\n"))
}

fn outcome_lines(outcomes: &[RunOutcome], dir: &Path) -> String {
    outcomes
        .iter()
        .map(|o| {
            let last = o.final_return().map_or("n/a".to_string(), |r| format!("{r:.3}"));
            format!("{} seed {}: final eval return {last} -> {}\n", o.method, o.seed, o.csv_path(dir).display())
        })
        .collect()
}

/// Trains every seed; failed seeds still write their partial CSVs.
pub fn cmd_train(config: &RunConfig) -> Result<String, CliError> {
    let outcomes = experiment::train(config)?;
    if let Some(msg) = failures(&outcomes) {
        return Err(CliError::Run(msg));
    }
    Ok(outcome_lines(&outcomes, &config.run.out))
}

fn label_of(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn is_config(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "toml")
}

/// Runs from a CSV, or from training a config file into `out/<label>`.
fn load_runs(input: &Path, flags: &RunFlags, out: &Path) -> Result<Vec<RunRecord>, CliError> {
    let rows = if is_config(input) {
        let mut config = flags.apply(RunConfig::load(input)?)?;
        config.run.out = out.join(label_of(input));
        let outcomes = experiment::train(&config)?;
        if let Some(msg) = failures(&outcomes) {
            return Err(CliError::Run(msg));
        }
        outcomes.into_iter().flat_map(|o| o.rows).collect()
    } else {
        metrics::parse_csv(input)?
    };
    if rows.is_empty() {
        return Err(CliError::Usage(format!("{}: no evaluation rows", input.display())));
    }
    Ok(RunRecord::from_rows(&rows)?)
}

/// Writes `summary.csv` into `out` and returns its rows.
pub fn cmd_compare(a: &Path, b: &Path, flags: &RunFlags, out: &Path) -> Result<(Vec<SummaryRow>, PathBuf), CliError> {
    let runs_a = load_runs(a, flags, out)?;
    let runs_b = load_runs(b, flags, out)?;
    let summary = metrics::compare_runs(&label_of(a), &runs_a, &runs_b, DEFAULT_IMPROVEMENT_EPS)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Usage(format!("{}: {e}", out.display())))?;
    let path = out.join("summary.csv");
    metrics::emit_summary(&summary, &path)?;
    Ok((summary, path))
}

/// Advantage-learning fixed point versus the optimal action values.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub alpha: f64,
    /// Fraction of states whose greedy actions coincide.
    pub policy_agreement: f64,
    pub optimal_gap: f64,
    pub al_gap: f64,
    /// `al_gap / optimal_gap`; 1 when both gaps vanish.
    pub gap_ratio: f64,
    pub max_value_difference: f64,
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "alpha: {}", self.alpha)?;
        writeln!(f, "policy agreement: {:.2}%", 100.0 * self.policy_agreement)?;
        writeln!(f, "mean action gap (optimal): {:.6}", self.optimal_gap)?;
        writeln!(f, "mean action gap (advantage learning): {:.6}", self.al_gap)?;
        writeln!(f, "gap ratio: {:.6}", self.gap_ratio)?;
        writeln!(f, "max |Q_al - Q*|: {:.6e}", self.max_value_difference)
    }
}

pub fn cmd_oracle(model: &TabularMdp, alpha: f64) -> Result<OracleReport, CliError> {
    let optimal = mdp::value_iteration(model, DEFAULT_VI_TOL)?;
    let al = mdp::al_fixed_point(model, alpha, DEFAULT_VI_TOL)?;
    let (pi_opt, pi_al) = (mdp::greedy_policy(&optimal), mdp::greedy_policy(&al));
    let agree = pi_opt.iter().zip(&pi_al).filter(|(a, b)| a == b).count();
    let optimal_gap = mdp::mean_top_two_gap(&optimal);
    let al_gap = mdp::mean_top_two_gap(&al);
    let gap_ratio = if optimal_gap == al_gap { 1.0 } else { al_gap / optimal_gap };
    Ok(OracleReport {
        alpha,
        policy_agreement: agree as f64 / pi_opt.len() as f64,
        optimal_gap,
        al_gap,
        gap_ratio,
        max_value_difference: al.sup_distance(&optimal),
    })
}

pub fn parse_axis(kind: AxisKind, values: Option<&str>) -> Result<SweepAxis, CliError> {
    let items: Option<Vec<&str>> =
        values.map(|v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect());
    let numbers = |items: Vec<&str>| -> Result<Vec<f64>, CliError> {
        items
            .into_iter()
            .map(|s| s.parse().map_err(|_| CliError::Usage(format!("`{s}` is not a number"))))
            .collect()
    };
    let axis = match (kind, items) {
        (AxisKind::Variant, None) => SweepAxis::Variant(LossVariant::ALL.to_vec()),
        (AxisKind::Variant, Some(items)) => {
            SweepAxis::Variant(items.into_iter().map(str::parse).collect::<Result<_, _>>()?)
        }
        (AxisKind::Stickiness, None) => SweepAxis::Stickiness(vec![0.0, 0.25, 0.5]),
        (AxisKind::Stickiness, Some(items)) => SweepAxis::Stickiness(numbers(items)?),
        (AxisKind::Alpha, None) => SweepAxis::Alpha(vec![0.1, 0.5, 0.9]),
        (AxisKind::Alpha, Some(items)) => SweepAxis::Alpha(numbers(items)?),
    };
    if axis.is_empty() {
        return Err(CliError::Usage("sweep axis has no values".into()));
    }
    Ok(axis)
}

pub fn cmd_sweep(base: &RunConfig, axis: &SweepAxis) -> Result<String, CliError> {
    let result = experiment::sweep(base, axis)?;
    if let Some(msg) = failures(&result.outcomes) {
        return Err(CliError::Run(msg));
    }
    let mut text = outcome_lines(&result.outcomes, &base.run.out);
    text += &format!("baseline: {}\n", result.baseline);
    for row in &result.summary {
        text += &format!(
            "{} on {}: {:+.2}% (final median {:.3})\n",
            row.method,
            row.env,
            100.0 * row.rel_improvement_vs_baseline,
            row.final_score_median
        );
    }
    text += &format!("wrote {}\n", base.run.out.join("summary.csv").display());
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing() {
        assert_eq!(parse_axis(AxisKind::Variant, None).unwrap().len(), 4);
        assert_eq!(
            parse_axis(AxisKind::Stickiness, Some("0, 0.5")).unwrap(),
            SweepAxis::Stickiness(vec![0.0, 0.5])
        );
        assert!(matches!(parse_axis(AxisKind::Alpha, Some("")), Err(CliError::Usage(_))));
        assert!(parse_axis(AxisKind::Alpha, Some("x")).is_err());
        assert!(parse_axis(AxisKind::Variant, Some("sail,ppo")).is_err());
    }

    #[test]
    fn flags_override_the_config() {
        let flags = RunFlags {
            seeds: vec![3, 4],
            variant: Some(LossVariant::Al),
            sticky: Some(0.5),
            alpha: Some(0.3),
            steps: Some(10),
            ..RunFlags::default()
        };
        let c = flags.resolve().unwrap();
        assert_eq!(c.run.seeds, [3, 4]);
        assert_eq!(c.agent.loss_variant, LossVariant::Al);
        assert_eq!((c.env.sticky, c.agent.alpha, c.run.steps), (0.5, 0.3, 10));
        let bad = RunFlags { alpha: Some(1.0), ..RunFlags::default() };
        assert!(matches!(bad.resolve(), Err(CliError::Usage(_))));
    }

    #[test]
    fn oracle_with_zero_alpha_reproduces_the_optimum() {
        let model = TabularMdp::random(5, 3, 0.9, &mut sail_core::rng::stream(0, "oracle")).unwrap();
        let report = cmd_oracle(&model, 0.0).unwrap();
        assert_eq!(report.policy_agreement, 1.0);
        assert_eq!(report.gap_ratio, 1.0);
        assert_eq!(report.max_value_difference, 0.0);
    }
}
