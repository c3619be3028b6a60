use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;

use super::checkpoint::{load_checkpoint, write_atomic, AnyCheckpoint, Checkpoint};
use super::{parse_config, HarnessError, Precision, RunConfig};
use crate::env::Env;
use crate::marl::{EpisodeSummary, MarlError, StepRecord, TrainObserver, Trainer, UpdateRecord};
use crate::metrics::{bias_alignment_series, evaluate, write_alignment_csv, EvalReport, Greedy, SimilaritySample};
use crate::Scalar;

pub const CONFIG_FILE: &str = "config.toml";
pub const REWARDS_FILE: &str = "rewards.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.jsonl";
pub const EVAL_PROGRESS_FILE: &str = "eval_progress.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const ALIGNMENT_FILE: &str = "bias_alignment.csv";

/// Arguments of the `train` command.
#[derive(Debug, Clone, Default)]
pub struct TrainArgs {
    /// Missing means all defaults (or the checkpoint's config when resuming).
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    /// Continue from this checkpoint. Only `train.episodes` and the `[log]`
    /// section may differ from the checkpoint's config.
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub episodes_run: u64,
    pub final_episode: u64,
    pub updates: u64,
}

fn read_config(path: &Path) -> Result<RunConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_config(&text)
}

fn create(path: &Path, append: bool) -> Result<BufWriter<File>, HarnessError> {
    let f = if append {
        OpenOptions::new().create(true).append(true).open(path)
    } else {
        File::create(path)
    };
    f.map(BufWriter::new).map_err(|e| HarnessError::io(path, e))
}

struct RunObserver {
    config: RunConfig,
    out: PathBuf,
    rewards: BufWriter<File>,
    diagnostics: Option<BufWriter<File>>,
    trace: Option<BufWriter<File>>,
    eval_progress: Option<BufWriter<File>>,
    samples: Vec<SimilaritySample>,
}

fn obs_err(e: impl std::fmt::Display) -> MarlError {
    MarlError::Observer(e.to_string())
}

impl RunObserver {
    fn checkpoint<F: Scalar>(&self, trainer: &Trainer<F>) -> Result<(), HarnessError> {
        Checkpoint {
            config: self.config.clone(),
            counters: trainer.counters(),
            rngs: trainer.rngs().snapshot(),
            learners: trainer.learners().to_vec(),
        }
        .save(&self.out.join(CHECKPOINT_FILE))
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.rewards.flush()?;
        for w in [&mut self.diagnostics, &mut self.trace, &mut self.eval_progress].into_iter().flatten() {
            w.flush()?;
        }
        Ok(())
    }
}

impl<F: Scalar> TrainObserver<F> for RunObserver {
    fn on_update(&mut self, r: &UpdateRecord) -> Result<(), MarlError> {
        self.samples.push(SimilaritySample {
            update: r.update,
            cosine: r.ally_cosine,
        });
        if let Some(w) = &mut self.diagnostics {
            serde_json::to_writer(&mut *w, r).map_err(obs_err)?;
            writeln!(w).map_err(obs_err)?;
        }
        Ok(())
    }

    fn trace_episode(&mut self, episode: u64) -> Option<bool> {
        let every = self.config.log.trace_every;
        (every > 0 && episode.is_multiple_of(every)).then_some(self.config.log.trace_biases)
    }

    fn on_step(&mut self, r: &StepRecord) -> Result<(), MarlError> {
        if let Some(w) = &mut self.trace {
            serde_json::to_writer(&mut *w, r).map_err(obs_err)?;
            writeln!(w).map_err(obs_err)?;
        }
        Ok(())
    }

    fn on_episode(&mut self, trainer: &Trainer<F>, s: &EpisodeSummary) -> Result<(), MarlError> {
        write!(self.rewards, "{}", s.episode).map_err(obs_err)?;
        for r in &s.returns {
            write!(self.rewards, ",{r}").map_err(obs_err)?;
        }
        writeln!(self.rewards).map_err(obs_err)?;
        let done = s.episode + 1;
        let log = &self.config.log;
        if log.eval_every > 0 && done.is_multiple_of(log.eval_every) {
            let report = evaluate(trainer.env(), &mut Greedy(trainer.learners()), log.eval_episodes, self.config.train.seed)
                .map_err(obs_err)?;
            info!("episode {done}: eval mean return {:.4}", report.mean_return());
            if let Some(w) = &mut self.eval_progress {
                write!(w, "{done},{}", report.mean_return()).map_err(obs_err)?;
                for m in &report.mean {
                    write!(w, ",{m}").map_err(obs_err)?;
                }
                writeln!(w).map_err(obs_err)?;
            }
        }
        if log.checkpoint_every > 0 && done.is_multiple_of(log.checkpoint_every) {
            self.flush().map_err(obs_err)?;
            self.checkpoint(trainer).map_err(obs_err)?;
        }
        Ok(())
    }
}

/// Names of the sections in which `given` differs from `stored`. The episode
/// count and the output cadence may change on resume.
fn resume_conflicts(given: &RunConfig, stored: &RunConfig) -> Vec<&'static str> {
    let mut stored = stored.clone();
    stored.train.episodes = given.train.episodes;
    let mut out = Vec::new();
    if given.precision != stored.precision {
        out.push("precision");
    }
    if given.scenario != stored.scenario {
        out.push("scenario");
    }
    if given.physics != stored.physics {
        out.push("physics");
    }
    if given.algorithm != stored.algorithm {
        out.push("algorithm");
    }
    if given.train != stored.train {
        out.push("train");
    }
    out
}

/// Trains per `args`, writing `config.toml` first, then `rewards.csv`,
/// `diagnostics.jsonl`, `eval_progress.csv`, optional `trace.jsonl`,
/// periodic and final `checkpoint.bin`, and `bias_alignment.csv`.
pub fn cmd_train(args: &TrainArgs) -> Result<TrainOutcome, HarnessError> {
    let resume = args.resume.as_deref().map(load_checkpoint).transpose()?;
    let mut config = match (&resume, &args.config) {
        (Some(ck), Some(path)) => {
            let mut given = read_config(path)?;
            if let Some(seed) = args.seed {
                given.train.seed = seed;
            }
            let conflicts = resume_conflicts(&given, ck.config());
            if !conflicts.is_empty() {
                return Err(HarnessError::Config(format!(
                    "resumed runs may only change train.episodes and [log]; [{}] differ from the checkpoint",
                    conflicts.join(", ")
                )));
            }
            given
        }
        (Some(ck), None) => ck.config().clone(),
        (None, Some(path)) => read_config(path)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        if resume.is_some() && seed != config.train.seed {
            return Err(HarnessError::Config(format!(
                "--seed {seed} differs from the checkpoint's seed {}",
                config.train.seed
            )));
        }
        config.train.seed = seed;
    }
    config.validate()?;
    fs::create_dir_all(&args.out).map_err(|e| HarnessError::io(&args.out, e))?;
    write_atomic(&args.out.join(CONFIG_FILE), config.to_toml().as_bytes())?;
    match (config.precision, resume) {
        (Precision::F64, None) => run::<f64>(config, &args.out, None),
        (Precision::F32, None) => run::<f32>(config, &args.out, None),
        (Precision::F64, Some(AnyCheckpoint::F64(ck))) => run(config, &args.out, Some(ck)),
        (Precision::F32, Some(AnyCheckpoint::F32(ck))) => run(config, &args.out, Some(ck)),
        _ => Err(HarnessError::Checkpoint("checkpoint precision differs from the config".into())),
    }
}

fn run<F: Scalar>(config: RunConfig, out: &Path, resume: Option<Checkpoint<F>>) -> Result<TrainOutcome, HarnessError> {
    let mut trainer = Trainer::<F>::new(
        config.scenario.clone(),
        config.physics.clone(),
        config.algorithm.clone(),
        config.train.clone(),
    )?;
    let appending = resume.is_some();
    if let Some(ck) = resume {
        let rngs = ck.rng_streams();
        trainer.restore(ck.learners, ck.counters, rngs)?;
    }
    let rewards_path = out.join(REWARDS_FILE);
    let fresh_rewards = !appending || !rewards_path.exists();
    let mut rewards = create(&rewards_path, appending)?;
    if fresh_rewards {
        let header = (0..trainer.env().n_agents()).map(|i| format!(",return_{i}")).collect::<String>();
        writeln!(rewards, "episode{header}").map_err(|e| HarnessError::io(&rewards_path, e))?;
    }
    let eval_path = out.join(EVAL_PROGRESS_FILE);
    let eval_progress = if config.log.eval_every > 0 {
        let fresh = !appending || !eval_path.exists();
        let mut w = create(&eval_path, appending)?;
        if fresh {
            let header = (0..trainer.env().n_agents()).map(|i| format!(",mean_return_{i}")).collect::<String>();
            writeln!(w, "episode,mean_return{header}").map_err(|e| HarnessError::io(&eval_path, e))?;
        }
        Some(w)
    } else {
        None
    };
    let diagnostics = config
        .log
        .diagnostics
        .then(|| create(&out.join(DIAGNOSTICS_FILE), appending))
        .transpose()?;
    let trace = (config.log.trace_every > 0)
        .then(|| create(&out.join(TRACE_FILE), appending))
        .transpose()?;
    let start = trainer.counters().episode;
    let mut obs = RunObserver {
        config,
        out: out.to_path_buf(),
        rewards,
        diagnostics,
        trace,
        eval_progress,
        samples: Vec::new(),
    };
    info!("training from episode {start} to {}", trainer.config().episodes);
    let result = trainer.train(&mut obs);
    obs.flush().map_err(|e| HarnessError::io(out, e))?;
    result?;
    obs.checkpoint(&trainer)?;
    let counters = trainer.counters();
    let series = bias_alignment_series(&obs.samples, counters.updates);
    let mut csv = Vec::new();
    write_alignment_csv(&series, &mut csv).map_err(|e| HarnessError::io(out, e))?;
    write_atomic(&out.join(ALIGNMENT_FILE), &csv)?;
    Ok(TrainOutcome {
        episodes_run: counters.episode - start,
        final_episode: counters.episode,
        updates: counters.updates,
    })
}

fn eval_with<F: Scalar>(ck: &Checkpoint<F>, episodes: usize, seed: u64) -> Result<EvalReport, HarnessError> {
    let env = Env::<F>::new(ck.config.scenario.clone(), ck.config.physics.clone())?;
    Ok(evaluate(&env, &mut Greedy(&ck.learners), episodes, seed)?)
}

/// Noise-free evaluation of a checkpoint; writes `eval.csv` into `out`.
pub fn cmd_eval(checkpoint: &Path, episodes: usize, seed: u64, out: &Path) -> Result<EvalReport, HarnessError> {
    let report = match load_checkpoint(checkpoint)? {
        AnyCheckpoint::F32(ck) => eval_with(&ck, episodes, seed)?,
        AnyCheckpoint::F64(ck) => eval_with(&ck, episodes, seed)?,
    };
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv).map_err(|e| HarnessError::io(out, e))?;
    write_atomic(&out.join(EVAL_FILE), &csv)?;
    Ok(report)
}

fn describe<F: Scalar>(ck: &Checkpoint<F>, out: &mut String) {
    use std::fmt::Write as _;
    let c = ck.counters;
    let _ = writeln!(out, "episode {}  env_steps {}  updates {}", c.episode, c.env_steps, c.updates);
    let mut total = 0;
    for (i, l) in ck.learners.iter().enumerate() {
        let (a, q) = (l.actor.param_count(), l.critic.param_count());
        total += 2 * (a + q);
        let dims = |d: Vec<usize>| d.iter().map(ToString::to_string).collect::<Vec<_>>().join("-");
        let _ = writeln!(
            out,
            "agent {i}: actor {} ({a} params), critic {} ({q} params), noise {}, adam steps {}/{}",
            dims(l.actor.dims()),
            dims(l.critic.dims()),
            l.noise_scale,
            l.actor_opt.step,
            l.critic_opt.step
        );
    }
    let _ = writeln!(out, "total parameters including targets: {total}");
}

/// Human-readable summary of a checkpoint. Pure: never touches the file.
pub fn cmd_inspect(checkpoint: &Path) -> Result<String, HarnessError> {
    let ck = load_checkpoint(checkpoint)?;
    let mut out = format!(
        "checkpoint {} (format version {}, precision {:?})\n",
        checkpoint.display(),
        super::checkpoint::VERSION,
        ck.config().precision
    );
    match &ck {
        AnyCheckpoint::F32(c) => describe(c, &mut out),
        AnyCheckpoint::F64(c) => describe(c, &mut out),
    }
    out.push_str("--- config ---\n");
    out.push_str(&ck.config().to_toml());
    Ok(out)
}
