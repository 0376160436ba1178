//! `askme`: synthetic data, training, evaluation, gradient checks and
//! attention export.
//!
//! Exit codes: 0 success, 1 config or usage, 2 training divergence,
//! 3 corrupt artifact, 4 gradient check failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use askme::corpus::{generate_synthetic, Dataset, IndexedData, SynthConfig};
use askme::encoders::EmbeddingTable;
use askme::eval::{evaluate, positions_tsv, EvalOptions, ModelScorer, OracleScorer, PopularityScorer, RandomScorer, Scorer};
use askme::model::gradcheck::{check_variant_seeds, GradcheckOptions};
use askme::model::{train, Checkpoint, Model, ModelSpec, Variant};
use askme::par::Exec;
use askme::{Error, RunConfig};

#[derive(Parser)]
#[command(name = "askme", version, about = "Question recommendation from answer, follow and vote histories")]
struct Cli {
    /// Worker threads; results are identical for any value.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Train a model and write a checkpoint plus its loss curve.
    Train(TrainArgs),
    /// Leave-one-out ranking evaluation.
    Eval(EvalArgs),
    /// Compare analytic gradients with central differences for every variant.
    Gradcheck(GradcheckArgs),
    /// Export behavior-channel attention weights.
    AttnDump(AttnArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    users: usize,
    #[arg(long, default_value_t = 2000)]
    questions: usize,
    #[arg(long, default_value_t = 8)]
    topics: usize,
    #[arg(long, default_value_t = 5)]
    answers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ScorerKind {
    Model,
    Random,
    Popularity,
    Oracle,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 99)]
    negatives: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "model")]
    scorer: ScorerKind,
    /// Segment cap for baseline scorers (model scorers use the checkpoint's).
    #[arg(long, default_value_t = 5)]
    segment_len: usize,
    /// Directory for report.txt, report.kv and positions.tsv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds starting at --seed.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Embedding and hidden width of the toy instances.
    #[arg(long, default_value_t = 8)]
    hidden: usize,
    /// Restrict to these variants (repeatable).
    #[arg(long)]
    variant: Vec<Variant>,
    #[arg(long, hide = true)]
    corrupt_backward: bool,
}

#[derive(Args)]
struct AttnArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    user: Option<String>,
}

enum Failure {
    Lib(Error),
    Gradcheck(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::Lib(Error::Divergence { .. }) => 2,
        Failure::Lib(Error::Corrupt(_)) => 3,
        Failure::Lib(_) => 1,
        Failure::Gradcheck(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let threads = cli.threads.max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {threads} threads: {e}");
            return ExitCode::from(1);
        }
    };
    let exec = Exec::from_threads(threads);
    match pool.install(|| run(cli.command, exec)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Lib(e) => eprintln!("error: {e}"),
                Failure::Gradcheck(table) => eprintln!("gradient check failed:\n{table}"),
            }
            ExitCode::from(exit_code(&f))
        }
    }
}

fn run(cmd: Command, exec: Exec) -> Result<(), Failure> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a, exec),
        Command::Eval(a) => eval_cmd(a, exec),
        Command::Gradcheck(a) => gradcheck(a),
        Command::AttnDump(a) => attn_dump(a),
    }
}

fn synth(a: SynthArgs) -> Result<(), Failure> {
    let cfg = SynthConfig {
        users: a.users,
        questions: a.questions,
        topics: a.topics,
        answers_per_user: a.answers,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let data = generate_synthetic(&cfg)?;
    data.write_dir(&a.out)?;
    eprintln!("wrote {} events to {}", data.events.len(), a.out.display());
    Ok(())
}

fn load_data(dir: &Path, segment_len: usize) -> Result<(Dataset, IndexedData), Error> {
    let ds = Dataset::load(dir)?;
    let data = IndexedData::build(&ds, segment_len)?;
    if !data.drop_report.dropped.is_empty() {
        eprintln!("note: {} users with fewer than two answers were dropped", data.drop_report.dropped.len());
    }
    Ok((ds, data))
}

fn table_for(ds: &Dataset, data: &IndexedData, fixed: usize, learned: usize) -> Result<EmbeddingTable, Error> {
    if fixed > 0 && ds.embeddings.is_none() {
        return Err(Error::Config(format!("fixed_dim is {fixed} but the data directory has no embeddings file")));
    }
    EmbeddingTable::new(data.n_questions(), fixed, learned, ds.embeddings.as_ref().filter(|_| fixed > 0))
        .map_err(|e| Error::Config(e.to_string()))
}

fn warn_small_pool(spec: &ModelSpec, data: &IndexedData) {
    if spec.variant.uses_community() && spec.similar_users >= data.users.len() {
        eprintln!(
            "warning: {} similar users requested but only {} others exist; using all of them",
            spec.similar_users,
            data.users.len().saturating_sub(1)
        );
    }
}

fn train_cmd(a: TrainArgs, exec: Exec) -> Result<(), Failure> {
    let cfg = RunConfig::load(&a.config)?;
    let (ds, data) = load_data(&a.data, cfg.segment_len)?;
    let table = table_for(&ds, &data, cfg.fixed_dim, cfg.learned_dim)?;
    warn_small_pool(&ModelSpec::from_config(&cfg), &data);
    let outcome = train(&cfg, &data, table, exec)?;
    for e in 1..=cfg.epochs {
        if let Some(l) = outcome.epoch_mean(e, |r| Some(r.loss)) {
            match outcome.epoch_mean(e, |r| r.distance) {
                Some(d) => eprintln!("epoch {e}: mean loss {l:.6}, mean group distance {d:.6}"),
                None => eprintln!("epoch {e}: mean loss {l:.6}"),
            }
        }
    }
    Checkpoint::of(&outcome.model).write(&a.out)?;
    fs::write(loss_path(&a.out), outcome.loss_csv())?;
    Ok(())
}

fn loss_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".loss.csv");
    PathBuf::from(s)
}

fn load_model(ckpt: &Path, data_dir: &Path) -> Result<(Model, IndexedData), Error> {
    let ck = Checkpoint::read(ckpt)?;
    let (ds, data) = load_data(data_dir, ck.spec.segment_len)?;
    let table = table_for(&ds, &data, ck.spec.fixed_dim, ck.spec.learned_dim)?;
    Ok((ck.into_model(table)?, data))
}

fn eval_cmd(a: EvalArgs, exec: Exec) -> Result<(), Failure> {
    let opts = EvalOptions {
        negatives: a.negatives,
        ks: a.k.clone(),
        seed: a.seed,
    };
    if opts.ks.is_empty() || opts.ks.contains(&0) {
        return Err(Error::Config("--k needs positive values".into()).into());
    }
    let evaluation = match a.scorer {
        ScorerKind::Model => {
            let ckpt = a
                .ckpt
                .as_ref()
                .ok_or_else(|| Error::Config("--ckpt is required for the model scorer".into()))?;
            let (model, data) = load_model(ckpt, &a.data)?;
            warn_small_pool(&model.spec, &data);
            let scorer = ModelScorer::new(&model, &data, exec)?;
            evaluate(&scorer, &data, &opts, exec)?
        }
        kind => {
            let (_, data) = load_data(&a.data, a.segment_len)?;
            let scorer: Box<dyn Scorer> = match kind {
                ScorerKind::Random => Box::new(RandomScorer { seed: a.seed }),
                ScorerKind::Popularity => Box::new(PopularityScorer::from_data(&data)),
                _ => Box::new(OracleScorer),
            };
            evaluate(scorer.as_ref(), &data, &opts, exec)?
        }
    };
    print!("{}", evaluation.report.to_text());
    if let Some(dir) = a.out {
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("report.txt"), evaluation.report.to_text())?;
        fs::write(dir.join("report.kv"), evaluation.report.to_kv())?;
        fs::write(dir.join("positions.tsv"), positions_tsv(&evaluation.lists))?;
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<(), Failure> {
    let cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if a.hidden == 0 || a.seeds == 0 {
        return Err(Error::Config("--hidden and --seeds must be positive".into()).into());
    }
    let learned = a.hidden * 3 / 8;
    let opts = GradcheckOptions {
        fixed_dim: a.hidden - learned,
        learned_dim: learned,
        corrupt: a.corrupt_backward,
        ..GradcheckOptions::default()
    };
    let variants = if a.variant.is_empty() { Variant::ALL.to_vec() } else { a.variant.clone() };
    let seeds: Vec<u64> = (a.seed..a.seed + a.seeds).collect();
    let mut table = String::from("variant\ttensor\tmax_rel_err\tstatus\n");
    let mut offenders = String::new();
    for v in variants {
        for row in check_variant_seeds(v, &cfg, &opts, &seeds)? {
            let ok = row.passed(opts.tolerance);
            let line = format!(
                "{}\t{}\t{:.3e}\t{}\n",
                row.variant,
                row.tensor,
                row.max_rel_err,
                if ok { "pass" } else { "FAIL" }
            );
            table.push_str(&line);
            if !ok {
                offenders.push_str(&line);
            }
        }
    }
    print!("{table}");
    if offenders.is_empty() {
        Ok(())
    } else {
        Err(Failure::Gradcheck(offenders))
    }
}

fn attn_dump(a: AttnArgs) -> Result<(), Failure> {
    let (model, data) = load_model(&a.ckpt, &a.data)?;
    let users: Vec<usize> = match &a.user {
        Some(id) => vec![data
            .user_index(id)
            .ok_or_else(|| Error::Config(format!("unknown user {id}")))?],
        None => (0..data.users.len()).collect(),
    };
    let mut out = String::from("user\tstep\talpha_ans\talpha_fol\talpha_vot\n");
    for u in users {
        let ctx = data.eval_context(u, model.spec.max_history);
        let rows = model.attention_trace(&ctx, data.users[u].test_answer)?;
        // per-step rows cover the history; a single candidate row is the next step
        let first = if rows.len() == 1 && !model.variant().uses_individual() {
            ctx.answers.len() + 1
        } else {
            1
        };
        for (i, w) in rows.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}\t{}\t{}", data.users[u].user, first + i, w[0], w[1], w[2]).expect("string write");
        }
    }
    fs::write(&a.out, out)?;
    Ok(())
}
