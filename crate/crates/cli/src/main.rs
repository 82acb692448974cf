use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sepdfa::automata::{text, Alphabet, CompleteDfa};
use sepdfa::bench::{self, BenchmarkSpec, Outcome, RunRecord};
use sepdfa::learner::{write_snapshot, Learner, LearnerConfig, LearnerError};
use sepdfa::observation_tree::Relation;
use sepdfa::synthesis::{Backend, ExternalSolver, SOLVER_ENV};
use sepdfa::teacher::{parse_samples, ExactTeacher, RandomWMethod, RandomWMethodConfig, SampleTeacher, Teacher};

/// Learn minimal separating DFAs from membership and validity queries.
#[derive(Parser)]
#[command(name = "sepdfa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a separating DFA from two automata or a sample file.
    Learn(LearnArgs),
    /// Generate random target automata and sample files.
    GenBench(GenArgs),
    /// Learn every benchmark of a manifest and write one CSV row per run.
    RunBench(RunArgs),
    /// Render an automaton file as Graphviz DOT.
    ExportDot(DotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Internal,
    Smt,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Apartness,
    Incompatibility,
}

#[derive(Clone, Copy, ValueEnum)]
enum ValidityKind {
    Exact,
    RandomWmethod,
}

#[derive(Args)]
struct LearnerFlags {
    #[arg(long, value_enum, default_value = "internal")]
    backend: BackendKind,
    /// SMT solver executable for `--backend smt`.
    #[arg(long, env = SOLVER_ENV)]
    solver: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "apartness")]
    mode: Mode,
    /// Replace basis states by shallower ones when possible.
    #[arg(long)]
    replace_basis: bool,
    /// Drop basis fixing and candidate-domain clauses.
    #[arg(long)]
    no_redundant_clauses: bool,
    /// In incompatibility mode, skip the queries that turn incompatible basis pairs apart.
    #[arg(long)]
    no_establish_apartness: bool,
    /// Bisect instead of scanning when establishing apartness.
    #[arg(long)]
    binary_search: bool,
    /// Take a counterexample's label from the hypothesis instead of querying it.
    #[arg(long)]
    infer_counterexample: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cap on internal solver expansions per synthesis call. Unlimited when a
    /// timeout is set, otherwise 10^7.
    #[arg(long)]
    max_expansions: Option<u64>,
    /// Cap on membership queries.
    #[arg(long)]
    max_queries: Option<u64>,
}

impl LearnerFlags {
    fn config(&self, timeout_ms: Option<u64>) -> Result<LearnerConfig> {
        let backend = match self.backend {
            BackendKind::Internal => Backend::Internal,
            BackendKind::Smt => {
                let Some(path) = &self.solver else { bail!("--backend smt needs --solver or {SOLVER_ENV}") };
                Backend::External(ExternalSolver::new(path.clone()))
            }
        };
        let relation = match self.mode {
            Mode::Apartness => Relation::Apartness,
            Mode::Incompatibility => Relation::Incompatibility,
        };
        Ok(LearnerConfig {
            relation,
            basis_replacement: self.replace_basis,
            establish_apartness: relation == Relation::Incompatibility && !self.no_establish_apartness,
            binary_search: self.binary_search,
            infer_counterexample_label: self.infer_counterexample,
            backend,
            redundant_clauses: !self.no_redundant_clauses,
            max_expansions: self.max_expansions.unwrap_or(match timeout_ms {
                Some(_) => u64::MAX,
                None => sepdfa::synthesis::DEFAULT_MAX_EXPANSIONS,
            }),
            timeout: timeout_ms.map(Duration::from_millis),
            max_membership_queries: self.max_queries,
        })
    }
}

#[derive(Args)]
struct LearnArgs {
    /// Automaton for the language to accept.
    #[arg(long, requires = "l2", conflicts_with = "samples")]
    l1: Option<PathBuf>,
    /// Automaton for the language to reject.
    #[arg(long, requires = "l1", conflicts_with = "samples")]
    l2: Option<PathBuf>,
    /// Sample file with accepted (1) and rejected (0) words.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[command(flatten)]
    flags: LearnerFlags,
    #[arg(long, value_enum, default_value = "exact")]
    validity: ValidityKind,
    /// Random test words per validity query.
    #[arg(long, default_value_t = RandomWMethodConfig::default().walks)]
    walks: usize,
    /// Longest random infix after the access word.
    #[arg(long, default_value_t = RandomWMethodConfig::default().expected_extra_states)]
    extra_states: usize,
    /// Longest random suffix.
    #[arg(long, default_value_t = RandomWMethodConfig::default().max_suffix)]
    max_suffix: usize,
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Write the final tree, basis and n here, plus stats to `<path>.stats.jsonl`.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Learned automaton in text format; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Comma-separated symbol names for DOT labels.
    #[arg(long)]
    alphabet: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Full,
    Desk,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    #[arg(long)]
    min_size: Option<usize>,
    #[arg(long)]
    max_size: Option<usize>,
    #[arg(long)]
    automata: Option<usize>,
    #[arg(long)]
    sets: Option<usize>,
    #[arg(long)]
    strings: Option<usize>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    alphabet_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// CSV output; stdout when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Parallel runs; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value_t = 200_000)]
    timeout_ms: u64,
    #[command(flatten)]
    flags: LearnerFlags,
}

#[derive(Args)]
struct DotArgs {
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated symbol names.
    #[arg(long)]
    alphabet: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Learn(args) => cmd_learn(args),
        Command::GenBench(args) => cmd_gen_bench(args),
        Command::RunBench(args) => cmd_run_bench(args),
        Command::ExportDot(args) => cmd_export_dot(args),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_dfa(path: &Path) -> Result<CompleteDfa> {
    let a = text::parse(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    CompleteDfa::from_three_nfa(&a).with_context(|| format!("{} is not a complete DFA", path.display()))
}

fn alphabet(names: Option<&str>) -> Result<Option<Alphabet>> {
    names.map(|s| Alphabet::new(s.split(',').map(str::trim)).context("parsing --alphabet")).transpose()
}

fn cmd_learn(args: LearnArgs) -> Result<ExitCode> {
    let config = args.flags.config(args.timeout_ms)?;
    let (teacher, name): (Box<dyn Teacher>, String) = match (&args.l1, &args.l2, &args.samples) {
        (Some(l1), Some(l2), None) => {
            let teacher = ExactTeacher::new(load_dfa(l1)?, load_dfa(l2)?).context("the two languages must be disjoint")?;
            (Box::new(teacher), "exact".into())
        }
        (None, None, Some(s)) => {
            let set = parse_samples(&read(s)?).with_context(|| format!("parsing {}", s.display()))?;
            let name = s.file_stem().map_or_else(|| "samples".into(), |n| n.to_string_lossy().into_owned());
            (Box::new(SampleTeacher::new(&set)?), name)
        }
        _ => bail!("give either --l1 and --l2, or --samples"),
    };
    let teacher: Box<dyn Teacher> = match args.validity {
        ValidityKind::Exact => teacher,
        ValidityKind::RandomWmethod => Box::new(RandomWMethod::new(
            teacher,
            RandomWMethodConfig {
                walks: args.walks,
                expected_extra_states: args.extra_states,
                max_suffix: args.max_suffix,
                seed: args.flags.seed,
            },
        )),
    };
    let names = alphabet(args.alphabet.as_deref())?;
    let mut record = RunRecord {
        benchmark: name,
        target_size: 0,
        learned_size: None,
        mem_q: 0,
        dontcare: 0,
        val_q: 0,
        unsat_rounds: 0,
        symbols: 0,
        time_ms: 0,
        backend: config.backend.name().into(),
        mode: config.mode_name().into(),
        seed: args.flags.seed,
        outcome: Outcome::Ok,
    };
    let result = Learner::new(teacher, config).run();
    let (stats, code) = match &result {
        Ok(out) => {
            let automaton = text::write(&out.hypothesis.to_three_nfa());
            match &args.out {
                Some(path) => write(path, &automaton)?,
                None => print!("{automaton}"),
            }
            if let Some(path) = &args.dot {
                write(path, &text::to_dot(&out.hypothesis.to_three_nfa(), names.as_ref()))?;
            }
            if let Some(path) = &args.snapshot {
                write_snapshot(path, &out.tree, &out.basis, out.n, &out.stats).context("writing snapshot")?;
            }
            record.learned_size = Some(out.hypothesis.num_states());
            (out.stats.clone(), 0)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let Some(partial) = e.partial() else {
                return Err(anyhow::anyhow!("learning failed"));
            };
            if let Some(path) = &args.snapshot {
                write_snapshot(path, &partial.tree, &partial.basis, partial.n, &partial.stats).context("writing snapshot")?;
            }
            record.outcome = Outcome::Budget;
            (partial.stats.clone(), 2)
        }
    };
    record.mem_q = stats.membership_queries;
    record.dontcare = stats.dontcare_answers;
    record.val_q = stats.validity_queries;
    record.unsat_rounds = stats.unsat_rounds;
    record.symbols = stats.input_symbols;
    record.time_ms = stats.wall_time_ms;
    print_record(&record)?;
    if let Err(LearnerError::SynthesisBudget(_)) = result {
        eprintln!("hint: raise --max-expansions or --timeout-ms");
    }
    Ok(ExitCode::from(code))
}

fn print_record(record: &RunRecord) -> Result<()> {
    let mut buf = Vec::new();
    bench::write_csv(std::slice::from_ref(record), &mut buf)?;
    let text = String::from_utf8(buf)?;
    // drop the header line
    let row = text.lines().nth(1).unwrap_or_default();
    println!("{row}");
    Ok(())
}

fn cmd_gen_bench(args: GenArgs) -> Result<ExitCode> {
    let mut spec = match args.preset {
        Preset::Full => BenchmarkSpec::full(),
        Preset::Desk => BenchmarkSpec::desk(),
    };
    let lo = args.min_size.unwrap_or(spec.target_sizes[0]);
    let hi = args.max_size.unwrap_or(*spec.target_sizes.last().expect("non-empty preset"));
    if lo > hi {
        bail!("--min-size {lo} exceeds --max-size {hi}");
    }
    spec.target_sizes = (lo..=hi).collect();
    spec.num_automata = args.automata.unwrap_or(spec.num_automata);
    spec.sets_per_automaton = args.sets.unwrap_or(spec.sets_per_automaton);
    spec.strings_per_set = args.strings.unwrap_or(spec.strings_per_set);
    spec.string_length = args.length.unwrap_or(spec.string_length);
    spec.alphabet_size = args.alphabet_size.unwrap_or(spec.alphabet_size);
    spec.seed = args.seed;
    let entries = bench::generate(&spec, &args.out)?;
    eprintln!("wrote {} sample files, manifest {}", entries.len(), args.out.join(bench::MANIFEST_FILE).display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_run_bench(args: RunArgs) -> Result<ExitCode> {
    let config = args.flags.config(Some(args.timeout_ms))?;
    let entries = bench::read_manifest(&args.manifest)?;
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let records = bench::run_benchmarks(&entries, base, &config, args.flags.seed, args.jobs);
    match &args.csv {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            bench::write_csv(&records, io::BufWriter::new(file))?;
        }
        None => bench::write_csv(&records, io::stdout().lock())?,
    }
    let mut err = io::stderr().lock();
    writeln!(err, "size completed total")?;
    for c in bench::completion_table(&records) {
        writeln!(err, "{:>4} {:>9} {:>5}", c.target_size, c.completed, c.total)?;
    }
    let done: Vec<&RunRecord> = records.iter().filter(|r| r.outcome == Outcome::Ok).collect();
    for (label, values) in [
        ("mem_q", done.iter().map(|r| r.mem_q).collect::<Vec<_>>()),
        ("val_q", done.iter().map(|r| r.val_q).collect()),
        ("time_ms", done.iter().map(|r| r.time_ms).collect()),
    ] {
        let pct = |p| bench::percentile(&values, p).map_or_else(|| "-".into(), |v| v.to_string());
        writeln!(err, "{label}: p25 {} p50 {} p75 {} p100 {}", pct(25.0), pct(50.0), pct(75.0), pct(100.0))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_export_dot(args: DotArgs) -> Result<ExitCode> {
    let doc = text::parse_document(&read(&args.input)?).with_context(|| format!("parsing {}", args.input.display()))?;
    let dot = text::to_dot(&doc.automaton, alphabet(args.alphabet.as_deref())?.as_ref());
    match &args.out {
        Some(path) => write(path, &dot)?,
        None => print!("{dot}"),
    }
    Ok(ExitCode::SUCCESS)
}
