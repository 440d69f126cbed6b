//! Command-line front end: generate instances, run the solver or its
//! baselines over seed batches, compute exhaustive optima, and dump the
//! learned probability tables.
//!
//! All machine-readable output goes to files (or stdout for `oracle`);
//! progress and warnings go to stderr. Batch seeds are `--seed + run
//! index`, so a whole experiment is reproducible from one number.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use rosterboa::bayes::{gray_level, ProbabilityModel};
use rosterboa::fixture::{load_instance_path, save_instance_path};
use rosterboa::generate::{generate_instance, GeneratorError, GeneratorSpec};
use rosterboa::solver::{run_boa, run_boa_traced, run_rd1, run_rd2, RunResult};
use rosterboa::{brute_force_optimum, BoaConfig, SchedulingInstance};

#[derive(Parser)]
#[command(name = "rosterboa", version, about = "Weekly nurse rostering solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic instance fixture.
    Generate(GenerateArgs),
    /// Run the solver or a baseline over instances and seed batches.
    Solve(SolveArgs),
    /// Exhaustively compute optima for small instances.
    Oracle(OracleArgs),
    /// Dump the learned probability tables of one solver run.
    DumpProbs(DumpProbsArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of nurses on the ward.
    #[arg(long, default_value_t = 25)]
    nurses: usize,
    /// Demand as a fraction of supply, in [0, 1].
    #[arg(long, default_value_t = 0.8)]
    tightness: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output fixture path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Algo {
    Boa,
    Rd1,
    Rd2,
}

/// Solver knobs shared by `solve` and `dump-probs`. Every flag overrides
/// the same key in `--config`.
#[derive(Args)]
struct SolverOpts {
    /// TOML config file with the same keys as these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Population size.
    #[arg(long)]
    pop: Option<usize>,
    /// Solutions kept per generation.
    #[arg(long)]
    keep: Option<usize>,
    /// Maximum generations.
    #[arg(long)]
    gens: Option<usize>,
    /// Pool size for the k-cheapest rule.
    #[arg(long)]
    k: Option<usize>,
    /// Penalty weight per uncovered shift.
    #[arg(long)]
    wdemand: Option<u64>,
    /// Comma-separated rule set.
    #[arg(long)]
    rules: Option<String>,
    /// Stop a run early at or below this fitness.
    #[arg(long)]
    target: Option<u64>,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance fixture files.
    #[arg(required = true)]
    instances: Vec<PathBuf>,
    #[arg(long, value_enum)]
    algo: Option<Algo>,
    /// Runs per instance, seeded seed, seed+1, ...
    #[arg(long)]
    runs: Option<usize>,
    /// Reference optima CSV (`instance,fitness`) enabling the hit columns.
    #[arg(long)]
    optima: Option<PathBuf>,
    /// Also write a per-generation trace CSV.
    #[arg(long)]
    trace: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    opts: SolverOpts,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(required = true)]
    instances: Vec<PathBuf>,
    #[arg(long, default_value_t = 200)]
    wdemand: u64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DumpProbsArgs {
    instance: PathBuf,
    /// Probability table CSV.
    #[arg(long)]
    out: PathBuf,
    /// Optional grayscale PGM, one row per edge, one column per generation.
    #[arg(long)]
    pgm: Option<PathBuf>,
    #[command(flatten)]
    opts: SolverOpts,
}

/// `--config` file contents; keys mirror the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    algo: Option<String>,
    runs: Option<usize>,
    seed: Option<u64>,
    pop: Option<usize>,
    keep: Option<usize>,
    gens: Option<usize>,
    k: Option<usize>,
    wdemand: Option<u64>,
    rules: Option<String>,
    target: Option<u64>,
}

struct Effective {
    algo: Algo,
    runs: usize,
    seed: u64,
    config: BoaConfig,
}

fn merge_options(
    opts: &SolverOpts,
    algo_flag: Option<Algo>,
    runs_flag: Option<usize>,
) -> Result<Effective> {
    let file: FileConfig = match &opts.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let algo = match algo_flag {
        Some(a) => a,
        None => match file.algo.as_deref() {
            None => Algo::Boa,
            Some("boa") => Algo::Boa,
            Some("rd1") => Algo::Rd1,
            Some("rd2") => Algo::Rd2,
            Some(other) => bail!("config: unknown algo {other:?}"),
        },
    };
    let defaults = BoaConfig::default();
    let rules_text = opts.rules.clone().or(file.rules);
    let rule_set = match rules_text {
        Some(text) => text.parse().map_err(|e| anyhow!("--rules: {e}"))?,
        None => defaults.rule_set,
    };
    let mut rule_params = defaults.rule_params;
    if let Some(k) = opts.k.or(file.k) {
        rule_params.k_cheapest = k;
    }
    let config = BoaConfig {
        population_size: opts.pop.or(file.pop).unwrap_or(defaults.population_size),
        keep_count: opts.keep.or(file.keep).unwrap_or(defaults.keep_count),
        max_generations: opts.gens.or(file.gens).unwrap_or(defaults.max_generations),
        rule_set,
        rule_params,
        w_demand: opts.wdemand.or(file.wdemand).unwrap_or(defaults.w_demand),
        seed: 0,
        target_fitness: opts.target.or(file.target),
    };
    config.validate().map_err(|e| anyhow!("{e}"))?;
    Ok(Effective {
        algo,
        runs: runs_flag.or(file.runs).unwrap_or(20),
        seed: opts.seed.or(file.seed).unwrap_or(0),
        config,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::DumpProbs(args) => cmd_dump_probs(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode> {
    let spec = GeneratorSpec::default()
        .with_nurses(args.nurses)
        .with_tightness(args.tightness);
    let instance = match generate_instance(&spec, args.seed) {
        Ok(instance) => instance,
        Err(
            err @ (GeneratorError::TightnessOutOfRange(_)
            | GeneratorError::NoNurses
            | GeneratorError::EmptyContractMix
            | GeneratorError::BadWeights),
        ) => {
            eprintln!("usage error: {err}");
            return Ok(ExitCode::from(2));
        }
    };
    save_instance_path(&instance, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    let demanded: i64 = instance.demand.iter().flatten().map(|&r| i64::from(r)).sum();
    eprintln!(
        "wrote {}: {} nurses, {} patterns, demand total {} (seed {})",
        args.out.display(),
        instance.num_nurses(),
        instance.num_patterns(),
        demanded,
        args.seed
    );
    Ok(ExitCode::SUCCESS)
}

fn instance_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load_optima(path: &Path) -> Result<Vec<(String, u64)>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading optima {}", path.display()))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',');
        let name = fields.next().unwrap_or_default().trim().to_string();
        let fitness = fields.next().map(str::trim);
        if name == "instance" {
            continue; // header
        }
        let fitness: u64 = fitness
            .ok_or_else(|| anyhow!("optima line {}: missing fitness", lineno + 1))?
            .parse()
            .with_context(|| format!("optima line {}: bad fitness", lineno + 1))?;
        out.push((name, fitness));
    }
    Ok(out)
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let effective = merge_options(&args.opts, args.algo, args.runs)?;
    let optima = match &args.optima {
        Some(path) => Some(load_optima(path)?),
        None => None,
    };
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;

    let results_path = args.out.join("results.csv");
    let summary_path = args.out.join("summary.csv");
    let mut results = BufWriter::new(fs::File::create(&results_path)?);
    let mut summary = BufWriter::new(fs::File::create(&summary_path)?);
    writeln!(results, "{}", RunResult::csv_header())?;
    writeln!(summary, "instance,best,mean,fea,hits,within3")?;
    let mut trace = match args.trace {
        true => {
            let mut w = BufWriter::new(fs::File::create(args.out.join("trace.csv"))?);
            writeln!(w, "instance,seed,generation,best,mean,feasible")?;
            Some(w)
        }
        false => None,
    };

    let mut any_failed = false;
    for path in &args.instances {
        let name = instance_name(path);
        let instance = match load_instance_path(path) {
            Ok(instance) => instance,
            Err(err) => {
                eprintln!("warning: skipping {}: {err}", path.display());
                any_failed = true;
                continue;
            }
        };
        let reference = optima
            .as_ref()
            .and_then(|o| o.iter().find(|(n, _)| *n == name).map(|&(_, f)| f));
        if optima.is_some() && reference.is_none() {
            eprintln!("warning: no reference optimum for {name}");
        }

        let mut bests = Vec::with_capacity(effective.runs);
        for run in 0..effective.runs {
            let seed = effective.seed + run as u64;
            let config = effective.config.clone().with_seed(seed);
            let result = run_algorithm(effective.algo, &instance, &config)?;
            writeln!(results, "{}", result.csv_row(&name, seed))?;
            if let Some(w) = trace.as_mut() {
                for (generation, stats) in result.per_generation.iter().enumerate() {
                    writeln!(
                        w,
                        "{},{},{},{},{:.3},{}",
                        name,
                        seed,
                        generation,
                        stats.best_fitness,
                        stats.mean_fitness,
                        stats.feasible_count
                    )?;
                }
            }
            bests.push(result.best.breakdown);
        }

        let best = bests.iter().map(|b| b.fitness).min().expect("runs >= 1");
        let mean =
            bests.iter().map(|b| b.fitness as f64).sum::<f64>() / bests.len() as f64;
        let feasible = bests.iter().filter(|b| b.is_feasible()).count();
        let (hits, within3) = match reference {
            Some(optimum) => (
                bests
                    .iter()
                    .filter(|b| b.fitness == optimum)
                    .count()
                    .to_string(),
                bests
                    .iter()
                    .filter(|b| b.fitness <= optimum + 3)
                    .count()
                    .to_string(),
            ),
            None => (String::new(), String::new()),
        };
        writeln!(summary, "{name},{best},{mean:.3},{feasible},{hits},{within3}")?;
        eprintln!(
            "{name}: {} runs, best {best}, mean {mean:.1}, feasible {feasible}/{}",
            effective.runs, effective.runs
        );
    }

    eprintln!(
        "wrote {} and {}",
        results_path.display(),
        summary_path.display()
    );
    Ok(if any_failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn run_algorithm(
    algo: Algo,
    instance: &SchedulingInstance,
    config: &BoaConfig,
) -> Result<RunResult> {
    let result = match algo {
        Algo::Boa => run_boa(instance, config),
        Algo::Rd1 => run_rd1(instance, config),
        Algo::Rd2 => run_rd2(instance, config),
    };
    result.map_err(|e| anyhow!("{e}"))
}

fn cmd_oracle(args: OracleArgs) -> Result<ExitCode> {
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    writeln!(out, "instance,fitness,assignment")?;
    let mut any_failed = false;
    for path in &args.instances {
        let name = instance_name(path);
        let outcome = load_instance_path(path)
            .map_err(|e| anyhow!("{e}"))
            .and_then(|instance| {
                brute_force_optimum(&instance, args.wdemand).map_err(|e| anyhow!("{e}"))
            });
        match outcome {
            Ok((schedule, breakdown)) => {
                let assignment: Vec<String> = schedule
                    .assignment()
                    .iter()
                    .map(|j| j.to_string())
                    .collect();
                writeln!(out, "{},{},{}", name, breakdown.fitness, assignment.join(" "))?;
                eprintln!("{name}: optimum {}", breakdown.fitness);
            }
            Err(err) => {
                eprintln!("warning: skipping {}: {err}", path.display());
                any_failed = true;
            }
        }
    }
    Ok(if any_failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_dump_probs(args: DumpProbsArgs) -> Result<ExitCode> {
    let effective = merge_options(&args.opts, None, None)?;
    if effective.algo != Algo::Boa {
        bail!("dump-probs only applies to the learning algorithm (algo = boa)");
    }
    let instance = load_instance_path(&args.instance).map_err(|e| anyhow!("{e}"))?;
    let config = effective.config.clone().with_seed(effective.seed);

    let mut csv = BufWriter::new(
        fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?,
    );
    writeln!(csv, "generation,position,parent_rule,rule,count_num,count_den,prob,gray")?;
    let mut gray_columns: Vec<Vec<u8>> = Vec::new();
    let mut csv_error: Option<io::Error> = None;
    let record = |generation: usize, model: &ProbabilityModel| {
        let mut grays = Vec::new();
        for entry in model.entries() {
            let parent = entry.parent.map(|p| p as i64).unwrap_or(-1);
            let gray = gray_level(entry.probability);
            grays.push(gray);
            if csv_error.is_none() {
                if let Err(e) = writeln!(
                    csv,
                    "{},{},{},{},{},{},{:.6},{}",
                    generation,
                    entry.position,
                    parent,
                    entry.rule,
                    entry.count.numerator,
                    entry.count.denominator,
                    entry.probability.value(),
                    gray
                ) {
                    csv_error = Some(e);
                }
            }
        }
        gray_columns.push(grays);
    };

    let result = run_boa_traced(&instance, &config, record).map_err(|e| anyhow!("{e}"))?;
    if let Some(e) = csv_error {
        return Err(e).context("writing probability CSV");
    }
    eprintln!(
        "dumped {} generations of probabilities for {} (best {})",
        gray_columns.len(),
        instance_name(&args.instance),
        result.best.breakdown.fitness
    );

    if let Some(pgm_path) = &args.pgm {
        if gray_columns.is_empty() {
            eprintln!("warning: no generations recorded, skipping PGM");
        } else {
            write_pgm(pgm_path, &gray_columns)
                .with_context(|| format!("writing {}", pgm_path.display()))?;
            eprintln!("wrote {}", pgm_path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Plain-text PGM: one row per table entry (node or edge), one column per
/// generation, 255 = probability one.
fn write_pgm(path: &Path, columns: &[Vec<u8>]) -> io::Result<()> {
    let height = columns[0].len();
    let width = columns.len();
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "P2")?;
    writeln!(w, "{width} {height}")?;
    writeln!(w, "255")?;
    for row in 0..height {
        let line: Vec<String> = columns.iter().map(|col| col[row].to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}
