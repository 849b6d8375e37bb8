use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ddp::dump::{write_dump, DumpKind};
use ddp::report::{group_stats, write_group_table};
use ddp::{
    analyze_dataset_limited, emit_xyzm, parse_xyzm, synthesize, AnalysisReport, AnalyzeOptions, CorpusShape, Dataset,
    GroupLabel, PipelineConfig, Profile,
};

/// Data driven prognosis of instabilities in multi-dimensional data bursts.
#[derive(Parser)]
#[command(name = "ddp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze `.xyzm` data and write a JSON report.
    Analyze(AnalyzeArgs),
    /// Write a synthetic `.xyzm` corpus.
    Synth(SynthArgs),
    /// Compare groups across one or more JSON reports.
    Stats(StatsArgs),
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    /// An `.xyzm` file, or a directory whose `.xyzm` files are read in name order.
    #[arg(long)]
    input: PathBuf,
    /// Bursts between the two frames of a pair.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Samples per burst.
    #[arg(long, default_value_t = 81)]
    burst_len: usize,
    /// Values per sample.
    #[arg(long, default_value_t = 4)]
    dims: usize,
    /// Report path; the report goes to stdout when neither this nor a stdout dump is given.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an intermediate table as CSV.
    #[arg(long, value_enum)]
    dump: Option<DumpArg>,
    /// Where the dump goes; stdout by default.
    #[arg(long, requires = "dump")]
    dump_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DumpArg {
    Borda,
    Roots,
    Pdi,
    Zoom,
}

impl From<DumpArg> for DumpKind {
    fn from(d: DumpArg) -> Self {
        match d {
            DumpArg::Borda => DumpKind::Borda,
            DumpArg::Roots => DumpKind::Roots,
            DumpArg::Pdi => DumpKind::Pdi,
            DumpArg::Zoom => DumpKind::Zoom,
        }
    }
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long, value_parser = parse_profile)]
    profile: Profile,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    subjects: usize,
    #[arg(long, default_value_t = 10)]
    bursts: usize,
    #[arg(long, default_value_t = 81)]
    burst_len: usize,
    #[arg(long, default_value_t = 4)]
    dims: usize,
}

#[derive(clap::Args)]
struct StatsArgs {
    /// A report file, or a directory of `.json` reports.
    #[arg(long)]
    reports: PathBuf,
    /// Groups to summarize, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "control,post_aclr", value_parser = parse_group)]
    groups: Vec<GroupLabel>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output path; stdout by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    s.parse().map_err(|e: ddp::DdpError| e.to_string())
}

fn parse_group(s: &str) -> Result<GroupLabel, String> {
    s.parse().map_err(|e: ddp::DdpError| e.to_string())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => analyze(args),
        Command::Synth(args) => synth(args),
        Command::Stats(args) => stats(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

/// Files in `dir` with extension `ext`, sorted by name.
fn files_with_extension(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        bail!("no .{ext} files in {}", dir.display());
    }
    Ok(files)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let config = PipelineConfig {
        dims: args.dims,
        burst_len: args.burst_len,
        stride: args.stride,
        ..Default::default()
    };
    config.validate()?;

    let inputs = if args.input.is_dir() {
        files_with_extension(&args.input, "xyzm")?
    } else {
        vec![args.input.clone()]
    };
    let mut dataset = Dataset::default();
    for path in &inputs {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let part = parse_xyzm(BufReader::new(file), &config).with_context(|| format!("parsing {}", path.display()))?;
        dataset.extend(part);
    }

    let dump: Option<DumpKind> = args.dump.map(Into::into);
    let options = AnalyzeOptions {
        keep_levels: dump.is_some_and(DumpKind::needs_levels),
    };
    let analysis = analyze_dataset_limited(&dataset, &config, options, None)?;
    for id in &analysis.skipped {
        log::warn!("subject {id} has too few bursts for stride {}; skipped", config.stride);
    }

    if let Some(kind) = dump {
        let mut out = sink(args.dump_out.as_deref())?;
        write_dump(kind, &analysis, &mut out)?;
        out.flush()?;
    }
    let dump_on_stdout = dump.is_some() && args.dump_out.is_none();
    if args.out.is_some() || !dump_on_stdout {
        let report = analysis.report(&config);
        let mut out = sink(args.out.as_deref())?;
        writeln!(out, "{}", report.to_json()?)?;
        out.flush()?;
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let config = PipelineConfig {
        dims: args.dims,
        burst_len: args.burst_len,
        seed: args.seed,
        ..Default::default()
    };
    let dataset = synthesize(
        args.profile,
        &config,
        CorpusShape {
            subjects: args.subjects,
            bursts_per_subject: args.bursts,
        },
    )?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for (id, bursts) in dataset.subjects() {
        let single = Dataset {
            bursts: bursts.into_iter().cloned().collect(),
            metadata: dataset
                .metadata
                .iter()
                .filter(|(k, _)| *k == id)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            injections: Vec::new(),
        };
        let path = args.out.join(format!("{id}.xyzm"));
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        emit_xyzm(&single, BufWriter::new(file))?;
    }
    if !dataset.injections.is_empty() {
        let path = args.out.join("injections.json");
        std::fs::write(&path, serde_json::to_string_pretty(&dataset.injections)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn stats(args: StatsArgs) -> Result<()> {
    let files = if args.reports.is_dir() {
        files_with_extension(&args.reports, "json")?
    } else {
        vec![args.reports.clone()]
    };
    let mut config = None;
    let mut subjects = Vec::new();
    for path in &files {
        let report = AnalysisReport::read_json(path)?;
        if config.is_none() {
            config = Some(report.config.clone());
        }
        subjects.extend(report.subjects);
    }
    let config = config.unwrap_or_default();
    let stats = group_stats(&subjects, &args.groups, &config)?;
    for g in &stats.unavailable {
        log::warn!("group {g} has no residual curvature values");
    }
    let mut out = sink(args.out.as_deref())?;
    match args.format {
        Format::Csv => write_group_table(&stats, &mut out)?,
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&stats)?)?,
    }
    out.flush()?;
    Ok(())
}
