use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use pctc_core::baselines::{run_baseline, BaselineMethod};
use pctc_core::compare::{load_batch, run_compare, summarize, write_rows, Method, RunConfig};
use pctc_core::pctc::{extract_pois, to_geojson, PoiDocument, Tier};
use pctc_core::predictability::{
    predictability_limit, sequence_from_labels, sequence_from_tree, PoiSequence,
};
use pctc_core::synth::{generate, presets, Persona};
use pctc_core::trajectory::{
    parse_fixes, preprocess, write_csv, write_raw_csv, ColumnSchema, Trajectory,
};

#[derive(Parser)]
#[command(name = "pctc", version, about = "POI extraction from GPS trajectories with temporal constraints")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean a fix table and write it with dwell and segment-break columns.
    Preprocess {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract POIs (pctc) or stay-point clusters (baselines) from one user.
    Extract {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "pctc")]
        method: String,
        /// JSON output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the POIs as GeoJSON (pctc only).
        #[arg(long)]
        geojson: Option<PathBuf>,
    },
    /// Run several methods over a batch of users.
    Compare {
        /// A fix table, or a directory with one table per user.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        columns: ColumnArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated methods, or `all`.
        #[arg(long)]
        methods: Option<String>,
        /// Comma-separated local F_vd thresholds for PC-TC.
        #[arg(long)]
        f_vd_local_sweep: Option<String>,
        #[arg(long)]
        threads: Option<usize>,
        /// Receives rows.csv and summary.json.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Predictability limit of a user's POI visit sequence, or of a token file.
    Pl {
        #[arg(long, conflicts_with = "input", required_unless_present = "input")]
        tokens: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        columns: ColumnArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "pctc")]
        method: String,
        #[arg(long, value_enum, default_value = "local")]
        tier: TierArg,
    },
    /// Generate a synthetic user with known POIs.
    Synth {
        /// Persona JSON file.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        persona: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Overrides the persona's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    columns: ColumnArgs,
}

#[derive(Args)]
struct ColumnArgs {
    #[arg(long, default_value = "timestamp")]
    col_time: String,
    #[arg(long, default_value = "latitude")]
    col_lat: String,
    #[arg(long, default_value = "longitude")]
    col_lon: String,
    #[arg(long, default_value = "accuracy")]
    col_acc: String,
}

impl ColumnArgs {
    fn schema(&self) -> ColumnSchema {
        ColumnSchema {
            time: self.col_time.clone(),
            lat: self.col_lat.clone(),
            lon: self.col_lon.clone(),
            accuracy: self.col_acc.clone(),
        }
    }
}

#[derive(Args)]
struct ConfigArgs {
    /// Plain-text `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// UTC offset in minutes for calendar days.
    #[arg(long, allow_hyphen_values = true)]
    day_offset: Option<i32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TierArg {
    Global,
    Local,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    CampusWorker,
    TwoBuildings,
    Random,
}

/// Bad invocation (exit 1) versus bad data (exit 2).
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Preprocess { input, config, out } => cmd_preprocess(&input, &config, out.as_deref()),
        Command::Extract {
            input,
            config,
            method,
            out,
            geojson,
        } => cmd_extract(&input, &config, &method, out.as_deref(), geojson.as_deref()),
        Command::Compare {
            input,
            columns,
            config,
            methods,
            f_vd_local_sweep,
            threads,
            out_dir,
        } => {
            let mut cfg = load_config(&config)?;
            let overrides = [
                ("methods", methods),
                ("f_vd_local_sweep", f_vd_local_sweep),
                ("threads", threads.map(|t| t.to_string())),
            ];
            for (k, v) in overrides {
                if let Some(v) = v {
                    cfg.set(k, &v).map_err(usage)?;
                }
            }
            cfg.input = input.or(cfg.input);
            cfg.out_dir = out_dir.or(cfg.out_dir);
            cfg.validate().map_err(usage)?;
            cmd_compare(&cfg, &columns.schema())
        }
        Command::Pl {
            tokens,
            input,
            columns,
            config,
            method,
            tier,
        } => cmd_pl(tokens.as_deref(), input.as_deref(), &columns, &config, &method, tier),
        Command::Synth {
            persona,
            preset,
            seed,
            out,
        } => cmd_synth(persona.as_deref(), preset, seed, &out),
    }
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))
                .map_err(usage)?;
            RunConfig::parse(&text)
                .with_context(|| format!("config {}", path.display()))
                .map_err(usage)?
        }
        None => RunConfig::default(),
    };
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(anyhow::anyhow!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k, v).map_err(usage)?;
    }
    if let Some(offset) = args.day_offset {
        cfg.day_offset_minutes = offset;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn user_id_of(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "user".into(), |s| s.to_string_lossy().into_owned())
}

fn read_trajectory(path: &Path, schema: &ColumnSchema, cfg: &RunConfig) -> Result<Trajectory, Failure> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let report = parse_fixes(file, schema, &user_id_of(path), cfg.day_offset_minutes)
        .with_context(|| format!("reading {}", path.display()))?;
    if report.skipped_rows > 0 {
        log::warn!("{}: skipped {} unparseable rows", path.display(), report.skipped_rows);
    }
    Ok(report.trajectory)
}

fn cleaned(path: &Path, schema: &ColumnSchema, cfg: &RunConfig) -> Result<Trajectory, Failure> {
    let raw = read_trajectory(path, schema, cfg)?;
    let (t, report) = preprocess(&raw, &cfg.preprocess).with_context(|| format!("cleaning {}", path.display()))?;
    log::info!("{}", serde_json::to_string(&report)?);
    Ok(t)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Outcome {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn cmd_preprocess(input: &InputArgs, config: &ConfigArgs, out: Option<&Path>) -> Outcome {
    let cfg = load_config(config)?;
    let raw = read_trajectory(&input.input, &input.columns.schema(), &cfg)?;
    let (t, report) = preprocess(&raw, &cfg.preprocess)?;
    write_csv(&t, sink(out)?)?;
    eprintln!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn parse_method(name: &str) -> Result<Method, Failure> {
    name.parse().map_err(usage)
}

fn baseline_of(m: Method) -> BaselineMethod {
    match m {
        Method::Dbscan => BaselineMethod::Dbscan,
        Method::Optics => BaselineMethod::Optics,
        Method::Db => BaselineMethod::Db,
        Method::Sc => BaselineMethod::Sc,
        Method::Pctc => unreachable!("pctc is not a baseline"),
    }
}

fn cmd_extract(
    input: &InputArgs,
    config: &ConfigArgs,
    method: &str,
    out: Option<&Path>,
    geojson: Option<&Path>,
) -> Outcome {
    let method = parse_method(method)?;
    if geojson.is_some() && method != Method::Pctc {
        return Err(usage(anyhow::anyhow!("--geojson needs --method pctc")));
    }
    let cfg = load_config(config)?;
    let t = cleaned(&input.input, &input.columns.schema(), &cfg)?;
    if method == Method::Pctc {
        let tree = extract_pois(&t, &cfg.global, &cfg.local)?;
        let doc = PoiDocument::new(&tree, t.user_id(), t.observation_days(), cfg.global, cfg.local);
        write_json(out, &doc)?;
        if let Some(path) = geojson {
            write_json(Some(path), &to_geojson(&tree))?;
        }
        return Ok(());
    }
    let result = run_baseline(&t, baseline_of(method), &cfg.baseline)?;
    let staypoints: Vec<_> = result
        .staypoints
        .iter()
        .zip(result.clusters.labels())
        .map(|(sp, &label)| {
            json!({
                "centroid": sp.centroid,
                "arrival": sp.arrival,
                "departure": sp.departure,
                "first_fix": sp.members.start,
                "end_fix": sp.members.end,
                "cluster": label,
            })
        })
        .collect();
    write_json(
        out,
        &json!({
            "user_id": t.user_id(),
            "method": method,
            "poi_count": result.poi_count(),
            "noise_count": result.clusters.noise_count(),
            "staypoints": staypoints,
        }),
    )
}

fn cmd_compare(cfg: &RunConfig, schema: &ColumnSchema) -> Outcome {
    let Some(input) = &cfg.input else {
        return Err(usage(anyhow::anyhow!("compare needs --input or an input key in the config")));
    };
    let Some(out_dir) = &cfg.out_dir else {
        return Err(usage(anyhow::anyhow!("compare needs --out-dir or an out_dir key in the config")));
    };
    if !input.exists() {
        bail_data(format!("{} does not exist", input.display()))?;
    }
    let batch = load_batch(input, schema, cfg.day_offset_minutes)?;
    log::info!("{} users", batch.len());
    let rows = run_compare(cfg, &batch)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_rows(&rows, BufWriter::new(File::create(out_dir.join("rows.csv"))?))?;
    write_json(Some(&out_dir.join("summary.json")), &summarize(&rows))?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} rows failed; see the error column", rows.len());
    }
    Ok(())
}

fn bail_data(msg: String) -> Outcome {
    Err(Failure::Data(anyhow::anyhow!(msg)))
}

fn cmd_pl(
    tokens: Option<&Path>,
    input: Option<&Path>,
    columns: &ColumnArgs,
    config: &ConfigArgs,
    method: &str,
    tier: TierArg,
) -> Outcome {
    let seq = match (tokens, input) {
        (Some(path), _) => {
            let mut text = String::new();
            File::open(path)
                .with_context(|| format!("opening {}", path.display()))?
                .read_to_string(&mut text)?;
            let toks: Vec<&str> = text.split_whitespace().collect();
            PoiSequence::from_tokens(&toks)?
        }
        (None, Some(path)) => {
            let method = parse_method(method)?;
            let cfg = load_config(config)?;
            let t = cleaned(path, &columns.schema(), &cfg)?;
            if method == Method::Pctc {
                let tree = extract_pois(&t, &cfg.global, &cfg.local)?;
                let tier = match tier {
                    TierArg::Global => Tier::Global,
                    TierArg::Local => Tier::Local,
                };
                sequence_from_tree(&t, &tree, tier)?
            } else {
                let result = run_baseline(&t, baseline_of(method), &cfg.baseline)?;
                sequence_from_labels(result.clusters.labels())?
            }
        }
        (None, None) => return Err(usage(anyhow::anyhow!("pl needs --tokens or --input"))),
    };
    let r = predictability_limit(&seq);
    write_json(
        None,
        &json!({
            "entropy_bits": r.entropy_bits,
            "alphabet_size": r.alphabet_size,
            "pi_max": r.pi_max,
            "sequence_length": r.sequence_length,
            "degenerate": r.degenerate,
        }),
    )
}

fn cmd_synth(persona: Option<&Path>, preset: Option<Preset>, seed: Option<u64>, out: &Path) -> Outcome {
    let mut p = match (persona, preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Persona::from_json(&text).with_context(|| format!("persona {}", path.display()))?
        }
        (None, Some(preset)) => {
            let s = seed.unwrap_or(0);
            match preset {
                Preset::CampusWorker => presets::weekday_campus_worker(s),
                Preset::TwoBuildings => presets::two_buildings(s),
                Preset::Random => presets::random_persona(s),
            }
        }
        (None, None) => return Err(usage(anyhow::anyhow!("synth needs --persona or --preset"))),
    };
    if let Some(s) = seed {
        p.seed = s;
    }
    let user = generate(&p)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let id = &p.user_id;
    write_raw_csv(
        &user.trajectory,
        BufWriter::new(File::create(out.join(format!("{id}.csv")))?),
    )?;
    let doc = PoiDocument::new(
        &user.truth,
        id,
        user.trajectory.observation_days(),
        RunConfig::default().global,
        RunConfig::default().local,
    );
    write_json(Some(&out.join(format!("{id}.truth.json"))), &doc)?;
    write_json(Some(&out.join(format!("{id}.names.json"))), &user.names)?;
    if persona.is_none() {
        write_json(Some(&out.join(format!("{id}.persona.json"))), &p)?;
    }
    Ok(())
}
