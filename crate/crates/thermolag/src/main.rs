//! `thermolag` command-line interface.
//!
//! Subcommands: simulate -> detect -> fit -> sensitivity -> report.
//! Diagnostics go to stderr, data to files. Exit codes: 0 success, 1 usage
//! error, 2 data/model error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use thermolag::crossbasis::LagKnots;
use thermolag::data::{parse_series, to_csv_string, Cause, DailySeries, Sex, StratumKey};
use thermolag::effects::{run_panel, ConfigOverrides, ModelConfig, Variant};
use thermolag::ete::{
    all_definitions, detect, event_day_stats, EteDefinition, EteKind, PercentileScope,
};
use thermolag::manifest::{config_hash, sha256_hex, EmbeddedManifest};
use thermolag::report::{
    write_flat_csv, write_report_bundle, GlmSettings, PanelCellJson, PanelMetadata, PanelResults,
};
use thermolag::sensitivity::{run_grid, SensitivityGrid};
use thermolag::simulate::{generate, SimSpec, RNG_ALGORITHM};

#[derive(Parser)]
#[command(
    name = "thermolag",
    version,
    about = "Extreme-temperature-event mortality analysis: detection, distributed-lag quasi-Poisson fits, cumulative relative risks"
)]
struct Cli {
    /// Worker threads for panel and grid fitting (default: all cores).
    /// Results are byte-identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic daily series from a spec JSON.
    Simulate {
        /// Generator spec JSON; defaults are used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Override the spec seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the spec length in years.
        #[arg(long)]
        years: Option<u32>,
    },
    /// Detect event days and write per-definition flags plus a summary table.
    Detect {
        /// Input daily series CSV.
        #[arg(long)]
        input: PathBuf,
        /// `all` or a comma-separated list of definition names.
        #[arg(long, default_value = "all")]
        definitions: String,
        /// Directory for the per-definition CSVs and summary.csv.
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = ScopeArg::Full)]
        percentile_scope: ScopeArg,
    },
    /// Fit the cumulative-RR panel over definitions x strata x variants.
    Fit {
        /// Input daily series CSV.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = PanelArg::All)]
        panel: PanelArg,
        #[arg(long, value_enum, default_value_t = VariantArg::Both)]
        variant: VariantArg,
        /// Results JSON path; a flat CSV is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON file of model overrides (same schema as the flags).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        df_rh: Option<usize>,
        #[arg(long)]
        df_pm10: Option<usize>,
        #[arg(long)]
        df_time_per_year: Option<usize>,
        #[arg(long)]
        df_dos: Option<usize>,
        #[arg(long)]
        df_temp: Option<usize>,
        #[arg(long)]
        max_lag_hw: Option<usize>,
        #[arg(long)]
        lag_df_hw: Option<usize>,
        #[arg(long)]
        max_lag_cs: Option<usize>,
        #[arg(long)]
        lag_df_cs: Option<usize>,
        #[arg(long, value_enum)]
        lag_knots: Option<KnotsArg>,
        #[arg(long, value_enum)]
        percentile_scope: Option<ScopeArg>,
    },
    /// Rank model configurations by QAIC around a base configuration.
    Sensitivity {
        /// Input daily series CSV.
        #[arg(long)]
        input: PathBuf,
        /// Base configuration JSON (definition, stratum, overrides, grid).
        #[arg(long)]
        config: PathBuf,
        /// Output grid CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Project a results JSON into plot-ready figure CSVs.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PanelArg {
    Hw,
    Cs,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Overall,
    Added,
    Both,
}

impl VariantArg {
    fn variants(self) -> Vec<Variant> {
        match self {
            VariantArg::Overall => vec![Variant::Overall],
            VariantArg::Added => vec![Variant::Added],
            VariantArg::Both => vec![Variant::Overall, Variant::Added],
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Full,
    Season,
}

impl From<ScopeArg> for PercentileScope {
    fn from(value: ScopeArg) -> Self {
        match value {
            ScopeArg::Full => PercentileScope::Full,
            ScopeArg::Season => PercentileScope::Season,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KnotsArg {
    Linear,
    Log,
}

impl From<KnotsArg> for LagKnots {
    fn from(value: KnotsArg) -> Self {
        match value {
            KnotsArg::Linear => LagKnots::Linear,
            KnotsArg::Log => LagKnots::Log,
        }
    }
}

enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

fn data_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let is_help = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Command line with the --threads flag removed, so embedded manifests (and
/// therefore result files) do not depend on the worker count.
fn sanitized_command_line() -> String {
    let args: Vec<String> = std::env::args().collect();
    let mut out: Vec<&str> = Vec::with_capacity(args.len());
    let mut skip_next = false;
    for arg in &args {
        if skip_next {
            skip_next = false;
            continue;
        }
        if arg == "--threads" {
            skip_next = true;
            continue;
        }
        if arg.starts_with("--threads=") {
            continue;
        }
        out.push(arg);
    }
    out.join(" ")
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate {
            spec,
            out,
            seed,
            years,
        } => cmd_simulate(spec.as_deref(), &out, seed, years),
        Command::Detect {
            input,
            definitions,
            out_dir,
            percentile_scope,
        } => cmd_detect(&input, &definitions, &out_dir, percentile_scope.into()),
        Command::Fit {
            input,
            panel,
            variant,
            out,
            config,
            df_rh,
            df_pm10,
            df_time_per_year,
            df_dos,
            df_temp,
            max_lag_hw,
            lag_df_hw,
            max_lag_cs,
            lag_df_cs,
            lag_knots,
            percentile_scope,
        } => {
            let mut overrides = match config {
                Some(path) => read_json::<ConfigOverrides>(&path)?,
                None => ConfigOverrides::default(),
            };
            // flags win over the config file
            overrides.df_rh = df_rh.or(overrides.df_rh);
            overrides.df_pm10 = df_pm10.or(overrides.df_pm10);
            overrides.df_time_per_year = df_time_per_year.or(overrides.df_time_per_year);
            overrides.df_dos = df_dos.or(overrides.df_dos);
            overrides.df_temp = df_temp.or(overrides.df_temp);
            overrides.max_lag_heat = max_lag_hw.or(overrides.max_lag_heat);
            overrides.lag_df_heat = lag_df_hw.or(overrides.lag_df_heat);
            overrides.max_lag_cold = max_lag_cs.or(overrides.max_lag_cold);
            overrides.lag_df_cold = lag_df_cs.or(overrides.lag_df_cold);
            overrides.lag_knots = lag_knots.map(Into::into).or(overrides.lag_knots);
            overrides.percentile_scope = percentile_scope
                .map(Into::into)
                .or(overrides.percentile_scope);
            cmd_fit(&input, panel, variant, &out, overrides)
        }
        Command::Sensitivity { input, config, out } => cmd_sensitivity(&input, &config, &out),
        Command::Report { results, out_dir } => cmd_report(&results, &out_dir),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("cannot parse {}: {e}", path.display())))
}

fn read_series(path: &Path) -> Result<(DailySeries, String), CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let digest = sha256_hex(&bytes);
    let series = parse_series(bytes.as_slice())
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok((series, digest))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_sidecar(embedded: &EmbeddedManifest, target: &Path) -> Result<(), CliError> {
    embedded
        .clone()
        .into_run_manifest()
        .write_sidecar(target)
        .map_err(data_err)
}

fn cmd_simulate(
    spec_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    years: Option<u32>,
) -> Result<(), CliError> {
    let mut spec: SimSpec = match spec_path {
        Some(path) => read_json(path)?,
        None => SimSpec::default(),
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(years) = years {
        spec.years = years;
    }
    let series = generate(&spec).map_err(data_err)?;
    write_file(out, &to_csv_string(&series))?;
    let manifest = EmbeddedManifest::new(sanitized_command_line(), config_hash(&spec), None)
        .with_rng(RNG_ALGORITHM);
    write_sidecar(&manifest, out)?;
    eprintln!(
        "simulated {} days ({} strata) -> {}",
        series.len(),
        series.strata().len(),
        out.display()
    );
    Ok(())
}

fn parse_definitions(arg: &str) -> Result<Vec<EteDefinition>, CliError> {
    if arg.trim() == "all" {
        return Ok(all_definitions());
    }
    arg.split(',')
        .map(|name| {
            name.trim()
                .parse::<EteDefinition>()
                .map_err(|e| CliError::Usage(e.to_string()))
        })
        .collect()
}

fn cmd_detect(
    input: &Path,
    definitions: &str,
    out_dir: &Path,
    scope: PercentileScope,
) -> Result<(), CliError> {
    let (series, digest) = read_series(input)?;
    let defs = parse_definitions(definitions)?;
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;

    let mut summary = String::from("name,description,mean,sd,min,median,max\n");
    for def in &defs {
        let indicator = detect(&series, def, scope).map_err(data_err)?;
        let mut flags_csv = String::from("date,flag\n");
        let mut date = indicator.start;
        for flag in &indicator.flags {
            flags_csv.push_str(&format!(
                "{},{}\n",
                date.format("%Y-%m-%d"),
                u8::from(*flag)
            ));
            date = date.succ_opt().expect("date range");
        }
        write_file(&out_dir.join(format!("{}.csv", def.name())), &flags_csv)?;

        match event_day_stats(&indicator) {
            Ok(s) => summary.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                def.name(),
                def.description(),
                s.mean,
                s.sd,
                s.min,
                s.median,
                s.max
            )),
            Err(_) => summary.push_str(&format!("{},{},,,,,\n", def.name(), def.description())),
        }
    }
    let summary_path = out_dir.join("summary.csv");
    write_file(&summary_path, &summary)?;
    let manifest = EmbeddedManifest::new(
        sanitized_command_line(),
        config_hash(&(definitions, scope)),
        Some(digest),
    );
    write_sidecar(&manifest, &summary_path)?;
    eprintln!(
        "detected {} definitions -> {}",
        defs.len(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_fit(
    input: &Path,
    panel: PanelArg,
    variant: VariantArg,
    out: &Path,
    overrides: ConfigOverrides,
) -> Result<(), CliError> {
    if out.extension().and_then(|e| e.to_str()) == Some("csv") {
        return Err(CliError::Usage(
            "--out is the results JSON path; the flat CSV is derived from it".into(),
        ));
    }
    let (series, digest) = read_series(input)?;
    let definitions: Vec<EteDefinition> = all_definitions()
        .into_iter()
        .filter(|d| match panel {
            PanelArg::Hw => d.kind == EteKind::HeatWave,
            PanelArg::Cs => d.kind == EteKind::ColdSpell,
            PanelArg::All => true,
        })
        .collect();
    let variants = variant.variants();
    let strata = series.strata();
    if strata.is_empty() {
        return Err(CliError::Data("input has no death-count columns".into()));
    }

    let cells = run_panel(&series, &definitions, &strata, &variants, &overrides);
    let ok = cells.iter().filter(|c| c.outcome.is_ok()).count();
    eprintln!(
        "fitted {} cells ({} ok, {} failed)",
        cells.len(),
        ok,
        cells.len() - ok
    );

    let panel_name = match panel {
        PanelArg::Hw => "hw",
        PanelArg::Cs => "cs",
        PanelArg::All => "all",
    };
    let manifest = EmbeddedManifest::new(
        sanitized_command_line(),
        config_hash(&(panel_name, &variants, &overrides)),
        Some(digest),
    );
    let results = PanelResults {
        manifest: manifest.clone(),
        metadata: PanelMetadata {
            panel: panel_name.to_string(),
            variants,
            strata,
            definitions: definitions.iter().map(|d| d.name()).collect(),
            overrides,
            series_start: series.start(),
            series_end: series.end(),
            series_days: series.len(),
            glm: GlmSettings::default(),
            notes: vec![
                "default cold-spell lag window is 0-27 days; the 0-21 window used by some \
                 reporting conventions is available through the sensitivity grid"
                    .into(),
                "percentile thresholds default to the full study period; pass \
                 --percentile-scope season to restrict them to the definition's season"
                    .into(),
            ],
        },
        cells: cells.iter().map(PanelCellJson::from).collect(),
    };
    let mut json = results.to_json();
    json.push('\n');
    write_file(out, &json)?;
    let csv_path = out.with_extension("csv");
    let mut flat = Vec::new();
    write_flat_csv(&results, &mut flat).map_err(data_err)?;
    write_file(&csv_path, &String::from_utf8(flat).expect("utf-8"))?;
    write_sidecar(&manifest, out)?;
    eprintln!("wrote {} and {}", out.display(), csv_path.display());
    Ok(())
}

/// Base configuration file for the sensitivity subcommand.
#[derive(serde::Serialize, serde::Deserialize)]
struct SensitivityConfigFile {
    definition: EteDefinition,
    #[serde(default)]
    cause: Option<Cause>,
    #[serde(default)]
    sex: Option<Sex>,
    #[serde(default)]
    variant: Option<Variant>,
    #[serde(default)]
    overrides: ConfigOverrides,
    /// Candidate ranges; defaults to the full calibration grid for the
    /// definition's kind.
    #[serde(default)]
    grid: Option<SensitivityGrid>,
}

fn cmd_sensitivity(input: &Path, config: &Path, out: &Path) -> Result<(), CliError> {
    let (series, digest) = read_series(input)?;
    let file: SensitivityConfigFile = read_json(config)?;
    let stratum = StratumKey::new(
        file.cause.clone().unwrap_or(Cause::Cvd),
        file.sex.unwrap_or(Sex::All),
    );
    let mut base = ModelConfig::new(
        file.definition,
        stratum,
        file.variant.unwrap_or(Variant::Overall),
    );
    file.overrides.apply(&mut base);
    let grid = file
        .grid
        .clone()
        .unwrap_or_else(|| SensitivityGrid::paper_default(file.definition.kind));
    eprintln!(
        "running {} grid points for {} ({})",
        grid.len(),
        file.definition.name(),
        base.stratum
    );
    let result = run_grid(&series, &base, &grid).map_err(data_err)?;

    let mut csv = String::from(
        "rank,is_base,definition,cause,sex,variant,max_lag,lag_df,df_rh,df_pm10,\
         df_time_per_year,df_dos,n_params,qaic,dispersion,rr,ci_low,ci_high,significant,\
         converged,error\n",
    );
    let format_point = |rank: &str, p: &thermolag::sensitivity::GridPoint| -> String {
        let c = &p.config;
        let opt_usize = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_f64 = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let (rr, lo, hi, sig) = match &p.estimate {
            Some(e) => (
                e.rr.to_string(),
                e.ci_low.to_string(),
                e.ci_high.to_string(),
                e.significant.to_string(),
            ),
            None => Default::default(),
        };
        format!(
            "{rank},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{rr},{lo},{hi},{sig},{},{}\n",
            p.is_base,
            c.definition.name(),
            c.stratum.cause,
            c.stratum.sex,
            c.variant,
            c.lag_spec.max_lag,
            c.lag_spec.lag_df,
            c.df_rh,
            c.df_pm10,
            c.df_time_per_year,
            c.df_dos,
            opt_usize(p.n_params),
            opt_f64(p.qaic),
            opt_f64(p.dispersion),
            p.converged.map(|b| b.to_string()).unwrap_or_default(),
            p.error.clone().unwrap_or_default().replace(',', ";"),
        )
    };
    for (i, point) in result.points.iter().enumerate() {
        csv.push_str(&format_point(&(i + 1).to_string(), point));
    }
    csv.push_str(&format_point("base", &result.base));
    write_file(out, &csv)?;
    let manifest = EmbeddedManifest::new(
        sanitized_command_line(),
        config_hash(&(&base, &grid)),
        Some(digest),
    );
    write_sidecar(&manifest, out)?;
    let best = result
        .best()
        .map(|p| {
            format!(
                "max_lag={} lag_df={} df_rh={} df_pm10={} trend/yr={} dos={} (qaic {:.2})",
                p.config.lag_spec.max_lag,
                p.config.lag_spec.lag_df,
                p.config.df_rh,
                p.config.df_pm10,
                p.config.df_time_per_year,
                p.config.df_dos,
                p.qaic.unwrap_or(f64::NAN)
            )
        })
        .unwrap_or_else(|| "none (all points failed)".into());
    eprintln!("best by qaic: {best}");
    eprintln!("shared dispersion: {:.4}", result.reference_dispersion);
    Ok(())
}

fn cmd_report(results_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(results_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", results_path.display())))?;
    let results = PanelResults::from_json(&text).map_err(data_err)?;
    write_report_bundle(&results, out_dir).map_err(data_err)?;
    let manifest = EmbeddedManifest::new(
        sanitized_command_line(),
        results.manifest.config_hash.clone(),
        Some(sha256_hex(text.as_bytes())),
    );
    let mut file = fs::File::create(out_dir.join("manifest.json"))
        .map_err(|e| CliError::Data(format!("cannot write manifest: {e}")))?;
    let body = serde_json::to_string_pretty(&manifest.into_run_manifest()).expect("serializable");
    file.write_all(body.as_bytes()).map_err(data_err)?;
    file.write_all(b"\n").map_err(data_err)?;
    eprintln!(
        "wrote {} figure files to {}",
        thermolag::report::REPORT_FILES.len(),
        out_dir.display()
    );
    Ok(())
}
