use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use log::{debug, info, warn};

use mobilitycorr::approx::RegressionMode;
use mobilitycorr::ingest::{
    apply_exclusions, cool_down_violations, parse_assessment_table, parse_event_log, parse_flats,
    write_assessment_table, write_event_log, write_flats, ExclusionConfig,
};
use mobilitycorr::model::validate_record;
use mobilitycorr::pairing::Assessment;
use mobilitycorr::report::{
    analyze, render_table, write_correlations, write_errata, write_ground_truth,
};
use mobilitycorr::scoring::tug_audit;
use mobilitycorr::sim::{simulate_assessments, simulate_flat, SimConfig};
use mobilitycorr::Id;

const EXIT_FINDINGS: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "mobilitycorr",
    version,
    about = "Motion-sensor activity vs. mobility assessment correlation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Correlate daily activity with assessment scores per participant.
    Analyze {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        assessments: PathBuf,
        #[arg(long)]
        flats: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Minimum fraction of study days with activity per participant.
        #[arg(long, default_value_t = 0.0)]
        min_coverage: f64,
        /// Comma-separated rooms every flat must cover.
        #[arg(long, value_delimiter = ',')]
        require_rooms: Vec<String>,
        #[arg(long)]
        drop_multi_occupancy: bool,
        #[arg(long, default_value = "piecewise")]
        regression: RegressionMode,
    },
    /// Generate a synthetic flat with events, assessments and ground truth.
    Simulate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 300)]
        days: u32,
        #[arg(long, default_value_t = 5)]
        sensors: usize,
        /// Motion events per sensor-hour at the start of the study.
        #[arg(long, default_value_t = 9.0, allow_negative_numbers = true)]
        base_rate: f64,
        /// Relative rate change per 30 days.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        trend: f64,
        #[arg(long, default_value_t = 31)]
        interval: u32,
        #[arg(long, default_value_t = 0)]
        noise: u32,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        coupling: f64,
        #[arg(long, default_value_t = 0.0)]
        visitor_rate: f64,
        #[arg(long, default_value = "2014-07-01")]
        start: NaiveDate,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check assessment scores against their scales and audit TUG points.
    Validate {
        #[arg(long)]
        assessments: PathBuf,
        /// Also write the TUG errata as CSV.
        #[arg(long)]
        errata: Option<PathBuf>,
    },
}

/// A failure mapped to an exit code.
struct Failure(u8, String);

impl<E: std::fmt::Display> From<(u8, E)> for Failure {
    fn from((code, e): (u8, E)) -> Self {
        Failure(code, e.to_string())
    }
}

fn input_err<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure(EXIT_INPUT, format!("{}: {e}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(input_err(path))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(input_err(path))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MOBILITYCORR_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Analyze {
            events,
            assessments,
            flats,
            out,
            min_coverage,
            require_rooms,
            drop_multi_occupancy,
            regression,
        } => {
            let config = ExclusionConfig {
                min_participant_coverage: min_coverage,
                required_sensor_rooms: (!require_rooms.is_empty())
                    .then(|| require_rooms.into_iter().collect::<BTreeSet<_>>()),
                drop_multi_occupancy_intervals: drop_multi_occupancy,
                ..ExclusionConfig::default()
            };
            cmd_analyze(&events, &assessments, &flats, &out, &config, regression)
        }
        Command::Simulate {
            seed,
            days,
            sensors,
            base_rate,
            trend,
            interval,
            noise,
            coupling,
            visitor_rate,
            start,
            out,
        } => {
            let config = SimConfig {
                seed,
                n_sensors: sensors,
                study_days: days,
                base_rate,
                trend,
                assessment_interval_days: interval,
                score_noise: noise,
                coupling,
                visitor_rate,
                start_date: start,
                flat_id: Id::from("1"),
                tz_offset_minutes: 0,
            };
            cmd_simulate(&config, &out)
        }
        Command::Validate {
            assessments,
            errata,
        } => cmd_validate(&assessments, errata.as_deref()),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn cmd_analyze(
    events_path: &Path,
    assessments_path: &Path,
    flats_path: &Path,
    out: &Path,
    config: &ExclusionConfig,
    mode: RegressionMode,
) -> Result<u8, Failure> {
    let events = parse_event_log(open(events_path)?).map_err(input_err(events_path))?;
    if events.is_empty() {
        return Err(Failure(
            EXIT_INPUT,
            format!("{}: no events", events_path.display()),
        ));
    }
    let records =
        parse_assessment_table(open(assessments_path)?).map_err(input_err(assessments_path))?;
    let flats = parse_flats(open(flats_path)?).map_err(input_err(flats_path))?;
    info!(
        "{} events, {} records, {} flats",
        events.len(),
        records.len(),
        flats.len()
    );
    let cool_down = cool_down_violations(&events);
    if !cool_down.is_empty() {
        warn!(
            "{} motion events closer than 8 s to the previous one",
            cool_down.len()
        );
        for v in &cool_down {
            debug!(
                "cool-down: flat {} sensor {} {} -> {}",
                v.flat_id, v.sensor_id, v.first, v.second
            );
        }
    }

    let dataset =
        apply_exclusions(&events, &records, &flats, config).map_err(|e| (EXIT_INPUT, e))?;
    for entry in &dataset.exclusion_log {
        debug!(
            "excluded {} ({}): {}",
            entry.entity, entry.rule, entry.detail
        );
    }
    let analysis = analyze(&dataset, mode);

    fs::create_dir_all(out).map_err(input_err(out))?;
    write_correlations(
        &analysis.assessments,
        create(&out.join("correlations.csv"))?,
    )
    .map_err(|e| (EXIT_INPUT, e))?;
    write_correlations(&analysis.sppb_items, create(&out.join("sppb_items.csv"))?)
        .map_err(|e| (EXIT_INPUT, e))?;
    write_errata(
        &tug_audit(&records).errata,
        create(&out.join("tug_errata.csv"))?,
    )
    .map_err(|e| (EXIT_INPUT, e))?;

    let mut log = create(&out.join("exclusions.csv"))?;
    let mut w = csv::Writer::from_writer(&mut log);
    w.write_record(["entity", "rule", "detail"])
        .map_err(|e| (EXIT_INPUT, e))?;
    for e in &dataset.exclusion_log {
        w.write_record([&e.entity, &e.rule, &e.detail])
            .map_err(|e| (EXIT_INPUT, e))?;
    }
    w.flush().map_err(|e| (EXIT_INPUT, e))?;

    let table = format!(
        "{}\n{}",
        render_table(&analysis.assessments, &Assessment::MAIN),
        render_table(&analysis.sppb_items, &Assessment::SPPB_ITEMS)
    );
    create(&out.join("report.txt"))?
        .write_all(table.as_bytes())
        .map_err(|e| (EXIT_INPUT, e))?;
    print!("{table}");
    Ok(0)
}

fn cmd_simulate(config: &SimConfig, out: &Path) -> Result<u8, Failure> {
    let sim = simulate_flat(config).map_err(|e| (EXIT_INPUT, e))?;
    let records = simulate_assessments(&sim.truth, config);
    fs::create_dir_all(out).map_err(input_err(out))?;
    write_event_log(&sim.events, create(&out.join("events.csv"))?).map_err(|e| (EXIT_INPUT, e))?;
    write_assessment_table(&records, create(&out.join("assessments.csv"))?)
        .map_err(|e| (EXIT_INPUT, e))?;
    write_flats(&[sim.flat], create(&out.join("flats.csv"))?).map_err(|e| (EXIT_INPUT, e))?;
    write_ground_truth(&sim.truth, create(&out.join("ground_truth.csv"))?)
        .map_err(|e| (EXIT_INPUT, e))?;
    println!(
        "wrote {} events, {} assessments to {}",
        sim.events.len(),
        records.len(),
        out.display()
    );
    Ok(0)
}

fn cmd_validate(path: &Path, errata_path: Option<&Path>) -> Result<u8, Failure> {
    let records = parse_assessment_table(open(path)?).map_err(input_err(path))?;
    let mut findings = 0;
    for r in &records {
        for v in validate_record(r) {
            findings += 1;
            println!(
                "violation: participant {} {}: {v}",
                r.participant_id, r.date
            );
        }
    }
    let audit = tug_audit(&records);
    for e in &audit.errata {
        println!(
            "tug erratum: participant {} {}: {} s printed {} computed {}",
            e.participant_id, e.date, e.tug_seconds, e.points_printed, e.points_computed
        );
    }
    println!(
        "{} records, {} violations, TUG points agree on {}/{} pairs ({:.1}%)",
        records.len(),
        findings,
        audit.pairs - audit.errata.len(),
        audit.pairs,
        100.0 * audit.agreement()
    );
    if let Some(p) = errata_path {
        write_errata(&audit.errata, create(p)?).map_err(|e| (EXIT_INPUT, e))?;
    }
    if findings > 0 {
        warn!("{findings} violations");
        return Ok(EXIT_FINDINGS);
    }
    Ok(0)
}
