//! Command implementations behind the `momo-sim` binary.
//!
//! Every command builds its complete output before touching the
//! destination, and each file is written to a temporary sibling and renamed
//! into place.

pub mod ns2;
pub mod trace_file;

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use momo_core::config::{load_dmimo, load_experiment};
use momo_core::dmimo::{run_dmimo_experiment, DmimoResults, DmimoScenario};
use momo_core::engine::{run_into, sweep, ExperimentConfig, SweepGrid, SweepRow};
use momo_core::metrics::{distance_series, speed_series, violation_report, average_speed, DensityGrid};
use momo_core::parallel::Execution;

use crate::trace_file::{read_trace, TraceWriter};

#[derive(Debug, Parser)]
#[command(name = "momo-sim", version, about = "Group mobility simulator with bounded kinematics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its trace.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Measure a trace against the limits and groups of a config.
    Metrics {
        trace: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Directory for two-column curve files.
        #[arg(long)]
        plot_data: Option<PathBuf>,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure violations over a grid of update periods and distances.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `delta_t_s=0.1,1,5;distance_m=15,30`. A missing axis takes the
        /// config's own value. Without the flag the default grid is used.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Relay-selection decay experiment.
    Dmimo {
        /// Scenario document; the default scenario when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Convert a trace to an ns-2 movement file.
    ExportNs2 {
        trace: PathBuf,
        /// Config supplying the playground; without it wraps are not
        /// detected.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs a parsed command and returns what it prints on standard output.
pub fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Simulate { config, out, seed } => cmd_simulate(&config, &out, seed),
        Command::Metrics {
            trace,
            config,
            plot_data,
            out,
        } => cmd_metrics(&trace, &config, plot_data.as_deref(), out.as_deref()),
        Command::Sweep {
            config,
            grid,
            out,
            seed,
        } => cmd_sweep(&config, grid.as_deref(), &out, seed),
        Command::Dmimo { config, out, seed } => cmd_dmimo(config.as_deref(), &out, seed),
        Command::ExportNs2 { trace, config, out } => cmd_export_ns2(&trace, config.as_deref(), &out),
    }
}

/// Writes through a temporary file in the destination directory and renames
/// it over `path` once `fill` succeeds.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write in {}", dir.display()))?;
    let mut w = BufWriter::new(tmp);
    fill(&mut w)?;
    let tmp = w.into_inner().map_err(|e| e.into_error())?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    load_experiment(&text).with_context(|| format!("invalid config {}", path.display()))
}

pub fn load_scenario(path: Option<&Path>) -> Result<DmimoScenario> {
    match path {
        None => Ok(DmimoScenario::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            load_dmimo(&text).with_context(|| format!("invalid scenario {}", p.display()))
        }
    }
}

pub fn cmd_simulate(config: &Path, out: &Path, seed: Option<u64>) -> Result<String> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let mut summary = None;
    write_atomic(out, |w| {
        let mut tw = TraceWriter::new(w)?;
        summary = Some(run_into(&cfg, &mut tw)?);
        tw.finish()?;
        Ok(())
    })?;
    let s = summary.expect("run completed");
    Ok(format!(
        "model={}\nnodes={}\nduration_s={:?}\nrecords={}\n",
        cfg.model.name(),
        s.nodes,
        cfg.duration_s,
        s.records
    ))
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn two_column(rows: &[(f64, f64)]) -> impl FnOnce(&mut dyn Write) -> Result<()> + '_ {
    move |w| {
        for (a, b) in rows {
            writeln!(w, "{a:?} {b:?}")?;
        }
        Ok(())
    }
}

pub fn cmd_metrics(trace: &Path, config: &Path, plot_data: Option<&Path>, out: Option<&Path>) -> Result<String> {
    let cfg = load_config(config)?;
    let file = fs::File::open(trace).with_context(|| format!("cannot read {}", trace.display()))?;
    let trace = read_trace(std::io::BufReader::new(file), cfg.playground.metric())
        .with_context(|| format!("invalid trace {}", trace.display()))?;
    let report = violation_report(&trace, &cfg.limits)?;
    let avg = average_speed(&trace)?;
    let distances = distance_series(&trace, &cfg.groups);
    let mut text = String::new();
    let nodes = trace.by_node().len();
    let _ = writeln!(text, "nodes={nodes}");
    let _ = writeln!(text, "records={}", trace.records.len());
    let _ = writeln!(text, "updates={}", report.updates_counted);
    let _ = writeln!(text, "speed_violation_pct={:?}", report.speed_violation_pct);
    let _ = writeln!(text, "rotation_violation_pct={:?}", report.rotation_violation_pct);
    let _ = writeln!(text, "avg_speed_mps={avg:?}");
    let _ = writeln!(text, "mean_intra_group_distance_m={:?}", mean(distances.iter().map(|d| d.1)));
    let _ = writeln!(text, "mean_overall_distance_m={:?}", mean(distances.iter().map(|d| d.2)));
    if let Some(dir) = plot_data {
        let speeds = speed_series(&trace)?;
        let intra: Vec<(f64, f64)> = distances.iter().map(|d| (d.0, d.1)).collect();
        let overall: Vec<(f64, f64)> = distances.iter().map(|d| (d.0, d.2)).collect();
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        write_atomic(&dir.join("speed.dat"), two_column(&speeds))?;
        write_atomic(&dir.join("intra_group_distance.dat"), two_column(&intra))?;
        write_atomic(&dir.join("overall_distance.dat"), two_column(&overall))?;
    }
    if let Some(path) = out {
        write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))?;
    }
    Ok(text)
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    let vals = raw
        .split(',')
        .map(|v| {
            let x: f64 = v.trim().parse().with_context(|| format!("grid {key}: `{v}` is not a number"))?;
            if !(x.is_finite() && x > 0.0) {
                bail!("grid {key}: `{v}` must be positive");
            }
            Ok(x)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vals)
}

/// Parses `key=v1,v2;key=...`. Missing axes take the config's values.
pub fn parse_grid(spec: &str, cfg: &ExperimentConfig) -> Result<SweepGrid> {
    let mut grid = SweepGrid {
        delta_t_s: vec![cfg.delta_t_s],
        distance_m: cfg.model.distance_threshold().into_iter().collect(),
    };
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let Some((key, vals)) = part.split_once('=') else {
            bail!("grid: `{part}` is not key=values");
        };
        match key.trim() {
            "delta_t_s" => grid.delta_t_s = parse_list("delta_t_s", vals)?,
            "distance_m" => grid.distance_m = parse_list("distance_m", vals)?,
            other => bail!("grid: unknown key `{other}`, expected delta_t_s or distance_m"),
        }
    }
    Ok(grid)
}

pub const SWEEP_HEADER: &str = "model,delta_t_s,distance_m,speed_violation_pct,rotation_violation_pct,avg_speed_mps";

pub fn format_sweep(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let d = r.distance_m.map(|d| format!("{d:?}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{:?},{},{:?},{:?},{:?}",
            r.model, r.delta_t_s, d, r.speed_violation_pct, r.rotation_violation_pct, r.avg_speed_mps
        );
    }
    s
}

pub fn cmd_sweep(config: &Path, grid: Option<&str>, out: &Path, seed: Option<u64>) -> Result<String> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let grid = match grid {
        Some(spec) => parse_grid(spec, &cfg)?,
        None => SweepGrid::default(),
    };
    let rows = sweep(&cfg, &grid, Execution::default())?;
    let table = format_sweep(&rows);
    write_atomic(out, |w| Ok(w.write_all(table.as_bytes())?))?;
    Ok(table)
}

/// Header of a histogram file: window corners, cell side and grid shape.
pub fn histogram_header(g: &DensityGrid) -> String {
    format!(
        "# x_min_m={:?} y_min_m={:?} x_max_m={:?} y_max_m={:?} resolution_m={:?} rows={} cols={}",
        g.window.x_min, g.window.y_min, g.window.x_max, g.window.y_max, g.resolution, g.rows, g.cols
    )
}

fn write_histogram(g: &DensityGrid, w: &mut dyn Write) -> Result<()> {
    writeln!(w, "{}", histogram_header(g))?;
    for r in 0..g.rows {
        let line: Vec<String> = (0..g.cols).map(|c| format!("{:?}", g.at(r, c))).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

/// File names written by `dmimo`, in write order.
pub fn dmimo_file_names(res: &DmimoResults) -> Vec<String> {
    let mut names = Vec::new();
    for c in &res.curves {
        names.push(format!("surviving_{}_v{:?}.dat", c.flavor.name(), c.v_max_mps));
        names.push(format!("rate_{}_v{:?}.dat", c.flavor.name(), c.v_max_mps));
    }
    for (f, _) in &res.histograms {
        names.push(format!("histogram_{}.dat", f.name()));
    }
    names
}

pub fn cmd_dmimo(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<String> {
    let mut sc = load_scenario(config)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    let res = run_dmimo_experiment(&sc, Execution::default())?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let names = dmimo_file_names(&res);
    let mut name = names.iter();
    let mut summary = String::new();
    for c in &res.curves {
        let surviving: Vec<(f64, f64)> = c.t_el_s.iter().copied().zip(c.mean_surviving.iter().copied()).collect();
        let rate: Vec<(f64, f64)> = c.t_el_s.iter().copied().zip(c.mean_rate_bps_hz.iter().copied()).collect();
        write_atomic(&out.join(name.next().expect("name")), two_column(&surviving))?;
        write_atomic(&out.join(name.next().expect("name")), two_column(&rate))?;
        let _ = writeln!(
            summary,
            "{}_v{:?}: selections={} surviving_at_0={:?} surviving_at_end={:?} rate_at_0={:?}",
            c.flavor.name(),
            c.v_max_mps,
            c.selections,
            c.mean_surviving[0],
            c.mean_surviving[c.mean_surviving.len() - 1],
            c.mean_rate_bps_hz[0]
        );
    }
    for (_, g) in &res.histograms {
        write_atomic(&out.join(name.next().expect("name")), |w| write_histogram(g, w))?;
    }
    let _ = writeln!(summary, "files={}", names.len());
    Ok(summary)
}

pub fn cmd_export_ns2(trace: &Path, config: Option<&Path>, out: &Path) -> Result<String> {
    let metric = match config {
        Some(c) => load_config(c)?.playground.metric(),
        None => momo_core::kinematics::Metric::Euclidean,
    };
    let file = fs::File::open(trace).with_context(|| format!("cannot read {}", trace.display()))?;
    let trace = read_trace(std::io::BufReader::new(file), metric)
        .with_context(|| format!("invalid trace {}", trace.display()))?;
    let text = ns2::export(&trace.records, &trace.metric)?;
    write_atomic(out, |w| Ok(w.write_all(text.as_bytes())?))?;
    Ok(format!(
        "nodes={}\nlines={}\n",
        trace.by_node().len(),
        text.lines().count()
    ))
}
