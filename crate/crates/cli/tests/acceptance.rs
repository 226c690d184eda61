//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; exits nonzero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use momo_core::dmimo::{
    expected_random_overlap, run_dmimo_experiment, select_relays, ChannelModel, DecayCurves, DmimoResults,
    DmimoScenario, Flavor,
};
use momo_core::engine::{
    generate_switch_schedule, run, sweep, DynamicsSwitch, ExperimentConfig, ModelChoice, SweepGrid, SWITCH_STREAM,
};
use momo_core::group::{
    momo_check_and_set_mode, momo_connected_set, momo_grouping_factor, GroupSpec, MoMoParams, NodeMode,
};
use momo_core::kinematics::{Metric, Position};
use momo_core::metrics::{distance_series, group_distances_at, speed_series, violation_report, Trace};
use momo_core::parallel::Execution;
use momo_core::rng::{RngStream, SimRng};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn reference(model: ModelChoice) -> ExperimentConfig {
    ExperimentConfig::reference(model)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_err(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

fn sub_trace(trace: &Trace, keep: impl Fn(usize) -> bool) -> Trace {
    let mut t = trace.clone();
    t.records.retain(|r| keep(r.node_id));
    t
}

// 1
fn momo_accuracy() -> Outcome {
    let c = reference(ExperimentConfig::reference_momo());
    let start = Instant::now();
    let trace = run(&c).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let r = violation_report(&trace, &c.limits).map_err(|e| e.to_string())?;
    check(
        r.speed_violation_pct == 0.0 && r.rotation_violation_pct == 0.0 && secs < 5.0,
        format!(
            "speed {}%, rotation {}%, {} updates, run {:.2}s",
            r.speed_violation_pct, r.rotation_violation_pct, r.updates_counted, secs
        ),
    )
}

// 2
fn rpgm_speed() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for dt in [0.1, 0.5] {
        let mut pct = Vec::new();
        for seed in 1..=5 {
            let mut c = reference(ExperimentConfig::reference_rpgm());
            c.duration_s = 2000.0;
            c.delta_t_s = dt;
            c.seed = seed;
            let trace = run(&c).map_err(|e| e.to_string())?;
            let leaders: Vec<usize> = c.groups.iter().map(GroupSpec::leader).collect();
            let all = violation_report(&trace, &c.limits).map_err(|e| e.to_string())?;
            let lead = violation_report(&sub_trace(&trace, |n| leaders.contains(&n)), &c.limits)
                .map_err(|e| e.to_string())?;
            let std = violation_report(&sub_trace(&trace, |n| !leaders.contains(&n)), &c.limits)
                .map_err(|e| e.to_string())?;
            ok &= (all.speed_violation_pct - 75.0).abs() <= 5.0;
            ok &= lead.speed_violation_pct == 0.0 && std.speed_violation_pct >= 95.0;
            pct.push(all.speed_violation_pct);
            if seed == 1 {
                parts.push(format!(
                    "dt={dt}: leaders {}% standard {:.2}%",
                    lead.speed_violation_pct, std.speed_violation_pct
                ));
            }
        }
        let lo = pct.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pct.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        parts.push(format!("dt={dt}: overall {lo:.2}..{hi:.2}% over 5 seeds"));
    }
    check(ok, parts.join("; "))
}

// 3
fn rotation_violations() -> Outcome {
    let mut at = BTreeMap::new();
    for (name, model) in [("rpgm", ExperimentConfig::reference_rpgm()), ("rvgm", ExperimentConfig::reference_rvgm())] {
        for dt in [1.0, 5.0] {
            let mut c = reference(model);
            c.delta_t_s = dt;
            let trace = run(&c).map_err(|e| e.to_string())?;
            let r = violation_report(&trace, &c.limits).map_err(|e| e.to_string())?;
            at.insert((name, dt.to_string()), r.rotation_violation_pct);
        }
    }
    let g = |m: &'static str, dt: &str| at[&(m, dt.to_string())];
    check(
        (g("rpgm", "1") - 50.0).abs() <= 10.0
            && (g("rvgm", "1") - 10.0).abs() <= 5.0
            && g("rpgm", "5") == 0.0
            && g("rvgm", "5") == 0.0,
        format!(
            "rpgm {:.2}% (dt=1) {}% (dt=5); rvgm {:.2}% (dt=1) {}% (dt=5)",
            g("rpgm", "1"),
            g("rpgm", "5"),
            g("rvgm", "1"),
            g("rvgm", "5")
        ),
    )
}

// 4
fn speed_compliance() -> Outcome {
    let grid = SweepGrid::default();
    let momo = sweep(&reference(ExperimentConfig::reference_momo()), &grid, Execution::default()).map_err(|e| e.to_string())?;
    let rvgm = sweep(&reference(ExperimentConfig::reference_rvgm()), &grid, Execution::default()).map_err(|e| e.to_string())?;
    let worst = momo
        .iter()
        .chain(&rvgm)
        .map(|r| r.speed_violation_pct)
        .fold(0.0, f64::max);
    check(
        momo.len() == 20 && rvgm.len() == 5 && worst == 0.0,
        format!("{} momo points, {} rvgm points, worst speed violation {worst}%", momo.len(), rvgm.len()),
    )
}

// 5
fn momo_average_speed() -> Outcome {
    let grid = SweepGrid::default();
    // speeds[dt index][d_c index] across seeds
    let mut speeds = vec![vec![Vec::new(); grid.distance_m.len()]; grid.delta_t_s.len()];
    for seed in 1..=5 {
        let mut c = reference(ExperimentConfig::reference_momo());
        c.seed = seed;
        let rows = sweep(&c, &grid, Execution::default()).map_err(|e| e.to_string())?;
        for (k, r) in rows.iter().enumerate() {
            speeds[k / grid.distance_m.len()][k % grid.distance_m.len()].push(r.avg_speed_mps);
        }
    }
    let i5 = grid.delta_t_s.iter().position(|&d| d == 5.0).expect("grid has 5 s");
    let i15 = grid.distance_m.iter().position(|&d| d == 15.0).expect("grid has 15 m");
    let top = mean(&speeds[i5][i15]);
    let mut ok = top >= 4.5 && speeds[i5][i15].iter().all(|&v| v >= 4.5);
    let mut worst_rise = f64::NEG_INFINITY;
    for row in &speeds {
        for w in row.windows(2) {
            let rise = mean(&w[1]) - mean(&w[0]);
            let slack = 2.0 * (std_err(&w[0]).powi(2) + std_err(&w[1]).powi(2)).sqrt();
            ok &= rise <= slack;
            worst_rise = worst_rise.max(rise - slack);
        }
    }
    let curve: Vec<String> = speeds[i5].iter().map(|s| format!("{:.3}", mean(s))).collect();
    check(
        ok,
        format!(
            "avg speed at D_c=15, dt=5: {top:.3} m/s; dt=5 curve over D_c {}; worst rise beyond 2 SE {worst_rise:.3}",
            curve.join(", ")
        ),
    )
}

fn switching(model: ModelChoice, duration: f64, seed: u64) -> ExperimentConfig {
    let mut c = reference(model);
    c.duration_s = duration;
    c.seed = seed;
    c.dynamics_switch = Some(DynamicsSwitch { mean_period_s: 100.0 });
    c
}

/// Epoch indices at which grouping is restored.
fn regroup_epochs(c: &ExperimentConfig) -> Vec<u64> {
    let s = generate_switch_schedule(100.0, c.duration_s, &mut RngStream::new(c.seed, SWITCH_STREAM).rng());
    s.epochs
        .iter()
        .skip(1)
        .step_by(2)
        .map(|t| (t / c.delta_t_s - 1e-9).ceil() as u64)
        .filter(|&n| n <= c.steps())
        .collect()
}

/// Whether epoch time `t` lies in a grouped phase at least `margin` seconds
/// from any toggle.
fn grouped_at(epochs: &[f64], t: f64, margin: f64) -> bool {
    let k = epochs.iter().filter(|&&e| e <= t).count();
    k % 2 == 0 && epochs.iter().all(|&e| (e - t).abs() > margin)
}

// 6
fn flexibility() -> Outcome {
    let c = switching(ExperimentConfig::reference_rpgm(), 2000.0, 1);
    let trace = run(&c).map_err(|e| e.to_string())?;
    let series: BTreeMap<u64, f64> = speed_series(&trace)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|(t, v)| ((t / c.delta_t_s).round() as u64, v))
        .collect();
    let regroups = regroup_epochs(&c);
    let spikes: Vec<f64> = regroups
        .iter()
        .map(|n| series.get(n).copied().unwrap_or(0.0).max(series.get(&(n + 1)).copied().unwrap_or(0.0)))
        .collect();
    let threshold = 3.0 * c.limits.v_max;
    let min_spike = spikes.iter().copied().fold(f64::INFINITY, f64::min);
    let mut ok = !spikes.is_empty() && min_spike > threshold;
    let mut parts = vec![format!(
        "rpgm: {} re-groupings, smallest spike {min_spike:.1} m/s (> {threshold})",
        spikes.len()
    )];
    for (name, model) in [("momo", ExperimentConfig::reference_momo()), ("rvgm", ExperimentConfig::reference_rvgm())] {
        let c = switching(model, 2000.0, 1);
        let trace = run(&c).map_err(|e| e.to_string())?;
        let r = violation_report(&trace, &c.limits).map_err(|e| e.to_string())?;
        let peak = speed_series(&trace)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|p| p.1)
            .fold(0.0, f64::max);
        ok &= r.speed_violation_pct == 0.0 && peak <= c.limits.v_max * (1.0 + 1e-9);
        parts.push(format!("{name}: peak {peak:.4} m/s, speed violations {}%", r.speed_violation_pct));
    }
    check(ok, parts.join("; "))
}

// 7
fn group_distance_separation() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, model) in [
        ("momo", ExperimentConfig::reference_momo()),
        ("rpgm", ExperimentConfig::reference_rpgm()),
        ("rvgm", ExperimentConfig::reference_rvgm()),
    ] {
        let (mut intra, mut overall) = (Vec::new(), Vec::new());
        for seed in 1..=5 {
            let c = switching(model, 10_000.0, seed);
            let epochs =
                generate_switch_schedule(100.0, c.duration_s, &mut RngStream::new(c.seed, SWITCH_STREAM).rng()).epochs;
            let trace = run(&c).map_err(|e| e.to_string())?;
            let (mut si, mut so, mut n) = (0.0, 0.0, 0usize);
            for (t, i, o) in distance_series(&trace, &c.groups) {
                if t >= 2000.0 && grouped_at(&epochs, t, 1.0) {
                    si += i;
                    so += o;
                    n += 1;
                }
            }
            intra.push(si / n as f64);
            overall.push(so / n as f64);
            if name != "rvgm" {
                ok &= si / so < 0.25;
            }
        }
        let ratio = mean(&intra) / mean(&overall);
        ok &= if name == "rvgm" { (ratio - 1.0).abs() <= 0.15 } else { ratio < 0.25 };
        parts.push(format!(
            "{name}: intra {:.1} m / overall {:.1} m = {ratio:.3}",
            mean(&intra),
            mean(&overall)
        ));
    }
    check(ok, parts.join("; "))
}

fn dmimo() -> &'static DmimoResults {
    static RES: OnceLock<DmimoResults> = OnceLock::new();
    RES.get_or_init(|| run_dmimo_experiment(&DmimoScenario::default(), Execution::default()).expect("default scenario"))
}

fn curve(res: &DmimoResults, f: Flavor, v: f64) -> &DecayCurves {
    res.curves
        .iter()
        .find(|c| c.flavor == f && c.v_max_mps == v)
        .expect("curve present")
}

// 8
fn random_overlap_baseline() -> Outcome {
    let res = dmimo();
    let exact = expected_random_overlap(12, 20);
    let mut ok = exact == 7.2;
    let mut parts = vec![format!("L^2/K = {exact}")];
    for f in [Flavor::Rpgm1, Flavor::Rpgm2] {
        for v in [1.0, 2.0] {
            let c = curve(res, f, v);
            let tail = &c.mean_surviving[1..];
            let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ok &= c.selections >= 200 && c.mean_surviving[0] == 12.0 && lo >= 6.9 && hi <= 7.5;
            parts.push(format!("{} v={v}: {lo:.3}..{hi:.3} over {} selections", f.name(), c.selections));
        }
    }
    check(ok, parts.join("; "))
}

const MONOTONE_TOL: f64 = 0.15;

// 9
fn dmimo_trends() -> Outcome {
    let res = dmimo();
    let mut ok = true;
    let mut parts = Vec::new();
    for f in [Flavor::Rw, Flavor::MoMo] {
        let slow = curve(res, f, 1.0);
        let fast = curve(res, f, 2.0);
        for c in [slow, fast] {
            let s = &c.mean_surviving;
            ok &= s.windows(2).all(|w| w[1] <= w[0] + MONOTONE_TOL) && s[s.len() - 1] < s[1];
            ok &= c.mean_rate_bps_hz[c.mean_rate_bps_hz.len() - 1] < c.mean_rate_bps_hz[0];
        }
        let early = slow.t_el_s.iter().zip(&slow.mean_surviving).filter(|(t, _)| **t <= 1.0 + 1e-9);
        let min_early = early.map(|(_, s)| *s).fold(f64::INFINITY, f64::min);
        ok &= min_early > 7.2;
        let below = fast.mean_surviving[1..]
            .iter()
            .zip(&slow.mean_surviving[1..])
            .all(|(a, b)| *a <= b + MONOTONE_TOL);
        let mean_gap = mean(&slow.mean_surviving[1..]) - mean(&fast.mean_surviving[1..]);
        ok &= below && mean_gap > 0.0;
        parts.push(format!(
            "{}: min over T_el<=1 s {min_early:.2}, end {:.2} (v=1) vs {:.2} (v=2)",
            f.name(),
            slow.mean_surviving[slow.mean_surviving.len() - 1],
            fast.mean_surviving[fast.mean_surviving.len() - 1]
        ));
    }
    for f in [Flavor::Rpgm1, Flavor::Rpgm2] {
        for v in [1.0, 2.0] {
            let r = &curve(res, f, v).mean_rate_bps_hz;
            ok &= r[1] < r[0];
        }
    }
    for v in [1.0, 2.0] {
        let r0: Vec<f64> = [Flavor::Rw, Flavor::MoMo, Flavor::Rpgm1, Flavor::Rpgm2]
            .iter()
            .map(|&f| curve(res, f, v).mean_rate_bps_hz[0])
            .collect();
        ok &= r0.windows(2).all(|w| w[0] >= w[1]);
        parts.push(format!(
            "rate at 0, v={v}: rw {:.3} >= momo {:.3} >= rpgm1 {:.3} >= rpgm2 {:.3}",
            r0[0], r0[1], r0[2], r0[3]
        ));
    }
    check(ok, parts.join("; "))
}

fn random_positions(rng: &mut SimRng, n: usize, side: f64) -> Vec<Position> {
    (0..n)
        .map(|_| Position::new(side * rng.random::<f64>(), side * rng.random::<f64>()))
        .collect()
}

// 10
fn oracle_equivalence() -> Outcome {
    let mut rng = RngStream::new(10, 0).rng();
    let metric = Metric::Euclidean;
    let trials = 1000;
    let mut mismatches = [0usize; 4];
    for _ in 0..trials {
        let n = rng.random_range(2..=10);
        let pos = random_positions(&mut rng, n, 100.0);
        let d_c = rng.random_range(5.0..80.0);
        let rho_min = rng.random_range(0.0..=1.0);
        let group = GroupSpec::new(0, (0..n).collect(), None).expect("non-empty");
        let params = MoMoParams { d_c, rho_min, delta_u: 1.0 };
        for i in 0..n {
            // connected set by exhaustive pair scan
            let dist: Vec<f64> = pos
                .iter()
                .map(|p| ((p.x - pos[i].x).powi(2) + (p.y - pos[i].y).powi(2)).sqrt())
                .collect();
            let brute: Vec<usize> = (0..n).filter(|&j| j != i && dist[j] <= d_c).collect();
            let got = momo_connected_set(i, &group, &pos, d_c, &metric);
            mismatches[0] += usize::from(got != brute);
            let rho = brute.len() as f64 / (n - 1) as f64;
            mismatches[1] += usize::from(momo_grouping_factor(got.len(), n) != rho);
            let want_mode = if rho >= rho_min {
                NodeMode::Free
            } else {
                let mut best: Option<usize> = None;
                for j in (0..n).filter(|j| *j != i && !brute.contains(j)) {
                    if best.is_none_or(|b| dist[j] < dist[b]) {
                        best = Some(j);
                    }
                }
                NodeMode::Forced {
                    target: best.expect("some mate unconnected"),
                }
            };
            let mode = momo_check_and_set_mode(i, &group, &pos, &params, &metric).expect("member");
            mismatches[1] += usize::from(mode != want_mode);
        }
    }
    // relay selection against exhaustive subset search
    let channel = ChannelModel::default();
    for _ in 0..trials {
        let k = rng.random_range(1..=6);
        let l = rng.random_range(1..=k);
        let n_rx = rng.random_range(1..=4);
        let cand = random_positions(&mut rng, k, 20.0);
        let rx = random_positions(&mut rng, n_rx, 20.0);
        let score: Vec<f64> = cand
            .iter()
            .map(|c| rx.iter().map(|r| c.distance(r).max(0.1).powf(-channel.pathloss_exponent)).sum())
            .collect();
        let mut best: Option<(f64, Vec<usize>)> = None;
        for mask in 0u32..(1 << k) {
            if mask.count_ones() as usize != l {
                continue;
            }
            let ids: Vec<usize> = (0..k).filter(|&j| mask & (1 << j) != 0).collect();
            let total: f64 = ids.iter().map(|&j| score[j]).sum();
            let better = match &best {
                None => true,
                Some((b, bids)) => {
                    total > b * (1.0 + 1e-12) || ((total - b).abs() <= 1e-12 * b.abs() && ids < *bids)
                }
            };
            if better {
                best = Some((total, ids));
            }
        }
        let got = select_relays(&cand, &rx, l, &channel, &mut rng);
        mismatches[2] += usize::from(got != best.expect("k >= l").1);
    }
    // group distances against a full distance matrix
    for _ in 0..trials {
        let n = rng.random_range(2..=10);
        let pos = random_positions(&mut rng, n, 100.0);
        let split = rng.random_range(1..n);
        let groups = vec![
            GroupSpec::new(0, (0..split).collect(), None).expect("non-empty"),
            GroupSpec::new(1, (split..n).collect(), None).expect("non-empty"),
        ];
        let map: BTreeMap<usize, Position> = pos.iter().copied().enumerate().collect();
        let (intra, overall) = group_distances_at(&map, &groups, &metric);
        let (mut si, mut ni, mut so, mut no) = (0.0, 0, 0.0, 0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = pos[i].distance(&pos[j]);
                so += d;
                no += 1;
                if (i < split) == (j < split) {
                    si += d;
                    ni += 1;
                }
            }
        }
        let bi = if ni == 0 { 0.0 } else { si / ni as f64 };
        let bo = so / no as f64;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
        mismatches[3] += usize::from(!close(intra, bi) || !close(overall, bo));
    }
    check(
        mismatches.iter().all(|&m| m == 0),
        format!(
            "{trials} trials each; mismatches: connected set {}, grouping factor/mode {}, relay selection {}, group distances {}",
            mismatches[0], mismatches[1], mismatches[2], mismatches[3]
        ),
    )
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn momo_sim(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_momo-sim"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn run_all_commands(dir: &Path) -> Result<String, String> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let cfg = configs_dir().join("reference_rpgm.toml").to_string_lossy().into_owned();
    let small = DmimoScenario {
        selections: 40,
        replicas: 2,
        ..DmimoScenario::default()
    };
    let scenario = momo_core::config::DmimoDocument::from_scenario(&small)
        .to_toml()
        .map_err(|e| e.to_string())?;
    std::fs::write(dir.join("scenario.toml"), scenario).map_err(|e| e.to_string())?;
    let mut stdout = String::new();
    stdout += &momo_sim(&["simulate", "--config", &cfg, "--out", &p("trace.csv"), "--seed", "7"])?;
    stdout += &momo_sim(&["metrics", &p("trace.csv"), "--config", &cfg, "--plot-data", &p("plot"), "--out", &p("report.txt")])?;
    stdout += &momo_sim(&["sweep", "--config", &cfg, "--grid", "delta_t_s=0.5,2;distance_m=15,60", "--out", &p("sweep.csv"), "--seed", "7"])?;
    stdout += &momo_sim(&["dmimo", "--config", &p("scenario.toml"), "--out", &p("dmimo")])?;
    stdout += &momo_sim(&["export-ns2", &p("trace.csv"), "--config", &cfg, "--out", &p("trace.ns2")])?;
    Ok(stdout)
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).expect("readable").flatten() {
            let path = e.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).expect("inside").to_path_buf();
                out.insert(rel, std::fs::read(&path).expect("readable"));
            }
        }
    }
    out
}

// 11
fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out_a = run_all_commands(a.path())?;
    let out_b = run_all_commands(b.path())?;
    let fa = files(a.path());
    let fb = files(b.path());
    let differing: Vec<String> = fa
        .iter()
        .filter(|(k, v)| fb.get(*k) != Some(v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    let bytes: usize = fa.values().map(Vec::len).sum();
    check(
        fa.len() == fb.len() && fa.len() >= 20 && differing.is_empty() && out_a == out_b,
        format!(
            "{} output files ({bytes} bytes) from 5 commands; differing: {:?}; stdout identical: {}",
            fa.len(),
            differing,
            out_a == out_b
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("MoMo accuracy", momo_accuracy),
        ("RPGM speed violations", rpgm_speed),
        ("rotation violations", rotation_violations),
        ("RVGM/MoMo speed compliance", speed_compliance),
        ("MoMo average-speed trend", momo_average_speed),
        ("flexibility under switching", flexibility),
        ("group-distance separation", group_distance_separation),
        ("random-overlap baseline", random_overlap_baseline),
        ("D-MIMO decay trends", dmimo_trends),
        ("oracle equivalence", oracle_equivalence),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} [{tag}] {name}: {detail} ({secs:.1}s)", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
