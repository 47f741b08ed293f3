use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use motionseg::experiments::{accuracy_vs_displacement, compare_methods, random_packet, throughput_benchmark, CurveConfig};
use motionseg::io::{
    cluster_iwe, format_metrics_csv, format_params_csv, read_associations_csv, read_events_text, read_truth, write_associations_csv, write_labeled,
    write_segmentation_ppm, MetricRow, RunConfig,
};
use motionseg::sim::{into_packet, preset_fan_and_coin, preset_two_pebbles};
use motionseg::solver::layered::segment_packets;
use motionseg::{
    per_event_accuracy, segment_with, simulate as render, sliding_windows, validate_packet, EventPacket, ImageGeometry, Method, SegmentationResult,
    SimConfig, SolverConfig,
};

use crate::{BenchArgs, CompareArgs, CurveArgs, EvalArgs, SegmentArgs, SimulateArgs, SolverArgs};

/// A mistake in how the program was invoked, as opposed to bad data.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    Usage(message.into()).into()
}

/// 1 for usage and configuration errors, 2 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    let is_usage = e
        .chain()
        .any(|c| c.is::<Usage>() || matches!(c.downcast_ref::<motionseg::Error>(), Some(motionseg::Error::Config(_))));
    if is_usage {
        1
    } else {
        2
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let mut rc = RunConfig::default();
    if let Some(path) = path {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        rc.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
    }
    Ok(rc)
}

fn run_config(a: &SolverArgs) -> Result<RunConfig> {
    let mut rc = load_config(a.config.as_deref())?;
    let flags: [(&str, Option<String>); 10] = [
        ("j", a.j.map(|v| v.to_string())),
        ("model", a.model.clone()),
        ("method", a.method.clone()),
        ("window", a.window.map(|v| v.to_string())),
        ("stride", a.stride.map(|v| v.to_string())),
        ("sigma", a.sigma.map(|v| v.to_string())),
        ("mu", a.mu.map(|v| v.to_string())),
        ("max_iters", a.max_iters.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
        ("workers", a.workers.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            rc.set(key, &v)?;
        }
    }
    rc.validate()?;
    if rc.window_events == Some(0) || rc.stride_events == Some(0) {
        return Err(usage("window and stride must be at least one event"));
    }
    if let Some(w) = rc.workers {
        if w == 0 {
            return Err(usage("workers must be at least 1"));
        }
        // Only the first pool request in a process can take effect.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    Ok(rc)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_packet(path: &Path, geometry: Option<ImageGeometry>) -> Result<EventPacket> {
    let packet = read_events_text(path, geometry).with_context(|| format!("reading {}", path.display()))?;
    Ok(validate_packet(packet, true)?)
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let rc = load_config(a.config.as_deref())?;
    let mut sim = rc.sim.unwrap_or_default();
    if let Some(seed) = a.seed.or((rc.seed != 0).then_some(rc.seed)) {
        sim.seed = seed;
    }
    if let Some(noise) = a.noise {
        sim.noise_rate = noise;
    }
    let geometry = ImageGeometry::new(a.width, a.height)?;
    let scene = match a.preset.as_str() {
        "two_pebbles" => {
            let speed = if a.dv > 0.0 { a.dv } else { a.base_v };
            sim.duration = a.duration.unwrap_or(a.displacement / speed);
            preset_two_pebbles(a.dv, a.base_v, geometry, &sim)
        }
        "fan_and_coin" => {
            sim.duration = a.duration.unwrap_or(0.2);
            preset_fan_and_coin(a.omega, a.v, geometry, &sim)
        }
        other => return Err(usage(format!("unknown preset '{other}' (two_pebbles, fan_and_coin)"))),
    };
    sim.validate()?;
    let events = render(&scene, &sim, geometry)?;
    if events.is_empty() {
        bail!("the scene produced no events");
    }
    let (_, truth) = into_packet(&events, &scene, geometry);
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_labeled(&a.out.join("events.txt"), &a.out.join("truth.txt"), &events, &truth, geometry)?;
    let noise = truth.labels.iter().filter(|&&l| l == 0).count();
    println!(
        "{} events ({noise} noise) over {:.4} s written to {}",
        events.len(),
        sim.duration,
        a.out.display()
    );
    Ok(())
}

fn write_result(dir: &Path, result: &SegmentationResult, packet: &EventPacket) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let clusters = &result.clusters;
    fs::write(dir.join("params.csv"), format_params_csv(clusters))?;
    write_associations_csv(&dir.join("assoc.csv"), &result.associations, clusters)?;
    write_segmentation_ppm(&dir.join("seg.ppm"), &result.associations, clusters, packet)?;
    for j in clusters.live() {
        let image = cluster_iwe(&result.associations, clusters, packet, j);
        fs::write(dir.join(format!("cluster_{}.pgm", j + 1)), image.to_pgm())?;
    }
    Ok(())
}

fn summary(result: &SegmentationResult) -> String {
    let mut s = format!(
        "{}: {} of {} clusters live after {} iterations, objective {:.6}",
        result.method.name(),
        result.clusters.live_count(),
        result.clusters.len(),
        result.iterations,
        result.final_objective()
    );
    for j in result.clusters.live() {
        let _ = write!(
            s,
            "\n  cluster {}: {} (mass {:.1})",
            j + 1,
            result.clusters.params[j],
            result.associations.column_mass(j)
        );
    }
    s
}

pub fn segment(a: SegmentArgs) -> Result<()> {
    let rc = run_config(&a.solver)?;
    let geometry = match (a.width, a.height) {
        (Some(w), Some(h)) => Some(ImageGeometry::new(w, h)?),
        _ => None,
    };
    let packet = read_packet(&a.input, geometry)?;
    let Some(window) = rc.window_events else {
        let result = segment_with(rc.method, &packet, rc.j, &rc.models, &rc.solver)?;
        write_result(&a.out, &result, &packet)?;
        println!("{}", summary(&result));
        return Ok(());
    };
    let stride = rc.stride_events.unwrap_or_else(|| motionseg::event::default_stride(window));
    let packets = sliding_windows(&packet.events, packet.geometry, window, stride);
    if packets.is_empty() {
        bail!("{} events are fewer than one window of {window}", packet.len());
    }
    let results = match rc.method {
        Method::Layered => segment_packets(&packets, rc.j, &rc.models, &rc.solver)?,
        method => packets
            .iter()
            .map(|p| segment_with(method, p, rc.j, &rc.models, &rc.solver))
            .collect::<motionseg::Result<_>>()?,
    };
    for (n, (result, p)) in results.iter().zip(&packets).enumerate() {
        write_result(&a.out.join(format!("window_{n:03}")), result, p)?;
        println!("window {n}: {}", summary(result));
    }
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let assoc = read_associations_csv(&a.assoc).with_context(|| format!("reading {}", a.assoc.display()))?;
    let truth = read_truth(&a.truth).with_context(|| format!("reading {}", a.truth.display()))?;
    let report = per_event_accuracy(&assoc, &truth.labels, assoc.clusters())?;
    let mut rows = vec![
        MetricRow::new("eval", "all", "accuracy", report.accuracy),
        MetricRow::new("eval", "all", "evaluated", report.evaluated as f64),
    ];
    for (j, (mass, label)) in report.per_cluster_mass.iter().zip(&report.matching).enumerate() {
        rows.push(MetricRow::new("eval", format!("cluster_{}", j + 1), "mass", *mass));
        rows.push(MetricRow::new(
            "eval",
            format!("cluster_{}", j + 1),
            "matched_label",
            label.unwrap_or(0) as f64,
        ));
    }
    let csv = format_metrics_csv(&rows);
    print!("{csv}");
    if let Some(out) = &a.out {
        fs::write(out, &csv).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<()> {
    if a.j.is_empty() || a.j.contains(&0) {
        return Err(usage("--j needs cluster counts of at least 1"));
    }
    if a.events == 0 || a.max_iters == 0 {
        return Err(usage("--events and --max-iters must be positive"));
    }
    let geometry = ImageGeometry::new(a.width, a.height)?;
    let packet = random_packet(a.events, geometry, a.seed);
    let config = SolverConfig {
        max_iters: a.max_iters,
        ..SolverConfig::default()
    };
    let rows = throughput_benchmark(&a.j, &packet, &config, a.runs)?;
    let mut csv = String::from("j,events,iterations,median_seconds,kev_per_s\n");
    for r in rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.j, r.events, r.iterations, r.median_seconds, r.kev_per_s);
    }
    emit(a.out.as_deref(), &csv)
}

pub fn compare(a: CompareArgs) -> Result<()> {
    let rc = run_config(&a.solver)?;
    let (packet, labels) = match &a.input {
        Some(path) => {
            let packet = read_packet(path, None)?;
            let labels = a.truth.as_deref().map(read_truth).transpose()?.map(|t| t.labels);
            (packet, labels)
        }
        None => {
            if a.truth.is_some() {
                return Err(usage("--truth needs --in"));
            }
            if a.dv.is_nan() || a.dv <= 0.0 {
                return Err(usage("--dv must be positive"));
            }
            let geometry = ImageGeometry::new(96, 72)?;
            let sim = SimConfig {
                duration: 8.0 / a.dv,
                seed: rc.seed,
                ..SimConfig::default()
            };
            let scene = preset_two_pebbles(a.dv, 50.0, geometry, &sim);
            let (packet, truth) = into_packet(&render(&scene, &sim, geometry)?, &scene, geometry);
            (packet, Some(truth.labels))
        }
    };
    let config = SolverConfig {
        fixed_iterations: true,
        ..rc.solver.clone()
    };
    let runs = compare_methods(&packet, labels.as_deref(), rc.j, &rc.models, &config)?;
    let mut csv = String::from("method,iteration,sum_of_contrasts,method_objective,warps\n");
    for run in &runs {
        for (i, ((c, m), w)) in run.objective_trace.iter().zip(&run.method_trace).zip(&run.warp_counts).enumerate() {
            let _ = writeln!(csv, "{},{},{},{},{}", run.method.name(), i, c, m, w);
        }
        let accuracy = run.accuracy.map_or(String::from("n/a"), |v| format!("{v:.4}"));
        eprintln!(
            "{}: sum of contrasts {:.6} after {} iterations, accuracy {accuracy}",
            run.method.name(),
            run.final_objective(),
            run.iterations
        );
    }
    emit(a.out.as_deref(), &csv)
}

pub fn curve(a: CurveArgs) -> Result<()> {
    if a.dv.iter().any(|v| v.is_nan() || *v < 0.0) || a.displacements.iter().any(|d| d.is_nan() || *d <= 0.0) {
        return Err(usage("velocities must be non-negative and displacements positive"));
    }
    let mut cfg = CurveConfig {
        base_v: a.base_v,
        ..CurveConfig::default()
    };
    if let Some(seed) = a.seed {
        cfg.sim.seed = seed;
        cfg.solver.init.seed = seed;
    }
    let points = accuracy_vs_displacement(&a.dv, &a.displacements, &cfg)?;
    let mut csv = String::from("delta_v,displacement_px,window_s,events,accuracy,degenerate,seconds\n");
    for p in points {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            p.delta_v, p.displacement_px, p.window_s, p.events, p.accuracy, p.degenerate, p.seconds
        );
    }
    emit(a.out.as_deref(), &csv)
}
