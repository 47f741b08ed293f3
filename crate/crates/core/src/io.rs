//! Text event files, ground-truth sidecars, result CSVs, PPM/PGM images and
//! key=value run configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::event::{Event, EventPacket, ImageGeometry, Polarity};
use crate::iwe::{splat, Iwe, Voting};
use crate::sim::{GroundTruth, LabeledEvent, SimConfig};
use crate::solver::config::SolverConfig;
use crate::solver::types::{AssociationMatrix, ClusterSet, Method};
use crate::warp::{warp_packet, WarpModel, WarpParams, MAX_PARAMS};

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_header(line: &str) -> Option<ImageGeometry> {
    let words: Vec<&str> = line.trim_start_matches('#').split_whitespace().collect();
    match words.as_slice() {
        ["width", w, "height", h] => ImageGeometry::new(w.parse().ok()?, h.parse().ok()?).ok(),
        _ => None,
    }
}

/// Parses events in the `t x y p` text format. `path` only labels errors.
/// Lines starting with `#` are comments; `# width W height H` declares the
/// geometry unless `geometry` overrides it. Polarity is `0`/`1` or `-1`/`1`.
pub fn parse_events_text(text: &str, path: &Path, geometry: Option<ImageGeometry>) -> Result<EventPacket> {
    let mut declared = None;
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if declared.is_none() {
                declared = parse_header(line);
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(path, i + 1, format!("expected 't x y p', found {} fields", fields.len())));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, i + 1, format!("invalid {what} '{s}'")))
        };
        let (t, x, y) = (num(fields[0], "timestamp")?, num(fields[1], "x")?, num(fields[2], "y")?);
        let polarity = match fields[3] {
            "1" | "+1" => Polarity::Positive,
            "0" | "-1" => Polarity::Negative,
            p => return Err(parse_err(path, i + 1, format!("invalid polarity '{p}'"))),
        };
        events.push(Event::new(x, y, t, polarity));
    }
    let geometry = geometry.or(declared).ok_or_else(|| Error::MissingGeometry { path: path.to_path_buf() })?;
    Ok(EventPacket::new(events, geometry))
}

pub fn read_events_text(path: &Path, geometry: Option<ImageGeometry>) -> Result<EventPacket> {
    parse_events_text(&fs::read_to_string(path)?, path, geometry)
}

/// Formats events with shortest round-trip decimals, polarity as `1`/`0`.
pub fn format_events_text(events: &[Event], geometry: ImageGeometry) -> String {
    let mut s = format!("# width {} height {}\n", geometry.width, geometry.height);
    for e in events {
        let p = if e.polarity == Polarity::Positive { 1 } else { 0 };
        let _ = writeln!(s, "{} {} {} {}", e.t, e.x, e.y, p);
    }
    s
}

pub fn write_events_text(path: &Path, events: &[Event], geometry: ImageGeometry) -> Result<()> {
    Ok(fs::write(path, format_events_text(events, geometry))?)
}

fn format_params(p: &WarpParams) -> String {
    let mut s = p.model.name().to_string();
    for v in p.theta() {
        let _ = write!(s, " {v}");
    }
    s
}

fn parse_params(words: &[&str]) -> Option<WarpParams> {
    let model = WarpModel::from_str(words.first()?).ok()?;
    let theta: Vec<f64> = words[1..].iter().map(|w| w.parse().ok()).collect::<Option<_>>()?;
    (theta.len() == model.param_count()).then(|| WarpParams::new(model, &theta))
}

/// Sidecar with one `# theta_j model values...` line per object followed by
/// one label per event.
pub fn format_truth(truth: &GroundTruth) -> String {
    let mut s = String::new();
    for (j, p) in truth.params.iter().enumerate() {
        let _ = writeln!(s, "# theta_{} {}", j + 1, format_params(p));
    }
    for l in &truth.labels {
        let _ = writeln!(s, "{l}");
    }
    s
}

pub fn write_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    Ok(fs::write(path, format_truth(truth))?)
}

pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path)?;
    let mut truth = GroundTruth {
        labels: Vec::new(),
        params: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let words: Vec<&str> = rest.split_whitespace().collect();
            if words.first().is_some_and(|w| w.starts_with("theta_")) {
                let p = parse_params(&words[1..]).ok_or_else(|| parse_err(path, i + 1, "invalid theta line"))?;
                truth.params.push(p);
            }
            continue;
        }
        truth
            .labels
            .push(line.parse().map_err(|_| parse_err(path, i + 1, format!("invalid label '{line}'")))?);
    }
    Ok(truth)
}

/// Writes the events and their ground truth side by side.
pub fn write_labeled(events_path: &Path, truth_path: &Path, events: &[LabeledEvent], truth: &GroundTruth, geometry: ImageGeometry) -> Result<()> {
    let plain: Vec<Event> = events.iter().map(|e| e.event).collect();
    write_events_text(events_path, &plain, geometry)?;
    write_truth(truth_path, truth)
}

/// One row per event with columns `p_1..p_J`, preceded by a comment naming
/// the live clusters (1-based).
pub fn format_associations_csv(assoc: &AssociationMatrix, clusters: &ClusterSet) -> String {
    let live: Vec<String> = clusters.live().map(|j| (j + 1).to_string()).collect();
    let mut s = format!("# live {}\n", live.join(" "));
    let header: Vec<String> = (1..=assoc.clusters()).map(|j| format!("p_{j}")).collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for k in 0..assoc.events() {
        let row: Vec<String> = assoc.row(k).iter().map(f64::to_string).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn write_associations_csv(path: &Path, assoc: &AssociationMatrix, clusters: &ClusterSet) -> Result<()> {
    Ok(fs::write(path, format_associations_csv(assoc, clusters))?)
}

pub fn read_associations_csv(path: &Path) -> Result<AssociationMatrix> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    let mut header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header {
            header = true;
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse().map_err(|_| parse_err(path, i + 1, format!("invalid probability '{v}'"))))
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    AssociationMatrix::from_rows(&rows)
}

/// `cluster,model,alive,theta_1..theta_4`; unused parameters are empty.
pub fn format_params_csv(clusters: &ClusterSet) -> String {
    let mut s = String::from("cluster,model,alive,theta_1,theta_2,theta_3,theta_4\n");
    for (j, p) in clusters.params.iter().enumerate() {
        let mut cells = vec![(j + 1).to_string(), p.model.name().to_string(), clusters.alive[j].to_string()];
        cells.extend((0..MAX_PARAMS).map(|i| p.theta().get(i).map_or(String::new(), f64::to_string)));
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn write_params_csv(path: &Path, clusters: &ClusterSet) -> Result<()> {
    Ok(fs::write(path, format_params_csv(clusters))?)
}

/// Color of cluster `j`: a fixed table, then golden-angle hues.
pub fn palette(j: usize) -> [f64; 3] {
    const TABLE: [[f64; 3]; 8] = [
        [1.0, 0.25, 0.2],
        [0.2, 0.55, 1.0],
        [0.3, 0.9, 0.3],
        [1.0, 0.8, 0.1],
        [0.8, 0.3, 1.0],
        [0.1, 0.9, 0.9],
        [1.0, 0.5, 0.1],
        [0.9, 0.9, 0.9],
    ];
    if j < TABLE.len() {
        return TABLE[j];
    }
    let h = (j as f64 * 0.618_033_988_749_895).fract() * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    match h as usize {
        0 => [1.0, x, 0.0],
        1 => [x, 1.0, 0.0],
        2 => [0.0, 1.0, x],
        3 => [0.0, x, 1.0],
        4 => [x, 0.0, 1.0],
        _ => [1.0, 0.0, x],
    }
}

/// Weighted IWE of cluster `j` under its own warp, without smoothing.
pub fn cluster_iwe(assoc: &AssociationMatrix, clusters: &ClusterSet, packet: &EventPacket, j: usize) -> Iwe {
    let g = packet.geometry;
    let mut pixels = vec![0.0; g.pixel_count()];
    for (k, p) in warp_packet(packet, &clusters.params[j]).iter().enumerate() {
        let w = assoc.get(k, j);
        if w > 0.0 {
            splat(&mut pixels, g, p[0], p[1], w, Voting::Bilinear);
        }
    }
    Iwe::from_pixels(pixels, g)
}

/// Merged visualization: every cluster's weighted IWE tinted with its
/// palette color, summed and scaled by the brightest cluster pixel.
pub fn segmentation_ppm(assoc: &AssociationMatrix, clusters: &ClusterSet, packet: &EventPacket) -> Vec<u8> {
    let g = packet.geometry;
    let images: Vec<Iwe> = (0..clusters.len()).map(|j| cluster_iwe(assoc, clusters, packet, j)).collect();
    let peak = images.iter().map(Iwe::max).fold(0.0, f64::max);
    let mut rgb = vec![[0.0f64; 3]; g.pixel_count()];
    if peak > 0.0 {
        for (j, img) in images.iter().enumerate() {
            let c = palette(j);
            for (px, v) in rgb.iter_mut().zip(&img.pixels) {
                for ch in 0..3 {
                    px[ch] += c[ch] * v / peak;
                }
            }
        }
    }
    let mut out = format!("P6\n{} {}\n255\n", g.width, g.height).into_bytes();
    for px in rgb {
        out.extend(px.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    out
}

pub fn write_segmentation_ppm(path: &Path, assoc: &AssociationMatrix, clusters: &ClusterSet, packet: &EventPacket) -> Result<()> {
    Ok(fs::write(path, segmentation_ppm(assoc, clusters, packet))?)
}

/// One row of experiment output.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub experiment: String,
    pub parameter: String,
    pub metric: String,
    pub value: f64,
}

impl MetricRow {
    pub fn new(experiment: &str, parameter: impl Into<String>, metric: &str, value: f64) -> Self {
        Self {
            experiment: experiment.into(),
            parameter: parameter.into(),
            metric: metric.into(),
            value,
        }
    }
}

pub fn format_metrics_csv(rows: &[MetricRow]) -> String {
    let mut s = String::from("experiment,parameter,metric,value\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.experiment, r.parameter, r.metric, r.value);
    }
    s
}

/// Everything a CLI run needs, parsed from key=value files and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub j: usize,
    pub models: Vec<WarpModel>,
    pub window_events: Option<usize>,
    pub stride_events: Option<usize>,
    pub solver: SolverConfig,
    pub sim: Option<SimConfig>,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::Layered,
            j: 2,
            models: vec![WarpModel::Flow2],
            window_events: None,
            stride_events: None,
            solver: SolverConfig::default(),
            sim: None,
            seed: 0,
            workers: None,
        }
    }
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("invalid value '{v}' for '{key}'")))
}

impl RunConfig {
    /// Applies one setting. Unknown keys are errors.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let sim = || self.sim.clone().unwrap_or_default();
        match key {
            "method" => self.method = value(key, v)?,
            "j" => self.j = value(key, v)?,
            "model" | "models" => {
                self.models = v.split(',').map(|m| WarpModel::from_str(m.trim())).collect::<Result<_>>()?;
            }
            "window" => self.window_events = Some(value(key, v)?),
            "stride" => self.stride_events = Some(value(key, v)?),
            "sigma" => self.solver.sigma = value(key, v)?,
            "mu" | "step_mu" => self.solver.step_mu = value(key, v)?,
            "max_iters" => self.solver.max_iters = value(key, v)?,
            "rel_tol" => self.solver.rel_tol = value(key, v)?,
            "epsilon_c" => self.solver.epsilon_c = value(key, v)?,
            "collapse_frac" => self.solver.collapse_frac = value(key, v)?,
            "merge" => self.solver.merge = value(key, v)?,
            "merge_focus" => self.solver.merge_focus = value(key, v)?,
            "fuzzy_b" => self.solver.fuzzy_b = value(key, v)?,
            "seed" => {
                self.seed = value(key, v)?;
                self.solver.init.seed = self.seed;
                if let Some(s) = self.sim.as_mut() {
                    s.seed = self.seed;
                }
            }
            "workers" => self.workers = Some(value(key, v)?),
            "contrast_threshold" => {
                let mut s = sim();
                s.contrast_threshold = value(key, v)?;
                self.sim = Some(s);
            }
            "duration" => {
                let mut s = sim();
                s.duration = value(key, v)?;
                self.sim = Some(s);
            }
            "timestamp_jitter" => {
                let mut s = sim();
                s.timestamp_jitter = value(key, v)?;
                self.sim = Some(s);
            }
            "noise_rate" => {
                let mut s = sim();
                s.noise_rate = value(key, v)?;
                self.sim = Some(s);
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a `key = value` document; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.j == 0 {
            return Err(Error::Config("J must be at least 1".into()));
        }
        crate::solver::types::expand_models(&self.models, self.j)?;
        self.solver.validate()?;
        if let Some(s) = &self.sim {
            s.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("ev.txt")
    }

    #[test]
    fn parses_documented_lines() {
        let pk = parse_events_text("# width 32 height 24\n0.000001 10 20 1\n0.5 3.25 7.0 0\n", p(), None).unwrap();
        assert_eq!(pk.events[0], Event::new(10.0, 20.0, 1e-6, Polarity::Positive));
        assert_eq!(pk.events[1], Event::new(3.25, 7.0, 0.5, Polarity::Negative));
        assert_eq!(pk.geometry, ImageGeometry::new(32, 24).unwrap());
        let lit = parse_events_text("0.1 1 1 -1\n", p(), ImageGeometry::new(4, 4).ok()).unwrap();
        assert_eq!(lit.events[0].polarity, Polarity::Negative);
    }

    #[test]
    fn malformed_line_names_line() {
        let err = parse_events_text("# width 4 height 4\n0.1 1 1 1\n0.5 3\n", p(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        assert!(matches!(parse_events_text("0.1 1 1 1\n", p(), None), Err(Error::MissingGeometry { .. })));
        assert!(matches!(
            parse_events_text("# width 4 height 4\n0.1 1 1 2\n", p(), None),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn config_text_overrides() {
        let mut rc = RunConfig::default();
        rc.apply_text("method = fuzzy\nj = 3 # clusters\nmodels = flow2, rotation, fourdof\nsigma=2\n")
            .unwrap();
        assert_eq!(rc.method, Method::Fuzzy);
        assert_eq!(rc.j, 3);
        assert_eq!(rc.models, vec![WarpModel::Flow2, WarpModel::Rotation, WarpModel::FourDof]);
        assert_eq!(rc.solver.sigma, 2.0);
        rc.validate().unwrap();
        assert!(rc.apply_text("bogus = 1").is_err());
        assert!(rc.apply_text("j 2").is_err());
        rc.set("j", "2").unwrap();
        assert!(rc.validate().is_err());
    }

    #[test]
    fn empty_packet_is_black() {
        let g = ImageGeometry::new(3, 2).unwrap();
        let pk = EventPacket::new(Vec::new(), g);
        let img = segmentation_ppm(
            &AssociationMatrix::uniform(0, 2),
            &ClusterSet::new(vec![WarpParams::flow(0.0, 0.0); 2]),
            &pk,
        );
        let header = b"P6\n3 2\n255\n";
        assert_eq!(&img[..header.len()], header);
        assert!(img[header.len()..].iter().all(|&b| b == 0));
        assert_eq!(img.len(), header.len() + 18);
    }

    #[test]
    fn single_cluster_is_single_hue() {
        let g = ImageGeometry::new(4, 4).unwrap();
        let pk = EventPacket::new(
            vec![
                Event::new(1.0, 1.0, 0.0, Polarity::Positive),
                Event::new(2.0, 2.0, 0.0, Polarity::Positive),
            ],
            g,
        );
        let img = segmentation_ppm(&AssociationMatrix::uniform(2, 1), &ClusterSet::new(vec![WarpParams::flow(0.0, 0.0)]), &pk);
        let body = &img[b"P6\n4 4\n255\n".len()..];
        let c = palette(0);
        for px in body.chunks(3) {
            let v = px[0] as f64 / 255.0;
            assert_eq!(px[1], (v * c[1] / c[0] * 255.0).round() as u8);
        }
        assert!(body.iter().any(|&b| b > 0));
    }
}
