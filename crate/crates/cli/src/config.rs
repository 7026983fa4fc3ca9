//! Experiment configuration: UTF-8 sections of `key = value` lines.
//!
//! Grammar:
//!   - `[section]` headers group keys; `#` starts a comment anywhere;
//!   - every entry is `key = value` on one line; values are numbers,
//!     words, comma-separated lists or ranges `a..b`;
//!   - unknown sections or keys are rejected, as are out-of-range values;
//!   - referenced files must exist at parse time.
//!
//! `emit()` writes a canonical form; parse(emit(parse(t))) == parse(t).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceSpec {
    Torus {
        period_u: f64,
        period_v: f64,
        /// grid cells per axis per mode index (mode m uses grid * m)
        grid: usize,
    },
    Sphere {
        subdivisions: u32,
    },
    Mesh {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EigenSpec {
    /// closed-form family sweep: torus modes m or zonal degrees l
    ClosedForm { modes: Vec<u32>, cosine: bool },
    Fem { count: usize, shift: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub surface: SurfaceSpec,
    pub eigen: EigenSpec,
    /// pixel spacing: None = 1/sqrt(lambda)
    pub spacing: Option<f64>,
    pub radius_factor: f64,
    /// Harnack eps grid as fractions of ||u||_inf
    pub harnack_eps: Vec<f64>,
    /// Bernstein eps as a fraction of ||u||_inf
    pub bernstein_eps: f64,
    pub dong_eps_rel: f64,
    /// Hardy sweep resolutions (last one is the headline estimate)
    pub hardy_resolutions: Vec<usize>,
    pub hardy_box_half: f64,
    pub log_deltas: Vec<f64>,
    pub log_resolution: usize,
    pub loja_degrees: Vec<u32>,
    pub loja_samples: usize,
    pub harmapprox_resolution: usize,
    pub harmapprox_iterations: usize,
    pub harmapprox_scale: f64,
    pub phase_sphere_l: u32,
    pub output_dir: PathBuf,
    // check-mode thresholds
    pub check_slope_window: f64,
    pub check_length_rel: f64,
    pub check_c20_max: f64,
    pub check_bernstein_band: f64,
    pub check_density_band: f64,
    pub check_hardy_window: (f64, f64),
}

impl Default for Config {
    fn default() -> Self {
        Config {
            surface: SurfaceSpec::Torus {
                period_u: 1.0,
                period_v: 1.0,
                grid: 64,
            },
            eigen: EigenSpec::ClosedForm {
                modes: (1..=8).collect(),
                cosine: false,
            },
            spacing: None,
            radius_factor: 1.2,
            harnack_eps: vec![0.5],
            bernstein_eps: 0.1,
            dong_eps_rel: 1e-3,
            hardy_resolutions: vec![16, 32, 48, 64],
            hardy_box_half: 1.0,
            log_deltas: vec![1e-2, 1e-3, 1e-4],
            log_resolution: 384,
            loja_degrees: vec![2, 3, 4],
            loja_samples: 20_000,
            harmapprox_resolution: 48,
            harmapprox_iterations: 6,
            harmapprox_scale: 0.4,
            phase_sphere_l: 20,
            output_dir: PathBuf::from("out"),
            check_slope_window: 0.02,
            check_length_rel: 0.01,
            check_c20_max: 2.2,
            check_bernstein_band: 3.0,
            check_density_band: 4.0,
            check_hardy_window: (3.4, 4.2),
        }
    }
}

pub fn parse(text: &str) -> Result<Config> {
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            current = line[1..line.len() - 1].trim().to_string();
            sections.entry(current.clone()).or_default();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
        if current.is_empty() {
            bail!("line {}: key outside any [section]", lineno + 1);
        }
        sections
            .get_mut(&current)
            .unwrap()
            .insert(key.trim().to_string(), value.trim().to_string());
    }

    let known_sections = [
        "surface", "eigen", "pixels", "dong", "harnack", "bernstein", "hardy", "loja",
        "harmapprox", "phase", "output", "check",
    ];
    for name in sections.keys() {
        if !known_sections.contains(&name.as_str()) {
            bail!("unknown section [{name}]");
        }
    }

    let mut cfg = Config::default();
    let mut consumed: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut get = |section: &str, key: &str| -> Option<String> {
        let v = sections.get(section).and_then(|s| s.get(key)).cloned();
        if v.is_some() {
            consumed.entry(section.into()).or_default().push(key.into());
        }
        v
    };

    // surface
    if let Some(kind) = get("surface", "kind") {
        cfg.surface = match kind.as_str() {
            "torus" => SurfaceSpec::Torus {
                period_u: get("surface", "period_u")
                    .map(|v| parse_f64(&v, "period_u"))
                    .transpose()?
                    .unwrap_or(1.0),
                period_v: get("surface", "period_v")
                    .map(|v| parse_f64(&v, "period_v"))
                    .transpose()?
                    .unwrap_or(1.0),
                grid: get("surface", "grid")
                    .map(|v| parse_usize(&v, "grid"))
                    .transpose()?
                    .unwrap_or(64),
            },
            "sphere" => SurfaceSpec::Sphere {
                subdivisions: get("surface", "subdivisions")
                    .map(|v| parse_usize(&v, "subdivisions"))
                    .transpose()?
                    .unwrap_or(4) as u32,
            },
            "mesh" => {
                let path = PathBuf::from(
                    get("surface", "path").ok_or_else(|| anyhow!("mesh surface needs path"))?,
                );
                if !path.exists() {
                    bail!("mesh file {} does not exist", path.display());
                }
                SurfaceSpec::Mesh { path }
            }
            other => bail!("unknown surface kind {other:?}"),
        };
    }

    // eigen
    if let Some(source) = get("eigen", "source") {
        cfg.eigen = match source.as_str() {
            "closed_form" => EigenSpec::ClosedForm {
                modes: get("eigen", "modes")
                    .map(|v| parse_u32_list(&v, "modes"))
                    .transpose()?
                    .unwrap_or_else(|| (1..=8).collect()),
                cosine: matches!(get("eigen", "branch").as_deref(), Some("cosine")),
            },
            "fem" => EigenSpec::Fem {
                count: get("eigen", "count")
                    .map(|v| parse_usize(&v, "count"))
                    .transpose()?
                    .unwrap_or(6),
                shift: get("eigen", "shift")
                    .map(|v| parse_f64(&v, "shift"))
                    .transpose()?
                    .unwrap_or(-1.0),
            },
            other => bail!("unknown eigen source {other:?}"),
        };
    } else {
        // allow modes/branch without an explicit source line
        if let Some(v) = get("eigen", "modes") {
            cfg.eigen = EigenSpec::ClosedForm {
                modes: parse_u32_list(&v, "modes")?,
                cosine: matches!(get("eigen", "branch").as_deref(), Some("cosine")),
            };
        }
    }

    if let Some(v) = get("pixels", "spacing") {
        cfg.spacing = if v == "default" {
            None
        } else {
            Some(parse_f64(&v, "spacing")?)
        };
    }
    if let Some(v) = get("pixels", "radius_factor") {
        cfg.radius_factor = parse_f64(&v, "radius_factor")?;
    }
    if let Some(v) = get("dong", "eps_rel") {
        cfg.dong_eps_rel = parse_f64(&v, "eps_rel")?;
    }
    if let Some(v) = get("harnack", "eps_grid") {
        cfg.harnack_eps = parse_f64_list(&v, "eps_grid")?;
    }
    if let Some(v) = get("bernstein", "eps_fraction") {
        cfg.bernstein_eps = parse_f64(&v, "eps_fraction")?;
    }
    if let Some(v) = get("hardy", "resolutions") {
        cfg.hardy_resolutions = parse_usize_list(&v, "resolutions")?;
    }
    if let Some(v) = get("hardy", "box_half") {
        cfg.hardy_box_half = parse_f64(&v, "box_half")?;
    }
    if let Some(v) = get("hardy", "deltas") {
        cfg.log_deltas = parse_f64_list(&v, "deltas")?;
    }
    if let Some(v) = get("hardy", "log_resolution") {
        cfg.log_resolution = parse_usize(&v, "log_resolution")?;
    }
    if let Some(v) = get("loja", "degrees") {
        cfg.loja_degrees = parse_u32_list(&v, "degrees")?;
    }
    if let Some(v) = get("loja", "samples") {
        cfg.loja_samples = parse_usize(&v, "samples")?;
    }
    if let Some(v) = get("harmapprox", "resolution") {
        cfg.harmapprox_resolution = parse_usize(&v, "resolution")?;
    }
    if let Some(v) = get("harmapprox", "iterations") {
        cfg.harmapprox_iterations = parse_usize(&v, "iterations")?;
    }
    if let Some(v) = get("harmapprox", "scale") {
        cfg.harmapprox_scale = parse_f64(&v, "scale")?;
    }
    if let Some(v) = get("phase", "sphere_l") {
        cfg.phase_sphere_l = parse_usize(&v, "sphere_l")? as u32;
    }
    if let Some(v) = get("output", "directory") {
        cfg.output_dir = PathBuf::from(v);
    }
    if let Some(v) = get("check", "slope_window") {
        cfg.check_slope_window = parse_f64(&v, "slope_window")?;
    }
    if let Some(v) = get("check", "length_rel") {
        cfg.check_length_rel = parse_f64(&v, "length_rel")?;
    }
    if let Some(v) = get("check", "c20_max") {
        cfg.check_c20_max = parse_f64(&v, "c20_max")?;
    }
    if let Some(v) = get("check", "bernstein_band") {
        cfg.check_bernstein_band = parse_f64(&v, "bernstein_band")?;
    }
    if let Some(v) = get("check", "density_band") {
        cfg.check_density_band = parse_f64(&v, "density_band")?;
    }
    if let Some(v) = get("check", "hardy_window") {
        let w = parse_f64_list(&v, "hardy_window")?;
        if w.len() != 2 || w[0] >= w[1] {
            bail!("hardy_window needs two increasing numbers");
        }
        cfg.check_hardy_window = (w[0], w[1]);
    }

    // reject unknown keys
    for (name, keys) in &sections {
        let used = consumed.get(name).cloned().unwrap_or_default();
        for key in keys.keys() {
            if !used.contains(key) {
                bail!("unknown key {key:?} in section [{name}]");
            }
        }
    }

    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &Config) -> Result<()> {
    if let SurfaceSpec::Torus { period_u, period_v, grid } = &cfg.surface {
        if *period_u <= 0.0 || *period_v <= 0.0 {
            bail!("torus periods must be positive");
        }
        if *grid < 8 || *grid > 4096 {
            bail!("torus grid must lie in [8, 4096]");
        }
    }
    if let SurfaceSpec::Sphere { subdivisions } = &cfg.surface {
        if *subdivisions > 7 {
            bail!("icosphere subdivisions capped at 7");
        }
    }
    if let EigenSpec::ClosedForm { modes, .. } = &cfg.eigen {
        if modes.is_empty() {
            bail!("closed-form sweep needs at least one mode");
        }
        if modes.iter().any(|&m| m == 0 || m > 64) {
            bail!("modes must lie in [1, 64]");
        }
    }
    if let Some(s) = cfg.spacing {
        if !(s > 0.0) {
            bail!("pixel spacing must be positive");
        }
    }
    if !(cfg.radius_factor > 0.0 && cfg.radius_factor < 10.0) {
        bail!("radius_factor must lie in (0, 10)");
    }
    if !(cfg.dong_eps_rel > 0.0 && cfg.dong_eps_rel <= 1e-2) {
        bail!("dong eps_rel must lie in (0, 1e-2]");
    }
    if cfg.harnack_eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        bail!("harnack eps fractions must lie in (0, 1)");
    }
    if !(cfg.bernstein_eps > 0.0) {
        bail!("bernstein eps fraction must be positive");
    }
    if cfg.hardy_resolutions.is_empty() || cfg.hardy_resolutions.iter().any(|&r| r < 4 || r > 256)
    {
        bail!("hardy resolutions must lie in [4, 256]");
    }
    if cfg.log_deltas.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
        bail!("log deltas must lie in (0, 1)");
    }
    if cfg.loja_samples < 10_000 {
        bail!("loja samples must be at least 1e4");
    }
    Ok(())
}

/// Canonical text form; stable across parse/emit cycles.
pub fn emit(cfg: &Config) -> String {
    let mut out = String::new();
    match &cfg.surface {
        SurfaceSpec::Torus { period_u, period_v, grid } => {
            let _ = writeln!(
                out,
                "[surface]\nkind = torus\nperiod_u = {period_u}\nperiod_v = {period_v}\ngrid = {grid}"
            );
        }
        SurfaceSpec::Sphere { subdivisions } => {
            let _ = writeln!(out, "[surface]\nkind = sphere\nsubdivisions = {subdivisions}");
        }
        SurfaceSpec::Mesh { path } => {
            let _ = writeln!(out, "[surface]\nkind = mesh\npath = {}", path.display());
        }
    }
    match &cfg.eigen {
        EigenSpec::ClosedForm { modes, cosine } => {
            let list = modes
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(",");
            let branch = if *cosine { "cosine" } else { "sine" };
            let _ = writeln!(
                out,
                "\n[eigen]\nsource = closed_form\nmodes = {list}\nbranch = {branch}"
            );
        }
        EigenSpec::Fem { count, shift } => {
            let _ = writeln!(out, "\n[eigen]\nsource = fem\ncount = {count}\nshift = {shift}");
        }
    }
    let spacing = match cfg.spacing {
        None => "default".to_string(),
        Some(s) => s.to_string(),
    };
    let _ = writeln!(
        out,
        "\n[pixels]\nspacing = {spacing}\nradius_factor = {}",
        cfg.radius_factor
    );
    let _ = writeln!(out, "\n[dong]\neps_rel = {}", cfg.dong_eps_rel);
    let _ = writeln!(
        out,
        "\n[harnack]\neps_grid = {}",
        join_f64(&cfg.harnack_eps)
    );
    let _ = writeln!(out, "\n[bernstein]\neps_fraction = {}", cfg.bernstein_eps);
    let _ = writeln!(
        out,
        "\n[hardy]\nresolutions = {}\nbox_half = {}\ndeltas = {}\nlog_resolution = {}",
        cfg.hardy_resolutions
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(","),
        cfg.hardy_box_half,
        join_f64(&cfg.log_deltas),
        cfg.log_resolution
    );
    let _ = writeln!(
        out,
        "\n[loja]\ndegrees = {}\nsamples = {}",
        cfg.loja_degrees
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(","),
        cfg.loja_samples
    );
    let _ = writeln!(
        out,
        "\n[harmapprox]\nresolution = {}\niterations = {}\nscale = {}",
        cfg.harmapprox_resolution, cfg.harmapprox_iterations, cfg.harmapprox_scale
    );
    let _ = writeln!(out, "\n[phase]\nsphere_l = {}", cfg.phase_sphere_l);
    let _ = writeln!(out, "\n[output]\ndirectory = {}", cfg.output_dir.display());
    let _ = writeln!(
        out,
        "\n[check]\nslope_window = {}\nlength_rel = {}\nc20_max = {}\nbernstein_band = {}\ndensity_band = {}\nhardy_window = {},{}",
        cfg.check_slope_window,
        cfg.check_length_rel,
        cfg.check_c20_max,
        cfg.check_bernstein_band,
        cfg.check_density_band,
        cfg.check_hardy_window.0,
        cfg.check_hardy_window.1
    );
    out
}

/// Names of the sections literally present in a config text; `run` uses
/// this to decide which optional inequality jobs were configured.
pub fn explicit_sections(text: &str) -> std::collections::BTreeSet<String> {
    let mut out = std::collections::BTreeSet::new();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') && line.ends_with(']') {
            out.insert(line[1..line.len() - 1].trim().to_string());
        }
    }
    out
}

#[allow(dead_code)]
pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse(&text)
}

fn parse_f64(v: &str, what: &str) -> Result<f64> {
    v.parse().with_context(|| format!("bad {what}: {v:?}"))
}

fn parse_usize(v: &str, what: &str) -> Result<usize> {
    v.parse().with_context(|| format!("bad {what}: {v:?}"))
}

fn parse_f64_list(v: &str, what: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_f64(s.trim(), what)).collect()
}

fn parse_usize_list(v: &str, what: &str) -> Result<Vec<usize>> {
    v.split(',').map(|s| parse_usize(s.trim(), what)).collect()
}

/// Lists (`1,2,3`) or ranges (`1..8`, inclusive).
fn parse_u32_list(v: &str, what: &str) -> Result<Vec<u32>> {
    if let Some((a, b)) = v.split_once("..") {
        let a: u32 = a.trim().parse().with_context(|| format!("bad {what}: {v:?}"))?;
        let b: u32 = b.trim().parse().with_context(|| format!("bad {what}: {v:?}"))?;
        if a > b {
            bail!("empty range in {what}: {v:?}");
        }
        return Ok((a..=b).collect());
    }
    v.split(',')
        .map(|s| {
            s.trim()
                .parse::<u32>()
                .with_context(|| format!("bad {what}: {v:?}"))
        })
        .collect()
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}
