//! Flat `key = value` study configuration with `[section]` headers.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use csbp::euler::TwoPointFlux;
use csbp::mesh::Kernel;

#[derive(Debug, Clone, PartialEq)]
pub struct AdvectConfig {
    pub p: usize,
    pub levels: Vec<usize>,
    pub lps: bool,
    pub lambda: [f64; 2],
    pub final_time: f64,
    pub cfl: f64,
    pub kernel: String,
    pub spectrum_level: usize,
    pub max_dense: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VortexConfig {
    pub p: usize,
    pub n: Vec<usize>,
    pub lps: bool,
    pub flux: String,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceConfig {
    pub p: usize,
    pub lps: bool,
    pub flux: String,
    pub cfl: f64,
    pub final_time: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub advect: AdvectConfig,
    pub vortex: VortexConfig,
    pub trace: TraceConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            advect: AdvectConfig {
                p: 2,
                levels: vec![1, 2, 3],
                lps: true,
                lambda: [1.0, 1.0],
                final_time: 1.0,
                cfl: 1.0,
                kernel: "uniform".into(),
                spectrum_level: 1,
                max_dense: 4000,
            },
            vortex: VortexConfig {
                p: 1,
                n: vec![4, 8, 16],
                lps: true,
                flux: "ismail-roe".into(),
                newton_tol: 1e-12,
                newton_max_iter: 30,
            },
            trace: TraceConfig {
                p: 1,
                lps: true,
                flux: "ismail-roe".into(),
                cfl: 0.1,
                final_time: 1.0,
                newton_tol: 1e-15,
                newton_max_iter: 30,
            },
        }
    }
}

fn list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    let out = v
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| anyhow!("{key}: expected comma-separated integers, got {v:?}")))
        .collect::<Result<Vec<_>>>()?;
    if out.is_empty() {
        bail!("{key}: empty list");
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| anyhow!("{key}: cannot parse {v:?}"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => bail!("{key}: expected true or false, got {v:?}"),
    }
}

impl StudyConfig {
    pub fn dump(&self) -> String {
        let a = &self.advect;
        let v = &self.vortex;
        let t = &self.trace;
        let mut s = String::new();
        let _ = writeln!(s, "[advect]");
        let _ = writeln!(s, "p = {}", a.p);
        let _ = writeln!(s, "levels = {}", list(&a.levels));
        let _ = writeln!(s, "lps = {}", a.lps);
        let _ = writeln!(s, "lambda_x = {}", a.lambda[0]);
        let _ = writeln!(s, "lambda_y = {}", a.lambda[1]);
        let _ = writeln!(s, "final_time = {}", a.final_time);
        let _ = writeln!(s, "cfl = {}", a.cfl);
        let _ = writeln!(s, "kernel = {}", a.kernel);
        let _ = writeln!(s, "spectrum_level = {}", a.spectrum_level);
        let _ = writeln!(s, "max_dense = {}", a.max_dense);
        let _ = writeln!(s, "\n[vortex]");
        let _ = writeln!(s, "p = {}", v.p);
        let _ = writeln!(s, "n = {}", list(&v.n));
        let _ = writeln!(s, "lps = {}", v.lps);
        let _ = writeln!(s, "flux = {}", v.flux);
        let _ = writeln!(s, "newton_tol = {:e}", v.newton_tol);
        let _ = writeln!(s, "newton_max_iter = {}", v.newton_max_iter);
        let _ = writeln!(s, "\n[trace]");
        let _ = writeln!(s, "p = {}", t.p);
        let _ = writeln!(s, "lps = {}", t.lps);
        let _ = writeln!(s, "flux = {}", t.flux);
        let _ = writeln!(s, "cfl = {}", t.cfl);
        let _ = writeln!(s, "final_time = {}", t.final_time);
        let _ = writeln!(s, "newton_tol = {:e}", t.newton_tol);
        let _ = writeln!(s, "newton_max_iter = {}", t.newton_max_iter);
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = StudyConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
            cfg.set(&section, k.trim(), v.trim()).with_context(|| format!("line {}", lineno + 1))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text)
    }

    /// Applies one `section.key=value` override.
    pub fn apply_override(&mut self, item: &str) -> Result<()> {
        let (lhs, v) = item.split_once('=').ok_or_else(|| anyhow!("override {item:?}: expected section.key=value"))?;
        let (section, k) = lhs.split_once('.').ok_or_else(|| anyhow!("override {item:?}: expected section.key=value"))?;
        self.set(section.trim(), k.trim(), v.trim())?;
        self.validate()
    }

    fn set(&mut self, section: &str, k: &str, v: &str) -> Result<()> {
        let key = format!("{section}.{k}");
        let key = key.as_str();
        match (section, k) {
            ("advect", "p") => self.advect.p = parse_num(key, v)?,
            ("advect", "levels") => self.advect.levels = parse_list(key, v)?,
            ("advect", "lps") => self.advect.lps = parse_bool(key, v)?,
            ("advect", "lambda_x") => self.advect.lambda[0] = parse_num(key, v)?,
            ("advect", "lambda_y") => self.advect.lambda[1] = parse_num(key, v)?,
            ("advect", "final_time") => self.advect.final_time = parse_num(key, v)?,
            ("advect", "cfl") => self.advect.cfl = parse_num(key, v)?,
            ("advect", "kernel") => self.advect.kernel = v.to_string(),
            ("advect", "spectrum_level") => self.advect.spectrum_level = parse_num(key, v)?,
            ("advect", "max_dense") => self.advect.max_dense = parse_num(key, v)?,
            ("vortex", "p") => self.vortex.p = parse_num(key, v)?,
            ("vortex", "n") => self.vortex.n = parse_list(key, v)?,
            ("vortex", "lps") => self.vortex.lps = parse_bool(key, v)?,
            ("vortex", "flux") => self.vortex.flux = v.to_string(),
            ("vortex", "newton_tol") => self.vortex.newton_tol = parse_num(key, v)?,
            ("vortex", "newton_max_iter") => self.vortex.newton_max_iter = parse_num(key, v)?,
            ("trace", "p") => self.trace.p = parse_num(key, v)?,
            ("trace", "lps") => self.trace.lps = parse_bool(key, v)?,
            ("trace", "flux") => self.trace.flux = v.to_string(),
            ("trace", "cfl") => self.trace.cfl = parse_num(key, v)?,
            ("trace", "final_time") => self.trace.final_time = parse_num(key, v)?,
            ("trace", "newton_tol") => self.trace.newton_tol = parse_num(key, v)?,
            ("trace", "newton_max_iter") => self.trace.newton_max_iter = parse_num(key, v)?,
            _ => bail!("unknown key {key}"),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        for (name, p) in [("advect.p", self.advect.p), ("vortex.p", self.vortex.p), ("trace.p", self.trace.p)] {
            if !(1..=4).contains(&p) {
                bail!("{name} = {p}: PDE studies need p in 1..=4");
            }
        }
        kernel_by_name(&self.advect.kernel)?;
        flux_by_name(&self.vortex.flux)?;
        flux_by_name(&self.trace.flux)?;
        for (name, x) in [
            ("advect.final_time", self.advect.final_time),
            ("advect.cfl", self.advect.cfl),
            ("trace.cfl", self.trace.cfl),
            ("trace.final_time", self.trace.final_time),
            ("vortex.newton_tol", self.vortex.newton_tol),
            ("trace.newton_tol", self.trace.newton_tol),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                bail!("{name} must be positive and finite");
            }
        }
        if self.advect.levels.contains(&0) {
            bail!("advect.levels: levels start at 1");
        }
        if self.vortex.n.iter().any(|n| *n < 2) {
            bail!("vortex.n: need at least 2 elements per direction");
        }
        Ok(())
    }
}

pub fn kernel_by_name(name: &str) -> Result<Kernel> {
    match name {
        "uniform" => Ok(Kernel::uniform()),
        "perturbed" => Ok(Kernel::perturbed()),
        _ => bail!("unknown kernel {name:?} (uniform or perturbed)"),
    }
}

pub fn flux_by_name(name: &str) -> Result<TwoPointFlux> {
    TwoPointFlux::parse(name).ok_or_else(|| anyhow!("unknown flux {name:?} (ismail-roe or chandrashekar)"))
}
