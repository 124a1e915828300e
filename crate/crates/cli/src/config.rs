//! Run parameters: a key=value file, overridden by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bergman_core::geometry::default_radius;
use bergman_core::numerics::PrecisionContext;
use clap::{Args, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand. All optional so that a config file
/// can supply them.
#[derive(Args, Clone, Debug, Default)]
pub struct Flags {
    /// Curvature κ of the model.
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    /// Complex dimension d.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Chart radius r.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Levels as START:STOP:STEP (inclusive), START:STOP or a single N.
    #[arg(long)]
    pub n: Option<String>,
    /// Torus modulus τ as RE,IM; selects the torus in kernel-error and trace.
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<String>,
    /// Coherent state centre as RE,IM (overlap).
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<String>,
    #[arg(long)]
    pub bits: Option<u32>,
    #[arg(long)]
    pub quad_order: Option<usize>,
    /// Target relative tolerance; defaults to 10^(-40 bits/256).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Number of grid points or point pairs.
    #[arg(long)]
    pub points: Option<usize>,
    /// Largest pair separation on the torus grid.
    #[arg(long)]
    pub max_sep: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// key=value file with any of the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "kappa", "dim", "radius", "n", "tau", "y", "bits", "quad_order", "tol", "points", "max_sep", "out", "format",
    "seed",
];

/// Inclusive arithmetic progression of levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NRange {
    pub start: u32,
    pub stop: u32,
    pub step: u32,
}

impl NRange {
    pub fn parse(s: &str) -> Result<NRange> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |p: &str| {
            p.parse::<u32>()
                .map_err(|_| CliError::Usage(format!("bad level '{p}' in N range '{s}'")))
        };
        let (start, stop, step) = match parts.as_slice() {
            [a] => (num(a)?, num(a)?, 1),
            [a, b] => (num(a)?, num(b)?, 1),
            [a, b, c] => (num(a)?, num(b)?, num(c)?),
            _ => return Err(CliError::Usage(format!("N range '{s}' is not START:STOP:STEP"))),
        };
        if step == 0 {
            return Err(CliError::Usage("N step must be positive".into()));
        }
        if start == 0 {
            return Err(CliError::Usage("levels start at N = 1".into()));
        }
        if start > stop {
            return Err(CliError::Usage(format!("empty N range '{s}'")));
        }
        Ok(NRange { start, stop, step })
    }

    pub fn values(&self) -> Vec<u32> {
        (self.start..=self.stop).step_by(self.step as usize).collect()
    }
}

fn parse_complex(key: &str, s: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| {
        p.parse::<f64>()
            .map_err(|_| CliError::Usage(format!("bad number '{p}' in --{key}")))
    };
    match parts.as_slice() {
        [re] => Ok([num(re)?, 0.0]),
        [re, im] => Ok([num(re)?, num(im)?]),
        _ => Err(CliError::Usage(format!("--{key} expects RE,IM, got '{s}'"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad value '{s}' for {key}")))
}

/// Reads `key = value` lines; `#` starts a comment, dashes in keys are
/// accepted for underscores.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {} has no '='", i + 1)));
        };
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("unknown config key '{}'", k.trim())));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

impl Flags {
    /// Fills every unset flag from the config file, if one was given.
    pub fn merged(&self) -> Result<Flags> {
        let Some(path) = &self.config else {
            return Ok(self.clone());
        };
        let file = read_config_file(path)?;
        let mut f = self.clone();
        for (k, v) in &file {
            match k.as_str() {
                "kappa" => f.kappa = f.kappa.or(Some(parse_num(k, v)?)),
                "dim" => f.dim = f.dim.or(Some(parse_num(k, v)?)),
                "radius" => f.radius = f.radius.or(Some(parse_num(k, v)?)),
                "n" => f.n = f.n.or(Some(v.clone())),
                "tau" => f.tau = f.tau.or(Some(v.clone())),
                "y" => f.y = f.y.or(Some(v.clone())),
                "bits" => f.bits = f.bits.or(Some(parse_num(k, v)?)),
                "quad_order" => f.quad_order = f.quad_order.or(Some(parse_num(k, v)?)),
                "tol" => f.tol = f.tol.or(Some(parse_num(k, v)?)),
                "points" => f.points = f.points.or(Some(parse_num(k, v)?)),
                "max_sep" => f.max_sep = f.max_sep.or(Some(parse_num(k, v)?)),
                "out" => f.out = f.out.clone().or(Some(PathBuf::from(v))),
                "format" => {
                    let fmt = Format::from_str(v, true).map_err(|_| CliError::Usage(format!("bad format '{v}'")))?;
                    f.format = f.format.or(Some(fmt))
                }
                "seed" => f.seed = f.seed.or(Some(parse_num(k, v)?)),
                _ => unreachable!("keys are checked while parsing"),
            }
        }
        Ok(f)
    }
}

/// Fully resolved parameters of one run. Serialized into every report;
/// the output directory is where the report goes, not a run parameter,
/// and is left out.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub kappa: f64,
    pub dim: usize,
    pub radius: f64,
    pub n: NRange,
    pub tau: Option<[f64; 2]>,
    pub y: [f64; 2],
    pub bits: u32,
    pub quad_order: usize,
    pub panels: usize,
    pub tol: f64,
    pub points: usize,
    pub max_sep: f64,
    pub seed: u64,
    pub format: Format,
    #[serde(skip)]
    pub out: PathBuf,
}

fn default_levels(command: &str, torus: bool) -> &'static str {
    match command {
        "a-of-n" => "10:100:10",
        "kernel-error" if torus => "10:60:5",
        "kernel-error" => "5:40:5",
        "overlap" => "20:80:10",
        _ => "1:10:1",
    }
}

impl RunConfig {
    pub fn resolve(command: &str, flags: &Flags) -> Result<RunConfig> {
        let f = flags.merged()?;
        let kappa = f.kappa.unwrap_or(1.0);
        if !kappa.is_finite() {
            return Err(CliError::Usage(format!("--kappa must be finite, got {kappa}")));
        }
        let dim = f.dim.unwrap_or(1);
        if dim == 0 {
            return Err(CliError::Usage("--dim must be at least 1".into()));
        }
        let tau = f.tau.as_deref().map(|s| parse_complex("tau", s)).transpose()?;
        let n = NRange::parse(f.n.as_deref().unwrap_or(default_levels(command, tau.is_some())))?;
        let bits = f.bits.unwrap_or(256);
        let points = f.points.unwrap_or(10);
        if points == 0 {
            return Err(CliError::Usage("--points must be at least 1".into()));
        }
        Ok(RunConfig {
            command: command.to_string(),
            kappa,
            dim,
            radius: f.radius.unwrap_or_else(|| default_radius(kappa)),
            n,
            tau,
            y: f.y.as_deref().map(|s| parse_complex("y", s)).transpose()?.unwrap_or([0.3, 0.0]),
            bits,
            quad_order: f.quad_order.unwrap_or(32),
            panels: 8,
            tol: f.tol.unwrap_or_else(|| 10f64.powf(-40.0 * bits as f64 / 256.0)),
            points,
            max_sep: f.max_sep.unwrap_or(0.01),
            seed: f.seed.unwrap_or(1),
            format: f.format.unwrap_or(Format::Csv),
            out: f.out.unwrap_or_else(|| PathBuf::from("out")),
        })
    }

    /// Rejects orders so low for the tolerance that the composite rules
    /// would need millions of panels.
    pub fn precision(&self) -> Result<PrecisionContext> {
        let ctx = PrecisionContext::new(self.bits, self.quad_order, self.panels, self.tol)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let min_order = (-self.tol.ln() / 12.0).ceil().max(2.0) as usize;
        if self.quad_order < min_order {
            return Err(CliError::Usage(format!(
                "--quad-order {} is too low for --tol {:e}; use at least {min_order}",
                self.quad_order, self.tol
            )));
        }
        Ok(ctx)
    }

    pub fn levels(&self) -> Vec<u32> {
        self.n.values()
    }

    pub fn tau_complex(&self) -> Option<Complex64> {
        self.tau.map(|[re, im]| Complex64::new(re, im))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(NRange::parse("10:100:10").unwrap().values().len(), 10);
        assert_eq!(NRange::parse("7").unwrap().values(), vec![7]);
        assert_eq!(NRange::parse("3:5").unwrap().values(), vec![3, 4, 5]);
        assert!(NRange::parse("5:3:1").is_err());
        assert!(NRange::parse("1:5:0").is_err());
        assert!(NRange::parse("a:b").is_err());
    }

    #[test]
    fn file_keys() {
        let m = parse_config_text("kappa = -1 # hyperbolic\nquad-order=40\n\n").unwrap();
        assert_eq!(m["kappa"], "-1");
        assert_eq!(m["quad_order"], "40");
        assert!(parse_config_text("colour = red").is_err());
        assert!(parse_config_text("kappa").is_err());
    }

    #[test]
    fn defaults() {
        let c = RunConfig::resolve("a-of-n", &Flags::default()).unwrap();
        assert_eq!(c.radius, 2.0);
        assert!((c.tol / 1e-40 - 1.0).abs() < 1e-12);
        let flags = Flags {
            kappa: Some(-1.0),
            ..Flags::default()
        };
        let c = RunConfig::resolve("a-of-n", &flags).unwrap();
        assert!((c.radius - 0.9).abs() < 1e-15);
    }
}
