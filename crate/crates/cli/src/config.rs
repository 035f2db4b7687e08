//! Experiment configuration.
//!
//! A config file is one flat TOML table. Five keys are shared by every experiment
//! (`experiment`, `out`, `format`, `seeds`, `full_scale`); the rest belong to the
//! experiment and are checked against its own schema, so a misspelt key is an error.
//!
//! Values are layered: built-in defaults, then the full-scale preset, then the file,
//! then command-line flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use mprp::experiments::{
    GemmAccuracyConfig, HosvdConfig, InputDist, MantissaSweepConfig, RsvdConfig, RsvdMatrix, SweepMatrix,
};
use mprp::randnla::Backend;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// Parses `a..b` (half-open) or `a..=b`.
fn parse_range<T: TryFrom<i64>>(s: &str) -> Result<Vec<T>> {
    let s = s.trim();
    let (lo, hi, inclusive) = if let Some((a, b)) = s.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b, false)
    } else {
        bail!("expected a range like `0..10` or `0..=9`, got `{s}`");
    };
    let parse = |x: &str| x.trim().parse::<i64>().with_context(|| format!("bad range bound `{x}`"));
    let (lo, hi) = (parse(lo)?, parse(hi)?);
    let hi = if inclusive { hi } else { hi - 1 };
    if hi < lo {
        bail!("range `{s}` is empty");
    }
    (lo..=hi).map(|v| T::try_from(v).map_err(|_| anyhow::anyhow!("{v} is out of range in `{s}`"))).collect()
}

/// Seeds from `a..b`, `a..=b`, or (in a file) an explicit array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

impl FromStr for Seeds {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_range(s).map(Seeds)
    }
}

impl<'de> Deserialize<'de> for Seeds {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Range(String),
            List(Vec<u64>),
        }
        match Raw::deserialize(d)? {
            Raw::Range(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::List(v) if v.is_empty() => Err(serde::de::Error::custom("seed list is empty")),
            Raw::List(v) => Ok(Seeds(v)),
        }
    }
}

/// `s` exponents for the counting window, from `a..b` or `a..=b`.
pub fn parse_sigma_range(s: &str) -> Result<Vec<i32>> {
    parse_range(s)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Common {
    experiment: Option<String>,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
    seeds: Option<Seeds>,
    full_scale: Option<bool>,
}

const COMMON_KEYS: [&str; 5] = ["experiment", "out", "format", "seeds", "full_scale"];

/// Command-line flags shared by the experiment subcommands.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct RunArgs {
    /// TOML config file (flat key = value).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Row output path; the summary goes next to it as `<stem>.summary.<ext>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Seed range, `a..b` or `a..=b`.
    #[arg(long)]
    pub seeds: Option<Seeds>,
    /// Full-scale sizes instead of the desk-scale defaults.
    #[arg(long)]
    pub full_scale: bool,
    /// Replace existing output files.
    #[arg(long)]
    pub overwrite: bool,
}

/// Output settings after layering file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub overwrite: bool,
}

/// A loaded file: the shared keys plus the experiment's own table.
pub struct Loaded<F> {
    pub fields: F,
    pub seeds: Option<Vec<u64>>,
    pub full_scale: bool,
    pub output: Output,
}

fn read_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Reads the file (if any), checks its `experiment` key, and merges the flags.
pub fn load<F: DeserializeOwned + Default>(experiment: &str, args: &RunArgs) -> Result<Loaded<F>> {
    let (common, fields) = match &args.config {
        None => (Common::default(), F::default()),
        Some(path) => {
            let mut table = read_table(path)?;
            let mut shared = toml::Table::new();
            for key in COMMON_KEYS {
                if let Some(v) = table.remove(key) {
                    shared.insert(key.to_string(), v);
                }
            }
            let common: Common =
                toml::Value::Table(shared).try_into().with_context(|| format!("in {}", path.display()))?;
            let fields: F = toml::Value::Table(table)
                .try_into()
                .with_context(|| format!("in {} (experiment `{experiment}`)", path.display()))?;
            (common, fields)
        }
    };
    if let Some(name) = &common.experiment {
        if name != experiment {
            bail!("config is for experiment `{name}`, not `{experiment}`");
        }
    }
    Ok(Loaded {
        fields,
        seeds: args.seeds.clone().or(common.seeds).map(|s| s.0),
        full_scale: args.full_scale || common.full_scale.unwrap_or(false),
        output: Output {
            out: args.out.clone().or(common.out),
            format: args.format.or(common.format).unwrap_or(OutputFormat::Csv),
            overwrite: args.overwrite,
        },
    })
}

macro_rules! apply {
    ($src:expr, $dst:expr, $($field:ident),+) => {
        $( if let Some(v) = $src.$field { $dst.$field = v; } )+
    };
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FmtStatsFields {
    pub formats: Option<Vec<String>>,
    pub sigma_exponents: Option<Vec<i32>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFields {
    matrices: Option<Vec<SweepMatrix>>,
    n: Option<usize>,
    p: Option<usize>,
    oversampling: Option<usize>,
    mantissas: Option<Vec<u32>>,
    r: Option<usize>,
    xi: Option<f64>,
    alpha: Option<f64>,
    phi: Option<f64>,
}

impl SweepFields {
    pub fn resolve(self, full_scale: bool, seeds: Option<Vec<u64>>) -> MantissaSweepConfig {
        let mut cfg = MantissaSweepConfig::default();
        if full_scale {
            cfg.n = 4096;
        }
        apply!(self, cfg, matrices, n, p, oversampling, mantissas, r, xi, alpha, phi);
        if let Some(s) = seeds {
            cfg.seeds = s;
        }
        cfg
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GemmFields {
    m: Option<usize>,
    n: Option<usize>,
    ks: Option<Vec<usize>>,
    backends: Option<Vec<Backend>>,
    dists: Option<Vec<InputDist>>,
}

impl GemmFields {
    pub fn resolve(self, full_scale: bool, seeds: Option<Vec<u64>>) -> GemmAccuracyConfig {
        let mut cfg = GemmAccuracyConfig::default();
        if full_scale {
            cfg.m = 256;
            cfg.n = 256;
            cfg.ks = vec![64, 256, 1024, 4096, 16384];
        }
        apply!(self, cfg, m, n, ks, backends, dists);
        if let Some(s) = seeds {
            cfg.seeds = s;
        }
        cfg
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsvdFields {
    matrices: Option<Vec<RsvdMatrix>>,
    n: Option<usize>,
    p: Option<usize>,
    oversampling: Option<usize>,
    power: Option<u32>,
    backends: Option<Vec<Backend>>,
    s_p_linear: Option<f64>,
    s_p_exp: Option<f64>,
    poly_r: Option<usize>,
    poly_alpha: Option<f64>,
    poly_phi: Option<f64>,
    cauchy_gamma: Option<f64>,
}

impl RsvdFields {
    pub fn resolve(self, full_scale: bool, seeds: Option<Vec<u64>>) -> RsvdConfig {
        let mut cfg = RsvdConfig::default();
        if full_scale {
            cfg.n = 4096;
            cfg.p = 256;
        }
        apply!(
            self,
            cfg,
            matrices,
            n,
            p,
            oversampling,
            power,
            backends,
            s_p_linear,
            s_p_exp,
            poly_r,
            poly_alpha,
            poly_phi,
            cauchy_gamma
        );
        if let Some(s) = seeds {
            cfg.seeds = s;
        }
        cfg
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HosvdFields {
    dims: Option<Vec<usize>>,
    ranks: Option<Vec<usize>>,
    padding: Option<usize>,
    backends: Option<Vec<Backend>>,
}

impl HosvdFields {
    pub fn resolve(self, full_scale: bool, seeds: Option<Vec<u64>>) -> HosvdConfig {
        let mut cfg = HosvdConfig::default();
        if full_scale {
            cfg.dims = vec![128, 128, 128];
            cfg.ranks = vec![32, 32, 32];
            cfg.padding = 8;
        }
        apply!(self, cfg, dims, ranks, padding, backends);
        if let Some(s) = seeds {
            cfg.seeds = s;
        }
        cfg
    }
}
