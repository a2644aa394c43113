use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use ringload::sim::Tilt;
use ringload::MessageLengthModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Aligned text for reading.
    Table,
    Json,
    Csv,
}

/// Everything a command may need. Loaded from `--config` and then
/// overridden by flags; commands ignore fields they do not use.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub dist: Option<String>,
    pub k: Option<usize>,
    pub lambda: Option<f64>,
    pub grid: Option<String>,
    pub d: Option<f64>,
    pub l: Option<usize>,
    pub slopes: Option<Vec<f64>>,
    pub subset: Option<String>,
    pub n: Option<u32>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub warmup: Option<f64>,
    pub tilt: Option<String>,
    pub window: Option<f64>,
    pub census: Option<bool>,
    pub lookback: Option<f64>,
    pub a_min: Option<f64>,
    pub eps: Option<f64>,
    pub tol: Option<f64>,
    pub examples: Option<Vec<u8>>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub event_log: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON file with a RunConfig; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Message-length model: `exp:c=1`, `mix:c=1,g=0.5` or `det:c=1`.
    #[arg(long)]
    pub dist: Option<String>,
    /// Ring size.
    #[arg(long)]
    pub k: Option<usize>,
    /// Per-flow arrival rate.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Rate grid `start:stop:step`, stop included.
    #[arg(long)]
    pub grid: Option<String>,
    /// Delay level.
    #[arg(long)]
    pub d: Option<f64>,
    /// Scenario to tilt in `simulate` when `--tilt` is absent.
    #[arg(long)]
    pub l: Option<usize>,
    /// Input slopes, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub slopes: Option<Vec<f64>>,
    /// Connected flows `a..b` (1-based, inclusive, may wrap) for the arc problem.
    #[arg(long)]
    pub subset: Option<String>,
    /// Scale parameter; overload means `ω₁ ≥ n·d`.
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Nominal warm-up before each measured segment.
    #[arg(long)]
    pub warmup: Option<f64>,
    /// `none`, `<l>`, `<l>:<theta>`, `mix` or `mix:<defensive>`.
    #[arg(long)]
    pub tilt: Option<String>,
    /// Scaled tilt window; defaults to the scenario duration.
    #[arg(long)]
    pub window: Option<f64>,
    /// Also classify the input paths of overloaded trials.
    #[arg(long)]
    pub census: bool,
    /// Scaled lookback window of the census.
    #[arg(long)]
    pub lookback: Option<f64>,
    /// Census slope threshold.
    #[arg(long)]
    pub a_min: Option<f64>,
    /// Census tube width.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Reproduction tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Examples to reproduce (1, 2, 3); all by default.
    #[arg(long = "example", value_delimiter = ',')]
    pub examples: Option<Vec<u8>>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the arrival log of trial 0 as CSV.
    #[arg(long)]
    pub event_log: Option<PathBuf>,
}

impl Flags {
    /// Merge with the config file, if any, checking that it was written for
    /// `command`.
    pub fn resolve(self, command: &str) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => load(p)?,
            None => RunConfig::default(),
        };
        if let Some(c) = &file.command {
            ensure!(c == command, "config file is for `{c}`, not `{command}`");
        }
        Ok(RunConfig {
            command: Some(command.to_string()),
            dist: self.dist.or(file.dist),
            k: self.k.or(file.k),
            lambda: self.lambda.or(file.lambda),
            grid: self.grid.or(file.grid),
            d: self.d.or(file.d),
            l: self.l.or(file.l),
            slopes: self.slopes.or(file.slopes),
            subset: self.subset.or(file.subset),
            n: self.n.or(file.n),
            trials: self.trials.or(file.trials),
            seed: self.seed.or(file.seed),
            warmup: self.warmup.or(file.warmup),
            tilt: self.tilt.or(file.tilt),
            window: self.window.or(file.window),
            census: if self.census { Some(true) } else { file.census },
            lookback: self.lookback.or(file.lookback),
            a_min: self.a_min.or(file.a_min),
            eps: self.eps.or(file.eps),
            tol: self.tol.or(file.tol),
            examples: self.examples.or(file.examples),
            format: self.format.or(file.format),
            out: self.out.or(file.out),
            event_log: self.event_log.or(file.event_log),
        })
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

impl RunConfig {
    pub fn model(&self) -> Result<MessageLengthModel> {
        let s = self.dist.as_deref().context("missing --dist")?;
        Ok(s.parse()?)
    }

    pub fn k(&self) -> Result<usize> {
        self.k.context("missing --k")
    }

    pub fn lambda(&self) -> Result<f64> {
        self.lambda.context("missing --lambda")
    }

    pub fn d(&self) -> f64 {
        self.d.unwrap_or(1.0)
    }

    /// The rate grid, or the single `--lambda` value.
    pub fn grid(&self) -> Result<Vec<f64>> {
        match (&self.grid, self.lambda) {
            (Some(g), _) => parse_grid(g),
            (None, Some(l)) => Ok(vec![l]),
            (None, None) => bail!("missing --grid"),
        }
    }

    pub fn tilt(&self) -> Result<Option<Tilt>> {
        match (&self.tilt, self.l) {
            (Some(t), _) => parse_tilt(t),
            (None, Some(l)) => Ok(Some(Tilt::scenario(l))),
            (None, None) => Ok(None),
        }
    }
}

/// `start:stop:step` with `stop` included when it lies on the grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    ensure!(parts.len() == 3, "grid `{s}` is not `start:stop:step`");
    let num = |p: &str| p.trim().parse::<f64>().with_context(|| format!("grid `{s}`: `{p}` is not a number"));
    let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    ensure!(step > 0.0 && step.is_finite(), "grid `{s}`: step must be positive");
    ensure!(stop >= start, "grid `{s}`: stop lies below start");
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    // 12 significant digits drop the drift of `start + i·step`
    let clean = |x: f64| format!("{x:.11e}").parse::<f64>().unwrap_or(x);
    Ok((0..=count).map(|i| clean(start + i as f64 * step)).collect())
}

pub fn parse_tilt(s: &str) -> Result<Option<Tilt>> {
    let s = s.trim();
    if s == "none" {
        return Ok(None);
    }
    let (head, tail) = match s.split_once(':') {
        Some((h, t)) => (h, Some(t)),
        None => (s, None),
    };
    let value = |t: &str| t.trim().parse::<f64>().with_context(|| format!("tilt `{s}`: `{t}` is not a number"));
    if head == "mix" {
        let defensive = tail.map(value).transpose()?.unwrap_or(0.1);
        return Ok(Some(Tilt::Mixture { defensive }));
    }
    let l: usize = head.parse().with_context(|| format!("tilt `{s}`: expected none, mix, or a flow count"))?;
    Ok(Some(Tilt::Scenario { l, theta: tail.map(value).transpose()? }))
}

/// Flows `a..b` of a ring of size `k`, 1-based and inclusive, returned
/// 0-based. `b < a` wraps around.
pub fn parse_subset(s: &str, k: usize) -> Result<Vec<usize>> {
    let (a, b) = s.split_once("..").with_context(|| format!("subset `{s}` is not `a..b`"))?;
    let a: usize = a.trim().parse().with_context(|| format!("subset `{s}`: bad start"))?;
    let b: usize = b.trim().trim_start_matches('=').parse().with_context(|| format!("subset `{s}`: bad end"))?;
    ensure!((1..=k).contains(&a) && (1..=k).contains(&b), "subset `{s}` must lie in 1..{k}");
    let len = (b + k - a) % k + 1;
    ensure!(len < k, "subset `{s}` covers the whole ring; drop --subset");
    Ok((0..len).map(|j| (a - 1 + j) % k).collect())
}
