//! Flat configuration shared by the flags and the `--config` file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use minmass_core::groundstate::default_rmax;
use minmass_core::params::balanced_p;
use minmass_core::sim::{Scheme, SimConfig};
use minmass_core::Branch;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A coupling given directly or as a multiple of the threshold `ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    Value(f64),
    Omega(f64),
}

impl Coupling {
    pub fn resolve(self, omega: f64) -> f64 {
        match self {
            Coupling::Value(v) => v,
            Coupling::Omega(k) => k * omega,
        }
    }
}

impl FromStr for Coupling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim();
        let bad = || format!("'{s}' is neither a number nor '<k>omega'");
        match t.strip_suffix("omega").or_else(|| t.strip_suffix('ω')) {
            Some(k) => {
                let k = k.trim().trim_end_matches('*').trim();
                if k.is_empty() {
                    Ok(Coupling::Omega(1.0))
                } else {
                    k.parse().map(Coupling::Omega).map_err(|_| bad())
                }
            }
            None => t.parse().map(Coupling::Value).map_err(|_| bad()),
        }
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coupling::Value(v) => write!(f, "{v}"),
            Coupling::Omega(k) => write!(f, "{k}omega"),
        }
    }
}

impl Serialize for Coupling {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Coupling::Value(v) => s.serialize_f64(*v),
            Coupling::Omega(_) => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Coupling {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Coupling::Value(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Comma-separated list of numbers; the empty string is the empty list.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct List(pub Vec<f64>);

impl FromStr for List {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(|x| x.parse::<f64>().map_err(|_| format!("'{x}' is not a number")))
            .collect::<Result<Vec<_>, _>>()
            .map(List)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchArg {
    Plusminus,
    Minusplus,
    /// `(+,−)` at the threshold `C₀ = ω`.
    Balanced,
    Critical,
}

impl BranchArg {
    pub fn core(self) -> Branch {
        match self {
            BranchArg::Plusminus | BranchArg::Balanced => Branch::PlusMinus,
            BranchArg::Minusplus => Branch::MinusPlus,
            BranchArg::Critical => Branch::Critical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    Conservative,
    Strang,
}

impl SchemeArg {
    pub fn core(self) -> Scheme {
        match self {
            SchemeArg::Conservative => Scheme::Conservative,
            SchemeArg::Strang => Scheme::Strang,
        }
    }
}

/// Every setting, unset by default. Flags and file keys share names.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Space dimension (1, 2 or 3)
    #[arg(long = "N", global = true)]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Subcritical exponent; defaults to 1 + 4σ/N
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Potential exponent σ
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Coupling: a number or `<k>omega`
    #[arg(long = "C0", global = true)]
    #[serde(rename = "C0")]
    pub c0: Option<Coupling>,
    #[arg(long, global = true, value_enum)]
    pub branch: Option<BranchArg>,
    /// Energy of the balanced critical-mass datum
    #[arg(long = "E0", global = true)]
    #[serde(rename = "E0")]
    pub e0: Option<f64>,
    /// Initial rescaled time
    #[arg(long, global = true)]
    pub s1: Option<f64>,
    /// Initial scale; ignored when `--s1` is given
    #[arg(long, global = true)]
    pub lambda1: Option<f64>,
    /// Profile expansion order J
    #[arg(long, global = true)]
    pub order: Option<usize>,
    /// Nodes of the unit-scale grid
    #[arg(long = "grid-n", global = true)]
    #[serde(rename = "grid-n")]
    pub grid_n: Option<usize>,
    /// Outer radius of the unit-scale grid
    #[arg(long, global = true)]
    pub rmax: Option<f64>,
    /// Time step constant: dt = c·λ̂²
    #[arg(long = "dt-c", global = true)]
    #[serde(rename = "dt-c")]
    pub dt_c: Option<f64>,
    /// Step cap of one simulation
    #[arg(long = "max-steps", global = true)]
    #[serde(rename = "max-steps")]
    pub max_steps: Option<usize>,
    /// Modulation tube radius δ
    #[arg(long = "tube-radius", global = true)]
    #[serde(rename = "tube-radius")]
    pub tube_radius: Option<f64>,
    /// Stop when λ̂ falls below this fraction of its initial value
    #[arg(long, global = true)]
    pub floor: Option<f64>,
    /// Snapshot spacing in rescaled time
    #[arg(long = "snapshot-ds", global = true)]
    #[serde(rename = "snapshot-ds")]
    pub snapshot_ds: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Seed of randomized validation fields
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sweep values of σ
    #[arg(long, global = true)]
    pub sigmas: Option<List>,
    /// Sweep values of C₀/ω
    #[arg(long = "C0-over-omega", global = true)]
    #[serde(rename = "C0-over-omega")]
    pub c0_over_omega: Option<List>,
    /// Sweep values of E₀
    #[arg(long = "E0s", global = true)]
    #[serde(rename = "E0s")]
    pub e0s: Option<List>,
    /// Sweep worker threads
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output root
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Flat JSON file with the same keys as the flags
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr; $($f:ident),*) => {
        Settings { $($f: $hi.$f.or($lo.$f),)* config: $hi.config }
    };
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// `self` wins over `file`.
    pub fn over(self, file: Settings) -> Settings {
        overlay!(self, file; n, p, sigma, c0, branch, e0, s1, lambda1, order, grid_n, rmax, dt_c, max_steps,
            tube_radius, floor, snapshot_ds, scheme, seed, sigmas, c0_over_omega, e0s, threads, out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub sigmas: Vec<f64>,
    #[serde(rename = "C0-over-omega")]
    pub c0_over_omega: Vec<f64>,
    #[serde(rename = "E0s")]
    pub e0s: Vec<f64>,
}

/// Settings with every default filled in; this is what manifests record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    #[serde(rename = "N")]
    pub n: usize,
    pub p: f64,
    pub sigma: f64,
    #[serde(rename = "C0")]
    pub c0: Coupling,
    pub branch: BranchArg,
    #[serde(rename = "E0")]
    pub e0: f64,
    /// Exactly one of `s1` and `lambda1` is set.
    pub s1: Option<f64>,
    pub lambda1: Option<f64>,
    pub order: usize,
    #[serde(rename = "grid-n")]
    pub grid_n: usize,
    pub rmax: f64,
    #[serde(rename = "dt-c")]
    pub dt_c: f64,
    #[serde(rename = "max-steps")]
    pub max_steps: usize,
    #[serde(rename = "tube-radius")]
    pub tube_radius: f64,
    pub floor: f64,
    #[serde(rename = "snapshot-ds")]
    pub snapshot_ds: f64,
    pub scheme: SchemeArg,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepGrid>,
}

pub const DEFAULT_GRID_N: usize = 32_000;
/// Initial scale of threshold runs.
pub const DEFAULT_LAMBDA1_THRESHOLD: f64 = 0.1;
/// Initial scale of runs away from the threshold, small enough that the
/// power-law datum starts inside the modulation tube.
pub const DEFAULT_LAMBDA1_UNBALANCED: f64 = 0.03;

impl Settings {
    pub fn resolve(&self, sweep: bool) -> Result<Resolved> {
        let n = self.n.unwrap_or(1);
        let sigma = self.sigma.unwrap_or(0.2);
        let branch = self.branch.unwrap_or(BranchArg::Plusminus);
        let c0 = match (branch, self.c0) {
            (BranchArg::Balanced, Some(c)) if c != Coupling::Omega(1.0) => {
                bail!("branch balanced fixes C0 = omega; got C0 = {c}")
            }
            (BranchArg::Balanced, _) => Coupling::Omega(1.0),
            (_, c) => c.unwrap_or(Coupling::Omega(1.0)),
        };
        let threshold = matches!(branch, BranchArg::Balanced | BranchArg::Critical) || c0 == Coupling::Omega(1.0);
        let lambda1 = match self.s1 {
            Some(_) => None,
            None => Some(self.lambda1.unwrap_or(if threshold {
                DEFAULT_LAMBDA1_THRESHOLD
            } else {
                DEFAULT_LAMBDA1_UNBALANCED
            })),
        };
        let defaults = sim_defaults();
        let sweep = sweep.then(|| SweepGrid {
            sigmas: self.sigmas.clone().map_or(vec![sigma], |l| l.0),
            c0_over_omega: self.c0_over_omega.clone().map_or_else(
                || vec![if let Coupling::Omega(k) = c0 { k } else { 1.0 }],
                |l| l.0,
            ),
            e0s: self.e0s.clone().map_or(vec![self.e0.unwrap_or(1.0)], |l| l.0),
        });
        Ok(Resolved {
            n,
            p: self.p.unwrap_or_else(|| balanced_p(n.max(1), sigma)),
            sigma,
            c0,
            branch,
            e0: self.e0.unwrap_or(1.0),
            s1: self.s1,
            lambda1,
            order: self.order.unwrap_or(1),
            grid_n: self.grid_n.unwrap_or(DEFAULT_GRID_N),
            rmax: self.rmax.unwrap_or_else(|| default_rmax(n)),
            dt_c: self.dt_c.unwrap_or(defaults.c_dt),
            max_steps: self.max_steps.unwrap_or(defaults.max_steps),
            tube_radius: self.tube_radius.unwrap_or(defaults.decompose.tube_radius),
            floor: self.floor.unwrap_or(1.0 / 16.0),
            snapshot_ds: self.snapshot_ds.unwrap_or(defaults.snapshot_ds),
            scheme: self.scheme.unwrap_or(SchemeArg::Conservative),
            seed: self.seed.unwrap_or(0),
            sweep,
        })
    }
}

/// [`SimConfig`] defaults; they do not depend on the parameters.
fn sim_defaults() -> SimConfig {
    use minmass_core::params::{make_params, ParamRequest};
    SimConfig::new(make_params(ParamRequest::new(1, 0.2, 0.0, Branch::Critical)).expect("fixed admissible parameters"))
}
