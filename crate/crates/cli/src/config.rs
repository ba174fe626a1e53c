use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use dbar_core::geometry::DomainSpec;
use dbar_core::profiles::TypeProfile;
use dbar_core::solver::OneForm;
use dbar_core::ExecMode;
use serde::Deserialize;

pub const SUITES: [&str; 9] = [
    "profile",
    "solve",
    "verify.kernel",
    "verify.bounds",
    "verify.hl",
    "verify.levi",
    "probe.gradient",
    "probe.supnorm",
    "holder",
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Suites run by `dbar run`.
    #[serde(default)]
    pub suites: Vec<String>,
    #[serde(default)]
    pub exec: ExecMode,
    #[serde(default = "default_domain")]
    pub domain: DomainSpec,
    #[serde(default)]
    pub profile: ProfileCfg,
    #[serde(default)]
    pub solve: SolveCfg,
    #[serde(default)]
    pub verify: VerifyCfg,
    #[serde(default)]
    pub probe: ProbeCfg,
    #[serde(default)]
    pub holder: HolderCfg,
}

fn default_seed() -> u64 {
    1
}
fn default_tol() -> f64 {
    1e-6
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_domain() -> DomainSpec {
    DomainSpec::new(
        dbar_core::geometry::Shape::Modulus,
        TypeProfile::power(1.0).expect("m = 1 is valid"),
    )
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    Dzbar2,
    Z2Dzbar1,
}

impl FormKind {
    pub fn form(self) -> OneForm {
        match self {
            FormKind::Dzbar2 => OneForm::dzbar2(),
            FormKind::Z2Dzbar1 => OneForm::z2_dzbar1(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileCfg {
    /// Points in the `F*(F(u))` round-trip table.
    pub points: usize,
    /// Points in each modulus table.
    pub modulus_points: usize,
}

impl Default for ProfileCfg {
    fn default() -> Self {
        Self {
            points: 100,
            modulus_points: 24,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveCfg {
    pub form: FormKind,
    /// Grid points per axis on the slice `y₁ = y₂ = 0`.
    pub grid: usize,
    pub min_dist: f64,
}

impl Default for SolveCfg {
    fn default() -> Self {
        Self {
            form: FormKind::Dzbar2,
            grid: 6,
            min_dist: 0.05,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyCfg {
    pub samples: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub rho_points: usize,
    pub l2_delta: f64,
    pub l3_delta: f64,
    pub levi_deltas: Vec<f64>,
    pub hl_pairs: usize,
}

impl Default for VerifyCfg {
    fn default() -> Self {
        Self {
            samples: 10_000,
            rho_min: 1e-8,
            rho_max: 1e-2,
            rho_points: 25,
            l2_delta: 1.0,
            l3_delta: 0.9,
            levi_deltas: vec![1e-2, 1e-3, 1e-4],
            hl_pairs: 1000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeCfg {
    pub varrho: Vec<f64>,
}

impl Default for ProbeCfg {
    fn default() -> Self {
        Self {
            varrho: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HolderCfg {
    pub form: FormKind,
    pub bases: usize,
    pub per_base: usize,
    pub min_dist: f64,
}

impl Default for HolderCfg {
    fn default() -> Self {
        Self {
            form: FormKind::Z2Dzbar1,
            bases: 20,
            per_base: 10,
            min_dist: 0.05,
        }
    }
}

impl Default for Config {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let cfg: Config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => Config::default(),
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.domain.validate().context("domain")?;
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            bail!("tol must be positive, got {}", self.tol);
        }
        for s in &self.suites {
            if !SUITES.contains(&s.as_str()) {
                bail!("unknown suite {s:?}; expected one of {SUITES:?}");
            }
        }
        if self.probe.varrho.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            bail!("probe.varrho entries must lie in (0, 1)");
        }
        if self.verify.levi_deltas.iter().any(|d| !(*d > 0.0)) {
            bail!("verify.levi_deltas entries must be positive");
        }
        if self.verify.rho_points == 0 || !(self.verify.rho_min > 0.0 && self.verify.rho_min <= self.verify.rho_max) {
            bail!("verify rho grid is empty or inverted");
        }
        if self.solve.grid == 0 || self.holder.bases == 0 || self.holder.per_base == 0 {
            bail!("grid sizes must be positive");
        }
        Ok(())
    }
}
