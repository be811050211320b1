use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::density::Method;
use crate::error::{LabError, Result};
use crate::fem::Family;
use crate::geometry::{build_ball_mesh, build_cube_mesh, Domain, Mesh, Probe};
use crate::recovery::{admissible_window, check_resolvable, DEFAULT_SCALE};
use crate::vec3::Point;

/// Largest `k` scanned when the configuration leaves the window open.
pub const K_SCAN_MAX: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DtnValidate,
    RecoverSigma,
    DecayProfile,
    StabilitySweep,
    Liouville,
    Spectral,
    Density,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::DtnValidate,
        ExperimentKind::RecoverSigma,
        ExperimentKind::DecayProfile,
        ExperimentKind::StabilitySweep,
        ExperimentKind::Liouville,
        ExperimentKind::Spectral,
        ExperimentKind::Density,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::DtnValidate => "dtn-validate",
            ExperimentKind::RecoverSigma => "recover-sigma",
            ExperimentKind::DecayProfile => "decay-profile",
            ExperimentKind::StabilitySweep => "stability-sweep",
            ExperimentKind::Liouville => "liouville",
            ExperimentKind::Spectral => "spectral",
            ExperimentKind::Density => "density",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LabError::Usage(format!("unknown experiment `{s}`")))
    }
}

/// Model domain and its resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSpec {
    /// `[0,1]³` with `m` cells per axis.
    Cube { m: usize },
    /// Unit ball at a refinement level.
    Ball { level: usize },
}

impl DomainSpec {
    pub fn domain(self) -> Domain {
        match self {
            DomainSpec::Cube { .. } => Domain::Cube,
            DomainSpec::Ball { .. } => Domain::Ball,
        }
    }

    pub fn resolution(self) -> usize {
        match self {
            DomainSpec::Cube { m } => m,
            DomainSpec::Ball { level } => level,
        }
    }

    /// Same shape at another resolution.
    pub fn at(self, resolution: usize) -> Self {
        match self {
            DomainSpec::Cube { .. } => DomainSpec::Cube { m: resolution },
            DomainSpec::Ball { .. } => DomainSpec::Ball { level: resolution },
        }
    }

    pub fn build(self) -> Result<Mesh> {
        match self {
            DomainSpec::Cube { m } => build_cube_mesh(m),
            DomainSpec::Ball { level } => build_ball_mesh(level),
        }
    }

    /// Face center `(1, ½, ½)` on the cube, the pole `(1, 0, 0)` on the ball.
    pub fn default_probe(self) -> Point {
        match self {
            DomainSpec::Cube { .. } => [1.0, 0.5, 0.5],
            DomainSpec::Ball { .. } => [1.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub x0: Point,
    /// Cone radius; the domain default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl ProbeSpec {
    pub fn build(&self, domain: Domain) -> Result<Probe> {
        let p = Probe::new(domain, self.x0)?;
        match self.radius {
            Some(r) => p.with_radius(r),
            None => Ok(p),
        }
    }
}

/// Shrinking analytic family compared against `σ ≡ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SweepSpec {
    /// `1 + t·exp(-|x − center|²/width²)`
    Bump { center: Point, width: f64, ts: Vec<f64> },
    /// `1 + t·s·exp(-s/√t)` with `s = 1 − x₁` (cube only).
    NormalLayer { ts: Vec<f64> },
}

impl SweepSpec {
    pub fn ts(&self) -> &[f64] {
        match self {
            SweepSpec::Bump { ts, .. } | SweepSpec::NormalLayer { ts } => ts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub method: Method,
    pub eps: Vec<f64>,
}

/// One experiment run. Every optional field is filled in by [`ScenarioConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub kind: Option<ExperimentKind>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub domain: DomainSpec,
    #[serde(default = "unit_conductivity")]
    pub conductivity: Family,
    #[serde(default)]
    pub probes: Vec<ProbeSpec>,
    /// Oscillation scales of `ψ_k`.
    #[serde(default)]
    pub k: Vec<u32>,
    /// Pole offsets of the singular solutions.
    #[serde(default)]
    pub delta: Vec<f64>,
    /// Exclusion radii of the decay diagnostics.
    #[serde(default)]
    pub rho: Vec<f64>,
    /// Resolutions (cube `m` or ball level) for convergence studies.
    #[serde(default)]
    pub refinements: Vec<usize>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub density: Option<DensitySpec>,
}

fn unit_conductivity() -> Family {
    Family::Constant { value: 1.0 }
}

/// Values given on the command line. The config file takes precedence.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::Config(e.to_string()))
    }

    /// Fills defaults for `kind`, checks ranges and the resolvability of
    /// every `k` on the scenario mesh.
    pub fn resolve(mut self, kind: ExperimentKind, flags: &Overrides) -> Result<Self> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(LabError::Config(format!("config is for `{k}`, not `{kind}`")));
            }
        }
        self.kind = Some(kind);
        self.seed = self.seed.or(flags.seed).or(Some(0));
        if self.out.is_none() {
            self.out = Some(flags.out.clone().unwrap_or_else(|| PathBuf::from("out").join(kind.name())));
        }
        if self.probes.is_empty() {
            self.probes.push(ProbeSpec { x0: self.domain.default_probe(), radius: None });
        }
        let domain = self.domain.domain();
        for p in &self.probes {
            p.build(domain)?;
        }
        if self.refinements.is_empty() {
            self.refinements.push(self.domain.resolution());
        }
        match kind {
            ExperimentKind::RecoverSigma | ExperimentKind::DecayProfile => {
                let mesh = self.domain.build()?;
                if self.k.is_empty() {
                    self.k = admissible_window(&mesh, DEFAULT_SCALE, K_SCAN_MAX);
                }
                if self.k.is_empty() {
                    return Err(LabError::UnresolvableScale { k: 1, reason: format!("no resolvable scale on {}", mesh.id()) });
                }
                for &k in &self.k {
                    check_resolvable(&mesh, k, DEFAULT_SCALE)?;
                }
                if kind == ExperimentKind::RecoverSigma && self.delta.is_empty() {
                    self.delta = vec![0.1, 0.05];
                }
                if kind == ExperimentKind::DecayProfile && self.rho.is_empty() {
                    self.rho = vec![1.0];
                }
            }
            ExperimentKind::StabilitySweep => {
                if self.sweep.is_none() {
                    self.sweep = Some(SweepSpec::Bump { center: self.domain.default_probe(), width: 0.3, ts: vec![0.4, 0.2, 0.1, 0.05] });
                }
            }
            ExperimentKind::Liouville if self.refinements.len() == 1 => {
                let r = self.refinements[0];
                self.refinements.push(2 * r);
            }
            ExperimentKind::Density if self.density.is_none() => {
                self.density = Some(DensitySpec { method: Method::Bernstein, eps: vec![1e-1, 1e-2] });
            }
            _ => {}
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let positive = |what: &str, vals: &[f64]| -> Result<()> {
            match vals.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                Some(v) => Err(LabError::Config(format!("{what} must be positive, got {v}"))),
                None => Ok(()),
            }
        };
        positive("delta", &self.delta)?;
        positive("rho", &self.rho)?;
        if self.k.contains(&0) {
            return Err(LabError::Config("k must be at least 1".into()));
        }
        if let Some(s) = &self.sweep {
            if s.ts().is_empty() {
                return Err(LabError::Config("sweep.ts is empty".into()));
            }
            positive("sweep.ts", s.ts())?;
        }
        if let Some(d) = &self.density {
            if d.eps.is_empty() {
                return Err(LabError::Config("density.eps is empty".into()));
            }
            positive("density.eps", &d.eps)?;
        }
        Ok(())
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.kind.ok_or_else(|| LabError::Config("experiment kind not resolved".into()))
    }

    pub fn seed_value(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}
