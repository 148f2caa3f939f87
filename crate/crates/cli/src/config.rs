//! Experiment configuration: JSON in, validated core objects out.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use schmidt_core::dynamics::{CompositeHamiltonian, TimeGrid};
use schmidt_core::gauge::GaugePolicy;
use schmidt_core::hilbert::{tensor, DensityMatrix, Ket, Subsystem};
use schmidt_core::mixed::{spectral_branches, thermal_init, EnsembleState};
use schmidt_core::numkernel::ComplexMatrix;
use schmidt_core::presets;

use crate::error::CliError;
use crate::runner::Severity;

/// A complex number written as `[re, im]`.
pub type JsonComplex = [f64; 2];
pub type JsonMatrix = Vec<Vec<JsonComplex>>;
pub type JsonKet = Vec<JsonComplex>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    /// Two qubits, `H1 = ω1/2 σz`, `H2 = ω2/2 σy`, `Hint = g σx⊗σy`.
    #[serde(rename = "two-qubit-reference", alias = "two-qubit-paper")]
    TwoQubit,
    /// `ω/2 σz` on both sides, `Hint = g(σ+⊗σ− + σ−⊗σ+)`.
    #[serde(rename = "resonant-exchange")]
    ResonantExchange,
    /// `ω/2 σz` on both sides, `Hint = g σz⊗σz`.
    #[serde(rename = "dephasing-zz")]
    DephasingZz,
}

impl Preset {
    pub fn id(self) -> &'static str {
        match self {
            Self::TwoQubit => "two-qubit-reference",
            Self::ResonantExchange => "resonant-exchange",
            Self::DephasingZz => "dephasing-zz",
        }
    }

    pub fn parse(name: &str) -> Result<Self, CliError> {
        serde_json::from_value(serde_json::Value::String(name.into()))
            .map_err(|_| CliError::config("--preset", format!("unknown preset `{name}`")))
    }

    /// `(ω1, ω2, g)` used when the config leaves them out.
    pub fn defaults(self) -> (f64, f64, f64) {
        match self {
            Self::TwoQubit => (presets::OMEGA1, presets::OMEGA2, presets::COUPLING),
            Self::ResonantExchange => (1.0, 1.0, 0.2),
            Self::DephasingZz => (1.0, 5.0, 0.4),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h1: Option<JsonMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h2: Option<JsonMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<JsonMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialSpec {
    /// Normalized separately; the global state is their tensor product.
    Product { first: JsonKet, second: JsonKet },
    Ket(JsonKet),
    Density(JsonMatrix),
    Thermal { beta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeSpec {
    pub policy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl Default for GaugeSpec {
    fn default() -> Self {
        Self {
            policy: "symmetric".into(),
            alpha: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Energies,
    Fluxes,
    Entropy,
    Spectrum,
    Residuals,
    Schmidt,
}

impl OutputKind {
    pub const ALL: [OutputKind; 6] = [
        Self::Energies,
        Self::Fluxes,
        Self::Entropy,
        Self::Spectrum,
        Self::Residuals,
        Self::Schmidt,
    ];
}

fn all_outputs() -> Vec<OutputKind> {
    OutputKind::ALL.to_vec()
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    pub grid: GridSpec,
    #[serde(default)]
    pub gauge: GaugeSpec,
    #[serde(default = "all_outputs")]
    pub outputs: Vec<OutputKind>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Exit with status 4 when a flag of at least this severity is raised.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail_on_flags: Option<Severity>,
}

impl ExperimentConfig {
    /// Preset system on `t ∈ [0, 10]`, `dt = 1e-3`, default initial state.
    pub fn from_preset(preset: Preset) -> Self {
        Self {
            system: SystemSpec {
                preset: Some(preset),
                ..Default::default()
            },
            initial: None,
            grid: GridSpec {
                t0: 0.0,
                t1: 10.0,
                dt: 1e-3,
            },
            gauge: GaugeSpec::default(),
            outputs: all_outputs(),
            out_dir: default_out_dir(),
            fail_on_flags: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(if path == "." { "(root)".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    /// Structural checks serde cannot express.
    pub fn check(&self) -> Result<(), CliError> {
        let g = &self.grid;
        if !(g.dt > 0.0 && g.dt.is_finite()) {
            return Err(CliError::config("grid.dt", "must be positive"));
        }
        if !(g.t1 > g.t0 && g.t0.is_finite() && g.t1.is_finite()) {
            return Err(CliError::config("grid.t1", "must exceed grid.t0"));
        }
        let s = &self.system;
        let explicit = [&s.h1, &s.h2, &s.hint].iter().filter(|m| m.is_some()).count();
        match (s.preset, explicit) {
            (Some(_), 0) => {}
            (Some(_), _) => {
                return Err(CliError::config("system", "give either `preset` or explicit matrices, not both"))
            }
            (None, 3) => {
                if s.omega1.is_some() || s.omega2.is_some() || s.g.is_some() {
                    return Err(CliError::config("system", "omega1/omega2/g only apply to presets"));
                }
                if self.initial.is_none() {
                    return Err(CliError::config("initial", "required for explicit matrices"));
                }
            }
            (None, _) => return Err(CliError::config("system", "needs `preset` or all of h1, h2, hint")),
        }
        self.policy()?;
        if self.outputs.is_empty() {
            return Err(CliError::config("outputs", "select at least one output"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        TimeGrid::span(self.grid.t0, self.grid.t1, self.grid.dt).map_err(|e| CliError::config("grid", e.to_string()))
    }

    pub fn policy(&self) -> Result<GaugePolicy, CliError> {
        let name = self.gauge.policy.as_str();
        let alpha = self.gauge.alpha;
        if alpha.is_some() && name != "linear-shift" {
            return Err(CliError::config("gauge.alpha", "only used by linear-shift"));
        }
        Ok(match name {
            "symmetric" => GaugePolicy::Symmetric,
            "parallel-transport-1" => GaugePolicy::ParallelTransport(Subsystem::One),
            "parallel-transport-2" => GaugePolicy::ParallelTransport(Subsystem::Two),
            "bare-rotating-1" => GaugePolicy::BareRotating(Subsystem::One),
            "bare-rotating-2" => GaugePolicy::BareRotating(Subsystem::Two),
            "linear-shift" => match alpha {
                Some(a) if a.is_finite() => GaugePolicy::LinearShift { alpha: a },
                _ => return Err(CliError::config("gauge.alpha", "linear-shift needs a finite alpha")),
            },
            other => return Err(CliError::config("gauge.policy", format!("unknown policy `{other}`"))),
        })
    }

    /// `(ω1, ω2, g)` after defaults, for presets.
    pub fn parameters(&self) -> Option<(f64, f64, f64)> {
        let p = self.system.preset?;
        let (w1, w2, g) = p.defaults();
        Some((
            self.system.omega1.unwrap_or(w1),
            self.system.omega2.unwrap_or(w2),
            self.system.g.unwrap_or(g),
        ))
    }

    pub fn hamiltonian(&self) -> Result<CompositeHamiltonian, CliError> {
        let s = &self.system;
        let built = match (s.preset, self.parameters()) {
            (Some(p), Some((w1, w2, g))) => match p {
                Preset::TwoQubit => presets::two_qubit(w1, w2, g),
                Preset::ResonantExchange => presets::resonant_exchange(w1, w2, g),
                Preset::DephasingZz => presets::dephasing_zz(w1, w2, g),
            },
            _ => {
                let m = |name: &str, v: &Option<JsonMatrix>| matrix(&format!("system.{name}"), v.as_ref().expect("checked"));
                CompositeHamiltonian::new(m("h1", &s.h1)?, m("h2", &s.h2)?, m("hint", &s.hint)?, s.hbar.unwrap_or(1.0))
            }
        };
        built.map_err(|e| CliError::config("system", e.to_string()))
    }

    /// The initial condition as an ensemble; pure states give one branch.
    pub fn initial_state(&self, ch: &CompositeHamiltonian) -> Result<Initial, CliError> {
        let fail = |path: &str, e: schmidt_core::Error| CliError::config(path, e.to_string());
        let spec = match &self.initial {
            Some(s) => s.clone(),
            None => return Ok(Initial::Pure(self.default_initial())),
        };
        let initial = match spec {
            InitialSpec::Product { first, second } => {
                let a = Ket::normalized(ket(&first)).map_err(|e| fail("initial.product.first", e))?;
                let b = Ket::normalized(ket(&second)).map_err(|e| fail("initial.product.second", e))?;
                Initial::Pure(tensor(&a, &b))
            }
            InitialSpec::Ket(amps) => {
                let psi = Ket::new(ket(&amps)).map_err(|e| fail("initial.ket", e))?;
                if !psi.is_normalized(1e-10) {
                    return Err(CliError::config("initial.ket", format!("not normalized (norm {})", psi.norm())));
                }
                Initial::Pure(psi)
            }
            InitialSpec::Density(m) => {
                let rho = DensityMatrix::new(matrix("initial.density", &m)?).map_err(|e| fail("initial.density", e))?;
                Initial::Mixed(spectral_branches(&rho, 1e-12).map_err(|e| fail("initial.density", e))?)
            }
            InitialSpec::Thermal { beta } => Initial::Mixed(thermal_init(ch, beta).map_err(|e| fail("initial.thermal.beta", e))?),
        };
        let dim = match &initial {
            Initial::Pure(psi) => psi.dim(),
            Initial::Mixed(ens) => ens.branches[0].dim(),
        };
        if dim != ch.shape().total() {
            return Err(CliError::config("initial", format!("dimension {dim} does not match the system ({})", ch.shape().total())));
        }
        Ok(initial)
    }

    fn default_initial(&self) -> Ket {
        match self.system.preset {
            Some(Preset::DephasingZz) => presets::plus_plus(),
            _ => presets::reference_initial_state(),
        }
    }

    pub fn label(&self) -> String {
        match self.system.preset {
            Some(p) => p.id().into(),
            None => "explicit".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Initial {
    Pure(Ket),
    Mixed(EnsembleState),
}

fn ket(amps: &[JsonComplex]) -> Vec<Complex64> {
    amps.iter().map(|z| Complex64::new(z[0], z[1])).collect()
}

fn matrix(path: &str, rows: &JsonMatrix) -> Result<ComplexMatrix, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(CliError::config(path, "matrix rows must be nonempty and of equal length"));
    }
    let cols = rows[0].len();
    Ok(ComplexMatrix::from_fn(n, cols, |r, c| Complex64::new(rows[r][c][0], rows[r][c][1])))
}
