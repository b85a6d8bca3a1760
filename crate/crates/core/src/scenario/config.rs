//! Scenario configuration as read from JSON.
//!
//! Real numbers may be written as JSON numbers or as decimal strings; the
//! string form round-trips bit-exactly.

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::dynamics::SimulationConfig;
use crate::error::{Error, Result};
use crate::linalg::C64;

/// A real that serializes as its shortest round-trip decimal string.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:?}", self.0))
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Real(x)),
            Raw::Text(s) => s
                .trim()
                .parse::<f64>()
                .map(Real)
                .map_err(|_| de::Error::custom(format!("not a decimal number: {s:?}"))),
        }
    }
}

impl From<f64> for Real {
    fn from(x: f64) -> Self {
        Real(x)
    }
}

/// `[re, im]`.
pub type Complex = [Real; 2];

pub fn complex(z: C64) -> Complex {
    [Real(z.re), Real(z.im)]
}

pub fn to_c64(z: &Complex) -> C64 {
    C64::new(z[0].0, z[1].0)
}

/// Row-major complex matrix.
pub type MatrixSpec = Vec<Vec<Complex>>;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// Diagonal of `H0`.
    pub levels: Vec<Real>,
    /// Upper-triangle couplings `b_kl`, `k < l`, in lexicographic order.
    pub couplings: Vec<Complex>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// `diag(spectrum)`; stationary.
    Diagonal { spectrum: Vec<Real> },
    /// Spectrum with eigenbasis `U` drawn from the Haar measure with `seed`.
    Haar { spectrum: Vec<Real>, seed: u64 },
    /// Two distinct eigenvalues: `w` on `vector` (normalized here), `u` on
    /// its orthogonal complement.
    PseudoPure {
        w: Real,
        u: Real,
        vector: Vec<Complex>,
    },
    /// Explicit density matrix.
    State { matrix: MatrixSpec },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `U rho_d(0) U^dagger` with Haar `U` from the run seed.
    RandomIsospectral,
    /// Permutation state with this index in the critical-point enumeration
    /// of the target.
    Permutation {
        index: usize,
    },
    State {
        matrix: MatrixSpec,
    },
}

/// Every field optional, so configs can override a preset piecewise.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_samples: Option<usize>,
}

impl SimSpec {
    fn overlay(&mut self, top: &SimSpec) {
        self.dt = top.dt.or(self.dt);
        self.t_final = top.t_final.or(self.t_final);
        self.kappa = top.kappa.or(self.kappa);
        self.record_stride = top.record_stride.or(self.record_stride);
        self.orbit_samples = top.orbit_samples.or(self.orbit_samples);
    }

    pub fn resolve(&self) -> SimulationConfig {
        let d = SimulationConfig::default();
        SimulationConfig {
            dt: self.dt.map_or(d.dt, |x| x.0),
            t_final: self.t_final.map_or(d.t_final, |x| x.0),
            kappa: self.kappa.map_or(d.kappa, |x| x.0),
            record_stride: self.record_stride.unwrap_or(d.record_stride),
            orbit_samples: self.orbit_samples.unwrap_or(d.orbit_samples),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    TrajectoryCsv,
    ReportJson,
    Summary,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub sim: SimSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<Output>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A config with every section present.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ResolvedConfig {
    pub preset: Option<String>,
    pub system: SystemSpec,
    pub target: TargetSpec,
    pub initial: InitialSpec,
    pub sim: SimSpec,
    pub outputs: Vec<Output>,
    pub seed: u64,
}

impl ResolvedConfig {
    pub fn simulation(&self) -> SimulationConfig {
        self.sim.resolve()
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Fills missing sections from the named preset; explicit fields win.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let base = match &self.preset {
            Some(name) => super::presets::preset(name)?,
            None => ScenarioConfig::default(),
        };
        let mut sim = base.sim.clone();
        sim.overlay(&self.sim);
        let missing = |what: &str| Error::ConfigInvalid(format!("no preset and no {what} section"));
        let resolved = ResolvedConfig {
            preset: self.preset.clone(),
            system: self
                .system
                .clone()
                .or(base.system)
                .ok_or_else(|| missing("system"))?,
            target: self
                .target
                .clone()
                .or(base.target)
                .ok_or_else(|| missing("target"))?,
            initial: self
                .initial
                .clone()
                .or(base.initial)
                .unwrap_or(InitialSpec::RandomIsospectral),
            sim,
            outputs: self.outputs.clone().or(base.outputs).unwrap_or_else(|| {
                vec![Output::TrajectoryCsv, Output::ReportJson, Output::Summary]
            }),
            seed: self.seed.or(base.seed).unwrap_or(DEFAULT_SEED),
        };
        resolved.simulation().validate()?;
        Ok(resolved)
    }
}
