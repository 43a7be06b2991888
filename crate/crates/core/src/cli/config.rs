//! Experiment configuration: a TOML document with shared settings and one
//! `[experiment]` table tagged by `kind`.

use crate::cuntz_rep::{IsometryFamily, DEFAULT_BUDGET};
use crate::linalg::{self, cx};
use crate::states::{ProductState, SequenceFamily, StateSpec};
use crate::c64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// A complex number written as `[re, im]`.
pub type Complex = [f64; 2];

fn complex_vec(v: &[Complex]) -> Vec<c64> {
    v.iter().map(|z| cx(z[0], z[1])).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Largest Hilbert space dimension n^m a cell may build.
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub output: OutputConfig,
    pub experiment: Experiment,
}

fn default_tolerance() -> f64 {
    1e-12
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub report: Option<String>,
    pub curves: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Relations {
        bases: Vec<usize>,
        levels: Vec<usize>,
        families: Vec<FamilyConfig>,
        /// Also compute the relative commutant dimension at levels ≥ 2.
        #[serde(default)]
        index: bool,
    },
    StateEval {
        bases: Vec<usize>,
        states: Vec<StateConfig>,
        max_word: usize,
    },
    Classify {
        bases: Vec<usize>,
        pairs: Vec<PairConfig>,
        horizons: Vec<usize>,
    },
    Clustering {
        bases: Vec<usize>,
        families: Vec<FamilyConfig>,
        observable: ObservableConfig,
        #[serde(default)]
        vector: VectorConfig,
        horizon: usize,
        #[serde(default)]
        expect: ClusterExpect,
        target_tolerance: Option<f64>,
    },
    Eigen {
        bases: Vec<usize>,
        families: Vec<FamilyConfig>,
        levels: Vec<usize>,
        lambda: LambdaConfig,
        /// Evenly strided points of the λ grid evaluated in addition.
        #[serde(default)]
        grid_samples: usize,
        expect: Option<EigenExpect>,
        #[serde(default)]
        search: bool,
    },
    Wold {
        bases: Vec<usize>,
        inputs: Vec<WoldKind>,
        level: usize,
        depth: usize,
    },
    Fourier {
        bases: Vec<usize>,
        levels: Vec<usize>,
        #[serde(default)]
        decay_depth: usize,
        #[serde(default = "one")]
        probe_length: usize,
    },
    Distance {
        bases: Vec<usize>,
        pairs: Vec<PairConfig>,
        windows: Vec<usize>,
        #[serde(default)]
        offset: usize,
    },
    Cesaro {
        bases: Vec<usize>,
        families: Vec<FamilyConfig>,
        terms: Vec<usize>,
        samples: usize,
    },
    Extension {
        bases: Vec<usize>,
        windows: Vec<usize>,
        levels: Vec<usize>,
    },
}

fn one() -> usize {
    1
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Relations { .. } => "relations",
            Experiment::StateEval { .. } => "state-eval",
            Experiment::Classify { .. } => "classify",
            Experiment::Clustering { .. } => "clustering",
            Experiment::Eigen { .. } => "eigen",
            Experiment::Wold { .. } => "wold",
            Experiment::Fourier { .. } => "fourier",
            Experiment::Distance { .. } => "distance",
            Experiment::Cesaro { .. } => "cesaro",
            Experiment::Extension { .. } => "extension",
        }
    }

    pub fn bases(&self) -> &[usize] {
        match self {
            Experiment::Relations { bases, .. }
            | Experiment::StateEval { bases, .. }
            | Experiment::Classify { bases, .. }
            | Experiment::Clustering { bases, .. }
            | Experiment::Eigen { bases, .. }
            | Experiment::Wold { bases, .. }
            | Experiment::Fourier { bases, .. }
            | Experiment::Distance { bases, .. }
            | Experiment::Cesaro { bases, .. }
            | Experiment::Extension { bases, .. } => bases,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyConfig {
    Haar,
    WeightedHaar { eta: Vec<Complex> },
    /// η drawn from the cell's random stream.
    RandomWeightedHaar,
    Gauge { generator: GeneratorConfig, horizon: usize },
    NearestNeighbor,
}

impl FamilyConfig {
    pub fn label(&self) -> String {
        match self {
            FamilyConfig::Haar => "haar".into(),
            FamilyConfig::WeightedHaar { .. } => "weighted-haar".into(),
            FamilyConfig::RandomWeightedHaar => "random-weighted-haar".into(),
            FamilyConfig::Gauge { generator, .. } => format!("gauge-{}", generator.name),
            FamilyConfig::NearestNeighbor => "nearest-neighbor".into(),
        }
    }

    pub fn build(&self, n: usize, rng: &mut impl Rng) -> crate::Result<IsometryFamily> {
        match self {
            FamilyConfig::Haar => IsometryFamily::haar(n),
            FamilyConfig::WeightedHaar { eta } => IsometryFamily::weighted_haar(complex_vec(eta)),
            FamilyConfig::RandomWeightedHaar => {
                let mut eta = linalg::random_unit_vector(n, rng);
                // Keep every weight away from zero.
                for e in eta.iter_mut() {
                    if e.norm() < 1e-3 {
                        *e = cx(1e-3, 0.0);
                    }
                }
                let s = linalg::norm(&eta);
                IsometryFamily::weighted_haar(eta.into_iter().map(|e| e / s).collect())
            }
            FamilyConfig::Gauge { generator, horizon } => {
                IsometryFamily::gauge(generator.build(n)?.unitary_sequence(*horizon)?)
            }
            FamilyConfig::NearestNeighbor => IsometryFamily::nearest_neighbor(n),
        }
    }

    fn validate(&self, n: usize) -> Result<(), String> {
        match self {
            FamilyConfig::WeightedHaar { eta } => {
                if eta.len() != n {
                    return Err(format!("weighted-haar eta has {} entries, base is {n}", eta.len()));
                }
                IsometryFamily::weighted_haar(complex_vec(eta)).map(|_| ()).map_err(|e| format!("weighted-haar: {e}"))
            }
            FamilyConfig::Gauge { generator, horizon } => {
                if *horizon == 0 {
                    return Err("gauge horizon must be positive".into());
                }
                generator.validate(n)
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub name: String,
    pub ratio: Option<f64>,
    pub vector: Option<Vec<Complex>>,
    pub vectors: Option<Vec<Vec<Complex>>>,
}

impl GeneratorConfig {
    pub fn named(name: &str) -> Self {
        GeneratorConfig { name: name.into(), ratio: None, vector: None, vectors: None }
    }

    pub fn build(&self, n: usize) -> crate::Result<SequenceFamily> {
        let info = generator_info(&self.name)?;
        match info.name {
            "theta-harmonic" => SequenceFamily::theta_harmonic(n),
            "inverse-sqrt" => SequenceFamily::inverse_sqrt(n),
            "geometric" => SequenceFamily::geometric(n, self.ratio.unwrap_or(0.5)),
            "constant" => {
                let h = match &self.vector {
                    Some(v) => complex_vec(v),
                    None => {
                        let mut e = vec![cx(0.0, 0.0); n];
                        e[0] = cx(1.0, 0.0);
                        e
                    }
                };
                SequenceFamily::constant(h)
            }
            _ => SequenceFamily::explicit(self.vectors.iter().flatten().map(|v| complex_vec(v)).collect()),
        }
    }

    fn validate(&self, n: usize) -> Result<(), String> {
        generator_info(&self.name).map_err(|e| e.to_string())?;
        match self.name.as_str() {
            "explicit-list" => {
                let vs = self.vectors.as_ref().ok_or("explicit-list needs `vectors`")?;
                if vs.is_empty() || vs.iter().any(|v| v.len() != n) {
                    return Err(format!("explicit-list vectors must be nonempty with {n} entries each"));
                }
            }
            "constant" => {
                if let Some(v) = &self.vector {
                    if v.len() != n {
                        return Err(format!("constant vector has {} entries, base is {n}", v.len()));
                    }
                }
            }
            _ => {}
        }
        self.build(n).map(|_| ()).map_err(|e| e.to_string())
    }
}

pub struct GeneratorInfo {
    pub name: &'static str,
    pub params: &'static str,
    pub note: &'static str,
}

/// Sequence generators; each also yields a unitary sequence U_p with
/// h_p = U_p h_{p+1} in the rotating frame.
pub const GENERATORS: [GeneratorInfo; 5] = [
    GeneratorInfo {
        name: "theta-harmonic",
        params: "none",
        note: "h_k → h with Σ‖h_k − h_{k+1}‖ < ∞, but Σθ_k² = ∞ so Π|⟨h_k, h⟩| = 0: shift without invariant vector states",
    },
    GeneratorInfo {
        name: "inverse-sqrt",
        params: "none",
        note: "θ_k = k^{-1/2}: increments summable, Σθ_k² = ∞: no invariant vector state",
    },
    GeneratorInfo {
        name: "geometric",
        params: "ratio in (0, 1), default 0.5",
        note: "θ_k = r^k: increments summable and Π⟨h_k, h⟩ → 1: absorption regime",
    },
    GeneratorInfo {
        name: "constant",
        params: "vector (default e_0)",
        note: "h_k = h: U_p = I, invariant product state",
    },
    GeneratorInfo {
        name: "explicit-list",
        params: "vectors",
        note: "finite list, last vector repeated: every tail condition holds trivially",
    },
];

pub fn generator_info(name: &str) -> crate::Result<&'static GeneratorInfo> {
    GENERATORS.iter().find(|g| g.name == name).ok_or_else(|| crate::Error::UnknownGenerator {
        name: name.into(),
        valid: GENERATORS.iter().map(|g| g.name).collect::<Vec<_>>().join(", "),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateConfig {
    /// Uniform η when omitted.
    Cuntz { eta: Option<Vec<Complex>> },
    /// Site vectors from a generator, or through its unitary sequence up to `gauge_horizon`.
    Product { generator: GeneratorConfig, gauge_horizon: Option<usize> },
    NearestNeighbor,
    FiniteMix { anchor: usize, weights: Vec<f64>, vectors: Vec<Vec<Complex>> },
}

impl StateConfig {
    pub fn label(&self) -> String {
        match self {
            StateConfig::Cuntz { .. } => "cuntz".into(),
            StateConfig::Product { generator, gauge_horizon: None } => format!("product-{}", generator.name),
            StateConfig::Product { generator, .. } => format!("gauge-product-{}", generator.name),
            StateConfig::NearestNeighbor => "nearest-neighbor".into(),
            StateConfig::FiniteMix { .. } => "finite-mix".into(),
        }
    }

    pub fn build(&self, n: usize) -> crate::Result<StateSpec> {
        match self {
            StateConfig::Cuntz { eta } => StateSpec::cuntz(match eta {
                Some(e) => complex_vec(e),
                None => vec![cx((n as f64).sqrt().recip(), 0.0); n],
            }),
            StateConfig::Product { generator, gauge_horizon } => {
                let fam = generator.build(n)?;
                Ok(StateSpec::product(match gauge_horizon {
                    Some(h) => ProductState::from_gauge(fam.unitary_sequence(*h)?),
                    None => ProductState::from_family(fam),
                }))
            }
            StateConfig::NearestNeighbor => StateSpec::nearest_neighbor(n),
            StateConfig::FiniteMix { anchor, weights, vectors } => {
                StateSpec::finite_mix(*anchor, weights.clone(), vectors.iter().map(|v| complex_vec(v)).collect())
            }
        }
    }

    fn validate(&self, n: usize) -> Result<(), String> {
        if let StateConfig::Product { generator, .. } = self {
            generator.validate(n)?;
        }
        self.build(n).map(|_| ()).map_err(|e| format!("{}: {e}", self.label()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub left: StateConfig,
    pub right: StateConfig,
    /// Expected conjugacy verdict (converges | diverges | undetermined).
    pub expect: Option<String>,
    pub expect_equivalence: Option<String>,
    pub expect_heuristic: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObservableConfig {
    /// The rank-one projector onto the constant function.
    VacuumProjector,
    MatrixUnit { i: Vec<usize>, j: Vec<usize> },
    /// The projector onto the character e_λ on the first |λ| slots.
    CharacterProjector { character: Vec<usize> },
    RandomHermitian { level: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VectorConfig {
    Constant { level: usize },
    Basis { level: usize, index: usize },
    Random { level: usize },
}

impl Default for VectorConfig {
    fn default() -> Self {
        VectorConfig::Constant { level: 0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterExpect {
    #[default]
    None,
    /// c_k = ω_0(A)‖ξ‖² from k = level(ξ) on.
    Constant,
    /// c_K ≤ Π_s |⟨ξ_s, ξ_{s+K}⟩|² and c_K < c_0, for the vacuum projector.
    ProductOracle,
    /// |c_K − ω_h(A)‖ξ‖²| within the target tolerance, h the declared limit.
    Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LambdaConfig {
    /// λ = η̄ for weighted Haar families.
    ConjEta,
    Uniform,
    Delta { index: usize },
    Explicit { values: Vec<Complex> },
}

impl LambdaConfig {
    pub fn build(&self, fam: &IsometryFamily) -> crate::Result<Vec<c64>> {
        let n = fam.base();
        match self {
            LambdaConfig::ConjEta => fam
                .eta()
                .map(|e| e.iter().map(|x| x.conj()).collect())
                .ok_or_else(|| crate::Error::Invalid(format!("{} has no η", fam.name()))),
            LambdaConfig::Uniform => Ok(vec![cx((n as f64).sqrt().recip(), 0.0); n]),
            LambdaConfig::Delta { index } => {
                let mut v = vec![cx(0.0, 0.0); n];
                *v.get_mut(*index).ok_or(crate::Error::Digit { digit: *index, base: n })? = cx(1.0, 0.0);
                Ok(v)
            }
            LambdaConfig::Explicit { values } => Ok(complex_vec(values)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenExpect {
    Zero,
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WoldKind {
    /// The nearest-neighbor composite US.
    Us,
    /// ξ ↦ ξ∘σ.
    S,
    /// A random unitary on the configured level.
    Unitary,
}

impl WoldKind {
    pub fn label(&self) -> &'static str {
        match self {
            WoldKind::Us => "us",
            WoldKind::S => "s",
            WoldKind::Unitary => "unitary",
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if self.budget == 0 {
            return Err("budget must be positive".into());
        }
        let e = &self.experiment;
        if e.bases().is_empty() {
            return Err("bases must not be empty".into());
        }
        for &n in e.bases() {
            if n < 2 {
                return Err(format!("base must be at least 2, got {n}"));
            }
            match e {
                Experiment::Relations { families, .. }
                | Experiment::Clustering { families, .. }
                | Experiment::Eigen { families, .. }
                | Experiment::Cesaro { families, .. } => {
                    if families.is_empty() {
                        return Err("families must not be empty".into());
                    }
                    for f in families {
                        f.validate(n)?;
                    }
                }
                Experiment::StateEval { states, .. } => {
                    for s in states {
                        s.validate(n)?;
                    }
                }
                Experiment::Classify { pairs, .. } | Experiment::Distance { pairs, .. } => {
                    for p in pairs {
                        p.left.validate(n)?;
                        p.right.validate(n)?;
                        for v in [&p.expect, &p.expect_equivalence].into_iter().flatten() {
                            if !["converges", "diverges", "undetermined"].contains(&v.as_str()) {
                                return Err(format!("unknown verdict `{v}`"));
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        match e {
            Experiment::Relations { levels, .. } | Experiment::Eigen { levels, .. } | Experiment::Fourier { levels, .. } => {
                if levels.is_empty() {
                    return Err("levels must not be empty".into());
                }
            }
            Experiment::Extension { levels, windows, .. } => {
                if levels.is_empty() || windows.is_empty() {
                    return Err("levels and windows must not be empty".into());
                }
            }
            Experiment::StateEval { max_word, .. } if *max_word == 0 => return Err("max_word must be positive".into()),
            Experiment::Classify { horizons, .. } if horizons.is_empty() || horizons.contains(&0) => {
                return Err("horizons must be positive and nonempty".into());
            }
            Experiment::Clustering { horizon, target_tolerance, expect, .. } => {
                if *horizon == 0 {
                    return Err("horizon must be positive".into());
                }
                if *expect == ClusterExpect::Limit && target_tolerance.is_none() {
                    return Err("expect = \"limit\" needs target_tolerance".into());
                }
            }
            Experiment::Cesaro { terms, samples, .. } if terms.is_empty() || terms.contains(&0) || *samples == 0 => {
                return Err("terms and samples must be positive".into());
            }
            Experiment::Distance { windows, .. } if windows.is_empty() || windows.contains(&0) => {
                return Err("windows must be positive and nonempty".into());
            }
            Experiment::Wold { inputs, .. } if inputs.is_empty() => return Err("inputs must not be empty".into()),
            _ => {}
        }
        Ok(())
    }
}
