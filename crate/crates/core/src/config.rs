//! Experiment configuration: flat TOML tables, unknown keys rejected, every
//! physical parameter validated at load. All defaults describe the
//! benchmark double-well model.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coupling_sim::{PairState, SimConfig};
use crate::error::{Error, Result};
use crate::generator::QuadratureScheme;
use crate::levy_measure::{IsotropicStable, LevyKind, LevyMeasureSpec, SliceMeasure};
use crate::model::{GridSpec, HamiltonianSystemSpec, KineticLangevinSpec, Potential, PotentialCertificate};

/// Noise. `kind` is `slice`, `stable`, or `slice_plus_stable`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevyConfig {
    pub kind: String,
    /// Slice intensity and exponent.
    pub c: f64,
    pub theta0: f64,
    /// Stable index and scale.
    pub alpha0: f64,
    pub scale: f64,
    /// Moment exponent of the Lyapunov function, in `(0, 1]`.
    pub theta: f64,
}

impl Default for LevyConfig {
    fn default() -> Self {
        Self { kind: "slice".into(), c: 1.0, theta0: 0.4, alpha0: 1.5, scale: 1.0, theta: 1.0 }
    }
}

/// Kinetic Langevin model. `potential` is `quadratic` (uses `k`),
/// `double_well_poly` or `double_well_exp` (use `c1`, `c2`, `l`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub alpha_damp: f64,
    pub beta: f64,
    pub potential: String,
    pub k: f64,
    pub c1: f64,
    pub c2: f64,
    pub l: f64,
    pub dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            alpha_damp: 1.0,
            beta: 1.0,
            potential: "double_well_poly".into(),
            k: 1.0,
            c1: 1.0,
            c2: 2.0,
            l: 2.0,
            dim: 1,
        }
    }
}

/// Grid used by every grid-based verifier and fit, and the overlap scale `r0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovConfig {
    pub grid_radius: f64,
    pub grid_resolution: usize,
    pub grid_directions: usize,
    pub r0_jump: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self { grid_radius: g.radius, grid_resolution: g.resolution, grid_directions: g.directions, r0_jump: 0.5 }
    }
}

/// Initial pair; length-one vectors are broadcast to `model.dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub xp: Vec<f64>,
    pub vp: Vec<f64>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { x: vec![1.0], v: vec![0.0], xp: vec![-1.0], vp: vec![0.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsOverrides {
    /// Fixed Lipschitz constant instead of sampling it.
    pub lambda_star_r0: Option<f64>,
    /// Ball for the Lipschitz supremum instead of the sublevel bound.
    pub position_radius: Option<f64>,
    pub lipschitz_samples: usize,
}

impl Default for ConstantsOverrides {
    fn default() -> Self {
        Self { lambda_star_r0: None, position_radius: None, lipschitz_samples: 100_000 }
    }
}

/// Random-state spot checks and the `f` property grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksConfig {
    pub states: usize,
    pub state_seed: u64,
    /// Coordinates of random states are uniform on `[-state_radius, state_radius]`.
    pub state_radius: f64,
    pub f_points: usize,
    pub f_deltas: usize,
    pub f_tolerance: f64,
    /// Draw diagonal states only.
    pub diagonal: bool,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self { states: 20, state_seed: 17, state_radius: 3.0, f_points: 100, f_deltas: 100, f_tolerance: 1e-8, diagonal: false }
    }
}

/// Two ensembles started at `(x_a, v_a)` and `(x_b, v_b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumConfig {
    pub projections: usize,
    pub projection_seed: u64,
    pub seed_b: u64,
    pub floor_splits: usize,
    pub factor: f64,
    pub moment_exponent: f64,
    pub x_a: Vec<f64>,
    pub v_a: Vec<f64>,
    pub x_b: Vec<f64>,
    pub v_b: Vec<f64>,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        let s = crate::ergodicity::EquilibriumSetup::default();
        Self {
            projections: s.projections,
            projection_seed: s.projection_seed,
            seed_b: s.seed_b,
            floor_splits: s.floor_splits,
            factor: s.factor,
            moment_exponent: s.moment_exponent,
            x_a: vec![3.0],
            v_a: vec![0.0],
            x_b: vec![-3.0],
            v_b: vec![2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub levy: LevyConfig,
    pub model: ModelConfig,
    pub lyapunov: LyapunovConfig,
    pub quadrature: QuadratureScheme,
    pub sim: SimConfig,
    pub initial: InitialConfig,
    pub constants: ConstantsOverrides,
    pub checks: ChecksConfig,
    pub equilibrium: EquilibriumConfig,
    /// Potential certificate; found automatically when absent.
    pub certificate: Option<PotentialCertificate>,
}

/// A validated configuration with its model objects built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub spec: KineticLangevinSpec,
    pub sys: HamiltonianSystemSpec,
    pub nu: LevyMeasureSpec,
    pub grid: GridSpec,
    pub initial: PairState,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(json))
    }

    pub fn build(&self) -> Result<Experiment> {
        let m = &self.model;
        let potential = match m.potential.as_str() {
            "quadratic" => Potential::Quadratic { k: m.k },
            "double_well_poly" => Potential::DoubleWellPoly { c1: m.c1, c2: m.c2, l: m.l },
            "double_well_exp" => Potential::DoubleWellExp { c1: m.c1, c2: m.c2, l: m.l },
            other => return Err(config_err(format!("model.potential: unknown potential '{other}'"))),
        };
        let spec = KineticLangevinSpec::new(m.alpha_damp, m.beta, potential, m.dim).map_err(|e| context("model", e))?;
        let sys = spec.hamiltonian();
        let l = &self.levy;
        let slice = || SliceMeasure::new(l.c, l.theta0, m.dim).map(LevyKind::SliceOnly);
        let stable = || IsotropicStable::new(l.alpha0, l.scale, m.dim).map(LevyKind::IsotropicStable);
        let kind = match l.kind.as_str() {
            "slice" => slice(),
            "stable" => stable(),
            "slice_plus_stable" => slice().and_then(|s| Ok(LevyKind::Sum { parts: vec![s, stable()?] })),
            other => return Err(config_err(format!("levy.kind: unknown kind '{other}'"))),
        }
        .map_err(|e| context("levy", e))?;
        let nu = LevyMeasureSpec::new(kind, l.theta).map_err(|e| context("levy", e))?;
        let y = &self.lyapunov;
        if !(y.grid_radius > 0.0 && y.grid_resolution >= 2 && y.grid_directions >= 1) {
            return Err(config_err("lyapunov: grid needs radius > 0, resolution >= 2, directions >= 1".into()));
        }
        if !(y.r0_jump > 0.0) {
            return Err(config_err(format!("lyapunov.r0_jump must be positive, got {}", y.r0_jump)));
        }
        let grid = GridSpec { radius: y.grid_radius, resolution: y.grid_resolution, directions: y.grid_directions };
        self.quadrature.validate().map_err(|e| context("quadrature", e))?;
        self.sim.validate()?;
        let i = &self.initial;
        let initial = PairState::new(
            broadcast("initial.x", &i.x, m.dim)?,
            broadcast("initial.v", &i.v, m.dim)?,
            broadcast("initial.xp", &i.xp, m.dim)?,
            broadcast("initial.vp", &i.vp, m.dim)?,
        );
        let c = &self.checks;
        if c.states == 0 || c.f_points < 2 || c.f_deltas < 2 || !(c.state_radius > 0.0) || !(c.f_tolerance >= 0.0) {
            return Err(config_err("checks: need states >= 1, f_points >= 2, f_deltas >= 2, state_radius > 0".into()));
        }
        let e = &self.equilibrium;
        if e.projections == 0 || e.floor_splits == 0 || !(e.factor > 0.0) || !(e.moment_exponent > 0.0) {
            return Err(config_err("equilibrium: need projections, floor_splits >= 1 and factor, moment_exponent > 0".into()));
        }
        for (name, v) in [("x_a", &e.x_a), ("v_a", &e.v_a), ("x_b", &e.x_b), ("v_b", &e.v_b)] {
            broadcast(&format!("equilibrium.{name}"), v, m.dim)?;
        }
        if let Some(l) = self.constants.lambda_star_r0 {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(config_err(format!("constants.lambda_star_r0 must be finite and >= 0, got {l}")));
            }
        }
        Ok(Experiment { config: self.clone(), spec, sys, nu, grid, initial })
    }
}

/// `values` repeated to length `dim` when it has one entry.
pub fn broadcast(name: &str, values: &[f64], dim: usize) -> Result<Vec<f64>> {
    match values.len() {
        n if n == dim => Ok(values.to_vec()),
        1 => Ok(vec![values[0]; dim]),
        n => Err(config_err(format!("{name}: expected 1 or {dim} entries, got {n}"))),
    }
}

fn config_err(msg: String) -> Error {
    Error::Config(msg)
}

fn context(table: &str, e: Error) -> Error {
    Error::Config(format!("{table}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_benchmark() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let exp = cfg.build().unwrap();
        assert_eq!(exp.spec.potential, Potential::DoubleWellPoly { c1: 1.0, c2: 2.0, l: 2.0 });
        assert_eq!(exp.nu, LevyMeasureSpec::slice(1.0, 0.4, 1, 1.0).unwrap());
        assert_eq!(exp.initial, PairState::new(vec![1.0], vec![0.0], vec![-1.0], vec![0.0]));
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let err = ExperimentConfig::from_toml("[sim]\nh = 0.01\nstep = 2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("step"), "{msg}");
        assert!(ExperimentConfig::from_toml("[nonsense]\n").is_err());
    }

    #[test]
    fn invalid_values_fail_at_build() {
        let bad = |text: &str| ExperimentConfig::from_toml(text).unwrap().build().unwrap_err();
        assert!(bad("[levy]\ntheta0 = -1.0\n").to_string().contains("levy"));
        assert!(bad("[model]\npotential = \"cubic\"\n").to_string().contains("cubic"));
        assert!(bad("[sim]\nh = -1.0\n").to_string().contains("sim.h"));
        assert!(bad("[initial]\nx = [1.0, 2.0]\n").to_string().contains("initial.x"));
    }

    #[test]
    fn broadcast_and_hash() {
        let cfg = ExperimentConfig::from_toml("[model]\ndim = 2\npotential = \"quadratic\"\n[levy]\nkind = \"slice_plus_stable\"\n").unwrap();
        let exp = cfg.build().unwrap();
        assert_eq!(exp.initial.x, vec![1.0, 1.0]);
        assert_eq!(cfg.hash(), cfg.clone().hash());
        assert_ne!(cfg.hash(), ExperimentConfig::default().hash());
        assert_eq!(cfg.hash().len(), 64);
    }
}
