//! Run configuration: one TOML file, strictly validated, with command-line
//! overrides applied on top.

use std::path::{Path, PathBuf};

use epchiral::precision::parse_rational;
use epchiral::sweep::{Axis, Colormap, Quantity, SweepPlan};
use epchiral::{Angle, Direction, IntegrationSpec, LoopSpec, NoiseSpec, PrecisionContext};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::CliError;

/// A number kept as written, so `0.1` stays exactly 1/10.
#[derive(Clone, Debug, PartialEq)]
pub struct Num(pub String);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Str(String),
        }
        Ok(Num(match Raw::deserialize(d)? {
            Raw::Int(i) => i.to_string(),
            Raw::Float(f) => format!("{f:e}"),
            Raw::Str(s) => s,
        }))
    }
}

impl From<&str> for Num {
    fn from(s: &str) -> Self {
        Num(s.to_string())
    }
}

fn one() -> Num {
    Num::from("1")
}

fn zero_angle() -> String {
    "0".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    #[serde(default = "one")]
    pub kappa: Num,
    #[serde(default = "one")]
    pub g0: Num,
    pub rho: Num,
    /// Angle such as "0", "pi", "3pi/4" or "1.2".
    #[serde(default = "zero_angle")]
    pub theta_i: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inv_omega: Option<Num>,
    #[serde(default = "ccw")]
    pub direction: Direction,
}

fn ccw() -> Direction {
    Direction::Ccw
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrecisionConfig {
    pub digits: u32,
    pub guard_digits: u32,
    pub max_digits: u32,
    /// When false, the exact solver stays at `digits` and fails instead of
    /// escalating. The integrator always runs at `digits`; `max_digits` only
    /// bounds the matrix norm it may reach before reporting overflow.
    pub escalate: bool,
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        Self {
            digits: 30,
            guard_digits: 20,
            max_digits: 2000,
            escalate: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationConfig {
    pub steps: u64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self { steps: 2000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub epsilon: f64,
    pub seed: u64,
    pub realizations: u32,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            seed: 0,
            realizations: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub samples: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self { samples: 256 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub inv_omegas: Vec<f64>,
    /// ε grid 10^-min … 10^-max, `points` values.
    pub log10_inv_epsilon_min: f64,
    pub log10_inv_epsilon_max: f64,
    pub points: usize,
    #[serde(default = "half")]
    pub threshold: f64,
    #[serde(default = "five")]
    pub bisections: u32,
    /// Also compute the ε_c·C(t_c) = 1 prediction from condition profiles.
    #[serde(default = "yes")]
    pub predict: bool,
}

fn half() -> f64 {
    0.5
}

fn five() -> u32 {
    5
}

fn yes() -> bool {
    true
}

fn sweep_samples() -> usize {
    64
}

fn viridis() -> Colormap {
    Colormap::Viridis
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub quantity: Quantity,
    pub axes: Vec<Axis>,
    #[serde(default = "sweep_samples")]
    pub profile_samples: usize,
    /// Defaults to `noise.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<PathBuf>,
    #[serde(default = "viridis")]
    pub colormap: Colormap,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    /// Also integrate the loop with RK4 at the configured digits and steps.
    pub integrator: bool,
    /// Bound on the integrator's residuals and its relative error.
    pub integrator_tolerance: f64,
    /// Step counts for an optional RK4 convergence ladder.
    pub ladder_steps: Vec<u64>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            integrator: true,
            integrator_tolerance: 1e-2,
            ladder_steps: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub json: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "loop")]
    pub loop_: LoopConfig,
    #[serde(default)]
    pub precision: PrecisionConfig,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Command-line values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub digits: Option<u32>,
    pub steps: Option<u64>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub json: bool,
    pub out: Option<PathBuf>,
}

/// Parsed and validated pieces ready for the library.
pub struct Resolved {
    pub spec: LoopSpec,
    pub ctx: PrecisionContext,
    pub ispec: IntegrationSpec,
    pub noise: NoiseSpec,
}

fn bad(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = o.digits {
            self.precision.digits = d;
        }
        if let Some(s) = o.steps {
            self.integration.steps = s;
        }
        if let Some(e) = o.epsilon {
            self.noise.epsilon = e;
        }
        if let Some(s) = o.seed {
            self.noise.seed = s;
        }
        if o.json {
            self.output.json = true;
        }
        if let Some(p) = &o.out {
            self.output.path = Some(p.clone());
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# unprintable config: {e}\n"))
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let l = &self.loop_;
        let num = |field: &str, n: &Num| parse_rational(&n.0).map_err(|e| bad(field, e));
        let kappa = num("loop.kappa", &l.kappa)?;
        if kappa <= 0 {
            return Err(bad("loop.kappa", "must be > 0"));
        }
        let g0 = num("loop.g0", &l.g0)?;
        let rho = num("loop.rho", &l.rho)?;
        if rho < 0 {
            return Err(bad("loop.rho", "must be >= 0"));
        }
        let omega = match (&l.omega, &l.inv_omega) {
            (Some(_), Some(_)) => return Err(bad("loop.omega", "give either omega or inv_omega, not both")),
            (None, None) => return Err(bad("loop.omega", "missing (or give loop.inv_omega)")),
            (Some(w), None) => {
                let w = num("loop.omega", w)?;
                if w <= 0 {
                    return Err(bad("loop.omega", "must be > 0"));
                }
                w
            }
            (None, Some(inv)) => {
                let inv = num("loop.inv_omega", inv)?;
                if inv <= 0 {
                    return Err(bad("loop.inv_omega", "must be > 0"));
                }
                inv.recip()
            }
        };
        let theta_i: Angle = l.theta_i.parse().map_err(|e| bad("loop.theta_i", e))?;
        let spec = LoopSpec {
            kappa,
            g0,
            rho,
            theta_i,
            omega,
            direction: l.direction,
        };
        spec.validate().map_err(|e| bad("loop", e))?;

        let p = &self.precision;
        let max = if p.escalate { p.max_digits } else { p.digits };
        let ctx = PrecisionContext::with_policy(p.digits, p.guard_digits, max).map_err(|e| bad("precision", e))?;
        let int_ctx =
            PrecisionContext::with_policy(p.digits, p.guard_digits, p.max_digits).map_err(|e| bad("precision", e))?;
        let ispec = IntegrationSpec::new(self.integration.steps, int_ctx).map_err(|e| bad("integration.steps", e))?;
        let n = &self.noise;
        let noise = NoiseSpec::new(n.epsilon, n.seed, n.realizations).map_err(|e| bad("noise", e))?;
        if let Some(b) = &self.boundary {
            if b.inv_omegas.is_empty() || b.inv_omegas.iter().any(|v| !(*v > 0.0)) {
                return Err(bad("boundary.inv_omegas", "need positive values"));
            }
            if b.points < 2 || b.log10_inv_epsilon_min >= b.log10_inv_epsilon_max {
                return Err(bad("boundary", "need points >= 2 and log10_inv_epsilon_min < log10_inv_epsilon_max"));
            }
            if !(b.threshold > 0.0 && b.threshold < 1.0) {
                return Err(bad("boundary.threshold", "must lie in (0, 1)"));
            }
        }
        if self.profile.samples < 64 {
            return Err(bad("profile.samples", "must be >= 64"));
        }
        Ok(Resolved {
            spec,
            ctx,
            ispec,
            noise,
        })
    }

    pub fn sweep_plan(&self, r: &Resolved) -> Result<(SweepPlan, &SweepConfig), CliError> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| bad("sweep", "the sweep command needs a [sweep] section"))?;
        let plan = SweepPlan {
            axes: s.axes.clone(),
            template: r.spec.clone(),
            noise: r.noise,
            integration: r.ispec,
            quantity: s.quantity,
            master_seed: s.master_seed.unwrap_or(r.noise.seed),
            profile_samples: s.profile_samples,
        };
        plan.validate().map_err(|e| bad("sweep", e))?;
        Ok((plan, s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[loop]
rho = 1
theta_i = "pi"
omega = 0.2
"#;

    #[test]
    fn numbers_are_read_exactly() {
        let c = RunConfig::parse(BASIC).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.spec.omega, parse_rational("1/5").unwrap());
        assert_eq!(r.spec.theta_i, Angle::pi_multiple(1));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{BASIC}\n[noise]\nepsilom = 1e-3\n");
        assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn zero_omega_names_the_field() {
        let c = RunConfig::parse("[loop]\nrho = 1\nomega = 0\n").unwrap();
        match c.resolve() {
            Err(CliError::Config(msg)) => assert!(msg.contains("loop.omega"), "{msg}"),
            _ => panic!("expected a config error"),
        }
    }

    #[test]
    fn overrides_win_and_echo_round_trips() {
        let mut c = RunConfig::parse(BASIC).unwrap();
        c.apply(&Overrides {
            digits: Some(60),
            epsilon: Some(1e-5),
            ..Default::default()
        });
        let echoed = RunConfig::parse(&c.to_toml()).unwrap();
        let r = echoed.resolve().unwrap();
        assert_eq!(r.ctx.digits(), 60);
        assert_eq!(r.noise.epsilon, 1e-5);
    }

    #[test]
    fn escalation_switch_caps_digits() {
        let text = format!("{BASIC}\n[precision]\ndigits = 16\nescalate = false\n");
        let r = RunConfig::parse(&text).unwrap().resolve().unwrap();
        assert_eq!(r.ctx.max_digits(), 16);
        assert_eq!(r.ispec.ctx.max_digits(), 2000);
    }
}
