//! Worked examples with physical parameters and the maps between the
//! delayed coefficients `b` and the physical controller gains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::admissibility::solve_for_tau;
use crate::placement::{solve_control_mid, PlacementResult};

pub const DEFAULT_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "lowercase")]
pub enum ExampleSystem {
    /// `y'' + y = u` with `u(t) = -β y(t-τ) - α y'(t-τ)`.
    Oscillator,
    /// Stick of mass `mass` and length `length` on a cart, delayed PD force.
    /// Omitted parameters take the worked-example values.
    Pendulum {
        #[serde(default = "dflt::mass")]
        mass: f64,
        #[serde(default = "dflt::length")]
        length: f64,
        #[serde(default = "dflt::gravity")]
        gravity: f64,
    },
    /// Mach-number loop of a transonic wind tunnel with guide-vane dynamics.
    Windtunnel {
        #[serde(default = "dflt::kappa")]
        kappa: f64,
        #[serde(default = "dflt::k")]
        k: f64,
        #[serde(default = "dflt::tau0")]
        tau0: f64,
        #[serde(default = "dflt::zeta")]
        zeta: f64,
        #[serde(default = "dflt::omega")]
        omega: f64,
    },
}

mod dflt {
    pub fn mass() -> f64 {
        10.0
    }
    pub fn length() -> f64 {
        10.0
    }
    pub fn gravity() -> f64 {
        super::DEFAULT_GRAVITY
    }
    pub fn kappa() -> f64 {
        1.964
    }
    pub fn k() -> f64 {
        -0.67036
    }
    pub fn tau0() -> f64 {
        0.33
    }
    pub fn zeta() -> f64 {
        0.4368
    }
    pub fn omega() -> f64 {
        3.292
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExampleId {
    Oscillator,
    Pendulum,
    Windtunnel,
}

impl ExampleId {
    pub const ALL: [ExampleId; 3] = [Self::Oscillator, Self::Pendulum, Self::Windtunnel];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Oscillator => "oscillator",
            Self::Pendulum => "pendulum",
            Self::Windtunnel => "windtunnel",
        }
    }
}

impl std::str::FromStr for ExampleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown example `{s}` (oscillator, pendulum, windtunnel)")))
    }
}

/// Controller gain recovered from a placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalGain {
    pub name: String,
    pub value: f64,
    pub unit: String,
}

/// Problem data handed to the placement solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub a: Vec<f64>,
    pub m: usize,
    /// One line per gain relation, e.g. `K_p = b0 · 2I/ℓ`.
    pub gain_map: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterInfo {
    pub name: String,
    pub unit: String,
    pub default: f64,
    pub constraint: String,
}

/// Catalog entry as exposed to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleDescriptor {
    pub id: ExampleId,
    pub title: String,
    pub parameters: Vec<ParameterInfo>,
    pub problem: Problem,
    /// Suggested design point `(s₀, τ)` from the worked example.
    pub design: (f64, f64),
}

fn param(name: &str, unit: &str, default: f64, constraint: &str) -> ParameterInfo {
    ParameterInfo { name: name.into(), unit: unit.into(), default, constraint: constraint.into() }
}

impl ExampleSystem {
    pub fn defaults(id: ExampleId) -> Self {
        match id {
            ExampleId::Oscillator => Self::Oscillator,
            ExampleId::Pendulum => Self::Pendulum { mass: dflt::mass(), length: dflt::length(), gravity: dflt::gravity() },
            ExampleId::Windtunnel => Self::Windtunnel {
                kappa: dflt::kappa(),
                k: dflt::k(),
                tau0: dflt::tau0(),
                zeta: dflt::zeta(),
                omega: dflt::omega(),
            },
        }
    }

    pub fn id(&self) -> ExampleId {
        match self {
            Self::Oscillator => ExampleId::Oscillator,
            Self::Pendulum { .. } => ExampleId::Pendulum,
            Self::Windtunnel { .. } => ExampleId::Windtunnel,
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            Self::Oscillator => "Harmonic oscillator",
            Self::Pendulum { .. } => "Inverted pendulum on a cart",
            Self::Windtunnel { .. } => "Transonic wind tunnel",
        }
    }

    /// `(s₀, τ)` used in the worked example.
    pub fn design_point(&self) -> (f64, f64) {
        match self {
            Self::Oscillator => (-1.0, 1.0),
            Self::Pendulum { .. } => (-5.0, 0.1120),
            Self::Windtunnel { .. } => (-2.94675, 0.4140),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("nonphysical parameter: {what}")));
        match *self {
            Self::Oscillator => Ok(()),
            Self::Pendulum { mass, length, gravity } => {
                if !(mass.is_finite() && length.is_finite() && gravity.is_finite()) {
                    return Err(Error::NonFiniteArgument);
                }
                if mass <= 0.0 {
                    return bad("mass must be positive");
                }
                if length <= 0.0 {
                    return bad("length must be positive");
                }
                if gravity <= 0.0 {
                    return bad("gravity must be positive");
                }
                Ok(())
            }
            Self::Windtunnel { kappa, k, tau0, zeta, omega } => {
                if ![kappa, k, tau0, zeta, omega].iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFiniteArgument);
                }
                if kappa <= 0.0 {
                    return bad("kappa must be positive");
                }
                if k == 0.0 {
                    return bad("k must be nonzero");
                }
                if tau0 <= 0.0 {
                    return bad("tau0 must be positive");
                }
                if zeta < 0.0 {
                    return bad("zeta must be nonnegative");
                }
                if omega <= 0.0 {
                    return bad("omega must be positive");
                }
                Ok(())
            }
        }
    }

    /// Moment of inertia `I = m ℓ²/12` of the pendulum stick.
    pub fn inertia(&self) -> Option<f64> {
        match *self {
            Self::Pendulum { mass, length, .. } => Some(mass * length * length / 12.0),
            _ => None,
        }
    }

    pub fn parameters(&self) -> Vec<ParameterInfo> {
        match *self {
            Self::Oscillator => Vec::new(),
            Self::Pendulum { mass, length, gravity } => vec![
                param("mass", "kg", mass, "> 0"),
                param("length", "m", length, "> 0"),
                param("gravity", "m/s^2", gravity, "> 0"),
            ],
            Self::Windtunnel { kappa, k, tau0, zeta, omega } => vec![
                param("kappa", "s", kappa, "> 0"),
                param("k", "1/rad", k, "!= 0"),
                param("tau0", "s", tau0, "> 0"),
                param("zeta", "", zeta, ">= 0"),
                param("omega", "rad/s", omega, "> 0"),
            ],
        }
    }

    pub fn descriptor(&self) -> Result<ExampleDescriptor> {
        Ok(ExampleDescriptor {
            id: self.id(),
            title: self.title().into(),
            parameters: self.parameters(),
            problem: example_to_problem(self)?,
            design: self.design_point(),
        })
    }

    /// Delayed coefficients `b` reproducing the given gains; inverse of [`recover_gains`]
    /// (gain values in the same order, without the derived delay entry).
    pub fn b_from_gains(&self, gains: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        let want = match self {
            Self::Windtunnel { .. } => 3,
            _ => 2,
        };
        if gains.len() != want {
            return Err(Error::InvalidParameter(format!("expected {want} gains, got {}", gains.len())));
        }
        Ok(match *self {
            Self::Oscillator => vec![gains[0], gains[1]],
            Self::Pendulum { length, .. } => {
                let f = length / (2.0 * self.inertia().unwrap_or(1.0));
                vec![gains[0] * f, gains[1] * f]
            }
            Self::Windtunnel { kappa, k, .. } => {
                let (beta, alpha0, alpha1) = (gains[0], gains[1], gains[2]);
                vec![(alpha0 + beta * k) / kappa, alpha0 + alpha1 / kappa, alpha1]
            }
        })
    }
}

/// Catalog with default parameters.
pub fn catalog() -> Vec<ExampleDescriptor> {
    ExampleId::ALL
        .into_iter()
        .map(|id| ExampleSystem::defaults(id).descriptor().expect("defaults are physical"))
        .collect()
}

/// Open-loop coefficients, delayed degree and gain relations of an example.
pub fn example_to_problem(ex: &ExampleSystem) -> Result<Problem> {
    ex.validate()?;
    let lines = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
    Ok(match *ex {
        ExampleSystem::Oscillator => Problem { a: vec![1.0, 0.0], m: 1, gain_map: lines(&["beta = b0", "alpha = b1"]) },
        ExampleSystem::Pendulum { mass, length, gravity } => {
            let inertia = ex.inertia().unwrap_or(1.0);
            Problem {
                a: vec![-mass * gravity * length / (2.0 * inertia), 0.0],
                m: 1,
                gain_map: lines(&["K_p = b0 * 2I/l", "K_d = b1 * 2I/l"]),
            }
        }
        ExampleSystem::Windtunnel { kappa, zeta, omega, .. } => Problem {
            a: vec![
                omega * omega / kappa,
                omega * omega + 2.0 * zeta * omega / kappa,
                2.0 * zeta * omega + 1.0 / kappa,
            ],
            m: 2,
            gain_map: lines(&[
                "alpha1 = gamma2",
                "alpha0 = gamma1 - gamma2/kappa",
                "beta = (gamma0*kappa - alpha0)/k",
                "tau1 = tau - tau0",
            ]),
        },
    })
}

/// Physical gains of the controller realizing `placement`.
/// Control-oriented MID design at the example's `s₀`, using the admissible
/// delay closest to the worked example's delay.
pub fn design_placement(ex: &ExampleSystem) -> Result<PlacementResult> {
    let problem = example_to_problem(ex)?;
    let (s0, tau_hint) = ex.design_point();
    let tau = solve_for_tau(&problem.a, problem.m, s0)?
        .into_iter()
        .min_by(|x, y| (x - tau_hint).abs().total_cmp(&(y - tau_hint).abs()))
        .ok_or_else(|| Error::InvalidParameter(format!("no admissible delay for s0 = {s0}")))?;
    solve_control_mid(&problem.a, problem.m, tau, s0)
}

pub fn recover_gains(ex: &ExampleSystem, placement: &PlacementResult) -> Result<Vec<PhysicalGain>> {
    ex.validate()?;
    let b = placement.qp.b();
    let want = example_to_problem(ex)?.m + 1;
    if b.len() != want {
        return Err(Error::InvalidParameter(format!(
            "placement has {} delayed coefficients, example expects {want}",
            b.len()
        )));
    }
    let gain = |name: &str, value: f64, unit: &str| PhysicalGain { name: name.into(), value, unit: unit.into() };
    Ok(match *ex {
        ExampleSystem::Oscillator => vec![gain("beta", b[0], ""), gain("alpha", b[1], "")],
        ExampleSystem::Pendulum { length, .. } => {
            let f = 2.0 * ex.inertia().unwrap_or(1.0) / length;
            vec![gain("K_p", b[0] * f, "N/rad"), gain("K_d", b[1] * f, "N s/rad")]
        }
        ExampleSystem::Windtunnel { kappa, k, tau0, .. } => {
            let tau = placement.qp.tau();
            if tau < tau0 {
                return Err(Error::DelayBelowPhysicalMinimum { tau, tau0 });
            }
            let alpha1 = b[2];
            let alpha0 = b[1] - b[2] / kappa;
            let beta = (b[0] * kappa - alpha0) / k;
            vec![
                gain("beta", beta, ""),
                gain("alpha0", alpha0, ""),
                gain("alpha1", alpha1, ""),
                gain("tau1", tau - tau0, "s"),
            ]
        }
    })
}
