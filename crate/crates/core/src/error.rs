use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid quasipolynomial: {0}")]
    InvalidQuasipolynomial(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite argument")]
    NonFiniteArgument,

    #[error("derivative order too large (requested {requested}, cap {cap})")]
    DerivativeOrderTooLarge { requested: usize, cap: usize },

    #[error("degenerate placement system (s0 = {s0}, tau = {tau}, condition estimate {condition:.3e})")]
    DegeneratePlacement { s0: f64, tau: f64, condition: f64 },

    #[error("roots must be distinct")]
    RootsNotDistinct,

    #[error("grid too large ({requested} > {cap})")]
    GridTooLarge { requested: usize, cap: usize },

    #[error("contour through root")]
    ContourThroughRoot,

    #[error("certification failed: winding number {winding}, located roots {located}")]
    CertificationFailed { winding: i64, located: i64 },

    #[error("neutral chain unbounded (|b_n| = {0} >= 1)")]
    NeutralChainUnbounded(f64),

    #[error("bound unavailable for neutral type")]
    BoundUnavailableForNeutral,

    #[error("multiplicity condition violated at derivative order {order}")]
    MultiplicityConditionViolated { order: usize },

    #[error("order exceeds cap ({requested} > {cap})")]
    OrderExceedsCap { requested: usize, cap: usize },

    #[error("factorization not representable (residual {residual:.3e})")]
    FactorizationNotRepresentable { residual: f64 },

    #[error("hypergeometric form unavailable")]
    HypergeometricUnavailable,

    #[error("argument outside series regime (|z| = {0})")]
    ArgumentOutsideSeriesRegime(f64),

    #[error("simulation restricted to retarded type")]
    SimulationRestrictedToRetarded,

    #[error("step too large: h = {h} exceeds tau/10 = {limit}")]
    StepTooLarge { h: f64, limit: f64 },

    #[error("signal too short")]
    SignalTooShort,

    #[error("selection without result: {0}")]
    SelectionWithoutResult(String),

    #[error("delay below physical minimum tau0 (tau = {tau}, tau0 = {tau0})")]
    DelayBelowPhysicalMinimum { tau: f64, tau0: f64 },
}

impl Error {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidQuasipolynomial(_) => "invalid_quasipolynomial",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NonFiniteArgument => "non_finite_argument",
            Error::DerivativeOrderTooLarge { .. } => "derivative_order_too_large",
            Error::DegeneratePlacement { .. } => "degenerate_placement_system",
            Error::RootsNotDistinct => "roots_not_distinct",
            Error::GridTooLarge { .. } => "grid_too_large",
            Error::ContourThroughRoot => "contour_through_root",
            Error::CertificationFailed { .. } => "certification_failed",
            Error::NeutralChainUnbounded(_) => "neutral_chain_unbounded",
            Error::BoundUnavailableForNeutral => "bound_unavailable_for_neutral",
            Error::MultiplicityConditionViolated { .. } => "multiplicity_condition_violated",
            Error::OrderExceedsCap { .. } => "order_exceeds_cap",
            Error::FactorizationNotRepresentable { .. } => "factorization_not_representable",
            Error::HypergeometricUnavailable => "hypergeometric_unavailable",
            Error::ArgumentOutsideSeriesRegime(_) => "argument_outside_series_regime",
            Error::SimulationRestrictedToRetarded => "simulation_restricted_to_retarded",
            Error::StepTooLarge { .. } => "step_too_large",
            Error::SignalTooShort => "signal_too_short",
            Error::SelectionWithoutResult(_) => "selection_without_result",
            Error::DelayBelowPhysicalMinimum { .. } => "delay_below_physical_minimum",
        }
    }

    /// `true` for errors caused by bad input rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidQuasipolynomial(_)
                | Error::InvalidParameter(_)
                | Error::NonFiniteArgument
                | Error::DerivativeOrderTooLarge { .. }
                | Error::RootsNotDistinct
                | Error::GridTooLarge { .. }
                | Error::NeutralChainUnbounded(_)
                | Error::BoundUnavailableForNeutral
                | Error::OrderExceedsCap { .. }
                | Error::ArgumentOutsideSeriesRegime(_)
                | Error::SimulationRestrictedToRetarded
                | Error::StepTooLarge { .. }
                | Error::SelectionWithoutResult(_)
                | Error::DelayBelowPhysicalMinimum { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
