//! Request and response types for every endpoint, and the transport-free
//! handlers that produce response bodies. The HTTP server and the CLI's
//! `--json` mode both go through [`handle`], so their outputs are identical.

use std::collections::BTreeSet;

use delaylab::admissibility::{compute_grid_with_cap, solve_for_s0, solve_for_tau, AdmissibilityGrid};
use delaylab::catalog::{catalog, example_to_problem, recover_gains, ExampleDescriptor, ExampleSystem, PhysicalGain};
use delaylab::dde_sim::{simulate, HistorySpec, SimulationResult};
use delaylab::factorization::{hypergeometric_form, integral_form, FactorizedForm};
use delaylab::report::{build_report, render_html, render_json, Metadata, ReportMode, ReportPayloads};
use delaylab::spectrum::{compute_spectrum_with_grid, sensitivity_sweep, SensitivityTrace, SpectralWindow, Spectrum, DEFAULT_GRID};
use delaylab::{solve_control_mid, solve_crrid, solve_generic_mid, Error, PlacementResult, Quasipolynomial};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The "software limits". Disabled only through configuration.
pub const MAX_ORDER: usize = 12;
pub const MAX_GRID: usize = 2000;
pub const MAX_STEPS: usize = 10_000;
pub const MAX_SIMULATION_SAMPLES: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub enabled: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Self { enabled: true }
    }
}

impl Limits {
    /// `DELAYLAB_LIMITS=off` (or `0`, `false`) disables the caps.
    pub fn from_env() -> Self {
        let off = std::env::var("DELAYLAB_LIMITS")
            .map(|v| matches!(v.trim().to_ascii_lowercase().as_str(), "off" | "0" | "false" | "no"))
            .unwrap_or(false);
        Self { enabled: !off }
    }

    fn check(&self, what: &str, requested: f64, cap: f64) -> Result<(), ApiFailure> {
        if self.enabled && requested > cap {
            return Err(ApiFailure {
                status: 413,
                error: ApiError {
                    code: "limit_exceeded".into(),
                    message: format!("{what} {requested} exceeds the software limit {cap}"),
                    detail: Some(json!({ "limit": what, "requested": requested, "cap": cap })),
                },
            });
        }
        Ok(())
    }

    fn order(&self, n: usize) -> Result<(), ApiFailure> {
        self.check("order n", n as f64, MAX_ORDER as f64)
    }

    fn grid(&self, a: usize, b: usize) -> Result<(), ApiFailure> {
        self.check("grid resolution", a.max(b) as f64, MAX_GRID as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

/// Error codes that are not produced by the numerical core.
pub const TRANSPORT_CODES: [&str; 4] = ["invalid_request", "limit_exceeded", "not_found", "internal"];

#[derive(Debug, Clone, PartialEq)]
pub struct ApiFailure {
    pub status: u16,
    pub error: ApiError,
}

impl ApiFailure {
    fn invalid(message: impl Into<String>) -> Self {
        Self { status: 400, error: ApiError { code: "invalid_request".into(), message: message.into(), detail: None } }
    }
}

impl From<Error> for ApiFailure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::GridTooLarge { .. } => 413,
            _ if e.is_validation() => 400,
            _ => 422,
        };
        let detail = match &e {
            Error::DegeneratePlacement { s0, tau, condition } => {
                Some(json!({ "s0": s0, "tau": tau, "condition": finite_or_null(*condition) }))
            }
            Error::CertificationFailed { winding, located } => Some(json!({ "winding": winding, "located": located })),
            Error::GridTooLarge { requested, cap } | Error::OrderExceedsCap { requested, cap } => {
                Some(json!({ "requested": requested, "cap": cap }))
            }
            Error::StepTooLarge { h, limit } => Some(json!({ "h": h, "limit": limit })),
            Error::DelayBelowPhysicalMinimum { tau, tau0 } => Some(json!({ "tau": tau, "tau0": tau0 })),
            _ => None,
        };
        Self { status, error: ApiError { code: e.code().into(), message: e.to_string(), detail } }
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    GenericMid,
    ControlMid,
    Crrid,
    Admissibility,
    Spectrum,
    Sensitivity,
    Simulate,
    Factorization,
    Report,
    Examples,
    Health,
}

impl Route {
    pub const ALL: [Route; 11] = [
        Route::GenericMid,
        Route::ControlMid,
        Route::Crrid,
        Route::Admissibility,
        Route::Spectrum,
        Route::Sensitivity,
        Route::Simulate,
        Route::Factorization,
        Route::Report,
        Route::Examples,
        Route::Health,
    ];

    pub fn path(self) -> &'static str {
        match self {
            Route::GenericMid => "/api/v1/placement/generic-mid",
            Route::ControlMid => "/api/v1/placement/control-mid",
            Route::Crrid => "/api/v1/placement/crrid",
            Route::Admissibility => "/api/v1/admissibility",
            Route::Spectrum => "/api/v1/spectrum",
            Route::Sensitivity => "/api/v1/sensitivity",
            Route::Simulate => "/api/v1/simulate",
            Route::Factorization => "/api/v1/factorization",
            Route::Report => "/api/v1/report",
            Route::Examples => "/api/v1/examples",
            Route::Health => "/api/v1/health",
        }
    }

    pub fn is_get(self) -> bool {
        matches!(self, Route::Examples | Route::Health)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericMidRequest {
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    pub s0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Largest `s₀` for a given delay.
    Rightmost,
    /// Smallest delay for a given `s₀`.
    Smallest,
    All,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlMidRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Alternative to `a` and `m`; adds physical gains to each solution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<ExampleSystem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<Branch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSolution {
    pub s0: f64,
    pub tau: f64,
    pub b: Vec<f64>,
    pub residuals: Vec<f64>,
    pub placement: PlacementResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<PhysicalGain>>,
    /// Why `gains` is absent although an example was given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains_error: Option<ApiError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlMidResponse {
    pub solutions: Vec<ControlSolution>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrridRequest {
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    pub roots: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmissibilityRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<ExampleSystem>,
    pub s0_min: f64,
    pub tau_max: f64,
    pub ns0: usize,
    pub ntau: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumRequest {
    pub qp: Quasipolynomial,
    pub window: SpectralWindow,
    /// `[real samples, imaginary samples]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityRequest {
    pub qp: Quasipolynomial,
    pub s0: f64,
    pub span: f64,
    pub steps: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub qp: Quasipolynomial,
    pub history: HistorySpec,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    #[default]
    Integral,
    Hypergeometric,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorizationRequest {
    pub qp: Quasipolynomial,
    pub s0: f64,
    /// Defaults to the full degree `n + m + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicity: Option<usize>,
    #[serde(default)]
    pub kind: FormKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationResponse {
    pub form: FactorizedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Html,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRequest {
    pub selection: Vec<ReportMode>,
    #[serde(default)]
    pub payloads: ReportPayloads,
    pub format: ReportFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    /// Echoed into the document; omit for reproducible output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamplesResponse {
    pub examples: Vec<ExampleDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub version: String,
}

fn problem_from(a: Option<Vec<f64>>, m: Option<usize>, example: Option<&ExampleSystem>) -> Result<(Vec<f64>, usize), ApiFailure> {
    match (a, m, example) {
        (Some(a), Some(m), None) => Ok((a, m)),
        (None, None, Some(ex)) => {
            let p = example_to_problem(ex)?;
            Ok((p.a, p.m))
        }
        _ => Err(ApiFailure::invalid("give either both `a` and `m`, or `example`")),
    }
}

pub fn generic_mid(req: GenericMidRequest, limits: &Limits) -> Result<PlacementResult, ApiFailure> {
    limits.order(req.n)?;
    Ok(solve_generic_mid(req.n, req.m, req.tau, req.s0)?)
}

pub fn control_mid(req: ControlMidRequest, limits: &Limits) -> Result<ControlMidResponse, ApiFailure> {
    let (a, m) = problem_from(req.a, req.m, req.example.as_ref())?;
    limits.order(a.len())?;
    let pairs: Vec<(f64, f64)> = match (req.tau, req.s0) {
        (Some(tau), None) => {
            let branch = req.branch.unwrap_or(Branch::Rightmost);
            if branch == Branch::Smallest {
                return Err(ApiFailure::invalid("branch `smallest` selects a delay; give `s0` instead of `tau`"));
            }
            let roots = solve_for_s0(&a, m, tau)?;
            let take = if branch == Branch::All { roots.len() } else { 1 };
            roots.into_iter().take(take).map(|s0| (s0, tau)).collect()
        }
        (None, Some(s0)) => {
            let branch = req.branch.unwrap_or(Branch::Smallest);
            if branch == Branch::Rightmost {
                return Err(ApiFailure::invalid("branch `rightmost` selects s0; give `tau` instead of `s0`"));
            }
            let taus = solve_for_tau(&a, m, s0)?;
            let take = if branch == Branch::All { taus.len() } else { 1 };
            taus.into_iter().take(take).map(|tau| (s0, tau)).collect()
        }
        _ => return Err(ApiFailure::invalid("give exactly one of `tau` and `s0`")),
    };
    let solutions = pairs
        .into_iter()
        .map(|(s0, tau)| {
            let placement = solve_control_mid(&a, m, tau, s0)?;
            let (gains, gains_error) = match req.example.as_ref().map(|ex| recover_gains(ex, &placement)) {
                None => (None, None),
                Some(Ok(g)) => (Some(g), None),
                Some(Err(e)) => (None, Some(ApiFailure::from(e).error)),
            };
            Ok(ControlSolution {
                s0,
                tau,
                b: placement.qp.b().to_vec(),
                residuals: placement.residuals.clone(),
                placement,
                gains,
                gains_error,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(ControlMidResponse { solutions })
}

pub fn crrid(req: CrridRequest, limits: &Limits) -> Result<PlacementResult, ApiFailure> {
    limits.order(req.n)?;
    Ok(solve_crrid(req.n, req.m, req.tau, &req.roots)?)
}

pub fn admissibility(req: AdmissibilityRequest, limits: &Limits) -> Result<AdmissibilityGrid, ApiFailure> {
    let (a, m) = problem_from(req.a, req.m, req.example.as_ref())?;
    limits.order(a.len())?;
    limits.grid(req.ns0, req.ntau)?;
    let cap = if limits.enabled { Some(MAX_GRID) } else { None };
    Ok(compute_grid_with_cap(&a, m, req.s0_min, req.tau_max, req.ns0, req.ntau, cap)?)
}

pub fn spectrum(req: SpectrumRequest, limits: &Limits) -> Result<Spectrum, ApiFailure> {
    limits.order(req.qp.n())?;
    let grid = req.grid.map_or(DEFAULT_GRID, |[a, b]| (a, b));
    limits.grid(grid.0, grid.1)?;
    let w = req.window;
    let window = SpectralWindow::new(w.x_min, w.x_max, w.y_max)?;
    Ok(compute_spectrum_with_grid(&req.qp, &window, grid)?)
}

pub fn sensitivity(req: SensitivityRequest, limits: &Limits) -> Result<SensitivityTrace, ApiFailure> {
    limits.order(req.qp.n())?;
    limits.check("steps", req.steps as f64, MAX_STEPS as f64)?;
    limits.check("iterations", req.iterations as f64, MAX_STEPS as f64)?;
    Ok(sensitivity_sweep(&req.qp, req.s0, req.span, req.steps, req.iterations)?)
}

pub fn simulate_endpoint(req: SimulateRequest, limits: &Limits) -> Result<SimulationResult, ApiFailure> {
    limits.order(req.qp.n())?;
    if req.h > 0.0 && req.t_end.is_finite() {
        limits.check("T/h", req.t_end / req.h, MAX_SIMULATION_SAMPLES)?;
    }
    Ok(simulate(&req.qp, &req.history, req.t_end, req.h)?)
}

pub fn factorization(req: FactorizationRequest, limits: &Limits) -> Result<FactorizationResponse, ApiFailure> {
    limits.order(req.qp.n())?;
    let multiplicity = req.multiplicity.unwrap_or_else(|| req.qp.degree());
    let form = match req.kind {
        FormKind::Integral => integral_form(&req.qp, req.s0, multiplicity)?,
        FormKind::Hypergeometric => hypergeometric_form(&req.qp, req.s0, multiplicity)?,
    };
    Ok(FactorizationResponse { form })
}

/// Returns the rendered document and its content type.
pub fn report(req: ReportRequest) -> Result<(String, &'static str), ApiFailure> {
    let selection: BTreeSet<ReportMode> = req.selection.iter().copied().collect();
    if selection.len() != req.selection.len() {
        return Err(ApiFailure::invalid("selection lists a mode twice"));
    }
    let mut meta = Metadata::new(req.title.unwrap_or_else(|| "Design report".into()));
    meta.timestamp = req.timestamp;
    let doc = build_report(&selection, &req.payloads, meta)?;
    Ok(match req.format {
        ReportFormat::Html => (render_html(&doc), "text/html; charset=utf-8"),
        ReportFormat::Json => (render_json(&doc), "application/json"),
    })
}

pub fn examples() -> ExamplesResponse {
    ExamplesResponse { examples: catalog() }
}

pub fn health() -> HealthResponse {
    HealthResponse { status: "ok".into(), version: VERSION.into() }
}

/// A complete response: status, content type and body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl Reply {
    fn json<T: Serialize>(status: u16, value: &T) -> Self {
        match serde_json::to_vec(value) {
            Ok(body) => Self { status, content_type: "application/json", body },
            Err(e) => Self::failure(ApiFailure {
                status: 500,
                error: ApiError { code: "internal".into(), message: e.to_string(), detail: None },
            }),
        }
    }

    pub fn failure(f: ApiFailure) -> Self {
        let body = serde_json::to_vec(&f.error).expect("errors serialize");
        Self { status: f.status, content_type: "application/json", body }
    }

    pub fn not_found(path: &str) -> Self {
        Self::failure(ApiFailure {
            status: 404,
            error: ApiError { code: "not_found".into(), message: format!("no endpoint at {path}"), detail: None },
        })
    }
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiFailure> {
    serde_json::from_slice(body).map_err(|e| ApiFailure::invalid(format!("malformed request body: {e}")))
}

fn respond<Req: DeserializeOwned, Resp: Serialize>(
    body: &[u8],
    f: impl FnOnce(Req) -> Result<Resp, ApiFailure>,
) -> Reply {
    match parse(body).and_then(f) {
        Ok(r) => Reply::json(200, &r),
        Err(e) => Reply::failure(e),
    }
}

/// Runs one request. `body` is ignored for GET routes.
pub fn handle(route: Route, body: &[u8], limits: &Limits) -> Reply {
    match route {
        Route::GenericMid => respond(body, |r| generic_mid(r, limits)),
        Route::ControlMid => respond(body, |r| control_mid(r, limits)),
        Route::Crrid => respond(body, |r| crrid(r, limits)),
        Route::Admissibility => respond(body, |r| admissibility(r, limits)),
        Route::Spectrum => respond(body, |r| spectrum(r, limits)),
        Route::Sensitivity => respond(body, |r| sensitivity(r, limits)),
        Route::Simulate => respond(body, |r| simulate_endpoint(r, limits)),
        Route::Factorization => respond(body, |r| factorization(r, limits)),
        Route::Report => match parse(body).and_then(report) {
            Ok((text, content_type)) => Reply { status: 200, content_type, body: text.into_bytes() },
            Err(e) => Reply::failure(e),
        },
        Route::Examples => Reply::json(200, &examples()),
        Route::Health => Reply::json(200, &health()),
    }
}
