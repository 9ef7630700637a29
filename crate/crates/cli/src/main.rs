use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use delaylab::catalog::{design_placement, ExampleId, ExampleSystem};
use delaylab::dde_sim::{estimate_decay_rate_with_multiplicity, HistorySpec};
use delaylab::report::{ReportMode, ReportPayloads};
use delaylab::spectrum::{check_dominance, SpectralWindow};
use delaylab::Quasipolynomial;
use delaylab_service::api::{self, ApiFailure, Branch, FormKind, Limits, ReportFormat};

mod args;
mod output;

use args::{parse_grid, parse_history, parse_list, parse_mode, parse_window, List, TauArg};
use output::{fmt, fmt_vec, table, Output};

#[derive(Parser)]
#[command(name = "delaylab", version, about = "Partial pole placement for linear time-delay systems")]
struct Cli {
    /// Print the machine-readable payload (identical to the HTTP service response).
    #[arg(long, global = true)]
    json: bool,
    /// Also write the result to FILE: CSV for grids, spectra, sweeps and
    /// simulations, JSON otherwise; a `.json` extension always selects JSON.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Open-loop problem: explicit `a`/`m`, or a catalog example.
#[derive(Args, Clone, Default)]
struct ProblemArgs {
    /// Coefficients a_0..a_{n-1} of the monic polynomial, comma separated.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
    a: Option<List>,
    /// Degree of the delayed polynomial.
    #[arg(long)]
    m: Option<usize>,
    #[command(flatten)]
    example: ExampleArgs,
}

#[derive(Args, Clone, Default)]
struct ExampleArgs {
    /// Worked example: oscillator, pendulum or windtunnel.
    #[arg(long)]
    example: Option<ExampleId>,
    /// Pendulum gravity in m/s^2.
    #[arg(long)]
    gravity: Option<f64>,
    /// Pendulum mass in kg.
    #[arg(long)]
    mass: Option<f64>,
    /// Pendulum length in m.
    #[arg(long)]
    length: Option<f64>,
    /// Wind tunnel time constant kappa in s.
    #[arg(long)]
    kappa: Option<f64>,
    /// Wind tunnel gain k in 1/rad.
    #[arg(long = "k", allow_hyphen_values = true)]
    gain_k: Option<f64>,
    /// Wind tunnel transport delay tau0 in s.
    #[arg(long)]
    tau0: Option<f64>,
    /// Wind tunnel damping ratio.
    #[arg(long)]
    zeta: Option<f64>,
    /// Wind tunnel natural frequency in rad/s.
    #[arg(long)]
    omega: Option<f64>,
}

impl ExampleArgs {
    fn system(&self) -> Option<ExampleSystem> {
        let mut ex = ExampleSystem::defaults(self.example?);
        match &mut ex {
            ExampleSystem::Oscillator => {}
            ExampleSystem::Pendulum { mass, length, gravity } => {
                *mass = self.mass.unwrap_or(*mass);
                *length = self.length.unwrap_or(*length);
                *gravity = self.gravity.unwrap_or(*gravity);
            }
            ExampleSystem::Windtunnel { kappa, k, tau0, zeta, omega } => {
                *kappa = self.kappa.unwrap_or(*kappa);
                *k = self.gain_k.unwrap_or(*k);
                *tau0 = self.tau0.unwrap_or(*tau0);
                *zeta = self.zeta.unwrap_or(*zeta);
                *omega = self.omega.unwrap_or(*omega);
            }
        }
        Some(ex)
    }
}

/// Closed-loop quasipolynomial: JSON, explicit coefficients, or an example's design.
#[derive(Args, Clone)]
struct QpArgs {
    /// Quasipolynomial as canonical JSON, or @FILE.
    #[arg(long)]
    qp: Option<String>,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
    a: Option<List>,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
    b: Option<List>,
    #[arg(long)]
    tau: Option<f64>,
    /// Use the designed closed loop of a worked example.
    #[command(flatten)]
    example: ExampleArgs,
}

impl QpArgs {
    /// The quasipolynomial and, for examples, the designed root.
    fn resolve(&self) -> Result<(Quasipolynomial, Option<f64>), Failure> {
        if let Some(ex) = self.example.system() {
            let p = design_placement(&ex)?;
            return Ok((p.qp, Some(p.targets.rightmost())));
        }
        if let Some(text) = &self.qp {
            let text = read_arg(text)?;
            let qp = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("--qp: {e}")))?;
            return Ok((qp, None));
        }
        match (&self.a, &self.b, self.tau) {
            (Some(a), Some(b), Some(tau)) => Ok((Quasipolynomial::new(a.clone(), b.clone(), tau)?, None)),
            _ => Err(Failure::Usage("give --qp, or --a, --b and --tau, or --example".into())),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// List the worked examples with their physical parameters.
    Examples,
    /// Generic MID: choose a and b so that s0 has multiplicity n+m+1.
    GenericMid {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        tau: f64,
        #[arg(long, allow_hyphen_values = true)]
        s0: f64,
    },
    /// Control-oriented MID: given a, choose b so that s0 has multiplicity m+2.
    ControlMid {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Delay (solve for s0), or with --s0 the delay policy `smallest` or `all`.
        #[arg(long, value_parser = TauArg::parse)]
        tau: Option<TauArg>,
        /// Multiple root (solve for the delay).
        #[arg(long, allow_hyphen_values = true)]
        s0: Option<f64>,
        /// Which s0 solutions to report for a given delay: rightmost or all.
        #[arg(long, value_parser = ["rightmost", "all"])]
        branch: Option<String>,
    },
    /// CRRID: assign n+m+1 distinct real roots.
    Crrid {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        tau: f64,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
        roots: List,
    },
    /// Sample the multiplicity relation over (s0, tau) and trace its zero set.
    Admissibility {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, allow_hyphen_values = true)]
        s0_min: f64,
        #[arg(long)]
        tau_max: f64,
        /// Resolution as NS0xNTAU.
        #[arg(long, default_value = "200x200", value_parser = parse_grid)]
        grid: (usize, usize),
    },
    /// Locate and certify the characteristic roots in a window.
    Spectrum {
        #[command(flatten)]
        qp: QpArgs,
        /// Window as X_MIN,X_MAX,Y_MAX.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_window)]
        window: Option<SpectralWindow>,
        /// Sampling grid as NXxNY.
        #[arg(long, value_parser = parse_grid)]
        grid: Option<(usize, usize)>,
        /// Instead, certify that no root lies right of S0 + epsilon.
        #[arg(long, allow_hyphen_values = true, value_name = "S0")]
        dominance: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
    },
    /// Track the roots born at s0 while the delay varies around its value.
    Sensitivity {
        #[command(flatten)]
        qp: QpArgs,
        #[arg(long, allow_hyphen_values = true)]
        s0: Option<f64>,
        /// Relative delay range: tau*(1 -+ span).
        #[arg(long, default_value_t = 0.2)]
        span: f64,
        #[arg(long, default_value_t = 41)]
        steps: usize,
        #[arg(long, default_value_t = 30)]
        iterations: usize,
    },
    /// Integrate the closed loop from a history function.
    Simulate {
        #[command(flatten)]
        qp: QpArgs,
        /// constant:V, poly:C0,C1,..., sampled:DT:V0,V1,... or @FILE (JSON).
        #[arg(long, default_value = "constant:1", allow_hyphen_values = true, value_parser = parse_history)]
        history: HistorySpec,
        /// Final time.
        #[arg(long = "T", alias = "t-end")]
        t_end: f64,
        /// Step size (at most tau/10).
        #[arg(long)]
        h: f64,
        /// Fit the decay rate over T1,T2 allowing a multiple root.
        #[arg(long, value_parser = parse_list)]
        decay_window: Option<List>,
        #[arg(long, default_value_t = 1)]
        multiplicity: usize,
    },
    /// Integral or Kummer-function factorization at a multiple root.
    Factorization {
        #[command(flatten)]
        qp: QpArgs,
        #[arg(long, allow_hyphen_values = true)]
        s0: Option<f64>,
        #[arg(long)]
        multiplicity: Option<usize>,
        #[arg(long)]
        hypergeometric: bool,
    },
    /// Build an HTML or JSON design report.
    Report {
        /// A report request body (as sent to the service), or @FILE.
        #[arg(long)]
        request: Option<String>,
        /// Compute the sections for a worked example at its design point.
        #[command(flatten)]
        example: ExampleArgs,
        /// Sections, comma separated (e.g. ControlMID,Spectrum).
        #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
        select: Vec<ReportMode>,
        #[arg(long, value_parser = ["html", "json"])]
        format: Option<String>,
        #[arg(long)]
        title: Option<String>,
        /// Timestamp to embed; defaults to the current UTC time.
        #[arg(long)]
        timestamp: Option<String>,
        /// Omit the timestamp for reproducible output.
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Run the HTTP service.
    Serve {
        /// Bind address; defaults to $DELAYLAB_ADDR or 127.0.0.1:8080.
        #[arg(long)]
        addr: Option<String>,
    },
}

enum Failure {
    Usage(String),
    Api(ApiFailure),
    Io(String),
}

impl From<ApiFailure> for Failure {
    fn from(f: ApiFailure) -> Self {
        Failure::Api(f)
    }
}

impl From<delaylab::Error> for Failure {
    fn from(e: delaylab::Error) -> Self {
        Failure::Api(e.into())
    }
}

fn read_arg(text: &str) -> Result<String, Failure> {
    match text.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{path}: {e}"))),
        None => Ok(text.to_string()),
    }
}

fn problem(p: &ProblemArgs) -> Result<(Option<List>, Option<usize>, Option<ExampleSystem>), Failure> {
    let ex = p.example.system();
    if ex.is_some() && (p.a.is_some() || p.m.is_some()) {
        return Err(Failure::Usage("give either --a and --m, or --example".into()));
    }
    Ok((p.a.clone(), p.m, ex))
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("payloads serialize")
}

fn run(cli: &Cli, limits: &Limits) -> Result<Output, Failure> {
    Ok(match &cli.command {
        Command::Examples => {
            let resp = api::examples();
            let mut human = String::new();
            for ex in &resp.examples {
                human += &format!("{} ({}): a = {}, m = {}\n", ex.title, ex.id.as_str(), fmt_vec(&ex.problem.a), ex.problem.m);
                for p in &ex.parameters {
                    human += &format!("  {:<8} {:>10} {:<8} {}\n", p.name, fmt(p.default), p.unit, p.constraint);
                }
                for g in &ex.problem.gain_map {
                    human += &format!("  {g}\n");
                }
                human += &format!("  design point: s0 = {}, tau = {}\n", fmt(ex.design.0), fmt(ex.design.1));
            }
            Output::json_only(json(&resp), human)
        }
        Command::GenericMid { n, m, tau, s0 } => {
            let r = api::generic_mid(api::GenericMidRequest { n: *n, m: *m, tau: *tau, s0: *s0 }, limits)?;
            let human = format!(
                "s0 = {} with multiplicity {}\na = {}\nb = {}\ntau = {}\nmax residual {:.2e}, condition {:.2e}\n",
                fmt(*s0),
                n + m + 1,
                fmt_vec(r.qp.a()),
                fmt_vec(r.qp.b()),
                fmt(r.qp.tau()),
                r.max_residual(),
                r.condition_estimate
            );
            Output::json_only(json(&r), human)
        }
        Command::ControlMid { problem: p, tau, s0, branch } => {
            let (a, m, example) = problem(p)?;
            let (tau_value, tau_policy) = match tau {
                Some(TauArg::Value(t)) => (Some(*t), None),
                Some(TauArg::Smallest) => (None, Some(Branch::Smallest)),
                Some(TauArg::All) => (None, Some(Branch::All)),
                None => (None, None),
            };
            if tau_policy.is_some() && s0.is_none() {
                return Err(Failure::Usage("--tau smallest|all needs --s0".into()));
            }
            let branch = match branch.as_deref() {
                Some("all") => Some(Branch::All),
                Some(_) => Some(Branch::Rightmost),
                None => tau_policy,
            };
            let req = api::ControlMidRequest { a, m, example, tau: tau_value, s0: *s0, branch };
            let r = api::control_mid(req, limits)?;
            let mut human = String::new();
            for s in &r.solutions {
                human += &format!("s0 = {}  tau = {}\n  b = {}\n", fmt(s.s0), fmt(s.tau), fmt_vec(&s.b));
                for g in s.gains.iter().flatten() {
                    human += &format!("  {} = {} {}", g.name, fmt(g.value), g.unit).trim_end().to_string();
                    human += "\n";
                }
                if let Some(e) = &s.gains_error {
                    human += &format!("  physical gains unavailable: {}\n", e.message);
                }
                human += &format!("  max residual {:.2e}\n", s.placement.max_residual());
            }
            if r.solutions.is_empty() {
                human += "no admissible solution\n";
            }
            Output::json_only(json(&r), human)
        }
        Command::Crrid { n, m, tau, roots } => {
            let r = api::crrid(api::CrridRequest { n: *n, m: *m, tau: *tau, roots: roots.clone() }, limits)?;
            let human = format!(
                "roots = {}\na = {}\nb = {}\nmax residual {:.2e}\n",
                fmt_vec(roots),
                fmt_vec(r.qp.a()),
                fmt_vec(r.qp.b()),
                r.max_residual()
            );
            Output::json_only(json(&r), human)
        }
        Command::Admissibility { problem: p, s0_min, tau_max, grid } => {
            let (a, m, example) = problem(p)?;
            let req = api::AdmissibilityRequest { a, m, example, s0_min: *s0_min, tau_max: *tau_max, ns0: grid.0, ntau: grid.1 };
            let g = api::admissibility(req, limits)?;
            let positive = g.values.iter().flatten().filter(|v| **v > 0.0).count();
            let mut human = format!(
                "{} x {} samples over s0 in [{}, 0], tau in [0, {}]; F > 0 at {} samples\n{} zero curve(s)\n",
                g.ns0,
                g.ntau,
                fmt(g.s0_min),
                fmt(g.tau_max),
                positive,
                g.curves.len()
            );
            for (k, c) in g.curves.iter().enumerate() {
                if let (Some(first), Some(last)) = (c.points.first(), c.points.last()) {
                    human += &format!(
                        "  curve {}: {} vertices from ({}, {}) to ({}, {}){}\n",
                        k + 1,
                        c.points.len(),
                        fmt(first.0),
                        fmt(first.1),
                        fmt(last.0),
                        fmt(last.1),
                        if c.closed { ", closed" } else { "" }
                    );
                }
            }
            Output::with_csv(json(&g), human, g.to_csv())
        }
        Command::Spectrum { qp, window, grid, dominance, epsilon } => {
            let (q, designed) = qp.resolve()?;
            if let Some(s0) = dominance {
                let cert = check_dominance(&q, *s0, *epsilon)?;
                let human = format!(
                    "{}: winding number {} over [{}, {}] x [-{}, {}]\n",
                    if cert.dominant { "dominant" } else { "NOT dominant" },
                    cert.winding_number,
                    fmt(cert.window.x_min),
                    fmt(cert.window.x_max),
                    fmt(cert.window.y_max),
                    fmt(cert.window.y_max)
                );
                return Ok(Output::json_only(json(&cert), human));
            }
            let window = match (window, designed) {
                (Some(w), _) => *w,
                (None, Some(s0)) => SpectralWindow::new(6.0 * s0 - 2.0, 1.0, 10.0 / q.tau())?,
                (None, None) => return Err(Failure::Usage("--window is required".into())),
            };
            let req = api::SpectrumRequest { qp: q, window, grid: grid.map(|(a, b)| [a, b]) };
            let s = api::spectrum(req, limits)?;
            let rows: Vec<Vec<String>> = s
                .roots
                .iter()
                .map(|r| vec![fmt(r.re), fmt(r.im), r.multiplicity.to_string(), format!("{:.1e}", r.residual)])
                .collect();
            let human = format!(
                "{}certified count {} (conjugates included), spectral abscissa {}\n",
                table(&["re", "im (+/-)", "mult", "residual"], &rows),
                s.certified_count,
                if s.abscissa.is_finite() { fmt(s.abscissa) } else { "none in window".into() }
            );
            Output::with_csv(json(&s), human, s.to_csv())
        }
        Command::Sensitivity { qp, s0, span, steps, iterations } => {
            let (q, designed) = qp.resolve()?;
            let s0 = s0.or(designed).ok_or_else(|| Failure::Usage("--s0 is required".into()))?;
            let req = api::SensitivityRequest { qp: q, s0, span: *span, steps: *steps, iterations: *iterations };
            let t = api::sensitivity(req, limits)?;
            let rows: Vec<Vec<String>> = t
                .taus
                .iter()
                .zip(&t.branches)
                .map(|(tau, row)| {
                    let rightmost = row.iter().filter(|p| !p.diverged).map(|p| p.re).fold(f64::NEG_INFINITY, f64::max);
                    vec![fmt(*tau), fmt(rightmost), row.iter().filter(|p| p.converged).count().to_string()]
                })
                .collect();
            let human = table(&["tau", "rightmost re", "converged"], &rows);
            Output::with_csv(json(&t), human, t.to_csv())
        }
        Command::Simulate { qp, history, t_end, h, decay_window, multiplicity } => {
            let (q, _) = qp.resolve()?;
            let req = api::SimulateRequest { qp: q, history: history.clone(), t_end: *t_end, h: *h };
            let r = api::simulate_endpoint(req, limits)?;
            let mut human = format!(
                "{} steps of {}; y(T) = {}\n",
                r.t.len() - 1,
                fmt(r.step),
                fmt(*r.y.last().unwrap_or(&0.0))
            );
            match r.decay_estimate {
                Some(d) => human += &format!("decay estimate over the second half: {}\n", fmt(d)),
                None => human += "no decay estimate (signal too flat)\n",
            }
            if let Some(w) = decay_window {
                let [t1, t2] = w[..] else {
                    return Err(Failure::Usage("--decay-window takes T1,T2".into()));
                };
                let rate = estimate_decay_rate_with_multiplicity(&r, (t1, t2), *multiplicity)?;
                human += &format!("decay rate over [{}, {}] with multiplicity {multiplicity}: {}\n", fmt(t1), fmt(t2), fmt(rate));
            }
            Output::with_csv(json(&r), human, r.to_csv())
        }
        Command::Factorization { qp, s0, multiplicity, hypergeometric } => {
            let (q, designed) = qp.resolve()?;
            let s0 = s0.or(designed).ok_or_else(|| Failure::Usage("--s0 is required".into()))?;
            let kind = if *hypergeometric { FormKind::Hypergeometric } else { FormKind::Integral };
            // a designed example carries the control-oriented multiplicity m+2
            let multiplicity = multiplicity.or(designed.map(|_| q.m() + 2));
            let r = api::factorization(api::FactorizationRequest { qp: q, s0, multiplicity, kind }, limits)?;
            let human = format!("{}\nvalidation residual {:.2e}\n", r.form.formula(), r.form.validation_residual);
            Output::json_only(json(&r), human)
        }
        Command::Report { request, example, select, format, title, timestamp, no_timestamp } => {
            let mut req = match request {
                Some(text) => {
                    let text = read_arg(text)?;
                    serde_json::from_str::<api::ReportRequest>(&text).map_err(|e| Failure::Usage(format!("--request: {e}")))?
                }
                None => {
                    let ex = example.system().ok_or_else(|| Failure::Usage("give --request or --example".into()))?;
                    if select.is_empty() {
                        return Err(Failure::Usage("--select lists the sections to include".into()));
                    }
                    api::ReportRequest {
                        selection: select.clone(),
                        payloads: example_payloads(&ex, select, limits)?,
                        format: ReportFormat::Html,
                        title: Some(format!("{} design report", ex.title())),
                        timestamp: None,
                    }
                }
            };
            let by_extension = cli.out.as_ref().and_then(|p| p.extension()).is_some_and(|e| e == "json");
            req.format = match format.as_deref() {
                Some("json") => ReportFormat::Json,
                Some(_) => ReportFormat::Html,
                None if cli.json || by_extension => ReportFormat::Json,
                None if request.is_some() => req.format,
                None => ReportFormat::Html,
            };
            if title.is_some() {
                req.title = title.clone();
            }
            if *no_timestamp {
                req.timestamp = None;
            } else if timestamp.is_some() {
                req.timestamp = timestamp.clone();
            } else if req.timestamp.is_none() {
                req.timestamp = now_utc();
            }
            let (doc, _) = api::report(req)?;
            Output::document(doc)
        }
        Command::Serve { addr } => {
            let addr = delaylab_service::resolve_addr(addr.as_deref()).map_err(Failure::Usage)?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
            rt.block_on(delaylab_service::serve(addr, *limits)).map_err(|e| Failure::Io(e.to_string()))?;
            Output::json_only(String::new(), String::new())
        }
    })
}

fn now_utc() -> Option<String> {
    time::OffsetDateTime::now_utc().format(&time::format_description::well_known::Rfc3339).ok()
}

/// Payloads for a worked example at its design point.
fn example_payloads(ex: &ExampleSystem, select: &[ReportMode], limits: &Limits) -> Result<ReportPayloads, Failure> {
    let placed = design_placement(ex)?;
    let (s0, tau) = (placed.targets.rightmost(), placed.qp.tau());
    let qp = placed.qp.clone();
    let mut p = ReportPayloads { example: Some(*ex), ..Default::default() };
    for mode in select {
        match mode {
            ReportMode::ControlMid => p.control_mid = Some(placed.clone()),
            ReportMode::GenericMid => {
                let req = api::GenericMidRequest { n: qp.n(), m: qp.m(), tau, s0 };
                p.generic_mid = Some(api::generic_mid(req, limits)?);
            }
            ReportMode::Crrid => {
                return Err(Failure::Usage("CRRID sections need explicit roots; use --request".into()));
            }
            ReportMode::Admissibility => {
                let req = api::AdmissibilityRequest {
                    example: Some(*ex),
                    s0_min: 2.0 * s0,
                    tau_max: 2.0 * tau,
                    ns0: 200,
                    ntau: 200,
                    ..Default::default()
                };
                p.admissibility = Some(api::admissibility(req, limits)?);
            }
            ReportMode::Spectrum => {
                let window = SpectralWindow::new(6.0 * s0 - 2.0, 1.0, 10.0 / tau)?;
                p.spectrum = Some(api::spectrum(api::SpectrumRequest { qp: qp.clone(), window, grid: None }, limits)?);
            }
            ReportMode::Sensitivity => {
                let req = api::SensitivityRequest { qp: qp.clone(), s0, span: 0.2, steps: 41, iterations: 30 };
                p.sensitivity = Some(api::sensitivity(req, limits)?);
            }
            ReportMode::Simulation => {
                let h = (tau / 20.0).min(0.01);
                let req = api::SimulateRequest { qp: qp.clone(), history: HistorySpec::Constant { value: 1.0 }, t_end: 12.0 / s0.abs().max(0.5), h };
                p.simulation = Some(api::simulate_endpoint(req, limits)?);
            }
            ReportMode::Factorization => {
                let req = api::FactorizationRequest { qp: qp.clone(), s0, multiplicity: Some(qp.m() + 2), kind: FormKind::Integral };
                p.factorization = Some(api::factorization(req, limits)?.form);
            }
        }
    }
    Ok(p)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let limits = Limits::from_env();
    match run(&cli, &limits) {
        Ok(out) => match out.emit(cli.json, cli.out.as_deref()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Err(Failure::Usage(msg)) | Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Api(f)) => {
            if cli.json {
                println!("{}", json(&f.error));
            }
            eprintln!("error [{}]: {}", f.error.code, f.error.message);
            ExitCode::from(if f.status == 422 || f.status >= 500 { 3 } else { 2 })
        }
    }
}
