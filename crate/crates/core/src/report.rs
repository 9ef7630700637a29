//! Design-session reports: a document model assembled from computation
//! results, rendered as self-contained HTML (inline styles and SVG) or JSON.
//!
//! Numbers are rounded to 6 significant digits when the document is built, so
//! the JSON rendering round-trips exactly. HTML shows fewer digits depending on
//! the quantity class of each value.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::admissibility::AdmissibilityGrid;
use crate::catalog::{recover_gains, ExampleSystem};
use crate::dde_sim::SimulationResult;
use crate::error::{Error, Result};
use crate::factorization::FactorizedForm;
use crate::placement::{PlacementResult, Targets};
use crate::spectrum::{SensitivityTrace, Spectrum};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// HTML tables longer than this show the head and a row count.
pub const HTML_TABLE_ROWS: usize = 40;

/// Report sections, in rendering order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReportMode {
    #[serde(rename = "GenericMID")]
    GenericMid,
    #[serde(rename = "ControlMID")]
    ControlMid,
    #[serde(rename = "CRRID")]
    Crrid,
    Admissibility,
    Spectrum,
    Sensitivity,
    Simulation,
    Factorization,
}

impl ReportMode {
    pub fn title(self) -> &'static str {
        match self {
            Self::GenericMid => "Generic MID",
            Self::ControlMid => "Control-oriented MID",
            Self::Crrid => "CRRID",
            Self::Admissibility => "Admissibility",
            Self::Spectrum => "Spectrum",
            Self::Sensitivity => "Delay sensitivity",
            Self::Simulation => "Simulation",
            Self::Factorization => "Factorization",
        }
    }
}

/// Results available to the report, one slot per mode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportPayloads {
    pub generic_mid: Option<PlacementResult>,
    pub control_mid: Option<PlacementResult>,
    pub crrid: Option<PlacementResult>,
    pub admissibility: Option<AdmissibilityGrid>,
    pub spectrum: Option<Spectrum>,
    pub sensitivity: Option<SensitivityTrace>,
    pub simulation: Option<SimulationResult>,
    pub factorization: Option<FactorizedForm>,
    /// Adds physical gains to the placement sections.
    pub example: Option<ExampleSystem>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantityClass {
    /// Physical controller gains: 2 decimals.
    Gain,
    /// Polynomial and delayed coefficients: 4 decimals.
    Coefficient,
    Delay,
    Root,
    Time,
    /// Residuals and condition numbers: scientific notation.
    Residual,
    Count,
    /// Anything else: 6 significant digits.
    Generic,
}

impl QuantityClass {
    pub fn format(self, x: f64) -> String {
        let s = match self {
            Self::Gain => format!("{x:.2}"),
            Self::Coefficient | Self::Delay | Self::Root | Self::Time => format!("{x:.4}"),
            Self::Residual => format!("{x:.2e}"),
            Self::Count => format!("{x:.0}"),
            Self::Generic => format!("{}", round_sig(x)),
        };
        // no "-0.00"
        match s.strip_prefix('-') {
            Some(rest) if rest.chars().all(|c| matches!(c, '0' | '.')) => rest.to_string(),
            _ => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyValueRow {
    pub key: String,
    pub value: f64,
    pub class: QuantityClass,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub class: QuantityClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesStyle {
    Line,
    Points,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub style: SeriesStyle,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Sign map drawn underneath the series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignMap {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `values[i][j]` at `(x[i], y[j])`.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Block {
    Text {
        text: String,
    },
    KeyValue {
        rows: Vec<KeyValueRow>,
    },
    Table {
        caption: String,
        columns: Vec<Column>,
        rows: Vec<Vec<f64>>,
    },
    Figure {
        caption: String,
        x_label: String,
        y_label: String,
        series: Vec<Series>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sign_map: Option<SignMap>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub title: String,
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub title: String,
    /// Supplied by the caller; absent for reproducible output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub version: String,
}

impl Metadata {
    pub fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), timestamp: None, version: TOOL_VERSION.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub metadata: Metadata,
    pub sections: Vec<Section>,
}

/// Rounds to 6 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

fn kv(key: impl Into<String>, value: f64, class: QuantityClass) -> KeyValueRow {
    KeyValueRow { key: key.into(), value: round_sig(value), class, unit: String::new() }
}

fn table(caption: &str, columns: &[(&str, QuantityClass)], rows: Vec<Vec<f64>>) -> Block {
    Block::Table {
        caption: caption.into(),
        columns: columns.iter().map(|&(n, c)| Column { name: n.into(), class: c }).collect(),
        rows: rows.into_iter().map(|r| r.into_iter().map(round_sig).collect()).collect(),
    }
}

fn series(name: &str, style: SeriesStyle, x: Vec<f64>, y: Vec<f64>) -> Series {
    Series { name: name.into(), style, x: x.into_iter().map(round_sig).collect(), y: y.into_iter().map(round_sig).collect() }
}

fn coefficient_rows(prefix: &str, v: &[f64]) -> Vec<KeyValueRow> {
    v.iter().enumerate().map(|(k, x)| kv(format!("{prefix}{k}"), *x, QuantityClass::Coefficient)).collect()
}

fn placement_blocks(r: &PlacementResult, example: Option<&ExampleSystem>) -> Result<Vec<Block>> {
    let mut rows = vec![
        kv("n", r.qp.n() as f64, QuantityClass::Count),
        kv("m", r.qp.m() as f64, QuantityClass::Count),
        kv("tau", r.qp.tau(), QuantityClass::Delay),
    ];
    match &r.targets {
        Targets::Multiple(t) => {
            rows.push(kv("s0", t.s0, QuantityClass::Root));
            rows.push(kv("multiplicity", t.multiplicity as f64, QuantityClass::Count));
        }
        Targets::Simple(roots) => {
            rows.extend(roots.iter().enumerate().map(|(i, x)| kv(format!("root {}", i + 1), *x, QuantityClass::Root)));
        }
    }
    let mut blocks = vec![Block::KeyValue { rows }];
    let mut coeffs = coefficient_rows("a", r.qp.a());
    coeffs.extend(coefficient_rows("b", r.qp.b()));
    blocks.push(Block::KeyValue { rows: coeffs });
    if let Some(ex) = example {
        let gains = recover_gains(ex, r)?;
        let rows = gains
            .into_iter()
            .map(|g| {
                let class = if g.unit == "s" { QuantityClass::Delay } else { QuantityClass::Gain };
                KeyValueRow { key: g.name, value: round_sig(g.value), class, unit: g.unit }
            })
            .collect();
        blocks.push(Block::Text { text: format!("Physical gains for the {} example.", ex.title().to_lowercase()) });
        blocks.push(Block::KeyValue { rows });
    }
    let mut diag = vec![
        kv("max residual", r.max_residual(), QuantityClass::Residual),
        kv("condition estimate", r.condition_estimate, QuantityClass::Residual),
    ];
    if let Some(rel) = r.relation {
        diag.push(kv("multiplicity relation F", rel.value, QuantityClass::Residual));
    }
    blocks.push(Block::KeyValue { rows: diag });
    Ok(blocks)
}

fn admissibility_blocks(g: &AdmissibilityGrid) -> Vec<Block> {
    let mut rows = Vec::with_capacity(g.ns0 * g.ntau);
    for i in 0..g.ns0 {
        for j in 0..g.ntau {
            rows.push(vec![g.s0_at(i), g.tau_at(j), g.values[i][j]]);
        }
    }
    let curves = g
        .curves
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let (x, y) = c.points.iter().copied().unzip();
            series(&format!("F = 0 ({})", k + 1), SeriesStyle::Line, x, y)
        })
        .collect();
    vec![
        Block::KeyValue {
            rows: vec![
                kv("s0 min", g.s0_min, QuantityClass::Root),
                kv("tau max", g.tau_max, QuantityClass::Delay),
                kv("s0 samples", g.ns0 as f64, QuantityClass::Count),
                kv("tau samples", g.ntau as f64, QuantityClass::Count),
                kv("zero curves", g.curves.len() as f64, QuantityClass::Count),
            ],
        },
        Block::Figure {
            caption: "Sign of the multiplicity relation and its zero set".into(),
            x_label: "s0".into(),
            y_label: "tau".into(),
            series: curves,
            sign_map: Some(SignMap {
                x: (0..g.ns0).map(|i| round_sig(g.s0_at(i))).collect(),
                y: (0..g.ntau).map(|j| round_sig(g.tau_at(j))).collect(),
                values: g.values.iter().map(|r| r.iter().map(|v| round_sig(*v)).collect()).collect(),
            }),
        },
        table(
            "Grid samples",
            &[("s0", QuantityClass::Root), ("tau", QuantityClass::Delay), ("F", QuantityClass::Generic)],
            rows,
        ),
    ]
}

fn spectrum_blocks(s: &Spectrum) -> Vec<Block> {
    let mut rows = vec![
        kv("x min", s.window.x_min, QuantityClass::Root),
        kv("x max", s.window.x_max, QuantityClass::Root),
        kv("y max", s.window.y_max, QuantityClass::Root),
        kv("certified count", s.certified_count as f64, QuantityClass::Count),
    ];
    if s.abscissa.is_finite() {
        rows.push(kv("spectral abscissa", s.abscissa, QuantityClass::Root));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in &s.roots {
        xs.push(r.re);
        ys.push(r.im);
        if r.im != 0.0 {
            xs.push(r.re);
            ys.push(-r.im);
        }
    }
    vec![
        Block::KeyValue { rows },
        table(
            "Roots (upper half plane; conjugates implied)",
            &[
                ("re", QuantityClass::Root),
                ("im", QuantityClass::Root),
                ("multiplicity", QuantityClass::Count),
                ("residual", QuantityClass::Residual),
            ],
            s.roots.iter().map(|r| vec![r.re, r.im, r.multiplicity as f64, r.residual]).collect(),
        ),
        Block::Figure {
            caption: "Characteristic roots".into(),
            x_label: "Re s".into(),
            y_label: "Im s".into(),
            series: vec![series("roots", SeriesStyle::Points, xs, ys)],
            sign_map: None,
        },
    ]
}

fn sensitivity_blocks(t: &SensitivityTrace) -> Vec<Block> {
    let count = t.branches.first().map_or(0, Vec::len);
    let mut rows = Vec::new();
    for (tau, row) in t.taus.iter().zip(&t.branches) {
        for (j, p) in row.iter().enumerate() {
            rows.push(vec![*tau, j as f64, p.re, p.im, f64::from(u8::from(p.converged))]);
        }
    }
    let traces = (0..count)
        .map(|j| {
            let (x, y) = t.branches.iter().filter(|r| !r[j].diverged).map(|r| (r[j].re, r[j].im)).unzip();
            series(&format!("branch {j}"), SeriesStyle::Line, x, y)
        })
        .collect();
    vec![
        Block::KeyValue {
            rows: vec![
                kv("tau min", t.taus.first().copied().unwrap_or(0.0), QuantityClass::Delay),
                kv("tau max", t.taus.last().copied().unwrap_or(0.0), QuantityClass::Delay),
                kv("design tau", t.taus.get(t.seed_index).copied().unwrap_or(0.0), QuantityClass::Delay),
                kv("branches", count as f64, QuantityClass::Count),
            ],
        },
        Block::Figure {
            caption: "Root branches as the delay varies".into(),
            x_label: "Re s".into(),
            y_label: "Im s".into(),
            series: traces,
            sign_map: None,
        },
        table(
            "Branch positions",
            &[
                ("tau", QuantityClass::Delay),
                ("branch", QuantityClass::Count),
                ("re", QuantityClass::Root),
                ("im", QuantityClass::Root),
                ("converged", QuantityClass::Count),
            ],
            rows,
        ),
    ]
}

fn simulation_blocks(s: &SimulationResult) -> Vec<Block> {
    let mut rows = vec![
        kv("T", s.t.last().copied().unwrap_or(0.0), QuantityClass::Time),
        kv("step", s.step, QuantityClass::Time),
        kv("y(T)", s.y.last().copied().unwrap_or(0.0), QuantityClass::Generic),
    ];
    if let Some(d) = s.decay_estimate.filter(|d| d.is_finite()) {
        rows.push(kv("decay estimate", d, QuantityClass::Root));
    }
    vec![
        Block::KeyValue { rows },
        Block::Figure {
            caption: "Closed-loop response".into(),
            x_label: "t".into(),
            y_label: "y".into(),
            series: vec![series("y", SeriesStyle::Line, s.t.clone(), s.y.clone())],
            sign_map: None,
        },
        table(
            "Samples",
            &[("t", QuantityClass::Time), ("y", QuantityClass::Generic)],
            s.t.iter().zip(&s.y).map(|(t, y)| vec![*t, *y]).collect(),
        ),
    ]
}

fn factorization_blocks(f: &FactorizedForm) -> Vec<Block> {
    let mut rows = vec![
        kv("s0", f.s0, QuantityClass::Root),
        kv("tau", f.tau, QuantityClass::Delay),
        kv("multiplicity", f.multiplicity as f64, QuantityClass::Count),
        kv("validation residual", f.validation_residual, QuantityClass::Residual),
    ];
    if let Some(h) = f.hyper_params {
        rows.push(kv("kummer a", h.a, QuantityClass::Generic));
        rows.push(kv("kummer b", h.b, QuantityClass::Generic));
        rows.push(kv("c", h.scale, QuantityClass::Coefficient));
    }
    vec![
        Block::Text { text: f.formula() },
        Block::KeyValue { rows },
        table(
            "Weight w(t) = sum w_k t^k",
            &[("k", QuantityClass::Count), ("w_k", QuantityClass::Coefficient)],
            f.weight_coeffs.iter().enumerate().map(|(k, w)| vec![k as f64, *w]).collect(),
        ),
    ]
}

fn missing(mode: ReportMode) -> Error {
    Error::SelectionWithoutResult(mode.title().into())
}

/// Assembles one section per selected mode, in the fixed mode order.
pub fn build_report(selection: &BTreeSet<ReportMode>, payloads: &ReportPayloads, metadata: Metadata) -> Result<ReportDocument> {
    let mut sections = Vec::with_capacity(selection.len());
    let example = payloads.example.as_ref();
    for &mode in selection {
        let blocks = match mode {
            ReportMode::GenericMid => placement_blocks(payloads.generic_mid.as_ref().ok_or(missing(mode))?, None)?,
            ReportMode::ControlMid => placement_blocks(payloads.control_mid.as_ref().ok_or(missing(mode))?, example)?,
            ReportMode::Crrid => placement_blocks(payloads.crrid.as_ref().ok_or(missing(mode))?, None)?,
            ReportMode::Admissibility => admissibility_blocks(payloads.admissibility.as_ref().ok_or(missing(mode))?),
            ReportMode::Spectrum => spectrum_blocks(payloads.spectrum.as_ref().ok_or(missing(mode))?),
            ReportMode::Sensitivity => sensitivity_blocks(payloads.sensitivity.as_ref().ok_or(missing(mode))?),
            ReportMode::Simulation => simulation_blocks(payloads.simulation.as_ref().ok_or(missing(mode))?),
            ReportMode::Factorization => factorization_blocks(payloads.factorization.as_ref().ok_or(missing(mode))?),
        };
        sections.push(Section { title: mode.title().into(), blocks });
    }
    let doc = ReportDocument { metadata, sections };
    if !doc.all_finite() {
        return Err(Error::InvalidParameter("report contains a non-finite value".into()));
    }
    Ok(doc)
}

impl ReportDocument {
    fn all_finite(&self) -> bool {
        self.sections.iter().flat_map(|s| &s.blocks).all(|b| match b {
            Block::Text { .. } => true,
            Block::KeyValue { rows } => rows.iter().all(|r| r.value.is_finite()),
            Block::Table { rows, .. } => rows.iter().flatten().all(|v| v.is_finite()),
            Block::Figure { series, sign_map, .. } => {
                series.iter().all(|s| s.x.iter().chain(&s.y).all(|v| v.is_finite()))
                    && sign_map.as_ref().is_none_or(|m| m.values.iter().flatten().all(|v| v.is_finite()))
            }
        })
    }
}

pub fn render_json(doc: &ReportDocument) -> String {
    serde_json::to_string_pretty(doc).expect("report documents serialize")
}

/// Inverse of [`render_json`].
pub fn parse(text: &str) -> Result<ReportDocument> {
    serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("malformed report: {e}")))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:Helvetica,Arial,sans-serif;margin:2em auto;max-width:60em;color:#222}\
h1{font-size:1.6em;border-bottom:2px solid #345}h2{font-size:1.25em;margin-top:1.8em;color:#345}\
table{border-collapse:collapse;margin:0.8em 0}td,th{border:1px solid #bbb;padding:0.2em 0.6em;text-align:right}\
th{background:#eef}td.key{text-align:left}caption{text-align:left;font-style:italic;padding:0.2em 0}\
p.meta{color:#666;font-size:0.9em}p.more{color:#666;font-size:0.85em}figure{margin:1em 0}\
figcaption{font-style:italic;font-size:0.9em}pre.formula{background:#f6f6f6;padding:0.6em;white-space:pre-wrap}";

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Self-contained HTML5 document.
pub fn render_html(doc: &ReportDocument) -> String {
    let mut h = String::new();
    let title = escape(&doc.metadata.title);
    let _ = write!(
        h,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\"/>\n<title>{title}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n<h1>{title}</h1>\n<p class=\"meta\">version {}",
        escape(&doc.metadata.version)
    );
    if let Some(ts) = &doc.metadata.timestamp {
        let _ = write!(h, " · generated {}", escape(ts));
    }
    h.push_str("</p>\n");
    for section in &doc.sections {
        let _ = writeln!(h, "<section>\n<h2>{}</h2>", escape(&section.title));
        for block in &section.blocks {
            render_block(&mut h, block);
        }
        h.push_str("</section>\n");
    }
    h.push_str("</body>\n</html>\n");
    h
}

fn render_block(h: &mut String, block: &Block) {
    match block {
        Block::Text { text } => {
            let _ = writeln!(h, "<pre class=\"formula\">{}</pre>", escape(text));
        }
        Block::KeyValue { rows } => {
            h.push_str("<table>\n");
            for r in rows {
                let unit = if r.unit.is_empty() { String::new() } else { format!(" {}", escape(&r.unit)) };
                let _ = writeln!(
                    h,
                    "<tr><td class=\"key\">{}</td><td>{}{unit}</td></tr>",
                    escape(&r.key),
                    r.class.format(r.value)
                );
            }
            h.push_str("</table>\n");
        }
        Block::Table { caption, columns, rows } => {
            let _ = write!(h, "<table>\n<caption>{}</caption>\n<tr>", escape(caption));
            for c in columns {
                let _ = write!(h, "<th>{}</th>", escape(&c.name));
            }
            h.push_str("</tr>\n");
            for row in rows.iter().take(HTML_TABLE_ROWS) {
                h.push_str("<tr>");
                for (v, c) in row.iter().zip(columns) {
                    let _ = write!(h, "<td>{}</td>", c.class.format(*v));
                }
                h.push_str("</tr>\n");
            }
            h.push_str("</table>\n");
            if rows.len() > HTML_TABLE_ROWS {
                let _ = writeln!(
                    h,
                    "<p class=\"more\">{} further rows in the JSON export.</p>",
                    rows.len() - HTML_TABLE_ROWS
                );
            }
        }
        Block::Figure { caption, x_label, y_label, series, sign_map } => {
            let _ = writeln!(
                h,
                "<figure>\n{}\n<figcaption>{}</figcaption>\n</figure>",
                render_svg(x_label, y_label, series, sign_map.as_ref()),
                escape(caption)
            );
        }
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

const W: f64 = 640.0;
const H: f64 = 380.0;
const MARGIN: f64 = 50.0;

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 1.5 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 1.5 * MARGIN)
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
        let d = 0.5 * (1.0 + lo.abs());
        return (lo - d, hi + d);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn render_svg(x_label: &str, y_label: &str, series: &[Series], sign_map: Option<&SignMap>) -> String {
    let xs = series.iter().flat_map(|s| s.x.iter().copied()).chain(sign_map.iter().flat_map(|m| m.x.iter().copied()));
    let ys = series.iter().flat_map(|s| s.y.iter().copied()).chain(sign_map.iter().flat_map(|m| m.y.iter().copied()));
    let (x0, x1) = bounds(xs);
    let (y0, y1) = bounds(ys);
    let f = Frame { x0, x1, y0, y1 };
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-size=\"11\" font-family=\"sans-serif\">"
    );
    s.push_str("<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>");

    if let Some(m) = sign_map {
        // at most 100 × 100 cells
        let stride_i = m.x.len().div_ceil(100).max(1);
        let stride_j = m.y.len().div_ceil(100).max(1);
        for i in (0..m.x.len().saturating_sub(1)).step_by(stride_i) {
            let i2 = (i + stride_i).min(m.x.len() - 1);
            for j in (0..m.y.len().saturating_sub(1)).step_by(stride_j) {
                let j2 = (j + stride_j).min(m.y.len() - 1);
                let v = m.values[i][j];
                let fill = if v > 0.0 { "#dde8f6" } else if v < 0.0 { "#f8dede" } else { "#ffffff" };
                let (xa, xb) = (f.px(m.x[i]).min(f.px(m.x[i2])), f.px(m.x[i]).max(f.px(m.x[i2])));
                let (ya, yb) = (f.py(m.y[j]).min(f.py(m.y[j2])), f.py(m.y[j]).max(f.py(m.y[j2])));
                let _ = write!(
                    s,
                    "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{fill}\"/>",
                    xa,
                    ya,
                    (xb - xa).max(0.5),
                    (yb - ya).max(0.5)
                );
            }
        }
    }

    // axes and ticks
    let (left, right, top, bottom) = (MARGIN, W - 0.5 * MARGIN, 0.5 * MARGIN, H - MARGIN);
    let _ = write!(
        s,
        "<rect x=\"{left}\" y=\"{top}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
        right - left,
        bottom - top
    );
    for k in 0..=4 {
        let xv = x0 + (x1 - x0) * k as f64 / 4.0;
        let yv = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = write!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            f.px(xv),
            bottom + 14.0,
            tick(xv)
        );
        let _ = write!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            left - 4.0,
            f.py(yv) + 4.0,
            tick(yv)
        );
    }
    if x0 < 0.0 && x1 > 0.0 {
        let _ = write!(s, "<line x1=\"{0:.1}\" y1=\"{top}\" x2=\"{0:.1}\" y2=\"{bottom}\" stroke=\"#999\" stroke-dasharray=\"3,3\"/>", f.px(0.0));
    }
    if y0 < 0.0 && y1 > 0.0 {
        let _ = write!(s, "<line x1=\"{left}\" y1=\"{0:.1}\" x2=\"{right}\" y2=\"{0:.1}\" stroke=\"#999\" stroke-dasharray=\"3,3\"/>", f.py(0.0));
    }
    let _ = write!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        0.5 * (left + right),
        H - 12.0,
        escape(x_label)
    );
    let _ = write!(
        s,
        "<text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">{}</text>",
        0.5 * (top + bottom),
        0.5 * (top + bottom),
        escape(y_label)
    );

    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts = ser.x.iter().zip(&ser.y).filter(|(x, y)| x.is_finite() && y.is_finite());
        match ser.style {
            SeriesStyle::Line => {
                let mut path = String::new();
                for (x, y) in pts {
                    let _ = write!(path, "{:.1},{:.1} ", f.px(*x), f.py(*y));
                }
                let _ = write!(
                    s,
                    "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"><title>{}</title></polyline>",
                    path.trim_end(),
                    escape(&ser.name)
                );
            }
            SeriesStyle::Points => {
                for (x, y) in pts {
                    let _ = write!(s, "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>", f.px(*x), f.py(*y));
                }
            }
        }
    }
    s.push_str("</svg>");
    s
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        QuantityClass::Gain.format(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::solve_control_mid;
    use crate::spectrum::{compute_spectrum, SpectralWindow};

    fn oscillator_payloads() -> ReportPayloads {
        ReportPayloads { control_mid: Some(solve_control_mid(&[1.0, 0.0], 1, 1.0, -1.0).unwrap()), ..Default::default() }
    }

    #[test]
    fn formatting_classes() {
        assert_eq!(QuantityClass::Gain.format(192.164), "192.16");
        assert_eq!(QuantityClass::Coefficient.format(-0.735759), "-0.7358");
        assert_eq!(QuantityClass::Coefficient.format(-1e-9), "0.0000");
        assert_eq!(QuantityClass::Count.format(3.0), "3");
        assert_eq!(QuantityClass::Residual.format(1.234e-13), "1.23e-13");
        assert_eq!(round_sig(-0.73575888234), -0.735759);
    }

    #[test]
    fn empty_selection_is_metadata_only() {
        let doc = build_report(&BTreeSet::new(), &ReportPayloads::default(), Metadata::new("Empty")).unwrap();
        assert!(doc.sections.is_empty());
        let html = render_html(&doc);
        assert!(html.starts_with("<!DOCTYPE html>"));
        assert!(html.contains("<h1>Empty</h1>"));
    }

    #[test]
    fn oscillator_gains() {
        let sel = BTreeSet::from([ReportMode::ControlMid]);
        let doc = build_report(&sel, &oscillator_payloads(), Metadata::new("Oscillator")).unwrap();
        assert!(render_html(&doc).contains("<td class=\"key\">b0</td><td>-0.7358</td>"));
        assert!(render_json(&doc).contains("-0.735759"));
    }

    #[test]
    fn missing_payload() {
        let sel = BTreeSet::from([ReportMode::ControlMid, ReportMode::Spectrum]);
        assert_eq!(
            build_report(&sel, &oscillator_payloads(), Metadata::new("x")).unwrap_err(),
            Error::SelectionWithoutResult("Spectrum".into())
        );
    }

    #[test]
    fn fixed_section_order_and_round_trip() {
        let mut p = oscillator_payloads();
        let qp = p.control_mid.as_ref().unwrap().qp.clone();
        p.spectrum = Some(compute_spectrum(&qp, &SpectralWindow::new(-4.0, 1.0, 10.0).unwrap()).unwrap());
        p.example = Some(ExampleSystem::Oscillator);
        let sel = BTreeSet::from([ReportMode::Spectrum, ReportMode::ControlMid]);
        let mut meta = Metadata::new("Oscillator");
        meta.timestamp = Some("2024-01-01T00:00:00Z".into());
        let doc = build_report(&sel, &p, meta).unwrap();
        let titles: Vec<_> = doc.sections.iter().map(|s| s.title.as_str()).collect();
        assert_eq!(titles, ["Control-oriented MID", "Spectrum"]);
        assert_eq!(parse(&render_json(&doc)).unwrap(), doc);
        assert_eq!(render_html(&doc), render_html(&doc.clone()));
    }

    #[test]
    fn pendulum_gains_and_spectrum_figure() {
        use crate::admissibility::solve_for_tau;
        use crate::catalog::{example_to_problem, ExampleId};
        let ex = ExampleSystem::defaults(ExampleId::Pendulum);
        let prob = example_to_problem(&ex).unwrap();
        let tau = solve_for_tau(&prob.a, prob.m, -5.0).unwrap()[0];
        let placed = solve_control_mid(&prob.a, prob.m, tau, -5.0).unwrap();
        let spectrum = compute_spectrum(&placed.qp, &SpectralWindow::new(-30.0, 1.0, 60.0).unwrap()).unwrap();
        let p = ReportPayloads { control_mid: Some(placed), spectrum: Some(spectrum), example: Some(ex), ..Default::default() };
        let sel = BTreeSet::from([ReportMode::ControlMid, ReportMode::Spectrum]);
        let doc = build_report(&sel, &p, Metadata::new("Pendulum")).unwrap();
        let html = render_html(&doc);
        assert!(html.contains("192.16"));
        assert!(html.contains("74.83"));
        assert!(doc.sections[1].blocks.iter().any(|b| matches!(b, Block::Figure { .. })));
        assert!(html.contains("<svg"));
    }

    #[test]
    fn mode_names() {
        assert_eq!(serde_json::to_string(&ReportMode::ControlMid).unwrap(), "\"ControlMID\"");
        assert_eq!(serde_json::from_str::<ReportMode>("\"CRRID\"").unwrap(), ReportMode::Crrid);
    }

    #[test]
    fn escapes_text() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }
}
