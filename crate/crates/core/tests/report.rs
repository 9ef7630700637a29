use std::collections::BTreeSet;

use delaylab::admissibility::compute_grid;
use delaylab::catalog::{ExampleId, ExampleSystem};
use delaylab::dde_sim::{simulate, HistorySpec};
use delaylab::factorization::integral_form;
use delaylab::report::{build_report, parse, render_html, render_json, round_sig, Metadata, ReportMode, ReportPayloads};
use delaylab::spectrum::{compute_spectrum, sensitivity_sweep, SpectralWindow};
use delaylab::{solve_control_mid, solve_crrid, solve_generic_mid};
use quick_xml::events::Event;
use quick_xml::Reader;

fn all_modes() -> BTreeSet<ReportMode> {
    BTreeSet::from([
        ReportMode::GenericMid,
        ReportMode::ControlMid,
        ReportMode::Crrid,
        ReportMode::Admissibility,
        ReportMode::Spectrum,
        ReportMode::Sensitivity,
        ReportMode::Simulation,
        ReportMode::Factorization,
    ])
}

fn full_payloads() -> ReportPayloads {
    let control = solve_control_mid(&[1.0, 0.0], 1, 1.0, -1.0).unwrap();
    let qp = control.qp.clone();
    ReportPayloads {
        generic_mid: Some(solve_generic_mid(2, 1, 1.0, 0.0).unwrap()),
        crrid: Some(solve_crrid(1, 0, 1.0, &[-1.0, -2.0]).unwrap()),
        admissibility: Some(compute_grid(&[1.0, 0.0], 1, -4.0, 2.0, 30, 30).unwrap()),
        spectrum: Some(compute_spectrum(&qp, &SpectralWindow::new(-6.0, 1.0, 20.0).unwrap()).unwrap()),
        sensitivity: Some(sensitivity_sweep(&qp, -1.0, 0.2, 10, 20).unwrap()),
        simulation: Some(simulate(&qp, &HistorySpec::Constant { value: 1.0 }, 10.0, 0.05).unwrap()),
        factorization: Some(integral_form(&qp, -1.0, 3).unwrap()),
        control_mid: Some(control),
        example: Some(ExampleSystem::defaults(ExampleId::Oscillator)),
    }
}

fn assert_well_formed(html: &str) {
    let body = html.strip_prefix("<!DOCTYPE html>").expect("doctype");
    let mut reader = Reader::from_str(body);
    let mut depth = 0i64;
    loop {
        match reader.read_event().expect("well-formed markup") {
            Event::Start(_) => depth += 1,
            Event::End(_) => depth -= 1,
            Event::Eof => break,
            _ => {}
        }
        assert!(depth >= 0);
    }
    assert_eq!(depth, 0);
}

fn meta() -> Metadata {
    let mut m = Metadata::new("Session");
    m.timestamp = Some("2024-05-01T12:00:00Z".into());
    m
}

#[test]
fn html_is_well_formed_for_every_section() {
    let doc = build_report(&all_modes(), &full_payloads(), meta()).unwrap();
    assert_eq!(doc.sections.len(), 8);
    let html = render_html(&doc);
    assert_well_formed(&html);
    assert!(!html.contains("<link") && !html.contains("<script"));
}

#[test]
fn metadata_only_document_is_well_formed() {
    let doc = build_report(&BTreeSet::new(), &ReportPayloads::default(), Metadata::new("Nothing selected")).unwrap();
    assert_well_formed(&render_html(&doc));
}

#[test]
fn renderings_are_deterministic() {
    let a = build_report(&all_modes(), &full_payloads(), meta()).unwrap();
    let b = build_report(&all_modes(), &full_payloads(), meta()).unwrap();
    assert_eq!(render_html(&a), render_html(&b));
    assert_eq!(render_json(&a), render_json(&b));
}

#[test]
fn json_round_trips() {
    let doc = build_report(&all_modes(), &full_payloads(), meta()).unwrap();
    assert_eq!(parse(&render_json(&doc)).unwrap(), doc);
}

#[test]
fn json_keeps_every_result_value() {
    let p = full_payloads();
    let doc = build_report(&all_modes(), &p, meta()).unwrap();
    let value: serde_json::Value = serde_json::from_str(&render_json(&doc)).unwrap();
    let mut numbers = Vec::new();
    collect(&value, &mut numbers);
    let present = |x: f64| numbers.iter().any(|y| *y == round_sig(x));

    let sim = p.simulation.as_ref().unwrap();
    assert!(sim.y.iter().all(|y| present(*y)));
    let spectrum = p.spectrum.as_ref().unwrap();
    assert!(spectrum.roots.iter().all(|r| present(r.re) && present(r.im)));
    for r in [&p.generic_mid, &p.control_mid, &p.crrid] {
        let r = r.as_ref().unwrap();
        assert!(r.qp.a().iter().chain(r.qp.b()).all(|c| present(*c)));
    }
    let grid = p.admissibility.as_ref().unwrap();
    assert!(grid.values.iter().flatten().all(|v| present(*v)));
    let trace = p.sensitivity.as_ref().unwrap();
    assert!(trace.branches.iter().flatten().all(|b| present(b.re) && present(b.im)));
}

fn collect(v: &serde_json::Value, out: &mut Vec<f64>) {
    match v {
        serde_json::Value::Number(n) => out.push(n.as_f64().unwrap()),
        serde_json::Value::Array(a) => a.iter().for_each(|x| collect(x, out)),
        serde_json::Value::Object(o) => o.values().for_each(|x| collect(x, out)),
        _ => {}
    }
}

#[test]
fn long_tables_are_truncated_in_html_only() {
    let p = full_payloads();
    let sel = BTreeSet::from([ReportMode::Simulation]);
    let doc = build_report(&sel, &p, meta()).unwrap();
    let html = render_html(&doc);
    assert!(html.contains("further rows in the JSON export"));
    assert!(render_json(&doc).matches("\n").count() > p.simulation.unwrap().t.len());
}
