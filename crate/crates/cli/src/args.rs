use delaylab::dde_sim::HistorySpec;
use delaylab::report::ReportMode;
use delaylab::spectrum::SpectralWindow;

/// A comma-separated list. The alias keeps clap from treating the field as
/// a repeated argument.
pub type List = Vec<f64>;

pub fn parse_list(s: &str) -> Result<List, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

/// `200x200`.
pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or("expected NxM, e.g. 200x200")?;
    let a = a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("`{b}`: {e}"))?;
    Ok((a, b))
}

/// `x_min,x_max,y_max`.
pub fn parse_window(s: &str) -> Result<SpectralWindow, String> {
    match parse_list(s)?[..] {
        [x_min, x_max, y_max] => SpectralWindow::new(x_min, x_max, y_max).map_err(|e| e.to_string()),
        _ => Err("expected X_MIN,X_MAX,Y_MAX".into()),
    }
}

/// `constant:V`, `poly:C0,C1,...`, `sampled:DT:V0,V1,...` or `@FILE` holding the JSON form.
pub fn parse_history(s: &str) -> Result<HistorySpec, String> {
    if let Some(path) = s.strip_prefix('@') {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
        return serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"));
    }
    let (kind, rest) = s.split_once(':').ok_or("expected KIND:VALUES")?;
    match kind {
        "constant" => Ok(HistorySpec::Constant { value: rest.trim().parse().map_err(|e| format!("`{rest}`: {e}"))? }),
        "poly" | "polynomial" => Ok(HistorySpec::Polynomial { coeffs: parse_list(rest)? }),
        "sampled" => {
            let (dt, values) = rest.split_once(':').ok_or("expected sampled:DT:V0,V1,...")?;
            Ok(HistorySpec::Sampled { dt: dt.trim().parse().map_err(|e| format!("`{dt}`: {e}"))?, values: parse_list(values)? })
        }
        _ => Err(format!("unknown history kind `{kind}`")),
    }
}

/// Accepts the JSON names (`ControlMID`) and dashed spellings (`control-mid`).
pub fn parse_mode(s: &str) -> Result<ReportMode, String> {
    let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
    Ok(match key.as_str() {
        "genericmid" => ReportMode::GenericMid,
        "controlmid" => ReportMode::ControlMid,
        "crrid" => ReportMode::Crrid,
        "admissibility" => ReportMode::Admissibility,
        "spectrum" => ReportMode::Spectrum,
        "sensitivity" => ReportMode::Sensitivity,
        "simulation" | "simulate" => ReportMode::Simulation,
        "factorization" => ReportMode::Factorization,
        _ => return Err(format!("unknown section `{s}`")),
    })
}

/// `--tau`: a delay, or a policy for the delays solved from `--s0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauArg {
    Value(f64),
    Smallest,
    All,
}

impl TauArg {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "smallest" => Ok(Self::Smallest),
            "all" => Ok(Self::All),
            _ => s.parse().map(Self::Value).map_err(|_| format!("`{s}` is neither a delay nor smallest|all")),
        }
    }
}
