use std::io::Write;
use std::path::Path;

/// What a command produced: the service payload, the human summary, and the
/// file format for `--out`.
pub struct Output {
    json: String,
    human: String,
    csv: Option<String>,
    document: bool,
}

impl Output {
    pub fn json_only(json: String, human: String) -> Self {
        Self { json, human, csv: None, document: false }
    }

    pub fn with_csv(json: String, human: String, csv: String) -> Self {
        Self { json, human, csv: Some(csv), document: false }
    }

    /// A rendered report: printed and written as is.
    pub fn document(text: String) -> Self {
        Self { json: text.clone(), human: text, csv: None, document: true }
    }

    pub fn emit(&self, json: bool, out: Option<&Path>) -> std::io::Result<()> {
        let mut stdout = std::io::stdout().lock();
        if let Some(path) = out {
            let wants_json = path.extension().is_some_and(|e| e == "json");
            let body = match &self.csv {
                Some(csv) if !wants_json && !self.document => csv,
                _ => &self.json,
            };
            std::fs::write(path, body)?;
            if !json && !self.document {
                write!(stdout, "{}", self.human)?;
                writeln!(stdout, "wrote {}", path.display())?;
                return Ok(());
            }
            if self.document {
                return Ok(());
            }
        }
        if json {
            writeln!(stdout, "{}", self.json)
        } else {
            write!(stdout, "{}", self.human)
        }
    }
}

/// Six significant digits, without trailing zeros.
pub fn fmt(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let a = x.abs();
    if !(1e-4..1e6).contains(&a) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - a.log10().floor() as i32).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// Entries below `1e-12` times the largest one print as 0.
pub fn fmt_vec(v: &[f64]) -> String {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let parts: Vec<String> = v.iter().map(|x| if x.abs() <= 1e-12 * scale { "0".into() } else { fmt(*x) }).collect();
    format!("[{}]", parts.join(", "))
}

pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut s = line(header.to_vec());
    for r in rows {
        s += &line(r.iter().map(String::as_str).collect());
    }
    s
}
