//! Plain-text diagram files: one `dim,birth,death` record per line.
//!
//! `inf` is accepted as a death value, `#` starts a comment and blank lines
//! are skipped. Values are written with Rust's shortest round-trip float
//! formatting, so `parse(format(A)) == A` bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use super::{PersistenceDiagram, PersistencePoint};
use crate::error::{Error, Result};

pub fn read_diagram(path: impl AsRef<Path>) -> Result<PersistenceDiagram> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_diagram(&text, path)
}

pub fn write_diagram(diagram: &PersistenceDiagram, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_diagram(diagram)).map_err(|e| Error::io(path, e))
}

pub fn format_diagram(diagram: &PersistenceDiagram) -> String {
    let mut out = String::with_capacity(diagram.len() * 24);
    for p in diagram {
        let _ = writeln!(
            out,
            "{},{},{}",
            p.dim,
            fmt_value(p.birth),
            fmt_value(p.death)
        );
    }
    out
}

fn fmt_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_owned()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_owned()
    } else {
        format!("{v}")
    }
}

fn parse_value(field: &str) -> Option<f64> {
    match field.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        s => s.parse::<f64>().ok().filter(|v| !v.is_nan()),
    }
}

/// Parses diagram text; `origin` only labels error messages.
pub fn parse_diagram(text: &str, origin: impl AsRef<Path>) -> Result<PersistenceDiagram> {
    let origin = origin.as_ref();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };

    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(parse_err(
                line_no,
                format!(
                    "expected 3 fields 'dim,birth,death', found {}",
                    fields.len()
                ),
            ));
        }
        let dim = fields[0]
            .parse::<usize>()
            .map_err(|_| parse_err(line_no, format!("invalid dimension '{}'", fields[0])))?;
        let birth = parse_value(fields[1])
            .filter(|b| b.is_finite())
            .ok_or_else(|| parse_err(line_no, format!("invalid birth '{}'", fields[1])))?;
        let death = parse_value(fields[2])
            .ok_or_else(|| parse_err(line_no, format!("invalid death '{}'", fields[2])))?;
        let point =
            PersistencePoint::try_new(dim, birth, death).ok_or(Error::NegativePersistence {
                line: line_no,
                birth,
                death,
            })?;
        points.push(point);
    }
    Ok(PersistenceDiagram::new(points))
}
