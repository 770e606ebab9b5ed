//! Whitespace-separated numeric inputs for the metrics: trajectories as
//! `t x y` lines, acceleration fields as an `nx ny x0 y0 dx dy` header
//! followed by row-major `eta_long eta_lat` pairs. Blank lines and text
//! after `#` are ignored.

use std::path::Path;

use super::{read, IoError};
use crate::metrics::{AccelField, Trajectory};

/// Numbers with their 1-based line and column.
fn tokens(text: &str) -> impl Iterator<Item = (usize, usize, &str)> {
    text.lines().enumerate().flat_map(|(l, line)| {
        let body = line.split('#').next().unwrap_or("");
        body.split_whitespace().map(move |tok| {
            let col = tok.as_ptr() as usize - line.as_ptr() as usize + 1;
            (l + 1, col, tok)
        })
    })
}

fn number(origin: &str, (line, column, tok): (usize, usize, &str)) -> Result<f64, IoError> {
    tok.parse::<f64>().map_err(|_| IoError::Parse {
        path: origin.to_string(),
        line,
        column,
        message: format!("`{tok}` is not a number"),
    })
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Trajectory, IoError> {
    let path = path.as_ref();
    parse_trajectory(&read(path)?, &path.display().to_string())
}

pub fn parse_trajectory(text: &str, origin: &str) -> Result<Trajectory, IoError> {
    let mut samples = Vec::new();
    for (l, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 3 {
            return Err(IoError::Parse {
                path: origin.to_string(),
                line: l + 1,
                column: 1,
                message: format!("expected `t x y`, found {} fields", fields.len()),
            });
        }
        let mut sample = [0.0; 3];
        for (k, tok) in fields.iter().enumerate() {
            let column = tok.as_ptr() as usize - line.as_ptr() as usize + 1;
            sample[k] = number(origin, (l + 1, column, tok))?;
        }
        samples.push(sample);
    }
    Trajectory::new(samples).map_err(|source| IoError::Metrics { path: origin.to_string(), source })
}

pub fn load_field(path: impl AsRef<Path>) -> Result<AccelField, IoError> {
    let path = path.as_ref();
    parse_field(&read(path)?, &path.display().to_string())
}

pub fn parse_field(text: &str, origin: &str) -> Result<AccelField, IoError> {
    let mut toks = tokens(text);
    let eof = |what: &str| IoError::Parse {
        path: origin.to_string(),
        line: text.lines().count(),
        column: 1,
        message: format!("unexpected end of file, expected {what}"),
    };
    let mut header = [0.0; 6];
    for (k, name) in ["nx", "ny", "x0", "y0", "dx", "dy"].iter().enumerate() {
        header[k] = number(origin, toks.next().ok_or_else(|| eof(name))?)?;
    }
    let count = |v: f64, name: &str| {
        if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
            Ok(v as usize)
        } else {
            Err(IoError::Parse { path: origin.to_string(), line: 1, column: 1, message: format!("{name} must be a positive integer") })
        }
    };
    let (nx, ny) = (count(header[0], "nx")?, count(header[1], "ny")?);
    let mut cells = Vec::with_capacity(nx * ny);
    for _ in 0..nx * ny {
        let long = number(origin, toks.next().ok_or_else(|| eof("eta_long"))?)?;
        let lat = number(origin, toks.next().ok_or_else(|| eof("eta_lat"))?)?;
        cells.push((long, lat));
    }
    if let Some((line, column, tok)) = toks.next() {
        return Err(IoError::Parse { path: origin.to_string(), line, column, message: format!("trailing value `{tok}`") });
    }
    AccelField::new(nx, ny, (header[2], header[3]), (header[4], header[5]), cells)
        .map_err(|source| IoError::Metrics { path: origin.to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_text() {
        let text = "# t x y\n0 0 0\n0.1 1 0\n\n0.2 2 0\n0.3 3 0  # note\n0.4 4 0\n";
        let tr = parse_trajectory(text, "mem").unwrap();
        assert_eq!(tr.samples().len(), 5);
        let err = parse_trajectory("0 0 0\n0.1 x 0\n", "mem").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 2, column: 5, .. }), "{err}");
        assert!(matches!(parse_trajectory("0 0\n", "mem"), Err(IoError::Parse { line: 1, .. })));
    }

    #[test]
    fn field_text() {
        let f = parse_field("2 1 0 0 1 1\n-8 5\n-2 1\n", "mem").unwrap();
        assert_eq!(f.at(1.5, 0.5).unwrap(), (-2.0, 1.0));
        assert!(matches!(parse_field("2 1 0 0 1 1\n-8 5\n", "mem"), Err(IoError::Parse { .. })));
        assert!(matches!(parse_field("1 1 0 0 1 1\n3 5\n", "mem"), Err(IoError::Metrics { .. })));
        assert!(matches!(parse_field("1 1 0 0 1 1\n-3 5 7\n", "mem"), Err(IoError::Parse { .. })));
    }
}
