//! Wide CSV exchange: header `time,<tag1>,<tag2>,...`, one row per sample,
//! LF line endings, no quoting.

use super::{is_valid_tag, HistorianError, TimeSeriesFrame};

/// Shortest decimal that parses back to the identical `f64`.
///
/// Positional notation in the everyday range, exponent notation for very
/// large or very small magnitudes so the output stays short.
pub fn format_decimal(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn export_csv(frame: &TimeSeriesFrame) -> String {
    let mut out = String::with_capacity(16 * (frame.len() + 1) * (frame.width() + 1));
    out.push_str("time");
    for tag in frame.tags() {
        out.push(',');
        out.push_str(tag);
    }
    out.push('\n');
    for (i, t) in frame.times().iter().enumerate() {
        out.push_str(&format_decimal(*t));
        for v in frame.row(i) {
            out.push(',');
            out.push_str(&format_decimal(*v));
        }
        out.push('\n');
    }
    out
}

fn malformed(line: usize, detail: impl Into<String>) -> HistorianError {
    HistorianError::CsvMalformed {
        line,
        detail: detail.into(),
    }
}

pub fn import_csv(text: &str) -> Result<TimeSeriesFrame, HistorianError> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut lines = body.split('\n');
    let header = lines.next().filter(|h| !h.is_empty()).ok_or_else(|| malformed(1, "missing header"))?;
    let mut cols = header.split(',');
    if cols.next() != Some("time") {
        return Err(malformed(1, "header must start with `time`"));
    }
    let tags: Vec<String> = cols.map(str::to_string).collect();
    for (i, tag) in tags.iter().enumerate() {
        if !is_valid_tag(tag) {
            return Err(malformed(1, format!("invalid tag {tag:?}")));
        }
        if tags[..i].contains(tag) {
            return Err(malformed(1, format!("duplicate tag {tag}")));
        }
    }

    let mut times = Vec::new();
    let mut values = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let mut cells = line.split(',');
        let parse = |cell: Option<&str>| -> Result<f64, HistorianError> {
            let cell = cell.ok_or_else(|| malformed(lineno, "ragged row: too few cells"))?;
            cell.parse::<f64>()
                .map_err(|_| malformed(lineno, format!("non-numeric cell {cell:?}")))
        };
        let t = parse(cells.next())?;
        if !t.is_finite() {
            return Err(malformed(lineno, "non-finite time"));
        }
        if let Some(&prev) = times.last() {
            if !(t > prev) {
                return Err(malformed(lineno, "time not strictly increasing"));
            }
        }
        for _ in 0..tags.len() {
            values.push(parse(cells.next())?);
        }
        if cells.next().is_some() {
            return Err(malformed(lineno, "ragged row: too many cells"));
        }
        times.push(t);
    }
    TimeSeriesFrame::new(tags, times, values).map_err(|e| malformed(0, e.to_string()))
}
