use thiserror::Error;

use super::SeizureAnnotation;

#[derive(Debug, Error, PartialEq)]
pub enum AnnotationError {
    #[error("line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("line {line}: {reason}")]
    OrderError { line: usize, reason: String },
}

/// Reads the `onset_s,offset_s` sidecar. Blank lines and `#` comments are
/// skipped. The result is sorted by onset and checked for overlap.
pub fn load_annotations(text: &str) -> Result<Vec<SeizureAnnotation>, AnnotationError> {
    let mut out: Vec<(usize, SeizureAnnotation)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim().trim_start_matches('\u{feff}');
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(AnnotationError::ParseError {
                line,
                reason: format!("expected two comma-separated fields, got {trimmed:?}"),
            });
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| AnnotationError::ParseError {
                    line,
                    reason: format!("not a finite number: {:?}", s.trim()),
                })
        };
        let (onset_s, offset_s) = (parse(a)?, parse(b)?);
        if onset_s < 0.0 {
            return Err(AnnotationError::OrderError { line, reason: format!("negative onset {onset_s}") });
        }
        if offset_s <= onset_s {
            return Err(AnnotationError::OrderError {
                line,
                reason: format!("offset {offset_s} is not after onset {onset_s}"),
            });
        }
        out.push((line, SeizureAnnotation { onset_s, offset_s }));
    }
    out.sort_by(|x, y| x.1.onset_s.total_cmp(&y.1.onset_s));
    for w in out.windows(2) {
        if w[1].1.onset_s < w[0].1.offset_s {
            return Err(AnnotationError::OrderError {
                line: w[1].0,
                reason: format!(
                    "seizure at {} s overlaps the one ending at {} s",
                    w[1].1.onset_s, w[0].1.offset_s
                ),
            });
        }
    }
    Ok(out.into_iter().map(|(_, a)| a).collect())
}

/// Inverse of [`load_annotations`].
pub fn format_annotations(annotations: &[SeizureAnnotation]) -> String {
    let mut s = String::from("# onset_s,offset_s\n");
    for a in annotations {
        s.push_str(&format!("{},{}\n", a.onset_s, a.offset_s));
    }
    s
}
