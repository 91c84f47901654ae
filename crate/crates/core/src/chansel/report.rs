use thiserror::Error;

use super::ChannelTally;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("selection report has no 'selected:' line")]
    MissingSelection,
    #[error("bad channel index '{0}' in selection report")]
    BadIndex(String),
}

/// Plain-text table, one row per channel in index order, preceded by the
/// selected indices in tally order.
pub fn write_report(tally: &ChannelTally, labels: &[String], k: usize, m: usize, seed: u64) -> String {
    let mean = tally.mean_accuracy();
    let mut out = format!("# channel selection k={k} m={m} seed={seed}\n");
    let sel: Vec<String> = tally.selected.iter().map(usize::to_string).collect();
    out += &format!("selected: {}\n", sel.join(","));
    out += "index\tlabel\tmean_accuracy\tappearances\tselected\n";
    for c in 0..tally.num_channels() {
        let flag = if tally.selected.contains(&c) { "yes" } else { "no" };
        out += &format!("{c}\t{}\t{:.4}\t{}\t{flag}\n", labels[c], mean[c], tally.appearance_counts[c]);
    }
    out
}

/// Selected channel indices from a report written by [`write_report`].
pub fn parse_report(text: &str) -> Result<Vec<usize>, ReportError> {
    let line = text
        .lines()
        .find_map(|l| l.strip_prefix("selected:"))
        .ok_or(ReportError::MissingSelection)?;
    line.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| ReportError::BadIndex(s.to_string())))
        .collect()
}
