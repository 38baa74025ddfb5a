use crate::error::Result;
use crate::verification::VerificationReport;

use super::binary::FORMAT_VERSION;

/// CSV text with a `# kslab format=<v> config=<hash>` first line, then the header and rows.
pub fn csv_document(hash: &str, header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = format!("# kslab format={FORMAT_VERSION} config={hash}\n{header}\n");
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

pub fn reports_to_json(reports: &[VerificationReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialise to JSON")
}

/// Parse a JSON array of reports.
pub fn parse_reports(text: &str) -> Result<Vec<VerificationReport>> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verification::Prediction;

    #[test]
    fn report_array_round_trip() {
        let r = vec![
            VerificationReport::judge("a", "x", Prediction::Bound(0.1), 0.05, 0.0, "ff", false),
            VerificationReport::judge("b", "y", Prediction::Value(1.0), f64::INFINITY, 0.0, "ff", true),
        ];
        let back = parse_reports(&reports_to_json(&r)).unwrap();
        assert_eq!(back[0], r[0]);
        assert_eq!(back[1].measured, f64::INFINITY);
        assert!(parse_reports("[{]").is_err());
        assert!(parse_reports("{}").is_err());
    }

    #[test]
    fn csv_has_versioned_header() {
        let s = csv_document("abc", "t,x", vec!["0,1".to_string()]);
        assert_eq!(s, "# kslab format=1 config=abc\nt,x\n0,1\n");
    }
}
