//! Line records from a network eye tracker.
//!
//! Trackers stream one XML-style element per line, e.g.
//! `<REC TIME="12.500" FPOGX="0.25" FPOGY="0.75" FPOGV="1" />`, where
//! `TIME` is seconds since the tracker started, `FPOGX`/`FPOGY` the fixation
//! point of regard in normalized screen coordinates, and `FPOGV` its
//! validity flag.

use gazevo_core::gaze::GazeSample;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed tracker record: {reason}")]
pub struct MalformedRecord {
    pub reason: String,
}

impl MalformedRecord {
    fn new(reason: impl Into<String>) -> Self {
        MalformedRecord { reason: reason.into() }
    }
}

/// Counters kept while consuming a tracker stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub records: u64,
    pub invalid: u64,
    pub malformed: u64,
    pub dropped: u64,
}

/// Looks up `name="value"` inside an element's attribute list.
fn attribute<'a>(attrs: &'a str, name: &str) -> Option<&'a str> {
    let mut rest = attrs;
    while let Some(eq) = rest.find('=') {
        let key = rest[..eq].split_whitespace().last().unwrap_or("");
        let after = rest[eq + 1..].trim_start();
        let quote = after.chars().next().filter(|c| *c == '"' || *c == '\'')?;
        let end = after[1..].find(quote)?;
        if key == name {
            return Some(&after[1..1 + end]);
        }
        rest = &after[end + 2..];
    }
    None
}

fn number(attrs: &str, name: &str) -> Result<f64, MalformedRecord> {
    let raw = attribute(attrs, name).ok_or_else(|| MalformedRecord::new(format!("missing {name}")))?;
    let v: f64 = raw.trim().parse().map_err(|_| MalformedRecord::new(format!("{name}={raw:?} is not a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(MalformedRecord::new(format!("{name} is not finite")))
    }
}

/// Parses one `<REC …/>` line. `FPOGV="0"` yields an invalid sample; so do
/// valid-flagged coordinates that fall off-screen.
pub fn parse_tracker_record(line: &[u8]) -> Result<GazeSample, MalformedRecord> {
    let text = std::str::from_utf8(line).map_err(|_| MalformedRecord::new("not UTF-8"))?.trim();
    let body = text
        .strip_prefix("<REC")
        .and_then(|s| s.strip_suffix("/>"))
        .ok_or_else(|| MalformedRecord::new("expected a <REC … /> element"))?;
    let t_ms = number(body, "TIME")? * 1000.0;
    let x = number(body, "FPOGX")?;
    let y = number(body, "FPOGY")?;
    let flag = attribute(body, "FPOGV").ok_or_else(|| MalformedRecord::new("missing FPOGV"))?;
    let mut sample = GazeSample::new(t_ms, x, y);
    match flag.trim() {
        "1" => {}
        "0" => sample.valid = false,
        other => return Err(MalformedRecord::new(format!("FPOGV={other:?} is not 0 or 1"))),
    }
    Ok(sample)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_record() {
        let s = parse_tracker_record(br#"<REC TIME="12.500" FPOGX="0.25" FPOGY="0.75" FPOGV="1" />"#).unwrap();
        assert_eq!((s.t_ms, s.x, s.y, s.valid), (12500.0, 0.25, 0.75, true));
    }

    #[test]
    fn invalid_flag() {
        let s = parse_tracker_record(br#"<REC TIME="13.000" FPOGX="-0.1" FPOGY="0.5" FPOGV="0" />"#).unwrap();
        assert!(!s.valid);
        assert_eq!(s.t_ms, 13000.0);
    }

    #[test]
    fn off_screen_point_is_invalid_even_when_flagged() {
        let s = parse_tracker_record(br#"<REC TIME="1" FPOGX="1.2" FPOGY="0.5" FPOGV="1"/>"#).unwrap();
        assert!(!s.valid);
    }

    #[test]
    fn attribute_order_and_extras_do_not_matter() {
        let s = parse_tracker_record(br#"<REC FPOGV="1" CNT="7" FPOGY="0.1" TIME="0.010" FPOGX="0.9" />"#).unwrap();
        assert_eq!((s.t_ms, s.x, s.y), (10.0, 0.9, 0.1));
    }

    #[test]
    fn garbage_is_malformed() {
        for line in [
            &b"garbage"[..],
            br#"<REC TIME="x" FPOGX="0" FPOGY="0" FPOGV="1" />"#,
            br#"<REC TIME="1" FPOGX="0" FPOGV="1" />"#,
            br#"<REC TIME="1" FPOGX="0" FPOGY="0" FPOGV="2" />"#,
            br#"<REC TIME="1" FPOGX="0" FPOGY="0" FPOGV="1""#,
            &[0xff, 0xfe],
        ] {
            assert!(parse_tracker_record(line).is_err(), "{:?}", String::from_utf8_lossy(line));
        }
    }
}
