use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Hours assumed for "overnight".
pub const OVERNIGHT_HOURS: f64 = 12.0;

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(\d+(?:\.\d+)?|\.\d+)").unwrap());
static DURATION_TERM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(\d+(?:\.\d+)?)(?:\s*(?:-|–|to)\s*(\d+(?:\.\d+)?))?\s*(days?|d|hours?|hrs?|h|minutes?|mins?|min|m|seconds?|secs?|s)\b",
    )
    .unwrap()
});

/// Parses a yield such as "82%", "0.82" or "82". Bare numbers above 1 are
/// read as percentages. Returns `None` outside (0, 1].
pub fn parse_yield(text: &str) -> Option<f64> {
    let m = NUMBER.find(text)?;
    let value: f64 = m.as_str().parse().ok()?;
    let percent = text[m.end()..].trim_start().starts_with('%');
    let fraction = if percent || value > 1.0 { value / 100.0 } else { value };
    (fraction > 0.0 && fraction <= 1.0).then_some(fraction)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParsedDuration {
    pub hours: f64,
    /// Set for vague phrases and ranges.
    pub approximate: bool,
}

/// Parses durations like "3 h", "30 min", "1 h 30 min", "2-3 h", "2 days" or
/// "overnight". Ranges resolve to their midpoint.
pub fn parse_duration(text: &str) -> Option<ParsedDuration> {
    let lower = text.to_lowercase();
    let mut hours = 0.0;
    let mut approximate = false;
    let mut matched = false;
    for cap in DURATION_TERM.captures_iter(&lower) {
        let lo: f64 = cap[1].parse().ok()?;
        let value = match cap.get(2) {
            Some(hi) => {
                approximate = true;
                (lo + hi.as_str().parse::<f64>().ok()?) / 2.0
            }
            None => lo,
        };
        let unit = &cap[3];
        let factor = match unit.chars().next()? {
            'd' => 24.0,
            'h' => 1.0,
            'm' => 1.0 / 60.0,
            _ => 1.0 / 3600.0,
        };
        hours += value * factor;
        matched = true;
    }
    if lower.contains("overnight") {
        hours += OVERNIGHT_HOURS;
        approximate = true;
        matched = true;
    }
    matched.then_some(ParsedDuration { hours, approximate })
}
