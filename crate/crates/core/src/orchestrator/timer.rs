use std::sync::LazyLock;

use regex::Regex;

static PART: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?P<n>\d+(?:\.\d+)?|an?|one|two|three|four|five|six|seven|eight|nine|ten|fifteen|twenty|thirty|forty|forty-five|sixty|half an?)\s*(?P<u>hours?|hrs?|h|minutes?|mins?|m|seconds?|secs?|s)\b",
    )
    .unwrap()
});

fn amount(word: &str) -> Option<f64> {
    let word = word.to_lowercase();
    if let Ok(n) = word.parse::<f64>() {
        return Some(n);
    }
    let n = match word.as_str() {
        "a" | "an" | "one" => 1.0,
        "half a" | "half an" => 0.5,
        "two" => 2.0,
        "three" => 3.0,
        "four" => 4.0,
        "five" => 5.0,
        "six" => 6.0,
        "seven" => 7.0,
        "eight" => 8.0,
        "nine" => 9.0,
        "ten" => 10.0,
        "fifteen" => 15.0,
        "twenty" => 20.0,
        "thirty" => 30.0,
        "forty" => 40.0,
        "forty-five" => 45.0,
        "sixty" => 60.0,
        _ => return None,
    };
    Some(n)
}

/// Seconds in a spec such as "10 minutes", "1 hour 30 min" or "90s".
/// `None` when no positive duration is found.
pub fn parse_duration(spec: &str) -> Option<u64> {
    let mut total = 0.0;
    for caps in PART.captures_iter(spec) {
        let n = amount(&caps["n"])?;
        let unit = caps["u"].to_lowercase();
        let scale = match unit.chars().next() {
            Some('h') => 3600.0,
            Some('m') => 60.0,
            _ => 1.0,
        };
        total += n * scale;
    }
    let secs = total.round() as u64;
    (secs > 0).then_some(secs)
}

pub fn format_duration(seconds: u64) -> String {
    let (h, m, s) = (seconds / 3600, (seconds % 3600) / 60, seconds % 60);
    let unit = |n: u64, name: &str| format!("{n} {name}{}", if n == 1 { "" } else { "s" });
    let parts: Vec<String> = [(h, "hour"), (m, "minute"), (s, "second")]
        .into_iter()
        .filter(|(n, _)| *n > 0)
        .map(|(n, name)| unit(n, name))
        .collect();
    if parts.is_empty() {
        "0 seconds".into()
    } else {
        parts.join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_specs() {
        assert_eq!(parse_duration("10 minutes"), Some(600));
        assert_eq!(parse_duration("1 hour 30 min"), Some(5400));
        assert_eq!(parse_duration("90s"), Some(90));
        assert_eq!(parse_duration("an hour"), Some(3600));
        assert_eq!(parse_duration("half an hour"), Some(1800));
        assert_eq!(parse_duration("1.5 hours"), Some(5400));
        assert_eq!(parse_duration("Five Minutes"), Some(300));
        assert_eq!(parse_duration("soon"), None);
        assert_eq!(parse_duration("0 minutes"), None);
    }

    #[test]
    fn formats_durations() {
        assert_eq!(format_duration(600), "10 minutes");
        assert_eq!(format_duration(5400), "1 hour 30 minutes");
        assert_eq!(format_duration(61), "1 minute 1 second");
        assert_eq!(format_duration(0), "0 seconds");
    }
}
