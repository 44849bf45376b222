use std::sync::LazyLock;

use regex::Regex;
use sha2::{Digest, Sha256};
use taskbot_core::taskgraph::Requirement;

pub fn collapse(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `{title-slug}-{8 hex of sha256(url)}`: readable and stable per source.
pub fn task_id(title: &str, url: &str) -> String {
    let mut slug = String::new();
    for c in title.chars().flat_map(char::to_lowercase) {
        if c.is_ascii_alphanumeric() {
            slug.push(c);
        } else if !slug.ends_with('-') && !slug.is_empty() {
            slug.push('-');
        }
        if slug.len() >= 40 {
            break;
        }
    }
    let slug = slug.trim_end_matches('-');
    let digest = hex::encode(&Sha256::digest(url.as_bytes())[..4]);
    if slug.is_empty() {
        format!("task-{digest}")
    } else {
        format!("{slug}-{digest}")
    }
}

static ISO_DURATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^P(?:(\d+)D)?(?:T(?:(\d+)H)?(?:(\d+)M)?(?:(\d+(?:\.\d+)?)S)?)?$").unwrap());

/// Seconds in an ISO 8601 duration such as `PT1H30M`; zero or malformed is `None`.
pub fn iso_duration_seconds(text: &str) -> Option<u32> {
    let caps = ISO_DURATION.captures(text.trim())?;
    let part = |i: usize| caps.get(i).map_or(Ok(0.0), |m| m.as_str().parse::<f64>());
    let total = part(1).ok()? * 86400.0 + part(2).ok()? * 3600.0 + part(3).ok()? * 60.0 + part(4).ok()?;
    let secs = total.round();
    (secs >= 1.0 && secs <= f64::from(u32::MAX)).then_some(secs as u32)
}

const NUMBER_WORDS: [&str; 14] = [
    "a", "an", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
];

const UNITS: [&str; 58] = [
    "g",
    "kg",
    "mg",
    "ml",
    "l",
    "oz",
    "lb",
    "lbs",
    "cup",
    "cups",
    "tbsp",
    "tsp",
    "tablespoon",
    "tablespoons",
    "teaspoon",
    "teaspoons",
    "pound",
    "pounds",
    "ounce",
    "ounces",
    "clove",
    "cloves",
    "can",
    "cans",
    "tin",
    "tins",
    "sheet",
    "sheets",
    "slice",
    "slices",
    "pinch",
    "handful",
    "bunch",
    "sprig",
    "sprigs",
    "piece",
    "pieces",
    "litre",
    "litres",
    "liter",
    "liters",
    "gram",
    "grams",
    "inch",
    "inches",
    "mm",
    "cm",
    "m",
    "ft",
    "feet",
    "roll",
    "rolls",
    "tube",
    "pack",
    "packet",
    "bag",
    "jar",
    "stick",
];

fn is_amount(token: &str) -> bool {
    let t = token.trim_matches(['(', ')']);
    t.chars()
        .any(|c| c.is_ascii_digit() || ('¼'..='¾').contains(&c) || ('⅐'..='⅞').contains(&c))
        || NUMBER_WORDS.contains(&t.to_lowercase().as_str())
}

fn is_unit(token: &str) -> bool {
    let t = token.trim_matches(['(', ')', '.', ',']).to_lowercase();
    UNITS.contains(&t.as_str())
}

/// "200 g unsalted butter" → name "unsalted butter", quantity "200 g".
pub fn split_quantity(line: &str) -> Requirement {
    let line = collapse(line);
    let tokens: Vec<&str> = line.split(' ').collect();
    let mut i = 0;
    while i < tokens.len() && is_amount(tokens[i]) {
        i += 1;
    }
    if i > 0 {
        let mut units = 0;
        while i < tokens.len() && units < 2 && is_unit(tokens[i]) {
            i += 1;
            units += 1;
        }
        if i < tokens.len() && tokens[i].eq_ignore_ascii_case("of") {
            i += 1;
        }
    }
    if i == 0 || i >= tokens.len() {
        return Requirement::new(line, None);
    }
    let quantity = tokens[..i]
        .iter()
        .filter(|t| !t.eq_ignore_ascii_case("of"))
        .copied()
        .collect::<Vec<_>>()
        .join(" ");
    Requirement::new(tokens[i..].join(" "), Some(&quantity))
}

/// Splits after `.`, `!` or `?` followed by whitespace.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    for (i, c) in text.char_indices() {
        if matches!(c, '.' | '!' | '?') && bytes.get(i + 1).is_some_and(|b| b.is_ascii_whitespace()) {
            let s = text[start..=i].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = i + 1;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_slug_plus_digest() {
        let id = task_id("Crème Brûlée: The Classic!", "https://x.test/a");
        assert!(id.starts_with("cr-me-br-l-e-the-classic-"), "{id}");
        assert_eq!(id, task_id("Crème Brûlée: The Classic!", "https://x.test/a"));
        assert_ne!(id, task_id("Crème Brûlée: The Classic!", "https://x.test/b"));
        assert!(task_id("!!!", "u").starts_with("task-"));
    }

    #[test]
    fn iso_durations() {
        assert_eq!(iso_duration_seconds("PT1H30M"), Some(5400));
        assert_eq!(iso_duration_seconds("PT45M"), Some(2700));
        assert_eq!(iso_duration_seconds("P1DT2H"), Some(93600));
        assert_eq!(iso_duration_seconds("PT0M"), None);
        assert_eq!(iso_duration_seconds("90 minutes"), None);
    }

    #[test]
    fn quantities() {
        let r = split_quantity("200 g unsalted butter");
        assert_eq!(
            (r.name.as_str(), r.quantity.as_deref()),
            ("unsalted butter", Some("200 g"))
        );
        let r = split_quantity("2 cups of flour");
        assert_eq!((r.name.as_str(), r.quantity.as_deref()), ("flour", Some("2 cups")));
        let r = split_quantity("1 ½ tsp salt");
        assert_eq!((r.name.as_str(), r.quantity.as_deref()), ("salt", Some("1 ½ tsp")));
        let r = split_quantity("Salt and pepper");
        assert_eq!((r.name.as_str(), r.quantity), ("Salt and pepper", None));
        let r = split_quantity("3 eggs");
        assert_eq!((r.name.as_str(), r.quantity.as_deref()), ("eggs", Some("3")));
        assert_eq!(split_quantity("12").name, "12");
    }

    #[test]
    fn sentence_split() {
        assert_eq!(
            sentences("Mix well. Bake 20 min! Done?"),
            ["Mix well.", "Bake 20 min!", "Done?"]
        );
        assert_eq!(sentences("Use 2.5 cups"), ["Use 2.5 cups"]);
        assert!(sentences("  ").is_empty());
    }
}
