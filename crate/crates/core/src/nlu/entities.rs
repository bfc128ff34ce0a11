use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::NluError;
use crate::project::{EntitySource, Normalizer, ProjectConfig};
use crate::text::{self, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    Pattern,
    Gazetteer,
}

/// A recognized entity. `start`/`end` are character offsets into the NFC
/// form of the utterance; `raw` is that slice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMatch {
    pub entity: String,
    pub raw: String,
    pub start: usize,
    pub end: usize,
    pub value: String,
    pub extractor: ExtractorKind,
}

enum Compiled {
    Pattern {
        name: String,
        regex: Regex,
        normalizer: Normalizer,
    },
    Gazetteer {
        name: String,
        /// `(surface tokens, canonical value)`, canonical forms included.
        terms: Vec<(Vec<String>, String)>,
    },
}

/// Compiled entity definitions of one project.
pub struct EntityExtractor {
    entries: Vec<Compiled>,
}

impl EntityExtractor {
    /// Entities whose pattern does not compile are skipped; project
    /// validation reports them.
    pub fn new(config: &ProjectConfig) -> Self {
        let entries = config
            .entities
            .iter()
            .filter_map(|e| match &e.source {
                EntitySource::Pattern {
                    pattern,
                    normalizer,
                } => Regex::new(pattern).ok().map(|regex| Compiled::Pattern {
                    name: e.name.clone(),
                    regex,
                    normalizer: *normalizer,
                }),
                EntitySource::Gazetteer { values } => {
                    let mut terms = Vec::new();
                    for v in values {
                        for surface in std::iter::once(&v.canonical).chain(&v.synonyms) {
                            let toks = text::normalize(surface);
                            if !toks.is_empty() {
                                terms.push((toks, v.canonical.clone()));
                            }
                        }
                    }
                    Some(Compiled::Gazetteer {
                        name: e.name.clone(),
                        terms,
                    })
                }
            })
            .collect();
        Self { entries }
    }

    /// All non-overlapping entity matches, sorted by start. Overlaps are
    /// resolved leftmost-longest, then by declaration order.
    pub fn extract(&self, utterance: &str) -> Vec<EntityMatch> {
        let composed = text::nfc(utterance);
        let tokens = text::tokenize(&composed);
        let mut candidates: Vec<(usize, EntityMatch)> = Vec::new();
        for (order, entry) in self.entries.iter().enumerate() {
            match entry {
                Compiled::Pattern {
                    name,
                    regex,
                    normalizer,
                } => {
                    for m in regex.find_iter(&composed) {
                        if m.as_str().trim().is_empty() {
                            continue;
                        }
                        let Some(value) = normalize_value(*normalizer, m.as_str()) else {
                            continue;
                        };
                        let start = composed[..m.start()].chars().count();
                        let end = start + m.as_str().chars().count();
                        candidates.push((
                            order,
                            EntityMatch {
                                entity: name.clone(),
                                raw: m.as_str().to_string(),
                                start,
                                end,
                                value,
                                extractor: ExtractorKind::Pattern,
                            },
                        ));
                    }
                }
                Compiled::Gazetteer { name, terms } => {
                    for i in 0..tokens.len() {
                        for (surface, canonical) in terms {
                            if let Some((start, end)) = match_at(&tokens, i, surface) {
                                candidates.push((
                                    order,
                                    EntityMatch {
                                        entity: name.clone(),
                                        raw: text::char_slice(&composed, start, end).to_string(),
                                        start,
                                        end,
                                        value: canonical.clone(),
                                        extractor: ExtractorKind::Gazetteer,
                                    },
                                ));
                            }
                        }
                    }
                }
            }
        }
        candidates.sort_by(|(oa, a), (ob, b)| {
            a.start
                .cmp(&b.start)
                .then((b.end - b.start).cmp(&(a.end - a.start)))
                .then(oa.cmp(ob))
        });
        let mut out: Vec<EntityMatch> = Vec::new();
        let mut covered = 0;
        for (_, m) in candidates {
            if out.is_empty() || m.start >= covered {
                covered = m.end;
                out.push(m);
            }
        }
        out
    }
}

fn match_at(tokens: &[Token], i: usize, surface: &[String]) -> Option<(usize, usize)> {
    let window = tokens.get(i..i + surface.len())?;
    window
        .iter()
        .zip(surface)
        .all(|(t, s)| &t.text == s)
        .then(|| (window[0].start, window[window.len() - 1].end))
}

/// Extracts every entity of `config` from `utterance`.
pub fn extract_entities(config: &ProjectConfig, utterance: &str) -> Vec<EntityMatch> {
    EntityExtractor::new(config).extract(utterance)
}

/// Canonical value of a gazetteer term (canonical or synonym), compared
/// case-insensitively on normalized tokens.
pub fn synonym_canonical(
    config: &ProjectConfig,
    entity: &str,
    term: &str,
) -> Result<Option<String>, NluError> {
    let def = config
        .entity(entity)
        .ok_or_else(|| NluError::UnknownEntity(entity.to_string()))?;
    let EntitySource::Gazetteer { values } = &def.source else {
        return Err(NluError::WrongEntityKind(entity.to_string()));
    };
    let wanted = text::normalize(term);
    if wanted.is_empty() {
        return Ok(None);
    }
    Ok(values
        .iter()
        .find(|v| {
            std::iter::once(&v.canonical)
                .chain(&v.synonyms)
                .any(|s| text::normalize(s) == wanted)
        })
        .map(|v| v.canonical.clone()))
}

fn normalize_value(normalizer: Normalizer, raw: &str) -> Option<String> {
    match normalizer {
        Normalizer::Verbatim => Some(raw.trim().to_string()),
        Normalizer::Digits => {
            let d: String = raw.chars().filter(char::is_ascii_digit).collect();
            (!d.is_empty()).then_some(d)
        }
        Normalizer::Amount => normalize_amount(raw),
        Normalizer::Date => normalize_date(raw),
    }
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:[.,]\d+)?").unwrap())
}

/// `"$400"`, `"400 Dollars"` -> `"400 USD"`. Without a recognizable
/// currency only the number is kept.
pub(crate) fn normalize_amount(raw: &str) -> Option<String> {
    let m = number_re().find(raw)?;
    let n = m.as_str();
    let number = if n.matches(',').count() >= 1
        && n.split(',')
            .skip(1)
            .all(|g| g.len() == 3 || g.contains('.'))
    {
        n.replace(',', "")
    } else {
        n.replace(',', ".")
    };
    let lower = raw.to_lowercase();
    const CURRENCIES: [(&str, &[&str]); 4] = [
        ("USD", &["$", "usd", "dollar"]),
        ("EUR", &["€", "eur", "euro"]),
        ("GBP", &["£", "gbp", "pound"]),
        ("CHF", &["chf", "franc"]),
    ];
    let code = CURRENCIES
        .iter()
        .find(|(_, keys)| keys.iter().any(|k| lower.contains(k)))
        .map(|(c, _)| *c);
    Some(match code {
        Some(c) => format!("{number} {c}"),
        None => number,
    })
}

fn iso_date_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(\d{4})-(\d{1,2})-(\d{1,2})").unwrap())
}

fn day_month_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)(\d{1,2})(?:st|nd|rd|th)?\.?\s+(?:of\s+)?([a-z]+)(?:\s+(\d{4}))?").unwrap()
    })
}

fn month_day_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)([a-z]+)\s+(\d{1,2})(?:st|nd|rd|th)?(?:,?\s+(\d{4}))?").unwrap()
    })
}

fn month_number(name: &str) -> Option<u32> {
    const MONTHS: [&str; 12] = [
        "january",
        "february",
        "march",
        "april",
        "may",
        "june",
        "july",
        "august",
        "september",
        "october",
        "november",
        "december",
    ];
    let name = name.to_lowercase();
    if name.len() < 3 {
        return None;
    }
    MONTHS
        .iter()
        .position(|m| m.starts_with(&name))
        .map(|i| i as u32 + 1)
}

fn format_date(year: Option<&str>, month: u32, day: u32) -> Option<String> {
    if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
        return None;
    }
    Some(match year {
        Some(y) => format!("{y}-{month:02}-{day:02}"),
        None => format!("--{month:02}-{day:02}"),
    })
}

/// ISO `YYYY-MM-DD`, `14 March [2024]` or `March 14[, 2024]`.
pub(crate) fn normalize_date(raw: &str) -> Option<String> {
    if let Some(c) = iso_date_re().captures(raw) {
        return format_date(Some(&c[1]), c[2].parse().ok()?, c[3].parse().ok()?);
    }
    if let Some(c) = day_month_re().captures(raw) {
        if let Some(month) = month_number(&c[2]) {
            return format_date(c.get(3).map(|m| m.as_str()), month, c[1].parse().ok()?);
        }
    }
    if let Some(c) = month_day_re().captures(raw) {
        let month = month_number(&c[1])?;
        return format_date(c.get(3).map(|m| m.as_str()), month, c[2].parse().ok()?);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amounts() {
        assert_eq!(normalize_amount("$400").as_deref(), Some("400 USD"));
        assert_eq!(normalize_amount("400 Dollars").as_deref(), Some("400 USD"));
        assert_eq!(
            normalize_amount("1,250.50 EUR").as_deref(),
            Some("1250.50 EUR")
        );
        assert_eq!(normalize_amount("12,5 CHF").as_deref(), Some("12.5 CHF"));
        assert_eq!(normalize_amount("no number"), None);
    }

    #[test]
    fn dates() {
        assert_eq!(normalize_date("2024-03-14").as_deref(), Some("2024-03-14"));
        assert_eq!(
            normalize_date("14 March 2024").as_deref(),
            Some("2024-03-14")
        );
        assert_eq!(normalize_date("March 14").as_deref(), Some("--03-14"));
        assert_eq!(normalize_date("2024-13-01"), None);
    }
}
