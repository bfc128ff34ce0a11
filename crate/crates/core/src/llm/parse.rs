//! Parsers for list-shaped model output.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ListParseError {
    #[error("no list items found in model output")]
    EmptyList,
}

fn numbered_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(\d{1,4})[.)]\s*(.*)$").unwrap())
}

/// Collects lines starting with `N.` or `N)` in order, prefixes stripped,
/// blank items dropped.
pub fn parse_numbered_list(text: &str) -> Result<Vec<String>, ListParseError> {
    let items: Vec<String> = text
        .lines()
        .filter_map(|l| numbered_re().captures(l))
        .map(|c| c[2].trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        Err(ListParseError::EmptyList)
    } else {
        Ok(items)
    }
}

/// Numbered list if the output has one, otherwise a comma / semicolon /
/// newline separated list ("a, b, c and d.").
pub fn parse_list(text: &str) -> Result<Vec<String>, ListParseError> {
    if let Ok(items) = parse_numbered_list(text) {
        return Ok(items);
    }
    let mut items: Vec<String> = text
        .split([',', ';', '\n'])
        .map(|s| {
            let s = s.trim();
            let s = s.strip_prefix("and ").unwrap_or(s);
            let s = s.trim_start_matches(['-', '*', '•']).trim();
            s.trim_end_matches(['.', '…']).trim().to_string()
        })
        .filter(|s| !s.is_empty())
        .collect();
    // "x, y and z": the final conjunction separates the last two items
    if items.len() > 1 {
        let last = items.pop().unwrap_or_default();
        match last.rsplit_once(" and ") {
            Some((a, b)) => items.extend([a.trim().to_string(), b.trim().to_string()]),
            None => items.push(last),
        }
    }
    if items.is_empty() {
        Err(ListParseError::EmptyList)
    } else {
        Ok(items)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const APOLOGIES: &str = "1.\t Sorry, I didn't quite get that. Could you rephrase your statement, please?
2.\tMy apologies, I'm having trouble understanding. Would you mind rephrasing your question?
3.\tI'm sorry, I didn't comprehend your message. Please rephrase it for me.
4.\tApologies for the confusion, I'm unable to grasp what you're saying. Kindly rephrase your statement.
5.\tI deeply regret that I didn't understand your message. Please accept my apologies and rephrase your question.
6.\tMy sincerest apologies, I'm struggling to comprehend your message. Could you kindly restate it for me?
7.\tI'm terribly sorry for not understanding your words. Please forgive me and rephrase your statement.
8.\tI feel so apologetic for being unable to understand what you said. Please give me another chance and rephrase your message.
9.\tMy most profound apologies for not comprehending your statement. I would be grateful if you could rephrase it for me.
10.\tI am extremely sorry for my inability to understand your message. It would mean a lot if you could kindly rephrase it for me.";

    #[test]
    fn apology_ladder_has_ten_items() {
        let items = parse_numbered_list(APOLOGIES).unwrap();
        assert_eq!(items.len(), 10);
        assert_eq!(
            items[0],
            "Sorry, I didn't quite get that. Could you rephrase your statement, please?"
        );
        assert!(items[9].starts_with("I am extremely sorry"));
    }

    #[test]
    fn parenthesis_prefix_and_blank_items() {
        let items = parse_numbered_list("Here you go:\n1) one\n2)   \n3) three\n").unwrap();
        assert_eq!(items, ["one", "three"]);
    }

    #[test]
    fn no_numbers() {
        assert_eq!(
            parse_numbered_list("no numbers here"),
            Err(ListParseError::EmptyList)
        );
        assert_eq!(parse_list("  \n "), Err(ListParseError::EmptyList));
    }

    #[test]
    fn inline_list() {
        let items =
            parse_list("Bankrupt, Impoverished, Penniless, Financially ruined, Broke, In debt.")
                .unwrap();
        assert_eq!(
            items,
            [
                "Bankrupt",
                "Impoverished",
                "Penniless",
                "Financially ruined",
                "Broke",
                "In debt"
            ]
        );
        let items =
            parse_list("payment methods, financial goals and financial institutions.").unwrap();
        assert_eq!(
            items,
            [
                "payment methods",
                "financial goals",
                "financial institutions"
            ]
        );
    }
}
