//! `{name}` placeholder templates. Literal braces are written doubled
//! (`{{`, `}}`). Used both for response templates and LLM prompt bodies.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment<'a> {
    Literal(&'a str),
    /// `{{` or `}}`
    Brace(char),
    Placeholder(&'a str),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unterminated placeholder at byte {0}")]
    Unterminated(usize),
    #[error("invalid placeholder name {name:?} at byte {at}")]
    InvalidName { name: String, at: usize },
    #[error("unmatched '}}' at byte {0}")]
    StrayClose(usize),
    #[error("missing binding for placeholder {{{0}}}")]
    MissingBinding(String),
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn parse(text: &str) -> Result<Vec<Segment<'_>>, TemplateError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut lit_start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' | b'}' if bytes.get(i + 1) == Some(&bytes[i]) => {
                if lit_start < i {
                    out.push(Segment::Literal(&text[lit_start..i]));
                }
                out.push(Segment::Brace(bytes[i] as char));
                i += 2;
                lit_start = i;
            }
            b'{' => {
                if lit_start < i {
                    out.push(Segment::Literal(&text[lit_start..i]));
                }
                let close = text[i + 1..]
                    .find('}')
                    .ok_or(TemplateError::Unterminated(i))?;
                let name = &text[i + 1..i + 1 + close];
                if !valid_name(name) {
                    return Err(TemplateError::InvalidName {
                        name: name.to_string(),
                        at: i,
                    });
                }
                out.push(Segment::Placeholder(name));
                i += close + 2;
                lit_start = i;
            }
            b'}' => return Err(TemplateError::StrayClose(i)),
            _ => i += 1,
        }
    }
    if lit_start < bytes.len() {
        out.push(Segment::Literal(&text[lit_start..]));
    }
    Ok(out)
}

pub fn placeholders(text: &str) -> Result<BTreeSet<String>, TemplateError> {
    Ok(parse(text)?
        .into_iter()
        .filter_map(|s| match s {
            Segment::Placeholder(n) => Some(n.to_string()),
            _ => None,
        })
        .collect())
}

/// Substitutes every placeholder exactly once; bound values are inserted
/// verbatim and never rescanned.
pub fn render(text: &str, bindings: &BTreeMap<String, String>) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(text.len());
    for seg in parse(text)? {
        match seg {
            Segment::Literal(s) => out.push_str(s),
            Segment::Brace(c) => out.push(c),
            Segment::Placeholder(name) => out.push_str(
                bindings
                    .get(name)
                    .ok_or_else(|| TemplateError::MissingBinding(name.to_string()))?,
            ),
        }
    }
    Ok(out)
}

/// Escapes literal braces so `text` renders to itself.
pub fn escape(text: &str) -> String {
    text.replace('{', "{{").replace('}', "}}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn renders_and_unescapes() {
        let out = render(
            "Send {amount} to {{acct}} {dest}",
            &b(&[("amount", "400 USD"), ("dest", "831123")]),
        );
        assert_eq!(out.unwrap(), "Send 400 USD to {acct} 831123");
    }

    #[test]
    fn values_are_not_rescanned() {
        let out = render("{a}", &b(&[("a", "{b}")])).unwrap();
        assert_eq!(out, "{b}");
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(
            parse("oops {name"),
            Err(TemplateError::Unterminated(5))
        ));
        assert!(matches!(parse("a } b"), Err(TemplateError::StrayClose(2))));
        assert!(matches!(
            parse("{1x}"),
            Err(TemplateError::InvalidName { .. })
        ));
        assert!(matches!(
            parse("{}"),
            Err(TemplateError::InvalidName { .. })
        ));
    }

    #[test]
    fn missing_binding() {
        assert_eq!(
            render("hi {who}", &BTreeMap::new()),
            Err(TemplateError::MissingBinding("who".into()))
        );
    }

    proptest! {
        #[test]
        fn escaped_text_renders_to_itself(s in ".*") {
            prop_assert_eq!(render(&escape(&s), &BTreeMap::new()).unwrap(), s);
        }

        #[test]
        fn parse_never_panics(s in "[a-z{} ]{0,40}") {
            let _ = parse(&s);
        }
    }
}
