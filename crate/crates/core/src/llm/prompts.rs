use std::collections::BTreeMap;

use super::{Expectation, PromptTemplate};

fn prompt(id: &str, expects: Expectation, body: &str) -> PromptTemplate {
    PromptTemplate {
        id: id.to_string(),
        body: body.to_string(),
        params_override: None,
        expects,
    }
}

/// Built-in prompt bodies for every booster and generator.
pub fn builtin_prompts() -> Vec<PromptTemplate> {
    use Expectation::*;
    vec![
        prompt(
            "autocorrect",
            FreeText,
            "Please rephrase the following utterance into orthographically and grammatically \
             correct American English. Answer with the rephrased utterance only.\n{utterance}",
        ),
        prompt(
            "out_of_scope",
            FreeText,
            "Answer the following general knowledge question of a private banking client in no \
             more than three sentences. Do not give financial advice. If the question asks for \
             financial advice, answer exactly: {refusal}\nQuestion: {question}",
        ),
        prompt(
            "disambiguation",
            FreeText,
            "A client wrote: \"{utterance}\"\nThis could mean either \"{option_a}\" or \
             \"{option_b}\". Write one short question that asks the client which of the two they \
             mean and names both options.",
        ),
        prompt(
            "rephrase",
            FreeText,
            "Rephrase the following chatbot statement {directive}. Keep the same meaning and keep \
             every number, name and account detail exactly as written. Answer with the \
             rephrased statement only.\n{text}",
        ),
        prompt(
            "closed_qa",
            VerbatimChoice,
            "For each question literally answer one of the below answers in exactly that \
             wording, if those answers are suitable. If none of the below answers are a suitable \
             answer to the question answer: \u{201c}{default_answer}\u{201d}.\n{answers}\nQuestion: {question}",
        ),
        prompt(
            "summarize",
            LabeledSummary,
            "Summarise the following conversation between a chatbot and a person, and state what \
             the agent picking up the conversation needs to do.\n---\n{transcript}\n---\n\
             Use this format:\nAgent Action Required:\nSummary:",
        ),
        prompt(
            "summarize_strict",
            LabeledSummary,
            "Summarise the following conversation between a chatbot and a person. Reply with \
             exactly two lines and nothing else. The first line starts with \"Agent Action \
             Required:\" followed by what the agent picking up the conversation needs to do. The \
             second line starts with \"Summary:\" followed by the summary.\n---\n{transcript}\n---",
        ),
        prompt(
            "gen_intents",
            NumberedList,
            "For designing a chatbot, give me a list of {n} most prominent intents in a \
             conversation about {domain} between a client and an agent.",
        ),
        prompt(
            "gen_utterances",
            NumberedList,
            "Write {n} varied utterances to train a chatbot intent called {intent}{constraints}",
        ),
        prompt(
            "gen_entities",
            NumberedList,
            "For designing a chatbot in the {domain} domain, give me a list of relevant named \
             entities that the NLP back-end of the chatbot should be able to extract.",
        ),
        prompt(
            "gen_synonyms",
            NumberedList,
            "For designing a chatbot in the domain of {domain}, give me a synonym list for the \
             word \u{201c}{term}\u{201d}.",
        ),
        prompt(
            "gen_persona",
            FreeText,
            "Describe the traits of a good {role} in max. 100 words.",
        ),
        prompt(
            "localize",
            NumberedList,
            "Translate these {count} statements into {languages}.\n{statements}",
        ),
    ]
}

#[derive(Debug, Clone)]
pub struct PromptRegistry {
    templates: BTreeMap<String, PromptTemplate>,
}

impl PromptRegistry {
    pub fn builtin() -> Self {
        Self::from_templates(builtin_prompts())
    }

    pub fn from_templates(templates: impl IntoIterator<Item = PromptTemplate>) -> Self {
        Self {
            templates: templates.into_iter().map(|t| (t.id.clone(), t)).collect(),
        }
    }

    /// Built-ins with project overrides applied (same id replaces).
    pub fn with_overrides(overrides: &[PromptTemplate]) -> Self {
        let mut reg = Self::builtin();
        for t in overrides {
            reg.templates.insert(t.id.clone(), t.clone());
        }
        reg
    }

    pub fn get(&self, id: &str) -> Option<&PromptTemplate> {
        self.templates.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template;

    #[test]
    fn builtins_parse_and_are_unique() {
        let all = builtin_prompts();
        let reg = PromptRegistry::builtin();
        assert_eq!(reg.ids().count(), all.len());
        for p in &all {
            template::parse(&p.body).unwrap_or_else(|e| panic!("{}: {e}", p.id));
            assert!(!p.body.trim().is_empty());
        }
    }

    #[test]
    fn overrides_replace_bodies() {
        let reg = PromptRegistry::with_overrides(&[prompt(
            "autocorrect",
            Expectation::FreeText,
            "Fix: {utterance}",
        )]);
        assert_eq!(reg.get("autocorrect").unwrap().body, "Fix: {utterance}");
        assert!(reg.get("closed_qa").is_some());
    }
}
