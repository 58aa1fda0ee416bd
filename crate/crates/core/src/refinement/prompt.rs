use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bumped whenever the wording or layout of [`render`] changes. Recorded in
/// every generation event.
pub const TEMPLATE_VERSION: &str = "definition-prompt/1";

const ROLE_INSTRUCTION: &str = "You are helping a research community build a shared metadata \
vocabulary. Write one clear, precise definition for the term below. Use the examples to decide \
which sense of the term is meant, stay consistent with the community definitions where they are \
sound, and address every reviewer comment. Reply with the definition text only.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub term_label: String,
    pub human_definitions: Vec<String>,
    pub examples: Vec<String>,
    pub feedback_comments: Vec<String>,
    pub rendered: String,
}

pub fn build_prompt(
    term_label: &str,
    human_definitions: Vec<String>,
    examples: Vec<String>,
    feedback_comments: Vec<String>,
) -> Result<PromptBundle> {
    if examples.is_empty() {
        return Err(Error::NoExample);
    }
    let rendered = render(term_label, &human_definitions, &examples, &feedback_comments);
    Ok(PromptBundle {
        term_label: term_label.to_owned(),
        human_definitions,
        examples,
        feedback_comments,
        rendered,
    })
}

fn render(label: &str, definitions: &[String], examples: &[String], feedback: &[String]) -> String {
    let mut out = String::new();
    out.push_str(ROLE_INSTRUCTION);
    out.push_str("\n\nTerm: ");
    out.push_str(label.trim());
    section(&mut out, "Community definitions", definitions);
    section(&mut out, "Examples", examples);
    section(&mut out, "Reviewer feedback", feedback);
    out.push_str("\n\nDefinition:");
    out
}

fn section(out: &mut String, title: &str, items: &[String]) {
    out.push_str("\n\n");
    out.push_str(title);
    out.push(':');
    if items.is_empty() {
        out.push_str("\n(none)");
    }
    for item in items {
        out.push_str("\n- ");
        out.push_str(&item.trim().replace('\n', "\n  "));
    }
}
