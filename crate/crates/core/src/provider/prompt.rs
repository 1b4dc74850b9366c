use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::source::MethodModel;

const DEFAULT_TEMPLATE: &str = include_str!("../../prompts/default.toml");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("method spans about {estimated} tokens of prompt, over the budget of {budget}")]
    MethodTooLarge { estimated: usize, budget: usize },
    #[error("prompt template: {0}")]
    Template(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    /// Method text, one numbered line per source line.
    pub method: String,
    /// Expected JSON answer.
    pub answer: String,
}

/// The few-shot prompt sent for one host method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub system_preamble: String,
    pub few_shot_examples: Vec<FewShotExample>,
    /// Host method declaration with absolute line numbers.
    pub target: String,
    pub output_contract: String,
    pub instruction: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    fn new(role: &str, content: String) -> Self {
        Self { role: role.into(), content }
    }
}

impl PromptSpec {
    /// Chat transcript: system instructions, one user/assistant pair per
    /// example, then the target.
    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut out = vec![ChatMessage::new(
            "system",
            format!("{}\n\n{}", self.system_preamble.trim(), self.output_contract.trim()),
        )];
        for ex in &self.few_shot_examples {
            out.push(ChatMessage::new("user", format!("{}\n\n{}", self.instruction.trim(), ex.method)));
            out.push(ChatMessage::new("assistant", ex.answer.trim().to_owned()));
        }
        out.push(ChatMessage::new("user", format!("{}\n\n{}", self.instruction.trim(), self.target)));
        out
    }

    /// Flat rendering of the transcript, stored alongside replay fixtures.
    pub fn render(&self) -> String {
        self.messages()
            .iter()
            .map(|m| format!("[{}]\n{}\n", m.role, m.content))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Rough token count: four characters per token.
    pub fn estimated_tokens(&self) -> usize {
        self.messages().iter().map(|m| m.content.chars().count()).sum::<usize>().div_ceil(4)
    }
}

#[derive(Debug, Clone, Deserialize)]
struct TemplateExample {
    first_line: u32,
    method: String,
    answer: String,
}

/// Prompt text read from a TOML file.
#[derive(Debug, Clone, Deserialize)]
pub struct PromptTemplate {
    pub system_preamble: String,
    pub output_contract: String,
    pub instruction: String,
    #[serde(default = "default_budget")]
    pub max_prompt_tokens: usize,
    examples: Vec<TemplateExample>,
}

fn default_budget() -> usize {
    12_000
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate::parse(DEFAULT_TEMPLATE).expect("bundled prompt template is valid")
    }
}

impl PromptTemplate {
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let t: PromptTemplate = toml::from_str(text).map_err(|e| PromptError::Template(e.to_string()))?;
        if t.examples.is_empty() {
            return Err(PromptError::Template("at least one [[examples]] entry is required".into()));
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PromptError::Template(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Build the prompt for `model`, refusing methods over the token budget.
    pub fn build(&self, model: &MethodModel) -> Result<PromptSpec, PromptError> {
        let unit = model.unit();
        let lines = model.span.lines();
        let target = number_lines(lines.lines().map(|l| (l, unit.line_text(l))));
        let spec = PromptSpec {
            system_preamble: self.system_preamble.clone(),
            few_shot_examples: self
                .examples
                .iter()
                .map(|ex| FewShotExample {
                    method: number_lines(
                        ex.method.trim_end().lines().enumerate().map(|(i, t)| (ex.first_line + i as u32, t)),
                    ),
                    answer: ex.answer.clone(),
                })
                .collect(),
            target,
            output_contract: self.output_contract.clone(),
            instruction: self.instruction.clone(),
        };
        let estimated = spec.estimated_tokens();
        if estimated > self.max_prompt_tokens {
            return Err(PromptError::MethodTooLarge { estimated, budget: self.max_prompt_tokens });
        }
        Ok(spec)
    }
}

fn number_lines<'a>(lines: impl Iterator<Item = (u32, &'a str)>) -> String {
    lines.map(|(n, t)| format!("{n}: {t}\n")).collect()
}

/// Build the prompt with the bundled template.
pub fn build_prompt(model: &MethodModel) -> Result<PromptSpec, PromptError> {
    PromptTemplate::default().build(model)
}
