//! The generation prompt and the instruction-prompt bank.
//!
//! Both prompt texts live in `data/` as plain-text files (entries separated
//! by blank lines) rather than code constants; the copies embedded at build
//! time are the defaults, and callers may load a replacement bank from disk.
//! A checksum test pins the shipped wording.

use std::collections::HashSet;
use std::io::BufRead;

use crate::corpus::{is_unanimous_hateful, UtteranceRecord};
use crate::error::{Error, Result};
use crate::sampling::{mix, SplitMix64};
use crate::text;
use crate::MASK_TOKEN;

const GENERATION_STEPS_RAW: &str = include_str!("../data/generation_prompt.txt");
const INSTRUCTION_BANK_RAW: &str = include_str!("../data/instruction_prompts.txt");

const EXAMPLE_1_SLOT: &str = "[Hate Speech 1]";
const EXAMPLE_2_SLOT: &str = "[Hate Speech 2]";
const KEYWORD_SLOT: &str = "[Keyword]";

/// Split a prompt data file into entries at blank lines.
fn split_entries(contents: &str) -> Vec<String> {
    contents
        .split("\n\n")
        .map(str::trim)
        .filter(|e| !e.is_empty())
        .map(str::to_string)
        .collect()
}

/// Inputs for one rendered generation prompt: a keyword plus two example
/// sentences drawn from records sharing `shared_target`.
#[derive(Debug, Clone)]
pub struct GenerationPromptInput {
    pub example_1: String,
    pub example_2: String,
    pub keyword: String,
    pub shared_target: String,
}

impl GenerationPromptInput {
    fn validate(&self) -> Result<()> {
        if self.keyword.trim().is_empty() {
            return Err(Error::InvalidInput("empty keyword".to_string()));
        }
        if self.example_1.trim().is_empty() || self.example_2.trim().is_empty() {
            return Err(Error::InvalidInput("empty example sentence".to_string()));
        }
        Ok(())
    }
}

/// The five fixed steps of the generation prompt, in order.
pub fn generation_prompt_steps() -> Vec<String> {
    split_entries(GENERATION_STEPS_RAW)
}

/// Render the five-step generation prompt with the keyword and example
/// slots substituted. Steps are joined by blank lines, in step order.
pub fn render_generation_prompt(input: &GenerationPromptInput) -> Result<String> {
    input.validate()?;
    let rendered: Vec<String> = generation_prompt_steps()
        .into_iter()
        .map(|step| {
            step.replace(EXAMPLE_1_SLOT, &input.example_1)
                .replace(EXAMPLE_2_SLOT, &input.example_2)
                .replace(KEYWORD_SLOT, &input.keyword)
        })
        .collect();
    Ok(rendered.join("\n\n"))
}

/// One instruction-tuning prompt, 1-indexed within its bank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionPrompt {
    pub index: usize,
    pub text: String,
}

/// An ordered bank of transcribe-and-mask instruction prompts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBank {
    entries: Vec<String>,
}

impl PromptBank {
    /// The bank shipped with the crate: fifteen paraphrases of the
    /// transcribe-and-mask instruction.
    pub fn builtin() -> Self {
        Self::parse(INSTRUCTION_BANK_RAW).expect("builtin prompt bank is valid")
    }

    /// Load a bank from blank-line-separated plain text.
    pub fn parse(contents: &str) -> Result<Self> {
        let entries = split_entries(contents);
        if entries.is_empty() {
            return Err(Error::InvalidInput("prompt bank is empty".to_string()));
        }
        let distinct: HashSet<&str> = entries.iter().map(String::as_str).collect();
        if distinct.len() != entries.len() {
            return Err(Error::InvalidInput(
                "prompt bank entries must be distinct".to_string(),
            ));
        }
        if let Some(bad) = entries.iter().find(|e| !e.contains(MASK_TOKEN)) {
            return Err(Error::InvalidInput(format!(
                "prompt lacks the mask token: {bad:?}"
            )));
        }
        Ok(Self { entries })
    }

    pub fn from_reader<R: BufRead>(mut reader: R) -> Result<Self> {
        let mut contents = String::new();
        reader.read_to_string(&mut contents)?;
        Self::parse(&contents)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<InstructionPrompt> {
        self.entries.get(index - 1).map(|text| InstructionPrompt {
            index,
            text: text.clone(),
        })
    }

    /// All prompts in bank order.
    pub fn prompts(&self) -> Vec<InstructionPrompt> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, text)| InstructionPrompt {
                index: i + 1,
                text: text.clone(),
            })
            .collect()
    }

    /// The raw bank file contents in canonical form (entries separated by
    /// blank lines, trailing newline).
    pub fn to_file_contents(&self) -> String {
        let mut s = self.entries.join("\n\n");
        s.push('\n');
        s
    }

    /// Deterministic per-sample prompt choice: sample `sample_index` under
    /// `seed` always gets the same prompt, and the assignment is uniform
    /// over the bank across indices. Implemented as a SplitMix64 hash of
    /// the (seed, index) pair.
    pub fn pick(&self, sample_index: u64, seed: u64) -> InstructionPrompt {
        let h = mix(seed ^ mix(sample_index.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        let slot = ((h as u128 * self.entries.len() as u128) >> 64) as usize;
        InstructionPrompt {
            index: slot + 1,
            text: self.entries[slot].clone(),
        }
    }
}

/// The fifteen training prompts in table order.
pub fn training_prompt_bank() -> Vec<InstructionPrompt> {
    PromptBank::builtin().prompts()
}

/// Deterministic seeded prompt choice from the builtin bank.
pub fn pick_training_prompt(sample_index: u64, seed: u64) -> InstructionPrompt {
    PromptBank::builtin().pick(sample_index, seed)
}

/// The evaluation-time instruction. It duplicates the final training prompt.
pub fn test_prompt() -> String {
    PromptBank::builtin()
        .entries
        .last()
        .expect("builtin bank is non-empty")
        .clone()
}

/// Pick two distinct unanimously-hateful example sentences with the given
/// target, by seeded sampling. Returns their space-joined token texts.
pub fn select_example_pair(
    records: &[UtteranceRecord],
    target: &str,
    seed: u64,
) -> Result<(String, String)> {
    let pool: Vec<&UtteranceRecord> = records
        .iter()
        .filter(|r| is_unanimous_hateful(r) && r.target.as_deref() == Some(target))
        .collect();
    if pool.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 unanimously-hateful records with target {target:?}, found {}",
            pool.len()
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let picked = rng.sample_without_replacement(&pool, 2);
    Ok((
        text::detokenize(&picked[0].tokens),
        text::detokenize(&picked[1].tokens),
    ))
}
