//! Prompt rendering and domain hints.
//!
//! Few-shot model-family prompts are data: each family is a small TOML file
//! (see `data/templates/`) holding a query layout and, for shot-based
//! families, a per-shot layout. The fine-tuning formats (plain translation,
//! hint generation, hint-conditioned translation) share the Alpaca frame
//!
//! ```text
//! ### Instruction:
//! <instruction>
//!
//! ### Input:
//! <input>
//!
//! ### Response:
//! ```
//!
//! and live in code, because training files and inference prompts must agree
//! byte for byte.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::corpus::{LangPair, Language, SegmentPair};

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("template expects {expected} shots, got {got}")]
    ShotCountMismatch { expected: usize, got: usize },
    #[error("source text is empty")]
    EmptySource,
    #[error("hint text is empty")]
    EmptyHint,
    #[error("hint descriptor is incomplete: {0} is empty")]
    EmptyDescriptor(&'static str),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("no hint for domain `{0}`")]
    MissingHint(String),
    #[error("invalid template: {0}")]
    Template(String),
}

pub type Result<T, E = PromptError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShotPolicy {
    ZeroShot,
    OneShot,
    FiveShot,
}

impl ShotPolicy {
    pub fn count(self) -> usize {
        match self {
            ShotPolicy::ZeroShot => 0,
            ShotPolicy::OneShot => 1,
            ShotPolicy::FiveShot => 5,
        }
    }

    pub fn from_count(n: usize) -> Result<Self> {
        match n {
            0 => Ok(ShotPolicy::ZeroShot),
            1 => Ok(ShotPolicy::OneShot),
            5 => Ok(ShotPolicy::FiveShot),
            _ => Err(PromptError::Template(format!("unsupported shot count {n}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Source,
    Reference,
    Shots,
    Hint,
    SrcLang,
    TgtLang,
}

impl Slot {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "source" => Slot::Source,
            "reference" => Slot::Reference,
            "shots" => Slot::Shots,
            "hint" => Slot::Hint,
            "src_lang" => Slot::SrcLang,
            "tgt_lang" => Slot::TgtLang,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Part {
    Literal(String),
    Slot(Slot),
}

/// Splits `text` into literals and `{slot}` placeholders; `{{` and `}}` escape braces.
pub fn parse_layout(text: &str) -> Result<Vec<Part>> {
    let mut parts = Vec::new();
    let mut lit = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' if chars.peek() == Some(&'{') => {
                chars.next();
                lit.push('{');
            }
            '}' if chars.peek() == Some(&'}') => {
                chars.next();
                lit.push('}');
            }
            '{' => {
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(ch) => name.push(ch),
                        None => return Err(PromptError::Template("unclosed `{`".into())),
                    }
                }
                let slot = Slot::parse(&name).ok_or_else(|| {
                    PromptError::Template(format!("unknown placeholder {{{name}}}"))
                })?;
                if !lit.is_empty() {
                    parts.push(Part::Literal(std::mem::take(&mut lit)));
                }
                parts.push(Part::Slot(slot));
            }
            '}' => return Err(PromptError::Template("stray `}`".into())),
            _ => lit.push(c),
        }
    }
    if !lit.is_empty() {
        parts.push(Part::Literal(lit));
    }
    Ok(parts)
}

fn count_slot(parts: &[Part], slot: Slot) -> usize {
    parts.iter().filter(|p| **p == Part::Slot(slot)).count()
}

#[derive(Deserialize)]
struct TemplateFile {
    family: String,
    shots: usize,
    layout: String,
    shot: Option<String>,
}

/// A model-family prompt format.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub family: String,
    pub shot_policy: ShotPolicy,
    layout: Vec<Part>,
    shot_layout: Vec<Part>,
}

const BUNDLED_TEMPLATES: &[&str] = &[
    include_str!("../data/templates/instruct-1shot.toml"),
    include_str!("../data/templates/base-5shot.toml"),
    include_str!("../data/templates/zero-shot.toml"),
    include_str!("../data/templates/parrot.toml"),
    include_str!("../data/templates/alma.toml"),
    include_str!("../data/templates/ft.toml"),
];

impl PromptTemplate {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: TemplateFile =
            toml::from_str(text).map_err(|e| PromptError::Template(e.to_string()))?;
        let shot_policy = ShotPolicy::from_count(file.shots)?;
        let layout = parse_layout(&file.layout)?;
        let shot_layout = match &file.shot {
            Some(s) => parse_layout(s)?,
            None => Vec::new(),
        };
        let bad = |m: String| Err(PromptError::Template(format!("{}: {m}", file.family)));
        if count_slot(&layout, Slot::Source) != 1 {
            return bad("layout must contain {source} exactly once".into());
        }
        if count_slot(&layout, Slot::Reference) != 0 {
            return bad("{reference} is only valid in shot layouts".into());
        }
        if count_slot(&layout, Slot::Hint) > 1 {
            return bad("{hint} may appear at most once".into());
        }
        let wants_shots = shot_policy.count() > 0;
        if count_slot(&layout, Slot::Shots) != usize::from(wants_shots) {
            return bad("{shots} must appear once iff the template uses shots".into());
        }
        if wants_shots
            && (count_slot(&shot_layout, Slot::Source) != 1
                || count_slot(&shot_layout, Slot::Reference) != 1)
        {
            return bad("shot layout needs {source} and {reference} once each".into());
        }
        if shot_layout
            .iter()
            .any(|p| matches!(p, Part::Slot(Slot::Shots | Slot::Hint)))
        {
            return bad("shot layout may not nest {shots} or {hint}".into());
        }
        Ok(Self {
            family: file.family,
            shot_policy,
            layout,
            shot_layout,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| PromptError::Template(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Templates shipped with the crate, keyed by family name.
    pub fn bundled() -> BTreeMap<String, PromptTemplate> {
        BUNDLED_TEMPLATES
            .iter()
            .map(|t| {
                let t = PromptTemplate::from_toml(t).expect("bundled template is valid");
                (t.family.clone(), t)
            })
            .collect()
    }

    pub fn bundled_family(family: &str) -> Option<PromptTemplate> {
        Self::bundled().remove(family)
    }

    pub fn uses_hint(&self) -> bool {
        count_slot(&self.layout, Slot::Hint) > 0
    }

    /// Renders the template; `hint` is required iff the layout has `{hint}`.
    pub fn render(
        &self,
        shots: &[SegmentPair],
        source: &str,
        lang_pair: LangPair,
        hint: Option<&str>,
    ) -> Result<String> {
        let expected = self.shot_policy.count();
        if shots.len() != expected {
            return Err(PromptError::ShotCountMismatch {
                expected,
                got: shots.len(),
            });
        }
        if self.uses_hint() && hint.is_none_or(str::is_empty) {
            return Err(PromptError::EmptyHint);
        }
        let mut out = String::new();
        for part in &self.layout {
            match part {
                Part::Literal(s) => out.push_str(s),
                Part::Slot(Slot::Source) => out.push_str(source),
                Part::Slot(Slot::Hint) => out.push_str(hint.unwrap_or_default()),
                Part::Slot(Slot::SrcLang) => out.push_str(lang_pair.src().name()),
                Part::Slot(Slot::TgtLang) => out.push_str(lang_pair.tgt().name()),
                Part::Slot(Slot::Shots) => {
                    for shot in shots {
                        render_shot(&self.shot_layout, shot, lang_pair, &mut out);
                    }
                }
                Part::Slot(Slot::Reference) => unreachable!("rejected at load"),
            }
        }
        Ok(out)
    }
}

fn render_shot(layout: &[Part], shot: &SegmentPair, lang_pair: LangPair, out: &mut String) {
    for part in layout {
        match part {
            Part::Literal(s) => out.push_str(s),
            Part::Slot(Slot::Source) => out.push_str(&shot.source),
            Part::Slot(Slot::Reference) => out.push_str(&shot.reference),
            Part::Slot(Slot::SrcLang) => out.push_str(lang_pair.src().name()),
            Part::Slot(Slot::TgtLang) => out.push_str(lang_pair.tgt().name()),
            Part::Slot(Slot::Shots | Slot::Hint) => unreachable!("rejected at load"),
        }
    }
}

/// Few-shot prompt: each shot as a full block, then the query block.
pub fn render_fewshot(
    template: &PromptTemplate,
    shots: &[SegmentPair],
    source: &str,
    lang_pair: LangPair,
) -> Result<String> {
    template.render(shots, source, lang_pair, None)
}

pub fn alpaca_prompt(instruction: &str, input: &str) -> String {
    format!("### Instruction:\n{instruction}\n\n### Input:\n{input}\n\n### Response:")
}

pub fn ft_instruction(lang_pair: LangPair) -> String {
    format!(
        "Translate the following {} text into {}.",
        lang_pair.src().name(),
        lang_pair.tgt().name()
    )
}

/// Instruction for the hint-generation task (first inference stage).
pub fn hint_instruction(lang_pair: LangPair) -> String {
    format!(
        "Identify the domain and the writing style of the following {} text, then write a short hint describing them to guide its translation into {}.",
        lang_pair.src().name(),
        lang_pair.tgt().name()
    )
}

/// Instruction for hint-conditioned translation: the plain translation
/// instruction followed by a `### Hint:` section.
pub fn cot_instruction(hint: &str, lang_pair: LangPair) -> String {
    format!("{}\n\n### Hint:\n{hint}", ft_instruction(lang_pair))
}

pub fn render_ft_prompt(source: &str, lang_pair: LangPair) -> Result<String> {
    if source.is_empty() {
        return Err(PromptError::EmptySource);
    }
    Ok(alpaca_prompt(&ft_instruction(lang_pair), source))
}

pub fn render_hint_prompt(source: &str, lang_pair: LangPair) -> Result<String> {
    if source.is_empty() {
        return Err(PromptError::EmptySource);
    }
    Ok(alpaca_prompt(&hint_instruction(lang_pair), source))
}

pub fn render_cot_translation_prompt(
    hint: &str,
    source: &str,
    lang_pair: LangPair,
) -> Result<String> {
    if hint.is_empty() {
        return Err(PromptError::EmptyHint);
    }
    if source.is_empty() {
        return Err(PromptError::EmptySource);
    }
    Ok(alpaca_prompt(&cot_instruction(hint, lang_pair), source))
}

/// Slots of a hand-written hint:
/// `The sentence is <origin>. The style of text is <style>. Translate into a <label> domain style.`
/// The style sentence is omitted when `style` is `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HintDescriptor {
    /// Completes "The sentence is ...", e.g. "from a text related to medicine".
    pub origin: String,
    pub style: Option<String>,
    /// Domain adjective, e.g. "medical".
    pub label: String,
}

/// Builds a manual hint. With `known_domains` set (strict mode) the domain must be listed.
pub fn make_manual_hint(
    domain: &str,
    descriptor: &HintDescriptor,
    known_domains: Option<&BTreeSet<String>>,
) -> Result<String> {
    if let Some(known) = known_domains {
        if !known.contains(domain) {
            return Err(PromptError::UnknownDomain(domain.to_string()));
        }
    }
    let origin = descriptor.origin.trim();
    let label = descriptor.label.trim();
    if origin.is_empty() {
        return Err(PromptError::EmptyDescriptor("origin"));
    }
    if label.is_empty() {
        return Err(PromptError::EmptyDescriptor("label"));
    }
    let mut hint = format!("The sentence is {origin}.");
    if let Some(style) = descriptor.style.as_deref().map(str::trim) {
        if style.is_empty() {
            return Err(PromptError::EmptyDescriptor("style"));
        }
        hint.push_str(&format!(" The style of text is {style}."));
    }
    hint.push_str(&format!(" Translate into a {label} domain style."));
    Ok(hint)
}

#[derive(Deserialize)]
struct CatalogFile {
    training: BTreeMap<String, String>,
    decoding: BTreeMap<String, String>,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
}

/// Per-domain hint texts for one language family (de↔en or zh↔en).
///
/// `training` hints label the hint-generation data; `decoding` hints are the
/// per-test-set hints used when a hint is given rather than generated.
/// `aliases` map store/test-set names onto training-hint domains
/// (e.g. `Medical` → `Medical(OPUS)`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HintCatalog {
    pub training_hints: BTreeMap<String, String>,
    pub decoding_hints: BTreeMap<String, String>,
    pub aliases: BTreeMap<String, String>,
}

impl HintCatalog {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: CatalogFile =
            toml::from_str(text).map_err(|e| PromptError::Template(e.to_string()))?;
        let catalog = Self {
            training_hints: file.training,
            decoding_hints: file.decoding,
            aliases: file.aliases,
        };
        for (domain, hint) in catalog.training_hints.iter().chain(&catalog.decoding_hints) {
            if hint.trim().is_empty() {
                return Err(PromptError::MissingHint(domain.clone()));
            }
        }
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| PromptError::Template(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Default catalog for the family of `lang`'s pairs (`De` or `Zh`).
    pub fn bundled(lang: Language) -> Self {
        let text = match lang {
            Language::Zh => include_str!("../data/hints/zh-en.toml"),
            _ => include_str!("../data/hints/de-en.toml"),
        };
        Self::from_toml(text).expect("bundled hint catalog is valid")
    }

    pub fn for_pair(pair: LangPair) -> Self {
        Self::bundled(pair.foreign())
    }

    fn resolve<'a>(&'a self, domain: &'a str) -> &'a str {
        self.aliases
            .get(domain)
            .map(String::as_str)
            .unwrap_or(domain)
    }

    pub fn training_hint(&self, domain: &str) -> Result<&str> {
        self.training_hints
            .get(self.resolve(domain))
            .map(String::as_str)
            .ok_or_else(|| PromptError::MissingHint(domain.to_string()))
    }

    pub fn decoding_hint(&self, domain: &str) -> Result<&str> {
        self.decoding_hints
            .get(domain)
            .map(String::as_str)
            .ok_or_else(|| PromptError::MissingHint(domain.to_string()))
    }
}
