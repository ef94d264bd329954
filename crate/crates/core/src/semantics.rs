//! Lexicon-driven labeling of level-0 regions.
//!
//! Words, phrases and the title pattern all come from a lexicon file; this
//! module has no vocabulary of its own. Labeling runs in two stages: a word
//! *fires* on a region when the region's attributes (and the attributes of
//! the related regions named by the word) satisfy its constraints, then a
//! phrase is *affirmed* for every binding of its member words to distinct
//! labeled regions that satisfies its pairwise relations. Only descriptors
//! and relations are read, never pixels.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::Fixed6;
use crate::description::ImageDescription;
use crate::registry::{RegionDescriptor, RegionId, RelationKind};

pub const LEXICON_VERSION: &str = "lex-1";
pub const ANNOTATION_VERSION: &str = "ann-1";

/// Text used for `{phrases}` in the title when nothing was affirmed.
const NO_PHRASES_TITLE: &str = "none";
const NO_PHRASES_SENTENCE: &str = "No phrases affirmed.";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexiconError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unsupported lexicon version {0:?}")]
    Version(String),
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("empty range: {0}")]
    EmptyRange(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnnotationError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unsupported annotation version {0:?}")]
    Version(String),
}

/// Closed interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordRelation {
    pub kind: RelationKind,
    /// Name of the word the related region must match by attributes.
    pub target: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    pub name: String,
    pub intensity: Option<Range>,
    pub area_fraction: Option<Range>,
    pub relations: Vec<WordRelation>,
}

impl Word {
    pub fn constraint_count(&self) -> usize {
        usize::from(self.intensity.is_some())
            + usize::from(self.area_fraction.is_some())
            + self.relations.len()
    }

    /// Intensity and area constraints only.
    pub fn matches_attributes(&self, d: &RegionDescriptor) -> bool {
        self.intensity.is_none_or(|r| r.contains(d.mean_intensity))
            && self
                .area_fraction
                .is_none_or(|r| r.contains(d.area_fraction))
    }
}

/// `from kind to`, between member words of a phrase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseRelation {
    pub from: String,
    pub kind: RelationKind,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phrase {
    pub name: String,
    pub members: Vec<String>,
    pub relations: Vec<PhraseRelation>,
    /// `{word}` placeholders are replaced with the member word's name.
    pub sentence: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lexicon {
    pub words: Vec<Word>,
    pub phrases: Vec<Phrase>,
    /// `{phrases}` expands to the affirmed phrase names. An empty pattern omits the title line.
    pub title_pattern: String,
}

impl Lexicon {
    pub fn word(&self, name: &str) -> Option<&Word> {
        self.words.iter().find(|w| w.name == name)
    }
}

// Wire forms. Field order is the canonical key order.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireLexicon {
    version: String,
    words: Vec<WireWord>,
    #[serde(default)]
    phrases: Vec<WirePhrase>,
    #[serde(default)]
    title_pattern: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireWord {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intensity: Option<(Fixed6, Fixed6)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    area_fraction: Option<(Fixed6, Fixed6)>,
    #[serde(default)]
    relations: Vec<WireWordRelation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireWordRelation {
    kind: RelationKind,
    target: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WirePhrase {
    name: String,
    members: Vec<String>,
    #[serde(default)]
    relations: Vec<WirePhraseRelation>,
    sentence: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WirePhraseRelation {
    from: String,
    kind: RelationKind,
    to: String,
}

fn check_version(value: &serde_json::Value, expected: &str) -> Result<(), Result<String, String>> {
    match value.get("version") {
        Some(serde_json::Value::String(v)) if v == expected => Ok(()),
        Some(serde_json::Value::String(v)) => Err(Ok(v.clone())),
        Some(_) => Err(Err("version must be a string".into())),
        None => Err(Err("missing version".into())),
    }
}

/// Splits a pattern into literal text and `{name}` placeholders.
fn placeholders(pattern: &str) -> Result<Vec<&str>, String> {
    let mut names = Vec::new();
    let mut rest = pattern;
    while let Some(open) = rest.find(['{', '}']) {
        if rest.as_bytes()[open] == b'}' {
            return Err(format!("unmatched '}}' in {pattern:?}"));
        }
        let after = &rest[open + 1..];
        let close = after
            .find(['{', '}'])
            .filter(|&c| after.as_bytes()[c] == b'}')
            .ok_or_else(|| format!("unclosed '{{' in {pattern:?}"))?;
        names.push(&after[..close]);
        rest = &after[close + 1..];
    }
    Ok(names)
}

fn render(pattern: &str, mut value: impl FnMut(&str) -> String) -> String {
    let mut out = String::with_capacity(pattern.len());
    let mut rest = pattern;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = rest[open..].find('}').expect("validated pattern") + open;
        out.push_str(&value(&rest[open + 1..close]));
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    out
}

/// `open_lo` excludes the lower bound itself, as for area fractions.
fn range(
    name: &str,
    what: &str,
    raw: Option<(Fixed6, Fixed6)>,
    bounds: (f64, f64),
    open_lo: bool,
) -> Result<Option<Range>, LexiconError> {
    let Some((lo, hi)) = raw else {
        return Ok(None);
    };
    let r = Range { lo: lo.0, hi: hi.0 };
    if r.lo > r.hi {
        return Err(LexiconError::EmptyRange(format!(
            "word {name:?} {what} [{}, {}]",
            r.lo, r.hi
        )));
    }
    let below = if open_lo {
        r.lo <= bounds.0
    } else {
        r.lo < bounds.0
    };
    if below || r.hi > bounds.1 {
        let open = if open_lo { '(' } else { '[' };
        return Err(LexiconError::Schema(format!(
            "word {name:?} {what} [{}, {}] exceeds {open}{}, {}]",
            r.lo, r.hi, bounds.0, bounds.1
        )));
    }
    Ok(Some(r))
}

/// Parses and validates a lexicon file.
pub fn load_lexicon(text: &str) -> Result<Lexicon, LexiconError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| LexiconError::Schema(e.to_string()))?;
    check_version(&value, LEXICON_VERSION).map_err(|e| match e {
        Ok(v) => LexiconError::Version(v),
        Err(m) => LexiconError::Schema(m),
    })?;
    let wire: WireLexicon =
        serde_json::from_value(value).map_err(|e| LexiconError::Schema(e.to_string()))?;

    let mut seen = BTreeSet::new();
    for w in &wire.words {
        if w.name.is_empty() || w.name.contains(['{', '}']) {
            return Err(LexiconError::Schema(format!(
                "invalid word name {:?}",
                w.name
            )));
        }
        if !seen.insert(w.name.as_str()) {
            return Err(LexiconError::Schema(format!("duplicate word {:?}", w.name)));
        }
    }
    let mut words = Vec::with_capacity(wire.words.len());
    for w in &wire.words {
        let relations = w
            .relations
            .iter()
            .map(|r| {
                if !seen.contains(r.target.as_str()) {
                    return Err(LexiconError::DanglingReference(format!(
                        "word {:?} relates to undeclared word {:?}",
                        w.name, r.target
                    )));
                }
                Ok(WordRelation {
                    kind: r.kind,
                    target: r.target.clone(),
                })
            })
            .collect::<Result<_, _>>()?;
        words.push(Word {
            name: w.name.clone(),
            intensity: range(&w.name, "intensity", w.intensity, (0.0, 255.0), false)?,
            area_fraction: range(&w.name, "area_fraction", w.area_fraction, (0.0, 1.0), true)?,
            relations,
        });
    }

    let mut phrase_names = BTreeSet::new();
    let mut phrases = Vec::with_capacity(wire.phrases.len());
    for p in wire.phrases {
        if p.name.is_empty() || !phrase_names.insert(p.name.clone()) {
            return Err(LexiconError::Schema(format!(
                "invalid or duplicate phrase {:?}",
                p.name
            )));
        }
        if p.members.is_empty() {
            return Err(LexiconError::Schema(format!(
                "phrase {:?} has no members",
                p.name
            )));
        }
        let mut members = BTreeSet::new();
        for m in &p.members {
            if !seen.contains(m.as_str()) {
                return Err(LexiconError::DanglingReference(format!(
                    "phrase {:?} names undeclared word {m:?}",
                    p.name
                )));
            }
            if !members.insert(m.as_str()) {
                return Err(LexiconError::Schema(format!(
                    "phrase {:?} repeats member {m:?}",
                    p.name
                )));
            }
        }
        for r in &p.relations {
            for end in [&r.from, &r.to] {
                if !members.contains(end.as_str()) {
                    return Err(LexiconError::DanglingReference(format!(
                        "phrase {:?} relation uses non-member {end:?}",
                        p.name
                    )));
                }
            }
            if r.from == r.to {
                return Err(LexiconError::Schema(format!(
                    "phrase {:?} relates {:?} to itself",
                    p.name, r.from
                )));
            }
        }
        for name in placeholders(&p.sentence).map_err(LexiconError::Schema)? {
            if !members.contains(name) {
                return Err(LexiconError::DanglingReference(format!(
                    "phrase {:?} sentence uses non-member {{{name}}}",
                    p.name
                )));
            }
        }
        phrases.push(Phrase {
            name: p.name,
            members: p.members,
            relations: p
                .relations
                .into_iter()
                .map(|r| PhraseRelation {
                    from: r.from,
                    kind: r.kind,
                    to: r.to,
                })
                .collect(),
            sentence: p.sentence,
        });
    }

    for name in placeholders(&wire.title_pattern).map_err(LexiconError::Schema)? {
        if name != "phrases" {
            return Err(LexiconError::DanglingReference(format!(
                "title pattern uses unknown placeholder {{{name}}}"
            )));
        }
    }

    Ok(Lexicon {
        words,
        phrases,
        title_pattern: wire.title_pattern,
    })
}

/// Canonical text of a lexicon.
pub fn serialize_lexicon(lex: &Lexicon) -> String {
    let fixed = |r: &Option<Range>| r.map(|r| (Fixed6(r.lo), Fixed6(r.hi)));
    let wire = WireLexicon {
        version: LEXICON_VERSION.into(),
        words: lex
            .words
            .iter()
            .map(|w| WireWord {
                name: w.name.clone(),
                intensity: fixed(&w.intensity),
                area_fraction: fixed(&w.area_fraction),
                relations: w
                    .relations
                    .iter()
                    .map(|r| WireWordRelation {
                        kind: r.kind,
                        target: r.target.clone(),
                    })
                    .collect(),
            })
            .collect(),
        phrases: lex
            .phrases
            .iter()
            .map(|p| WirePhrase {
                name: p.name.clone(),
                members: p.members.clone(),
                relations: p
                    .relations
                    .iter()
                    .map(|r| WirePhraseRelation {
                        from: r.from.clone(),
                        kind: r.kind,
                        to: r.to.clone(),
                    })
                    .collect(),
                sentence: p.sentence.clone(),
            })
            .collect(),
        title_pattern: lex.title_pattern.clone(),
    };
    serde_json::to_string(&wire).expect("finite ranges")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub region: RegionId,
    pub word: String,
}

/// Outcome of [`fire_labels`]: at most one word per level-0 region.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Firing {
    /// In region label order.
    pub assignments: Vec<Assignment>,
    pub unmatched: Vec<RegionId>,
}

impl Firing {
    pub fn word_of(&self, region: RegionId) -> Option<&str> {
        self.assignments
            .iter()
            .find(|a| a.region == region)
            .map(|a| a.word.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub word: String,
    pub region: RegionId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffirmedPhrase {
    pub phrase: String,
    /// In the phrase's member order.
    pub bindings: Vec<Binding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Annotation {
    pub assignments: Vec<Assignment>,
    pub affirmed: Vec<AffirmedPhrase>,
    pub unmatched: Vec<RegionId>,
    pub narrative: String,
}

/// Fires at most one word on each level-0 region.
///
/// A word is a candidate when its intensity and area ranges hold and, for
/// each required relation, the region has a relation of that kind to some
/// region whose attributes match the target word. The candidate with the
/// most constraints wins; earlier-declared words win ties.
pub fn fire_labels(d: &ImageDescription, lex: &Lexicon) -> Firing {
    let mut firing = Firing::default();
    for region in &d.finest().regions {
        let mut best: Option<(usize, &Word)> = None;
        for word in &lex.words {
            if !word.matches_attributes(region) {
                continue;
            }
            let related = word.relations.iter().all(|req| {
                let target_word = lex.word(&req.target).expect("validated lexicon");
                region.relations_of(req.kind).any(|rel| {
                    d.region(rel.target)
                        .is_some_and(|t| target_word.matches_attributes(t))
                })
            });
            if !related {
                continue;
            }
            let score = word.constraint_count();
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, word));
            }
        }
        match best {
            Some((_, word)) => firing.assignments.push(Assignment {
                region: region.id,
                word: word.name.clone(),
            }),
            None => firing.unmatched.push(region.id),
        }
    }
    firing
}

/// Enumerates every phrase binding that holds in the registry.
///
/// Bindings assign each member word a distinct region carrying that word;
/// regions are tried in label order and member by member, so output order
/// is phrase declaration order, then lexicographic binding order.
pub fn affirm_context(firing: &Firing, d: &ImageDescription, lex: &Lexicon) -> Vec<AffirmedPhrase> {
    let mut out = Vec::new();
    for phrase in &lex.phrases {
        let candidates: Vec<Vec<RegionId>> = phrase
            .members
            .iter()
            .map(|m| {
                firing
                    .assignments
                    .iter()
                    .filter(|a| &a.word == m)
                    .map(|a| a.region)
                    .collect()
            })
            .collect();
        let mut chosen = Vec::with_capacity(phrase.members.len());
        bind(phrase, &candidates, d, &mut chosen, &mut out);
    }
    out
}

fn bind(
    phrase: &Phrase,
    candidates: &[Vec<RegionId>],
    d: &ImageDescription,
    chosen: &mut Vec<RegionId>,
    out: &mut Vec<AffirmedPhrase>,
) {
    let depth = chosen.len();
    if depth == phrase.members.len() {
        out.push(AffirmedPhrase {
            phrase: phrase.name.clone(),
            bindings: phrase
                .members
                .iter()
                .zip(chosen.iter())
                .map(|(w, &r)| Binding {
                    word: w.clone(),
                    region: r,
                })
                .collect(),
        });
        return;
    }
    let position = |name: &str| {
        phrase
            .members
            .iter()
            .position(|m| m == name)
            .expect("validated")
    };
    for &region in &candidates[depth] {
        if chosen.contains(&region) {
            continue;
        }
        chosen.push(region);
        // Check every relation whose endpoints are both bound now.
        let holds = phrase.relations.iter().all(|r| {
            let (f, t) = (position(&r.from), position(&r.to));
            if f.max(t) != depth {
                return true;
            }
            d.region(chosen[f])
                .is_some_and(|src| src.has_relation(r.kind, chosen[t]))
        });
        if holds {
            bind(phrase, candidates, d, chosen, out);
        }
        chosen.pop();
    }
}

/// Title line, then one sentence per affirmed phrase.
pub fn compose_narrative(affirmed: &[AffirmedPhrase], lex: &Lexicon) -> String {
    let mut names: Vec<&str> = Vec::new();
    for a in affirmed {
        if !names.contains(&a.phrase.as_str()) {
            names.push(&a.phrase);
        }
    }
    let mut lines = Vec::new();
    let title = render(&lex.title_pattern, |_| {
        if names.is_empty() {
            NO_PHRASES_TITLE.to_string()
        } else {
            names.join(", ")
        }
    });
    if !title.is_empty() {
        lines.push(title);
    }
    if affirmed.is_empty() {
        lines.push(NO_PHRASES_SENTENCE.to_string());
    }
    for a in affirmed {
        let phrase = lex
            .phrases
            .iter()
            .find(|p| p.name == a.phrase)
            .expect("affirmed phrases come from the lexicon");
        lines.push(render(&phrase.sentence, |name| name.to_string()));
    }
    lines.join("\n")
}

/// Fire, affirm and narrate in one go.
pub fn annotate(d: &ImageDescription, lex: &Lexicon) -> Annotation {
    let firing = fire_labels(d, lex);
    let affirmed = affirm_context(&firing, d, lex);
    let narrative = compose_narrative(&affirmed, lex);
    Annotation {
        assignments: firing.assignments,
        affirmed,
        unmatched: firing.unmatched,
        narrative,
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireAnnotation {
    version: String,
    assignments: Vec<WireAssignment>,
    affirmed: Vec<WireAffirmed>,
    unmatched: Vec<(usize, u32)>,
    narrative: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireAssignment {
    region: (usize, u32),
    word: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireAffirmed {
    phrase: String,
    bindings: Vec<WireAssignment>,
}

fn wire_id(r: RegionId) -> (usize, u32) {
    (r.level, r.label)
}

fn from_wire_id((level, label): (usize, u32)) -> RegionId {
    RegionId::new(level, label)
}

/// Canonical `ann-1` text of an annotation.
pub fn serialize_annotation(a: &Annotation) -> String {
    let assignment = |region: RegionId, word: &str| WireAssignment {
        region: wire_id(region),
        word: word.to_string(),
    };
    let wire = WireAnnotation {
        version: ANNOTATION_VERSION.into(),
        assignments: a
            .assignments
            .iter()
            .map(|x| assignment(x.region, &x.word))
            .collect(),
        affirmed: a
            .affirmed
            .iter()
            .map(|p| WireAffirmed {
                phrase: p.phrase.clone(),
                bindings: p
                    .bindings
                    .iter()
                    .map(|b| assignment(b.region, &b.word))
                    .collect(),
            })
            .collect(),
        unmatched: a.unmatched.iter().copied().map(wire_id).collect(),
        narrative: a.narrative.clone(),
    };
    serde_json::to_string(&wire).expect("plain data")
}

pub fn deserialize_annotation(text: &str) -> Result<Annotation, AnnotationError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| AnnotationError::Schema(e.to_string()))?;
    check_version(&value, ANNOTATION_VERSION).map_err(|e| match e {
        Ok(v) => AnnotationError::Version(v),
        Err(m) => AnnotationError::Schema(m),
    })?;
    let wire: WireAnnotation =
        serde_json::from_value(value).map_err(|e| AnnotationError::Schema(e.to_string()))?;
    let assignment = |w: WireAssignment| Assignment {
        region: from_wire_id(w.region),
        word: w.word,
    };
    Ok(Annotation {
        assignments: wire.assignments.into_iter().map(assignment).collect(),
        affirmed: wire
            .affirmed
            .into_iter()
            .map(|p| AffirmedPhrase {
                phrase: p.phrase,
                bindings: p
                    .bindings
                    .into_iter()
                    .map(|b| Binding {
                        word: b.word,
                        region: from_wire_id(b.region),
                    })
                    .collect(),
            })
            .collect(),
        unmatched: wire.unmatched.into_iter().map(from_wire_id).collect(),
        narrative: wire.narrative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::description::describe;
    use crate::segmenter::SegParams;
    use crate::synth;

    const SKY_GROUND: &str = r#"{
        "version": "lex-1",
        "words": [
            {"name": "sky", "intensity": [200, 255], "relations": [{"kind": "above", "target": "ground"}]},
            {"name": "ground", "intensity": [0, 100]}
        ],
        "phrases": [
            {"name": "landscape", "members": ["sky", "ground"],
             "relations": [{"from": "sky", "kind": "above", "to": "ground"}],
             "sentence": "The {sky} is above the {ground}."}
        ],
        "title_pattern": "Scene: {phrases}."
    }"#;

    fn scene() -> ImageDescription {
        describe(&synth::sky_ground(32, 32), &SegParams::default()).unwrap()
    }

    #[test]
    fn sky_above_ground() {
        let d = scene();
        let lex = load_lexicon(SKY_GROUND).unwrap();
        let firing = fire_labels(&d, &lex);
        assert!(firing.unmatched.is_empty());
        let words: Vec<_> = firing.assignments.iter().map(|a| a.word.as_str()).collect();
        assert_eq!(words, ["sky", "ground"]);
        let top = d
            .finest()
            .regions
            .iter()
            .find(|r| r.centroid.1 < 0.5)
            .unwrap();
        assert_eq!(firing.word_of(top.id), Some("sky"));

        let affirmed = affirm_context(&firing, &d, &lex);
        assert_eq!(affirmed.len(), 1);
        assert_eq!(affirmed[0].phrase, "landscape");
        assert_eq!(
            compose_narrative(&affirmed, &lex),
            "Scene: landscape.\nThe sky is above the ground."
        );
    }

    #[test]
    fn empty_lexicon_leaves_everything_unmatched() {
        let d = scene();
        let lex = load_lexicon(r#"{"version":"lex-1","words":[]}"#).unwrap();
        let a = annotate(&d, &lex);
        assert!(a.assignments.is_empty());
        assert!(a.affirmed.is_empty());
        assert_eq!(a.unmatched.len(), d.finest().regions.len());
        assert_eq!(a.narrative, "No phrases affirmed.");
    }

    #[test]
    fn declaration_order_breaks_ties() {
        let d = scene();
        let lex = load_lexicon(
            r#"{"version":"lex-1","words":[
                {"name":"first","intensity":[0,255]},
                {"name":"second","intensity":[0,255]}]}"#,
        )
        .unwrap();
        let firing = fire_labels(&d, &lex);
        assert!(firing.assignments.iter().all(|a| a.word == "first"));
    }

    #[test]
    fn more_constraints_win() {
        let d = scene();
        let lex = load_lexicon(
            r#"{"version":"lex-1","words":[
                {"name":"thing","intensity":[0,255]},
                {"name":"big thing","intensity":[0,255],"area_fraction":[0.25,1]}]}"#,
        )
        .unwrap();
        let firing = fire_labels(&d, &lex);
        assert!(firing.assignments.iter().all(|a| a.word == "big thing"));
    }

    #[test]
    fn left_of_fails_on_stacked_regions() {
        let d = scene();
        let lex = load_lexicon(
            r#"{"version":"lex-1","words":[
                {"name":"sky","intensity":[200,255]},{"name":"ground","intensity":[0,100]}],
              "phrases":[{"name":"side by side","members":["sky","ground"],
                "relations":[{"from":"sky","kind":"left_of","to":"ground"}],"sentence":"{sky} beside {ground}"}],
              "title_pattern":"{phrases}"}"#,
        )
        .unwrap();
        let a = annotate(&d, &lex);
        assert_eq!(a.assignments.len(), 2);
        assert!(a.affirmed.is_empty());
        assert_eq!(a.narrative, "none\nNo phrases affirmed.");
    }

    #[test]
    fn no_assignments_no_phrases() {
        let lex = load_lexicon(SKY_GROUND).unwrap();
        let d = describe(&synth::uniform(8, 8, 150), &SegParams::default()).unwrap();
        let a = annotate(&d, &lex);
        assert!(a.assignments.is_empty() && a.affirmed.is_empty());
    }

    #[test]
    fn two_phrases_in_declaration_order() {
        let d = scene();
        let lex = load_lexicon(
            r#"{"version":"lex-1","words":[
                {"name":"sky","intensity":[200,255]},{"name":"ground","intensity":[0,100]}],
              "phrases":[
                {"name":"touching","members":["ground","sky"],
                 "relations":[{"from":"ground","kind":"adjacent_to","to":"sky"}],"sentence":"The {ground} meets the {sky}."},
                {"name":"landscape","members":["sky","ground"],
                 "relations":[{"from":"sky","kind":"above","to":"ground"}],"sentence":"The {sky} is above the {ground}."}],
              "title_pattern":"Scene: {phrases}."}"#,
        )
        .unwrap();
        let a = annotate(&d, &lex);
        assert_eq!(
            a.narrative,
            "Scene: touching, landscape.\nThe ground meets the sky.\nThe sky is above the ground."
        );
    }

    #[test]
    fn adding_a_phrase_keeps_earlier_affirmations() {
        let d = scene();
        let base = load_lexicon(SKY_GROUND).unwrap();
        let mut extended = base.clone();
        extended.phrases.insert(
            0,
            Phrase {
                name: "neighbours".into(),
                members: vec!["ground".into(), "sky".into()],
                relations: vec![PhraseRelation {
                    from: "ground".into(),
                    kind: RelationKind::AdjacentTo,
                    to: "sky".into(),
                }],
                sentence: "{ground} touches {sky}".into(),
            },
        );
        let before = annotate(&d, &base).affirmed;
        let after = annotate(&d, &extended).affirmed;
        assert!(before.iter().all(|a| after.contains(a)));
        assert_eq!(after.len(), 2);
    }

    #[test]
    fn lexicon_errors() {
        let ok = r#"{"version":"lex-1","words":[{"name":"bright","intensity":[200,255]}]}"#;
        assert!(load_lexicon(ok).is_ok());
        let dangling = r#"{"version":"lex-1","words":[{"name":"bright","intensity":[200,255]}],
            "phrases":[{"name":"p","members":["sky"],"sentence":"x"}]}"#;
        assert!(matches!(
            load_lexicon(dangling),
            Err(LexiconError::DanglingReference(_))
        ));
        let empty = r#"{"version":"lex-1","words":[{"name":"bright","intensity":[200,100]}]}"#;
        assert!(matches!(
            load_lexicon(empty),
            Err(LexiconError::EmptyRange(_))
        ));
        for schema in [
            "",
            "{}",
            r#"{"version":"lex-1"}"#,
            r#"{"version":"lex-1","words":[{"name":"a"},{"name":"a"}]}"#,
            r#"{"version":"lex-1","words":[{"name":"a","intensity":[0,300]}]}"#,
            r#"{"version":"lex-1","words":[{"name":"a","area_fraction":[0,0.5]}]}"#,
            r#"{"version":"lex-1","words":[{"name":"a","colour":"red"}]}"#,
            r#"{"version":"lex-1","words":[{"name":"a"}],"phrases":[{"name":"p","members":["a"],"sentence":"{a"}]}"#,
        ] {
            assert!(
                matches!(load_lexicon(schema), Err(LexiconError::Schema(_))),
                "{schema}"
            );
        }
        assert_eq!(
            load_lexicon(r#"{"version":"lex-0","words":[]}"#),
            Err(LexiconError::Version("lex-0".into()))
        );
        for dangling in [
            r#"{"version":"lex-1","words":[{"name":"a","relations":[{"kind":"above","target":"b"}]}]}"#,
            r#"{"version":"lex-1","words":[{"name":"a"}],"phrases":[{"name":"p","members":["a"],"sentence":"{b}"}]}"#,
            r#"{"version":"lex-1","words":[{"name":"a"}],"title_pattern":"{title}"}"#,
        ] {
            assert!(
                matches!(
                    load_lexicon(dangling),
                    Err(LexiconError::DanglingReference(_))
                ),
                "{dangling}"
            );
        }
    }

    #[test]
    fn lexicon_and_annotation_round_trip() {
        let lex = load_lexicon(SKY_GROUND).unwrap();
        let text = serialize_lexicon(&lex);
        assert_eq!(load_lexicon(&text).unwrap(), lex);
        assert_eq!(serialize_lexicon(&load_lexicon(&text).unwrap()), text);

        let a = annotate(&scene(), &lex);
        let text = serialize_annotation(&a);
        assert_eq!(deserialize_annotation(&text).unwrap(), a);
        assert!(text.starts_with(r#"{"version":"ann-1","assignments":[{"region":[0,"#));
    }

    #[test]
    fn labels_come_from_the_description_alone() {
        // A description parsed from text, with no image anywhere in reach.
        let text = crate::description::serialize(&scene());
        let d = crate::description::deserialize(&text).unwrap();
        let a = annotate(&d, &load_lexicon(SKY_GROUND).unwrap());
        assert_eq!(
            a.narrative,
            "Scene: landscape.\nThe sky is above the ground."
        );
    }
}
