//! Seeded generator of pathology-like reports with known line-level gold.
//!
//! A report has a header, a gross description padded with distractors, a
//! diagnosis block, an optional synoptic block of `cue: value` lines and a
//! comment block. Each annotated attribute is planted on exactly one line;
//! echo lines repeat it and are highlighted only under the full scheme.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    Cancer, EnrichedAnnotation, LabeledDocument, Report, SchemaSet, Scheme, NOT_REPORTED,
};
use crate::error::{Error, Result};
use crate::rng;

const NOT_APPLICABLE: &str = "not applicable";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeGen {
    pub name: String,
    /// Unnormalized sampling weight per schema value.
    pub values: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    pub cancer: Cancer,
    pub num_docs: usize,
    pub lines_per_doc: (usize, usize),
    pub attributes: Vec<AttributeGen>,
    pub synoptic_probability: f64,
    /// Gross-description filler lines; empty means the built-in lexicon.
    pub distractor_lexicon: Vec<String>,
    /// Lines that mention value words without any cue phrase.
    pub mention_lines: (usize, usize),
    pub rare_phrasing_rate: f64,
    /// Chance of a cue phrase paired with a conflicting, qualified value.
    pub qualification_rate: f64,
    pub multi_label_rate: f64,
    /// Extra lines restating a planted value.
    pub echo_lines: (usize, usize),
    pub stage_probability: f64,
    pub scheme: Scheme,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig::for_cancer(Cancer::Colon, 250, 0)
    }
}

fn weights(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(v, w)| (v.to_string(), *w)).collect()
}

/// Default value distribution for an attribute, uniform where no prior is built in.
pub fn default_attribute(
    schemas: &SchemaSet,
    cancer: Cancer,
    attribute: &str,
) -> Result<AttributeGen> {
    let schema = schemas
        .get(cancer, attribute)
        .ok_or_else(|| Error::invalid(format!("{attribute:?} is not a {cancer} attribute")))?;
    let values = match attribute {
        "grade" => weights(&[
            ("grade 1", 0.2),
            ("grade 2", 0.35),
            ("grade 3", 0.25),
            ("grade 4", 0.05),
            (NOT_REPORTED, 0.15),
        ]),
        "lymphovascular_invasion" | "perineural_invasion" if schema.allowed_values.len() > 1 => {
            weights(&[("present", 0.35), ("absent", 0.5), (NOT_REPORTED, 0.15)])
        }
        _ => schema
            .allowed_values
            .iter()
            .map(|v| (v.clone(), 1.0))
            .collect(),
    };
    Ok(AttributeGen {
        name: attribute.to_string(),
        values,
    })
}

impl GenConfig {
    /// Three attributes per cancer with built-in priors.
    pub fn for_cancer(cancer: Cancer, num_docs: usize, seed: u64) -> Self {
        let schemas = SchemaSet::default();
        let names: &[&str] = match cancer {
            Cancer::Colon => &["grade", "lymphovascular_invasion", "perineural_invasion"],
            Cancer::Kidney => &["grade", "laterality", "lymphovascular_invasion"],
        };
        GenConfig {
            cancer,
            num_docs,
            lines_per_doc: (30, 45),
            attributes: names
                .iter()
                .map(|a| default_attribute(&schemas, cancer, a).expect("built-in attribute"))
                .collect(),
            synoptic_probability: 0.7,
            distractor_lexicon: Vec::new(),
            mention_lines: (1, 3),
            rare_phrasing_rate: 0.05,
            qualification_rate: 0.05,
            multi_label_rate: 0.0,
            echo_lines: (0, 1),
            stage_probability: 0.5,
            scheme: Scheme::Minimal,
            seed,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: GenConfig = serde_json::from_str(text)?;
        cfg.validate(&SchemaSet::default())?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self, schemas: &SchemaSet) -> Result<()> {
        if self.num_docs == 0 {
            return Err(Error::invalid("num_docs must be at least 1"));
        }
        for (name, p) in [
            ("synoptic_probability", self.synoptic_probability),
            ("rare_phrasing_rate", self.rare_phrasing_rate),
            ("qualification_rate", self.qualification_rate),
            ("multi_label_rate", self.multi_label_rate),
            ("stage_probability", self.stage_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!(
                    "{name} must lie in [0, 1], got {p}"
                )));
            }
        }
        for (name, (lo, hi)) in [
            ("lines_per_doc", self.lines_per_doc),
            ("mention_lines", self.mention_lines),
            ("echo_lines", self.echo_lines),
        ] {
            if lo > hi {
                return Err(Error::invalid(format!(
                    "{name} range is empty: ({lo}, {hi})"
                )));
            }
        }
        if self.lines_per_doc.0 == 0 {
            return Err(Error::invalid("reports need at least one line"));
        }
        let mut seen = BTreeSet::new();
        for a in &self.attributes {
            if !seen.insert(a.name.as_str()) {
                return Err(Error::invalid(format!(
                    "attribute {:?} listed twice",
                    a.name
                )));
            }
            let schema = schemas.get(self.cancer, &a.name).ok_or_else(|| {
                Error::invalid(format!("{:?} is not a {} attribute", a.name, self.cancer))
            })?;
            for (v, w) in &a.values {
                if schema.position(v).is_none() {
                    return Err(Error::invalid(format!(
                        "{v:?} is not a legal {} value",
                        a.name
                    )));
                }
                if !(w.is_finite() && *w >= 0.0) {
                    return Err(Error::invalid(format!(
                        "weight of {v:?} must be finite and >= 0"
                    )));
                }
            }
            if a.values.values().sum::<f64>() <= 0.0 {
                return Err(Error::invalid(format!(
                    "{} has no positive value weight",
                    a.name
                )));
            }
        }
        Ok(())
    }
}

/// Surface vocabulary for one attribute.
struct Surface {
    /// First entry is the synoptic cue.
    cues: &'static [&'static str],
    /// (value, common forms, rare forms); unlisted values render verbatim.
    forms: &'static [(
        &'static str,
        &'static [&'static str],
        &'static [&'static str],
    )],
}

const PRESENCE: &[(&str, &[&str], &[&str])] = &[
    ("present", &["Present", "identified"], &["seen focally"]),
    ("absent", &["Not identified", "absent"], &["none seen"]),
    (NOT_APPLICABLE, &["Not applicable"], &["not applicable"]),
];

fn surface(attribute: &str) -> Surface {
    match attribute {
        "grade" => Surface {
            cues: &["Histologic Grade", "histologic grade", "tumor grade"],
            forms: &[
                ("grade 1", &["G1", "well differentiated"], &["low grade"]),
                (
                    "grade 2",
                    &["G2", "moderately differentiated"],
                    &["intermediate grade"],
                ),
                ("grade 3", &["G3", "poorly differentiated"], &["high grade"]),
                ("grade 4", &["G4", "undifferentiated"], &["anaplastic"]),
                (NOT_APPLICABLE, &["Not applicable"], &["not applicable"]),
            ],
        },
        "lymphovascular_invasion" => Surface {
            cues: &["Lymphovascular Invasion", "lymphovascular invasion"],
            forms: PRESENCE,
        },
        "perineural_invasion" => Surface {
            cues: &["Perineural Invasion", "perineural invasion"],
            forms: PRESENCE,
        },
        "laterality" => Surface {
            cues: &["Specimen Laterality", "laterality"],
            forms: &[
                ("left", &["Left"], &["left-sided"]),
                ("right", &["Right"], &["right-sided"]),
                (NOT_APPLICABLE, &["Not applicable"], &["not applicable"]),
            ],
        },
        "procedure" => Surface {
            cues: &["Procedure", "procedure"],
            forms: &[],
        },
        "tumor_site" => Surface {
            cues: &["Tumor Site", "tumor site"],
            forms: &[],
        },
        _ => Surface {
            cues: &["Histologic Type", "histologic type"],
            forms: &[],
        },
    }
}

/// Cue phrases that name `attribute` on planted lines.
pub fn cue_phrases(attribute: &str) -> &'static [&'static str] {
    surface(attribute).cues
}

/// Every surface form that expresses `value` for `attribute`.
pub fn surface_forms(attribute: &str, value: &str) -> Vec<String> {
    match surface(attribute)
        .forms
        .iter()
        .find(|(v, _, _)| *v == value)
    {
        Some((_, common, rare)) => common
            .iter()
            .chain(rare.iter())
            .map(|s| s.to_string())
            .collect(),
        None => vec![capitalize(value)],
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn pick_form(
    rng: &mut ChaCha8Rng,
    attribute: &str,
    value: &str,
    rare: bool,
    synoptic: bool,
) -> String {
    match surface(attribute)
        .forms
        .iter()
        .find(|(v, _, _)| *v == value)
    {
        Some((_, common, rare_forms)) => {
            if rare {
                rare_forms.choose(rng).unwrap().to_string()
            } else if synoptic {
                common[0].to_string()
            } else {
                common.choose(rng).unwrap().to_string()
            }
        }
        None => capitalize(value),
    }
}

const GROSS_LINES: &[&str] = &[
    "Received fresh labeled with the patient name and medical record number.",
    "The specimen is oriented by a suture at the proximal end.",
    "The serosal surface is smooth and glistening.",
    "Sectioning reveals a firm tan-white mass.",
    "The uninvolved mucosa is tan and unremarkable.",
    "The specimen is photographed and inked prior to sectioning.",
    "No additional lesions are identified grossly.",
    "A portion of tissue is submitted for tumor banking.",
    "The cut surface is variegated with areas of hemorrhage.",
    "Fat is dissected to search for lymph nodes.",
    "Ink code: blue for the proximal margin and black for the radial margin.",
    "The adjacent fat is grossly unremarkable.",
    "Sections are fixed in formalin overnight.",
    "Frozen section was not performed.",
    "Remaining tissue is retained in formalin.",
    "The vascular structures are patent and unremarkable.",
];

const SYNOPTIC_DISTRACTORS: &[&str] = &[
    "Tumor Budding: Low",
    "Tumor Deposits: Not identified",
    "Tumor Deposits: Present",
    "Treatment Effect: Absent",
    "Macroscopic Tumor Perforation: Not identified",
    "Margins: Uninvolved by invasive carcinoma",
    "Intratumoral Lymphocytes: Present",
    "Necrosis: Present",
    "Sarcomatoid Features: Not identified",
    "Ancillary Studies: Pending",
];

const MENTION_TEMPLATES: &[&str] = &[
    "Background tissue shows foci described as {form} elsewhere.",
    "Adjacent adenoma with {form} dysplasia is noted.",
    "Dysplasia: {form}",
    "Reactive changes are {form} in the background mucosa.",
    "Outside consultation comment mentions {form} areas.",
];

fn specimen_text(cancer: Cancer) -> &'static str {
    match cancer {
        Cancer::Colon => "Colon, resection",
        Cancer::Kidney => "Kidney, nephrectomy",
    }
}

fn measure(rng: &mut ChaCha8Rng) -> String {
    format!("{}.{}", rng.gen_range(1..12), rng.gen_range(0..10))
}

const T_SUB: [&str; 14] = [
    "0", "1", "1a", "1b", "2", "2a", "2b", "3", "3a", "3b", "4", "4a", "4b", "X",
];
const N_SUB: [&str; 9] = ["0", "1", "1a", "1b", "2", "2a", "2b", "3", "X"];
const M_SUB: [&str; 5] = ["0", "1", "1a", "1b", "X"];

fn stage_token(rng: &mut ChaCha8Rng) -> String {
    let prefix = ["p", "p", "p", "yp", "c", "rp"].choose(rng).unwrap();
    let mut t = format!(
        "{prefix}T{}N{}",
        T_SUB.choose(rng).unwrap(),
        N_SUB.choose(rng).unwrap()
    );
    if rng.gen_bool(0.6) {
        t.push('M');
        t.push_str(M_SUB.choose(rng).unwrap());
    }
    t
}

/// A generated document plus where its blocks landed.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedDoc {
    pub doc: LabeledDocument,
    /// Inclusive line range of the synoptic block (header and footer included).
    pub synoptic: Option<(usize, usize)>,
    pub stage_line: Option<usize>,
}

struct Planted {
    attribute: String,
    values: Vec<String>,
    text: Option<String>,
    echoes: Vec<String>,
}

fn sample_value(rng: &mut ChaCha8Rng, a: &AttributeGen) -> String {
    let total: f64 = a.values.values().sum();
    let mut r = rng.gen::<f64>() * total;
    for (v, w) in &a.values {
        if r < *w {
            return v.clone();
        }
        r -= w;
    }
    a.values
        .iter()
        .rev()
        .find(|(_, w)| **w > 0.0)
        .map(|(v, _)| v.clone())
        .expect("validated: some weight is positive")
}

fn plantable(schema_values: &[String]) -> Vec<&str> {
    schema_values
        .iter()
        .map(String::as_str)
        .filter(|v| *v != NOT_REPORTED && *v != NOT_APPLICABLE)
        .collect()
}

fn generate_one(cfg: &GenConfig, schemas: &SchemaSet, index: usize) -> GeneratedDoc {
    let mut rng = rng::stream(cfg.seed, &[index as u64]);
    let synoptic = rng.gen_bool(cfg.synoptic_probability);
    let target_lines = rng.gen_range(cfg.lines_per_doc.0..=cfg.lines_per_doc.1);
    let lexicon: Vec<String> = if cfg.distractor_lexicon.is_empty() {
        GROSS_LINES.iter().map(|s| s.to_string()).collect()
    } else {
        cfg.distractor_lexicon.clone()
    };

    let mut planted = Vec::new();
    let mut qualifications = Vec::new();
    for a in &cfg.attributes {
        let schema = schemas
            .get(cfg.cancer, &a.name)
            .expect("validated attribute");
        let cue = surface(&a.name).cues;
        let mut values = vec![sample_value(&mut rng, a)];
        let pool = plantable(&schema.allowed_values);
        let multi = rng.gen_bool(cfg.multi_label_rate);
        if multi && pool.len() >= 3 && pool.contains(&values[0].as_str()) {
            let others: Vec<&str> = pool.iter().copied().filter(|v| *v != values[0]).collect();
            values.push(others.choose(&mut rng).unwrap().to_string());
            values.sort_by_key(|v| schema.position(v));
        }
        let rare = rng.gen_bool(cfg.rare_phrasing_rate);
        let n_echo = rng.gen_range(cfg.echo_lines.0..=cfg.echo_lines.1);
        let qualify = rng.gen_bool(cfg.qualification_rate);
        if values[0] == NOT_REPORTED {
            planted.push(Planted {
                attribute: a.name.clone(),
                values,
                text: None,
                echoes: Vec::new(),
            });
            continue;
        }
        let form = values
            .iter()
            .map(|v| pick_form(&mut rng, &a.name, v, rare, synoptic))
            .collect::<Vec<_>>()
            .join(" and ");
        let text = if synoptic {
            format!("{}: {form}", cue[0])
        } else {
            match rng.gen_range(0..3) {
                0 => format!("{}: {form}", cue[0]),
                1 => format!("The {} is {form}.", cue[1]),
                _ => format!("{} {form} in the sections examined.", capitalize(cue[1])),
            }
        };
        let echoes = (0..n_echo)
            .map(|_| {
                let f = values
                    .iter()
                    .map(|v| pick_form(&mut rng, &a.name, v, false, false))
                    .collect::<Vec<_>>()
                    .join(" and ");
                match rng.gen_range(0..3) {
                    0 => format!("Note: {} {f}, confirmed on review.", cue[1]),
                    1 => format!("Final review notes {} {f}.", cue[1]),
                    _ => format!("Addendum: the {} remains {f}.", cue[1]),
                }
            })
            .collect();
        if qualify {
            let others: Vec<&str> = pool
                .iter()
                .copied()
                .filter(|v| !values.iter().any(|x| x == v))
                .collect();
            if let Some(other) = others.choose(&mut rng) {
                let f = pick_form(&mut rng, &a.name, other, false, false);
                qualifications.push(format!(
                    "The outside biopsy reported {} {f}; this was not confirmed here.",
                    cue[1]
                ));
            }
        }
        planted.push(Planted {
            attribute: a.name.clone(),
            values,
            text: Some(text),
            echoes,
        });
    }

    let mut mentions = Vec::new();
    let n_mentions = rng.gen_range(cfg.mention_lines.0..=cfg.mention_lines.1);
    for _ in 0..n_mentions {
        let Some(a) = cfg.attributes.choose(&mut rng) else {
            break;
        };
        let schema = schemas
            .get(cfg.cancer, &a.name)
            .expect("validated attribute");
        let pool = plantable(&schema.allowed_values);
        let Some(v) = pool.choose(&mut rng) else {
            continue;
        };
        let common = rng.gen_bool(0.5);
        let form = pick_form(&mut rng, &a.name, v, !common, false).to_lowercase();
        let tpl = MENTION_TEMPLATES.choose(&mut rng).unwrap();
        mentions.push(tpl.replace("{form}", &form));
    }
    let stage = rng
        .gen_bool(cfg.stage_probability)
        .then(|| stage_token(&mut rng));

    // Assemble blocks. Line indices of planted text are recorded as we go.
    let mut lines: Vec<String> = Vec::new();
    let mut planted_at: BTreeMap<String, usize> = BTreeMap::new();
    let mut echo_at: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    lines.push("SURGICAL PATHOLOGY REPORT".into());
    lines.push(format!(
        "Accession: S{:02}-{:05}",
        rng.gen_range(10..30),
        rng.gen_range(0..100_000)
    ));
    lines.push(format!("Specimen: {}", specimen_text(cfg.cancer)));
    lines.push("Clinical history: mass on imaging.".into());
    lines.push(String::new());
    lines.push("GROSS DESCRIPTION:".into());
    lines.push(format!(
        "The specimen measures {} x {} x {} cm.",
        measure(&mut rng),
        measure(&mut rng),
        measure(&mut rng)
    ));
    lines.push(format!(
        "Representative sections are submitted in cassettes A1-A{}.",
        rng.gen_range(4..20)
    ));
    let gross_end = lines.len();

    let mut tail: Vec<(String, Option<(String, bool)>)> = Vec::new();
    tail.push((String::new(), None));
    tail.push(("FINAL DIAGNOSIS:".into(), None));
    tail.push((
        format!(
            "{}: invasive carcinoma, see below.",
            specimen_text(cfg.cancer)
        ),
        None,
    ));
    let mut synoptic_lines: Vec<(String, Option<(String, bool)>)> = Vec::new();
    let mut comment: Vec<(String, Option<(String, bool)>)> = Vec::new();
    for p in &planted {
        if let Some(t) = &p.text {
            let slot = (t.clone(), Some((p.attribute.clone(), true)));
            if synoptic {
                synoptic_lines.push(slot);
            } else {
                tail.push(slot);
            }
        }
        for e in &p.echoes {
            let slot = (e.clone(), Some((p.attribute.clone(), false)));
            if rng.gen_bool(0.5) {
                tail.push(slot);
            } else {
                comment.push(slot);
            }
        }
    }
    for q in &qualifications {
        comment.push((q.clone(), None));
    }
    for m in &mentions {
        tail.push((m.clone(), None));
    }
    if synoptic {
        let n = rng.gen_range(2..5);
        for d in SYNOPTIC_DISTRACTORS.choose_multiple(&mut rng, n) {
            synoptic_lines.push((d.to_string(), None));
        }
        synoptic_lines.shuffle(&mut rng);
    } else {
        let n = rng.gen_range(1..3);
        for d in SYNOPTIC_DISTRACTORS.choose_multiple(&mut rng, n) {
            tail.push((d.to_string(), None));
        }
    }
    // Diagnosis lines after the block header keep their relative order shuffled.
    tail[3..].shuffle(&mut rng);
    let mut synoptic_range = None;
    let mut stage_line = None;
    let mut all: Vec<(String, Option<(String, bool)>)> = tail;
    if synoptic {
        all.push((String::new(), None));
        let start_marker = all.len();
        all.push(("SYNOPTIC REPORT".into(), None));
        all.extend(synoptic_lines);
        if let Some(s) = &stage {
            all.push((
                format!("Pathologic Stage Classification: {s}"),
                Some(("__stage".into(), false)),
            ));
        }
        all.push(("END OF SYNOPTIC REPORT".into(), None));
        synoptic_range = Some((start_marker, all.len() - 1));
    }
    all.push((String::new(), None));
    all.push(("COMMENT:".into(), None));
    comment.shuffle(&mut rng);
    all.extend(comment);
    if !synoptic {
        if let Some(s) = &stage {
            all.push((
                format!("Pathologic stage: {s}"),
                Some(("__stage".into(), false)),
            ));
        }
    }
    all.push((
        "Electronically signed out by the attending pathologist.".into(),
        None,
    ));

    // Pad the gross description until the report reaches its target length.
    let fixed = lines.len() + all.len();
    let pad = target_lines.saturating_sub(fixed);
    let mut filler = Vec::with_capacity(pad);
    for _ in 0..pad {
        filler.push(lexicon.choose(&mut rng).unwrap().clone());
    }
    lines.splice(gross_end..gross_end, filler);
    let offset = lines.len();
    for (i, (text, tag)) in all.into_iter().enumerate() {
        if let Some((attr, primary)) = tag {
            if attr == "__stage" {
                stage_line = Some(offset + i);
            } else if primary {
                planted_at.insert(attr, offset + i);
            } else {
                echo_at.entry(attr).or_default().push(offset + i);
            }
        }
        lines.push(text);
    }
    let synoptic_range = synoptic_range.map(|(a, b)| (a + offset, b + offset));

    let mut annotations = BTreeMap::new();
    for p in planted {
        let mut idx = BTreeSet::new();
        if let Some(&i) = planted_at.get(&p.attribute) {
            idx.insert(i);
            if cfg.scheme == Scheme::Full {
                idx.extend(echo_at.get(&p.attribute).into_iter().flatten().copied());
            }
        }
        annotations.insert(
            p.attribute.clone(),
            EnrichedAnnotation {
                attribute: p.attribute,
                values: p.values,
                line_indices: idx,
                scheme: cfg.scheme,
            },
        );
    }
    GeneratedDoc {
        doc: LabeledDocument {
            report: Report {
                id: format!("{}-{:04}", cfg.cancer, index),
                cancer: cfg.cancer,
                lines,
            },
            annotations,
        },
        synoptic: synoptic_range,
        stage_line,
    }
}

/// Generate with block positions; deterministic per seed.
pub fn generate_with_layout(cfg: &GenConfig) -> Result<Vec<GeneratedDoc>> {
    let schemas = SchemaSet::default();
    cfg.validate(&schemas)?;
    Ok((0..cfg.num_docs)
        .map(|i| generate_one(cfg, &schemas, i))
        .collect())
}

pub fn generate_corpus(cfg: &GenConfig) -> Result<Vec<LabeledDocument>> {
    Ok(generate_with_layout(cfg)?
        .into_iter()
        .map(|g| g.doc)
        .collect())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GoldSummary {
    pub documents: usize,
    /// attribute → composed label → count
    pub label_counts: BTreeMap<String, BTreeMap<String, usize>>,
    /// attribute → line index → number of highlights there
    pub planted_positions: BTreeMap<String, BTreeMap<usize, usize>>,
}

pub fn describe_gold(corpus: &[LabeledDocument], schemas: &SchemaSet) -> GoldSummary {
    let mut s = GoldSummary {
        documents: corpus.len(),
        ..Default::default()
    };
    for doc in corpus {
        for (attr, ann) in &doc.annotations {
            if let Some(g) = schemas.gold(doc, attr) {
                *s.label_counts
                    .entry(attr.clone())
                    .or_default()
                    .entry(g.label)
                    .or_default() += 1;
            }
            for &i in &ann.line_indices {
                *s.planted_positions
                    .entry(attr.clone())
                    .or_default()
                    .entry(i)
                    .or_default() += 1;
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::validate_against_schema;

    fn small(cancer: Cancer, seed: u64) -> GenConfig {
        GenConfig::for_cancer(cancer, 60, seed)
    }

    #[test]
    fn same_seed_same_corpus() {
        let cfg = small(Cancer::Colon, 4);
        assert_eq!(generate_corpus(&cfg).unwrap(), generate_corpus(&cfg).unwrap());
        let other = generate_corpus(&small(Cancer::Colon, 5)).unwrap();
        assert_ne!(generate_corpus(&cfg).unwrap(), other);
    }

    #[test]
    fn output_is_schema_valid() {
        let schemas = SchemaSet::default();
        for cancer in [Cancer::Colon, Cancer::Kidney] {
            let mut cfg = small(cancer, 1);
            cfg.multi_label_rate = 0.5;
            cfg.qualification_rate = 0.5;
            let docs = generate_corpus(&cfg).unwrap();
            assert!(validate_against_schema(&docs, &schemas).is_clean());
            for d in &docs {
                assert!(d.report.lines.len() >= cfg.lines_per_doc.0);
            }
        }
    }

    #[test]
    fn planted_line_carries_cue_and_form() {
        let mut cfg = small(Cancer::Kidney, 2);
        cfg.rare_phrasing_rate = 0.3;
        for d in generate_corpus(&cfg).unwrap() {
            for (attr, ann) in &d.annotations {
                if ann.is_not_reported() {
                    assert!(ann.line_indices.is_empty());
                    continue;
                }
                let first = *ann.line_indices.iter().next().expect("highlight");
                let line = d.report.lines[first].to_lowercase();
                assert!(cue_phrases(attr).iter().any(|c| line.contains(&c.to_lowercase())), "{line}");
                for v in &ann.values {
                    assert!(
                        surface_forms(attr, v).iter().any(|f| line.contains(&f.to_lowercase())),
                        "{attr}={v}: {line}"
                    );
                }
            }
        }
    }

    #[test]
    fn minimal_prefers_synoptic_and_full_adds_echoes() {
        let mut cfg = small(Cancer::Colon, 3);
        cfg.echo_lines = (2, 3);
        let minimal = generate_with_layout(&cfg).unwrap();
        cfg.scheme = Scheme::Full;
        let full = generate_with_layout(&cfg).unwrap();
        for (m, f) in minimal.iter().zip(&full) {
            assert_eq!(m.doc.report, f.doc.report);
            for (attr, ann) in &m.doc.annotations {
                let full_lines = &f.doc.annotations[attr].line_indices;
                if ann.is_not_reported() {
                    continue;
                }
                assert_eq!(ann.line_indices.len(), 1);
                assert!(ann.line_indices.is_subset(full_lines));
                assert!(full_lines.len() >= 3);
                if let Some((lo, hi)) = m.synoptic {
                    let i = *ann.line_indices.iter().next().unwrap();
                    assert!(lo < i && i < hi);
                }
            }
        }
    }

    #[test]
    fn multi_label_values_follow_schema_order() {
        let schemas = SchemaSet::default();
        let mut cfg = small(Cancer::Colon, 6);
        cfg.multi_label_rate = 1.0;
        let docs = generate_corpus(&cfg).unwrap();
        let multi = docs
            .iter()
            .filter(|d| d.annotations["grade"].values.len() > 1)
            .count();
        assert!(multi > 0);
        for d in &docs {
            let label = schemas.gold(d, "grade").unwrap().label;
            if d.annotations["grade"].values.len() > 1 {
                assert!(label.contains(" and "), "{label}");
            }
        }
    }

    #[test]
    fn label_marginals_track_priors() {
        let schemas = SchemaSet::default();
        let cfg = GenConfig::for_cancer(Cancer::Colon, 2000, 9);
        let summary = describe_gold(&generate_corpus(&cfg).unwrap(), &schemas);
        for a in &cfg.attributes {
            let total: f64 = a.values.values().sum();
            for (v, w) in &a.values {
                let seen = summary.label_counts[&a.name].get(v).copied().unwrap_or(0) as f64 / 2000.0;
                assert!((seen - w / total).abs() < 0.035, "{} {v}: {seen}", a.name);
            }
        }
    }

    #[test]
    fn stage_line_is_inside_report() {
        let mut cfg = small(Cancer::Kidney, 8);
        cfg.stage_probability = 1.0;
        for g in generate_with_layout(&cfg).unwrap() {
            let i = g.stage_line.expect("stage line");
            let (tok, _) = crate::stage::stage_report(&g.doc.report).expect("parsable stage");
            assert!(g.doc.report.lines[i].contains(&tok.token));
        }
    }
}
