//! TNM stage tokens such as `pT2aN0M0`: extraction from raw text and parsing
//! into T, N and M substages.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Report;
use crate::error::{Error, Result};

const SUB: &str = "(?:[0-9][a-d]?|X|is)";

fn scan_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(&format!(r"\b[ycr]*p?T{SUB}(?:N{SUB})?(?:M{SUB})?\b")).expect("valid stage regex")
    })
}

fn parse_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(&format!(r"^([ycr]*)(p?)T({SUB})(?:N({SUB}))?(?:M({SUB}))?$")).expect("valid stage regex")
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TnmStage {
    pub prefixes: Vec<char>,
    pub t: Option<String>,
    pub n: Option<String>,
    pub m: Option<String>,
}

impl TnmStage {
    /// The token this stage was parsed from.
    pub fn compose(&self) -> String {
        let mut s: String = self.prefixes.iter().collect();
        for (marker, v) in [('T', &self.t), ('N', &self.n), ('M', &self.m)] {
            if let Some(v) = v {
                s.push(marker);
                s.push_str(v);
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageToken {
    pub token: String,
    /// Offset in characters from the start of the text.
    pub offset: usize,
}

/// Every maximal grammar match in document order. Case-sensitive.
pub fn extract_stage_tokens(raw_text: &str) -> Vec<StageToken> {
    let mut chars_before = 0;
    let mut last_byte = 0;
    scan_regex()
        .find_iter(raw_text)
        .map(|m| {
            chars_before += raw_text[last_byte..m.start()].chars().count();
            last_byte = m.start();
            StageToken {
                token: m.as_str().to_string(),
                offset: chars_before,
            }
        })
        .collect()
}

pub fn parse_tnm(token: &str) -> Result<TnmStage> {
    let caps = parse_regex()
        .captures(token)
        .ok_or_else(|| Error::InvalidStage(token.to_string()))?;
    let mut prefixes: Vec<char> = caps[1].chars().collect();
    if !caps[2].is_empty() {
        prefixes.push('p');
    }
    let mut seen = prefixes.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != prefixes.len() {
        return Err(Error::InvalidStage(token.to_string()));
    }
    let group = |i: usize| caps.get(i).map(|m| m.as_str().to_string());
    Ok(TnmStage {
        prefixes,
        t: group(3),
        n: group(4),
        m: group(5),
    })
}

/// Parse of the first stage token in the report, if any.
pub fn stage_report(report: &Report) -> Option<(StageToken, TnmStage)> {
    let text = report.lines.join("\n");
    extract_stage_tokens(&text)
        .into_iter()
        .find_map(|t| parse_tnm(&t.token).ok().map(|s| (t, s)))
}

pub const T_VALUES: [&str; 14] = ["0", "1", "1a", "1b", "2", "2a", "2b", "3", "3a", "3b", "4", "4a", "4b", "X"];
pub const N_VALUES: [&str; 9] = ["0", "1", "1a", "1b", "2", "2a", "2b", "3", "X"];
pub const M_VALUES: [Option<&str>; 6] = [Some("0"), Some("1"), Some("1a"), Some("1b"), Some("X"), None];

/// Prefix strings: ordered subsets of `y c r`, each with and without `p`.
pub fn prefix_combinations() -> Vec<String> {
    let mut out = Vec::with_capacity(16);
    for mask in 0..8u8 {
        let base: String = ['y', 'c', 'r']
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, c)| *c)
            .collect();
        out.push(base.clone());
        out.push(format!("{base}p"));
    }
    out
}

/// Every token of the enumeration grid: prefixes × T × N × M.
pub fn enumerate_tokens() -> Vec<String> {
    let mut out = Vec::new();
    for p in prefix_combinations() {
        for t in T_VALUES {
            for n in N_VALUES {
                for m in M_VALUES {
                    let mut s = format!("{p}T{t}N{n}");
                    if let Some(m) = m {
                        s.push('M');
                        s.push_str(m);
                    }
                    out.push(s);
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub id: String,
    pub token: Option<String>,
    pub prefixes: Vec<char>,
    pub t: Option<String>,
    pub n: Option<String>,
    pub m: Option<String>,
}

impl StageRecord {
    pub fn for_report(report: &Report) -> Self {
        match stage_report(report) {
            Some((tok, s)) => StageRecord {
                id: report.id.clone(),
                token: Some(tok.token),
                prefixes: s.prefixes,
                t: s.t,
                n: s.n,
                m: s.m,
            },
            None => StageRecord {
                id: report.id.clone(),
                token: None,
                prefixes: Vec::new(),
                t: None,
                n: None,
                m: None,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Cancer;

    fn s(v: &str) -> Option<String> {
        Some(v.to_string())
    }

    #[test]
    fn worked_examples() {
        let st = parse_tnm("pT2aN0M0").unwrap();
        assert_eq!(st, TnmStage { prefixes: vec!['p'], t: s("2a"), n: s("0"), m: s("0") });
        let st = parse_tnm("pT2N0").unwrap();
        assert_eq!((st.t, st.n, st.m), (s("2"), s("0"), None));
        let st = parse_tnm("pTXNXMX").unwrap();
        assert_eq!((st.t, st.n, st.m), (s("X"), s("X"), s("X")));
        assert_eq!(parse_tnm("ypT3N1bMX").unwrap().prefixes, vec!['y', 'p']);
        assert_eq!(parse_tnm("pTis").unwrap().t, s("is"));
    }

    #[test]
    fn rejects_bad_tokens() {
        for bad in ["", "T", "pN0M0", "pt2N0", "pT5eN0", "yypT1", "pT2N0M0x", "ppT1"] {
            assert!(matches!(parse_tnm(bad), Err(Error::InvalidStage(_))), "{bad}");
        }
    }

    #[test]
    fn extraction_offsets_and_order() {
        let text = "Stage é pT2aN0M0 was noted; ypT3N1bMX later.";
        let toks = extract_stage_tokens(text);
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[0].token, "pT2aN0M0");
        assert_eq!(toks[0].offset, 8);
        assert_eq!(toks[1].token, "ypT3N1bMX");
        assert_eq!(text.chars().skip(toks[1].offset).take(9).collect::<String>(), "ypT3N1bMX");
        assert!(extract_stage_tokens("Tumor is present. T-cells. The pt2 token.").is_empty());
    }

    #[test]
    fn report_uses_first_token() {
        let mut r = Report {
            id: "r".into(),
            cancer: Cancer::Kidney,
            lines: vec!["no stage".into()],
        };
        assert!(stage_report(&r).is_none());
        r.lines = vec!["x".into(), "stage pT1bNX here".into(), "and pT3N2".into()];
        let (tok, st) = stage_report(&r).unwrap();
        assert_eq!(tok.token, "pT1bNX");
        assert_eq!(st.t, s("1b"));
        let rec = StageRecord::for_report(&r);
        assert_eq!(rec.token.as_deref(), Some("pT1bNX"));
    }

    #[test]
    fn enumeration_size() {
        assert_eq!(prefix_combinations().len(), 16);
        assert_eq!(enumerate_tokens().len(), 16 * 14 * 9 * 6);
    }
}
