//! CHAT container syntax: headers, main tiers, dependent tiers and media
//! bullets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosisGroup {
    Aphasia,
    Control,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub speaker_code: String,
    pub role: String,
    pub diagnosis_group: DiagnosisGroup,
    /// Aphasia Quotient from the `@ID` custom field, when present.
    pub aq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawUtterance {
    pub speaker_code: String,
    /// Main-tier text with media bullets removed.
    pub text: String,
    pub start_ms: Option<u64>,
    pub end_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChatDocument {
    pub participants: Vec<Participant>,
    pub utterances: Vec<RawUtterance>,
}

impl ChatDocument {
    pub fn participant(&self, code: &str) -> Option<&Participant> {
        self.participants.iter().find(|p| p.speaker_code == code)
    }
}

const BULLET: char = '\u{2022}';
const NAK: char = '\u{15}';

/// Removes media bullets (`•start_end•` or the `\x15` form) from `text` and
/// returns the last time span found.
fn strip_media(text: &str) -> (String, Option<(u64, u64)>) {
    let mut out = String::with_capacity(text.len());
    let mut span = None;
    let mut rest = text;
    while let Some(open) = rest.find([BULLET, NAK]) {
        let delim = rest[open..].chars().next().expect("found char");
        out.push_str(&rest[..open]);
        let after = &rest[open + delim.len_utf8()..];
        match after.find(delim) {
            Some(close) => {
                if let Some(s) = parse_span(&after[..close]) {
                    span = Some(s);
                }
                rest = &after[close + delim.len_utf8()..];
            }
            None => {
                rest = after;
            }
        }
    }
    out.push_str(rest);
    (out, span)
}

/// `start_end`, optionally prefixed by a media name (`%snd:"file"_1_2`).
fn parse_span(s: &str) -> Option<(u64, u64)> {
    let mut parts = s.rsplit('_');
    let end = parts.next()?.trim().parse().ok()?;
    let start = parts.next()?.trim().parse().ok()?;
    Some((start, end))
}

fn parse_participants(body: &str, line: usize) -> Result<Vec<Participant>> {
    let mut out = Vec::new();
    for entry in body.split(',') {
        let words: Vec<&str> = entry.split_whitespace().collect();
        let (code, role) = match words.as_slice() {
            [] => continue,
            [code] => (*code, ""),
            [code, .., role] => (*code, *role),
        };
        if !code.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(Error::MalformedHeader(format!(
                "line {line}: bad speaker code `{code}`"
            )));
        }
        out.push(Participant {
            speaker_code: code.to_string(),
            role: role.to_string(),
            diagnosis_group: DiagnosisGroup::Unknown,
            aq: None,
        });
    }
    if out.is_empty() {
        return Err(Error::MalformedHeader(format!(
            "line {line}: empty @Participants"
        )));
    }
    Ok(out)
}

/// `language|corpus|code|age|sex|group|SES|role|education|custom|`
fn apply_id(participants: &mut [Participant], body: &str) {
    let fields: Vec<&str> = body.split('|').map(str::trim).collect();
    let Some(code) = fields.get(2) else {
        return;
    };
    let Some(p) = participants.iter_mut().find(|p| p.speaker_code == *code) else {
        return;
    };
    if let Some(group) = fields.get(5) {
        p.diagnosis_group = if group.is_empty() {
            DiagnosisGroup::Unknown
        } else if group.eq_ignore_ascii_case("control") {
            DiagnosisGroup::Control
        } else {
            DiagnosisGroup::Aphasia
        };
    }
    if let Some(role) = fields.get(7).filter(|r| !r.is_empty()) {
        p.role = role.to_string();
    }
    p.aq = fields.get(9).and_then(|s| s.parse::<f64>().ok());
}

enum Tier {
    None,
    Main,
    Dependent,
}

pub fn parse_chat(contents: &str) -> Result<ChatDocument> {
    let mut participants: Option<Vec<Participant>> = None;
    let mut utterances: Vec<RawUtterance> = Vec::new();
    let mut last = Tier::None;

    for (idx, line) in contents.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.starts_with('\t') {
            match last {
                Tier::Main => {
                    let u = utterances.last_mut().expect("main tier exists");
                    u.text.push(' ');
                    u.text.push_str(line.trim());
                }
                Tier::Dependent | Tier::None => {}
            }
            continue;
        }
        if let Some(header) = line.strip_prefix('@') {
            last = Tier::None;
            let (key, body) = header.split_once(':').unwrap_or((header, ""));
            match key.trim() {
                "Participants" => {
                    participants = Some(parse_participants(body, lineno)?);
                }
                "ID" => {
                    let ps = participants.as_mut().ok_or_else(|| {
                        Error::MalformedHeader(format!("line {lineno}: @ID before @Participants"))
                    })?;
                    apply_id(ps, body);
                }
                _ => {}
            }
        } else if let Some(main) = line.strip_prefix('*') {
            let (code, text) = main.split_once(':').ok_or_else(|| {
                Error::MalformedHeader(format!("line {lineno}: main tier without `:`"))
            })?;
            let ps = participants.as_ref().ok_or_else(|| {
                Error::MalformedHeader(format!("line {lineno}: main tier before @Participants"))
            })?;
            let code = code.trim();
            if !ps.iter().any(|p| p.speaker_code == code) {
                return Err(Error::OrphanTier {
                    line: lineno,
                    speaker: code.to_string(),
                });
            }
            utterances.push(RawUtterance {
                speaker_code: code.to_string(),
                text: text.trim().to_string(),
                start_ms: None,
                end_ms: None,
            });
            last = Tier::Main;
        } else if line.starts_with('%') {
            last = Tier::Dependent;
        } else if !line.trim().is_empty() {
            last = Tier::None;
        }
    }

    let participants =
        participants.ok_or_else(|| Error::MalformedHeader("missing @Participants".into()))?;

    for u in &mut utterances {
        let (text, span) = strip_media(&u.text);
        u.text = text.split_whitespace().collect::<Vec<_>>().join(" ");
        match span {
            Some((s, e)) if e > s => {
                u.start_ms = Some(s);
                u.end_ms = Some(e);
            }
            Some((s, e)) => log::warn!("ignoring empty media span {s}_{e}"),
            None => {}
        }
    }

    Ok(ChatDocument {
        participants,
        utterances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_utterance_with_bullet() {
        let doc =
            parse_chat("@Participants: PAR Participant\n*PAR: hello . \u{2022}100_900\u{2022}")
                .unwrap();
        assert_eq!(doc.utterances.len(), 1);
        let u = &doc.utterances[0];
        assert_eq!(u.speaker_code, "PAR");
        assert_eq!(u.text, "hello .");
        assert_eq!((u.start_ms, u.end_ms), (Some(100), Some(900)));
    }

    #[test]
    fn ascii_bullet_fallback() {
        let doc =
            parse_chat("@Participants:\tPAR Participant\n*PAR:\thi . \x15250_1200\x15\n").unwrap();
        assert_eq!(doc.utterances[0].start_ms, Some(250));
        assert_eq!(doc.utterances[0].end_ms, Some(1200));
        assert_eq!(doc.utterances[0].text, "hi .");
    }

    #[test]
    fn header_only_file_has_no_utterances() {
        let doc =
            parse_chat("@UTF8\n@Begin\n@Participants: PAR Participant, INV Investigator\n@End\n")
                .unwrap();
        assert!(doc.utterances.is_empty());
        assert_eq!(doc.participants.len(), 2);
    }

    #[test]
    fn undeclared_speaker_is_orphan() {
        let err = parse_chat("@Participants: PAR Participant\n*XYZ: hi .").unwrap_err();
        assert!(matches!(err, Error::OrphanTier { speaker, line: 2 } if speaker == "XYZ"));
    }

    #[test]
    fn missing_participants_is_malformed() {
        assert!(matches!(
            parse_chat("@Begin\n@End\n"),
            Err(Error::MalformedHeader(_))
        ));
        assert!(matches!(
            parse_chat("*PAR: hi ."),
            Err(Error::MalformedHeader(_))
        ));
    }

    #[test]
    fn id_lines_set_group_and_aq() {
        let doc = parse_chat(
            "@Participants: PAR Participant, INV Investigator\n\
             @ID: eng|aphasia|PAR|58;|male|Broca||Participant||64.6|\n\
             @ID: eng|aphasia|INV|||Control||Investigator|||\n",
        )
        .unwrap();
        let par = doc.participant("PAR").unwrap();
        assert_eq!(par.diagnosis_group, DiagnosisGroup::Aphasia);
        assert_eq!(par.aq, Some(64.6));
        assert_eq!(
            doc.participant("INV").unwrap().diagnosis_group,
            DiagnosisGroup::Control
        );
    }

    #[test]
    fn continuation_and_dependent_tiers() {
        let doc = parse_chat(
            "@Participants: PAR Participant\n\
             *PAR:\tI went\n\
             \tto the store . \u{2022}0_1500\u{2022}\n\
             %mor:\tpro|I v|go&PAST\n\
             \tprep|to\n\
             *PAR:\tokay .\n",
        )
        .unwrap();
        assert_eq!(doc.utterances.len(), 2);
        assert_eq!(doc.utterances[0].text, "I went to the store .");
        assert_eq!(doc.utterances[0].end_ms, Some(1500));
        assert_eq!(doc.utterances[1].text, "okay .");
        assert_eq!(doc.utterances[1].start_ms, None);
    }
}
