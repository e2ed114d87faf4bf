use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::prompts::{extract_json_object, render_differencer, DifferencerFill};
use crate::providers::{FrameRef, VisionProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    A,
    B,
    C,
    D,
}

impl Answer {
    pub fn parse(s: &str) -> Option<Self> {
        let t = s.trim().trim_matches(|c| matches!(c, '(' | ')' | '.' | ' ')).to_ascii_lowercase();
        match t.as_str() {
            "a" => Some(Self::A),
            "b" => Some(Self::B),
            "c" => Some(Self::C),
            "d" => Some(Self::D),
            _ => None,
        }
    }

    /// The answer with clips A and B exchanged.
    pub fn swapped(self) -> Self {
        match self {
            Self::A => Self::B,
            Self::B => Self::A,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffVerdict {
    pub answer: Answer,
    pub confidence: u8,
    pub difference_visible: bool,
    pub explanation: String,
}

impl DiffVerdict {
    pub fn detected(&self) -> bool {
        matches!(self.answer, Answer::A | Answer::B) && self.difference_visible
    }
}

/// Parse a differencer reply. The flag reports whether confidence was clamped.
pub fn parse_verdict(reply: &str) -> Result<(DiffVerdict, bool)> {
    let bad = |m: &str| Error::Validation(format!("differencer reply: {m}"));
    let v = extract_json_object(reply).ok_or_else(|| bad("no JSON object"))?;
    let answer = v
        .get("answer")
        .and_then(Value::as_str)
        .and_then(Answer::parse)
        .ok_or_else(|| bad("answer must be one of a, b, c, d"))?;
    let raw_conf = match v.get("confidence") {
        Some(Value::Number(n)) => n.as_f64(),
        Some(Value::String(s)) => s.trim().parse::<f64>().ok(),
        _ => None,
    }
    .filter(|c| c.is_finite())
    .ok_or_else(|| bad("confidence must be a number"))?;
    let rounded = raw_conf.round();
    let confidence = rounded.clamp(1.0, 5.0);
    let difference_visible = match v.get("difference_visible") {
        Some(Value::Bool(b)) => *b,
        Some(Value::String(s)) if s.eq_ignore_ascii_case("true") => true,
        Some(Value::String(s)) if s.eq_ignore_ascii_case("false") => false,
        _ => return Err(bad("difference_visible must be a boolean")),
    };
    let explanation = v.get("explanation").and_then(Value::as_str).unwrap_or("").trim().to_string();
    Ok((
        DiffVerdict {
            answer,
            confidence: confidence as u8,
            difference_visible,
            explanation,
        },
        confidence != rounded,
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct DifferencerInput<'a> {
    pub action: &'a str,
    pub variation: &'a str,
    pub importance_context: &'a str,
    pub frames_a: &'a [FrameRef],
    pub frames_b: &'a [FrameRef],
}

/// One call plus one retry on provider or parse failure.
pub fn run_differencer(input: &DifferencerInput<'_>, vision: &dyn VisionProvider) -> Result<DiffVerdict> {
    if input.frames_a.is_empty() || input.frames_b.is_empty() {
        return Err(Error::Validation("both clips need localized frames".into()));
    }
    let prompt = render_differencer(&DifferencerFill {
        action: input.action,
        frames_a: input.frames_a.len(),
        frames_b: input.frames_b.len(),
        query: input.variation,
        importance_context: input.importance_context,
    });
    let frames: Vec<FrameRef> = input.frames_a.iter().chain(input.frames_b).cloned().collect();
    let mut last = None;
    for _ in 0..2 {
        let got = vision
            .vision_analyze(&frames, &prompt)
            .map_err(Error::from)
            .and_then(|r| parse_verdict(&r));
        match got {
            Ok((v, clamped)) => {
                if clamped {
                    log::warn!("differencer confidence clamped to {} for {:?}", v.confidence, input.variation);
                }
                return Ok(v);
            }
            Err(e) => {
                log::warn!("differencer for {:?}: {e}", input.variation);
                last = Some(e);
            }
        }
    }
    Err(last.expect("two attempts made"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::mock::ScriptedVision;

    fn frames(n: usize, tag: &str) -> Vec<FrameRef> {
        (0..n).map(|i| FrameRef::Embedding(format!("{tag}{i}"))).collect()
    }

    fn run(reply: &str) -> Result<DiffVerdict> {
        let vision = ScriptedVision::new().on("which video shows more", reply);
        let (a, b) = (frames(2, "a"), frames(2, "b"));
        run_differencer(
            &DifferencerInput {
                action: "Adding ginger-garlic paste",
                variation: "more paste is added",
                importance_context: "ctx",
                frames_a: &a,
                frames_b: &b,
            },
            &vision,
        )
    }

    #[test]
    fn scripted_b() {
        let v = run(r#"{"answer":"b","confidence":4,"difference_visible":true,"explanation":"Video B uses less paste than Video A"}"#)
            .unwrap();
        assert_eq!((v.answer, v.confidence, v.difference_visible), (Answer::B, 4, true));
        assert!(v.detected());
    }

    #[test]
    fn unsure_is_not_detected() {
        let v = run(r#"{"answer":"c","confidence":2,"difference_visible":true,"explanation":""}"#).unwrap();
        assert!(!v.detected());
    }

    #[test]
    fn confidence_clamped() {
        let v = run(r#"{"answer":"a","confidence":9,"difference_visible":false,"explanation":""}"#).unwrap();
        assert_eq!(v.confidence, 5);
        let (_, clamped) = parse_verdict(r#"{"answer":"a","confidence":0,"difference_visible":false}"#).unwrap();
        assert!(clamped);
    }

    #[test]
    fn bad_letter_fails_after_retry() {
        let vision = ScriptedVision::new().on("which video", r#"{"answer":"e","confidence":3,"difference_visible":true}"#);
        let (a, b) = (frames(1, "a"), frames(1, "b"));
        let input = DifferencerInput {
            action: "x",
            variation: "y",
            importance_context: "z",
            frames_a: &a,
            frames_b: &b,
        };
        assert!(run_differencer(&input, &vision).is_err());
        assert_eq!(vision.calls().len(), 2);
    }

    #[test]
    fn prompt_numbers_frames() {
        let vision = ScriptedVision::new().on("which video", r#"{"answer":"c","confidence":3,"difference_visible":false}"#);
        let (a, b) = (frames(2, "a"), frames(3, "b"));
        let input = DifferencerInput {
            action: "x",
            variation: "y",
            importance_context: "z",
            frames_a: &a,
            frames_b: &b,
        };
        run_differencer(&input, &vision).unwrap();
        let (sent, prompt) = &vision.calls()[0];
        assert_eq!(sent.len(), 5);
        assert!(prompt.contains("Video A: Photos 1-2\nVideo B: Photos 3-5"));
    }
}
