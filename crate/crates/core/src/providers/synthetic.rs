//! Deterministic stand-ins for the chat and vision models so the whole
//! pipeline can run offline. Replies are pure functions of the prompt (and
//! frame references), shaped like what a real model returns.

use serde_json::json;
use sha2::{Digest, Sha256};

use super::{validate_prompt, ChatProvider, FrameRef, ProviderError, VisionProvider};
use crate::prompts;

fn h64(parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update((p.len() as u64).to_le_bytes());
        hasher.update(p.as_bytes());
    }
    let d = hasher.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

fn between<'a>(s: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let i = s.find(open)? + open.len();
    let j = s[i..].find(close)? + i;
    Some(&s[i..j])
}

/// Text between the `n`-th pair of triple quotes.
fn quoted_block(s: &str, n: usize) -> &str {
    s.split("\"\"\"").nth(2 * n + 1).map(str::trim).unwrap_or("")
}

const VARIATION_POOL: [&str; 8] = [
    "more oil is used",
    "the ingredients are added in larger quantities",
    "the mixture is stirred more vigorously",
    "the heat is visibly higher",
    "a wider vessel is used",
    "the paste is darker in colour",
    "the ingredients are added more gradually",
    "more garnish is visible",
];

const STAGE_POOL: [&str; 6] = [
    "preparing the ingredients",
    "adding to the vessel",
    "mixing",
    "cooking on heat",
    "checking the texture",
    "finishing",
];

#[derive(Debug, Clone, Default)]
pub struct SyntheticChat;

impl SyntheticChat {
    fn proposal(action: &str) -> String {
        let h = h64(&["proposal", action]);
        let n_var = 2 + (h % 2) as usize;
        let n_sub = 2 + ((h >> 8) % 3) as usize;
        let start = ((h >> 16) % VARIATION_POOL.len() as u64) as usize;
        let variations: Vec<&str> = (0..n_var)
            .map(|i| VARIATION_POOL[(start + i) % VARIATION_POOL.len()])
            .collect();
        let s0 = ((h >> 24) % (STAGE_POOL.len() - n_sub + 1) as u64) as usize;
        let subs: Vec<&str> = STAGE_POOL[s0..s0 + n_sub].to_vec();
        let mut mapping = serde_json::Map::new();
        for (i, v) in variations.iter().enumerate() {
            let a = subs[i % n_sub];
            let b = subs[(i + 1) % n_sub];
            mapping.insert(v.to_string(), json!([a, b]));
        }
        json!({"variations": variations, "sub_actions": subs, "mapping": mapping}).to_string()
    }

    fn easy(prompt: &str) -> String {
        let desc = quoted_block(prompt, 0);
        let pick = |label: &str| {
            desc.lines()
                .find_map(|l| l.strip_prefix(label))
                .map(|s| s.trim().trim_end_matches('.').to_string())
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| "none visible".into())
        };
        format!(
            "1. {}\n2. {}\n3. {}",
            pick("Ingredients:"),
            pick("Utensils:"),
            pick("Actions:")
        )
    }

    fn qa_json(summary: &str, seed: &str, templates: &[(&str, &str)], count: usize) -> String {
        let h = h64(&["qa", seed]);
        let words: Vec<&str> = summary.split_whitespace().collect();
        let pairs: Vec<_> = (0..count)
            .map(|i| {
                let (q, _) = templates[(h as usize + 3 * i) % templates.len()];
                let start = if words.is_empty() { 0 } else { (h as usize + 7 * i) % words.len() };
                let len = 6 + (h as usize >> (4 * i)) % 12;
                let answer: Vec<&str> = words.iter().cycle().skip(start).take(len).copied().collect();
                json!({"Q": q, "A": answer.join(" ")})
            })
            .collect();
        let first: String = words.iter().take(40).copied().collect::<Vec<_>>().join(" ");
        json!({"Summary": first, "QA_pairs": pairs}).to_string()
    }
}

impl ChatProvider for SyntheticChat {
    fn chat_complete(&self, prompt: &str) -> Result<String, ProviderError> {
        validate_prompt(prompt)?;
        if prompt.contains(prompts::CLUSTER_DECISION_MARKER) {
            return Ok(json!({"should_split": false}).to_string());
        }
        if prompt.starts_with(prompts::PROPOSER_MARKER) {
            let action = between(prompt, "Action: \"", "\"").unwrap_or("");
            return Ok(Self::proposal(action));
        }
        if prompt.starts_with("Video segment description:") {
            return Ok(Self::easy(prompt));
        }
        if prompt.starts_with(prompts::VIDEO_SUMMARY_MARKER) {
            let chunks: Vec<&str> = quoted_block(prompt, 0)
                .lines()
                .filter(|l| !l.starts_with("CHUNK:") && !l.trim().is_empty())
                .collect();
            return Ok(format!("The cook works through the recipe. {}", chunks.join(" ")));
        }
        if prompt.starts_with(prompts::MULTIMODAL_SUMMARY_MARKER) {
            let desc = quoted_block(prompt, 0);
            let transcript = quoted_block(prompt, 1);
            let spoken: String = transcript.split_whitespace().take(30).collect::<Vec<_>>().join(" ");
            return Ok(format!("{desc} The narrator says: {spoken}"));
        }
        if prompt.contains(prompts::MEDIUM_MARKER) {
            let desc = quoted_block(prompt, 1);
            let n = 3 + (h64(&[desc]) % 4) as usize;
            return Ok(Self::qa_json(desc, prompt, &prompts::MEDIUM_TEMPLATES, n));
        }
        if prompt.contains(prompts::HARD_MARKER) {
            let summaries = quoted_block(prompt, 1);
            let n = 2 + (h64(&[summaries]) % 3) as usize;
            return Ok(Self::qa_json(summaries, prompt, &prompts::HARD_TEMPLATES, n));
        }
        Err(ProviderError::Unscripted(prompt.chars().take(60).collect()))
    }
}

/// `yes_per_mille` sets how often verification answers "yes".
#[derive(Debug, Clone)]
pub struct SyntheticVision {
    pub yes_per_mille: u64,
}

impl Default for SyntheticVision {
    fn default() -> Self {
        Self { yes_per_mille: 780 }
    }
}

fn frame_key(frames: &[FrameRef]) -> String {
    frames
        .iter()
        .map(|f| match f {
            FrameRef::File(p) => p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            FrameRef::Embedding(id) => id.clone(),
        })
        .collect::<Vec<_>>()
        .join(",")
}

impl VisionProvider for SyntheticVision {
    fn vision_analyze(&self, frames: &[FrameRef], prompt: &str) -> Result<String, ProviderError> {
        validate_prompt(prompt)?;
        if frames.is_empty() {
            return Err(ProviderError::Input("vision call needs at least one frame".into()));
        }
        // Only file names feed the hash so relocated workspaces answer alike.
        let key = frame_key(frames);
        if prompt.contains("The action to verify is:") {
            let h = h64(&["verify", prompt, &key]);
            return Ok(if h % 1000 < self.yes_per_mille { "Yes." } else { "no" }.into());
        }
        if prompt.contains(prompts::DIFFERENCER_MARKER) {
            let h = h64(&["diff", prompt, &key]);
            let answer = ["a", "b", "c", "c", "c", "d"][(h % 6) as usize];
            let confidence = 1 + (h >> 8) % 5;
            let visible = matches!(answer, "a" | "b") && !(h >> 16).is_multiple_of(4);
            return Ok(json!({
                "answer": answer,
                "confidence": confidence,
                "difference_visible": visible,
                "explanation": format!("Frames compared for option {answer}."),
            })
            .to_string());
        }
        Err(ProviderError::Unscripted(prompt.chars().take(60).collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proposals_respect_bounds() {
        for a in ["stirring", "adding ginger-garlic paste", "frying onions", "x"] {
            let reply = SyntheticChat.chat_complete(&prompts::render_proposer(a)).unwrap();
            let v: serde_json::Value = serde_json::from_str(&reply).unwrap();
            let nv = v["variations"].as_array().unwrap().len();
            let ns = v["sub_actions"].as_array().unwrap().len();
            assert!((2..=3).contains(&nv) && (2..=4).contains(&ns), "{reply}");
        }
    }

    #[test]
    fn easy_reply_has_three_lines() {
        let p = prompts::render_easy("Ingredients: rice, ghee.\nUtensils: pot.\nActions: stirring rice.");
        assert_eq!(SyntheticChat.chat_complete(&p).unwrap(), "1. rice, ghee\n2. pot\n3. stirring rice");
    }

    #[test]
    fn vision_is_deterministic() {
        let frames = vec![FrameRef::Embedding("v1:0".into())];
        let p = prompts::render_verify("stirring rice");
        let a = SyntheticVision::default().vision_analyze(&frames, &p).unwrap();
        let b = SyntheticVision::default().vision_analyze(&frames, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn medium_reply_parses() {
        let p = prompts::render_medium("The cook fries onions in ghee until golden.", "hello");
        let v = prompts::extract_json_object(&SyntheticChat.chat_complete(&p).unwrap()).unwrap();
        assert!(v["Summary"].is_string());
        assert!(v["QA_pairs"].as_array().unwrap().len() >= 3);
    }
}
