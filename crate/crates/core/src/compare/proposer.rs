use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompts::{extract_json_object, render_proposer};
use crate::providers::ChatProvider;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub action_class: String,
    pub variations: Vec<String>,
    pub sub_actions: Vec<String>,
    /// Variation to the sub-actions during which it is visible.
    pub mapping: BTreeMap<String, Vec<String>>,
}

impl Proposal {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(format!("proposal for {:?}: {m}", self.action_class)));
        if !(2..=3).contains(&self.variations.len()) {
            return bad(format!("{} variations, expected 2-3", self.variations.len()));
        }
        if !(2..=4).contains(&self.sub_actions.len()) {
            return bad(format!("{} sub-actions, expected 2-4", self.sub_actions.len()));
        }
        for v in &self.variations {
            if v.trim().is_empty() {
                return bad("empty variation".into());
            }
            match self.mapping.get(v) {
                Some(subs) if !subs.is_empty() => {
                    if let Some(s) = subs.iter().find(|s| !self.sub_actions.contains(s)) {
                        return bad(format!("variation {v:?} maps to unknown sub-action {s:?}"));
                    }
                }
                _ => return bad(format!("variation {v:?} maps to no sub-action")),
            }
        }
        let mut uniq = self.variations.clone();
        uniq.sort();
        uniq.dedup();
        if uniq.len() != self.variations.len() {
            return bad("duplicate variations".into());
        }
        Ok(())
    }

    /// Prose form of the mapping for one variation, used in the differencer
    /// prompt.
    pub fn importance_context(&self, variation: &str) -> String {
        let subs = self.mapping.get(variation).cloned().unwrap_or_default();
        format!(
            "This difference is most visible during these stages of the action: {}.",
            subs.join("; ")
        )
    }
}

#[derive(Deserialize)]
struct RawProposal {
    variations: Vec<String>,
    sub_actions: Vec<String>,
    mapping: BTreeMap<String, Vec<String>>,
}

fn parse_proposal(action_class: &str, reply: &str) -> Result<Proposal> {
    let v = extract_json_object(reply).ok_or_else(|| Error::Validation("no JSON object in proposer reply".into()))?;
    let raw: RawProposal = serde_json::from_value(v)?;
    let p = Proposal {
        action_class: action_class.to_string(),
        variations: raw.variations.into_iter().map(|s| s.trim().to_string()).collect(),
        sub_actions: raw.sub_actions.into_iter().map(|s| s.trim().to_string()).collect(),
        mapping: raw
            .mapping
            .into_iter()
            .map(|(k, v)| (k.trim().to_string(), v.into_iter().map(|s| s.trim().to_string()).collect()))
            .collect(),
    };
    p.validate()?;
    Ok(p)
}

/// One attempt plus one retry.
pub fn propose_differences(action_class: &str, chat: &dyn ChatProvider) -> Result<Proposal> {
    if action_class.trim().is_empty() {
        return Err(Error::Validation("empty action class".into()));
    }
    let prompt = render_proposer(action_class);
    let mut last = None;
    for _ in 0..2 {
        let attempt = chat
            .chat_complete(&prompt)
            .map_err(Error::from)
            .and_then(|r| parse_proposal(action_class, &r));
        match attempt {
            Ok(p) => return Ok(p),
            Err(e) => {
                log::warn!("proposer for {action_class:?}: {e}");
                last = Some(e);
            }
        }
    }
    Err(last.expect("two attempts made"))
}

/// Proposals are requested once per action class.
#[derive(Default)]
pub struct ProposalCache {
    inner: Mutex<BTreeMap<String, std::result::Result<Proposal, String>>>,
}

impl ProposalCache {
    pub fn get_or_propose(&self, action_class: &str, chat: &dyn ChatProvider) -> std::result::Result<Proposal, String> {
        if let Some(hit) = self.inner.lock().unwrap().get(action_class) {
            return hit.clone();
        }
        let got = propose_differences(action_class, chat).map_err(|e| e.to_string());
        self.inner
            .lock()
            .unwrap()
            .entry(action_class.to_string())
            .or_insert(got)
            .clone()
    }

    pub fn snapshot(&self) -> BTreeMap<String, std::result::Result<Proposal, String>> {
        self.inner.lock().unwrap().clone()
    }
}
