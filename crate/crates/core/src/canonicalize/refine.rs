use serde::{Deserialize, Serialize};

use super::{cluster_actions, ActionCluster, ClusteringConfig};
use crate::error::{Error, Result};
use crate::prompts::{extract_json_object, render_cluster_decision};
use crate::providers::{ChatProvider, EmbeddingProvider};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RefineOutcome {
    Keep,
    Split { clusters: Vec<ActionCluster> },
    /// The model never produced a usable answer; the cluster stays intact.
    Error { reason: String },
}

fn parse_decision(reply: &str) -> Option<bool> {
    extract_json_object(reply)?.get("should_split")?.as_bool()
}

/// Ask whether a cluster should split; on yes, recluster its phrases with
/// half the distance threshold. Unparseable replies get one retry.
pub fn refine_cluster(
    cluster: &ActionCluster,
    chat: &dyn ChatProvider,
    embedder: &dyn EmbeddingProvider,
    cfg: &ClusteringConfig,
) -> Result<RefineOutcome> {
    if cluster.phrases.len() < 2 {
        return Err(Error::Validation(format!(
            "cluster {:?} needs at least two phrases to refine",
            cluster.canonical_label
        )));
    }
    let prompt = render_cluster_decision(&cluster.phrases);
    let mut last = String::new();
    let mut decision = None;
    for _ in 0..2 {
        match chat.chat_complete(&prompt) {
            Ok(reply) => {
                decision = parse_decision(&reply);
                if decision.is_some() {
                    break;
                }
                last = format!("unparseable reply: {}", reply.chars().take(120).collect::<String>());
            }
            Err(e) => last = e.to_string(),
        }
        log::warn!("cluster {:?}: {last}", cluster.canonical_label);
    }
    match decision {
        None => Ok(RefineOutcome::Error { reason: last }),
        Some(false) => Ok(RefineOutcome::Keep),
        Some(true) => {
            let half = ClusteringConfig {
                distance_threshold: cfg.distance_threshold / 2.0,
                ..cfg.clone()
            };
            Ok(RefineOutcome::Split {
                clusters: cluster_actions(&cluster.phrases, embedder, &half)?,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::mock::{ScriptedChat, TableEmbedder};

    fn cluster(phrases: &[&str]) -> ActionCluster {
        ActionCluster {
            canonical_label: phrases[0].into(),
            phrases: phrases.iter().map(|s| s.to_string()).collect(),
            clips: vec![],
        }
    }

    #[test]
    fn keep_when_model_says_no() {
        let chat = ScriptedChat::new().on("biryani recipe classifier", r#"{"should_split": false}"#);
        let out = refine_cluster(&cluster(&["a", "b"]), &chat, &TableEmbedder::new(), &Default::default()).unwrap();
        assert_eq!(out, RefineOutcome::Keep);
    }

    #[test]
    fn split_uses_half_threshold() {
        // Cosine distance within {a,b} and {c,d} is ~0.02; across is ~0.2.
        // At 0.3 everything merges; at 0.15 the two pairs stay apart.
        let t = TableEmbedder::new()
            .with("a", &[1.0, 0.2, 0.0])
            .with("b", &[1.0, 0.0, 0.0])
            .with("c", &[1.0, 0.6, 0.5])
            .with("d", &[1.0, 0.8, 0.5]);
        let all = cluster_actions(&["a".into(), "b".into(), "c".into(), "d".into()], &t, &Default::default()).unwrap();
        assert_eq!(all.len(), 1);
        let chat = ScriptedChat::new().on("should_split", "```json\n{\"should_split\": true,\n}\n```");
        match refine_cluster(&all[0], &chat, &t, &Default::default()).unwrap() {
            RefineOutcome::Split { clusters } => {
                let parts: Vec<_> = clusters.iter().map(|c| c.phrases.join("")).collect();
                assert_eq!(parts, ["ab", "cd"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn prose_reply_is_error_after_retry() {
        let chat = ScriptedChat::new().on("should_split", "I think they are similar.");
        let c = cluster(&["a", "b"]);
        match refine_cluster(&c, &chat, &TableEmbedder::new(), &Default::default()).unwrap() {
            RefineOutcome::Error { .. } => {}
            other => panic!("{other:?}"),
        }
        assert_eq!(chat.calls(), 2);
    }
}
