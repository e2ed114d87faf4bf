use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SegmentAnnotation;
use crate::text::{content_tokens, verb_and_nouns, StopWords};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Ingredient,
    Utensil,
    /// An action whose nouns matched no ingredient or utensil.
    Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneNode {
    pub name: String,
    pub kind: NodeKind,
}

/// A hyperedge: one action attached to every node it mentions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEdge {
    pub verb: String,
    pub action: String,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub nodes: Vec<SceneNode>,
    pub edges: Vec<SceneEdge>,
}

impl SceneGraph {
    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }
}

/// A node is attached to an action when all of the node's content tokens
/// occur among the action's noun tokens.
pub fn build_scene_graph(segment: &SegmentAnnotation, stop: &StopWords) -> SceneGraph {
    let mut g = SceneGraph::default();
    let mut seen = BTreeSet::new();
    let mut node_tokens: Vec<BTreeSet<String>> = Vec::new();
    let entities = segment
        .ingredients
        .iter()
        .map(|n| (n, NodeKind::Ingredient))
        .chain(segment.utensils.iter().map(|n| (n, NodeKind::Utensil)));
    for (name, kind) in entities {
        let key = name.trim().to_lowercase();
        if key.is_empty() || !seen.insert(key) {
            continue;
        }
        node_tokens.push(content_tokens(name, stop).into_iter().collect());
        g.nodes.push(SceneNode {
            name: name.trim().to_string(),
            kind,
        });
    }
    let entity_count = g.nodes.len();
    for action in &segment.actions {
        let Some((verb, nouns)) = verb_and_nouns(action, stop) else {
            continue;
        };
        let nouns: BTreeSet<String> = nouns.into_iter().collect();
        let attached: Vec<usize> = (0..entity_count)
            .filter(|&i| !node_tokens[i].is_empty() && node_tokens[i].is_subset(&nouns))
            .collect();
        if attached.is_empty() {
            g.nodes.push(SceneNode {
                name: action.trim().to_string(),
                kind: NodeKind::Action,
            });
        } else {
            g.edges.push(SceneEdge {
                verb,
                action: action.trim().to_string(),
                nodes: attached,
            });
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Interval;

    fn seg(ing: &[&str], ut: &[&str], act: &[&str]) -> SegmentAnnotation {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        SegmentAnnotation {
            video_id: "v".into(),
            timestamp: Interval { start: 0, end: 10 },
            title: String::new(),
            url: String::new(),
            ingredients: v(ing),
            utensils: v(ut),
            actions: v(act),
            extras: Default::default(),
        }
    }

    #[test]
    fn single_edge() {
        let g = build_scene_graph(&seg(&["rice"], &[], &["stirring rice"]), &StopWords::default());
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.edges, vec![SceneEdge { verb: "stirring".into(), action: "stirring rice".into(), nodes: vec![0] }]);
    }

    #[test]
    fn empty_segment() {
        assert_eq!(build_scene_graph(&seg(&[], &[], &[]), &StopWords::default()), SceneGraph::default());
    }

    #[test]
    fn example_scene_counts() {
        let s = seg(
            &["Mint Leaves", "Coriander Leaves", "Kesar Milk", "Kewra & Rose Water", "Ghee"],
            &["Large cooking pot or bowl", "Orange cup", "Metal cup"],
            &[
                "Adding mint leaves to rice",
                "Adding coriander leaves to rice",
                "Pouring kesar milk over rice",
                "Pouring kewra and rose water over rice",
                "Pouring ghee over rice",
            ],
        );
        let g = build_scene_graph(&s, &StopWords::default());
        assert_eq!(g.count(NodeKind::Ingredient), 5);
        assert_eq!(g.count(NodeKind::Utensil), 3);
        assert_eq!(g.count(NodeKind::Action), 0);
        assert_eq!(g.edges.len(), 5);
        assert_eq!(g.edges[3].nodes, vec![3]);
    }

    #[test]
    fn unmatched_action_is_isolated() {
        let g = build_scene_graph(&seg(&["rice"], &[], &["waving hello"]), &StopWords::default());
        assert_eq!(g.count(NodeKind::Action), 1);
        assert!(g.edges.is_empty());
    }
}
