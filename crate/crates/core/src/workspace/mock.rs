//! Generator for the small synthetic workspace used by the CLI demo and the
//! end-to-end tests. Everything derives from a fixed-seed ChaCha stream.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{to_pretty, write_bytes, WorkspaceConfig};
use crate::corpus::{format_timestamp, FrameEntry, FrameManifest};
use crate::error::{Error, Result};
use crate::providers::mock::HashedEmbedder;

pub const MOCK_TYPES: [&str; 6] = [
    "ambur_biryani",
    "dindigul_biryani",
    "hyderabadi_biryani",
    "kolkata_biryani",
    "malabar_biryani",
    "thalassery_biryani",
];

pub const VIDEOS_PER_TYPE: usize = 2;
const SEGMENT_S: u32 = 10;
const FRAME_EVERY_S: u32 = 2;
const EMBED_DIM: usize = 64;

struct StepSpec {
    id: &'static str,
    chapter: &'static str,
    title: &'static str,
    description: &'static str,
    actions: [&'static str; 3],
    ingredients: &'static [&'static str],
    utensils: &'static [&'static str],
    colour: [u8; 3],
}

const STEPS: [StepSpec; 8] = [
    StepSpec {
        id: "s1",
        chapter: "Pre-prep",
        title: "Wash and soak the rice",
        description: "Rinse basmati rice until the water runs clear, then soak it.",
        actions: ["washing rice", "rinsing rice", "soaking rice"],
        ingredients: &["rice", "water"],
        utensils: &["bowl"],
        colour: [230, 230, 210],
    },
    StepSpec {
        id: "s2",
        chapter: "Marination",
        title: "Marinate the chicken",
        description: "Coat chicken with yogurt, chilli and spices.",
        actions: ["marinating chicken", "mixing chicken marinade", "coating chicken with spices"],
        ingredients: &["chicken", "yogurt", "spices"],
        utensils: &["bowl"],
        colour: [220, 120, 80],
    },
    StepSpec {
        id: "s3",
        chapter: "Cooking",
        title: "Fry the onions",
        description: "Fry sliced onions in ghee until golden.",
        actions: ["frying onions", "stirring onions", "slicing onions"],
        ingredients: &["onions", "ghee"],
        utensils: &["pan"],
        colour: [200, 150, 60],
    },
    StepSpec {
        id: "s4",
        chapter: "Cooking",
        title: "Cook the chicken masala",
        description: "Add the chicken to the onions and simmer the masala.",
        actions: ["cooking chicken masala", "stirring chicken masala", "simmering masala gravy"],
        ingredients: &["chicken", "masala"],
        utensils: &["pot"],
        colour: [170, 70, 40],
    },
    StepSpec {
        id: "s5",
        chapter: "Layering",
        title: "Layer rice over the masala",
        description: "Spread parboiled rice over the masala and drizzle saffron milk.",
        actions: ["layering rice", "spreading rice", "adding saffron milk"],
        ingredients: &["rice", "saffron"],
        utensils: &["pot"],
        colour: [240, 200, 90],
    },
    StepSpec {
        id: "s6",
        chapter: "Dum",
        title: "Seal the pot and cook on dum",
        description: "Seal the lid with dough and cook on low heat.",
        actions: ["sealing pot with dough", "cooking on dum", "covering pot lid"],
        ingredients: &["dough"],
        utensils: &["pot", "lid"],
        colour: [110, 90, 80],
    },
    StepSpec {
        id: "s7",
        chapter: "Serving",
        title: "Garnish and serve",
        description: "Garnish the biryani with mint and fried onions and serve.",
        actions: ["garnishing biryani", "serving biryani", "plating biryani"],
        ingredients: &["biryani", "mint"],
        utensils: &["plate"],
        colour: [90, 170, 90],
    },
    StepSpec {
        id: "misc",
        chapter: "Other",
        title: "Miscellaneous",
        description: "",
        actions: ["talking to camera", "showing ingredients", "tasting food"],
        ingredients: &[],
        utensils: &[],
        colour: [128, 128, 128],
    },
];

/// 16x9 24-bit BMP of one colour with a brightness ramp keyed by `shade`.
fn bmp(colour: [u8; 3], shade: u8) -> Vec<u8> {
    const W: u32 = 16;
    const H: u32 = 9;
    let row = (W * 3).div_ceil(4) * 4;
    let size = 54 + row * H;
    let mut b = Vec::with_capacity(size as usize);
    b.extend_from_slice(b"BM");
    b.extend_from_slice(&size.to_le_bytes());
    b.extend_from_slice(&[0; 4]);
    b.extend_from_slice(&54u32.to_le_bytes());
    b.extend_from_slice(&40u32.to_le_bytes());
    b.extend_from_slice(&(W as i32).to_le_bytes());
    b.extend_from_slice(&(H as i32).to_le_bytes());
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&24u16.to_le_bytes());
    b.extend_from_slice(&[0; 4]);
    b.extend_from_slice(&(row * H).to_le_bytes());
    b.extend_from_slice(&[0; 16]);
    for y in 0..H {
        for x in 0..W {
            let k = ((x + y) as u16 * shade as u16 / 24) as u8;
            let [r, g, bl] = colour.map(|c| c.saturating_sub(k));
            b.extend_from_slice(&[bl, g, r]);
        }
        b.resize(b.len() + (row - W * 3) as usize, 0);
    }
    b
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    write_bytes(path, &to_pretty(v)?)
}

/// The config written next to the mock corpus.
pub fn mock_config() -> WorkspaceConfig {
    let mut cfg = WorkspaceConfig {
        categories: MOCK_TYPES.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    };
    cfg.providers.embedding.mock_dim = EMBED_DIM;
    cfg.compare.max_pairs = Some(8);
    cfg.compare.max_classes = Some(6);
    cfg.qa.easy_segments_per_video = 2;
    cfg.qa.hard_combos = BTreeMap::from([(2, 3), (3, 2), (4, 1), (5, 1)]);
    cfg
}

/// Populate `root` with a 12-video synthetic corpus and its config. Refuses
/// to write into a directory that already holds a workspace.
pub fn init_mock(root: &Path, seed: u64) -> Result<Value> {
    if root.join("procflow.json").exists() || root.join("annotations").exists() {
        return Err(Error::Validation(format!("{} already contains a workspace", root.display())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embedder = HashedEmbedder::new(EMBED_DIM);
    let mut videos = Vec::new();
    let mut segment_total = 0usize;

    for btype in MOCK_TYPES {
        let short = btype.trim_end_matches("_biryani");
        let recipe = json!({
            "biryani_type": btype,
            "chapters": chapters(),
            "steps": STEPS.iter().map(|s| {
                let mut v = json!({"id": s.id, "title": s.title, "description": s.description});
                if s.id == "misc" {
                    v["misc"] = json!(true);
                }
                v
            }).collect::<Vec<_>>(),
        });
        write_json(&root.join(format!("recipes/{btype}.json")), &recipe)?;

        for n in 1..=VIDEOS_PER_TYPE {
            let vid = format!("{short}-{n:02}");
            let mut segments = Vec::new();
            let mut sentences = Vec::new();
            let mut frames = Vec::new();
            let mut vectors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            let mut t = 0u32;
            for step in &STEPS {
                let is_misc = step.id == "misc";
                let count = if is_misc { rng.random_range(1..=2) } else { rng.random_range(2..=4) };
                let mut phrase = step.actions[rng.random_range(0..3)];
                for c in 0..count {
                    if c > 0 && rng.random_bool(0.4) {
                        phrase = step.actions[rng.random_range(0..3)];
                    }
                    let (start, end) = (t, t + SEGMENT_S);
                    segments.push(json!({
                        "timestamp": format_timestamp(start, end),
                        "title": step.title,
                        "ingredients": step.ingredients,
                        "utensils": step.utensils,
                        "actions": [phrase],
                    }));
                    let said = if is_misc {
                        format!("Thanks for watching, I am {phrase} now.")
                    } else {
                        format!("Now I am {phrase} with the {}.", step.ingredients.join(" and "))
                    };
                    sentences.push(json!({"text": said, "start": start as f64, "end": end as f64}));
                    let e = embedder.embed_text(phrase)?;
                    let mut ft = start;
                    while ft < end {
                        let idx = frames.len();
                        let file = format!("f{idx:04}.bmp");
                        let id = format!("{vid}-{idx:04}");
                        write_bytes(
                            &root.join(format!("frames/{vid}/{file}")),
                            &bmp(step.colour, rng.random_range(0..48)),
                        )?;
                        vectors.insert(id.clone(), e.as_slice().to_vec());
                        frames.push(FrameEntry {
                            t: ft as f64,
                            file: Some(file),
                            embedding: Some(id),
                        });
                        ft += FRAME_EVERY_S;
                    }
                    t = end;
                }
            }
            segment_total += segments.len();
            write_json(&root.join(format!("annotations/segments/{vid}.json")), &json!(segments))?;
            write_json(
                &root.join(format!("transcripts/{vid}.json")),
                &json!({"video_id": vid, "sentences": sentences}),
            )?;
            let manifest = FrameManifest {
                fps: 1.0 / FRAME_EVERY_S as f64,
                frames,
                embeddings: Some("embeddings.json".into()),
            };
            write_bytes(&root.join(format!("frames/{vid}/manifest.json")), &to_pretty(&manifest)?)?;
            write_json(&root.join(format!("frames/{vid}/embeddings.json")), &json!(vectors))?;
            videos.push(json!({
                "video_id": vid,
                "biryani_type": btype,
                "title": format!("{} biryani, take {n}", capitalize(short)),
                "url": format!("https://video.example/{vid}"),
                "duration_s": t,
            }));
        }
    }
    write_json(&root.join("annotations/videos.json"), &json!(videos))?;
    write_bytes(&root.join("procflow.json"), &to_pretty(&mock_config())?)?;
    Ok(json!({"videos": videos.len(), "segments": segment_total, "root": root.display().to_string()}))
}

fn chapters() -> Vec<Value> {
    let mut out: Vec<(&str, Vec<&str>)> = Vec::new();
    for s in &STEPS {
        match out.last_mut() {
            Some((c, ids)) if *c == s.chapter => ids.push(s.id),
            _ => out.push((s.chapter, vec![s.id])),
        }
    }
    out.into_iter().map(|(name, steps)| json!({"name": name, "steps": steps})).collect()
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bmp_header_is_consistent() {
        let b = bmp([10, 20, 30], 5);
        assert_eq!(&b[..2], b"BM");
        assert_eq!(u32::from_le_bytes(b[2..6].try_into().unwrap()) as usize, b.len());
        assert_eq!(b.len(), 54 + 48 * 9);
    }

    #[test]
    fn mock_corpus_loads() {
        let dir = tempfile::tempdir().unwrap();
        let info = init_mock(dir.path(), 7).unwrap();
        assert_eq!(info["videos"], 12);
        let ws = super::super::Workspace::open(dir.path(), None).unwrap();
        let c = ws.load_corpus().unwrap();
        assert_eq!(c.videos.len(), 12);
        assert_eq!(c.recipes.len(), 6);
        assert_eq!(c.frames.len(), 12);
        assert!(init_mock(dir.path(), 7).is_err());
    }
}
