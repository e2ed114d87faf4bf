//! Input artifacts: segment annotations, video catalog, transcripts, recipe
//! templates and frame manifests.

mod retrieve;
mod scene;
mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::error::{parse_json_file, Error, Result};
use crate::providers::{Embedding, FrameRef};

pub use retrieve::{flatten_hits, retrieve_clips, LabelHit};
pub use scene::{build_scene_graph, NodeKind, SceneEdge, SceneGraph, SceneNode};
pub use stats::{corpus_statistics, CorpusStats};

pub const DEFAULT_CATEGORIES: [&str; 12] = [
    "ambur_biryani",
    "bombay_biryani",
    "dindigul_biryani",
    "donne_biryani",
    "hyderabadi_biryani",
    "kashmiri_biryani",
    "kolkata_biryani",
    "awadhi_biryani",
    "malabar_biryani",
    "mughlai_biryani",
    "sindhi_biryani",
    "thalassery_biryani",
];

/// Half-open `[start, end)` in whole seconds; serialized as `"A-B"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    pub start: u32,
    pub end: u32,
}

impl Interval {
    pub fn new(start: u32, end: u32) -> Result<Self> {
        if end <= start {
            return Err(Error::Timestamp {
                input: format_timestamp(start, end),
                reason: "end must be greater than start".into(),
            });
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> u32 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

impl std::str::FromStr for Interval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (start, end) = parse_timestamp(s)?;
        Ok(Self { start, end })
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn parse_timestamp(s: &str) -> Result<(u32, u32)> {
    let bad = |reason: &str| Error::Timestamp {
        input: s.to_string(),
        reason: reason.to_string(),
    };
    let (a, b) = s.trim().split_once('-').ok_or_else(|| bad("expected <int>-<int>"))?;
    let num = |t: &str| -> Result<u32> {
        if t.is_empty() || !t.bytes().all(|c| c.is_ascii_digit()) {
            return Err(bad("bounds must be non-negative integers"));
        }
        t.parse().map_err(|_| bad("bound out of range"))
    };
    let (start, end) = (num(a)?, num(b)?);
    if end <= start {
        return Err(bad("end must be greater than start"));
    }
    Ok((start, end))
}

pub fn format_timestamp(start: u32, end: u32) -> String {
    format!("{start}-{end}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentAnnotation {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub video_id: String,
    pub timestamp: Interval,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub url: String,
    pub ingredients: Vec<String>,
    pub utensils: Vec<String>,
    pub actions: Vec<String>,
    #[serde(flatten)]
    pub extras: BTreeMap<String, Value>,
}

impl SegmentAnnotation {
    pub fn id(&self) -> String {
        format!("{}@{}", self.video_id, self.timestamp)
    }

    /// Free-text description: the `description` extra when present,
    /// otherwise a rendering of the three lists.
    pub fn description(&self) -> String {
        if let Some(Value::String(d)) = self.extras.get("description") {
            return d.clone();
        }
        let list = |items: &[String]| {
            if items.is_empty() {
                "none".to_string()
            } else {
                items.join(", ")
            }
        };
        format!(
            "Ingredients: {}.\nUtensils: {}.\nActions: {}.",
            list(&self.ingredients),
            list(&self.utensils),
            list(&self.actions)
        )
    }

    /// Detected ingredient and utensil names, the keyword source for coarse
    /// filtering.
    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.ingredients.iter().chain(&self.utensils).map(String::as_str)
    }
}

/// Read a file holding one record or an array of records. `default_video`
/// fills records that carry no `video_id` of their own.
pub fn load_segment_annotations(path: &Path, default_video: Option<&str>) -> Result<Vec<SegmentAnnotation>> {
    let root: Value = parse_json_file(path)?;
    let items = match root {
        Value::Array(items) => items,
        obj @ Value::Object(_) => vec![obj],
        _ => {
            return Err(Error::Record {
                path: path.to_path_buf(),
                index: 0,
                reason: "expected an object or an array of objects".into(),
            })
        }
    };
    items
        .into_iter()
        .enumerate()
        .map(|(index, v)| {
            let mut seg: SegmentAnnotation = serde_json::from_value(v).map_err(|e| Error::Record {
                path: path.to_path_buf(),
                index,
                reason: e.to_string(),
            })?;
            if seg.video_id.is_empty() {
                seg.video_id = default_video.unwrap_or_default().to_string();
            }
            Ok(seg)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub biryani_type: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub url: String,
    pub duration_s: u32,
    #[serde(flatten)]
    pub extras: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub video_id: String,
    pub sentences: Vec<Sentence>,
}

impl Transcript {
    pub fn validate(&self) -> Result<()> {
        let mut prev = f64::NEG_INFINITY;
        for (i, s) in self.sentences.iter().enumerate() {
            if !(s.start >= 0.0 && s.end >= s.start) {
                return Err(Error::Validation(format!(
                    "transcript {} sentence {i}: invalid interval {}..{}",
                    self.video_id, s.start, s.end
                )));
            }
            if s.start < prev {
                return Err(Error::Validation(format!(
                    "transcript {} sentence {i} starts before its predecessor",
                    self.video_id
                )));
            }
            prev = s.start;
        }
        Ok(())
    }

    pub fn full_text(&self) -> String {
        self.sentences.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeStep {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub misc: bool,
}

impl RecipeStep {
    pub fn text(&self) -> String {
        if self.description.is_empty() {
            self.title.clone()
        } else {
            format!("{}. {}", self.title, self.description)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chapter {
    pub name: String,
    pub steps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalRecipe {
    pub biryani_type: String,
    pub chapters: Vec<Chapter>,
    pub steps: Vec<RecipeStep>,
}

impl CanonicalRecipe {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(format!("recipe {}: {m}", self.biryani_type)));
        if self.steps.is_empty() {
            return fail("no steps".into());
        }
        let mut seen = BTreeSet::new();
        for s in &self.steps {
            if !seen.insert(s.id.as_str()) {
                return fail(format!("duplicate step id {}", s.id));
            }
        }
        let misc = self.steps.iter().filter(|s| s.misc).count();
        if misc != 1 {
            return fail(format!("expected exactly one misc step, found {misc}"));
        }
        // Chapters must tile the step list in order.
        let flat: Vec<&str> = self
            .chapters
            .iter()
            .flat_map(|c| c.steps.iter().map(String::as_str))
            .collect();
        let ids: Vec<&str> = self.steps.iter().map(|s| s.id.as_str()).collect();
        if flat != ids {
            return fail("chapters must cover every step exactly once, in step order".into());
        }
        if let Some(c) = self.chapters.iter().find(|c| c.steps.is_empty()) {
            return fail(format!("chapter {} has no steps", c.name));
        }
        Ok(())
    }

    pub fn misc_index(&self) -> usize {
        self.steps.iter().position(|s| s.misc).unwrap_or(self.steps.len() - 1)
    }

    pub fn chapter_of(&self, step_id: &str) -> Option<&str> {
        self.chapters
            .iter()
            .find(|c| c.steps.iter().any(|s| s == step_id))
            .map(|c| c.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    /// Seconds from the start of the video.
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameManifest {
    pub fps: f64,
    pub frames: Vec<FrameEntry>,
    /// File next to the manifest mapping embedding ids to vectors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<String>,
}

/// A loaded manifest with its embedding table, paths resolved.
#[derive(Debug, Clone, Default)]
pub struct FrameStore {
    pub dir: PathBuf,
    pub fps: f64,
    pub frames: Vec<FrameEntry>,
    pub vectors: BTreeMap<String, Embedding>,
}

impl FrameStore {
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let m: FrameManifest = parse_json_file(manifest_path)?;
        let dir = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
        for (i, f) in m.frames.iter().enumerate() {
            if f.file.is_none() && f.embedding.is_none() {
                return Err(Error::Record {
                    path: manifest_path.to_path_buf(),
                    index: i,
                    reason: "frame needs a file or an embedding id".into(),
                });
            }
        }
        let vectors = match &m.embeddings {
            Some(name) => {
                let raw: BTreeMap<String, Vec<f64>> = parse_json_file(&dir.join(name))?;
                raw.into_iter()
                    .map(|(k, v)| Embedding::normalized(v).map(|e| (k, e)))
                    .collect::<std::result::Result<_, _>>()?
            }
            None => BTreeMap::new(),
        };
        Ok(Self {
            dir,
            fps: m.fps,
            frames: m.frames,
            vectors,
        })
    }

    /// Indices of frames whose time falls inside `span`, in order.
    pub fn frames_in(&self, span: Interval) -> Vec<usize> {
        self.frames
            .iter()
            .enumerate()
            .filter(|(_, f)| f.t >= span.start as f64 && f.t < span.end as f64)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn frame_ref(&self, i: usize) -> FrameRef {
        let f = &self.frames[i];
        match (&f.file, &f.embedding) {
            (Some(file), _) => FrameRef::File(self.dir.join(file)),
            (None, Some(id)) => FrameRef::Embedding(id.clone()),
            (None, None) => unreachable!("validated on load"),
        }
    }

    pub fn embedding(&self, i: usize) -> Option<&Embedding> {
        self.frames[i].embedding.as_ref().and_then(|id| self.vectors.get(id))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub videos: BTreeMap<String, VideoRecord>,
    /// Sorted by (video_id, start, end).
    pub segments: Vec<SegmentAnnotation>,
    pub transcripts: BTreeMap<String, Transcript>,
    pub recipes: BTreeMap<String, CanonicalRecipe>,
    pub frames: BTreeMap<String, FrameStore>,
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(format!("listing {}", dir.display()), e))? {
        let p = entry.map_err(|e| Error::io(format!("listing {}", dir.display()), e))?.path();
        if p.extension().is_some_and(|x| x == "json") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

impl Corpus {
    /// Load the standard workspace layout under `root`.
    pub fn load(root: &Path, categories: &[String]) -> Result<Self> {
        let catalog: Vec<VideoRecord> = parse_json_file(&root.join("annotations/videos.json"))?;
        let mut segments = Vec::new();
        for p in json_files(&root.join("annotations/segments"))? {
            segments.extend(load_segment_annotations(&p, Some(&stem(&p)))?);
        }
        let mut transcripts = Vec::new();
        for p in json_files(&root.join("transcripts"))? {
            transcripts.push(parse_json_file::<Transcript>(&p)?);
        }
        let mut recipes = Vec::new();
        for p in json_files(&root.join("recipes"))? {
            recipes.push(parse_json_file::<CanonicalRecipe>(&p)?);
        }
        let mut frames = BTreeMap::new();
        for v in &catalog {
            let m = root.join("frames").join(&v.video_id).join("manifest.json");
            if m.is_file() {
                frames.insert(v.video_id.clone(), FrameStore::load(&m)?);
            }
        }
        let corpus = Self::from_parts(catalog, segments, transcripts, recipes, frames)?;
        corpus.validate(categories)?;
        Ok(corpus)
    }

    pub fn from_parts(
        catalog: Vec<VideoRecord>,
        mut segments: Vec<SegmentAnnotation>,
        transcripts: Vec<Transcript>,
        recipes: Vec<CanonicalRecipe>,
        frames: BTreeMap<String, FrameStore>,
    ) -> Result<Self> {
        let mut videos = BTreeMap::new();
        for v in catalog {
            let id = v.video_id.clone();
            if videos.insert(id.clone(), v).is_some() {
                return Err(Error::Validation(format!("duplicate video_id {id}")));
            }
        }
        segments.sort_by(|a, b| (&a.video_id, a.timestamp).cmp(&(&b.video_id, b.timestamp)));
        let mut tmap = BTreeMap::new();
        for t in transcripts {
            t.validate()?;
            tmap.insert(t.video_id.clone(), t);
        }
        let mut rmap = BTreeMap::new();
        for r in recipes {
            r.validate()?;
            rmap.insert(r.biryani_type.clone(), r);
        }
        Ok(Self {
            videos,
            segments,
            transcripts: tmap,
            recipes: rmap,
            frames,
        })
    }

    pub fn validate(&self, categories: &[String]) -> Result<()> {
        for v in self.videos.values() {
            if v.duration_s == 0 {
                return Err(Error::Validation(format!("video {} has zero duration", v.video_id)));
            }
            if !categories.is_empty() && !categories.contains(&v.biryani_type) {
                return Err(Error::Validation(format!(
                    "video {} has unknown biryani_type {}",
                    v.video_id, v.biryani_type
                )));
            }
        }
        for s in &self.segments {
            if !self.videos.contains_key(&s.video_id) {
                return Err(Error::Validation(format!("segment {} refers to an unknown video", s.id())));
            }
        }
        Ok(())
    }

    pub fn segments_of(&self, video_id: &str) -> &[SegmentAnnotation] {
        let lo = self.segments.partition_point(|s| s.video_id.as_str() < video_id);
        let hi = self.segments.partition_point(|s| s.video_id.as_str() <= video_id);
        &self.segments[lo..hi]
    }

    pub fn biryani_of(&self, video_id: &str) -> &str {
        self.videos.get(video_id).map(|v| v.biryani_type.as_str()).unwrap_or("")
    }

    pub fn recipe_for(&self, video_id: &str) -> Option<&CanonicalRecipe> {
        self.recipes.get(self.biryani_of(video_id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE_SEGMENT: &str = r#"{
  "timestamp": "59-69",
  "title": "Hyderabadi Chicken Dum Biryani #biryani",
  "url": "https://www.youtube.com/watch?v=BIXMwLFCboA&t=59s",
  "ingredients": ["Mint Leaves", "Coriander Leaves", "Kesar Milk", "Kewra & Rose Water", "Ghee"],
  "utensils": ["Large cooking pot or bowl", "Orange cup", "Metal cup"],
  "actions": [
    "Adding mint leaves to rice",
    "Adding coriander leaves to rice",
    "Pouring kesar milk over rice",
    "Pouring kewra and rose water over rice",
    "Pouring ghee over rice"
  ]
}"#;

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("59-69").unwrap(), (59, 69));
        assert_eq!(parse_timestamp("0-10").unwrap(), (0, 10));
        assert_eq!(parse_timestamp("80-90").unwrap(), (80, 90));
        for bad in ["10-10", "20-10", "a-10", "10", "-5-10", "1.5-3", ""] {
            assert!(matches!(parse_timestamp(bad), Err(Error::Timestamp { .. })), "{bad}");
        }
    }

    #[test]
    fn sample_segment_loads() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v1.json");
        std::fs::write(&p, SAMPLE_SEGMENT).unwrap();
        let segs = load_segment_annotations(&p, Some("v1")).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].timestamp, Interval { start: 59, end: 69 });
        assert_eq!(segs[0].ingredients.len(), 5);
        assert_eq!(segs[0].video_id, "v1");
    }

    #[test]
    fn minimal_record_and_extras() {
        let s: SegmentAnnotation = serde_json::from_str(
            r#"{"timestamp":"0-10","ingredients":[],"utensils":[],"actions":[],"camera":"top"}"#,
        )
        .unwrap();
        assert_eq!(s.timestamp, Interval { start: 0, end: 10 });
        assert!(s.ingredients.is_empty() && s.actions.is_empty());
        assert_eq!(s.extras["camera"], "top");
        let back: SegmentAnnotation = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn missing_list_is_rejected() {
        assert!(serde_json::from_str::<SegmentAnnotation>(r#"{"timestamp":"0-10","ingredients":[],"utensils":[]}"#).is_err());
    }

    #[test]
    fn bad_record_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.json");
        let rec = |ts: &str| format!(r#"{{"timestamp":"{ts}","ingredients":[],"utensils":[],"actions":[]}}"#);
        let body = format!("[{},{},{},{}]", rec("0-10"), rec("10-20"), rec("20-30"), rec("40-40"));
        std::fs::write(&p, body).unwrap();
        match load_segment_annotations(&p, None) {
            Err(Error::Record { index, .. }) => assert_eq!(index, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.json");
        std::fs::write(&p, "[{\"timestamp\": \"0-10\",, }]").unwrap();
        match load_segment_annotations(&p, None) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 22),
            other => panic!("{other:?}"),
        }
    }

    fn recipe() -> CanonicalRecipe {
        let step = |id: &str, misc| RecipeStep {
            id: id.into(),
            title: id.into(),
            description: String::new(),
            misc,
        };
        CanonicalRecipe {
            biryani_type: "x".into(),
            chapters: vec![
                Chapter { name: "Pre-prep".into(), steps: vec!["s1".into(), "s2".into()] },
                Chapter { name: "Misc".into(), steps: vec!["m".into()] },
            ],
            steps: vec![step("s1", false), step("s2", false), step("m", true)],
        }
    }

    #[test]
    fn recipe_validation() {
        let r = recipe();
        r.validate().unwrap();
        assert_eq!(r.misc_index(), 2);
        assert_eq!(r.chapter_of("s2"), Some("Pre-prep"));

        let mut two_misc = recipe();
        two_misc.steps[0].misc = true;
        assert!(two_misc.validate().is_err());

        let mut gap = recipe();
        gap.chapters[0].steps = vec!["s2".into(), "s1".into()];
        assert!(gap.validate().is_err());
    }

    #[test]
    fn transcript_order_checked() {
        let t = Transcript {
            video_id: "v".into(),
            sentences: vec![
                Sentence { text: "a".into(), start: 5.0, end: 6.0 },
                Sentence { text: "b".into(), start: 1.0, end: 2.0 },
            ],
        };
        assert!(t.validate().is_err());
    }
}
