//! Prompt templates sent to chat and vision models, plus reply extraction.
//!
//! The templates are plain-text renderings of the originals: markup is
//! dropped, list environments become numbered or dashed lines, and the
//! placeholder blocks are filled by the `render_*` functions.

use serde_json::Value;

pub const VERIFY_TEMPLATE: &str = "You are an expert in analysing cooking videos. Your task is to determine if a specific action is happening in the provided video frames.

The action to verify is: \u{2018}[ACTION]\u{2019}

If any part of the action is clearly or partially visible\u{2014}e.g., if the action is \u{201c}adding turmeric and milk\u{201d} but only turmeric is visible\u{2014}answer \u{201c}yes\u{201d}.

Only answer \u{201c}no\u{201d} if none of the described actions is visible.

Do not explain. Respond with a single word: \u{201c}yes\u{201d} or \u{201c}no\u{201d}.";

pub fn render_verify(action: &str) -> String {
    VERIFY_TEMPLATE.replace("[ACTION]", action)
}

const CLUSTER_DECISION_HEAD: &str =
    "You are analysing cooking actions for a biryani recipe classifier. Below is a set of ";
const CLUSTER_DECISION_MID: &str = " similar cooking actions that have been grouped:\n\n";
const CLUSTER_DECISION_TAIL: &str = "

Question: Should these actions be split into multiple distinct action classes, or are they similar enough to remain as one group?

Consider:
- Are there distinct cooking techniques or steps represented?
- Would separating them improve classification accuracy for biryani cooking?
- Are some actions fundamentally different despite semantic similarity?

Respond with a JSON object containing only:
{
\t\t\"should_split\": true/false,
\t}";

/// Marker used by mocks to recognise the clustering-decision prompt.
pub const CLUSTER_DECISION_MARKER: &str = "biryani recipe classifier";

pub fn render_cluster_decision(actions: &[String]) -> String {
    let actions_str = actions
        .iter()
        .map(|a| format!("- {a}"))
        .collect::<Vec<_>>()
        .join("\n");
    format!(
        "{CLUSTER_DECISION_HEAD}{}{CLUSTER_DECISION_MID}{actions_str}{CLUSTER_DECISION_TAIL}",
        actions.len()
    )
}

pub const DIFFERENCER_MARKER: &str = "which video shows more of this difference?";

pub struct DifferencerFill<'a> {
    pub action: &'a str,
    pub frames_a: usize,
    pub frames_b: usize,
    pub query: &'a str,
    pub importance_context: &'a str,
}

/// Frames are numbered from 1, clip A first.
pub fn render_differencer(f: &DifferencerFill<'_>) -> String {
    let total = f.frames_a + f.frames_b;
    let clip1_range = format!("1-{}", f.frames_a);
    let clip2_start = f.frames_a + 1;
    let clip2_end = total;
    format!(
        r#"I am analysing two sets of photos ({total} total) of someone performing the same biryani cooking action:

"{action}".

Video A: Photos {clip1_range}
Video B: Photos {clip2_start}-{clip2_end}

The specific difference to check is: "{query}".
This means I want to determine if Video A shows more of this characteristic compared to Video B.

{importance}

Question: Based on these frames, which video shows more of this difference?
(a) Video A
(b) Video B
(c) They look similar, or it's not clear
(d) The videos seem to be irrelevant to the query

Be careful: look at the entire set of frames for each video.
If you are not confident or if the difference is very minor, choose (c).

Important Guidelines:
- Choose (a) if Video A clearly shows more of the difference than Video B
- Choose (b) if Video B clearly shows more of the difference than Video A
- Choose (c) if you cannot confidently distinguish between them or they appear similar
- Choose (d) if the videos do not relate to the query at all / the action shown is completely different to the cooking action

Return JSON:
{{
    "answer": "a|b|c|d",
    "confidence": 1-5,
    "difference_visible": true/false,
    "explanation": "Detailed explanation 
                    of what you observed"
}}"#,
        action = f.action,
        query = f.query,
        importance = f.importance_context,
    )
}

pub const PROPOSER_MARKER: &str = "Propose how this cooking action can vary";

/// Proposer prompt. Only the JSON shape of the reply is relied on.
pub fn render_proposer(action_class: &str) -> String {
    format!(
        r#"{PROPOSER_MARKER} between two biryani cooking videos.

Action: "{action_class}"

1. List 2-3 variations in how the action is performed that are visually significant and would affect the final frames.
2. Break the action into 2-4 ordered sub-action stages.
3. For each variation, list the sub-action stages during which it would be most visually detectable.

Return JSON only:
{{
    "variations": ["..."],
    "sub_actions": ["..."],
    "mapping": {{"<variation>": ["<sub-action>"]}}
}}"#
    )
}

pub const EASY_QUESTIONS: [&str; 3] = [
    "What are the ingredients shown in this segment?",
    "What are the utensils shown in this segment?",
    "What are the cooking actions performed in this segment?",
];

pub fn render_easy(description: &str) -> String {
    format!(
        "Video segment description:\n\n\"\"\"\n{description}\n\"\"\"\n\nAnswer the following clearly:\n\n1. {}\n2. {}\n3. {}",
        EASY_QUESTIONS[0], EASY_QUESTIONS[1], EASY_QUESTIONS[2]
    )
}

pub const MEDIUM_TEMPLATES: [(&str, &str); 15] = [
    ("What are the primary ingredients used in this recipe?", "chicken, rice, yoghurt, spices, onions, tomatoes"),
    ("In what order are the ingredients added during cooking?", "oil \u{2192} spices \u{2192} onions \u{2192} meat \u{2192} tomatoes \u{2192} yogurt"),
    ("Which spices or seasonings are used in this dish?", "cumin seeds, coriander powder, garam masala, turmeric, salt"),
    ("What kind of meat is used in the recipe?", "goat, chicken, fish, lamb, beef, none"),
    ("What is the first step shown in the video?", "rinsing and soaking the rice, marinating the meat"),
    ("What is the last step before serving?", "garnishing with fresh coriander and fried onions"),
    ("How is the meat prepared before cooking?", "marinated with yoghurt, turmeric, and chilli powder, layered with meat"),
    ("What type of pan or vessel is used to cook this dish?", "a wide heavy-bottomed metal pot, clay pot, pressure cooker"),
    ("How long is the rice cooked for?", "approximately 15 minutes until tender"),
    ("Approximately how long does it take to prepare this entire dish?", "around 45 minutes total"),
    ("What does the final dish look like?", "orange-red rice with chicken pieces and green garnish"),
    ("What is used to garnish the dish before serving?", "chopped coriander leaves, fried onions, lemon slices"),
    ("Does the dish appear to be spicy?", "yes, it looks spicy due to the visible red chilli oil"),
    ("When is the rice mixed with the meat or gravy?", "after the meat is cooked for 15 minutes"),
    ("Is the dish served with any accompaniments?", "onion raita, boiled eggs, salad"),
];

pub const HARD_TEMPLATES: [(&str, &str); 9] = [
    ("Which ingredient is common across all the recipes shown?", "onions are used in all three dishes"),
    ("Which dish uses the highest variety of spices?", "the Hyderabad biryani uses 7 different spices, more than the others"),
    ("Which recipe takes the longest time to prepare?", "the Lucknow biryani takes approximately 1 hour"),
    ("Which of the recipes do not include yoghurt as an ingredient?", "only the Ambur biryani skips yoghurt"),
    ("In which video is rice boiled separately before adding to the meat, unlike in the others?", "the Lucknow recipe"),
    ("Which recipe appears the spiciest?", "the Andhra biryani looks deep red from heavy chilli usage"),
    ("In which video does the cook add the meat later in the cooking process compared to the others?", "the Kerala biryani adds meat after vegetables"),
    ("Which videos are the most different from each other?", "the Kerala and Hyderabad biryanis differ greatly in cooking method and garnish"),
    ("Which videos are the most similar to each other?", "the Ambur and Tamil Nadu biryanis are nearly identical"),
];

pub fn render_templates(templates: &[(&str, &str)]) -> String {
    templates
        .iter()
        .enumerate()
        .map(|(i, (q, eg))| format!("{}. {q}\n   e.g., {eg}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

const QA_OUTPUT_FORMAT: &str = r#"Output Format:
{
  "Summary": "",
  "QA_pairs": [
    {"Q": "", "A": ""},
    {"Q": "", "A": ""},
    {"Q": "", "A": ""},
    {"Q": "", "A": ""}
  ]
}"#;

pub const MEDIUM_MARKER: &str = "full transcript of the spoken narration";

pub fn render_medium(description: &str, transcript: &str) -> String {
    format!(
        r#"You are an expert in analysing cooking videos, with extensive knowledge of culinary techniques, ingredients, and food presentation across various regional cuisines in India.

You are provided with a detailed textual description of the cooking video and the full transcript of the spoken narration. This data includes step-by-step cooking processes, mentions of ingredients, utensils, cooking durations, and visual cues — but you do not have access to the actual video.

Task:

- Identify and describe the key cooking processes, ingredients, and presentation details discussed in the textual description and summary. (The key cooking process refers to the main focus of the video that is highlighted in the provided text.)

- Generate relevant Question-Answer (QA) pairs by carefully analysing the textual description and summary of the cooking video.

- In addition to using the provided template questions, feel free to create additional QA pairs that are contextually appropriate based on the content.

Below is a set of template questions for forming QA pairs:
(Adapt these or create new ones depending on the content.)

"""
{templates}
"""

Instructions:

- DO NOT mention the video summary or transcript directly when answering the questions. Avoid phrases like: “based on the description,” “according to the text,” “as mentioned,” or references to captions that imply the answer was derived from the provided text. Instead, present the information as if it is directly inferred from watching the video.

- Do not explain or justify how the answer was obtained.

- You may choose to omit details that seem irrelevant to the cooking process or final dish.

- Keep all answers concise, and highlight important keywords using bold formatting.

- If a particular question does not apply to the video, simply do not generate a QA pair for it.

- Focus on content directly relevant to the cooking process, ingredients, or presentation. Ignore unrelated background commentary.

{QA_OUTPUT_FORMAT}

Video description:

"""
{description}
"""

Transcript:

"""
{transcript}
""""#,
        templates = render_templates(&MEDIUM_TEMPLATES),
    )
}

pub const HARD_MARKER: &str = "textual summaries of multiple cooking videos";

pub fn render_hard(summaries: &str) -> String {
    format!(
        r#"You are an expert in analysing cooking videos, with extensive knowledge of culinary techniques, ingredients, and food presentation across various regional cuisines in India.

You are provided with textual summaries of multiple cooking videos. These summaries include step-by-step actions, mentions of ingredients, utensils, and visual cues — but you do not have access to the actual videos themselves.

Task:

- Carefully compare, contrast, and synthesise the details across these multiple videos to identify key differences, similarities, and unique aspects. This includes analysing cooking processes, ingredients, preparation times, spice usage, visual appearance, and sequencing of steps.

- Generate high-level, challenging Question-Answer (QA) pairs that require reasoning across these multiple videos, not just describing a single video.

- Use the provided set of question templates to guide your QA generation. You may also create additional multi-video QA pairs if they are insightful.

Below is a set of template questions for forming QA pairs:
(Adapt these or create new ones depending on the content.)

"""
{templates}
"""

Instructions:

- Do not mention the video summaries or textual descriptions directly when answering the questions. Avoid phrases like: “based on the description,” “according to the text,” “as mentioned,” or references to captions that imply the answer was derived from the provided summaries. Instead, present the information as if it is directly inferred from watching the videos.

- Do not explain or justify how the answer was obtained.

- Keep all answers concise, and highlight important keywords using bold formatting.

- If a particular question does not apply to this set of videos, simply do not generate a QA pair for it.

- Focus on content directly relevant to the cooking processes, ingredients, or comparative aspects. Ignore unrelated background commentary.

{QA_OUTPUT_FORMAT}

Video summaries:

"""
{summaries}
""""#,
        templates = render_templates(&HARD_TEMPLATES),
    )
}

pub const VIDEO_SUMMARY_MARKER: &str = "We split a cooking video into segments";

/// `chunks` are segment descriptions in video order.
pub fn render_video_summary(chunks: &[String]) -> String {
    let body = chunks
        .iter()
        .enumerate()
        .map(|(i, c)| format!("CHUNK: {}\n{c}", i + 1))
        .collect::<Vec<_>>()
        .join("\n\n");
    format!(
        r#"We split a cooking video into segments and extracted detailed descriptions for each segment. The descriptions for all segments are listed below, in the order they appear in the video. For example, ‘CHUNK: 1’ corresponds to the first video segment.

Generate a detailed, step-by-step, and visually rich description of the entire cooking video as a single coherent paragraph, based on all the provided captions. Make sure not to lose any important information.
"""
{body}
"""

Use the following instructions to create a clear, complete, and engaging cooking narrative:

1. Focus on describing key visual details such as the appearance and colours of ingredients, textures, cooking methods, utensils used, hand movements, and how ingredients are combined or transformed during the process.
2. Preserve the sequence of cooking actions — describe the preparation steps in the order they happen, ensuring the flow matches the progression shown in the captions.
3. Highlight important details like quantities shown, specific types of ingredients (e.g., green chilli, rice, ginger garlic paste, potatoes), notable textures (e.g., moist, oily, tender), and garnishing or plating details.
4. Use your reasoning to combine and organise information from all captions into one clear, thorough description. Remove unnecessary repetition and ignore any conflicting or irrelevant details.
5. Do not mention that the information comes from captions. Present it as a natural, direct description of the video.
6. Keep it visually descriptive yet easy to understand, almost like explaining the video to someone who can’t watch it.
7. Finally, use your common sense to conclude what dish is being prepared and summarise how the video showcases its preparation. If the video ends with plating or serving, describe that presentation too."#
    )
}

pub const MULTIMODAL_SUMMARY_MARKER: &str = "We have split a cooking video into visual segments";

pub fn render_multimodal_summary(description: &str, transcript: &str) -> String {
    format!(
        r#"We have split a cooking video into visual segments and extracted detailed descriptions from the video frames for each segment. Separately, we also generated a full transcript of the audio narration spoken in the video.

Your task is to produce a comprehensive, visually and verbally rich summary of the entire cooking video by carefully combining information from both the visual descriptions and the audio transcript.

Video description from visual frames:

"""
{description}
"""

Transcript of the audio narration:

"""
{transcript}
"""

Use the following instructions to create a clear, complete, and engaging cooking video summary:

1. Use the video summaries from frames to describe key visual details such as the appearance and colours of ingredients, textures, cooking methods, utensils, hand movements, how ingredients are layered or transformed, and plating or serving scenes.
2. Use the transcript of the audio narration to incorporate spoken explanations, cooking tips, quantities, and verbal emphasis on techniques or ingredient choices.
3. Ensure the cooking steps are described in the correct sequence, matching the flow shown across the video segments and the spoken instructions.
4. Highlight important specifics like ingredient types (e.g., green chillies, basmati rice, ginger garlic paste, bone-in chicken), notable textures (e.g., golden fried onions, oily masala, tender meat), quantities or approximate amounts mentioned, and final garnishing or plating details.
5. Merge and organise all this information into one clear, thorough, and engaging description, removing unnecessary repetition and ignoring conflicting or irrelevant details.
6. Do not mention captions, transcripts, or segments explicitly. Present it as if you are naturally describing what is happening in the video.
7. Keep the narrative vivid and easy to understand, as if explaining the video to someone who cannot watch it.
8. Conclude by summarising what dish is being prepared and how the video showcases its preparation, including the final presentation if shown."#
    )
}

/// Pull the first JSON object out of a reply, tolerating a code fence,
/// surrounding prose and trailing commas before `}` or `]`.
pub fn extract_json_object(reply: &str) -> Option<Value> {
    let start = reply.find('{')?;
    let end = reply.rfind('}')?;
    if end < start {
        return None;
    }
    let body = &reply[start..=end];
    serde_json::from_str(body)
        .ok()
        .or_else(|| serde_json::from_str(&strip_trailing_commas(body)).ok())
        .filter(Value::is_object)
}

fn strip_trailing_commas(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_str = false;
    let mut escaped = false;
    let chars: Vec<char> = s.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if in_str {
            out.push(c);
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_str = false,
                _ => {}
            }
            continue;
        }
        if c == '"' {
            in_str = true;
        } else if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_prompt_substitutes_action() {
        let p = render_verify("stirring rice");
        assert!(p.contains("The action to verify is: \u{2018}stirring rice\u{2019}"));
        assert!(!p.contains("[ACTION]"));
        assert!(p.ends_with("\u{201c}yes\u{201d} or \u{201c}no\u{201d}."));
    }

    #[test]
    fn differencer_frame_ranges() {
        let p = render_differencer(&DifferencerFill {
            action: "Adding ginger-garlic paste",
            frames_a: 4,
            frames_b: 3,
            query: "more paste is added",
            importance_context: "ctx",
        });
        assert!(p.starts_with("I am analysing two sets of photos (7 total)"));
        assert!(p.contains("Video A: Photos 1-4\nVideo B: Photos 5-7\n"));
        assert!(p.contains("\"more paste is added\""));
        assert!(p.contains(DIFFERENCER_MARKER));
    }

    #[test]
    fn cluster_prompt_fills_count_and_list() {
        let p = render_cluster_decision(&["stirring rice".into(), "mixing rice".into()]);
        assert!(p.contains("Below is a set of 2 similar cooking actions"));
        assert!(p.contains("grouped:\n\n- stirring rice\n- mixing rice\n\nQuestion:"));
        assert!(p.contains("\"should_split\": true/false,"));
        assert!(!p.contains("{{"));
    }

    #[test]
    fn template_counts() {
        assert_eq!(MEDIUM_TEMPLATES.len(), 15);
        assert_eq!(HARD_TEMPLATES.len(), 9);
        let m = render_medium("desc", "tr");
        assert!(m.contains("15. Is the dish served with any accompaniments?"));
        assert!(m.contains(MEDIUM_MARKER));
        assert!(render_hard("s").contains("9. Which videos are the most similar to each other?"));
    }

    #[test]
    fn json_extraction() {
        let v = extract_json_object("```json\n{\"should_split\": true,\n}\n```").unwrap();
        assert_eq!(v["should_split"], true);
        let v = extract_json_object("Sure: {\"a\": \"x, }\", \"b\": [1,2,],}").unwrap();
        assert_eq!(v["a"], "x, }");
        assert_eq!(v["b"], serde_json::json!([1, 2]));
        assert!(extract_json_object("no json here").is_none());
        assert!(extract_json_object("} {").is_none());
    }
}
