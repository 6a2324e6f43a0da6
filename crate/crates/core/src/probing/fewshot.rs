//! Few-shot difficulty-classification exchange: prompt construction and
//! response parsing.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::profiles::DifficultyLabel;

const QUESTION_MARKER: &str = "{Insert question here}";

/// Template with three labeled examples, the 20/60/20 prior statement, and
/// the JSON output-format instructions.
const FEWSHOT_TEMPLATE: &str = "You are an AI assistant tasked with categorizing math problems as easy, medium, or hard. You will be given some examples and then asked to categorize a new question.\n\
Here are some example questions with their categorizations:\n\
\n\
<examples>\n\
\"<|User|>Janet's ducks lay 16 eggs per day. She eats three for breakfast every morning and bakes muffins for her friends every day with four. She sells the remainder at the farmers' market daily for $2 per fresh duck egg. How much in dollars does she make every day at the farmers' market?<|Assistant|>\", medium\n\
\"<|User|>A robe takes 2 bolts of blue fiber and half that much white fiber. How many bolts in total does it take?<|Assistant|>\", easy\n\
\"<|User|>James decides to run 3 sprints 3 times a week. He runs 60 meters each sprint. How many total meters does he run a week?<|Assistant|>\", hard\n\
</examples>\n\
\n\
Your task is to categorize the following new question as easy, medium, or hard based on its similarity to the examples provided. Assume that your prior is that 20% of questions are easy, 60% of questions are medium, 20% of questions are hard. Be careful not to underestimate the difficulty of the question you are categorizing--if it is possible to argue that it is hard, classify it as hard, if it is possible to argue that it is medium, classify it as medium. If you want to say that the question is medium and not hard, you should have a really strong justification for why it is medium but not hard.\n\
Here is the new question to categorize:\n\
<new_question>\n\
{Insert question here}\n\
</new_question>\n\
Please think about the complexity of the problem, the number of steps required to solve it, and how it compares to the examples provided. Then, provide your categorization and reasoning in the following JSON format:\n\
\n\
<output>\n\
{ \"reasoning\": \"<your reasoning for the categorization>\" \"category\": \"<category in {easy, medium, hard}>\", }\n\
</output>\n\
\n\
Ensure that your reasoning is clear and concise, explaining why you chose the specific category based on the question's characteristics and its comparison to the provided examples.";

/// One classification exchange: the prompt sent, the raw reply, and what was
/// parsed out of it.
#[derive(Debug, Clone)]
pub struct FewShotExchange {
    pub prompt: String,
    pub raw_response: String,
    pub parsed_label: DifficultyLabel,
    pub parsed_reasoning: String,
    /// True when parsing failed and the label is the medium fallback.
    pub fallback_used: bool,
}

/// Builds the classification prompt with the question substituted into the
/// `<new_question>` block. Byte-identical across calls for one question.
pub fn build_fewshot_prompt(question_text: &str) -> Result<String> {
    if question_text.trim().is_empty() {
        return Err(Error::InvalidConfig("question text is empty".to_string()));
    }
    Ok(FEWSHOT_TEMPLATE.replacen(QUESTION_MARKER, question_text, 1))
}

/// Scans for top-level JSON objects, properly skipping braces inside
/// strings by letting the JSON parser decide where each candidate ends.
fn last_json_object(text: &str) -> Option<Value> {
    let mut last = None;
    let mut cursor = 0;
    while let Some(open) = text[cursor..].find('{') {
        let start = cursor + open;
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(value @ Value::Object(_))) => {
                let consumed = stream.byte_offset();
                last = Some(value);
                cursor = start + consumed.max(1);
            }
            _ => cursor = start + 1,
        }
    }
    last
}

fn get_ci<'v>(object: &'v Value, key: &str) -> Option<&'v Value> {
    object.as_object()?.iter().find(|(k, _)| k.eq_ignore_ascii_case(key)).map(|(_, v)| v)
}

/// Parses a classification reply: the JSON object inside `<output>` tags
/// when present, otherwise the last top-level object in the text. The
/// category value is read case-insensitively.
pub fn parse_fewshot_response(raw: &str) -> Result<(DifficultyLabel, String)> {
    let region = match (raw.find("<output>"), raw.find("</output>")) {
        (Some(open), Some(close)) if close > open => &raw[open + "<output>".len()..close],
        _ => raw,
    };
    let object = last_json_object(region)
        .ok_or_else(|| Error::ResponseParse("no JSON object found".to_string()))?;
    let category = get_ci(&object, "category")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::ResponseParse("no `category` field".to_string()))?;
    let label: DifficultyLabel = category
        .parse()
        .map_err(|_| Error::ResponseParse(format!("category `{category}` is not a difficulty")))?;
    let reasoning =
        get_ci(&object, "reasoning").and_then(Value::as_str).unwrap_or_default().to_string();
    Ok((label, reasoning))
}

/// Like [`parse_fewshot_response`] but never fails: parse failures fall back
/// to medium with the flag set.
pub fn parse_fewshot_response_or_fallback(raw: &str) -> (DifficultyLabel, String, bool) {
    match parse_fewshot_response(raw) {
        Ok((label, reasoning)) => (label, reasoning, false),
        Err(_) => (DifficultyLabel::Medium, String::new(), true),
    }
}
