//! Seeded, deterministic stand-in for the language model.
//!
//! [`mock_generate`] is a pure function of `(schema, state_xml, seed)`:
//!
//! * themes: a short phrase from each of the longest narrative sentences
//!   (answers after that), quoting the sentence verbatim, with two
//!   templated alternative expressions;
//! * questions: fixed templates instantiated with the theme of the session;
//! * keywords: the most frequent content words not already in the answer
//!   or shown before;
//! * comment: a tip while the answer is empty, then encouragement,
//!   sub-question and insight in turn by answer revision;
//! * summary: one paragraph per theme quoting an answer fragment verbatim,
//!   kept within the proportionality budget.
//!
//! [`MockProvider`] adds an optional fault plan for exercising the repair
//! and grounding paths.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::gateway::{GatewayError, Provider, ProviderCall};
use super::schema::SchemaId;
use crate::model::CommentCategory;
use crate::state_xml::{parse_state_xml, ParsedState, StateXmlError};
use crate::text::{normalize_ws, sentences};

pub const DEFAULT_THEME_COUNT: u32 = 3;
pub const DEFAULT_QUESTION_COUNT: u32 = 3;
pub const DEFAULT_KEYWORD_COUNT: u32 = 2;
/// Characters allowed beyond what the user wrote.
pub const SUMMARY_ALLOWANCE: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lang {
    En,
    Ko,
}

impl Lang {
    fn of(locale: &str) -> Self {
        if locale.to_ascii_lowercase().starts_with("ko") {
            Lang::Ko
        } else {
            Lang::En
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3)
    })
}

const EN_STOPWORDS: &[&str] = &[
    "a", "about", "after", "again", "all", "also", "am", "an", "and", "any", "are", "as", "at",
    "be", "because", "been", "before", "being", "but", "by", "can", "could", "did", "do", "does",
    "doing", "don't", "down", "during", "each", "even", "ever", "every", "feel", "feels", "for",
    "from", "get", "got", "had", "has", "have", "having", "he", "her", "here", "hers", "him",
    "his", "how", "i", "i'm", "i've", "if", "in", "into", "is", "it", "it's", "its", "just",
    "like", "lot", "made", "make", "many", "me", "more", "most", "much", "my", "myself", "never",
    "no", "not", "now", "of", "off", "often", "on", "once", "one", "only", "or", "other", "our",
    "out", "over", "own", "really", "same", "she", "should", "so", "some", "still", "such",
    "than", "that", "the", "their", "them", "then", "there", "these", "they", "thing", "things",
    "this", "those", "through", "to", "too", "under", "until", "up", "very", "was", "way", "we",
    "were", "what", "when", "where", "which", "while", "who", "why", "will", "with", "would",
    "you", "your",
];

const KO_STOPWORDS: &[&str] = &[
    "나는", "나도", "내가", "저는", "제가", "그리고", "하지만", "그런데", "그래서", "너무", "정말",
    "진짜", "것", "것이", "것을", "수", "그", "이", "저", "내", "제", "때문에", "있다", "없다",
    "하는", "했다", "한다", "있는", "같다", "같은", "그냥", "좀", "더", "또", "및", "요즘",
];

fn is_stopword(word: &str, lang: Lang) -> bool {
    let list = match lang {
        Lang::En => EN_STOPWORDS,
        Lang::Ko => KO_STOPWORDS,
    };
    list.contains(&word) || EN_STOPWORDS.contains(&word)
}

fn trim_token(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

/// Content tokens in reading order, original casing preserved.
fn content_tokens(text: &str, lang: Lang) -> Vec<&str> {
    text.split_whitespace()
        .map(trim_token)
        .filter(|t| {
            let lower = t.to_lowercase();
            t.chars().count() >= 2
                && !t.chars().all(|c| c.is_ascii_digit())
                && !is_stopword(&lower, lang)
        })
        .collect()
}

fn cut_chars(text: &str, max: usize) -> &str {
    match text.char_indices().nth(max) {
        Some((idx, _)) => &text[..idx],
        None => text,
    }
}

fn lower_first(text: &str) -> String {
    let mut chars = text.chars();
    match (chars.next(), text.chars().nth(1)) {
        (Some(first), Some(second)) if second.is_lowercase() || second.is_whitespace() => {
            first.to_lowercase().chain(chars).collect()
        }
        _ => text.to_owned(),
    }
}

fn upper_first(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn theme_phrase(sentence: &str, lang: Lang) -> Option<String> {
    let tokens = content_tokens(sentence, lang);
    if tokens.is_empty() {
        return None;
    }
    let phrase = tokens.into_iter().take(4).collect::<Vec<_>>().join(" ");
    Some(match lang {
        Lang::En => upper_first(&phrase.to_lowercase()),
        Lang::Ko => phrase,
    })
}

const EN_EXPRESSIONS: &[&str] = &[
    "Feelings around {x}",
    "What {x} means to me",
    "Living with {x}",
    "The weight of {x}",
    "Making sense of {x}",
];

const KO_EXPRESSIONS: &[&str] = &[
    "{x}에 대한 마음",
    "{x}와 함께 살아가기",
    "{x}의 무게",
    "{x} 돌아보기",
    "나에게 {x}의 의미",
];

fn themes(state: &ParsedState, lang: Lang, count: usize, rng: &mut ChaCha8Rng) -> Value {
    let mut taken: Vec<String> = state.log().iter().map(|t| normalize_ws(&t.name)).collect();
    let by_length = |text: &str| {
        let mut s: Vec<&str> = sentences(text);
        // stable: equal lengths keep reading order
        s.sort_by_key(|x| std::cmp::Reverse(x.chars().count()));
        s.into_iter().map(str::to_owned).collect::<Vec<_>>()
    };
    let mut candidates = by_length(&state.narrative);
    for answer in state.answers() {
        candidates.extend(by_length(answer));
    }
    let templates = match lang {
        Lang::En => EN_EXPRESSIONS,
        Lang::Ko => KO_EXPRESSIONS,
    };
    let mut out = Vec::new();
    for sentence in candidates {
        if out.len() >= count {
            break;
        }
        let Some(name) = theme_phrase(&sentence, lang) else {
            continue;
        };
        let key = normalize_ws(&name);
        if taken.contains(&key) {
            continue;
        }
        taken.push(key);
        let inner = match lang {
            Lang::En => name.to_lowercase(),
            Lang::Ko => name.clone(),
        };
        let expressions: Vec<String> = templates
            .choose_multiple(rng, 2)
            .map(|t| t.replace("{x}", &inner))
            .collect();
        out.push(json!({"main_theme": name, "expressions": expressions, "quote": sentence}));
    }
    let rationale = match lang {
        Lang::En => "Each theme names what the longest sentences of the user's writing dwell on, in the user's own words.",
        Lang::Ko => "사용자가 쓴 가장 긴 문장들이 머무는 지점을 사용자의 표현으로 이름 붙였습니다.",
    };
    json!({"rationale": rationale, "themes": out})
}

const EN_QUESTIONS: &[(&str, &str)] = &[
    ("What makes {x} feel most pressing?", "Locate what gives this theme its urgency right now."),
    ("When did {x} begin?", "Trace the theme back to where it started."),
    ("What would change if {x} eased?", "Imagine an alternative to open up new perspectives."),
    ("Who else is affected by {x}?", "Widen the view to the people around the user."),
    ("What have you already tried regarding {x}?", "Surface existing coping strategies and resources."),
    ("What strengths have helped you face {x}?", "Recognize the user's strengths and resources."),
    ("How does {x} show up in an ordinary day?", "Ground the theme in concrete everyday moments."),
    ("What do you wish others understood about {x}?", "Give voice to unspoken needs."),
    ("What emotions come up most when you think about {x}?", "Name the feelings tied to the theme."),
    ("What would you tell a friend facing {x}?", "Shift to a compassionate outside perspective."),
    ("Which part of {x} feels within your control?", "Separate what can be acted on from what cannot."),
    ("What matters most to you beneath {x}?", "Connect the theme to underlying values."),
];

const KO_QUESTIONS: &[(&str, &str)] = &[
    ("'{x}'이(가) 지금 가장 절실하게 느껴지는 이유는 무엇인가요?", "지금 이 주제가 급하게 느껴지는 지점을 찾습니다."),
    ("'{x}'은(는) 언제부터 시작되었나요?", "주제의 시작점을 되짚어 봅니다."),
    ("'{x}'이(가) 조금 나아진다면 무엇이 달라질까요?", "대안을 상상하며 새로운 관점을 엽니다."),
    ("'{x}'은(는) 주변의 누구에게 영향을 주고 있나요?", "주변 사람들까지 시야를 넓힙니다."),
    ("'{x}'에 대해 이미 시도해 본 것은 무엇인가요?", "이미 가진 대처 방식을 드러냅니다."),
    ("'{x}'을(를) 마주하는 데 도움이 된 나의 강점은 무엇인가요?", "사용자의 강점과 자원을 인식합니다."),
    ("'{x}'은(는) 평범한 하루에 어떻게 나타나나요?", "일상의 구체적인 순간에 주제를 연결합니다."),
    ("'{x}'에 대해 다른 사람들이 알아주었으면 하는 것은 무엇인가요?", "말하지 못한 필요를 표현하게 합니다."),
    ("'{x}'을(를) 생각할 때 가장 자주 드는 감정은 무엇인가요?", "주제와 연결된 감정에 이름을 붙입니다."),
    ("'{x}'을(를) 겪는 친구에게는 어떤 말을 해 주고 싶나요?", "자비로운 바깥의 관점으로 옮겨 봅니다."),
    ("'{x}' 중에서 내가 통제할 수 있는 부분은 무엇인가요?", "행동할 수 있는 것과 없는 것을 구분합니다."),
    ("'{x}' 아래에서 나에게 가장 중요한 것은 무엇인가요?", "주제를 바탕에 있는 가치와 연결합니다."),
];

fn word_frequencies<'a>(texts: impl IntoIterator<Item = &'a str>, lang: Lang) -> Vec<String> {
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    let mut order = 0;
    for text in texts {
        for token in content_tokens(text, lang) {
            let entry = counts.entry(token.to_lowercase()).or_insert((0, order));
            entry.0 += 1;
            order += 1;
        }
    }
    let mut words: Vec<(String, (usize, usize))> = counts.into_iter().collect();
    words.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
    words.into_iter().map(|(w, _)| w).collect()
}

fn questions(state: &ParsedState, lang: Lang, count: usize) -> Value {
    let theme = state.theme_of_session.clone().unwrap_or_default();
    let x = match lang {
        Lang::En => lower_first(&theme),
        Lang::Ko => theme.clone(),
    };
    let mut asked: Vec<String> = state
        .log()
        .iter()
        .filter(|t| t.name == theme)
        .flat_map(|t| t.entries.iter().map(|(q, _)| normalize_ws(q)))
        .collect();
    if let Some(q) = &state.question {
        asked.push(normalize_ws(q));
    }
    let base = match lang {
        Lang::En => EN_QUESTIONS,
        Lang::Ko => KO_QUESTIONS,
    };
    let mut pool: Vec<(String, String)> = Vec::new();
    // follow-up mode: anchor on the answer just written
    if let Some((answer, _)) = state.current_response.as_ref().filter(|(a, _)| !a.trim().is_empty()) {
        if let Some(focus) = word_frequencies([answer.as_str()], lang).into_iter().next() {
            let follow = match lang {
                Lang::En => vec![
                    (format!("How might {focus} shape {x}?"), "Follow up on what the user just wrote."),
                    (format!("What does {focus} tell you about {x}?"), "Invite meaning-making from the last answer."),
                    (format!("What small step toward {focus} feels possible?"), "Turn the last answer into a concrete next step."),
                ],
                Lang::Ko => vec![
                    (format!("'{focus}'은(는) '{x}'에 어떤 영향을 줄까요?"), "방금 쓴 답을 이어서 살펴봅니다."),
                    (format!("'{focus}'이(가) '{x}'에 대해 알려 주는 것은 무엇인가요?"), "마지막 답에서 의미를 찾도록 돕습니다."),
                    (format!("'{focus}'을(를) 향한 작은 한 걸음은 무엇일까요?"), "마지막 답을 구체적인 다음 걸음으로 바꿉니다."),
                ],
            };
            pool.extend(follow.into_iter().map(|(q, i)| (q, i.to_owned())));
        }
    }
    pool.extend(base.iter().map(|(q, i)| (q.replace("{x}", &x), (*i).to_owned())));
    let words = word_frequencies(
        std::iter::once(state.narrative.as_str()).chain(state.answers()),
        lang,
    );
    for w in &words {
        for (q, i) in base {
            let q = q.replace("{x}", &x);
            let text = match lang {
                Lang::En => format!("Thinking about {w}, {}", lower_first(&q)),
                Lang::Ko => format!("'{w}'을(를) 떠올려 볼 때, {q}"),
            };
            pool.push((text, (*i).to_owned()));
        }
        if pool.len() > asked.len() + count + base.len() {
            break;
        }
    }
    let mut out = Vec::new();
    for (q, intention) in pool {
        if out.len() >= count {
            break;
        }
        let key = normalize_ws(&q);
        if asked.contains(&key) {
            continue;
        }
        asked.push(key);
        out.push(json!({"question": q, "intention": intention}));
    }
    let rationale = match lang {
        Lang::En => "Open-ended questions that invite the user to examine the theme from several angles.",
        Lang::Ko => "주제를 여러 각도에서 살펴보도록 돕는 열린 질문입니다.",
    };
    json!({"rationale": rationale, "questions": out})
}

fn keywords(state: &ParsedState, lang: Lang, count: usize) -> Value {
    let response = state
        .current_response
        .as_ref()
        .map(|(r, _)| normalize_ws(r))
        .unwrap_or_default();
    let response_words: Vec<String> = crate::text::words(&response);
    let question = state.question.as_deref().map(normalize_ws).unwrap_or_default();
    let mut taken: Vec<String> = state.shown_keywords.iter().map(|k| normalize_ws(k)).collect();
    let texts: Vec<&str> = std::iter::once(state.narrative.as_str())
        .chain(state.answers())
        .collect();
    let mut pool = word_frequencies(texts.iter().copied(), lang);
    for text in &texts {
        let tokens = content_tokens(text, lang);
        pool.extend(tokens.windows(2).map(|w| format!("{} {}", w[0], w[1]).to_lowercase()));
    }
    let mut out: Vec<String> = Vec::new();
    for candidate in pool {
        if out.len() >= count {
            break;
        }
        let key = normalize_ws(&candidate);
        let in_response = if key.contains(' ') {
            response.contains(&key)
        } else {
            response_words.contains(&key)
        };
        if in_response || key == question || taken.contains(&key) {
            continue;
        }
        taken.push(key);
        out.push(candidate);
    }
    let rationale = match lang {
        Lang::En => "Words the user returns to most often that the current answer has not touched yet.",
        Lang::Ko => "사용자가 자주 쓰지만 지금 답변에는 아직 나오지 않은 말들입니다.",
    };
    json!({"rationale": rationale, "keywords": out})
}

fn comment(state: &ParsedState, lang: Lang) -> Value {
    let (answer, revision) = state.current_response.clone().unwrap_or_default();
    let category = if answer.trim().is_empty() {
        CommentCategory::Tip
    } else {
        [
            CommentCategory::Encouragement,
            CommentCategory::Subquestion,
            CommentCategory::Insight,
        ][(revision.max(1) as usize - 1) % 3]
    };
    let fragment = sentences(&answer)
        .first()
        .map(|s| cut_chars(s, 80).to_owned())
        .unwrap_or_default();
    let focus = word_frequencies([answer.as_str()], lang)
        .into_iter()
        .next()
        .unwrap_or_default();
    let (text, rationale) = match (lang, category) {
        (Lang::En, CommentCategory::Tip) => (
            "Try starting with one concrete moment connected to this question, and describe what happened before you explain it.".to_owned(),
            "The user has not started answering, so a tip for getting started fits best.".to_owned(),
        ),
        (Lang::En, CommentCategory::Encouragement) => (
            format!("You have put something important into words: \"{fragment}\". Take your time and keep going."),
            "The user has begun answering; affirming the first step supports continued writing.".to_owned(),
        ),
        (Lang::En, CommentCategory::Subquestion) => (
            format!("What would it look like if {focus} were a little different?"),
            "A smaller question can help the user elaborate the answer.".to_owned(),
        ),
        (Lang::En, _) => (
            format!("Notice how {focus} keeps appearing in what you write. What might that say about what matters to you?"),
            "The answer has developed enough to reflect a recurring element back to the user.".to_owned(),
        ),
        (Lang::Ko, CommentCategory::Tip) => (
            "이 질문과 연결된 구체적인 한 순간을 떠올려 보고, 설명하기 전에 무슨 일이 있었는지부터 적어 보세요.".to_owned(),
            "아직 답을 시작하지 않아 시작을 돕는 팁이 적절합니다.".to_owned(),
        ),
        (Lang::Ko, CommentCategory::Encouragement) => (
            format!("중요한 것을 말로 표현하셨어요: \"{fragment}\". 천천히 이어가 보세요."),
            "답을 쓰기 시작했으므로 첫걸음을 지지하는 말이 도움이 됩니다.".to_owned(),
        ),
        (Lang::Ko, CommentCategory::Subquestion) => (
            format!("'{focus}'이(가) 조금 달라진다면 어떤 모습일까요?"),
            "작은 질문이 답을 더 풍부하게 하는 데 도움이 됩니다.".to_owned(),
        ),
        (Lang::Ko, _) => (
            format!("'{focus}'이(가) 글에 계속 등장하네요. 이것이 나에게 중요한 무엇을 말해 주는 걸까요?"),
            "답이 충분히 발전해 반복되는 요소를 비춰 줄 수 있습니다.".to_owned(),
        ),
    };
    json!({"rationale": rationale, "category": category.as_str(), "comment": text})
}

fn summary(state: &ParsedState, lang: Lang) -> Value {
    let user_chars: usize = std::iter::once(state.narrative.as_str())
        .chain(state.answers())
        .map(|s| s.chars().count())
        .sum();
    let budget = user_chars + SUMMARY_ALLOWANCE;
    let render = |fragment_limit: Option<usize>| -> String {
        let log = state.log();
        if log.is_empty() {
            let first = sentences(&state.narrative)
                .first()
                .map(|s| cut_chars(s, fragment_limit.unwrap_or(0).clamp(10, 160)).to_owned())
                .unwrap_or_default();
            return match lang {
                Lang::En => format!("You described your situation in your own words: \"{first}\". There is more to explore whenever you are ready."),
                Lang::Ko => format!("당신은 자신의 말로 상황을 적어 주었습니다: \"{first}\". 준비가 되면 언제든 더 살펴볼 수 있습니다."),
            };
        }
        log.iter()
            .map(|theme| {
                let fragment = theme
                    .entries
                    .iter()
                    .map(|(_, a)| a.trim())
                    .find(|a| !a.is_empty())
                    .and_then(|a| sentences(a).first().copied());
                match (fragment, fragment_limit, lang) {
                    (Some(f), Some(limit), Lang::En) => {
                        format!("On \"{}\", you wrote: \"{}\".", theme.name, cut_chars(f, limit))
                    }
                    (Some(f), Some(limit), Lang::Ko) => {
                        format!("'{}'에 대해 이렇게 적었습니다: \"{}\".", theme.name, cut_chars(f, limit))
                    }
                    (_, _, Lang::En) => format!("You opened \"{}\".", theme.name),
                    (_, _, Lang::Ko) => format!("'{}'을(를) 열어 보았습니다.", theme.name),
                }
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    };
    let text = [Some(120), Some(60), Some(25), Some(8), None]
        .into_iter()
        .map(render)
        .find(|t| t.chars().count() <= budget)
        .unwrap_or_else(|| render(None));
    let rationale = match lang {
        Lang::En => "One short paragraph per theme, quoting the user's own words and staying proportional to what they wrote.",
        Lang::Ko => "주제마다 짧은 문단 하나로, 사용자의 말을 인용하며 쓴 분량에 비례하게 정리했습니다.",
    };
    json!({"rationale": rationale, "summary": text})
}

pub fn mock_generate(schema: SchemaId, state_xml: &str, seed: u64) -> Result<String, StateXmlError> {
    mock_generate_n(schema, state_xml, seed, None)
}

/// [`mock_generate`] with an explicit item count for list schemas.
pub fn mock_generate_n(
    schema: SchemaId,
    state_xml: &str,
    seed: u64,
    count: Option<u32>,
) -> Result<String, StateXmlError> {
    let state = parse_state_xml(state_xml)?;
    let lang = Lang::of(&state.locale);
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed ^ fnv1a(schema.as_str().as_bytes()) ^ fnv1a(state_xml.as_bytes()).rotate_left(17),
    );
    let n = |default: u32| count.unwrap_or(default).max(1) as usize;
    let value = match schema {
        SchemaId::Themes => themes(&state, lang, n(DEFAULT_THEME_COUNT), &mut rng),
        SchemaId::Questions => questions(&state, lang, n(DEFAULT_QUESTION_COUNT)),
        SchemaId::Keywords => keywords(&state, lang, n(DEFAULT_KEYWORD_COUNT)),
        SchemaId::Comment => comment(&state, lang),
        SchemaId::Summary => summary(&state, lang),
    };
    let body = crate::canonical::canonicalize(&value);
    Ok(format!("```json\n{body}\n```"))
}

/// A deviation the mock injects into one response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fault {
    /// Unparseable output.
    Malformed,
    /// Every theme quote altered by a two-character transposition.
    ParaphraseQuote,
    /// Every theme quote replaced by text the user never wrote.
    InventQuote,
    /// Summary padded far past the proportionality bound.
    Oversize,
    /// Sleep before answering.
    Delay(Duration),
}

/// The mock as a [`Provider`], with a call counter and a queue of faults.
pub struct MockProvider {
    seed: u64,
    faults: Mutex<VecDeque<(Option<SchemaId>, Fault)>>,
    calls: AtomicUsize,
}

impl MockProvider {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            faults: Mutex::new(VecDeque::new()),
            calls: AtomicUsize::new(0),
        }
    }

    /// Queues a fault for the next call of `schema` (any schema if `None`).
    pub fn inject(&self, schema: Option<SchemaId>, fault: Fault) {
        self.faults.lock().expect("fault queue").push_back((schema, fault));
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn take_fault(&self, schema: SchemaId) -> Option<Fault> {
        let mut faults = self.faults.lock().expect("fault queue");
        let pos = faults.iter().position(|(s, _)| s.is_none_or(|s| s == schema))?;
        faults.remove(pos).map(|(_, f)| f)
    }
}

fn mutate_quotes(raw: &str, f: impl Fn(&str) -> String) -> String {
    let Ok(mut v) = super::schema::extract_json(raw) else {
        return raw.to_owned();
    };
    if let Some(items) = v.get_mut("themes").and_then(Value::as_array_mut) {
        for item in items {
            if let Some(q) = item.get("quote").and_then(Value::as_str) {
                item["quote"] = Value::String(f(q));
            }
        }
    }
    format!("```json\n{}\n```", crate::canonical::canonicalize(&v))
}

/// Swaps two adjacent letters near the middle: edit distance at most 2.
pub fn transpose_middle(text: &str) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    let mid = chars.len() / 2;
    let pos = (mid..chars.len().saturating_sub(1))
        .chain((0..mid.min(chars.len().saturating_sub(1))).rev())
        .find(|&i| chars[i].is_alphanumeric() && chars[i + 1].is_alphanumeric() && chars[i] != chars[i + 1]);
    match pos {
        Some(i) => chars.swap(i, i + 1),
        None => chars.push('x'),
    }
    chars.into_iter().collect()
}

pub const INVENTED_QUOTE: &str = "Everything started when the lighthouse keeper left town.";

#[async_trait]
impl Provider for MockProvider {
    async fn complete(&self, call: ProviderCall<'_>) -> Result<String, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let req = call.request;
        let fault = self.take_fault(req.output_schema);
        if let Some(Fault::Delay(d)) = &fault {
            tokio::time::sleep(*d).await;
        }
        let raw = mock_generate_n(req.output_schema, &req.state_xml, self.seed, req.item_count)
            .map_err(|e| GatewayError::InvalidRequest(e.to_string()))?;
        Ok(match fault {
            Some(Fault::Malformed) => "```json\n{\"rationale\": \"truncated\", \n```".to_owned(),
            Some(Fault::ParaphraseQuote) => mutate_quotes(&raw, transpose_middle),
            Some(Fault::InventQuote) => mutate_quotes(&raw, |_| INVENTED_QUOTE.to_owned()),
            Some(Fault::Oversize) => {
                let pad = "This sentence was never written by the user. ".repeat(400);
                json!({"rationale": "padded", "summary": pad}).to_string()
            }
            _ => raw,
        })
    }
}
