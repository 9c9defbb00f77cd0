//! Regenerates the golden fixtures under `fixtures/`.
//!
//! A rule-based oracle plays the generator for ten hand-written questions.
//! Every completion it gives is recorded into the offline script, the
//! pipeline is replayed from that script, and the replayed verdicts must
//! equal the oracle run before anything is written.
//!
//! Run with `cargo run -p rag-core --example make_golden`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rag_core::calculator::calc_system_prompt;
use rag_core::evalkit::{DatasetRecord, SearchResult};
use rag_core::ingest::{process_page, ChunkConfig, WebPage};
use rag_core::kg::{EndpointRegistry, FunctionCall, StubKgApi, ENTITY_SYSTEM_PROMPT};
use rag_core::knowledge::{render_structured, DIRECT_SYSTEM_PROMPT};
use rag_core::orchestrator::{
    AttributeSource, Pipeline, PipelineSettings, VerdictRecord, REASONING_SYSTEM_PROMPT, SUMMARY_SYSTEM_PROMPT,
};
use rag_core::provider::{
    GenerationRequest, GenerationResult, Generator, HashedBagOfWords, ProviderResult, ScriptedGenerator,
    OFFLINE_EMBED_DIM,
};
use serde_json::json;

const ESPN_PAGE_NAME: &str = "Lakers vs. Heat - Game Recap";
const ESPN_URL: &str = "https://www.espn.com/nba/recap/_/gameId/401237028";

struct Question {
    id: &'static str,
    query: &'static str,
    domain: &'static str,
    question_type: &'static str,
    static_or_dynamic: &'static str,
    answer: &'static str,
    alt_answers: &'static [&'static str],
    pages: Vec<SearchResult>,
    domain_votes: [&'static str; 5],
    dynamism_votes: [&'static str; 5],
    entities: &'static str,
    calc: [&'static str; 5],
    direct: String,
    reasoning: String,
    summary: &'static str,
    /// Substrings the reasoning prompt must contain.
    evidence: &'static [&'static str],
}

const QUERY_TIME: &str = "03/05/2024, 23:17:59 PT";

fn page(name: &str, url: &str, paragraphs: &[&str]) -> SearchResult {
    let body: String = paragraphs.iter().map(|p| format!("<p>{p}</p>")).collect();
    let html = format!(
        "<html><head><title>{name}</title><script>var x = 1;</script></head><body><nav><a href=\"/\">Home</a></nav><main>{body}</main><footer>Footer text</footer></body></html>"
    );
    SearchResult { page_name: name.into(), page_url: url.into(), page_snippet: paragraphs[0].into(), page_html: html }
}

fn empty_page(name: &str) -> SearchResult {
    SearchResult { page_name: name.into(), page_url: format!("https://example.org/{}", name.len()), page_snippet: String::new(), page_html: String::new() }
}

fn filler(topic: &str) -> Vec<SearchResult> {
    vec![
        page(
            &format!("{topic} - News"),
            "https://news.example.com/a",
            &["Readers also asked about several unrelated topics this week.", "Is there more coverage coming? Editors say yes."],
        ),
        empty_page(&format!("{topic} - Archive")),
    ]
}

fn structured(answer: &str, fp: Option<bool>) -> String {
    render_structured(
        "- Does it have a false premise?\nNo obvious false premise.\n- What is the final answer?\nThe references agree.",
        answer,
        fp,
    )
}

fn questions(espn_html: &str) -> Vec<Question> {
    let static5 = ["static"; 5];
    let dynamic5 = ["dynamic"; 5];
    let no_calc = [""; 5];
    let with_filler = |mut main: Vec<SearchResult>, topic: &str| {
        main.extend(filler(topic));
        while main.len() < 5 {
            main.push(empty_page(&format!("{topic} {}", main.len())));
        }
        main
    };
    vec![
        Question {
            id: "q01",
            query: "who directed the 2016 movie doctor strange?",
            domain: "movie",
            question_type: "simple",
            static_or_dynamic: "static",
            answer: "Scott Derrickson",
            alt_answers: &[],
            pages: with_filler(
                vec![
                    page(
                        "Doctor Strange (2016 film) - Wikipedia",
                        "https://en.wikipedia.org/wiki/Doctor_Strange_(2016_film)",
                        &[
                            "Doctor Strange is a 2016 American superhero film based on the Marvel Comics character.",
                            "It was directed by Scott Derrickson, who wrote the screenplay with Jon Spaihts and C. Robert Cargill.",
                            "Benedict Cumberbatch stars as Stephen Strange.",
                        ],
                    ),
                    page(
                        "Doctor Strange review",
                        "https://reviews.example.com/doctor-strange",
                        &["Who directed Doctor Strange? Scott Derrickson, best known for horror films, took the job in 2014."],
                    ),
                ],
                "Doctor Strange",
            ),
            domain_votes: ["movie"; 5],
            dynamism_votes: static5,
            entities: r#"["doctor strange"]"#,
            calc: ["", "2024 - 2016", "2024 - 2016", "import os", "2024-2016"],
            direct: structured("Scott Derrickson", None),
            reasoning: structured("Scott Derrickson", Some(false)),
            summary: "",
            evidence: &[
                "### KG Ref 1: \nmovie_get_movie_info(\"doctor strange\") -> ",
                "# An answer from another agent:\nScott Derrickson\n",
                "### Calculation 1: \n2024 - 2016 = 8\n",
                "directed by Scott Derrickson",
            ],
        },
        Question {
            id: "q02",
            query: "who are the current members of the band eagles?",
            domain: "music",
            question_type: "set",
            static_or_dynamic: "slow-changing",
            answer: "Don Henley, Joe Walsh, Timothy B. Schmit and Vince Gill",
            alt_answers: &[],
            pages: with_filler(
                vec![page(
                    "Eagles (band) - Wikipedia",
                    "https://en.wikipedia.org/wiki/Eagles_(band)",
                    &["The Eagles are an American rock band formed in Los Angeles in 1971.", "The current lineup is Don Henley, Joe Walsh, Timothy B. Schmit and Vince Gill."],
                )],
                "Eagles",
            ),
            domain_votes: ["music", "music", "The domain is music.", "open", "music"],
            dynamism_votes: ["static", "dynamic", "static", "static", "dynamic"],
            entities: r#"["Eagles"]"#,
            calc: no_calc,
            direct: structured("Don Henley, Glenn Frey, Joe Walsh", None),
            reasoning: structured("Don Henley, Joe Walsh, Timothy B. Schmit and Vince Gill", Some(false)),
            summary: "",
            evidence: &["music_get_members(\"eagles\") -> {\"members\":[\"Don Henley\""],
        },
        Question {
            id: "q03",
            query: "what is the current stock price of apple?",
            domain: "finance",
            question_type: "simple",
            static_or_dynamic: "real-time",
            answer: "$172.62",
            alt_answers: &[],
            pages: with_filler(vec![page("AAPL quote", "https://finance.example.com/aapl", &["Apple shares closed at $172.62 on Tuesday."])], "Apple"),
            domain_votes: ["finance"; 5],
            dynamism_votes: dynamic5,
            entities: r#"["aapl"]"#,
            calc: no_calc,
            direct: String::new(),
            reasoning: String::new(),
            summary: "",
            evidence: &[],
        },
        Question {
            id: "q04",
            query: "which team is leading the nba western conference standings right now?",
            domain: "sports",
            question_type: "simple",
            static_or_dynamic: "fast-changing",
            answer: "Minnesota Timberwolves",
            alt_answers: &[],
            pages: with_filler(vec![page("NBA Standings", "https://www.espn.com/nba/standings", &["The Timberwolves sit atop the West."])], "Standings"),
            domain_votes: ["sports"; 5],
            dynamism_votes: ["dynamic", "dynamic", "static", "dynamic", "Dynamic."],
            entities: "[]",
            calc: no_calc,
            direct: String::new(),
            reasoning: String::new(),
            summary: "",
            evidence: &[],
        },
        Question {
            id: "q05",
            query: "what year did albert einstein win his second nobel prize?",
            domain: "open",
            question_type: "false_premise",
            static_or_dynamic: "static",
            answer: "invalid question",
            alt_answers: &[],
            pages: with_filler(
                vec![page("Albert Einstein - Nobel Prize", "https://www.nobelprize.org/einstein", &["Albert Einstein received the 1921 Nobel Prize in Physics.", "He never received a second Nobel Prize."])],
                "Einstein",
            ),
            domain_votes: ["open"; 5],
            dynamism_votes: static5,
            entities: "[]",
            calc: no_calc,
            direct: render_structured("- Does it have a false premise?\nYes, Einstein won only one Nobel Prize.", "Invalid question", None),
            reasoning: render_structured(
                "- Does it have a false premise?\nYes. Einstein won a single Nobel Prize, in 1921.\n- What is the final answer?\nThe question is invalid.",
                "Invalid question",
                Some(true),
            ),
            summary: "",
            evidence: &["He never received a second Nobel Prize."],
        },
        Question {
            id: "q06",
            query: "what was the combined revenue of apple and microsoft in fiscal year 2022, in billions of dollars?",
            domain: "finance",
            question_type: "aggregation",
            static_or_dynamic: "static",
            answer: "592.6 billion",
            alt_answers: &["$592.6 billion", "592.6"],
            pages: with_filler(
                vec![
                    page("Apple 10-K 2022", "https://investor.apple.com/2022", &["Apple reported fiscal 2022 revenue of $394.3 billion."]),
                    page("Microsoft annual report 2022", "https://www.microsoft.com/investor/2022", &["Microsoft revenue was $198.3 billion in fiscal year 2022, up 18%."]),
                ],
                "Revenue",
            ),
            domain_votes: ["finance"; 5],
            dynamism_votes: static5,
            entities: r#"["aapl", "msft"]"#,
            calc: [
                "394.3 + 198.3",
                "394.3+198.3",
                "```python\n394.3 + 198.3\n```",
                "__import__('os').system('ls')",
                "round(394.33 + 198.27, 1)",
            ],
            direct: structured("About 590 billion dollars", None),
            reasoning: structured("592.6 billion dollars", Some(false)),
            summary: "",
            evidence: &[
                "### Calculation 1: \n394.3 + 198.3 = 592.6\n### Calculation 2: \n394.3+198.3 = 592.6\n### Calculation 3: \nround(394.33 + 198.27, 1) = 592.6\n",
                "finance_get_market_capitalization(\"aapl\") -> ",
            ],
        },
        Question {
            id: "q07",
            query: "how many points did the lakers score in game 1 of the 2020 nba finals?",
            domain: "sports",
            question_type: "simple",
            static_or_dynamic: "static",
            answer: "116",
            alt_answers: &[],
            pages: with_filler(
                vec![SearchResult {
                    page_name: ESPN_PAGE_NAME.into(),
                    page_url: ESPN_URL.into(),
                    page_snippet: "Anthony Davis scored 34 points".into(),
                    page_html: espn_html.into(),
                }],
                "Lakers",
            ),
            domain_votes: ["sports"; 5],
            dynamism_votes: ["static", "dynamic", "static", "static or dynamic", "static"],
            entities: r#"["lakers"]"#,
            calc: ["116", "23 + 42 + 28 + 23", "sum([23, 42, 28, 23])", "", "116"],
            direct: structured("106", None),
            reasoning: structured("116 points", Some(false)),
            summary: "",
            evidence: &[
                "## Table references \n### Table 1: \nPage name: Lakers vs. Heat - Game Recap\n| Team | 1 | 2 | 3 | 4 | T |",
                "| LAL | 23 | 42 | 28 | 23 | 116 |",
                "### Calculation 3: \nsum([23, 42, 28, 23]) = 116\n",
            ],
        },
        Question {
            id: "q08",
            query: "what is the tallest mountain in africa?",
            domain: "open",
            question_type: "simple",
            static_or_dynamic: "static",
            answer: "Mount Kilimanjaro",
            alt_answers: &["Kilimanjaro"],
            pages: with_filler(vec![page("Mount Kilimanjaro", "https://en.wikipedia.org/wiki/Mount_Kilimanjaro", &["Mount Kilimanjaro is the highest mountain in Africa."])], "Africa"),
            domain_votes: ["open", "open", "open", "open", "open"],
            dynamism_votes: static5,
            entities: "[]",
            calc: no_calc,
            direct: "Kilimanjaro, probably.".into(),
            reasoning: "The tallest mountain in Africa is Mount Kilimanjaro, at 5,895 metres.".into(),
            summary: "Mount Kilimanjaro",
            evidence: &["Mount Kilimanjaro is the highest mountain in Africa."],
        },
        Question {
            id: "q09",
            query: "when was the lead singer of arcade fire born?",
            domain: "music",
            question_type: "multi-hop",
            static_or_dynamic: "static",
            answer: "April 19, 1980",
            alt_answers: &[],
            pages: with_filler(vec![page("Arcade Fire", "https://en.wikipedia.org/wiki/Arcade_Fire", &["Arcade Fire is a Canadian indie rock band."])], "Arcade Fire"),
            domain_votes: ["music"; 5],
            dynamism_votes: static5,
            entities: r#"["arcade fire"]"#,
            calc: no_calc,
            direct: structured("I don't know", None),
            reasoning: structured("I don't know", Some(false)),
            summary: "",
            evidence: &["music_get_members(\"arcade fire\") -> "],
        },
        Question {
            id: "q10",
            query: "what was the budget of the movie inception?",
            domain: "movie",
            question_type: "simple",
            static_or_dynamic: "static",
            answer: "$160 million",
            alt_answers: &[],
            pages: with_filler(vec![page("Inception", "https://en.wikipedia.org/wiki/Inception", &["Inception is a 2010 science fiction film written and directed by Christopher Nolan."])], "Inception"),
            domain_votes: ["movie"; 5],
            dynamism_votes: static5,
            entities: r#"["inception"]"#,
            calc: no_calc,
            direct: structured("$200 million", None),
            reasoning: structured("$200 million", Some(false)),
            summary: "",
            evidence: &[],
        },
    ]
}

fn kg_table() -> StubKgApi {
    let mut s = StubKgApi::default();
    s.insert(
        FunctionCall::new("movie_get_movie_info", &["doctor strange"]),
        json!({"title": "Doctor Strange", "director": "Scott Derrickson", "release_date": "2016-11-04", "budget": "$165 million"}),
    );
    s.insert(
        FunctionCall::new("music_get_members", &["eagles"]),
        json!({"members": ["Don Henley", "Joe Walsh", "Timothy B. Schmit", "Vince Gill"]}),
    );
    s.insert(
        FunctionCall::new("music_get_members", &["arcade fire"]),
        json!({"members": ["Win Butler", "Régine Chassagne", "Richard Reed Parry", "Tim Kingsbury", "Jeremy Gara"]}),
    );
    s.insert(FunctionCall::new("finance_get_market_capitalization", &["aapl"]), json!(2.63e12));
    s
}

struct Oracle {
    questions: Vec<Question>,
}

impl Oracle {
    fn question_in(&self, text: &str) -> &Question {
        self.questions
            .iter()
            .filter(|q| text.contains(q.query))
            .max_by_key(|q| q.query.len())
            .unwrap_or_else(|| panic!("prompt names no known question:\n{text}"))
    }

    fn answer(&self, req: &GenerationRequest) -> Vec<String> {
        let q = self.question_in(&req.user_prompt);
        let one = |s: &str| vec![s.to_string()];
        let sys = req.system_prompt.as_str();
        if sys.contains("### Domain:") {
            q.domain_votes.iter().map(|s| s.to_string()).collect()
        } else if sys.contains("### Static or Dynamic:") {
            q.dynamism_votes.iter().map(|s| s.to_string()).collect()
        } else if sys == ENTITY_SYSTEM_PROMPT {
            one(q.entities)
        } else if sys == calc_system_prompt() {
            q.calc.iter().map(|s| s.to_string()).collect()
        } else if sys == DIRECT_SYSTEM_PROMPT {
            one(&q.direct)
        } else if sys == REASONING_SYSTEM_PROMPT {
            for e in q.evidence {
                assert!(req.user_prompt.contains(e), "{}: reasoning prompt lacks {e:?}:\n{}", q.id, req.user_prompt);
            }
            one(&q.reasoning)
        } else if sys == SUMMARY_SYSTEM_PROMPT {
            one(q.summary)
        } else {
            panic!("unexpected prompt:\n{sys}")
        }
    }
}

struct Recorder {
    oracle: Oracle,
    seen: Mutex<BTreeMap<String, Vec<String>>>,
}

impl Generator for Recorder {
    fn generate(&self, req: &GenerationRequest) -> ProviderResult<GenerationResult> {
        req.validate()?;
        let completions = self.oracle.answer(req);
        assert_eq!(completions.len(), req.n_samples, "sample count for {:?}", &req.system_prompt[..40]);
        self.seen.lock().unwrap().insert(req.fingerprint(), completions.clone());
        Ok(GenerationResult { completions })
    }

    fn fingerprint(&self) -> String {
        "oracle".into()
    }
}

fn run(generator: &dyn Generator, kg: &StubKgApi, records: &[DatasetRecord]) -> Vec<VerdictRecord> {
    let embedder = HashedBagOfWords::new(OFFLINE_EMBED_DIM);
    Pipeline {
        embedder: &embedder,
        generator,
        kg,
        registry: EndpointRegistry::default(),
        attributes: AttributeSource::Icl,
        settings: PipelineSettings::default(),
    }
    .answer_all(records, 4)
}

fn jsonl<T: serde::Serialize>(items: &[T]) -> String {
    items.iter().map(|i| serde_json::to_string(i).unwrap() + "\n").collect()
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").canonicalize().expect("fixtures dir");
    let espn_html = std::fs::read_to_string(root.join("espn.html")).expect("fixtures/espn.html");

    let espn = process_page(
        &WebPage::from_bytes(ESPN_PAGE_NAME, ESPN_URL, espn_html.as_bytes()),
        &ChunkConfig::default(),
    );
    write(&root.join("espn.extract.json"), &(serde_json::to_string_pretty(&espn).unwrap() + "\n"));

    let qs = questions(&espn_html);
    let records: Vec<DatasetRecord> = qs
        .iter()
        .map(|q| {
            let mut r = DatasetRecord::new(q.id, q.query);
            r.query_time = QUERY_TIME.into();
            r.search_results = q.pages.clone();
            r.answer = q.answer.into();
            r.alt_answers = q.alt_answers.iter().map(|s| s.to_string()).collect();
            r.domain = q.domain.into();
            r.question_type = q.question_type.into();
            r.static_or_dynamic = q.static_or_dynamic.into();
            r
        })
        .collect();
    let kg = kg_table();

    let recorder = Recorder { oracle: Oracle { questions: qs }, seen: Mutex::new(BTreeMap::new()) };
    let live = run(&recorder, &kg, &records);
    let script = ScriptedGenerator::new(recorder.seen.into_inner().unwrap());
    let replay = run(&script, &kg, &records);
    assert_eq!(live, replay, "replay from the recorded script diverged");

    let dir = root.join("golden");
    std::fs::create_dir_all(&dir).unwrap();
    write(&dir.join("dataset.jsonl"), &jsonl(&records));
    write(&dir.join("script.json"), &(script.to_json() + "\n"));
    write(&dir.join("kg_stub.json"), &(serde_json::to_string_pretty(&kg).unwrap() + "\n"));
    write(&dir.join("verdicts.jsonl"), &jsonl(&replay));
    for v in &replay {
        println!("{} {:?} {}", v.interaction_id, v.verdict.kind, v.verdict.answer);
    }
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    eprintln!("wrote {}", path.display());
}
