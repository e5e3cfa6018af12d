//! Regenerates data/fixtures/dot_maze_official.json: the official-manual
//! dot_maze answers as an extractive model gave them, plus Yes/No scores.
//!
//!     cargo run --example record_dot_maze_fixture

use std::path::Path;

use readward::manual::{load_manual, read_manual, SourceTag, DEFAULT_MAX_TOKENS, DEFAULT_TOP_K};
use readward::provider::{
    ChoiceQuery, ChoiceScores, ExtractiveQuery, ProviderError, QaProvider, Recorder,
};
use readward::reason::build_table;
use readward::env::GameKind;

/// (question, phrase locating the chunk, answer)
const ANSWERS: &[(&str, &str, &str)] = &[
    (
        "What is the objective of the game?",
        "Object of the Game",
        "To score as many points as you can practice clearing the maze of dots before trying to gobble up the ghosts.",
    ),
    ("How to succeed in the game?", "Helpful Hints", "Score as many points as you can."),
    (
        "Who are your enemies?",
        "Who are your enemies?",
        "Ghosts. stay close to an energy pill before eating it, and tease the ghosts.",
    ),
    (
        "What happens when the player hit a ghost?",
        "If a ghost hits",
        "If a ghost hits your dot eater you lose one life",
    ),
    (
        "What happens when the player hit a pellet?",
        "hits a pellet",
        "When your dot eater hits a pellet it eats the pellet and you score points",
    ),
];

struct Scripted;

impl QaProvider for Scripted {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn answer(&self, q: &ExtractiveQuery) -> Result<String, ProviderError> {
        Ok(ANSWERS
            .iter()
            .find(|(question, locator, _)| *question == q.question && q.passage.contains(locator))
            .map_or(String::new(), |a| a.2.to_string()))
    }

    fn score_choices(&self, q: &ChoiceQuery) -> Result<ChoiceScores, ProviderError> {
        let yes = if q.prompt.contains("hit a ghost if") { 0.08 } else { 0.91 };
        ChoiceScores::new(vec![yes, 1.0 - yes])
    }
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let doc = load_manual(&root.join("data/manuals/dot_maze_official.html"), SourceTag::Official).unwrap();
    let rec = Recorder::new(Scripted);
    let ctx = read_manual(&rec, &doc, GameKind::DotMaze, DEFAULT_TOP_K, None, DEFAULT_MAX_TOKENS).unwrap();
    build_table(&rec, &ctx.contexts, 5.0, 5.0).unwrap();
    let out = root.join("data/fixtures/dot_maze_official.json");
    rec.save(&out).unwrap();
    println!("{} entries -> {}", rec.entries().len(), out.display());
}
