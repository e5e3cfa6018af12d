mod common;

use std::sync::atomic::Ordering;
use std::time::Duration;

use serde_json::json;

use common::{keyword_service, serve, Reply};
use readward::env::GameKind;
use readward::manual::{normalize, read_manual, SourceTag};
use readward::provider::{ChoiceQuery, ExtractiveQuery, HttpProvider, HttpSettings, ProviderError, QaProvider};
use readward::reason::{build_table, Verdict};

fn quick() -> HttpSettings {
    HttpSettings {
        timeout: Duration::from_secs(5),
        retries: 2,
        backoff: Duration::from_millis(10),
        max_in_flight: 2,
    }
}

#[test]
fn answers_and_scores_round_trip() {
    let svc = keyword_service();
    let p = HttpProvider::new(&svc.url, quick()).unwrap();
    let q = ExtractiveQuery::new("Eat every pellet. Avoid the ghost or you lose a life.", "Who is the ghost?").unwrap();
    assert_eq!(p.answer(&q).unwrap(), "Avoid the ghost or you lose a life.");
    let s = p.score_choices(&ChoiceQuery::yes_no("you win")).unwrap();
    assert_eq!(s.scores, vec![0.8, 0.2]);
    assert_eq!(s.argmax(), 0);
}

#[test]
fn transient_failures_are_retried() {
    let svc = serve(|_, _, hit| {
        if hit < 2 {
            Reply {
                status: 503,
                body: "{}".into(),
            }
        } else {
            Reply::ok(json!({ "scores": [0.3, 0.7] }))
        }
    });
    let p = HttpProvider::new(&svc.url, quick()).unwrap();
    assert_eq!(p.score_choices(&ChoiceQuery::yes_no("x")).unwrap().argmax(), 1);
    assert_eq!(svc.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn persistent_failure_is_a_transport_error() {
    let svc = serve(|_, _, _| Reply {
        status: 500,
        body: "{}".into(),
    });
    let p = HttpProvider::new(&svc.url, quick()).unwrap();
    let err = p.score_choices(&ChoiceQuery::yes_no("x")).unwrap_err();
    assert!(matches!(err, ProviderError::Transport(_)), "{err:?}");
    assert_eq!(svc.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn malformed_replies_are_format_errors() {
    let svc = serve(|path, _, _| match path {
        "/score" => Reply::ok(json!({ "scores": [1.0] })),
        _ => Reply::ok(json!({ "text": "no answer field" })),
    });
    let p = HttpProvider::new(&svc.url, quick()).unwrap();
    let q = ExtractiveQuery::new("a passage", "a question?").unwrap();
    assert!(matches!(p.answer(&q), Err(ProviderError::Format(_))));
    assert!(matches!(p.score_choices(&ChoiceQuery::yes_no("x")), Err(ProviderError::Format(_))));
}

#[test]
fn all_zero_scores_abstain() {
    let svc = serve(|_, _, _| Reply::ok(json!({ "scores": [0.0, 0.0] })));
    let p = HttpProvider::new(&svc.url, quick()).unwrap();
    assert_eq!(p.score_choices(&ChoiceQuery::yes_no("x")).unwrap_err(), ProviderError::Abstain);
}

#[test]
fn full_pipeline_over_http() {
    let svc = keyword_service();
    let p = HttpProvider::new(&svc.url, quick()).unwrap();
    let doc = normalize(
        "If a ghost touches you, you lose a life. The ghost chases you.\n\nEach pellet you eat scores a point.",
        SourceTag::Custom,
    )
    .unwrap();
    let objects = vec!["ghost".to_string(), "pellet".to_string()];
    let ctx = read_manual(&p, &doc, GameKind::DotMaze, 10, Some(&objects), 256).unwrap();
    let table = build_table(&p, &ctx.contexts, 5.0, 5.0).unwrap();
    assert_eq!(table.verdict_for("ghost"), Some(Verdict::No));
    assert_eq!(table.verdict_for("pellet"), Some(Verdict::Yes));
}
