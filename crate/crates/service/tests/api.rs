use std::path::Path;

use aimguard_core::explainer::{export_attribution, AttributionMatrix, SqueezeMode};
use aimguard_core::features::FEATURE_COUNT;
use aimguard_core::simulator::{gen_player, BehaviorProfile};
use aimguard_core::trajectory::{extract_windows, Screen};
use aimguard_service::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqwest::StatusCode;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

struct Fixture {
    _dir: tempfile::TempDir,
    config: ServiceConfig,
    explanation_files: Vec<std::path::PathBuf>,
}

/// Four players in one match; the first two have explanation documents for
/// every elimination.
fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let exp_dir = dir.path().join("explanations");
    std::fs::create_dir_all(&exp_dir).unwrap();
    let mut lines = String::new();
    let mut files = Vec::new();
    let probs = [0.91, 0.42, 0.77, 0.05];
    for (p, prob) in probs.iter().enumerate() {
        let player = format!("p{p:02}");
        let mut rng = ChaCha8Rng::seed_from_u64(p as u64);
        let (stream, _) = gen_player(&BehaviorProfile::normal(), 2, "m00001", &player, Screen::default(), &mut rng);
        let (windows, _) = extract_windows(&stream, "m00001", 64, 32, Screen::default());
        let ticks: Vec<i64> = windows.iter().map(|w| w.elim_tick()).collect();
        let scores: Vec<f64> = ticks.iter().map(|_| rng.random_range(0.0..1.0)).collect();
        lines.push_str(
            &json!({
                "match_id": "m00001", "player_id": player, "verdict": *prob >= 0.5, "probability": prob,
                "elimination_scores": scores, "elimination_ticks": ticks, "threshold": 0.5,
            })
            .to_string(),
        );
        lines.push('\n');
        if p < 2 {
            for w in &windows {
                let values = (0..96).map(|_| (0..FEATURE_COUNT).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
                let m = AttributionMatrix {
                    elimination_id: w.id(),
                    model_version: "test".into(),
                    squeeze: SqueezeMode::Verbatim,
                    w: 6,
                    values,
                };
                let doc = export_attribution(w, &m, None).unwrap();
                let path = exp_dir.join(format!("{player}_{}.json", w.elim_tick()));
                std::fs::write(&path, serde_json::to_vec_pretty(&doc).unwrap()).unwrap();
                files.push(path);
            }
        }
    }
    let verdicts = dir.path().join("verdicts.jsonl");
    std::fs::write(&verdicts, lines).unwrap();
    let static_dir = dir.path().join("static");
    std::fs::create_dir_all(&static_dir).unwrap();
    std::fs::write(static_dir.join("index.html"), "<html>review</html>").unwrap();
    Fixture {
        config: ServiceConfig {
            data_dir: dir.path().join("data"),
            verdicts: Some(verdicts),
            explanations: Some(exp_dir),
            static_dir: Some(static_dir),
            token: None,
        },
        _dir: dir,
        explanation_files: files,
    }
}

async fn start(config: &ServiceConfig) -> (String, tokio::task::JoinHandle<()>) {
    let app = build_app(config).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let handle = tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    (url, handle)
}

fn verdict(reviewer: &str, decision: &str) -> Value {
    json!({"reviewer_id": reviewer, "decision": decision, "confidence": 4, "review_seconds": 35.5})
}

#[tokio::test]
async fn empty_store_lists_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let (url, _h) = start(&ServiceConfig { data_dir: dir.path().into(), ..Default::default() }).await;
    let resp = reqwest::get(format!("{url}/api/cases")).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["x-total-count"], "0");
    assert_eq!(resp.json::<Value>().await.unwrap(), json!([]));
    let audit = reqwest::get(format!("{url}/api/audit")).await.unwrap().bytes().await.unwrap();
    assert!(audit.is_empty());
}

#[tokio::test]
async fn listing_filters_and_pages() {
    let f = fixture();
    let (url, _h) = start(&f.config).await;
    let get = |q: &str| {
        let u = format!("{url}/api/cases{q}");
        async move { reqwest::get(u).await.unwrap().json::<Vec<CaseSummary>>().await.unwrap() }
    };
    let all = get("").await;
    let probs: Vec<f64> = all.iter().map(|c| c.probability).collect();
    assert_eq!(probs, vec![0.91, 0.77, 0.42, 0.05]);
    assert!(all.iter().all(|c| c.status == CaseStatus::Pending));
    assert_eq!(get("?min_p=0.5").await.len(), 2);
    let page2 = get("?per_page=3&page=2").await;
    assert_eq!(page2.len(), 1);
    assert_eq!(page2[0].probability, 0.05);
    assert_eq!(get("?status=reviewed").await.len(), 0);
    let bad = reqwest::get(format!("{url}/api/cases?status=closed")).await.unwrap();
    assert_eq!(bad.status(), StatusCode::UNPROCESSABLE_ENTITY);
    let missing = reqwest::get(format!("{url}/api/cases/nope")).await.unwrap();
    assert_eq!(missing.status(), StatusCode::NOT_FOUND);
    let index = reqwest::get(format!("{url}/index.html")).await.unwrap().text().await.unwrap();
    assert_eq!(index, "<html>review</html>");
}

#[tokio::test]
async fn explanations_are_served_byte_for_byte() {
    let f = fixture();
    let (url, _h) = start(&f.config).await;
    for path in &f.explanation_files {
        let name = path.file_stem().unwrap().to_str().unwrap();
        let (player, tick) = name.split_once('_').unwrap();
        let id = case_id("m00001", player);
        let served = reqwest::get(format!("{url}/api/cases/{id}/explanation?tick={tick}"))
            .await
            .unwrap()
            .bytes()
            .await
            .unwrap();
        let on_disk = std::fs::read(path).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&served)), hex::encode(Sha256::digest(&on_disk)));
    }
    // Default explanation is the highest-scoring elimination.
    let case: Value = reqwest::get(format!("{url}/api/cases/m00001.p00")).await.unwrap().json().await.unwrap();
    let best = case["eliminations"]
        .as_array()
        .unwrap()
        .iter()
        .max_by(|a, b| a["score"].as_f64().unwrap().total_cmp(&b["score"].as_f64().unwrap()))
        .unwrap()["tick"]
        .as_i64()
        .unwrap();
    let doc: Value = reqwest::get(format!("{url}/api/cases/m00001.p00/explanation")).await.unwrap().json().await.unwrap();
    assert_eq!(doc["elim_tick"].as_i64().unwrap(), best);
    let none = reqwest::get(format!("{url}/api/cases/m00001.p02/explanation")).await.unwrap();
    assert_eq!(none.status(), StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn frames_follow_the_explanation() {
    let f = fixture();
    let (url, _h) = start(&f.config).await;
    let view: FramesView = reqwest::get(format!("{url}/api/cases/m00001.p00/frames?feature=v_y"))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(view.frames.len(), 96);
    assert_eq!(view.drawing.segments.len(), 95);
    assert_eq!(view.feature, "v_y");
    for (k, seg) in view.drawing.segments.iter().enumerate() {
        assert_eq!(seg.to, (view.frames[k + 1].x, view.frames[k + 1].y));
        assert_eq!(seg.color, view.frames[k + 1].color);
    }
    let bad = reqwest::get(format!("{url}/api/cases/m00001.p00/frames?feature=speed")).await.unwrap();
    assert_eq!(bad.status(), StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn verdict_lifecycle() {
    let f = fixture();
    let (url, _h) = start(&f.config).await;
    let client = reqwest::Client::new();
    let post = |id: &str, body: Value| client.post(format!("{url}/api/cases/{id}/verdicts")).json(&body).send();

    let r = post("m00001.p00", verdict("alice", "cheater")).await.unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    let stored: ReviewVerdict = r.json().await.unwrap();
    assert_eq!(stored.decision, Decision::Cheater);
    assert_eq!(stored.case_id, "m00001.p00");

    let case: CaseView = reqwest::get(format!("{url}/api/cases/m00001.p00")).await.unwrap().json().await.unwrap();
    assert_eq!(case.status, CaseStatus::Reviewed);
    assert_eq!(case.verdicts, vec![stored.clone()]);
    assert_eq!(case.agreement.majority, Some(Decision::Cheater));

    let dup = post("m00001.p00", verdict("alice", "legitimate")).await.unwrap();
    assert_eq!(dup.status(), StatusCode::CONFLICT);
    let case: CaseView = reqwest::get(format!("{url}/api/cases/m00001.p00")).await.unwrap().json().await.unwrap();
    assert_eq!(case.verdicts, vec![stored]);

    let missing = post("m00009.p00", verdict("alice", "cheater")).await.unwrap();
    assert_eq!(missing.status(), StatusCode::NOT_FOUND);

    let bad = post(
        "m00001.p01",
        json!({"reviewer_id": "", "decision": "cheater", "confidence": 0, "review_seconds": -1.0}),
    )
    .await
    .unwrap();
    assert_eq!(bad.status(), StatusCode::UNPROCESSABLE_ENTITY);
    let body: Value = bad.json().await.unwrap();
    assert_eq!(body["fields"], json!(["reviewer_id", "confidence", "review_seconds"]));
    let bad = post("m00001.p01", json!({"reviewer_id": "bob", "decision": "banned", "confidence": 3, "review_seconds": 1})).await.unwrap();
    assert_eq!(bad.status(), StatusCode::UNPROCESSABLE_ENTITY);
    let bad = post("m00001.p01", json!({"case_id": "m00001.p02", "reviewer_id": "bob", "decision": "cheater", "confidence": 3, "review_seconds": 1})).await.unwrap();
    assert_eq!(bad.status(), StatusCode::UNPROCESSABLE_ENTITY);

    let reviewed: Vec<CaseSummary> = reqwest::get(format!("{url}/api/cases?status=reviewed")).await.unwrap().json().await.unwrap();
    assert_eq!(reviewed.len(), 1);
    let audit = reqwest::get(format!("{url}/api/audit")).await.unwrap().text().await.unwrap();
    assert_eq!(audit.lines().count(), 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn two_reviewers_post_concurrently() {
    let f = fixture();
    let (url, _h) = start(&f.config).await;
    let client = reqwest::Client::new();
    let send = |who: &'static str, d: &'static str| {
        let c = client.clone();
        let u = format!("{url}/api/cases/m00001.p02/verdicts");
        tokio::spawn(async move { c.post(u).json(&verdict(who, d)).send().await.unwrap().status() })
    };
    let (a, b) = (send("alice", "cheater"), send("bob", "legitimate"));
    assert_eq!(a.await.unwrap(), StatusCode::CREATED);
    assert_eq!(b.await.unwrap(), StatusCode::CREATED);
    let case: CaseView = reqwest::get(format!("{url}/api/cases/m00001.p02")).await.unwrap().json().await.unwrap();
    assert_eq!(case.status, CaseStatus::Reviewed);
    assert_eq!(case.verdicts.len(), 2);
    assert_eq!(case.agreement, Agreement { reviews: 2, majority: None, agreeing: 1, unanimous: false });
    let audit = reqwest::get(format!("{url}/api/audit")).await.unwrap().text().await.unwrap();
    assert_eq!(audit.lines().count(), 2);

    // Racing duplicates: exactly one wins.
    let racers: Vec<_> = (0..8).map(|_| send("carol", "cheater")).collect();
    let mut created = 0;
    for r in racers {
        match r.await.unwrap() {
            StatusCode::CREATED => created += 1,
            s => assert_eq!(s, StatusCode::CONFLICT),
        }
    }
    assert_eq!(created, 1);
}

fn audit_lines(data_dir: &Path) -> Vec<ReviewVerdict> {
    std::fs::read_to_string(data_dir.join(AUDIT_FILE))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[tokio::test]
async fn acknowledged_verdicts_survive_an_abrupt_stop() {
    let f = fixture();
    let (url, handle) = start(&f.config).await;
    let client = reqwest::Client::new();
    let cases = ["m00001.p00", "m00001.p01", "m00001.p02", "m00001.p03"];
    for k in 0..100 {
        let r = client
            .post(format!("{url}/api/cases/{}/verdicts", cases[k % 4]))
            .json(&verdict(&format!("r{k:03}"), "inconclusive"))
            .send()
            .await
            .unwrap();
        assert_eq!(r.status(), StatusCode::CREATED);
    }
    handle.abort();
    let _ = handle.await;

    // A crash mid-append leaves a partial line that was never acknowledged.
    let mut f2 = std::fs::OpenOptions::new().append(true).open(f.config.data_dir.join(AUDIT_FILE)).unwrap();
    std::io::Write::write_all(&mut f2, br#"{"case_id":"m00001.p00","revi"#).unwrap();
    drop(f2);

    let (url, _h) = start(&f.config).await;
    let listed: Vec<CaseSummary> = reqwest::get(format!("{url}/api/cases?status=reviewed")).await.unwrap().json().await.unwrap();
    assert_eq!(listed.iter().map(|c| c.reviews).sum::<usize>(), 100);
    assert_eq!(audit_lines(&f.config.data_dir).len(), 100);
    let dup = client
        .post(format!("{url}/api/cases/m00001.p00/verdicts"))
        .json(&verdict("r000", "cheater"))
        .send()
        .await
        .unwrap();
    assert_eq!(dup.status(), StatusCode::CONFLICT);
    let r = client
        .post(format!("{url}/api/cases/m00001.p00/verdicts"))
        .json(&verdict("late", "cheater"))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    assert_eq!(audit_lines(&f.config.data_dir).len(), 101);
}

#[tokio::test]
async fn case_records_persist_across_restarts() {
    let f = fixture();
    let first = CaseStore::open(&f.config.data_dir, f.config.verdicts.as_deref(), None).unwrap();
    let a = first.get_case("m00001.p01").unwrap();
    drop(first);
    let second = CaseStore::open(&f.config.data_dir, f.config.verdicts.as_deref(), None).unwrap();
    assert_eq!(second.get_case("m00001.p01").unwrap(), a);
    let lines = std::fs::read_to_string(f.config.data_dir.join(CASES_FILE)).unwrap();
    assert_eq!(lines.lines().count(), 4);
}

#[tokio::test]
async fn writes_need_the_shared_token_when_set() {
    let f = fixture();
    let config = ServiceConfig { token: Some("s3cret".into()), ..f.config.clone() };
    let (url, _h) = start(&config).await;
    let client = reqwest::Client::new();
    let u = format!("{url}/api/cases/m00001.p00/verdicts");
    let r = client.post(&u).json(&verdict("alice", "cheater")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::UNAUTHORIZED);
    let r = client.post(&u).header(TOKEN_HEADER, "s3cret").json(&verdict("alice", "cheater")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    assert_eq!(reqwest::get(format!("{url}/api/cases/m00001.p00")).await.unwrap().status(), StatusCode::OK);
}
