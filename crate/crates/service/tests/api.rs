use std::sync::Arc;
use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{header, Request, StatusCode};
use dupviper::corpus::Document;
use dupviper::groups::{check_completeness, plant_group, Filler, PlantConfig};
use dupviper::search::{search, Pattern, ResultJson, SearchParams};
use dupviper_service::{router, AppState, ServiceConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

struct Harness {
    _dir: TempDir,
    state: Arc<AppState>,
}

impl Harness {
    fn new() -> Self {
        Self::with(|_| {})
    }

    fn with(tweak: impl FnOnce(&mut ServiceConfig)) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ServiceConfig::new(dir.path());
        tweak(&mut cfg);
        let state = AppState::open(cfg).unwrap();
        Harness { _dir: dir, state }
    }

    async fn raw(&self, req: Request<Body>) -> (StatusCode, Vec<u8>) {
        let resp = router(self.state.clone()).oneshot(req).await.unwrap();
        let status = resp.status();
        let body = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
        (status, body.to_vec())
    }

    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(v) => req
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(v.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let (status, bytes) = self.raw(req).await;
        let v = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap()
        };
        (status, v)
    }

    async fn upload(&self, text: &str) -> String {
        let req = Request::post("/documents").body(Body::from(text.to_string())).unwrap();
        let (status, body) = self.raw(req).await;
        assert_eq!(status, StatusCode::CREATED);
        let v: Value = serde_json::from_slice(&body).unwrap();
        v["doc_id"].as_str().unwrap().to_string()
    }

    async fn session(&self, doc_id: &str) -> String {
        let (status, v) = self.call("POST", "/sessions", Some(json!({ "doc_id": doc_id }))).await;
        assert_eq!(status, StatusCode::CREATED);
        v["session_id"].as_str().unwrap().to_string()
    }
}

fn planted(seed: u64) -> (Document, Vec<dupviper::corpus::TextFragment>, String, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let text = Filler::new(seed).text(&mut rng, 120);
    let cfg = PlantConfig {
        doc_len: 3_000,
        ..PlantConfig::default()
    };
    let (doc, group) = plant_group(&cfg, &text, 0.9, 3, seed).unwrap();
    (doc, group.members, text, 0.9)
}

/// Three close copies of one sentence, far apart.
fn triple() -> (String, Vec<(usize, usize)>) {
    let a = "the service account needs write access to the storage bucket";
    let b = "the service account needs write access to the storage buckets";
    let c = "the service account need write access to the storage bucket";
    let gap = " 0 1 2 3 4 5 6 7 8 9 ".repeat(4);
    let mut text = String::new();
    let mut spans = Vec::new();
    for (i, s) in [a, b, c].iter().enumerate() {
        if i > 0 {
            text.push_str(&gap);
        }
        let start = text.chars().count();
        text.push_str(s);
        spans.push((start, start + s.chars().count() - 1));
    }
    (text, spans)
}

#[tokio::test]
async fn health() {
    let h = Harness::new();
    let (status, v) = h.call("GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, json!({ "status": "ok" }));
}

#[tokio::test]
async fn upload_variants() {
    let h = Harness::with(|c| c.max_upload = 1024);
    let (status, v) = {
        let req = Request::post("/documents").body(Body::from("ab cd")).unwrap();
        let (s, b) = h.raw(req).await;
        (s, serde_json::from_slice::<Value>(&b).unwrap())
    };
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(v["length"], 5);
    assert_eq!(v["token_count"], 2);
    let id = v["doc_id"].as_str().unwrap().to_string();
    assert_eq!(h.upload("ab cd").await, id, "content addressed");

    let empty = h.upload("").await;
    let (_, v) = h.call("GET", &format!("/documents/{empty}"), None).await;
    assert_eq!(v["length"], 0);

    let bad = Request::post("/documents")
        .body(Body::from(vec![0x61, 0xff, 0xfe]))
        .unwrap();
    assert_eq!(h.raw(bad).await.0, StatusCode::BAD_REQUEST);

    let big = Request::post("/documents").body(Body::from("x".repeat(2048))).unwrap();
    assert_eq!(h.raw(big).await.0, StatusCode::PAYLOAD_TOO_LARGE);

    let boundary = "XyZ";
    let form = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"a.txt\"\r\n\
         Content-Type: text/plain\r\n\r\nhello multipart\r\n--{boundary}--\r\n"
    );
    let req = Request::post("/documents")
        .header(
            header::CONTENT_TYPE,
            format!("multipart/form-data; boundary={boundary}"),
        )
        .body(Body::from(form))
        .unwrap();
    let (status, body) = h.raw(req).await;
    assert_eq!(status, StatusCode::CREATED);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["length"], 15);
}

#[tokio::test]
async fn heatmap_endpoint() {
    let h = Harness::new();
    let cold = h.upload("alpha beta gamma delta epsilon zeta eta theta").await;
    let (status, v) = h.call("GET", &format!("/documents/{cold}/heatmap"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["min_tokens"], 5);
    assert!(v["tokens"]
        .as_array()
        .unwrap()
        .iter()
        .all(|t| t["h"] == 0 && t["color"] == json!([1.0, 1.0, 1.0])));

    let block = "one two three four five six";
    let hot = h.upload(&format!("{block} x {block} y {block} z")).await;
    let temps = |v: &Value| -> Vec<u64> {
        v["tokens"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| t["h"].as_u64().unwrap())
            .collect()
    };
    let (_, v5) = h
        .call("GET", &format!("/documents/{hot}/heatmap?min_tokens=5"), None)
        .await;
    assert_eq!(temps(&v5)[0], 3);
    assert_eq!(v5["t_max"], 3);
    assert!(temps(&v5).iter().filter(|&&x| x >= 2).count() >= 18);
    let (_, v7) = h
        .call("GET", &format!("/documents/{hot}/heatmap?min_tokens=7"), None)
        .await;
    for (a, b) in temps(&v5).iter().zip(temps(&v7)) {
        assert!(b <= *a);
    }
    let (again_status, again) = h
        .call("GET", &format!("/documents/{hot}/heatmap?min_tokens=5"), None)
        .await;
    assert_eq!(again_status, StatusCode::OK);
    assert_eq!(again, v5);

    assert_eq!(
        h.call("GET", "/documents/nope/heatmap", None).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        h.call("GET", &format!("/documents/{hot}/heatmap?min_tokens=0"), None)
            .await
            .0,
        StatusCode::BAD_REQUEST
    );
}

#[tokio::test]
async fn sessions_are_distinct_and_need_a_document() {
    let h = Harness::new();
    let doc = h.upload("some text").await;
    let a = h.session(&doc).await;
    let b = h.session(&doc).await;
    assert_ne!(a, b);
    let (status, _) = h.call("POST", "/sessions", Some(json!({ "doc_id": "missing" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = h.call("POST", "/sessions", Some(json!({ "wrong": 1 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn search_finds_planted_group_and_matches_library_output() {
    let h = Harness::new();
    let (doc, members, pattern, k) = planted(7);
    let doc_id = h.upload(&doc.text()).await;
    let sid = h.session(&doc_id).await;
    let req = Request::post(format!("/sessions/{sid}/search"))
        .body(Body::from(json!({ "pattern": pattern, "k": k }).to_string()))
        .unwrap();
    let (status, body) = h.raw(req).await;
    assert_eq!(status, StatusCode::OK);
    let served: ResultJson = serde_json::from_slice(&body).unwrap();

    let local = Document::from_text(doc_id.as_str(), &doc.text());
    let p = Pattern::from_text(&pattern);
    let expected = search(&local, &p, &SearchParams::new(k, p.len()).unwrap()).unwrap();
    let found: Vec<_> = served
        .elements
        .iter()
        .map(|e| local.fragment(e.b, e.e).unwrap())
        .collect();
    assert!(check_completeness(&members, &found, p.len(), k).satisfied());

    let mut served_json = served.clone().without_timings();
    served_json.timings_ms = Default::default();
    assert_eq!(
        served_json.to_pretty(),
        expected.to_json(&local).without_timings().to_pretty()
    );
    assert!(String::from_utf8(body).unwrap().ends_with("}\n"));

    let (_, view) = h.call("GET", &format!("/sessions/{sid}"), None).await;
    assert_eq!(view["elements"].as_array().unwrap().len(), served.elements.len());
}

#[tokio::test]
async fn search_rejects_bad_parameters() {
    let h = Harness::new();
    let doc = h.upload("abc def ghi jkl").await;
    let sid = h.session(&doc).await;
    let uri = format!("/sessions/{sid}/search");
    for body in [
        json!({ "pattern": "abc", "k": 0.5 }),
        json!({ "pattern": { "b": 3, "e": 99 }, "k": 0.9 }),
        json!({ "pattern": { "b": 5, "e": 2 }, "k": 0.9 }),
        json!({ "pattern": "", "k": 0.9 }),
        json!({ "k": 0.9 }),
    ] {
        let (status, v) = h.call("POST", &uri, Some(body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert!(v["error"].is_string());
    }
    let (status, _) = h
        .call(
            "POST",
            "/sessions/none/search",
            Some(json!({ "pattern": "a", "k": 1.0 })),
        )
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn long_search_is_polled_and_blocks_a_second_one() {
    let h = Harness::with(|c| c.sync_threshold = Duration::ZERO);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let text = Filler::new(3).text(&mut rng, 300_000);
    let doc = h.upload(&text).await;
    let sid = h.session(&doc).await;
    let uri = format!("/sessions/{sid}/search");
    let body = json!({ "pattern": { "b": 1000, "e": 1199 }, "k": 0.7 });

    let (status, v) = h.call("POST", &uri, Some(body.clone())).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let token = v["token"].as_str().unwrap().to_string();
    let (status, _) = h.call("POST", &uri, Some(body)).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let poll = format!("/sessions/{sid}/search/{token}");
    let result = loop {
        let (status, v) = h.call("GET", &poll, None).await;
        if status == StatusCode::OK {
            break v;
        }
        assert_eq!(status, StatusCode::ACCEPTED);
        tokio::time::sleep(Duration::from_millis(50)).await;
    };
    assert!(result["elements"]
        .as_array()
        .unwrap()
        .iter()
        .any(|e| e["b"].as_u64().unwrap() <= 1000 && e["e"].as_u64().unwrap() >= 1199));
    assert_eq!(
        h.call("GET", &format!("/sessions/{sid}/search/zzz"), None).await.0,
        StatusCode::NOT_FOUND
    );

    let (status, _) = h.call("POST", &uri, Some(json!({ "pattern": "abc", "k": 1.0 }))).await;
    assert!(status == StatusCode::OK || status == StatusCode::ACCEPTED);
}

async fn searched_triple(h: &Harness) -> (String, Vec<(usize, usize)>, Value) {
    let (text, spans) = triple();
    let doc = h.upload(&text).await;
    let sid = h.session(&doc).await;
    let (b, e) = spans[0];
    let (status, v) = h
        .call(
            "POST",
            &format!("/sessions/{sid}/search"),
            Some(json!({ "pattern": { "b": b, "e": e }, "k": 0.9 })),
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    (sid, spans, v)
}

#[tokio::test]
async fn edits_are_applied_and_journaled() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::open(ServiceConfig::new(dir.path())).unwrap();
    let h = Harness {
        _dir: tempfile::tempdir().unwrap(),
        state,
    };
    let (sid, spans, result) = searched_triple(&h).await;
    assert_eq!(result["elements"].as_array().unwrap().len(), 3);
    let uri = |n: usize| format!("/sessions/{sid}/results/{n}");

    let (status, v) = h.call("PATCH", &uri(1), Some(json!({ "action": "reject" }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "rejected");
    let (_, view) = h.call("GET", &format!("/sessions/{sid}"), None).await;
    assert_eq!(
        view["elements"].as_array().unwrap().len(),
        3,
        "rejected elements are kept"
    );
    let (_, v) = h.call("PATCH", &uri(1), Some(json!({ "action": "restore" }))).await;
    assert_eq!(v["status"], "pending");

    let (b, e) = spans[2];
    let (status, v) = h
        .call(
            "PATCH",
            &uri(2),
            Some(json!({ "action": "set_bounds", "b": b - 2, "e": e })),
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["b"], b - 2);
    assert_eq!(v["distance"], 3);
    assert!(v["text"].as_str().unwrap().starts_with("9 the"));

    for bad in [
        json!({ "action": "set_bounds", "b": 9, "e": 3 }),
        json!({ "action": "set_bounds", "b": 0, "e": 100_000 }),
    ] {
        assert_eq!(h.call("PATCH", &uri(0), Some(bad)).await.0, StatusCode::BAD_REQUEST);
    }
    assert_eq!(
        h.call("PATCH", &uri(7), Some(json!({ "action": "reject" }))).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        h.call("PATCH", &uri(0), Some(json!({ "action": "explode" }))).await.0,
        StatusCode::BAD_REQUEST
    );
    h.call("PATCH", &uri(0), Some(json!({ "action": "accept" }))).await;

    let before = h.call("GET", &format!("/sessions/{sid}"), None).await.1;
    let restarted = AppState::open(ServiceConfig::new(dir.path())).unwrap();
    let h2 = Harness {
        _dir: tempfile::tempdir().unwrap(),
        state: restarted,
    };
    let after = h2.call("GET", &format!("/sessions/{sid}"), None).await.1;
    assert_eq!(before, after);
}

#[tokio::test]
async fn groups_are_validated_before_saving() {
    let h = Harness::new();
    let (sid, spans, _) = searched_triple(&h).await;
    let export = format!("/sessions/{sid}/export?format=json");
    let (status, bundle) = h.call("GET", &export, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(bundle["groups"], json!([]));

    let (status, g) = h
        .call(
            "POST",
            &format!("/sessions/{sid}/groups"),
            Some(json!({ "label": "bucket" })),
        )
        .await;
    assert_eq!(status, StatusCode::CREATED, "{g}");
    assert_eq!(g["verification"], "full");
    let got: Vec<(u64, u64)> = g["members"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| (m["b"].as_u64().unwrap(), m["e"].as_u64().unwrap()))
        .collect();
    let want: Vec<(u64, u64)> = spans.iter().map(|&(b, e)| (b as u64, e as u64)).collect();
    assert_eq!(got, want);

    let (_, bundle) = h.call("GET", &export, None).await;
    assert_eq!(bundle["groups"][0]["label"], "bucket");
    assert_eq!(bundle["provenance"]["params"]["k"], 0.9);

    // Overlapping members break the ordering.
    let (b, _) = spans[1];
    let (_, e) = spans[0];
    h.call(
        "PATCH",
        &format!("/sessions/{sid}/results/1"),
        Some(json!({ "action": "set_bounds", "b": e - 3, "e": b + 10 })),
    )
    .await;
    let (status, err) = h
        .call(
            "POST",
            &format!("/sessions/{sid}/groups"),
            Some(json!({ "label": "x" })),
        )
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["member"], 1);
    assert_eq!(err["detail"]["violation"]["kind"], "order");

    // Pattern plus one element only.
    for n in [1, 2] {
        h.call(
            "PATCH",
            &format!("/sessions/{sid}/results/{n}"),
            Some(json!({ "action": "reject" })),
        )
        .await;
    }
    let (status, err) = h
        .call(
            "POST",
            &format!("/sessions/{sid}/groups"),
            Some(json!({ "label": "y" })),
        )
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(err["error"].as_str().unwrap().contains("at least two"));

    assert_eq!(
        h.call("GET", &format!("/sessions/{sid}/export?format=xml"), None)
            .await
            .0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        h.call("GET", "/sessions/none/export", None).await.0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn accepted_elements_narrow_the_group() {
    let h = Harness::new();
    let (sid, spans, _) = searched_triple(&h).await;
    h.call(
        "PATCH",
        &format!("/sessions/{sid}/results/2"),
        Some(json!({ "action": "accept" })),
    )
    .await;
    let (status, g) = h
        .call(
            "POST",
            &format!("/sessions/{sid}/groups"),
            Some(json!({ "label": "pair" })),
        )
        .await;
    assert_eq!(status, StatusCode::CREATED);
    let members = g["members"].as_array().unwrap();
    assert_eq!(members.len(), 2);
    assert_eq!(members[1]["b"], spans[2].0);
}
