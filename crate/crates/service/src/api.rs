use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use dupviper::corpus::{Document, TextFragment};
use dupviper::distance::d;
use dupviper::groups::{validate_group, NearDuplicateGroup};
use dupviper::search::{search_with, Control, Optimizations, Pattern, SearchContext, SearchParams};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::oneshot;

use crate::error::ApiError;
use crate::session::{EditAction, Element, ElementStatus, Job, JournalEvent, PatternSpec, SearchRecord, Session};
use crate::store::{info, DocumentInfo};
use crate::AppState;

type AppResult<T> = Result<T, ApiError>;
type St = State<Arc<AppState>>;

fn parse<T: DeserializeOwned>(body: &[u8]) -> AppResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("malformed request body: {e}")))
}

fn json_text(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> AppResult<T> + Send + 'static) -> AppResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

fn random_token() -> String {
    format!("{:016x}", rand::random::<u64>())
}

pub async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

pub async fn upload(State(st): St, req: Request) -> AppResult<(StatusCode, Json<DocumentInfo>)> {
    let limit = st.config.max_upload;
    let multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let bytes = if multipart {
        let mut form = Multipart::from_request(req, &st)
            .await
            .map_err(|e| ApiError::BadRequest(e.body_text()))?;
        let too_large = |e: axum::extract::multipart::MultipartError| {
            if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
                ApiError::TooLarge { limit }
            } else {
                ApiError::BadRequest(e.body_text())
            }
        };
        let field = form
            .next_field()
            .await
            .map_err(too_large)?
            .ok_or_else(|| ApiError::BadRequest("multipart body has no file part".into()))?;
        field.bytes().await.map_err(too_large)?
    } else {
        Bytes::from_request(req, &st).await.map_err(|e| {
            if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
                ApiError::TooLarge { limit }
            } else {
                ApiError::BadRequest(e.body_text())
            }
        })?
    };
    let store = st.clone();
    let info = blocking(move || store.store.insert(&bytes)).await?;
    Ok((StatusCode::CREATED, Json(info)))
}

pub async fn document(State(st): St, Path(id): Path<String>) -> AppResult<Json<Value>> {
    let doc = st.store.require(&id)?;
    let DocumentInfo {
        doc_id,
        length,
        token_count,
    } = info(&doc);
    Ok(Json(json!({
        "doc_id": doc_id,
        "length": length,
        "token_count": token_count,
        "text": doc.text(),
    })))
}

#[derive(Deserialize)]
pub struct HeatQuery {
    min_tokens: Option<usize>,
}

pub async fn heatmap(State(st): St, Path(id): Path<String>, Query(q): Query<HeatQuery>) -> AppResult<Response> {
    let min_tokens = q.min_tokens.unwrap_or(5);
    if min_tokens == 0 {
        return Err(ApiError::BadRequest("min_tokens must be at least 1".into()));
    }
    st.store.require(&id)?;
    let state = st.clone();
    let map = blocking(move || state.store.heatmap(&id, min_tokens)).await?;
    Ok(Json(map.as_ref()).into_response())
}

#[derive(Deserialize)]
struct NewSession {
    doc_id: String,
}

pub async fn create_session(State(st): St, body: Bytes) -> AppResult<(StatusCode, Json<Value>)> {
    let req: NewSession = parse(&body)?;
    let id = st.create_session(&req.doc_id)?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

fn view(s: &Session) -> Value {
    json!({
        "session_id": s.id,
        "doc_id": s.doc_id,
        "search": s.search.as_ref().map(|r| json!({
            "pattern": r.pattern,
            "pattern_text": r.pattern_text,
            "params": r.params,
        })),
        "elements": s.elements,
        "groups": s.groups,
        "in_flight": s.in_flight,
    })
}

pub async fn session_view(State(st): St, Path(id): Path<String>) -> AppResult<Json<Value>> {
    let s = st.session(&id)?;
    let s = s.lock().unwrap();
    Ok(Json(view(&s)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchRequest {
    pattern: PatternSpec,
    k: f64,
    #[serde(default)]
    optimizations: Option<Optimizations>,
    #[serde(default)]
    strict_threshold: bool,
    #[serde(default)]
    exclude_self: bool,
}

fn resolve_pattern(doc: &Document, spec: &PatternSpec) -> AppResult<Pattern> {
    let p = match spec {
        PatternSpec::Interval { b, e } => {
            Pattern::from_interval(doc, *b, *e).map_err(|e| ApiError::BadRequest(e.to_string()))?
        }
        PatternSpec::Text(t) => Pattern::from_text(t),
    };
    if p.is_empty() {
        return Err(ApiError::BadRequest("pattern is empty".into()));
    }
    Ok(p)
}

pub async fn start_search(State(st): St, Path(id): Path<String>, body: Bytes) -> AppResult<Response> {
    let req: SearchRequest = parse(&body)?;
    let session = st.session(&id)?;
    let doc_id = session.lock().unwrap().doc_id.clone();
    let doc = st.store.require(&doc_id)?;
    let pattern = resolve_pattern(&doc, &req.pattern)?;
    let params = SearchParams::new(req.k, pattern.len())
        .map_err(|e| ApiError::BadRequest(e.to_string()))?
        .with_optimizations(req.optimizations.unwrap_or_default())
        .with_strict_threshold(req.strict_threshold)
        .with_exclude_self(req.exclude_self);

    let token = {
        let mut s = session.lock().unwrap();
        if let Some(running) = &s.in_flight {
            return Err(ApiError::Conflict(format!(
                "search {running} is still running for this session"
            )));
        }
        let token = random_token();
        s.in_flight = Some(token.clone());
        s.jobs.insert(token.clone(), Job::Running);
        token
    };

    let (tx, rx) = oneshot::channel();
    let cache = st.cache.clone();
    let job_token = token.clone();
    tokio::task::spawn_blocking(move || {
        let ctx = SearchContext::new(cache, Control::new());
        let outcome = catch_unwind(AssertUnwindSafe(|| search_with(&doc, &pattern, &params, &ctx)));
        let mut s = session.lock().unwrap();
        let (status, body) = match outcome {
            Ok(Ok(result)) => {
                let json = result.to_json(&doc);
                let body = json.to_pretty();
                let record = SearchRecord {
                    pattern: req.pattern,
                    pattern_text: pattern.text(),
                    params,
                    result: json,
                };
                match s.record(JournalEvent::Searched { record }) {
                    Ok(()) => (StatusCode::OK, body),
                    Err(e) => (e.status(), e.body().to_string()),
                }
            }
            Ok(Err(e)) => (StatusCode::BAD_REQUEST, json!({ "error": e.to_string() }).to_string()),
            Err(_) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                json!({ "error": "search worker panicked" }).to_string(),
            ),
        };
        s.jobs.insert(
            job_token,
            Job::Done {
                status: status.as_u16(),
                body: body.clone(),
            },
        );
        s.in_flight = None;
        let _ = tx.send((status, body));
    });

    match tokio::time::timeout(st.config.sync_threshold, rx).await {
        Ok(Ok((status, body))) => Ok(json_text(status, body)),
        Ok(Err(_)) => Err(ApiError::Internal("search worker vanished".into())),
        Err(_) => Ok((
            StatusCode::ACCEPTED,
            Json(json!({ "token": token, "status": "running" })),
        )
            .into_response()),
    }
}

pub async fn poll_search(State(st): St, Path((id, token)): Path<(String, String)>) -> AppResult<Response> {
    let session = st.session(&id)?;
    let s = session.lock().unwrap();
    match s.jobs.get(&token) {
        None => Err(ApiError::NotFound(format!("search {token}"))),
        Some(Job::Running) => Ok((
            StatusCode::ACCEPTED,
            Json(json!({ "token": token, "status": "running" })),
        )
            .into_response()),
        Some(Job::Done { status, body }) => Ok(json_text(
            StatusCode::from_u16(*status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
            body.clone(),
        )),
    }
}

fn element_json(doc: &Document, index: usize, el: &Element) -> Value {
    let text: String = doc.symbols()[el.b..=el.e].iter().collect();
    json!({
        "index": index,
        "b": el.b,
        "e": el.e,
        "distance": el.distance,
        "status": el.status,
        "text": text,
    })
}

pub async fn edit_result(State(st): St, Path((id, n)): Path<(String, usize)>, body: Bytes) -> AppResult<Json<Value>> {
    let action: EditAction = parse(&body)?;
    let session = st.session(&id)?;
    let mut s = session.lock().unwrap();
    let doc = st.store.require(&s.doc_id)?;
    let current = s.element(n)?.clone();
    let element = match &action {
        EditAction::Reject => Element {
            status: ElementStatus::Rejected,
            ..current
        },
        EditAction::Restore => Element {
            status: ElementStatus::Pending,
            ..current
        },
        EditAction::Accept => Element {
            status: ElementStatus::Accepted,
            ..current
        },
        EditAction::SetBounds { b, e } => {
            let frag = doc.fragment(*b, *e).map_err(|e| ApiError::BadRequest(e.to_string()))?;
            let pattern: Vec<char> = s
                .search
                .as_ref()
                .map(|r| r.pattern_text.chars().collect())
                .unwrap_or_default();
            Element {
                b: *b,
                e: *e,
                distance: d(doc.slice(&frag), &pattern),
                ..current
            }
        }
    };
    s.record(JournalEvent::Edited {
        index: n,
        action,
        element: element.clone(),
    })?;
    Ok(Json(element_json(&doc, n, &element)))
}

#[derive(Deserialize)]
struct NewGroup {
    label: String,
}

/// The pattern (when it lies in the document) together with the accepted
/// elements, or with every non-rejected element when none is accepted.
fn group_members(doc: &Document, s: &Session) -> AppResult<Vec<TextFragment>> {
    let mut members = Vec::new();
    if let Some(PatternSpec::Interval { b, e }) = s.search.as_ref().map(|r| &r.pattern) {
        members.push(doc.fragment(*b, *e).map_err(|e| ApiError::Internal(e.to_string()))?);
    }
    let accepted = s.elements.iter().any(|el| el.status == ElementStatus::Accepted);
    for el in &s.elements {
        let chosen = if accepted {
            el.status == ElementStatus::Accepted
        } else {
            el.status != ElementStatus::Rejected
        };
        if chosen {
            members.push(
                doc.fragment(el.b, el.e)
                    .map_err(|e| ApiError::Internal(e.to_string()))?,
            );
        }
    }
    members.sort_by_key(|f| (f.b, f.e));
    members.dedup_by_key(|f| (f.b, f.e));
    Ok(members)
}

pub async fn save_group(State(st): St, Path(id): Path<String>, body: Bytes) -> AppResult<(StatusCode, Json<Value>)> {
    let req: NewGroup = parse(&body)?;
    let session = st.session(&id)?;
    let (doc, group) = {
        let s = session.lock().unwrap();
        let doc = st.store.require(&s.doc_id)?;
        let members = group_members(&doc, &s)?;
        let k = s.search.as_ref().map(|r| r.params.k).unwrap_or(1.0);
        if members.len() < 2 {
            return Err(ApiError::Unprocessable {
                message: format!("a group needs at least two members, got {}", members.len()),
                member: None,
                detail: Value::Null,
            });
        }
        let group = NearDuplicateGroup {
            label: req.label,
            k,
            members,
            archetype: None,
        };
        (doc, group)
    };

    let (doc, group, validation) = blocking(move || {
        let v = validate_group(&doc, &group).map_err(|e| ApiError::Unprocessable {
            message: e.to_string(),
            member: None,
            detail: Value::Null,
        })?;
        Ok((doc, group, v))
    })
    .await?;

    if let Some(violation) = &validation.violation {
        let m = violation.member();
        let frag = &group.members[m];
        return Err(ApiError::Unprocessable {
            message: format!("member {m} ({}..={}) fails validation", frag.b, frag.e),
            member: Some(m),
            detail: json!({
                "violation": violation,
                "fragment": doc.fragment_json(frag),
                "verification": validation.verification,
            }),
        });
    }
    let json = group.to_json(&doc, validation.verification);
    session
        .lock()
        .unwrap()
        .record(JournalEvent::GroupSaved { group: json.clone() })?;
    Ok((StatusCode::CREATED, Json(serde_json::to_value(json)?)))
}

#[derive(Deserialize)]
pub struct ExportQuery {
    format: Option<String>,
}

pub async fn export(State(st): St, Path(id): Path<String>, Query(q): Query<ExportQuery>) -> AppResult<Json<Value>> {
    let session = st.session(&id)?;
    match q.format.as_deref() {
        None | Some("json") => {}
        Some(other) => return Err(ApiError::BadRequest(format!("unsupported export format {other:?}"))),
    }
    let s = session.lock().unwrap();
    let length = st.store.get(&s.doc_id).map(|doc| doc.len());
    Ok(Json(json!({
        "session_id": s.id,
        "doc_id": s.doc_id,
        "groups": s.groups,
        "provenance": {
            "tool": "dupviper",
            "version": env!("CARGO_PKG_VERSION"),
            "document_length": length,
            "pattern": s.search.as_ref().map(|r| &r.pattern),
            "pattern_text": s.search.as_ref().map(|r| &r.pattern_text),
            "params": s.search.as_ref().map(|r| r.params),
        },
    })))
}
