use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use dstkit::backends::{
    Backend, BackendDescriptor, BackendKind, Health, RemoteBackend, RetryPolicy,
};
use dstkit::prompting::{EstimatorInput, GeneratorInput};
use dstkit::selftrain::trainer::{HttpTrainer, TrainJob, TrainTask, Trainer};
use dstkit::statecore::{TurnRef, ValueSet};
use dstkit::Error;

type Handler = dyn Fn(&str, &str, usize) -> (u16, String) + Send + Sync;

/// Local server answering each request on its own thread.
struct Server {
    url: String,
    hits: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<(String, String)>>>,
}

fn serve(handler: impl Fn(&str, &str, usize) -> (u16, String) + Send + Sync + 'static) -> Server {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}", server.server_addr().to_ip().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let handler: Arc<Handler> = Arc::new(handler);
    let (h, b) = (hits.clone(), bodies.clone());
    thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let n = h.fetch_add(1, Ordering::SeqCst) + 1;
            let handler = handler.clone();
            let b = b.clone();
            thread::spawn(move || {
                let mut body = String::new();
                req.as_reader().read_to_string(&mut body).unwrap();
                let path = req.url().to_string();
                b.lock().unwrap().push((path.clone(), body.clone()));
                let (status, reply) = handler(&path, &body, n);
                let _ =
                    req.respond(tiny_http::Response::from_string(reply).with_status_code(status));
            });
        }
    });
    Server { url, hits, bodies }
}

fn client(url: &str, concurrency: usize) -> RemoteBackend {
    let retry = RetryPolicy {
        attempts: 3,
        initial_backoff: Duration::from_millis(10),
    };
    RemoteBackend::new(url, Duration::from_secs(5), concurrency, retry)
}

fn turn() -> TurnRef {
    TurnRef::new("d", 1)
}

fn gen_input() -> GeneratorInput {
    GeneratorInput {
        text: "hello".into(),
    }
}

fn est_input() -> EstimatorInput {
    EstimatorInput {
        text: "[CLS] x".into(),
        value_count: 1,
    }
}

#[test]
fn values_are_decoded_and_input_is_sent() {
    let s = serve(|_, _, _| (200, r#"{"raw":"cheap | north"}"#.into()));
    let vs = client(&s.url, 2)
        .generate_values(&gen_input(), &turn())
        .unwrap();
    assert_eq!(vs, ValueSet::new(["cheap", "north"]));
    let bodies = s.bodies.lock().unwrap();
    assert_eq!(bodies[0].0, "/v1/values");
    let sent: serde_json::Value = serde_json::from_str(&bodies[0].1).unwrap();
    assert_eq!(sent["input"], "hello");
}

#[test]
fn server_errors_are_retried() {
    let s = serve(|_, _, n| {
        if n < 3 {
            (503, "busy".into())
        } else {
            (200, r#"{"domain_slot":" hotel-area "}"#.into())
        }
    });
    let slot = client(&s.url, 1)
        .generate_slot("p", "north", &turn())
        .unwrap();
    assert_eq!(slot, "hotel-area");
    assert_eq!(s.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn retries_are_bounded() {
    let s = serve(|_, _, _| (500, "down".into()));
    let err = client(&s.url, 1)
        .generate_values(&gen_input(), &turn())
        .unwrap_err();
    assert!(matches!(err, Error::Backend { .. }), "{err}");
    assert_eq!(s.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let s = serve(|_, _, _| (400, "bad".into()));
    let err = client(&s.url, 1)
        .generate_values(&gen_input(), &turn())
        .unwrap_err();
    assert!(matches!(err, Error::Backend { .. }));
    assert!(err.to_string().contains("400"));
    assert_eq!(s.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn malformed_bodies_are_protocol_errors() {
    let s = serve(|_, _, _| (200, "{not json".into()));
    let err = client(&s.url, 1)
        .generate_values(&gen_input(), &turn())
        .unwrap_err();
    assert!(matches!(err, Error::Protocol { .. }), "{err}");
    assert_eq!(s.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn verdicts_off_the_simplex_are_protocol_errors() {
    let s = serve(|_, _, _| {
        (
            200,
            r#"{"p_correct":0.9,"p_incomplete":0.9,"p_incorrect":0.0}"#.into(),
        )
    });
    let err = client(&s.url, 1)
        .estimate_values(&est_input(), &ValueSet::default(), &turn())
        .unwrap_err();
    assert!(matches!(err, Error::Protocol { .. }), "{err}");

    let s = serve(|_, _, _| {
        (
            200,
            r#"{"p_correct":0.7,"p_incomplete":0.2,"p_incorrect":0.1}"#.into(),
        )
    });
    let v = client(&s.url, 1)
        .estimate_values(&est_input(), &ValueSet::default(), &turn())
        .unwrap();
    assert_eq!(v.probabilities(), [0.7, 0.2, 0.1]);
}

#[test]
fn in_flight_requests_are_capped() {
    let current = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    let (c, p) = (current.clone(), peak.clone());
    let s = serve(move |_, _, _| {
        let now = c.fetch_add(1, Ordering::SeqCst) + 1;
        p.fetch_max(now, Ordering::SeqCst);
        thread::sleep(Duration::from_millis(40));
        c.fetch_sub(1, Ordering::SeqCst);
        (200, r#"{"raw":""}"#.into())
    });
    let backend = Arc::new(client(&s.url, 3));
    let workers: Vec<_> = (0..12)
        .map(|_| {
            let b = backend.clone();
            thread::spawn(move || b.generate_values(&gen_input(), &turn()).unwrap())
        })
        .collect();
    for w in workers {
        assert!(w.join().unwrap().is_empty());
    }
    assert_eq!(s.hits.load(Ordering::SeqCst), 12);
    assert!(
        peak.load(Ordering::SeqCst) <= 3,
        "peak {}",
        peak.load(Ordering::SeqCst)
    );
    assert!(peak.load(Ordering::SeqCst) >= 2);
}

#[test]
fn health_reports_model_or_cause() {
    let s = serve(|path, _, _| {
        assert_eq!(path, "/v1/health");
        (200, r#"{"status":"ok","model":"t5-small"}"#.into())
    });
    assert_eq!(
        client(&s.url, 1).health_check(),
        Health::Healthy {
            model: "t5-small".into()
        }
    );
    let s = serve(|_, _, _| (200, r#"{"status":"loading"}"#.into()));
    assert!(!client(&s.url, 1).health_check().is_healthy());
    assert!(!client("http://127.0.0.1:1", 1).health_check().is_healthy());
}

fn job(dir: &std::path::Path) -> TrainJob {
    TrainJob {
        task: TrainTask::Values,
        train_file: PathBuf::from("/data/values-train.jsonl"),
        out_dir: dir.to_path_buf(),
        iteration: 2,
    }
}

#[test]
fn http_trainer_posts_job_and_reads_announced_backend() {
    let s = serve(|_, _, _| {
        (
            200,
            r#"{"backend":{"kind":"remote","endpoint":"http://student:9"}}"#.into(),
        )
    });
    let dir = tempfile::tempdir().unwrap();
    let trainer = HttpTrainer::new(
        &s.url,
        BackendDescriptor::remote("http://fallback"),
        Duration::from_secs(5),
    );
    let model = trainer.train(&job(dir.path())).unwrap();
    assert_eq!(model.backend.kind, BackendKind::Remote);
    assert_eq!(model.backend.endpoint.as_deref(), Some("http://student:9"));
    let bodies = s.bodies.lock().unwrap();
    assert_eq!(bodies[0].0, "/v1/train");
    let sent: serde_json::Value = serde_json::from_str(&bodies[0].1).unwrap();
    assert_eq!(sent["task"], "values");
    assert_eq!(sent["iteration"], 2);
    assert_eq!(sent["train_file"], "/data/values-train.jsonl");
}

#[test]
fn http_trainer_falls_back_to_configured_student() {
    let s = serve(|_, _, _| (200, String::new()));
    let dir = tempfile::tempdir().unwrap();
    let trainer = HttpTrainer::new(
        &s.url,
        BackendDescriptor::remote("http://fallback"),
        Duration::from_secs(5),
    );
    let model = trainer.train(&job(dir.path())).unwrap();
    assert_eq!(model.backend.endpoint.as_deref(), Some("http://fallback"));

    let s = serve(|_, _, _| (500, "oom".into()));
    let trainer = HttpTrainer::new(
        &s.url,
        BackendDescriptor::remote("http://fallback"),
        Duration::from_secs(5),
    );
    assert!(matches!(
        trainer.train(&job(dir.path())),
        Err(Error::Trainer(_))
    ));
}
