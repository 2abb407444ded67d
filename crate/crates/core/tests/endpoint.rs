mod common;

use std::collections::HashSet;

use common::{completion, dead_url, MockServer};
use gp_icl::error::Error;
use gp_icl::gp::Demo;
use gp_icl::kernel::KernelSpec;
use gp_icl::predictor::{run_predictions, EndpointConfig, EndpointPredictor, Predictor, TaskQuery};
use gp_icl::prompt::render_prompt;
use gp_icl::records::failure;
use gp_icl::tasks::{generate_taskset, GenConfig};

fn config(url: &str) -> EndpointConfig {
    EndpointConfig {
        backoff_ms: 1,
        timeout_ms: 5_000,
        ..EndpointConfig::new(url, "test-model")
    }
}

fn query<'a>(demos: &'a [Demo], q: &'a [f64]) -> TaskQuery<'a> {
    TaskQuery {
        episode_id: "ep00000",
        n: demos.len(),
        demos,
        query: q,
    }
}

#[test]
fn sends_chat_request_and_parses_reply() {
    let server = MockServer::start(|_, _| (200, completion("Y: 0.250")));
    std::env::set_var("GP_ICL_TEST_KEY_A", "sekret");
    let cfg = EndpointConfig {
        api_key_env: Some("GP_ICL_TEST_KEY_A".into()),
        ..config(&server.url)
    };
    let p = EndpointPredictor::new(cfg).unwrap();
    let demos = [Demo::new(vec![1.0], 0.5)];
    let pred = p.predict(&query(&demos, &[2.0])).unwrap();
    assert_eq!(pred.value, Some(0.25));
    assert_eq!(pred.raw_text, "Y: 0.250");

    let reqs = server.requests();
    assert_eq!(reqs.len(), 1);
    let r = &reqs[0];
    assert_eq!(r.path, "/v1/chat/completions");
    assert_eq!(r.header("authorization"), Some("Bearer sekret"));
    assert_eq!(r.body["model"], "test-model");
    assert_eq!(r.body["temperature"], 0.0);
    assert_eq!(r.body["max_tokens"], 32);
    assert_eq!(r.body["messages"].as_array().unwrap().len(), 1);
    assert_eq!(r.body["messages"][0]["role"], "user");
    assert_eq!(r.prompt(), render_prompt(&demos, &[2.0], 1, 3).unwrap().text);
}

#[test]
fn missing_key_variable_is_usage_error() {
    let cfg = EndpointConfig {
        api_key_env: Some("GP_ICL_TEST_KEY_UNSET".into()),
        ..config("http://127.0.0.1:9/v1")
    };
    assert!(matches!(EndpointPredictor::new(cfg), Err(Error::Usage(_))));
}

#[test]
fn retries_transient_statuses() {
    let server = MockServer::start(|i, _| match i {
        0 => (503, "busy".into()),
        1 => (429, "slow down".into()),
        _ => (200, completion("-1.5e-2")),
    });
    let p = EndpointPredictor::new(config(&server.url)).unwrap();
    let pred = p.predict(&query(&[], &[0.0])).unwrap();
    assert_eq!(pred.value, Some(-0.015));
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn exhaustion_reports_last_status() {
    let server = MockServer::start(|_, _| (500, "down".into()));
    let cfg = EndpointConfig {
        max_retries: 2,
        ..config(&server.url)
    };
    let p = EndpointPredictor::new(cfg).unwrap();
    match p.predict(&query(&[], &[0.0])) {
        Err(Error::Transport { status, .. }) => assert_eq!(status, Some(500)),
        other => panic!("expected transport error, got {other:?}"),
    }
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = MockServer::start(|_, _| (400, "bad request".into()));
    let p = EndpointPredictor::new(config(&server.url)).unwrap();
    let err = p.predict(&query(&[], &[0.0])).unwrap_err();
    assert!(matches!(err, Error::Transport { status: Some(400), .. }));
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn unreachable_endpoint_is_transport_error() {
    let cfg = EndpointConfig {
        max_retries: 1,
        ..config(&dead_url())
    };
    let p = EndpointPredictor::new(cfg).unwrap();
    assert!(matches!(
        p.predict(&query(&[], &[0.0])),
        Err(Error::Transport { status: None, .. })
    ));
}

#[test]
fn parallel_run_records_every_task() {
    // Echo the number of demonstrations back as the prediction.
    let server = MockServer::start(|_, r| {
        let n = r.prompt().matches(", Y: ").count();
        if n == 3 {
            (200, completion("I cannot say"))
        } else {
            (200, completion(&format!("{n}")))
        }
    });
    let cfg = EndpointConfig {
        parallelism: 4,
        ..config(&server.url)
    };
    let p = EndpointPredictor::new(cfg).unwrap();
    let gen = GenConfig {
        n_functions: 5,
        n_points: 8,
        ..GenConfig::standard(KernelSpec::squared_exponential(8.0, 0.001).unwrap(), 2, 3)
    };
    let ts = generate_taskset(&gen).unwrap();
    let mut recs = Vec::new();
    let s = run_predictions(&p, &ts, 0..=7, 4, &HashSet::new(), &mut |r| {
        recs.push(r);
        Ok(())
    })
    .unwrap();
    assert_eq!(recs.len(), 40);
    assert_eq!(s.succeeded, 35);
    assert_eq!(s.unparseable, 5);
    for r in &recs {
        if r.n == 3 {
            assert_eq!(r.error.as_deref(), Some(failure::UNPARSEABLE));
            assert_eq!(r.y_hat, None);
        } else {
            assert_eq!(r.y_hat, Some(r.n as f64));
            assert_eq!(r.predictor_id, "test-model");
        }
    }
    assert_eq!(server.requests().len(), 40);
}
