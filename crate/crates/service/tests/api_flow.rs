mod common;

use axum::http::StatusCode;
use common::{app, app_with, send, send_raw, small_config, user_in};
use ganimals::ServiceConfig;
use ganimals_core::render::png_dimensions;
use ganimals_core::PolicyMix;
use serde_json::{json, Value};

fn ids(world: &Value) -> Vec<String> {
    world["population"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["ganimal"]["id"].as_str().unwrap().to_string())
        .collect()
}

fn categories(g: &Value) -> Vec<u64> {
    g["genome"]["components"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["category"].as_u64().unwrap())
        .collect()
}

/// Two population members with different category sets.
fn breedable_pair(world: &Value) -> (String, String) {
    let members = world["population"].as_array().unwrap();
    for (i, a) in members.iter().enumerate() {
        for b in &members[i + 1..] {
            if categories(&a["ganimal"]) != categories(&b["ganimal"]) {
                return (
                    a["ganimal"]["id"].as_str().unwrap().into(),
                    b["ganimal"]["id"].as_str().unwrap().into(),
                );
            }
        }
    }
    panic!("no breedable pair");
}

#[tokio::test]
async fn assign_discover_keep_feed_annotate_breed_permalink() {
    let app = app();
    let r = &app.router;
    let user = "alice";

    let (s, assignment) = send(r, "POST", &format!("/api/users/{user}/assign"), None).await;
    assert_eq!(s, StatusCode::OK);
    let world_id = assignment["world_id"].as_u64().unwrap();

    let (s, discovery) = send(r, "POST", &format!("/api/users/{user}/discover"), None).await;
    assert_eq!(s, StatusCode::OK, "{discovery}");
    assert_eq!(discovery["world_id"].as_u64().unwrap(), world_id);
    let found = discovery["ganimal"]["id"].as_str().unwrap().to_string();
    let uri = discovery["ganimal"]["image"]["uri"]
        .as_str()
        .unwrap()
        .to_string();
    let (s, png) = send_raw(r, "GET", &uri, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(png_dimensions(&png).unwrap(), (32, 32));

    // Keeping a discovery means feeding it for the first time.
    let (s, receipt) = send(r, "POST", &format!("/api/users/{user}/feed/{found}"), None).await;
    assert_eq!(s, StatusCode::OK, "{receipt}");
    assert_eq!(receipt["adopted"], json!(true));
    let (_, receipt) = send(r, "POST", &format!("/api/users/{user}/feed/{found}"), None).await;
    assert_eq!(receipt["adopted"], json!(false));
    assert_eq!(receipt["energy"].as_f64().unwrap(), 1.5);

    let (s, ack) = send(
        r,
        "POST",
        &format!("/api/users/{user}/annotate/{found}"),
        Some(r#"{"ratings": {"cute": 7}, "morphology": {"has_eyes": true}}"#),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{ack}");
    assert_eq!(ack["metrics"], json!(["cute"]));
    let (_, board) = send(
        r,
        "GET",
        &format!("/api/users/{user}/leaderboards/cute"),
        None,
    )
    .await;
    assert_eq!(board[0]["ganimal_id"].as_str().unwrap(), found);
    assert_eq!(board[0]["mean_rating"].as_f64().unwrap(), 7.0);

    let (_, world) = send(r, "GET", &format!("/api/users/{user}/world"), None).await;
    assert!(ids(&world).contains(&found));
    let energies: Vec<f64> = world["population"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["energy"].as_f64().unwrap())
        .collect();
    assert!(
        energies.windows(2).all(|w| w[0] >= w[1]),
        "energy descending"
    );
    assert_eq!(
        world["population"][0]["ganimal"]["id"].as_str().unwrap(),
        found
    );

    let (a, b) = breedable_pair(&world);
    let (s, child) = send(
        r,
        "POST",
        &format!("/api/users/{user}/breed"),
        Some(&json!({"parent_a": a, "parent_b": b, "name": "Pufferdoodle"}).to_string()),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{child}");
    assert_eq!(child["generation"], json!("G2"));
    assert_eq!(child["lineage"], json!([a, b]));
    let weights: f64 = child["genome"]["components"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["weight"].as_f64().unwrap())
        .sum();
    assert!((weights - 1.0).abs() < 1e-12);

    let permalink = child["permalink"].as_str().unwrap();
    let (s, page) = send(r, "GET", permalink, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(page["name"], json!("Pufferdoodle"));
    assert_eq!(page, child);
}

#[tokio::test]
async fn every_mutation_appends_one_event() {
    let app = app();
    let r = &app.router;
    let mut expected = app.log.len();

    // First contact assigns and discovers in one batch.
    send(r, "POST", "/api/users/bob/discover", None).await;
    expected += 2;
    assert_eq!(app.log.len(), expected);

    let (_, d) = send(r, "POST", "/api/users/bob/discover", None).await;
    expected += 1;
    assert_eq!(app.log.len(), expected);
    let gid = d["ganimal"]["id"].as_str().unwrap().to_string();

    for (method, uri, body) in [
        ("POST", format!("/api/users/bob/feed/{gid}"), None),
        (
            "POST",
            format!("/api/users/bob/annotate/{gid}"),
            Some(r#"{"ratings":{"creepy":2}}"#),
        ),
        (
            "POST",
            format!("/api/users/bob/name/{gid}"),
            Some(r#"{"name":"Lumpy"}"#),
        ),
        ("POST", "/api/tick".to_string(), None),
    ] {
        let (s, v) = send(r, method, &uri, body).await;
        assert_eq!(s, StatusCode::OK, "{uri}: {v}");
        expected += 1;
        assert_eq!(app.log.len(), expected, "{uri}");
    }

    // Reads and rejected writes append nothing.
    for (method, uri) in [
        ("GET", "/api/users/bob/world".to_string()),
        ("POST", "/api/users/bob/assign".to_string()),
        ("POST", format!("/api/users/nobody/feed/{gid}")),
        ("GET", format!("/g/{gid}")),
    ] {
        send(r, method, &uri, None).await;
        assert_eq!(app.log.len(), expected, "{uri}");
    }
}

#[tokio::test]
async fn breeding_errors() {
    let app = app();
    let r = &app.router;
    let n = app.platform.config().n_worlds;
    let (u0, u1) = (user_in(0, n), user_in(1, n));
    send(r, "POST", &format!("/api/users/{u0}/assign"), None).await;
    send(r, "POST", &format!("/api/users/{u1}/assign"), None).await;
    let (_, w0) = send(r, "GET", &format!("/api/users/{u0}/world"), None).await;
    let (_, w1) = send(r, "GET", &format!("/api/users/{u1}/world"), None).await;
    let (a, b) = breedable_pair(&w0);
    let foreign = ids(&w1)[0].clone();
    let breed = |x: &str, y: &str| json!({"parent_a": x, "parent_b": y}).to_string();
    let uri = format!("/api/users/{u0}/breed");

    let (s, _) = send(r, "POST", &uri, Some(&breed(&a, &foreign))).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let unknown = "0".repeat(64);
    let (s, _) = send(r, "POST", &uri, Some(&breed(&a, &unknown))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = send(r, "POST", &uri, Some(&breed(&a, &a))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = send(r, "POST", &uri, Some("{\"parent_a\": 3}")).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, child) = send(r, "POST", &uri, Some(&breed(&a, &b))).await;
    assert_eq!(s, StatusCode::OK);
    let c = child["id"].as_str().unwrap().to_string();
    let (_, w0) = send(r, "GET", &format!("/api/users/{u0}/world"), None).await;
    let other = ids(&w0).into_iter().find(|g| *g != a && *g != b).unwrap();
    let (s, body) = send(r, "POST", &uri, Some(&breed(&c, &other))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{body}");

    // Swapping parents yields the same child.
    let (_, swapped) = send(r, "POST", &uri, Some(&breed(&b, &a))).await;
    assert_eq!(swapped["id"].as_str().unwrap(), c);

    // The bred ganimal is private to u0's world.
    let (s, _) = send(
        r,
        "POST",
        &format!("/api/users/{u1}/annotate/{c}"),
        Some(r#"{"ratings":{"cute":3}}"#),
    )
    .await;
    assert_eq!(s, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn feed_and_annotate_errors() {
    let app = app();
    let r = &app.router;
    let n = app.platform.config().n_worlds;
    let (u0, u1) = (user_in(0, n), user_in(1, n));
    send(r, "POST", &format!("/api/users/{u0}/assign"), None).await;
    send(r, "POST", &format!("/api/users/{u1}/assign"), None).await;
    let (_, w0) = send(r, "GET", &format!("/api/users/{u0}/world"), None).await;
    let (_, w1) = send(r, "GET", &format!("/api/users/{u1}/world"), None).await;
    let mine = ids(&w0)[0].clone();
    let foreign = ids(&w1)[0].clone();

    let (s, _) = send(r, "POST", &format!("/api/users/{u0}/feed/{foreign}"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = send(r, "POST", &format!("/api/users/{u0}/feed/xyz"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = send(r, "POST", &format!("/api/users/ghost/feed/{mine}"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = send(r, "POST", "/api/users/bad%20id/assign", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let annotate = format!("/api/users/{u0}/annotate/{mine}");
    for bad in [
        "not json",
        r#"{"ratings":{"cute":9}}"#,
        r#"{"ratings":{"sleepy":3}}"#,
        r#"{"mood":1}"#,
    ] {
        let (s, body) = send(r, "POST", &annotate, Some(bad)).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{bad}: {body}");
        assert!(body["error"].is_string());
    }
    let (s, _) = send(
        r,
        "POST",
        &format!("/api/users/{u0}/annotate/{foreign}"),
        Some(r#"{"ratings":{"cute":3}}"#),
    )
    .await;
    assert_eq!(s, StatusCode::FORBIDDEN);

    // Feeding keeps one member alive; the unfed rest are removed and then 404.
    let feed = format!("/api/users/{u0}/feed/{mine}");
    let victim = ids(&w0).into_iter().find(|g| *g != mine).unwrap();
    for _ in 0..10 {
        let (s, _) = send(r, "POST", &feed, None).await;
        assert_eq!(s, StatusCode::OK);
        let (s, _) = send(r, "POST", "/api/tick", None).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (_, w0) = send(r, "GET", &format!("/api/users/{u0}/world"), None).await;
    assert_eq!(ids(&w0), vec![mine.clone()]);
    let (s, _) = send(r, "POST", &format!("/api/users/{u0}/feed/{victim}"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    // World 1 was never fed and is empty, independently of world 0.
    let (_, w1) = send(r, "GET", &format!("/api/users/{u1}/world"), None).await;
    assert!(ids(&w1).is_empty());
}

#[tokio::test]
async fn world_views_never_mix_worlds() {
    let app = app();
    let r = &app.router;
    let n = app.platform.config().n_worlds;
    for w in 0..n {
        let u = user_in(w, n);
        for _ in 0..3 {
            send(r, "POST", &format!("/api/users/{u}/discover"), None).await;
        }
    }
    for w in 0..n {
        let u = user_in(w, n);
        let (_, view) = send(r, "GET", &format!("/api/users/{u}/world"), None).await;
        assert_eq!(view["world_id"].as_u64().unwrap(), w as u64);
        for m in view["population"].as_array().unwrap() {
            assert_eq!(m["ganimal"]["world_id"].as_u64().unwrap(), w as u64);
        }
    }
}

#[tokio::test]
async fn stats_endpoint() {
    let app = app();
    let r = &app.router;
    let (s, _) = send(
        r,
        "GET",
        "/api/stats?metric=cute&predicate=contains_dog",
        None,
    )
    .await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, body) = send(
        r,
        "GET",
        "/api/stats?metric=cute&predicate=contains_bird",
        None,
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{body}");
    let (s, _) = send(
        r,
        "GET",
        "/api/stats?metric=fluffy&predicate=contains_dog",
        None,
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = send(r, "GET", "/api/stats?metric=cute", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    // Rate every seed in every world: dogs 6, others 2.
    let taxonomy = ganimals_core::Taxonomy::bundled();
    let n = app.platform.config().n_worlds;
    for w in 0..n {
        let u = user_in(w, n);
        send(r, "POST", &format!("/api/users/{u}/assign"), None).await;
        let (_, view) = send(r, "GET", &format!("/api/users/{u}/world"), None).await;
        for m in view["population"].as_array().unwrap() {
            let dog = categories(&m["ganimal"])
                .iter()
                .any(|c| taxonomy.is_dog(*c as ganimals_core::CategoryId));
            let cute = if dog { 6 } else { 2 };
            let id = m["ganimal"]["id"].as_str().unwrap();
            let body = json!({"ratings": {"cute": cute}}).to_string();
            let (s, _) = send(
                r,
                "POST",
                &format!("/api/users/{u}/annotate/{id}"),
                Some(&body),
            )
            .await;
            assert_eq!(s, StatusCode::OK);
        }
    }
    let (s, cmp) = send(
        r,
        "GET",
        "/api/stats?metric=cute&predicate=contains_dog",
        None,
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{cmp}");
    assert_eq!(cmp["mean_with"].as_f64().unwrap(), 6.0);
    assert_eq!(cmp["mean_without"].as_f64().unwrap(), 2.0);
    assert_eq!(
        cmp["n_with"].as_u64().unwrap() + cmp["n_without"].as_u64().unwrap(),
        4 * 12
    );
}

#[tokio::test]
async fn exploitation_only_returns_world_local_ganimals() {
    let config = ServiceConfig {
        mix: PolicyMix {
            p_recipe: 0.0,
            p_uniform: 0.0,
            p_stratified: 0.0,
            p_leaderboard: 1.0,
        },
        ..small_config()
    };
    let app = app_with(config);
    let r = &app.router;
    let n = app.platform.config().n_worlds;
    let u = user_in(2, n);
    send(r, "POST", &format!("/api/users/{u}/assign"), None).await;
    let (_, view) = send(r, "GET", &format!("/api/users/{u}/world"), None).await;
    let local = ids(&view);
    for id in &local[..3] {
        let (s, _) = send(
            r,
            "POST",
            &format!("/api/users/{u}/annotate/{id}"),
            Some(r#"{"ratings":{"cute":5,"creepy":5,"realistic":5,"memorable":5}}"#),
        )
        .await;
        assert_eq!(s, StatusCode::OK);
    }
    for _ in 0..20 {
        let (s, d) = send(r, "POST", &format!("/api/users/{u}/discover"), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(d["procedure"], json!("leaderboard"));
        assert_eq!(d["fallback"], json!(false));
        assert!(d["characteristic"].is_string());
        assert!(local[..3].contains(&d["ganimal"]["id"].as_str().unwrap().to_string()));
    }
}

#[tokio::test]
async fn first_discovery_is_golden() {
    let first = |_: ()| async {
        let app = app();
        let (_, d) = send(&app.router, "POST", "/api/users/golden-user/discover", None).await;
        d
    };
    let a = first(()).await;
    let b = first(()).await;
    assert_eq!(a, b);
    assert_eq!(
        a["world_id"],
        json!(ganimals_core::ecology::assign_user("golden-user", 4).0)
    );
    assert_eq!(a["ganimal"]["id"].as_str().unwrap(), GOLDEN_FIRST_DISCOVERY);
}

const GOLDEN_FIRST_DISCOVERY: &str =
    "c7f054424c29028b9932bf46a5e72e3683369456ad370d42cec06ee147a7907b";

#[tokio::test]
async fn healthz_and_unknowns() {
    let app = app();
    let r = &app.router;
    let (s, h) = send(r, "GET", "/healthz", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(h["status"], json!("ok"));
    assert_eq!(h["model"], json!("procedural-mock-v1"));
    let missing = "ab".repeat(32);
    assert_eq!(
        send(r, "GET", &format!("/g/{missing}"), None).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        send(r, "GET", "/g/nope", None).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        send(r, "GET", &format!("/images/{missing}.png"), None)
            .await
            .0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        send(r, "GET", "/images/abc", None).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        send(r, "GET", "/api/users/ghost/world", None).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        send(r, "GET", "/api/users/ghost/leaderboards/cute", None)
            .await
            .0,
        StatusCode::NOT_FOUND
    );
    let u = user_in(0, 4);
    send(r, "POST", &format!("/api/users/{u}/assign"), None).await;
    assert_eq!(
        send(
            r,
            "GET",
            &format!("/api/users/{u}/leaderboards/fluffy"),
            None
        )
        .await
        .0,
        StatusCode::BAD_REQUEST
    );
    let (s, empty) = send(
        r,
        "GET",
        &format!("/api/users/{u}/leaderboards/creepy"),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(empty, json!([]));
}
