mod common;

use axum::http::StatusCode;
use common::*;
use densecorr::io::parse_dataset;
use densecorr::mesh::PartId;
use densecorr::render::{project_to_views, ViewMeta};
use densecorr::sampler::{PartMask, Rle};
use densecorr_service::{ClickResponse, NextTask, SessionSummary};
use serde_json::json;

async fn create(app: &axum::Router, body: serde_json::Value) -> SessionSummary {
    let r = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.bytes));
    serde_json::from_slice(&r.bytes).unwrap()
}

async fn click(app: &axum::Router, id: &str, target: usize, view: usize, (x, y): (f64, f64)) -> common::Reply {
    call(
        app,
        "POST",
        &format!("/sessions/{id}/clicks"),
        Some(json!({"target": target, "view": view, "x": x, "y": y})),
    )
    .await
}

/// Annotates every remaining target of a session with valid clicks.
async fn complete(f: &Fixture, app: &axum::Router, id: &str) {
    loop {
        let r = call(app, "GET", &format!("/sessions/{id}/next-task"), None).await;
        let task: NextTask = serde_json::from_slice(&r.bytes).unwrap();
        let Some(target) = task.target else { break };
        let r = click(app, id, target.index, 0, f.covered_pixel(target.part.get(), 0, target.index * 7)).await;
        assert_eq!(r.status, StatusCode::OK);
    }
}

#[tokio::test]
async fn one_pixel_mask_gives_one_target() {
    let f = fixture();
    let app = f.app();
    let s = create(&app, create_body(1, vec![(3, vec![[5, 6]])])).await;
    assert_eq!(s.total, 1);
    assert_eq!((s.targets[0].x, s.targets[0].y), (5, 6));
    assert_eq!(s.targets[0].part, PartId::new(3).unwrap());
}

#[tokio::test]
async fn targets_are_ordered_by_part_then_succession() {
    let f = fixture();
    let app = f.app();
    // 900 px -> round(30 / 10) = 3 points; 22500 px -> 15, capped at 14.
    let s = create(
        &app,
        create_body(1, vec![(2, square_pixels(0, 0, 150)), (1, square_pixels(160, 160, 30))]),
    )
    .await;
    assert_eq!(s.total, 17);
    let parts: Vec<u8> = s.targets.iter().map(|t| t.part.get()).collect();
    assert_eq!(parts, [vec![1; 3], vec![2; 14]].concat());
    for (i, t) in s.targets.iter().enumerate() {
        assert_eq!(t.index, i);
        let first = if i < 3 { 0 } else { 3 };
        assert_eq!(t.succession, i - first);
    }
}

#[tokio::test]
async fn duplicate_creation_is_deterministic() {
    let f = fixture();
    let app = f.app();
    let body = create_body(4, vec![(1, square_pixels(10, 10, 60)), (4, square_pixels(100, 20, 40))]);
    let a = create(&app, body.clone()).await;
    let b = create(&app, body).await;
    assert_ne!(a.id, b.id);
    assert_eq!(a.targets, b.targets);
}

#[tokio::test]
async fn rle_masks_are_accepted() {
    let f = fixture();
    let app = f.app();
    let mask = PartMask::new(200, 200, PartId::new(2).unwrap(), (0..40).flat_map(|y| (0..40).map(move |x| (x, y))).collect())
        .unwrap();
    let rle: Rle = mask.to_rle();
    let body = json!({"image_id": 9, "width": 200, "height": 200, "masks": [{"part": 2, "rle": rle}]});
    let s = create(&app, body).await;
    assert_eq!(s.total, 4);

    let bad = json!({"image_id": 9, "width": 100, "height": 200, "masks": [{"part": 2, "rle": rle}]});
    let r = call(&app, "POST", "/sessions", Some(bad)).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["code"], "InvalidRequest");
}

#[tokio::test]
async fn create_errors() {
    let f = fixture();
    let app = f.app();
    let r = call(&app, "POST", "/sessions", Some(create_body(1, vec![]))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["code"], "NoMasks");
    assert!(r.json()["message"].is_string());

    let r = call(&app, "POST", "/sessions", Some(json!({"image_id": "x"}))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["code"], "InvalidRequest");

    let r = call(&app, "POST", "/sessions", Some(create_body(1, vec![(25, vec![[0, 0]])]))).await;
    assert_eq!(r.json()["code"], "InvalidRequest");

    let r = call(&app, "GET", "/sessions/nope/next-task", None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["code"], "NotFound");
}

#[tokio::test]
async fn views_and_metadata() {
    let f = fixture();
    let app = f.app();
    let r = call(&app, "GET", "/parts/2/views/3", None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.content_type.as_deref(), Some("image/png"));
    let img = image::load_from_memory(&r.bytes).unwrap();
    assert_eq!((img.width(), img.height()), (RES, RES));

    let r = call(&app, "GET", "/parts/2/views/3/meta", None).await;
    let meta: ViewMeta = serde_json::from_slice(&r.bytes).unwrap();
    assert_eq!((meta.part.get(), meta.view, meta.width), (2, 3, RES));
    let rendered = f.service.part_views(PartId::new(2).unwrap()).unwrap();
    assert_eq!(meta, rendered.views.views[3].meta());

    for uri in ["/parts/2/views/6", "/parts/0/views/0", "/parts/25/views/0/meta", "/parts/9/views/0", "/parts/x/views/0"] {
        let r = call(&app, "GET", uri, None).await;
        assert_eq!(r.status, StatusCode::NOT_FOUND, "{uri}");
        assert!(r.json()["code"].is_string());
    }
}

#[tokio::test]
async fn click_flow_with_revision_and_errors() {
    let f = fixture();
    let app = f.app();
    let s = create(&app, create_body(1, vec![(1, square_pixels(0, 0, 30))])).await;
    assert_eq!(s.total, 3);
    let id = &s.id;

    // Background (the view's margin) is rejected and leaves the cursor alone.
    let r = click(&app, id, 0, 0, (0.5, 0.5)).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["code"], "NoSurface");

    let r = click(&app, id, 1, 0, f.covered_pixel(1, 0, 0)).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.json()["code"], "StaleSession");

    let r = click(&app, id, 0, 6, (1.0, 1.0)).await;
    assert_eq!(r.json()["code"], "InvalidView");

    // First annotation: the stored face is the one under the pixel.
    let pixel = f.covered_pixel(1, 2, 40);
    let r = click(&app, id, 0, 2, pixel).await;
    assert_eq!(r.status, StatusCode::OK);
    let resp: ClickResponse = serde_json::from_slice(&r.bytes).unwrap();
    let rendered = f.service.part_views(PartId::new(1).unwrap()).unwrap();
    let gb = &rendered.views.views[2].buffers;
    let face = gb.face_id[gb.index(pixel.0 as u32, pixel.1 as u32)];
    assert_eq!(resp.point.surface.face as i32, face);
    assert_eq!((resp.cursor, resp.revision), (1, false));
    assert_eq!(resp.point.part, PartId::new(1).unwrap());
    assert!((0.0..=1.0).contains(&resp.point.u) && (0.0..=1.0).contains(&resp.point.v));
    assert_eq!(resp.projections, project_to_views(&f.mesh, &rendered.views, &resp.point.surface));
    assert_eq!(resp.projections.len(), 6);
    assert!(resp.projections[2].visible);

    // Revision: overwrites, cursor unchanged.
    let r = click(&app, id, 0, 4, f.covered_pixel(1, 4, 10)).await;
    let rev: ClickResponse = serde_json::from_slice(&r.bytes).unwrap();
    assert_eq!((rev.cursor, rev.revision), (1, true));
    let snap = f.service.snapshot(id).unwrap();
    assert_eq!(snap.points.len(), 1);
    assert_eq!(snap.points[&0].view, 4);

    let r = call(&app, "GET", &format!("/sessions/{id}/next-task"), None).await;
    let task: NextTask = serde_json::from_slice(&r.bytes).unwrap();
    assert_eq!(task.cursor, 1);
    assert_eq!(task.target.unwrap().index, 1);
}

#[tokio::test]
async fn export_round_trips() {
    let f = fixture();
    let app = f.app();
    let r = call(&app, "GET", "/export", None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["code"], "NothingToExport");

    let a = create(&app, create_body(11, vec![(1, square_pixels(0, 0, 30)), (3, vec![[50, 50]])])).await;
    let b = create(&app, create_body(12, vec![(2, square_pixels(0, 0, 50))])).await;
    let c = create(&app, create_body(12, vec![(4, vec![[1, 1]])])).await;
    complete(&f, &app, &a.id).await;
    complete(&f, &app, &b.id).await;
    // `c` stays incomplete and is left out.
    let r = call(&app, "GET", "/export", None).await;
    assert_eq!(r.status, StatusCode::OK);
    let text = String::from_utf8(r.bytes.clone()).unwrap();
    let ds = parse_dataset(&text).unwrap();
    assert_eq!(ds.images.iter().map(|i| i.id).collect::<Vec<_>>(), [11, 12]);
    assert_eq!(ds.annotations.len(), 2);
    assert_eq!(ds.annotations[0].dp_points.len(), a.total);
    assert_eq!(ds.annotations[1].dp_points.len(), b.total);
    assert!(ds.annotations.iter().all(|a| a.dp_points.iter().all(|p| p.vertex.is_some())));
    assert_eq!(densecorr::io::canonical_json(&ds).unwrap(), text);

    let r = call(&app, "GET", "/export?image_id=12", None).await;
    assert_eq!(parse_dataset(std::str::from_utf8(&r.bytes).unwrap()).unwrap().annotations.len(), 1);
    let r = call(&app, "GET", &format!("/export?sessions={}", c.id), None).await;
    assert_eq!(r.json()["code"], "NothingToExport");
    let r = call(&app, "GET", &format!("/export?sessions={},{}", a.id, c.id), None).await;
    assert_eq!(parse_dataset(std::str::from_utf8(&r.bytes).unwrap()).unwrap().images.len(), 1);

    // The exported points feed evaluation directly.
    let gts = densecorr::io::ground_truth_instances(&ds, None, Some(&f.mesh)).unwrap();
    assert_eq!(gts.iter().map(|g| g.points.len()).sum::<usize>(), a.total + b.total);
}

#[tokio::test]
async fn completion_is_absorbing() {
    let f = fixture();
    let app = f.app();
    let s = create(&app, create_body(1, vec![(4, vec![[3, 3]])])).await;
    complete(&f, &app, &s.id).await;
    let r = call(&app, "GET", &format!("/sessions/{}/next-task", s.id), None).await;
    let task: NextTask = serde_json::from_slice(&r.bytes).unwrap();
    assert_eq!((task.cursor, task.total, task.target), (1, 1, None));
    assert_eq!(r.json()["status"], "complete");
    let r = click(&app, &s.id, 1, 0, f.covered_pixel(4, 0, 0)).await;
    assert_eq!(r.json()["code"], "StaleSession");
    let r = click(&app, &s.id, 0, 1, f.covered_pixel(4, 1, 3)).await;
    let resp: ClickResponse = serde_json::from_slice(&r.bytes).unwrap();
    assert!(resp.revision);
    assert_eq!(r.json()["status"], "complete");
}
