#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use densecorr::mesh::{PartId, SurfaceMesh};
use densecorr::parametrization::{build_atlas, AtlasOptions, UVAtlas};
use densecorr::synthetic::{ellipsoid, EllipsoidSpec};
use densecorr_service::{AnnotationService, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

pub const RES: u32 = 128;

pub struct Fixture {
    pub mesh: Arc<SurfaceMesh>,
    pub atlas: Arc<UVAtlas>,
    pub store: TempDir,
    pub service: Arc<AnnotationService>,
}

pub fn geometry() -> (Arc<SurfaceMesh>, Arc<UVAtlas>) {
    let mesh = ellipsoid(EllipsoidSpec::default());
    let atlas = build_atlas(&mesh, &[], &AtlasOptions::default()).unwrap();
    (Arc::new(mesh), Arc::new(atlas))
}

pub fn config(store: &TempDir) -> ServiceConfig {
    ServiceConfig {
        resolution: RES,
        ..ServiceConfig::new(store.path())
    }
}

pub fn fixture() -> Fixture {
    let (mesh, atlas) = geometry();
    let store = tempfile::tempdir().unwrap();
    let service = Arc::new(AnnotationService::open(mesh.clone(), atlas.clone(), config(&store)).unwrap());
    Fixture {
        mesh,
        atlas,
        store,
        service,
    }
}

impl Fixture {
    pub fn reopen(&self) -> AnnotationService {
        AnnotationService::open(self.mesh.clone(), self.atlas.clone(), config(&self.store)).unwrap()
    }

    pub fn app(&self) -> Router {
        densecorr_service::router(self.service.clone())
    }

    /// Center of the `nth` covered pixel (wrapping) in a view of `part`.
    pub fn covered_pixel(&self, part: u8, view: usize, nth: usize) -> (f64, f64) {
        let rendered = self.service.part_views(PartId::new(part).unwrap()).unwrap();
        let gb = &rendered.views.views[view].buffers;
        let covered: Vec<usize> = gb
            .face_id
            .iter()
            .enumerate()
            .filter(|(_, &f)| f >= 0)
            .map(|(i, _)| i)
            .collect();
        assert!(!covered.is_empty(), "view has covered pixels");
        let i = covered[nth % covered.len()];
        ((i as u32 % gb.width) as f64 + 0.5, (i as u32 / gb.width) as f64 + 0.5)
    }
}

impl Fixture {
    /// A clickable (view, x, y) for `part`, trying views from `nth % 6` on;
    /// a view looking at the inside of an open part can be empty.
    pub fn clickable(&self, part: u8, nth: usize) -> (usize, f64, f64) {
        let rendered = self.service.part_views(PartId::new(part).unwrap()).unwrap();
        (0..6)
            .map(|k| (nth + k) % 6)
            .find(|&v| rendered.views.views[v].buffers.face_id.iter().any(|&f| f >= 0))
            .map(|v| {
                let (x, y) = self.covered_pixel(part, v, nth);
                (v, x, y)
            })
            .expect("part is visible in some view")
    }
}

pub fn square_pixels(x0: u32, y0: u32, side: u32) -> Vec<[u32; 2]> {
    (y0..y0 + side).flat_map(|y| (x0..x0 + side).map(move |x| [x, y])).collect()
}

pub fn create_body(image_id: u64, masks: Vec<(u8, Vec<[u32; 2]>)>) -> Value {
    json!({
        "image_id": image_id,
        "width": 200,
        "height": 200,
        "seed": 7,
        "annotator": "tester",
        "masks": masks.into_iter().map(|(p, px)| json!({"part": p, "pixels": px})).collect::<Vec<_>>(),
    })
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.bytes)))
    }
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let content_type = resp
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply {
        status,
        content_type,
        bytes,
    }
}
