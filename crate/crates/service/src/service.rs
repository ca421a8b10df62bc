use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};
use std::time::{SystemTime, UNIX_EPOCH};

use densecorr::io::{encode_png, read_view_bundle, view_image, DatasetAnnotation, DatasetFile, DatasetImage, DpPoint};
use densecorr::mesh::{PartId, SurfaceMesh, PART_COUNT};
use densecorr::parametrization::UVAtlas;
use densecorr::render::{
    click_to_surface, project_to_views, render_part_views, PartViews, RenderError, ViewMeta, ViewProjection,
};
use densecorr::sampler::{choose_point_count, sample_points, PartMask};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::session::{
    replay, CorrespondencePoint, CreateSessionRequest, Journal, JournalEvent, MaskInput, SessionInfo, SessionState,
    SessionStatus, Target,
};

pub const DEFAULT_RESOLUTION: u32 = 512;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Directory holding one journal per session.
    pub store: PathBuf,
    /// Pre-rendered view bundles; parts missing there are rendered on demand.
    pub views_dir: Option<PathBuf>,
    pub resolution: u32,
}

impl ServiceConfig {
    pub fn new(store: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            store: store.into(),
            views_dir: None,
            resolution: DEFAULT_RESOLUTION,
        }
    }
}

/// The six views of a part together with their encoded images.
#[derive(Debug)]
pub struct RenderedPart {
    pub views: PartViews,
    pub png: Vec<Vec<u8>>,
}

struct Session {
    /// Held for the whole of a write: serializes writers of this session.
    journal: Mutex<Journal>,
    /// Latest committed state; readers clone the `Arc` and never wait on a
    /// writer's geometry work.
    state: RwLock<Arc<SessionState>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NextTask {
    pub session_id: String,
    pub status: SessionStatus,
    pub cursor: usize,
    pub total: usize,
    pub target: Option<Target>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SessionSummary {
    pub id: String,
    pub image_id: u64,
    pub status: SessionStatus,
    pub cursor: usize,
    pub total: usize,
    pub targets: Vec<Target>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ClickRequest {
    pub target: usize,
    pub view: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClickResponse {
    pub point: CorrespondencePoint,
    pub projections: Vec<ViewProjection>,
    pub revision: bool,
    pub cursor: usize,
    pub total: usize,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExportFilter {
    #[serde(default)]
    pub image_id: Option<u64>,
    #[serde(default)]
    pub sessions: Option<Vec<String>>,
}

pub struct AnnotationService {
    mesh: Arc<SurfaceMesh>,
    atlas: Arc<UVAtlas>,
    config: ServiceConfig,
    parts: Vec<OnceLock<Result<Arc<RenderedPart>, String>>>,
    sessions: RwLock<BTreeMap<String, Arc<Session>>>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn mask_from_input(input: &MaskInput, width: u32, height: u32) -> Result<PartMask, ServiceError> {
    if input.part.is_background() {
        return Err(ServiceError::InvalidRequest("mask part must be in 1..=24".into()));
    }
    let invalid = |e: densecorr::sampler::SamplerError| {
        ServiceError::InvalidRequest(format!("mask for part {}: {e}", input.part))
    };
    match (&input.rle, &input.pixels) {
        (Some(rle), None) => {
            if rle.size != [height, width] {
                return Err(ServiceError::InvalidRequest(format!(
                    "mask for part {} has size {:?}, image is [{height}, {width}]",
                    input.part, rle.size
                )));
            }
            PartMask::from_rle(rle, input.part).map_err(invalid)
        }
        (None, Some(px)) => PartMask::new(width, height, input.part, px.iter().map(|&[x, y]| (x, y)).collect())
            .map_err(invalid),
        _ => Err(ServiceError::InvalidRequest(format!(
            "mask for part {} needs exactly one of rle or pixels",
            input.part
        ))),
    }
}

impl AnnotationService {
    /// Opens the store, replaying every journal found there.
    pub fn open(mesh: Arc<SurfaceMesh>, atlas: Arc<UVAtlas>, config: ServiceConfig) -> Result<Self, ServiceError> {
        if config.resolution < 8 {
            return Err(ServiceError::InvalidRequest(format!(
                "resolution {} is too small",
                config.resolution
            )));
        }
        let dir = config.store.join("sessions");
        fs::create_dir_all(&dir).map_err(|e| ServiceError::Journal(format!("{}: {e}", dir.display())))?;
        let mut sessions = BTreeMap::new();
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| ServiceError::Journal(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "ndjson"))
            .collect();
        entries.sort();
        for path in entries {
            let state = replay(&path)?;
            tracing::info!(session = %state.info.id, cursor = state.cursor, "replayed session");
            let id = state.info.id.clone();
            let session = Session {
                journal: Mutex::new(Journal::open(path)?),
                state: RwLock::new(Arc::new(state)),
            };
            sessions.insert(id, Arc::new(session));
        }
        Ok(AnnotationService {
            mesh,
            atlas,
            config,
            parts: (0..PART_COUNT).map(|_| OnceLock::new()).collect(),
            sessions: RwLock::new(sessions),
        })
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn atlas(&self) -> &UVAtlas {
        &self.atlas
    }

    fn journal_path(&self, id: &str) -> PathBuf {
        self.config.store.join("sessions").join(format!("{id}.ndjson"))
    }

    /// Views of a part, loaded from the bundle directory or rendered on first
    /// use and cached for the life of the service.
    pub fn part_views(&self, part: PartId) -> Result<Arc<RenderedPart>, ServiceError> {
        if part.is_background() {
            return Err(ServiceError::NotFound("part 0".into()));
        }
        if self.mesh.part_faces(part).is_empty() {
            return Err(ServiceError::NotFound(format!("part {part} on this mesh")));
        }
        self.parts[part.slot()]
            .get_or_init(|| {
                let bundle = match &self.config.views_dir {
                    Some(dir) => read_view_bundle(&self.mesh, part, dir).map_err(|e| e.to_string())?,
                    None => None,
                };
                let views = match bundle {
                    Some(v) => v,
                    None => render_part_views(&self.mesh, part, self.config.resolution).map_err(|e| e.to_string())?,
                };
                let png = views
                    .views
                    .iter()
                    .map(|v| encode_png(&view_image(v).into()).map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?;
                tracing::debug!(part = %part, "views ready");
                Ok(Arc::new(RenderedPart { views, png }))
            })
            .clone()
            .map_err(ServiceError::Internal)
    }

    pub fn view_png(&self, part: PartId, view: usize) -> Result<Vec<u8>, ServiceError> {
        let rendered = self.part_views(part)?;
        rendered.png.get(view).cloned().ok_or(ServiceError::InvalidView(view))
    }

    pub fn view_meta(&self, part: PartId, view: usize) -> Result<ViewMeta, ServiceError> {
        let rendered = self.part_views(part)?;
        let v = rendered.views.views.get(view).ok_or(ServiceError::InvalidView(view))?;
        Ok(v.meta())
    }

    /// Samples targets for every mask and persists the new session. Targets
    /// run part by part in increasing part id, each part in succession order.
    pub fn create_session(&self, request: &CreateSessionRequest) -> Result<SessionSummary, ServiceError> {
        if request.masks.is_empty() {
            return Err(ServiceError::NoMasks);
        }
        let mut masks = BTreeMap::new();
        for input in &request.masks {
            let mask = mask_from_input(input, request.width, request.height)?;
            if masks.insert(input.part, mask).is_some() {
                return Err(ServiceError::InvalidRequest(format!("duplicate mask for part {}", input.part)));
            }
        }
        let mut targets = Vec::new();
        let (mut lo, mut hi) = ([u32::MAX; 2], [0u32; 2]);
        for (&part, mask) in &masks {
            for &(x, y) in mask.pixels() {
                lo = [lo[0].min(x), lo[1].min(y)];
                hi = [hi[0].max(x), hi[1].max(y)];
            }
            let sampled = sample_points(mask, choose_point_count(mask), request.seed)
                .map_err(|e| ServiceError::InvalidRequest(format!("part {part}: {e}")))?;
            for p in sampled.points {
                targets.push(Target {
                    index: targets.len(),
                    part,
                    x: p.x,
                    y: p.y,
                    succession: p.succession,
                });
            }
        }
        let info = SessionInfo {
            id: uuid::Uuid::new_v4().simple().to_string(),
            image_id: request.image_id,
            width: request.width,
            height: request.height,
            seed: request.seed,
            annotator: request.annotator.clone(),
            bbox: [
                f64::from(lo[0]),
                f64::from(lo[1]),
                f64::from(hi[0] - lo[0] + 1),
                f64::from(hi[1] - lo[1] + 1),
            ],
            created_ms: now_ms(),
        };
        let mut journal = Journal::create(self.journal_path(&info.id))?;
        journal.append(&JournalEvent::Created {
            session: info.clone(),
            targets: targets.clone(),
        })?;
        let state = SessionState::new(info, targets);
        let summary = summarize(&state);
        tracing::info!(session = %summary.id, image = summary.image_id, targets = summary.total, "session created");
        self.sessions.write().insert(
            summary.id.clone(),
            Arc::new(Session {
                journal: Mutex::new(journal),
                state: RwLock::new(Arc::new(state)),
            }),
        );
        Ok(summary)
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ServiceError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("session {id}")))
    }

    /// Snapshot of a session's committed state.
    pub fn snapshot(&self, id: &str) -> Result<Arc<SessionState>, ServiceError> {
        Ok(self.session(id)?.state.read().clone())
    }

    pub fn session_summary(&self, id: &str) -> Result<SessionSummary, ServiceError> {
        Ok(summarize(&*self.snapshot(id)?))
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.read().keys().cloned().collect()
    }

    pub fn next_task(&self, id: &str) -> Result<NextTask, ServiceError> {
        let s = self.snapshot(id)?;
        Ok(NextTask {
            session_id: s.info.id.clone(),
            status: s.status(),
            cursor: s.cursor,
            total: s.targets.len(),
            target: s.targets.get(s.cursor).copied(),
        })
    }

    /// Resolves a click on a view of the target's part and stores it. The
    /// cursor target is a first annotation and advances the cursor; an
    /// earlier target is a revision and overwrites its point.
    pub fn submit_click(&self, id: &str, click: &ClickRequest) -> Result<ClickResponse, ServiceError> {
        let session = self.session(id)?;
        let mut journal = session.journal.lock();
        let current = session.state.read().clone();
        let revision = current.classify(click.target).ok_or(ServiceError::StaleSession {
            target: click.target,
            cursor: current.cursor,
            total: current.targets.len(),
        })?;
        let target = current.targets[click.target];
        let rendered = self.part_views(target.part)?;
        let view = rendered.views.view(click.view).map_err(|_| ServiceError::InvalidView(click.view))?;
        let surface = click_to_surface(view, click.x, click.y).map_err(|e| match e {
            RenderError::NoSurface { .. } | RenderError::OutOfBounds { .. } => ServiceError::NoSurface {
                x: click.x,
                y: click.y,
            },
            other => ServiceError::Internal(other.to_string()),
        })?;
        if surface.part(&self.mesh) != Some(target.part) {
            return Err(ServiceError::Internal(format!(
                "view of part {} resolved to face {}",
                target.part, surface.face
            )));
        }
        let [u, v] = surface
            .uv(&self.mesh, &self.atlas)
            .ok_or_else(|| ServiceError::Internal(format!("atlas has no chart for part {}", target.part)))?;
        if !((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)) {
            return Err(ServiceError::Internal(format!("uv ({u}, {v}) outside the unit square")));
        }
        let point = CorrespondencePoint {
            target: target.index,
            x: target.x,
            y: target.y,
            part: target.part,
            view: click.view,
            click: [click.x, click.y],
            surface,
            u,
            v,
            vertex: surface.nearest_vertex(&self.mesh),
            annotator: current.info.annotator.clone(),
            timestamp_ms: now_ms(),
        };
        let projections = project_to_views(&self.mesh, &rendered.views, &surface);
        let event = JournalEvent::Click {
            point: point.clone(),
            revision,
        };
        let mut next = (*current).clone();
        next.apply(&event)?;
        journal.append(&event)?;
        let response = ClickResponse {
            point,
            projections,
            revision,
            cursor: next.cursor,
            total: next.targets.len(),
            status: next.status(),
        };
        *session.state.write() = Arc::new(next);
        Ok(response)
    }

    /// Dataset of the complete sessions matching the filter, one annotation
    /// per session, ordered by image, then creation time, then session id.
    pub fn export(&self, filter: &ExportFilter) -> Result<DatasetFile, ServiceError> {
        let wanted: Option<BTreeSet<&str>> = filter
            .sessions
            .as_ref()
            .map(|ids| ids.iter().map(String::as_str).collect());
        let snapshots: Vec<Arc<SessionState>> = self
            .sessions
            .read()
            .iter()
            .filter(|(id, _)| wanted.as_ref().is_none_or(|w| w.contains(id.as_str())))
            .map(|(_, s)| s.state.read().clone())
            .collect();
        let mut complete: Vec<_> = snapshots
            .into_iter()
            .filter(|s| s.status() == SessionStatus::Complete)
            .filter(|s| filter.image_id.is_none_or(|i| i == s.info.image_id))
            .collect();
        if complete.is_empty() {
            return Err(ServiceError::NothingToExport);
        }
        complete.sort_by(|a, b| {
            (a.info.image_id, a.info.created_ms, &a.info.id).cmp(&(b.info.image_id, b.info.created_ms, &b.info.id))
        });
        let mut dataset = DatasetFile::default();
        for (k, s) in complete.iter().enumerate() {
            if dataset.images.last().is_none_or(|i| i.id != s.info.image_id) {
                dataset.images.push(DatasetImage {
                    id: s.info.image_id,
                    width: s.info.width,
                    height: s.info.height,
                });
            }
            dataset.annotations.push(DatasetAnnotation {
                id: k as u64 + 1,
                image_id: s.info.image_id,
                bbox: Some(s.info.bbox),
                score: None,
                dp_points: s
                    .points
                    .values()
                    .map(|p| DpPoint {
                        x: f64::from(p.x),
                        y: f64::from(p.y),
                        part: p.part,
                        u: p.u,
                        v: p.v,
                        vertex: Some(p.vertex),
                    })
                    .collect(),
            });
        }
        Ok(dataset)
    }
}

fn summarize(s: &SessionState) -> SessionSummary {
    SessionSummary {
        id: s.info.id.clone(),
        image_id: s.info.image_id,
        status: s.status(),
        cursor: s.cursor,
        total: s.targets.len(),
        targets: s.targets.clone(),
    }
}
