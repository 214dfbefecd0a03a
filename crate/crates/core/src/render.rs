//! Image-backend boundary.
//!
//! The engine never looks at pixels: a [`GeneratorBackend`] turns a
//! [`RenderRequest`] (a genome plus resolution) into PNG bytes, and
//! [`RenderCache`] stores the result once per canonical genome id in a
//! content-addressed [`ImageStore`]. [`MockBackend`] is a procedural,
//! integer-only stand-in for the GAN worker so every test runs without a GPU.
//!
//! Worker wire format (`POST /render`):
//!
//! ```json
//! {"class_weights": [[195, "0.5"], [315, "0.5"]], "truncation": 0.5,
//!  "noise_seed": 42, "resolution": 256}
//! ```
//!
//! Weights travel as `%.17g` decimal strings. The worker answers `200` with an
//! `image/png` body or `422` with `{"error": reason}`; `GET /healthz` answers
//! `{"status": "ok", "model": name}`.

use std::collections::HashMap;
use std::fs;
use std::io::Cursor;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::decimal::format_g17;
use crate::genome::{CategoryId, GanimalId, Genome, WEIGHT_SUM_TOLERANCE};

pub const DEFAULT_RESOLUTION: u32 = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend rejected request: {0}")]
    Rejected(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RenderError {
    #[error("backend unavailable after {attempts} attempts: {last}")]
    BackendUnavailable { attempts: u32, last: String },
    #[error("render rejected: {0}")]
    RenderRejected(String),
    #[error("image store: {0}")]
    Store(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed render request: {0}")]
pub struct WireError(pub String);

#[derive(Debug, Clone, PartialEq)]
pub struct RenderRequest {
    pub class_weights: Vec<(CategoryId, f64)>,
    pub truncation: f64,
    pub noise_seed: u64,
    pub resolution: u32,
}

impl RenderRequest {
    pub fn from_genome(genome: &Genome, resolution: u32) -> RenderRequest {
        RenderRequest {
            class_weights: genome
                .components()
                .iter()
                .map(|c| (c.category, c.weight))
                .collect(),
            truncation: genome.truncation(),
            noise_seed: genome.noise_seed(),
            resolution,
        }
    }

    pub fn validate(&self) -> Result<(), WireError> {
        if self.class_weights.is_empty() {
            return Err(WireError("no class weights".into()));
        }
        if self.class_weights.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(WireError("class ids must be distinct and ascending".into()));
        }
        if self
            .class_weights
            .iter()
            .any(|(_, w)| !(w.is_finite() && *w > 0.0))
        {
            return Err(WireError("weights must be positive".into()));
        }
        let sum: f64 = self.class_weights.iter().map(|(_, w)| w).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(WireError(format!("weights sum to {sum}")));
        }
        if !(self.truncation > 0.0 && self.truncation <= 1.0) {
            return Err(WireError(format!(
                "truncation {} outside (0, 1]",
                self.truncation
            )));
        }
        if self.resolution == 0 {
            return Err(WireError("resolution must be positive".into()));
        }
        Ok(())
    }

    /// Same shape as the genome serialization, plus the resolution.
    pub fn canonical_string(&self) -> String {
        let weights: Vec<String> = self
            .class_weights
            .iter()
            .map(|(id, w)| format!("{id}:{}", format_g17(*w)))
            .collect();
        format!(
            "v1|trunc={}|seed={}|{}|res={}",
            format_g17(self.truncation),
            self.noise_seed,
            weights.join(","),
            self.resolution
        )
    }

    pub fn to_wire(&self) -> Value {
        let weights: Vec<Value> = self
            .class_weights
            .iter()
            .map(|(id, w)| json!([id, format_g17(*w)]))
            .collect();
        json!({
            "class_weights": weights,
            "truncation": self.truncation,
            "noise_seed": self.noise_seed,
            "resolution": self.resolution,
        })
    }

    pub fn from_wire(value: &Value) -> Result<RenderRequest, WireError> {
        let err = |m: &str| WireError(m.to_string());
        let weights = value["class_weights"]
            .as_array()
            .ok_or_else(|| err("class_weights must be an array"))?;
        let mut class_weights = Vec::with_capacity(weights.len());
        for entry in weights {
            let pair = entry
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| err("each class weight is [id, \"weight\"]"))?;
            let id = pair[0]
                .as_u64()
                .and_then(|v| CategoryId::try_from(v).ok())
                .ok_or_else(|| err("class id must be a small non-negative integer"))?;
            let weight: f64 = pair[1]
                .as_str()
                .ok_or_else(|| err("weights are decimal strings"))?
                .parse()
                .map_err(|_| err("weight is not a decimal number"))?;
            class_weights.push((id, weight));
        }
        let request = RenderRequest {
            class_weights,
            truncation: value["truncation"]
                .as_f64()
                .ok_or_else(|| err("truncation must be a number"))?,
            noise_seed: value["noise_seed"]
                .as_u64()
                .ok_or_else(|| err("noise_seed must be an unsigned integer"))?,
            resolution: value["resolution"]
                .as_u64()
                .and_then(|r| u32::try_from(r).ok())
                .ok_or_else(|| err("resolution must be an unsigned integer"))?,
        };
        request.validate()?;
        Ok(request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedImage {
    pub png: Vec<u8>,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    /// Hex SHA-256 of the PNG bytes.
    pub content_digest: String,
    pub uri: String,
    pub width: u32,
    pub height: u32,
}

impl ImageRef {
    pub fn for_bytes(png: &[u8], width: u32, height: u32) -> ImageRef {
        let content_digest = hex::encode(Sha256::digest(png));
        ImageRef {
            uri: format!("/images/{content_digest}.png"),
            content_digest,
            width,
            height,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub model: String,
    pub max_resolution: u32,
    pub supports_blend: bool,
}

/// Something that turns render requests into images. Implementations must be
/// deterministic: the same request yields byte-identical PNGs.
pub trait GeneratorBackend: Send + Sync {
    fn render(&self, request: &RenderRequest) -> Result<RenderedImage, BackendError>;
    fn capabilities(&self) -> Capabilities;
}

pub trait ImageStore: Send + Sync {
    fn put(&self, digest: &str, png: &[u8]) -> Result<(), String>;
    fn get(&self, digest: &str) -> Option<Vec<u8>>;
}

#[derive(Debug, Default)]
pub struct MemoryImageStore {
    images: Mutex<HashMap<String, Vec<u8>>>,
}

impl MemoryImageStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.images.lock().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ImageStore for MemoryImageStore {
    fn put(&self, digest: &str, png: &[u8]) -> Result<(), String> {
        self.images
            .lock()
            .expect("store lock")
            .entry(digest.to_string())
            .or_insert_with(|| png.to_vec());
        Ok(())
    }

    fn get(&self, digest: &str) -> Option<Vec<u8>> {
        self.images.lock().expect("store lock").get(digest).cloned()
    }
}

/// `<root>/<digest>.png` files.
#[derive(Debug, Clone)]
pub struct DirImageStore {
    root: PathBuf,
}

impl DirImageStore {
    pub fn open(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(DirImageStore { root })
    }

    fn path(&self, digest: &str) -> Option<PathBuf> {
        let valid = digest.len() == 64 && digest.bytes().all(|b| b.is_ascii_hexdigit());
        valid.then(|| self.root.join(format!("{digest}.png")))
    }
}

impl ImageStore for DirImageStore {
    fn put(&self, digest: &str, png: &[u8]) -> Result<(), String> {
        let path = self
            .path(digest)
            .ok_or_else(|| format!("bad digest `{digest}`"))?;
        if path.exists() {
            return Ok(());
        }
        let tmp = path.with_extension("png.tmp");
        fs::write(&tmp, png).map_err(|e| e.to_string())?;
        fs::rename(&tmp, &path).map_err(|e| e.to_string())
    }

    fn get(&self, digest: &str) -> Option<Vec<u8>> {
        fs::read(self.path(digest)?).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Extra attempts after the first failure.
    pub retries: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 2,
            backoff_ms: 100,
        }
    }
}

type Slot = Arc<Mutex<Option<ImageRef>>>;

/// Content-addressed render cache keyed by canonical genome id.
///
/// Concurrent requests for one genome wait on a per-genome slot, so a
/// genome reaches the backend at most once. Failures are not cached.
pub struct RenderCache {
    slots: Mutex<HashMap<GanimalId, Slot>>,
    retry: RetryPolicy,
    resolution: u32,
}

impl RenderCache {
    pub fn new(resolution: u32, retry: RetryPolicy) -> Self {
        RenderCache {
            slots: Mutex::new(HashMap::new()),
            retry,
            resolution,
        }
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    fn slot(&self, gid: GanimalId) -> Slot {
        self.slots
            .lock()
            .expect("cache lock")
            .entry(gid)
            .or_default()
            .clone()
    }

    pub fn get(&self, gid: &GanimalId) -> Option<ImageRef> {
        let slot = self.slots.lock().expect("cache lock").get(gid).cloned()?;
        let cached = slot.lock().expect("slot lock").clone();
        cached
    }

    /// Seeds the cache with a known image, e.g. while replaying a log.
    pub fn insert(&self, gid: GanimalId, image: ImageRef) {
        *self.slot(gid).lock().expect("slot lock") = Some(image);
    }

    pub fn render_cached(
        &self,
        backend: &dyn GeneratorBackend,
        store: &dyn ImageStore,
        genome: &Genome,
    ) -> Result<ImageRef, RenderError> {
        let slot = self.slot(genome.id());
        let mut guard = slot.lock().expect("slot lock");
        if let Some(image) = guard.as_ref() {
            return Ok(image.clone());
        }

        let request = RenderRequest::from_genome(genome, self.resolution);
        let attempts = self.retry.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 && self.retry.backoff_ms > 0 {
                std::thread::sleep(Duration::from_millis(
                    self.retry.backoff_ms * attempt as u64,
                ));
            }
            match backend.render(&request) {
                Ok(image) => {
                    let image_ref = ImageRef::for_bytes(&image.png, image.width, image.height);
                    store
                        .put(&image_ref.content_digest, &image.png)
                        .map_err(RenderError::Store)?;
                    *guard = Some(image_ref.clone());
                    return Ok(image_ref);
                }
                Err(BackendError::Rejected(reason)) => {
                    return Err(RenderError::RenderRejected(reason))
                }
                Err(BackendError::Unavailable(reason)) => last = reason,
            }
        }
        Err(RenderError::BackendUnavailable { attempts, last })
    }
}

/// Deterministic procedural images: category palettes blended by weight,
/// value-noise texture keyed by the noise seed, contrast scaled by
/// truncation. Everything after weight quantization is integer arithmetic,
/// and the request's canonical string is embedded as a PNG text chunk.
#[derive(Debug, Clone)]
pub struct MockBackend {
    pub max_resolution: u32,
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend {
            max_resolution: 1024,
        }
    }
}

const FIXED_ONE: u32 = 1 << 16;
const TEXT_KEYWORD: &str = "ganimal-request";

/// Base colour of a single category.
pub fn category_palette(id: CategoryId) -> [u8; 3] {
    let mut hasher = Sha256::new();
    hasher.update(b"ganimals-palette-v1");
    hasher.update(id.to_le_bytes());
    let d = hasher.finalize();
    [d[0], d[1], d[2]]
}

/// Weights as 16.16 fixed point summing to exactly 1.0.
fn quantize_weights(weights: &[(CategoryId, f64)]) -> Vec<u32> {
    let mut q: Vec<u32> = weights
        .iter()
        .map(|(_, w)| (w * FIXED_ONE as f64).round() as u32)
        .collect();
    let sum: i64 = q.iter().map(|&v| v as i64).sum();
    let largest = (0..q.len())
        .max_by_key(|&i| (q[i], std::cmp::Reverse(i)))
        .unwrap_or(0);
    q[largest] = (q[largest] as i64 + FIXED_ONE as i64 - sum) as u32;
    q
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn lattice(seed: u64, gx: u64, gy: u64) -> i64 {
    (splitmix64(seed ^ splitmix64(gx.wrapping_mul(0x1_0000_0001) ^ gy.rotate_left(32))) & 0xFF)
        as i64
}

impl MockBackend {
    /// Weighted palette blend before texturing, rounded half up.
    pub fn base_color(request: &RenderRequest) -> [u8; 3] {
        let q = quantize_weights(&request.class_weights);
        let mut out = [0u8; 3];
        for (ch, slot) in out.iter_mut().enumerate() {
            let acc: u64 = request
                .class_weights
                .iter()
                .zip(&q)
                .map(|((id, _), &w)| w as u64 * category_palette(*id)[ch] as u64)
                .sum();
            *slot = ((acc + (FIXED_ONE as u64 / 2)) >> 16) as u8;
        }
        out
    }

    /// Raw RGB8 pixels, row-major.
    pub fn pixels(request: &RenderRequest) -> Vec<u8> {
        let res = request.resolution as u64;
        let base = MockBackend::base_color(request);
        let contrast = (request.truncation * FIXED_ONE as f64).round() as i64;
        let cell = (res / 8).max(1);
        let mut data = Vec::with_capacity((res * res * 3) as usize);
        for y in 0..res {
            let (gy, fy) = (y / cell, (y % cell) as i64);
            for x in 0..res {
                let (gx, fx) = (x / cell, (x % cell) as i64);
                let c = cell as i64;
                let v = (lattice(request.noise_seed, gx, gy) * (c - fx) * (c - fy)
                    + lattice(request.noise_seed, gx + 1, gy) * fx * (c - fy)
                    + lattice(request.noise_seed, gx, gy + 1) * (c - fx) * fy
                    + lattice(request.noise_seed, gx + 1, gy + 1) * fx * fy)
                    / (c * c);
                // Up to ±96 levels at truncation 1.0.
                let delta = (v - 128) * contrast * 3 / (4 * FIXED_ONE as i64);
                for b in base {
                    data.push((b as i64 + delta).clamp(0, 255) as u8);
                }
            }
        }
        data
    }

    pub fn encode(request: &RenderRequest) -> Vec<u8> {
        let res = request.resolution;
        let data = MockBackend::pixels(request);
        let mut png_bytes = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut png_bytes, res, res);
            encoder.set_color(png::ColorType::Rgb);
            encoder.set_depth(png::BitDepth::Eight);
            encoder.set_compression(png::Compression::Fast);
            encoder
                .add_text_chunk(TEXT_KEYWORD.to_string(), request.canonical_string())
                .expect("latin-1 text");
            let mut writer = encoder.write_header().expect("in-memory write");
            writer.write_image_data(&data).expect("in-memory write");
        }
        png_bytes
    }
}

impl GeneratorBackend for MockBackend {
    fn render(&self, request: &RenderRequest) -> Result<RenderedImage, BackendError> {
        request
            .validate()
            .map_err(|e| BackendError::Rejected(e.0))?;
        if request.resolution > self.max_resolution {
            return Err(BackendError::Rejected(format!(
                "resolution {} exceeds {}",
                request.resolution, self.max_resolution
            )));
        }
        Ok(RenderedImage {
            png: MockBackend::encode(request),
            width: request.resolution,
            height: request.resolution,
        })
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            model: "procedural-mock-v1".to_string(),
            max_resolution: self.max_resolution,
            supports_blend: true,
        }
    }
}

/// Width and height of a PNG, checking that it decodes.
pub fn png_dimensions(png_bytes: &[u8]) -> Result<(u32, u32), String> {
    let decoder = png::Decoder::new(Cursor::new(png_bytes));
    let reader = decoder.read_info().map_err(|e| e.to_string())?;
    let info = reader.info();
    Ok((info.width, info.height))
}
