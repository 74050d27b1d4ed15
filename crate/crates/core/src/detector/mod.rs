//! Building detection over projected views.
//!
//! Two implementations sit behind [`Detector`]: an in-process chroma key for
//! synthetic scenes and a line-delimited JSON protocol spoken with an
//! external model process.

mod chroma;
mod external;

use std::str::FromStr;
use std::time::Duration;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Rgb;

pub use chroma::{detect_chroma, MIN_COMPONENT_AREA_PX};
pub use external::{external_round_trip, ExternalDetector, PROTOCOL_VERSION};

pub const DEFAULT_LABEL: &str = "building";
pub const DEFAULT_CHROMA_TOLERANCE: u8 = 8;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

const SCORE_TIE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// `[x, y, w, h]` in pixels, origin at the top-left corner.
    pub bbox_xywh: [f64; 4],
    pub score: f64,
    pub label: String,
}

impl Detection {
    pub fn center(&self) -> (f64, f64) {
        let [x, y, w, h] = self.bbox_xywh;
        (x + w / 2.0, y + h / 2.0)
    }

    /// Clamps the box into a `width`×`height` image and checks the invariants.
    pub fn clamped(mut self, width: u32, height: u32) -> Result<Self> {
        let [x, y, w, h] = self.bbox_xywh;
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite())
            || w <= 0.0
            || h <= 0.0
        {
            return Err(Error::ProtocolError(format!(
                "invalid bbox {:?}",
                self.bbox_xywh
            )));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::ProtocolError(format!(
                "score {} outside [0, 1]",
                self.score
            )));
        }
        let x0 = x.clamp(0.0, width as f64);
        let y0 = y.clamp(0.0, height as f64);
        let x1 = (x + w).clamp(0.0, width as f64);
        let y1 = (y + h).clamp(0.0, height as f64);
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::ProtocolError(format!(
                "bbox {:?} lies outside the {width}x{height} image",
                self.bbox_xywh
            )));
        }
        self.bbox_xywh = [x0, y0, x1 - x0, y1 - y0];
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChromaSpec {
    pub target: Rgb,
    pub tolerance: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSpec {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DetectorSpec {
    Chroma(ChromaSpec),
    External(ExternalSpec),
}

impl DetectorSpec {
    pub fn chroma(target: Rgb) -> Self {
        DetectorSpec::Chroma(ChromaSpec {
            target,
            tolerance: DEFAULT_CHROMA_TOLERANCE,
        })
    }

    /// Opens a detector session for this spec; external specs launch the
    /// adapter process and wait for its ready line.
    pub fn open(&self) -> Result<Box<dyn Detector>> {
        Ok(match self {
            DetectorSpec::Chroma(spec) => Box::new(ChromaDetector(spec.clone())),
            DetectorSpec::External(spec) => Box::new(ExternalDetector::launch(spec)?),
        })
    }
}

/// Parses `chroma:RRGGBB[:TOL]` or `exec:COMMAND ARGS...`.
impl FromStr for DetectorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("chroma:") {
            let (color, tol) = match rest.split_once(':') {
                Some((c, t)) => (
                    c,
                    t.parse::<u8>()
                        .map_err(|_| Error::InvalidConfig(format!("bad chroma tolerance {t:?}")))?,
                ),
                None => (rest, DEFAULT_CHROMA_TOLERANCE),
            };
            return Ok(DetectorSpec::Chroma(ChromaSpec {
                target: color.parse()?,
                tolerance: tol,
            }));
        }
        if let Some(cmd) = s.strip_prefix("exec:") {
            let command: Vec<String> = cmd.split_whitespace().map(str::to_owned).collect();
            if command.is_empty() {
                return Err(Error::InvalidConfig("exec detector needs a command".into()));
            }
            return Ok(DetectorSpec::External(ExternalSpec {
                command,
                timeout: DEFAULT_TIMEOUT,
            }));
        }
        Err(Error::InvalidConfig(format!(
            "unknown detector {s:?} (expected chroma:RRGGBB or exec:CMD)"
        )))
    }
}

pub trait Detector {
    fn detect(&mut self, image: &RgbImage) -> Result<Vec<Detection>>;
}

pub struct ChromaDetector(pub ChromaSpec);

impl Detector for ChromaDetector {
    fn detect(&mut self, image: &RgbImage) -> Result<Vec<Detection>> {
        Ok(detect_chroma(image, &self.0))
    }
}

/// One-shot detection: external specs launch, query and shut down an
/// adapter for this single image.
pub fn detect(image: &RgbImage, spec: &DetectorSpec) -> Result<Vec<Detection>> {
    if image.width() == 0 || image.height() == 0 {
        return Err(Error::InvalidDimensions("empty image".into()));
    }
    spec.open()?.detect(image)
}

/// Highest score wins; near-ties go to the box centered closest to the
/// image's vertical midline, then to the lexicographically smallest box.
pub fn select_primary(detections: &[Detection], image_width: u32) -> Option<Detection> {
    let best = detections
        .iter()
        .map(|d| d.score)
        .fold(f64::NEG_INFINITY, f64::max);
    let mid = image_width as f64 / 2.0;
    detections
        .iter()
        .filter(|d| d.score >= best - SCORE_TIE_EPS)
        .min_by(|a, b| {
            let da = (a.center().0 - mid).abs();
            let db = (b.center().0 - mid).abs();
            da.total_cmp(&db)
                .then_with(|| {
                    a.bbox_xywh
                        .iter()
                        .zip(b.bbox_xywh.iter())
                        .map(|(p, q)| p.total_cmp(q))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .then_with(|| b.score.total_cmp(&a.score))
                .then_with(|| a.label.cmp(&b.label))
        })
        .cloned()
}
