use std::f64::consts::TAU;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{digest_rng, score_from_word, FingerSimConfig, SimError, MAXINT};
use crate::codec::{ByteReader, ByteWriter, DecodeError};

pub const ENROLLMENT_SCANS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinutiaKind {
    RidgeEnding,
    Bifurcation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minutia {
    pub x: u32,
    pub y: u32,
    /// Radians in `[0, 2π)`.
    pub angle: f64,
    pub kind: MinutiaKind,
}

/// Minutiae template (FMD). Holds no trace of the source that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFingerTemplate")]
pub struct FingerTemplate {
    width: u32,
    height: u32,
    minutiae: Vec<Minutia>,
}

#[derive(Deserialize)]
struct RawFingerTemplate {
    width: u32,
    height: u32,
    minutiae: Vec<Minutia>,
}

impl TryFrom<RawFingerTemplate> for FingerTemplate {
    type Error = SimError;

    fn try_from(raw: RawFingerTemplate) -> Result<Self, Self::Error> {
        FingerTemplate::new(raw.width, raw.height, raw.minutiae)
    }
}

impl FingerTemplate {
    pub fn new(width: u32, height: u32, minutiae: Vec<Minutia>) -> Result<Self, SimError> {
        if minutiae.is_empty() {
            return Err(SimError::TemplateShape(
                "finger template has no minutiae".into(),
            ));
        }
        for m in &minutiae {
            if m.x >= width || m.y >= height {
                return Err(SimError::TemplateShape(format!(
                    "minutia ({}, {}) outside {}x{} image",
                    m.x, m.y, width, height
                )));
            }
            if !(m.angle >= 0.0 && m.angle < TAU) {
                return Err(SimError::TemplateShape(format!(
                    "minutia angle {} outside [0, 2π)",
                    m.angle
                )));
            }
        }
        Ok(Self {
            width,
            height,
            minutiae,
        })
    }

    pub fn minutiae(&self) -> &[Minutia] {
        &self.minutiae
    }

    pub fn extent(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        self.write(&mut w);
        w.into_bytes()
    }

    pub(crate) fn write(&self, w: &mut ByteWriter) {
        w.u32(self.width).u32(self.height).len(self.minutiae.len());
        for m in &self.minutiae {
            w.u32(m.x).u32(m.y).f64(m.angle).u8(match m.kind {
                MinutiaKind::RidgeEnding => 0,
                MinutiaKind::Bifurcation => 1,
            });
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = ByteReader::new(bytes);
        let width = r.u32()?;
        let height = r.u32()?;
        let n = r.len(17)?;
        let mut minutiae = Vec::with_capacity(n);
        for _ in 0..n {
            let x = r.u32()?;
            let y = r.u32()?;
            let angle = r.f64()?;
            let kind = match r.u8()? {
                0 => MinutiaKind::RidgeEnding,
                1 => MinutiaKind::Bifurcation,
                v => {
                    return Err(DecodeError::InvalidValue {
                        field: "minutia kind",
                        value: v as u64,
                    })
                }
            };
            minutiae.push(Minutia { x, y, angle, kind });
        }
        r.finish()?;
        Self::new(width, height, minutiae).map_err(|_| DecodeError::InvalidValue {
            field: "finger template",
            value: n as u64,
        })
    }
}

/// A simulated finger. The seed stays with the source and never reaches a
/// template.
#[derive(Debug, Clone)]
pub struct FingerSource {
    seed: u64,
}

impl FingerSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub(crate) fn seed(&self) -> u64 {
        self.seed
    }

    fn master(&self, cfg: &FingerSimConfig) -> Vec<Minutia> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = rng.random_range(cfg.minutiae_min..=cfg.minutiae_max);
        (0..n)
            .map(|_| Minutia {
                x: rng.random_range(0..cfg.width_px),
                y: rng.random_range(0..cfg.height_px),
                angle: rng.random_range(0.0..TAU),
                kind: if rng.random_bool(0.5) {
                    MinutiaKind::RidgeEnding
                } else {
                    MinutiaKind::Bifurcation
                },
            })
            .collect()
    }

    /// One scan of this finger at the given noise level. At noise 0 every
    /// scan reproduces the master minutiae exactly.
    pub fn capture(&self, noise: f64, scan_seed: u64, cfg: &FingerSimConfig) -> FingerTemplate {
        let noise = noise.clamp(0.0, 1.0);
        let master = self.master(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(scan_seed ^ self.seed.rotate_left(17));
        let pos = Normal::new(0.0, noise * cfg.jitter_px).expect("finite jitter");
        let ang = Normal::new(0.0, noise * cfg.angle_jitter_rad).expect("finite jitter");
        let drop_p = (noise * cfg.drop_rate).clamp(0.0, 1.0);
        let max_x = (cfg.width_px - 1) as f64;
        let max_y = (cfg.height_px - 1) as f64;

        let mut out = Vec::with_capacity(master.len());
        for m in &master {
            let dropped = rng.random_bool(drop_p);
            let dx = pos.sample(&mut rng);
            let dy = pos.sample(&mut rng);
            let da = ang.sample(&mut rng);
            if dropped {
                continue;
            }
            let mut angle = (m.angle + da).rem_euclid(TAU);
            if angle >= TAU {
                angle = 0.0;
            }
            out.push(Minutia {
                x: (m.x as f64 + dx).round().clamp(0.0, max_x) as u32,
                y: (m.y as f64 + dy).round().clamp(0.0, max_y) as u32,
                angle,
                kind: m.kind,
            });
        }
        if out.is_empty() {
            out.push(master[0]);
        }
        FingerTemplate::new(cfg.width_px, cfg.height_px, out)
            .expect("capture stays inside the image")
    }
}

/// Four enrollment scans, one per seed, at the configured enrollment noise.
pub fn enroll_finger(
    source: &FingerSource,
    scan_seeds: &[u64],
    cfg: &FingerSimConfig,
) -> Result<Vec<FingerTemplate>, SimError> {
    if scan_seeds.len() != ENROLLMENT_SCANS {
        return Err(SimError::EnrollmentArity {
            expected: ENROLLMENT_SCANS,
            got: scan_seeds.len(),
        });
    }
    Ok(scan_seeds
        .iter()
        .map(|&s| source.capture(cfg.enrollment_noise, s, cfg))
        .collect())
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % TAU;
    d.min(TAU - d)
}

/// Fraction of minutiae paired between two templates (greedy nearest
/// neighbour within the positional and angular tolerances).
fn pairing_ratio(probe: &FingerTemplate, enrolled: &FingerTemplate, cfg: &FingerSimConfig) -> f64 {
    let tol2 = cfg.position_tolerance_px * cfg.position_tolerance_px;
    let mut used = vec![false; enrolled.minutiae.len()];
    let mut matched = 0usize;
    for p in &probe.minutiae {
        let mut best: Option<(usize, f64)> = None;
        for (j, e) in enrolled.minutiae.iter().enumerate() {
            if used[j] || e.kind != p.kind {
                continue;
            }
            let dx = p.x as f64 - e.x as f64;
            let dy = p.y as f64 - e.y as f64;
            let d2 = dx * dx + dy * dy;
            if d2 <= tol2
                && angle_gap(p.angle, e.angle) <= cfg.angle_tolerance_rad
                && best.is_none_or(|(_, b)| d2 < b)
            {
                best = Some((j, d2));
            }
        }
        if let Some((j, _)) = best {
            used[j] = true;
            matched += 1;
        }
    }
    matched as f64 / probe.minutiae.len().max(enrolled.minutiae.len()) as f64
}

/// Dissimilarity score on `[0, MAXINT)`; a match is `score < T`.
///
/// Templates pairing at or above `min_match_ratio` score on the genuine
/// scale `floor(q * MAXINT)`, `q` shrinking linearly to 0 at a perfect
/// pairing; the best (lowest) such score over the enrolled set is returned.
/// When no enrolled template pairs, the score is one uniform draw keyed on
/// the probe and the whole enrolled set, so `P(score < T) = T / MAXINT`
/// regardless of how many templates are enrolled.
pub fn match_finger(
    probe: &FingerTemplate,
    enrolled: &[FingerTemplate],
    cfg: &FingerSimConfig,
) -> Result<u32, SimError> {
    if enrolled.is_empty() {
        return Err(SimError::NoTemplate);
    }
    let genuine = enrolled
        .iter()
        .map(|e| pairing_ratio(probe, e, cfg))
        .filter(|&m| m >= cfg.min_match_ratio)
        .map(|m| {
            let q = cfg.genuine_upper_q * (1.0 - m) / (1.0 - cfg.min_match_ratio);
            ((q * MAXINT as f64).floor() as u32).min(MAXINT - 1)
        })
        .min();
    if let Some(score) = genuine {
        return Ok(score);
    }

    let probe_bytes = probe.to_bytes();
    let mut w = ByteWriter::new();
    for e in enrolled {
        e.write(&mut w);
    }
    let mut rng = digest_rng(b"finger-impostor", &[&probe_bytes, w.as_slice()]);
    Ok(score_from_word(rng.next_u64()))
}

/// One draw from the impostor score distribution (uniform on `[0, MAXINT)`),
/// the same mapping [`match_finger`] applies to non-pairing probes.
pub fn sample_impostor_finger_score<R: RngCore + ?Sized>(rng: &mut R) -> u32 {
    score_from_word(rng.next_u64())
}
