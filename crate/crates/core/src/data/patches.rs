//! Training-sample extraction: 48x48 patches over 9 consecutive frames,
//! gated on per-pair motion with a small unconditional-accept probability.

use super::Frame;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PATCH_SIZE: usize = 48;
pub const FRAMES_PER_SAMPLE: usize = 9;

const PATCH_BYTES: usize = PATCH_SIZE * PATCH_SIZE;

/// Nine temporally consecutive 48x48 patches from one clip location.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchSample {
    data: Vec<u8>, // FRAMES_PER_SAMPLE * PATCH_BYTES
}

impl PatchSample {
    pub fn from_bytes(data: Vec<u8>) -> Result<Self> {
        if data.len() != FRAMES_PER_SAMPLE * PATCH_BYTES {
            return Err(Error::Dimension(format!(
                "patch sample must hold {} bytes, got {}",
                FRAMES_PER_SAMPLE * PATCH_BYTES,
                data.len()
            )));
        }
        Ok(PatchSample { data })
    }

    pub fn patch(&self, i: usize) -> &[u8] {
        &self.data[i * PATCH_BYTES..(i + 1) * PATCH_BYTES]
    }

    pub fn bytes(&self) -> &[u8] {
        &self.data
    }
}

/// Mean square difference between two raw 8-bit patches.
pub fn patch_pair_mse(a: &[u8], b: &[u8]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let sum: u64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    sum as f64 / a.len() as f64
}

pub struct ExtractOutcome {
    pub samples: Vec<PatchSample>,
    pub requested: usize,
    pub attempts: u64,
    /// True when the retry cap was hit and fewer samples were returned.
    pub hit_retry_cap: bool,
}

/// Draws patch samples at uniformly random (start frame, y, x) positions.
/// A draw is kept when every consecutive patch pair has mean square
/// difference above `threshold`, except that with probability
/// `ignore_prob` the gate is skipped. Gives up after `100 * count` draws.
pub fn extract_patch_samples(
    frames: &[Frame],
    count: usize,
    seed: u64,
    threshold: f64,
    ignore_prob: f64,
) -> Result<ExtractOutcome> {
    if frames.len() < FRAMES_PER_SAMPLE {
        return Err(Error::Input(format!(
            "clip has {} frames; extraction needs at least {FRAMES_PER_SAMPLE}",
            frames.len()
        )));
    }
    let (w, h) = (frames[0].width(), frames[0].height());
    if w < PATCH_SIZE || h < PATCH_SIZE {
        return Err(Error::Input(format!(
            "frames are {w}x{h}; extraction needs at least {PATCH_SIZE}x{PATCH_SIZE}"
        )));
    }
    if !(0.0..=1.0).contains(&ignore_prob) {
        return Err(Error::Usage("ignore probability must lie in [0, 1]".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_attempts = 100u64 * count as u64;
    let mut samples = Vec::with_capacity(count);
    let mut attempts = 0u64;

    while samples.len() < count && attempts < max_attempts {
        attempts += 1;
        // draw order is fixed: start frame, y, x, gate skip
        let start = rng.random_range(0..=frames.len() - FRAMES_PER_SAMPLE);
        let y = rng.random_range(0..=h - PATCH_SIZE);
        let x = rng.random_range(0..=w - PATCH_SIZE);
        let ignore_gate = ignore_prob > 0.0 && rng.random_bool(ignore_prob);

        let patches: Vec<Vec<u8>> = (0..FRAMES_PER_SAMPLE)
            .map(|i| frames[start + i].crop(x, y, PATCH_SIZE, PATCH_SIZE))
            .collect();
        let moving = ignore_gate
            || patches
                .windows(2)
                .all(|pair| patch_pair_mse(&pair[0], &pair[1]) > threshold);
        if moving {
            let mut data = Vec::with_capacity(FRAMES_PER_SAMPLE * PATCH_BYTES);
            for p in &patches {
                data.extend_from_slice(p);
            }
            samples.push(PatchSample { data });
        }
    }

    let hit_retry_cap = samples.len() < count;
    Ok(ExtractOutcome { samples, requested: count, attempts, hit_retry_cap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth;

    #[test]
    fn static_clip_yields_nothing_without_gate_skip() {
        let frames = vec![Frame::filled(64, 64, 100); 12];
        let out = extract_patch_samples(&frames, 5, 1, 7.0, 0.0).unwrap();
        assert!(out.samples.is_empty());
        assert!(out.hit_retry_cap);
        assert_eq!(out.attempts, 500);
    }

    #[test]
    fn static_clip_passes_with_gate_skip_only() {
        let frames = vec![Frame::filled(64, 64, 100); 12];
        // always skip the gate: every draw is accepted
        let out = extract_patch_samples(&frames, 5, 1, 7.0, 1.0).unwrap();
        assert_eq!(out.samples.len(), 5);
        assert_eq!(out.attempts, 5);
    }

    #[test]
    fn moving_clip_passes_and_obeys_threshold_post_hoc() {
        let frames = synth::translating_clip(96, 96, 16, 2, 1, 77);
        let out = extract_patch_samples(&frames, 20, 9, 7.0, 0.0).unwrap();
        assert_eq!(out.samples.len(), 20);
        assert!(!out.hit_retry_cap);
        for s in &out.samples {
            for i in 0..FRAMES_PER_SAMPLE - 1 {
                let mse = patch_pair_mse(s.patch(i), s.patch(i + 1));
                assert!(mse > 7.0, "pair {i} has mse {mse}");
            }
        }
    }

    #[test]
    fn extraction_is_reproducible() {
        let frames = synth::translating_clip(80, 80, 12, 2, 0, 5);
        let a = extract_patch_samples(&frames, 8, 123, 7.0, 0.05).unwrap();
        let b = extract_patch_samples(&frames, 8, 123, 7.0, 0.05).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = extract_patch_samples(&frames, 8, 124, 7.0, 0.05).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn short_or_small_clips_rejected() {
        let frames = vec![Frame::filled(64, 64, 0); 5];
        assert!(extract_patch_samples(&frames, 1, 0, 7.0, 0.0).is_err());
        let tiny = vec![Frame::filled(32, 64, 0); 12];
        assert!(extract_patch_samples(&tiny, 1, 0, 7.0, 0.0).is_err());
    }

    #[test]
    fn square_translation_matches_mse_oracle() {
        // A bright square moving 2 px/frame over a dark background: windows
        // covering the square's path see mse > 7 between all pairs.
        let mut frames = Vec::new();
        for t in 0..FRAMES_PER_SAMPLE {
            let mut f = Frame::filled(64, 64, 20);
            for y in 8..24 {
                for x in (8 + 2 * t)..(24 + 2 * t) {
                    f.pixels_mut()[y * 64 + x] = 230;
                }
            }
            frames.push(f);
        }
        // window at origin covers the square for all 9 frames
        let patches: Vec<Vec<u8>> = frames.iter().map(|f| f.crop(0, 0, 48, 48)).collect();
        for pair in patches.windows(2) {
            // oracle: direct per-pixel loop
            let mut sum = 0f64;
            for (a, b) in pair[0].iter().zip(&pair[1]) {
                sum += (*a as f64 - *b as f64).powi(2);
            }
            let oracle = sum / pair[0].len() as f64;
            assert!((patch_pair_mse(&pair[0], &pair[1]) - oracle).abs() < 1e-9);
            assert!(oracle > 7.0);
        }
    }
}
