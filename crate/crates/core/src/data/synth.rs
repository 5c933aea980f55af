//! Seeded synthetic clips for tests and demos: smooth value-noise
//! textures translating at a fixed velocity.

use super::Frame;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smooth random texture: two octaves of bilinearly interpolated value
/// noise. Deterministic in (width, height, seed).
pub fn textured_frame(width: usize, height: usize, seed: u64) -> Frame {
    let master = noise_grid(width, height, seed);
    let pixels = (0..width * height).map(|i| master[i]).collect();
    Frame::new(width, height, pixels).expect("dims checked by construction")
}

/// Clip whose texture translates by (dx, dy) pixels per frame. Content is
/// sampled from a toroidal master texture, so the motion is exact
/// everywhere and the clip never runs out of content.
pub fn translating_clip(
    width: usize,
    height: usize,
    frames: usize,
    dx: i64,
    dy: i64,
    seed: u64,
) -> Vec<Frame> {
    let master = noise_grid(width, height, seed);
    (0..frames)
        .map(|t| {
            let t = t as i64;
            let mut pixels = Vec::with_capacity(width * height);
            for y in 0..height as i64 {
                for x in 0..width as i64 {
                    let sx = (x + t * dx).rem_euclid(width as i64) as usize;
                    let sy = (y + t * dy).rem_euclid(height as i64) as usize;
                    pixels.push(master[sy * width + sx]);
                }
            }
            Frame::new(width, height, pixels).expect("dims checked by construction")
        })
        .collect()
}

/// `out(x, y) = f(x + dx, y + dy)` with edge clamping.
pub fn shift_frame_clamped(f: &Frame, dx: i64, dy: i64) -> Frame {
    let (w, h) = (f.width(), f.height());
    let mut pixels = Vec::with_capacity(w * h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            pixels.push(f.at_clamped(x + dx, y + dy));
        }
    }
    Frame::new(w, h, pixels).expect("same dims as input")
}

fn noise_grid(width: usize, height: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coarse = lattice(width, height, 8, &mut rng);
    let fine = lattice(width, height, 3, &mut rng);
    (0..width * height)
        .map(|i| {
            let v = 0.72 * coarse[i] + 0.28 * fine[i];
            (v * 255.0).round().clamp(0.0, 255.0) as u8
        })
        .collect()
}

/// Bilinear interpolation of a random lattice with the given cell size.
fn lattice(width: usize, height: usize, cell: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gw = width.div_ceil(cell) + 1;
    let gh = height.div_ceil(cell) + 1;
    let grid: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        let gy = y / cell;
        let fy = (y % cell) as f64 / cell as f64;
        for x in 0..width {
            let gx = x / cell;
            let fx = (x % cell) as f64 / cell as f64;
            let v00 = grid[gy * gw + gx];
            let v01 = grid[gy * gw + gx + 1];
            let v10 = grid[(gy + 1) * gw + gx];
            let v11 = grid[(gy + 1) * gw + gx + 1];
            let top = v00 + (v01 - v00) * fx;
            let bot = v10 + (v11 - v10) * fx;
            out.push(top + (bot - top) * fy);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = textured_frame(32, 24, 5);
        let b = textured_frame(32, 24, 5);
        let c = textured_frame(32, 24, 6);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn translation_is_exact_on_the_torus() {
        let clip = translating_clip(40, 30, 4, 3, -2, 9);
        for t in 1..clip.len() {
            for y in 0..30i64 {
                for x in 0..40i64 {
                    let sx = (x + 3).rem_euclid(40);
                    let sy = (y - 2).rem_euclid(30);
                    assert_eq!(
                        clip[t].at(x as usize, y as usize),
                        clip[t - 1].at(sx as usize, sy as usize)
                    );
                }
            }
        }
    }

    #[test]
    fn texture_has_spread() {
        let f = textured_frame(64, 64, 1);
        let min = *f.pixels().iter().min().unwrap();
        let max = *f.pixels().iter().max().unwrap();
        assert!(max - min > 80, "texture too flat: {min}..{max}");
    }

    #[test]
    fn clamped_shift_sticks_at_borders() {
        let f = textured_frame(16, 16, 2);
        let s = shift_frame_clamped(&f, 3, 0);
        assert_eq!(s.at(0, 5), f.at(3, 5));
        assert_eq!(s.at(15, 5), f.at(15, 5)); // clamped to right edge
    }
}
