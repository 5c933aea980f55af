//! Orthonormal 8x8 2-D DCT-II and its inverse, in double precision.

use std::sync::OnceLock;

pub const BLOCK: usize = 8;

/// basis[u][n] = alpha(u) * cos(pi * (2n + 1) * u / 16)
fn basis() -> &'static [[f64; BLOCK]; BLOCK] {
    static BASIS: OnceLock<[[f64; BLOCK]; BLOCK]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut b = [[0f64; BLOCK]; BLOCK];
        for (u, row) in b.iter_mut().enumerate() {
            let alpha = if u == 0 {
                (1.0 / BLOCK as f64).sqrt()
            } else {
                (2.0 / BLOCK as f64).sqrt()
            };
            for (n, v) in row.iter_mut().enumerate() {
                *v = alpha
                    * (std::f64::consts::PI * (2.0 * n as f64 + 1.0) * u as f64
                        / (2.0 * BLOCK as f64))
                        .cos();
            }
        }
        b
    })
}

/// Row-column separable forward transform.
pub fn forward(block: &[f64; 64]) -> [f64; 64] {
    let b = basis();
    let mut tmp = [0f64; 64];
    for y in 0..BLOCK {
        for u in 0..BLOCK {
            let mut s = 0.0;
            for x in 0..BLOCK {
                s += b[u][x] * block[y * BLOCK + x];
            }
            tmp[y * BLOCK + u] = s;
        }
    }
    let mut out = [0f64; 64];
    for v in 0..BLOCK {
        for u in 0..BLOCK {
            let mut s = 0.0;
            for y in 0..BLOCK {
                s += b[v][y] * tmp[y * BLOCK + u];
            }
            out[v * BLOCK + u] = s;
        }
    }
    out
}

pub fn inverse(coeffs: &[f64; 64]) -> [f64; 64] {
    let b = basis();
    let mut tmp = [0f64; 64];
    for v in 0..BLOCK {
        for x in 0..BLOCK {
            let mut s = 0.0;
            for u in 0..BLOCK {
                s += b[u][x] * coeffs[v * BLOCK + u];
            }
            tmp[v * BLOCK + x] = s;
        }
    }
    let mut out = [0f64; 64];
    for y in 0..BLOCK {
        for x in 0..BLOCK {
            let mut s = 0.0;
            for v in 0..BLOCK {
                s += b[v][y] * tmp[v * BLOCK + x];
            }
            out[y * BLOCK + x] = s;
        }
    }
    out
}

/// Raster index of the k-th zigzag position.
pub fn zigzag_scan() -> &'static [usize; 64] {
    static SCAN: OnceLock<[usize; 64]> = OnceLock::new();
    SCAN.get_or_init(|| {
        let mut scan = [0usize; 64];
        let mut k = 0;
        for s in 0..2 * BLOCK - 1 {
            let lo = s.saturating_sub(BLOCK - 1);
            let hi = s.min(BLOCK - 1);
            if s % 2 == 1 {
                // odd diagonals walk downward from the top row
                for y in lo..=hi {
                    scan[k] = y * BLOCK + (s - y);
                    k += 1;
                }
            } else {
                for y in (lo..=hi).rev() {
                    scan[k] = y * BLOCK + (s - y);
                    k += 1;
                }
            }
        }
        scan
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_is_orthonormal() {
        // inverse(forward(x)) == x and energy is preserved
        let mut block = [0f64; 64];
        for (i, v) in block.iter_mut().enumerate() {
            *v = ((i as f64) * 0.7).sin() * 100.0;
        }
        let coeffs = forward(&block);
        let back = inverse(&coeffs);
        for (a, b) in block.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9);
        }
        let e_spatial: f64 = block.iter().map(|v| v * v).sum();
        let e_freq: f64 = coeffs.iter().map(|v| v * v).sum();
        assert!((e_spatial - e_freq).abs() < 1e-6);
    }

    #[test]
    fn constant_block_is_pure_dc() {
        let block = [32.0f64; 64];
        let coeffs = forward(&block);
        // DC of the orthonormal transform is mean * 8 = sum / 8
        assert!((coeffs[0] - 32.0 * 8.0).abs() < 1e-9);
        for &c in &coeffs[1..] {
            assert!(c.abs() < 1e-9);
        }
    }

    #[test]
    fn zigzag_is_a_permutation_with_known_prefix() {
        let scan = zigzag_scan();
        let mut seen = [false; 64];
        for &i in scan.iter() {
            assert!(!seen[i]);
            seen[i] = true;
        }
        // standard order: (0,0),(0,1),(1,0),(2,0),(1,1),(0,2),...
        assert_eq!(&scan[..6], &[0, 1, 8, 16, 9, 2]);
        assert_eq!(scan[63], 63);
    }
}
