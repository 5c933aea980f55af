//! Block motion estimation: exhaustive integer search with half-pel
//! refinement, minimizing block SSE. The encoder-side predicted frame is
//! assembled by the same sampling routine the decoder uses, so both ends
//! agree bit for bit.

use crate::data::Frame;
use crate::error::{Error, Result};
use rayon::prelude::*;

/// Per-block motion vectors in half-pel units, raster block order.
/// Components are bounded by twice the full-pel search range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MotionField {
    width: usize,
    height: usize,
    block: usize,
    range: i32,
    vectors: Vec<(i16, i16)>,
}

impl MotionField {
    pub fn new(
        width: usize,
        height: usize,
        block: usize,
        range: i32,
        vectors: Vec<(i16, i16)>,
    ) -> Result<Self> {
        if block == 0 || range <= 0 {
            return Err(Error::Input("block size and range must be positive".into()));
        }
        let cols = width.div_ceil(block);
        let rows = height.div_ceil(block);
        if vectors.len() != cols * rows {
            return Err(Error::Input(format!(
                "motion field holds {} vectors for a {cols}x{rows} grid",
                vectors.len()
            )));
        }
        let limit = (2 * range) as i16;
        for &(dx, dy) in &vectors {
            if dx.abs() > limit || dy.abs() > limit {
                return Err(Error::Input(format!(
                    "vector ({dx}, {dy}) exceeds the half-pel limit {limit}"
                )));
            }
        }
        Ok(MotionField { width, height, block, range, vectors })
    }

    pub fn cols(&self) -> usize {
        self.width.div_ceil(self.block)
    }

    pub fn rows(&self) -> usize {
        self.height.div_ceil(self.block)
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn range(&self) -> i32 {
        self.range
    }

    pub fn vector(&self, bx: usize, by: usize) -> (i16, i16) {
        self.vectors[by * self.cols() + bx]
    }

    pub fn vectors(&self) -> &[(i16, i16)] {
        &self.vectors
    }
}

/// Reference sample at half-pel coordinates (xh, yh), i.e. pixel
/// position (xh/2, yh/2). Half positions use bilinear averaging with
/// round-half-up; out-of-frame positions clamp to the edge.
#[inline]
pub fn sample_half_pel(f: &Frame, xh: i64, yh: i64) -> u8 {
    let (xi, fx) = (xh.div_euclid(2), xh.rem_euclid(2));
    let (yi, fy) = (yh.div_euclid(2), yh.rem_euclid(2));
    match (fx, fy) {
        (0, 0) => f.at_clamped(xi, yi),
        (1, 0) => {
            let a = f.at_clamped(xi, yi) as u16;
            let b = f.at_clamped(xi + 1, yi) as u16;
            ((a + b + 1) >> 1) as u8
        }
        (0, 1) => {
            let a = f.at_clamped(xi, yi) as u16;
            let b = f.at_clamped(xi, yi + 1) as u16;
            ((a + b + 1) >> 1) as u8
        }
        _ => {
            let a = f.at_clamped(xi, yi) as u16;
            let b = f.at_clamped(xi + 1, yi) as u16;
            let c = f.at_clamped(xi, yi + 1) as u16;
            let d = f.at_clamped(xi + 1, yi + 1) as u16;
            ((a + b + c + d + 2) >> 2) as u8
        }
    }
}

/// Block SSE against the reference displaced by a half-pel vector.
fn block_cost_halfpel(
    reference: &Frame,
    target: &Frame,
    x0: usize,
    y0: usize,
    bw: usize,
    bh: usize,
    dx: i32,
    dy: i32,
) -> u64 {
    let mut cost = 0u64;
    for y in 0..bh {
        for x in 0..bw {
            let t = target.at(x0 + x, y0 + y) as i64;
            let p = sample_half_pel(
                reference,
                2 * (x0 + x) as i64 + dx as i64,
                2 * (y0 + y) as i64 + dy as i64,
            ) as i64;
            let d = t - p;
            cost += (d * d) as u64;
        }
    }
    cost
}

/// Integer-displacement block SSE with early exit once `best` is beaten.
fn block_cost_int(
    reference: &Frame,
    target: &Frame,
    x0: usize,
    y0: usize,
    bw: usize,
    bh: usize,
    dx: i32,
    dy: i32,
    best: u64,
) -> u64 {
    let (w, h) = (reference.width() as i64, reference.height() as i64);
    let (sx, sy) = (x0 as i64 + dx as i64, y0 as i64 + dy as i64);
    let in_frame = sx >= 0 && sy >= 0 && sx + bw as i64 <= w && sy + bh as i64 <= h;
    let mut cost = 0u64;
    if in_frame {
        for y in 0..bh {
            let trow = &target.row(y0 + y)[x0..x0 + bw];
            let rrow = &reference.row((sy as usize) + y)[sx as usize..sx as usize + bw];
            for (t, r) in trow.iter().zip(rrow) {
                let d = *t as i64 - *r as i64;
                cost += (d * d) as u64;
            }
            if cost > best {
                return cost;
            }
        }
    } else {
        for y in 0..bh {
            for x in 0..bw {
                let t = target.at(x0 + x, y0 + y) as i64;
                let r = reference.at_clamped(sx + x as i64, sy + y as i64) as i64;
                let d = t - r;
                cost += (d * d) as u64;
            }
            if cost > best {
                return cost;
            }
        }
    }
    cost
}

/// Tie-break key: cost, then cheapest vector (|dx|+|dy|), then dy, then dx.
#[inline]
fn search_key(cost: u64, dx: i32, dy: i32) -> (u64, u32, i32, i32) {
    (cost, dx.unsigned_abs() + dy.unsigned_abs(), dy, dx)
}

fn search_block(
    reference: &Frame,
    target: &Frame,
    x0: usize,
    y0: usize,
    bw: usize,
    bh: usize,
    range: i32,
) -> (i16, i16) {
    // exhaustive integer stage
    let mut best_cost = u64::MAX;
    let mut best_key = (u64::MAX, u32::MAX, i32::MAX, i32::MAX);
    let mut best = (0i32, 0i32);
    for dy in -range..=range {
        for dx in -range..=range {
            let cost = block_cost_int(reference, target, x0, y0, bw, bh, dx, dy, best_cost);
            if cost > best_cost {
                continue;
            }
            let key = search_key(cost, dx, dy);
            if key < best_key {
                best_key = key;
                best_cost = cost;
                best = (dx, dy);
            }
        }
    }

    // half-pel refinement over the eight neighbors of the integer best
    let limit = 2 * range;
    let mut best_h = (2 * best.0, 2 * best.1);
    let mut best_h_key = search_key(best_cost, best_h.0, best_h.1);
    for ddy in -1..=1i32 {
        for ddx in -1..=1i32 {
            if ddx == 0 && ddy == 0 {
                continue;
            }
            let (dx, dy) = (2 * best.0 + ddx, 2 * best.1 + ddy);
            if dx.abs() > limit || dy.abs() > limit {
                continue;
            }
            let cost = block_cost_halfpel(reference, target, x0, y0, bw, bh, dx, dy);
            let key = search_key(cost, dx, dy);
            if key < best_h_key {
                best_h_key = key;
                best_h = (dx, dy);
            }
        }
    }
    (best_h.0 as i16, best_h.1 as i16)
}

/// Estimates per-block motion of `target` relative to `reference` and
/// returns the field together with the predicted frame it implies.
pub fn mc_estimate(
    reference: &Frame,
    target: &Frame,
    block: usize,
    range: i32,
) -> Result<(MotionField, Frame)> {
    if reference.width() != target.width() || reference.height() != target.height() {
        return Err(Error::Input(format!(
            "reference {}x{} and target {}x{} differ",
            reference.width(),
            reference.height(),
            target.width(),
            target.height()
        )));
    }
    if block == 0 || range <= 0 || range > 512 {
        return Err(Error::Input("invalid block size or search range".into()));
    }
    let (w, h) = (target.width(), target.height());
    let cols = w.div_ceil(block);
    let rows = h.div_ceil(block);

    let vectors: Vec<(i16, i16)> = (0..cols * rows)
        .into_par_iter()
        .map(|bi| {
            let (bx, by) = (bi % cols, bi / cols);
            let x0 = bx * block;
            let y0 = by * block;
            let bw = block.min(w - x0);
            let bh = block.min(h - y0);
            search_block(reference, target, x0, y0, bw, bh, range)
        })
        .collect();

    let field = MotionField::new(w, h, block, range, vectors)?;
    let predicted = mc_apply(reference, &field)?;
    Ok((field, predicted))
}

/// Decoder-side reconstruction: displaces reference blocks along the
/// field. Identical to the predicted frame `mc_estimate` emits.
pub fn mc_apply(reference: &Frame, field: &MotionField) -> Result<Frame> {
    if reference.width() != field.width || reference.height() != field.height {
        return Err(Error::Input(format!(
            "field covers {}x{}, reference is {}x{}",
            field.width,
            field.height,
            reference.width(),
            reference.height()
        )));
    }
    let (w, h) = (field.width, field.height);
    let block = field.block;
    let mut pixels = vec![0u8; w * h];
    let cols = field.cols();
    for (bi, &(dx, dy)) in field.vectors.iter().enumerate() {
        let (bx, by) = (bi % cols, bi / cols);
        let x0 = bx * block;
        let y0 = by * block;
        for y in y0..(y0 + block).min(h) {
            for x in x0..(x0 + block).min(w) {
                pixels[y * w + x] = sample_half_pel(
                    reference,
                    2 * x as i64 + dx as i64,
                    2 * y as i64 + dy as i64,
                );
            }
        }
    }
    Frame::new(w, h, pixels)
}
