//! Runtime-dispatched f32 inner loops.
//!
//! The portable paths auto-vectorize at the build's baseline feature level;
//! on x86-64 with AVX2+FMA we switch to explicitly FMA-contracted loops.
//! Dispatch is resolved once per process, so results within one
//! configuration are bit-reproducible.

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Level {
    Portable,
    #[cfg(target_arch = "x86_64")]
    Avx2Fma,
}

fn level() -> Level {
    use std::sync::OnceLock;
    static LEVEL: OnceLock<Level> = OnceLock::new();
    *LEVEL.get_or_init(|| {
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2")
            && std::arch::is_x86_feature_detected!("fma")
        {
            return Level::Avx2Fma;
        }
        Level::Portable
    })
}

/// acc[i] += a * xs[i]
pub fn axpy_f32(acc: &mut [f32], xs: &[f32], a: f32) {
    assert_eq!(acc.len(), xs.len());
    match level() {
        #[cfg(target_arch = "x86_64")]
        Level::Avx2Fma => unsafe { axpy_avx2(acc, xs, a) },
        Level::Portable => axpy_portable(acc, xs, a),
    }
}

/// sum_i a[i] * b[i], fixed lane-interleaved reduction order.
pub fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    assert_eq!(a.len(), b.len());
    match level() {
        #[cfg(target_arch = "x86_64")]
        Level::Avx2Fma => unsafe { dot_avx2(a, b) },
        Level::Portable => dot_portable(a, b),
    }
}

fn axpy_portable(acc: &mut [f32], xs: &[f32], a: f32) {
    for (y, &x) in acc.iter_mut().zip(xs) {
        *y += a * x;
    }
}

fn dot_portable(a: &[f32], b: &[f32]) -> f32 {
    const LANES: usize = 8;
    let mut acc = [0.0f32; LANES];
    let chunks = a.len() / LANES;
    for i in 0..chunks {
        let av = &a[i * LANES..(i + 1) * LANES];
        let bv = &b[i * LANES..(i + 1) * LANES];
        for l in 0..LANES {
            acc[l] += av[l] * bv[l];
        }
    }
    let mut tail = 0.0f32;
    for i in chunks * LANES..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn axpy_avx2(acc: &mut [f32], xs: &[f32], a: f32) {
    // mul_add contracts to vfmadd under the enabled feature set.
    for (y, &x) in acc.iter_mut().zip(xs) {
        *y = x.mul_add(a, *y);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn dot_avx2(a: &[f32], b: &[f32]) -> f32 {
    const LANES: usize = 8;
    let mut acc = [0.0f32; LANES];
    let chunks = a.len() / LANES;
    for i in 0..chunks {
        let av = &a[i * LANES..(i + 1) * LANES];
        let bv = &b[i * LANES..(i + 1) * LANES];
        for l in 0..LANES {
            acc[l] = av[l].mul_add(bv[l], acc[l]);
        }
    }
    let mut tail = 0.0f32;
    for i in chunks * LANES..a.len() {
        tail = a[i].mul_add(b[i], tail);
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}
