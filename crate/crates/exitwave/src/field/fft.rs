//! Centered 2-D FFT on row-major buffers.
//!
//! Storage keeps the origin at index n/2; the DFT wants it at index 0.
//! `centered_fft2` therefore shifts the quadrants, runs a row-column
//! transform and shifts back, so callers never see the corner-origin
//! layout. Plans are cached per (length, direction).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type PlanKey = (usize, bool);

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// Swap quadrants so that centered index n/2 moves to 0 (self-inverse for even n).
fn shift_quadrants(values: &mut [Complex64], n: usize) {
    let half = n / 2;
    for iy in 0..half {
        for ix in 0..n {
            let a = iy * n + ix;
            let b = ((iy + half) % n) * n + (ix + half) % n;
            values.swap(a, b);
        }
    }
}

fn transpose(values: &mut [Complex64], n: usize) {
    for iy in 0..n {
        for ix in (iy + 1)..n {
            values.swap(iy * n + ix, ix * n + iy);
        }
    }
}

/// Unnormalized centered 2-D FFT (forward: e^{-2πi…}, inverse: e^{+2πi…}).
pub fn centered_fft2(values: &mut [Complex64], n: usize, inverse: bool) {
    debug_assert_eq!(values.len(), n * n);
    let fft = plan(n, inverse);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    shift_quadrants(values, n);
    for row in values.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    transpose(values, n);
    for row in values.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    transpose(values, n);
    shift_quadrants(values, n);
}
