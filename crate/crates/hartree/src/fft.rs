//! Internal N-dimensional FFT on row-major hypercubes with equal side length.
//!
//! Plans are cached per thread; the forward transform is the unnormalized DFT
//! and the inverse carries the full 1/M normalization, so forward ∘ inverse is
//! the identity.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::algorithm::Radix4;
use rustfft::{Fft, FftDirection, FftPlanner};

type PlanCache = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new(HashMap::new());
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    let key = (len, direction == FftDirection::Forward);
    PLANS.with(|cache| {
        if let Some(p) = cache.borrow().get(&key) {
            return p.clone();
        }
        // Radix-4 shows a ~5x smaller systematic amplitude bias than the
        // planner's composite algorithms on long phase-multiply iterations,
        // which the mass-conservation budget of the propagator relies on.
        let p: Arc<dyn Fft<f64>> = if len.is_power_of_two() {
            Arc::new(Radix4::new(len, direction))
        } else {
            PLANNER.with(|pl| pl.borrow_mut().plan_fft(len, direction))
        };
        cache.borrow_mut().insert(key, p.clone());
        p
    })
}

/// In-place unnormalized forward DFT along every axis.
pub fn forward(values: &mut [Complex64], side: usize, dim: usize) {
    transform(values, side, dim, FftDirection::Forward);
}

/// In-place inverse DFT along every axis, normalized by `1 / side^dim`.
pub fn inverse(values: &mut [Complex64], side: usize, dim: usize) {
    transform(values, side, dim, FftDirection::Inverse);
    let scale = 1.0 / values.len() as f64;
    for v in values.iter_mut() {
        *v *= scale;
    }
}

fn transform(values: &mut [Complex64], side: usize, dim: usize, direction: FftDirection) {
    assert!((1..=3).contains(&dim), "unsupported dimension {dim}");
    assert_eq!(values.len(), side.pow(dim as u32), "shape mismatch");
    let fft = plan(side, direction);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    // Last axis: lines are contiguous.
    for chunk in values.chunks_exact_mut(side) {
        fft.process_with_scratch(chunk, &mut scratch);
    }

    // Remaining axes: gather each strided line into a buffer, transform, scatter back.
    let mut line = vec![Complex64::new(0.0, 0.0); side];
    for axis in 0..dim - 1 {
        let stride = side.pow((dim - 1 - axis) as u32);
        let block = stride * side;
        let blocks = values.len() / block;
        for b in 0..blocks {
            let base_block = b * block;
            for inner in 0..stride {
                let base = base_block + inner;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = values[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, slot) in line.iter().enumerate() {
                    values[base + j * stride] = *slot;
                }
            }
        }
    }
}
