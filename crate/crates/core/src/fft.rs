//! Thin 2D/1D FFT helpers over `rustfft` with a per-thread plan cache.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use std::cell::RefCell;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized 1D transform. `inverse` uses the e^{+2πi jk/n} kernel.
pub fn fft1(data: &mut [C64], inverse: bool) {
    let n = data.len();
    if n <= 1 {
        return;
    }
    let plan = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    plan.process(data);
}

/// Unnormalized 2D transform of a row-major `g × g` array.
pub fn fft2(data: &mut [C64], g: usize, inverse: bool) {
    assert_eq!(data.len(), g * g);
    for row in data.chunks_mut(g) {
        fft1(row, inverse);
    }
    let mut col = vec![C64::new(0.0, 0.0); g];
    for j in 0..g {
        for i in 0..g {
            col[i] = data[i * g + j];
        }
        fft1(&mut col, inverse);
        for i in 0..g {
            data[i * g + j] = col[i];
        }
    }
}
