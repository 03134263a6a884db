//! Square two-dimensional complex FFTs backed by `rustfft`, with a process-wide
//! plan cache so hot loops never re-plan.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub(crate) struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn cache() -> &'static Mutex<HashMap<usize, Fft2>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Fft2>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Fft2 {
    pub(crate) fn new(n: usize) -> Fft2 {
        let mut guard = cache().lock().expect("fft plan cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Fft2 {
                    n,
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                }
            })
            .clone()
    }

    /// Unnormalized forward transform (kernel e^{-2 pi i k x}), in place, row-major n x n.
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Unnormalized inverse transform (kernel e^{+2 pi i k x}).
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n);
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        // rows
        fft.process_with_scratch(data, &mut scratch);
        transpose(data, n);
        // columns (now rows)
        fft.process_with_scratch(data, &mut scratch);
        transpose(data, n);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}
