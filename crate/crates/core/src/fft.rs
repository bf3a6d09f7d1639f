//! Multi-dimensional FFT over row-major cubes, built on `rustfft`.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Direction {
    Forward,
    Inverse,
}

fn plan(n: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match dir {
            Direction::Forward => p.plan_fft_forward(n),
            Direction::Inverse => p.plan_fft_inverse(n),
        }
    })
}

/// Unnormalized in-place DFT of a `dim`-dimensional cube with side `n`,
/// stored in row-major order (last axis fastest).
pub(crate) fn fft_nd(data: &mut [Complex64], n: usize, dim: usize, dir: Direction) {
    debug_assert_eq!(data.len(), n.pow(dim as u32));
    let fft = plan(n, dir);
    // last axis: contiguous lines
    data.par_chunks_mut(n).for_each(|line| fft.process(line));
    if dim == 1 {
        return;
    }
    let total = data.len();
    let mut lines = vec![Complex64::default(); total];
    for axis in 0..dim - 1 {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        // gather: line index = (outer, inner), element = position along axis
        lines
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(line, dst)| {
                let outer = line / stride;
                let inner = line % stride;
                let base = outer * block + inner;
                for (k, v) in dst.iter_mut().enumerate() {
                    *v = data[base + k * stride];
                }
            });
        lines.par_chunks_mut(n).for_each(|line| fft.process(line));
        data.par_iter_mut().enumerate().for_each(|(idx, v)| {
            let outer = idx / block;
            let rem = idx % block;
            let k = rem / stride;
            let inner = rem % stride;
            *v = lines[(outer * stride + inner) * n + k];
        });
    }
}
