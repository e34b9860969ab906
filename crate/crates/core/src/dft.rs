//! Unitary two-dimensional DFT over the `sqrt(N) x sqrt(N)` antenna grid.

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::config::exact_sqrt;
use crate::error::{Error, Result};

fn transform(grid: &mut [Complex64], direction: FftDirection) -> Result<()> {
    let side = exact_sqrt(grid.len())
        .ok_or_else(|| Error::InvalidConfig(format!("length {} is not a square grid", grid.len())))?;
    let mut planner = FftPlanner::new();
    let fft: std::sync::Arc<dyn Fft<f64>> = planner.plan_fft(side, direction);
    // rows
    fft.process(grid);
    // columns
    let mut col = vec![Complex64::new(0.0, 0.0); side];
    for c in 0..side {
        for r in 0..side {
            col[r] = grid[r * side + c];
        }
        fft.process(&mut col);
        for r in 0..side {
            grid[r * side + c] = col[r];
        }
    }
    let scale = 1.0 / side as f64;
    grid.iter_mut().for_each(|z| *z *= scale);
    Ok(())
}

pub fn forward(grid: &mut [Complex64]) -> Result<()> {
    transform(grid, FftDirection::Forward)
}

pub fn inverse(grid: &mut [Complex64]) -> Result<()> {
    transform(grid, FftDirection::Inverse)
}
