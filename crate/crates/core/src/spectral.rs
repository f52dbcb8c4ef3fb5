//! Real-input discrete Fourier transforms on periodic grids.
//!
//! Spectra use the half-complex layout: in 1-D `n/2 + 1` modes, in 2-D an
//! `n x (n/2 + 1)` array with axis 0 full and axis 1 halved. Forward
//! transforms are unnormalized; inverse transforms divide by `n^d`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::field::Grid;

#[derive(Clone)]
struct Plans {
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Plans {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut real = RealFftPlanner::<f64>::new();
            let mut complex = FftPlanner::<f64>::new();
            Plans {
                r2c: real.plan_fft_forward(n),
                c2r: real.plan_fft_inverse(n),
                fwd: complex.plan_fft_forward(n),
                inv: complex.plan_fft_inverse(n),
            }
        })
        .clone()
}

/// Number of stored modes for a grid.
pub fn spectrum_len(grid: &Grid) -> usize {
    let n = grid.cells_per_axis();
    let half = n / 2 + 1;
    match grid.dim() {
        1 => half,
        _ => n * half,
    }
}

/// One stored mode: its angular wavevector and whether each axis index sits
/// on the Nyquist frequency.
#[derive(Clone, Copy, Debug)]
pub struct Mode {
    pub xi: [f64; 2],
    pub nyquist: [bool; 2],
}

impl Mode {
    pub fn norm_sq(&self) -> f64 {
        self.xi[0] * self.xi[0] + self.xi[1] * self.xi[1]
    }
}

/// Wavevectors `2πk/L` of the stored modes, in storage order.
pub fn modes(grid: &Grid) -> Vec<Mode> {
    let n = grid.cells_per_axis();
    let half = n / 2 + 1;
    let scale = 2.0 * PI / grid.length();
    let is_nyq = |k: usize| n % 2 == 0 && k == n / 2;
    match grid.dim() {
        1 => (0..half)
            .map(|k| Mode { xi: [scale * k as f64, 0.0], nyquist: [is_nyq(k), false] })
            .collect(),
        _ => {
            let mut out = Vec::with_capacity(n * half);
            for k0 in 0..n {
                let w0 = grid.wrapped(k0) as f64;
                for k1 in 0..half {
                    out.push(Mode {
                        xi: [scale * w0, scale * k1 as f64],
                        nyquist: [is_nyq(k0), is_nyq(k1)],
                    });
                }
            }
            out
        }
    }
}

/// Unnormalized forward transform of real values.
pub fn forward(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let n = grid.cells_per_axis();
    let p = plans(n);
    let half = n / 2 + 1;
    match grid.dim() {
        1 => {
            let mut input = values.to_vec();
            let mut out = vec![Complex64::new(0.0, 0.0); half];
            p.r2c.process(&mut input, &mut out).expect("r2c sizes match");
            out
        }
        _ => {
            let mut out = vec![Complex64::new(0.0, 0.0); n * half];
            let mut row = vec![0.0; n];
            for i in 0..n {
                row.copy_from_slice(&values[i * n..(i + 1) * n]);
                p.r2c
                    .process(&mut row, &mut out[i * half..(i + 1) * half])
                    .expect("r2c sizes match");
            }
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for k1 in 0..half {
                for i in 0..n {
                    col[i] = out[i * half + k1];
                }
                p.fwd.process(&mut col);
                for i in 0..n {
                    out[i * half + k1] = col[i];
                }
            }
            out
        }
    }
}

/// Normalized inverse transform back to real values.
pub fn inverse(grid: &Grid, spectrum: &[Complex64]) -> Vec<f64> {
    let n = grid.cells_per_axis();
    let p = plans(n);
    let half = n / 2 + 1;
    let norm = 1.0 / grid.len() as f64;
    let fix_row = |row: &mut [Complex64]| {
        row[0].im = 0.0;
        if n % 2 == 0 {
            row[half - 1].im = 0.0;
        }
    };
    match grid.dim() {
        1 => {
            let mut input = spectrum.to_vec();
            fix_row(&mut input);
            let mut out = vec![0.0; n];
            p.c2r.process(&mut input, &mut out).expect("c2r sizes match");
            out.iter_mut().for_each(|v| *v *= norm);
            out
        }
        _ => {
            let mut work = spectrum.to_vec();
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for k1 in 0..half {
                for i in 0..n {
                    col[i] = work[i * half + k1];
                }
                p.inv.process(&mut col);
                for i in 0..n {
                    work[i * half + k1] = col[i];
                }
            }
            let mut out = vec![0.0; n * n];
            for i in 0..n {
                let row = &mut work[i * half..(i + 1) * half];
                fix_row(row);
                p.c2r.process(row, &mut out[i * n..(i + 1) * n]).expect("c2r sizes match");
            }
            out.iter_mut().for_each(|v| *v *= norm);
            out
        }
    }
}
