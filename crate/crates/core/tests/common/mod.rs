#![allow(dead_code)]

use nlclaw::field::{Field, Grid};
use nlclaw::physics::Kernel;
use nlclaw::solver::State;

/// `h^d Σ_y K[c - y] u[y]` by brute force, one vector per component.
pub fn direct_convolution(kernel: &Kernel, u: &Field) -> Vec<Vec<f64>> {
    let g = u.grid();
    let n = g.cells_per_axis();
    let vol = g.cell_volume();
    let samples = kernel.samples();
    (0..g.dim())
        .map(|a| {
            let k = samples.component(a);
            (0..g.len())
                .map(|c| {
                    let mc = g.unravel(c);
                    let mut acc = 0.0;
                    for (y, uy) in u.values().iter().enumerate() {
                        let my = g.unravel(y);
                        let d = [(mc[0] + n - my[0]) % n, (mc[1] + n - my[1]) % n];
                        acc += k[g.ravel(d)] * uy;
                    }
                    vol * acc
                })
                .collect()
        })
        .collect()
}

/// Block average of a 1-D field onto `coarse`.
pub fn restrict(u: &Field, coarse: &Grid) -> Field {
    let ratio = u.grid().cells_per_axis() / coarse.cells_per_axis();
    assert_eq!(ratio * coarse.cells_per_axis(), u.grid().cells_per_axis());
    let values = u.values().chunks_exact(ratio).map(|c| c.iter().sum::<f64>() / ratio as f64).collect();
    Field::new(*coarse, values).unwrap()
}

pub fn restrict_trajectory(traj: &[State], coarse: &Grid) -> Vec<State> {
    traj.iter().map(|s| State { u: restrict(&s.u, coarse), ..s.clone() }).collect()
}

pub fn rel_linf(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let err = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}
