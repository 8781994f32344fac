use super::{Field, Grid, Scheme, Topology};
use crate::error::{invalid, Result};

type Stencil = Vec<Vec<(usize, f64)>>;

/// Resamples `f` onto `target` (same rank and extent) with the given scheme.
pub fn resample(f: &Field, target: &Grid, scheme: Scheme) -> Result<Field> {
    let src = f.grid();
    if target.ndim() != src.ndim() {
        return invalid("resample target has a different rank");
    }
    let mut cur = f.values().to_vec();
    let mut dims = src.dims().to_vec();
    for a in 0..src.ndim() {
        let (n_in, n_out) = (src.dims()[a], target.dims()[a]);
        let periodic = src.topology()[a] == Topology::Periodic;
        let st = match scheme {
            Scheme::Nearest => nearest(n_in, n_out),
            Scheme::Bilinear => linear(n_in, n_out, periodic),
            Scheme::Conservative => conservative(n_in, n_out),
        };
        cur = apply_axis(&cur, &dims, a, &st);
        dims[a] = n_out;
    }
    let grid = src.with_dims(target.dims())?;
    Ok(Field::from_parts(grid, cur))
}

/// Conservative average onto a grid with `dims` cells per axis.
pub fn restrict_to(f: &Field, dims: &[usize]) -> Result<Field> {
    let g = f.grid().with_dims(dims)?;
    resample(f, &g, Scheme::Conservative)
}

fn apply_axis(values: &[f64], dims: &[usize], axis: usize, st: &Stencil) -> Vec<f64> {
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let (n_in, n_out) = (dims[axis], st.len());
    let mut out = vec![0.0; outer * n_out * inner];
    for o in 0..outer {
        for (j, taps) in st.iter().enumerate() {
            let dst = &mut out[(o * n_out + j) * inner..(o * n_out + j + 1) * inner];
            for &(i, w) in taps {
                let src = &values[(o * n_in + i) * inner..(o * n_in + i + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    out
}

fn nearest(n_in: usize, n_out: usize) -> Stencil {
    (0..n_out)
        .map(|j| {
            // cell centre (j + 1/2) / n_out in unit coordinates
            let i = ((2 * j + 1) * n_in) / (2 * n_out);
            vec![(i.min(n_in - 1), 1.0)]
        })
        .collect()
}

fn linear(n_in: usize, n_out: usize, periodic: bool) -> Stencil {
    (0..n_out)
        .map(|j| {
            if n_in == 1 {
                return vec![(0, 1.0)];
            }
            let s = (j as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5;
            if periodic {
                let i0 = s.floor();
                let w = s - i0;
                let i0 = (i0 as i64).rem_euclid(n_in as i64) as usize;
                vec![(i0, 1.0 - w), ((i0 + 1) % n_in, w)]
            } else {
                // clamp the bracket and extrapolate linearly past the outer centres
                let i0 = (s.floor() as i64).clamp(0, n_in as i64 - 2) as usize;
                let w = s - i0 as f64;
                vec![(i0, 1.0 - w), (i0 + 1, w)]
            }
        })
        .collect()
}

fn conservative(n_in: usize, n_out: usize) -> Stencil {
    // work in units of 1 / (n_in * n_out) so overlaps are exact integers
    (0..n_out)
        .map(|j| {
            let (lo, hi) = (j * n_in, (j + 1) * n_in);
            let first = lo / n_out;
            let last = (hi - 1) / n_out;
            (first..=last)
                .map(|i| {
                    let (a, b) = (i * n_out, (i + 1) * n_out);
                    let overlap = hi.min(b) - lo.max(a);
                    (i, overlap as f64 / n_in as f64)
                })
                .collect()
        })
        .collect()
}
