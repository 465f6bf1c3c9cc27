//! Test-function generators: i.i.d. Gaussian nodal values and a fixed
//! adversarial battery.
//!
//! Battery members, in order:
//! - `checkerboard`: `(-1)^(i+j)` in every component, with components
//!   alternating in sign;
//! - `boundary`: values only at boundary-adjacent nodes, alternating signs;
//! - `bump-c{k}`: a smooth bump in component `k` only, one per component;
//! - `spike`: a single unit value at the central node, component 0;
//! - `mode-{a}`: the product sine modes `sin(a pi s)` for `a = 1, 2, 5`,
//!   where `s` is the normalized box coordinate, components phase-shifted;
//! - `ones`: the constant vector of ones.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::{Grid, GridFunction};

pub fn random_function(grid: Grid, m: usize, rng: &mut impl Rng) -> GridFunction {
    let v = (0..grid.node_count() * m)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    GridFunction::from_values(grid, m, v).expect("gaussian samples are finite")
}

/// `prod_k cos^2(pi (x_k - c_k) / (2 r))` inside the cube of half-width `r`
/// around `c`, zero outside.
pub fn bump_value(x: &[f64], center: &[f64], radius: f64) -> f64 {
    let mut v = 1.0;
    for (xk, ck) in x.iter().zip(center) {
        let s = (xk - ck) / radius;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let c = (0.5 * std::f64::consts::PI * s).cos();
        v *= c * c;
    }
    v
}

/// Scalar bump as a one-component grid function.
pub fn bump(grid: Grid, center: &[f64], radius: f64) -> GridFunction {
    GridFunction::from_fn(grid, 1, |x, out| out[0] = bump_value(x, center, radius))
}

/// Equal to one on the cube of half-width `inner` around `center`, tapering
/// with `cos^2` to zero at half-width `outer`.
pub fn cutoff_value(x: &[f64], center: &[f64], inner: f64, outer: f64) -> f64 {
    let mut v = 1.0;
    for (xk, ck) in x.iter().zip(center) {
        let d = (xk - ck).abs();
        if d >= outer {
            return 0.0;
        }
        if d > inner {
            let s = (d - inner) / (outer - inner);
            let c = (0.5 * std::f64::consts::PI * s).cos();
            v *= c * c;
        }
    }
    v
}

/// Central bump radius used by the batteries: half the inradius.
pub fn default_radius(grid: &Grid) -> f64 {
    0.5 * grid.domain().inradius()
}

pub fn adversarial_battery(grid: Grid, m: usize) -> Vec<(String, GridFunction)> {
    let d = grid.dim();
    let center = grid.domain().center();
    let radius = default_radius(&grid);
    let mut out = Vec::new();

    let checker = GridFunction::from_values(
        grid,
        m,
        (0..grid.node_count() * m)
            .map(|k| {
                let node = k / m;
                let c = k % m;
                let idx = grid.multi_index(node);
                let parity = (idx[0] + if d == 2 { idx[1] } else { 0 } + c) % 2;
                if parity == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect(),
    )
    .expect("finite");
    out.push(("checkerboard".to_string(), checker));

    let mut boundary = GridFunction::zeros(grid, m);
    for node in 0..grid.node_count() {
        if grid.is_boundary_adjacent(node) {
            for c in 0..m {
                boundary.at_mut(node)[c] = if (node + c) % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
    }
    out.push(("boundary".to_string(), boundary));

    for c in 0..m {
        let mut f = GridFunction::zeros(grid, m);
        for node in 0..grid.node_count() {
            let x = grid.coord(node);
            f.at_mut(node)[c] = bump_value(&x[..d], &center[..d], radius);
        }
        out.push((format!("bump-c{c}"), f));
    }

    let mut spike = GridFunction::zeros(grid, m);
    let mid = [grid.n(0) / 2, if d == 2 { grid.n(1) / 2 } else { 0 }];
    spike.at_mut(grid.node_index(mid))[0] = 1.0;
    out.push(("spike".to_string(), spike));

    let dom = *grid.domain();
    for a in [1.0, 2.0, 5.0] {
        let f = GridFunction::from_fn(grid, m, |x, o| {
            for (c, slot) in o.iter_mut().enumerate() {
                let mut v = 1.0;
                for k in 0..d {
                    let s = (x[k] - dom.lower(k)) / dom.width(k);
                    v *= (a * std::f64::consts::PI * s + 0.3 * c as f64).sin();
                }
                *slot = v;
            }
        });
        out.push((format!("mode-{a}"), f));
    }

    out.push((
        "ones".to_string(),
        GridFunction::from_fn(grid, m, |_, o| o.fill(1.0)),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxDomain;

    #[test]
    fn battery_is_nonzero_and_deterministic() {
        let g = Grid::uniform(BoxDomain::cube(2, -1.0, 1.0).unwrap(), 9).unwrap();
        let a = adversarial_battery(g, 2);
        let b = adversarial_battery(g, 2);
        assert_eq!(a, b);
        assert_eq!(a.len(), 9);
        for (name, f) in &a {
            assert!(f.values().iter().any(|&v| v != 0.0), "{name}");
        }
    }

    #[test]
    fn cutoff_and_bump_shapes() {
        assert_eq!(bump_value(&[0.0], &[0.0], 1.0), 1.0);
        assert_eq!(bump_value(&[1.0], &[0.0], 1.0), 0.0);
        assert_eq!(cutoff_value(&[0.4, -0.4], &[0.0, 0.0], 0.5, 1.0), 1.0);
        assert_eq!(cutoff_value(&[1.2], &[0.0], 0.5, 1.0), 0.0);
        let v = cutoff_value(&[0.75], &[0.0], 0.5, 1.0);
        assert!((v - 0.5).abs() < 1e-15);
    }
}
