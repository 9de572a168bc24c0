//! Donor-cell upwind transport on the closed pair-space box.
//!
//! Face velocities are the mean of the two adjacent cell velocities. Faces on
//! the domain walls carry no flux, so the discrete divergence sums to zero
//! over the grid and every integral is changed only by sources.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, VectorField};

const PAR_MIN_CELLS: usize = 4096;

/// Velocity from density and impulse, `v = P·ρ / (ρ² + ε²)`.
///
/// Tends to `P/ρ` where `ρ² ≫ ε²` and to zero where the density vanishes.
pub fn derive_velocity(density: &ScalarField, impulse: &VectorField, epsilon: f64) -> Result<VectorField> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!(
            "regularization epsilon must be positive, got {epsilon}"
        )));
    }
    if impulse.grid() != density.grid() {
        return Err(Error::invalid("density and impulse live on different grids"));
    }
    let eps2 = epsilon * epsilon;
    let rho = density.values();
    let comps = impulse
        .components()
        .iter()
        .map(|p| {
            let v = p
                .values()
                .iter()
                .zip(rho)
                .map(|(p, r)| p * r / (r * r + eps2))
                .collect();
            ScalarField::from_raw(density.grid(), v)
        })
        .collect();
    VectorField::from_components(comps)
}

/// `max over cells of Σ_axes |v_axis|·dt/h_axis`.
pub fn cfl_number(v: &VectorField, dt: f64) -> f64 {
    let grid = v.grid();
    let mut worst = 0.0f64;
    for c in 0..grid.cell_count() {
        let s: f64 = v
            .components()
            .iter()
            .zip(grid.spacing())
            .map(|(va, h)| va.values()[c].abs() * dt / h)
            .sum();
        worst = worst.max(s);
    }
    worst
}

/// Flux from the `lower` cell to the `upper` cell across their shared face.
/// A face with a missing neighbour lies on a wall and carries nothing.
#[inline]
fn face_flux(f: &[f64], v: &[f64], lower: Option<usize>, upper: Option<usize>) -> f64 {
    let (Some(l), Some(r)) = (lower, upper) else {
        return 0.0;
    };
    let vf = 0.5 * (v[l] + v[r]);
    if vf > 0.0 {
        vf * f[l]
    } else {
        vf * f[r]
    }
}

/// Net outward flux through all wall faces, as assembled by the scheme.
pub fn boundary_flux(f: &ScalarField, v: &VectorField) -> f64 {
    let grid = f.grid();
    let m = grid.cells_per_axis();
    let mut total = 0.0;
    for (axis, va) in v.components().iter().enumerate() {
        for c in 0..grid.cell_count() {
            let k = grid.axis_index(c, axis);
            if k == m - 1 {
                total += face_flux(f.values(), va.values(), Some(c), None);
            }
            if k == 0 {
                total -= face_flux(f.values(), va.values(), None, Some(c));
            }
        }
    }
    total
}

pub(crate) fn advect_unchecked(f: &ScalarField, v: &VectorField, dt: f64) -> ScalarField {
    let grid = f.grid();
    let m = grid.cells_per_axis();
    let fv = f.values();
    let axes: Vec<(usize, f64, &[f64])> = (0..grid.axes())
        .map(|a| (grid.stride(a), dt / grid.spacing()[a], v.component(a).values()))
        .collect();
    let update = |c: usize| {
        let mut div = 0.0;
        for (a, &(stride, ratio, va)) in axes.iter().enumerate() {
            let k = grid.axis_index(c, a);
            let out = face_flux(fv, va, Some(c), (k + 1 < m).then(|| c + stride));
            let inflow = face_flux(fv, va, (k > 0).then(|| c - stride), Some(c));
            div += ratio * (out - inflow);
        }
        fv[c] - div
    };
    let n = grid.cell_count();
    let values: Vec<f64> = if n >= PAR_MIN_CELLS {
        (0..n).into_par_iter().with_min_len(1024).map(update).collect()
    } else {
        (0..n).map(update).collect()
    };
    ScalarField::from_raw(grid, values)
}

/// One donor-cell step of `∂f/∂t + ∇·(v f) = 0` with closed walls.
///
/// Rejects the step when the CFL number exceeds 1.
pub fn advect_upwind(f: &ScalarField, v: &VectorField, dt: f64) -> Result<ScalarField> {
    if v.grid() != f.grid() {
        return Err(Error::invalid("field and velocity live on different grids"));
    }
    let cfl = cfl_number(v, dt);
    if cfl > 1.0 {
        return Err(Error::CflViolation { cfl, limit: 1.0 });
    }
    Ok(advect_unchecked(f, v, dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{coordinate_moment, integrate_field, make_grid, EconomicDomain, GridSpec};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn grid(m: usize) -> Arc<GridSpec> {
        Arc::new(make_grid(EconomicDomain::unit(1).unwrap(), m).unwrap())
    }

    fn gaussian(g: &Arc<GridSpec>, cx: f64, cy: f64, w: f64) -> ScalarField {
        ScalarField::from_fn(g, |z| {
            (-((z[0] - cx).powi(2) + (z[1] - cy).powi(2)) / (2.0 * w * w)).exp()
        })
    }

    fn uniform_velocity(g: &Arc<GridSpec>, vx: f64, vy: f64) -> VectorField {
        VectorField::from_components(vec![ScalarField::constant(g, vx), ScalarField::constant(g, vy)]).unwrap()
    }

    #[test]
    fn velocity_from_zero_impulse_is_zero() {
        let g = grid(4);
        let v = derive_velocity(&ScalarField::constant(&g, 2.0), &VectorField::zeros(&g), 1e-8).unwrap();
        assert!(v.components().iter().all(|c| c.values().iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn velocity_regular_and_vanishing_density() {
        let g = grid(1);
        let imp =
            VectorField::from_components(vec![ScalarField::constant(&g, 0.5), ScalarField::constant(&g, 0.3)]).unwrap();
        let v = derive_velocity(&ScalarField::constant(&g, 1.0), &imp, 1e-8).unwrap();
        assert_relative_eq!(v.component(0).values()[0], 0.5 / (1.0 + 1e-16));
        let v = derive_velocity(&ScalarField::zeros(&g), &imp, 1e-8).unwrap();
        assert_eq!(v.component(1).values()[0], 0.0);
        assert!(derive_velocity(&ScalarField::zeros(&g), &imp, 0.0).is_err());
    }

    #[test]
    fn zero_velocity_leaves_field_unchanged() {
        let g = grid(16);
        let f = gaussian(&g, 0.4, 0.6, 0.1);
        let out = advect_upwind(&f, &VectorField::zeros(&g), 0.3).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn advection_conserves_integral() {
        let g = grid(32);
        let f = gaussian(&g, 0.3, 0.7, 0.15);
        let v = VectorField::from_components(vec![
            ScalarField::from_fn(&g, |z| (6.0 * z[1]).sin()),
            ScalarField::from_fn(&g, |z| z[0] - 0.5),
        ])
        .unwrap();
        let before = integrate_field(&f);
        let mut cur = f;
        for _ in 0..50 {
            cur = advect_upwind(&cur, &v, 0.01).unwrap();
        }
        assert_relative_eq!(integrate_field(&cur), before, max_relative = 1e-13);
        assert_eq!(boundary_flux(&cur, &v), 0.0);
    }

    #[test]
    fn cfl_violation_is_reported() {
        let g = grid(8);
        let v = uniform_velocity(&g, 1.0, 1.0);
        match advect_upwind(&ScalarField::zeros(&g), &v, 0.1) {
            Err(Error::CflViolation { cfl, .. }) => assert_relative_eq!(cfl, 1.6, epsilon = 1e-12),
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn wall_stops_transport() {
        // everything piles into the last x column but nothing leaves
        let g = grid(8);
        let f = ScalarField::constant(&g, 1.0);
        let v = uniform_velocity(&g, 1.0, 0.0);
        let mut cur = f;
        for _ in 0..200 {
            cur = advect_upwind(&cur, &v, 0.05).unwrap();
        }
        assert_relative_eq!(integrate_field(&cur), 1.0, max_relative = 1e-13);
        assert!(cur.min() >= 0.0);
        let x_mean = coordinate_moment(&cur, 0).unwrap();
        assert!(x_mean > 0.9, "mass should collect at the wall, mean x = {x_mean}");
    }

    /// Characteristics oracle: the exact solution is the initial profile shifted
    /// by `v t`, so its x-moment is the quadrature of the shifted Gaussian.
    #[test]
    fn gaussian_translates_with_uniform_velocity() {
        let m = 64;
        let g = grid(m);
        let (x0, y0, w, speed) = (0.25, 0.5, 0.06, 0.25);
        let total_time = 0.5 / speed;
        let f0 = gaussian(&g, x0, y0, w);
        let exact = gaussian(&g, x0 + speed * total_time, y0, w);
        let expected = coordinate_moment(&exact, 0).unwrap() / integrate_field(&exact);

        let v = uniform_velocity(&g, speed, 0.0);
        let steps = 200;
        let dt = total_time / steps as f64;
        let mut cur = f0.clone();
        for _ in 0..steps {
            cur = advect_upwind(&cur, &v, dt).unwrap();
        }
        let moved = coordinate_moment(&cur, 0).unwrap() / integrate_field(&cur);
        let start = coordinate_moment(&f0, 0).unwrap() / integrate_field(&f0);
        let h = 1.0 / m as f64;
        assert!((moved - expected).abs() <= h, "moved to {moved}, exact {expected}");
        assert!(((moved - start) - 0.5).abs() <= h);
    }
}
