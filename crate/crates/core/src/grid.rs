//! Bounded economic domain and its cell-centered discretization.
//!
//! Transactions live on the pair space `z = (x, y)` where `x` is the creditor's
//! risk coordinate and `y` the borrower's. With `n` risks the pair space has
//! `2n` axes, ordered `x_1..x_n, y_1..y_n`. Every axis of the grid carries the
//! same number of cells `m`, so a grid holds `m^(2n)` cells. Cells are stored
//! row-major with axis 0 varying slowest.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of risk axes.
pub const MAX_RISKS: usize = 3;

/// The box `[0, X_1] x ... x [0, X_n]` of admissible risk grades.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomicDomain {
    bounds: Vec<f64>,
}

impl EconomicDomain {
    pub fn new(bounds: Vec<f64>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > MAX_RISKS {
            return Err(Error::invalid(format!(
                "risk dimension must be in 1..={MAX_RISKS}, got {}",
                bounds.len()
            )));
        }
        if let Some((i, b)) = bounds.iter().enumerate().find(|(_, b)| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::invalid(format!(
                "upper risk bound X_{} must be positive and finite, got {b}",
                i + 1
            )));
        }
        Ok(Self { bounds })
    }

    /// Unit box in `n` dimensions.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    /// Upper bound of a pair-space axis (`x_i` and `y_i` share `X_i`).
    pub fn pair_bound(&self, axis: usize) -> f64 {
        self.bounds[axis % self.bounds.len()]
    }
}

/// Uniform cell-centered grid over the `2n`-dimensional pair space.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    domain: EconomicDomain,
    cells_per_axis: usize,
    spacing: Vec<f64>,
    centers: Vec<Vec<f64>>,
    strides: Vec<usize>,
    cell_count: usize,
    cell_measure: f64,
}

/// Builds the pair-space grid with `m` cells per axis.
pub fn make_grid(domain: EconomicDomain, m: usize) -> Result<GridSpec> {
    if m == 0 {
        return Err(Error::invalid("cells per axis must be at least 1"));
    }
    let axes = 2 * domain.dimension();
    let cell_count = m
        .checked_pow(axes as u32)
        .ok_or_else(|| Error::invalid(format!("grid with {m}^{axes} cells overflows")))?;
    let spacing: Vec<f64> = (0..axes).map(|a| domain.pair_bound(a) / m as f64).collect();
    let centers = spacing
        .iter()
        .map(|h| (0..m).map(|k| (k as f64 + 0.5) * h).collect())
        .collect();
    let strides = (0..axes).map(|a| m.pow((axes - 1 - a) as u32)).collect();
    let cell_measure = spacing.iter().product();
    Ok(GridSpec {
        domain,
        cells_per_axis: m,
        spacing,
        centers,
        strides,
        cell_count,
        cell_measure,
    })
}

impl GridSpec {
    pub fn domain(&self) -> &EconomicDomain {
        &self.domain
    }

    /// Number of risks `n`.
    pub fn risks(&self) -> usize {
        self.domain.dimension()
    }

    /// Number of pair-space axes, `2n`.
    pub fn axes(&self) -> usize {
        self.spacing.len()
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn cell_count(&self) -> usize {
        self.cell_count
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn cell_measure(&self) -> f64 {
        self.cell_measure
    }

    pub fn centers(&self, axis: usize) -> &[f64] {
        &self.centers[axis]
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Position of `cell` along `axis`, in `0..m`.
    #[inline]
    pub fn axis_index(&self, cell: usize, axis: usize) -> usize {
        (cell / self.strides[axis]) % self.cells_per_axis
    }

    /// Center coordinate of `cell` on `axis`.
    #[inline]
    pub fn coordinate(&self, cell: usize, axis: usize) -> f64 {
        self.centers[axis][self.axis_index(cell, axis)]
    }

    /// Flat index from per-axis indices.
    pub fn flat_index(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    /// Cell index along `axis` containing coordinate `value`; the upper wall
    /// belongs to the last cell.
    pub fn locate(&self, axis: usize, value: f64) -> usize {
        let k = (value / self.spacing[axis]).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.cells_per_axis - 1)
        }
    }

    /// Flat index of the pair cell holding creditor position `x` and borrower position `y`.
    pub fn locate_pair(&self, x: &[f64], y: &[f64]) -> usize {
        let n = self.risks();
        (0..n)
            .map(|i| self.locate(i, x[i]) * self.strides[i])
            .chain((0..n).map(|i| self.locate(n + i, y[i]) * self.strides[n + i]))
            .sum()
    }
}

/// One real value per cell, read as a density per unit pair-space volume.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<GridSpec>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<GridSpec>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.cell_count()],
        }
    }

    pub fn constant(grid: &Arc<GridSpec>, value: f64) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![value; grid.cell_count()],
        }
    }

    pub fn from_values(grid: &Arc<GridSpec>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::invalid(format!(
                "field has {} values but grid has {} cells",
                values.len(),
                grid.cell_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite field value at cell {i}")));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Samples `f` at every cell center; `f` receives the `2n` center coordinates.
    pub fn from_fn(grid: &Arc<GridSpec>, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let axes = grid.axes();
        let mut z = vec![0.0; axes];
        let values = (0..grid.cell_count())
            .map(|c| {
                for (a, zc) in z.iter_mut().enumerate() {
                    *zc = grid.coordinate(c, a);
                }
                f(&z)
            })
            .collect();
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub(crate) fn from_raw(grid: &Arc<GridSpec>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.cell_count());
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Index of the first non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &ScalarField, beta: f64) -> Result<ScalarField> {
        if self.grid != other.grid {
            return Err(Error::invalid("fields live on different grids"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Self::from_raw(&self.grid, values))
    }
}

/// `2n` component fields ordered `x_1..x_n, y_1..y_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn zeros(grid: &Arc<GridSpec>) -> Self {
        Self {
            components: (0..grid.axes()).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    pub fn from_components(components: Vec<ScalarField>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::invalid("vector field needs at least one component"));
        };
        let grid = Arc::clone(first.grid());
        if components.len() != grid.axes() {
            return Err(Error::invalid(format!(
                "vector field needs {} components, got {}",
                grid.axes(),
                components.len()
            )));
        }
        if components.iter().any(|c| c.grid() != &grid) {
            return Err(Error::invalid("vector components live on different grids"));
        }
        Ok(Self { components })
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        self.components[0].grid()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }

    pub fn component_mut(&mut self, axis: usize) -> &mut ScalarField {
        &mut self.components[axis]
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Neumaier-compensated sum. Keeps integrals of large fields accurate enough
/// that per-step differences of moments resolve the source terms.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Midpoint quadrature of `∫ f dz`.
pub fn integrate_field(f: &ScalarField) -> f64 {
    compensated_sum(f.values.iter().copied()) * f.grid.cell_measure()
}

/// Midpoint quadrature of `∫ z_axis f dz`.
pub fn coordinate_moment(f: &ScalarField, axis: usize) -> Result<f64> {
    let grid = f.grid();
    if axis >= grid.axes() {
        return Err(Error::invalid(format!(
            "axis {axis} out of range for {}-axis grid",
            grid.axes()
        )));
    }
    let sum = compensated_sum(f.values.iter().enumerate().map(|(c, v)| grid.coordinate(c, axis) * v));
    Ok(sum * grid.cell_measure())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_grid(n: usize, m: usize) -> Arc<GridSpec> {
        Arc::new(make_grid(EconomicDomain::unit(n).unwrap(), m).unwrap())
    }

    #[test]
    fn four_cell_axis_has_quarter_spacing() {
        let g = unit_grid(1, 4);
        assert_eq!(g.spacing(), &[0.25, 0.25]);
        assert_eq!(g.centers(0), &[0.125, 0.375, 0.625, 0.875]);
        assert_eq!(g.centers(1), &[0.125, 0.375, 0.625, 0.875]);
        assert_eq!(g.cell_count(), 16);
    }

    #[test]
    fn single_cell_grid() {
        let g = unit_grid(1, 1);
        assert_eq!(g.cell_count(), 1);
        assert_eq!(g.coordinate(0, 0), 0.5);
        assert_eq!(g.coordinate(0, 1), 0.5);
        assert_eq!(g.cell_measure(), 1.0);
    }

    #[test]
    fn two_risk_grid_cell_count() {
        assert_eq!(unit_grid(2, 8).cell_count(), 4096);
    }

    #[test]
    fn zero_cells_rejected() {
        let err = make_grid(EconomicDomain::unit(1).unwrap(), 0).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn domain_validation() {
        assert!(EconomicDomain::new(vec![]).is_err());
        assert!(EconomicDomain::new(vec![1.0; 4]).is_err());
        assert!(EconomicDomain::new(vec![1.0, 0.0]).is_err());
        assert!(EconomicDomain::new(vec![-1.0]).is_err());
        assert!(EconomicDomain::new(vec![f64::NAN]).is_err());
        assert_eq!(EconomicDomain::new(vec![2.0, 0.5]).unwrap().dimension(), 2);
    }

    #[test]
    fn non_unit_bounds_set_spacing_per_axis() {
        let g = make_grid(EconomicDomain::new(vec![2.0, 0.5]).unwrap(), 4).unwrap();
        assert_eq!(g.spacing(), &[0.5, 0.125, 0.5, 0.125]);
        assert_relative_eq!(g.cell_measure(), 0.5 * 0.125 * 0.5 * 0.125);
        assert_eq!(g.centers(1)[3], 0.4375);
    }

    #[test]
    fn flat_index_roundtrips_axis_index() {
        let g = unit_grid(2, 3);
        for c in 0..g.cell_count() {
            let idx: Vec<usize> = (0..g.axes()).map(|a| g.axis_index(c, a)).collect();
            assert_eq!(g.flat_index(&idx), c);
        }
    }

    #[test]
    fn locate_clamps_to_walls() {
        let g = unit_grid(1, 4);
        assert_eq!(g.locate(0, 0.0), 0);
        assert_eq!(g.locate(0, 0.25), 1);
        assert_eq!(g.locate(0, 1.0), 3);
        assert_eq!(g.locate(0, 0.999), 3);
        assert_eq!(g.locate_pair(&[0.875], &[0.125]), 3 * 4);
    }

    #[test]
    fn integrate_zero_and_constant() {
        for m in [1, 2, 4, 16, 64] {
            let g = unit_grid(1, m);
            assert_eq!(integrate_field(&ScalarField::zeros(&g)), 0.0);
            assert_eq!(integrate_field(&ScalarField::constant(&g, 1.0)), 1.0);
        }
        let g = unit_grid(1, 3);
        assert_relative_eq!(integrate_field(&ScalarField::constant(&g, 1.0)), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn integrate_linear_field_is_exact() {
        let g = unit_grid(1, 64);
        let f = ScalarField::from_fn(&g, |z| z[0]);
        assert_relative_eq!(integrate_field(&f), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn coordinate_moments() {
        let g = unit_grid(1, 4);
        assert_eq!(coordinate_moment(&ScalarField::zeros(&g), 0).unwrap(), 0.0);
        assert_eq!(coordinate_moment(&ScalarField::constant(&g, 1.0), 0).unwrap(), 0.5);

        let mut f = ScalarField::zeros(&g);
        f.values_mut()[g.locate_pair(&[0.875], &[0.125])] = 16.0;
        assert_eq!(integrate_field(&f), 1.0);
        assert_eq!(coordinate_moment(&f, 0).unwrap(), 0.875);
        assert_eq!(coordinate_moment(&f, 1).unwrap(), 0.125);

        assert!(matches!(coordinate_moment(&f, 2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn from_values_checks_length_and_finiteness() {
        let g = unit_grid(1, 2);
        assert!(ScalarField::from_values(&g, vec![0.0; 3]).is_err());
        assert!(ScalarField::from_values(&g, vec![0.0, 1.0, f64::NAN, 0.0]).is_err());
        assert!(ScalarField::from_values(&g, vec![0.0; 4]).is_ok());
    }

    #[test]
    fn vector_field_component_count() {
        let g = unit_grid(2, 2);
        assert_eq!(VectorField::zeros(&g).len(), 4);
        let comps = vec![ScalarField::zeros(&g); 3];
        assert!(VectorField::from_components(comps).is_err());
    }

    #[test]
    fn grid_construction_is_deterministic() {
        let a = make_grid(EconomicDomain::new(vec![0.7, 1.3]).unwrap(), 5).unwrap();
        let b = make_grid(EconomicDomain::new(vec![0.7, 1.3]).unwrap(), 5).unwrap();
        assert_eq!(a, b);
        for axis in 0..a.axes() {
            for (p, q) in a.centers(axis).iter().zip(b.centers(axis)) {
                assert_eq!(p.to_bits(), q.to_bits());
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn quadrature_is_linear(
                vals in prop::collection::vec(-10.0f64..10.0, 64),
                other in prop::collection::vec(-10.0f64..10.0, 64),
                alpha in -3.0f64..3.0,
                beta in -3.0f64..3.0,
            ) {
                let g = unit_grid(1, 8);
                let f = ScalarField::from_values(&g, vals).unwrap();
                let h = ScalarField::from_values(&g, other).unwrap();
                let lhs = integrate_field(&f.combine(alpha, &h, beta).unwrap());
                let rhs = alpha * integrate_field(&f) + beta * integrate_field(&h);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            }

            #[test]
            fn midpoint_exact_for_bilinear_fields(
                c0 in -2.0f64..2.0, cx in -2.0f64..2.0, cy in -2.0f64..2.0, cxy in -2.0f64..2.0,
                m in 1usize..20,
            ) {
                let g = unit_grid(1, m);
                let f = ScalarField::from_fn(&g, |z| c0 + cx * z[0] + cy * z[1] + cxy * z[0] * z[1]);
                let exact = c0 + cx / 2.0 + cy / 2.0 + cxy / 4.0;
                prop_assert!((integrate_field(&f) - exact).abs() < 1e-12);
                // ∫ y (c0 + cx x) dz is linear in y for fixed x
                let lin = ScalarField::from_fn(&g, |z| c0 + cx * z[0]);
                let exact_moment = 0.5 * (c0 + cx / 2.0);
                prop_assert!((coordinate_moment(&lin, 1).unwrap() - exact_moment).abs() < 1e-12);
            }
        }
    }
}
