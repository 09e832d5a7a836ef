//! Group structure over classifier weight rows (and feature columns), plus
//! the group-norm / dynamic-threshold / group-soft-threshold operations both
//! pruners are built from.
//!
//! Group g owns rows {2g, 2g+1} of the H×C weight matrix for the PPV+MAX
//! model (a 2C-dimensional group vector) and row {g} otherwise.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::kernel_bank::ModelKind;

/// Uniform partition of `0..H` into `num_groups` consecutive runs of
/// `rows_per_group` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupLayout {
    num_groups: usize,
    rows_per_group: usize,
}

impl GroupLayout {
    pub fn new(num_groups: usize, rows_per_group: usize) -> Self {
        assert!(num_groups > 0 && rows_per_group > 0);
        Self {
            num_groups,
            rows_per_group,
        }
    }

    pub fn for_model(kind: ModelKind, num_groups: usize) -> Self {
        Self::new(num_groups, kind.features_per_kernel())
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn rows_per_group(&self) -> usize {
        self.rows_per_group
    }

    pub fn num_rows(&self) -> usize {
        self.num_groups * self.rows_per_group
    }

    /// Row range owned by group `g`.
    pub fn rows(&self, g: usize) -> std::ops::Range<usize> {
        debug_assert!(g < self.num_groups);
        g * self.rows_per_group..(g + 1) * self.rows_per_group
    }

    /// Row indices of the given groups, in group order.
    pub fn rows_of(&self, groups: &[usize]) -> Vec<usize> {
        groups.iter().flat_map(|&g| self.rows(g)).collect()
    }
}

/// Euclidean norm of each group's rows (the reshaped row norms).
pub fn group_norms(m: &ArrayView2<f64>, layout: &GroupLayout) -> Result<Vec<f64>> {
    if m.nrows() != layout.num_rows() {
        return Err(Error::DimensionMismatch {
            context: "group_norms row count",
            got: m.nrows(),
            expected: layout.num_rows(),
        });
    }
    let mut norms = vec![0.0; layout.num_groups()];
    for (g, norm) in norms.iter_mut().enumerate() {
        let mut s = 0.0;
        for r in layout.rows(g) {
            for &v in m.row(r) {
                s += v * v;
            }
        }
        *norm = s.sqrt();
    }
    Ok(norms)
}

/// Sort groups by norm, descending, stable on ties by original index, and
/// return the (m+1)-th largest norm as the threshold together with the order.
pub fn dynamic_threshold(norms: &[f64], m: usize) -> Result<(f64, Vec<usize>)> {
    let g = norms.len();
    if m == 0 || m >= g {
        return Err(Error::InvalidParam(format!(
            "remain count must satisfy 1 <= m < G, got m={m}, G={g}"
        )));
    }
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&a, &b| {
        norms[b]
            .partial_cmp(&norms[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ok((norms[order[m]], order))
}

/// Blockwise soft threshold: each group is scaled by
/// `max(1 - threshold/‖group‖, 0)`, with the convention 0/0 = 1 so zero
/// groups stay zero. Groups exactly at the threshold map to zero.
pub fn group_soft_threshold(
    wtilde: &ArrayView2<f64>,
    threshold: f64,
    layout: &GroupLayout,
) -> Result<Array2<f64>> {
    let norms = group_norms(wtilde, layout)?;
    let mut theta = wtilde.to_owned();
    for (g, &norm) in norms.iter().enumerate() {
        let factor = if norm == 0.0 {
            // 0/0 = 1 when the threshold is also zero; the group is zero
            // either way, so shrink fully unless both vanish.
            if threshold == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            (1.0 - threshold / norm).max(0.0)
        };
        if factor != 1.0 {
            for r in layout.rows(g) {
                theta.row_mut(r).mapv_inplace(|v| v * factor);
            }
        }
    }
    Ok(theta)
}

/// `‖W̃_{f1}‖ / ‖W̃_{f_{m+1}}‖`: largest group norm over the threshold norm.
/// Returns +∞ on a zero denominator; 1 when every norm is zero.
pub fn relative_threshold(norms: &[f64], order: &[usize], m: usize) -> f64 {
    let top = norms[order[0]];
    let thr = norms[order[m]];
    if thr == 0.0 {
        if top == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        top / thr
    }
}
