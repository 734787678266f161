use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Ellipsoid, HPolytope};
use crate::error::PolytopeError;

/// Fixed facet-normal families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    /// `±e_i`.
    Box,
    /// `±e_i` and `(±e_i ± e_j)/√2`; adjacent facets meet at 45°.
    BoxDiag45,
    Custom(Vec<Vec<f64>>),
}

pub fn template_normals(kind: &TemplateKind, n: usize) -> Result<DMatrix<f64>, PolytopeError> {
    if n == 0 {
        return Err(PolytopeError::UnsupportedTemplate("dimension 0".into()));
    }
    let mut rows: Vec<DVector<f64>> = Vec::new();
    match kind {
        TemplateKind::Box => push_axes(&mut rows, n),
        TemplateKind::BoxDiag45 => {
            if n < 2 {
                return Err(PolytopeError::UnsupportedTemplate("box_diag45 needs n >= 2".into()));
            }
            push_axes(&mut rows, n);
            let s = std::f64::consts::FRAC_1_SQRT_2;
            for i in 0..n {
                for j in i + 1..n {
                    for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                        let mut r = DVector::zeros(n);
                        r[i] = si * s;
                        r[j] = sj * s;
                        rows.push(r);
                    }
                }
            }
        }
        TemplateKind::Custom(list) => {
            if list.is_empty() {
                return Err(PolytopeError::UnsupportedTemplate("empty custom template".into()));
            }
            for r in list {
                let v = DVector::from_column_slice(r);
                let nv = v.norm();
                if r.len() != n || !nv.is_finite() || nv == 0.0 {
                    return Err(PolytopeError::UnsupportedTemplate("bad custom row".into()));
                }
                rows.push(v / nv);
            }
        }
    }
    Ok(DMatrix::from_rows(&rows.iter().map(|r| r.transpose()).collect::<Vec<_>>()))
}

fn push_axes(rows: &mut Vec<DVector<f64>>, n: usize) {
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut r = DVector::zeros(n);
            r[i] = s;
            rows.push(r);
        }
    }
}

/// Tightest offsets for the normals `a`: `b_m = a_mᵀc + C√(a_mᵀΣa_m)`.
pub fn enclose_ellipsoid(e: &Ellipsoid, a: &DMatrix<f64>) -> Result<HPolytope, PolytopeError> {
    let n = e.center.len();
    if a.ncols() != n || e.shape.nrows() != n || e.shape.ncols() != n {
        return Err(PolytopeError::DimensionMismatch { expected: n, found: a.ncols() });
    }
    if !(e.scale >= 0.0) {
        return Err(PolytopeError::Invalid("negative ellipsoid scale".into()));
    }
    let b = DVector::from_fn(a.nrows(), |m, _| {
        let am = a.row(m).transpose();
        am.dot(&e.center) + e.scale * am.dot(&(&e.shape * &am)).max(0.0).sqrt()
    });
    HPolytope::new(a.clone(), b)
}
