use nalgebra::{DMatrix, DVector, Vector3};

use super::{Equality, Sense, SdpError, SdpProblem, SymMatrix};
use crate::error::PolytopeError;
use crate::lp;

/// Unit-column (`Q̃₁..Q̃₃`, rhs 1) and column-orthogonality (`Q̃₄..Q̃₆`, rhs 0)
/// blocks over `vec(R)`.
pub fn build_rotation_orthogonality_blocks() -> [SymMatrix; 6] {
    let mut out: [SymMatrix; 6] = std::array::from_fn(|_| SymMatrix::zeros(9));
    for c in 0..3 {
        for k in 0..3 {
            out[c].add(3 * c + k, 3 * c + k, 1.0);
        }
    }
    for (slot, (p, q)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
        for k in 0..3 {
            out[3 + slot].add(3 * p + k, 3 * q + k, 0.5);
        }
    }
    out
}

/// The six `Q_i` for a rotation stored at `offset` of a side-`n` problem.
fn rotation_equalities(n: usize, offset: usize) -> Vec<Equality> {
    build_rotation_orthogonality_blocks()
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let mut m = q.embed(n, offset);
            if i < 3 {
                m.add(n - 1, n - 1, -1.0);
            }
            Equality { matrix: m, rhs: 0.0 }
        })
        .collect()
}

/// `½ row` on the border against the anchor and `−offset` in the corner.
fn border_row(n: usize, at: usize, row: &[f64], offset: f64) -> SymMatrix {
    let mut m = SymMatrix::zeros(n);
    for (k, &v) in row.iter().enumerate() {
        m.add(at + k, n - 1, 0.5 * v);
    }
    m.add(n - 1, n - 1, -offset);
    m
}

fn row_vec(a: &DMatrix<f64>, i: usize) -> Vec<f64> {
    a.row(i).iter().copied().collect()
}

fn check_cols(a: &DMatrix<f64>, b: &DVector<f64>, cols: usize, what: &str) -> Result<(), SdpError> {
    if a.ncols() != cols || a.nrows() != b.len() {
        return Err(SdpError::DimensionMismatch(format!(
            "{what}: {}x{} with {} offsets, expected {cols} columns",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    Ok(())
}

/// Interval hull of a pose-like polytope, rotation entries clipped to `[-1, 1]`.
fn pose_bounds(a: &DMatrix<f64>, b: &DVector<f64>, rot: usize) -> Result<Vec<(f64, f64)>, SdpError> {
    let hull = match lp::interval_hull(a, b) {
        Ok(Some(h)) => h,
        Ok(None) => return Err(SdpError::Bounds("set is empty".into())),
        Err(PolytopeError::NotAPolytope) => return Err(SdpError::Bounds("set is unbounded".into())),
        Err(e) => return Err(SdpError::Bounds(e.to_string())),
    };
    Ok(hull
        .into_iter()
        .enumerate()
        .map(|(k, (l, u))| if k < rot { (l.max(-1.0).min(1.0), u.min(1.0).max(-1.0)) } else { (l, u) })
        .map(|(l, u)| (l.min(u), u.max(l)))
        .collect())
}

/// Constraint data of the forward relaxation, shared by all objectives.
#[derive(Debug, Clone)]
pub struct ForwardRelaxation {
    constraints: SdpProblem,
}

impl ForwardRelaxation {
    pub fn new(h: &DMatrix<f64>, d: &DVector<f64>) -> Result<Self, SdpError> {
        check_cols(h, d, 12, "pose constraints")?;
        let bounds = pose_bounds(h, d, 9)?;
        let n = 13;
        let inequalities = (0..h.nrows()).map(|i| border_row(n, 0, &row_vec(h, i), d[i])).collect();
        Ok(ForwardRelaxation {
            constraints: SdpProblem {
                dim: n,
                sense: Sense::Maximize,
                objective: SymMatrix::zeros(n),
                equalities: rotation_equalities(n, 0),
                inequalities,
                anchor: n - 1,
                redundant: Vec::new(),
                coordinate_bounds: Some(bounds),
            },
        })
    }

    /// Pose-coordinate interval hull the cuts are built from.
    pub fn bounds(&self) -> &[(f64, f64)] {
        self.constraints.coordinate_bounds.as_deref().unwrap_or(&[])
    }

    /// `max aᵀ(Rv + t)` over the relaxed pose set.
    pub fn problem(&self, v: &Vector3<f64>, a: &Vector3<f64>) -> SdpProblem {
        let n = 13;
        let mut obj = SymMatrix::zeros(n);
        // (v ⊗ I₃)a: entry 3k + i is v_k a_i
        for k in 0..3 {
            for i in 0..3 {
                obj.add(3 * k + i, n - 1, 0.5 * v[k] * a[i]);
            }
        }
        for i in 0..3 {
            obj.add(9 + i, n - 1, 0.5 * a[i]);
        }
        SdpProblem { objective: obj, ..self.constraints.clone() }
    }
}

pub fn build_forward_sdp(
    v: &Vector3<f64>,
    a: &Vector3<f64>,
    h: &DMatrix<f64>,
    d: &DVector<f64>,
) -> Result<SdpProblem, SdpError> {
    Ok(ForwardRelaxation::new(h, d)?.problem(v, a))
}

/// Relaxation over `y = col(x(T₁), x(T₂), 1)`.
#[derive(Debug, Clone)]
pub struct CompoundRelaxation {
    constraints: SdpProblem,
}

impl CompoundRelaxation {
    pub fn new(a1: &DMatrix<f64>, b1: &DVector<f64>, a2: &DMatrix<f64>, b2: &DVector<f64>) -> Result<Self, SdpError> {
        check_cols(a1, b1, 12, "first pose set")?;
        check_cols(a2, b2, 12, "second pose set")?;
        let n = 25;
        let mut bounds = pose_bounds(a1, b1, 9)?;
        bounds.extend(pose_bounds(a2, b2, 9)?);
        let mut equalities = rotation_equalities(n, 0);
        equalities.extend(rotation_equalities(n, 12));
        let mut inequalities: Vec<SymMatrix> = (0..a1.nrows()).map(|i| border_row(n, 0, &row_vec(a1, i), b1[i])).collect();
        inequalities.extend((0..a2.nrows()).map(|i| border_row(n, 12, &row_vec(a2, i), b2[i])));
        Ok(CompoundRelaxation {
            constraints: SdpProblem {
                dim: n,
                sense: Sense::Maximize,
                objective: SymMatrix::zeros(n),
                equalities,
                inequalities,
                anchor: n - 1,
                redundant: Vec::new(),
                coordinate_bounds: Some(bounds),
            },
        })
    }

    /// `max aᵀx(T₁T₂)` for a 12-vector `a`.
    pub fn problem(&self, a: &DVector<f64>) -> Result<SdpProblem, SdpError> {
        if a.len() != 12 {
            return Err(SdpError::DimensionMismatch(format!("direction of length {}", a.len())));
        }
        let n = 25;
        let (r1, t1, r2, t2) = (0, 9, 12, 21);
        let mut obj = SymMatrix::zeros(n);
        // ⟨A, R₁R₂⟩ = Σ A_ij R₁[i,k] R₂[k,j]
        for i in 0..3 {
            for j in 0..3 {
                let aij = a[i + 3 * j];
                for k in 0..3 {
                    obj.add(r1 + i + 3 * k, r2 + k + 3 * j, 0.5 * aij);
                }
            }
        }
        // a_tᵀ(R₁t₂ + t₁)
        for i in 0..3 {
            let at = a[9 + i];
            for k in 0..3 {
                obj.add(r1 + i + 3 * k, t2 + k, 0.5 * at);
            }
            obj.add(t1 + i, n - 1, 0.5 * at);
        }
        Ok(SdpProblem { objective: obj, ..self.constraints.clone() })
    }
}

pub fn build_compound_sdp(
    a1: &DMatrix<f64>,
    b1: &DVector<f64>,
    a2: &DMatrix<f64>,
    b2: &DVector<f64>,
    a: &DVector<f64>,
) -> Result<SdpProblem, SdpError> {
    CompoundRelaxation::new(a1, b1, a2, b2)?.problem(a)
}

/// Relaxation of `min tr(R R̄ᵀ)` over rotations with `vec(R)` in `P(A_r, b_r)`.
#[derive(Debug, Clone)]
pub struct RotballRelaxation {
    constraints: SdpProblem,
}

impl RotballRelaxation {
    pub fn new(a_r: &DMatrix<f64>, b_r: &DVector<f64>) -> Result<Self, SdpError> {
        check_cols(a_r, b_r, 9, "rotation set")?;
        let n = 10;
        let bounds = pose_bounds(a_r, b_r, 9)?;
        let inequalities = (0..a_r.nrows()).map(|i| border_row(n, 0, &row_vec(a_r, i), b_r[i])).collect();
        Ok(RotballRelaxation {
            constraints: SdpProblem {
                dim: n,
                sense: Sense::Minimize,
                objective: SymMatrix::zeros(n),
                equalities: rotation_equalities(n, 0),
                inequalities,
                anchor: n - 1,
                redundant: Vec::new(),
                coordinate_bounds: Some(bounds),
            },
        })
    }

    pub fn problem(&self, r_bar: &[f64]) -> Result<SdpProblem, SdpError> {
        if r_bar.len() != 9 {
            return Err(SdpError::DimensionMismatch(format!("center of length {}", r_bar.len())));
        }
        Ok(SdpProblem { objective: border_row(10, 0, r_bar, 0.0), ..self.constraints.clone() })
    }
}

pub fn build_rotball_sdp(r_bar: &[f64], a_r: &DMatrix<f64>, b_r: &DVector<f64>) -> Result<SdpProblem, SdpError> {
    RotballRelaxation::new(a_r, b_r)?.problem(r_bar)
}
