use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Designs with a column-equilibrated condition number above this are
/// treated as rank deficient.
pub const MAX_CONDITION: f64 = 1e10;

/// Least-squares solution of `x b = y` with the unscaled `(XᵀX)⁻¹`.
#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    pub coef: DVector<f64>,
    pub xtx_inv: DMatrix<f64>,
    pub condition: f64,
}

/// Solves least squares through an SVD of the column-equilibrated design.
///
/// `names` labels the design columns for the rank-deficiency diagnostic.
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<LeastSquares> {
    let p = x.ncols();
    debug_assert_eq!(names.len(), p);
    let scale: Vec<f64> = (0..p).map(|j| x.column(j).norm()).collect();
    if let Some(j) = scale.iter().position(|&s| s == 0.0 || !s.is_finite()) {
        return Err(Error::RankDeficient {
            condition: f64::INFINITY,
            columns: vec![names[j].clone()],
        });
    }
    let mut xs = x.clone();
    for (j, s) in scale.iter().enumerate() {
        xs.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = xs.svd(true, true);
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::Numeric("SVD failed to produce U".into()))?;
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Numeric("SVD failed to produce V".into()))?;
    let sv = &svd.singular_values;
    let s_max = sv.max();
    let s_min = sv.min();
    let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if condition.is_nan() || condition > MAX_CONDITION {
        let mut columns = Vec::new();
        for (k, &s) in sv.iter().enumerate() {
            if s * MAX_CONDITION < s_max || s == 0.0 {
                for j in 0..p {
                    if v_t[(k, j)].abs() > 0.1 && !columns.contains(&names[j]) {
                        columns.push(names[j].clone());
                    }
                }
            }
        }
        return Err(Error::RankDeficient { condition, columns });
    }

    // b_s = V Σ⁻¹ Uᵀ y, then undo the column scaling
    let uty = u.transpose() * y;
    let mut tmp = DVector::zeros(p);
    for k in 0..p {
        tmp[k] = uty[k] / sv[k];
    }
    let mut coef = v_t.transpose() * tmp;
    let mut vs = v_t.transpose();
    for k in 0..p {
        vs.column_mut(k).scale_mut(1.0 / sv[k]);
    }
    let mut xtx_inv = &vs * vs.transpose();
    for j in 0..p {
        coef[j] /= scale[j];
        for i in 0..p {
            xtx_inv[(i, j)] /= scale[i] * scale[j];
        }
    }
    Ok(LeastSquares {
        coef,
        xtx_inv,
        condition,
    })
}

/// Inverse and log-determinant of a symmetric positive-definite matrix.
pub(crate) fn spd_inverse(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("matrix is not positive definite".into()))?;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok((chol.inverse(), log_det))
}
