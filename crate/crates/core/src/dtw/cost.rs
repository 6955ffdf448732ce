//! Cosine-distance cost matrices.

use crate::error::{KwsError, Result};
use crate::matrix::{dot, normalize_rows, Matrix};
use crate::par;

/// `cost(i, j) = 1 - cos(template_i, query_j)`, clamped to `[0, 2]`.
pub fn cost_matrix(template: &Matrix, query: &Matrix) -> Result<Matrix> {
    let t = normalize_rows(template, "template")?;
    let q = normalize_rows(query, "query")?;
    cost_matrix_normalized(&t, &q)
}

/// Same as [`cost_matrix`] for inputs whose rows already have unit norm.
pub fn cost_matrix_normalized(template: &Matrix, query: &Matrix) -> Result<Matrix> {
    if template.cols() != query.cols() {
        return Err(KwsError::param(format!(
            "template has {} dims, query has {}",
            template.cols(),
            query.cols()
        )));
    }
    let rows = par::map_range(template.rows(), |i| {
        let a = template.row(i);
        query
            .iter_rows()
            .map(|b| (1.0 - dot(a, b)).clamp(0.0, 2.0))
            .collect::<Vec<f64>>()
    });
    Ok(Matrix::from_vec(template.rows(), query.rows(), rows.concat())
        .expect("row lengths agree"))
}
