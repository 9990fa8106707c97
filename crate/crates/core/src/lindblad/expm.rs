//! Scaling-and-squaring matrix exponential with a degree-13 Padé approximant
//! (Higham 2005), for dense complex matrices.

use ndarray::{Array2, Axis};
use ndarray_linalg::{Factorize, Solve};
use num_complex::Complex64 as C64;

use super::LindbladError;
use crate::model::CMatrix;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which the unscaled degree-13 approximant is accurate to
// double precision.
const THETA13: f64 = 5.371920351148152;

pub(crate) fn one_norm(m: &CMatrix) -> f64 {
    m.axis_iter(Axis(1))
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn identity(n: usize) -> CMatrix {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

fn scale(m: &CMatrix, s: f64) -> CMatrix {
    m.mapv(|z| z * s)
}

/// e^M by scaling and squaring.
pub fn expm(m: &CMatrix) -> Result<CMatrix, LindbladError> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(LindbladError::DimensionMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    if n == 0 {
        return Ok(CMatrix::zeros((0, 0)));
    }
    let norm = one_norm(m);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = scale(m, 0.5f64.powi(squarings));
    let b = &PADE13;
    let id = identity(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);

    let inner_u = scale(&a6, b[13]) + scale(&a4, b[11]) + scale(&a2, b[9]);
    let u = a.dot(
        &(a6.dot(&inner_u) + scale(&a6, b[7]) + scale(&a4, b[5]) + scale(&a2, b[3]) + scale(&id, b[1])),
    );
    let inner_v = scale(&a6, b[12]) + scale(&a4, b[10]) + scale(&a2, b[8]);
    let v = a6.dot(&inner_v) + scale(&a6, b[6]) + scale(&a4, b[4]) + scale(&a2, b[2]) + scale(&id, b[0]);

    let numerator = &v + &u;
    let denominator = &v - &u;
    let lu = denominator
        .factorize()
        .map_err(|e| LindbladError::Linalg(e.to_string()))?;
    let mut result = CMatrix::zeros((n, n));
    for (j, col) in numerator.axis_iter(Axis(1)).enumerate() {
        let x = lu
            .solve(&col.to_owned())
            .map_err(|e| LindbladError::Linalg(e.to_string()))?;
        result.column_mut(j).assign(&x);
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    Ok(result)
}
