//! Matrix exponential by scaling and squaring with a degree-13 Padé approximant.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

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

/// Largest 1-norm for which the unscaled [13/13] approximant is accurate to
/// double precision.
const THETA13: f64 = 5.371920351148152;

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn matrix_exp(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix_exp input"));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }

    let norm = one_norm(m);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = if s > 0 { m * 2f64.powi(-s) } else { m.clone() };

    let b = &PADE13;
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &ident * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];

    let p = &v + &u;
    let q = v - u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::Numerical("singular Padé denominator".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("matrix exponential overflowed".into()));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Truncated Taylor series with scaling and squaring in a form that shares
    /// nothing with the Padé path: terms are summed until they vanish.
    fn series_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        let norm = one_norm(m);
        let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
        let a = m * 2f64.powi(-s);
        let mut sum = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for k in 1..60 {
            term = &term * &a / k as f64;
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn zero_gives_identity() {
        let e = matrix_exp(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(e, DMatrix::identity(3, 3));
    }

    #[test]
    fn symmetric_two_by_two() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = matrix_exp(&m).unwrap();
        let (c, s) = (1f64.cosh(), 1f64.sinh());
        let want = DMatrix::from_row_slice(2, 2, &[c, s, s, c]);
        assert!(rel_err(&e, &want) < 1e-14);
    }

    #[test]
    fn nilpotent_series_truncates() {
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, 0.0, 0.0, //
                1.5, 0.0, 0.0, 0.0, //
                -2.0, 0.5, 0.0, 0.0, //
                0.25, 1.0, -1.0, 0.0,
            ],
        );
        let m2 = &m * &m;
        let m3 = &m2 * &m;
        let want = DMatrix::identity(4, 4) + &m + &m2 / 2.0 + &m3 / 6.0;
        let e = matrix_exp(&m).unwrap();
        assert!((e - want).abs().max() < 1e-14);
    }

    #[test]
    fn agrees_with_series_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for trial in 0..40 {
            let n = 1 + trial % 6;
            let scale = [0.1, 1.0, 4.0, 12.0][trial % 4];
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0) * scale / n as f64);
            let e = matrix_exp(&m).unwrap();
            let want = series_exp(&m);
            assert!(rel_err(&e, &want) < 1e-10, "n={n} scale={scale}: {}", rel_err(&e, &want));
        }
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = f64::INFINITY;
        assert!(matrix_exp(&m).is_err());
    }
}
