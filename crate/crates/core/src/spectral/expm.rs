//! Dense matrix exponential by scaling and squaring with a degree-13 Padé
//! kernel. Used as an eigendecomposition-free reference propagator.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::matrix_norm_one;

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Number of squarings: ceil(log2 ‖A‖₁), never negative.
pub fn scaling_exponent(norm_one: f64) -> u32 {
    if norm_one <= 1.0 {
        0
    } else {
        norm_one.log2().ceil() as u32
    }
}

/// exp(A) for a square complex matrix.
pub fn expm(a: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm = matrix_norm_one(a);
    if !norm.is_finite() {
        return Err(Error::Domain("matrix exponential of a non-finite matrix".into()));
    }
    let s = scaling_exponent(norm);
    let scaled = a * Complex64::new(0.5f64.powi(s as i32), 0.0);

    let b = |k: usize| Complex64::new(PADE13[k], 0.0);
    let ident = DMatrix::<Complex64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9)) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &ident * b(1);
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8)) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &ident * b(0);

    let numer = &v + &u;
    let denom = &v - &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::Contract("singular Padé denominator".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}
