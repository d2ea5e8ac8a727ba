//! Batched sine/cosine. The embedding layers spend most of their time in
//! `sin`; a branch-free polynomial over whole rows vectorizes where the
//! libm call does not.

use std::f64::consts::FRAC_2_PI;

// π/2 split so that k·PIO2_1 is exact for |k| < 2^20.
const PIO2_1: f64 = 1.570_796_326_734_125_614_17;
const PIO2_2: f64 = 6.077_100_506_506_192_249_32e-11;
const PIO2_3: f64 = 2.022_266_248_795_950_631_54e-21;

/// Beyond this the reduction above loses precision; such inputs use libm.
const REDUCTION_LIMIT: f64 = 1e5;

const S: [f64; 6] = [
    1.589_623_015_765_465_680_60e-10,
    -2.505_074_776_285_780_728_66e-8,
    2.755_731_362_138_572_452_13e-6,
    -1.984_126_982_958_953_859_96e-4,
    8.333_333_333_322_118_588_78e-3,
    -1.666_666_666_666_663_072_95e-1,
];
const C: [f64; 6] = [
    -1.135_853_652_138_768_173_00e-11,
    2.087_570_084_197_473_167_78e-9,
    -2.755_731_417_929_673_881_12e-7,
    2.480_158_728_885_170_453_48e-5,
    -1.388_888_888_887_305_641_16e-3,
    4.166_666_666_666_659_292_18e-2,
];

#[inline(always)]
fn poly(z: f64, c: &[f64; 6]) -> f64 {
    ((((c[0] * z + c[1]) * z + c[2]) * z + c[3]) * z + c[4]) * z + c[5]
}

/// `(sin a, cos a)` for `|a| ≤ REDUCTION_LIMIT`.
#[inline(always)]
fn kernel(a: f64) -> (f64, f64) {
    let k = (a * FRAC_2_PI).round();
    let r = ((a - k * PIO2_1) - k * PIO2_2) - k * PIO2_3;
    let z = r * r;
    let s = r + r * z * poly(z, &S);
    let c = 1.0 - 0.5 * z + z * z * poly(z, &C);
    let q = (k as i64) & 3;
    let swap = q & 1 == 1;
    let (s, c) = if swap { (c, s) } else { (s, c) };
    let sin_sign = if q >= 2 { -1.0 } else { 1.0 };
    let cos_sign = if q == 1 || q == 2 { -1.0 } else { 1.0 };
    (sin_sign * s, cos_sign * c)
}

/// Replaces every angle in `values` by its sine, writing cosines to `cos`
/// when given.
pub(crate) fn sin_cos_in_place(values: &mut [f64], cos: Option<&mut [f64]>) {
    let safe = values.iter().all(|a| a.abs() <= REDUCTION_LIMIT);
    match (cos, safe) {
        (Some(c), true) => {
            for (v, c) in values.iter_mut().zip(c.iter_mut()) {
                let (s, co) = kernel(*v);
                *v = s;
                *c = co;
            }
        }
        (None, true) => {
            for v in values.iter_mut() {
                *v = kernel(*v).0;
            }
        }
        (Some(c), false) => {
            for (v, c) in values.iter_mut().zip(c.iter_mut()) {
                let (s, co) = v.sin_cos();
                *v = s;
                *c = co;
            }
        }
        (None, false) => {
            for v in values.iter_mut() {
                *v = v.sin();
            }
        }
    }
}
