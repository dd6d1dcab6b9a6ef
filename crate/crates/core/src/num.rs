//! Scalar abstraction and unit helpers.
//!
//! All of the physics is written against [`Real`], which is implemented for
//! `f32` and `f64`. Random draws go through the trait so generic code never
//! has to name a distribution bound.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating point scalar usable throughout the simulator.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// One draw from N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from U[0, 1).
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Converts an `f64` constant. Every constant used in this crate is
    /// representable (possibly rounded) in both `f32` and `f64`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random::<$t>()
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Circularly symmetric complex Gaussian with the given total variance.
#[inline]
pub fn complex_normal<F: Real, R: Rng + ?Sized>(rng: &mut R, variance: F) -> Complex<F> {
    let scale = (variance * F::of(0.5)).sqrt();
    let re = F::standard_normal(rng);
    let im = F::standard_normal(rng);
    Complex::new(re * scale, im * scale)
}

/// `10^(db/10)`.
#[inline]
pub fn db_to_linear<F: Real>(db: F) -> F {
    F::of(10.0).powf(db / F::of(10.0))
}

/// `10 log10(x)`.
#[inline]
pub fn linear_to_db<F: Real>(x: F) -> F {
    F::of(10.0) * x.log10()
}

/// dBm to watts: `10^((dbm - 30)/10)`.
#[inline]
pub fn dbm_to_watts<F: Real>(dbm: F) -> F {
    db_to_linear(dbm - F::of(30.0))
}

#[inline]
pub fn watts_to_dbm<F: Real>(watts: F) -> F {
    linear_to_db(watts) + F::of(30.0)
}

/// Neumaier-compensated sum. Summation order is the iteration order, so the
/// result is reproducible as long as the input order is.
pub fn compensated_sum<F: Real, I: IntoIterator<Item = F>>(values: I) -> F {
    let mut sum = F::zero();
    let mut carry = F::zero();
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

/// `log(sum(exp(x_i)))` without overflow.
pub fn log_sum_exp<F: Real>(values: &[F]) -> F {
    let max = values
        .iter()
        .copied()
        .fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
    if max == F::neg_infinity() {
        return max;
    }
    let s: F = values.iter().map(|&v| (v - max).exp()).sum();
    max + s.ln()
}
