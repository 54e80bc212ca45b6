//! Floating-point element types usable in feature and weight tensors.

use std::fmt::{Debug, Display};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

/// Element type of feature and weight tensors.
///
/// Implemented for `f32` and `f64`. Each scalar carries an atomic cell type
/// used for lock-free accumulation into shared outputs.
pub trait Scalar:
    Copy
    + Default
    + Send
    + Sync
    + PartialEq
    + PartialOrd
    + Debug
    + Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    type Atomic: Send + Sync;

    const ZERO: Self;
    const ONE: Self;
    const NAME: &'static str;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn is_finite(self) -> bool;
    /// `self · a + b` with a single rounding.
    fn mul_add(self, a: Self, b: Self) -> Self;
    /// Raw IEEE-754 bits, widened to 64 bits.
    fn to_bits_u64(self) -> u64;

    fn atomic_new(v: Self) -> Self::Atomic;
    /// Compare-and-swap accumulation; relaxed ordering is sufficient because
    /// the result is only read after all workers have joined.
    fn atomic_add(cell: &Self::Atomic, v: Self);
    fn atomic_into_inner(cell: Self::Atomic) -> Self;
}

macro_rules! impl_scalar {
    ($t:ty, $atomic:ty, $name:literal) => {
        impl Scalar for $t {
            type Atomic = $atomic;

            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            const NAME: &'static str = $name;

            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }

            #[inline]
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }

            #[inline(always)]
            fn mul_add(self, a: Self, b: Self) -> Self {
                <$t>::mul_add(self, a, b)
            }

            #[inline]
            fn to_bits_u64(self) -> u64 {
                self.to_bits() as u64
            }

            #[inline]
            fn atomic_new(v: Self) -> Self::Atomic {
                <$atomic>::new(v.to_bits())
            }

            #[inline]
            fn atomic_add(cell: &Self::Atomic, v: Self) {
                let mut cur = cell.load(Ordering::Relaxed);
                loop {
                    let next = (<$t>::from_bits(cur) + v).to_bits();
                    match cell.compare_exchange_weak(cur, next, Ordering::Relaxed, Ordering::Relaxed)
                    {
                        Ok(_) => return,
                        Err(seen) => cur = seen,
                    }
                }
            }

            #[inline]
            fn atomic_into_inner(cell: Self::Atomic) -> Self {
                <$t>::from_bits(cell.into_inner())
            }
        }
    };
}

impl_scalar!(f32, AtomicU32, "f32");
impl_scalar!(f64, AtomicU64, "f64");
