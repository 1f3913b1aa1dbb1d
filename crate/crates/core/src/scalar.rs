//! Scalar abstraction.
//!
//! Every numerical routine in the crate is generic over a real floating-point
//! type `T: Real`; state and operator entries are `Complex<T>`. `f64` is the
//! working precision for all physics results, `f32` is supported for cheap
//! exploratory runs (tolerances in the tests are only met in `f64`).

use nalgebra::{DMatrix, RealField};
use num_complex::Complex;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};

/// Dense complex matrix over the scalar `T`.
pub type CMatrix<T> = DMatrix<Complex<T>>;

/// Real floating-point scalar usable throughout the crate.
pub trait Real:
    RealField + Copy + FloatConst + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Complex matrix product `a * b`.
    ///
    /// The default goes through nalgebra's generic kernel; `f32` and `f64`
    /// dispatch to the blocked complex GEMM of `matrixmultiply`.
    fn matmul(a: &CMatrix<Self>, b: &CMatrix<Self>) -> CMatrix<Self> {
        a * b
    }

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Lossy conversion to `f64`, used for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Lossy conversion from a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

macro_rules! gemm_real {
    ($t:ty, $kernel:path) => {
        impl Real for $t {
            fn matmul(a: &CMatrix<Self>, b: &CMatrix<Self>) -> CMatrix<Self> {
                let (m, k) = a.shape();
                let (k2, n) = b.shape();
                assert_eq!(k, k2, "matmul: inner dimensions differ ({k} vs {k2})");
                let mut c = CMatrix::<Self>::zeros(m, n);
                if m == 0 || n == 0 || k == 0 {
                    return c;
                }
                // nalgebra storage is column-major and Complex<T> is
                // #[repr(C)] { re, im }, which is the [T; 2] layout the
                // kernel expects.
                unsafe {
                    $kernel(
                        matrixmultiply::CGemmOption::Standard,
                        matrixmultiply::CGemmOption::Standard,
                        m,
                        k,
                        n,
                        [1.0, 0.0],
                        a.as_ptr() as *const [$t; 2],
                        1,
                        m as isize,
                        b.as_ptr() as *const [$t; 2],
                        1,
                        k as isize,
                        [0.0, 0.0],
                        c.as_mut_ptr() as *mut [$t; 2],
                        1,
                        m as isize,
                    );
                }
                c
            }
        }
    };
}

gemm_real!(f64, matrixmultiply::zgemm);
gemm_real!(f32, matrixmultiply::cgemm);

/// Shorthand for building a complex scalar.
#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

/// Real number embedded as a complex scalar.
#[inline]
pub fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// `r e^{iφ}`.
#[inline]
pub fn polar<T: Real>(r: T, phi: T) -> Complex<T> {
    let (s, c) = phi.sin_cos();
    Complex::new(r * c, r * s)
}

/// Modulus `|z|`.
#[inline]
pub fn modulus<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// Argument of `z` in `(−π, π]`.
#[inline]
pub fn arg<T: Real>(z: Complex<T>) -> T {
    z.im.atan2(z.re)
}
