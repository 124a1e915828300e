use num_complex::Complex64;
use rug::{Assign, Float};

use super::LogReal;

/// Multiprecision complex number as a pair of MPFR floats.
#[derive(Clone, Debug, PartialEq)]
pub struct MpComplex {
    pub re: Float,
    pub im: Float,
}

impl MpComplex {
    pub fn zero(prec: u32) -> Self {
        MpComplex {
            re: Float::new(prec),
            im: Float::new(prec),
        }
    }

    pub fn one(prec: u32) -> Self {
        MpComplex {
            re: Float::with_val(prec, 1),
            im: Float::new(prec),
        }
    }

    pub fn new(re: Float, im: Float) -> Self {
        MpComplex { re, im }
    }

    pub fn from_f64(prec: u32, re: f64, im: f64) -> Self {
        MpComplex {
            re: Float::with_val(prec, re),
            im: Float::with_val(prec, im),
        }
    }

    pub fn from_c64(prec: u32, z: Complex64) -> Self {
        MpComplex::from_f64(prec, z.re, z.im)
    }

    pub fn from_real(x: Float) -> Self {
        let prec = x.prec();
        MpComplex {
            re: x,
            im: Float::new(prec),
        }
    }

    /// `r · e^{iθ}`.
    pub fn from_polar(r: &Float, theta: &Float) -> Self {
        let prec = r.prec().max(theta.prec());
        let (s, c) = Float::with_val(prec, theta).sin_cos(Float::new(prec));
        MpComplex {
            re: Float::with_val(prec, r * &c),
            im: Float::with_val(prec, r * &s),
        }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().max(self.im.prec())
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn with_prec(&self, prec: u32) -> Self {
        MpComplex {
            re: Float::with_val(prec, &self.re),
            im: Float::with_val(prec, &self.im),
        }
    }

    pub fn add(&self, o: &MpComplex) -> MpComplex {
        let p = self.prec().max(o.prec());
        MpComplex {
            re: Float::with_val(p, &self.re + &o.re),
            im: Float::with_val(p, &self.im + &o.im),
        }
    }

    pub fn sub(&self, o: &MpComplex) -> MpComplex {
        let p = self.prec().max(o.prec());
        MpComplex {
            re: Float::with_val(p, &self.re - &o.re),
            im: Float::with_val(p, &self.im - &o.im),
        }
    }

    pub fn add_assign(&mut self, o: &MpComplex) {
        self.re += &o.re;
        self.im += &o.im;
    }

    pub fn mul(&self, o: &MpComplex) -> MpComplex {
        let p = self.prec().max(o.prec());
        let ac = Float::with_val(p, &self.re * &o.re);
        let bd = Float::with_val(p, &self.im * &o.im);
        let ad = Float::with_val(p, &self.re * &o.im);
        let bc = Float::with_val(p, &self.im * &o.re);
        MpComplex {
            re: ac - bd,
            im: ad + bc,
        }
    }

    /// `self += a · b`.
    pub fn fma_assign(&mut self, a: &MpComplex, b: &MpComplex) {
        let p = self.prec();
        let mut t = Float::with_val(p, &a.re * &b.re);
        t -= Float::with_val(p, &a.im * &b.im);
        self.re += &t;
        t.assign(&a.re * &b.im);
        t += Float::with_val(p, &a.im * &b.re);
        self.im += &t;
    }

    pub fn scale(&self, s: &Float) -> MpComplex {
        let p = self.prec().max(s.prec());
        MpComplex {
            re: Float::with_val(p, &self.re * s),
            im: Float::with_val(p, &self.im * s),
        }
    }

    pub fn conj(&self) -> MpComplex {
        MpComplex {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    pub fn norm_sqr(&self) -> Float {
        let p = self.prec();
        Float::with_val(p, self.re.square_ref()) + Float::with_val(p, self.im.square_ref())
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    /// Principal argument in (-π, π].
    pub fn arg(&self) -> Float {
        Float::with_val(self.prec(), self.im.atan2_ref(&self.re))
    }

    pub fn exp(&self) -> MpComplex {
        let r = Float::with_val(self.prec(), self.re.exp_ref());
        MpComplex::from_polar(&r, &self.im)
    }

    /// Principal logarithm; `None` at zero.
    pub fn ln(&self) -> Option<MpComplex> {
        if self.re.is_zero() && self.im.is_zero() {
            return None;
        }
        let p = self.prec();
        let half_log = Float::with_val(p, self.norm_sqr().ln()) / 2u32;
        Some(MpComplex {
            re: half_log,
            im: self.arg(),
        })
    }

    pub fn powu(&self, mut k: u32) -> MpComplex {
        let mut base = self.clone();
        let mut acc = MpComplex::one(self.prec());
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Magnitude as a LogReal.
    pub fn abs_log(&self) -> LogReal {
        LogReal::from_float(&self.abs())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_ln_inverse() {
        let z = MpComplex::from_f64(200, 0.3, -2.1);
        let back = z.exp().ln().unwrap();
        assert!((back.re.to_f64() - 0.3).abs() < 1e-15);
        assert!((back.im.to_f64() + 2.1).abs() < 1e-15);
    }

    #[test]
    fn principal_log_of_one_plus_i() {
        let l = MpComplex::from_f64(128, 1.0, 1.0).ln().unwrap();
        assert!((l.re.to_f64() - 0.5 * 2f64.ln()).abs() < 1e-16);
        assert!((l.im.to_f64() - std::f64::consts::FRAC_PI_4).abs() < 1e-16);
    }

    #[test]
    fn powers_and_fma() {
        let z = MpComplex::from_f64(128, 0.5, 0.5);
        let z4 = z.powu(4);
        // (0.5+0.5i)^4 = -0.25
        assert!((z4.re.to_f64() + 0.25).abs() < 1e-30);
        assert!(z4.im.to_f64().abs() < 1e-30);
        let mut acc = MpComplex::one(128);
        acc.fma_assign(&z, &z.conj());
        assert!((acc.re.to_f64() - 1.5).abs() < 1e-30);
        assert!(MpComplex::zero(64).ln().is_none());
    }
}
