use std::cmp::Ordering;
use std::fmt;

use rug::float::Special;
use rug::Float;
use serde::{Serialize, Serializer};

/// Signed real number stored as `sign · exp(log_abs)`.
///
/// Exponentially small errors (`e^{-cN}` with `cN` in the hundreds) are
/// carried in this form end to end; `log_abs` is a multiprecision value so
/// the conversion back to an ordinary real is exact to working precision.
#[derive(Clone, Debug)]
pub struct LogReal {
    sign: i8,
    log_abs: Float,
}

/// Bits added to the logarithm so that `exp(log_abs)` keeps full relative
/// precision even when `|log_abs|` is large.
const LOG_GUARD_BITS: u32 = 32;

impl LogReal {
    pub fn zero(prec: u32) -> Self {
        LogReal {
            sign: 0,
            log_abs: Float::with_val(prec, Special::NegInfinity),
        }
    }

    pub fn one(prec: u32) -> Self {
        LogReal {
            sign: 1,
            log_abs: Float::new(prec),
        }
    }

    /// Build from sign and natural log of the magnitude.
    pub fn from_parts(sign: i8, log_abs: Float) -> Self {
        if sign == 0 || log_abs.is_infinite() && log_abs < 0 {
            return LogReal::zero(log_abs.prec());
        }
        LogReal {
            sign: sign.signum(),
            log_abs,
        }
    }

    /// Positive value `exp(log_abs)`.
    pub fn from_log(log_abs: Float) -> Self {
        LogReal::from_parts(1, log_abs)
    }

    pub fn from_float(x: &Float) -> Self {
        let prec = x.prec();
        if x.is_zero() {
            return LogReal::zero(prec);
        }
        let sign = if x.is_sign_negative() { -1 } else { 1 };
        let abs = Float::with_val(prec + LOG_GUARD_BITS, x.abs_ref());
        LogReal {
            sign,
            log_abs: abs.ln(),
        }
    }

    pub fn from_f64(x: f64, prec: u32) -> Self {
        LogReal::from_float(&Float::with_val(prec.max(53), x))
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn log_abs(&self) -> &Float {
        &self.log_abs
    }

    /// Natural log of the magnitude as f64 (`-inf` for zero).
    pub fn ln_abs_f64(&self) -> f64 {
        if self.sign == 0 {
            f64::NEG_INFINITY
        } else {
            self.log_abs.to_f64()
        }
    }

    pub fn prec(&self) -> u32 {
        self.log_abs.prec()
    }

    /// Same value with the logarithm held at `prec` bits.
    pub fn with_prec(&self, prec: u32) -> LogReal {
        LogReal::from_parts(self.sign, Float::with_val(prec, &self.log_abs))
    }

    pub fn to_float(&self, prec: u32) -> Float {
        if self.sign == 0 {
            return Float::new(prec);
        }
        let e = Float::with_val(prec, self.log_abs.exp_ref());
        if self.sign < 0 {
            -e
        } else {
            e
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.sign == 0 {
            return 0.0;
        }
        let l = self.log_abs.to_f64();
        if l > 710.0 {
            return f64::INFINITY * self.sign as f64;
        }
        if l < -746.0 {
            return 0.0 * self.sign as f64;
        }
        self.to_float(64.max(self.prec().min(128))).to_f64()
    }

    pub fn abs(&self) -> LogReal {
        LogReal {
            sign: self.sign.abs(),
            log_abs: self.log_abs.clone(),
        }
    }

    pub fn neg(&self) -> LogReal {
        LogReal {
            sign: -self.sign,
            log_abs: self.log_abs.clone(),
        }
    }

    pub fn mul(&self, other: &LogReal) -> LogReal {
        if self.sign == 0 || other.sign == 0 {
            return LogReal::zero(self.prec().max(other.prec()));
        }
        let prec = self.prec().max(other.prec());
        LogReal {
            sign: self.sign * other.sign,
            log_abs: Float::with_val(prec, &self.log_abs + &other.log_abs),
        }
    }

    pub fn div(&self, other: &LogReal) -> LogReal {
        self.mul(&other.recip())
    }

    /// Multiplicative inverse; the inverse of zero is `+inf`.
    pub fn recip(&self) -> LogReal {
        if self.sign == 0 {
            return LogReal {
                sign: 1,
                log_abs: Float::with_val(self.prec(), Special::Infinity),
            };
        }
        LogReal {
            sign: self.sign,
            log_abs: -self.log_abs.clone(),
        }
    }

    pub fn powf(&self, exponent: f64) -> LogReal {
        assert!(self.sign >= 0, "powf of a negative LogReal");
        if self.sign == 0 {
            return self.clone();
        }
        LogReal {
            sign: 1,
            log_abs: Float::with_val(self.prec(), &self.log_abs * exponent),
        }
    }

    /// Scale by `exp(delta)`.
    pub fn scale_exp(&self, delta: &Float) -> LogReal {
        if self.sign == 0 {
            return self.clone();
        }
        LogReal {
            sign: self.sign,
            log_abs: Float::with_val(self.prec().max(delta.prec()), &self.log_abs + delta),
        }
    }

    /// Sum via the stable log-sum-exp form.
    pub fn add(&self, other: &LogReal) -> LogReal {
        let prec = self.prec().max(other.prec());
        if self.sign == 0 {
            return other.clone();
        }
        if other.sign == 0 {
            return self.clone();
        }
        let (big, small) = if self.log_abs >= other.log_abs {
            (self, other)
        } else {
            (other, self)
        };
        // log(|big| ± |small|) = big.log + log1p(±exp(small.log - big.log))
        let diff = Float::with_val(prec, &small.log_abs - &big.log_abs);
        let ratio = diff.exp();
        if big.sign == small.sign {
            LogReal {
                sign: big.sign,
                log_abs: Float::with_val(prec, &big.log_abs + ratio.ln_1p()),
            }
        } else {
            if ratio == 1 {
                return LogReal::zero(prec);
            }
            let neg = -ratio;
            LogReal {
                sign: big.sign,
                log_abs: Float::with_val(prec, &big.log_abs + neg.ln_1p()),
            }
        }
    }

    pub fn sub(&self, other: &LogReal) -> LogReal {
        self.add(&other.neg())
    }

    /// Sum of many terms with a single max-shift.
    pub fn sum<'a, I: IntoIterator<Item = &'a LogReal>>(items: I, prec: u32) -> LogReal {
        let items: Vec<&LogReal> = items.into_iter().filter(|x| x.sign != 0).collect();
        if items.is_empty() {
            return LogReal::zero(prec);
        }
        let max = items
            .iter()
            .map(|x| &x.log_abs)
            .max_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal))
            .unwrap()
            .clone();
        let work = prec + LOG_GUARD_BITS;
        let mut acc = Float::new(work);
        for x in &items {
            let shifted = Float::with_val(work, &x.log_abs - &max).exp();
            if x.sign > 0 {
                acc += shifted;
            } else {
                acc -= shifted;
            }
        }
        LogReal::from_float(&acc).scale_exp(&max)
    }

    /// Relative discrepancy `|a - b| / max(|a|, |b|)` as a LogReal.
    pub fn relative_difference(a: &LogReal, b: &LogReal) -> LogReal {
        let diff = a.sub(b).abs();
        if diff.is_zero() {
            return diff;
        }
        let scale = if a.abs().cmp_abs(&b.abs()) == Ordering::Less {
            b.abs()
        } else {
            a.abs()
        };
        diff.div(&scale)
    }

    /// Compare magnitudes.
    pub fn cmp_abs(&self, other: &LogReal) -> Ordering {
        match (self.sign == 0, other.sign == 0) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => self
                .log_abs
                .partial_cmp(&other.log_abs)
                .unwrap_or(Ordering::Equal),
        }
    }
}

impl PartialEq for LogReal {
    fn eq(&self, other: &Self) -> bool {
        self.sign == other.sign && (self.sign == 0 || self.log_abs == other.log_abs)
    }
}

impl PartialOrd for LogReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.sign != other.sign {
            return self.sign.partial_cmp(&other.sign);
        }
        match self.sign {
            0 => Some(Ordering::Equal),
            1 => self.log_abs.partial_cmp(&other.log_abs),
            _ => other.log_abs.partial_cmp(&self.log_abs),
        }
    }
}

impl fmt::Display for LogReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "0"),
            s => write!(
                f,
                "{}exp({:.6})",
                if s < 0 { "-" } else { "" },
                self.log_abs.to_f64()
            ),
        }
    }
}

impl Serialize for LogReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("LogReal", 2)?;
        st.serialize_field("sign", &self.sign)?;
        st.serialize_field(
            "log_abs",
            &if self.sign == 0 {
                None
            } else {
                Some(self.log_abs.to_f64())
            },
        )?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ulps(a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let scale = a.abs().max(b.abs());
        (a - b).abs() / (scale * f64::EPSILON)
    }

    #[test]
    fn zero_behaves() {
        let z = LogReal::zero(64);
        let one = LogReal::one(64);
        assert!(z.is_zero());
        assert_eq!(z.add(&one), one);
        assert!(z.mul(&one).is_zero());
        assert_eq!(z.to_f64(), 0.0);
        assert!(one.sub(&one).is_zero());
    }

    #[test]
    fn round_trip_exact() {
        for &x in &[1.0, -3.5, 1e-300, 7.25e300, -2.2250738585072014e-308, 0.1] {
            let l = LogReal::from_f64(x, 64);
            assert!(ulps(l.to_f64(), x) <= 1.0, "{x}: {}", l.to_f64());
        }
    }

    #[test]
    fn tiny_values_survive() {
        let a = LogReal::from_log(Float::with_val(128, -5000));
        let b = LogReal::from_log(Float::with_val(128, -5001));
        let s = a.add(&b);
        let expect = -5000.0 + (-1f64).exp().ln_1p();
        assert!((s.ln_abs_f64() - expect).abs() < 1e-12);
        assert_eq!(s.to_f64(), 0.0);
    }

    #[test]
    fn sum_matches_pairwise() {
        let xs: Vec<LogReal> = [3.0, -1.5, 2.25, -0.125]
            .iter()
            .map(|&v| LogReal::from_f64(v, 80))
            .collect();
        let s = LogReal::sum(xs.iter(), 80);
        assert!((s.to_f64() - 3.625).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn arithmetic_matches_f64(
            a in -1e150f64..1e150, b in -1e150f64..1e150,
            ea in -100i32..100, eb in -100i32..100,
        ) {
            let a = a * 2f64.powi(ea);
            let b = b * 2f64.powi(eb);
            let la = LogReal::from_f64(a, 64);
            let lb = LogReal::from_f64(b, 64);
            let prod = la.mul(&lb).to_f64();
            prop_assert!(ulps(prod, a * b) <= 4.0, "product {} vs {}", prod, a * b);
            // Exact sum is representable in 256 bits; compare with it rather
            // than with the rounded f64 sum.
            let exact = Float::with_val(4096, a) + Float::with_val(4096, b);
            let sum = la.add(&lb).to_f64();
            prop_assert!(ulps(sum, exact.to_f64()) <= 4.0 || (sum - exact.to_f64()).abs() < 1e-300,
                "sum {} vs {}", sum, exact.to_f64());
        }
    }
}
