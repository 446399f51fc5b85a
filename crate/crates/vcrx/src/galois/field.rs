use std::ops::RangeInclusive;

use thiserror::Error;

/// Field widths supported by the secure sketch, q = 2^k in 16..=128.
pub const SUPPORTED_K: RangeInclusive<u32> = 4..=7;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum FieldError {
    #[error("unsupported field width k={0}, supported widths are 4..=7")]
    UnsupportedWidth(u32),
    #[error("polynomial {poly:#04x} does not generate GF(2^{k})")]
    NotPrimitive { k: u32, poly: u32 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
}

/// GF(2^k) represented through log/antilog tables over the generator
/// alpha = x. Multiplication and inversion reduce to index arithmetic
/// modulo q-1; addition is XOR.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    k: u32,
    q: usize,
    primitive_poly: u32,
    /// log[a] = e with alpha^e = a, for a in 1..q. Index 0 is unused.
    log: Vec<u8>,
    /// antilog[e] = alpha^e for e in 0..q-1. Period exactly q-1.
    antilog: Vec<u8>,
}

/// Conventional primitive polynomial per width; the reduction polynomial is
/// part of the sketch format and must never change across versions.
fn default_poly(k: u32) -> Option<u32> {
    match k {
        4 => Some(0x13), // x^4 + x + 1
        5 => Some(0x25), // x^5 + x^2 + 1
        6 => Some(0x43), // x^6 + x + 1
        7 => Some(0x89), // x^7 + x^3 + 1
        _ => None,
    }
}

impl Field {
    pub fn new(k: u32) -> Result<Self, FieldError> {
        let poly = default_poly(k).ok_or(FieldError::UnsupportedWidth(k))?;
        Self::with_poly(k, poly)
    }

    /// Builds the tables by repeated multiplication by x with reduction.
    /// Construction fails unless the powers of alpha enumerate every nonzero
    /// element exactly once, i.e. unless `poly` is primitive.
    pub fn with_poly(k: u32, poly: u32) -> Result<Self, FieldError> {
        if !SUPPORTED_K.contains(&k) {
            return Err(FieldError::UnsupportedWidth(k));
        }
        let q = 1usize << k;
        let not_primitive = FieldError::NotPrimitive { k, poly };
        if poly >> k != 1 {
            return Err(not_primitive);
        }
        let mut log = vec![0u8; q];
        let mut antilog = vec![0u8; q - 1];
        let mut seen = vec![false; q];
        let mut v: u32 = 1;
        for e in 0..q - 1 {
            if v == 0 || seen[v as usize] {
                return Err(not_primitive);
            }
            seen[v as usize] = true;
            antilog[e] = v as u8;
            log[v as usize] = e as u8;
            v <<= 1;
            if v >> k == 1 {
                v ^= poly;
            }
        }
        // The orbit of alpha must close after exactly q-1 steps.
        if v != 1 {
            return Err(not_primitive);
        }
        Ok(Field { k, q, primitive_poly: poly, log, antilog })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn primitive_poly(&self) -> u32 {
        self.primitive_poly
    }

    pub fn add(&self, a: u8, b: u8) -> u8 {
        a ^ b
    }

    pub fn mul(&self, a: u8, b: u8) -> u8 {
        if a == 0 || b == 0 {
            return 0;
        }
        let e = (self.log[a as usize] as usize + self.log[b as usize] as usize) % (self.q - 1);
        self.antilog[e]
    }

    pub fn inv(&self, a: u8) -> Result<u8, FieldError> {
        if a == 0 {
            return Err(FieldError::ZeroInverse);
        }
        let e = (self.q - 1 - self.log[a as usize] as usize) % (self.q - 1);
        Ok(self.antilog[e])
    }

    pub fn div(&self, a: u8, b: u8) -> Result<u8, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// alpha^e for any integer exponent, negative exponents included.
    pub fn alpha_pow(&self, e: i64) -> u8 {
        let n = (self.q - 1) as i64;
        self.antilog[(e.rem_euclid(n)) as usize]
    }

    /// Discrete log of a nonzero element.
    pub fn log(&self, a: u8) -> Result<u8, FieldError> {
        if a == 0 {
            return Err(FieldError::ZeroInverse);
        }
        Ok(self.log[a as usize])
    }
}
