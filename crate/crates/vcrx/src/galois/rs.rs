use rand::Rng;
use thiserror::Error;

use super::field::Field;

/// Length-L sequence over the alphabet {0..q-1}; carries quantized symbol
/// strings, codewords, and sketches.
pub type SymbolSequence = Vec<u8>;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RsError {
    #[error("message length must be in 1..={max}, got {got}")]
    BadMessageSize { got: usize, max: usize },
    #[error("expected sequence of length {want}, got {got}")]
    BadLength { want: usize, got: usize },
    #[error("symbol {sym:#04x} out of range for GF({q})")]
    SymbolOutOfRange { sym: u8, q: usize },
}

/// Bounded-distance decoding gave up: the received word is not within t
/// symbol errors of any codeword it can see. A value, not a fault; callers
/// count it as a key mismatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeFailure;

impl std::fmt::Display for DecodeFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "decode failure: more than t symbol errors")
    }
}

impl std::error::Error for DecodeFailure {}

/// Systematic narrow-sense RS(n, m) over GF(q) with n = q-1 and generator
/// roots alpha^1..alpha^(n-m); corrects up to t = floor((n-m)/2) errors.
#[derive(Debug, Clone)]
pub struct RsParams {
    field: Field,
    n: usize,
    m: usize,
    t: usize,
    /// Monic generator, coefficients by ascending power, degree n-m.
    generator: Vec<u8>,
}

impl RsParams {
    pub fn new(field: Field, m: usize) -> Result<Self, RsError> {
        let n = field.q() - 1;
        if m < 1 || m > n {
            return Err(RsError::BadMessageSize { got: m, max: n });
        }
        let p = n - m;
        let mut generator = vec![0u8; p + 1];
        generator[0] = 1;
        for i in 1..=p {
            // generator *= (x + alpha^i)
            let root = field.alpha_pow(i as i64);
            let mut next = vec![0u8; p + 1];
            for (deg, &g) in generator.iter().enumerate().take(i) {
                next[deg + 1] ^= g;
                next[deg] ^= field.mul(g, root);
            }
            generator = next;
        }
        Ok(RsParams { field, n, m, t: p / 2, generator })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn t(&self) -> usize {
        self.t
    }

    fn check_symbols(&self, seq: &[u8], want_len: usize) -> Result<(), RsError> {
        if seq.len() != want_len {
            return Err(RsError::BadLength { want: want_len, got: seq.len() });
        }
        let q = self.field.q();
        for &sym in seq {
            if sym as usize >= q {
                return Err(RsError::SymbolOutOfRange { sym, q });
            }
        }
        Ok(())
    }

    /// Systematic encoding: the first m symbols are the message, the last
    /// n-m the remainder of msg(x)*x^(n-m) modulo the generator. Symbol j
    /// is the coefficient of x^(n-1-j).
    pub fn encode(&self, msg: &[u8]) -> Result<SymbolSequence, RsError> {
        self.check_symbols(msg, self.m)?;
        let p = self.n - self.m;
        let mut parity = vec![0u8; p];
        for &s in msg {
            let fb = s ^ parity.first().copied().unwrap_or(s ^ s);
            for j in 0..p {
                let g = self.generator[p - 1 - j]; // coefficient of x^(p-1-j)
                let shifted = parity.get(j + 1).copied().unwrap_or(0);
                parity[j] = shifted ^ self.field.mul(fb, g);
            }
        }
        let mut cw = msg.to_vec();
        cw.extend_from_slice(&parity);
        Ok(cw)
    }

    /// Evaluates the received word as a polynomial at alpha^i for i=1..n-m.
    fn syndromes(&self, word: &[u8]) -> Vec<u8> {
        let p = self.n - self.m;
        (1..=p)
            .map(|i| {
                let x = self.field.alpha_pow(i as i64);
                word.iter().fold(0u8, |acc, &c| self.field.mul(acc, x) ^ c)
            })
            .collect()
    }

    pub fn is_codeword(&self, word: &[u8]) -> Result<bool, RsError> {
        self.check_symbols(word, self.n)?;
        Ok(self.syndromes(word).iter().all(|&s| s == 0))
    }

    /// Bounded-distance decoding via Berlekamp-Massey, Chien search, and
    /// Forney's formula. Returns the message whenever the received word is
    /// within t errors of a codeword; beyond t it returns `DecodeFailure`
    /// or, occasionally, a wrong message (miscorrection).
    pub fn decode(&self, received: &[u8]) -> Result<Result<SymbolSequence, DecodeFailure>, RsError> {
        self.check_symbols(received, self.n)?;
        let f = &self.field;
        let p = self.n - self.m;
        if p == 0 {
            return Ok(Ok(received[..self.m].to_vec()));
        }
        let synd = self.syndromes(received);
        if synd.iter().all(|&s| s == 0) {
            return Ok(Ok(received[..self.m].to_vec()));
        }

        // Berlekamp-Massey: shortest LFSR generating the syndrome sequence.
        let mut lambda = vec![0u8; p + 1];
        let mut prev = vec![0u8; p + 1];
        lambda[0] = 1;
        prev[0] = 1;
        let mut l = 0usize;
        let mut shift = 1usize;
        let mut prev_disc = 1u8;
        for i in 0..p {
            let mut disc = synd[i];
            for j in 1..=l.min(i) {
                disc ^= f.mul(lambda[j], synd[i - j]);
            }
            if disc == 0 {
                shift += 1;
                continue;
            }
            let coef = f.div(disc, prev_disc).expect("prev_disc nonzero");
            if 2 * l <= i {
                let keep = lambda.clone();
                for j in 0..=p - shift {
                    lambda[j + shift] ^= f.mul(coef, prev[j]);
                }
                prev = keep;
                prev_disc = disc;
                l = i + 1 - l;
                shift = 1;
            } else {
                for j in 0..=p - shift {
                    lambda[j + shift] ^= f.mul(coef, prev[j]);
                }
                shift += 1;
            }
        }
        if l == 0 || l > self.t || lambda[l] == 0 {
            return Ok(Err(DecodeFailure));
        }

        // Chien search: error at symbol j (degree d = n-1-j) iff
        // lambda(alpha^(-d)) = 0.
        let eval = |poly: &[u8], x: u8| -> u8 {
            poly.iter().rev().fold(0u8, |acc, &c| f.mul(acc, x) ^ c)
        };
        let mut err_pos = Vec::new();
        for j in 0..self.n {
            let d = (self.n - 1 - j) as i64;
            if eval(&lambda[..=l], f.alpha_pow(-d)) == 0 {
                err_pos.push(j);
            }
        }
        if err_pos.len() != l {
            return Ok(Err(DecodeFailure));
        }

        // Forney with fcr = 1: magnitude = omega(Xinv) / lambda'(Xinv).
        let mut omega = vec![0u8; p];
        for (i, &s) in synd.iter().enumerate() {
            for (j, &lam) in lambda.iter().enumerate().take(l + 1) {
                if i + j < p {
                    omega[i + j] ^= f.mul(s, lam);
                }
            }
        }
        // Formal derivative in characteristic 2: only odd-degree terms survive.
        let mut lambda_deriv = vec![0u8; l];
        for i in (1..=l).step_by(2) {
            lambda_deriv[i - 1] = lambda[i];
        }
        let mut corrected = received.to_vec();
        for &j in &err_pos {
            let d = (self.n - 1 - j) as i64;
            let x_inv = f.alpha_pow(-d);
            let num = eval(&omega, x_inv);
            let den = eval(&lambda_deriv, x_inv);
            if den == 0 || num == 0 {
                return Ok(Err(DecodeFailure));
            }
            corrected[j] ^= f.div(num, den).expect("den nonzero");
        }
        if self.syndromes(&corrected).iter().any(|&s| s != 0) {
            return Ok(Err(DecodeFailure));
        }
        Ok(Ok(corrected[..self.m].to_vec()))
    }

    /// Encodes a uniformly random message; the codeword is uniform over the
    /// q^m codewords.
    pub fn sample_codeword<R: Rng>(&self, rng: &mut R) -> SymbolSequence {
        let q = self.field.q() as u8;
        let msg: Vec<u8> = (0..self.m).map(|_| rng.gen_range(0..q)).collect();
        self.encode(&msg).expect("sampled message is well-formed")
    }
}
