//! Code-offset secure sketch: Alice publishes S = W^n XOR C for a uniformly
//! sampled codeword C; Bob computes C' = V^n XOR S and decodes. The decoded
//! message is the shared key, with key rate and leakage bound reported in
//! bits. No privacy amplification stage follows the sketch.

use thiserror::Error;

use crate::galois::{DecodeFailure, RsError, RsParams, SymbolSequence};

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum SketchError {
    #[error(transparent)]
    Rs(#[from] RsError),
    #[error("input is not a codeword of RS({n},{m})")]
    NotACodeword { n: usize, m: usize },
    #[error("entropy {h} bits exceeds log2(q) = {max} bits")]
    EntropyOutOfRange { h: f64, max: f64 },
}

/// The public sketch S together with the code it was built against.
#[derive(Debug, Clone)]
pub struct Sketch {
    pub offset: SymbolSequence,
    pub rs: RsParams,
}

/// Alice's key and Bob's recovery outcome for one reconciliation round.
#[derive(Debug, Clone)]
pub struct KeyPair {
    pub k_alice: SymbolSequence,
    pub l_bob: Result<SymbolSequence, DecodeFailure>,
}

impl KeyPair {
    /// Mismatch counts both wrong messages and decode failures.
    pub fn is_match(&self) -> bool {
        matches!(&self.l_bob, Ok(l) if *l == self.k_alice)
    }
}

/// S = W^n XOR C. Subtraction in a characteristic-2 field is XOR.
pub fn make_sketch(
    w_seq: &[u8],
    codeword: &[u8],
    rs: &RsParams,
) -> Result<Sketch, SketchError> {
    if !rs.is_codeword(codeword)? {
        return Err(SketchError::NotACodeword { n: rs.n(), m: rs.m() });
    }
    if w_seq.len() != rs.n() {
        return Err(RsError::BadLength { want: rs.n(), got: w_seq.len() }.into());
    }
    for &sym in w_seq {
        if sym as usize >= rs.field().q() {
            return Err(RsError::SymbolOutOfRange { sym, q: rs.field().q() }.into());
        }
    }
    let offset = w_seq.iter().zip(codeword).map(|(&w, &c)| w ^ c).collect();
    Ok(Sketch { offset, rs: rs.clone() })
}

/// C' = V^n XOR S, decoded to the nearest codeword's message. Equals
/// Alice's message whenever Hamming(w, v) <= t.
pub fn recover(
    v_seq: &[u8],
    sketch: &Sketch,
) -> Result<Result<SymbolSequence, DecodeFailure>, SketchError> {
    if v_seq.len() != sketch.rs.n() {
        return Err(RsError::BadLength { want: sketch.rs.n(), got: v_seq.len() }.into());
    }
    let c_prime: SymbolSequence = v_seq
        .iter()
        .zip(&sketch.offset)
        .map(|(&v, &s)| v ^ s)
        .collect();
    Ok(sketch.rs.decode(&c_prime)?)
}

/// Secret key rate in bits per source symbol: (m/n) * log2(q) with n = q-1.
pub fn key_rate_bits(rs: &RsParams) -> f64 {
    rs.m() as f64 / rs.n() as f64 * (rs.field().q() as f64).log2()
}

/// Upper bound on what the sketch plus Eve's observation reveal about the
/// key material: n*(log2 q - H(W) + I(W;Z)) bits. Negative MI estimates are
/// clamped to zero before entering the formula.
pub fn leakage_bound_bits(
    h_w_bits: f64,
    i_wz_bits: f64,
    q: usize,
    n: usize,
) -> Result<f64, SketchError> {
    let max = (q as f64).log2();
    if !(0.0..=max).contains(&h_w_bits) {
        return Err(SketchError::EntropyOutOfRange { h: h_w_bits, max });
    }
    let i = i_wz_bits.max(0.0);
    Ok(n as f64 * (max - h_w_bits + i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galois::Field;
    use rand::seq::index::sample;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn rs(k: u32, m: usize) -> RsParams {
        RsParams::new(Field::new(k).unwrap(), m).unwrap()
    }

    #[test]
    fn offset_is_xor_and_self_inverse() {
        let p = rs(4, 9);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let w: Vec<u8> = (0..15).map(|_| rng.gen_range(0..16)).collect();
        let c = p.sample_codeword(&mut rng);
        let s = make_sketch(&w, &c, &p).unwrap();
        for i in 0..15 {
            assert_eq!(s.offset[i], w[i] ^ c[i]);
        }
        // v = w reconstructs C exactly, bitwise.
        let c_prime: Vec<u8> = w.iter().zip(&s.offset).map(|(&v, &o)| v ^ o).collect();
        assert_eq!(c_prime, c);
        assert_eq!(recover(&w, &s).unwrap().unwrap(), c[..9].to_vec());
    }

    #[test]
    fn w_equals_codeword_gives_zero_offset() {
        let p = rs(4, 9);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let c = p.sample_codeword(&mut rng);
        let s = make_sketch(&c, &c, &p).unwrap();
        assert!(s.offset.iter().all(|&x| x == 0));
    }

    #[test]
    fn zero_codeword_gives_offset_w() {
        let p = rs(4, 9);
        let w: Vec<u8> = (0..15).map(|i| (i % 16) as u8).collect();
        let s = make_sketch(&w, &vec![0; 15], &p).unwrap();
        assert_eq!(s.offset, w);
    }

    #[test]
    fn recover_tolerates_exactly_t_mismatches() {
        let p = rs(4, 9);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..2_000 {
            let w: Vec<u8> = (0..15).map(|_| rng.gen_range(0..16)).collect();
            let c = p.sample_codeword(&mut rng);
            let s = make_sketch(&w, &c, &p).unwrap();
            let mut v = w.clone();
            for pos in sample(&mut rng, 15, p.t()) {
                v[pos] ^= rng.gen_range(1..16u8);
            }
            assert_eq!(recover(&v, &s).unwrap().unwrap(), c[..9].to_vec());
        }
    }

    #[test]
    fn recover_with_everything_wrong_is_flagged() {
        let p = rs(4, 9);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..500 {
            let w: Vec<u8> = (0..15).map(|_| rng.gen_range(0..16)).collect();
            let c = p.sample_codeword(&mut rng);
            let s = make_sketch(&w, &c, &p).unwrap();
            let v: Vec<u8> = w.iter().map(|&x| x ^ rng.gen_range(1..16u8)).collect();
            let key = KeyPair {
                k_alice: c[..9].to_vec(),
                l_bob: recover(&v, &s).unwrap(),
            };
            assert!(!key.is_match(), "n mismatched symbols must not yield the key");
        }
    }

    #[test]
    fn rejects_non_codeword_and_bad_lengths() {
        let p = rs(4, 9);
        let w = vec![1u8; 15];
        let mut not_cw = vec![0u8; 15];
        not_cw[0] = 1;
        assert!(matches!(
            make_sketch(&w, &not_cw, &p),
            Err(SketchError::NotACodeword { n: 15, m: 9 })
        ));
        assert!(matches!(
            make_sketch(&w[..14], &vec![0; 15], &p),
            Err(SketchError::Rs(RsError::BadLength { .. }))
        ));
        let s = make_sketch(&w, &p.encode(&w[..9]).unwrap(), &p).unwrap();
        assert!(matches!(
            recover(&w[..14], &s),
            Err(SketchError::Rs(RsError::BadLength { .. }))
        ));
    }

    #[test]
    fn key_rate_values() {
        assert_eq!(key_rate_bits(&rs(4, 15)), 4.0);
        let r = key_rate_bits(&rs(4, 5));
        assert!((r - 4.0 * 5.0 / 15.0).abs() < 1e-12);
        assert!((r - 1.3333).abs() < 1e-4);
        assert!((key_rate_bits(&rs(4, 1)) - 0.2667).abs() < 1e-4);
        assert!((key_rate_bits(&rs(5, 11)) - 5.0 * 11.0 / 31.0).abs() < 1e-12);
    }

    #[test]
    fn leakage_bound_values() {
        assert_eq!(leakage_bound_bits(4.0, 0.0, 16, 15).unwrap(), 0.0);
        let b = leakage_bound_bits(3.958, 0.003, 16, 15).unwrap();
        assert!((b - 0.675).abs() < 1e-12, "got {b}");
        assert_eq!(leakage_bound_bits(0.0, 0.0, 16, 1).unwrap(), 4.0);
        // Negative MI estimates clamp to zero.
        assert_eq!(
            leakage_bound_bits(4.0, -0.02, 16, 15).unwrap(),
            0.0
        );
        assert!(matches!(
            leakage_bound_bits(4.2, 0.0, 16, 15),
            Err(SketchError::EntropyOutOfRange { .. })
        ));
        assert!(matches!(
            leakage_bound_bits(-0.1, 0.0, 16, 15),
            Err(SketchError::EntropyOutOfRange { .. })
        ));
    }

    #[test]
    fn sampled_key_symbols_uniform_chi_square() {
        // K is the message of a uniformly sampled codeword; pool symbols
        // over seeded trials and chi-square against uniform at alpha = 0.01.
        let p = rs(4, 9);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut counts = [0u64; 16];
        let trials = 20_000;
        for _ in 0..trials {
            let c = p.sample_codeword(&mut rng);
            for &sym in &c[..9] {
                counts[sym as usize] += 1;
            }
        }
        let expected = (trials * 9) as f64 / 16.0;
        let stat: f64 = counts
            .iter()
            .map(|&o| {
                let d = o as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(stat < 30.578, "chi-square statistic {stat} rejects uniformity");
    }

    #[test]
    fn mismatch_rate_matches_binomial_tail_under_iid_injection() {
        // Inject i.i.d. per-symbol mismatches at rate p_sym and compare
        // Pr{K != L} against the binomial tail Pr{Bin(n, p_sym) > t}.
        let p = rs(4, 9);
        let p_sym = 0.08;
        let trials = 20_000usize;
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let mut mismatches = 0usize;
        for _ in 0..trials {
            let w: Vec<u8> = (0..15).map(|_| rng.gen_range(0..16)).collect();
            let v: Vec<u8> = w
                .iter()
                .map(|&x| {
                    if rng.gen_bool(p_sym) {
                        x ^ rng.gen_range(1..16u8)
                    } else {
                        x
                    }
                })
                .collect();
            let c = p.sample_codeword(&mut rng);
            let s = make_sketch(&w, &c, &p).unwrap();
            let key = KeyPair { k_alice: c[..9].to_vec(), l_bob: recover(&v, &s).unwrap() };
            if !key.is_match() {
                mismatches += 1;
            }
        }
        let tail: f64 = (p.t() + 1..=15)
            .map(|j| {
                let comb = (0..j).fold(1.0, |acc, i| acc * (15 - i) as f64 / (i + 1) as f64);
                comb * p_sym.powi(j as i32) * (1.0 - p_sym).powi((15 - j) as i32)
            })
            .sum();
        let emp = mismatches as f64 / trials as f64;
        let se = (tail * (1.0 - tail) / trials as f64).sqrt();
        assert!(
            (emp - tail).abs() <= 3.0 * se,
            "empirical {emp} vs binomial tail {tail} (3se = {})",
            3.0 * se
        );
    }
}
