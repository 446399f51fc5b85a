//! Code-offset secure sketch: Alice publishes W xor C, Bob shifts his
//! correlated reading into the code's space and decodes. The sketch
//! reconciles any <= t symbol disagreements into an identical key.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use vcrx::galois::{Field, RsParams};
use vcrx::sketch::{key_rate_bits, leakage_bound_bits, make_sketch, recover, KeyPair};

fn main() {
    let field = Field::new(4).unwrap();
    let rs = RsParams::new(field, 9).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(21);

    // Alice's symbols and Bob's noisy copy, disagreeing in t places.
    let w: Vec<u8> = (0..rs.n()).map(|_| rng.gen_range(0..16) as u8).collect();
    let mut v = w.clone();
    for i in 0..rs.t() {
        v[i * 3] ^= rng.gen_range(1..16) as u8;
    }
    let distance = w.iter().zip(&v).filter(|(a, b)| a != b).count();
    println!("w: {w:?}");
    println!("v: {v:?} (Hamming distance {distance})");

    let msg: Vec<u8> = (0..rs.m()).map(|_| rng.gen_range(0..16) as u8).collect();
    let codeword = rs.encode(&msg).unwrap();
    let sketch = make_sketch(&w, &codeword, &rs).unwrap();
    println!("\npublic sketch (w xor c): {:?}", sketch.offset);

    let recovered = recover(&v, &sketch).unwrap();
    let pair = KeyPair {
        k_alice: msg.clone(),
        l_bob: recovered,
    };
    println!("alice key: {:?}", pair.k_alice);
    println!("bob key:   {:?}", pair.l_bob);
    assert!(pair.is_match());

    // Accounting: each key carries m*log2(q) bits; the sketch reveals at
    // most n*(log2 q - H(W)) of them when Eve sees nothing else.
    let h_w = 3.958;
    println!("\nkey rate: {:.3} bits/symbol", key_rate_bits(&rs));
    println!(
        "leakage bound at H(W) = {h_w} bits, I(W;Z) = 0: {:.3} bits",
        leakage_bound_bits(h_w, 0.0, 16, rs.n()).unwrap()
    );
    println!(
        "leakage bound with I(W;Z) = 0.003 bits:       {:.3} bits",
        leakage_bound_bits(h_w, 0.003, 16, rs.n()).unwrap()
    );
}
