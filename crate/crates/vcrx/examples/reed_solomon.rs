//! Reed-Solomon over GF(16): encode a message, corrupt up to t symbols,
//! decode it back, and show what happens past the radius.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use vcrx::galois::{Field, RsParams};

fn main() {
    let field = Field::new(4).unwrap();
    let rs = RsParams::new(field, 9).unwrap();
    println!(
        "RS(n={}, m={}) over GF({}): corrects up to t={} symbol errors",
        rs.n(),
        rs.m(),
        rs.field().q(),
        rs.t()
    );

    let msg: Vec<u8> = vec![7, 1, 14, 3, 0, 9, 5, 12, 2];
    let codeword = rs.encode(&msg).unwrap();
    println!("\nmessage:  {msg:?}");
    println!("codeword: {codeword:?} (systematic: message in the first m symbols)");
    assert_eq!(&codeword[..rs.m()], &msg[..]);

    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let mut received = codeword.clone();
    for pos in sample(&mut rng, rs.n(), rs.t()) {
        let old = received[pos];
        let mut new = old;
        while new == old {
            new = rng.gen_range(0..rs.field().q()) as u8;
        }
        received[pos] = new;
    }
    let flips: usize = received
        .iter()
        .zip(&codeword)
        .filter(|(a, b)| a != b)
        .count();
    println!("\nreceived with {flips} errors: {received:?}");

    let decoded = rs.decode(&received).unwrap().expect("within radius");
    println!("decoded message: {decoded:?}");
    assert_eq!(decoded, msg);

    // One error beyond the radius: bounded-distance decoding either fails
    // or lands on a different codeword; it never silently "fixes" it.
    let mut too_far = codeword.clone();
    for pos in 0..=rs.t() {
        too_far[pos] ^= 1;
    }
    match rs.decode(&too_far).unwrap() {
        Ok(other) => {
            println!("\n{} errors: decoded to a different message {other:?}", rs.t() + 1);
            assert_ne!(other, msg);
        }
        Err(_) => println!("\n{} errors: decode failure reported", rs.t() + 1),
    }
}
