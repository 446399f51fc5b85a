//! GF(2^k) basics: the supported field orders, a multiplication table
//! fragment, inverses, and the generator's cycle.

use vcrx::galois::{Field, SUPPORTED_K};

fn main() {
    println!("supported k (field orders 2^k): {SUPPORTED_K:?}");

    let f = Field::new(4).unwrap();
    println!(
        "\nGF({}) with primitive polynomial {:#x}",
        f.q(),
        f.primitive_poly()
    );

    println!("\nmul table corner (rows/cols 0..8):");
    for a in 0..8u8 {
        let row: Vec<String> = (0..8u8).map(|b| format!("{:2}", f.mul(a, b))).collect();
        println!("  {}", row.join(" "));
    }

    println!("\ninverses: a * a^-1 = 1 for every nonzero a");
    for a in 1..f.q() as u8 {
        let inv = f.inv(a).unwrap();
        assert_eq!(f.mul(a, inv), 1);
    }
    println!("  checked all {} nonzero elements", f.q() - 1);

    // alpha generates the multiplicative group: its powers hit every
    // nonzero element exactly once per period q-1.
    let cycle: Vec<u8> = (0..f.q() as i64 - 1).map(|e| f.alpha_pow(e)).collect();
    println!("\nalpha^0 .. alpha^{}: {cycle:?}", f.q() - 2);
    assert_eq!(f.alpha_pow(f.q() as i64 - 1), 1);

    // Addition is XOR: every element is its own additive inverse.
    assert_eq!(f.add(9, 9), 0);
    assert_eq!(f.add(5, 3), 6);
    println!("\naddition is carryless XOR: 5 + 3 = {}", f.add(5, 3));
}
