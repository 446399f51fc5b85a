//! The training losses on a hand-built joint distribution with known
//! ground truth: the variational bounds bracket the exact mutual
//! information, and the mismatch loss tracks the agreement probability.

use ndarray::{array, Array2};
use vcrx::netcore::ProbBatch;
use vcrx::vpq::{entropy_bits, loss_entropy, loss_mismatch, mi_vlb, mi_vub, EmaMarginals};

fn main() {
    // Eight paired rows over a 4-letter alphabet. Each z value is shared
    // by two rows, so the exact conditional p(w|z) is their average.
    let rows: Array2<f64> = array![
        [0.70, 0.10, 0.10, 0.10],
        [0.50, 0.30, 0.10, 0.10],
        [0.10, 0.70, 0.10, 0.10],
        [0.10, 0.50, 0.30, 0.10],
        [0.10, 0.10, 0.70, 0.10],
        [0.10, 0.10, 0.50, 0.30],
        [0.10, 0.10, 0.10, 0.70],
        [0.30, 0.10, 0.10, 0.50],
    ];
    let p_w = ProbBatch::from_rows(rows.clone()).unwrap();
    let p_z = ProbBatch::from_rows(exact_conditional(&rows)).unwrap();

    let h_w = entropy_bits(&mean_rows(&rows));
    let exact_i = exact_mi(&rows);
    let vlb = mi_vlb(&p_w, &p_z).unwrap();
    let vub = mi_vub(&p_w, &p_z).unwrap();
    println!("H(W)         = {h_w:.6} bits");
    println!("exact I(W;Z) = {exact_i:.6} bits");
    println!("I_VLB + H(W) = {:.6} bits (lower bound)", vlb + h_w);
    println!("I_VUB        = {:.6} bits (upper bound)", vub);
    assert!(vlb + h_w <= exact_i + 1e-9);
    assert!(vub >= exact_i - 1e-9);

    // Mismatch loss: -E[sum_w p(w|x) p(w|y)], the negative probability
    // that independent draws from the two posteriors agree.
    let l_mr = loss_mismatch(&p_w, &p_w).unwrap();
    println!("\nL_MR of the batch against itself = {l_mr:.6}");

    // Entropy regularizer on EMA marginals: minimized (most negative)
    // when symbol usage is uniform.
    let uniform = EmaMarginals::uniform(4, 0.6).unwrap();
    println!(
        "L_ENT at uniform marginals = {:.6} (-H_max / (1 - alpha))",
        loss_entropy(&uniform)
    );
}

fn mean_rows(p: &Array2<f64>) -> Vec<f64> {
    let b = p.nrows() as f64;
    (0..p.ncols()).map(|j| p.column(j).sum() / b).collect()
}

/// Predictor rows equal to the true conditional p(w|z): the average of
/// the two rows sharing each z value.
fn exact_conditional(rows: &Array2<f64>) -> Array2<f64> {
    let mut p_z = rows.clone();
    for pair in 0..4 {
        let (a, b) = (2 * pair, 2 * pair + 1);
        for j in 0..4 {
            let avg = 0.5 * (rows[[a, j]] + rows[[b, j]]);
            p_z[[a, j]] = avg;
            p_z[[b, j]] = avg;
        }
    }
    p_z
}

/// I(W;Z) = H(W) - H(W|Z) for the uniform-over-rows joint.
fn exact_mi(rows: &Array2<f64>) -> f64 {
    let h_w = entropy_bits(&mean_rows(rows));
    let p_z = exact_conditional(rows);
    let h_w_given_z = (0..4)
        .map(|pair| {
            let row: Vec<f64> = (0..4).map(|j| p_z[[2 * pair, j]]).collect();
            entropy_bits(&row)
        })
        .sum::<f64>()
        / 4.0;
    h_w - h_w_given_z
}
