//! Compute the analytic optimum, Hessian, and Monte Carlo limit covariance
//! of the ridge test problem.
//!
//!     cargo run --release --example ground_truth

use pushpull::oracle::RidgeModel;

fn print_matrix(name: &str, m: &nalgebra::DMatrix<f64>) {
    println!("{name} =");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:>12.4}", m[(i, j)]))
            .collect();
        println!("  [{}]", row.join(" "));
    }
}

fn main() {
    let model = RidgeModel::study_config();
    let gt = model.ground_truth(1_000_000, 42).expect("ground truth");

    let xs: Vec<String> = gt.x_star.iter().map(|v| format!("{v:.6}")).collect();
    println!("x_star = [{}]", xs.join(", "));
    print_matrix("H", &gt.h);
    print_matrix("S", &gt.s);
    print_matrix("Sigma = H^-1 S H^-1", &gt.sigma);
    println!(
        "\nS entries carry Monte Carlo standard error up to {:.3e} ({} draws)",
        gt.s_standard_error.amax(),
        gt.mc_samples
    );
}
