//! Checks tape gradients of a small conv + dense network against central differences.

use restyle::autodiff::{grad_check, GradCheckOptions};
use restyle::Tensor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let x = Tensor::from_f64_slice(&[1, 2, 4, 4], &(0..32).map(|i| ((i * 7 % 11) as f64 - 5.0) / 4.0).collect::<Vec<_>>())?;
    let k = Tensor::from_f64_slice(&[3, 2, 3, 3], &(0..54).map(|i| ((i * 5 % 13) as f64 - 6.0) / 9.0).collect::<Vec<_>>())?;
    let w = Tensor::from_f64_slice(&[12, 1], &(0..12).map(|i| (i as f64 - 6.0) / 10.0).collect::<Vec<_>>())?;

    // Differentiate with respect to the conv kernel.
    let report = grad_check(
        |tape, kernel| {
            let h = tape.leaf(x.clone()).conv2d(kernel)?.leaky_relu(0.2).avg_pool2x()?;
            let flat = h.reshape(&[1, 12])?;
            flat.matmul(tape.leaf(w.clone()))?.softplus().sum()
        },
        &k,
        &GradCheckOptions::default(),
    )?;
    println!(
        "checked {} coordinates, skipped {}, max relative error {:.3e}",
        report.checked, report.skipped, report.max_rel_error
    );
    Ok(())
}
