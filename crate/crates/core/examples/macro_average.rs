//! Macro and weighted averages over per-benchmark accuracies.

use ttscale::eval::{macro_average, weighted_average};

fn main() {
    let benchmarks = ["MedMCQA", "MedQA", "PubMedQA", "MMLU-Pro", "GPQA", "Lancet", "MedBullets-4", "MedBullets-5", "MedXpertQA", "NEJM"];
    let accuracies = [62.54, 75.81, 75.80, 65.86, 53.08, 62.62, 63.64, 59.74, 19.81, 64.34];
    for (b, a) in benchmarks.iter().zip(accuracies) {
        println!("{b:<14}{a:>7.2}");
    }
    println!("{:<14}{:>7.2}", "macro avg", macro_average(&accuracies).unwrap());

    // Illustrative dataset sizes.
    let sized = [(62.54, 4183), (75.81, 1273), (75.80, 1000)];
    println!("weighted over the first three: {:.2}", weighted_average(&sized).unwrap());
}
