//! Fits a line with a 95% confidence band to sweep results and writes the
//! CSV and SVG renderings to the system temp directory.

use ttscale::eval::{emit_plot, fit_sweep, PlotFormat, SweepAxis, SweepPoint, SweepResult};

fn main() {
    let observed = [(512, 0.552), (1024, 0.571), (2048, 0.590), (4096, 0.604), (8192, 0.598)];
    let sweep = SweepResult {
        dataset: "demo".into(),
        axis: SweepAxis::ThinkingBudget,
        points: observed
            .iter()
            .map(|&(x, accuracy)| SweepPoint { x, n: 1000, correct: (accuracy * 1000.0) as usize, accuracy, mean_thinking_tokens: x as f64 * 0.8, failures: 0 })
            .collect(),
        runs: Vec::new(),
    };
    let fit = fit_sweep(&sweep).unwrap();
    println!(
        "slope {:.3e} per token, intercept {:.2}, t {:.3} (df {})",
        fit.slope,
        fit.intercept,
        fit.t_crit,
        fit.n - 2
    );
    for p in &sweep.points {
        let (lo, hi) = fit.band(p.x as f64);
        println!("{:>5}: observed {:.1}%, fitted {:.2}% [{lo:.2}, {hi:.2}]", p.x, p.accuracy * 100.0, fit.predict(p.x as f64));
    }

    let dir = std::env::temp_dir();
    for (format, name) in [(PlotFormat::Csv, "scaling_fit.csv"), (PlotFormat::Svg, "scaling_fit.svg")] {
        let path = dir.join(name);
        std::fs::write(&path, emit_plot(&sweep, Some(&fit), format).unwrap()).unwrap();
        println!("wrote {}", path.display());
    }
}
