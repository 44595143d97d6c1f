// One-soliton of KdV from the zero seed: integrate the covering, map, compare, export CSV.
//
// Run with `cargo run --release --example soliton`.

use std::error::Error;

use jetkit::corpus;
use jetkit::numeric::{run_soliton, Grid};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let p = corpus::load("kdv_abt")?;
    let sd = p.soliton.as_ref().ok_or("kdv_abt has no soliton section")?;
    println!("seed z = 0, lambda = -1, rho(0, 0) = 0; exact z' = 2 sech^2(x - 4t)\n");
    println!("{:>8} {:>12} {:>12} {:>8}", "h", "max |dev|", "residual", "masked");
    let mut last = None;
    for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        let run = run_soliton(&p, sd, Some(&Grid::square(-2.0, 2.0, h)))?;
        let dev = run.deviations.iter().map(|(_, d)| *d).fold(0.0, f64::max);
        let res = run.residual.ok_or("grid too small for a residual")?;
        println!("{h:>8.5} {dev:>12.3e} {res:>12.3e} {:>8}", run.image.masked_count());
        if dev > 1e-5 {
            return Err(format!("deviation {dev:e} at h = {h}").into());
        }
        if let Some(prev) = last {
            if res >= prev {
                return Err("residual did not decrease under refinement".into());
            }
        }
        last = Some(res);
    }

    let run = run_soliton(&p, sd, Some(&Grid::square(-1.0, 1.0, 0.25)))?;
    let path = std::env::temp_dir().join("jetkit_kdv_soliton.csv");
    let csv = run.image.to_csv()?;
    std::fs::write(&path, &csv)?;
    println!("\nwrote {} rows to {}", csv.lines().count() - 1, path.display());
    for line in csv.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
