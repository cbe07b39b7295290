//! Recursion denominators d_j for both experiment parameter sets, then a μ
//! sweep showing where (μ, N = 2) stays admissible.

use cgl_backstepping::transform::admissibility_report;
use cgl_backstepping::{Grid, PhysParams};

fn main() -> cgl_backstepping::Result<()> {
    for params in [PhysParams::experiment1(), PhysParams::experiment2()] {
        let grid = Grid::new(201, params.length)?;
        print!("{}", admissibility_report(&params, &grid)?.to_text());
        println!();
    }

    let base = PhysParams::experiment1();
    let grid = Grid::new(201, base.length)?;
    println!("{:>6}  {:>10}  verdict", "mu", "min |d_j|");
    for mu in (0..=10).map(|i| 20.0 * i as f64) {
        let r = admissibility_report(&PhysParams { mu, ..base }, &grid)?;
        println!("{mu:>6}  {:>10.6}  {}", r.min_abs(), if r.admissible { "ok" } else { "inadmissible" });
    }
    Ok(())
}
