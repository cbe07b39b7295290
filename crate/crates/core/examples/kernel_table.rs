//! Samples the backstepping kernel for the exp1 coefficients, prints a few
//! values and the PDE residual, and writes the full table as CSV.
//!
//! cargo run --release --example kernel_table -- [n_x] [out.csv]

use cgl_backstepping::kernel::{kernel_residual, KernelTable};
use cgl_backstepping::{Grid, PhysParams};

fn main() -> cgl_backstepping::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_x: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(201);
    let params = PhysParams::experiment1();
    let grid = Grid::new(n_x, params.length)?;
    let table = KernelTable::build(&params, &grid)?;

    println!("truncation order M = {}", table.m_trunc);
    let last = n_x - 1;
    for j in [0, last / 4, last / 2, 3 * last / 4, last] {
        let y = grid.nodes()[j];
        println!("k(L, {y:.3}) = {:.6}   k_x(L, {y:.3}) = {:.6}", table.values[[last, j]], table.deriv_trace[j]);
    }
    println!("max interior residual = {:.3e}", kernel_residual(&table, &grid, &params)?);

    if let Some(path) = args.next() {
        table.write_csv(&grid, std::fs::File::create(&path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
