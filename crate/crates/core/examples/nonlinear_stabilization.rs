//! Cubic exp2 plant with and without feedback. The uncontrolled run settles
//! on a nonzero steady state; the controlled one decays.

use cgl_backstepping::config::InitialDatum;
use cgl_backstepping::controller::ControlLaw;
use cgl_backstepping::solver::{run, StepOptions};
use cgl_backstepping::{BacksteppingTransform, Grid, PhysParams, TimeGrid, Weighting};

fn main() -> cgl_backstepping::Result<()> {
    let params = PhysParams::experiment2();
    let grid = Grid::new(201, params.length)?;
    let time = TimeGrid::from_step(1e-3, 3.0)?;
    let transform = BacksteppingTransform::new(&params, &grid, Weighting::Trapezoid)?;
    let law = ControlLaw::new(&transform, &params, &grid)?;
    let u0 = InitialDatum::Exp2.sample(&grid);
    let opts = StepOptions::default();

    let closed = run(&params, &grid, &time, Some(&law), &u0, &opts)?;
    let open = run(&params, &grid, &time, None, &u0, &opts)?;

    println!("{:>5}  {:>12}  {:>12}", "t", "closed H1", "open H1");
    for n in (0..time.n_t()).step_by(250) {
        println!("{:>5.2}  {:>12.4e}  {:>12.4e}", closed.times[n], closed.h1_history[n], open.h1_history[n]);
    }
    println!(
        "Picard sweeps per step: closed <= {}, open <= {}",
        closed.max_picard_iters(),
        open.max_picard_iters()
    );
    Ok(())
}
