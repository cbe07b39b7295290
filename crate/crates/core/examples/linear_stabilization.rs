//! Closed loop vs open loop for the linear exp1 plant. Prints the H¹ norm at a
//! few times, the fitted decay rate and the guaranteed rate.

use cgl_backstepping::config::InitialDatum;
use cgl_backstepping::controller::{minimal_mode_plan, ControlLaw};
use cgl_backstepping::solver::{fit_decay_rate, run, StepOptions};
use cgl_backstepping::{BacksteppingTransform, Grid, PhysParams, TimeGrid, Weighting};

fn main() -> cgl_backstepping::Result<()> {
    let params = PhysParams::experiment1();
    let grid = Grid::new(201, params.length)?;
    let time = TimeGrid::from_step(5e-4, 1.0)?;
    let transform = BacksteppingTransform::new(&params, &grid, Weighting::Trapezoid)?;
    let law = ControlLaw::new(&transform, &params, &grid)?;
    let u0 = InitialDatum::Exp1.sample(&grid);
    let opts = StepOptions::default();

    let closed = run(&params, &grid, &time, Some(&law), &u0, &opts)?;
    let open = run(&params, &grid, &time, None, &u0, &opts)?;

    println!("{:>6}  {:>12}  {:>12}", "t", "closed H1", "open H1");
    for n in (0..time.n_t()).step_by(200) {
        println!("{:>6.2}  {:>12.4e}  {:>12.4e}", closed.times[n], closed.h1_history[n], open.h1_history[n]);
    }
    let plan = minimal_mode_plan(&params)?;
    println!("fitted rate on [0.2, 0.8] = {:.3}", fit_decay_rate(&closed, (0.2, 0.8))?);
    println!("guaranteed eta_2          = {:.3}", plan.eta);
    Ok(())
}
