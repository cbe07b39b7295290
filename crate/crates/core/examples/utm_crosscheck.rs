//! Unified-transform solution of the open-loop plant, checked against the
//! heat closed form and against Crank–Nicolson for the exp1 coefficients.

use std::f64::consts::PI;

use cgl_backstepping::config::InitialDatum;
use cgl_backstepping::utm::{cross_validate, evaluate_solution, BoundaryData, ContourSpec, Lattice, UtmProblem};
use cgl_backstepping::{ComplexField, Grid, PhysParams, TimeGrid};

fn main() -> cgl_backstepping::Result<()> {
    let heat = PhysParams {
        alpha: 0.0,
        gamma: 0.0,
        mu: 0.0,
        n_modes: 1,
        ..PhysParams::experiment1()
    };
    let grid = Grid::new(201, 1.0)?;
    let lam = PI * PI / 4.0;
    let u0 = ComplexField::from_real_fn(&grid, |x| (PI * x / 2.0).sin());
    let problem = UtmProblem::new(&heat, &grid, u0, BoundaryData::zero(), None)?;
    for (x, t) in [(0.3, 0.05), (0.7, 0.2)] {
        let u = evaluate_solution(&problem, x, t)?;
        let exact = (-lam * t).exp() * (PI * x / 2.0).sin();
        println!("heat u({x}, {t}) = {:.10}  exact {exact:.10}", u.re);
        let c = ContourSpec::adaptive(&problem, x, t)?;
        let fine = problem.evaluate(&c.refined(), x, t)?;
        println!("  refinement change {:.2e}", (fine - u).norm());
    }

    let params = PhysParams::experiment1();
    let time = TimeGrid::new(401, 0.02)?;
    let u0 = InitialDatum::Exp1.sample(&grid);
    let lattice = Lattice::uniform(&grid, &time, 5, 4);
    let report = cross_validate(&params, &grid, &time, &u0, &BoundaryData::zero(), &lattice)?;
    println!("exp1 coefficients, t <= 0.02: discrepancy {:.3e}", report.discrepancy);
    Ok(())
}
