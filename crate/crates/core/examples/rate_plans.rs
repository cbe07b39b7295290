//! Rapid and minimal-mode rate plans for both experiments.

use cgl_backstepping::controller::{instability_level, minimal_mode_plan, rapid_mode_count};
use cgl_backstepping::PhysParams;

fn main() {
    for (name, params) in [("exp1", PhysParams::experiment1()), ("exp2", PhysParams::experiment2())] {
        println!("== {name}: M = {}", instability_level(&params));
        for plan in [rapid_mode_count(&params), minimal_mode_plan(&params)] {
            match plan {
                Ok(p) => println!("{p}\n"),
                Err(e) => println!("unavailable: {e}\n"),
            }
        }
    }
}
