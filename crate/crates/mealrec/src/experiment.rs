//! Parallel execution of the experiment grid.

use mealrec_core::sim::{aggregate, run_replication, sort_rows, Cell, PlanScores};
use mealrec_core::{DayConfig, Error, ExperimentSpec, PlanEnv, RecipeDataset, ResultRow};
use rayon::prelude::*;

/// Same rows as [`mealrec_core::sim::run_experiment`], with every
/// (cell, replication) pair evaluated on the rayon pool. Seeds depend only
/// on grid coordinates, and replications are averaged in index order, so
/// the output does not depend on the number of threads.
pub fn run_experiment_parallel(
    spec: &ExperimentSpec,
    ds: &RecipeDataset,
    cfg: &DayConfig,
) -> Result<Vec<ResultRow>, Error> {
    let env = PlanEnv::new(ds, cfg)?;
    let cells = spec.cells()?;
    let units: Vec<(usize, u32)> = (0..cells.len())
        .flat_map(|c| (0..spec.replications).map(move |r| (c, r)))
        .collect();
    let scores: Vec<Vec<PlanScores>> = units
        .par_iter()
        .map(|&(c, r)| run_replication(spec, &cells[c], r, &env))
        .collect::<Result<_, _>>()?;
    let per_cell = spec.replications as usize;
    let mut rows: Vec<ResultRow> = cells
        .iter()
        .zip(scores.chunks(per_cell))
        .map(|(cell, reps): (&Cell, _)| aggregate(spec, cell, reps))
        .collect();
    sort_rows(&mut rows);
    Ok(rows)
}
