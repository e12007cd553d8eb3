pub mod ambiguity;
pub mod driver;
pub mod grid;
pub mod master;
pub mod milp;
pub mod monte_carlo;
pub mod pre_contingency;
pub mod recourse;
pub mod subproblem;
pub mod synth;

pub use ambiguity::{DduConfig, MomentBound};
pub use driver::{load_cuts, save_cuts, solve_ddro, solve_ddro_with, CutCache, DdroOutcome, DriverOptions, IterationLog};
pub use grid::{Bus, BusId, GridInstance, Line, LineId, Substation};
pub use master::{MasterSolution, OptimalityCut};
pub use milp::{ModelBuilder, SolveResult, SolveStatus, SolverParams};
pub use monte_carlo::OutOfSampleReport;
pub use pre_contingency::FirstStageSolution;
pub use recourse::{ContingencyScenario, DualSolution, RecourseTemplate};
pub use subproblem::{SubproblemMethod, SubproblemSolution};
