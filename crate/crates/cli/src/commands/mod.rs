pub mod ablate;
pub mod bench;
pub mod eval;
pub mod gen_data;
pub mod trace_rf;
pub mod train;

pub use ablate::{cmd_ablate, AblationReport, AblationRow};
pub use bench::{cmd_bench, BenchArgs, BenchReport};
pub use eval::{cmd_eval, EvalArgs, EvalReport};
pub use gen_data::{cmd_gen_data, GenDataArgs, Manifest};
pub use trace_rf::{cmd_trace_rf, cmd_trace_rf_grid, CloudSource, TraceGridArgs, TraceReport, TraceRfArgs};
pub use train::{cmd_train, load_training_checkpoint, History, TrainOutcome};
