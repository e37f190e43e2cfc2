//! Experiment runner, animation export and plot-data tables built on `platoon`.

pub mod animation;
pub mod config;
pub mod experiment;
pub mod plotdata;

pub use animation::{export_animation, AnimationTimeline};
pub use config::ExperimentConfig;
pub use experiment::{run_experiment, ExperimentOutcome, ScenarioResult};
pub use plotdata::emit_plot_data;
