//! Study drivers built on the simulator.

pub mod calibrate;
pub mod sweep;

pub use calibrate::{
    calibrate_noise, isotonic_increasing, load_samples, read_samples, write_calibration_csv, CalibrationBin,
    CalibrationSample, IdealScore,
};
pub use sweep::{
    measurements_to_level, median_recovery, recovery_curve, run_sweep, run_trials, trial_seed, CurvePoint, SweepResult,
    SweepSpec, TrialOutcome, Vary,
};
