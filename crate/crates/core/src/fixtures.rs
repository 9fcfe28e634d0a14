//! Reference datasets: a ten-point linear regression example and low-cycle
//! fatigue test results.

use crate::fatigue::FatigueRecord;
use crate::linmodel::Dataset;

pub const REGRESSION_X: [f64; 10] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const REGRESSION_Y: [f64; 10] = [0.2784, 0.3520, 0.3925, 0.6831, 1.0277, 1.4077, 1.8802, 2.5003, 2.0007, 3.1197];

/// Strain amplitudes `Δε/2` of the fatigue tests.
pub const FATIGUE_STRAIN: [f64; 9] = [0.01636, 0.01609, 0.00675, 0.00682, 0.00179, 0.00160, 0.00165, 0.00053, 0.00054];
/// Cycles to failure of the fatigue tests.
pub const FATIGUE_CYCLES: [f64; 9] = [168.0, 200.0, 1000.0, 1180.0, 4730.0, 8035.0, 5254.0, 28617.0, 32650.0];

/// Default held-out fatigue record (0-based index of the sixth test).
pub const FATIGUE_HOLDOUT: usize = 5;

/// The regression example with design `[1, x]`.
pub fn regression_example() -> Dataset {
    Dataset::with_intercept(&REGRESSION_X, &REGRESSION_Y).expect("fixture is valid")
}

/// The fatigue tests as records.
pub fn fatigue_tests() -> Vec<FatigueRecord> {
    FATIGUE_STRAIN
        .iter()
        .zip(FATIGUE_CYCLES)
        .map(|(&s, n)| FatigueRecord::new(s, n).expect("fixture is valid"))
        .collect()
}
