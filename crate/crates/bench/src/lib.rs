//! Fixtures shared by the benchmarks.

use sextic_core::{LogDensity, Measure};

pub fn five_point() -> Measure {
    Measure::discrete(&[(-2.0, 0.2), (-1.0, 0.2), (0.0, 0.2), (1.0, 0.2), (2.0, 0.2)])
        .expect("valid atoms")
}

pub fn exp_quartic() -> Measure {
    Measure::density(LogDensity::ExpQuartic, -4.0, 4.0, 2048).expect("valid density")
}

pub fn uniform() -> Measure {
    Measure::density(LogDensity::Uniform, -1.0, 1.0, 256).expect("valid density")
}
