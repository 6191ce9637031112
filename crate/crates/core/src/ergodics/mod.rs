//! Time averages along skew-product orbits: Lyapunov exponents, Birkhoff
//! averages, correlations and the contraction-on-average certificate.

mod averages;
mod contraction;
mod lyapunov;
mod observable;

pub use averages::{
    birkhoff_average, correlation_csv, correlation_decay, graph_measure_sample, mixing_trend, srb_independence,
    Correlations,
};
pub use contraction::avg_contraction_check;
pub use lyapunov::{lyapunov_batch, lyapunov_csv, lyapunov_spectrum, lyapunov_top, LyapunovBatch};
pub use observable::Observable;

/// Neumaier running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct RunningSum {
    s: f64,
    c: f64,
}

impl RunningSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.s + self.c
    }
}

pub(crate) fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = crate::geometry::measure::fsum(xs) / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let ss: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (m, (crate::geometry::measure::fsum(&ss) / (n - 1.0)).sqrt())
}
