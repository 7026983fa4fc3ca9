//! Numerical verification of the appendix machinery: weighted Hardy
//! constants, Lojasiewicz exponents, the harmonic-approximation iteration
//! and the phase-amplitude (eikonal) splitting.

mod harmapprox;
mod hardy;
mod loja;
mod phase;
mod poly;

pub use harmapprox::{harmonic_approximation, HarmonicApproxRun, MetricPerturbation};
pub use hardy::{hardy2d_log_constant, hardy_constant, HardyEstimate, HardyInequality};
pub use loja::{lojasiewicz_fit, LojasiewiczFit};
pub use phase::{phase_amplitude_extract, PhaseAmplitude, Ray, RayBundle};
pub use poly::Polynomial;
