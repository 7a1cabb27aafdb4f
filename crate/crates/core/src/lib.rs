//! Renewal-reward processes S(t) = X₁ + … + X_{N(t)}: exponential tilting of
//! the pair (τ, X), lattice renewal measures and key-renewal convolutions,
//! the tilted representation of E e^{λS(t)}, and Monte Carlo estimates of
//! moderate-deviation tails.

pub mod law;
pub mod numeric;
pub mod tilt;
pub mod renewal;
pub mod mgf;
pub mod montecarlo;
