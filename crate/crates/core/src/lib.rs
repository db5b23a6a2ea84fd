pub mod error;
pub mod estimates;
pub mod interp;
pub mod kernels;
pub mod params;
pub mod quadrature;
pub mod regularity;
pub mod sie_sim;
pub mod subordinator;
