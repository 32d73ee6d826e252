use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("argument {arg} lies within {dist:e} of a pole")]
    PoleProximity { arg: String, dist: f64 },
    #[error("quadrature did not converge: estimated error {err:e} after {evals} evaluations")]
    Quadrature { err: f64, evals: usize },
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("no root in bracket [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
    #[error("optimizer stopped after {iters} iterations with KKT residual {residual:e}")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("size limit exceeded: {0}")]
    TooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;
