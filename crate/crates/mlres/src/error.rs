use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("eigendecomposition did not converge (dim {dim}, max |a_ij| = {max_abs:e})")]
    EigenNonConvergence { dim: usize, max_abs: f64 },

    #[error("matrix is not Hermitian: asymmetry {asymmetry:e} exceeds tolerance")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {min_eig:e} (scale {scale:e})")]
    NotPsd { min_eig: f64, scale: f64 },

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("zero matrix has no pseudo-determinant")]
    ZeroPseudoDet,

    #[error("bracket invalid: f({lo})={flo:e}, f({hi})={fhi:e}")]
    BracketInvalid { lo: f64, hi: f64, flo: f64, fhi: f64 },

    #[error("non-finite integrand value at contour node {node} (z = {re}{im:+}j)")]
    NonFiniteIntegrand { node: usize, re: f64, im: f64 },

    #[error("contour construction failed: {0}")]
    Contour(String),

    #[error("manifold degenerate at theta = {theta:?} (min eigenvalue of A^H A = {min_eig:e})")]
    ManifoldDegenerate { theta: Vec<f64>, min_eig: f64 },

    #[error("boundary regime unsupported: K = N = {0}")]
    BoundaryRegime(usize),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("As5/regime degeneracy: {0}")]
    Degenerate(String),

    #[error("local-minima search produced no converged starts")]
    NoConvergedStarts,
}

pub type Result<T> = std::result::Result<T, Error>;
