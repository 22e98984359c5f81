//! Dense numerical kernel: Hermitian eigensystems, (pseudo-)determinants,
//! bracketed root finding, contour quadrature and Gaussian orthant
//! probabilities.

pub mod contour;
pub mod linalg;
pub mod mvn;
pub mod roots;

pub use contour::{contour_integral, contour_integral_batch, unwrapped_log, Contour, Orientation};
pub use linalg::{
    herm_eig, herm_eigenvalues, log_det_chol, log_det_hpd, log_pseudo_det, psd_sqrt, trace_product_re,
    EigenSystem, HermitianMatrix,
};
pub use mvn::{mvn_orthant, norm_cdf, norm_ppf, GaussianSpec};
pub use roots::{find_root_bracketed, poly_roots};
