//! B-form bivariate splines over triangulations: smoothness constraints,
//! dimension bounds, constrained least squares, fitting, collocation for
//! elliptic PDEs and Kolmogorov-superposition spline bases.

pub mod bform;
pub mod cli;
pub mod constraints;
pub mod dimension;
pub mod fit;
pub mod kst;
pub mod functions;
pub mod linalg;
pub mod lsq;
pub mod mesh;
pub mod pde;
pub mod quadrature;
pub mod sparse;
