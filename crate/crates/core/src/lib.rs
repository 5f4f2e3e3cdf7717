pub mod contour;
pub mod dataset;
pub mod dual;
pub mod errata;
pub mod gradcheck;
pub mod loss;
pub mod metrics;
pub mod predictor;
pub mod trainer;
