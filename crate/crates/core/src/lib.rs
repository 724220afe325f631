pub mod numerics;
pub mod data;
pub mod learners;
pub mod estimators;
pub mod dgp;
pub mod sim;
