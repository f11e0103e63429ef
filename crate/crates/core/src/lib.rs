pub mod corpus;
pub mod eval;
pub mod features;
pub mod game;
pub mod interactions;
pub mod predictors;
pub mod rng;
pub mod sim;
pub mod strategy;
pub mod trainer;
