pub mod accum;
pub mod catalog;
pub mod inference;
pub mod keyexpr;
pub mod relmodel;
pub mod sqlfront;
pub mod stores;
pub mod tpcc;
pub mod wrapper;
pub mod executor;
pub mod planner;
pub mod engine;
pub mod matview;
