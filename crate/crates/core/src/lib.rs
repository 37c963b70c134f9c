pub mod cones;
pub mod cq;
pub mod expr;
pub mod numeric;
pub mod par;
pub mod penalty;
pub mod point;
pub mod problem;
pub mod report;
pub mod soc;
pub mod solver;
pub mod stationarity;
pub mod verdict;
