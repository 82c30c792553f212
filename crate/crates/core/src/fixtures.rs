//! Bundled datasets.

/// Trains KB: 10 classes, 5 roles, 50 individuals.
pub const TRAINS_KB: &str = include_str!("../fixtures/trains.kb");
/// 5 eastbound (positive) and 5 westbound (negative) trains.
pub const TRAINS_EXAMPLES: &str = include_str!("../fixtures/trains.ex");
/// A known separating concept for the trains examples.
pub const TRAINS_TARGET: &str = "(hasCar some (Closed and Short))";

/// Six-person family KB with numeric and string roles.
pub const SMOKE_KB: &str = include_str!("../fixtures/smoke.kb");
pub const SMOKE_EXAMPLES: &str = include_str!("../fixtures/smoke.ex");
pub const SMOKE_TARGET: &str = "(Male and (hasChild some Thing))";
