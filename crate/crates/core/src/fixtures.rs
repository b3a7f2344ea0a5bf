//! Bundled test systems.

/// Three-bus triangle: cheap slack generator at bus 1, expensive generator at bus 2,
/// 150 MW load at bus 3, branch 1-3 rated 80 MW.
pub const TRI3: &str = include_str!("../data/tri3.case");

/// IEEE 14-bus topology and reactances with linear costs and ratings chosen so a
/// handful of corridors congest under nominal load.
pub const IEEE14: &str = include_str!("../data/ieee14.case");
