//! The 20-row planner matrix: five base planners crossed with four schemes.

use std::fmt;
use std::str::FromStr;

use biam_core::{MetricKind, PlannerConfig, Scenario};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Base {
    RtRrt,
    RtRrtD,
    AmRrtE,
    AmRrtD,
    AmRrtG,
}

impl Base {
    pub const ALL: [Base; 5] = [Base::RtRrt, Base::RtRrtD, Base::AmRrtE, Base::AmRrtD, Base::AmRrtG];

    pub fn metric(self) -> MetricKind {
        match self {
            Base::RtRrt | Base::AmRrtE => MetricKind::Euclidean,
            Base::RtRrtD | Base::AmRrtD => MetricKind::Diffusion,
            Base::AmRrtG => MetricKind::Geodesic,
        }
    }

    fn slug(self) -> &'static str {
        match self {
            Base::RtRrt => "rt-rrt",
            Base::RtRrtD => "rt-rrt-d",
            Base::AmRrtE => "am-rrt-e",
            Base::AmRrtD => "am-rrt-d",
            Base::AmRrtG => "am-rrt-g",
        }
    }

    fn display(self) -> &'static str {
        match self {
            Base::RtRrt => "RT-RRT*",
            Base::RtRrtD => "RT-RRT*(D)",
            Base::AmRrtE => "AM-RRT*(E)",
            Base::AmRrtD => "AM-RRT*(D)",
            Base::AmRrtG => "AM-RRT*(G)",
        }
    }

    fn config(self) -> PlannerConfig {
        match self {
            Base::RtRrt | Base::RtRrtD => PlannerConfig::rt_rrt(self.metric()),
            _ => PlannerConfig::am_rrt(self.metric()),
        }
    }
}

/// Which of the two modifications a row enables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Original,
    Bidirectional,
    NewRewiring,
    Both,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Original, Scheme::Bidirectional, Scheme::NewRewiring, Scheme::Both];

    pub fn bidirectional(self) -> bool {
        matches!(self, Scheme::Bidirectional | Scheme::Both)
    }

    pub fn new_rewiring(self) -> bool {
        matches!(self, Scheme::NewRewiring | Scheme::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlannerId {
    pub base: Base,
    pub scheme: Scheme,
}

impl PlannerId {
    pub fn new(base: Base, scheme: Scheme) -> Self {
        PlannerId { base, scheme }
    }

    /// Row label as printed in result tables, e.g. `AM-RRT*(D)-1`.
    pub fn display_name(self) -> String {
        let b = self.base.display();
        match self.scheme {
            Scheme::Original => b.to_string(),
            Scheme::Bidirectional => format!("{b}-1"),
            Scheme::NewRewiring => format!("{b}-2"),
            Scheme::Both => format!("Bi-{b}"),
        }
    }

    /// Parameters for this row. `sigma` follows the scenario (50 m in the
    /// bug trap, 30 m elsewhere); the seed is left at zero.
    pub fn config(self, scenario: Scenario) -> PlannerConfig {
        let mut c = self.base.config();
        c.bidirectional = self.scheme.bidirectional();
        c.new_rewiring = self.scheme.new_rewiring();
        c.sigma = default_sigma(scenario);
        c
    }
}

pub fn default_sigma(scenario: Scenario) -> f64 {
    match scenario {
        Scenario::BugTrap => 50.0,
        Scenario::Maze | Scenario::Office => 30.0,
    }
}

impl fmt::Display for PlannerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.base.slug();
        match self.scheme {
            Scheme::Original => write!(f, "{s}"),
            Scheme::Bidirectional => write!(f, "{s}-1"),
            Scheme::NewRewiring => write!(f, "{s}-2"),
            Scheme::Both => write!(f, "bi-{s}"),
        }
    }
}

impl FromStr for PlannerId {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        planner_matrix()
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| BenchError::UnknownPlanner(s.to_string()))
    }
}

impl Serialize for PlannerId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PlannerId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All twenty rows, scheme-major.
pub fn planner_matrix() -> Vec<PlannerId> {
    Scheme::ALL
        .iter()
        .flat_map(|&scheme| Base::ALL.iter().map(move |&base| PlannerId::new(base, scheme)))
        .collect()
}
