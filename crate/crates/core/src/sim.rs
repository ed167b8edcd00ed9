//! Seeded simulation of a cleaning team against a single-robot sweep.
//!
//! Dirt is realised once per scenario as an independent Poisson draw per cell.
//! Each robot then follows its route: hops cost Manhattan distance over
//! `travel_speed`, every visit costs its dwell time, and battery drain is
//! linear in both plus a fixed overhead per deployed robot. A visit removes
//! all of a cell's dirt when it dwells at least as long as the cell's dirt
//! level calls for, and a proportional share otherwise.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Coord, DirtMap, GridMap};
use crate::route::{annotate_route, cell_distance, dwell_time, path_length, Route, Tour};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Cells per second.
    pub travel_speed: f64,
    /// Battery percent per second of travel.
    pub move_power: f64,
    /// Battery percent per second of cleaning.
    pub clean_power: f64,
    /// Fixed battery percent per deployed robot.
    pub overhead_per_robot: f64,
    pub rng_seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            travel_speed: 1.0,
            move_power: 0.02,
            clean_power: 0.05,
            overhead_per_robot: 1.0,
            rng_seed: 0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("travel_speed", self.travel_speed),
            ("move_power", self.move_power),
            ("clean_power", self.clean_power),
        ];
        for (name, v) in rates {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.overhead_per_robot >= 0.0 && self.overhead_per_robot.is_finite()) {
            return Err(Error::Config(format!(
                "overhead_per_robot must be nonnegative, got {}",
                self.overhead_per_robot
            )));
        }
        Ok(())
    }
}

/// Realised dirt per free cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirtField {
    pub cells: BTreeMap<Coord, f64>,
}

impl DirtField {
    pub fn total(&self) -> f64 {
        self.cells.values().sum()
    }

    pub fn get(&self, c: Coord) -> Option<f64> {
        self.cells.get(&c).copied()
    }
}

/// Draws one Poisson count per free cell with mean equal to its dirt level.
pub fn sample_dirt_field<T: Scalar>(dirt_map: &DirtMap<T>, seed: u64) -> DirtField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = dirt_map
        .levels()
        .map(|(c, lambda)| {
            let mean = lambda.to_f64_lossy();
            let draw = match Poisson::new(mean) {
                Ok(poisson) if mean > 0.0 => poisson.sample(&mut rng),
                _ => 0.0,
            };
            (c, draw)
        })
        .collect();
    DirtField { cells }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotReport {
    pub region_id: usize,
    pub travel_s: f64,
    pub clean_s: f64,
    /// Drain from travel and cleaning, without the fixed overhead.
    pub battery_pct: f64,
    pub overhead_pct: f64,
    pub cells_visited: usize,
}

impl RobotReport {
    pub fn finish_s(&self) -> f64 {
        self.travel_s + self.clean_s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub makespan: f64,
    pub per_robot: Vec<RobotReport>,
    pub total_battery_pct: f64,
    pub residual_dirt: f64,
    /// Dirt left on cells some robot visited.
    pub residual_on_visited: f64,
    pub cells_visited: usize,
}

/// Runs every route to completion over `field`.
pub fn simulate_team<T: Scalar>(routes: &[Route], dirt_map: &DirtMap<T>, field: &DirtField, params: &SimParams) -> Result<SimReport> {
    params.validate()?;
    let mut seen = BTreeSet::new();
    for r in routes {
        for c in r.cells() {
            if !seen.insert(c) {
                return Err(Error::Consistency(format!("cell {c} appears in more than one route visit")));
            }
            if field.get(c).is_none() {
                return Err(Error::Consistency(format!("route cell {c} has no dirt in the field")));
            }
        }
    }

    let mut remaining = field.cells.clone();
    let mut per_robot = Vec::with_capacity(routes.len());
    for route in routes {
        let hops = route
            .visits
            .windows(2)
            .map(|w| cell_distance(w[0].cell(), w[1].cell()))
            .sum::<usize>();
        let travel_s = hops as f64 / params.travel_speed;
        let clean_s = route.total_dwell();
        for v in &route.visits {
            let c = v.cell();
            let lambda = dirt_map
                .lambda(c)
                .ok_or_else(|| Error::Consistency(format!("route cell {c} has no dirt level")))?;
            let required = dwell_time(lambda)?;
            let dirt = remaining.get_mut(&c).expect("checked above");
            if v.dwell_s >= required {
                *dirt = 0.0;
            } else {
                *dirt *= 1.0 - v.dwell_s / required;
            }
        }
        per_robot.push(RobotReport {
            region_id: route.region_id,
            travel_s,
            clean_s,
            battery_pct: travel_s * params.move_power + clean_s * params.clean_power,
            overhead_pct: params.overhead_per_robot,
            cells_visited: route.visits.len(),
        });
    }

    let makespan = per_robot.iter().map(RobotReport::finish_s).fold(0.0, f64::max);
    let total_battery_pct = per_robot.iter().map(|r| r.battery_pct + r.overhead_pct).sum();
    let residual_on_visited = seen.iter().map(|c| remaining[c]).sum();
    Ok(SimReport {
        makespan,
        per_robot,
        total_battery_pct,
        residual_dirt: remaining.values().sum(),
        residual_on_visited,
        cells_visited: seen.len(),
    })
}

/// Column-by-column sweep over every free cell, reversing direction on each
/// successive column.
pub fn boustrophedon_order(grid: &GridMap) -> Vec<Coord> {
    let mut order = Vec::with_capacity(grid.free_count());
    let mut downward = true;
    for x in 0..grid.width() {
        let mut column: Vec<Coord> = (0..grid.height())
            .map(|y| Coord::new(x, y))
            .filter(|&c| grid.is_free(c))
            .collect();
        if column.is_empty() {
            continue;
        }
        if !downward {
            column.reverse();
        }
        downward = !downward;
        order.extend(column);
    }
    order
}

/// One robot sweeping the whole map with the same dwell rule as the team.
pub fn simulate_baseline<T: Scalar>(dirt_map: &DirtMap<T>, field: &DirtField, params: &SimParams) -> Result<SimReport> {
    let grid = dirt_map.grid();
    grid.require_connected()?;
    let order = boustrophedon_order(grid);
    let tour = Tour {
        travel_distance: path_length(&order),
        order,
        branch_capped: false,
    };
    let route = annotate_route(0, &tour, dirt_map)?;
    simulate_team(&[route], dirt_map, field, params)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub makespan_ratio: f64,
    pub battery_ratio: f64,
    /// Team residual minus baseline residual.
    pub residual_difference: f64,
    /// Makespan ratio at most 0.45 and battery ratio within [1.0, 1.25].
    pub within_target_band: bool,
}

pub const MAX_MAKESPAN_RATIO: f64 = 0.45;
pub const BATTERY_RATIO_BAND: (f64, f64) = (1.0, 1.25);

pub fn compare(team: &SimReport, baseline: &SimReport) -> Result<ComparisonReport> {
    if baseline.makespan <= 0.0 {
        return Err(Error::Degenerate("baseline makespan is zero".into()));
    }
    if baseline.total_battery_pct <= 0.0 {
        return Err(Error::Degenerate("baseline battery usage is zero".into()));
    }
    let makespan_ratio = team.makespan / baseline.makespan;
    let battery_ratio = team.total_battery_pct / baseline.total_battery_pct;
    Ok(ComparisonReport {
        makespan_ratio,
        battery_ratio,
        residual_difference: team.residual_dirt - baseline.residual_dirt,
        within_target_band: makespan_ratio <= MAX_MAKESPAN_RATIO
            && (BATTERY_RATIO_BAND.0..=BATTERY_RATIO_BAND.1).contains(&battery_ratio),
    })
}
