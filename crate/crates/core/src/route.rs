//! Per-region visit order and cleaning dwell times.
//!
//! The order comes from a branching nearest-neighbour search: from a start
//! cell, repeatedly move to the closest unvisited cell, forking whenever
//! several cells are equally close. Every start is tried and the shortest
//! completed sequence wins, ties going to the lexicographically smallest
//! sequence. Forking is capped; past the cap only the first tied cell is
//! followed and the route is marked `branch_capped`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Coord, DirtMap};
use crate::scalar::Scalar;

/// Manhattan distance in cell units.
pub fn cell_distance(a: Coord, b: Coord) -> usize {
    a.manhattan(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OnOverflow {
    /// Keep going with the first tied cell only.
    #[default]
    Degrade,
    Fail,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RouteConfig {
    /// Extra branches one start may spawn on distance ties.
    pub max_branches: usize,
    pub on_overflow: OnOverflow,
}

impl Default for RouteConfig {
    fn default() -> Self {
        RouteConfig {
            max_branches: 10_000,
            on_overflow: OnOverflow::Degrade,
        }
    }
}

/// A visit order without dwell times.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tour {
    pub order: Vec<Coord>,
    pub travel_distance: usize,
    pub branch_capped: bool,
}

pub fn path_length(order: &[Coord]) -> usize {
    order.windows(2).map(|w| cell_distance(w[0], w[1])).sum()
}

struct Search<'a> {
    cities: &'a [Coord],
    /// For each city, the other cities sorted by (distance, coord).
    by_distance: Vec<Vec<(usize, usize)>>,
    config: RouteConfig,
    best: Option<(usize, Vec<usize>)>,
    spawned: usize,
    capped: bool,
    ever_capped: bool,
    overflowed: bool,
}

impl<'a> Search<'a> {
    fn new(cities: &'a [Coord], config: RouteConfig) -> Self {
        let by_distance = (0..cities.len())
            .map(|i| {
                let mut others: Vec<(usize, usize)> = (0..cities.len())
                    .filter(|&j| j != i)
                    .map(|j| (cell_distance(cities[i], cities[j]), j))
                    .collect();
                others.sort_by_key(|&(d, j)| (d, cities[j]));
                others
            })
            .collect();
        Search {
            cities,
            by_distance,
            config,
            best: None,
            spawned: 0,
            capped: false,
            ever_capped: false,
            overflowed: false,
        }
    }

    fn pruned(&self, bound: usize, path: &[usize]) -> bool {
        let Some((best, seq)) = &self.best else {
            return false;
        };
        if bound != *best {
            return bound > *best;
        }
        let mine = path.iter().map(|&i| self.cities[i]);
        let theirs = seq[..path.len()].iter().map(|&i| self.cities[i]);
        mine.gt(theirs)
    }

    fn run_from(&mut self, start: usize) {
        self.spawned = 0;
        self.capped = false;
        let mut visited = vec![false; self.cities.len()];
        visited[start] = true;
        let mut path = vec![start];
        self.extend(&mut path, &mut visited, 0);
    }

    fn extend(&mut self, path: &mut Vec<usize>, visited: &mut [bool], dist: usize) {
        if self.overflowed {
            return;
        }
        let n = self.cities.len();
        if path.len() == n {
            let better = match &self.best {
                None => true,
                Some((d, seq)) => {
                    dist < *d
                        || (dist == *d
                            && path.iter().map(|&i| self.cities[i]).lt(seq.iter().map(|&i| self.cities[i])))
                }
            };
            if better {
                self.best = Some((dist, path.clone()));
            }
            return;
        }
        // every remaining hop covers at least one cell
        if self.pruned(dist + (n - path.len()), path) {
            return;
        }
        let last = *path.last().expect("path starts non-empty");
        let mut ties = Vec::new();
        let mut nearest = None;
        for &(d, j) in &self.by_distance[last] {
            if visited[j] {
                continue;
            }
            match nearest {
                None => nearest = Some(d),
                Some(m) if d > m => break,
                _ => {}
            }
            ties.push(j);
        }
        let step = nearest.expect("unvisited cities remain");
        if ties.len() > 1 {
            if self.capped || self.spawned + ties.len() - 1 > self.config.max_branches {
                if self.config.on_overflow == OnOverflow::Fail {
                    self.overflowed = true;
                    return;
                }
                self.capped = true;
                self.ever_capped = true;
                ties.truncate(1);
            } else {
                self.spawned += ties.len() - 1;
            }
        }
        for j in ties {
            visited[j] = true;
            path.push(j);
            self.extend(path, visited, dist + step);
            path.pop();
            visited[j] = false;
        }
    }

    fn finish(self) -> Result<Tour> {
        if self.overflowed {
            return Err(Error::BranchingOverflow {
                cap: self.config.max_branches,
            });
        }
        let (travel_distance, seq) = self.best.expect("at least one start searched");
        Ok(Tour {
            order: seq.into_iter().map(|i| self.cities[i]).collect(),
            travel_distance,
            branch_capped: self.ever_capped,
        })
    }
}

fn sorted_cities(cells: &[Coord]) -> Result<Vec<Coord>> {
    let mut cities = cells.to_vec();
    cities.sort();
    cities.dedup();
    if cities.is_empty() {
        return Err(Error::Domain("cannot route an empty region".into()));
    }
    Ok(cities)
}

/// Best branching nearest-neighbour tour starting at `start`.
pub fn plan_route_from(cells: &[Coord], start: Coord, config: &RouteConfig) -> Result<Tour> {
    let cities = sorted_cities(cells)?;
    let s = cities
        .binary_search(&start)
        .map_err(|_| Error::Consistency(format!("start {start} is not in the region")))?;
    let mut search = Search::new(&cities, *config);
    search.run_from(s);
    search.finish()
}

/// Best tour over all starts.
pub fn plan_route(cells: &[Coord], config: &RouteConfig) -> Result<Tour> {
    let cities = sorted_cities(cells)?;
    let mut search = Search::new(&cities, *config);
    for s in 0..cities.len() {
        search.run_from(s);
    }
    search.finish()
}

/// Cleaning time for a cell with dirt level `lambda`, bucketed on its
/// integer part; anything above 77 gets the top bucket.
pub fn dwell_time<T: Scalar>(lambda: T) -> Result<f64> {
    let v = lambda.to_f64_lossy();
    if !(v >= 0.0) {
        return Err(Error::Domain(format!("dirt level must be nonnegative, got {lambda}")));
    }
    Ok(match v.floor() as u64 {
        0..=12 => 0.0,
        13..=26 => 1.0,
        27..=39 => 1.5,
        40..=51 => 2.0,
        52..=64 => 2.5,
        _ => 3.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub x: usize,
    pub y: usize,
    pub dwell_s: f64,
}

impl Visit {
    pub fn cell(&self) -> Coord {
        Coord::new(self.x, self.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub region_id: usize,
    pub start: Coord,
    pub visits: Vec<Visit>,
    pub travel_distance: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub branch_capped: bool,
}

impl Route {
    pub fn end(&self) -> Coord {
        self.visits.last().map_or(self.start, Visit::cell)
    }

    pub fn cells(&self) -> impl Iterator<Item = Coord> + '_ {
        self.visits.iter().map(Visit::cell)
    }

    pub fn total_dwell(&self) -> f64 {
        self.visits.iter().map(|v| v.dwell_s).sum()
    }
}

/// Attaches dwell times from the dirt map to a visit order.
pub fn annotate_route<T: Scalar>(region_id: usize, tour: &Tour, dirt_map: &DirtMap<T>) -> Result<Route> {
    let visits = tour
        .order
        .iter()
        .map(|&c| {
            let lambda = dirt_map
                .lambda(c)
                .ok_or_else(|| Error::Consistency(format!("route cell {c} has no dirt level")))?;
            Ok(Visit {
                x: c.x,
                y: c.y,
                dwell_s: dwell_time(lambda)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let start = tour
        .order
        .first()
        .copied()
        .ok_or_else(|| Error::Domain("empty route".into()))?;
    Ok(Route {
        region_id,
        start,
        visits,
        travel_distance: path_length(&tour.order),
        branch_capped: tour.branch_capped,
    })
}
