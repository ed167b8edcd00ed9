#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;

use dirtplan::grid::{load_dirt_grid, DirtMap, Horizon};
use dirtplan::{Coord, GridMap};
use rand::Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn three_robot_model() -> DirtMap<f64> {
    let text = std::fs::read_to_string(fixture_path("three_robot_model.txt")).unwrap();
    let (grid, levels) = load_dirt_grid(&text).unwrap();
    DirtMap::from_levels(grid, Horizon::new(0.0, 1.0).unwrap(), &levels).unwrap()
}

fn neighbours(c: Coord) -> impl Iterator<Item = Coord> {
    let (x, y) = (c.x as i64, c.y as i64);
    [(x, y + 1), (x, y - 1), (x + 1, y), (x - 1, y)]
        .into_iter()
        .filter(|&(a, b)| a >= 0 && b >= 0)
        .map(|(a, b)| Coord::new(a as usize, b as usize))
}

/// Largest 4-connected component of `cells`.
pub fn largest_component(cells: &BTreeSet<Coord>) -> BTreeSet<Coord> {
    let mut seen = BTreeSet::new();
    let mut best = BTreeSet::new();
    for &start in cells {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some(c) = queue.pop_front() {
            for n in neighbours(c) {
                if cells.contains(&n) && seen.insert(n) {
                    comp.insert(n);
                    queue.push_back(n);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best
}

/// A connected free space on a grid of at most `max_side` squared cells.
pub fn random_connected_grid(rng: &mut impl Rng, max_side: usize, min_free: usize) -> GridMap {
    loop {
        let w = rng.random_range(1..=max_side);
        let h = rng.random_range(1..=max_side);
        let density = rng.random_range(0.0..0.4);
        let cells: BTreeSet<Coord> = (0..h)
            .flat_map(|y| (0..w).map(move |x| Coord::new(x, y)))
            .filter(|_| !rng.random_bool(density))
            .collect();
        let free: Vec<Coord> = largest_component(&cells).into_iter().collect();
        if free.len() >= min_free {
            return GridMap::from_free_cells(w, h, &free).unwrap();
        }
    }
}

/// Random dirt on every free cell: integers on even draws, reals otherwise.
pub fn random_dirt(rng: &mut impl Rng, grid: GridMap) -> DirtMap<f64> {
    let integral = rng.random_bool(0.5);
    let levels: BTreeMap<Coord, f64> = grid
        .free_cells()
        .map(|c| {
            let v = if integral {
                rng.random_range(0..=77) as f64
            } else {
                rng.random_range(0.0..=77.0)
            };
            (c, v)
        })
        .collect();
    DirtMap::from_levels(grid, Horizon::new(0.0, 1.0).unwrap(), &levels).unwrap()
}

/// A connected blob of `n` cells grown at random inside a small box.
pub fn random_region(rng: &mut impl Rng, n: usize) -> Vec<Coord> {
    let origin = Coord::new(rng.random_range(0..4), rng.random_range(0..4));
    let mut cells = BTreeSet::from([origin]);
    while cells.len() < n {
        let pick = *cells.iter().nth(rng.random_range(0..cells.len())).unwrap();
        let options: Vec<Coord> = neighbours(pick).filter(|c| c.x < 8 && c.y < 8).collect();
        cells.insert(options[rng.random_range(0..options.len())]);
    }
    cells.into_iter().collect()
}

fn path_len(order: &[Coord]) -> usize {
    order.windows(2).map(|w| w[0].manhattan(w[1])).sum()
}

/// Shortest Hamiltonian path length over every permutation.
pub fn brute_force_path(cells: &[Coord]) -> usize {
    fn rec(rest: &mut Vec<Coord>, path: &mut Vec<Coord>, best: &mut usize) {
        if rest.is_empty() {
            *best = (*best).min(path_len(path));
            return;
        }
        for i in 0..rest.len() {
            let c = rest.remove(i);
            path.push(c);
            rec(rest, path, best);
            path.pop();
            rest.insert(i, c);
        }
    }
    let mut best = usize::MAX;
    rec(&mut cells.to_vec(), &mut Vec::new(), &mut best);
    if cells.is_empty() {
        0
    } else {
        best
    }
}
