//! PGM and ASCII renderings of dirt maps, dwell times, partitions and routes.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::grid::{Coord, DirtMap};
use crate::partition::Partition;
use crate::route::{dwell_time, Route};
use crate::scalar::Scalar;

/// Top of the dwell-time table, used as the fixed grey scale.
pub const FIXED_SCALE_MAX: f64 = 77.0;

const SHADES: [char; 9] = [' ', '.', ':', '-', '=', '+', '*', '%', '@'];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rendering {
    pub pgm: String,
    pub ascii: String,
}

fn pgm(width: usize, height: usize, pixel: impl Fn(Coord) -> u8) -> String {
    let mut out = format!("P2\n{width} {height}\n255\n");
    for y in 0..height {
        let row: Vec<String> = (0..width).map(|x| pixel(Coord::new(x, y)).to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn ascii(width: usize, height: usize, glyph: impl Fn(Coord) -> char) -> String {
    let mut out = String::with_capacity((width + 1) * height);
    for y in 0..height {
        out.extend((0..width).map(|x| glyph(Coord::new(x, y))));
        out.push('\n');
    }
    out
}

/// Grey level for `value` on `[0, max]`: white when clean, black at `max`.
fn grey(value: f64, max: f64) -> u8 {
    let ratio = (value / max).clamp(0.0, 1.0);
    255 - (255.0 * ratio).round() as u8
}

/// Dirt map as greyscale (white clean, dark dirty, obstacles black) and as
/// a character ramp with `#` for obstacles. With `fixed_scale` the scale
/// runs to 77 instead of the map's own maximum.
pub fn render_dirt_map<T: Scalar>(dirt_map: &DirtMap<T>, fixed_scale: bool) -> Rendering {
    let grid = dirt_map.grid();
    let max = if fixed_scale {
        FIXED_SCALE_MAX
    } else {
        let m = dirt_map.max_lambda().to_f64_lossy();
        if m > 0.0 {
            m
        } else {
            1.0
        }
    };
    let level = |c: Coord| dirt_map.lambda(c).map(Scalar::to_f64_lossy);
    Rendering {
        pgm: pgm(grid.width(), grid.height(), |c| level(c).map_or(0, |v| grey(v, max))),
        ascii: ascii(grid.width(), grid.height(), |c| match level(c) {
            None => '#',
            Some(v) => {
                let ratio = (v / max).clamp(0.0, 1.0);
                SHADES[(ratio * (SHADES.len() - 1) as f64).round() as usize]
            }
        }),
    }
}

/// Dwell time per cell; ASCII uses codes `0`..`5` for 0, 1, 1.5, 2, 2.5
/// and 3 seconds.
pub fn render_time_map<T: Scalar>(dirt_map: &DirtMap<T>) -> Result<Rendering> {
    let grid = dirt_map.grid();
    let mut dwell = BTreeMap::new();
    for (c, v) in dirt_map.levels() {
        dwell.insert(c, dwell_time(v)?);
    }
    let code = |s: f64| match s {
        s if s == 0.0 => '0',
        s if s <= 1.0 => '1',
        s if s <= 1.5 => '2',
        s if s <= 2.0 => '3',
        s if s <= 2.5 => '4',
        _ => '5',
    };
    Ok(Rendering {
        pgm: pgm(grid.width(), grid.height(), |c| dwell.get(&c).map_or(0, |&s| grey(s, 3.0))),
        ascii: ascii(grid.width(), grid.height(), |c| dwell.get(&c).map_or('#', |&s| code(s))),
    })
}

fn region_letter(id: usize) -> char {
    const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
    LETTERS.get(id).map_or('?', |&b| b as char)
}

fn region_map<T: Scalar>(partition: &Partition<T>) -> BTreeMap<Coord, usize> {
    partition
        .regions
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.cells.iter().map(move |&c| (c, i)))
        .collect()
}

/// Region letters (`a`, `b`, ...) with `#` for obstacles.
pub fn render_partition<T: Scalar>(partition: &Partition<T>, dirt_map: &DirtMap<T>) -> String {
    let grid = dirt_map.grid();
    let owner = region_map(partition);
    ascii(grid.width(), grid.height(), |c| match owner.get(&c) {
        Some(&i) => region_letter(i),
        None if grid.is_free(c) => '?',
        None => '#',
    })
}

/// Region letters overlaid with `S` at each route's start and `E` at its end.
pub fn render_partition_routes<T: Scalar>(partition: &Partition<T>, routes: &[Route], dirt_map: &DirtMap<T>) -> Result<String> {
    let owner = region_map(partition);
    let mut marks = BTreeMap::new();
    for route in routes {
        let region = partition
            .regions
            .iter()
            .position(|r| r.id == route.region_id)
            .ok_or_else(|| Error::Consistency(format!("route for unknown region {}", route.region_id)))?;
        if let Some(c) = route.cells().find(|c| owner.get(c) != Some(&region)) {
            return Err(Error::Consistency(format!(
                "route {} visits {c} outside its region",
                route.region_id
            )));
        }
        marks.insert(route.end(), 'E');
        marks.insert(route.start, 'S');
    }
    let letters = render_partition(partition, dirt_map);
    let width = dirt_map.grid().width();
    let mut out = String::with_capacity(letters.len());
    for (y, line) in letters.lines().enumerate() {
        for (x, ch) in line.chars().enumerate() {
            out.push(marks.get(&Coord::new(x, y)).copied().unwrap_or(ch));
        }
        debug_assert_eq!(line.chars().count(), width);
        out.push('\n');
    }
    Ok(out)
}

/// One line per region: id, flag, dirt sum and size.
pub fn partition_summary<T: Scalar>(partition: &Partition<T>) -> String {
    let mut out = format!(
        "lambda_total {} lambda_s {}\n",
        partition.lambda_total, partition.lambda_s
    );
    for r in &partition.regions {
        let _ = writeln!(
            out,
            "{} {:?} lambda_actual={} cells={}",
            region_letter(r.id),
            r.flag,
            r.lambda_actual,
            r.cells.len()
        );
    }
    out
}
