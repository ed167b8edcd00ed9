//! Environment grid, cleaning-pass histories and the cell-wise Poisson dirt map.
//!
//! Each free cell accumulates a history of cleaning passes `(t_i, k_i)`
//! recorded since an epoch `t_0`. The expected dirt level over a horizon
//! `[s, t]` is
//!
//! ```text
//! lambda = (t - s) / sum_i (t_i - t_{i-1}) * sum_i k_i
//! ```
//!
//! where the denominator telescopes to `t_n - t_0`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Coord {
    pub x: usize,
    pub y: usize,
}

impl Coord {
    pub const fn new(x: usize, y: usize) -> Self {
        Coord { x, y }
    }

    pub fn manhattan(self, other: Coord) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl From<(usize, usize)> for Coord {
    fn from((x, y): (usize, usize)) -> Self {
        Coord { x, y }
    }
}

impl From<Coord> for (usize, usize) {
    fn from(c: Coord) -> Self {
        (c.x, c.y)
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Occupancy {
    Free,
    Obstacle,
}

/// Occupancy grid of square cells. `y` grows downwards (row index).
#[derive(Clone, Debug, PartialEq)]
pub struct GridMap {
    width: usize,
    height: usize,
    cells: Vec<Occupancy>,
    cell_size: Option<f64>,
}

impl GridMap {
    pub fn new(width: usize, height: usize, cells: Vec<Occupancy>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Format("grid must be at least 1x1".into()));
        }
        if cells.len() != width * height {
            return Err(Error::Format(format!(
                "grid of {width}x{height} needs {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        Ok(GridMap {
            width,
            height,
            cells,
            cell_size: None,
        })
    }

    pub fn all_free(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![Occupancy::Free; width * height])
    }

    /// Builds a grid of the given size where exactly `free` cells are free.
    pub fn from_free_cells(width: usize, height: usize, free: &[Coord]) -> Result<Self> {
        let mut cells = vec![Occupancy::Obstacle; width * height];
        for c in free {
            if c.x >= width || c.y >= height {
                return Err(Error::Consistency(format!("cell {c} outside {width}x{height} grid")));
            }
            cells[c.y * width + c.x] = Occupancy::Free;
        }
        Self::new(width, height, cells)
    }

    pub fn with_cell_size(mut self, meters: f64) -> Self {
        self.cell_size = Some(meters);
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> Option<f64> {
        self.cell_size
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn index(&self, c: Coord) -> Option<usize> {
        self.contains(c).then(|| c.y * self.width + c.x)
    }

    pub fn occupancy(&self, c: Coord) -> Option<Occupancy> {
        self.index(c).map(|i| self.cells[i])
    }

    pub fn is_free(&self, c: Coord) -> bool {
        self.occupancy(c) == Some(Occupancy::Free)
    }

    /// Free cells in row-major order.
    pub fn free_cells(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.height)
            .flat_map(move |y| (0..self.width).map(move |x| Coord::new(x, y)))
            .filter(move |&c| self.is_free(c))
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|&&o| o == Occupancy::Free).count()
    }

    /// 4-adjacent free neighbours.
    pub fn free_neighbors(&self, c: Coord) -> impl Iterator<Item = Coord> + '_ {
        neighbors4(c)
            .into_iter()
            .flatten()
            .filter(move |&n| self.is_free(n))
    }

    /// Number of 4-connected components of the free space.
    pub fn free_components(&self) -> usize {
        let mut seen = vec![false; self.cells.len()];
        let mut count = 0;
        for start in self.free_cells() {
            let si = start.y * self.width + start.x;
            if seen[si] {
                continue;
            }
            count += 1;
            seen[si] = true;
            let mut stack = vec![start];
            while let Some(c) = stack.pop() {
                for n in self.free_neighbors(c) {
                    let ni = n.y * self.width + n.x;
                    if !seen[ni] {
                        seen[ni] = true;
                        stack.push(n);
                    }
                }
            }
        }
        count
    }

    /// Errors unless the free space is non-empty and 4-connected.
    pub fn require_connected(&self) -> Result<()> {
        match self.free_components() {
            1 => Ok(()),
            components => Err(Error::Topology { components }),
        }
    }
}

/// The four axis neighbours in the order down, up, right, left.
pub(crate) fn neighbors4(c: Coord) -> [Option<Coord>; 4] {
    [
        Some(Coord::new(c.x, c.y + 1)),
        c.y.checked_sub(1).map(|y| Coord::new(c.x, y)),
        Some(Coord::new(c.x + 1, c.y)),
        c.x.checked_sub(1).map(|x| Coord::new(x, c.y)),
    ]
}

fn split_header(text: &str) -> (Option<&str>, Vec<(usize, &str)>) {
    let mut lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .collect();
    while lines.last().is_some_and(|(_, l)| l.trim().is_empty()) {
        lines.pop();
    }
    let header = match lines.first() {
        Some((_, l)) if l.trim_start().starts_with("cellsize") => {
            let h = lines.remove(0).1;
            Some(h)
        }
        _ => None,
    };
    (header, lines)
}

fn parse_cell_size(header: &str) -> Result<f64> {
    let mut parts = header.split_whitespace();
    parts.next();
    let value = parts
        .next()
        .and_then(|v| v.parse::<f64>().ok())
        .filter(|v| v.is_finite() && *v > 0.0);
    match (value, parts.next()) {
        (Some(v), None) => Ok(v),
        _ => Err(Error::Format(format!("bad header line {header:?}, expected \"cellsize <meters>\""))),
    }
}

/// Parses a grid file: one row per line, `.` free, `#` obstacle, with an
/// optional leading `cellsize <meters>` line.
pub fn load_grid(text: &str) -> Result<GridMap> {
    let (header, lines) = split_header(text);
    let cell_size = header.map(parse_cell_size).transpose()?;
    if lines.is_empty() {
        return Err(Error::Format("empty grid".into()));
    }
    let width = lines[0].1.chars().count();
    if width == 0 {
        return Err(Error::Format("empty grid row 1".into()));
    }
    let mut cells = Vec::with_capacity(width * lines.len());
    for (row, (_, line)) in lines.iter().enumerate() {
        if line.chars().count() != width {
            return Err(Error::Format(format!("ragged row {}", row + 1)));
        }
        for (col, ch) in line.chars().enumerate() {
            cells.push(match ch {
                '.' => Occupancy::Free,
                '#' => Occupancy::Obstacle,
                other => {
                    return Err(Error::Parse {
                        row: row + 1,
                        column: col + 1,
                        message: format!("unknown character {other:?}"),
                    })
                }
            });
        }
    }
    let grid = GridMap::new(width, lines.len(), cells)?;
    Ok(match cell_size {
        Some(m) => grid.with_cell_size(m),
        None => grid,
    })
}

/// Inverse of [`load_grid`].
pub fn render_grid(grid: &GridMap) -> String {
    let mut out = String::new();
    if let Some(m) = grid.cell_size {
        out.push_str(&format!("cellsize {m}\n"));
    }
    for y in 0..grid.height {
        for x in 0..grid.width {
            out.push(if grid.is_free(Coord::new(x, y)) { '.' } else { '#' });
        }
        out.push('\n');
    }
    out
}

/// Parses a dirt-level grid: whitespace-separated numbers per row, `#` for
/// obstacles, optional `cellsize` header. Used for hand-transcribed dirt models.
pub fn load_dirt_grid<T: Scalar>(text: &str) -> Result<(GridMap, BTreeMap<Coord, T>)> {
    let (header, lines) = split_header(text);
    let cell_size = header.map(parse_cell_size).transpose()?;
    if lines.is_empty() {
        return Err(Error::Format("empty dirt grid".into()));
    }
    let mut width = None;
    let mut cells = Vec::new();
    let mut levels = BTreeMap::new();
    for (row, (_, line)) in lines.iter().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match width {
            None => width = Some(tokens.len()),
            Some(w) if w != tokens.len() => return Err(Error::Format(format!("ragged row {}", row + 1))),
            _ => {}
        }
        for (col, tok) in tokens.iter().enumerate() {
            if *tok == "#" {
                cells.push(Occupancy::Obstacle);
                continue;
            }
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                row: row + 1,
                column: col + 1,
                message: format!("bad dirt level {tok:?}"),
            })?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parse {
                    row: row + 1,
                    column: col + 1,
                    message: format!("dirt level must be finite and nonnegative, got {tok}"),
                });
            }
            cells.push(Occupancy::Free);
            levels.insert(Coord::new(col, row), T::from_f64_lossy(v));
        }
    }
    let grid = GridMap::new(width.unwrap_or(0), lines.len(), cells)?;
    let grid = match cell_size {
        Some(m) => grid.with_cell_size(m),
        None => grid,
    };
    Ok((grid, levels))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pass<T> {
    pub t: T,
    pub k: T,
}

/// Log of cleaning passes over one cell since `epoch`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellHistory<T> {
    cell: Coord,
    epoch: T,
    passes: Vec<Pass<T>>,
}

impl<T: Scalar> CellHistory<T> {
    pub fn new(cell: Coord, epoch: T) -> Self {
        CellHistory {
            cell,
            epoch,
            passes: Vec::new(),
        }
    }

    pub fn cell(&self) -> Coord {
        self.cell
    }

    pub fn epoch(&self) -> T {
        self.epoch
    }

    pub fn passes(&self) -> &[Pass<T>] {
        &self.passes
    }

    pub fn last_time(&self) -> Option<T> {
        self.passes.last().map(|p| p.t)
    }

    /// Appends a pass. `t` must be strictly after the last pass (or at/after
    /// the epoch for the first one) and `k` nonnegative.
    pub fn record_pass(mut self, t: T, k: T) -> Result<Self> {
        if !(k >= T::zero()) || !k.is_finite() {
            return Err(Error::Domain(format!("dirt reading must be nonnegative, got {k}")));
        }
        if !t.is_finite() {
            return Err(Error::Domain(format!("pass time must be finite, got {t}")));
        }
        match self.last_time() {
            Some(last) if t <= last => {
                return Err(Error::Ordering {
                    t: t.to_f64_lossy(),
                    last: last.to_f64_lossy(),
                })
            }
            None if t < self.epoch => {
                return Err(Error::Ordering {
                    t: t.to_f64_lossy(),
                    last: self.epoch.to_f64_lossy(),
                })
            }
            _ => {}
        }
        self.passes.push(Pass { t, k });
        Ok(self)
    }
}

/// Expected dirt level of one cell over `[s, t]`.
pub fn estimate_cell_rate<T: Scalar>(history: &CellHistory<T>, s: T, t: T) -> Result<T> {
    if s > t {
        return Err(Error::Interval {
            s: s.to_f64_lossy(),
            t: t.to_f64_lossy(),
        });
    }
    let last = match history.last_time() {
        Some(last) if last > history.epoch => last,
        _ => return Err(Error::InsufficientData { cell: history.cell }),
    };
    let observed = last - history.epoch;
    let total: T = history.passes.iter().map(|p| p.k).sum();
    Ok((t - s) / observed * total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Horizon<T> {
    pub s: T,
    pub t: T,
}

impl<T: Scalar> Horizon<T> {
    pub fn new(s: T, t: T) -> Result<Self> {
        if s > t || !s.is_finite() || !t.is_finite() {
            return Err(Error::Interval {
                s: s.to_f64_lossy(),
                t: t.to_f64_lossy(),
            });
        }
        Ok(Horizon { s, t })
    }
}

/// Per-free-cell expected dirt level over a horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct DirtMap<T> {
    grid: GridMap,
    horizon: Horizon<T>,
    lambda: Vec<Option<T>>,
    lambda_total: T,
    insufficient: Vec<Coord>,
}

impl<T: Scalar> DirtMap<T> {
    /// Builds a dirt map from explicit levels. Every free cell needs a level
    /// and no obstacle cell may carry one.
    pub fn from_levels(grid: GridMap, horizon: Horizon<T>, levels: &BTreeMap<Coord, T>) -> Result<Self> {
        let mut lambda = vec![None; grid.width * grid.height];
        for (&c, &v) in levels {
            if !grid.is_free(c) {
                return Err(Error::Consistency(format!("dirt level given for non-free cell {c}")));
            }
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::Domain(format!("dirt level at {c} must be finite and nonnegative, got {v}")));
            }
            lambda[c.y * grid.width + c.x] = Some(v);
        }
        if let Some(missing) = grid.free_cells().find(|c| !levels.contains_key(c)) {
            return Err(Error::Consistency(format!("no dirt level for free cell {missing}")));
        }
        let lambda_total = lambda.iter().flatten().copied().sum();
        Ok(DirtMap {
            grid,
            horizon,
            lambda,
            lambda_total,
            insufficient: Vec::new(),
        })
    }

    /// Uniform level on every free cell, over the horizon `[0, 0]`.
    pub fn uniform(grid: GridMap, level: T) -> Result<Self> {
        let levels: BTreeMap<_, _> = grid.free_cells().map(|c| (c, level)).collect();
        Self::from_levels(grid, Horizon::new(T::zero(), T::zero())?, &levels)
    }

    pub fn grid(&self) -> &GridMap {
        &self.grid
    }

    pub fn horizon(&self) -> Horizon<T> {
        self.horizon
    }

    pub fn lambda(&self, c: Coord) -> Option<T> {
        self.grid.index(c).and_then(|i| self.lambda[i])
    }

    pub fn lambda_total(&self) -> T {
        self.lambda_total
    }

    /// Cells whose history was too short to estimate; their level is 0.
    pub fn insufficient(&self) -> &[Coord] {
        &self.insufficient
    }

    pub fn max_lambda(&self) -> T {
        self.lambda.iter().flatten().fold(T::zero(), |m, &v| m.max(v))
    }

    /// `(cell, level)` over free cells in row-major order.
    pub fn levels(&self) -> impl Iterator<Item = (Coord, T)> + '_ {
        self.grid.free_cells().filter_map(move |c| self.lambda(c).map(|v| (c, v)))
    }

    pub fn to_doc(&self) -> DirtMapDoc {
        DirtMapDoc {
            width: self.grid.width,
            height: self.grid.height,
            cell_size: self.grid.cell_size,
            horizon: Horizon {
                s: self.horizon.s.to_f64_lossy(),
                t: self.horizon.t.to_f64_lossy(),
            },
            lambda_total: self.lambda_total.to_f64_lossy(),
            cells: self
                .levels()
                .map(|(c, v)| DirtCellDoc {
                    x: c.x,
                    y: c.y,
                    lambda: v.to_f64_lossy(),
                })
                .collect(),
            insufficient: self.insufficient.clone(),
        }
    }

    pub fn from_doc(doc: &DirtMapDoc) -> Result<Self> {
        let free: Vec<Coord> = doc.cells.iter().map(|c| Coord::new(c.x, c.y)).collect();
        let mut grid = GridMap::from_free_cells(doc.width, doc.height, &free)?;
        if let Some(m) = doc.cell_size {
            grid = grid.with_cell_size(m);
        }
        let levels: BTreeMap<_, _> = doc
            .cells
            .iter()
            .map(|c| (Coord::new(c.x, c.y), T::from_f64_lossy(c.lambda)))
            .collect();
        let horizon = Horizon::new(T::from_f64_lossy(doc.horizon.s), T::from_f64_lossy(doc.horizon.t))?;
        let mut map = Self::from_levels(grid, horizon, &levels)?;
        map.insufficient = doc.insufficient.clone();
        Ok(map)
    }
}

/// Serialized form of a dirt map (`dirtmap.json`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirtMapDoc {
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_size: Option<f64>,
    pub horizon: Horizon<f64>,
    pub lambda_total: f64,
    pub cells: Vec<DirtCellDoc>,
    pub insufficient: Vec<Coord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirtCellDoc {
    pub x: usize,
    pub y: usize,
    pub lambda: f64,
}

/// Estimates every free cell. Cells with too little data get level 0 and
/// are listed in [`DirtMap::insufficient`].
pub fn build_dirt_map<T: Scalar>(
    grid: &GridMap,
    histories: &BTreeMap<Coord, CellHistory<T>>,
    s: T,
    t: T,
) -> Result<DirtMap<T>> {
    let horizon = Horizon::new(s, t)?;
    if let Some(c) = histories.keys().find(|c| !grid.is_free(**c)) {
        return Err(Error::Consistency(format!("history supplied for non-free cell {c}")));
    }
    let mut levels = BTreeMap::new();
    let mut insufficient = Vec::new();
    for c in grid.free_cells() {
        let level = match histories.get(&c) {
            Some(h) => match estimate_cell_rate(h, s, t) {
                Ok(v) => v,
                Err(Error::InsufficientData { .. }) => {
                    insufficient.push(c);
                    T::zero()
                }
                Err(e) => return Err(e),
            },
            None => {
                insufficient.push(c);
                T::zero()
            }
        };
        levels.insert(c, level);
    }
    let mut map = DirtMap::from_levels(grid.clone(), horizon, &levels)?;
    map.insufficient = insufficient;
    Ok(map)
}

/// Sum of dirt levels over free cells.
pub fn total_dirt<T: Scalar>(dirt_map: &DirtMap<T>) -> T {
    dirt_map.levels().map(|(_, v)| v).sum()
}

#[derive(Debug, Deserialize)]
struct PassRow {
    x: usize,
    y: usize,
    t: f64,
    k: f64,
}

/// Reads a `x,y,t,k` pass log into one history per free cell (empty when a
/// cell never appears). Rows may be in any order.
pub fn ingest_pass_log<T: Scalar>(grid: &GridMap, csv_text: &str, epoch: T) -> Result<BTreeMap<Coord, CellHistory<T>>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("pass log header: {e}")))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "y", "t", "k"] {
        return Err(Error::Format(format!(
            "pass log header must be x,y,t,k, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows: BTreeMap<Coord, Vec<(f64, f64)>> = BTreeMap::new();
    for (i, record) in reader.deserialize::<PassRow>().enumerate() {
        let row = record.map_err(|e| Error::Parse {
            row: i + 2,
            column: e.position().map_or(0, |_| 1),
            message: e.to_string(),
        })?;
        let c = Coord::new(row.x, row.y);
        if !grid.is_free(c) {
            return Err(Error::Consistency(format!("pass log row {} names non-free cell {c}", i + 2)));
        }
        rows.entry(c).or_default().push((row.t, row.k));
    }
    let mut histories = BTreeMap::new();
    for c in grid.free_cells() {
        let mut history = CellHistory::new(c, epoch);
        if let Some(mut passes) = rows.remove(&c) {
            passes.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (t, k) in passes {
                history = history.record_pass(T::from_f64_lossy(t), T::from_f64_lossy(k))?;
            }
        }
        histories.insert(c, history);
    }
    Ok(histories)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history(epoch: f64, passes: &[(f64, f64)]) -> CellHistory<f64> {
        passes
            .iter()
            .fold(CellHistory::new(Coord::new(0, 0), epoch), |h, &(t, k)| h.record_pass(t, k).unwrap())
    }

    #[test]
    fn loads_all_free_grid() {
        let g = load_grid("..\n..").unwrap();
        assert_eq!((g.width(), g.height(), g.free_count()), (2, 2, 4));
    }

    #[test]
    fn loads_obstacle() {
        let g = load_grid(".#\n..").unwrap();
        assert_eq!(g.free_count(), 3);
        assert_eq!(g.occupancy(Coord::new(1, 0)), Some(Occupancy::Obstacle));
    }

    #[test]
    fn rejects_ragged_rows() {
        let err = load_grid(".\n..").unwrap_err();
        assert_eq!(err.to_string(), "ragged row 2");
    }

    #[test]
    fn rejects_empty_and_unknown() {
        assert!(load_grid("").is_err());
        assert!(load_grid("\n\n").is_err());
        match load_grid("..\n.x") {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cellsize_header_round_trips() {
        let text = "cellsize 0.33\n.#.\n...\n";
        let g = load_grid(text).unwrap();
        assert_eq!(g.cell_size(), Some(0.33));
        assert_eq!(render_grid(&g), text);
        assert!(load_grid("cellsize abc\n..").is_err());
    }

    #[test]
    fn record_pass_appends_in_order() {
        let h = CellHistory::new(Coord::new(0, 0), 0.0).record_pass(2.0, 6.0).unwrap();
        assert_eq!(h.passes(), &[Pass { t: 2.0, k: 6.0 }]);
        let h = h.record_pass(5.0, 9.0).unwrap();
        assert_eq!(h.passes(), &[Pass { t: 2.0, k: 6.0 }, Pass { t: 5.0, k: 9.0 }]);
    }

    #[test]
    fn record_pass_rejects_bad_input() {
        let h = history(0.0, &[(2.0, 6.0)]);
        assert!(matches!(h.clone().record_pass(2.0, 1.0), Err(Error::Ordering { .. })));
        assert!(matches!(h.record_pass(3.0, -1.0), Err(Error::Domain(_))));
        assert!(matches!(
            CellHistory::new(Coord::new(0, 0), 5.0).record_pass(4.0, 1.0),
            Err(Error::Ordering { .. })
        ));
        // first pass exactly at the epoch is allowed
        assert!(CellHistory::new(Coord::new(0, 0), 5.0).record_pass(5.0, 1.0).is_ok());
    }

    #[test]
    fn estimator_worked_example() {
        let h = history(0.0, &[(2.0, 6.0), (5.0, 9.0)]);
        // term-by-term denominator: (2 - 0) + (5 - 2) = 5
        let denom: f64 = [0.0, 2.0, 5.0].windows(2).map(|w| w[1] - w[0]).sum();
        assert_eq!(denom, 5.0);
        assert_eq!(estimate_cell_rate(&h, 5.0, 10.0).unwrap(), (10.0 - 5.0) / denom * 15.0);
        assert_eq!(estimate_cell_rate(&h, 5.0, 10.0).unwrap(), 15.0);
    }

    #[test]
    fn estimator_zero_cases() {
        assert_eq!(estimate_cell_rate(&history(0.0, &[(3.0, 7.0)]), 3.0, 3.0).unwrap(), 0.0);
        assert_eq!(estimate_cell_rate(&history(0.0, &[(4.0, 0.0), (8.0, 0.0)]), 8.0, 20.0).unwrap(), 0.0);
    }

    #[test]
    fn estimator_errors() {
        assert!(matches!(
            estimate_cell_rate(&history(0.0, &[]), 0.0, 1.0),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            estimate_cell_rate(&history(2.0, &[(2.0, 5.0)]), 2.0, 3.0),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            estimate_cell_rate(&history(0.0, &[(1.0, 5.0)]), 3.0, 2.0),
            Err(Error::Interval { .. })
        ));
    }

    #[test]
    fn estimator_in_f32() {
        let h = [(2.0f32, 6.0f32), (5.0, 9.0)]
            .iter()
            .fold(CellHistory::new(Coord::new(0, 0), 0.0f32), |h, &(t, k)| h.record_pass(t, k).unwrap());
        assert_eq!(estimate_cell_rate(&h, 5.0f32, 10.0).unwrap(), 15.0f32);
    }

    #[test]
    fn dirt_map_single_cell() {
        let grid = GridMap::all_free(1, 1).unwrap();
        let mut hs = BTreeMap::new();
        hs.insert(Coord::new(0, 0), history(0.0, &[(1.0, 10.0)]));
        let map = build_dirt_map(&grid, &hs, 1.0, 2.0).unwrap();
        assert_eq!(map.lambda(Coord::new(0, 0)), Some(10.0));
        assert_eq!(map.lambda_total(), 10.0);
        assert!(map.insufficient().is_empty());
    }

    #[test]
    fn dirt_map_without_data_flags_cells() {
        let grid = GridMap::all_free(2, 1).unwrap();
        let hs: BTreeMap<_, _> = grid.free_cells().map(|c| (c, CellHistory::new(c, 0.0))).collect();
        let map = build_dirt_map(&grid, &hs, 0.0, 1.0).unwrap();
        assert_eq!(map.lambda_total(), 0.0);
        assert_eq!(map.insufficient(), &[Coord::new(0, 0), Coord::new(1, 0)]);
        // missing entries behave like empty histories
        let map = build_dirt_map::<f64>(&grid, &BTreeMap::new(), 0.0, 1.0).unwrap();
        assert_eq!(map.insufficient().len(), 2);
    }

    #[test]
    fn dirt_map_symmetric_histories() {
        let grid = GridMap::all_free(2, 1).unwrap();
        let hs: BTreeMap<_, _> = grid
            .free_cells()
            .map(|c| {
                let h = CellHistory::new(c, 0.0).record_pass(3.0, 4.0).unwrap();
                (c, h)
            })
            .collect();
        let map = build_dirt_map(&grid, &hs, 3.0, 9.0).unwrap();
        assert_eq!(map.lambda(Coord::new(0, 0)), map.lambda(Coord::new(1, 0)));
    }

    #[test]
    fn dirt_map_rejects_obstacle_history() {
        let grid = load_grid(".#").unwrap();
        let mut hs = BTreeMap::new();
        hs.insert(Coord::new(1, 0), CellHistory::new(Coord::new(1, 0), 0.0));
        assert!(matches!(build_dirt_map(&grid, &hs, 0.0, 1.0), Err(Error::Consistency(_))));
    }

    #[test]
    fn obstacles_carry_no_level() {
        let grid = load_grid(".#.").unwrap();
        let map = DirtMap::uniform(grid, 3.0).unwrap();
        assert_eq!(map.lambda(Coord::new(1, 0)), None);
        assert_eq!(total_dirt(&map), 6.0);
    }

    #[test]
    fn total_dirt_direct_sum() {
        let grid = GridMap::all_free(3, 1).unwrap();
        let levels: BTreeMap<_, _> = [1.0, 2.0, 3.0]
            .iter()
            .enumerate()
            .map(|(x, &v)| (Coord::new(x, 0), v))
            .collect();
        let map = DirtMap::from_levels(grid.clone(), Horizon::new(0.0, 1.0).unwrap(), &levels).unwrap();
        assert_eq!(total_dirt(&map), 6.0);
        assert_eq!(total_dirt(&DirtMap::uniform(grid, 0.0).unwrap()), 0.0);
    }

    #[test]
    fn pass_log_ingestion_sorts_and_rejects_duplicates() {
        let grid = GridMap::all_free(2, 1).unwrap();
        let hs = ingest_pass_log(&grid, "x,y,t,k\n0,0,5,9\n0,0,2,6\n", 0.0).unwrap();
        assert_eq!(hs[&Coord::new(0, 0)].passes().len(), 2);
        assert_eq!(hs[&Coord::new(0, 0)].passes()[0].t, 2.0);
        assert!(hs[&Coord::new(1, 0)].passes().is_empty());
        assert!(matches!(
            ingest_pass_log::<f64>(&grid, "x,y,t,k\n0,0,2,6\n0,0,2,1\n", 0.0),
            Err(Error::Ordering { .. })
        ));
        assert!(ingest_pass_log::<f64>(&grid, "x,y,t\n0,0,2\n", 0.0).is_err());
        assert!(ingest_pass_log::<f64>(&grid, "x,y,t,k\n5,0,2,1\n", 0.0).is_err());
        assert!(ingest_pass_log::<f64>(&grid, "x,y,t,k\n0,0,2,-1\n", 0.0).is_err());
    }

    #[test]
    fn dirt_grid_loader() {
        let (g, levels) = load_dirt_grid::<f64>("1 2 #\n3 4 5\n").unwrap();
        assert_eq!(g.free_count(), 5);
        assert_eq!(levels[&Coord::new(2, 1)], 5.0);
        assert!(load_dirt_grid::<f64>("1 2\n3\n").is_err());
        assert!(load_dirt_grid::<f64>("1 -2\n").is_err());
    }

    #[test]
    fn dirt_map_doc_round_trip() {
        let (g, levels) = load_dirt_grid::<f64>("1 2 #\n3 4.5 5\n").unwrap();
        let map = DirtMap::from_levels(g, Horizon::new(0.0, 2.0).unwrap(), &levels).unwrap();
        let json = serde_json::to_string(&map.to_doc()).unwrap();
        let back = DirtMap::<f64>::from_doc(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, map);
    }
}
