//! Dirt-balanced division of the free cells into one connected region per robot.
//!
//! Regions are grown one at a time by a serpentine walk over the free-cell
//! graph. The walk prefers vertical moves (continuing in the current vertical
//! direction, then reversing), turns right and then left only when no vertical
//! move is left, and falls back along its own trail to an earlier cell when the
//! current one is boxed in. A region closes once its dirt sum reaches the
//! target `lambda_s = lambda_total / robots`:
//!
//! * an "over" region keeps the vertex that crossed the target,
//! * an "under" region hands that vertex back to the pool,
//!
//! and the two kinds alternate so the errors cancel. The last region takes
//! whatever is left. Closed regions are cut out of the graph, and a closing
//! state is only accepted when the remaining cells stay connected; when a
//! choice leads to a dead end the search backs up and tries the next option.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{neighbors4, Coord, DirtMap, GridMap};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flag {
    Over,
    Under,
    Exact,
}

impl Flag {
    fn opposite(self) -> Flag {
        match self {
            Flag::Over => Flag::Under,
            Flag::Under => Flag::Over,
            Flag::Exact => Flag::Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region<T> {
    pub id: usize,
    pub flag: Flag,
    pub lambda_actual: T,
    /// Cells in traversal order.
    pub cells: Vec<Coord>,
    /// Vertex handed back to the pool when an "under" region closed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declined: Option<Coord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition<T> {
    pub lambda_s: T,
    pub lambda_total: T,
    pub regions: Vec<Region<T>>,
}

impl<T: Scalar> Partition<T> {
    pub fn region_of(&self, c: Coord) -> Option<usize> {
        self.regions.iter().position(|r| r.cells.contains(&c))
    }

    /// Largest `|lambda_actual - lambda_s|` over all regions.
    pub fn max_deviation(&self) -> T {
        self.regions
            .iter()
            .fold(T::zero(), |m, r| m.max((r.lambda_actual - self.lambda_s).abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartitionConfig {
    /// Cap on vertex placements tried per region, backtracking included.
    pub max_expansions: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            max_expansions: 1_000_000,
        }
    }
}

fn start_rank(c: Coord, degree: usize) -> (usize, usize, usize, usize) {
    // Diff y - x is taken with y pointing up, which for row indices is
    // maximised by the smallest x + y.
    (degree, c.x + c.y, c.y, c.x)
}

/// The vertex of `cells` with fewest neighbours inside `cells`; ties go to
/// the top-left-most cell.
pub fn select_start_vertex(cells: &BTreeSet<Coord>) -> Result<Coord> {
    cells
        .iter()
        .map(|&c| {
            let degree = neighbors4(c).into_iter().flatten().filter(|n| cells.contains(n)).count();
            (start_rank(c, degree), c)
        })
        .min()
        .map(|(_, c)| c)
        .ok_or(Error::Exhausted)
}

const DOWN: bool = true;

/// Unassigned free cells, as a subgraph of the grid.
struct Pool<'a> {
    grid: &'a GridMap,
    member: Vec<bool>,
    count: usize,
}

impl<'a> Pool<'a> {
    fn new(grid: &'a GridMap) -> Self {
        let mut member = vec![false; grid.width() * grid.height()];
        for c in grid.free_cells() {
            member[c.y * grid.width() + c.x] = true;
        }
        Pool {
            grid,
            count: grid.free_count(),
            member,
        }
    }

    fn idx(&self, c: Coord) -> usize {
        c.y * self.grid.width() + c.x
    }

    fn contains(&self, c: Coord) -> bool {
        self.grid.contains(c) && self.member[self.idx(c)]
    }

    fn remove(&mut self, c: Coord) {
        let i = self.idx(c);
        debug_assert!(self.member[i]);
        self.member[i] = false;
        self.count -= 1;
    }

    fn insert(&mut self, c: Coord) {
        let i = self.idx(c);
        debug_assert!(!self.member[i]);
        self.member[i] = true;
        self.count += 1;
    }

    fn neighbors(&self, c: Coord) -> impl Iterator<Item = Coord> + '_ {
        neighbors4(c).into_iter().flatten().filter(move |&n| self.contains(n))
    }

    fn cells(&self) -> impl Iterator<Item = Coord> + '_ {
        self.grid.free_cells().filter(move |&c| self.contains(c))
    }

    /// Component label per cell (usize::MAX outside the pool), component sizes.
    fn components(&self, skip: Option<Coord>) -> (Vec<usize>, Vec<usize>) {
        let mut label = vec![usize::MAX; self.member.len()];
        let mut sizes = Vec::new();
        for start in self.cells() {
            if Some(start) == skip || label[self.idx(start)] != usize::MAX {
                continue;
            }
            let id = sizes.len();
            let mut size = 1;
            label[self.idx(start)] = id;
            let mut stack = vec![start];
            while let Some(c) = stack.pop() {
                for n in self.neighbors(c) {
                    let ni = self.idx(n);
                    if Some(n) != skip && label[ni] == usize::MAX {
                        label[ni] = id;
                        size += 1;
                        stack.push(n);
                    }
                }
            }
            sizes.push(size);
        }
        (label, sizes)
    }

    fn is_connected(&self) -> bool {
        self.components(None).1.len() <= 1
    }

    /// Articulation points of a connected pool.
    fn articulation_points(&self) -> Vec<bool> {
        let n = self.member.len();
        let mut disc = vec![0usize; n];
        let mut low = vec![0usize; n];
        let mut cut = vec![false; n];
        let Some(root) = self.cells().next() else {
            return cut;
        };
        let mut timer = 1;
        let ri = self.idx(root);
        disc[ri] = timer;
        low[ri] = timer;
        let mut root_children = 0;
        // (cell, parent index, neighbour cursor)
        let mut stack: Vec<(Coord, usize, usize)> = vec![(root, usize::MAX, 0)];
        while let Some(&mut (c, parent, ref mut cursor)) = stack.last_mut() {
            let ci = self.idx(c);
            let nbrs = neighbors4(c);
            if *cursor < 4 {
                let k = *cursor;
                *cursor += 1;
                let Some(nb) = nbrs[k].filter(|&nb| self.contains(nb)) else {
                    continue;
                };
                let ni = self.idx(nb);
                if disc[ni] == 0 {
                    timer += 1;
                    disc[ni] = timer;
                    low[ni] = timer;
                    if ci == ri {
                        root_children += 1;
                    }
                    stack.push((nb, ci, 0));
                } else if ni != parent {
                    low[ci] = low[ci].min(disc[ni]);
                }
            } else {
                stack.pop();
                if parent != usize::MAX {
                    low[parent] = low[parent].min(low[ci]);
                    if parent != ri && low[ci] >= disc[parent] {
                        cut[parent] = true;
                    }
                }
            }
        }
        cut[ri] = root_children > 1;
        cut
    }
}

/// Preferred neighbours of `c`: vertical in the current direction, vertical
/// reversed, right, left.
fn preferred_moves(c: Coord, down: bool) -> [Option<(Coord, Option<bool>)>; 4] {
    let [d, u, r, l] = neighbors4(c);
    let (first, second) = if down { ((d, DOWN), (u, !DOWN)) } else { ((u, !DOWN), (d, DOWN)) };
    [
        first.0.map(|n| (n, Some(first.1))),
        second.0.map(|n| (n, Some(second.1))),
        r.map(|n| (n, None)),
        l.map(|n| (n, None)),
    ]
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    cell: Coord,
    vertical: Option<bool>,
}

#[derive(Clone, Debug)]
struct Walk {
    trail: Vec<Coord>,
    down: bool,
}

impl Walk {
    /// Pool cells adjacent to the trail, most recently visited cell first.
    /// Reaching a neighbour of an older cell means walking back over visited
    /// cells, which collects nothing.
    fn frontier(&self, pool: &Pool<'_>) -> Vec<Candidate> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for &c in self.trail.iter().rev() {
            for (n, vertical) in preferred_moves(c, self.down).into_iter().flatten() {
                if pool.contains(n) && seen.insert(n) {
                    out.push(Candidate { cell: n, vertical });
                }
            }
        }
        out
    }

    fn step(&mut self, cand: &Candidate) {
        self.trail.push(cand.cell);
        if let Some(d) = cand.vertical {
            self.down = d;
        }
    }
}

struct Frame<T> {
    candidates: Vec<Candidate>,
    next: usize,
    walk: Walk,
    lambda: T,
    /// Key of the cell set this frame expands.
    key: u128,
    /// Whether part of the subtree was cut short by a cap.
    partial: bool,
}

struct Closed<T> {
    cells: Vec<Coord>,
    lambda: T,
    flag: Flag,
    declined: Option<Coord>,
    walk: Walk,
}

/// Random 128-bit key per grid cell; a region's key is the XOR over its cells.
fn zobrist_keys(len: usize) -> Vec<u128> {
    fn splitmix(state: &mut u64) -> u64 {
        *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let mut state = 0x5151_u64;
    (0..len)
        .map(|_| (u128::from(splitmix(&mut state)) << 64) | u128::from(splitmix(&mut state)))
        .collect()
}

struct Grower<'a, 'b, T> {
    dirt: &'a DirtMap<T>,
    keys: &'b [u128],
    pool: &'b mut Pool<'a>,
    lambda_s: T,
    tol: T,
    want: Flag,
    robots_after: usize,
    budget: usize,
    /// Expansions allowed per start.
    slice: usize,
    expansions: &'b Cell<usize>,
    truncated: &'b Cell<bool>,
}

impl<'a, 'b, T: Scalar> Grower<'a, 'b, T> {
    fn level(&self, c: Coord) -> T {
        self.dirt.lambda(c).unwrap_or_else(T::zero)
    }

    fn fits_pool(&self) -> bool {
        self.pool.count > self.robots_after
    }

    /// Ordered options for the next vertex from the current state.
    fn candidates(&self, walk: &Walk) -> Vec<Candidate> {
        let frontier = walk.frontier(self.pool);
        if !self.fits_pool() || frontier.is_empty() {
            return Vec::new();
        }
        let (label, sizes) = self.pool.components(None);
        let mut scored: Vec<((usize, bool), Candidate)> = if sizes.len() <= 1 {
            let cut = self.pool.articulation_points();
            frontier
                .into_iter()
                .map(|c| ((usize::from(cut[self.pool.idx(c.cell)]) + 1, false), c))
                .collect()
        } else {
            let main = (0..sizes.len()).max_by_key(|&i| (sizes[i], std::cmp::Reverse(i))).unwrap_or(0);
            frontier
                .into_iter()
                .map(|c| {
                    let after = self.pool.components(Some(c.cell)).1.len();
                    ((after, label[self.pool.idx(c.cell)] == main), c)
                })
                .collect()
        };
        scored.sort_by_key(|(score, _)| *score);
        scored.into_iter().map(|(_, c)| c).collect()
    }

    /// Whether the region can no longer close. The check contracts the
    /// region to a single node and looks at every cut vertex `c` of what is
    /// left: a closing region either stays on its own side of `c`, which then
    /// has to hold enough dirt, or takes `c` and with it every component `c`
    /// separates but one, which must still fit under the target. The region
    /// node itself is treated the same way.
    fn doomed(&self, region: &[Coord], lambda: T) -> bool {
        const ROOT: usize = usize::MAX;
        let pool = &*self.pool;
        let n = pool.member.len();
        let under = self.want == Flag::Under;
        let limit = self.lambda_s - self.tol;
        let mut disc = vec![0usize; n];
        let mut low = vec![0usize; n];
        let mut sub_sum = vec![T::zero(); n];
        let mut sub_size = vec![0usize; n];
        let mut touches = vec![false; n];
        // per cut vertex: separated components' total dirt, size, and the
        // heaviest one large enough to be left for the later robots
        let mut sep_sum = vec![T::zero(); n];
        let mut sep_size = vec![0usize; n];
        let mut sep_best: Vec<Option<T>> = vec![None; n];
        let mut roots: Vec<(T, usize)> = Vec::new();
        let mut peak = T::zero();
        let mut timer = 0;
        for &r in region {
            for nb in pool.neighbors(r) {
                touches[pool.idx(nb)] = true;
            }
        }
        for &r in region {
            for start in pool.neighbors(r) {
                let si = pool.idx(start);
                if disc[si] != 0 {
                    continue;
                }
                timer += 1;
                disc[si] = timer;
                low[si] = 0;
                let mut stack: Vec<(Coord, usize, usize)> = vec![(start, ROOT, 0)];
                while let Some(&mut (c, parent, ref mut cursor)) = stack.last_mut() {
                    let ci = pool.idx(c);
                    if *cursor < 4 {
                        let k = *cursor;
                        *cursor += 1;
                        let Some(nb) = neighbors4(c)[k].filter(|&nb| pool.contains(nb)) else {
                            continue;
                        };
                        let ni = pool.idx(nb);
                        if disc[ni] == 0 {
                            timer += 1;
                            disc[ni] = timer;
                            low[ni] = if touches[ni] { 0 } else { timer };
                            stack.push((nb, ci, 0));
                        } else if ni != parent {
                            low[ci] = low[ci].min(disc[ni]);
                        }
                        continue;
                    }
                    stack.pop();
                    let v = self.level(c);
                    peak = peak.max(v);
                    sub_sum[ci] = sub_sum[ci] + v;
                    sub_size[ci] += 1;
                    if parent == ROOT {
                        roots.push((sub_sum[ci], sub_size[ci]));
                        continue;
                    }
                    low[parent] = low[parent].min(low[ci]);
                    sub_sum[parent] = sub_sum[parent] + sub_sum[ci];
                    sub_size[parent] += sub_size[ci];
                    if low[ci] >= disc[parent] {
                        sep_sum[parent] = sep_sum[parent] + sub_sum[ci];
                        sep_size[parent] += sub_size[ci];
                        if sub_size[ci] >= self.robots_after {
                            let best = sep_best[parent].map_or(sub_sum[ci], |b| b.max(sub_sum[ci]));
                            sep_best[parent] = Some(best);
                        }
                    }
                }
            }
        }
        let reach_sum: T = roots.iter().map(|r| r.0).sum();
        let reach_size: usize = roots.iter().map(|r| r.1).sum();
        // taking everything but a kept part of dirt `kept` (on top of `extra`)
        // must not cross the target before the last vertex
        let fits = |extra: T, total: T, kept: T| {
            let taken = lambda + extra + total - kept;
            if under {
                taken < limit
            } else {
                taken - peak < limit
            }
        };
        if reach_size < pool.count {
            // cells the region cannot reach all have to be left over
            return !(pool.count - reach_size >= self.robots_after && fits(T::zero(), reach_sum, T::zero()));
        }
        let kept = roots
            .iter()
            .filter(|r| r.1 >= self.robots_after)
            .map(|r| r.0)
            .fold(None, |m: Option<T>, v| Some(m.map_or(v, |m| m.max(v))));
        if !kept.is_some_and(|k| fits(T::zero(), reach_sum, k)) {
            return true;
        }
        if roots.len() > 1 {
            return false;
        }
        pool.cells().any(|c| {
            let ci = pool.idx(c);
            if sep_size[ci] == 0 {
                return false;
            }
            let v = self.level(c);
            let side_sum = reach_sum - v - sep_sum[ci];
            let side_size = reach_size - 1 - sep_size[ci];
            let stay = if under {
                lambda + side_sum + v >= limit || 1 + sep_size[ci] <= self.robots_after
            } else {
                lambda + side_sum >= limit
            };
            let mut keep = sep_best[ci];
            if side_size >= self.robots_after {
                keep = Some(keep.map_or(side_sum, |k| k.max(side_sum)));
            }
            let total = side_sum + sep_sum[ci];
            let cross = keep.is_some_and(|k| fits(v, total, k));
            !stay && !cross
        })
    }

    /// Outcome of the region after adding the last vertex of `cells`.
    fn try_close(&mut self, cells: &mut Vec<Coord>, lambda: T, walk: &Walk) -> Option<Closed<T>> {
        let crossed = lambda >= self.lambda_s - self.tol;
        let exhausted = self.pool.count == self.robots_after;
        if !crossed && !exhausted {
            return None;
        }
        let exact = (lambda - self.lambda_s).abs() <= self.tol;
        // A closure that breaks the alternation is no closure at all; the
        // search has to find another way.
        let (flag, declined, kept_lambda) = if exact {
            (Flag::Exact, None, lambda)
        } else if self.want == Flag::Over {
            if !crossed {
                return None;
            }
            (Flag::Over, None, lambda)
        } else if !crossed {
            (Flag::Under, None, lambda)
        } else if cells.len() > 1 {
            let last = *cells.last().expect("non-empty region");
            (Flag::Under, Some(last), lambda - self.level(last))
        } else {
            return None;
        };
        if let Some(d) = declined {
            self.pool.insert(d);
            let ok = self.pool.is_connected();
            self.pool.remove(d);
            if !ok {
                return None;
            }
            let mut kept = cells.clone();
            kept.pop();
            let mut walk = walk.clone();
            walk.trail.pop();
            // where the next region should pick up
            walk.trail.push(d);
            return Some(Closed {
                cells: kept,
                lambda: kept_lambda,
                flag,
                declined,
                walk,
            });
        }
        if !self.pool.is_connected() {
            return None;
        }
        Some(Closed {
            cells: cells.clone(),
            lambda: kept_lambda,
            flag,
            declined,
            walk: walk.clone(),
        })
    }

    /// Depth-first search over vertex choices from each start in turn.
    /// Every valid closing state is offered to `accept` (with the pool already
    /// reduced to what the later regions get); a rejection resumes the search.
    fn grow(&mut self, starts: &[Coord], down: bool, accept: &mut dyn FnMut(&mut Pool<'a>, Closed<T>) -> bool) -> bool {
        // cell sets whose every continuation failed, and closing states that
        // later regions could not complete; both only when fully searched
        let mut settled = HashSet::new();
        let mut closures = HashSet::new();
        for &start in starts {
            if !self.pool.contains(start) {
                continue;
            }
            // this start's own expansions, not counting later regions
            let mut own = 0;
            // sets and closing states already reached from this start
            let mut seen = HashSet::new();
            let mut tried = HashSet::new();
            let root = Candidate {
                cell: start,
                vertical: None,
            };
            let mut cells = Vec::new();
            let mut stack: Vec<Frame<T>> = vec![Frame {
                candidates: vec![root],
                next: 0,
                walk: Walk { trail: Vec::new(), down },
                lambda: T::zero(),
                key: 0,
                partial: false,
            }];
            while let Some(frame) = stack.last_mut() {
                let at_root = cells.is_empty();
                let spent = self.expansions.get();
                let capped = own >= self.slice;
                let stop = capped || spent >= self.budget;
                if stop {
                    self.truncated.set(true);
                }
                if frame.next >= frame.candidates.len() || stop {
                    let partial = frame.partial || (stop && frame.next < frame.candidates.len());
                    let key = frame.key;
                    stack.pop();
                    if let Some(parent) = stack.last_mut() {
                        parent.partial |= partial;
                    }
                    if !partial && !at_root {
                        settled.insert(key);
                    }
                    if let Some(c) = cells.pop() {
                        self.pool.insert(c);
                    }
                    continue;
                }
                let cand = frame.candidates[frame.next];
                frame.next += 1;
                let mut walk = frame.walk.clone();
                if at_root {
                    walk.trail.clear();
                    walk.trail.push(cand.cell);
                } else {
                    walk.step(&cand);
                }
                let lambda = frame.lambda + self.level(cand.cell);
                let key = frame.key ^ self.keys[self.pool.idx(cand.cell)];
                self.expansions.set(spent + 1);
                own += 1;
                self.pool.remove(cand.cell);
                cells.push(cand.cell);
                let mut partial = false;
                if let Some(closed) = self.try_close(&mut cells, lambda, &walk) {
                    let declined = closed.declined;
                    let kept = declined.map_or(key, |d| key ^ self.keys[self.pool.idx(d)]);
                    if !closures.contains(&kept) && tried.insert(kept) {
                        if let Some(d) = declined {
                            self.pool.insert(d);
                        }
                        let outer = self.truncated.replace(false);
                        if accept(self.pool, closed) {
                            return true;
                        }
                        partial = self.truncated.get();
                        self.truncated.set(outer || partial);
                        if !partial {
                            closures.insert(kept);
                        }
                        if let Some(d) = declined {
                            self.pool.remove(d);
                        }
                    }
                }
                let crossed = lambda >= self.lambda_s - self.tol || self.pool.count == self.robots_after;
                // the options from here depend only on the set of cells taken
                let candidates = if crossed || settled.contains(&key) || !seen.insert(key) || self.doomed(&cells, lambda) {
                    Vec::new()
                } else {
                    self.candidates(&walk)
                };
                stack.push(Frame {
                    candidates,
                    next: 0,
                    walk,
                    lambda,
                    key,
                    partial,
                });
            }
            debug_assert!(cells.is_empty());
        }
        false
    }
}

/// Start options for the next region: where the previous walk left off, then
/// every pool cell by [`select_start_vertex`] order.
fn start_order(pool: &Pool<'_>, left_off: Option<&Walk>) -> Vec<Coord> {
    let mut order = Vec::new();
    if let Some(walk) = left_off {
        if let Some(&last) = walk.trail.last() {
            if pool.contains(last) {
                order.push(last);
            } else {
                for (n, _) in preferred_moves(last, walk.down).into_iter().flatten() {
                    if pool.contains(n) {
                        order.push(n);
                    }
                }
            }
        }
    }
    let mut ranked: Vec<_> = pool
        .cells()
        .map(|c| (start_rank(c, pool.neighbors(c).count()), c))
        .collect();
    ranked.sort();
    for (_, c) in ranked {
        if !order.contains(&c) {
            order.push(c);
        }
    }
    order
}

/// Divides the free cells of `dirt_map` into `robots` connected regions.
pub fn partition<T: Scalar>(dirt_map: &DirtMap<T>, robots: usize) -> Result<Partition<T>> {
    partition_with(dirt_map, robots, &PartitionConfig::default())
}

pub fn partition_with<T: Scalar>(dirt_map: &DirtMap<T>, robots: usize, config: &PartitionConfig) -> Result<Partition<T>> {
    let grid = dirt_map.grid();
    let cells = grid.free_count();
    if robots == 0 || robots > cells {
        return Err(Error::Infeasible { robots, cells });
    }
    grid.require_connected()?;

    let lambda_total = dirt_map.lambda_total();
    let lambda_s = lambda_total / T::from_usize(robots).expect("robot count fits the scalar type");
    let search = Search {
        dirt: dirt_map,
        robots,
        lambda_s,
        tol: T::epsilon() * T::from_f64_lossy(64.0) * lambda_total.max(T::one()),
        budget: Cell::new(config.max_expansions),
        slice: Cell::new(0),
        truncated: Cell::new(false),
        expansions: Cell::new(0),
        keys: zobrist_keys(grid.width() * grid.height()),
        deepest: Cell::new((0, 0)),
    };
    // Widening rounds: small caps first, so that one hopeless subtree cannot
    // eat the budget before earlier regions get to try something else.
    let mut slice = FIRST_SLICE;
    loop {
        search.slice.set(slice.min(config.max_expansions));
        // the first round only gets a share, leaving room for what follows
        let share = if slice == FIRST_SLICE { config.max_expansions / 16 } else { config.max_expansions };
        search.budget.set(share.max(1));
        search.truncated.set(false);
        let mut pool = Pool::new(grid);
        let mut regions = Vec::with_capacity(robots);
        if search.solve(&mut pool, &mut regions, None, None) {
            return Ok(Partition {
                lambda_s,
                lambda_total,
                regions,
            });
        }
        if !search.truncated.get() {
            break;
        }
        // The ordered search has hit a cap, so a solution, if any, lies off
        // the serpentine's preferred path. Random growth finds those fast.
        if slice == FIRST_SLICE {
            if let Some(regions) = search.sample(SAMPLE_ATTEMPTS) {
                return Ok(Partition {
                    lambda_s,
                    lambda_total,
                    regions,
                });
            }
        }
        if slice >= config.max_expansions || search.expansions.get() >= config.max_expansions {
            break;
        }
        slice *= 4;
    }
    let (region, assigned) = search.deepest.get();
    let reason = if search.expansions.get() >= config.max_expansions {
        format!("backtracking budget of {} expansions exhausted", config.max_expansions)
    } else {
        "no connected region leaves a connected remainder".to_string()
    };
    Err(Error::PartitionFailure {
        region,
        reason,
        assigned,
    })
}

const FIRST_SLICE: usize = 2000;
const SAMPLE_ATTEMPTS: usize = 4096;
const SAMPLE_SEED: u64 = 0x5a3b_1e55;

struct Search<'a, T> {
    dirt: &'a DirtMap<T>,
    robots: usize,
    lambda_s: T,
    tol: T,
    budget: Cell<usize>,
    slice: Cell<usize>,
    /// Whether any search gave up on a cap in the current round.
    truncated: Cell<bool>,
    expansions: Cell<usize>,
    keys: Vec<u128>,
    /// (region id, cells assigned) of the furthest point reached.
    deepest: Cell<(usize, usize)>,
}

impl<'a, T: Scalar> Search<'a, T> {
    /// Builds region `regions.len()` and everything after it. When a later
    /// region cannot be built, the search backs into the earlier ones.
    fn solve(&self, pool: &mut Pool<'a>, regions: &mut Vec<Region<T>>, left_off: Option<&Walk>, last_flag: Option<Flag>) -> bool {
        let id = regions.len();
        let assigned = self.dirt.grid().free_count() - pool.count;
        if (id, assigned) > self.deepest.get() {
            self.deepest.set((id, assigned));
        }
        let robots_after = self.robots - id - 1;
        let starts = start_order(pool, left_off);
        let down = left_off.map_or(DOWN, |w| w.down);
        if robots_after == 0 {
            let (order, lambda) = sweep_rest(self.dirt, pool, starts[0], down);
            regions.push(Region {
                id,
                flag: self.final_flag(lambda),
                lambda_actual: lambda,
                cells: order,
                declined: None,
            });
            return true;
        }
        let mut grower = Grower {
            dirt: self.dirt,
            keys: &self.keys,
            pool,
            lambda_s: self.lambda_s,
            tol: self.tol,
            want: last_flag.map_or(Flag::Over, Flag::opposite),
            robots_after,
            budget: self.budget.get(),
            slice: self.slice.get(),
            expansions: &self.expansions,
            truncated: &self.truncated,
        };
        grower.grow(&starts, down, &mut |pool, closed| {
            let flag = if closed.flag == Flag::Exact { last_flag } else { Some(closed.flag) };
            regions.push(Region {
                id,
                flag: closed.flag,
                lambda_actual: closed.lambda,
                cells: closed.cells,
                declined: closed.declined,
            });
            if self.solve(pool, regions, Some(&closed.walk), flag) {
                return true;
            }
            regions.pop();
            false
        })
    }
}

impl<'a, T: Scalar> Search<'a, T> {
    /// Seeded random growth: each region grows from a random pool cell by
    /// random frontier picks that keep the pool connected, and closes under
    /// the same rules as the ordered search. Cell order is the growth order.
    fn sample(&self, attempts: usize) -> Option<Vec<Region<T>>> {
        let grid = self.dirt.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
        let level = |c: Coord| self.dirt.lambda(c).unwrap_or_else(T::zero);
        'attempt: for _ in 0..attempts {
            let mut pool = Pool::new(grid);
            let mut regions = Vec::with_capacity(self.robots);
            let mut want = Flag::Over;
            for id in 0..self.robots - 1 {
                let robots_after = self.robots - id - 1;
                let free: Vec<Coord> = pool.cells().collect();
                let start = free[rng.random_range(0..free.len())];
                pool.remove(start);
                if !pool.is_connected() {
                    continue 'attempt;
                }
                let mut cells = vec![start];
                let mut lambda = level(start);
                let mut frontier: Vec<Coord> = Vec::new();
                let mut added = Some(start);
                let closed = loop {
                    for n in added.take().map(neighbors4).into_iter().flatten().flatten() {
                        if pool.contains(n) && !frontier.contains(&n) {
                            frontier.push(n);
                        }
                    }
                    let crossed = lambda >= self.lambda_s - self.tol;
                    if (lambda - self.lambda_s).abs() <= self.tol {
                        break Some((Flag::Exact, None));
                    }
                    if crossed || pool.count == robots_after {
                        break match (want, crossed) {
                            (Flag::Over, true) => Some((Flag::Over, None)),
                            (Flag::Under, false) => Some((Flag::Under, None)),
                            _ => None,
                        };
                    }
                    if frontier.is_empty() {
                        break None;
                    }
                    let c = frontier.swap_remove(rng.random_range(0..frontier.len()));
                    let l = lambda + level(c);
                    let exact = (l - self.lambda_s).abs() <= self.tol;
                    if want == Flag::Under && !exact && l >= self.lambda_s - self.tol {
                        // declining keeps the pool as it is, so it stays connected
                        break Some((Flag::Under, Some(c)));
                    }
                    pool.remove(c);
                    if !pool.is_connected() {
                        pool.insert(c);
                        continue;
                    }
                    cells.push(c);
                    lambda = l;
                    added = Some(c);
                };
                let Some((flag, declined)) = closed else {
                    continue 'attempt;
                };
                if flag != Flag::Exact {
                    want = flag.opposite();
                }
                regions.push(Region {
                    id,
                    flag,
                    lambda_actual: lambda,
                    cells,
                    declined,
                });
            }
            let Some(start) = pool.cells().next() else {
                continue;
            };
            let (order, lambda) = sweep_rest(self.dirt, &mut pool, start, DOWN);
            regions.push(Region {
                id: self.robots - 1,
                flag: self.final_flag(lambda),
                lambda_actual: lambda,
                cells: order,
                declined: None,
            });
            return Some(regions);
        }
        None
    }

    fn final_flag(&self, lambda: T) -> Flag {
        if (lambda - self.lambda_s).abs() <= self.tol {
            Flag::Exact
        } else if lambda > self.lambda_s {
            Flag::Over
        } else {
            Flag::Under
        }
    }
}

/// Walks every remaining pool cell (the last region), returning visit order
/// and dirt sum.
fn sweep_rest<T: Scalar>(dirt_map: &DirtMap<T>, pool: &mut Pool<'_>, start: Coord, down: bool) -> (Vec<Coord>, T) {
    let mut walk = Walk { trail: vec![start], down };
    let mut order = vec![start];
    let mut lambda = dirt_map.lambda(start).unwrap_or_else(T::zero);
    pool.remove(start);
    loop {
        let Some(cand) = walk.frontier(pool).into_iter().next() else {
            break;
        };
        walk.step(&cand);
        pool.remove(cand.cell);
        order.push(cand.cell);
        lambda = lambda + dirt_map.lambda(cand.cell).unwrap_or_else(T::zero);
    }
    (order, lambda)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub offending: Vec<Coord>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &str, offending: Vec<Coord>, detail: String) -> Check {
    Check {
        name: name.into(),
        passed: offending.is_empty() && detail.is_empty(),
        offending,
        detail,
    }
}

fn is_connected_set(cells: &[Coord]) -> bool {
    let set: BTreeSet<Coord> = cells.iter().copied().collect();
    let Some(&first) = set.iter().next() else {
        return false;
    };
    let mut seen = BTreeSet::from([first]);
    let mut stack = vec![first];
    while let Some(c) = stack.pop() {
        for n in neighbors4(c).into_iter().flatten() {
            if set.contains(&n) && seen.insert(n) {
                stack.push(n);
            }
        }
    }
    seen.len() == set.len()
}

/// Checks coverage, disjointness, 4-connectivity, dirt conservation, flag
/// alternation and the one-cell balance bound. Failures are reported, never
/// raised.
pub fn validate_partition<T: Scalar>(partition: &Partition<T>, dirt_map: &DirtMap<T>) -> ValidationReport {
    let grid = dirt_map.grid();
    let mut owner: BTreeMap<Coord, usize> = BTreeMap::new();
    let mut duplicated = BTreeSet::new();
    let mut stray = Vec::new();
    for r in &partition.regions {
        for &c in &r.cells {
            if !grid.is_free(c) {
                stray.push(c);
            }
            if owner.insert(c, r.id).is_some() {
                duplicated.insert(c);
            }
        }
    }
    let mut uncovered: Vec<Coord> = grid.free_cells().filter(|c| !owner.contains_key(c)).collect();
    uncovered.extend(stray);
    let mut checks = vec![
        check("coverage", uncovered, String::new()),
        check("disjointness", duplicated.into_iter().collect(), String::new()),
    ];

    let disconnected: Vec<usize> = partition
        .regions
        .iter()
        .filter(|r| !is_connected_set(&r.cells))
        .map(|r| r.id)
        .collect();
    let offending = partition
        .regions
        .iter()
        .filter(|r| disconnected.contains(&r.id))
        .flat_map(|r| r.cells.iter().copied())
        .collect();
    checks.push(check(
        "connectivity",
        offending,
        if disconnected.is_empty() {
            String::new()
        } else {
            format!("regions {disconnected:?} are not 4-connected")
        },
    ));

    let tol = T::from_f64_lossy(1e-9) * partition.lambda_total.abs().max(T::one());
    let mut detail = Vec::new();
    let sum: T = partition.regions.iter().map(|r| r.lambda_actual).sum();
    if (sum - partition.lambda_total).abs() > tol {
        detail.push(format!("region sums {sum} != lambda_total {}", partition.lambda_total));
    }
    if (dirt_map.lambda_total() - partition.lambda_total).abs() > tol {
        detail.push(format!(
            "lambda_total {} != map total {}",
            partition.lambda_total,
            dirt_map.lambda_total()
        ));
    }
    for r in &partition.regions {
        let cells: T = r.cells.iter().filter_map(|&c| dirt_map.lambda(c)).sum();
        if (cells - r.lambda_actual).abs() > tol {
            detail.push(format!("region {} cells sum to {cells}, recorded {}", r.id, r.lambda_actual));
        }
    }
    checks.push(check("conservation", Vec::new(), detail.join("; ")));

    // the last region absorbs the remainder, so only the closed ones alternate
    let closed = &partition.regions[..partition.regions.len().saturating_sub(1)];
    let flags: Vec<Flag> = closed.iter().map(|r| r.flag).filter(|&f| f != Flag::Exact).collect();
    let repeated = flags.windows(2).any(|w| w[0] == w[1]);
    checks.push(check(
        "alternation",
        Vec::new(),
        if repeated { format!("consecutive flags repeat: {flags:?}") } else { String::new() },
    ));

    let mut detail = Vec::new();
    for r in closed {
        let s = partition.lambda_s;
        match r.flag {
            Flag::Over => {
                let last = r.cells.last().and_then(|&c| dirt_map.lambda(c)).unwrap_or_else(T::zero);
                if !(r.lambda_actual - s < last + tol) {
                    detail.push(format!("region {} overshoots by more than its last cell", r.id));
                }
            }
            Flag::Under => {
                let bound = r.declined.and_then(|c| dirt_map.lambda(c));
                if let Some(bound) = bound {
                    if s - r.lambda_actual > bound + tol {
                        detail.push(format!("region {} undershoots by more than the declined cell", r.id));
                    }
                }
            }
            Flag::Exact => {}
        }
    }
    checks.push(check("balance", Vec::new(), detail.join("; ")));

    ValidationReport { checks }
}
