//! Assignment search over statement rows.
//!
//! A problem is a set of rows, each of which takes one of a few states. A
//! state adds the row's values into zero or more blocks (two-way: one block,
//! "included"; three-way: "top" and "bottom"). A solution is an assignment
//! whose block sums hit the target in every period within tolerance.
//!
//! Both search routes are exact: the pruned depth-first walk only cuts
//! branches whose reachable range provably misses the target, and the
//! meet-in-the-middle route hashes quantized half sums but looks up every
//! grid cell the tolerance window touches. Every candidate is re-checked
//! with exact summation before it is accepted.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use super::{Algorithm, Norm, SolutionOrder, SolverOptions};
use crate::error::{Error, Result};
use crate::numeric::exact_sum;

pub(crate) const TWO_WAY_STATES: &[u8] = &[0b00, 0b01];
pub(crate) const THREE_WAY_STATES: &[u8] = &[0b00, 0b01, 0b10];
pub(crate) const OVERLAP_STATES: &[u8] = &[0b00, 0b01, 0b10, 0b11];

/// log2 of the largest assignment space walked exhaustively under `Auto`.
const EXHAUSTIVE_LOG2: f64 = 24.0;
/// log2 of the largest space accepted when exhaustive search is forced.
const FORCED_EXHAUSTIVE_LOG2: f64 = 40.0;
/// log2 of the largest half table stored by meet-in-the-middle.
const HALF_TABLE_LOG2: f64 = 22.0;
/// Below this many assignments the walk stays on the calling thread.
const PARALLEL_LOG2: f64 = 14.0;
const PREFIX_TASKS: usize = 256;
pub(crate) const NO_GROUP: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Candidate {
    /// Rows counted twice (overlap search only).
    pub both: u32,
    /// Non-excluded rows; zero under [`SolutionOrder::StatementOrder`].
    pub active: u32,
    /// Heading groups holding both top and bottom rows; zero under
    /// [`SolutionOrder::StatementOrder`].
    pub mixed: u32,
    /// (problem row, state) for every non-excluded row, in row order.
    pub picks: Vec<(u32, u8)>,
}

#[derive(Debug, Default)]
struct Collector {
    cap: usize,
    best: BTreeSet<Candidate>,
    found: u64,
    nodes: u64,
}

impl Collector {
    fn new(cap: usize) -> Self {
        Collector {
            cap,
            ..Default::default()
        }
    }

    fn offer(&mut self, c: Candidate) {
        self.found += 1;
        if self.best.len() < self.cap {
            self.best.insert(c);
        } else if self.best.last().is_some_and(|worst| c < *worst) {
            self.best.insert(c);
            self.best.pop_last();
        }
    }

    fn merge(mut self, other: Collector) -> Collector {
        self.found += other.found;
        self.nodes += other.nodes;
        for c in other.best {
            if self.best.len() < self.cap {
                self.best.insert(c);
            } else if self.best.last().is_some_and(|worst| c < *worst) {
                self.best.insert(c);
                self.best.pop_last();
            }
        }
        self
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SearchOutcome {
    pub candidates: Vec<Candidate>,
    pub found: u64,
    pub nodes: u64,
    pub algorithm: Algorithm,
}

#[derive(Debug, Clone)]
pub(crate) struct ClosestOutcome {
    pub candidate: Candidate,
    /// target - achieved, per block and period.
    pub residual: Vec<f64>,
    pub norm: f64,
    pub nodes: u64,
    pub exhaustive: bool,
}

pub(crate) struct Problem<'a> {
    rows: Vec<&'a [f64]>,
    periods: usize,
    blocks: usize,
    states: &'static [u8],
    target: Vec<f64>,
    tol: f64,
    slack: f64,
    /// Heading group of each row, `NO_GROUP` for top-level rows.
    groups: Vec<u32>,
    /// Prefix sums of min(0, v) and max(0, v) per period.
    cum_neg: Vec<Vec<f64>>,
    cum_pos: Vec<Vec<f64>>,
}

impl<'a> Problem<'a> {
    pub fn new(rows: Vec<&'a [f64]>, periods: usize, states: &'static [u8], target: Vec<f64>, tol: f64) -> Self {
        let blocks = if states.iter().any(|&s| s & 0b10 != 0) { 2 } else { 1 };
        assert_eq!(target.len(), blocks * periods, "target spans every block");
        let mut cum_neg = vec![vec![0.0; periods]];
        let mut cum_pos = vec![vec![0.0; periods]];
        let mut scale = target.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
        for row in &rows {
            let mut neg = cum_neg.last().expect("seeded").clone();
            let mut pos = cum_pos.last().expect("seeded").clone();
            for p in 0..periods {
                neg[p] += row[p].min(0.0);
                pos[p] += row[p].max(0.0);
            }
            scale += row.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            cum_neg.push(neg);
            cum_pos.push(pos);
        }
        Problem {
            rows,
            periods,
            blocks,
            states,
            target,
            tol,
            slack: 1e-9 * (1.0 + scale),
            groups: Vec::new(),
            cum_neg,
            cum_pos,
        }
    }

    pub fn with_groups(mut self, groups: Vec<u32>) -> Self {
        debug_assert_eq!(groups.len(), self.rows.len());
        self.groups = groups;
        self
    }

    fn dims(&self) -> usize {
        self.blocks * self.periods
    }

    fn space_log2(&self, rows: usize) -> f64 {
        rows as f64 * (self.states.len() as f64).log2()
    }

    fn add_row(&self, sums: &mut [f64], row: usize, state: u8) {
        let values = self.rows[row];
        for b in 0..self.blocks {
            if state & (1 << b) != 0 {
                let block = &mut sums[b * self.periods..(b + 1) * self.periods];
                for (s, v) in block.iter_mut().zip(values) {
                    *s += v;
                }
            }
        }
    }

    /// Can rows `next..end` plus an extra range still bring `sums` within
    /// tolerance of the target?
    fn reachable(&self, sums: &[f64], next: usize, end: usize, extra: Option<(&[f64], &[f64])>) -> bool {
        let reach = self.tol + self.slack;
        for p in 0..self.periods {
            let mut lo = self.cum_neg[end][p] - self.cum_neg[next][p];
            let mut hi = self.cum_pos[end][p] - self.cum_pos[next][p];
            if let Some((xn, xp)) = extra {
                lo += xn[p];
                hi += xp[p];
            }
            for b in 0..self.blocks {
                let d = b * self.periods + p;
                let t = self.target[d];
                if sums[d] + lo > t + reach || sums[d] + hi < t - reach {
                    return false;
                }
            }
        }
        true
    }

    /// Exact per-dimension check of a full assignment.
    fn verify(&self, states: &[u8]) -> bool {
        self.exact_residual(states).iter().all(|r| r.abs() <= self.tol)
    }

    /// target - exact block sum, per dimension.
    fn exact_residual(&self, states: &[u8]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dims());
        for b in 0..self.blocks {
            for p in 0..self.periods {
                let t = self.target[b * self.periods + p];
                let terms = states
                    .iter()
                    .enumerate()
                    .filter(|(_, &s)| s & (1 << b) != 0)
                    .map(|(r, _)| -self.rows[r][p])
                    .chain(std::iter::once(t));
                out.push(exact_sum(terms));
            }
        }
        out
    }

    fn candidate(&self, states: &[u8], order: SolutionOrder) -> Candidate {
        let picks: Vec<(u32, u8)> = states
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != 0)
            .map(|(r, &s)| (r as u32, s))
            .collect();
        let both = picks.iter().filter(|(_, s)| *s == 0b11).count() as u32;
        let (active, mixed) = match order {
            SolutionOrder::FewestRows => (picks.len() as u32, self.mixed_groups(&picks)),
            SolutionOrder::StatementOrder => (0, 0),
        };
        Candidate {
            both,
            active,
            mixed,
            picks,
        }
    }

    fn mixed_groups(&self, picks: &[(u32, u8)]) -> u32 {
        if self.blocks < 2 || self.groups.is_empty() {
            return 0;
        }
        let mut seen: Vec<(u32, u8)> = Vec::new();
        for &(r, s) in picks {
            let g = self.groups[r as usize];
            if g == NO_GROUP {
                continue;
            }
            match seen.iter_mut().find(|(h, _)| *h == g) {
                Some((_, mask)) => *mask |= s,
                None => seen.push((g, s)),
            }
        }
        seen.iter().filter(|(_, mask)| *mask == 0b11).count() as u32
    }

    fn choose_algorithm(&self, requested: Algorithm) -> Result<Algorithm> {
        let n = self.rows.len();
        let too_large = || Error::SearchTooLarge {
            rows: n,
            states: self.states.len(),
        };
        let half = self.space_log2(n / 2);
        match requested {
            Algorithm::Exhaustive if self.space_log2(n) <= FORCED_EXHAUSTIVE_LOG2 => Ok(Algorithm::Exhaustive),
            Algorithm::Exhaustive => Err(too_large()),
            Algorithm::MeetInMiddle if n < 2 => Ok(Algorithm::Exhaustive),
            Algorithm::MeetInMiddle if half <= HALF_TABLE_LOG2 => Ok(Algorithm::MeetInMiddle),
            Algorithm::MeetInMiddle => Err(too_large()),
            Algorithm::Auto if self.space_log2(n) <= EXHAUSTIVE_LOG2 => Ok(Algorithm::Exhaustive),
            Algorithm::Auto if half <= HALF_TABLE_LOG2 => Ok(Algorithm::MeetInMiddle),
            Algorithm::Auto => Err(too_large()),
        }
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<SearchOutcome> {
        let algorithm = self.choose_algorithm(opts.algorithm)?;
        let collector = match algorithm {
            Algorithm::MeetInMiddle => self.meet_in_middle(opts),
            _ => self.exhaustive(opts),
        };
        Ok(SearchOutcome {
            candidates: collector.best.into_iter().collect(),
            found: collector.found,
            nodes: collector.nodes,
            algorithm,
        })
    }

    /// Runs `leaf` on every assignment of rows `start..end` that survives
    /// pruning, splitting the top of the tree into independent tasks when the
    /// space is large. The split is fixed by the problem alone, so results and
    /// node counts do not depend on the thread count.
    fn walk_range<L>(
        &self,
        start: usize,
        end: usize,
        base: &[f64],
        extra: Option<(&[f64], &[f64])>,
        opts: &SolverOptions,
        leaf: &L,
    ) -> Collector
    where
        L: Fn(&[u8], &[f64], &mut Collector) + Sync,
    {
        let n = end - start;
        let k = self.states.len();
        let mut depth = 0;
        let mut tasks = 1usize;
        if self.space_log2(n) > PARALLEL_LOG2 {
            while depth < n && tasks < PREFIX_TASKS {
                depth += 1;
                tasks *= k;
            }
        }

        // Prefix phase, on this thread.
        let mut root = Collector::new(opts.max_solutions);
        let mut prefixes: Vec<(Vec<u8>, Vec<f64>)> = Vec::new();
        let mut states = Vec::with_capacity(n);
        let mut sums = vec![base.to_vec()];
        self.dfs(
            start,
            start + depth,
            end,
            &mut states,
            &mut sums,
            extra,
            &mut root.nodes,
            &mut |st, s| {
                prefixes.push((st.to_vec(), s.to_vec()));
            },
        );

        let run = |(prefix, sum): &(Vec<u8>, Vec<f64>)| {
            let mut c = Collector::new(opts.max_solutions);
            let mut states = prefix.clone();
            let mut sums = vec![sum.clone()];
            let mut nodes = 0;
            self.dfs(
                start + depth,
                end,
                end,
                &mut states,
                &mut sums,
                extra,
                &mut nodes,
                &mut |st, s| leaf(st, s, &mut c),
            );
            // The prefix node itself was counted in the prefix phase.
            c.nodes += nodes.saturating_sub(1);
            c
        };

        let parts: Vec<Collector> = if depth == 0 || opts.threads == Some(1) {
            prefixes.iter().map(run).collect()
        } else {
            match opts.threads {
                Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
                    Ok(pool) => pool.install(|| prefixes.par_iter().map(run).collect()),
                    Err(_) => prefixes.iter().map(run).collect(),
                },
                None => prefixes.par_iter().map(run).collect(),
            }
        };
        parts.into_iter().fold(root, Collector::merge)
    }

    /// Depth-first walk of rows `next..stop`; calls `visit` at depth `stop`.
    /// Pruning looks ahead to `end`.
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &self,
        next: usize,
        stop: usize,
        end: usize,
        states: &mut Vec<u8>,
        sums: &mut Vec<Vec<f64>>,
        extra: Option<(&[f64], &[f64])>,
        nodes: &mut u64,
        visit: &mut dyn FnMut(&[u8], &[f64]),
    ) {
        *nodes += 1;
        let current = sums.last().expect("root pushed");
        if !self.reachable(current, next, end, extra) {
            return;
        }
        if next == stop {
            visit(states, current);
            return;
        }
        for &state in self.states {
            let mut s = sums.last().expect("root pushed").clone();
            self.add_row(&mut s, next, state);
            sums.push(s);
            states.push(state);
            self.dfs(next + 1, stop, end, states, sums, extra, nodes, visit);
            states.pop();
            sums.pop();
        }
    }

    fn exhaustive(&self, opts: &SolverOptions) -> Collector {
        let n = self.rows.len();
        let zero = vec![0.0; self.dims()];
        let leaf = |states: &[u8], _sums: &[f64], c: &mut Collector| {
            if self.verify(states) {
                c.offer(self.candidate(states, opts.order));
            }
        };
        self.walk_range(0, n, &zero, None, opts, &leaf)
    }

    fn cell_of(&self, x: f64) -> i64 {
        (x / (4.0 * self.tol)).round() as i64
    }

    fn meet_in_middle(&self, opts: &SolverOptions) -> Collector {
        let n = self.rows.len();
        let split = n / 2;
        let dims = self.dims();
        let zero = vec![0.0; dims];

        // Left half: store every surviving partial assignment by grid cell.
        let mut left_states: Vec<Vec<u8>> = Vec::new();
        let mut left_sums: Vec<f64> = Vec::new();
        let mut table: HashMap<Vec<i64>, Vec<u32>> = HashMap::new();
        let mut left_nodes = 0;
        {
            let mut states = Vec::new();
            let mut sums = vec![zero.clone()];
            self.dfs(
                0,
                split,
                n,
                &mut states,
                &mut sums,
                None,
                &mut left_nodes,
                &mut |st, s| {
                    let key: Vec<i64> = s.iter().map(|&x| self.cell_of(x)).collect();
                    table.entry(key).or_default().push(left_states.len() as u32);
                    left_states.push(st.to_vec());
                    left_sums.extend_from_slice(s);
                },
            );
        }

        // Right half: anything the left half can add is the extra range.
        let left_neg: Vec<f64> = (0..self.periods)
            .map(|p| self.cum_neg[split][p] - self.cum_neg[0][p])
            .collect();
        let left_pos: Vec<f64> = (0..self.periods)
            .map(|p| self.cum_pos[split][p] - self.cum_pos[0][p])
            .collect();
        let reach = self.tol + self.slack;
        let leaf = |right: &[u8], right_sums: &[f64], c: &mut Collector| {
            let need: Vec<f64> = (0..dims).map(|d| self.target[d] - right_sums[d]).collect();
            let ranges: Vec<(i64, i64)> = need
                .iter()
                .map(|&x| (self.cell_of(x - reach), self.cell_of(x + reach)))
                .collect();
            let mut key: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            loop {
                if let Some(bucket) = table.get(&key) {
                    for &li in bucket {
                        let ls = &left_sums[li as usize * dims..(li as usize + 1) * dims];
                        let close = (0..dims).all(|d| (ls[d] - need[d]).abs() <= reach);
                        if close {
                            let mut full = left_states[li as usize].clone();
                            full.extend_from_slice(right);
                            if self.verify(&full) {
                                c.offer(self.candidate(&full, opts.order));
                            }
                        }
                    }
                }
                // Odometer over the cells the window touches.
                let mut d = 0;
                while d < dims {
                    if key[d] < ranges[d].1 {
                        key[d] += 1;
                        break;
                    }
                    key[d] = ranges[d].0;
                    d += 1;
                }
                if d == dims {
                    break;
                }
            }
        };
        let mut right = self.walk_range(split, n, &zero, Some((&left_neg, &left_pos)), opts, &leaf);
        right.nodes += left_nodes;
        right
    }

    /// Branch and bound for the assignment whose residual has the smallest
    /// norm; ties go to the preferred candidate. Stops after `budget` nodes.
    pub fn closest(&self, norm: Norm, order: SolutionOrder, budget: u64) -> ClosestOutcome {
        let n = self.rows.len();
        let mut ctx = ClosestCtx {
            norm,
            order,
            budget,
            nodes: 0,
            out_of_budget: false,
            best_norm: f64::INFINITY,
            best: None,
        };
        let mut states = Vec::with_capacity(n);
        let mut sums = vec![vec![0.0; self.dims()]];
        self.closest_dfs(&mut states, &mut sums, &mut ctx);

        let (candidate, residual) = ctx.best.unwrap_or_else(|| {
            // Budget ran out before any leaf: report the all-excluded assignment.
            let states = vec![0u8; n];
            (self.candidate(&states, order), self.exact_residual(&states))
        });
        ClosestOutcome {
            norm: residual.iter().fold(0.0, |acc, r| norm.combine(acc, r.abs())),
            candidate,
            residual,
            nodes: ctx.nodes,
            exhaustive: !ctx.out_of_budget,
        }
    }

    fn closest_dfs(&self, states: &mut Vec<u8>, sums: &mut Vec<Vec<f64>>, ctx: &mut ClosestCtx) {
        ctx.nodes += 1;
        if ctx.nodes > ctx.budget {
            ctx.out_of_budget = true;
            return;
        }
        let n = self.rows.len();
        let depth = states.len();
        let current = sums.last().expect("root pushed");
        let mut bound = 0.0;
        for p in 0..self.periods {
            let lo = self.cum_neg[n][p] - self.cum_neg[depth][p];
            let hi = self.cum_pos[n][p] - self.cum_pos[depth][p];
            for b in 0..self.blocks {
                let d = b * self.periods + p;
                let t = self.target[d];
                let gap = (current[d] + lo - t).max(t - current[d] - hi).max(0.0);
                bound = ctx.norm.combine(bound, gap);
            }
        }
        if bound > ctx.best_norm + self.slack {
            return;
        }
        if depth == n {
            let residual = self.exact_residual(states);
            let value = residual.iter().fold(0.0, |acc, r| ctx.norm.combine(acc, r.abs()));
            let cand = self.candidate(states, ctx.order);
            let better =
                value < ctx.best_norm || (value == ctx.best_norm && ctx.best.as_ref().is_none_or(|(c, _)| cand < *c));
            if better {
                ctx.best_norm = value;
                ctx.best = Some((cand, residual));
            }
            return;
        }
        for &state in self.states {
            let mut s = sums.last().expect("root pushed").clone();
            self.add_row(&mut s, depth, state);
            sums.push(s);
            states.push(state);
            self.closest_dfs(states, sums, ctx);
            states.pop();
            sums.pop();
            if ctx.out_of_budget {
                return;
            }
        }
    }
}

struct ClosestCtx {
    norm: Norm,
    order: SolutionOrder,
    budget: u64,
    nodes: u64,
    out_of_budget: bool,
    best_norm: f64,
    best: Option<(Candidate, Vec<f64>)>,
}
