use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{relative_gap, BnbConfig, BranchingRule, MiqpProblem, MiqpSolution, MiqpStatus, NodeOrder};
use crate::error::MiqpError;
use crate::qp::{solve_qp, QpOptions, QpProblem, QpSolution, QpStatus};

/// Rounds the binaries of `relaxed` (0.5 rounds down), fixes them and
/// re-solves the remaining QP. Returns `(z, objective)` when that QP is
/// feasible.
pub fn rounding_incumbent(
    problem: &MiqpProblem,
    relaxed: &[f64],
    options: &QpOptions,
) -> Result<Option<(Vec<f64>, f64)>, MiqpError> {
    let mut qp = problem.base.clone();
    for &j in &problem.binary_indices {
        let v = if relaxed[j] > 0.5 { 1.0 } else { 0.0 };
        if v < qp.lb[j] || v > qp.ub[j] {
            return Ok(None);
        }
        qp.lb[j] = v;
        qp.ub[j] = v;
    }
    let s = solve_qp(&qp, options, None)?;
    Ok((s.status == QpStatus::Optimal).then_some((s.z, s.objective)))
}

/// Nodes between dives from the node being expanded.
const DIVE_INTERVAL: usize = 25;

#[derive(Debug, Clone)]
struct Node {
    bound: f64,
    /// Objective of this node's own relaxation.
    objective: f64,
    depth: usize,
    left: bool,
    seq: u64,
    /// `(variable, value)` fixings along the path from the root.
    fixings: Vec<(usize, f64)>,
    z: Vec<f64>,
}

/// Heap wrapper; `Ord` is reversed so the max-heap pops the preferred node.
struct Queued {
    node: Node,
    order: NodeOrder,
}

impl Queued {
    fn preference(&self, other: &Self) -> Ordering {
        let (a, b) = (&self.node, &other.node);
        let by_depth = b.depth.cmp(&a.depth);
        let by_side = b.left.cmp(&a.left);
        let primary = match self.order {
            NodeOrder::BestBound => a.bound.total_cmp(&b.bound).then(by_depth),
            NodeOrder::DepthFirst => by_depth,
        };
        primary.then(by_side).then(a.seq.cmp(&b.seq))
    }
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.preference(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.preference(other).reverse()
    }
}

struct Search<'a> {
    problem: &'a MiqpProblem,
    config: &'a BnbConfig,
    binaries: Vec<usize>,
    options: QpOptions,
    incumbent: Option<(Vec<f64>, f64)>,
    /// Lowest bound among nodes discarded only because of the gap tolerance.
    pruned_bound: f64,
    nodes: usize,
    seq: u64,
    /// Per-variable `[down, up]` sums of objective gain per unit change.
    pc_sum: Vec<[f64; 2]>,
    pc_count: Vec<[u32; 2]>,
    /// Some relaxation stopped before converging, so an empty tree does not
    /// prove infeasibility.
    inexact: bool,
}

enum Evaluated {
    Infeasible,
    Relaxed(QpSolution),
    /// The relaxation did not converge; keep the parent's bound.
    Inexact(QpSolution),
}

impl<'a> Search<'a> {
    fn relax(&self, fixings: &[(usize, f64)]) -> Result<Evaluated, MiqpError> {
        let mut qp: QpProblem = self.problem.base.clone();
        for &(j, v) in fixings {
            qp.lb[j] = v;
            qp.ub[j] = v;
        }
        let s = solve_qp(&qp, &self.options, None)?;
        Ok(match s.status {
            QpStatus::Optimal => Evaluated::Relaxed(s),
            QpStatus::Infeasible => Evaluated::Infeasible,
            QpStatus::DualInfeasible => return Err(MiqpError::Unbounded),
            QpStatus::IterationLimit => Evaluated::Inexact(s),
        })
    }

    fn cutoff_reached(&self, bound: f64) -> bool {
        match &self.incumbent {
            None => false,
            Some((_, inc)) => {
                bound >= inc - self.config.abs_gap || relative_gap(*inc, bound) <= self.config.rel_gap
            }
        }
    }

    fn fractional(&self, z: &[f64]) -> Option<usize> {
        let tol = self.config.integrality_tol;
        let mut pick: Option<(usize, f64)> = None;
        let avg = match self.config.branching {
            BranchingRule::Pseudocost => self.pseudocost_averages(),
            _ => [1.0, 1.0],
        };
        for &j in &self.binaries {
            let dist = (z[j] - z[j].round()).abs();
            if dist <= tol {
                continue;
            }
            let score = match self.config.branching {
                BranchingRule::FirstFractional => return Some(j),
                BranchingRule::MostFractional => dist,
                BranchingRule::Pseudocost => {
                    let f = z[j] - z[j].floor();
                    let est = |side: usize| {
                        let c = self.pc_count[j][side];
                        if c == 0 {
                            avg[side]
                        } else {
                            self.pc_sum[j][side] / c as f64
                        }
                    };
                    (est(0) * f).max(1e-9) * (est(1) * (1.0 - f)).max(1e-9)
                }
            };
            if pick.map_or(true, |(_, best)| score > best) {
                pick = Some((j, score));
            }
        }
        pick.map(|(j, _)| j)
    }

    fn pseudocost_averages(&self) -> [f64; 2] {
        let mut out = [1.0, 1.0];
        for (side, o) in out.iter_mut().enumerate() {
            let (mut sum, mut n) = (0.0, 0u32);
            for &j in &self.binaries {
                if self.pc_count[j][side] > 0 {
                    sum += self.pc_sum[j][side] / self.pc_count[j][side] as f64;
                    n += 1;
                }
            }
            if n > 0 {
                *o = sum / n as f64;
            }
        }
        out
    }

    fn record_gain(&mut self, j: usize, side: usize, frac_change: f64, parent_obj: f64, eval: &Evaluated) {
        if let Evaluated::Relaxed(s) = eval {
            if frac_change > 1e-9 {
                self.pc_sum[j][side] += (s.objective - parent_obj).max(0.0) / frac_change;
                self.pc_count[j][side] += 1;
            }
        }
    }

    fn offer_incumbent(&mut self, z: &[f64]) -> Result<(), MiqpError> {
        if let Some((zi, obj)) = rounding_incumbent(self.problem, z, &self.options)? {
            let better = self.incumbent.as_ref().map_or(true, |(_, best)| obj < best - 1e-9);
            if better {
                self.incumbent = Some((zi, obj));
            }
        }
        Ok(())
    }

    /// Rounding dive: repeatedly fixes the least fractional binaries to
    /// their nearest values and re-solves until the relaxation is integral.
    /// A quarter of the fractional binaries is fixed per round; when that
    /// fails a single binary is fixed instead, flipping it once if needed.
    fn dive(&mut self, start: &[f64], start_fixings: &[(usize, f64)]) -> Result<(), MiqpError> {
        let tol = self.config.integrality_tol;
        let mut fixed = vec![false; self.problem.base.n];
        let mut fixings = start_fixings.to_vec();
        for &(j, _) in &fixings {
            fixed[j] = true;
        }
        let mut z = start.to_vec();
        loop {
            let mut cands: Vec<(usize, f64)> = self
                .binaries
                .iter()
                .copied()
                .filter(|&j| !fixed[j])
                .map(|j| (j, (z[j] - z[j].round()).abs()))
                .filter(|&(_, d)| d > tol)
                .collect();
            if cands.is_empty() {
                return self.offer_incumbent(&z);
            }
            cands.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let batch = (cands.len() / 4).max(1);
            let mut next = None;
            if batch > 1 {
                let base = fixings.len();
                fixings.extend(cands[..batch].iter().map(|&(j, _)| (j, z[j].round())));
                if let Evaluated::Relaxed(s) = self.relax(&fixings)? {
                    cands[..batch].iter().for_each(|&(j, _)| fixed[j] = true);
                    next = Some(s);
                } else {
                    fixings.truncate(base);
                }
            }
            if next.is_none() {
                let j = cands[0].0;
                fixed[j] = true;
                let v = z[j].round();
                for value in [v, 1.0 - v] {
                    fixings.push((j, value));
                    if let Evaluated::Relaxed(s) = self.relax(&fixings)? {
                        next = Some(s);
                        break;
                    }
                    fixings.pop();
                }
            }
            match next {
                Some(s) if !self.cutoff_reached(s.objective) => z = s.z,
                _ => return Ok(()),
            }
        }
    }

    /// Handles an evaluated node: prunes, records incumbents, or returns it
    /// for queuing.
    fn process(
        &mut self,
        eval: Evaluated,
        parent_bound: f64,
        fixings: Vec<(usize, f64)>,
        depth: usize,
        left: bool,
    ) -> Result<Option<Node>, MiqpError> {
        let (sol, bound) = match eval {
            Evaluated::Infeasible => return Ok(None),
            Evaluated::Relaxed(s) => {
                let b = s.objective.max(parent_bound);
                (s, b)
            }
            Evaluated::Inexact(s) => {
                self.inexact = true;
                (s, parent_bound)
            }
        };
        if self.cutoff_reached(bound) {
            if let Some((_, inc)) = &self.incumbent {
                if bound < *inc {
                    self.pruned_bound = self.pruned_bound.min(bound);
                }
            }
            return Ok(None);
        }
        if self.fractional(&sol.z).is_none() {
            self.offer_incumbent(&sol.z)?;
            return Ok(None);
        }
        self.seq += 1;
        Ok(Some(Node {
            bound,
            objective: sol.objective,
            depth,
            left,
            seq: self.seq,
            fixings,
            z: sol.z,
        }))
    }
}

/// Branch-and-bound over QP relaxations.
///
/// Branches on one binary at a time (`= 0` left, `= 1` right) and evaluates
/// both children before queuing them. Integral relaxations are polished by
/// fixing the binaries and re-solving, so incumbent objectives are those of
/// the fixed-binary QP.
pub fn solve_miqp(problem: &MiqpProblem, config: &BnbConfig) -> Result<MiqpSolution, MiqpError> {
    solve_miqp_with_hint(problem, config, None)
}

/// [`solve_miqp`] seeded with a candidate point: its binaries are rounded
/// and fixed, and the resulting QP (if feasible) becomes the first
/// incumbent. A hint of the wrong length is ignored.
pub fn solve_miqp_with_hint(
    problem: &MiqpProblem,
    config: &BnbConfig,
    hint: Option<&[f64]>,
) -> Result<MiqpSolution, MiqpError> {
    problem.validate()?;
    let mut search = Search {
        problem,
        config,
        binaries: problem.sorted_binaries(),
        options: config.qp_options(),
        incumbent: None,
        pruned_bound: f64::INFINITY,
        nodes: 1,
        seq: 0,
        pc_sum: vec![[0.0; 2]; problem.base.n],
        pc_count: vec![[0; 2]; problem.base.n],
        inexact: false,
    };

    let root = match search.relax(&[])? {
        Evaluated::Infeasible => {
            return Ok(MiqpSolution {
                status: MiqpStatus::Infeasible,
                z: Vec::new(),
                objective: f64::INFINITY,
                bound: f64::INFINITY,
                gap: 0.0,
                nodes_explored: 1,
            })
        }
        other => other,
    };
    let root_z = match &root {
        Evaluated::Relaxed(s) | Evaluated::Inexact(s) => s.z.clone(),
        Evaluated::Infeasible => unreachable!(),
    };
    if let Some(h) = hint.filter(|h| h.len() == problem.base.n) {
        search.offer_incumbent(h)?;
    }
    if search.fractional(&root_z).is_some() {
        search.offer_incumbent(&root_z)?;
        if config.dive && matches!(root, Evaluated::Relaxed(_)) {
            search.dive(&root_z, &[])?;
        }
    }
    let mut heap = BinaryHeap::new();
    let order = config.node_order;
    let mut open_min = f64::NEG_INFINITY;
    if let Some(node) = search.process(root, f64::NEG_INFINITY, Vec::new(), 0, true)? {
        heap.push(Queued { node, order });
    }
    let mut limit_hit = false;
    let mut next_dive = DIVE_INTERVAL;

    while let Some(Queued { node, .. }) = heap.pop() {
        if search.cutoff_reached(node.bound) {
            if let Some((_, inc)) = &search.incumbent {
                if node.bound < *inc {
                    search.pruned_bound = search.pruned_bound.min(node.bound);
                }
            }
            continue;
        }
        if search.nodes + 2 > config.node_limit {
            open_min = node.bound;
            heap.push(Queued { node, order });
            limit_hit = true;
            break;
        }
        if config.dive && search.nodes >= next_dive {
            next_dive = search.nodes + DIVE_INTERVAL;
            search.dive(&node.z, &node.fixings)?;
            if search.cutoff_reached(node.bound) {
                continue;
            }
        }
        let j = search.fractional(&node.z).expect("queued nodes are fractional");
        let mut left_fix = node.fixings.clone();
        left_fix.push((j, 0.0));
        let mut right_fix = node.fixings;
        right_fix.push((j, 1.0));
        let (l, r) = if config.deterministic {
            (search.relax(&left_fix), search.relax(&right_fix))
        } else {
            let s = &search;
            rayon::join(|| s.relax(&left_fix), || s.relax(&right_fix))
        };
        search.nodes += 2;
        let (l, r) = (l?, r?);
        let f = node.z[j];
        search.record_gain(j, 0, f, node.objective, &l);
        search.record_gain(j, 1, 1.0 - f, node.objective, &r);
        for (eval, fix, left) in [(l, left_fix, true), (r, right_fix, false)] {
            if let Some(child) = search.process(eval, node.bound, fix, node.depth + 1, left)? {
                heap.push(Queued { node: child, order });
            }
        }
    }
    if limit_hit {
        open_min = heap.iter().map(|q| q.node.bound).fold(open_min, f64::min);
    }

    let nodes_explored = search.nodes;
    Ok(match search.incumbent {
        None => MiqpSolution {
            status: if limit_hit || search.inexact {
                MiqpStatus::Unknown
            } else {
                MiqpStatus::Infeasible
            },
            z: Vec::new(),
            objective: f64::INFINITY,
            bound: if limit_hit { open_min } else { f64::INFINITY },
            gap: f64::INFINITY,
            nodes_explored,
        },
        Some((z, objective)) => {
            let mut bound = objective.min(search.pruned_bound);
            if limit_hit {
                bound = bound.min(open_min);
            }
            let gap = relative_gap(objective, bound);
            let status = if limit_hit {
                MiqpStatus::NodeLimit
            } else if gap <= config.rel_gap && search.pruned_bound >= objective {
                MiqpStatus::Optimal
            } else {
                MiqpStatus::GapReached
            };
            MiqpSolution {
                status,
                z,
                objective,
                bound,
                gap,
                nodes_explored,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseMatrix;

    fn binary_problem(n: usize) -> QpProblem {
        let mut base = QpProblem::new(n);
        base.lb = vec![0.0; n];
        base.ub = vec![1.0; n];
        base
    }

    #[test]
    fn single_binary_maximized() {
        let mut base = binary_problem(1);
        base.q = vec![-1.0];
        let p = MiqpProblem {
            base,
            binary_indices: vec![0],
        };
        let s = solve_miqp(&p, &BnbConfig::default()).unwrap();
        assert_eq!(s.status, MiqpStatus::Optimal);
        assert!((s.z[0] - 1.0).abs() < 1e-6);
        assert!((s.objective + 1.0).abs() < 1e-6);
    }

    #[test]
    fn symmetric_tie_rounds_down() {
        let mut base = binary_problem(1);
        base.p_diag = vec![2.0];
        base.q = vec![-1.0];
        base.c0 = 0.25;
        let p = MiqpProblem {
            base,
            binary_indices: vec![0],
        };
        let s = solve_miqp(&p, &BnbConfig::default()).unwrap();
        assert!((s.objective - 0.25).abs() < 1e-6);
        assert!(s.z[0].abs() < 1e-6);
    }

    #[test]
    fn infeasible_root() {
        let mut base = binary_problem(2);
        base.a_in = SparseMatrix::from_dense(&[vec![1.0, 1.0]]);
        base.l_in = vec![3.0];
        base.u_in = vec![f64::INFINITY];
        let p = MiqpProblem {
            base,
            binary_indices: vec![0, 1],
        };
        let s = solve_miqp(&p, &BnbConfig::default()).unwrap();
        assert_eq!(s.status, MiqpStatus::Infeasible);
    }

    #[test]
    fn rounding_that_breaks_a_run_constraint_gives_no_incumbent() {
        // Two steps with on-states d0, d1 and a startup s0 >= d0, with a
        // two-step run: d1 >= s0. Requiring d0 + d1 = 1 makes any start at
        // step 0 infeasible, so rounding the relaxation (0.5, 0.5) → (0, 0)
        // violates the sum while (1, 0) breaks the run.
        let mut base = binary_problem(3);
        base.a_eq = SparseMatrix::from_dense(&[vec![1.0, 1.0, 0.0]]);
        base.b_eq = vec![1.0];
        base.a_in = SparseMatrix::from_dense(&[vec![-1.0, 0.0, 1.0], vec![0.0, 1.0, -1.0]]);
        base.l_in = vec![0.0, 0.0];
        base.u_in = vec![f64::INFINITY, f64::INFINITY];
        let p = MiqpProblem {
            base,
            binary_indices: vec![0, 1],
        };
        let r = rounding_incumbent(&p, &[0.5, 0.5, 0.5], &QpOptions::default()).unwrap();
        assert!(r.is_none());
        let r = rounding_incumbent(&p, &[0.0, 1.0, 0.0], &QpOptions::default()).unwrap();
        assert!(r.is_some());
    }

    #[test]
    fn node_limit_without_incumbent_is_unknown() {
        // Knapsack-like instance where rounding fails at the root.
        let mut base = binary_problem(4);
        base.q = vec![-1.0, -1.0, -1.0, -1.0];
        base.a_eq = SparseMatrix::from_dense(&[vec![2.0, 2.0, 2.0, 2.0]]);
        base.b_eq = vec![3.0];
        let p = MiqpProblem {
            base,
            binary_indices: vec![0, 1, 2, 3],
        };
        let cfg = BnbConfig {
            node_limit: 1,
            ..BnbConfig::default()
        };
        let s = solve_miqp(&p, &cfg).unwrap();
        assert_eq!(s.status, MiqpStatus::Unknown);
    }
}
