//! Levenberg-Marquardt over the window graph.
//!
//! Map points and per-(object, model) vertex chains only couple to poses
//! and to themselves, so each forms an elimination block. The damped normal
//! equations are reduced onto the free poses by a Schur complement, solved
//! densely, and the eliminated blocks are recovered by back-substitution.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::{SlammotGraph, VertexRef};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub initial_lambda: f64,
    pub lambda_factor: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub relative_tolerance: f64,
    /// Stop once the cost itself falls below this value.
    pub absolute_tolerance: f64,
    pub max_lambda: f64,
    /// Stop once `|step| <= tol * (|x| + tol)` over the free parameters.
    pub step_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            initial_lambda: 1e-4,
            lambda_factor: 10.0,
            max_iterations: 20,
            relative_tolerance: 1e-6,
            absolute_tolerance: 1e-10,
            max_lambda: 1e12,
            step_tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    /// Linear solves performed, accepted or not.
    pub iterations: usize,
    pub accepted: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub converged: bool,
}

#[derive(Clone, Copy)]
enum Slot {
    Fixed,
    Pose(usize),
    Block(usize, usize),
}

struct Layout {
    pose_slot: Vec<Option<usize>>,
    n_pose: usize,
    point_slot: Vec<(usize, usize)>,
    object_slot: Vec<(usize, usize)>,
    block_sizes: Vec<usize>,
}

impl Layout {
    fn new(graph: &SlammotGraph) -> Self {
        let mut n_pose = 0;
        let pose_slot = graph
            .poses
            .iter()
            .map(|p| {
                (!p.fixed).then(|| {
                    n_pose += 6;
                    n_pose - 6
                })
            })
            .collect();
        let mut block_sizes = Vec::new();
        let point_slot = graph
            .points
            .iter()
            .map(|_| {
                block_sizes.push(3);
                (block_sizes.len() - 1, 0)
            })
            .collect();
        let mut chains: BTreeMap<(u64, crate::motion::ModelId), usize> = BTreeMap::new();
        let object_slot = graph
            .objects
            .iter()
            .map(|o| {
                let b = *chains.entry((o.object_id, o.model())).or_insert_with(|| {
                    block_sizes.push(0);
                    block_sizes.len() - 1
                });
                let off = block_sizes[b];
                block_sizes[b] += o.state.dim();
                (b, off)
            })
            .collect();
        Self {
            pose_slot,
            n_pose,
            point_slot,
            object_slot,
            block_sizes,
        }
    }

    fn slot(&self, v: VertexRef) -> Slot {
        match v {
            VertexRef::Pose(i) => self.pose_slot[i].map_or(Slot::Fixed, Slot::Pose),
            VertexRef::Point(i) => Slot::Block(self.point_slot[i].0, self.point_slot[i].1),
            VertexRef::Object(i) => Slot::Block(self.object_slot[i].0, self.object_slot[i].1),
        }
    }
}

struct NormalEquations {
    h_pp: DMatrix<f64>,
    b_p: DVector<f64>,
    h_bb: Vec<DMatrix<f64>>,
    h_pb: Vec<DMatrix<f64>>,
    b_b: Vec<DVector<f64>>,
}

/// Visits every active edge with its scaled, whitened Jacobian blocks.
fn for_each_term<F>(graph: &SlammotGraph, mut f: F) -> Result<()>
where
    F: FnMut(&[(VertexRef, DMatrix<f64>)], &DVector<f64>, &DVector<f64>),
{
    for edge in &graph.edges {
        if edge.weight == 0.0 {
            continue;
        }
        let lin = graph.linearize(edge)?;
        let chi2: f64 = lin.residual.iter().zip(lin.info.iter()).map(|(e, w)| w * e * e).sum();
        let scale = edge.weight * graph.robust(chi2).1;
        let omega = &lin.info * scale;
        f(&lin.blocks, &omega, &lin.residual);
    }
    Ok(())
}

fn build_normal_equations(graph: &SlammotGraph, layout: &Layout) -> Result<NormalEquations> {
    let np = layout.n_pose;
    let mut ne = NormalEquations {
        h_pp: DMatrix::zeros(np, np),
        b_p: DVector::zeros(np),
        h_bb: layout.block_sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
        h_pb: layout.block_sizes.iter().map(|&n| DMatrix::zeros(np, n)).collect(),
        b_b: layout.block_sizes.iter().map(|&n| DVector::zeros(n)).collect(),
    };
    let mut bad_coupling = false;
    for_each_term(graph, |blocks, omega, r| {
        let weighted: Vec<DMatrix<f64>> = blocks
            .iter()
            .map(|(_, j)| {
                let mut jt = j.transpose();
                for (c, w) in omega.iter().enumerate() {
                    jt.column_mut(c).scale_mut(*w);
                }
                jt
            })
            .collect();
        for (a, (va, _)) in blocks.iter().enumerate() {
            let sa = layout.slot(*va);
            let g = &weighted[a] * r;
            match sa {
                Slot::Fixed => continue,
                Slot::Pose(o) => {
                    let mut v = ne.b_p.rows_mut(o, 6);
                    v -= &g;
                }
                Slot::Block(b, o) => {
                    let n = g.len();
                    let mut v = ne.b_b[b].rows_mut(o, n);
                    v -= &g;
                }
            }
            for (vb, jb) in blocks.iter() {
                let sb = layout.slot(*vb);
                let h = &weighted[a] * jb;
                match (sa, sb) {
                    (_, Slot::Fixed) | (Slot::Fixed, _) => {}
                    (Slot::Pose(oa), Slot::Pose(ob)) => {
                        let mut v = ne.h_pp.view_mut((oa, ob), (h.nrows(), h.ncols()));
                        v += &h;
                    }
                    (Slot::Pose(oa), Slot::Block(b, ob)) => {
                        let mut v = ne.h_pb[b].view_mut((oa, ob), (h.nrows(), h.ncols()));
                        v += &h;
                    }
                    // The transposed entry is added when the roles swap.
                    (Slot::Block(_, _), Slot::Pose(_)) => {}
                    (Slot::Block(ba, oa), Slot::Block(bb, ob)) => {
                        if ba != bb {
                            bad_coupling = true;
                            continue;
                        }
                        let mut v = ne.h_bb[ba].view_mut((oa, ob), (h.nrows(), h.ncols()));
                        v += &h;
                    }
                }
            }
        }
    })?;
    if bad_coupling {
        return Err(Error::invalid("edge couples two elimination blocks"));
    }
    Ok(ne)
}

fn damp(m: &mut DMatrix<f64>, lambda: f64) {
    for i in 0..m.nrows() {
        let d = m[(i, i)];
        m[(i, i)] = d + lambda * d.max(1e-6);
    }
}

/// Solves the damped system; `None` when a factorization fails.
fn solve(ne: &NormalEquations, lambda: f64) -> Option<(DVector<f64>, Vec<DVector<f64>>)> {
    let mut s = ne.h_pp.clone();
    damp(&mut s, lambda);
    let mut rhs = ne.b_p.clone();
    let mut back = Vec::with_capacity(ne.h_bb.len());
    for ((h_bb, h_pb), b_b) in ne.h_bb.iter().zip(&ne.h_pb).zip(&ne.b_b) {
        let mut h = h_bb.clone();
        damp(&mut h, lambda);
        let chol = h.cholesky()?;
        let x_b = chol.solve(b_b);
        let x_bp = chol.solve(&h_pb.transpose());
        if s.nrows() > 0 {
            s -= h_pb * &x_bp;
            rhs -= h_pb * &x_b;
        }
        back.push((x_b, x_bp));
    }
    let dp = if s.nrows() > 0 {
        let s = (&s + s.transpose()) * 0.5;
        s.cholesky()?.solve(&rhs)
    } else {
        DVector::zeros(0)
    };
    let db = back
        .into_iter()
        .map(|(x_b, x_bp)| if dp.is_empty() { x_b } else { x_b - x_bp * &dp })
        .collect::<Vec<_>>();
    if !dp.iter().chain(db.iter().flat_map(|d| d.iter())).all(|v| v.is_finite()) {
        return None;
    }
    Some((dp, db))
}

fn apply_step(graph: &SlammotGraph, layout: &Layout, dp: &DVector<f64>, db: &[DVector<f64>]) -> SlammotGraph {
    let mut out = graph.clone();
    for (i, p) in out.poses.iter_mut().enumerate() {
        if let Some(o) = layout.pose_slot[i] {
            let d = Vector6::from_iterator(dp.rows(o, 6).iter().copied());
            p.pose = p.pose.retract(&d);
        }
    }
    for (i, p) in out.points.iter_mut().enumerate() {
        let (b, o) = layout.point_slot[i];
        p.position += Vector3::from_iterator(db[b].rows(o, 3).iter().copied());
    }
    for (i, v) in out.objects.iter_mut().enumerate() {
        let (b, o) = layout.object_slot[i];
        let n = v.state.dim();
        v.state.apply(db[b].rows(o, n).as_slice());
    }
    out
}

/// Minimizes [`SlammotGraph::total_cost`] over every non-fixed vertex.
fn parameter_norm(graph: &SlammotGraph) -> f64 {
    let poses = graph.poses.iter().filter(|p| !p.fixed).map(|p| p.pose.translation.norm_squared());
    let points = graph.points.iter().map(|p| p.position.norm_squared());
    let objects = graph.objects.iter().map(|o| o.state.as_slice().iter().map(|v| v * v).sum::<f64>());
    poses.chain(points).chain(objects).sum::<f64>().sqrt()
}

pub fn optimize(graph: &mut SlammotGraph, cfg: &SolverConfig) -> Result<SolverReport> {
    if !graph.poses.iter().any(|p| p.fixed) {
        return Err(Error::invalid("at least one pose vertex must be fixed"));
    }
    let layout = Layout::new(graph);
    let mut cost = graph.total_cost()?;
    let mut report = SolverReport {
        initial_cost: cost,
        final_cost: cost,
        ..Default::default()
    };
    let mut lambda = cfg.initial_lambda;
    let mut ne = None;
    while report.iterations < cfg.max_iterations {
        if cost <= cfg.absolute_tolerance {
            report.converged = true;
            break;
        }
        if ne.is_none() {
            ne = Some(build_normal_equations(graph, &layout)?);
        }
        let system = ne.as_ref().unwrap();
        report.iterations += 1;
        let step = solve(system, lambda);
        if let Some((dp, db)) = &step {
            let norm = (dp.norm_squared() + db.iter().map(|d| d.norm_squared()).sum::<f64>()).sqrt();
            if norm <= cfg.step_tolerance * (parameter_norm(graph) + cfg.step_tolerance) {
                report.converged = true;
                break;
            }
        }
        let candidate = step.map(|(dp, db)| apply_step(graph, &layout, &dp, &db));
        let new_cost = candidate
            .as_ref()
            .and_then(|g| g.total_cost().ok())
            .filter(|c| c.is_finite());
        match (candidate, new_cost) {
            (Some(next), Some(c)) if c < cost => {
                let decrease = (cost - c) / cost;
                *graph = next;
                cost = c;
                report.accepted += 1;
                lambda = (lambda / cfg.lambda_factor).max(1e-15);
                ne = None;
                if decrease < cfg.relative_tolerance {
                    report.converged = true;
                    break;
                }
            }
            (solved, _) => {
                lambda *= cfg.lambda_factor;
                if lambda > cfg.max_lambda {
                    if solved.is_none() {
                        return Err(Error::SingularSystem {
                            iteration: report.iterations,
                        });
                    }
                    report.converged = true;
                    break;
                }
            }
        }
    }
    if cost <= cfg.absolute_tolerance {
        report.converged = true;
    }
    report.final_cost = cost;
    for p in &mut graph.poses {
        p.pose.rotation = crate::geometry::orthonormalize(&p.pose.rotation);
    }
    Ok(report)
}

/// Gradient of the total cost, stacked as all poses (left perturbation),
/// then points, then object vertices, in storage order.
pub fn cost_gradient(graph: &SlammotGraph) -> Result<DVector<f64>> {
    let pose_off = 0;
    let point_off = 6 * graph.poses.len();
    let mut obj_offsets = Vec::with_capacity(graph.objects.len());
    let mut n = point_off + 3 * graph.points.len();
    for o in &graph.objects {
        obj_offsets.push(n);
        n += o.state.dim();
    }
    let mut g = DVector::zeros(n);
    for_each_term(graph, |blocks, omega, r| {
        let wr = r.component_mul(omega) * 2.0;
        for (v, j) in blocks {
            let (off, len) = match v {
                VertexRef::Pose(i) => (pose_off + 6 * i, 6),
                VertexRef::Point(i) => (point_off + 3 * i, 3),
                VertexRef::Object(i) => (obj_offsets[*i], j.ncols()),
            };
            let mut s = g.rows_mut(off, len);
            s += j.transpose() * &wr;
        }
    })?;
    Ok(g)
}
