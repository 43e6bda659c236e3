//! Graph reasoning: directed edge split, edge update, edge normalization and
//! node convolution, stacked into two reasoning blocks.
//!
//! Matrix parameters use the row-vector convention: a feature row `x` maps to
//! `x . theta`, so `theta[q][p]` weighs input feature `q` into output `p`.
//!
//! Per block: the edge update runs first (skipped when the `edge_update`
//! ablation flag is off), normalized edge features then act purely as message
//! weights for the node convolution, and the block hands the
//! pre-normalization updated edges to the next block. In undirected mode the
//! two directions share one parameter matrix and one feature row. In the
//! GCN baseline mode edges are scalar cosine similarities between node
//! features, never updated.

use crate::graph::BoundaryContentGraph;
use crate::model::Ablation;
use crate::tensor::{ParamStore, Tape, TensorError, Var};
use std::sync::Arc;
use thiserror::Error;

pub const NORM_EPS: f32 = 1e-6;

#[derive(Debug, Error)]
pub enum ReasoningError {
    #[error("edge normalization requires nonnegative features, found {value} at row {row}, dim {dim}")]
    NegativeEdgeFeature { row: usize, dim: usize, value: f32 },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Directed edge state: one start-to-end and one end-to-start feature row per
/// undirected pair. Before the first update both rows are the undirected
/// content feature (in undirected mode they stay literally shared).
pub struct DirectedEdges {
    pub pairs: Arc<Vec<(usize, usize)>>,
    /// Start index of each pair, shared across ops.
    pub starts: Arc<Vec<usize>>,
    /// End index of each pair.
    pub ends: Arc<Vec<usize>>,
    pub s2e: Var,
    pub e2s: Var,
}

impl DirectedEdges {
    /// Number of directed edges (two per pair).
    pub fn directed_count(&self) -> usize {
        self.pairs.len() * 2
    }
}

/// Split every undirected edge into two opposed directed edges carrying the
/// same feature row.
pub fn split_directed(graph: &BoundaryContentGraph) -> DirectedEdges {
    let starts = Arc::new(graph.pairs.iter().map(|&(i, _)| i).collect::<Vec<_>>());
    let ends = Arc::new(graph.pairs.iter().map(|&(_, j)| j).collect::<Vec<_>>());
    DirectedEdges {
        pairs: graph.pairs.clone(),
        starts,
        ends,
        s2e: graph.edge_features,
        e2s: graph.edge_features,
    }
}

/// Edge update: `relu(theta x (d * f_s * f_e) + d)` per direction, with the
/// residual inside the activation for both directions.
pub fn edge_update(
    tape: &mut Tape,
    edges: &DirectedEdges,
    f_s_rows: Var,
    f_e_rows: Var,
    theta_s2e: Var,
    theta_e2s: Var,
) -> Result<DirectedEdges, TensorError> {
    let node_prod = tape.mul(f_s_rows, f_e_rows)?;
    let mut update = |d: Var, theta: Var| -> Result<Var, TensorError> {
        let gated = tape.mul(d, node_prod)?;
        let lin = tape.matmul(gated, theta)?;
        let res = tape.add(lin, d)?;
        Ok(tape.relu(res))
    };
    let s2e = update(edges.s2e, theta_s2e)?;
    let e2s = if theta_e2s == theta_s2e && edges.e2s == edges.s2e {
        // undirected: one matrix, one shared feature row
        s2e
    } else {
        update(edges.e2s, theta_e2s)?
    };
    Ok(DirectedEdges {
        pairs: edges.pairs.clone(),
        starts: edges.starts.clone(),
        ends: edges.ends.clone(),
        s2e,
        e2s,
    })
}

/// Per-head, per-dimension normalization: each directed edge feature is
/// divided by the sum over all edges leaving the same head node (plus a small
/// epsilon guarding all-zero rows). Heads of start-to-end edges are start
/// nodes; heads of end-to-start edges are end nodes.
pub fn normalize_edges(
    tape: &mut Tape,
    edges: &DirectedEdges,
    l_w: usize,
) -> Result<(Var, Var), ReasoningError> {
    for v in [edges.s2e, edges.e2s] {
        let d = tape.shape(v)[1];
        if let Some((k, &bad)) = tape.value(v).iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(ReasoningError::NegativeEdgeFeature {
                row: k / d,
                dim: k % d,
                value: bad,
            });
        }
    }
    let mut norm = |v: Var, heads: &Arc<Vec<usize>>| -> Result<Var, TensorError> {
        let sums = tape.segment_sum(v, heads.clone(), l_w)?;
        let gathered = tape.index_rows(sums, heads.clone())?;
        let denom = tape.add_scalar(gathered, NORM_EPS);
        tape.div(v, denom)
    };
    let norm_s2e = norm(edges.s2e, &edges.starts)?;
    let norm_e2s = norm(edges.e2s, &edges.ends)?;
    Ok((norm_s2e, norm_e2s))
}

/// Node convolution: every tail node aggregates `normalized_edge * head_node`
/// messages over its incoming edges, maps them through the node matrix for
/// its side, adds the residual and applies relu. Nodes without incoming
/// edges reduce to `relu(n)`.
#[allow(clippy::too_many_arguments)]
pub fn node_update(
    tape: &mut Tape,
    edges: &DirectedEdges,
    start_nodes: Var,
    end_nodes: Var,
    f_s_rows: Var,
    f_e_rows: Var,
    norm_s2e: Var,
    norm_e2s: Var,
    theta_start: Var,
    theta_end: Var,
    l_w: usize,
) -> Result<(Var, Var), TensorError> {
    // messages arriving at end nodes travel on s2e edges from start heads
    let msg_e = tape.mul(norm_s2e, f_s_rows)?;
    let agg_e = tape.segment_sum(msg_e, edges.ends.clone(), l_w)?;
    let lin_e = tape.matmul(agg_e, theta_end)?;
    let res_e = tape.add(lin_e, end_nodes)?;
    let new_end = tape.relu(res_e);

    let msg_s = tape.mul(norm_e2s, f_e_rows)?;
    let agg_s = tape.segment_sum(msg_s, edges.starts.clone(), l_w)?;
    let lin_s = tape.matmul(agg_s, theta_start)?;
    let res_s = tape.add(lin_s, start_nodes)?;
    let new_start = tape.relu(res_s);

    Ok((new_start, new_end))
}

fn rowsum(tape: &mut Tape, v: Var) -> Result<Var, TensorError> {
    let d = tape.shape(v)[1];
    let ones = tape.constant(&crate::tensor::Tensor::from_vec(vec![d, 1], vec![1.0; d])?);
    tape.matmul(v, ones)
}

/// Scalar affinity per pair: cosine similarity between the connected start
/// and end node features. Node features are relu outputs, so the similarity
/// is already nonnegative.
fn cosine_weights(tape: &mut Tape, f_s_rows: Var, f_e_rows: Var) -> Result<Var, TensorError> {
    let prod = tape.mul(f_s_rows, f_e_rows)?;
    let dot = rowsum(tape, prod)?;
    let mut norm = |v: Var| -> Result<Var, TensorError> {
        let sq = tape.mul(v, v)?;
        let s = rowsum(tape, sq)?;
        let s = tape.add_scalar(s, 1e-12);
        Ok(tape.sqrt(s))
    };
    let ns = norm(f_s_rows)?;
    let ne = norm(f_e_rows)?;
    let denom = tape.mul(ns, ne)?;
    let denom = tape.add_scalar(denom, NORM_EPS);
    tape.div(dot, denom)
}

/// GCN-style block: scalar cosine edge weights, head-normalized, no edge
/// update; edge features pass through untouched.
fn gcn_block(
    tape: &mut Tape,
    store: &ParamStore,
    block: usize,
    edges: &DirectedEdges,
    start_nodes: Var,
    end_nodes: Var,
    l_w: usize,
) -> Result<(Var, Var), TensorError> {
    let f_s_rows = tape.index_rows(start_nodes, edges.starts.clone())?;
    let f_e_rows = tape.index_rows(end_nodes, edges.ends.clone())?;
    let w = cosine_weights(tape, f_s_rows, f_e_rows)?;

    let mut norm = |heads: &Arc<Vec<usize>>| -> Result<Var, TensorError> {
        let sums = tape.segment_sum(w, heads.clone(), l_w)?;
        let gathered = tape.index_rows(sums, heads.clone())?;
        let denom = tape.add_scalar(gathered, NORM_EPS);
        tape.div(w, denom)
    };
    let w_s2e = norm(&edges.starts)?;
    let w_e2s = norm(&edges.ends)?;

    let theta_start = tape.param(store, &format!("grb{block}.theta_start"))?;
    let theta_end = tape.param(store, &format!("grb{block}.theta_end"))?;

    let msg_e = tape.mul_col(f_s_rows, w_s2e)?;
    let agg_e = tape.segment_sum(msg_e, edges.ends.clone(), l_w)?;
    let lin_e = tape.matmul(agg_e, theta_end)?;
    let res_e = tape.add(lin_e, end_nodes)?;
    let new_end = tape.relu(res_e);

    let msg_s = tape.mul_col(f_e_rows, w_e2s)?;
    let agg_s = tape.segment_sum(msg_s, edges.starts.clone(), l_w)?;
    let lin_s = tape.matmul(agg_s, theta_start)?;
    let res_s = tape.add(lin_s, start_nodes)?;
    let new_start = tape.relu(res_s);

    Ok((new_start, new_end))
}

/// One graph reasoning block. Returns updated nodes plus the edge state the
/// next block consumes.
#[allow(clippy::too_many_arguments)]
pub fn grb(
    tape: &mut Tape,
    store: &ParamStore,
    block: usize,
    start_nodes: Var,
    end_nodes: Var,
    edges: &DirectedEdges,
    ablation: &Ablation,
    l_w: usize,
) -> Result<((Var, Var), DirectedEdges), ReasoningError> {
    if ablation.gcn_baseline {
        let (s, e) = gcn_block(tape, store, block, edges, start_nodes, end_nodes, l_w)?;
        let passthrough = DirectedEdges {
            pairs: edges.pairs.clone(),
            starts: edges.starts.clone(),
            ends: edges.ends.clone(),
            s2e: edges.s2e,
            e2s: edges.e2s,
        };
        return Ok(((s, e), passthrough));
    }

    let f_s_rows = tape.index_rows(start_nodes, edges.starts.clone())?;
    let f_e_rows = tape.index_rows(end_nodes, edges.ends.clone())?;

    let updated = if ablation.edge_update {
        let (theta_s2e, theta_e2s) = if ablation.directed {
            (
                tape.param(store, &format!("grb{block}.theta_s2e"))?,
                tape.param(store, &format!("grb{block}.theta_e2s"))?,
            )
        } else {
            let shared = tape.param(store, &format!("grb{block}.theta_edge"))?;
            (shared, shared)
        };
        edge_update(tape, edges, f_s_rows, f_e_rows, theta_s2e, theta_e2s)?
    } else {
        DirectedEdges {
            pairs: edges.pairs.clone(),
            starts: edges.starts.clone(),
            ends: edges.ends.clone(),
            s2e: edges.s2e,
            e2s: edges.e2s,
        }
    };

    let (norm_s2e, norm_e2s) = normalize_edges(tape, &updated, l_w)?;
    let theta_start = tape.param(store, &format!("grb{block}.theta_start"))?;
    let theta_end = tape.param(store, &format!("grb{block}.theta_end"))?;
    let nodes = node_update(
        tape, &updated, start_nodes, end_nodes, f_s_rows, f_e_rows, norm_s2e, norm_e2s,
        theta_start, theta_end, l_w,
    )?;
    Ok((nodes, updated))
}

/// Two stacked reasoning blocks with separate parameters.
pub fn grm(
    tape: &mut Tape,
    store: &ParamStore,
    start_nodes: Var,
    end_nodes: Var,
    edges: DirectedEdges,
    ablation: &Ablation,
    l_w: usize,
) -> Result<((Var, Var), DirectedEdges), ReasoningError> {
    let ((s1, e1), edges1) = grb(tape, store, 1, start_nodes, end_nodes, &edges, ablation, l_w)?;
    grb(tape, store, 2, s1, e1, &edges1, ablation, l_w)
}
