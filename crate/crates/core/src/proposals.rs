//! Output module: boundary probabilities per node, content confidence per
//! edge, one candidate proposal per (start, end) pair.

use crate::reasoning::DirectedEdges;
use crate::tensor::{ParamStore, Tape, TensorError, Var};
use std::sync::Arc;

/// One scored candidate: snippet boundary locations plus start, end and
/// content probabilities, all strictly inside (0, 1) for finite inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateProposal {
    pub t_s: usize,
    pub t_e: usize,
    pub p_s: f32,
    pub p_e: f32,
    pub p_c: f32,
}

/// Differentiable score heads: per-location boundary probabilities
/// (`[l_w x 1]` each) and per-pair content probability (`[|pairs| x 1]`).
pub struct ScoreVars {
    pub pairs: Arc<Vec<(usize, usize)>>,
    pub p_start: Var,
    pub p_end: Var,
    pub p_content: Var,
}

fn scored_head(
    tape: &mut Tape,
    store: &ParamStore,
    features: Var,
    weight: &str,
    bias: &str,
) -> Result<Var, TensorError> {
    let w = tape.param(store, weight)?;
    let b = tape.param(store, bias)?;
    let lin = tape.matmul(features, w)?;
    let shifted = tape.add_row(lin, b)?;
    Ok(tape.sigmoid(shifted))
}

/// Score every node and pair: `p_s = sigmoid(theta_SO . n_s + b)` per start
/// location, `p_e` likewise per end location, and
/// `p_c = sigmoid(theta_CO . (e_s2e || e_e2s) + b)` per pair. Boundary
/// probabilities are computed once per location, so proposals sharing a
/// boundary share its probability exactly.
pub fn score_all(
    tape: &mut Tape,
    store: &ParamStore,
    start_nodes: Var,
    end_nodes: Var,
    edges: &DirectedEdges,
) -> Result<ScoreVars, TensorError> {
    let p_start = scored_head(tape, store, start_nodes, "out.theta_so", "out.bias_so")?;
    let p_end = scored_head(tape, store, end_nodes, "out.theta_eo", "out.bias_eo")?;
    let both = tape.concat_cols(edges.s2e, edges.e2s)?;
    let p_content = scored_head(tape, store, both, "out.theta_co", "out.bias_co")?;
    Ok(ScoreVars {
        pairs: edges.pairs.clone(),
        p_start,
        p_end,
        p_content,
    })
}

/// Materialize one proposal per pair, ordered like the pair list
/// (lexicographic by `(t_s, t_e)`).
pub fn score_candidates(tape: &Tape, scores: &ScoreVars) -> Vec<CandidateProposal> {
    let ps = tape.value(scores.p_start);
    let pe = tape.value(scores.p_end);
    let pc = tape.value(scores.p_content);
    scores
        .pairs
        .iter()
        .enumerate()
        .map(|(r, &(i, j))| CandidateProposal {
            t_s: i,
            t_e: j,
            p_s: ps[i],
            p_e: pe[j],
            p_c: pc[r],
        })
        .collect()
}
