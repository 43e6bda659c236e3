//! Backbone and boundary-content graph construction.
//!
//! The base module runs two stacked same-padded 1-d convolutions with relu.
//! Three further conv heads split the backbone features into start, end and
//! content branches. Candidate (start, end) pairs with `i < j` and
//! `j - i <= D_max` become graph edges; the content feature of an edge is a
//! fully connected projection of `N` linearly interpolated content columns.

use crate::data::{interp_positions, DataError};
use crate::tensor::{ParamStore, Tape, TensorError, Var};
use std::sync::Arc;

/// Node features (rows) plus the undirected edge structure.
///
/// `start_nodes` and `end_nodes` are `[l_w x D_g]`; `edge_features` is
/// `[|edges| x D_g]`, row r belonging to `pairs[r]`.
pub struct BoundaryContentGraph {
    pub start_nodes: Var,
    pub end_nodes: Var,
    pub pairs: Arc<Vec<(usize, usize)>>,
    pub edge_features: Var,
}

/// All legal `(i, j)` with `i < j` and `j - i <= d_max`, sorted
/// lexicographically.
pub fn build_edge_set(l_w: usize, d_max: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..l_w {
        let hi = (i + d_max).min(l_w - 1);
        for j in (i + 1)..=hi {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Start indices and end indices of an edge list, as shareable index vectors.
pub fn edge_endpoints(pairs: &[(usize, usize)]) -> (Arc<Vec<usize>>, Arc<Vec<usize>>) {
    (
        Arc::new(pairs.iter().map(|&(i, _)| i).collect()),
        Arc::new(pairs.iter().map(|&(_, j)| j).collect()),
    )
}

fn conv_relu(
    tape: &mut Tape,
    store: &ParamStore,
    x: Var,
    prefix: &str,
) -> Result<Var, TensorError> {
    let w = tape.param(store, &format!("{prefix}.weight"))?;
    let b = tape.param(store, &format!("{prefix}.bias"))?;
    let y = tape.conv1d_same(x, w, b)?;
    Ok(tape.relu(y))
}

/// Two stacked conv1d + relu: `[D_i x l_w] -> [D_b x l_w]`.
pub fn base_forward(tape: &mut Tape, store: &ParamStore, f_i: Var) -> Result<Var, TensorError> {
    let h = conv_relu(tape, store, f_i, "base.conv1")?;
    conv_relu(tape, store, h, "base.conv2")
}

/// Three independent conv heads over the backbone: start and end branches
/// share dimension `D_g`, content uses `D_c`.
pub fn gcm_branches(
    tape: &mut Tape,
    store: &ParamStore,
    f_b: Var,
) -> Result<(Var, Var, Var), TensorError> {
    let f_s = conv_relu(tape, store, f_b, "gcm.start")?;
    let f_e = conv_relu(tape, store, f_b, "gcm.end")?;
    let f_c = conv_relu(tape, store, f_b, "gcm.content")?;
    Ok((f_s, f_e, f_c))
}

/// Content features for every edge at once: sample `n` interpolated columns
/// of `f_c` per pair, flatten channel-major, apply the shared fully connected
/// layer and relu. Output is `[|pairs| x D_g]`.
pub fn edge_content_features(
    tape: &mut Tape,
    store: &ParamStore,
    f_c: Var,
    pairs: &[(usize, usize)],
    n: usize,
) -> Result<Var, TensorError> {
    let l_w = tape.shape(f_c)[1];
    let mut positions = Vec::with_capacity(pairs.len() * n);
    for &(i, j) in pairs {
        debug_assert!(i < j && j < l_w);
        positions.extend(interp_positions(i, j, n));
    }
    let sampled = tape.interp_rows(f_c, Arc::new(positions), n)?;
    let w = tape.param(store, "gcm.fc1.weight")?;
    let b = tape.param(store, "gcm.fc1.bias")?;
    let projected = tape.matmul(sampled, w)?;
    let shifted = tape.add_row(projected, b)?;
    Ok(tape.relu(shifted))
}

/// Single-edge content feature per the graph construction contract:
/// `relu(fc1(reshape(interp_content(F_c, i, j, N))))`, a `[1 x D_g]` row.
///
/// The batched [`edge_content_features`] must agree with this column for
/// column; the pair is exercised in tests.
pub fn edge_content_feature(
    tape: &mut Tape,
    store: &ParamStore,
    f_c: Var,
    i: usize,
    j: usize,
    n: usize,
) -> Result<Var, DataError> {
    let sampled = crate::data::interp_content(tape, f_c, i, j, n)?;
    let tensor_err = |source: TensorError| DataError::Tensor {
        context: "edge_content_feature",
        source,
    };
    let d_c = tape.shape(sampled)[0];
    let flat = tape.reshape(sampled, vec![1, d_c * n]).map_err(tensor_err)?;
    let w = tape.param(store, "gcm.fc1.weight").map_err(tensor_err)?;
    let b = tape.param(store, "gcm.fc1.bias").map_err(tensor_err)?;
    let projected = tape.matmul(flat, w).map_err(tensor_err)?;
    let shifted = tape.add_row(projected, b).map_err(tensor_err)?;
    Ok(tape.relu(shifted))
}
