//! Full network assembly: backbone, graph construction, reasoning and the
//! output heads, plus seeded parameter initialization.

use crate::graph::{
    base_forward, build_edge_set, edge_content_features, gcm_branches, BoundaryContentGraph,
};
use crate::proposals::{score_all, ScoreVars};
use crate::reasoning::{grm, split_directed, ReasoningError};
use crate::tensor::{ParamStore, Tape, Tensor, TensorError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input features must be [{expected_d} x {expected_l}], got {got:?}")]
    BadInput {
        expected_d: usize,
        expected_l: usize,
        got: Vec<usize>,
    },
    #[error("parameter `{name}` has shape {got:?}, expected {expected:?}")]
    ParamShape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("parameter set mismatch: missing `{0}`")]
    MissingParam(String),
    #[error("parameter set mismatch: unexpected `{0}`")]
    UnexpectedParam(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Reasoning(#[from] ReasoningError),
}

/// Feature and graph dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDims {
    pub d_i: usize,
    pub d_b: usize,
    pub d_g: usize,
    pub d_c: usize,
    pub l_w: usize,
    /// Maximum proposal duration in snippets.
    pub d_max: usize,
    /// Content samples per edge.
    pub n_content: usize,
}

/// Reasoning-variant switches. `gcn_baseline` replaces the edge-feature
/// message passing with cosine-similarity weights and overrides the other
/// two flags; `directed = false` shares one edge matrix and one feature row
/// between the two directions; `edge_update = false` skips the edge update
/// and normalizes the incoming edge features directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ablation {
    pub directed: bool,
    pub edge_update: bool,
    pub gcn_baseline: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation {
            directed: true,
            edge_update: true,
            gcn_baseline: false,
        }
    }
}

pub struct BcGnn {
    pub dims: ModelDims,
    pub ablation: Ablation,
    pairs: Arc<Vec<(usize, usize)>>,
}

impl BcGnn {
    pub fn new(dims: ModelDims, ablation: Ablation) -> Self {
        let pairs = Arc::new(build_edge_set(dims.l_w, dims.d_max));
        BcGnn {
            dims,
            ablation,
            pairs,
        }
    }

    pub fn pairs(&self) -> &Arc<Vec<(usize, usize)>> {
        &self.pairs
    }

    /// Expected parameter names and shapes for this configuration, in
    /// initialization order. fan-in is carried for the init bound.
    fn param_specs(&self) -> Vec<(String, Vec<usize>, usize)> {
        let d = &self.dims;
        let k = 3usize;
        let mut v: Vec<(String, Vec<usize>, usize)> = Vec::new();
        let mut conv = |name: &str, c_out: usize, c_in: usize| {
            v.push((format!("{name}.weight"), vec![c_out, c_in, k], c_in * k));
            v.push((format!("{name}.bias"), vec![c_out], c_in * k));
        };
        conv("base.conv1", d.d_b, d.d_i);
        conv("base.conv2", d.d_b, d.d_b);
        conv("gcm.start", d.d_g, d.d_b);
        conv("gcm.end", d.d_g, d.d_b);
        conv("gcm.content", d.d_c, d.d_b);
        let fc_in = d.d_c * d.n_content;
        v.push(("gcm.fc1.weight".into(), vec![fc_in, d.d_g], fc_in));
        v.push(("gcm.fc1.bias".into(), vec![1, d.d_g], fc_in));

        for block in 1..=2 {
            if !self.ablation.gcn_baseline && self.ablation.edge_update {
                if self.ablation.directed {
                    v.push((format!("grb{block}.theta_s2e"), vec![d.d_g, d.d_g], d.d_g));
                    v.push((format!("grb{block}.theta_e2s"), vec![d.d_g, d.d_g], d.d_g));
                } else {
                    v.push((format!("grb{block}.theta_edge"), vec![d.d_g, d.d_g], d.d_g));
                }
            }
            v.push((format!("grb{block}.theta_start"), vec![d.d_g, d.d_g], d.d_g));
            v.push((format!("grb{block}.theta_end"), vec![d.d_g, d.d_g], d.d_g));
        }

        v.push(("out.theta_so".into(), vec![d.d_g, 1], d.d_g));
        v.push(("out.bias_so".into(), vec![1, 1], d.d_g));
        v.push(("out.theta_eo".into(), vec![d.d_g, 1], d.d_g));
        v.push(("out.bias_eo".into(), vec![1, 1], d.d_g));
        v.push(("out.theta_co".into(), vec![2 * d.d_g, 1], 2 * d.d_g));
        v.push(("out.bias_co".into(), vec![1, 1], 2 * d.d_g));
        v
    }

    /// Seeded uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        for (name, shape, fan_in) in self.param_specs() {
            store
                .insert_uniform(&name, shape, fan_in, &mut rng)
                .expect("spec names are unique");
        }
        store
    }

    /// Check a loaded store against this configuration, name by name and
    /// shape by shape.
    pub fn verify_store(&self, store: &ParamStore) -> Result<(), ModelError> {
        let specs = self.param_specs();
        for (name, shape, _) in &specs {
            match store.get(name) {
                Ok(t) if &t.shape == shape => {}
                Ok(t) => {
                    return Err(ModelError::ParamShape {
                        name: name.clone(),
                        expected: shape.clone(),
                        got: t.shape.clone(),
                    })
                }
                Err(_) => return Err(ModelError::MissingParam(name.clone())),
            }
        }
        let expected: std::collections::HashSet<&str> =
            specs.iter().map(|(n, _, _)| n.as_str()).collect();
        for name in store.names() {
            if !expected.contains(name.as_str()) {
                return Err(ModelError::UnexpectedParam(name.clone()));
            }
        }
        Ok(())
    }

    /// Record the whole forward pass for one observation window and return
    /// the differentiable score heads.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        features: &Tensor,
    ) -> Result<ScoreVars, ModelError> {
        let d = &self.dims;
        if features.shape != [d.d_i, d.l_w] {
            return Err(ModelError::BadInput {
                expected_d: d.d_i,
                expected_l: d.l_w,
                got: features.shape.clone(),
            });
        }
        let x = tape.constant(features);
        let f_b = base_forward(tape, store, x)?;
        let (f_s, f_e, f_c) = gcm_branches(tape, store, f_b)?;
        let start_nodes = tape.transpose(f_s)?;
        let end_nodes = tape.transpose(f_e)?;
        let edge_features = edge_content_features(tape, store, f_c, &self.pairs, d.n_content)?;
        let graph = BoundaryContentGraph {
            start_nodes,
            end_nodes,
            pairs: self.pairs.clone(),
            edge_features,
        };
        let directed = split_directed(&graph);
        let ((s_final, e_final), edges_final) = grm(
            tape,
            store,
            start_nodes,
            end_nodes,
            directed,
            &self.ablation,
            d.l_w,
        )?;
        Ok(score_all(tape, store, s_final, e_final, &edges_final)?)
    }

    /// Forward over raw feature data already known to be the right shape.
    pub fn forward_window(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        window: &crate::data::ObservationWindow,
    ) -> Result<ScoreVars, ModelError> {
        self.forward(tape, store, &window.features)
    }
}

/// Convenience for tests and tools: a forward pass plus materialized
/// proposals.
pub fn forward_proposals(
    model: &BcGnn,
    store: &ParamStore,
    features: &Tensor,
) -> Result<Vec<crate::proposals::CandidateProposal>, ModelError> {
    let mut tape = Tape::new();
    let scores = model.forward(&mut tape, store, features)?;
    Ok(crate::proposals::score_candidates(&tape, &scores))
}

/// The four ablation rows exercised by the benchmark: full model first.
pub fn ablation_grid() -> [(&'static str, Ablation); 4] {
    [
        (
            "full",
            Ablation {
                directed: true,
                edge_update: true,
                gcn_baseline: false,
            },
        ),
        (
            "no_edge_update",
            Ablation {
                directed: true,
                edge_update: false,
                gcn_baseline: false,
            },
        ),
        (
            "undirected",
            Ablation {
                directed: false,
                edge_update: true,
                gcn_baseline: false,
            },
        ),
        (
            "gcn",
            Ablation {
                directed: false,
                edge_update: false,
                gcn_baseline: true,
            },
        ),
    ]
}
