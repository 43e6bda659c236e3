//! Weighted binary logistic losses over the deduplicated start, end and
//! content sets.

use super::{LabelSet, TrainError};
use crate::proposals::ScoreVars;
use crate::tensor::{Tape, Tensor, Var};
use std::sync::Arc;

/// Weighted binary logistic regression loss:
/// `-(1/N) * sum(a+ * b * log p + a- * (1-b) * log(1-p))` with
/// `a+ = N / sum(b)` and `a- = N / sum(1-b)`. When one class is absent its
/// term is dropped and the other weight is 1.
pub fn weighted_bl_loss(tape: &mut Tape, p: Var, labels: &[f32]) -> Result<Var, TrainError> {
    let n = tape.value(p).len();
    if n != labels.len() {
        return Err(TrainError::LengthMismatch {
            probs: n,
            labels: labels.len(),
        });
    }
    if n == 0 {
        return Err(TrainError::EmptySet);
    }
    if let Some((i, &v)) = tape
        .value(p)
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v) || **v == 0.0 || **v == 1.0)
    {
        return Err(TrainError::ProbabilityOutOfRange { index: i, value: v });
    }

    let pos: f32 = labels.iter().sum();
    let neg = n as f32 - pos;
    let (alpha_pos, alpha_neg) = match (pos > 0.0, neg > 0.0) {
        (true, true) => (n as f32 / pos, n as f32 / neg),
        (true, false) => (1.0, 0.0),
        (false, true) => (0.0, 1.0),
        (false, false) => unreachable!("n > 0"),
    };

    let shape = tape.shape(p).to_vec();
    let w_pos: Vec<f32> = labels.iter().map(|b| b * alpha_pos / n as f32).collect();
    let w_neg: Vec<f32> = labels
        .iter()
        .map(|b| (1.0 - b) * alpha_neg / n as f32)
        .collect();

    let log_p = tape.log(p)?;
    let wp = tape.constant(&Tensor::from_vec(shape.clone(), w_pos)?);
    let pos_term = tape.mul(log_p, wp)?;
    let pos_sum = tape.sum(pos_term);

    let neg_p = tape.mul_scalar(p, -1.0);
    let one_minus = tape.add_scalar(neg_p, 1.0);
    let log_q = tape.log(one_minus)?;
    let wn = tape.constant(&Tensor::from_vec(shape, w_neg)?);
    let neg_term = tape.mul(log_q, wn)?;
    let neg_sum = tape.sum(neg_term);

    let total = tape.add(pos_sum, neg_sum)?;
    Ok(tape.mul_scalar(total, -1.0))
}

/// Deduplicated boundary index lists for a pair set: every location that
/// occurs as a start (resp. end), sorted ascending.
pub fn unique_boundaries(pairs: &[(usize, usize)]) -> (Vec<usize>, Vec<usize>) {
    let mut starts: Vec<usize> = pairs.iter().map(|&(i, _)| i).collect();
    starts.sort_unstable();
    starts.dedup();
    let mut ends: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
    ends.sort_unstable();
    ends.dedup();
    (starts, ends)
}

/// Multi-task objective: `L_bl(S) + L_bl(E) + L_bl(C)`. Boundary locations
/// shared by several proposals enter their set once, with the single shared
/// probability.
pub fn total_loss(
    tape: &mut Tape,
    scores: &ScoreVars,
    labels: &LabelSet,
) -> Result<Var, TrainError> {
    let (starts, ends) = unique_boundaries(&scores.pairs);
    let sel_start: Vec<f32> = starts.iter().map(|&i| labels.b_start[i]).collect();
    let sel_end: Vec<f32> = ends.iter().map(|&j| labels.b_end[j]).collect();

    let p_s = tape.index_rows(scores.p_start, Arc::new(starts))?;
    let l_s = weighted_bl_loss(tape, p_s, &sel_start)?;
    let p_e = tape.index_rows(scores.p_end, Arc::new(ends))?;
    let l_e = weighted_bl_loss(tape, p_e, &sel_end)?;
    let l_c = weighted_bl_loss(tape, scores.p_content, &labels.b_content)?;

    let se = tape.add(l_s, l_e)?;
    Ok(tape.add(se, l_c)?)
}
