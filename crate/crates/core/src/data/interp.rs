//! Content sampling between boundary locations.

use super::DataError;
use crate::tensor::{Tape, TensorError, Var};
use std::sync::Arc;

/// Sampling positions `i + n * (j - i) / (N - 1)` for `n = 0..N`.
pub fn interp_positions(i: usize, j: usize, n: usize) -> Vec<f32> {
    let step = (j - i) as f32 / (n - 1) as f32;
    (0..n).map(|k| i as f32 + k as f32 * step).collect()
}

/// Sample `n` content vectors between locations `i` and `j` of `f_c`
/// (`[D_c x l_w]` on the tape) by per-channel linear interpolation, yielding
/// a differentiable `[D_c x n]` tensor.
pub fn interp_content(
    tape: &mut Tape,
    f_c: Var,
    i: usize,
    j: usize,
    n: usize,
) -> Result<Var, DataError> {
    let l_w = tape.shape(f_c)[1];
    if i >= j || j > l_w - 1 {
        return Err(DataError::IllegalPair { i, j });
    }
    if n < 2 {
        return Err(DataError::BadTargetLength { target: n });
    }
    let d_c = tape.shape(f_c)[0];
    let positions = Arc::new(interp_positions(i, j, n));
    let tensor_err = |source: TensorError| DataError::Tensor {
        context: "interp_content",
        source,
    };
    // One "row" holding all channels, then reshape to [D_c x n].
    let flat = tape.interp_rows(f_c, positions, n).map_err(tensor_err)?;
    tape.reshape(flat, vec![d_c, n]).map_err(tensor_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{grad_check, ParamStore, Tensor};

    fn f_c_tensor() -> Tensor {
        Tensor::from_vec(vec![1, 4], vec![0.0, 1.0, 2.0, 3.0]).unwrap()
    }

    #[test]
    fn adjacent_pair_returns_grid_columns() {
        let mut tape = Tape::new();
        let fc = tape.constant(&Tensor::from_vec(vec![2, 4], vec![
            0.0, 1.0, 2.0, 3.0, //
            9.0, 8.0, 7.0, 6.0,
        ]).unwrap());
        let out = interp_content(&mut tape, fc, 1, 2, 2).unwrap();
        assert_eq!(tape.shape(out), &[2, 2]);
        assert_eq!(tape.value(out), &[1.0, 2.0, 8.0, 7.0]);
    }

    #[test]
    fn grid_aligned_samples_are_exact() {
        let mut tape = Tape::new();
        let fc = tape.constant(&f_c_tensor());
        let out = interp_content(&mut tape, fc, 0, 3, 4).unwrap();
        assert_eq!(tape.value(out), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn midpoint_interpolation() {
        let mut tape = Tape::new();
        let fc = tape.constant(&Tensor::from_vec(vec![1, 2], vec![0.0, 2.0]).unwrap());
        let out = interp_content(&mut tape, fc, 0, 1, 3).unwrap();
        assert_eq!(tape.value(out), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn illegal_pair_is_rejected() {
        let mut tape = Tape::new();
        let fc = tape.constant(&f_c_tensor());
        assert!(matches!(
            interp_content(&mut tape, fc, 2, 2, 3),
            Err(DataError::IllegalPair { i: 2, j: 2 })
        ));
        assert!(matches!(
            interp_content(&mut tape, fc, 3, 1, 3),
            Err(DataError::IllegalPair { .. })
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut store = ParamStore::new();
        store
            .insert(
                "fc",
                Tensor::from_vec(vec![2, 5], (0..10).map(|v| 0.1 * v as f32 + 0.05).collect())
                    .unwrap(),
            )
            .unwrap();
        let weights = Tensor::from_vec(vec![2, 3], vec![0.3, -0.7, 1.1, 0.9, -0.2, 0.4]).unwrap();
        let f = |t: &mut Tape, s: &ParamStore| {
            let fc = t.param(s, "fc")?;
            let v = interp_content(t, fc, 1, 4, 3).map_err(|e| match e {
                DataError::Tensor { source, .. } => source,
                other => panic!("unexpected {other:?}"),
            })?;
            let w = t.constant(&weights);
            let p = t.mul(v, w)?;
            Ok(t.sum(p))
        };
        let err = grad_check(f, &mut store, 1e-4).unwrap();
        assert!(err <= 1e-3, "error {err}");
    }
}
