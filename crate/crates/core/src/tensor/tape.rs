//! Tape-based reverse-mode differentiation.
//!
//! Operations append nodes to a [`Tape`]; node indices only ever point
//! backwards, so the tape order is already topological and the backward pass
//! is a single reverse sweep. Reductions (matmul, conv1d, sum, segment sums,
//! interpolation) accumulate in f64 and round once per output element, which
//! keeps results deterministic across thread counts and makes finite
//! difference checks usable in f32.

use super::{ParamStore, Tensor, TensorError};
use crate::par::for_each_row;
use std::sync::Arc;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddScalar(Var),
    MulScalar(Var, f32),
    Matmul(Var, Var),
    Transpose(Var),
    Relu(Var),
    Sigmoid(Var),
    Log(Var),
    Sqrt(Var),
    Sum(Var),
    Conv1d {
        input: Var,
        weight: Var,
        bias: Var,
        pad: usize,
    },
    SegmentSum {
        src: Var,
        segments: Arc<Vec<usize>>,
    },
    IndexRows {
        src: Var,
        idx: Arc<Vec<usize>>,
    },
    ConcatCols(Var, Var),
    InterpRows {
        src: Var,
        positions: Arc<Vec<f32>>,
    },
    AddRow {
        mat: Var,
        row: Var,
    },
    MulCol {
        mat: Var,
        col: Var,
    },
    Reshape(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::AddScalar(..) => "add_scalar",
            Op::MulScalar(..) => "mul_scalar",
            Op::Matmul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Relu(..) => "relu",
            Op::Sigmoid(..) => "sigmoid",
            Op::Log(..) => "log",
            Op::Sqrt(..) => "sqrt",
            Op::Sum(..) => "sum",
            Op::Conv1d { .. } => "conv1d",
            Op::SegmentSum { .. } => "segment_sum",
            Op::IndexRows { .. } => "index_rows",
            Op::ConcatCols(..) => "concat_cols",
            Op::InterpRows { .. } => "interp_rows",
            Op::AddRow { .. } => "add_row",
            Op::MulCol { .. } => "mul_col",
            Op::Reshape(..) => "reshape",
        }
    }
}

struct Node {
    op: Op,
    shape: Vec<usize>,
    data: Vec<f32>,
    grad: Vec<f32>,
    needs_grad: bool,
    param: Option<usize>,
    /// Extended-precision value for scalar nodes, used by grad_check.
    fval: Option<f64>,
}

/// Records a computation graph and replays it in reverse for gradients.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn rows_cols(shape: &[usize], op: &'static str) -> Result<(usize, usize), TensorError> {
    match shape {
        [r, c] => Ok((*r, *c)),
        _ => Err(TensorError::Rank {
            op,
            expected: 2,
            shape: shape.to_vec(),
        }),
    }
}

fn same_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<(), TensorError> {
    if a != b {
        return Err(TensorError::DimMismatch {
            op,
            dim: "shape",
            expected: a.iter().product(),
            got: b.iter().product(),
        });
    }
    Ok(())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(
        &mut self,
        op: Op,
        shape: Vec<usize>,
        data: Vec<f32>,
        needs_grad: bool,
        fval: Option<f64>,
    ) -> Var {
        let grad = vec![0.0; data.len()];
        self.nodes.push(Node {
            op,
            shape,
            data,
            grad,
            needs_grad,
            param: None,
            fval,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    pub fn value(&self, v: Var) -> &[f32] {
        &self.node(v).data
    }

    /// Gradient of `v` from the most recent backward pass.
    pub fn grad(&self, v: Var) -> &[f32] {
        &self.node(v).grad
    }

    /// Scalar value in extended precision where available.
    pub fn scalar_f64(&self, v: Var) -> f64 {
        let n = self.node(v);
        n.fval.unwrap_or(n.data[0] as f64)
    }

    fn needs(&self, v: Var) -> bool {
        self.node(v).needs_grad
    }

    /// Record an untracked constant.
    pub fn constant(&mut self, t: &Tensor) -> Var {
        let fval = (t.numel() == 1).then(|| t.data[0] as f64);
        self.push(Op::Leaf, t.shape.clone(), t.data.clone(), false, fval)
    }

    /// Record a tracked leaf (gradient readable via [`Tape::grad`]).
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        let fval = (t.numel() == 1).then(|| t.data[0] as f64);
        self.push(Op::Leaf, t.shape.clone(), t.data.clone(), true, fval)
    }

    /// Record a named parameter from `store`; backward accumulates its
    /// gradient back into the store.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var, TensorError> {
        let slot = store
            .slot(name)
            .ok_or_else(|| TensorError::UnknownParam { name: name.into() })?;
        let t = store.by_slot(slot);
        let fval = (t.numel() == 1).then(|| t.data[0] as f64);
        let v = self.push(Op::Leaf, t.shape.clone(), t.data.clone(), true, fval);
        self.nodes[v.0].param = Some(slot);
        Ok(v)
    }

    fn scalar_fval2(&self, out_len: usize, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Option<f64> {
        (out_len == 1).then(|| f(self.scalar_f64(a), self.scalar_f64(b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        same_shape("add", self.shape(a), self.shape(b))?;
        let data: Vec<f32> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        let fval = self.scalar_fval2(data.len(), a, b, |x, y| x + y);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Add(a, b), self.shape(a).to_vec(), data, needs, fval))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        same_shape("sub", self.shape(a), self.shape(b))?;
        let data: Vec<f32> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x - y)
            .collect();
        let fval = self.scalar_fval2(data.len(), a, b, |x, y| x - y);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Sub(a, b), self.shape(a).to_vec(), data, needs, fval))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        same_shape("mul", self.shape(a), self.shape(b))?;
        let data: Vec<f32> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        let fval = self.scalar_fval2(data.len(), a, b, |x, y| x * y);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Mul(a, b), self.shape(a).to_vec(), data, needs, fval))
    }

    /// Elementwise quotient.
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        same_shape("div", self.shape(a), self.shape(b))?;
        let data: Vec<f32> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x / y)
            .collect();
        let fval = self.scalar_fval2(data.len(), a, b, |x, y| x / y);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Div(a, b), self.shape(a).to_vec(), data, needs, fval))
    }

    pub fn add_scalar(&mut self, a: Var, c: f32) -> Var {
        let data: Vec<f32> = self.value(a).iter().map(|x| x + c).collect();
        let fval = (data.len() == 1).then(|| self.scalar_f64(a) + c as f64);
        let needs = self.needs(a);
        self.push(Op::AddScalar(a), self.shape(a).to_vec(), data, needs, fval)
    }

    pub fn mul_scalar(&mut self, a: Var, c: f32) -> Var {
        let data: Vec<f32> = self.value(a).iter().map(|x| x * c).collect();
        let fval = (data.len() == 1).then(|| self.scalar_f64(a) * c as f64);
        let needs = self.needs(a);
        self.push(Op::MulScalar(a, c), self.shape(a).to_vec(), data, needs, fval)
    }

    /// `[m x k] . [k x n] -> [m x n]` with f64 accumulation.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (m, k) = rows_cols(self.shape(a), "matmul")?;
        let (kb, n) = rows_cols(self.shape(b), "matmul")?;
        if k != kb {
            return Err(TensorError::DimMismatch {
                op: "matmul",
                dim: "inner",
                expected: k,
                got: kb,
            });
        }
        let mut data = vec![0.0f32; m * n];
        {
            let (ad, bd) = (self.value(a), self.value(b));
            for_each_row(&mut data, n, |r, out_row| {
                let arow = &ad[r * k..(r + 1) * k];
                for (c, out) in out_row.iter_mut().enumerate() {
                    let mut acc = 0.0f64;
                    for (kk, &av) in arow.iter().enumerate() {
                        acc += av as f64 * bd[kk * n + c] as f64;
                    }
                    *out = acc as f32;
                }
            });
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Matmul(a, b), vec![m, n], data, needs, None))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, TensorError> {
        let (r, c) = rows_cols(self.shape(a), "transpose")?;
        let src = self.value(a);
        let mut data = vec![0.0f32; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = src[i * c + j];
            }
        }
        let needs = self.needs(a);
        Ok(self.push(Op::Transpose(a), vec![c, r], data, needs, None))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let data: Vec<f32> = self.value(a).iter().map(|x| x.max(0.0)).collect();
        let fval = (data.len() == 1).then(|| self.scalar_f64(a).max(0.0));
        let needs = self.needs(a);
        self.push(Op::Relu(a), self.shape(a).to_vec(), data, needs, fval)
    }

    /// Logistic function, clamped into the open f32 interval (0, 1) so that
    /// saturated activations never round to exactly 0 or 1 and downstream
    /// log-losses stay finite.
    pub fn sigmoid(&mut self, a: Var) -> Var {
        const BELOW_ONE: f32 = 1.0 - f32::EPSILON / 2.0;
        let squash = |x: f32| {
            let v = (1.0f64 / (1.0 + (-x as f64).exp())) as f32;
            v.clamp(f32::MIN_POSITIVE, BELOW_ONE)
        };
        let data: Vec<f32> = self.value(a).iter().map(|&x| squash(x)).collect();
        let fval = (data.len() == 1).then(|| squash(self.scalar_f64(a) as f32) as f64);
        let needs = self.needs(a);
        self.push(Op::Sigmoid(a), self.shape(a).to_vec(), data, needs, fval)
    }

    /// Natural log; errors on non-positive entries.
    pub fn log(&mut self, a: Var) -> Result<Var, TensorError> {
        if let Some((i, &v)) = self.value(a).iter().enumerate().find(|(_, v)| **v <= 0.0) {
            return Err(TensorError::LogDomain { index: i, value: v });
        }
        let data: Vec<f32> = self.value(a).iter().map(|x| x.ln()).collect();
        let fval = (data.len() == 1).then(|| self.scalar_f64(a).ln());
        let needs = self.needs(a);
        Ok(self.push(Op::Log(a), self.shape(a).to_vec(), data, needs, fval))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let data: Vec<f32> = self.value(a).iter().map(|x| x.sqrt()).collect();
        let fval = (data.len() == 1).then(|| self.scalar_f64(a).sqrt());
        let needs = self.needs(a);
        self.push(Op::Sqrt(a), self.shape(a).to_vec(), data, needs, fval)
    }

    /// Sum of all entries, f64-accumulated.
    pub fn sum(&mut self, a: Var) -> Var {
        let acc: f64 = self.value(a).iter().map(|&x| x as f64).sum();
        let needs = self.needs(a);
        self.push(Op::Sum(a), vec![1], vec![acc as f32], needs, Some(acc))
    }

    /// Same-padded 1-d convolution: input `[C_in x L]`, weight
    /// `[C_out x C_in x k]` with odd `k`, bias `[C_out]`, output `[C_out x L]`.
    pub fn conv1d_same(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var, TensorError> {
        let (c_in, len) = rows_cols(self.shape(input), "conv1d")?;
        let wshape = self.shape(weight).to_vec();
        let (c_out, wc_in, k) = match wshape.as_slice() {
            [o, i, k] => (*o, *i, *k),
            _ => {
                return Err(TensorError::Rank {
                    op: "conv1d",
                    expected: 3,
                    shape: wshape,
                })
            }
        };
        if wc_in != c_in {
            return Err(TensorError::DimMismatch {
                op: "conv1d",
                dim: "in_channels",
                expected: c_in,
                got: wc_in,
            });
        }
        if k % 2 == 0 {
            return Err(TensorError::EvenKernel { k });
        }
        let bshape = self.shape(bias);
        if bshape.iter().product::<usize>() != c_out {
            return Err(TensorError::DimMismatch {
                op: "conv1d",
                dim: "bias",
                expected: c_out,
                got: bshape.iter().product(),
            });
        }
        let pad = (k - 1) / 2;
        let mut data = vec![0.0f32; c_out * len];
        {
            let (ind, wd, bd) = (self.value(input), self.value(weight), self.value(bias));
            for_each_row(&mut data, len, |o, out_row| {
                let wbase = o * c_in * k;
                for (t, out) in out_row.iter_mut().enumerate() {
                    let mut acc = bd[o] as f64;
                    for c in 0..c_in {
                        for dk in 0..k {
                            let s = t + dk;
                            if s >= pad && s - pad < len {
                                acc += wd[wbase + c * k + dk] as f64
                                    * ind[c * len + (s - pad)] as f64;
                            }
                        }
                    }
                    *out = acc as f32;
                }
            });
        }
        let needs = self.needs(input) || self.needs(weight) || self.needs(bias);
        Ok(self.push(
            Op::Conv1d {
                input,
                weight,
                bias,
                pad,
            },
            vec![c_out, len],
            data,
            needs,
            None,
        ))
    }

    /// Scatter-sum rows of `src` into `n_segments` output rows:
    /// `out[segments[r]] += src[r]`.
    pub fn segment_sum(
        &mut self,
        src: Var,
        segments: Arc<Vec<usize>>,
        n_segments: usize,
    ) -> Result<Var, TensorError> {
        let (r, d) = rows_cols(self.shape(src), "segment_sum")?;
        if segments.len() != r {
            return Err(TensorError::DimMismatch {
                op: "segment_sum",
                dim: "segments",
                expected: r,
                got: segments.len(),
            });
        }
        if let Some(&bad) = segments.iter().find(|&&s| s >= n_segments) {
            return Err(TensorError::IndexOutOfBounds {
                op: "segment_sum",
                index: bad,
                len: n_segments,
            });
        }
        let mut acc = vec![0.0f64; n_segments * d];
        {
            let sd = self.value(src);
            for (row, &seg) in segments.iter().enumerate() {
                let dst = &mut acc[seg * d..(seg + 1) * d];
                let srow = &sd[row * d..(row + 1) * d];
                for (a, &v) in dst.iter_mut().zip(srow) {
                    *a += v as f64;
                }
            }
        }
        let data: Vec<f32> = acc.into_iter().map(|v| v as f32).collect();
        let needs = self.needs(src);
        Ok(self.push(
            Op::SegmentSum { src, segments },
            vec![n_segments, d],
            data,
            needs,
            None,
        ))
    }

    /// Gather rows: `out[r] = src[idx[r]]`.
    pub fn index_rows(&mut self, src: Var, idx: Arc<Vec<usize>>) -> Result<Var, TensorError> {
        let (rows, d) = rows_cols(self.shape(src), "index_rows")?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(TensorError::IndexOutOfBounds {
                op: "index_rows",
                index: bad,
                len: rows,
            });
        }
        let sd = self.value(src);
        let mut data = vec![0.0f32; idx.len() * d];
        for (r, &i) in idx.iter().enumerate() {
            data[r * d..(r + 1) * d].copy_from_slice(&sd[i * d..(i + 1) * d]);
        }
        let shape = vec![idx.len(), d];
        let needs = self.needs(src);
        Ok(self.push(Op::IndexRows { src, idx }, shape, data, needs, None))
    }

    /// Concatenate along the feature (column) axis.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ra, da) = rows_cols(self.shape(a), "concat_cols")?;
        let (rb, db) = rows_cols(self.shape(b), "concat_cols")?;
        if ra != rb {
            return Err(TensorError::DimMismatch {
                op: "concat_cols",
                dim: "rows",
                expected: ra,
                got: rb,
            });
        }
        let mut data = vec![0.0f32; ra * (da + db)];
        {
            let (ad, bd) = (self.value(a), self.value(b));
            for r in 0..ra {
                data[r * (da + db)..r * (da + db) + da].copy_from_slice(&ad[r * da..(r + 1) * da]);
                data[r * (da + db) + da..(r + 1) * (da + db)]
                    .copy_from_slice(&bd[r * db..(r + 1) * db]);
            }
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::ConcatCols(a, b), vec![ra, da + db], data, needs, None))
    }

    /// Linear-interpolation gather: `src` is `[C x L]`, `positions` holds
    /// `R*N` fractional coordinates in `[0, L-1]`, output is `[R x C*N]` with
    /// `out[r][c*N + n] = lerp(src[c], positions[r*N + n])`.
    pub fn interp_rows(
        &mut self,
        src: Var,
        positions: Arc<Vec<f32>>,
        n_per_row: usize,
    ) -> Result<Var, TensorError> {
        let (c, l) = rows_cols(self.shape(src), "interp_rows")?;
        if n_per_row == 0 || !positions.len().is_multiple_of(n_per_row) {
            return Err(TensorError::DimMismatch {
                op: "interp_rows",
                dim: "positions",
                expected: n_per_row,
                got: positions.len(),
            });
        }
        if let Some(&bad) = positions
            .iter()
            .find(|&&p| !(0.0..=(l - 1) as f32).contains(&p))
        {
            return Err(TensorError::IndexOutOfBounds {
                op: "interp_rows",
                index: bad as usize,
                len: l,
            });
        }
        let rows = positions.len() / n_per_row;
        let mut data = vec![0.0f32; rows * c * n_per_row];
        {
            let sd = self.value(src);
            let pos = positions.as_slice();
            for_each_row(&mut data, c * n_per_row, |r, out_row| {
                for ch in 0..c {
                    let srow = &sd[ch * l..(ch + 1) * l];
                    for n in 0..n_per_row {
                        let p = pos[r * n_per_row + n];
                        let i0 = (p.floor() as usize).min(l - 1);
                        let frac = (p - i0 as f32) as f64;
                        let lo = srow[i0] as f64;
                        let hi = if i0 + 1 < l { srow[i0 + 1] as f64 } else { lo };
                        out_row[ch * n_per_row + n] = (lo + frac * (hi - lo)) as f32;
                    }
                }
            });
        }
        let shape = vec![rows, c * n_per_row];
        let needs = self.needs(src);
        Ok(self.push(Op::InterpRows { src, positions }, shape, data, needs, None))
    }

    /// Broadcast-add a `[1 x D]` (or `[D]`) row across every row of `[R x D]`.
    pub fn add_row(&mut self, mat: Var, row: Var) -> Result<Var, TensorError> {
        let (r, d) = rows_cols(self.shape(mat), "add_row")?;
        if self.node(row).data.len() != d {
            return Err(TensorError::DimMismatch {
                op: "add_row",
                dim: "row",
                expected: d,
                got: self.node(row).data.len(),
            });
        }
        let mut data = vec![0.0f32; r * d];
        {
            let (md, rd) = (self.value(mat), self.value(row));
            for i in 0..r {
                for j in 0..d {
                    data[i * d + j] = md[i * d + j] + rd[j];
                }
            }
        }
        let needs = self.needs(mat) || self.needs(row);
        Ok(self.push(Op::AddRow { mat, row }, vec![r, d], data, needs, None))
    }

    /// Scale each row of `[R x D]` by the matching entry of a `[R x 1]`
    /// (or `[R]`) column.
    pub fn mul_col(&mut self, mat: Var, col: Var) -> Result<Var, TensorError> {
        let (r, d) = rows_cols(self.shape(mat), "mul_col")?;
        if self.node(col).data.len() != r {
            return Err(TensorError::DimMismatch {
                op: "mul_col",
                dim: "col",
                expected: r,
                got: self.node(col).data.len(),
            });
        }
        let mut data = vec![0.0f32; r * d];
        {
            let (md, cd) = (self.value(mat), self.value(col));
            for i in 0..r {
                for j in 0..d {
                    data[i * d + j] = md[i * d + j] * cd[i];
                }
            }
        }
        let needs = self.needs(mat) || self.needs(col);
        Ok(self.push(Op::MulCol { mat, col }, vec![r, d], data, needs, None))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var, TensorError> {
        let expected: usize = shape.iter().product();
        if expected != self.node(a).data.len() {
            return Err(TensorError::DataLength {
                shape,
                expected,
                got: self.node(a).data.len(),
            });
        }
        let data = self.value(a).to_vec();
        let needs = self.needs(a);
        let fval = self.node(a).fval;
        Ok(self.push(Op::Reshape(a), shape, data, needs, fval))
    }

    /// Reverse sweep from a scalar loss. Parameter gradients accumulate
    /// additively into `store`; run [`ParamStore::reset_grads`] between steps.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<(), TensorError> {
        if self.node(loss).data.len() != 1 {
            return Err(TensorError::NotScalar {
                shape: self.node(loss).shape.clone(),
            });
        }
        let lv = self.node(loss).data[0];
        if !lv.is_finite() {
            return Err(TensorError::NonFiniteLoss { value: lv });
        }
        for n in &mut self.nodes {
            n.grad.iter_mut().for_each(|g| *g = 0.0);
        }
        self.nodes[loss.0].grad[0] = 1.0;

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad || matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let contribs = self.local_grads(i);
            for (parent, grad) in contribs {
                let pg = &mut self.nodes[parent.0].grad;
                for (g, c) in pg.iter_mut().zip(&grad) {
                    *g += c;
                }
            }
        }

        for n in &self.nodes {
            if let Some(slot) = n.param {
                let t = store.by_slot_mut(slot);
                if t.grad.is_none() {
                    t.grad = Some(vec![0.0; t.data.len()]);
                }
                let tg = t.grad.as_mut().expect("grad allocated above");
                for (g, c) in tg.iter_mut().zip(&n.grad) {
                    *g += c;
                }
            }
        }
        Ok(())
    }

    /// Gradient contributions of node `i` to each parent that tracks grads.
    fn local_grads(&self, i: usize) -> Vec<(Var, Vec<f32>)> {
        let node = &self.nodes[i];
        let g = &node.grad;
        let out = &node.data;
        let mut res: Vec<(Var, Vec<f32>)> = Vec::new();
        let mut emit = |v: Var, grad: Vec<f32>| {
            if self.needs(v) {
                res.push((v, grad));
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                emit(*a, g.clone());
                emit(*b, g.clone());
            }
            Op::Sub(a, b) => {
                emit(*a, g.clone());
                emit(*b, g.iter().map(|x| -x).collect());
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.value(*a), self.value(*b));
                emit(*a, g.iter().zip(bd).map(|(x, y)| x * y).collect());
                emit(*b, g.iter().zip(ad).map(|(x, y)| x * y).collect());
            }
            Op::Div(a, b) => {
                let (ad, bd) = (self.value(*a), self.value(*b));
                emit(*a, g.iter().zip(bd).map(|(x, y)| x / y).collect());
                emit(
                    *b,
                    g.iter()
                        .zip(ad.iter().zip(bd))
                        .map(|(x, (n, d))| -x * n / (d * d))
                        .collect(),
                );
            }
            Op::AddScalar(a) => emit(*a, g.clone()),
            Op::MulScalar(a, c) => emit(*a, g.iter().map(|x| x * c).collect()),
            Op::Matmul(a, b) => {
                let (m, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let n = self.shape(*b)[1];
                let (ad, bd) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    // da = g . b^T
                    let mut da = vec![0.0f32; m * k];
                    for_each_row(&mut da, k, |r, row| {
                        let grow = &g[r * n..(r + 1) * n];
                        for (kk, out) in row.iter_mut().enumerate() {
                            let mut acc = 0.0f64;
                            for (c, &gv) in grow.iter().enumerate() {
                                acc += gv as f64 * bd[kk * n + c] as f64;
                            }
                            *out = acc as f32;
                        }
                    });
                    res.push((*a, da));
                }
                if self.needs(*b) {
                    // db = a^T . g
                    let mut db = vec![0.0f32; k * n];
                    for_each_row(&mut db, n, |kk, row| {
                        for (c, out) in row.iter_mut().enumerate() {
                            let mut acc = 0.0f64;
                            for r in 0..m {
                                acc += ad[r * k + kk] as f64 * g[r * n + c] as f64;
                            }
                            *out = acc as f32;
                        }
                    });
                    res.push((*b, db));
                }
            }
            Op::Transpose(a) => {
                let (r, c) = (self.shape(*a)[0], self.shape(*a)[1]);
                let mut da = vec![0.0f32; r * c];
                for i in 0..c {
                    for j in 0..r {
                        da[j * c + i] = g[i * r + j];
                    }
                }
                emit(*a, da);
            }
            Op::Relu(a) => emit(
                *a,
                g.iter()
                    .zip(out)
                    .map(|(x, o)| if *o > 0.0 { *x } else { 0.0 })
                    .collect(),
            ),
            Op::Sigmoid(a) => emit(
                *a,
                g.iter().zip(out).map(|(x, o)| x * o * (1.0 - o)).collect(),
            ),
            Op::Log(a) => {
                let ad = self.value(*a);
                emit(*a, g.iter().zip(ad).map(|(x, v)| x / v).collect());
            }
            Op::Sqrt(a) => emit(
                *a,
                g.iter()
                    .zip(out)
                    .map(|(x, o)| if *o > 0.0 { x * 0.5 / o } else { 0.0 })
                    .collect(),
            ),
            Op::Sum(a) => {
                let gv = g[0];
                emit(*a, vec![gv; self.node(*a).data.len()]);
            }
            Op::Conv1d {
                input,
                weight,
                bias,
                pad,
            } => {
                let (c_in, len) = (self.shape(*input)[0], self.shape(*input)[1]);
                let wshape = self.shape(*weight);
                let (c_out, k) = (wshape[0], wshape[2]);
                let pad = *pad;
                let (ind, wd) = (self.value(*input), self.value(*weight));
                if self.needs(*input) {
                    let mut din = vec![0.0f32; c_in * len];
                    for_each_row(&mut din, len, |c, row| {
                        for (s, out) in row.iter_mut().enumerate() {
                            let mut acc = 0.0f64;
                            for o in 0..c_out {
                                for dk in 0..k {
                                    // out position t satisfies t + dk - pad == s
                                    if s + pad >= dk && s + pad - dk < len {
                                        let t = s + pad - dk;
                                        acc += g[o * len + t] as f64
                                            * wd[o * c_in * k + c * k + dk] as f64;
                                    }
                                }
                            }
                            *out = acc as f32;
                        }
                    });
                    res.push((*input, din));
                }
                if self.needs(*weight) {
                    let mut dw = vec![0.0f32; c_out * c_in * k];
                    for_each_row(&mut dw, c_in * k, |o, row| {
                        for c in 0..c_in {
                            for dk in 0..k {
                                let mut acc = 0.0f64;
                                for t in 0..len {
                                    let s = t + dk;
                                    if s >= pad && s - pad < len {
                                        acc += g[o * len + t] as f64
                                            * ind[c * len + (s - pad)] as f64;
                                    }
                                }
                                row[c * k + dk] = acc as f32;
                            }
                        }
                    });
                    res.push((*weight, dw));
                }
                if self.needs(*bias) {
                    let db: Vec<f32> = (0..c_out)
                        .map(|o| {
                            g[o * len..(o + 1) * len]
                                .iter()
                                .map(|&x| x as f64)
                                .sum::<f64>() as f32
                        })
                        .collect();
                    res.push((*bias, db));
                }
            }
            Op::SegmentSum { src, segments } => {
                let d = self.shape(*src)[1];
                let mut ds = vec![0.0f32; self.node(*src).data.len()];
                for (r, &seg) in segments.iter().enumerate() {
                    ds[r * d..(r + 1) * d].copy_from_slice(&g[seg * d..(seg + 1) * d]);
                }
                emit(*src, ds);
            }
            Op::IndexRows { src, idx } => {
                let d = self.shape(*src)[1];
                let mut ds = vec![0.0f32; self.node(*src).data.len()];
                for (r, &i) in idx.iter().enumerate() {
                    let dst = &mut ds[i * d..(i + 1) * d];
                    let srow = &g[r * d..(r + 1) * d];
                    for (a, &v) in dst.iter_mut().zip(srow) {
                        *a += v;
                    }
                }
                emit(*src, ds);
            }
            Op::ConcatCols(a, b) => {
                let (r, da) = (self.shape(*a)[0], self.shape(*a)[1]);
                let db_ = self.shape(*b)[1];
                if self.needs(*a) {
                    let mut ga = vec![0.0f32; r * da];
                    for i in 0..r {
                        ga[i * da..(i + 1) * da]
                            .copy_from_slice(&g[i * (da + db_)..i * (da + db_) + da]);
                    }
                    res.push((*a, ga));
                }
                if self.needs(*b) {
                    let mut gb = vec![0.0f32; r * db_];
                    for i in 0..r {
                        gb[i * db_..(i + 1) * db_]
                            .copy_from_slice(&g[i * (da + db_) + da..(i + 1) * (da + db_)]);
                    }
                    res.push((*b, gb));
                }
            }
            Op::InterpRows { src, positions } => {
                let (c, l) = (self.shape(*src)[0], self.shape(*src)[1]);
                let n_per_row = node.shape[1] / c;
                let mut ds = vec![0.0f32; c * l];
                let rows = positions.len() / n_per_row;
                for r in 0..rows {
                    for ch in 0..c {
                        for n in 0..n_per_row {
                            let p = positions[r * n_per_row + n];
                            let i0 = (p.floor() as usize).min(l - 1);
                            let frac = p - i0 as f32;
                            let gv = g[r * (c * n_per_row) + ch * n_per_row + n];
                            ds[ch * l + i0] += gv * (1.0 - frac);
                            if i0 + 1 < l {
                                ds[ch * l + i0 + 1] += gv * frac;
                            }
                        }
                    }
                }
                emit(*src, ds);
            }
            Op::AddRow { mat, row } => {
                let (r, d) = (self.shape(*mat)[0], self.shape(*mat)[1]);
                emit(*mat, g.clone());
                if self.needs(*row) {
                    let mut dr = vec![0.0f32; d];
                    for (j, out) in dr.iter_mut().enumerate() {
                        let mut acc = 0.0f64;
                        for i in 0..r {
                            acc += g[i * d + j] as f64;
                        }
                        *out = acc as f32;
                    }
                    res.push((*row, dr));
                }
            }
            Op::MulCol { mat, col } => {
                let (r, d) = (self.shape(*mat)[0], self.shape(*mat)[1]);
                let (md, cd) = (self.value(*mat), self.value(*col));
                if self.needs(*mat) {
                    let mut dm = vec![0.0f32; r * d];
                    for i in 0..r {
                        for j in 0..d {
                            dm[i * d + j] = g[i * d + j] * cd[i];
                        }
                    }
                    res.push((*mat, dm));
                }
                if self.needs(*col) {
                    let mut dc = vec![0.0f32; r];
                    for (i, out) in dc.iter_mut().enumerate() {
                        let mut acc = 0.0f64;
                        for j in 0..d {
                            acc += g[i * d + j] as f64 * md[i * d + j] as f64;
                        }
                        *out = acc as f32;
                    }
                    res.push((*col, dc));
                }
            }
            Op::Reshape(a) => emit(*a, g.clone()),
        }
        res
    }

    /// Describe the first tape node containing a non-finite value, naming the
    /// parameter when the store is given; used for abort diagnostics.
    pub fn first_non_finite(&self, store: Option<&ParamStore>) -> Option<String> {
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(j) = n.data.iter().position(|v| !v.is_finite()) {
                let label = match (n.param, store) {
                    (Some(slot), Some(s)) => format!("param `{}`", s.names()[slot]),
                    _ => format!("{} node #{}", n.op.name(), i),
                };
                return Some(format!(
                    "{} (shape {:?}, first bad entry at {} = {})",
                    label, n.shape, j, n.data[j]
                ));
            }
        }
        None
    }
}

impl std::ops::Index<Var> for Tape {
    type Output = [f32];
    fn index(&self, v: Var) -> &[f32] {
        self.value(v)
    }
}
