//! Finite-difference gradient verification.

use super::{ParamStore, Tape, TensorError, Var};

/// Compare analytic gradients against central differences.
///
/// `f` must deterministically rebuild the same scalar computation from the
/// store on a fresh tape. Returns the maximum over every parameter entry of
/// `|analytic - fd| / max(1, |fd|)`. Parameter values are restored on return;
/// parameter gradients are left holding the analytic result.
pub fn grad_check<F>(f: F, store: &mut ParamStore, eps: f32) -> Result<f32, TensorError>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var, TensorError>,
{
    if !(1e-5..=1e-2).contains(&eps) {
        return Err(TensorError::EpsOutOfRange { eps });
    }
    store.reset_grads();
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    let l0 = tape.scalar_f64(loss);
    if !l0.is_finite() {
        return Err(TensorError::NonFiniteLoss { value: l0 as f32 });
    }
    tape.backward(loss, store)?;

    let eval = |store: &ParamStore| -> Result<f64, TensorError> {
        let mut t = Tape::new();
        let v = f(&mut t, store)?;
        let l = t.scalar_f64(v);
        if !l.is_finite() {
            return Err(TensorError::NonFiniteLoss { value: l as f32 });
        }
        Ok(l)
    };

    let names: Vec<String> = store.names().to_vec();
    let mut max_err = 0.0f32;
    for name in &names {
        let n = store.get(name)?.numel();
        for i in 0..n {
            let orig = store.get(name)?.data[i];
            store.get_mut(name)?.data[i] = orig + eps;
            let lp = eval(store)?;
            store.get_mut(name)?.data[i] = orig - eps;
            let lm = eval(store)?;
            store.get_mut(name)?.data[i] = orig;
            let fd = ((lp - lm) / (2.0 * eps as f64)) as f32;
            let analytic = store.get(name)?.grad.as_ref().expect("backward ran")[i];
            let err = (analytic - fd).abs() / fd.abs().max(1.0);
            if err > max_err {
                max_err = err;
            }
        }
    }
    Ok(max_err)
}
