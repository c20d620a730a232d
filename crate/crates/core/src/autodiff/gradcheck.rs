//! Finite-difference gradient verification.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::autodiff::tape::{GradMap, ParamStore};

/// Compares analytic gradients against central differences
/// `(f(x + h) - f(x - h)) / 2h` on a sampled coordinate subset and returns
/// the maximum relative error.
///
/// `f` must be a deterministic function of the parameters (dropout off).
/// `analytic` holds gradients of `f` at the current parameter values. At
/// most `max_coords` coordinates per parameter are probed; pass `usize::MAX`
/// to probe all.
pub fn grad_check(
    params: &mut ParamStore,
    analytic: &GradMap,
    mut f: impl FnMut(&ParamStore) -> f64,
    h: f64,
    max_coords: usize,
    rng: &mut impl Rng,
) -> f64 {
    let mut max_rel = 0.0_f64;
    for idx in 0..params.len() {
        let id = crate::autodiff::tape::ParamId(idx);
        let len = params.get(id).len();
        let mut coords: Vec<usize> = (0..len).collect();
        if len > max_coords {
            coords.shuffle(rng);
            coords.truncate(max_coords);
        }
        for c in coords {
            let orig = params.get(id).data()[c];
            params.get_mut(id).data_mut()[c] = orig + h;
            let plus = f(params);
            params.get_mut(id).data_mut()[c] = orig - h;
            let minus = f(params);
            params.get_mut(id).data_mut()[c] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let exact = analytic.get(id).data()[c];
            max_rel = max_rel.max(relative_error(exact, numeric));
        }
    }
    max_rel
}

/// Relative error with a dead zone when both values are essentially zero.
pub fn relative_error(a: f64, b: f64) -> f64 {
    if a.abs() < 1e-8 && b.abs() < 1e-8 {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::tape::Tape;
    use crate::autodiff::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn detects_a_wrong_gradient() {
        let mut store = ParamStore::new();
        let p = store.add("x", Tensor::scalar(0.3));
        let mut tape = Tape::new(&store);
        let x = tape.param(p);
        let y = tape.tanh(x);
        let loss = tape.sum(y);
        let mut grads = tape.backward(loss).unwrap();
        // corrupt the analytic gradient
        grads.get_mut(p).data_mut()[0] += 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = grad_check(
            &mut store,
            &grads,
            |s| {
                let mut t = Tape::new(s);
                let x = t.param(p);
                let y = t.tanh(x);
                let l = t.sum(y);
                t.value(l).item()
            },
            1e-5,
            usize::MAX,
            &mut rng,
        );
        assert!(err > 0.1, "corrupted gradient should be flagged, got {err}");
    }
}
