use super::{Gradients, ParamStore, Tape, Var};
use crate::error::Result;
use crate::scalar::Real;

/// Largest relative disagreement between the tape's gradient and a central
/// difference with step `h`, over every scalar in the unfrozen groups:
/// `|a − c| / (|a| + |c| + 1e-12)`.
pub fn finite_diff_check<T, F>(store: &mut ParamStore<T>, h: T, f: F) -> Result<T>
where
    T: Real,
    F: Fn(&mut Tape<'_, T>) -> Result<Var>,
{
    let mut grads = Gradients::for_store(store);
    {
        let mut tape = Tape::new(store);
        let root = f(&mut tape)?;
        tape.backward(root, &mut grads)?;
    }
    let eval = |s: &ParamStore<T>| -> Result<T> {
        let mut tape = Tape::new(s);
        let root = f(&mut tape)?;
        Ok(tape.scalar(root))
    };
    let ids: Vec<_> = store.params().map(|(id, _)| id).collect();
    let floor = T::of(1e-12);
    let two = T::of(2.0);
    let mut worst = T::zero();
    for id in ids {
        if store.is_frozen(id) {
            continue;
        }
        for j in 0..store.value(id).len() {
            let orig = store.value(id).data()[j];
            store.value_mut(id).data_mut()[j] = orig + h;
            let up = eval(store)?;
            store.value_mut(id).data_mut()[j] = orig - h;
            let down = eval(store)?;
            store.value_mut(id).data_mut()[j] = orig;
            let central = (up - down) / (two * h);
            let analytic = grads.get(id).data()[j];
            let err = (analytic - central).abs() / (analytic.abs() + central.abs() + floor);
            if err > worst {
                worst = err;
            }
        }
    }
    Ok(worst)
}
