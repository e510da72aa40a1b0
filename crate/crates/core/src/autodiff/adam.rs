use super::{Gradients, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Adam with bias correction. Parameters in frozen groups are never touched.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: T) -> Self {
        Self::with_betas(lr, (T::of(0.9), T::of(0.999)), T::of(1e-8))
    }

    pub fn with_betas(lr: T, betas: (T, T), eps: T) -> Self {
        Self { lr, beta1: betas.0, beta2: betas.1, eps, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update. A non-finite gradient in any trainable parameter aborts the step
    /// before anything is written.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &Gradients<T>) -> Result<()> {
        for (id, g) in grads.iter() {
            if !store.is_frozen(id) && !g.all_finite() {
                return Err(Error::NonFiniteGradient {
                    group: store.group_name(id).to_string(),
                    param: store.param(id).name.clone(),
                });
            }
        }
        if self.m.is_empty() {
            let zeros = || -> Vec<Tensor<T>> {
                store.params().map(|(_, p)| Tensor::zeros(p.value.rows(), p.value.cols())).collect()
            };
            self.m = zeros();
            self.v = zeros();
        }
        self.step += 1;
        let t = self.step as i32;
        let one = T::one();
        let bc1 = one - self.beta1.powi(t);
        let bc2 = one - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (id, g) in grads.iter() {
            if store.is_frozen(id) {
                continue;
            }
            let i = id.index();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let w = store.value_mut(id);
            for (((w, &g), m), v) in w
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(w: f64) -> (ParamStore<f64>, super::super::ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("g", "w", Tensor::scalar(w));
        (s, id)
    }

    #[test]
    fn first_step_closed_form() {
        let (mut s, id) = scalar_store(0.5);
        let mut g = Gradients::for_store(&s);
        g.get_mut(id).data_mut()[0] = 1.0;
        let mut adam = Adam::new(1e-3);
        adam.step(&mut s, &g).unwrap();
        // m̂ = 1, v̂ = 1, so Δw = −lr·1/(1+eps)
        let expected = 0.5 - 1e-3 * 1.0 / (1.0 + 1e-8);
        assert!((s.value(id).item() - expected).abs() < 1e-15);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn frozen_group_untouched() {
        let (mut s, id) = scalar_store(0.5);
        s.set_frozen("g", true).unwrap();
        let mut g = Gradients::for_store(&s);
        g.get_mut(id).data_mut()[0] = 5.0;
        Adam::new(1e-2).step(&mut s, &g).unwrap();
        assert_eq!(s.value(id).item(), 0.5);
    }

    #[test]
    fn zero_gradient_no_change() {
        let (mut s, id) = scalar_store(-1.25);
        let g = Gradients::for_store(&s);
        let mut adam = Adam::new(1e-1);
        for _ in 0..3 {
            adam.step(&mut s, &g).unwrap();
        }
        assert_eq!(s.value(id).item(), -1.25);
    }

    #[test]
    fn non_finite_gradient_names_group() {
        let (mut s, id) = scalar_store(0.0);
        let mut g = Gradients::for_store(&s);
        g.get_mut(id).data_mut()[0] = f64::NAN;
        let err = Adam::new(1e-3).step(&mut s, &g).unwrap_err();
        assert!(err.to_string().contains("`g`"), "{err}");
        assert_eq!(s.value(id).item(), 0.0);
    }
}
