//! The LogNormMix-Net: a GRU history encoder feeding a lognormal-mixture temporal
//! head, a sender head, and a sender-conditioned recipient head.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MixtureParams, ModelConfig, RecipientMode};
use crate::autodiff::{Gradients, ParamId, ParamStore, Tape, Tensor, Var};
use crate::data::{Event, MetadataClass, NormStats};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const GROUP_TEMPORAL: &str = "temporal";
pub const GROUP_ENCODER: &str = "encoder";
pub const GROUP_SENDER: &str = "sender";
pub const GROUP_RECIPIENT: &str = "recipient";
pub const GROUPS: [&str; 4] = [GROUP_TEMPORAL, GROUP_ENCODER, GROUP_SENDER, GROUP_RECIPIENT];

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Debug, PartialEq, Eq)]
struct Layout {
    sender_emb: ParamId,
    set_emb: ParamId,
    meta_emb: ParamId,
    gru_wx: ParamId,
    gru_wh: ParamId,
    gru_bx: ParamId,
    gru_bh: ParamId,
    time_w: ParamId,
    time_b: ParamId,
    snd_w1: ParamId,
    snd_b1: ParamId,
    snd_w2: ParamId,
    snd_b2: ParamId,
    rcp_w: ParamId,
    rcp_b: ParamId,
}

/// Architecture without weights: config, parameter layout and recipient-set members.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arch {
    config: ModelConfig,
    layout: Layout,
    set_members: Vec<Vec<usize>>,
}

/// Encoder state `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryState<T> {
    pub h: Vec<T>,
}

impl<T: Real> HistoryState<T> {
    pub fn zeros(width: usize) -> Self {
        Self { h: vec![T::zero(); width] }
    }

    pub fn norm(&self) -> T {
        self.h.iter().map(|&x| x * x).sum::<T>().sqrt()
    }
}

/// Tape handles of the temporal head's outputs, each `1 × K`.
#[derive(Clone, Copy, Debug)]
pub struct MixtureVars {
    pub log_weights: Var,
    pub means: Var,
    pub scales: Var,
}

/// Per-event tape handles from a teacher-forced pass.
#[derive(Clone, Copy, Debug)]
pub struct StepVars {
    pub mixture: MixtureVars,
    pub sender_logits: Var,
    pub recipient_logits: Var,
    pub tau_nll: Var,
    pub sender_nll: Var,
    pub recipient_nll: Var,
}

#[derive(Clone, Debug)]
pub struct SequenceVars {
    pub tau: Var,
    pub sender: Var,
    pub recipient: Var,
    pub total: Var,
    pub steps: Vec<StepVars>,
}

/// Summed negative log-likelihoods over a sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NllBreakdown<T> {
    pub tau: T,
    pub sender: T,
    pub recipient: T,
    pub total: T,
    pub events: usize,
}

impl<T: Real> NllBreakdown<T> {
    pub fn merge(&mut self, other: &Self) {
        self.tau += other.tau;
        self.sender += other.sender;
        self.recipient += other.recipient;
        self.total += other.total;
        self.events += other.events;
    }

    /// Per-event averages.
    pub fn per_event(&self) -> Self {
        let n = T::of(self.events.max(1) as f64);
        Self {
            tau: self.tau / n,
            sender: self.sender / n,
            recipient: self.recipient / n,
            total: self.total / n,
            events: self.events,
        }
    }
}

/// Values produced while scoring one event under teacher forcing.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput<T> {
    pub mixture: MixtureParams<T>,
    pub sender_logits: Vec<T>,
    pub recipient_logits: Vec<T>,
    pub tau_nll: T,
    pub sender_nll: T,
    pub recipient_nll: T,
}

impl Arch {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn set_members(&self) -> &[Vec<usize>] {
        &self.set_members
    }

    /// Embedding row used for recipient sets outside the vocabulary.
    pub fn unseen_set_id(&self) -> usize {
        self.config.n_recipient_sets
    }

    fn check_sender(&self, sender: usize) -> Result<()> {
        if sender >= self.config.n_nodes {
            return Err(Error::IdOutOfRange { kind: "sender", id: sender, size: self.config.n_nodes });
        }
        Ok(())
    }

    /// One GRU update on the embedding of the event just observed.
    pub fn encode<T: Real>(&self, t: &mut Tape<'_, T>, h: Var, ev: &Event, norm: &NormStats) -> Result<Var> {
        self.check_sender(ev.sender)?;
        if ev.recipient_set > self.unseen_set_id() {
            return Err(Error::IdOutOfRange {
                kind: "recipient set",
                id: ev.recipient_set,
                size: self.config.n_recipient_sets,
            });
        }
        if !(ev.tau > 0.0 && ev.tau.is_finite()) {
            return Err(Error::InvalidTau(ev.tau));
        }
        let l = &self.layout;
        let hd = self.config.d_hidden;
        let log_tau = t.input(Tensor::scalar(T::of(norm.normalize(ev.tau))));
        let se = t.embed(l.sender_emb, ev.sender)?;
        let re = t.embed(l.set_emb, ev.recipient_set)?;
        let me = t.embed(l.meta_emb, ev.metadata.index())?;
        let x = t.concat(&[log_tau, se, re, me]);

        let gx = t.affine(x, l.gru_wx, l.gru_bx);
        let gh = t.affine(h, l.gru_wh, l.gru_bh);
        let (gx_r, gh_r) = (t.slice_cols(gx, 0, hd), t.slice_cols(gh, 0, hd));
        let (gx_z, gh_z) = (t.slice_cols(gx, hd, 2 * hd), t.slice_cols(gh, hd, 2 * hd));
        let (gx_n, gh_n) = (t.slice_cols(gx, 2 * hd, 3 * hd), t.slice_cols(gh, 2 * hd, 3 * hd));
        let r = t.add(gx_r, gh_r);
        let r = t.sigmoid(r);
        let z = t.add(gx_z, gh_z);
        let z = t.sigmoid(z);
        let rn = t.mul(r, gh_n);
        let n = t.add(gx_n, rn);
        let n = t.tanh(n);
        // h' = (1 − z)·n + z·h = n + z·(h − n)
        let hn = t.sub(h, n);
        let zhn = t.mul(z, hn);
        Ok(t.add(n, zhn))
    }

    /// Mixture parameters from `concat(h, metadata embedding)`: softmax weights,
    /// raw means, softplus scales.
    pub fn temporal<T: Real>(&self, t: &mut Tape<'_, T>, h: Var, meta: MetadataClass) -> Result<MixtureVars> {
        let l = &self.layout;
        let k = self.config.components;
        let me = t.embed(l.meta_emb, meta.index())?;
        let x = t.concat(&[h, me]);
        let raw = t.affine(x, l.time_w, l.time_b);
        let logits = t.slice_cols(raw, 0, k);
        let log_weights = t.log_softmax(logits);
        let means = t.slice_cols(raw, k, 2 * k);
        let scales = t.slice_cols(raw, 2 * k, 3 * k);
        let scales = t.softplus(scales);
        Ok(MixtureVars { log_weights, means, scales })
    }

    /// `−log p(τ)` of the mixture on the tape.
    pub fn mixture_nll<T: Real>(&self, t: &mut Tape<'_, T>, mix: &MixtureVars, tau: f64, norm: &NormStats) -> Result<Var> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidTau(tau));
        }
        let k = self.config.components;
        let y = t.input(Tensor::filled(1, k, T::of(norm.normalize(tau))));
        let diff = t.sub(y, mix.means);
        let z = t.div(diff, mix.scales);
        let z2 = t.square(z);
        let half_z2 = t.scale(z2, T::of(0.5));
        let log_s = t.ln(mix.scales);
        let a = t.sub(mix.log_weights, log_s);
        let a = t.sub(a, half_z2);
        let lse = t.log_sum_exp(a);
        let neg = t.neg(lse);
        Ok(t.offset(neg, T::of(HALF_LN_2PI + tau.ln() + norm.std_log_tau.ln())))
    }

    /// Sender logits: two affine layers around a tanh.
    pub fn sender_logits<T: Real>(&self, t: &mut Tape<'_, T>, h: Var) -> Var {
        let l = &self.layout;
        let a = t.affine(h, l.snd_w1, l.snd_b1);
        let a = t.tanh(a);
        t.affine(a, l.snd_w2, l.snd_b2)
    }

    /// Recipient logits from `concat(h, sender embedding)`: R set logits
    /// (multi-class) or n per-node logits (binary per node).
    pub fn recipient_logits<T: Real>(&self, t: &mut Tape<'_, T>, h: Var, sender: usize) -> Result<Var> {
        self.check_sender(sender)?;
        let l = &self.layout;
        let se = t.embed(l.sender_emb, sender)?;
        let x = t.concat(&[h, se]);
        Ok(t.affine(x, l.rcp_w, l.rcp_b))
    }

    fn categorical_nll<T: Real>(t: &mut Tape<'_, T>, logits: Var, target: usize) -> Var {
        let ls = t.log_softmax(logits);
        let p = t.pick(ls, target);
        t.neg(p)
    }

    fn recipient_nll<T: Real>(&self, t: &mut Tape<'_, T>, logits: Var, set: usize) -> Result<Var> {
        if set >= self.config.n_recipient_sets {
            return Err(Error::IdOutOfRange { kind: "recipient set", id: set, size: self.config.n_recipient_sets });
        }
        Ok(match self.config.recipient_mode {
            RecipientMode::MultiClass => Self::categorical_nll(t, logits, set),
            RecipientMode::BinaryPerNode => {
                // Σ_j softplus(x_j) − y_j x_j
                let mut y = Tensor::zeros(1, self.config.n_nodes);
                for &m in &self.set_members[set] {
                    y.data_mut()[m] = T::one();
                }
                let y = t.input(y);
                let sp = t.softplus(logits);
                let yx = t.mul(y, logits);
                let d = t.sub(sp, yx);
                t.sum(d)
            }
        })
    }

    /// Teacher-forced pass: event `i` is scored from the state after events `< i`;
    /// the recipient head is conditioned on the true sender. Losses are summed.
    pub fn sequence<T: Real>(&self, t: &mut Tape<'_, T>, seq: &[Event], norm: &NormStats) -> Result<SequenceVars> {
        if seq.is_empty() {
            return Err(Error::Contract("sequence must contain at least one event".into()));
        }
        let mut h = t.input(Tensor::zeros(1, self.config.d_hidden));
        let mut steps = Vec::with_capacity(seq.len());
        let (mut tau_sum, mut snd_sum, mut rcp_sum): (Option<Var>, Option<Var>, Option<Var>) = (None, None, None);
        for ev in seq {
            let mixture = self.temporal(t, h, ev.metadata)?;
            let tau_nll = self.mixture_nll(t, &mixture, ev.tau, norm)?;
            self.check_sender(ev.sender)?;
            let sender_logits = self.sender_logits(t, h);
            let sender_nll = Self::categorical_nll(t, sender_logits, ev.sender);
            let recipient_logits = self.recipient_logits(t, h, ev.sender)?;
            let recipient_nll = self.recipient_nll(t, recipient_logits, ev.recipient_set)?;
            running_sum(t, &mut tau_sum, tau_nll);
            running_sum(t, &mut snd_sum, sender_nll);
            running_sum(t, &mut rcp_sum, recipient_nll);
            steps.push(StepVars { mixture, sender_logits, recipient_logits, tau_nll, sender_nll, recipient_nll });
            h = self.encode(t, h, ev, norm)?;
        }
        let (tau, sender, recipient) = (tau_sum.unwrap(), snd_sum.unwrap(), rcp_sum.unwrap());
        let ts = t.add(tau, sender);
        let total = t.add(ts, recipient);
        Ok(SequenceVars { tau, sender, recipient, total, steps })
    }
}

/// Trainable model: architecture plus weights.
#[derive(Clone, Debug, PartialEq)]
pub struct LogNormMixNet<T> {
    arch: Arch,
    params: ParamStore<T>,
}

impl<T: Real> LogNormMixNet<T> {
    /// Weights drawn from `U(−1/√fan_in, 1/√fan_in)` with the config's seed;
    /// embedding tables use fan-in 1.
    pub fn new(config: ModelConfig, set_members: Vec<Vec<usize>>) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        Self::build(config, set_members, |rows, cols, fan_in| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| T::of(dist.sample(&mut rng))).collect())
        })
    }

    /// All weights zero.
    pub fn zeros(config: ModelConfig, set_members: Vec<Vec<usize>>) -> Result<Self> {
        Self::build(config, set_members, |rows, cols, _| Tensor::zeros(rows, cols))
    }

    fn build(
        config: ModelConfig,
        set_members: Vec<Vec<usize>>,
        mut init: impl FnMut(usize, usize, usize) -> Tensor<T>,
    ) -> Result<Self> {
        config.validate()?;
        if set_members.len() != config.n_recipient_sets {
            return Err(Error::Config(format!(
                "{} recipient-set member lists for {} sets",
                set_members.len(),
                config.n_recipient_sets
            )));
        }
        if let Some(bad) = set_members.iter().flatten().find(|&&m| m >= config.n_nodes) {
            return Err(Error::IdOutOfRange { kind: "node", id: *bad, size: config.n_nodes });
        }
        let c = &config;
        let (e, h, k, hs) = (c.d_embed, c.d_hidden, c.components, c.d_sender_hidden);
        let din = c.encoder_input();
        let rout = c.recipient_outputs();
        let mut p = ParamStore::new();
        for g in GROUPS {
            p.add_group(g);
        }
        let layout = Layout {
            sender_emb: p.add(GROUP_ENCODER, "sender_embedding", init(c.n_nodes, e, 1)),
            set_emb: p.add(GROUP_ENCODER, "recipient_set_embedding", init(c.n_recipient_sets + 1, e, 1)),
            meta_emb: p.add(GROUP_TEMPORAL, "metadata_embedding", init(3, e, 1)),
            gru_wx: p.add(GROUP_ENCODER, "gru.w_input", init(din, 3 * h, h)),
            gru_wh: p.add(GROUP_ENCODER, "gru.w_hidden", init(h, 3 * h, h)),
            gru_bx: p.add(GROUP_ENCODER, "gru.b_input", init(1, 3 * h, h)),
            gru_bh: p.add(GROUP_ENCODER, "gru.b_hidden", init(1, 3 * h, h)),
            time_w: p.add(GROUP_TEMPORAL, "temporal.w", init(h + e, 3 * k, h + e)),
            time_b: p.add(GROUP_TEMPORAL, "temporal.b", init(1, 3 * k, h + e)),
            snd_w1: p.add(GROUP_SENDER, "sender.w1", init(h, hs, h)),
            snd_b1: p.add(GROUP_SENDER, "sender.b1", init(1, hs, h)),
            snd_w2: p.add(GROUP_SENDER, "sender.w2", init(hs, c.n_nodes, hs)),
            snd_b2: p.add(GROUP_SENDER, "sender.b2", init(1, c.n_nodes, hs)),
            rcp_w: p.add(GROUP_RECIPIENT, "recipient.w", init(h + e, rout, h + e)),
            rcp_b: p.add(GROUP_RECIPIENT, "recipient.b", init(1, rout, h + e)),
        };
        Ok(Self { arch: Arch { config, layout, set_members }, params: p })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.arch.config
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    /// Split borrow for gradient checks that perturb weights in place.
    pub fn parts_mut(&mut self) -> (&Arch, &mut ParamStore<T>) {
        (&self.arch, &mut self.params)
    }

    /// Bias of the temporal head, laid out `[logits | means | raw scales]`.
    pub fn temporal_bias_mut(&mut self) -> &mut Tensor<T> {
        self.params.value_mut(self.arch.layout.time_b)
    }

    pub fn initial_state(&self) -> HistoryState<T> {
        HistoryState::zeros(self.arch.config.d_hidden)
    }

    fn state_var(&self, t: &mut Tape<'_, T>, state: &HistoryState<T>) -> Result<Var> {
        if state.h.len() != self.arch.config.d_hidden {
            return Err(Error::Contract(format!(
                "state width {} differs from d_hidden {}",
                state.h.len(),
                self.arch.config.d_hidden
            )));
        }
        Ok(t.input(Tensor::row(state.h.clone())))
    }

    pub fn encode_step(&self, state: &HistoryState<T>, ev: &Event, norm: &NormStats) -> Result<HistoryState<T>> {
        let mut t = Tape::new(&self.params);
        let h = self.state_var(&mut t, state)?;
        let out = self.arch.encode(&mut t, h, ev, norm)?;
        Ok(HistoryState { h: t.value(out).data().to_vec() })
    }

    pub fn temporal_head(&self, state: &HistoryState<T>, meta: MetadataClass) -> Result<MixtureParams<T>> {
        let mut t = Tape::new(&self.params);
        let h = self.state_var(&mut t, state)?;
        let mix = self.arch.temporal(&mut t, h, meta)?;
        Ok(read_mixture(&t, &mix))
    }

    pub fn sender_logits(&self, state: &HistoryState<T>) -> Result<Vec<T>> {
        let mut t = Tape::new(&self.params);
        let h = self.state_var(&mut t, state)?;
        let l = self.arch.sender_logits(&mut t, h);
        Ok(t.value(l).data().to_vec())
    }

    pub fn recipient_logits(&self, state: &HistoryState<T>, sender: usize) -> Result<Vec<T>> {
        let mut t = Tape::new(&self.params);
        let h = self.state_var(&mut t, state)?;
        let l = self.arch.recipient_logits(&mut t, h, sender)?;
        Ok(t.value(l).data().to_vec())
    }

    /// Loss components of one teacher-forced sequence.
    pub fn batch_nll(&self, seq: &[Event], norm: &NormStats) -> Result<NllBreakdown<T>> {
        let mut t = Tape::new(&self.params);
        let v = self.arch.sequence(&mut t, seq, norm)?;
        Ok(breakdown(&t, &v, seq.len()))
    }

    /// Adds `∂total/∂w` for one sequence into `grads` and returns its losses.
    pub fn accumulate_gradients(&self, seq: &[Event], norm: &NormStats, grads: &mut Gradients<T>) -> Result<NllBreakdown<T>> {
        let mut t = Tape::new(&self.params);
        let v = self.arch.sequence(&mut t, seq, norm)?;
        t.backward(v.total, grads)?;
        Ok(breakdown(&t, &v, seq.len()))
    }

    /// Per-event head outputs under teacher forcing.
    pub fn score_sequence(&self, seq: &[Event], norm: &NormStats) -> Result<Vec<StepOutput<T>>> {
        let mut t = Tape::new(&self.params);
        let v = self.arch.sequence(&mut t, seq, norm)?;
        Ok(v.steps
            .iter()
            .map(|s| StepOutput {
                mixture: read_mixture(&t, &s.mixture),
                sender_logits: t.value(s.sender_logits).data().to_vec(),
                recipient_logits: t.value(s.recipient_logits).data().to_vec(),
                tau_nll: t.scalar(s.tau_nll),
                sender_nll: t.scalar(s.sender_nll),
                recipient_nll: t.scalar(s.recipient_nll),
            })
            .collect())
    }

    /// Converts the weights to another scalar type.
    pub fn cast<U: Real>(&self) -> LogNormMixNet<U> {
        let mut out = LogNormMixNet::<U>::zeros(self.arch.config.clone(), self.arch.set_members.clone())
            .expect("config already validated");
        for (id, p) in self.params.params() {
            let dst = out.params.value_mut(id);
            for (d, &s) in dst.data_mut().iter_mut().zip(p.value.data()) {
                *d = U::of(s.to_f64_lossy());
            }
        }
        out
    }
}

fn running_sum<T: Real>(t: &mut Tape<'_, T>, slot: &mut Option<Var>, v: Var) {
    *slot = Some(match *slot {
        Some(s) => t.add(s, v),
        None => v,
    });
}

fn read_mixture<T: Real>(t: &Tape<'_, T>, mix: &MixtureVars) -> MixtureParams<T> {
    MixtureParams {
        weights: t.value(mix.log_weights).data().iter().map(|x| x.exp()).collect(),
        means: t.value(mix.means).data().to_vec(),
        scales: t.value(mix.scales).data().to_vec(),
    }
}

fn breakdown<T: Real>(t: &Tape<'_, T>, v: &SequenceVars, events: usize) -> NllBreakdown<T> {
    NllBreakdown {
        tau: t.scalar(v.tau),
        sender: t.scalar(v.sender),
        recipient: t.scalar(v.recipient),
        total: t.scalar(v.total),
        events,
    }
}
