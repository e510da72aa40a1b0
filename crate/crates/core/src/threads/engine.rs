use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SenderProfile;
use crate::data::{MetadataClass, Vocabularies};
use crate::error::{Error, Result};
use crate::sampling::SampledEvent;
use crate::text::{CannedText, GenRequest, KeywordMode, TextKind, TextProvider};

const DAY: f64 = 86_400.0;
/// Email ids kept in a `References` header.
pub const MAX_REFERENCES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommType {
    #[serde(rename = "new")]
    NewThread,
    Reply,
    Fwd,
}

impl CommType {
    pub const ALL: [CommType; 3] = [CommType::NewThread, CommType::Reply, CommType::Fwd];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            CommType::NewThread => "new",
            CommType::Reply => "reply",
            CommType::Fwd => "fwd",
        }
    }
}

impl fmt::Display for CommType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CommType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CommType::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown communication type `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThreadConfig {
    /// Span of the rolling type fractions.
    pub window_days: f64,
    /// Threads touched within this span can be replied to or forwarded.
    pub active_days: f64,
    pub cap: f64,
    /// (new, reply, fwd) used for senders without subject data.
    pub default_proportions: [f64; 3],
    pub subject_max_tokens: usize,
    pub body_max_tokens: usize,
    pub keywords: usize,
    pub keyword_mode: KeywordMode,
    /// Mail domain for labels that are not addresses.
    pub domain: String,
}

impl Default for ThreadConfig {
    fn default() -> Self {
        Self {
            window_days: 60.0,
            active_days: 7.0,
            cap: 1.1,
            default_proportions: [0.5, 0.4, 0.1],
            subject_max_tokens: 8,
            body_max_tokens: 40,
            keywords: 10,
            keyword_mode: KeywordMode::TfIdf,
            domain: "example.com".into(),
        }
    }
}

impl ThreadConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.default_proportions;
        if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("default_proportions must be fractions summing to 1".into()));
        }
        if !(self.window_days > 0.0 && self.active_days > 0.0 && self.cap > 0.0) {
            return Err(Error::Config("window_days, active_days and cap must be positive".into()));
        }
        if self.subject_max_tokens == 0 || self.body_max_tokens == 0 || self.keywords == 0 {
            return Err(Error::Config("token budgets and keyword count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thread {
    pub thread_id: u64,
    /// Subject without any RE:/FW: prefix.
    pub subject: String,
    /// Senders and recipients of all emails so far.
    pub participants: BTreeSet<usize>,
    pub emails: Vec<u64>,
    pub last_active: i64,
    /// Text of the latest email, used to seed the next body.
    pub last_text: String,
    /// Created or extended in the current run; such threads are never pruned.
    #[serde(skip)]
    pub touched: bool,
}

impl Thread {
    pub fn is_active(&self, now: i64, active_days: f64) -> bool {
        (now - self.last_active) as f64 <= active_days * DAY
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedEmail {
    pub email_id: u64,
    pub thread_id: u64,
    pub comm_type: CommType,
    pub timestamp: i64,
    pub tau: f64,
    pub sender: usize,
    pub recipients: Vec<usize>,
    pub recipient_set: Option<usize>,
    pub metadata: MetadataClass,
    pub subject: String,
    pub greeting: String,
    pub body: String,
    pub salutation: String,
    pub in_reply_to: Option<u64>,
    pub references: Vec<u64>,
}

impl GeneratedEmail {
    /// Greeting, body and salutation as one message.
    pub fn message(&self) -> String {
        format!("{}\n\n{}\n\n{}", self.greeting, self.body, self.salutation)
    }

    /// Participants: sender plus recipients.
    pub fn participants(&self) -> BTreeSet<usize> {
        self.recipients.iter().copied().chain([self.sender]).collect()
    }
}

/// One line of an email output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmailRecord {
    pub email_id: u64,
    pub thread_id: u64,
    pub comm_type: CommType,
    pub ts: i64,
    pub tau_h: f64,
    pub sender: String,
    pub recipients: Vec<String>,
    pub meta: MetadataClass,
    pub subject: String,
    pub greeting: String,
    pub body: String,
    pub salutation: String,
    pub in_reply_to: Option<u64>,
}

impl EmailRecord {
    pub fn from_email(e: &GeneratedEmail, vocab: &Vocabularies) -> Self {
        Self {
            email_id: e.email_id,
            thread_id: e.thread_id,
            comm_type: e.comm_type,
            ts: e.timestamp,
            tau_h: e.tau,
            sender: vocab.nodes.label(e.sender).to_string(),
            recipients: e.recipients.iter().map(|&r| vocab.nodes.label(r).to_string()).collect(),
            meta: e.metadata,
            subject: e.subject.clone(),
            greeting: e.greeting.clone(),
            body: e.body.clone(),
            salutation: e.salutation.clone(),
            in_reply_to: e.in_reply_to,
        }
    }
}

/// Thread store plus every sender's rolling type history.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ThreadStore {
    pub threads: BTreeMap<u64, Thread>,
    pub rolling: BTreeMap<usize, VecDeque<(i64, CommType)>>,
    pub next_email_id: u64,
    pub next_thread_id: u64,
}

impl ThreadStore {
    /// Fraction of `sender`'s emails within the window ending at `now` that were of type `t`.
    pub fn rolling_fraction(&self, sender: usize, t: CommType, now: i64, window_days: f64) -> f64 {
        let Some(q) = self.rolling.get(&sender) else { return 0.0 };
        let since = now as f64 - window_days * DAY;
        let (mut hit, mut all) = (0usize, 0usize);
        for &(ts, c) in q.iter().filter(|(ts, _)| *ts as f64 >= since) {
            let _ = ts;
            all += 1;
            hit += usize::from(c == t);
        }
        if all == 0 {
            0.0
        } else {
            hit as f64 / all as f64
        }
    }

    fn prune_rolling(&mut self, sender: usize, now: i64, window_days: f64) {
        if let Some(q) = self.rolling.get_mut(&sender) {
            let since = now as f64 - window_days * DAY;
            while q.front().is_some_and(|(ts, _)| (*ts as f64) < since) {
                q.pop_front();
            }
        }
    }

    /// Active threads a Reply or Fwd by `sender` to `recipients` could join.
    pub fn compatible(&self, sender: usize, recipients: &[usize], t: CommType, now: i64, active_days: f64) -> Vec<u64> {
        let parts: BTreeSet<usize> = recipients.iter().copied().chain([sender]).collect();
        self.threads
            .values()
            .filter(|th| th.is_active(now, active_days))
            .filter(|th| match t {
                CommType::Reply => th.participants == parts,
                CommType::Fwd => th.participants.contains(&sender) && th.participants.is_subset(&parts) && th.participants.len() < parts.len(),
                CommType::NewThread => false,
            })
            .map(|th| th.thread_id)
            .collect()
    }

    /// Drops threads idle beyond both spans, except those touched in this run.
    pub fn prune(&mut self, now: i64, cfg: &ThreadConfig) {
        let keep = cfg.window_days.max(cfg.active_days);
        self.threads.retain(|_, th| th.touched || th.is_active(now, keep));
    }
}

/// The type cascade: Reply if a thread over exactly these participants is
/// active and the sender's rolling reply fraction is under `cap` times its
/// training fraction; else Fwd under the same rule for threads over a strict
/// subset; else a new thread.
pub fn select_comm_type(ev: &SampledEvent, profile: &SenderProfile, store: &ThreadStore, cfg: &ThreadConfig) -> CommType {
    for t in [CommType::Reply, CommType::Fwd] {
        let under_cap = store.rolling_fraction(ev.sender, t, ev.timestamp, cfg.window_days) < cfg.cap * profile.fraction(t);
        if under_cap && !store.compatible(ev.sender, &ev.recipients, t, ev.timestamp, cfg.active_days).is_empty() {
            return t;
        }
    }
    CommType::NewThread
}

/// Uniform choice among compatible active threads; `None` means start a new one.
pub fn select_target_thread(ev: &SampledEvent, t: CommType, store: &ThreadStore, active_days: f64, rng: &mut impl Rng) -> Option<u64> {
    store.compatible(ev.sender, &ev.recipients, t, ev.timestamp, active_days).choose(rng).copied()
}

/// Display name for a node label: the local part of an address, words capitalized.
pub fn display_name(label: &str) -> String {
    let local = label.split('@').next().unwrap_or(label);
    local
        .split(['.', '_', '-', ' '])
        .filter(|w| !w.is_empty())
        .map(|w| {
            let mut c = w.chars();
            c.next().map(|f| f.to_uppercase().chain(c).collect::<String>()).unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Turns sampled events into threaded emails. One engine per stream.
pub struct ThreadEngine {
    cfg: ThreadConfig,
    profiles: Vec<SenderProfile>,
    names: Vec<String>,
    canned: CannedText,
    provider: Arc<dyn TextProvider>,
    store: ThreadStore,
    rng: ChaCha8Rng,
    emitted: u64,
}

/// Serializable engine state for resuming.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub store: ThreadStore,
    pub rng: ChaCha8Rng,
}

impl ThreadEngine {
    pub fn new(
        cfg: ThreadConfig,
        profiles: Vec<SenderProfile>,
        labels: &[String],
        canned: CannedText,
        provider: Arc<dyn TextProvider>,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if profiles.len() != labels.len() || profiles.iter().enumerate().any(|(i, p)| p.sender != i) {
            return Err(Error::Contract("one profile per node, indexed by node id".into()));
        }
        if canned.greetings.is_empty() || canned.salutations.is_empty() || canned.forwards.is_empty() {
            return Err(Error::Config("canned text lists must be non-empty".into()));
        }
        Ok(Self {
            cfg,
            profiles,
            names: labels.iter().map(|l| display_name(l)).collect(),
            canned,
            provider,
            store: ThreadStore::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            emitted: 0,
        })
    }

    pub fn config(&self) -> &ThreadConfig {
        &self.cfg
    }

    pub fn store(&self) -> &ThreadStore {
        &self.store
    }

    pub fn profiles(&self) -> &[SenderProfile] {
        &self.profiles
    }

    pub fn state(&self) -> EngineState {
        EngineState { store: self.store.clone(), rng: self.rng.clone() }
    }

    pub fn restore(&mut self, state: EngineState) {
        self.store = state.store;
        self.rng = state.rng;
    }

    fn ask(&self, kind: TextKind, prompt: String, context: Vec<String>, max_tokens: usize, seed: u64) -> Result<String> {
        self.provider.generate(&GenRequest { kind, prompt, context, max_tokens, seed })
    }

    /// Assigns type and thread to one event and writes its text.
    pub fn process(&mut self, ev: &SampledEvent) -> Result<GeneratedEmail> {
        let n = self.profiles.len();
        if ev.sender >= n || ev.recipients.iter().any(|&r| r >= n) {
            return Err(Error::IdOutOfRange { kind: "node", id: ev.sender.max(*ev.recipients.iter().max().unwrap_or(&0)), size: n });
        }
        let now = ev.timestamp;
        self.store.prune_rolling(ev.sender, now, self.cfg.window_days);
        let mut comm = select_comm_type(ev, &self.profiles[ev.sender], &self.store, &self.cfg);
        let target = match comm {
            CommType::NewThread => None,
            t => select_target_thread(ev, t, &self.store, self.cfg.active_days, &mut self.rng),
        };
        if target.is_none() {
            comm = CommType::NewThread;
        }
        let email_id = self.store.next_email_id;
        let (thread_id, base, prior_text, in_reply_to, references) = match target {
            Some(id) => {
                let th = &self.store.threads[&id];
                let refs = th.emails[th.emails.len().saturating_sub(MAX_REFERENCES)..].to_vec();
                (id, th.subject.clone(), Some(th.last_text.clone()), th.emails.last().copied(), refs)
            }
            None => {
                let kw = self.profiles[ev.sender].keywords.choose(&mut self.rng).cloned().unwrap_or_else(|| "update".into());
                let seed = self.rng.gen();
                let s = self.ask(TextKind::Subject, kw, vec![], self.cfg.subject_max_tokens, seed)?;
                (self.store.next_thread_id, s.lines().next().unwrap_or("").trim().to_string(), None, None, vec![])
            }
        };
        let subject = match comm {
            CommType::NewThread => base.clone(),
            CommType::Reply => format!("RE: {base}"),
            CommType::Fwd => format!("FW: {base}"),
        };
        let recipients_named = ev.recipients.iter().map(|&r| self.names[r].as_str()).collect::<Vec<_>>().join(", ");
        let greeting = format!("{} {},", self.canned.greetings.choose(&mut self.rng).expect("non-empty"), recipients_named);
        let body = if comm == CommType::Fwd {
            self.canned.forwards.choose(&mut self.rng).expect("non-empty").clone()
        } else {
            let seed = self.rng.gen();
            self.ask(TextKind::Body, base.clone(), prior_text.into_iter().collect(), self.cfg.body_max_tokens, seed)?
        };
        let salutation = format!("{}\n{}", self.canned.salutations.choose(&mut self.rng).expect("non-empty"), self.names[ev.sender]);

        let email = GeneratedEmail {
            email_id,
            thread_id,
            comm_type: comm,
            timestamp: now,
            tau: ev.tau,
            sender: ev.sender,
            recipients: ev.recipients.clone(),
            recipient_set: ev.recipient_set,
            metadata: ev.metadata,
            subject,
            greeting,
            body,
            salutation,
            in_reply_to,
            references,
        };
        self.store.next_email_id += 1;
        if target.is_none() {
            self.store.next_thread_id += 1;
        }
        let th = self.store.threads.entry(thread_id).or_insert_with(|| Thread {
            thread_id,
            subject: base,
            participants: BTreeSet::new(),
            emails: Vec::new(),
            last_active: now,
            last_text: String::new(),
            touched: true,
        });
        th.participants.extend(email.participants());
        th.emails.push(email_id);
        th.last_active = now;
        th.last_text = format!("{}\n{}", email.subject, email.body);
        th.touched = true;
        self.store.rolling.entry(ev.sender).or_default().push_back((now, comm));
        self.emitted += 1;
        if self.emitted % 256 == 0 {
            self.store.prune(now, &self.cfg);
        }
        Ok(email)
    }
}
