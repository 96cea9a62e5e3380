//! Scoped publish/subscribe bus with per-key coalescing.
//!
//! Publishing goes through a [`Publisher`], which is `Send + Sync` and can
//! be cloned onto any thread. Delivery happens only in
//! [`Bus::dispatch_pending`], on the thread that owns the [`Bus`]; the bus
//! holds non-`Send` handlers, so the compiler keeps it on its owner.
//!
//! An envelope with a coalesce key replaces the payload of any undispatched
//! envelope sharing its `(topic, scope, key)` triple. The replaced entry
//! keeps its queue position and original sequence number, so one dispatch
//! cycle delivers at most one envelope per triple, carrying the latest
//! payload.

pub mod topics;

use crate::scene::ViewId;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::{Arc, Mutex, MutexGuard};

pub type Payload = serde_json::Map<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BusError {
    #[error("malformed topic pattern {0:?}")]
    MalformedPattern(String),
    #[error("topic must be non-empty")]
    EmptyTopic,
    #[error("unknown subscription {0:?}")]
    UnknownSubscription(SubscriptionId),
    #[error("dispatch_pending called from inside a handler")]
    Reentrant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "scope", content = "view", rename_all = "lowercase")]
pub enum Scope {
    Broadcast,
    View(ViewId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScopeFilter {
    Any,
    View(ViewId),
}

impl ScopeFilter {
    /// Broadcast envelopes reach every subscriber; view-scoped envelopes
    /// reach `Any` subscribers and subscribers filtered to that view.
    pub fn admits(&self, scope: Scope) -> bool {
        match (self, scope) {
            (ScopeFilter::Any, _) | (_, Scope::Broadcast) => true,
            (ScopeFilter::View(want), Scope::View(got)) => *want == got,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub topic: String,
    pub scope: Scope,
    pub payload: Payload,
    pub coalesce_key: Option<String>,
    pub seq: u64,
    pub source: String,
}

/// Builder for an envelope before the bus assigns its sequence number.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    topic: String,
    scope: Scope,
    payload: Payload,
    coalesce_key: Option<String>,
    source: String,
}

impl Message {
    pub fn new(topic: impl Into<String>) -> Self {
        Self {
            topic: topic.into(),
            scope: Scope::Broadcast,
            payload: Payload::new(),
            coalesce_key: None,
            source: String::new(),
        }
    }

    pub fn scope(mut self, scope: Scope) -> Self {
        self.scope = scope;
        self
    }

    pub fn payload(mut self, payload: Payload) -> Self {
        self.payload = payload;
        self
    }

    pub fn field(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.payload.insert(key.into(), value.into());
        self
    }

    /// Empty keys are treated as no key.
    pub fn coalesce(mut self, key: impl Into<String>) -> Self {
        let key = key.into();
        self.coalesce_key = (!key.is_empty()).then_some(key);
        self
    }

    pub fn source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }
}

/// Exact topic or a `prefix.*` family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopicPattern {
    Exact(String),
    Prefix(String),
}

impl TopicPattern {
    pub fn parse(pattern: &str) -> Result<Self, BusError> {
        let bad = || BusError::MalformedPattern(pattern.to_string());
        let (body, prefix) = match pattern.strip_suffix(".*") {
            Some(body) => (body, true),
            None => (pattern, false),
        };
        let well_formed = !body.is_empty()
            && body.split('.').all(|seg| {
                !seg.is_empty() && seg.chars().all(|c| !c.is_whitespace() && c != '*' && c != '.')
            });
        if !well_formed {
            return Err(bad());
        }
        Ok(if prefix {
            TopicPattern::Prefix(format!("{body}."))
        } else {
            TopicPattern::Exact(body.to_string())
        })
    }

    pub fn matches(&self, topic: &str) -> bool {
        match self {
            TopicPattern::Exact(t) => t == topic,
            TopicPattern::Prefix(p) => topic.len() > p.len() && topic.starts_with(p.as_str()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubscriptionId(pub u64);

type CoalesceSlot = (String, Scope, String);

#[derive(Default)]
struct Queue {
    pending: Vec<Envelope>,
    index: HashMap<CoalesceSlot, usize>,
    next_seq: u64,
    published: HashMap<String, u64>,
}

#[derive(Default)]
struct Shared {
    queue: Mutex<Queue>,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, Queue> {
        // a poisoned queue is still structurally valid
        self.queue.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn publish(&self, msg: Message) -> Result<u64, BusError> {
        if msg.topic.is_empty() {
            return Err(BusError::EmptyTopic);
        }
        let mut q = self.lock();
        q.next_seq += 1;
        let seq = q.next_seq;
        *q.published.entry(msg.topic.clone()).or_default() += 1;
        if let Some(key) = &msg.coalesce_key {
            let slot = (msg.topic.clone(), msg.scope, key.clone());
            if let Some(&at) = q.index.get(&slot) {
                let existing = &mut q.pending[at];
                existing.payload = msg.payload;
                existing.source = msg.source;
                return Ok(seq);
            }
            let at = q.pending.len();
            q.index.insert(slot, at);
        }
        q.pending.push(Envelope {
            topic: msg.topic,
            scope: msg.scope,
            payload: msg.payload,
            coalesce_key: msg.coalesce_key,
            seq,
            source: msg.source,
        });
        Ok(seq)
    }
}

/// Thread-safe publishing handle.
#[derive(Clone, Default)]
pub struct Publisher {
    shared: Arc<Shared>,
}

impl Publisher {
    /// Enqueues `msg` and returns its sequence number. Never blocks on
    /// delivery.
    pub fn publish(&self, msg: Message) -> Result<u64, BusError> {
        self.shared.publish(msg)
    }

    /// Envelopes published on `topic` so far, counting coalesced ones.
    pub fn publish_count(&self, topic: &str) -> u64 {
        self.shared.lock().published.get(topic).copied().unwrap_or(0)
    }

    pub fn pending_len(&self) -> usize {
        self.shared.lock().pending.len()
    }
}

impl std::fmt::Debug for Publisher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Publisher")
            .field("pending", &self.pending_len())
            .finish()
    }
}

type Handler = Rc<RefCell<dyn FnMut(&Envelope)>>;

struct Subscription {
    id: SubscriptionId,
    pattern: TopicPattern,
    filter: ScopeFilter,
    handler: Handler,
}

/// Owner-context side of the bus.
pub struct Bus {
    publisher: Publisher,
    subs: RefCell<Vec<Subscription>>,
    next_sub: Cell<u64>,
    dispatching: Cell<bool>,
}

impl Default for Bus {
    fn default() -> Self {
        Self::new()
    }
}

impl Bus {
    pub fn new() -> Self {
        Self {
            publisher: Publisher::default(),
            subs: RefCell::new(Vec::new()),
            next_sub: Cell::new(0),
            dispatching: Cell::new(false),
        }
    }

    pub fn publisher(&self) -> Publisher {
        self.publisher.clone()
    }

    pub fn publish(&self, msg: Message) -> Result<u64, BusError> {
        self.publisher.publish(msg)
    }

    pub fn subscribe<F>(&self, pattern: &str, filter: ScopeFilter, handler: F) -> Result<SubscriptionId, BusError>
    where
        F: FnMut(&Envelope) + 'static,
    {
        let pattern = TopicPattern::parse(pattern)?;
        let id = SubscriptionId(self.next_sub.get() + 1);
        self.next_sub.set(id.0);
        self.subs.borrow_mut().push(Subscription {
            id,
            pattern,
            filter,
            handler: Rc::new(RefCell::new(handler)),
        });
        Ok(id)
    }

    pub fn unsubscribe(&self, id: SubscriptionId) -> Result<(), BusError> {
        let mut subs = self.subs.borrow_mut();
        let index = subs
            .iter()
            .position(|s| s.id == id)
            .ok_or(BusError::UnknownSubscription(id))?;
        subs.remove(index);
        Ok(())
    }

    pub fn subscription_count(&self) -> usize {
        self.subs.borrow().len()
    }

    pub fn pending_len(&self) -> usize {
        self.publisher.pending_len()
    }

    pub fn publish_count(&self, topic: &str) -> u64 {
        self.publisher.publish_count(topic)
    }

    /// Delivers everything queued before the call, in queue order, and
    /// returns the number of (envelope, subscription) deliveries. Anything
    /// published while handlers run waits for the next call.
    pub fn dispatch_pending(&self) -> Result<usize, BusError> {
        if self.dispatching.replace(true) {
            return Err(BusError::Reentrant);
        }
        let _guard = DispatchGuard(&self.dispatching);
        let batch = {
            let mut q = self.publisher.shared.lock();
            q.index.clear();
            std::mem::take(&mut q.pending)
        };
        let mut delivered = 0;
        for env in &batch {
            let targets: Vec<(SubscriptionId, Handler)> = self
                .subs
                .borrow()
                .iter()
                .filter(|s| s.filter.admits(env.scope) && s.pattern.matches(&env.topic))
                .map(|s| (s.id, Rc::clone(&s.handler)))
                .collect();
            for (id, handler) in targets {
                // a handler earlier in this batch may have unsubscribed it
                if !self.subs.borrow().iter().any(|s| s.id == id) {
                    continue;
                }
                (handler.borrow_mut())(env);
                delivered += 1;
            }
        }
        Ok(delivered)
    }
}

struct DispatchGuard<'a>(&'a Cell<bool>);

impl Drop for DispatchGuard<'_> {
    fn drop(&mut self) {
        self.0.set(false);
    }
}
