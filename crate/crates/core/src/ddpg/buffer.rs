use rand::Rng;

use crate::nn::Matrix;

/// One environment step, with the action in network output space.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    /// terminal only; time-limit truncations stay `false`
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("replay buffer holds {size} transitions, needs {needed}")]
pub struct NotReady {
    pub size: usize,
    pub needed: usize,
}

/// Bounded ring of transitions; the oldest entry is overwritten first.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    warmup: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, warmup: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self {
            capacity,
            warmup,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn is_ready(&self, n: usize) -> bool {
        self.items.len() >= n.max(self.warmup) && !self.items.is_empty()
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<Transition>, NotReady> {
        if !self.is_ready(n) {
            return Err(NotReady {
                size: self.items.len(),
                needed: n.max(self.warmup).max(1),
            });
        }
        Ok((0..n)
            .map(|_| self.items[rng.random_range(0..self.items.len())].clone())
            .collect())
    }

    /// Items from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(self.items[..split].iter())
    }
}

/// Column-stacked view of a list of transitions.
#[derive(Clone, Debug)]
pub struct Batch {
    pub states: Matrix,
    pub actions: Matrix,
    pub rewards: Vec<f64>,
    pub next_states: Matrix,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(ts: &[Transition]) -> Result<Self, crate::nn::NnError> {
        let rows = |f: fn(&Transition) -> &Vec<f64>| -> Result<Matrix, crate::nn::NnError> {
            let v: Vec<&[f64]> = ts.iter().map(|t| f(t).as_slice()).collect();
            Matrix::from_rows(&v)
        };
        Ok(Self {
            states: rows(|t| &t.s)?,
            actions: rows(|t| &t.a)?,
            rewards: ts.iter().map(|t| t.r).collect(),
            next_states: rows(|t| &t.s_next)?,
            dones: ts.iter().map(|t| t.done).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}
