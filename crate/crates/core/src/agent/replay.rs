use alloc::vec::Vec;

use rand::Rng;

use crate::linalg::Vector;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vector,
    /// Data-driven action component.
    pub a_drl: f64,
    pub reward: f64,
    pub s_next: Vector,
    pub done: bool,
}

impl Transition {
    pub fn is_finite(&self) -> bool {
        self.a_drl.is_finite()
            && self.reward.is_finite()
            && self.s.iter().chain(self.s_next.iter()).all(|v| v.is_finite())
    }
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten when full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "replay capacity must be at least 1");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::NonFinite("transition"));
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sampling with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, count: usize, rng: &mut R) -> Result<Vec<&'a Transition>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..count)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(k: f64) -> Transition {
        Transition {
            s: Vector::from_element(2, k),
            a_drl: k,
            reward: -k,
            s_next: Vector::from_element(2, k + 1.0),
            done: false,
        }
    }

    #[test]
    fn single_item_round_trip() {
        let mut buf = ReplayBuffer::new(4);
        buf.push(tr(1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(buf.sample(1, &mut rng).unwrap()[0], &tr(1.0));
    }

    #[test]
    fn oldest_is_evicted() {
        let mut buf = ReplayBuffer::new(3);
        for k in 0..4 {
            buf.push(tr(k as f64)).unwrap();
        }
        assert_eq!(buf.len(), 3);
        assert!(buf.iter().all(|t| t.a_drl != 0.0));
        assert!(buf.iter().any(|t| t.a_drl == 3.0));
    }

    #[test]
    fn sampling_is_seeded() {
        let mut buf = ReplayBuffer::new(100);
        for k in 0..100 {
            buf.push(tr(k as f64)).unwrap();
        }
        let a: Vec<f64> = buf
            .sample(20, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap()
            .iter()
            .map(|t| t.a_drl)
            .collect();
        let b: Vec<f64> = buf
            .sample(20, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap()
            .iter()
            .map(|t| t.a_drl)
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_and_non_finite() {
        let mut buf = ReplayBuffer::new(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(buf.sample(1, &mut rng).unwrap_err(), Error::EmptyBuffer);
        assert!(buf.push(tr(f64::NAN)).is_err());
    }
}
