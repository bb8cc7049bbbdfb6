use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::numerics::{Rng, Stream};

/// Shuffled mini-batches over `0..n`. The order for a given epoch depends
/// only on `(seed, stream, epoch)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batcher {
    n: usize,
    batch_size: usize,
    seed: u64,
    stream: Stream,
}

impl Batcher {
    pub fn new(n: usize, batch_size: usize, seed: u64, stream: Stream) -> Self {
        assert!(batch_size >= 1, "batch size must be at least 1");
        Self {
            n,
            batch_size,
            seed,
            stream,
        }
    }

    /// `⌈n / b⌉`.
    pub fn batches_per_epoch(&self) -> usize {
        self.n.div_ceil(self.batch_size)
    }

    pub fn permutation(&self, epoch: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n).collect();
        Rng::for_stream(self.seed, self.stream, epoch as u32).shuffle(&mut idx);
        idx
    }

    pub fn epoch(&self, epoch: usize) -> Vec<Vec<usize>> {
        self.permutation(epoch)
            .chunks(self.batch_size)
            .map(<[usize]>::to_vec)
            .collect()
    }
}

/// Endless batch sequence: the batches of epoch 0, then epoch 1, and so on.
/// Lets the smaller domain cycle while the larger one defines the epoch.
#[derive(Debug, Clone)]
pub struct BatchStream {
    batcher: Batcher,
    next_epoch: usize,
    queue: VecDeque<Vec<usize>>,
}

impl BatchStream {
    pub fn new(batcher: Batcher) -> Self {
        Self {
            batcher,
            next_epoch: 0,
            queue: VecDeque::new(),
        }
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.batcher.n == 0 {
            return Vec::new();
        }
        if self.queue.is_empty() {
            self.queue.extend(self.batcher.epoch(self.next_epoch));
            self.next_epoch += 1;
        }
        self.queue.pop_front().expect("refilled above")
    }
}
