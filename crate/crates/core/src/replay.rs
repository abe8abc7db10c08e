//! Structured replay memory: two chunks, each split into one FIFO queue per
//! label. Chunk 2 holds experiences whose reward beats the reward of
//! labeling the same node with its unary argmin; everything else lands in
//! chunk 1. Sampling is uniform over non-empty cells, then uniform within.

use std::collections::VecDeque;

use rand::Rng;

use crate::crf::{argmin, CrfInstance};
use crate::env::{Action, EpisodeState, RewardScheme};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Chunk {
    Unary,
    Energy,
}

impl Chunk {
    fn index(self) -> usize {
        match self {
            Chunk::Unary => 0,
            Chunk::Energy => 1,
        }
    }
}

/// Chunk of an experience that took `action` in `state` and earned `reward`.
pub fn route(
    instance: &CrfInstance,
    state: &EpisodeState,
    action: Action,
    reward: f64,
    scheme: RewardScheme,
) -> Result<Chunk> {
    let unary_label = argmin(instance.unary(action.node));
    let baseline = state.reward(instance, Action::new(action.node, unary_label), scheme)?;
    Ok(if reward > baseline { Chunk::Energy } else { Chunk::Unary })
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    num_labels: usize,
    cell_capacity: usize,
    cells: Vec<VecDeque<T>>,
}

impl<T> ReplayBuffer<T> {
    /// `capacity` is the total size, split evenly over the `2·|L|` cells
    /// (at least one slot each).
    pub fn new(num_labels: usize, capacity: usize) -> Self {
        let cells = 2 * num_labels.max(1);
        Self {
            num_labels: num_labels.max(1),
            cell_capacity: (capacity / cells).max(1),
            cells: (0..cells).map(|_| VecDeque::new()).collect(),
        }
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn cell_capacity(&self) -> usize {
        self.cell_capacity
    }

    fn cell_index(&self, chunk: Chunk, category: usize) -> usize {
        assert!(category < self.num_labels, "category {category} out of range");
        chunk.index() * self.num_labels + category
    }

    /// Stores `item`, evicting the oldest entry of its cell when full.
    pub fn push(&mut self, chunk: Chunk, category: usize, item: T) {
        let cap = self.cell_capacity;
        let idx = self.cell_index(chunk, category);
        let cell = &mut self.cells[idx];
        if cell.len() == cap {
            cell.pop_front();
        }
        cell.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.cells.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell(&self, chunk: Chunk, category: usize) -> &VecDeque<T> {
        &self.cells[self.cell_index(chunk, category)]
    }

    /// `(chunk, category)` of every non-empty cell.
    pub fn non_empty_cells(&self) -> Vec<(Chunk, usize)> {
        (0..self.cells.len())
            .filter(|&c| !self.cells[c].is_empty())
            .map(|c| {
                let chunk = if c < self.num_labels { Chunk::Unary } else { Chunk::Energy };
                (chunk, c % self.num_labels)
            })
            .collect()
    }

    /// Draws `batch` items with replacement: a uniform non-empty cell, then
    /// a uniform item inside it. Empty buffer gives an empty batch.
    pub fn sample<R: Rng>(&self, rng: &mut R, batch: usize) -> Vec<&T> {
        let filled: Vec<&VecDeque<T>> = self.cells.iter().filter(|c| !c.is_empty()).collect();
        if filled.is_empty() {
            return Vec::new();
        }
        (0..batch)
            .map(|_| {
                let cell = filled[rng.random_range(0..filled.len())];
                &cell[rng.random_range(0..cell.len())]
            })
            .collect()
    }

    /// Like [`sample`](Self::sample) but also reports each draw's cell.
    pub fn sample_with_cells<R: Rng>(&self, rng: &mut R, batch: usize) -> Vec<((Chunk, usize), &T)> {
        let filled: Vec<usize> = (0..self.cells.len()).filter(|&c| !self.cells[c].is_empty()).collect();
        if filled.is_empty() {
            return Vec::new();
        }
        (0..batch)
            .map(|_| {
                let c = filled[rng.random_range(0..filled.len())];
                let cell = &self.cells[c];
                let chunk = if c < self.num_labels { Chunk::Unary } else { Chunk::Energy };
                ((chunk, c % self.num_labels), &cell[rng.random_range(0..cell.len())])
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::{InstanceParts, PairwiseGate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fifo_eviction_per_cell() {
        let mut buf = ReplayBuffer::new(2, 8);
        assert_eq!(buf.cell_capacity(), 2);
        for k in 0..5 {
            buf.push(Chunk::Unary, 1, k);
        }
        buf.push(Chunk::Energy, 0, 99);
        assert_eq!(buf.cell(Chunk::Unary, 1).iter().copied().collect::<Vec<_>>(), vec![3, 4]);
        assert_eq!(buf.len(), 3);
        assert_eq!(buf.non_empty_cells(), vec![(Chunk::Unary, 1), (Chunk::Energy, 0)]);
    }

    #[test]
    fn single_cell_supplies_every_sample() {
        let mut buf = ReplayBuffer::new(3, 300);
        for k in 0..10 {
            buf.push(Chunk::Energy, 2, k);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = buf.sample_with_cells(&mut rng, 64);
        assert_eq!(batch.len(), 64);
        assert!(batch.iter().all(|(cell, _)| *cell == (Chunk::Energy, 2)));
        assert!(ReplayBuffer::<u8>::new(3, 30).sample(&mut rng, 5).is_empty());
    }

    #[test]
    fn routing_compares_against_unary_argmin() {
        let inst = CrfInstance::new(InstanceParts {
            num_labels: 2,
            edges: vec![(0, 1)],
            node_features: vec![vec![0.0]; 2],
            hypercolumns: vec![vec![0.0]; 2],
            unary: vec![vec![0.0, 1.0], vec![0.0, 0.5]],
            gate: PairwiseGate { alpha: 2.0, beta: 1.0 },
            hop1: vec![],
            hop2: vec![],
        })
        .unwrap();
        let mut state = EpisodeState::new(&inst);
        let s = RewardScheme::EnergyDelta;
        let a = Action::new(0, 0);
        assert_eq!(route(&inst, &state, a, state.reward(&inst, a, s).unwrap(), s).unwrap(), Chunk::Unary);
        state.apply(&inst, Action::new(0, 1), s).unwrap();
        // Node 1's unary prefers 0, but agreeing with node 0 avoids the Potts cost.
        let a = Action::new(1, 1);
        let r = state.reward(&inst, a, s).unwrap();
        assert_eq!(r, -0.5);
        assert_eq!(route(&inst, &state, a, r, s).unwrap(), Chunk::Energy);
    }
}
