use alloc::vec::Vec;
use core::ops::Deref;

use rand::seq::{index, SliceRandom};

use crate::error::{invalid, Result};
use crate::rng::{seeded, Rng};

/// Labelled samples stored row-major: sample `i` occupies
/// `inputs[i * dim..(i + 1) * dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
    num_classes: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<f64>, labels: Vec<usize>, dim: usize, num_classes: usize) -> Result<Self> {
        if dim == 0 || num_classes == 0 {
            return Err(invalid("dataset needs dim >= 1 and at least one class"));
        }
        if inputs.len() != labels.len() * dim {
            return Err(invalid(alloc::format!(
                "{} input values do not form {} samples of dimension {dim}",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(invalid(alloc::format!("label {bad} is outside [0, {num_classes})")));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(invalid("dataset contains non-finite inputs"));
        }
        Ok(Self { inputs, labels, dim, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Copies the given samples, in order, into a new dataset.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
            labels.push(self.labels[i]);
        }
        Dataset { inputs, labels, dim: self.dim, num_classes: self.num_classes }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Applies `f` to every input vector, producing a dataset of dimension `new_dim`.
    pub fn map_inputs(&self, new_dim: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Result<Dataset> {
        let mut inputs = alloc::vec![0.0; self.len() * new_dim];
        for i in 0..self.len() {
            f(self.input(i), &mut inputs[i * new_dim..(i + 1) * new_dim]);
        }
        Dataset::new(inputs, self.labels.clone(), new_dim, self.num_classes)
    }
}

/// Indices of one mini-batch; unique within the batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniBatch(Vec<usize>);

impl MiniBatch {
    pub fn new(indices: Vec<usize>, population: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid("mini-batch must not be empty"));
        }
        let mut seen = alloc::vec![false; population];
        for &i in &indices {
            if i >= population {
                return Err(invalid(alloc::format!("index {i} outside population of {population}")));
            }
            if core::mem::replace(&mut seen[i], true) {
                return Err(invalid(alloc::format!("index {i} repeated in mini-batch")));
            }
        }
        Ok(Self(indices))
    }

    /// The batch covering every sample `0..population` in order.
    pub fn full(population: usize) -> Self {
        Self((0..population).collect())
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl Deref for MiniBatch {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

/// Draws `m` distinct indices uniformly from `0..population`.
pub fn sample_minibatch(population: usize, m: usize, rng: &mut Rng) -> Result<MiniBatch> {
    if m == 0 || m > population {
        return Err(invalid(alloc::format!(
            "batch size {m} must lie in [1, {population}]"
        )));
    }
    Ok(MiniBatch(index::sample(rng, population, m).into_vec()))
}

/// Draws `k` samples without replacement, deterministically from `seed`.
///
/// With `stratified`, classes receive equal quotas (differing by at most one),
/// with any shortfall of a small class redistributed to the others.
pub fn subsample(dataset: &Dataset, k: usize, seed: u64, stratified: bool) -> Result<Dataset> {
    let n = dataset.len();
    if k == 0 || k > n {
        return Err(invalid(alloc::format!("subsample size {k} must lie in [1, {n}]")));
    }
    let mut rng = seeded(seed);
    if !stratified {
        let picked = index::sample(&mut rng, n, k).into_vec();
        return Ok(dataset.select(&picked));
    }

    let c = dataset.num_classes();
    let mut by_class: Vec<Vec<usize>> = alloc::vec![Vec::new(); c];
    for (i, &l) in dataset.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
    }
    let mut order: Vec<usize> = (0..c).collect();
    order.shuffle(&mut rng);

    // Water-filling: one slot per class per round, skipping exhausted classes.
    let mut quota = alloc::vec![0usize; c];
    let mut remaining = k;
    while remaining > 0 {
        for &class in &order {
            if remaining == 0 {
                break;
            }
            if quota[class] < by_class[class].len() {
                quota[class] += 1;
                remaining -= 1;
            }
        }
    }
    let mut picked: Vec<usize> = order
        .iter()
        .flat_map(|&class| by_class[class][..quota[class]].iter().copied())
        .collect();
    picked.shuffle(&mut rng);
    Ok(dataset.select(&picked))
}
