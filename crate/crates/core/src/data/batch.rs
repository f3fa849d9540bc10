//! Epoch batching. Short trailing batches are dropped.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{PlumeError, Result};
use crate::tensor::Matrix;

/// Row indices of each full batch for one epoch. With `rng`, rows are a fresh
/// permutation; without, insertion order.
pub fn epoch_indices<R: Rng + ?Sized>(rows: usize, batch_size: usize, rng: Option<&mut R>) -> Result<Vec<Vec<usize>>> {
    if batch_size < 2 {
        return Err(PlumeError::Config(format!("batch size must be >= 2, got {batch_size}")));
    }
    if rows < batch_size {
        return Err(PlumeError::NoData(format!(
            "{rows} training rows cannot fill one batch of {batch_size}"
        )));
    }
    let mut order: Vec<usize> = (0..rows).collect();
    if let Some(rng) = rng {
        order.shuffle(rng);
    }
    Ok(order
        .chunks_exact(batch_size)
        .map(<[usize]>::to_vec)
        .collect())
}

/// Iterator over the `N × D` batches of one epoch.
pub struct BatchIterator<'a> {
    data: &'a Matrix,
    batches: std::vec::IntoIter<Vec<usize>>,
}

impl<'a> BatchIterator<'a> {
    pub fn new<R: Rng + ?Sized>(data: &'a Matrix, batch_size: usize, rng: Option<&mut R>) -> Result<Self> {
        let batches = epoch_indices(data.rows(), batch_size, rng)?;
        Ok(Self {
            data,
            batches: batches.into_iter(),
        })
    }
}

impl Iterator for BatchIterator<'_> {
    type Item = Matrix;

    fn next(&mut self) -> Option<Matrix> {
        self.batches.next().map(|idx| self.data.select_rows(&idx))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.batches.size_hint()
    }
}

impl ExactSizeIterator for BatchIterator<'_> {}
