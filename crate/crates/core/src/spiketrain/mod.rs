//! Spike-train data model, synthetic temporally-sparse dataset generation and
//! the sparse-event text format.

mod format;
mod generate;

pub use format::{read_dataset, write_dataset, SpikeDataset, FORMAT_MAGIC};
pub use generate::{
    embed_at, embed_with_noise, generate_split, make_class_patterns, sample_seed, ClassPattern,
    DatasetSpec, GeneratedSample, Split,
};

use crate::error::{Error, Result};

/// Binary event matrix with `channels` rows and `steps` columns, plus a class label.
///
/// Stored time-major so that the column read at each simulation step is contiguous.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpikeTrain {
    channels: usize,
    steps: usize,
    bits: Vec<u8>,
    label: usize,
}

impl SpikeTrain {
    pub fn zeros(channels: usize, steps: usize, label: usize) -> Result<Self> {
        if channels == 0 || steps == 0 {
            return Err(Error::InvalidArgument(format!(
                "spike train needs at least one channel and one step (got {channels}x{steps})"
            )));
        }
        Ok(Self {
            channels,
            steps,
            bits: vec![0; channels * steps],
            label,
        })
    }

    /// Builds a train from a `[step][channel]` boolean-like closure.
    pub fn from_fn(
        channels: usize,
        steps: usize,
        label: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut train = Self::zeros(channels, steps, label)?;
        for t in 0..steps {
            for c in 0..channels {
                if f(t, c) {
                    train.set(t, c);
                }
            }
        }
        Ok(train)
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn label(&self) -> usize {
        self.label
    }

    #[inline]
    pub fn get(&self, t: usize, channel: usize) -> bool {
        self.bits[t * self.channels + channel] != 0
    }

    #[inline]
    pub fn set(&mut self, t: usize, channel: usize) {
        self.bits[t * self.channels + channel] = 1;
    }

    #[inline]
    pub fn clear(&mut self, t: usize, channel: usize) {
        self.bits[t * self.channels + channel] = 0;
    }

    /// The input column at step `t`, one 0/1 byte per channel.
    #[inline]
    pub fn column(&self, t: usize) -> &[u8] {
        &self.bits[t * self.channels..(t + 1) * self.channels]
    }

    pub fn active_channels(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.column(t)
            .iter()
            .enumerate()
            .filter_map(|(c, &b)| (b != 0).then_some(c))
    }

    pub fn spike_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    /// Events as `(t, channel)` pairs, ascending by t then channel.
    pub fn events(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.steps).flat_map(move |t| self.active_channels(t).map(move |c| (t, c)))
    }

    /// Copy with every column whose mask bit is zero blanked out.
    pub fn masked(&self, mask: &[bool]) -> Result<Self> {
        if mask.len() != self.steps {
            return Err(Error::Shape(format!(
                "mask length {} != horizon {}",
                mask.len(),
                self.steps
            )));
        }
        let mut out = self.clone();
        for (t, &keep) in mask.iter().enumerate() {
            if !keep {
                out.bits[t * self.channels..(t + 1) * self.channels].fill(0);
            }
        }
        Ok(out)
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = label;
        self
    }
}
