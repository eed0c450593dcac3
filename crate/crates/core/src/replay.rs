//! Episodic replay with Monte-Carlo return backfill.
//!
//! Transitions enter the buffer with a pending return. When their episode ends
//! the returns of every surviving record of that episode are written in one
//! backward pass. Only records with a known return are ever sampled.

use std::collections::VecDeque;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_CAPACITY: usize = 50_000;

/// One stored interaction. `mc_return` is `None` until the episode is finalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRecord {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    /// True only for terminal transitions; truncated episodes keep `false`
    /// so their last target still bootstraps.
    pub done: bool,
    pub mc_return: Option<f64>,
    pub episode_id: u64,
    pub t_within_episode: usize,
}

impl TransitionRecord {
    /// A record with a pending return.
    pub fn pending(
        state: usize,
        action: usize,
        reward: f64,
        next_state: usize,
        done: bool,
        episode_id: u64,
        t_within_episode: usize,
    ) -> Self {
        Self { state, action, reward, next_state, done, mc_return: None, episode_id, t_within_episode }
    }

    pub fn is_finalized(&self) -> bool {
        self.mc_return.is_some()
    }
}

/// How the open episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeEnd {
    /// A terminal state was reached; the last record must have `done = true`.
    Terminal,
    /// The step limit was hit; the observed partial return is used.
    Truncated,
}

/// Fixed-capacity FIFO of transitions. The newest `open_len` records belong to
/// the episode currently being collected.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    records: VecDeque<TransitionRecord>,
    open_len: usize,
    open_episode: Option<u64>,
    total_stored: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            records: VecDeque::with_capacity(capacity.min(1 << 20)),
            open_len: 0,
            open_episode: None,
            total_stored: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_stored(&self) -> u64 {
        self.total_stored
    }

    /// Records whose return is known.
    pub fn finalized_len(&self) -> usize {
        self.records.len() - self.open_len
    }

    pub fn open_len(&self) -> usize {
        self.open_len
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &TransitionRecord> {
        self.records.iter()
    }

    pub fn store(&mut self, record: TransitionRecord) -> Result<()> {
        if record.is_finalized() {
            return Err(Error::Usage("records must be stored with a pending return".into()));
        }
        match self.open_episode {
            Some(id) if id != record.episode_id => {
                return Err(Error::Usage(format!(
                    "episode {id} is still open; finalize it before storing episode {}",
                    record.episode_id
                )));
            }
            _ => self.open_episode = Some(record.episode_id),
        }
        if self.records.len() == self.capacity {
            self.records.pop_front();
            if self.open_len == self.capacity {
                self.open_len -= 1;
            }
        }
        self.records.push_back(record);
        self.open_len += 1;
        self.total_stored += 1;
        Ok(())
    }

    /// Writes discounted returns into every surviving record of the open episode.
    pub fn finalize_episode(&mut self, gamma: f64, end: EpisodeEnd) -> Result<()> {
        if self.open_episode.is_none() {
            return Err(Error::Usage("no open episode to finalize".into()));
        }
        if self.open_len > 0 {
            let last_done = self.records.back().is_some_and(|r| r.done);
            if end == EpisodeEnd::Terminal && !last_done {
                return Err(Error::Usage("terminal finalization requires the last record to have done = true".into()));
            }
        }
        let start = self.records.len() - self.open_len;
        let mut acc = 0.0;
        for record in self.records.range_mut(start..).rev() {
            acc = record.reward + gamma * acc;
            record.mc_return = Some(acc);
        }
        self.open_len = 0;
        self.open_episode = None;
        Ok(())
    }

    /// `batch_size` finalized records drawn uniformly with replacement, or
    /// `None` when no finalized record exists yet.
    pub fn sample_uniform(&self, batch_size: usize, rng: &mut impl rand::Rng) -> Option<Vec<TransitionRecord>> {
        let n = self.finalized_len();
        if n == 0 {
            return None;
        }
        Some((0..batch_size).map(|_| self.records[rng.random_range(0..n)]).collect())
    }

    /// Writes one CSV row per record: `s,a,r,s_next,done,G,episode_id,t`.
    /// Pending returns are written as an empty field.
    pub fn dump_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "s,a,r,s_next,done,G,episode_id,t")?;
            for r in &self.records {
                let g = r.mc_return.map(|g| g.to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.state, r.action, r.reward, r.next_state, r.done, g, r.episode_id, r.t_within_episode
                )?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::discounted_returns;
    use crate::rng;
    use proptest::prelude::*;

    fn record(reward: f64, done: bool, episode: u64, t: usize) -> TransitionRecord {
        TransitionRecord::pending(t, 0, reward, t + 1, done, episode, t)
    }

    fn store_episode(buf: &mut ReplayBuffer, rewards: &[f64], episode: u64) {
        for (t, &r) in rewards.iter().enumerate() {
            buf.store(record(r, t + 1 == rewards.len(), episode, t)).unwrap();
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = ReplayBuffer::new(2).unwrap();
        for t in 0..3 {
            buf.store(record(t as f64, false, 0, t)).unwrap();
        }
        let kept: Vec<f64> = buf.iter().map(|r| r.reward).collect();
        assert_eq!(kept, vec![1.0, 2.0]);
        assert!(buf.iter().all(|r| r.mc_return.is_none()));
    }

    #[test]
    fn finalized_records_cannot_be_stored() {
        let mut buf = ReplayBuffer::new(4).unwrap();
        let mut r = record(1.0, true, 0, 0);
        r.mc_return = Some(1.0);
        assert!(matches!(buf.store(r), Err(Error::Usage(_))));
    }

    #[test]
    fn only_one_open_episode() {
        let mut buf = ReplayBuffer::new(4).unwrap();
        buf.store(record(0.0, false, 0, 0)).unwrap();
        assert!(matches!(buf.store(record(0.0, false, 1, 0)), Err(Error::Usage(_))));
    }

    #[test]
    fn finalize_examples() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        store_episode(&mut buf, &[0.0, 0.0, 1.0], 0);
        buf.finalize_episode(0.99, EpisodeEnd::Terminal).unwrap();
        let returns: Vec<f64> = buf.iter().map(|r| r.mc_return.unwrap()).collect();
        let expected = [0.9801, 0.99, 1.0];
        for (g, e) in returns.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12);
        }

        store_episode(&mut buf, &[2.5], 1);
        buf.finalize_episode(0.99, EpisodeEnd::Terminal).unwrap();
        assert_eq!(buf.iter().last().unwrap().mc_return, Some(2.5));

        assert!(matches!(buf.finalize_episode(0.99, EpisodeEnd::Terminal), Err(Error::Usage(_))));
    }

    #[test]
    fn terminal_finalization_needs_done() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        buf.store(record(1.0, false, 0, 0)).unwrap();
        assert!(buf.finalize_episode(0.9, EpisodeEnd::Terminal).is_err());
        buf.finalize_episode(0.9, EpisodeEnd::Truncated).unwrap();
        let last = buf.iter().last().unwrap();
        assert!(!last.done);
        assert_eq!(last.mc_return, Some(1.0));
    }

    #[test]
    fn partially_evicted_episode_finalizes_its_suffix() {
        let rewards = [1.0, -2.0, 0.5, 3.0, 0.0, 4.0, -1.0];
        let mut buf = ReplayBuffer::new(4).unwrap();
        store_episode(&mut buf, &rewards, 0);
        buf.finalize_episode(0.9, EpisodeEnd::Terminal).unwrap();
        let oracle = discounted_returns(&rewards, 0.9);
        let stored: Vec<(usize, f64)> = buf.iter().map(|r| (r.t_within_episode, r.mc_return.unwrap())).collect();
        assert_eq!(stored.len(), 4);
        for (t, g) in stored {
            assert!((g - oracle[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_needs_a_finalized_record() {
        let mut buf = ReplayBuffer::new(8).unwrap();
        let mut rng = rng::stream(0, "sample");
        assert!(buf.sample_uniform(4, &mut rng).is_none());
        buf.store(record(1.0, false, 0, 0)).unwrap();
        assert!(buf.sample_uniform(4, &mut rng).is_none());
        buf.store(record(1.0, true, 0, 1)).unwrap();
        buf.finalize_episode(0.5, EpisodeEnd::Terminal).unwrap();
        let batch = buf.sample_uniform(6, &mut rng).unwrap();
        assert_eq!(batch.len(), 6);
        assert!(batch.iter().all(|r| r.is_finalized()));

        // A single finalized record is drawn repeatedly.
        let mut single = ReplayBuffer::new(8).unwrap();
        single.store(record(3.0, true, 0, 0)).unwrap();
        single.finalize_episode(0.5, EpisodeEnd::Terminal).unwrap();
        let batch = single.sample_uniform(5, &mut rng).unwrap();
        assert!(batch.iter().all(|r| *r == batch[0]));
    }

    #[test]
    fn sampling_is_uniform_and_skips_the_open_episode() {
        let mut buf = ReplayBuffer::new(16).unwrap();
        for ep in 0..10u64 {
            buf.store(TransitionRecord::pending(ep as usize, 0, 0.0, 0, true, ep, 0)).unwrap();
            buf.finalize_episode(0.9, EpisodeEnd::Terminal).unwrap();
        }
        buf.store(TransitionRecord::pending(99, 0, 0.0, 0, false, 10, 0)).unwrap();
        let mut rng = rng::stream(1, "sample");
        let mut counts = [0usize; 10];
        let n = 100_000;
        for r in buf.sample_uniform(n, &mut rng).unwrap() {
            assert_ne!(r.state, 99);
            counts[r.state] += 1;
        }
        for c in counts {
            let freq = c as f64 / n as f64;
            assert!((0.08..=0.12).contains(&freq), "frequency {freq}");
        }
    }

    #[test]
    fn csv_dump_has_one_row_per_record() {
        let mut buf = ReplayBuffer::new(8).unwrap();
        store_episode(&mut buf, &[0.0, 1.0], 0);
        buf.finalize_episode(0.5, EpisodeEnd::Terminal).unwrap();
        buf.store(record(2.0, false, 1, 0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("buffer.csv");
        buf.dump_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "s,a,r,s_next,done,G,episode_id,t");
        assert_eq!(lines[1], "0,0,0,1,false,0.5,0,0");
        assert_eq!(lines[3], "0,0,2,1,false,,1,0");
    }

    proptest! {
        #[test]
        fn size_and_returns_track_the_trace(
            episodes in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 1..12), 1..10),
            capacity in 1usize..20,
            gamma in 0.0f64..0.999,
        ) {
            let mut buf = ReplayBuffer::new(capacity).unwrap();
            let mut stored = 0usize;
            for (ep, rewards) in episodes.iter().enumerate() {
                for (t, &r) in rewards.iter().enumerate() {
                    buf.store(record(r, t + 1 == rewards.len(), ep as u64, t)).unwrap();
                    stored += 1;
                    prop_assert_eq!(buf.len(), stored.min(capacity));
                }
                buf.finalize_episode(gamma, EpisodeEnd::Terminal).unwrap();
            }
            for r in buf.iter() {
                let oracle = discounted_returns(&episodes[r.episode_id as usize], gamma);
                prop_assert!((r.mc_return.unwrap() - oracle[r.t_within_episode]).abs() <= 1e-12);
            }
        }
    }
}
