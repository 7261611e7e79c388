//! The shared candidate stream driving every simulation.
//!
//! Candidates are the points of a unit-intensity Poisson field restricted to
//! the strip `[0, inf) x [0, total_rate)`: a time and a mark. Candidate `k`
//! always consumes words `4k .. 4k + 4` of a ChaCha8 keystream selected by
//! `(seed, stream)`, so two processes given the same key see exactly the same
//! candidates.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const WORDS_PER_CANDIDATE: u128 = 4;

/// A uniform on `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A uniform on the open interval `(0, 1)`, on a grid of 52 bits.
#[inline]
pub fn open_interval(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Deterministic random source keyed by `(seed, stream)`.
#[derive(Debug, Clone)]
pub struct KeyedRng {
    inner: ChaCha8Rng,
}

impl KeyedRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        unit_interval(self.inner.next_u64())
    }

    /// Exponential with the given rate.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -libm::log(open_interval(self.inner.next_u64())) / rate
    }

    fn seek(&mut self, word: u128) {
        self.inner.set_word_pos(word);
    }
}

/// One point of the driving field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub index: u64,
    pub time: f64,
    /// Position in `[0, total_rate)`; selects the unit and decides acceptance.
    pub mark: f64,
}

/// Sequential generator of candidates at rate `total_rate`.
#[derive(Debug, Clone)]
pub struct CandidateStream {
    rng: KeyedRng,
    rate: f64,
    time: f64,
    index: u64,
}

impl CandidateStream {
    pub fn new(seed: u64, stream: u64, rate: f64) -> Self {
        Self { rng: KeyedRng::new(seed, stream), rate, time: 0.0, index: 0 }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// The next candidate, or `None` when the field is empty (zero rate).
    pub fn next_candidate(&mut self) -> Option<Candidate> {
        if self.rate <= 0.0 {
            return None;
        }
        let (gap, mark) = draw(&mut self.rng, self.rate);
        self.time += gap;
        let c = Candidate { index: self.index, time: self.time, mark };
        self.index += 1;
        Some(c)
    }
}

#[inline]
fn draw(rng: &mut KeyedRng, rate: f64) -> (f64, f64) {
    let gap = rng.exponential(rate);
    let mark = rng.uniform() * rate;
    (gap, mark)
}

/// Random access to the `(gap, mark)` pair of candidate `index`.
pub fn candidate_draw(seed: u64, stream: u64, rate: f64, index: u64) -> (f64, f64) {
    let mut rng = KeyedRng::new(seed, stream);
    rng.seek(WORDS_PER_CANDIDATE * index as u128);
    draw(&mut rng, rate)
}
