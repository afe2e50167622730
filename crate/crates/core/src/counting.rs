//! Monte Carlo of the three-fold coincidence experiment.
//!
//! Every laser pulse is a trigger slot. In each slot, independently:
//!
//! * the herald detector fires with probability `herald`;
//! * given a herald, the converted signal photon is detected with probability
//!   `converted` (heralding efficiency × conversion efficiency × decay);
//! * a noise photon is detected with probability `noise`.
//!
//! At most one detection per detector per slot. Pair correlations live within
//! a single slot, so coincidences between a signal and a herald `k ≠ 0` slots
//! away are accidentals.
//!
//! # Sampling
//!
//! Realistic runs need 10¹⁰–10¹¹ slots with only ~10⁻⁶ signal detections per
//! slot, so slots are not visited one by one. The sampler draws the slots in
//! which a signal fires (herald ∧ converted, and noise) by geometric skipping,
//! draws herald states only for slots within the histogram window of a signal,
//! and draws the number of remaining heralds binomially. The joint law of the
//! resulting [`CountRecord`] and [`CoincidenceHistogram`] is that of the
//! per-slot model; [`DenseSlots`] is the literal per-slot simulator kept for
//! cross-checks.
//!
//! The slot range is cut into fixed blocks of [`BLOCK_SLOTS`]; block `b` owns
//! ChaCha8 streams `2b` and `2b + 1` of the run seed, so outputs do not depend
//! on how blocks are spread over shards or threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric};
use rayon::prelude::*;
use serde::Serialize;

use crate::dispersion::conversion_efficiency;
use crate::memory::storage_decay;
use crate::{Error, ExperimentConfig, Result, SellmeierModel};

pub const BLOCK_SLOTS: u64 = 1 << 22;

/// Histogram offsets are `-MAX_OFFSET..=MAX_OFFSET` slots.
pub const MAX_OFFSET: i64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlotProbabilities {
    pub herald: f64,
    pub converted: f64,
    pub noise: f64,
}

impl SlotProbabilities {
    pub fn new(herald: f64, converted: f64, noise: f64) -> Result<Self> {
        for (name, p) in [
            ("p_herald", herald),
            ("converted", converted),
            ("p_noise", noise),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(
                    name,
                    format!("probability {p} not in [0, 1]"),
                ));
            }
        }
        Ok(Self {
            herald,
            converted,
            noise,
        })
    }

    /// Probabilities for a read field at `read_center` nm retrieved after `delay_ps`.
    pub fn for_setting(
        cfg: &ExperimentConfig,
        model: &SellmeierModel,
        read_center: f64,
        delay_ps: f64,
    ) -> Result<Self> {
        let eta_fc = conversion_efficiency(model, read_center, cfg)?;
        let decay = storage_decay(delay_ps, cfg)?;
        Self::new(cfg.p_herald, cfg.eta_h * eta_fc * decay, cfg.p_noise)
    }

    /// P(signal detector fires) in one slot.
    pub fn signal_probability(&self) -> f64 {
        1.0 - (1.0 - self.herald * self.converted) * (1.0 - self.noise)
    }

    /// P(herald and signal fire in the same slot).
    pub fn coincidence_probability(&self) -> f64 {
        self.herald * (1.0 - (1.0 - self.converted) * (1.0 - self.noise))
    }

    /// P(herald fires | no converted detection in the slot).
    fn herald_without_conversion(&self) -> f64 {
        let denom = 1.0 - self.herald * self.converted;
        if denom <= 0.0 {
            0.0
        } else {
            (self.herald * (1.0 - self.converted) / denom).clamp(0.0, 1.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrialOutcome {
    pub slot_index: u64,
    pub herald_fired: bool,
    pub signal_fired: bool,
    /// The signal detection came from noise only.
    pub signal_is_noise: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CountRecord {
    pub n_slots: u64,
    pub n_herald: u64,
    pub n_signal: u64,
    pub n_coincidence: u64,
}

impl CountRecord {
    pub fn is_consistent(&self) -> bool {
        self.n_coincidence <= self.n_herald.min(self.n_signal)
            && self.n_herald.max(self.n_signal) <= self.n_slots
    }
}

impl std::ops::AddAssign for CountRecord {
    fn add_assign(&mut self, rhs: Self) {
        self.n_slots += rhs.n_slots;
        self.n_herald += rhs.n_herald;
        self.n_signal += rhs.n_signal;
        self.n_coincidence += rhs.n_coincidence;
    }
}

/// Coincidences between a signal in slot `t` and a herald in slot `t + offset`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoincidenceHistogram {
    bin_offsets: Vec<i64>,
    counts: Vec<u64>,
}

impl CoincidenceHistogram {
    pub fn new(bin_offsets: Vec<i64>, counts: Vec<u64>) -> Result<Self> {
        if bin_offsets.len() != counts.len() {
            return Err(Error::Shape(format!(
                "{} offsets but {} counts",
                bin_offsets.len(),
                counts.len()
            )));
        }
        Ok(Self {
            bin_offsets,
            counts,
        })
    }

    fn empty() -> Self {
        let offsets: Vec<i64> = (-MAX_OFFSET..=MAX_OFFSET).collect();
        let counts = vec![0; offsets.len()];
        Self {
            bin_offsets: offsets,
            counts,
        }
    }

    pub fn bin_offsets(&self) -> &[i64] {
        &self.bin_offsets
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, offset: i64) -> Option<u64> {
        self.bin_offsets
            .iter()
            .position(|&o| o == offset)
            .map(|i| self.counts[i])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn add(&mut self, other: &Self) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub record: CountRecord,
    pub histogram: CoincidenceHistogram,
    /// Every slot in which the signal detector fired, in slot order.
    pub signal_events: Vec<TrialOutcome>,
}

/// Simulate `n_slots` trigger slots, spreading blocks over the rayon pool.
pub fn simulate_slots(probs: &SlotProbabilities, n_slots: u64, seed: u64) -> Result<SimulationRun> {
    simulate_slots_sharded(probs, n_slots, seed, rayon::current_num_threads())
}

pub fn simulate_setting(
    cfg: &ExperimentConfig,
    model: &SellmeierModel,
    read_center: f64,
    delay_ps: f64,
    n_slots: u64,
    seed: u64,
) -> Result<SimulationRun> {
    let probs = SlotProbabilities::for_setting(cfg, model, read_center, delay_ps)?;
    simulate_slots(&probs, n_slots, seed)
}

pub fn coincidence_histogram(
    probs: &SlotProbabilities,
    n_slots: u64,
    seed: u64,
) -> Result<CoincidenceHistogram> {
    Ok(simulate_slots(probs, n_slots, seed)?.histogram)
}

#[derive(Debug, Clone, Copy)]
struct SignalSlot {
    slot: u64,
    converted: bool,
    noise: bool,
}

struct Block {
    start: u64,
    end: u64,
}

struct BlockSignals {
    signals: Vec<SignalSlot>,
    n_converted: u64,
}

struct BlockHeralds {
    /// Heralded slots among the drawn ones (converted slots and window slots), sorted.
    heralded: Vec<u64>,
    n_herald: u64,
}

fn block_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Slots in `[start, end)` where a Bernoulli(p) event occurs.
fn bernoulli_slots(rng: &mut ChaCha8Rng, p: f64, start: u64, end: u64) -> Vec<u64> {
    if p <= 0.0 {
        return Vec::new();
    }
    let gap = Geometric::new(p).expect("p in (0, 1]");
    let mut out = Vec::new();
    let mut pos = start.saturating_add(gap.sample(rng));
    while pos < end {
        out.push(pos);
        pos = pos.saturating_add(1).saturating_add(gap.sample(rng));
    }
    out
}

fn draw_signals(probs: &SlotProbabilities, seed: u64, index: u64, block: &Block) -> BlockSignals {
    let mut rng = block_rng(seed, 2 * index);
    let converted = bernoulli_slots(
        &mut rng,
        probs.herald * probs.converted,
        block.start,
        block.end,
    );
    let noise = bernoulli_slots(&mut rng, probs.noise, block.start, block.end);

    let mut signals = Vec::with_capacity(converted.len() + noise.len());
    let (mut i, mut j) = (0, 0);
    while i < converted.len() || j < noise.len() {
        let c = converted.get(i).copied().unwrap_or(u64::MAX);
        let n = noise.get(j).copied().unwrap_or(u64::MAX);
        let slot = c.min(n);
        signals.push(SignalSlot {
            slot,
            converted: c == slot,
            noise: n == slot,
        });
        i += usize::from(c == slot);
        j += usize::from(n == slot);
    }
    BlockSignals {
        signals,
        n_converted: converted.len() as u64,
    }
}

fn draw_heralds(
    probs: &SlotProbabilities,
    seed: u64,
    index: u64,
    block: &Block,
    n_slots: u64,
    all_signals: &[SignalSlot],
    own: &BlockSignals,
) -> BlockHeralds {
    let lo = block.start.saturating_sub(MAX_OFFSET as u64);
    let hi = block.end.saturating_add(MAX_OFFSET as u64);
    let first = all_signals.partition_point(|s| s.slot < lo);
    let last = all_signals.partition_point(|s| s.slot < hi);

    let converted: Vec<u64> = own
        .signals
        .iter()
        .filter(|s| s.converted)
        .map(|s| s.slot)
        .collect();

    let mut window: Vec<u64> = all_signals[first..last]
        .iter()
        .flat_map(|s| (-MAX_OFFSET..=MAX_OFFSET).map(move |k| s.slot as i64 + k))
        .filter(|&slot| slot >= block.start as i64 && slot < block.end.min(n_slots) as i64)
        .map(|slot| slot as u64)
        .filter(|slot| converted.binary_search(slot).is_err())
        .collect();
    window.sort_unstable();
    window.dedup();

    let mut rng = block_rng(seed, 2 * index + 1);
    let r = probs.herald_without_conversion();
    let mut heralded = converted.clone();
    heralded.extend(window.iter().copied().filter(|_| rng.random::<f64>() < r));
    heralded.sort_unstable();

    let remaining = (block.end - block.start) - converted.len() as u64 - window.len() as u64;
    let rest = if remaining > 0 && r > 0.0 {
        Binomial::new(remaining, r)
            .expect("valid binomial")
            .sample(&mut rng)
    } else {
        0
    };
    BlockHeralds {
        n_herald: heralded.len() as u64 + rest,
        heralded,
    }
}

fn tally_block(
    n_slots: u64,
    own: &BlockSignals,
    heralded: &[u64],
) -> (CoincidenceHistogram, Vec<TrialOutcome>) {
    let mut hist = CoincidenceHistogram::empty();
    let mut events = Vec::with_capacity(own.signals.len());
    for s in &own.signals {
        for (bin, k) in (-MAX_OFFSET..=MAX_OFFSET).enumerate() {
            let target = s.slot as i64 + k;
            if target < 0 || target >= n_slots as i64 {
                continue;
            }
            if heralded.binary_search(&(target as u64)).is_ok() {
                hist.counts[bin] += 1;
            }
        }
        events.push(TrialOutcome {
            slot_index: s.slot,
            herald_fired: heralded.binary_search(&s.slot).is_ok(),
            signal_fired: true,
            signal_is_noise: s.noise && !s.converted,
        });
    }
    (hist, events)
}

/// Run over `shards` contiguous groups of blocks; the output is identical
/// for every shard count.
pub fn simulate_slots_sharded(
    probs: &SlotProbabilities,
    n_slots: u64,
    seed: u64,
    shards: usize,
) -> Result<SimulationRun> {
    if n_slots == 0 {
        return Err(Error::config("trials", "n_slots must be >= 1"));
    }
    let probs = SlotProbabilities::new(probs.herald, probs.converted, probs.noise)?;
    let n_blocks = n_slots.div_ceil(BLOCK_SLOTS);
    let blocks: Vec<Block> = (0..n_blocks)
        .map(|b| Block {
            start: b * BLOCK_SLOTS,
            end: ((b + 1) * BLOCK_SLOTS).min(n_slots),
        })
        .collect();
    let shards = shards.clamp(1, blocks.len());
    let per_shard = blocks.len().div_ceil(shards);
    let chunks: Vec<(usize, &[Block])> = blocks
        .chunks(per_shard)
        .enumerate()
        .map(|(i, c)| (i * per_shard, c))
        .collect();

    let signals: Vec<BlockSignals> = chunks
        .par_iter()
        .flat_map_iter(|&(offset, chunk)| {
            chunk
                .iter()
                .enumerate()
                .map(move |(i, b)| draw_signals(&probs, seed, (offset + i) as u64, b))
        })
        .collect();
    let all_signals: Vec<SignalSlot> = signals
        .iter()
        .flat_map(|b| b.signals.iter().copied())
        .collect();

    let heralds: Vec<BlockHeralds> = chunks
        .par_iter()
        .flat_map_iter(|&(offset, chunk)| {
            let signals = &signals;
            let all_signals = &all_signals;
            chunk.iter().enumerate().map(move |(i, b)| {
                let index = offset + i;
                draw_heralds(
                    &probs,
                    seed,
                    index as u64,
                    b,
                    n_slots,
                    all_signals,
                    &signals[index],
                )
            })
        })
        .collect();
    let heralded: Vec<u64> = heralds
        .iter()
        .flat_map(|h| h.heralded.iter().copied())
        .collect();

    let tallies: Vec<(CoincidenceHistogram, Vec<TrialOutcome>)> = signals
        .par_iter()
        .with_min_len(per_shard)
        .map(|own| tally_block(n_slots, own, &heralded))
        .collect();

    let mut histogram = CoincidenceHistogram::empty();
    let mut signal_events = Vec::with_capacity(all_signals.len());
    for (h, events) in tallies {
        histogram.add(&h);
        signal_events.extend(events);
    }
    let record = CountRecord {
        n_slots,
        n_herald: heralds.iter().map(|h| h.n_herald).sum(),
        n_signal: all_signals.len() as u64,
        n_coincidence: histogram.count(0).unwrap_or(0),
    };
    debug_assert!(record.is_consistent());
    debug_assert!(signals.iter().map(|b| b.n_converted).sum::<u64>() <= record.n_coincidence);
    Ok(SimulationRun {
        record,
        histogram,
        signal_events,
    })
}

/// Literal per-slot simulator: one [`TrialOutcome`] per slot.
pub struct DenseSlots {
    rng: ChaCha8Rng,
    probs: SlotProbabilities,
    next: u64,
    n_slots: u64,
}

impl DenseSlots {
    pub fn new(probs: SlotProbabilities, n_slots: u64, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            probs,
            next: 0,
            n_slots,
        }
    }

    /// Tally records and histogram from the full slot stream.
    pub fn run(self) -> SimulationRun {
        let n_slots = self.n_slots;
        let outcomes: Vec<TrialOutcome> = self.collect();
        let mut hist = CoincidenceHistogram::empty();
        let mut record = CountRecord {
            n_slots,
            ..Default::default()
        };
        for o in &outcomes {
            record.n_herald += u64::from(o.herald_fired);
            record.n_signal += u64::from(o.signal_fired);
            record.n_coincidence += u64::from(o.herald_fired && o.signal_fired);
            if !o.signal_fired {
                continue;
            }
            for (bin, k) in (-MAX_OFFSET..=MAX_OFFSET).enumerate() {
                let t = o.slot_index as i64 + k;
                if t >= 0 && t < n_slots as i64 && outcomes[t as usize].herald_fired {
                    hist.counts[bin] += 1;
                }
            }
        }
        SimulationRun {
            record,
            histogram: hist,
            signal_events: outcomes.into_iter().filter(|o| o.signal_fired).collect(),
        }
    }
}

impl Iterator for DenseSlots {
    type Item = TrialOutcome;

    fn next(&mut self) -> Option<TrialOutcome> {
        if self.next >= self.n_slots {
            return None;
        }
        let herald = self.rng.random::<f64>() < self.probs.herald;
        let converted = herald && self.rng.random::<f64>() < self.probs.converted;
        let noise = self.rng.random::<f64>() < self.probs.noise;
        let outcome = TrialOutcome {
            slot_index: self.next,
            herald_fired: herald,
            signal_fired: converted || noise,
            signal_is_noise: noise && !converted,
        };
        self.next += 1;
        Some(outcome)
    }
}

/// Mean of the ±1 and ±2 slot bins.
pub fn accidental_estimate(h: &CoincidenceHistogram) -> Result<f64> {
    let mut sum = 0u64;
    for offset in [-2, -1, 1, 2] {
        sum += h
            .count(offset)
            .ok_or_else(|| Error::Shape(format!("histogram has no bin at offset {offset}")))?;
    }
    Ok(sum as f64 / 4.0)
}

/// Signed difference of two Poisson counts with its propagated error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Subtracted {
    pub value: f64,
    pub std_error: f64,
}

pub fn background_subtract(counts_on: f64, counts_off: f64) -> Subtracted {
    Subtracted {
        value: counts_on - counts_off,
        std_error: (counts_on + counts_off).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(h: f64, c: f64, n: f64) -> SlotProbabilities {
        SlotProbabilities::new(h, c, n).unwrap()
    }

    #[test]
    fn no_photons_no_coincidences() {
        let run = simulate_slots(&probs(0.3, 0.0, 0.0), 100_000, 1).unwrap();
        assert_eq!(run.record.n_coincidence, 0);
        assert_eq!(run.record.n_signal, 0);
        assert_eq!(run.histogram.total(), 0);
        assert!(run.record.n_herald > 0);
    }

    #[test]
    fn source_off_all_bins_zero() {
        let run = simulate_slots(&probs(0.0, 0.0, 0.0), 1_000_000, 5).unwrap();
        assert_eq!(run.histogram.counts(), &[0, 0, 0, 0, 0]);
        assert_eq!(
            run.record,
            CountRecord {
                n_slots: 1_000_000,
                ..Default::default()
            }
        );
    }

    #[test]
    fn certain_events() {
        let run = simulate_slots(&probs(1.0, 1.0, 0.0), 1000, 3).unwrap();
        assert_eq!(run.record.n_herald, 1000);
        assert_eq!(run.record.n_signal, 1000);
        assert_eq!(run.record.n_coincidence, 1000);
        // Edge slots lose neighbours: 1000 − 1 for |k| = 1, 1000 − 2 for |k| = 2.
        assert_eq!(run.histogram.counts(), &[998, 999, 1000, 999, 998]);
    }

    #[test]
    fn determinism_and_shard_independence() {
        let p = probs(0.01, 0.2, 0.003);
        let n = 3 * BLOCK_SLOTS + 12_345;
        let a = simulate_slots_sharded(&p, n, 42, 1).unwrap();
        let b = simulate_slots_sharded(&p, n, 42, 4).unwrap();
        let c = simulate_slots_sharded(&p, n, 42, 64).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        let d = simulate_slots_sharded(&p, n, 43, 1).unwrap();
        assert_ne!(a.record, d.record);
    }

    #[test]
    fn invalid_inputs() {
        assert!(SlotProbabilities::new(1.5, 0.0, 0.0).is_err());
        assert!(SlotProbabilities::new(0.5, -0.1, 0.0).is_err());
        assert!(simulate_slots(&probs(0.1, 0.1, 0.1), 0, 1).is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.eta_h = 200.0;
        assert!(
            SlotProbabilities::for_setting(&cfg, &SellmeierModel::default(), 800.0, 0.0).is_err()
        );
    }

    #[test]
    fn records_are_consistent_and_events_flagged() {
        let run = simulate_slots(&probs(0.02, 0.3, 0.01), 2_000_000, 9).unwrap();
        assert!(run.record.is_consistent());
        assert_eq!(run.signal_events.len() as u64, run.record.n_signal);
        let coinc = run.signal_events.iter().filter(|e| e.herald_fired).count() as u64;
        assert_eq!(coinc, run.record.n_coincidence);
        for e in &run.signal_events {
            assert!(e.signal_fired);
            if !e.herald_fired {
                assert!(e.signal_is_noise, "converted photons require a herald");
            }
        }
        assert!(run
            .signal_events
            .windows(2)
            .all(|w| w[0].slot_index < w[1].slot_index));
    }

    fn within(observed: u64, expected: f64, sigmas: f64) -> bool {
        (observed as f64 - expected).abs() <= sigmas * expected.max(1.0).sqrt()
    }

    #[test]
    fn sparse_sampler_matches_expectations() {
        let p = probs(0.05, 0.2, 0.01);
        let n = 2_000_000u64;
        let run = simulate_slots(&p, n, 2024).unwrap();
        let nf = n as f64;
        assert!(within(run.record.n_herald, nf * p.herald, 4.0));
        assert!(within(
            run.record.n_signal,
            nf * p.signal_probability(),
            4.0
        ));
        assert!(within(
            run.record.n_coincidence,
            nf * p.coincidence_probability(),
            4.0
        ));
        let accidental = nf * p.signal_probability() * p.herald;
        for k in [-2, -1, 1, 2] {
            assert!(
                within(run.histogram.count(k).unwrap(), accidental, 4.0),
                "bin {k}"
            );
        }
    }

    #[test]
    fn dense_reference_agrees_with_sparse_sampler() {
        let p = probs(0.05, 0.2, 0.01);
        let n = 400_000u64;
        let seeds = 0..8u64;
        let mut dense = [0u64; 8];
        let mut sparse = [0u64; 8];
        for seed in seeds {
            for (acc, run) in [
                (&mut dense, DenseSlots::new(p, n, seed).run()),
                (&mut sparse, simulate_slots(&p, n, seed + 100).unwrap()),
            ] {
                acc[0] += run.record.n_herald;
                acc[1] += run.record.n_signal;
                acc[2] += run.record.n_coincidence;
                for (i, c) in run.histogram.counts().iter().enumerate() {
                    acc[3 + i] += c;
                }
            }
        }
        for (i, (d, s)) in dense.iter().zip(&sparse).enumerate() {
            let sigma = ((d + s) as f64).sqrt();
            assert!(
                (*d as f64 - *s as f64).abs() < 4.0 * sigma,
                "quantity {i}: {d} vs {s}"
            );
        }
    }

    #[test]
    fn accidentals() {
        let h = CoincidenceHistogram::new(vec![-2, -1, 0, 1, 2], vec![5, 5, 100, 5, 5]).unwrap();
        assert_eq!(accidental_estimate(&h).unwrap(), 5.0);
        let h = CoincidenceHistogram::new(vec![-2, -1, 0, 1, 2], vec![4, 6, 100, 5, 5]).unwrap();
        assert_eq!(accidental_estimate(&h).unwrap(), 5.0);
        let h = CoincidenceHistogram::new(vec![-1, 0, 1], vec![4, 100, 5]).unwrap();
        assert!(matches!(accidental_estimate(&h), Err(Error::Shape(_))));
        assert!(CoincidenceHistogram::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn subtraction() {
        let s = background_subtract(100.0, 0.0);
        assert_eq!((s.value, s.std_error), (100.0, 10.0));
        let s = background_subtract(100.0, 20.0);
        assert_eq!(s.value, 80.0);
        assert!((s.std_error - 10.954).abs() < 1e-3);
        let s = background_subtract(5.0, 9.0);
        assert_eq!(s.value, -4.0);
        assert!((s.std_error - 3.742).abs() < 1e-3);
    }
}
