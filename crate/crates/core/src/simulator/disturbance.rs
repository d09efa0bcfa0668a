use nalgebra::Vector2;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One additive disturbance term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Primitive {
    /// `amplitude` for `t ≥ t0`, zero before.
    Step { t0: f64, amplitude: f64 },
    /// `amplitude · sin(frequency · t + phase)`, frequency in rad/s.
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `slope · (t − t0)` for `t ≥ t0`, zero before.
    Ramp { t0: f64, slope: f64 },
    /// Uniform on `[−amplitude, amplitude]`, redrawn every hold interval.
    /// Without an explicit seed the set-wide `seed` is used.
    Noise {
        amplitude: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
}

/// Disturbances for the two channels of `B_w` (channel 1 drives `v̇_z`,
/// channel 2 drives `ė`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSpec {
    #[serde(default)]
    pub channel1: Vec<Primitive>,
    #[serde(default)]
    pub channel2: Vec<Primitive>,
    /// Seed for noise terms without their own.
    #[serde(default)]
    pub seed: u64,
    /// Noise hold interval, s; the simulator sets it to its step.
    #[serde(default = "default_hold")]
    pub noise_hold: f64,
}

fn default_hold() -> f64 {
    2e-4
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self {
            channel1: Vec::new(),
            channel2: Vec::new(),
            seed: 0,
            noise_hold: default_hold(),
        }
    }
}

impl DisturbanceSpec {
    pub fn none() -> Self {
        Self::default()
    }

    /// Step of 0.05 on channel 2 at t = 90 s plus a 0.02-amplitude, 2 rad/s
    /// sine on channel 1. Placeholder values.
    pub fn paper_default() -> Self {
        Self {
            channel1: vec![Primitive::Sine {
                amplitude: 0.02,
                frequency: 2.0,
                phase: 0.0,
            }],
            channel2: vec![Primitive::Step {
                t0: 90.0,
                amplitude: 0.05,
            }],
            ..Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.channel1.is_empty() && self.channel2.is_empty()
    }

    /// Sum of each channel's primitives at `t`.
    pub fn sample(&self, t: f64) -> Vector2<f64> {
        Vector2::new(self.channel_value(&self.channel1, 1, t), self.channel_value(&self.channel2, 2, t))
    }

    fn channel_value(&self, prims: &[Primitive], channel: u64, t: f64) -> f64 {
        prims
            .iter()
            .enumerate()
            .map(|(i, p)| match *p {
                Primitive::Step { t0, amplitude } => {
                    if t >= t0 {
                        amplitude
                    } else {
                        0.0
                    }
                }
                Primitive::Sine {
                    amplitude,
                    frequency,
                    phase,
                } => amplitude * (frequency * t + phase).sin(),
                Primitive::Ramp { t0, slope } => {
                    if t >= t0 {
                        slope * (t - t0)
                    } else {
                        0.0
                    }
                }
                Primitive::Noise { amplitude, seed } => {
                    let seed = seed.unwrap_or(self.seed);
                    amplitude * noise_value(seed, channel, i as u64, self.hold_index(t))
                }
            })
            .sum()
    }

    fn hold_index(&self, t: f64) -> i64 {
        // small bias so sample times computed as t0 + k·dt land in bucket k
        (t / self.noise_hold + 1e-9).floor() as i64
    }
}

/// Uniform draw on [−1, 1] for hold interval `index`, reproducible by
/// seeking the ChaCha stream instead of replaying it.
fn noise_value(seed: u64, channel: u64, term: u64, index: i64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(channel << 32 | term);
    rng.set_word_pos((index as u64 as u128) * 2);
    let bits = rng.next_u64() >> 11;
    let unit = bits as f64 / (1u64 << 53) as f64;
    2.0 * unit - 1.0
}
