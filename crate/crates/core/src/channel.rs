//! Per-TTI radio resources: PRB count and per-UE bits per PRB.
//!
//! The cell is capacity-capped: at nominal efficiency every PRB carries
//! `cell_capacity * tti / num_prbs` bits. Per-UE quality is a multiplier on
//! that nominal value.

use std::fmt;
use std::io::Write;
use std::ops::Range;

use rand::Rng;
use thiserror::Error;

use crate::model::{FlowId, Scenario, UeId, Violation};
use crate::rng::{self, TAG_FADING};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelVariation {
    /// Every UE at nominal efficiency.
    None,
    /// Fixed multipliers evenly spaced over `[lo, hi]` by UE index.
    StaticPerUe { lo: f64, hi: f64 },
    /// Multiplier drawn uniformly from `[lo, hi]` per UE and block of
    /// `block_ttis` TTIs.
    BlockFading { lo: f64, hi: f64, block_ttis: u64 },
}

impl ChannelVariation {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelVariation::None => "none",
            ChannelVariation::StaticPerUe { .. } => "static_per_ue",
            ChannelVariation::BlockFading { .. } => "block_fading",
        }
    }

    pub(crate) fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let range = match *self {
            ChannelVariation::None => None,
            ChannelVariation::StaticPerUe { lo, hi } => Some((lo, hi)),
            ChannelVariation::BlockFading { lo, hi, block_ttis } => {
                if block_ttis < 1 {
                    out.push(Violation {
                        field: "channel_block_ttis".into(),
                        reason: "must be at least 1".into(),
                    });
                }
                Some((lo, hi))
            }
        };
        if let Some((lo, hi)) = range {
            if !(lo > 0.0 && lo.is_finite() && hi.is_finite() && hi >= lo) {
                out.push(Violation {
                    field: "channel_lo".into(),
                    reason: "multiplier range needs 0 < lo <= hi".into(),
                });
            }
        }
        out
    }
}

impl fmt::Display for ChannelVariation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChannelError {
    #[error("unknown UE {0}")]
    UnknownUe(UeId),
    #[error("PRB budget exhausted: requested {requested}, {available} unassigned")]
    Exhausted { requested: u32, available: u32 },
}

#[derive(Debug, Clone)]
pub struct ChannelModel {
    num_prbs: u32,
    base_bits_per_prb: u32,
    num_ues: u32,
    variation: ChannelVariation,
    seed: u64,
    static_bits: Vec<u32>,
}

fn scaled(base: u32, multiplier: f64) -> u32 {
    ((base as f64 * multiplier).floor() as u32).max(1)
}

impl ChannelModel {
    pub fn new(
        num_prbs: u32,
        base_bits_per_prb: u32,
        num_ues: u32,
        variation: ChannelVariation,
        seed: u64,
    ) -> Self {
        let static_bits = (0..num_ues)
            .map(|ue| match variation {
                ChannelVariation::StaticPerUe { lo, hi } => {
                    let m = if num_ues > 1 {
                        lo + (hi - lo) * ue as f64 / (num_ues - 1) as f64
                    } else {
                        hi
                    };
                    scaled(base_bits_per_prb, m)
                }
                _ => base_bits_per_prb.max(1),
            })
            .collect();
        Self {
            num_prbs,
            base_bits_per_prb,
            num_ues,
            variation,
            seed,
            static_bits,
        }
    }

    pub fn for_scenario<T: Scalar>(s: &Scenario<T>, seed: u64) -> Self {
        Self::new(
            s.num_prbs,
            s.base_bits_per_prb(),
            s.num_ues,
            s.channel.clone(),
            seed,
        )
    }

    pub fn num_prbs(&self) -> u32 {
        self.num_prbs
    }

    pub fn base_bits_per_prb(&self) -> u32 {
        self.base_bits_per_prb
    }

    pub fn bits_per_prb(&self, ue: UeId, tti: u64) -> Result<u32, ChannelError> {
        if ue >= self.num_ues {
            return Err(ChannelError::UnknownUe(ue));
        }
        Ok(match self.variation {
            ChannelVariation::BlockFading { lo, hi, block_ttis } => {
                let block = tti / block_ttis.max(1);
                let m = if hi > lo {
                    rng::stream(self.seed, &[TAG_FADING, ue as u64, block]).random_range(lo..=hi)
                } else {
                    lo
                };
                scaled(self.base_bits_per_prb, m)
            }
            _ => self.static_bits[ue as usize],
        })
    }

    pub fn grid_for_tti(&self, tti: u64) -> ResourceGrid {
        let bits = (0..self.num_ues)
            .map(|ue| self.bits_per_prb(ue, tti).expect("ue in range"))
            .collect();
        ResourceGrid::new(self.num_prbs, bits)
    }

    /// Writes `tti,ue_id,bits_per_prb` for every UE over `ttis`.
    pub fn write_csv<W: Write>(&self, out: W, ttis: Range<u64>) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tti", "ue_id", "bits_per_prb"])?;
        for tti in ttis {
            for ue in 0..self.num_ues {
                let b = self.bits_per_prb(ue, tti).expect("ue in range");
                w.write_record([tti.to_string(), ue.to_string(), b.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// PRB budget of one TTI. Each PRB is owned by at most one flow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceGrid {
    bits_per_prb: Vec<u32>,
    owners: Vec<Option<FlowId>>,
    next_free: u32,
}

impl ResourceGrid {
    pub fn new(num_prbs: u32, bits_per_prb: Vec<u32>) -> Self {
        Self {
            bits_per_prb,
            owners: vec![None; num_prbs as usize],
            next_free: 0,
        }
    }

    pub fn num_prbs(&self) -> u32 {
        self.owners.len() as u32
    }

    pub fn unassigned(&self) -> u32 {
        self.num_prbs() - self.next_free
    }

    pub fn bits_per_prb(&self, ue: UeId) -> Result<u32, ChannelError> {
        self.bits_per_prb
            .get(ue as usize)
            .copied()
            .ok_or(ChannelError::UnknownUe(ue))
    }

    /// Bits the whole grid would carry if every PRB went to `ue`.
    pub fn capacity_bits(&self, ue: UeId) -> Result<u64, ChannelError> {
        Ok(self.bits_per_prb(ue)? as u64 * self.num_prbs() as u64)
    }

    pub fn owner(&self, prb: u32) -> Option<FlowId> {
        self.owners.get(prb as usize).copied().flatten()
    }

    /// Hands the next `count` free PRBs to `flow`.
    pub fn assign(&mut self, flow: FlowId, count: u32) -> Result<Range<u32>, ChannelError> {
        if count > self.unassigned() {
            return Err(ChannelError::Exhausted {
                requested: count,
                available: self.unassigned(),
            });
        }
        let range = self.next_free..self.next_free + count;
        for prb in range.clone() {
            self.owners[prb as usize] = Some(flow);
        }
        self.next_free += count;
        Ok(range)
    }
}
