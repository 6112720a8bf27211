//! Segments built from tiles, the optical switch tree, qubit accounting and
//! Data/Ancilla tile reallocation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::DeviceParams;
use crate::tiles::{build_tile, switch_height_for, TilePerfDatabase, TileType, L1_BLOCK_QUBITS, MAX_SWITCH_HEIGHT};

/// Segments reachable through one leaf switch.
pub const SWITCH_FANOUT: usize = 20;
pub const SMALL_SEGMENT_CAP: u64 = 5_000;
pub const LARGE_SEGMENT_CAP: u64 = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum ArchError {
    #[error("configuration needs {total} physical qubits, budget is {budget} (over by {})", total - budget)]
    BudgetExceeded { total: u64, budget: u64 },
    #[error("segment {segment} needs {qubits} physical qubits, cap is {cap}")]
    SegmentCapExceeded { segment: usize, qubits: u64, cap: u64 },
    #[error("{n_seg} segments need a switch tree taller than {MAX_SWITCH_HEIGHT}")]
    TooManySegments { n_seg: usize },
    #[error("only one error-correction tile per segment is supported, got {0}")]
    UnsupportedEcCount(u32),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("segment {0} does not exist")]
    NoSuchSegment(usize),
    #[error("segment {segment}: {tile:?} tile is busy")]
    TileBusy { segment: usize, tile: TileType },
    #[error("segment {segment}: not enough {tile:?} tiles to convert")]
    InsufficientTiles { segment: usize, tile: TileType },
    #[error("segment {segment}: no spare L1 block to complete an ancilla tile")]
    NoSpareBlock { segment: usize },
}

/// Tile counts of a computational segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CsConfig {
    pub n_data: u32,
    pub n_anc: u32,
    pub n_comm: u32,
}

/// Tile counts of a storage segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SsConfig {
    pub n_data: u32,
    pub n_comm: u32,
}

impl CsConfig {
    pub fn new(n_data: u32, n_anc: u32, n_comm: u32) -> Self {
        Self { n_data, n_anc, n_comm }
    }

    /// Storage counterpart: every ancilla tile is replaced by two data tiles.
    pub fn storage(&self) -> SsConfig {
        SsConfig { n_data: self.n_data + 2 * self.n_anc, n_comm: self.n_comm }
    }
}

fn default_n_ec() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchConfig {
    pub n_seg: usize,
    pub n_cs: usize,
    pub cs_config: CsConfig,
    pub ss_config: SsConfig,
    #[serde(default = "default_n_ec")]
    pub n_ec: u32,
    pub seg_qubit_cap: u64,
    pub budget_ntq: u64,
}

impl ArchConfig {
    /// Storage segments derived from `cs` by the ancilla-to-data substitution.
    pub fn uniform(n_seg: usize, n_cs: usize, cs: CsConfig, seg_qubit_cap: u64, budget_ntq: u64) -> Self {
        Self { n_seg, n_cs, cs_config: cs, ss_config: cs.storage(), n_ec: 1, seg_qubit_cap, budget_ntq }
    }

    pub fn n_ss(&self) -> usize {
        self.n_seg.saturating_sub(self.n_cs)
    }

    pub fn cs_qubits(&self) -> u64 {
        let c = &self.cs_config;
        tile_qubits(TileType::Data) * u64::from(c.n_data)
            + tile_qubits(TileType::Ancilla) * u64::from(c.n_anc)
            + tile_qubits(TileType::Communication) * u64::from(c.n_comm)
            + tile_qubits(TileType::ErrorCorrection) * u64::from(self.n_ec)
    }

    pub fn ss_qubits(&self) -> u64 {
        let s = &self.ss_config;
        tile_qubits(TileType::Data) * u64::from(s.n_data)
            + tile_qubits(TileType::Communication) * u64::from(s.n_comm)
            + tile_qubits(TileType::ErrorCorrection) * u64::from(self.n_ec)
    }

    /// Logical data slots across all segments.
    pub fn data_capacity(&self) -> usize {
        self.n_cs.min(self.n_seg) * self.cs_config.n_data as usize + self.n_ss() * self.ss_config.n_data as usize
    }

    pub fn validate(&self) -> Result<(), ArchError> {
        if self.n_seg == 0 {
            return Err(ArchError::Invalid("at least one segment is required".into()));
        }
        if self.n_cs == 0 || self.n_cs > self.n_seg {
            return Err(ArchError::Invalid(format!("need 1 <= n_cs <= n_seg, got n_cs={} n_seg={}", self.n_cs, self.n_seg)));
        }
        if self.n_ec != 1 {
            return Err(ArchError::UnsupportedEcCount(self.n_ec));
        }
        if self.cs_config.n_data == 0 || self.cs_config.n_comm == 0 {
            return Err(ArchError::Invalid("computational segments need a data and a communication tile".into()));
        }
        if self.n_ss() > 0 && (self.ss_config.n_data == 0 || self.ss_config.n_comm == 0) {
            return Err(ArchError::Invalid("storage segments need a data and a communication tile".into()));
        }
        if self.n_seg > SWITCH_FANOUT.pow(MAX_SWITCH_HEIGHT) {
            return Err(ArchError::TooManySegments { n_seg: self.n_seg });
        }
        let cs = self.cs_qubits();
        if cs > self.seg_qubit_cap {
            return Err(ArchError::SegmentCapExceeded { segment: 0, qubits: cs, cap: self.seg_qubit_cap });
        }
        let ss = self.ss_qubits();
        if self.n_ss() > 0 && ss > self.seg_qubit_cap {
            return Err(ArchError::SegmentCapExceeded { segment: self.n_cs, qubits: ss, cap: self.seg_qubit_cap });
        }
        let total = qubit_count(self);
        if total > self.budget_ntq {
            return Err(ArchError::BudgetExceeded { total, budget: self.budget_ntq });
        }
        Ok(())
    }
}

fn tile_qubits(t: TileType) -> u64 {
    u64::from(build_tile(t).physical_qubits)
}

/// Physical qubits of every tile of every segment.
pub fn qubit_count(cfg: &ArchConfig) -> u64 {
    let n_cs = cfg.n_cs.min(cfg.n_seg) as u64;
    n_cs * cfg.cs_qubits() + cfg.n_ss() as u64 * cfg.ss_qubits()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    Computational,
    Storage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: usize,
    pub kind: SegmentKind,
    pub n_data: u32,
    pub n_anc: u32,
    pub n_comm: u32,
    pub n_ec: u32,
    /// L1 blocks left over from ancilla-to-data conversions.
    pub spare_l1: u32,
    /// Data tiles currently holding live logical qubits.
    pub live_data: u32,
    /// Ancilla tiles currently holding or preparing a magic state.
    pub busy_anc: u32,
}

impl Segment {
    pub fn qubits(&self) -> u64 {
        tile_qubits(TileType::Data) * u64::from(self.n_data)
            + tile_qubits(TileType::Ancilla) * u64::from(self.n_anc)
            + tile_qubits(TileType::Communication) * u64::from(self.n_comm)
            + tile_qubits(TileType::ErrorCorrection) * u64::from(self.n_ec)
            + u64::from(L1_BLOCK_QUBITS) * u64::from(self.spare_l1)
    }

    pub fn is_computational(&self) -> bool {
        self.kind == SegmentKind::Computational
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reallocation {
    AncToData,
    DataToAnc,
}

#[derive(Debug, Clone)]
pub struct Machine {
    pub config: ArchConfig,
    pub segments: Vec<Segment>,
    pub switch_height: u32,
    pub db: Arc<TilePerfDatabase>,
    /// Parameters the logical latencies and failures are evaluated at.
    pub params: DeviceParams,
}

impl PartialEq for Machine {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.segments == other.segments
            && self.switch_height == other.switch_height
            && self.params == other.params
            && (Arc::ptr_eq(&self.db, &other.db) || *self.db == *other.db)
    }
}

/// Computational segments come first, storage segments after.
pub fn build_machine(cfg: &ArchConfig, db: Arc<TilePerfDatabase>) -> Result<Machine, ArchError> {
    cfg.validate()?;
    let segments = (0..cfg.n_seg)
        .map(|id| {
            let cs = id < cfg.n_cs;
            Segment {
                id,
                kind: if cs { SegmentKind::Computational } else { SegmentKind::Storage },
                n_data: if cs { cfg.cs_config.n_data } else { cfg.ss_config.n_data },
                n_anc: if cs { cfg.cs_config.n_anc } else { 0 },
                n_comm: if cs { cfg.cs_config.n_comm } else { cfg.ss_config.n_comm },
                n_ec: cfg.n_ec,
                spare_l1: 0,
                live_data: 0,
                busy_anc: 0,
            }
        })
        .collect();
    let params = db.calibration_params;
    Ok(Machine { config: cfg.clone(), segments, switch_height: switch_height_for(cfg.n_seg), db, params })
}

impl Machine {
    pub fn with_params(mut self, params: DeviceParams) -> Self {
        self.params = params;
        self
    }

    pub fn qubit_count(&self) -> u64 {
        self.segments.iter().map(Segment::qubits).sum()
    }

    pub fn data_capacity(&self) -> usize {
        self.segments.iter().map(|s| s.n_data as usize).sum()
    }

    /// Switch levels an EPR pair between two segments has to climb.
    pub fn switch_levels_between(&self, a: usize, b: usize) -> u32 {
        let mut h = 1;
        let mut span = SWITCH_FANOUT;
        while a / span != b / span && h < self.switch_height {
            h += 1;
            span *= SWITCH_FANOUT;
        }
        h
    }

    /// One ancilla tile becomes two data tiles plus a spare L1 block, or two
    /// data tiles and a spare block become one ancilla tile.
    pub fn reallocate_tile(&mut self, segment_id: usize, direction: Reallocation) -> Result<(), ArchError> {
        let seg = self.segments.get_mut(segment_id).ok_or(ArchError::NoSuchSegment(segment_id))?;
        match direction {
            Reallocation::AncToData => {
                if seg.n_anc == 0 {
                    return Err(ArchError::InsufficientTiles { segment: segment_id, tile: TileType::Ancilla });
                }
                if seg.busy_anc >= seg.n_anc {
                    return Err(ArchError::TileBusy { segment: segment_id, tile: TileType::Ancilla });
                }
                seg.n_anc -= 1;
                seg.n_data += 2;
                seg.spare_l1 += 1;
            }
            Reallocation::DataToAnc => {
                if seg.kind != SegmentKind::Computational {
                    return Err(ArchError::Invalid(format!("segment {segment_id} is a storage segment")));
                }
                // keep at least one data tile in the segment
                if seg.n_data < 3 {
                    return Err(ArchError::InsufficientTiles { segment: segment_id, tile: TileType::Data });
                }
                if seg.n_data - seg.live_data < 2 {
                    return Err(ArchError::TileBusy { segment: segment_id, tile: TileType::Data });
                }
                if seg.spare_l1 == 0 {
                    return Err(ArchError::NoSpareBlock { segment: segment_id });
                }
                seg.n_data -= 2;
                seg.n_anc += 1;
                seg.spare_l1 -= 1;
            }
        }
        Ok(())
    }

    pub fn set_live_data(&mut self, segment_id: usize, live: u32) -> Result<(), ArchError> {
        let seg = self.segments.get_mut(segment_id).ok_or(ArchError::NoSuchSegment(segment_id))?;
        if live > seg.n_data {
            return Err(ArchError::InsufficientTiles { segment: segment_id, tile: TileType::Data });
        }
        seg.live_data = live;
        Ok(())
    }
}
