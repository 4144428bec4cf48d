//! Per-stage seed offsets. Every random draw uses `master + offset + index`.

pub const POD: u64 = 1_000_000;
pub const TRAIN: u64 = 2_000_000;
pub const VAL: u64 = 3_000_000;
pub const TEST: u64 = 4_000_000;
pub const NET_INIT: u64 = 5_000_000;
pub const SHUFFLE: u64 = 6_000_000;

/// Seed of sample `index` in the stage starting at `offset`.
pub fn stage(master: u64, offset: u64, index: usize) -> u64 {
    master.wrapping_add(offset).wrapping_add(index as u64)
}
