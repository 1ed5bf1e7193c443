/// Snapshot thresholds: a geometric halving ladder ending at the flop
/// limit. With `count` snapshots the thresholds are
/// `limit >> (count-1), ..., limit >> 1, limit`, each clamped below by 1,
/// so consecutive snapshots roughly double in compute and the final one
/// lands on the budget itself.
pub fn snapshot_schedule(flop_limit: u64, count: u32) -> Vec<u64> {
    assert!(flop_limit > 0 && count >= 2);
    (0..count)
        .map(|i| {
            let shift = count - 1 - i;
            if shift >= 64 {
                1
            } else {
                (flop_limit >> shift).max(1)
            }
        })
        .collect()
}
