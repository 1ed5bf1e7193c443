use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use super::board::{Board, Coord, Player};

/// Largest board the exact solver accepts.
pub const SOLVER_MAX_SIZE: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolverError {
    #[error("board size {size} exceeds solver limit {SOLVER_MAX_SIZE}")]
    BoardTooLarge { size: u8 },
}

/// Proven value of a position, from the mover's perspective.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solved {
    /// True when the player to move wins with optimal play.
    pub mover_wins: bool,
    /// Value-preserving moves in row-major order. In a lost position
    /// every legal move preserves the (lost) value, so all appear.
    pub optimal_moves: Vec<Coord>,
}

impl Solved {
    pub fn winner(&self, to_move: Player) -> Player {
        if self.mover_wins {
            to_move
        } else {
            to_move.other()
        }
    }
}

/// Position key: 2 bits per cell plus size and mover. Keys are taken as
/// the minimum over the identity and the 180-degree rotation, which is a
/// value-preserving symmetry of the rhombus (it maps each edge to the
/// same-colored opposite edge).
#[derive(Debug, PartialEq, Eq, Hash, Clone, Copy, PartialOrd, Ord)]
struct Key {
    cells: [u64; 3],
    meta: u8,
}

/// Multiply-xor hasher; the default SipHash costs measurably on the
/// solver's hot path and keys are already well-mixed.
#[derive(Default)]
struct FxLikeHasher(u64);

impl Hasher for FxLikeHasher {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0 ^ b as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        }
    }
    fn write_u64(&mut self, w: u64) {
        self.0 = (self.0 ^ w).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        self.0 ^= self.0 >> 29;
    }
    fn write_u8(&mut self, b: u8) {
        self.write_u64(b as u64);
    }
}

/// Exact minimax solver for boards up to `SOLVER_MAX_SIZE`.
///
/// The memo table persists across calls, so solving many positions of
/// the same size amortizes quickly.
pub struct Solver {
    memo: HashMap<Key, bool, BuildHasherDefault<FxLikeHasher>>,
    orders: Vec<Vec<Coord>>,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new()
    }
}

impl Solver {
    pub fn new() -> Solver {
        let orders = (0..=SOLVER_MAX_SIZE).map(center_out_order).collect();
        Solver { memo: HashMap::default(), orders }
    }

    /// Number of memoized interior positions.
    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    /// Proves the game value for the player to move and collects all
    /// value-preserving moves. Terminal positions are losses for the
    /// mover (the opponent has already connected) with no moves.
    pub fn solve(&mut self, board: &Board) -> Result<Solved, SolverError> {
        if board.size() > SOLVER_MAX_SIZE {
            return Err(SolverError::BoardTooLarge { size: board.size() });
        }
        if board.is_terminal() {
            return Ok(Solved { mover_wins: false, optimal_moves: Vec::new() });
        }
        let value = self.mover_wins(board);
        let mut optimal_moves = Vec::new();
        for mv in board.legal_moves() {
            let mut child = board.clone();
            let won = child.apply_move(mv).expect("legal move").is_some();
            let value_after = won || !self.mover_wins(&child);
            if value_after == value {
                optimal_moves.push(mv);
            }
        }
        debug_assert!(!optimal_moves.is_empty());
        Ok(Solved { mover_wins: value, optimal_moves })
    }

    fn mover_wins(&mut self, board: &Board) -> bool {
        let key = canonical_key(board);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let mut children = Vec::with_capacity(board.num_cells() - board.move_count() as usize);
        let mut result = false;
        for &mv in &self.orders[board.size() as usize] {
            if board.cell(mv).is_some() {
                continue;
            }
            let mut child = board.clone();
            if child.apply_move(mv).expect("legal move").is_some() {
                result = true;
                break;
            }
            children.push(child);
        }
        if !result {
            result = children.iter().any(|child| !self.mover_wins(child));
        }
        self.memo.insert(key, result);
        result
    }
}

fn canonical_key(board: &Board) -> Key {
    let n = board.num_cells();
    let meta = (board.size() << 1) | (board.to_move() == Player::White) as u8;
    let mut fwd = [0u64; 3];
    let mut rev = [0u64; 3];
    for i in 0..n {
        let code = match board.cell(board.coord(i)) {
            None => 0u64,
            Some(Player::Black) => 1,
            Some(Player::White) => 2,
        };
        if code != 0 {
            fwd[i >> 5] |= code << ((i & 31) * 2);
            let j = n - 1 - i;
            rev[j >> 5] |= code << ((j & 31) * 2);
        }
    }
    Key { cells: fwd.min(rev), meta }
}

/// Static move ordering: cells closest to the board center first
/// (hex distance), row-major among ties. Center moves dominate on small
/// boards, so trying them first finds wins early and prunes hard.
fn center_out_order(size: u8) -> Vec<Coord> {
    let s = size as i32;
    let mut cells: Vec<Coord> = (0..s)
        .flat_map(|r| (0..s).map(move |c| Coord::new(r as u8, c as u8)))
        .collect();
    let hex_dist2 = |c: &Coord| {
        // Doubled offsets from the center avoid fractional centers.
        let dr = 2 * c.row as i32 - (s - 1);
        let dc = 2 * c.col as i32 - (s - 1);
        dr.abs() + dc.abs() + (dr + dc).abs()
    };
    cells.sort_by_key(|c| (hex_dist2(c), c.row, c.col));
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn rejects_large_boards() {
        let mut s = Solver::new();
        let b = Board::new(6).unwrap();
        assert_eq!(s.solve(&b), Err(SolverError::BoardTooLarge { size: 6 }));
    }

    #[test]
    fn terminal_position_is_a_loss_with_no_moves() {
        let mut b = Board::new(1).unwrap();
        b.apply_move(Coord::new(0, 0)).unwrap();
        let mut s = Solver::new();
        let solved = s.solve(&b).unwrap();
        assert!(!solved.mover_wins);
        assert!(solved.optimal_moves.is_empty());
        assert_eq!(solved.winner(b.to_move()), Player::Black);
    }

    #[test]
    fn first_player_wins_empty_boards_up_to_three() {
        let mut s = Solver::new();
        for size in 1..=3u8 {
            let solved = s.solve(&Board::new(size).unwrap()).unwrap();
            assert!(solved.mover_wins, "size {size} should be a first-player win");
            assert!(!solved.optimal_moves.is_empty());
        }
    }

    #[test]
    fn immediate_win_is_found_and_optimal() {
        // Black has (0,0) and (2,0); (1,0) closes the chain.
        let b = Board::from_text("b..\n.ww\nb..\nb").unwrap();
        let mut s = Solver::new();
        let solved = s.solve(&b).unwrap();
        assert!(solved.mover_wins);
        assert!(solved.optimal_moves.contains(&Coord::new(1, 0)));
    }

    #[test]
    fn lost_positions_list_every_legal_move() {
        // White to move, Black one stone from connecting with two routes:
        // (1,0) and (1,1) both finish via the diagonal step, and any
        // White reply leaves the other. Verify via solver consistency.
        let b = Board::from_text("b..\n...\nb.w\nw").unwrap();
        let mut s = Solver::new();
        let solved = s.solve(&b).unwrap();
        if !solved.mover_wins {
            assert_eq!(solved.optimal_moves, b.legal_moves());
        }
    }

    #[test]
    fn value_negates_across_optimal_moves() {
        let mut s = Solver::new();
        let mut rng = crate::rng::stream(5, 0);
        for _ in 0..200 {
            // Random non-terminal 3x3 position from a random playout prefix.
            let mut b = Board::new(3).unwrap();
            let steps = rng.random_range(0..6);
            for _ in 0..steps {
                let moves = b.legal_moves();
                if b.apply_move(moves[rng.random_range(0..moves.len())]).unwrap().is_some() {
                    b = Board::new(3).unwrap();
                }
            }
            let solved = s.solve(&b).unwrap();
            for mv in &solved.optimal_moves {
                let mut child = b.clone();
                let won = child.apply_move(*mv).unwrap().is_some();
                let value_after = won || !s.solve(&child).unwrap().mover_wins;
                assert_eq!(value_after, solved.mover_wins);
            }
            // Non-optimal moves flip the value.
            for mv in b.legal_moves() {
                if solved.optimal_moves.contains(&mv) {
                    continue;
                }
                let mut child = b.clone();
                let won = child.apply_move(mv).unwrap().is_some();
                let value_after = won || !s.solve(&child).unwrap().mover_wins;
                assert_ne!(value_after, solved.mover_wins);
            }
        }
    }

    #[test]
    fn rotated_positions_share_value() {
        let mut s = Solver::new();
        let b = Board::from_text("b..\nw..\n...\nb").unwrap();
        let r = b.rotated180();
        assert_eq!(
            s.solve(&b).unwrap().mover_wins,
            s.solve(&r).unwrap().mover_wins
        );
        // And the memo actually unifies them.
        assert_eq!(canonical_key(&b), canonical_key(&r));
    }

    #[test]
    fn center_order_puts_center_first() {
        let order = center_out_order(5);
        assert_eq!(order[0], Coord::new(2, 2));
        assert_eq!(order.len(), 25);
    }
}
