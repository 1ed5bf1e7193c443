use rand_chacha::ChaCha8Rng;

use super::board::{Board, Coord, HexError, Outcome};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("expected {expected} moves, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("slot {slot}: {source}")]
    Slot { slot: usize, source: HexError },
}

/// A fixed-width batch of independent games stepped in lockstep.
///
/// Slots that finish report their outcome for exactly one step and are
/// reset to the empty board before the next step, so every slot always
/// holds a live position. Each slot owns a private RNG stream; results
/// are identical no matter how callers distribute slots over threads.
pub struct BatchEnv {
    size: u8,
    boards: Vec<Board>,
    rngs: Vec<ChaCha8Rng>,
    finished: Vec<Option<Outcome>>,
}

impl BatchEnv {
    pub fn new(size: u8, n_envs: usize, seed: u64) -> Result<BatchEnv, HexError> {
        if n_envs == 0 {
            return Err(HexError::BadPosition("batch needs at least one slot".into()));
        }
        let board = Board::new(size)?;
        Ok(BatchEnv {
            size,
            boards: vec![board; n_envs],
            rngs: (0..n_envs).map(|i| rng::stream(seed, i as u64)).collect(),
            finished: vec![None; n_envs],
        })
    }

    pub fn len(&self) -> usize {
        self.boards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boards.is_empty()
    }

    pub fn size(&self) -> u8 {
        self.size
    }

    pub fn boards(&self) -> &[Board] {
        &self.boards
    }

    /// Outcomes reported by the previous `batch_step`, one entry per slot.
    pub fn last_outcomes(&self) -> &[Option<Outcome>] {
        &self.finished
    }

    /// Disjoint views for per-slot parallel work: read access to the
    /// boards and mutable access to the matching RNG streams.
    pub fn slots(&mut self) -> (&[Board], &mut [ChaCha8Rng]) {
        (&self.boards, &mut self.rngs)
    }

    /// Applies one move per slot.
    ///
    /// Validation is atomic: if any slot's move is illegal the whole
    /// batch is rejected (reporting the first offending slot) and no
    /// board changes. Slots whose game ends report `Some(outcome)` and
    /// restart from the empty board.
    pub fn batch_step(&mut self, moves: &[Coord]) -> Result<&[Option<Outcome>], EnvError> {
        if moves.len() != self.boards.len() {
            return Err(EnvError::WrongLength { expected: self.boards.len(), got: moves.len() });
        }
        for (slot, (board, &mv)) in self.boards.iter().zip(moves).enumerate() {
            if mv.row >= self.size || mv.col >= self.size {
                return Err(EnvError::Slot {
                    slot,
                    source: HexError::OutOfBounds { mv, size: self.size },
                });
            }
            if board.cell(mv).is_some() {
                return Err(EnvError::Slot { slot, source: HexError::Occupied(mv) });
            }
        }
        for (slot, (board, &mv)) in self.boards.iter_mut().zip(moves).enumerate() {
            let out = board
                .apply_move(mv)
                .expect("validated above; live slots are never terminal");
            self.finished[slot] = out;
            if out.is_some() {
                *board = Board::new(self.size).expect("size validated at construction");
            }
        }
        Ok(&self.finished)
    }
}
