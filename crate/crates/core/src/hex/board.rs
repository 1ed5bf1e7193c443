use std::fmt;

use serde::{Deserialize, Serialize};

/// Largest supported board edge length.
pub const MAX_SIZE: u8 = 9;

const MAX_CELLS: usize = (MAX_SIZE as usize) * (MAX_SIZE as usize);

// Virtual connectivity nodes appended after the cell indices.
const BLACK_TOP: usize = MAX_CELLS;
const BLACK_BOTTOM: usize = MAX_CELLS + 1;
const WHITE_LEFT: usize = MAX_CELLS + 2;
const WHITE_RIGHT: usize = MAX_CELLS + 3;
const UF_NODES: usize = MAX_CELLS + 4;

const NEIGHBOR_OFFSETS: [(i8, i8); 6] = [(-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0)];

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Player {
    Black,
    White,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::Black => Player::White,
            Player::White => Player::Black,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Player::Black => 'b',
            Player::White => 'w',
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::Black => write!(f, "black"),
            Player::White => write!(f, "white"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Coord {
    pub row: u8,
    pub col: u8,
}

impl Coord {
    pub fn new(row: u8, col: u8) -> Coord {
        Coord { row, col }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// Result of a finished game.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Outcome {
    pub winner: Player,
    /// Total stones on the board when the winning connection closed.
    pub plies: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HexError {
    #[error("board size {0} outside supported range 1..={MAX_SIZE}")]
    BadSize(u8),
    #[error("move {mv} out of bounds for board size {size}")]
    OutOfBounds { mv: Coord, size: u8 },
    #[error("cell {0} is already occupied")]
    Occupied(Coord),
    #[error("game is already decided")]
    GameOver,
    #[error("malformed board text: {0}")]
    BadText(String),
    #[error("inconsistent position: {0}")]
    BadPosition(String),
}

/// Union-find over cells plus the four virtual edge nodes.
///
/// Indices are laid out for the maximum board size so the struct is
/// `Copy`-cheap and never allocates; boards smaller than `MAX_SIZE`
/// simply leave high indices untouched.
#[derive(Clone)]
struct UnionFind {
    parent: [u8; UF_NODES],
    rank: [u8; UF_NODES],
}

impl UnionFind {
    fn new() -> UnionFind {
        let mut parent = [0u8; UF_NODES];
        for (i, p) in parent.iter_mut().enumerate() {
            *p = i as u8;
        }
        UnionFind { parent, rank: [0; UF_NODES] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let grand = self.parent[self.parent[x] as usize];
            self.parent[x] = grand;
            x = grand as usize;
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb as u8,
            std::cmp::Ordering::Greater => self.parent[rb] = ra as u8,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra as u8;
                self.rank[ra] += 1;
            }
        }
    }

    fn connected(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }
}

/// A Hex position with incremental connectivity tracking.
///
/// `apply_move` is O(alpha) amortized; win detection is exact and
/// immediate. Equality compares the logical position (cells, mover,
/// winner), not internal union-find state.
#[derive(Clone)]
pub struct Board {
    size: u8,
    to_move: Player,
    move_count: u16,
    winner: Option<Player>,
    cells: [Option<Player>; MAX_CELLS],
    uf: UnionFind,
}

impl Board {
    pub fn new(size: u8) -> Result<Board, HexError> {
        if size == 0 || size > MAX_SIZE {
            return Err(HexError::BadSize(size));
        }
        Ok(Board {
            size,
            to_move: Player::Black,
            move_count: 0,
            winner: None,
            cells: [None; MAX_CELLS],
            uf: UnionFind::new(),
        })
    }

    pub fn size(&self) -> u8 {
        self.size
    }

    pub fn num_cells(&self) -> usize {
        self.size as usize * self.size as usize
    }

    pub fn to_move(&self) -> Player {
        self.to_move
    }

    pub fn move_count(&self) -> u16 {
        self.move_count
    }

    pub fn winner(&self) -> Option<Player> {
        self.winner
    }

    pub fn is_terminal(&self) -> bool {
        self.winner.is_some()
    }

    pub fn index(&self, c: Coord) -> usize {
        c.row as usize * self.size as usize + c.col as usize
    }

    pub fn coord(&self, index: usize) -> Coord {
        Coord::new((index / self.size as usize) as u8, (index % self.size as usize) as u8)
    }

    pub fn cell(&self, c: Coord) -> Option<Player> {
        self.cells[self.index(c)]
    }

    fn in_bounds(&self, c: Coord) -> bool {
        c.row < self.size && c.col < self.size
    }

    pub fn is_legal(&self, c: Coord) -> bool {
        !self.is_terminal() && self.in_bounds(c) && self.cell(c).is_none()
    }

    pub fn legal_moves(&self) -> Vec<Coord> {
        if self.is_terminal() {
            return Vec::new();
        }
        (0..self.num_cells())
            .filter(|&i| self.cells[i].is_none())
            .map(|i| self.coord(i))
            .collect()
    }

    /// Writes the legal-move mask over cell indices into `mask`.
    /// `mask.len()` must equal `num_cells()`.
    pub fn fill_legal_mask(&self, mask: &mut [bool]) {
        assert_eq!(mask.len(), self.num_cells());
        let terminal = self.is_terminal();
        for (i, m) in mask.iter_mut().enumerate() {
            *m = !terminal && self.cells[i].is_none();
        }
    }

    /// Plays a stone for the player to move.
    ///
    /// Returns `Some(outcome)` exactly when this move closes a winning
    /// connection. Errors leave the board untouched.
    pub fn apply_move(&mut self, mv: Coord) -> Result<Option<Outcome>, HexError> {
        if self.is_terminal() {
            return Err(HexError::GameOver);
        }
        if !self.in_bounds(mv) {
            return Err(HexError::OutOfBounds { mv, size: self.size });
        }
        let idx = self.index(mv);
        if self.cells[idx].is_some() {
            return Err(HexError::Occupied(mv));
        }
        let mover = self.to_move;
        self.cells[idx] = Some(mover);
        self.connect(mv, mover);
        self.move_count += 1;
        self.to_move = mover.other();
        let (e0, e1) = Board::edge_nodes(mover);
        if self.uf.connected(e0, e1) {
            self.winner = Some(mover);
            return Ok(Some(Outcome { winner: mover, plies: self.move_count }));
        }
        Ok(None)
    }

    fn edge_nodes(p: Player) -> (usize, usize) {
        match p {
            Player::Black => (BLACK_TOP, BLACK_BOTTOM),
            Player::White => (WHITE_LEFT, WHITE_RIGHT),
        }
    }

    fn connect(&mut self, mv: Coord, mover: Player) {
        let idx = self.index(mv);
        match mover {
            Player::Black => {
                if mv.row == 0 {
                    self.uf.union(idx, BLACK_TOP);
                }
                if mv.row == self.size - 1 {
                    self.uf.union(idx, BLACK_BOTTOM);
                }
            }
            Player::White => {
                if mv.col == 0 {
                    self.uf.union(idx, WHITE_LEFT);
                }
                if mv.col == self.size - 1 {
                    self.uf.union(idx, WHITE_RIGHT);
                }
            }
        }
        for (dr, dc) in NEIGHBOR_OFFSETS {
            let nr = mv.row as i16 + dr as i16;
            let nc = mv.col as i16 + dc as i16;
            if nr < 0 || nc < 0 || nr >= self.size as i16 || nc >= self.size as i16 {
                continue;
            }
            let n = Coord::new(nr as u8, nc as u8);
            let nidx = self.index(n);
            if self.cells[nidx] == Some(mover) {
                self.uf.union(idx, nidx);
            }
        }
    }

    /// Two stacked planes from the mover's perspective: first the mover's
    /// stones, then the opponent's. `out.len()` must be `2 * num_cells()`.
    pub fn encode_observation(&self, out: &mut [f32]) {
        let n = self.num_cells();
        assert_eq!(out.len(), 2 * n);
        let mover = self.to_move;
        for i in 0..n {
            let (a, b) = match self.cells[i] {
                Some(p) if p == mover => (1.0, 0.0),
                Some(_) => (0.0, 1.0),
                None => (0.0, 0.0),
            };
            out[i] = a;
            out[n + i] = b;
        }
    }

    pub fn observation(&self) -> Vec<f32> {
        let mut out = vec![0.0; 2 * self.num_cells()];
        self.encode_observation(&mut out);
        out
    }

    /// The same position rotated 180 degrees. Rotation by a half turn
    /// maps each edge to its same-colored opposite, so it preserves
    /// values and win/loss status.
    pub fn rotated180(&self) -> Board {
        let n = self.num_cells();
        let mut cells = vec![None; n];
        for i in 0..n {
            cells[n - 1 - i] = self.cells[i];
        }
        Board::from_parts(self.size, &cells, self.to_move)
            .expect("rotation preserves position validity")
    }

    /// Reconstructs a board from raw cells.
    ///
    /// Validates structure only: the stone counts may differ by at most
    /// one and the player to move may not have more stones than the
    /// opponent. This admits color-mirrored positions that cannot arise
    /// from an actual game where Black starts; `from_text` adds the
    /// stricter reachability check.
    pub fn from_parts(size: u8, cells: &[Option<Player>], to_move: Player) -> Result<Board, HexError> {
        if size == 0 || size > MAX_SIZE {
            return Err(HexError::BadSize(size));
        }
        let n = size as usize * size as usize;
        if cells.len() != n {
            return Err(HexError::BadPosition(format!(
                "expected {} cells for size {}, got {}",
                n,
                size,
                cells.len()
            )));
        }
        let blacks = cells.iter().filter(|c| **c == Some(Player::Black)).count();
        let whites = cells.iter().filter(|c| **c == Some(Player::White)).count();
        if blacks.abs_diff(whites) > 1 {
            return Err(HexError::BadPosition(format!(
                "stone counts differ by more than one ({blacks} black, {whites} white)"
            )));
        }
        let (mover_stones, other_stones) = match to_move {
            Player::Black => (blacks, whites),
            Player::White => (whites, blacks),
        };
        if mover_stones > other_stones {
            return Err(HexError::BadPosition(format!(
                "{to_move} to move but already has more stones ({mover_stones} vs {other_stones})"
            )));
        }
        let mut board = Board::new(size)?;
        board.to_move = to_move;
        board.move_count = (blacks + whites) as u16;
        for (i, &c) in cells.iter().enumerate() {
            if let Some(p) = c {
                board.cells[i] = Some(p);
                board.connect(board.coord(i), p);
            }
        }
        let (bt, bb) = Board::edge_nodes(Player::Black);
        let (wl, wr) = Board::edge_nodes(Player::White);
        let black_wins = board.uf.connected(bt, bb);
        let white_wins = board.uf.connected(wl, wr);
        debug_assert!(!(black_wins && white_wins), "two crossing connections cannot coexist");
        board.winner = if black_wins {
            Some(Player::Black)
        } else if white_wins {
            Some(Player::White)
        } else {
            None
        };
        Ok(board)
    }

    /// Parses the plain text format: `size` rows of `size` characters
    /// from `. b w`, then one line naming the player to move.
    /// Rejects positions unreachable in a game where Black starts.
    pub fn from_text(text: &str) -> Result<Board, HexError> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.len() < 2 {
            return Err(HexError::BadText("expected board rows plus a mover line".into()));
        }
        let size = lines.len() - 1;
        if size > MAX_SIZE as usize {
            return Err(HexError::BadText(format!("{size} rows exceeds max size {MAX_SIZE}")));
        }
        let size = size as u8;
        let n = size as usize * size as usize;
        let mut cells = vec![None; n];
        for (r, line) in lines[..size as usize].iter().enumerate() {
            let row: Vec<char> = line.trim().chars().collect();
            if row.len() != size as usize {
                return Err(HexError::BadText(format!(
                    "row {r} has {} cells, expected {size}",
                    row.len()
                )));
            }
            for (c, ch) in row.iter().enumerate() {
                cells[r * size as usize + c] = match ch {
                    '.' => None,
                    'b' => Some(Player::Black),
                    'w' => Some(Player::White),
                    other => {
                        return Err(HexError::BadText(format!("unknown cell character {other:?}")))
                    }
                };
            }
        }
        let to_move = match lines[size as usize].trim() {
            "b" => Player::Black,
            "w" => Player::White,
            other => return Err(HexError::BadText(format!("unknown mover line {other:?}"))),
        };
        let blacks = cells.iter().filter(|c| **c == Some(Player::Black)).count();
        let whites = cells.iter().filter(|c| **c == Some(Player::White)).count();
        let reachable = match to_move {
            Player::Black => blacks == whites,
            Player::White => blacks == whites + 1,
        };
        if !reachable {
            return Err(HexError::BadPosition(format!(
                "unreachable position: {blacks} black / {whites} white stones with {to_move} to move (Black starts)"
            )));
        }
        Board::from_parts(size, &cells, to_move)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in 0..self.size {
            for c in 0..self.size {
                out.push(match self.cell(Coord::new(r, c)) {
                    None => '.',
                    Some(p) => p.letter(),
                });
            }
            out.push('\n');
        }
        out.push(self.to_move.letter());
        out.push('\n');
        out
    }
}

impl PartialEq for Board {
    fn eq(&self, other: &Board) -> bool {
        self.size == other.size
            && self.to_move == other.to_move
            && self.move_count == other.move_count
            && self.winner == other.winner
            && self.cells[..self.num_cells()] == other.cells[..other.num_cells()]
    }
}

impl Eq for Board {}

impl fmt::Debug for Board {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Board(size={}, winner={:?})\n{}", self.size, self.winner, self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert_eq!(Board::new(0), Err(HexError::BadSize(0)));
        assert_eq!(Board::new(10), Err(HexError::BadSize(10)));
        assert!(Board::new(1).is_ok());
        assert!(Board::new(9).is_ok());
    }

    #[test]
    fn black_moves_first_and_turns_alternate() {
        let mut b = Board::new(3).unwrap();
        assert_eq!(b.to_move(), Player::Black);
        b.apply_move(Coord::new(0, 0)).unwrap();
        assert_eq!(b.to_move(), Player::White);
        b.apply_move(Coord::new(1, 1)).unwrap();
        assert_eq!(b.to_move(), Player::Black);
        assert_eq!(b.move_count(), 2);
    }

    #[test]
    fn rejects_illegal_moves() {
        let mut b = Board::new(3).unwrap();
        b.apply_move(Coord::new(1, 1)).unwrap();
        assert_eq!(b.apply_move(Coord::new(1, 1)), Err(HexError::Occupied(Coord::new(1, 1))));
        assert_eq!(
            b.apply_move(Coord::new(3, 0)),
            Err(HexError::OutOfBounds { mv: Coord::new(3, 0), size: 3 })
        );
        // A failed move leaves the board untouched.
        assert_eq!(b.to_move(), Player::White);
        assert_eq!(b.move_count(), 1);
    }

    #[test]
    fn vertical_chain_wins_for_black() {
        let mut b = Board::new(3).unwrap();
        // Black builds column 0 top to bottom; White plays elsewhere.
        b.apply_move(Coord::new(0, 0)).unwrap();
        b.apply_move(Coord::new(0, 1)).unwrap();
        b.apply_move(Coord::new(1, 0)).unwrap();
        b.apply_move(Coord::new(1, 1)).unwrap();
        let out = b.apply_move(Coord::new(2, 0)).unwrap();
        assert_eq!(out, Some(Outcome { winner: Player::Black, plies: 5 }));
        assert!(b.is_terminal());
        assert_eq!(b.apply_move(Coord::new(2, 2)), Err(HexError::GameOver));
    }

    #[test]
    fn horizontal_chain_wins_for_white() {
        let mut b = Board::new(3).unwrap();
        b.apply_move(Coord::new(0, 0)).unwrap();
        b.apply_move(Coord::new(1, 0)).unwrap();
        b.apply_move(Coord::new(0, 1)).unwrap();
        b.apply_move(Coord::new(1, 1)).unwrap();
        b.apply_move(Coord::new(2, 2)).unwrap();
        let out = b.apply_move(Coord::new(1, 2)).unwrap();
        assert_eq!(out.map(|o| o.winner), Some(Player::White));
    }

    #[test]
    fn diagonal_adjacency_connects() {
        // (r, c) and (r+1, c-1) are neighbors: a staircase is connected.
        let mut b = Board::new(3).unwrap();
        b.apply_move(Coord::new(0, 2)).unwrap();
        b.apply_move(Coord::new(0, 0)).unwrap();
        b.apply_move(Coord::new(1, 1)).unwrap();
        b.apply_move(Coord::new(1, 0)).unwrap();
        let out = b.apply_move(Coord::new(2, 0)).unwrap();
        assert_eq!(out.map(|o| o.winner), Some(Player::Black));
    }

    #[test]
    fn anti_diagonal_is_not_adjacent() {
        // (r, c) and (r+1, c+1) are NOT neighbors.
        let mut b = Board::new(2).unwrap();
        b.apply_move(Coord::new(0, 0)).unwrap();
        b.apply_move(Coord::new(0, 1)).unwrap();
        let out = b.apply_move(Coord::new(1, 1)).unwrap();
        assert_eq!(out, None);
    }

    #[test]
    fn size_one_board_first_move_wins() {
        let mut b = Board::new(1).unwrap();
        let out = b.apply_move(Coord::new(0, 0)).unwrap();
        assert_eq!(out.map(|o| o.winner), Some(Player::Black));
    }

    #[test]
    fn observation_is_mover_relative() {
        let mut b = Board::new(2).unwrap();
        b.apply_move(Coord::new(0, 0)).unwrap();
        // White to move: plane 0 holds White stones, plane 1 Black's.
        let obs = b.observation();
        assert_eq!(obs.len(), 8);
        assert_eq!(&obs[..4], &[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(&obs[4..], &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn text_round_trip() {
        let mut b = Board::new(3).unwrap();
        b.apply_move(Coord::new(1, 1)).unwrap();
        b.apply_move(Coord::new(0, 2)).unwrap();
        let text = b.to_text();
        let parsed = Board::from_text(&text).unwrap();
        assert_eq!(parsed, b);
        assert_eq!(parsed.to_text(), text);
    }

    #[test]
    fn from_text_rejects_garbage() {
        assert!(Board::from_text("").is_err());
        assert!(Board::from_text("..\n..\nx").is_err());
        assert!(Board::from_text(".q\n..\nb").is_err());
        assert!(Board::from_text("...\n..\n..\nb").is_err());
    }

    #[test]
    fn from_text_rejects_unreachable_positions() {
        // Two whites, one black: White cannot be ahead on stones.
        assert!(Board::from_text("ww.\nb..\n...\nb").is_err());
        // One stone each: Black moved, White answered, Black is next.
        assert!(Board::from_text("b..\nw..\n...\nb").is_ok());
        // Equal stones with White to move means Black skipped a turn.
        assert!(Board::from_text("b..\nw..\n...\nw").is_err());
        // The relaxed structural constructor admits the mirrored case.
        let mut cells = vec![None; 9];
        cells[0] = Some(Player::Black);
        cells[3] = Some(Player::White);
        assert!(Board::from_parts(3, &cells, Player::White).is_ok());
    }

    #[test]
    fn from_parts_detects_winner() {
        // A chain along the top edge alone does not connect top to bottom.
        let b = Board::from_text("bbb\nww.\n...\nw").unwrap();
        assert_eq!(b.winner(), None, "black across the top does not win");
        let b = Board::from_text("b..\nb..\nbww\nw").unwrap();
        assert_eq!(b.winner(), Some(Player::Black));
    }

    #[test]
    fn rotation_preserves_winner_and_mover() {
        let b = Board::from_text("b..\nb..\nbww\nw").unwrap();
        let r = b.rotated180();
        assert_eq!(r.winner(), Some(Player::Black));
        assert_eq!(r.to_move(), b.to_move());
        assert_eq!(r.cell(Coord::new(2, 2)), Some(Player::Black));
        assert_eq!(r.rotated180(), b);
    }

    #[test]
    fn legal_mask_matches_legal_moves() {
        let mut b = Board::new(4).unwrap();
        b.apply_move(Coord::new(2, 3)).unwrap();
        b.apply_move(Coord::new(0, 0)).unwrap();
        let mut mask = vec![false; b.num_cells()];
        b.fill_legal_mask(&mut mask);
        let from_mask: Vec<Coord> =
            (0..b.num_cells()).filter(|&i| mask[i]).map(|i| b.coord(i)).collect();
        assert_eq!(from_mask, b.legal_moves());
        assert_eq!(from_mask.len(), 14);
    }
}
