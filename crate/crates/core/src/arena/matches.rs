use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{Agent, AgentKind};
use super::elo::WinMatrix;
use super::ArenaError;
use crate::hex::{Board, Coord, Player, MAX_SIZE};
use crate::mcts::{sample_move, search_batch, SearchConfig};
use crate::rng;

/// Shared evaluation settings for a block of matches. Net agents search
/// noiselessly with `nodes` expansions (unless they carry an override)
/// and sample their move from the regularized root policy, which keeps
/// paired games varied while playing at search strength.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub board_size: u8,
    pub nodes: u32,
    pub c_puct: f64,
}

impl MatchConfig {
    pub fn new(board_size: u8, nodes: u32) -> MatchConfig {
        MatchConfig { board_size, nodes, c_puct: 1.0 / 16.0 }
    }

    fn validate(&self) -> Result<(), ArenaError> {
        if self.board_size == 0 || self.board_size > MAX_SIZE {
            return Err(ArenaError::Config(format!("bad board size {}", self.board_size)));
        }
        if self.nodes == 0 {
            return Err(ArenaError::Config("node budget must be positive".into()));
        }
        if !(self.c_puct > 0.0 && self.c_puct.is_finite()) {
            return Err(ArenaError::Config(format!("bad c_puct {}", self.c_puct)));
        }
        Ok(())
    }

    fn search_config(&self, nodes: u32) -> SearchConfig {
        SearchConfig { node_budget: nodes, c_puct: self.c_puct, noise_eps: 0.0, noise_alpha: 1.0 }
    }
}

/// One finished game. `seed` replays it exactly under the same agents
/// and config.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub black: String,
    pub white: String,
    pub winner: String,
    pub board_size: u8,
    pub nodes: u32,
    pub seed: u64,
}

/// Receives every finished match; errors abort the schedule.
pub trait MatchSink {
    fn on_match(&mut self, rec: &MatchRecord) -> std::io::Result<()>;
}

pub struct NullMatchSink;

impl MatchSink for NullMatchSink {
    fn on_match(&mut self, _rec: &MatchRecord) -> std::io::Result<()> {
        Ok(())
    }
}

impl MatchSink for Vec<MatchRecord> {
    fn on_match(&mut self, rec: &MatchRecord) -> std::io::Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

struct Slot {
    board: Board,
    rng: ChaCha8Rng,
    black: usize,
    white: usize,
    seed: u64,
    winner: Option<usize>,
}

fn make_slot(cfg: &MatchConfig, black: usize, white: usize, seed: u64) -> Result<Slot, ArenaError> {
    Ok(Slot {
        board: Board::new(cfg.board_size)?,
        rng: ChaCha8Rng::seed_from_u64(seed),
        black,
        white,
        seed,
        winner: None,
    })
}

/// Advance every live game one ply per round, batching all positions
/// awaiting the same net agent into a single search call. Each slot
/// consumes only its own RNG stream, so results do not depend on how
/// games are grouped.
fn play_block(agents: &mut [Agent], cfg: &MatchConfig, slots: &mut [Slot]) -> Result<(), ArenaError> {
    loop {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (s, slot) in slots.iter().enumerate() {
            if slot.winner.is_none() {
                let acting = match slot.board.to_move() {
                    Player::Black => slot.black,
                    Player::White => slot.white,
                };
                groups.entry(acting).or_default().push(s);
            }
        }
        if groups.is_empty() {
            return Ok(());
        }

        let mut moves: Vec<Option<Coord>> = vec![None; slots.len()];
        for (&aidx, slot_ids) in &groups {
            match &mut agents[aidx].kind {
                AgentKind::Net { params, nodes } => {
                    let scfg = cfg.search_config(nodes.unwrap_or(cfg.nodes));
                    let boards: Vec<Board> =
                        slot_ids.iter().map(|&s| slots[s].board.clone()).collect();
                    let seeds: Vec<u64> =
                        slot_ids.iter().map(|&s| slots[s].rng.next_u64()).collect();
                    let results = search_batch(&boards, &*params, &scfg, &seeds)?;
                    for (k, &s) in slot_ids.iter().enumerate() {
                        let u: f64 = slots[s].rng.random();
                        moves[s] = Some(sample_move(&slots[s].board, &results[k].policy, u));
                    }
                }
                AgentKind::Random => {
                    for &s in slot_ids {
                        let legal = slots[s].board.legal_moves();
                        let pick = slots[s].rng.random_range(0..legal.len());
                        moves[s] = Some(legal[pick]);
                    }
                }
                AgentKind::Solver(solver) => {
                    for &s in slot_ids {
                        let solved = solver.solve(&slots[s].board)?;
                        let pick = slots[s].rng.random_range(0..solved.optimal_moves.len());
                        moves[s] = Some(solved.optimal_moves[pick]);
                    }
                }
            }
        }

        for (slot, mv) in slots.iter_mut().zip(&moves) {
            if let Some(mv) = mv {
                if let Some(outcome) = slot.board.apply_move(*mv)? {
                    slot.winner = Some(match outcome.winner {
                        Player::Black => slot.black,
                        Player::White => slot.white,
                    });
                }
            }
        }
    }
}

fn record_of(agents: &[Agent], cfg: &MatchConfig, slot: &Slot) -> MatchRecord {
    MatchRecord {
        black: agents[slot.black].id().to_string(),
        white: agents[slot.white].id().to_string(),
        winner: agents[slot.winner.expect("game finished")].id().to_string(),
        board_size: cfg.board_size,
        nodes: cfg.nodes,
        seed: slot.seed,
    }
}

fn check_board_support(agents: &[Agent], indices: &[usize], size: u8) -> Result<(), ArenaError> {
    for &i in indices {
        if !agents[i].supports_board(size) {
            return Err(ArenaError::BoardUnsupported {
                id: agents[i].id().to_string(),
                size,
            });
        }
    }
    Ok(())
}

/// Play one paired match between `agents[a]` and `agents[b]`: two games
/// with colors swapped, deterministic in `seed`. `a == b` is allowed
/// (an agent playing itself still yields two records).
pub fn play_pair(
    agents: &mut [Agent],
    a: usize,
    b: usize,
    cfg: &MatchConfig,
    seed: u64,
) -> Result<Vec<MatchRecord>, ArenaError> {
    cfg.validate()?;
    check_board_support(agents, &[a, b], cfg.board_size)?;
    let mut slots = vec![
        make_slot(cfg, a, b, rng::split_seed(seed, 0))?,
        make_slot(cfg, b, a, rng::split_seed(seed, 1))?,
    ];
    play_block(agents, cfg, &mut slots)?;
    Ok(slots.iter().map(|s| record_of(agents, cfg, s)).collect())
}

/// Plays one pairing for `games` games, colors alternating from
/// `a`-black, all games in lockstep. This is the league building block,
/// exposed so callers can top up a partially completed pairing without
/// replaying the rest of the schedule.
pub fn run_pairing(
    agents: &mut [Agent],
    a: &str,
    b: &str,
    games: usize,
    cfg: &MatchConfig,
    seed: u64,
    sink: &mut dyn MatchSink,
) -> Result<WinMatrix, ArenaError> {
    cfg.validate()?;
    let pos = |id: &str| {
        agents
            .iter()
            .position(|ag| ag.id() == id)
            .ok_or_else(|| ArenaError::UnknownId(id.to_string()))
    };
    let i = pos(a)?;
    let j = pos(b)?;
    if i == j {
        return Err(ArenaError::Config("a pairing needs two distinct agents".into()));
    }
    if games == 0 || games % 2 != 0 {
        return Err(ArenaError::Config(format!(
            "games must be positive and even to balance colors, got {games}"
        )));
    }
    check_board_support(agents, &[i, j], cfg.board_size)?;
    let ids: Vec<String> = agents.iter().map(|ag| ag.id().to_string()).collect();
    let mut matrix = WinMatrix::new(ids)?;
    pair_block(agents, cfg, i, j, games, seed, &mut matrix, sink)?;
    Ok(matrix)
}

fn pair_block(
    agents: &mut [Agent],
    cfg: &MatchConfig,
    i: usize,
    j: usize,
    games: usize,
    pair_seed: u64,
    matrix: &mut WinMatrix,
    sink: &mut dyn MatchSink,
) -> Result<(), ArenaError> {
    let mut slots = Vec::with_capacity(games);
    for g in 0..games {
        let (black, white) = if g % 2 == 0 { (i, j) } else { (j, i) };
        slots.push(make_slot(cfg, black, white, rng::split_seed(pair_seed, g as u64))?);
    }
    play_block(agents, cfg, &mut slots)?;
    for slot in &slots {
        let rec = record_of(agents, cfg, slot);
        matrix.record(slot.black, slot.white, slot.winner == Some(slot.black));
        sink.on_match(&rec)?;
    }
    Ok(())
}

/// Round-robin league: every unordered pair of agents plays
/// `games_per_pair` games, half with each color assignment. Games of a
/// pairing run in lockstep so net evaluations batch into shared
/// forwards.
pub fn run_league(
    agents: &mut [Agent],
    games_per_pair: usize,
    cfg: &MatchConfig,
    seed: u64,
    sink: &mut dyn MatchSink,
) -> Result<WinMatrix, ArenaError> {
    cfg.validate()?;
    if agents.len() < 2 {
        return Err(ArenaError::Config("league needs at least two agents".into()));
    }
    if games_per_pair == 0 || games_per_pair % 2 != 0 {
        return Err(ArenaError::Config(format!(
            "games_per_pair must be positive and even, got {games_per_pair}"
        )));
    }
    let all: Vec<usize> = (0..agents.len()).collect();
    check_board_support(agents, &all, cfg.board_size)?;
    let mut matrix = WinMatrix::new(agents.iter().map(|a| a.id().to_string()).collect())?;
    let mut pair_idx = 0u64;
    for i in 0..agents.len() {
        for j in (i + 1)..agents.len() {
            let pair_seed = rng::split_seed(seed, pair_idx);
            pair_idx += 1;
            pair_block(agents, cfg, i, j, games_per_pair, pair_seed, &mut matrix, sink)?;
        }
    }
    Ok(matrix)
}

/// Rate everyone against one reference: each agent other than `top_id`
/// plays `games_per_agent` paired-color games against it. The result is
/// a sparse WinMatrix whose only nonzero pairings involve the top agent.
pub fn run_top_agent_eval(
    agents: &mut [Agent],
    top_id: &str,
    games_per_agent: usize,
    cfg: &MatchConfig,
    seed: u64,
    sink: &mut dyn MatchSink,
) -> Result<WinMatrix, ArenaError> {
    cfg.validate()?;
    let top = agents
        .iter()
        .position(|a| a.id() == top_id)
        .ok_or_else(|| ArenaError::UnknownId(top_id.to_string()))?;
    if agents.len() < 2 {
        return Err(ArenaError::Config("evaluation needs at least two agents".into()));
    }
    if games_per_agent == 0 || games_per_agent % 2 != 0 {
        return Err(ArenaError::Config(format!(
            "games_per_agent must be positive and even, got {games_per_agent}"
        )));
    }
    let all: Vec<usize> = (0..agents.len()).collect();
    check_board_support(agents, &all, cfg.board_size)?;
    let mut matrix = WinMatrix::new(agents.iter().map(|a| a.id().to_string()).collect())?;
    for i in 0..agents.len() {
        if i == top {
            continue;
        }
        let pair_seed = rng::split_seed(seed, i as u64);
        pair_block(agents, cfg, i, top, games_per_agent, pair_seed, &mut matrix, sink)?;
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{NetConfig, Params};

    fn cfg3() -> MatchConfig {
        MatchConfig::new(3, 8)
    }

    #[test]
    fn an_agent_can_play_itself() {
        let mut agents = vec![Agent::random("only")];
        let recs = play_pair(&mut agents, 0, 0, &cfg3(), 5).unwrap();
        assert_eq!(recs.len(), 2);
        for r in &recs {
            assert_eq!(r.black, "only");
            assert_eq!(r.white, "only");
            assert_eq!(r.winner, "only");
            assert_eq!(r.board_size, 3);
        }
    }

    #[test]
    fn same_seed_replays_identical_records() {
        let mut agents = vec![Agent::random("a"), Agent::random("b")];
        let r1 = play_pair(&mut agents, 0, 1, &cfg3(), 42).unwrap();
        let r2 = play_pair(&mut agents, 0, 1, &cfg3(), 42).unwrap();
        let r3 = play_pair(&mut agents, 0, 1, &cfg3(), 43).unwrap();
        assert_eq!(r1, r2);
        assert_ne!(r1, r3);
    }

    #[test]
    fn solver_always_wins_its_black_games_on_3x3() {
        // First player wins 3x3; perfect black never loses it.
        let mut agents = vec![Agent::solver("solver"), Agent::random("rand")];
        let mut solver_wins = 0;
        for seed in 0..16 {
            let recs = play_pair(&mut agents, 0, 1, &cfg3(), seed).unwrap();
            assert_eq!(recs.len(), 2);
            assert_eq!(recs[0].black, "solver");
            assert_eq!(recs[0].winner, "solver", "perfect black lost game {seed}");
            solver_wins += recs.iter().filter(|r| r.winner == "solver").count();
        }
        assert!(solver_wins >= 30, "solver won only {solver_wins}/32");
    }

    #[test]
    fn league_schedules_every_pair_with_even_colors() {
        let mut agents =
            vec![Agent::random("r0"), Agent::random("r1"), Agent::random("r2")];
        let mut records: Vec<MatchRecord> = Vec::new();
        let m = run_league(&mut agents, 4, &cfg3(), 7, &mut records).unwrap();
        assert_eq!(records.len(), 12);
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert_eq!(m.games_between(i, j), 4);
                let (a, b) = (format!("r{i}"), format!("r{j}"));
                let i_black = records
                    .iter()
                    .filter(|r| r.black == a && r.white == b)
                    .count();
                assert_eq!(i_black, 2, "colors not balanced for {a} vs {b}");
            }
        }
        assert_eq!(m.total_games(), 12);
    }

    #[test]
    fn league_is_deterministic_in_seed() {
        let make = || vec![Agent::random("r0"), Agent::random("r1"), Agent::random("r2")];
        let mut rec1: Vec<MatchRecord> = Vec::new();
        let mut rec2: Vec<MatchRecord> = Vec::new();
        let m1 = run_league(&mut make(), 6, &cfg3(), 11, &mut rec1).unwrap();
        let m2 = run_league(&mut make(), 6, &cfg3(), 11, &mut rec2).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(rec1, rec2);
    }

    #[test]
    fn a_pairing_replays_its_league_block() {
        // Pair (r0, r1) is pair 0 of the league schedule, so replaying it
        // with the league's derived seed reproduces those records exactly.
        let make = || vec![Agent::random("r0"), Agent::random("r1"), Agent::random("r2")];
        let mut league: Vec<MatchRecord> = Vec::new();
        run_league(&mut make(), 4, &cfg3(), 11, &mut league).unwrap();

        let mut solo: Vec<MatchRecord> = Vec::new();
        let m = run_pairing(
            &mut make(),
            "r0",
            "r1",
            4,
            &cfg3(),
            rng::split_seed(11, 0),
            &mut solo,
        )
        .unwrap();
        let block: Vec<MatchRecord> = league
            .iter()
            .filter(|r| r.winner.len() == 2 && r.black != "r2" && r.white != "r2")
            .cloned()
            .collect();
        assert_eq!(solo, block);
        assert_eq!(m.games_between(0, 1), 4);
        assert_eq!(m.games_between(0, 2), 0);

        let mut sink = NullMatchSink;
        let odd = run_pairing(&mut make(), "r0", "r1", 3, &cfg3(), 1, &mut sink);
        assert!(odd.is_err());
        let ghost = run_pairing(&mut make(), "r0", "zz", 2, &cfg3(), 1, &mut sink);
        assert!(matches!(ghost, Err(ArenaError::UnknownId(_))));
        let same = run_pairing(&mut make(), "r0", "r0", 2, &cfg3(), 1, &mut sink);
        assert!(matches!(same, Err(ArenaError::Config(_))));
    }

    #[test]
    fn top_eval_only_pairs_against_the_reference() {
        let mut agents = vec![
            Agent::random("a"),
            Agent::random("b"),
            Agent::random("top"),
            Agent::random("c"),
        ];
        let mut records: Vec<MatchRecord> = Vec::new();
        let m = run_top_agent_eval(&mut agents, "top", 4, &cfg3(), 3, &mut records).unwrap();
        assert_eq!(records.len(), 12);
        assert!(records.iter().all(|r| r.black == "top" || r.white == "top"));
        let top = m.index_of("top").unwrap();
        for i in 0..4 {
            for j in (i + 1)..4 {
                let expect = if i == top || j == top { 4 } else { 0 };
                assert_eq!(m.games_between(i, j), expect);
            }
        }
        assert!(run_top_agent_eval(&mut agents, "ghost", 4, &cfg3(), 3, &mut NullMatchSink)
            .is_err());
    }

    #[test]
    fn net_agents_play_deterministically() {
        let p = Params::init(
            NetConfig::new(3, 6, 1).unwrap(),
            &mut ChaCha8Rng::seed_from_u64(4),
        );
        let make = || {
            vec![
                Agent::net("n0", p.clone()),
                Agent::net_with_nodes("n1", p.clone(), 4),
            ]
        };
        let r1 = play_pair(&mut make(), 0, 1, &cfg3(), 9).unwrap();
        let r2 = play_pair(&mut make(), 0, 1, &cfg3(), 9).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.iter().all(|r| r.winner == "n0" || r.winner == "n1"));
    }

    #[test]
    fn invalid_schedules_are_rejected() {
        let mut agents = vec![Agent::random("a"), Agent::random("b")];
        assert!(run_league(&mut agents, 3, &cfg3(), 0, &mut NullMatchSink).is_err());
        assert!(run_league(&mut agents, 0, &cfg3(), 0, &mut NullMatchSink).is_err());
        let mut one = vec![Agent::random("a")];
        assert!(run_league(&mut one, 2, &cfg3(), 0, &mut NullMatchSink).is_err());

        // Solver cannot play boards beyond its limit.
        let mut with_solver = vec![Agent::solver("s"), Agent::random("r")];
        let big = MatchConfig::new(6, 8);
        assert!(matches!(
            play_pair(&mut with_solver, 0, 1, &big, 0),
            Err(ArenaError::BoardUnsupported { .. })
        ));

        // Net agents must match the board size exactly.
        let p = Params::init(
            NetConfig::new(4, 4, 0).unwrap(),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        let mut mismatched = vec![Agent::net("n", p), Agent::random("r")];
        assert!(play_pair(&mut mismatched, 0, 1, &cfg3(), 0).is_err());
    }
}
