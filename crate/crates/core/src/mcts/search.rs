use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::apply_root_noise;
use super::regularized::{regularized_policy, PolicyError};
use crate::hex::{Board, Coord};
use crate::nnet::{forward, NetError, Params, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Total network expansions, root included. Budget 1 evaluates the
    /// root only and returns the (noised) priors.
    pub node_budget: u32,
    pub c_puct: f64,
    /// Dirichlet mixing weight at the root; 0 disables noise entirely.
    pub noise_eps: f64,
    pub noise_alpha: f64,
}

impl SearchConfig {
    /// Self-play defaults: 64 nodes, c_puct 1/16, eps 1/4, and a noise
    /// concentration of 10 / cells so the perturbation scale tracks the
    /// branching factor.
    pub fn selfplay(board_size: u8) -> SearchConfig {
        SearchConfig {
            node_budget: 64,
            c_puct: 1.0 / 16.0,
            noise_eps: 0.25,
            noise_alpha: 10.0 / (board_size as f64 * board_size as f64),
        }
    }

    /// Evaluation defaults: identical but noiseless.
    pub fn eval(board_size: u8) -> SearchConfig {
        SearchConfig { noise_eps: 0.0, ..SearchConfig::selfplay(board_size) }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.node_budget == 0 {
            return Err("node_budget must be at least 1".into());
        }
        if !(self.c_puct > 0.0 && self.c_puct.is_finite()) {
            return Err(format!("c_puct must be positive, got {}", self.c_puct));
        }
        if !(0.0..=1.0).contains(&self.noise_eps) {
            return Err(format!("noise_eps must lie in [0,1], got {}", self.noise_eps));
        }
        if !(self.noise_alpha > 0.0 && self.noise_alpha.is_finite()) {
            return Err(format!("noise_alpha must be positive, got {}", self.noise_alpha));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("cannot search a terminal position")]
    Terminal,
    #[error("invalid search setup: {0}")]
    Config(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    /// Regularized root policy over cell indices; zero off the legal set.
    pub policy: Vec<f64>,
    /// Mean of all values backed through the root, mover perspective.
    pub root_value: f64,
    /// Network evaluations performed (root plus expanded leaves).
    pub nodes_expanded: u32,
}

/// Pick a move by inverting the policy CDF at `u` in [0, 1). The policy
/// is dense over cells, zero off the legal set, and sums to one.
pub fn sample_move(board: &Board, policy: &[f64], u: f64) -> Coord {
    let size = board.size() as usize;
    debug_assert_eq!(policy.len(), size * size);
    let mut cum = 0.0;
    let mut last_positive = None;
    for (idx, &p) in policy.iter().enumerate() {
        if p > 0.0 {
            let c = Coord::new((idx / size) as u8, (idx % size) as u8);
            last_positive = Some(c);
            cum += p;
            if cum > u {
                return c;
            }
        }
    }
    // Rounding can leave cum slightly below u for the final cell.
    last_positive.expect("search policy has legal support")
}

#[derive(Clone, Copy)]
enum Link {
    /// Not yet tried.
    Fresh,
    /// The move ends the game with a win for this node's mover.
    Win,
    /// Expanded child node.
    Node(usize),
}

struct Child {
    mv: Coord,
    prior: f64,
    visits: u32,
    value_sum: f64,
    link: Link,
}

struct Node {
    board: Board,
    children: Vec<Child>,
    /// Values backed through this node, its own evaluation included.
    visits: u32,
    value_sum: f64,
}

impl Node {
    fn q(&self) -> f64 {
        self.value_sum / self.visits as f64
    }

    /// Builds a node from a network evaluation of its board. Priors are
    /// renormalized in f64 because f32 softmax rows can be off by more
    /// than the policy solver tolerates.
    fn from_eval(board: Board, policy_row: &[f64], value: f64) -> Node {
        let legal = board.legal_moves();
        let mut children: Vec<Child> = legal
            .iter()
            .map(|&mv| Child {
                mv,
                prior: policy_row[board.index(mv)],
                visits: 0,
                value_sum: 0.0,
                link: Link::Fresh,
            })
            .collect();
        let total: f64 = children.iter().map(|c| c.prior).sum();
        debug_assert!(total > 0.0);
        for c in &mut children {
            c.prior /= total;
        }
        Node { board, children, visits: 1, value_sum: value }
    }
}

/// The regularized policy over a node's children given current stats.
/// Before any child visit it degenerates to the priors.
fn node_policy(node: &Node, cfg: &SearchConfig) -> Result<Vec<f64>, PolicyError> {
    let total: u32 = node.children.iter().map(|c| c.visits).sum();
    let priors: Vec<f64> = node.children.iter().map(|c| c.prior).collect();
    if total == 0 {
        return Ok(priors);
    }
    let n = total as f64;
    let lambda = cfg.c_puct * n.sqrt() / (n + node.children.len() as f64);
    let parent_q = node.q();
    let q: Vec<f64> = node
        .children
        .iter()
        .map(|c| if c.visits > 0 { c.value_sum / c.visits as f64 } else { parent_q })
        .collect();
    regularized_policy(&q, &priors, lambda)
}

enum DescentEnd {
    /// Finished internally (a winning move was hit and backed up).
    Done,
    /// Reached a fresh leaf; the caller must evaluate `board` and call
    /// `integrate_leaf` with the same path.
    Leaf { path: Vec<(usize, usize)>, board: Board },
}

/// Walks from the root to an unexpanded child following the regularized
/// selection rule `argmax pi*(a) - n(a)/(1 + sum n)`. Winning moves are
/// resolved and backed up immediately (they need no network call).
fn walk_to_leaf(tree: &mut Vec<Node>, cfg: &SearchConfig) -> Result<DescentEnd, PolicyError> {
    let mut path: Vec<(usize, usize)> = Vec::new();
    let mut cur = 0usize;
    loop {
        let (k, link, mv) = {
            let node = &tree[cur];
            let pi = node_policy(node, cfg)?;
            let denom = 1.0 + node.children.iter().map(|c| c.visits).sum::<u32>() as f64;
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (i, child) in node.children.iter().enumerate() {
                let score = pi[i] - child.visits as f64 / denom;
                if score > best_score {
                    best_score = score;
                    best = i;
                }
            }
            (best, node.children[best].link, node.children[best].mv)
        };
        path.push((cur, k));
        match link {
            Link::Win => {
                backup(tree, &path, 1.0);
                return Ok(DescentEnd::Done);
            }
            Link::Node(idx) => cur = idx,
            Link::Fresh => {
                let mut board = tree[cur].board.clone();
                let won = board.apply_move(mv).expect("children are legal").is_some();
                if won {
                    tree[cur].children[k].link = Link::Win;
                    backup(tree, &path, 1.0);
                    return Ok(DescentEnd::Done);
                }
                return Ok(DescentEnd::Leaf { path, board });
            }
        }
    }
}

/// Attaches an evaluated leaf under the last path entry and backs its
/// value up. `value` is from the leaf mover's own perspective.
fn integrate_leaf(
    tree: &mut Vec<Node>,
    path: &[(usize, usize)],
    board: Board,
    policy_row: &[f64],
    value: f64,
) {
    let node = Node::from_eval(board, policy_row, value);
    let idx = tree.len();
    tree.push(node);
    let &(parent, k) = path.last().expect("leaf paths are non-empty");
    tree[parent].children[k].link = Link::Node(idx);
    // The new node is one ply below the last path node.
    backup(tree, path, -value);
}

/// Backs `value` (perspective of the deepest path node's mover) up the
/// path, flipping sign each ply.
fn backup(tree: &mut [Node], path: &[(usize, usize)], value: f64) {
    let mut v = value;
    for &(n, c) in path.iter().rev() {
        let node = &mut tree[n];
        node.children[c].visits += 1;
        node.children[c].value_sum += v;
        node.visits += 1;
        node.value_sum += v;
        v = -v;
    }
}

fn finish(tree: &[Node], cfg: &SearchConfig, nodes_expanded: u32) -> Result<SearchResult, SearchError> {
    let root = &tree[0];
    let pi = node_policy(root, cfg)?;
    let mut policy = vec![0.0; root.board.num_cells()];
    for (child, p) in root.children.iter().zip(pi) {
        policy[root.board.index(child.mv)] = p;
    }
    Ok(SearchResult { policy, root_value: root.q(), nodes_expanded })
}

fn eval_one<F: Real>(board: &Board, params: &Params<F>) -> Result<(Vec<f64>, f64), SearchError> {
    let cells = board.num_cells();
    let mut obs32 = vec![0.0f32; 2 * cells];
    board.encode_observation(&mut obs32);
    let obs = Array2::from_shape_vec(
        (1, 2 * cells),
        obs32.iter().map(|&x| F::from_f64(x as f64)).collect(),
    )
    .expect("length matches shape");
    let mut mask = vec![false; cells];
    board.fill_legal_mask(&mut mask);
    let out = forward(params, obs.view(), &mask)?;
    let row: Vec<f64> = (0..cells).map(|c| out.policy[[0, c]].to_f64()).collect();
    Ok((row, out.value[0].to_f64()))
}

fn check_setup<F: Real>(
    root: &Board,
    params: &Params<F>,
    cfg: &SearchConfig,
) -> Result<(), SearchError> {
    cfg.validate().map_err(SearchError::Config)?;
    if root.is_terminal() {
        return Err(SearchError::Terminal);
    }
    if params.cfg().board_size != root.size() {
        return Err(SearchError::Config(format!(
            "network is for board {}, position is {}",
            params.cfg().board_size,
            root.size()
        )));
    }
    Ok(())
}

fn noised_root(
    board: Board,
    policy_row: &[f64],
    value: f64,
    cfg: &SearchConfig,
    seed: u64,
) -> Node {
    let mut root = Node::from_eval(board, policy_row, value);
    if cfg.noise_eps > 0.0 {
        let mut priors: Vec<f64> = root.children.iter().map(|c| c.prior).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        apply_root_noise(&mut priors, cfg.noise_eps, cfg.noise_alpha, &mut rng);
        for (c, p) in root.children.iter_mut().zip(priors) {
            c.prior = p;
        }
    }
    root
}

/// One search from `root`. Deterministic given (position, parameters,
/// config, seed); with `noise_eps == 0` the seed has no effect at all.
pub fn search<F: Real>(
    root: &Board,
    params: &Params<F>,
    cfg: &SearchConfig,
    seed: u64,
) -> Result<SearchResult, SearchError> {
    check_setup(root, params, cfg)?;
    let (row, value) = eval_one(root, params)?;
    let mut tree: Vec<Node> = Vec::with_capacity(cfg.node_budget as usize);
    tree.push(noised_root(root.clone(), &row, value, cfg, seed));
    let mut nodes_expanded = 1u32;

    for _ in 1..cfg.node_budget {
        match walk_to_leaf(&mut tree, cfg)? {
            DescentEnd::Done => {}
            DescentEnd::Leaf { path, board } => {
                let (row, value) = eval_one(&board, params)?;
                integrate_leaf(&mut tree, &path, board, &row, value);
                nodes_expanded += 1;
            }
        }
    }
    finish(&tree, cfg, nodes_expanded)
}

/// Many independent searches advanced in lockstep so that each round's
/// leaf evaluations across all slots become one batched network call.
///
/// Per slot this performs exactly the searches `search` would, with the
/// same seeds and selection decisions; only the scheduling of network
/// evaluations differs. Results are independent of thread count: slot
/// state is private and the shared batch is assembled in slot order.
pub fn search_batch<F: Real>(
    boards: &[Board],
    params: &Params<F>,
    cfg: &SearchConfig,
    seeds: &[u64],
) -> Result<Vec<SearchResult>, SearchError> {
    if boards.len() != seeds.len() {
        return Err(SearchError::Config(format!(
            "{} boards but {} seeds",
            boards.len(),
            seeds.len()
        )));
    }
    for b in boards {
        check_setup(b, params, cfg)?;
    }
    if boards.is_empty() {
        return Ok(Vec::new());
    }
    let cells = boards[0].num_cells();
    if boards.iter().any(|b| b.num_cells() != cells) {
        return Err(SearchError::Config("mixed board sizes in one batch".into()));
    }

    // Round 0: evaluate every root in one batch.
    let evals = eval_many(boards.iter().collect::<Vec<_>>().as_slice(), params, cells)?;
    let mut slots: Vec<SlotState> = boards
        .iter()
        .zip(seeds)
        .zip(evals)
        .map(|((b, &seed), (row, value))| SlotState {
            tree: {
                let mut t = Vec::with_capacity(cfg.node_budget as usize);
                t.push(noised_root(b.clone(), &row, value, cfg, seed));
                t
            },
            pending: None,
            nodes_expanded: 1,
        })
        .collect();

    for _ in 1..cfg.node_budget {
        // Tree descents are slot-local and run in parallel.
        slots
            .par_iter_mut()
            .map(|slot| {
                debug_assert!(slot.pending.is_none());
                match walk_to_leaf(&mut slot.tree, cfg)? {
                    DescentEnd::Done => {}
                    DescentEnd::Leaf { path, board } => slot.pending = Some((path, board)),
                }
                Ok(())
            })
            .collect::<Result<Vec<()>, PolicyError>>()?;

        // Batched evaluation of all pending leaves, in slot order.
        let pending_boards: Vec<&Board> = slots
            .iter()
            .filter_map(|s| s.pending.as_ref().map(|(_, b)| b))
            .collect();
        if pending_boards.is_empty() {
            continue;
        }
        let evals = eval_many(&pending_boards, params, cells)?;
        let mut it = evals.into_iter();
        for slot in &mut slots {
            if let Some((path, board)) = slot.pending.take() {
                let (row, value) = it.next().expect("one eval per pending leaf");
                integrate_leaf(&mut slot.tree, &path, board, &row, value);
                slot.nodes_expanded += 1;
            }
        }
    }

    slots
        .iter()
        .map(|s| finish(&s.tree, cfg, s.nodes_expanded))
        .collect()
}

struct SlotState {
    tree: Vec<Node>,
    pending: Option<(Vec<(usize, usize)>, Board)>,
    nodes_expanded: u32,
}

fn eval_many<F: Real>(
    boards: &[&Board],
    params: &Params<F>,
    cells: usize,
) -> Result<Vec<(Vec<f64>, f64)>, SearchError> {
    let n = boards.len();
    let mut obs = Array2::zeros((n, 2 * cells));
    let mut mask = vec![false; n * cells];
    let mut obs32 = vec![0.0f32; 2 * cells];
    for (i, b) in boards.iter().enumerate() {
        b.encode_observation(&mut obs32);
        for (j, &x) in obs32.iter().enumerate() {
            obs[[i, j]] = F::from_f64(x as f64);
        }
        b.fill_legal_mask(&mut mask[i * cells..(i + 1) * cells]);
    }
    let out = forward(params, obs.view(), &mask)?;
    Ok((0..n)
        .map(|i| {
            let row: Vec<f64> = (0..cells).map(|c| out.policy[[i, c]].to_f64()).collect();
            (row, out.value[i].to_f64())
        })
        .collect())
}
