use crate::hex::{Solver, SOLVER_MAX_SIZE};
use crate::nnet::Params;

/// A match participant. Net agents act by regularized search over their
/// snapshot parameters and sample from the resulting root policy; the
/// random agent picks uniformly among legal moves; the solver agent
/// plays a uniformly chosen optimal move (perfect play, boards up to
/// `SOLVER_MAX_SIZE`).
pub struct Agent {
    id: String,
    pub(crate) kind: AgentKind,
}

pub(crate) enum AgentKind {
    Net {
        params: Params<f32>,
        /// Per-agent node budget; falls back to the match config.
        nodes: Option<u32>,
    },
    Random,
    Solver(Solver),
}

impl Agent {
    pub fn net(id: impl Into<String>, params: Params<f32>) -> Agent {
        Agent { id: id.into(), kind: AgentKind::Net { params, nodes: None } }
    }

    /// Net agent with a fixed test-time node budget, overriding the
    /// match configuration; used for train/test trade-off studies.
    pub fn net_with_nodes(id: impl Into<String>, params: Params<f32>, nodes: u32) -> Agent {
        Agent { id: id.into(), kind: AgentKind::Net { params, nodes: Some(nodes) } }
    }

    pub fn random(id: impl Into<String>) -> Agent {
        Agent { id: id.into(), kind: AgentKind::Random }
    }

    pub fn solver(id: impl Into<String>) -> Agent {
        Agent { id: id.into(), kind: AgentKind::Solver(Solver::new()) }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Board size this agent can play, if constrained.
    pub fn max_board(&self) -> Option<u8> {
        match &self.kind {
            AgentKind::Net { params, .. } => Some(params.cfg().board_size),
            AgentKind::Random => None,
            AgentKind::Solver(_) => Some(SOLVER_MAX_SIZE),
        }
    }

    /// Net agents must match the board exactly; others have an upper
    /// bound or none.
    pub(crate) fn supports_board(&self, size: u8) -> bool {
        match &self.kind {
            AgentKind::Net { params, .. } => params.cfg().board_size == size,
            AgentKind::Random => true,
            AgentKind::Solver(_) => size <= SOLVER_MAX_SIZE,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::NetConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn board_support_reflects_agent_kind() {
        let cfg = NetConfig::new(4, 4, 0).unwrap();
        let p = Params::init(cfg, &mut ChaCha8Rng::seed_from_u64(0));
        let net = Agent::net("n", p);
        assert!(net.supports_board(4));
        assert!(!net.supports_board(5));
        assert!(Agent::random("r").supports_board(9));
        let s = Agent::solver("s");
        assert!(s.supports_board(5));
        assert!(!s.supports_board(6));
        assert_eq!(s.max_board(), Some(SOLVER_MAX_SIZE));
    }
}
