use crate::meanfield::MeanFieldObservation;
use crate::mmdp::HybridAction;
use crate::neural::LstmState;

/// One agent's stored step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Encoded observation, mean-field block included.
    pub features: Vec<f64>,
    pub mean_field: MeanFieldObservation,
    pub action: HybridAction,
    /// Continuous sample in normalized units before clamping.
    pub raw_continuous: Vec<f64>,
    pub cost: f64,
    /// `log π_continuous + log π_discrete` under the sampling policy.
    pub log_prob: f64,
    pub log_prob_continuous: f64,
    pub log_prob_discrete: f64,
    pub value: f64,
    /// Last step of an episode.
    pub done: bool,
}

/// Steps of one agent since the last optimization phase.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    /// Recurrent state the first stored step was sampled from.
    pub start_state: Option<LstmState>,
    pub steps: Vec<Transition>,
    /// Value of the state after the last step; zero when it ended an episode.
    pub bootstrap_value: f64,
}

/// Per-agent rollout storage with a fixed per-agent capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub capacity: usize,
    pub agents: Vec<Trajectory>,
}

impl RolloutBuffer {
    pub fn new(num_agents: usize, capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        RolloutBuffer {
            capacity,
            agents: vec![Trajectory::default(); num_agents],
        }
    }

    pub fn push(&mut self, agent: usize, t: Transition) {
        assert!(self.agents[agent].steps.len() < self.capacity, "rollout buffer overflow");
        self.agents[agent].steps.push(t);
    }

    /// Steps stored per agent (all agents advance together).
    pub fn len(&self) -> usize {
        self.agents.first().map_or(0, |a| a.steps.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        self.len() >= self.capacity
    }

    pub fn clear(&mut self) {
        for a in &mut self.agents {
            a.steps.clear();
            a.start_state = None;
            a.bootstrap_value = 0.0;
        }
    }
}
