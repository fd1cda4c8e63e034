//! Domain vocabulary: identifiers, agents, actions, ratings and per-stage outcomes.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl From<u64> for $name {
            fn from(v: u64) -> Self {
                Self(v)
            }
        }
    };
}

id_newtype!(
    /// A doctor (or investor) participating in the voting system.
    AgentId
);
id_newtype!(
    /// A treatment or medicine that is a candidate for the catalogue.
    TreatmentId
);
id_newtype!(
    /// Identifies one action within a run. Unique across stages of a replicate.
    ActionId
);
id_newtype!(
    /// Settlement round counter. Starts at 0 and increases by one per settled stage.
    StageIndex
);

impl StageIndex {
    pub fn next(self) -> Self {
        Self(self.0 + 1)
    }
}

/// Participation categories. An agent may hold several at once.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    /// Submits staked actions (votes on treatments).
    pub actor: bool,
    /// Rates other agents' actions.
    pub rater: bool,
    /// Holds credit points only.
    pub investor: bool,
}

impl Roles {
    pub const DOCTOR: Roles = Roles {
        actor: true,
        rater: true,
        investor: false,
    };
    pub const INVESTOR: Roles = Roles {
        actor: false,
        rater: false,
        investor: true,
    };

    /// True for agents that never emit actions or ratings.
    pub fn is_inert(&self) -> bool {
        !self.actor && !self.rater
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub roles: Roles,
    pub balance: f64,
    pub staking_rate_action: f64,
    pub staking_rate_rating: f64,
    pub skip_probability: f64,
    /// Persistent offset added to a treatment's quality when this agent judges it.
    pub perception_bias: f64,
}

impl Agent {
    pub fn doctor(id: impl Into<AgentId>, balance: f64) -> Self {
        Self {
            id: id.into(),
            roles: Roles::DOCTOR,
            balance,
            staking_rate_action: 0.0,
            staking_rate_rating: 0.0,
            skip_probability: 0.0,
            perception_bias: 0.0,
        }
    }

    pub fn with_rates(mut self, action: f64, rating: f64) -> Self {
        self.staking_rate_action = action;
        self.staking_rate_rating = rating;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Endorse,
    Oppose,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Endorse => Direction::Oppose,
            Direction::Oppose => Direction::Endorse,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::Endorse => 1.0,
            Direction::Oppose => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Endorse => "endorse",
            Direction::Oppose => "oppose",
        }
    }
}

/// One agent's staked vote on a treatment during a stage.
///
/// `stake` is unsigned; the vote's direction does not enter settlement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub id: ActionId,
    pub actor: AgentId,
    pub stage: StageIndex,
    pub treatment: TreatmentId,
    pub direction: Direction,
    pub stake: f64,
}

/// A signed, staked evaluation of another agent's action.
/// Positive approves, negative disapproves; the magnitude is the stake.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub rater: AgentId,
    pub target_action: ActionId,
    pub stage: StageIndex,
    pub signed_stake: f64,
}

/// Per-agent settlement result for one stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub delta_action: f64,
    pub delta_rating: f64,
    pub delta_total: f64,
    pub coeff_action: f64,
    pub coeff_rating: f64,
}

impl StageOutcome {
    pub fn new(delta_action: f64, delta_rating: f64, coeff_action: f64, coeff_rating: f64) -> Self {
        Self {
            delta_action,
            delta_rating,
            delta_total: delta_action + delta_rating,
            coeff_action,
            coeff_rating,
        }
    }

    /// Outcome carrying only a total change, for hand-built ledgers.
    pub fn total(delta: f64) -> Self {
        Self::new(delta, 0.0, 0.0, 0.0)
    }
}
