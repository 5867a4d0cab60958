use serde::{Deserialize, Serialize};

/// Where a topic's reference document comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    FsBio,
    Triviaqa,
    Custom,
}

/// An entity and the ground-truth document its responses are checked against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub id: String,
    pub entity: String,
    pub reference_doc: String,
    pub source: Source,
}
