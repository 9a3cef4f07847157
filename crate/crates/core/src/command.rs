//! Commands the coordinator can issue to the guided agent.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

/// The guided agent understands five commands. Every motion command ends in
/// a straight walk: the turn commands first rotate in place (plus actuation
/// noise), then keep moving forward until told to stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Stop,
    MoveForward,
    TurnRight,
    TurnLeft,
    MoveBackward,
}

impl Command {
    /// Nominal in-place rotation before walking, in radians (counterclockwise
    /// positive). `None` for `Stop`, which does not move at all.
    pub fn nominal_rotation(self) -> Option<f64> {
        match self {
            Command::Stop => None,
            Command::MoveForward => Some(0.0),
            Command::TurnRight => Some(-PI / 2.0),
            Command::TurnLeft => Some(PI / 2.0),
            Command::MoveBackward => Some(PI),
        }
    }

    /// Fixed preference order used to break ties in particle votes.
    pub const TIE_ORDER: [Command; 5] = [
        Command::Stop,
        Command::MoveForward,
        Command::TurnLeft,
        Command::TurnRight,
        Command::MoveBackward,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Command::Stop => "stop",
            Command::MoveForward => "move_forward",
            Command::TurnRight => "turn_right",
            Command::TurnLeft => "turn_left",
            Command::MoveBackward => "move_backward",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}
