//! The robot's parametric model of the human: either the linear
//! potential-field structure or a trained network with an adapted last layer.

use std::sync::Arc;

use crate::adapt::{BeliefState, Observation};
use crate::error::{Error, Result};
use crate::human::features;
use crate::neural::{Frame, MlpModel};

#[derive(Debug, Clone)]
pub enum HumanModel {
    Linear,
    Neural(Arc<MlpModel>),
}

impl HumanModel {
    /// Frames the model needs to form one observation.
    pub fn window_len(&self) -> usize {
        match self {
            HumanModel::Linear => 1,
            HumanModel::Neural(m) => m.history_len + 1,
        }
    }

    /// Observation at the newest frame of `frames`.
    pub fn observe(&self, belief: &BeliefState, frames: &[Frame]) -> Result<Observation> {
        let last = frames.last().ok_or(Error::Empty("observation frames"))?;
        match self {
            HumanModel::Linear => {
                let u = features(&last.human, &last.robot, &last.goal);
                belief.linear_observation(&last.human, &u)
            }
            HumanModel::Neural(m) => {
                let obs = m.observation(frames, frames.len() - 1);
                if 4 * obs.phi.len() != belief.dim() {
                    return Err(Error::Dimension {
                        expected: belief.dim(),
                        got: 4 * obs.phi.len(),
                        context: "network features vs belief",
                    });
                }
                Ok(obs)
            }
        }
    }
}

/// Sliding window of the most recent frames.
#[derive(Debug, Clone)]
pub struct History {
    frames: Vec<Frame>,
    cap: usize,
}

impl History {
    pub fn new(cap: usize) -> Self {
        Self {
            frames: Vec::with_capacity(cap + 1),
            cap: cap.max(1),
        }
    }

    pub fn push(&mut self, f: Frame) {
        self.frames.push(f);
        if self.frames.len() > self.cap {
            self.frames.remove(0);
        }
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Copy of the window with one extra frame appended (older frames
    /// dropped to keep the same capacity).
    pub fn extended(&self, f: Frame) -> Vec<Frame> {
        let skip = (self.frames.len() + 1).saturating_sub(self.cap);
        let mut v: Vec<Frame> = self.frames[skip..].to_vec();
        v.push(f);
        v
    }
}
