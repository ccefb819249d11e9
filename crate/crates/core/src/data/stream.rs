// SPDX-License-Identifier: Apache-2.0

//! Regime-switching prediction streams.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Anything that can produce one multi-agent observation ("scene") given
/// the true class.
pub trait SceneSource {
    fn num_agents(&self) -> usize;
    fn num_classes(&self) -> usize;
    /// One feature vector per agent.
    fn draw_scene(&self, class: usize, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>>;
}

/// Piecewise-constant true-state track: segment `j` starts at `starts[j]`
/// and lasts until the next start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSchedule {
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub state: usize,
}

impl RegimeSchedule {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        match segments.first() {
            None => return Err(Error::Empty("regime schedule")),
            Some(s) if s.start != 0 => {
                return Err(Error::invalid("first regime segment must start at 0"))
            }
            _ => {}
        }
        if segments.windows(2).any(|w| w[1].start <= w[0].start) {
            return Err(Error::invalid("regime segments must have increasing starts"));
        }
        Ok(RegimeSchedule { segments })
    }

    pub fn constant(state: usize) -> Self {
        RegimeSchedule {
            segments: vec![Segment { start: 0, state }],
        }
    }

    /// `first` on `[0, at)`, `second` afterwards.
    pub fn switch_at(first: usize, at: usize, second: usize) -> Result<Self> {
        Self::new(vec![
            Segment { start: 0, state: first },
            Segment { start: at, state: second },
        ])
    }

    /// Cycles through `states`, changing every `period` steps, over `length`
    /// steps.
    pub fn cyclic(states: &[usize], period: usize, length: usize) -> Result<Self> {
        if states.is_empty() || period == 0 {
            return Err(Error::invalid("cyclic schedule needs states and a positive period"));
        }
        let segments = (0..length.div_ceil(period).max(1))
            .map(|j| Segment {
                start: j * period,
                state: states[j % states.len()],
            })
            .collect();
        Self::new(segments)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn state_at(&self, i: usize) -> usize {
        let idx = self.segments.partition_point(|s| s.start <= i);
        self.segments[idx - 1].state
    }

    /// Start times after zero where the state changes.
    pub fn switch_times(&self) -> Vec<usize> {
        self.segments
            .windows(2)
            .filter(|w| w[0].state != w[1].state)
            .map(|w| w[1].start)
            .collect()
    }

    pub fn validate_states(&self, num_classes: usize) -> Result<()> {
        match self.segments.iter().find(|s| s.state >= num_classes) {
            Some(s) => Err(Error::OutOfRange(format!(
                "schedule state {} with {num_classes} classes",
                s.state
            ))),
            None => Ok(()),
        }
    }
}

/// Time-indexed per-agent features plus the true-state track.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionStream {
    /// `features[i][k]` is agent `k`'s observation at time `i`.
    pub features: Vec<Vec<Vec<f64>>>,
    pub true_states: Vec<usize>,
}

impl PredictionStream {
    pub fn len(&self) -> usize {
        self.true_states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_states.is_empty()
    }
}

/// Draws `length` independent scenes, each from the class active at that
/// time.
pub fn prediction_stream(
    source: &dyn SceneSource,
    schedule: &RegimeSchedule,
    length: usize,
    seed: u64,
) -> Result<PredictionStream> {
    schedule.validate_states(source.num_classes())?;
    let mut rng = seed::rng(seed);
    let mut features = Vec::with_capacity(length);
    let mut true_states = Vec::with_capacity(length);
    for i in 0..length {
        let state = schedule.state_at(i);
        features.push(source.draw_scene(state, &mut rng)?);
        true_states.push(state);
    }
    Ok(PredictionStream {
        features,
        true_states,
    })
}

/// Pool of pre-split multi-agent samples grouped by class; scenes are drawn
/// uniformly with replacement from the pool of the active class.
#[derive(Debug, Clone)]
pub struct ScenePool {
    /// `by_class[c][s][k]`
    by_class: Vec<Vec<Vec<Vec<f64>>>>,
    num_agents: usize,
}

impl ScenePool {
    /// `views[k][n]` is agent `k`'s view of sample `n`.
    pub fn new(views: &[Vec<Vec<f64>>], labels: &[usize], num_classes: usize) -> Result<Self> {
        let num_agents = views.len();
        if num_agents == 0 {
            return Err(Error::Empty("scene pool"));
        }
        if views.iter().any(|v| v.len() != labels.len()) {
            return Err(Error::invalid("every agent view must cover all samples"));
        }
        let mut by_class = vec![Vec::new(); num_classes];
        for (n, &y) in labels.iter().enumerate() {
            if y >= num_classes {
                return Err(Error::OutOfRange(format!("label {y}")));
            }
            by_class[y].push(views.iter().map(|v| v[n].clone()).collect());
        }
        Ok(ScenePool {
            by_class,
            num_agents,
        })
    }
}

impl SceneSource for ScenePool {
    fn num_agents(&self) -> usize {
        self.num_agents
    }

    fn num_classes(&self) -> usize {
        self.by_class.len()
    }

    fn draw_scene(&self, class: usize, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
        let pool = self
            .by_class
            .get(class)
            .filter(|p| !p.is_empty())
            .ok_or_else(|| Error::invalid(format!("class {class} missing from source")))?;
        Ok(pool[rng.random_range(0..pool.len())].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gaussian::GaussianSceneSpec;

    #[test]
    fn schedule_validation() {
        assert!(RegimeSchedule::new(vec![]).is_err());
        assert!(RegimeSchedule::new(vec![Segment { start: 1, state: 0 }]).is_err());
        assert!(RegimeSchedule::new(vec![
            Segment { start: 0, state: 0 },
            Segment { start: 0, state: 1 }
        ])
        .is_err());
    }

    #[test]
    fn square_wave_track() {
        let s = RegimeSchedule::cyclic(&[0, 1], 1000, 4000).unwrap();
        for i in 0..4000 {
            assert_eq!(s.state_at(i), (i / 1000) % 2);
        }
        assert_eq!(s.switch_times(), vec![1000, 2000, 3000]);
    }

    #[test]
    fn single_segment_and_determinism() {
        let scene = GaussianSceneSpec::four_agent_variance_scene().build().unwrap();
        let s = RegimeSchedule::constant(1);
        let a = prediction_stream(&scene, &s, 50, 4).unwrap();
        assert!(a.true_states.iter().all(|&c| c == 1));
        assert_eq!(a.features.len(), 50);
        assert_eq!(a.features[0].len(), 4);
        assert_eq!(a, prediction_stream(&scene, &s, 50, 4).unwrap());
        assert!(prediction_stream(&scene, &RegimeSchedule::constant(2), 5, 4).is_err());
    }

    #[test]
    fn pool_missing_class_errors() {
        let views = vec![vec![vec![0.0], vec![1.0]]];
        let pool = ScenePool::new(&views, &[0, 0], 2).unwrap();
        let mut rng = seed::rng(0);
        assert!(pool.draw_scene(0, &mut rng).is_ok());
        assert!(pool.draw_scene(1, &mut rng).is_err());
    }
}
