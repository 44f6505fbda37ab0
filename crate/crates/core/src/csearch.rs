//! Contextual search: guess `⟨x, p⟩` for a hidden vector `p` from high/low
//! feedback.
//!
//! Each round picks the scale index from the knowledge set's width in the
//! query direction, guesses the volume median of the expanded set
//! `K + z(i)B`, and intersects `K` with the halfspace the feedback reveals.

use crate::error::{Error, Result};
use crate::knowledge::{KnowledgeSet, ScaleSchedule};
use crate::numerics::lp::Relation;
use crate::numerics::mix_seed;
use crate::numerics::sampling::SamplerConfig;

/// Feedback on a guess `g`: `Low` means `⟨x, p⟩ ≥ g`, `High` means
/// `⟨x, p⟩ ≤ g`. An exact hit is reported as `Low`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feedback {
    Low,
    High,
}

impl Feedback {
    /// Truthful feedback for `value = ⟨x, p⟩`.
    pub fn truthful(value: f64, guess: f64) -> Self {
        if value >= guess {
            Feedback::Low
        } else {
            Feedback::High
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CSearchState {
    knowledge: KnowledgeSet,
    schedule: ScaleSchedule,
    sampler: SamplerConfig,
    seed: u64,
    rounds: usize,
}

impl CSearchState {
    pub fn new(schedule: ScaleSchedule, sampler: SamplerConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            knowledge: KnowledgeSet::new(schedule.d)?,
            schedule,
            sampler,
            seed,
            rounds: 0,
        })
    }

    pub fn knowledge(&self) -> &KnowledgeSet {
        &self.knowledge
    }

    pub fn schedule(&self) -> &ScaleSchedule {
        &self.schedule
    }

    /// Number of feedback events absorbed.
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn width(&self, x: &[f64]) -> Result<f64> {
        self.knowledge.width(x)
    }

    /// Scale index for direction `x`.
    pub fn index_for(&self, x: &[f64]) -> Result<i32> {
        Ok(self.schedule.select_index(self.knowledge.width(x)?))
    }

    /// The guess `g` and the scale index `i` used for it. The sampler seed is
    /// a function of the state, so repeated calls agree.
    pub fn guess(&mut self, x: &[f64]) -> Result<(f64, i32)> {
        let i = self.index_for(x)?;
        let seed = mix_seed(self.seed, self.knowledge.active_cuts() as u64);
        let g = self
            .knowledge
            .median_guess(i, x, &self.schedule, &self.sampler, seed)?;
        Ok((g, i))
    }

    /// Applies the halfspace revealed by `feedback` on the guess `g`.
    pub fn feedback(&mut self, x: &[f64], g: f64, feedback: Feedback) -> Result<()> {
        if !g.is_finite() {
            return Err(Error::Input("guess is not finite".into()));
        }
        let relation = match feedback {
            Feedback::Low => Relation::Ge,
            Feedback::High => Relation::Le,
        };
        self.knowledge.cut(x, g, relation)?;
        self.rounds += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::dot;
    use crate::numerics::sampling::{rng_from, uniform_in_ball};

    fn state(d: usize, seed: u64) -> CSearchState {
        let schedule = ScaleSchedule::for_horizon(d, 1.0, 1000).unwrap();
        CSearchState::new(schedule, SamplerConfig::new(2048, 128), seed).unwrap()
    }

    #[test]
    fn fresh_guess_is_centered_and_repeatable() {
        let mut s = state(3, 1);
        let (g, i) = s.guess(&[0.0, 1.0, 0.0]).unwrap();
        assert!(g.abs() < 0.2, "{g}");
        assert_eq!(i, -2);
        assert_eq!(s.guess(&[0.0, 1.0, 0.0]).unwrap(), (g, i));
    }

    #[test]
    fn index_follows_width() {
        let mut s = state(1, 2);
        s.feedback(&[1.0], 0.0, Feedback::Low).unwrap();
        s.feedback(&[1.0], 0.3, Feedback::High).unwrap();
        assert_eq!(s.guess(&[1.0]).unwrap().1, 1);
    }

    #[test]
    fn one_dimensional_feedback() {
        let mut s = state(1, 3);
        s.feedback(&[1.0], 0.0, Feedback::Low).unwrap();
        assert_eq!(s.knowledge().range(&[1.0]).unwrap(), (0.0, 2.0));
        let mut t = state(1, 3);
        t.feedback(&[1.0], 0.7, Feedback::truthful(0.5, 0.7)).unwrap();
        assert_eq!(t.knowledge().range(&[1.0]).unwrap(), (-2.0, 0.7));
        assert!(t.knowledge().contains(&[0.5]).unwrap());
    }

    #[test]
    fn truthful_runs_keep_the_hidden_vector() {
        let mut rng = rng_from(17);
        let p: Vec<f64> = uniform_in_ball(&mut rng, 3).iter().map(|x| 2.0 * x).collect();
        let mut s = state(3, 4);
        for _ in 0..60 {
            let x = uniform_in_ball(&mut rng, 3);
            let (g, _) = s.guess(&x).unwrap();
            let value = dot(&x, &p);
            let w = s.width(&x).unwrap();
            assert!((g - value).abs() <= w + 1e-12);
            s.feedback(&x, g, Feedback::truthful(value, g)).unwrap();
            assert!(s.knowledge().contains(&p).unwrap());
        }
        assert_eq!(s.rounds(), 60);
    }
}
