//! Agent-object contact detection and auxiliary reward shaping.
//!
//! Two grounding paths feed the same contact logic. The ground-truth path
//! reads object classes and ids straight from the environment. The noisy path
//! corrupts those objects the way an unsupervised detector plus zero-shot
//! classifier would, then recovers stable identities with an IoU tracker and
//! labels each track by its most frequent class.

mod noise;
mod tracker;

use std::collections::BTreeSet;

use log::warn;
use serde::{Deserialize, Serialize};

pub use noise::{corrupt, Detection, NoiseError, NoiseModel};
pub use tracker::{Track, Tracker, DEFAULT_IOU_THRESHOLD, DEFAULT_MAX_MISSES};

use crate::env::{BBox, GameKind, StepResult};
use crate::reason::RewardTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub step: u64,
    pub object_class: String,
    pub track_id: u32,
    pub new_contact: bool,
}

/// One line of the `--log-events` JSONL stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLogLine {
    pub step: u64,
    pub object_class: String,
    pub track_id: u32,
    pub reward: f64,
}

/// Something the agent can touch this tick.
#[derive(Debug, Clone, Copy)]
pub struct Target {
    pub id: u32,
    pub class_name: &'static str,
    pub bbox: BBox,
    /// False when the tracker kept the target alive without a detection.
    pub observed: bool,
}

impl From<&Track> for Target {
    fn from(t: &Track) -> Self {
        Target {
            id: t.track_id,
            class_name: t.dominant_class(),
            bbox: t.bbox,
            observed: t.misses == 0,
        }
    }
}

/// Ids of targets currently touching the agent.
pub type ContactState = BTreeSet<u32>;

/// Rising-edge contact detection. An unobserved target keeps its previous
/// contact flag so a one-tick detector dropout does not re-trigger.
pub fn detect_events<I>(
    agent_box: &BBox,
    targets: I,
    contact_state: &ContactState,
    step: u64,
) -> (Vec<InteractionEvent>, ContactState)
where
    I: IntoIterator<Item = Target>,
{
    let mut events = Vec::new();
    let mut next = ContactState::new();
    for t in targets {
        let touching = if t.observed {
            agent_box.intersects(&t.bbox)
        } else {
            contact_state.contains(&t.id)
        };
        if touching {
            if !contact_state.contains(&t.id) {
                events.push(InteractionEvent {
                    step,
                    object_class: t.class_name.to_string(),
                    track_id: t.id,
                    new_contact: true,
                });
            }
            next.insert(t.id);
        }
    }
    (events, next)
}

/// Sum of table rewards over events. Classes missing from the table count 0.
pub fn shape(events: &[InteractionEvent], table: &RewardTable) -> f64 {
    events
        .iter()
        .map(|e| match table.reward_for(&e.object_class) {
            Some(r) => r,
            None => {
                warn!("no reward rule for `{}`; contributing 0", e.object_class);
                0.0
            }
        })
        .sum()
}

#[derive(Debug, Clone)]
enum Grounding {
    GroundTruth,
    Noisy { noise: NoiseModel, tracker: Tracker },
}

/// Per-episode interaction pipeline: grounding, tracking, debounce.
#[derive(Debug, Clone)]
pub struct InteractionDetector {
    agent_class: &'static str,
    vocabulary: Vec<&'static str>,
    grounding: Grounding,
    contacts: ContactState,
    // drives the noise stream; never reset so episodes see fresh noise
    ticks: u64,
}

impl InteractionDetector {
    pub fn ground_truth(game: GameKind) -> Self {
        Self::build(game, Grounding::GroundTruth)
    }

    pub fn noisy(game: GameKind, noise: NoiseModel) -> Self {
        Self::build(
            game,
            Grounding::Noisy {
                noise,
                tracker: Tracker::default(),
            },
        )
    }

    pub fn new(game: GameKind, noise: Option<NoiseModel>) -> Self {
        match noise {
            Some(n) => Self::noisy(game, n),
            None => Self::ground_truth(game),
        }
    }

    fn build(game: GameKind, grounding: Grounding) -> Self {
        InteractionDetector {
            agent_class: game.agent_class(),
            vocabulary: game.object_classes().to_vec(),
            grounding,
            contacts: ContactState::new(),
            ticks: 0,
        }
    }

    /// Start of an episode: forget tracks and contacts, then take the initial
    /// frame's contacts as already established.
    pub fn prime(&mut self, initial: &StepResult) {
        self.contacts.clear();
        if let Grounding::Noisy { tracker, .. } = &mut self.grounding {
            tracker.clear();
        }
        self.observe(initial);
    }

    /// Events for this tick, tagged with the episode step from `result.info`.
    pub fn observe(&mut self, result: &StepResult) -> Vec<InteractionEvent> {
        self.ticks += 1;
        let step = result.info.step;
        let (events, next) = match &mut self.grounding {
            Grounding::GroundTruth => {
                let agent = result.agent().bbox;
                let targets = result.objects.iter().filter(|o| !o.is_agent).map(|o| Target {
                    id: o.id,
                    class_name: o.class_name,
                    bbox: o.bbox,
                    observed: true,
                });
                detect_events(&agent, targets, &self.contacts, step)
            }
            Grounding::Noisy { noise, tracker } => {
                let dets = corrupt(&result.objects, noise, self.ticks, &self.vocabulary);
                let agent = dets.iter().find(|d| d.class_name == self.agent_class).map(|d| d.bbox);
                let others: Vec<Detection> = dets
                    .into_iter()
                    .filter(|d| d.class_name != self.agent_class)
                    .collect();
                tracker.update(&others);
                match agent {
                    Some(a) => detect_events(
                        &a,
                        tracker.tracks().iter().map(Target::from),
                        &self.contacts,
                        step,
                    ),
                    // agent lost in a merged box: nothing can be judged this tick
                    None => (Vec::new(), self.contacts.clone()),
                }
            }
        };
        self.contacts = next;
        events
    }

    pub fn tracks(&self) -> &[Track] {
        match &self.grounding {
            Grounding::Noisy { tracker, .. } => tracker.tracks(),
            Grounding::GroundTruth => &[],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reason::{RewardRule, Verdict};

    fn target(id: u32, b: BBox) -> Target {
        Target {
            id,
            class_name: "pellet",
            bbox: b,
            observed: true,
        }
    }

    fn table() -> RewardTable {
        RewardTable::from_rules(
            5.0,
            5.0,
            vec![
                RewardRule::new("ghost", Verdict::No, 5.0, 5.0),
                RewardRule::new("pellet", Verdict::Yes, 5.0, 5.0),
            ],
        )
        .unwrap()
    }

    fn event(class: &str) -> InteractionEvent {
        InteractionEvent {
            step: 0,
            object_class: class.into(),
            track_id: 0,
            new_contact: true,
        }
    }

    #[test]
    fn disjoint_boxes_never_fire() {
        let agent = BBox::at(0, 0, 2, 2);
        let (ev, st) = detect_events(&agent, [target(1, BBox::at(5, 5, 1, 1))], &ContactState::new(), 0);
        assert!(ev.is_empty() && st.is_empty());
    }

    #[test]
    fn continuous_overlap_fires_once() {
        let agent = BBox::at(0, 0, 2, 2);
        let mut st = ContactState::new();
        let mut total = 0;
        for step in 0..10 {
            let (ev, next) = detect_events(&agent, [target(1, agent)], &st, step);
            if step == 0 {
                assert_eq!(ev.len(), 1);
            }
            total += ev.len();
            st = next;
        }
        assert_eq!(total, 1);
    }

    #[test]
    fn contact_windows_fire_on_each_rising_edge() {
        let agent = BBox::at(0, 0, 2, 2);
        let mut st = ContactState::new();
        let mut fired = Vec::new();
        for step in 0..15u64 {
            let b = if (3..=7).contains(&step) || step == 12 {
                BBox::at(1, 1, 2, 2)
            } else {
                BBox::at(9, 9, 2, 2)
            };
            let (ev, next) = detect_events(&agent, [target(4, b)], &st, step);
            fired.extend(ev.iter().map(|e| e.step));
            st = next;
        }
        assert_eq!(fired, vec![3, 12]);
    }

    #[test]
    fn unobserved_target_holds_contact() {
        let agent = BBox::at(0, 0, 2, 2);
        let (_, st) = detect_events(&agent, [target(1, agent)], &ContactState::new(), 0);
        let mut held = target(1, BBox::at(20, 20, 1, 1));
        held.observed = false;
        let (ev, st) = detect_events(&agent, [held], &st, 1);
        assert!(ev.is_empty());
        let (ev, _) = detect_events(&agent, [target(1, agent)], &st, 2);
        assert!(ev.is_empty());
    }

    #[test]
    fn shaping_sums_table_rewards() {
        let t = table();
        assert_eq!(shape(&[event("ghost")], &t), -5.0);
        assert_eq!(shape(&[event("pellet"), event("pellet")], &t), 10.0);
        assert_eq!(shape(&[event("fruit")], &t), 0.0);
        assert_eq!(shape(&[], &t), 0.0);
    }
}
