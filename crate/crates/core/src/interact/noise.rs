use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{BBox, GameObject};

/// A located, labelled box as an object detector would report it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub class_name: &'static str,
    pub confidence: f64,
}

impl From<&GameObject> for Detection {
    fn from(o: &GameObject) -> Self {
        Detection {
            bbox: o.bbox,
            class_name: o.class_name,
            confidence: 1.0,
        }
    }
}

/// Detector failure model: dropped boxes, wrong labels, and nearby boxes
/// fused into one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub miss_prob: f64,
    pub flip_prob: f64,
    /// Boxes whose centres are closer than this (in cells) are fused.
    pub merge_dist: u32,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid noise model: {0}")]
pub struct NoiseError(String);

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        miss_prob: 0.0,
        flip_prob: 0.0,
        merge_dist: 0,
        seed: 0,
    };

    pub fn new(miss_prob: f64, flip_prob: f64, merge_dist: u32, seed: u64) -> Result<Self, NoiseError> {
        let m = NoiseModel {
            miss_prob,
            flip_prob,
            merge_dist,
            seed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        for (name, p) in [("miss", self.miss_prob), ("flip", self.flip_prob)] {
            if !(0.0..1.0).contains(&p) {
                return Err(NoiseError(format!("{name} probability {p} not in [0, 1)")));
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.miss_prob == 0.0 && self.flip_prob == 0.0 && self.merge_dist == 0
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "miss={},flip={},merge={}",
            self.miss_prob, self.flip_prob, self.merge_dist
        )
    }
}

/// Parses the CLI form `miss=0.1,flip=0.2,merge=2[,seed=7]`. Missing keys
/// default to zero.
impl FromStr for NoiseModel {
    type Err = NoiseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut m = NoiseModel::NONE;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| NoiseError(format!("expected key=value, got `{part}`")))?;
            let bad = |_| NoiseError(format!("bad value for {k}: `{v}`"));
            match k.trim() {
                "miss" => m.miss_prob = v.trim().parse().map_err(bad)?,
                "flip" => m.flip_prob = v.trim().parse().map_err(bad)?,
                "merge" => m.merge_dist = v.trim().parse().map_err(|_| NoiseError(format!("bad merge `{v}`")))?,
                "seed" => m.seed = v.trim().parse().map_err(|_| NoiseError(format!("bad seed `{v}`")))?,
                other => return Err(NoiseError(format!("unknown noise key `{other}`"))),
            }
        }
        m.validate()?;
        Ok(m)
    }
}

/// Turn ground-truth objects into noisy detections.
///
/// Non-agent objects are dropped with `miss_prob`; survivors have their label
/// swapped for a uniformly chosen different class from `vocabulary` with
/// `flip_prob`. Detections (the agent included) whose centres lie closer than
/// `merge_dist` are then fused into their union box under one member's label.
/// Randomness is a pure function of `(noise.seed, step)`.
pub fn corrupt(
    objects: &[GameObject],
    noise: &NoiseModel,
    step: u64,
    vocabulary: &[&'static str],
) -> Vec<Detection> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut dets = Vec::with_capacity(objects.len());
    for o in objects {
        if o.is_agent {
            dets.push(Detection::from(o));
            continue;
        }
        if noise.miss_prob > 0.0 && rng.gen::<f64>() < noise.miss_prob {
            continue;
        }
        let mut d = Detection::from(o);
        if noise.flip_prob > 0.0 && rng.gen::<f64>() < noise.flip_prob {
            let others: Vec<&'static str> =
                vocabulary.iter().copied().filter(|c| *c != o.class_name).collect();
            if let Some(c) = others.choose(&mut rng) {
                d.class_name = c;
            }
        }
        dets.push(d);
    }
    if noise.merge_dist > 0 {
        dets = merge_close(dets, noise.merge_dist as f64, &mut rng);
    }
    dets
}

fn merge_close(dets: Vec<Detection>, dist: f64, rng: &mut ChaCha8Rng) -> Vec<Detection> {
    let n = dets.len();
    // single-linkage clusters via union-find
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        let (xi, yi) = dets[i].bbox.center();
        for j in i + 1..n {
            let (xj, yj) = dets[j].bbox.center();
            if ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt() < dist {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b] = a;
                }
            }
        }
    }
    let mut clusters: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        match clusters.iter_mut().find(|(r, _)| *r == root) {
            Some((_, members)) => members.push(i),
            None => clusters.push((root, vec![i])),
        }
    }
    clusters
        .into_iter()
        .map(|(_, members)| {
            if members.len() == 1 {
                return dets[members[0]];
            }
            let bbox = members
                .iter()
                .skip(1)
                .fold(dets[members[0]].bbox, |acc, &m| acc.union(&dets[m].bbox));
            let label = dets[*members.choose(rng).unwrap()].class_name;
            Detection {
                bbox,
                class_name: label,
                confidence: 1.0 / members.len() as f64,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(id: u32, class: &'static str, b: BBox, agent: bool) -> GameObject {
        GameObject {
            id,
            class_name: class,
            bbox: b,
            is_agent: agent,
        }
    }

    fn scene() -> Vec<GameObject> {
        vec![
            obj(0, "skier", BBox::at(10, 6, 2, 3), true),
            obj(1, "tree", BBox::at(12, 6, 3, 3), false),
            obj(2, "gate", BBox::at(20, 30, 10, 1), false),
        ]
    }

    #[test]
    fn zero_noise_is_identity() {
        let objs = scene();
        let dets = corrupt(&objs, &NoiseModel::NONE, 17, &["tree", "gate"]);
        let expected: Vec<Detection> = objs.iter().map(Detection::from).collect();
        assert_eq!(dets, expected);
    }

    #[test]
    fn certain_miss_leaves_only_agent() {
        let noise = NoiseModel {
            miss_prob: 0.999_999_999,
            ..NoiseModel::NONE
        };
        for step in 0..50 {
            let dets = corrupt(&scene(), &noise, step, &["tree", "gate"]);
            assert_eq!(dets.len(), 1);
            assert_eq!(dets[0].class_name, "skier");
        }
    }

    #[test]
    fn adjacent_boxes_fuse() {
        let noise = NoiseModel {
            merge_dist: 5,
            ..NoiseModel::NONE
        };
        let dets = corrupt(&scene(), &noise, 0, &["tree", "gate"]);
        assert_eq!(dets.len(), 2);
        assert_eq!(dets[0].bbox, BBox::new(10, 6, 14, 8));
        assert!(["skier", "tree"].contains(&dets[0].class_name));
    }

    #[test]
    fn flipped_label_is_another_class() {
        let noise = NoiseModel {
            flip_prob: 0.999_999_999,
            ..NoiseModel::NONE
        };
        let dets = corrupt(&scene(), &noise, 3, &["tree", "gate"]);
        assert_eq!(dets[1].class_name, "gate");
        assert_eq!(dets[2].class_name, "tree");
    }

    #[test]
    fn parse_cli_form() {
        let m: NoiseModel = "miss=0.1,flip=0.2,merge=2".parse().unwrap();
        assert_eq!((m.miss_prob, m.flip_prob, m.merge_dist), (0.1, 0.2, 2));
        assert!("miss=1.0".parse::<NoiseModel>().is_err());
        assert!("blur=3".parse::<NoiseModel>().is_err());
    }
}
