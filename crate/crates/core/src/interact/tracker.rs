use serde::Serialize;

use super::noise::Detection;
use crate::env::BBox;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.3;
pub const DEFAULT_MAX_MISSES: u32 = 5;
/// Centre distance (cells) for the fallback association of boxes that moved
/// clear of their previous footprint.
pub const DEFAULT_GATE_DIST: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Track {
    pub track_id: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
    /// Last observed displacement of the box's top-left corner.
    pub velocity: (i32, i32),
    /// Votes in first-seen order, so ties resolve to the earliest class.
    pub class_votes: Vec<(&'static str, u32)>,
    pub age: u32,
    /// Consecutive updates without a matching detection.
    pub misses: u32,
}

impl Track {
    fn spawn(track_id: u32, d: &Detection) -> Self {
        Track {
            track_id,
            bbox: d.bbox,
            velocity: (0, 0),
            class_votes: vec![(d.class_name, 1)],
            age: 1,
            misses: 0,
        }
    }

    pub fn predicted(&self) -> BBox {
        self.bbox.translate(self.velocity.0, self.velocity.1)
    }

    pub fn dominant_class(&self) -> &'static str {
        let mut best = self.class_votes[0];
        for &(c, n) in &self.class_votes[1..] {
            if n > best.1 {
                best = (c, n);
            }
        }
        best.0
    }

    pub fn votes_for(&self, class: &str) -> u32 {
        self.class_votes
            .iter()
            .find(|(c, _)| *c == class)
            .map_or(0, |(_, n)| *n)
    }

    fn vote(&mut self, class: &'static str) {
        match self.class_votes.iter_mut().find(|(c, _)| *c == class) {
            Some((_, n)) => *n += 1,
            None => self.class_votes.push((class, 1)),
        }
    }
}

/// Greedy IoU tracker with constant-velocity prediction and class voting.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub iou_threshold: f64,
    pub max_misses: u32,
    pub gate_dist: f64,
    tracks: Vec<Track>,
    next_id: u32,
}

impl Default for Tracker {
    fn default() -> Self {
        Tracker::new(DEFAULT_IOU_THRESHOLD, DEFAULT_MAX_MISSES)
    }
}

impl Tracker {
    pub fn new(iou_threshold: f64, max_misses: u32) -> Self {
        Tracker {
            iou_threshold,
            max_misses,
            gate_dist: DEFAULT_GATE_DIST,
            tracks: Vec::new(),
            next_id: 0,
        }
    }

    fn absorb(&mut self, ti: usize, d: &Detection) {
        let t = &mut self.tracks[ti];
        t.velocity = (d.bbox.x_min - t.bbox.x_min, d.bbox.y_min - t.bbox.y_min);
        t.bbox = d.bbox;
        t.vote(d.class_name);
        t.age += 1;
        t.misses = 0;
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn clear(&mut self) {
        self.tracks.clear();
    }

    /// Match detections to tracks, highest IoU first, then pair leftovers of
    /// equal size by nearest centre within `gate_dist` (small boxes moving a full body
    /// length per tick never overlap their prediction until a velocity is
    /// known). Matched tracks take the detection's box and a vote for its
    /// class; unmatched tracks count a miss and are dropped after more than
    /// `max_misses` in a row; unmatched detections start new tracks.
    pub fn update(&mut self, detections: &[Detection]) {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, t) in self.tracks.iter().enumerate() {
            let pred = t.predicted();
            for (di, d) in detections.iter().enumerate() {
                let iou = pred.iou(&d.bbox);
                if iou >= self.iou_threshold && iou > 0.0 {
                    pairs.push((iou, ti, di));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut track_done = vec![false; self.tracks.len()];
        let mut det_done = vec![false; detections.len()];
        for (_, ti, di) in pairs {
            if track_done[ti] || det_done[di] {
                continue;
            }
            track_done[ti] = true;
            det_done[di] = true;
            self.absorb(ti, &detections[di]);
        }

        let mut near: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, t) in self.tracks.iter().enumerate() {
            if track_done[ti] {
                continue;
            }
            let (tx, ty) = t.predicted().center();
            for (di, d) in detections.iter().enumerate() {
                if det_done[di] {
                    continue;
                }
                if d.bbox.width() != t.bbox.width() || d.bbox.height() != t.bbox.height() {
                    continue;
                }
                let (dx, dy) = d.bbox.center();
                let dist = ((tx - dx).powi(2) + (ty - dy).powi(2)).sqrt();
                if dist <= self.gate_dist {
                    near.push((dist, ti, di));
                }
            }
        }
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (_, ti, di) in near {
            if track_done[ti] || det_done[di] {
                continue;
            }
            track_done[ti] = true;
            det_done[di] = true;
            self.absorb(ti, &detections[di]);
        }
        for (ti, t) in self.tracks.iter_mut().enumerate() {
            if !track_done[ti] {
                t.misses += 1;
                t.age += 1;
            }
        }
        let max_misses = self.max_misses;
        self.tracks.retain(|t| t.misses <= max_misses);
        for (di, d) in detections.iter().enumerate() {
            if !det_done[di] {
                self.tracks.push(Track::spawn(self.next_id, d));
                self.next_id += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(b: BBox, class: &'static str) -> Detection {
        Detection {
            bbox: b,
            class_name: class,
            confidence: 1.0,
        }
    }

    #[test]
    fn static_object_accumulates_votes() {
        let mut t = Tracker::default();
        let b = BBox::at(5, 5, 3, 3);
        for _ in 0..10 {
            t.update(&[det(b, "tree")]);
        }
        assert_eq!(t.tracks().len(), 1);
        assert_eq!(t.tracks()[0].votes_for("tree"), 10);
    }

    #[test]
    fn majority_label_wins_over_flips() {
        let mut t = Tracker::default();
        let b = BBox::at(5, 5, 3, 3);
        for i in 0..10 {
            let class = if i == 2 || i == 7 { "gate" } else { "tree" };
            t.update(&[det(b, class)]);
        }
        let tr = &t.tracks()[0];
        assert_eq!((tr.votes_for("tree"), tr.votes_for("gate")), (8, 2));
        assert_eq!(tr.dominant_class(), "tree");
    }

    #[test]
    fn ties_go_to_the_first_class_seen() {
        let mut t = Tracker::default();
        let b = BBox::at(0, 0, 2, 2);
        for class in ["gate", "tree", "tree", "gate"] {
            t.update(&[det(b, class)]);
        }
        assert_eq!(t.tracks()[0].dominant_class(), "gate");
    }

    #[test]
    fn track_survives_five_misses_and_dies_on_sixth() {
        let mut t = Tracker::default();
        t.update(&[det(BBox::at(5, 5, 3, 3), "tree")]);
        for _ in 0..5 {
            t.update(&[]);
        }
        assert_eq!(t.tracks().len(), 1);
        assert_eq!(t.tracks()[0].misses, 5);
        t.update(&[]);
        assert!(t.tracks().is_empty());
    }

    #[test]
    fn constant_velocity_keeps_identity_of_small_mover() {
        let mut t = Tracker::default();
        for k in 0..6 {
            t.update(&[det(BBox::at(2 + k, 2 + k, 1, 1), "ball")]);
        }
        // 1x1 boxes never overlap between ticks; the centre fallback links the
        // first move and the velocity prediction carries the rest
        assert_eq!(t.tracks().len(), 1);
        assert_eq!(t.tracks()[0].track_id, 0);
        assert_eq!(t.tracks()[0].age, 6);
        assert_eq!(t.tracks()[0].velocity, (1, 1));
    }

    #[test]
    fn greedy_prefers_highest_overlap() {
        let mut t = Tracker::default();
        t.update(&[det(BBox::at(0, 0, 4, 4), "a"), det(BBox::at(10, 0, 4, 4), "b")]);
        // both detections shift right by one; each must stay with its own track
        t.update(&[det(BBox::at(11, 0, 4, 4), "b"), det(BBox::at(1, 0, 4, 4), "a")]);
        let tr = t.tracks();
        assert_eq!(tr.len(), 2);
        assert_eq!(tr[0].votes_for("a"), 2);
        assert_eq!(tr[1].votes_for("b"), 2);
    }
}
