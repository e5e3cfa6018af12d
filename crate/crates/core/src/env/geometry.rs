use serde::{Deserialize, Serialize};

/// Logical units per grid cell. Grid coordinates times this factor give the
/// 160x210-style display coordinates.
pub const CELL_SIZE: i32 = 4;

/// Axis-aligned box in grid cells. Bounds are inclusive on both ends, so a
/// single cell is `x_min == x_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: i32,
    pub y_min: i32,
    pub x_max: i32,
    pub y_max: i32,
}

impl BBox {
    pub fn new(x_min: i32, y_min: i32, x_max: i32, y_max: i32) -> Self {
        debug_assert!(x_min <= x_max && y_min <= y_max, "degenerate box");
        BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    /// Box with its top-left corner at `(x, y)` spanning `w` by `h` cells.
    pub fn at(x: i32, y: i32, w: i32, h: i32) -> Self {
        BBox::new(x, y, x + w - 1, y + h - 1)
    }

    pub fn width(&self) -> i32 {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> i32 {
        self.y_max - self.y_min + 1
    }

    pub fn area(&self) -> i64 {
        self.width() as i64 * self.height() as i64
    }

    /// Inclusive overlap test: boxes sharing at least one cell (including a
    /// shared edge row or column) intersect.
    pub fn intersects(&self, other: &BBox) -> bool {
        self.x_min <= other.x_max
            && other.x_min <= self.x_max
            && self.y_min <= other.y_max
            && other.y_min <= self.y_max
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        if !self.intersects(other) {
            return None;
        }
        Some(BBox::new(
            self.x_min.max(other.x_min),
            self.y_min.max(other.y_min),
            self.x_max.min(other.x_max),
            self.y_max.min(other.y_max),
        ))
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox::new(
            self.x_min.min(other.x_min),
            self.y_min.min(other.y_min),
            self.x_max.max(other.x_max),
            self.y_max.max(other.y_max),
        )
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        match self.intersection(other) {
            None => 0.0,
            Some(inter) => {
                let i = inter.area() as f64;
                i / (self.area() as f64 + other.area() as f64 - i)
            }
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) as f64 / 2.0,
            (self.y_min + self.y_max) as f64 / 2.0,
        )
    }

    pub fn translate(&self, dx: i32, dy: i32) -> BBox {
        BBox::new(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)
    }

    pub fn within(&self, width: i32, height: i32) -> bool {
        self.x_min >= 0 && self.y_min >= 0 && self.x_max < width && self.y_max < height
    }

    /// Same box in logical display units.
    pub fn logical(&self) -> BBox {
        BBox::new(
            self.x_min * CELL_SIZE,
            self.y_min * CELL_SIZE,
            (self.x_max + 1) * CELL_SIZE - 1,
            (self.y_max + 1) * CELL_SIZE - 1,
        )
    }
}
