//! Zero-level contour extraction on a rectangular grid (marching squares)
//! and seed generation from crossings of the real- and imaginary-part contours.

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Segment {
    pub a: Point,
    pub b: Point,
}

/// Corner values in counter-clockwise order starting bottom-left:
/// `[(x0,y0), (x1,y0), (x1,y1), (x0,y1)]`.
pub(crate) struct Cell {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Cell {
    fn corner(&self, k: usize) -> Point {
        match k {
            0 => Point { x: self.x0, y: self.y0 },
            1 => Point { x: self.x1, y: self.y0 },
            2 => Point { x: self.x1, y: self.y1 },
            _ => Point { x: self.x0, y: self.y1 },
        }
    }
}

#[inline]
fn positive(v: f64) -> bool {
    v >= 0.0
}

/// Zero-level segments of a scalar field inside one cell (0, 1 or 2 of them).
pub(crate) fn cell_segments(cell: &Cell, v: [f64; 4]) -> Vec<Segment> {
    // Edge k joins corner k and corner (k+1)%4.
    let crossing = |k: usize| -> Option<Point> {
        let (i, j) = (k, (k + 1) % 4);
        if positive(v[i]) == positive(v[j]) {
            return None;
        }
        let t = v[i] / (v[i] - v[j]);
        let (p, q) = (cell.corner(i), cell.corner(j));
        Some(Point {
            x: p.x + t * (q.x - p.x),
            y: p.y + t * (q.y - p.y),
        })
    };
    let hits: Vec<(usize, Point)> = (0..4).filter_map(|k| crossing(k).map(|p| (k, p))).collect();
    match hits.len() {
        2 => vec![Segment {
            a: hits[0].1,
            b: hits[1].1,
        }],
        4 => {
            // Saddle: resolve with the cell-centre average.
            let centre = 0.25 * (v[0] + v[1] + v[2] + v[3]);
            let p = |k: usize| hits[k].1;
            if positive(centre) == positive(v[0]) {
                // corners 1 and 3 are cut off
                vec![Segment { a: p(0), b: p(1) }, Segment { a: p(2), b: p(3) }]
            } else {
                vec![Segment { a: p(3), b: p(0) }, Segment { a: p(1), b: p(2) }]
            }
        }
        _ => Vec::new(),
    }
}

/// Intersection of two segments, accepting a small overshoot past their ends.
pub(crate) fn intersect(s: &Segment, t: &Segment, slack: f64) -> Option<Point> {
    let r = (s.b.x - s.a.x, s.b.y - s.a.y);
    let q = (t.b.x - t.a.x, t.b.y - t.a.y);
    let denom = r.0 * q.1 - r.1 * q.0;
    if denom == 0.0 {
        return None;
    }
    let w = (t.a.x - s.a.x, t.a.y - s.a.y);
    let u = (w.0 * q.1 - w.1 * q.0) / denom;
    let v = (w.0 * r.1 - w.1 * r.0) / denom;
    let range = -slack..=1.0 + slack;
    if range.contains(&u) && range.contains(&v) {
        Some(Point {
            x: s.a.x + u * r.0,
            y: s.a.y + u * r.1,
        })
    } else {
        None
    }
}

/// Midpoint of the closest pair of endpoints; used as a fallback seed when the
/// linearised contours narrowly miss each other inside a cell.
pub(crate) fn near_miss(s: &Segment, t: &Segment) -> Point {
    let candidates = [(s.a, t.a), (s.a, t.b), (s.b, t.a), (s.b, t.b)];
    let (p, q) = candidates
        .iter()
        .min_by(|(p1, q1), (p2, q2)| {
            let d1 = (p1.x - q1.x).hypot(p1.y - q1.y);
            let d2 = (p2.x - q2.x).hypot(p2.y - q2.y);
            d1.total_cmp(&d2)
        })
        .copied()
        .expect("four candidates");
    Point {
        x: 0.5 * (p.x + q.x),
        y: 0.5 * (p.y + q.y),
    }
}
