use serde::Serialize;

/// One lower-hull segment, `slope = dβ/dα`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
  pub from: [f64; 2],
  pub to: [f64; 2],
  pub slope: f64,
}

/// Lower-left boundary of the union of positive quadrants displaced to each `(α, β)` point.
///
/// Edges run left to right with strictly increasing (negative) slopes. `xbar = −1/slope` of the
/// steepest edge, absent when there are no edges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonPolygon {
  pub points: Vec<[f64; 2]>,
  pub edges: Vec<Edge>,
  pub xbar: Option<f64>,
}

impl NewtonPolygon {
  pub fn steepest_slope(&self) -> Option<f64> {
    self.edges.first().map(|e| e.slope)
  }

  /// Whether `p` lies on or above every edge's supporting line, within `tol`.
  pub fn supports(&self, p: [f64; 2], tol: f64) -> bool {
    self.edges.iter().all(|e| p[1] >= e.from[1] + e.slope * (p[0] - e.from[0]) - tol)
  }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
  (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn edge(a: [f64; 2], b: [f64; 2]) -> Edge {
  Edge { from: a, to: b, slope: (b[1] - a[1]) / (b[0] - a[0]) }
}

fn finish(points: &[[f64; 2]], edges: Vec<Edge>) -> NewtonPolygon {
  let xbar = edges.first().map(|e| -1.0 / e.slope);
  NewtonPolygon { points: points.to_vec(), edges, xbar }
}

/// Lower convex hull by monotone chain, truncated where the slope stops being negative.
/// Collinear interior points are merged into a single edge.
pub fn newton_polygon(points: &[[f64; 2]]) -> NewtonPolygon {
  let mut pts = points.to_vec();
  pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
  pts.dedup();
  let mut hull: Vec<[f64; 2]> = Vec::new();
  for p in pts {
    while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
      hull.pop();
    }
    hull.push(p);
  }
  let mut edges = Vec::new();
  for w in hull.windows(2) {
    // equal α only occurs at the start when a lower point shares the leftmost abscissa
    if w[1][0] == w[0][0] {
      continue;
    }
    let e = edge(w[0], w[1]);
    if e.slope >= 0.0 {
      break;
    }
    edges.push(e);
  }
  finish(points, edges)
}

/// All-pairs supporting-line hull: a segment is an edge when its line has negative slope,
/// no point lies strictly below it, and its endpoints are the extreme points on that line.
pub fn brute_force_edges(points: &[[f64; 2]]) -> NewtonPolygon {
  let mut edges: Vec<Edge> = Vec::new();
  for &a in points {
    for &b in points {
      if !(a[0] < b[0] && a[1] > b[1]) {
        continue;
      }
      if points.iter().any(|&p| cross(a, b, p) < 0.0) {
        continue;
      }
      let on: Vec<[f64; 2]> = points.iter().copied().filter(|&p| cross(a, b, p) == 0.0).collect();
      let lo = on.iter().copied().min_by(|p, q| p[0].total_cmp(&q[0])).unwrap();
      let hi = on.iter().copied().max_by(|p, q| p[0].total_cmp(&q[0])).unwrap();
      if lo == a && hi == b {
        edges.push(edge(a, b));
      }
    }
  }
  edges.sort_by(|p, q| p.from[0].total_cmp(&q.from[0]));
  edges.dedup();
  finish(points, edges)
}
