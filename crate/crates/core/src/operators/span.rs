use serde::Serialize;

/// `max(v) - min(v)`; zero for an empty slice.
pub fn span(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    hi - lo
}

/// Span seminorm of `a - b`.
pub fn span_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (lo, hi) = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
    if a.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Subtracts `v[anchor]` from every entry; the anchor entry becomes exactly 0.
pub fn anchor_in_place(v: &mut [f64], anchor: usize) {
    let c = v[anchor];
    v.iter_mut().for_each(|x| *x -= c);
    v[anchor] = 0.0;
}

/// A function on states, optionally pinned to zero at an anchor state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpanVector {
    values: Vec<f64>,
    anchor_index: Option<usize>,
}

impl SpanVector {
    pub fn raw(values: Vec<f64>) -> Self {
        Self { values, anchor_index: None }
    }

    pub fn anchored(mut values: Vec<f64>, anchor: usize) -> Self {
        anchor_in_place(&mut values, anchor);
        Self { values, anchor_index: Some(anchor) }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_anchored(&self) -> bool {
        self.anchor_index.is_some()
    }

    pub fn anchor_index(&self) -> Option<usize> {
        self.anchor_index
    }

    pub fn span(&self) -> f64 {
        span(&self.values)
    }
}

impl std::ops::Index<usize> for SpanVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}
