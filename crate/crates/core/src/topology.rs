//! Place connectivity, h-connected sets, the action-place gate matrix and its
//! Kronecker expansion into a weight mask.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LivrError, Result};
use crate::layout::{PlaceCategory, SegmentationMap, NUM_PLACES};

/// A set of places stored as a 6-bit mask indexed by [`PlaceCategory::index`].
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct PlaceSet(u8);

impl PlaceSet {
    pub const EMPTY: PlaceSet = PlaceSet(0);
    pub const ALL: PlaceSet = PlaceSet(0b11_1111);

    pub fn single(p: PlaceCategory) -> Self {
        PlaceSet(1 << p.index())
    }

    pub fn contains(self, p: PlaceCategory) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn insert(&mut self, p: PlaceCategory) {
        self.0 |= 1 << p.index();
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: PlaceSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = PlaceCategory> {
        PlaceCategory::ALL.into_iter().filter(move |&p| self.contains(p))
    }
}

impl FromIterator<PlaceCategory> for PlaceSet {
    fn from_iter<I: IntoIterator<Item = PlaceCategory>>(iter: I) -> Self {
        let mut s = PlaceSet::EMPTY;
        for p in iter {
            s.insert(p);
        }
        s
    }
}

impl fmt::Debug for PlaceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(PlaceCategory::name)).finish()
    }
}

impl Serialize for PlaceSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for PlaceSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Vec::<PlaceCategory>::deserialize(d)?.into_iter().collect())
    }
}

/// Symmetric place-level adjacency; the diagonal marks places that occur.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceAdjacency {
    pub adj: [[bool; NUM_PLACES]; NUM_PLACES],
}

impl PlaceAdjacency {
    pub fn is_present(&self, p: PlaceCategory) -> bool {
        self.adj[p.index()][p.index()]
    }

    pub fn adjacent(&self, p: PlaceCategory, q: PlaceCategory) -> bool {
        self.adj[p.index()][q.index()]
    }

    pub fn neighbors(&self, p: PlaceCategory) -> PlaceSet {
        PlaceCategory::ALL.into_iter().filter(|&q| q != p && self.adjacent(p, q)).collect()
    }
}

/// Two places are adjacent when some cell of one touches a cell of the other
/// under 8-connectivity. Background touches nothing.
pub fn adjacency(map: &SegmentationMap) -> PlaceAdjacency {
    let (w, h) = (map.width(), map.height());
    let mut a = PlaceAdjacency::default();
    for y in 0..h {
        for x in 0..w {
            let Some(p) = PlaceCategory::from_id(map.get(x, y)) else {
                continue;
            };
            a.adj[p.index()][p.index()] = true;
            // Forward half of the 8-neighborhood; symmetry covers the rest.
            for (dx, dy) in [(1isize, 0isize), (-1, 1), (0, 1), (1, 1)] {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                if let Some(q) = PlaceCategory::from_id(map.get(nx as usize, ny as usize)) {
                    if q != p {
                        a.adj[p.index()][q.index()] = true;
                        a.adj[q.index()][p.index()] = true;
                    }
                }
            }
        }
    }
    a
}

/// Places reachable from `p` in at most `h` adjacency hops, `p` included.
pub fn h_connected_set(adj: &PlaceAdjacency, p: PlaceCategory, h: usize) -> Result<PlaceSet> {
    if !adj.is_present(p) {
        return Err(LivrError::PlaceNotInScene(p));
    }
    let mut seen = PlaceSet::single(p);
    let mut queue = VecDeque::from([(p, 0usize)]);
    while let Some((q, depth)) = queue.pop_front() {
        if depth == h {
            continue;
        }
        for r in adj.neighbors(q).iter() {
            if !seen.contains(r) {
                seen.insert(r);
                queue.push_back((r, depth + 1));
            }
        }
    }
    Ok(seen)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agent {
    Person,
    Vehicle,
    Pet,
}

impl Agent {
    pub fn name(self) -> &'static str {
        match self {
            Agent::Person => "person",
            Agent::Vehicle => "vehicle",
            Agent::Pet => "pet",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    MoveAlong,
    Stay,
    MoveAway,
    MoveToward,
    InteractWithVehicle,
    MoveAcross,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::MoveAlong => "move along",
            Verb::Stay => "stay",
            Verb::MoveAway => "move away (home)",
            Verb::MoveToward => "move toward (home)",
            Verb::InteractWithVehicle => "interact with vehicle",
            Verb::MoveAcross => "move across",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub agent: Agent,
    pub verb: Verb,
    pub place: PlaceCategory,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}, {}>", self.agent.name(), self.verb.name(), self.place)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCatalog {
    pub actions: Vec<Action>,
}

impl Default for ActionCatalog {
    fn default() -> Self {
        Self::standard()
    }
}

impl ActionCatalog {
    /// The fifteen agent-in-place actions of the home-surveillance benchmark.
    pub fn standard() -> Self {
        use Agent::*;
        use PlaceCategory::*;
        use Verb::*;
        let t = |agent, verb, place| Action { agent, verb, place };
        Self {
            actions: vec![
                t(Vehicle, MoveAlong, Street),
                t(Person, MoveAlong, Sidewalk),
                t(Pet, MoveAlong, Sidewalk),
                t(Person, Stay, Lawn),
                t(Person, MoveAway, Driveway),
                t(Person, MoveToward, Driveway),
                t(Person, MoveToward, Walkway),
                t(Person, MoveAway, Walkway),
                t(Vehicle, MoveAway, Driveway),
                t(Vehicle, MoveToward, Driveway),
                t(Person, InteractWithVehicle, Driveway),
                t(Person, MoveAcross, Lawn),
                t(Person, Stay, Porch),
                t(Person, MoveToward, Porch),
                t(Person, MoveAway, Porch),
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn index_of(&self, action: &Action) -> Option<usize> {
        self.actions.iter().position(|a| a == action)
    }

    pub fn names(&self) -> Vec<String> {
        self.actions.iter().map(ToString::to_string).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateMatrix {
    /// One row per action, one column per place in id order.
    pub rows: Vec<[bool; NUM_PLACES]>,
    pub h: usize,
    /// Actions whose place is absent from the scene (their rows are all zero).
    #[serde(default)]
    pub missing: Vec<usize>,
}

impl GateMatrix {
    pub fn all_ones(n_actions: usize) -> Self {
        Self { rows: vec![[true; NUM_PLACES]; n_actions], h: usize::MAX, missing: Vec::new() }
    }

    pub fn n_actions(&self) -> usize {
        self.rows.len()
    }

    pub fn row_sum(&self, i: usize) -> usize {
        self.rows[i].iter().filter(|&&b| b).count()
    }
}

pub fn action_place_matrix(adj: &PlaceAdjacency, catalog: &ActionCatalog, h: usize) -> GateMatrix {
    let mut rows = Vec::with_capacity(catalog.len());
    let mut missing = Vec::new();
    for (i, action) in catalog.actions.iter().enumerate() {
        let mut row = [false; NUM_PLACES];
        match h_connected_set(adj, action.place, h) {
            Ok(set) => set.iter().for_each(|p| row[p.index()] = true),
            Err(_) => missing.push(i),
        }
        rows.push(row);
    }
    GateMatrix { rows, h, missing }
}

/// Row-major `n_actions × (NUM_PLACES·m)` boolean mask, `T ⊗ 1^{1×m}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightMask {
    pub rows: usize,
    pub cols: usize,
    pub m: usize,
    pub bits: Vec<bool>,
}

impl WeightMask {
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.cols + c]
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self { rows, cols, m: 1, bits: vec![true; rows * cols] }
    }

    pub fn row_sum(&self, r: usize) -> usize {
        self.bits[r * self.cols..(r + 1) * self.cols].iter().filter(|&&b| b).count()
    }
}

pub fn expand_gate(t: &GateMatrix, m: usize) -> Result<WeightMask> {
    if m == 0 {
        return Err(LivrError::InvalidConfig("feature width m must be at least 1".into()));
    }
    let cols = NUM_PLACES * m;
    let mut bits = Vec::with_capacity(t.rows.len() * cols);
    for row in &t.rows {
        for &on in row {
            bits.extend(std::iter::repeat_n(on, m));
        }
    }
    Ok(WeightMask { rows: t.rows.len(), cols, m, bits })
}
