//! Ground-truth labels derived from trajectories and scene geometry alone.

use super::clip::AgentSprite;
use super::scene::SynthScene;
use crate::layout::{PlaceCategory, NUM_PLACES};
use crate::topology::{Agent, ActionCatalog, Verb};

/// A sprite whose center never leaves this radius (clip pixels) is stationary.
pub const STAY_RADIUS: f64 = 1.0;
/// Toward/away needs a home-distance change beyond this fraction of the
/// place's home-distance range.
pub const TOWARD_FRACTION: f64 = 0.15;
/// Crossing needs a net displacement of this fraction of the place's extent
/// along the direction of motion.
pub const ACROSS_FRACTION: f64 = 0.25;
/// Maximum center distance (clip pixels) between a person and a vehicle
/// they interact with.
pub const INTERACT_DISTANCE: f64 = 6.0;

/// Distance to home at an annotation-pixel cell. Inside the porch this is
/// the distance to the house edge at the bottom of the frame; elsewhere it
/// is the distance to the porch.
fn home_distance(scene: &SynthScene, place: PlaceCategory, x: usize, y: usize) -> f64 {
    if place == PlaceCategory::Porch {
        (scene.map.height() - y) as f64 - 0.5
    } else {
        scene.porch_distance.get(x, y)
    }
}

fn to_cell(scene: &SynthScene, p: [f64; 2]) -> (usize, usize) {
    let s = scene.config.annotation_scale as f64;
    let x = ((p[0] * s).max(0.0) as usize).min(scene.map.width() - 1);
    let y = ((p[1] * s).max(0.0) as usize).min(scene.map.height() - 1);
    (x, y)
}

/// Place occupied by the sprite center in the most frames (lowest id on ties).
pub fn majority_place(scene: &SynthScene, track: &[[f64; 2]]) -> Option<PlaceCategory> {
    let mut counts = [0usize; NUM_PLACES];
    for &p in track {
        if let Some(c) = scene.place_at(p) {
            counts[c.index()] += 1;
        }
    }
    let (best, &n) = counts.iter().enumerate().rev().max_by_key(|(_, &n)| n)?;
    (n > 0).then(|| PlaceCategory::ALL[best])
}

pub fn is_stationary(track: &[[f64; 2]]) -> bool {
    let p0 = track[0];
    track.iter().all(|p| (p[0] - p0[0]).hypot(p[1] - p0[1]) <= STAY_RADIUS)
}

fn home_range(scene: &SynthScene, place: PlaceCategory) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for y in 0..scene.map.height() {
        for x in 0..scene.map.width() {
            if scene.map.get(x, y) == place.id() {
                let d = home_distance(scene, place, x, y);
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
    }
    (hi - lo).max(0.0)
}

/// Extent of the place's cells projected on unit direction `u`, in clip pixels.
fn extent_along(scene: &SynthScene, place: PlaceCategory, u: [f64; 2]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for y in 0..scene.map.height() {
        for x in 0..scene.map.width() {
            if scene.map.get(x, y) == place.id() {
                let v = (x as f64 + 0.5) * u[0] + (y as f64 + 0.5) * u[1];
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    (hi - lo).max(0.0) / scene.config.annotation_scale as f64
}

/// Label of one sprite in the context of the others, as a catalog index.
pub fn sprite_label(scene: &SynthScene, i: usize, sprites: &[AgentSprite], catalog: &ActionCatalog) -> Option<usize> {
    let sp = &sprites[i];
    let track = &sp.trajectory;
    let place = majority_place(scene, track)?;
    let find = |verb: Verb| catalog.actions.iter().position(|a| a.agent == sp.agent && a.place == place && a.verb == verb);

    if is_stationary(track) {
        if let Some(ix) = find(Verb::InteractWithVehicle) {
            let near = sprites.iter().enumerate().any(|(j, o)| {
                j != i
                    && o.agent == Agent::Vehicle
                    && is_stationary(&o.trajectory)
                    && majority_place(scene, &o.trajectory) == Some(place)
                    && track
                        .iter()
                        .zip(&o.trajectory)
                        .all(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]) <= INTERACT_DISTANCE)
            });
            if near {
                return Some(ix);
            }
        }
        return find(Verb::Stay);
    }

    let (first, last) = (track[0], track[track.len() - 1]);
    let d = [last[0] - first[0], last[1] - first[1]];
    let dist = d[0].hypot(d[1]);
    if dist < STAY_RADIUS {
        return None;
    }
    let toward = find(Verb::MoveToward);
    let away = find(Verb::MoveAway);
    if toward.is_some() || away.is_some() {
        let (x0, y0) = to_cell(scene, first);
        let (x1, y1) = to_cell(scene, last);
        let delta = home_distance(scene, place, x1, y1) - home_distance(scene, place, x0, y0);
        let thr = TOWARD_FRACTION * home_range(scene, place);
        if delta < -thr && toward.is_some() {
            return toward;
        }
        if delta > thr && away.is_some() {
            return away;
        }
    }
    if let Some(ix) = find(Verb::MoveAlong) {
        return Some(ix);
    }
    if let Some(ix) = find(Verb::MoveAcross) {
        let u = [d[0] / dist, d[1] / dist];
        if dist >= ACROSS_FRACTION * extent_along(scene, place, u) {
            return Some(ix);
        }
    }
    None
}

/// Multi-label ground truth over the catalog for a set of sprites.
pub fn label_oracle(scene: &SynthScene, sprites: &[AgentSprite], catalog: &ActionCatalog) -> Vec<u8> {
    let mut labels = vec![0u8; catalog.len()];
    for i in 0..sprites.len() {
        if let Some(ix) = sprite_label(scene, i, sprites, catalog) {
            labels[ix] = 1;
        }
    }
    labels
}
