use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::oracle::label_oracle;
use super::scene::SynthScene;
use crate::error::{LivrError, Result};
use crate::layout::PlaceCategory;
use crate::tensor::{Shape4, Tensor4};
use crate::topology::{Action, ActionCatalog, Agent, Verb};

/// Attempts per clip before generation gives up.
pub const MAX_ATTEMPTS: usize = 400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSprite {
    pub agent: Agent,
    /// Footprint `[height, width]` in clip pixels.
    pub size: [f64; 2],
    pub color: [f32; 3],
    /// Sprite center `[x, y]` per frame, in clip pixels.
    pub trajectory: Vec<[f64; 2]>,
}

#[derive(Clone, Debug)]
pub struct LabeledClip {
    pub scene_id: String,
    pub video: Tensor4<f32>,
    pub labels: Vec<u8>,
    /// Catalog indices of the actions the generator set out to realize.
    pub intended: Vec<usize>,
    pub sprites: Vec<AgentSprite>,
    /// Candidate trajectories whose oracle labels disagreed with `intended`.
    pub oracle_disagreements: usize,
}

pub fn footprint(agent: Agent, vertical: bool) -> [f64; 2] {
    match (agent, vertical) {
        (Agent::Person, _) => [4.0, 2.0],
        (Agent::Pet, _) => [2.0, 3.0],
        (Agent::Vehicle, false) => [4.0, 7.0],
        (Agent::Vehicle, true) => [7.0, 4.0],
    }
}

fn base_color(agent: Agent) -> [f32; 3] {
    match agent {
        Agent::Person => [0.95, 0.2, 0.2],
        Agent::Vehicle => [0.15, 0.3, 0.95],
        Agent::Pet => [0.95, 0.9, 0.15],
    }
}

/// Whether the sprite's center and inset corners all lie on allowed places.
fn contained(scene: &SynthScene, allowed: &[PlaceCategory], c: [f64; 2], size: [f64; 2]) -> bool {
    let (hh, hw) = (size[0] / 2.0 - 0.3, size[1] / 2.0 - 0.3);
    let pts = [c, [c[0] - hw, c[1] - hh], [c[0] + hw, c[1] - hh], [c[0] - hw, c[1] + hh], [c[0] + hw, c[1] + hh]];
    pts.iter().all(|&p| scene.place_at(p).is_some_and(|q| allowed.contains(&q)))
}

fn linear_track(a: [f64; 2], b: [f64; 2], frames: usize) -> Vec<[f64; 2]> {
    (0..frames)
        .map(|t| {
            let s = t as f64 / (frames - 1) as f64;
            [a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s]
        })
        .collect()
}

fn jitter_track(c: [f64; 2], frames: usize, amp: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    (0..frames).map(|_| [c[0] + rng.random_range(-amp..=amp), c[1] + rng.random_range(-amp..=amp)]).collect()
}

fn sample_in(scene: &SynthScene, place: PlaceCategory, size: [f64; 2], rng: &mut ChaCha8Rng) -> Option<[f64; 2]> {
    let (w, h) = (scene.config.width as f64, scene.config.height as f64);
    for _ in 0..200 {
        let c = [rng.random_range(0.0..w), rng.random_range(0.0..h)];
        if contained(scene, &[place], c, size) {
            return Some(c);
        }
    }
    None
}

/// Range `[lo, hi]` of a sprite's center coordinate inside `[a, b]`, or
/// `None` when the sprite does not fit.
fn span(a: f64, b: f64, extent: f64) -> Option<(f64, f64)> {
    let m = extent / 2.0 + 0.6;
    (b - a > 2.0 * m).then_some((a + m, b - m))
}

/// Endpoints of a move between the far and near ends of `[lo, hi]`.
fn approach(lo: f64, hi: f64, toward_hi: bool, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let r = hi - lo;
    let far = lo + rng.random_range(0.0..0.2) * r;
    let near = hi - rng.random_range(0.0..0.2) * r;
    if toward_hi {
        (far, near)
    } else {
        (near, far)
    }
}

/// One candidate trajectory for a single-agent action.
fn propose(scene: &SynthScene, action: &Action, rng: &mut ChaCha8Rng) -> Option<AgentSprite> {
    let cfg = &scene.config;
    let s = cfg.annotation_scale as f64;
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let t = cfg.frames;
    let lay = &scene.layout;
    let place = action.place;
    let vertical = matches!(place, PlaceCategory::Driveway | PlaceCategory::Walkway);
    let size = footprint(action.agent, vertical);
    let mut allowed = vec![place];

    let track = match (action.verb, place) {
        (Verb::Stay, _) => {
            let c = sample_in(scene, place, size, rng)?;
            jitter_track(c, t, 0.25, rng)
        }
        (Verb::MoveAlong, PlaceCategory::Street | PlaceCategory::Sidewalk) => {
            let (top, bottom) = if place == PlaceCategory::Street {
                (0.0, lay.street_bottom / s)
            } else {
                allowed.push(PlaceCategory::Driveway);
                (lay.street_bottom / s, lay.sidewalk_bottom / s)
            };
            let (ylo, yhi) = span(top, bottom, size[0])?;
            let y = rng.random_range(ylo..=yhi);
            let len = rng.random_range(0.35..0.6) * w;
            let (xlo, xhi) = span(0.0, w, size[1])?;
            let x0 = rng.random_range(xlo..=(xhi - len).max(xlo));
            let (a, b) = if rng.random_bool(0.5) { (x0, x0 + len) } else { (x0 + len, x0) };
            linear_track([a, y], [b, y], t)
        }
        (Verb::MoveToward | Verb::MoveAway, PlaceCategory::Walkway) => {
            let (top, bot) = lay.walkway_axis();
            let (y_top, y_bot) = (top[1] / s, lay.porch[1] / s);
            let x_at = |y: f64| (top[0] + (bot[0] - top[0]) * (y * s - top[1]) / (bot[1] - top[1])) / s;
            let half = (lay.walkway[1][0] - lay.walkway[0][0]).abs() / s / 2.0;
            let lat_max = (half - size[1] / 2.0 - 0.6).max(0.0);
            let lat = rng.random_range(-lat_max..=lat_max);
            let (lo, hi) = span(y_top, y_bot, size[0])?;
            let (ya, yb) = approach(lo, hi, action.verb == Verb::MoveToward, rng);
            linear_track([x_at(ya) + lat, ya], [x_at(yb) + lat, yb], t)
        }
        (Verb::MoveToward | Verb::MoveAway, PlaceCategory::Driveway | PlaceCategory::Porch) => {
            let r = if place == PlaceCategory::Driveway { lay.driveway } else { lay.porch };
            let (xlo, xhi) = span(r[0].max(0.0) / s, (r[2] / s).min(w), size[1])?;
            let x = rng.random_range(xlo..=xhi);
            let (lo, hi) = span(r[1] / s, h, size[0])?;
            let (ya, yb) = approach(lo, hi, action.verb == Verb::MoveToward, rng);
            linear_track([x, ya], [x, yb], t)
        }
        (Verb::MoveAcross, _) => {
            let c = sample_in(scene, place, size, rng)?;
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let u = [angle.cos(), angle.sin()];
            let extent = u[0].abs() * w + u[1].abs() * (h - lay.sidewalk_bottom / s);
            let len = rng.random_range(0.32..0.55) * extent;
            linear_track(c, [c[0] + u[0] * len, c[1] + u[1] * len], t)
        }
        _ => return None,
    };
    let inside = track.iter().filter(|&&p| contained(scene, &allowed, p, size)).count();
    let on_place = track.iter().filter(|&&p| scene.place_at(p) == Some(place)).count();
    if inside < t || on_place * 4 < t * 3 {
        return None;
    }
    Some(AgentSprite { agent: action.agent, size, color: base_color(action.agent), trajectory: track })
}

/// A stationary vehicle on the driveway and a person standing beside it.
fn propose_interaction(scene: &SynthScene, rng: &mut ChaCha8Rng) -> Option<Vec<AgentSprite>> {
    let t = scene.config.frames;
    let vsize = footprint(Agent::Vehicle, true);
    let psize = footprint(Agent::Person, true);
    let v = sample_in(scene, PlaceCategory::Driveway, vsize, rng)?;
    let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let gap = vsize[1] / 2.0 + psize[1] / 2.0 + rng.random_range(0.8..2.0);
    let p = [v[0] + side * gap, v[1] + rng.random_range(-2.0..2.0)];
    let person = jitter_track(p, t, 0.25, rng);
    if !person.iter().all(|&q| contained(scene, &[PlaceCategory::Driveway], q, psize)) {
        return None;
    }
    Some(vec![
        AgentSprite { agent: Agent::Person, size: psize, color: base_color(Agent::Person), trajectory: person },
        AgentSprite { agent: Agent::Vehicle, size: vsize, color: base_color(Agent::Vehicle), trajectory: vec![v; t] },
    ])
}

/// Smallest gap between two sprites' boxes over all frames.
fn min_gap(a: &AgentSprite, b: &AgentSprite) -> f64 {
    a.trajectory
        .iter()
        .zip(&b.trajectory)
        .map(|(p, q)| {
            let gx = (p[0] - q[0]).abs() - (a.size[1] + b.size[1]) / 2.0;
            let gy = (p[1] - q[1]).abs() - (a.size[0] + b.size[0]) / 2.0;
            gx.max(gy)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Renders sprites over the scene background with per-frame pixel noise.
pub fn render(scene: &SynthScene, sprites: &[AgentSprite], rng: &mut ChaCha8Rng) -> Tensor4<f32> {
    let cfg = &scene.config;
    let (w, h) = (cfg.width, cfg.height);
    let shape = Shape4::new(cfg.frames, h, w, 3);
    let noise = Normal::new(0.0, cfg.noise_std).expect("finite noise");
    let mut data = Vec::with_capacity(shape.len());
    for _ in 0..cfg.frames {
        for &b in &scene.background {
            data.push(b + noise.sample(rng) as f32);
        }
    }
    for sp in sprites {
        for (t, c) in sp.trajectory.iter().enumerate() {
            let (x0, x1) = (c[0] - sp.size[1] / 2.0, c[0] + sp.size[1] / 2.0);
            let (y0, y1) = (c[1] - sp.size[0] / 2.0, c[1] + sp.size[0] / 2.0);
            let ys = (y0.floor().max(0.0) as usize)..(y1.ceil().min(h as f64).max(0.0) as usize);
            for y in ys {
                let cy = (y1.min(y as f64 + 1.0) - y0.max(y as f64)).max(0.0);
                let xs = (x0.floor().max(0.0) as usize)..(x1.ceil().min(w as f64).max(0.0) as usize);
                for x in xs {
                    let cov = (cy * (x1.min(x as f64 + 1.0) - x0.max(x as f64)).max(0.0)) as f32;
                    let base = ((t * h + y) * w + x) * 3;
                    for ch in 0..3 {
                        let v = &mut data[base + ch];
                        *v = (1.0 - cov) * *v + cov * sp.color[ch];
                    }
                }
            }
        }
    }
    Tensor4::from_vec(shape, data).expect("rendered shape")
}

/// Generates a clip realizing `actions` (one or two, on different places),
/// retrying until the label oracle agrees with the intended labels.
pub fn gen_clip(scene: &SynthScene, actions: &[Action], seed: u64, catalog: &ActionCatalog) -> Result<LabeledClip> {
    let mut intended = Vec::with_capacity(actions.len());
    for a in actions {
        if !scene.clip_map.contains(a.place) {
            return Err(LivrError::PlaceNotInScene(a.place));
        }
        intended.push(catalog.index_of(a).ok_or_else(|| LivrError::InvalidConfig(format!("{a} is not in the catalog")))?);
    }
    if actions.is_empty() {
        return Err(LivrError::InvalidConfig("a clip needs at least one action".into()));
    }
    let mut want = vec![0u8; catalog.len()];
    intended.iter().for_each(|&i| want[i] = 1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut disagreements = 0;
    'attempt: for _ in 0..MAX_ATTEMPTS {
        let mut sprites = Vec::new();
        for a in actions {
            let new = if a.verb == Verb::InteractWithVehicle {
                propose_interaction(scene, &mut rng)
            } else {
                propose(scene, a, &mut rng).map(|s| vec![s])
            };
            let Some(new) = new else { continue 'attempt };
            if new.iter().any(|n| sprites.iter().any(|o| min_gap(n, o) < 1.0)) {
                continue 'attempt;
            }
            sprites.extend(new);
        }
        let labels = label_oracle(scene, &sprites, catalog);
        if labels != want {
            disagreements += 1;
            continue;
        }
        for sp in &mut sprites {
            for c in &mut sp.color {
                *c = (*c + rng.random_range(-0.05..0.05f32)).clamp(0.0, 1.0);
            }
        }
        let video = render(scene, &sprites, &mut rng);
        return Ok(LabeledClip {
            scene_id: scene.id().to_string(),
            video,
            labels,
            intended,
            sprites,
            oracle_disagreements: disagreements,
        });
    }
    Err(LivrError::InvalidConfig(format!(
        "could not realize {} in {} after {MAX_ATTEMPTS} attempts",
        actions.iter().map(ToString::to_string).collect::<Vec<_>>().join(" + "),
        scene.id()
    )))
}
