//! Whole synthetic datasets and their on-disk layout.
//!
//! ```text
//! DIR/manifest.json                      dataset manifest (see [`Manifest`])
//! DIR/split.json                         observed / unseen scene ids
//! DIR/scenes/<scene>.annotation.json     polygon annotation
//! DIR/scenes/<scene>.segmentation.json   segmentation at annotation resolution
//! DIR/clips/<clip>.clip                  raw clip tensor
//! ```
//!
//! A raw clip is the 8-byte magic `LIVRCLIP`, a little-endian `u32` format
//! version (1), four little-endian `u32` extents `t h w c`, then `t·h·w·c`
//! little-endian `f32` values in `(t, h, w, c)` order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::clip::gen_clip;
use super::scene::{gen_scene, SynthConfig, SynthScene};
use crate::error::{LivrError, Result};
use crate::harness::split::SplitSpec;
use crate::layout::SceneAnnotation;
use crate::tensor::{Shape4, Tensor4};
use crate::topology::{ActionCatalog, Verb};

pub const CLIP_MAGIC: &[u8; 8] = b"LIVRCLIP";
pub const CLIP_VERSION: u32 = 1;
pub const MANIFEST_FORMAT: &str = "livr-synth";

pub fn write_clip(path: impl AsRef<Path>, clip: &Tensor4<f32>) -> Result<()> {
    let s = clip.shape();
    let mut buf = Vec::with_capacity(28 + 4 * s.len());
    buf.extend_from_slice(CLIP_MAGIC);
    buf.extend_from_slice(&CLIP_VERSION.to_le_bytes());
    for d in [s.t, s.h, s.w, s.c] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in clip.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_clip(path: impl AsRef<Path>) -> Result<Tensor4<f32>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    decode_clip(&buf)
}

pub fn decode_clip(buf: &[u8]) -> Result<Tensor4<f32>> {
    let bad = |m: &str| LivrError::Format(format!("clip file: {m}"));
    if buf.len() < 28 || &buf[..8] != CLIP_MAGIC {
        return Err(bad("missing LIVRCLIP header"));
    }
    let word = |i: usize| u32::from_le_bytes(buf[8 + 4 * i..12 + 4 * i].try_into().expect("4 bytes")) as usize;
    if word(0) != CLIP_VERSION as usize {
        return Err(bad("unsupported version"));
    }
    let shape = Shape4::new(word(1), word(2), word(3), word(4));
    if buf.len() != 28 + 4 * shape.len() {
        return Err(bad("payload length does not match the header"));
    }
    let data = buf[28..].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
    Tensor4::from_vec(shape, data)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub id: String,
    pub seed: u64,
    pub annotation: String,
    pub segmentation: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub id: String,
    pub scene: String,
    pub file: String,
    /// One 0/1 entry per catalog action.
    pub labels: Vec<u8>,
    pub intended: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config: SynthConfig,
    pub seed: u64,
    /// Catalog action names in label order.
    pub actions: Vec<String>,
    pub scenes: Vec<SceneRecord>,
    pub clips: Vec<ClipRecord>,
}

/// Parameters of a generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub scenes: usize,
    pub clips_per_scene: usize,
    /// How many of the scenes (the last ones) are held out as unseen.
    pub unseen: usize,
    pub seed: u64,
    pub synth: SynthConfig,
}

impl DatasetSpec {
    pub fn new(scenes: usize, clips_per_scene: usize, seed: u64) -> Self {
        Self { scenes, clips_per_scene, unseen: scenes / 3, seed, synth: SynthConfig::default() }
    }
}

/// A dataset held in memory.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub manifest: Manifest,
    pub annotations: Vec<SceneAnnotation>,
    pub videos: Vec<Tensor4<f32>>,
}

/// `splitmix64` step, used to derive independent child seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generation statistics.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GenStats {
    pub clips: usize,
    pub two_agent_clips: usize,
    /// Clips whose first oracle-checked candidate disagreed with the intent.
    pub regenerated: usize,
}

/// Generates scenes and clips. Clip `j` of a scene realizes catalog action
/// `(j + offset) mod n` so every action appears in every scene once
/// `clips_per_scene ≥ n`; some clips add a second agent on another place.
pub fn generate(spec: &DatasetSpec) -> Result<(Dataset, Vec<SynthScene>, SplitSpec, GenStats)> {
    if spec.scenes == 0 || spec.clips_per_scene == 0 || spec.unseen >= spec.scenes {
        return Err(LivrError::InvalidConfig("need at least one observed scene and one clip per scene".into()));
    }
    let catalog = ActionCatalog::standard();
    let n = catalog.len();
    let mut scenes = Vec::with_capacity(spec.scenes);
    let mut records = Vec::new();
    let mut clips = Vec::new();
    let mut videos = Vec::new();
    let mut stats = GenStats::default();
    for i in 0..spec.scenes {
        let scene_seed = mix_seed(spec.seed, i as u64);
        let scene = gen_scene(scene_seed, &spec.synth)?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(scene_seed, u64::MAX));
        let offset = rng.random_range(0..n);
        for j in 0..spec.clips_per_scene {
            let first = catalog.actions[(j + offset) % n];
            let clip_seed = mix_seed(scene_seed, j as u64);
            let mut clip = None;
            if first.verb != Verb::InteractWithVehicle && rng.random_bool(spec.synth.second_agent_prob) {
                let others: Vec<_> = catalog
                    .actions
                    .iter()
                    .filter(|a| a.place != first.place && a.verb != Verb::InteractWithVehicle)
                    .collect();
                // Some pairs cannot share a frame (both near the same strip
                // edge); fall back to other partners, then to a single agent.
                for &&second in others.choose_multiple(&mut rng, 4) {
                    if let Ok(c) = gen_clip(&scene, &[first, second], clip_seed, &catalog) {
                        clip = Some(c);
                        break;
                    }
                }
            }
            let clip = match clip {
                Some(c) => c,
                None => gen_clip(&scene, &[first], clip_seed, &catalog)?,
            };
            stats.clips += 1;
            stats.two_agent_clips += (clip.intended.len() > 1) as usize;
            stats.regenerated += (clip.oracle_disagreements > 0) as usize;
            let id = format!("{}-{j:03}", scene.id());
            clips.push(ClipRecord {
                file: format!("clips/{id}.clip"),
                id,
                scene: scene.id().to_string(),
                labels: clip.labels,
                intended: clip.intended,
            });
            videos.push(clip.video);
        }
        records.push(SceneRecord {
            id: scene.id().to_string(),
            seed: scene_seed,
            annotation: format!("scenes/{}.annotation.json", scene.id()),
            segmentation: format!("scenes/{}.segmentation.json", scene.id()),
        });
        scenes.push(scene);
    }
    let n_obs = spec.scenes - spec.unseen;
    let split = SplitSpec {
        observed: records[..n_obs].iter().map(|r| r.id.clone()).collect(),
        unseen: records[n_obs..].iter().map(|r| r.id.clone()).collect(),
    };
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: 1,
        config: spec.synth.clone(),
        seed: spec.seed,
        actions: catalog.names(),
        scenes: records,
        clips,
    };
    let annotations = scenes.iter().map(|s| s.annotation.clone()).collect();
    Ok((Dataset { manifest, annotations, videos }, scenes, split, stats))
}

impl Dataset {
    pub fn scene_index(&self, id: &str) -> Option<usize> {
        self.manifest.scenes.iter().position(|s| s.id == id)
    }

    pub fn write(&self, dir: impl AsRef<Path>, scenes: &[SynthScene], split: &SplitSpec) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("scenes"))?;
        fs::create_dir_all(dir.join("clips"))?;
        for (rec, scene) in self.manifest.scenes.iter().zip(scenes) {
            fs::write(dir.join(&rec.annotation), scene.annotation.to_json_string())?;
            fs::write(dir.join(&rec.segmentation), scene.map.to_json_string())?;
        }
        for (rec, video) in self.manifest.clips.iter().zip(&self.videos) {
            write_clip(dir.join(&rec.file), video)?;
        }
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&self.manifest)?)?;
        fs::write(dir.join("split.json"), serde_json::to_string_pretty(split)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        if manifest.format != MANIFEST_FORMAT || manifest.version != 1 {
            return Err(LivrError::Format(format!("unsupported manifest {} v{}", manifest.format, manifest.version)));
        }
        let n_actions = manifest.actions.len();
        let mut annotations = Vec::with_capacity(manifest.scenes.len());
        for s in &manifest.scenes {
            annotations.push(SceneAnnotation::load(dir.join(&s.annotation))?);
        }
        let mut videos = Vec::with_capacity(manifest.clips.len());
        for c in &manifest.clips {
            if c.labels.len() != n_actions {
                return Err(LivrError::Format(format!("clip {} has {} labels", c.id, c.labels.len())));
            }
            if !manifest.scenes.iter().any(|s| s.id == c.scene) {
                return Err(LivrError::Format(format!("clip {} refers to unknown scene {}", c.id, c.scene)));
            }
            videos.push(read_clip(dir.join(&c.file))?);
        }
        Ok(Self { manifest, annotations, videos })
    }
}
