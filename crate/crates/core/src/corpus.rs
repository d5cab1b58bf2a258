//! Corpus directories: one `<track_id>.jsonl` interchange document per track,
//! optionally with a `<track_id>.feat` feature sidecar.

use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::persist::ByteReader;
use crate::tab::{parse_track, rasterize, serialize_track, targets_of, track_from_frames, FrameTablature};
use crate::model::Sample;

const FEATURE_MAGIC: &[u8; 8] = b"TABFEAT\0";

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusTrack {
    pub track_id: String,
    pub tablature: FrameTablature,
    /// `P x N` features aligned with the tablature frames.
    pub features: Option<Array2<f64>>,
}

impl CorpusTrack {
    /// Pairs features with one-hot targets. Fails when features are absent.
    pub fn to_sample(&self) -> Result<Sample> {
        let features = self.features.clone().ok_or_else(|| {
            Error::Validation(format!("track {} has no feature sidecar", self.track_id))
        })?;
        Ok(Sample {
            track_id: self.track_id.clone(),
            features,
            targets: targets_of(&self.tablature),
        })
    }
}

fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(format!("track id `{id}` is not usable as a file name")))
    }
}

pub fn encode_features(track_id: &str, features: &Array2<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + track_id.len() + 8 * features.len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(features.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(features.ncols() as u64).to_le_bytes());
    out.extend_from_slice(&(track_id.len() as u32).to_le_bytes());
    out.extend_from_slice(track_id.as_bytes());
    for v in features.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Returns the track id and the `P x N` matrix.
pub fn decode_features(bytes: &[u8]) -> Result<(String, Array2<f64>)> {
    let mut r = ByteReader::new(bytes);
    if r.take(FEATURE_MAGIC.len())? != FEATURE_MAGIC {
        return Err(Error::Format("not a feature file".into()));
    }
    let rows = r.u64()? as usize;
    let cols = r.u64()? as usize;
    let id = r.string()?;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("feature shape overflows".into()))?;
    let data = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok((id, Array2::from_shape_vec((rows, cols), data).expect("length matches shape")))
}

/// Writes every track into `dir`, creating it if needed.
pub fn save_corpus(dir: &Path, tracks: &[CorpusTrack], frame_rate: f64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for t in tracks {
        check_id(&t.track_id)?;
        let doc = serialize_track(&track_from_frames(&t.track_id, &t.tablature, frame_rate));
        let path = dir.join(format!("{}.jsonl", t.track_id));
        std::fs::write(&path, doc).map_err(|e| Error::io(&path, e))?;
        if let Some(f) = &t.features {
            let path = dir.join(format!("{}.feat", t.track_id));
            std::fs::write(&path, encode_features(&t.track_id, f)).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

fn documents(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "jsonl") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Loads every `*.jsonl` document in `dir` in file-name order.
pub fn load_corpus(dir: &Path, frame_rate: f64) -> Result<Vec<CorpusTrack>> {
    let paths = documents(dir)?;
    if paths.is_empty() {
        return Err(Error::Validation(format!(
            "no .jsonl tracks found in {}",
            dir.display()
        )));
    }
    let mut tracks = Vec::with_capacity(paths.len());
    for path in paths {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let symbolic = parse_track(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        let tablature = rasterize(&symbolic, frame_rate)?;
        let feat_path = path.with_extension("feat");
        let features = if feat_path.exists() {
            let bytes = std::fs::read(&feat_path).map_err(|e| Error::io(&feat_path, e))?;
            let (id, f) = decode_features(&bytes)?;
            if id != symbolic.track_id || f.ncols() != tablature.num_frames() {
                return Err(Error::Dimension(format!(
                    "{}: sidecar for `{id}` with {} frames does not match track `{}` with {} frames",
                    feat_path.display(),
                    f.ncols(),
                    symbolic.track_id,
                    tablature.num_frames()
                )));
            }
            Some(f)
        } else {
            None
        };
        tracks.push(CorpusTrack {
            track_id: symbolic.track_id,
            tablature,
            features,
        });
    }
    Ok(tracks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_corpus, SynthParams};
    use crate::tab::DEFAULT_FRAME_RATE;

    #[test]
    fn directory_round_trip() {
        let tracks = generate_corpus(&SynthParams {
            num_tracks: 3,
            frames_per_track: 50,
            ..SynthParams::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_corpus(dir.path(), &tracks, DEFAULT_FRAME_RATE).unwrap();
        let back = load_corpus(dir.path(), DEFAULT_FRAME_RATE).unwrap();
        assert_eq!(back, tracks);
    }

    #[test]
    fn feature_corruption_is_detected() {
        let f = Array2::from_shape_fn((2, 3), |(i, j)| i as f64 - j as f64 * 0.5);
        let bytes = encode_features("a", &f);
        assert_eq!(decode_features(&bytes).unwrap(), ("a".to_string(), f));
        assert!(decode_features(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_features(&[bytes.as_slice(), &[0]].concat()).is_err());
    }

    #[test]
    fn rejects_path_like_ids() {
        assert!(check_id("../x").is_err());
        assert!(check_id("").is_err());
        assert!(check_id("synth-0-001").is_ok());
    }
}
