//! Symbolic tablature ingestion.
//!
//! Tracks are exchanged as JSON Lines: the first record is a header
//! (`track_id`, `duration_sec`, `tuning`, `num_frets`) and every following
//! record is one note (`string`, `fret`, `onset_sec`, `offset_sec`). Blank
//! lines are skipped.

use std::fmt::Write as _;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::fretboard::{FretboardConfig, SILENCE};

/// 22050 Hz audio with a 512-sample hop.
pub const DEFAULT_FRAME_RATE: f64 = 22050.0 / 512.0;

#[derive(Debug, Clone, PartialEq)]
pub struct NoteEvent {
    pub string: usize,
    pub fret: i32,
    pub onset_sec: f64,
    pub offset_sec: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicTrack {
    pub track_id: String,
    pub config: FretboardConfig,
    pub duration_sec: f64,
    pub events: Vec<NoteEvent>,
}

/// Per-string fret classes for every frame of a track.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTablature {
    config: FretboardConfig,
    /// `num_strings x N`, entries in `-1..=F`.
    frets: Array2<i32>,
}

impl FrameTablature {
    pub fn new(config: FretboardConfig, frets: Array2<i32>) -> Result<Self> {
        if frets.nrows() != config.num_strings() {
            return Err(Error::Dimension(format!(
                "tablature has {} strings, fretboard has {}",
                frets.nrows(),
                config.num_strings()
            )));
        }
        let max = config.num_frets() as i32;
        if let Some(bad) = frets.iter().find(|&&f| !(SILENCE..=max).contains(&f)) {
            return Err(Error::Domain(format!("fret class {bad} outside -1..={max}")));
        }
        Ok(FrameTablature { config, frets })
    }

    /// All strings silent for `num_frames` frames.
    pub fn silent(config: FretboardConfig, num_frames: usize) -> Self {
        let frets = Array2::from_elem((config.num_strings(), num_frames), SILENCE);
        FrameTablature { config, frets }
    }

    /// Inverse of [`targets_of`] for tensors with one active class per string block.
    pub fn from_one_hot(config: &FretboardConfig, tensor: &Array2<u8>) -> Result<Self> {
        if tensor.nrows() != config.num_combos() {
            return Err(Error::Dimension(format!(
                "tensor has {} rows, expected {}",
                tensor.nrows(),
                config.num_combos()
            )));
        }
        let width = config.classes_per_string();
        let mut frets = Array2::from_elem((config.num_strings(), tensor.ncols()), SILENCE);
        for n in 0..tensor.ncols() {
            for s in 0..config.num_strings() {
                let active: Vec<usize> = (0..width)
                    .filter(|&k| tensor[[s * width + k, n]] != 0)
                    .collect();
                if active.len() != 1 {
                    return Err(Error::Validation(format!(
                        "string {} at frame {n} has {} active classes",
                        s + 1,
                        active.len()
                    )));
                }
                frets[[s, n]] = active[0] as i32 - 1;
            }
        }
        Ok(FrameTablature {
            config: config.clone(),
            frets,
        })
    }

    pub fn config(&self) -> &FretboardConfig {
        &self.config
    }

    pub fn num_frames(&self) -> usize {
        self.frets.ncols()
    }

    pub fn frets(&self) -> &Array2<i32> {
        &self.frets
    }

    /// Fret class of 1-based `string` at frame `n`.
    pub fn fret_at(&self, string: usize, n: usize) -> i32 {
        self.frets[[string - 1, n]]
    }

    /// Frames `start..end` as a new tablature.
    pub fn window(&self, start: usize, end: usize) -> FrameTablature {
        FrameTablature {
            config: self.config.clone(),
            frets: self.frets.slice(ndarray::s![.., start..end]).to_owned(),
        }
    }
}

/// Binary `C x N` target tensor with one active class per string block per frame.
pub fn targets_of(frames: &FrameTablature) -> Array2<u8> {
    let cfg = &frames.config;
    let width = cfg.classes_per_string();
    let mut t = Array2::zeros((cfg.num_combos(), frames.num_frames()));
    for ((s, n), &f) in frames.frets.indexed_iter() {
        t[[s * width + (f + 1) as usize, n]] = 1;
    }
    t
}

/// Smallest `N` with `N / frame_rate >= duration_sec`, i.e. `ceil(duration * rate)`
/// evaluated consistently with the frame start instants `n / rate`.
pub fn frame_count(duration_sec: f64, frame_rate: f64) -> usize {
    let mut n = (duration_sec * frame_rate).ceil().max(0.0) as usize;
    while n > 0 && (n - 1) as f64 / frame_rate >= duration_sec {
        n -= 1;
    }
    while (n as f64 / frame_rate) < duration_sec {
        n += 1;
    }
    n
}

/// Samples each string at every frame's start instant `n / frame_rate`.
pub fn rasterize(track: &SymbolicTrack, frame_rate: f64) -> Result<FrameTablature> {
    if !(frame_rate > 0.0 && frame_rate.is_finite()) {
        return Err(Error::Domain(format!("frame rate must be positive, got {frame_rate}")));
    }
    let n_frames = frame_count(track.duration_sec, frame_rate);
    let mut frets = Array2::from_elem((track.config.num_strings(), n_frames), SILENCE);
    for ev in &track.events {
        let first = ((ev.onset_sec * frame_rate).floor() as isize - 1).max(0) as usize;
        for n in first..n_frames {
            let t = n as f64 / frame_rate;
            if t >= ev.offset_sec {
                break;
            }
            if t >= ev.onset_sec {
                frets[[ev.string - 1, n]] = ev.fret;
            }
        }
    }
    FrameTablature::new(track.config.clone(), frets)
}

/// Collapses runs of a sounding fret into note events at frame boundaries.
pub fn track_from_frames(track_id: &str, frames: &FrameTablature, frame_rate: f64) -> SymbolicTrack {
    let mut events = Vec::new();
    let n_frames = frames.num_frames();
    for s in 0..frames.config.num_strings() {
        let row = frames.frets.row(s);
        let mut n = 0;
        while n < n_frames {
            let f = row[n];
            let start = n;
            while n < n_frames && row[n] == f {
                n += 1;
            }
            if f != SILENCE {
                events.push(NoteEvent {
                    string: s + 1,
                    fret: f,
                    onset_sec: start as f64 / frame_rate,
                    offset_sec: n as f64 / frame_rate,
                });
            }
        }
    }
    events.sort_by(|a, b| a.onset_sec.total_cmp(&b.onset_sec).then(a.string.cmp(&b.string)));
    SymbolicTrack {
        track_id: track_id.to_string(),
        config: frames.config.clone(),
        duration_sec: n_frames as f64 / frame_rate,
        events,
    }
}

fn take_field<T: DeserializeOwned>(obj: &mut Map<String, Value>, name: &str, line: usize) -> Result<T> {
    let value = obj.remove(name).ok_or_else(|| Error::Parse {
        line,
        field: name.to_string(),
        message: "missing field".into(),
    })?;
    serde_json::from_value(value).map_err(|e| Error::Parse {
        line,
        field: name.to_string(),
        message: e.to_string(),
    })
}

fn reject_extra(obj: &Map<String, Value>, line: usize) -> Result<()> {
    match obj.keys().next() {
        Some(k) => Err(Error::Parse {
            line,
            field: k.clone(),
            message: "unknown field".into(),
        }),
        None => Ok(()),
    }
}

fn parse_object(text: &str, line: usize) -> Result<Map<String, Value>> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(Error::Parse {
            line,
            field: "<record>".into(),
            message: "expected a JSON object".into(),
        }),
        Err(e) => Err(Error::Parse {
            line,
            field: "<record>".into(),
            message: e.to_string(),
        }),
    }
}

/// Parses and validates one interchange document.
pub fn parse_track(document: &str) -> Result<SymbolicTrack> {
    let mut lines = document
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, htext) = lines.next().ok_or(Error::Parse {
        line: 1,
        field: "track_id".into(),
        message: "empty document".into(),
    })?;
    let mut header = parse_object(htext, hline)?;
    let track_id: String = take_field(&mut header, "track_id", hline)?;
    let duration_sec: f64 = take_field(&mut header, "duration_sec", hline)?;
    let tuning: Vec<i32> = take_field(&mut header, "tuning", hline)?;
    let num_frets: usize = take_field(&mut header, "num_frets", hline)?;
    reject_extra(&header, hline)?;

    let config = FretboardConfig::new(tuning.len(), num_frets, tuning)?;
    if !(duration_sec >= 0.0 && duration_sec.is_finite()) {
        return Err(Error::Validation(format!(
            "duration_sec must be a finite nonnegative number, got {duration_sec}"
        )));
    }

    let mut events = Vec::new();
    let mut lines_of = Vec::new();
    for (line, text) in lines {
        let mut rec = parse_object(text, line)?;
        let string: usize = take_field(&mut rec, "string", line)?;
        let fret: i32 = take_field(&mut rec, "fret", line)?;
        let onset_sec: f64 = take_field(&mut rec, "onset_sec", line)?;
        let offset_sec: f64 = take_field(&mut rec, "offset_sec", line)?;
        reject_extra(&rec, line)?;

        if string == 0 || string > config.num_strings() {
            return Err(Error::Validation(format!(
                "line {line}: string {string} outside 1..={}",
                config.num_strings()
            )));
        }
        if fret < 0 || fret > num_frets as i32 {
            return Err(Error::Validation(format!(
                "line {line}: fret {fret} outside 0..={num_frets}"
            )));
        }
        if !(onset_sec >= 0.0 && onset_sec.is_finite() && offset_sec.is_finite()) {
            return Err(Error::Validation(format!(
                "line {line}: onset/offset must be finite with onset >= 0"
            )));
        }
        if offset_sec <= onset_sec {
            return Err(Error::Validation(format!(
                "line {line}: offset_sec {offset_sec} must exceed onset_sec {onset_sec}"
            )));
        }
        if offset_sec > duration_sec {
            return Err(Error::Validation(format!(
                "line {line}: offset_sec {offset_sec} exceeds duration_sec {duration_sec}"
            )));
        }
        events.push(NoteEvent {
            string,
            fret,
            onset_sec,
            offset_sec,
        });
        lines_of.push(line);
    }

    check_overlaps(&events, &lines_of)?;

    Ok(SymbolicTrack {
        track_id,
        config,
        duration_sec,
        events,
    })
}

fn check_overlaps(events: &[NoteEvent], lines: &[usize]) -> Result<()> {
    let mut order: Vec<usize> = (0..events.len()).collect();
    order.sort_by(|&a, &b| {
        events[a]
            .string
            .cmp(&events[b].string)
            .then(events[a].onset_sec.total_cmp(&events[b].onset_sec))
    });
    for pair in order.windows(2) {
        let (a, b) = (&events[pair[0]], &events[pair[1]]);
        if a.string == b.string && b.onset_sec < a.offset_sec {
            return Err(Error::Validation(format!(
                "overlapping notes on string {}: line {} (fret {}, {}-{} s) and line {} (fret {}, {}-{} s)",
                a.string,
                lines[pair[0]],
                a.fret,
                a.onset_sec,
                a.offset_sec,
                lines[pair[1]],
                b.fret,
                b.onset_sec,
                b.offset_sec
            )));
        }
    }
    Ok(())
}

/// Renders a track in the interchange format. `parse_track` inverts this exactly.
pub fn serialize_track(track: &SymbolicTrack) -> String {
    let header = serde_json::json!({
        "track_id": track.track_id,
        "duration_sec": track.duration_sec,
        "tuning": track.config.tuning(),
        "num_frets": track.config.num_frets(),
    });
    let mut out = String::new();
    writeln!(out, "{header}").unwrap();
    for ev in &track.events {
        let rec = serde_json::json!({
            "string": ev.string,
            "fret": ev.fret,
            "onset_sec": ev.onset_sec,
            "offset_sec": ev.offset_sec,
        });
        writeln!(out, "{rec}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(events: &[&str]) -> String {
        let mut s = String::from(
            r#"{"track_id":"t","duration_sec":1.0,"tuning":[40,45,50,55,59,64],"num_frets":19}"#,
        );
        s.push('\n');
        for e in events {
            s.push_str(e);
            s.push('\n');
        }
        s
    }

    #[test]
    fn parses_minimal_document() {
        let t = parse_track(&doc(&[r#"{"string":3,"fret":2,"onset_sec":0.0,"offset_sec":1.0}"#])).unwrap();
        assert_eq!(t.track_id, "t");
        assert_eq!(t.events.len(), 1);
        assert_eq!(t.events[0].string, 3);
        assert_eq!(t.config, FretboardConfig::default());
    }

    #[test]
    fn rejects_inverted_interval() {
        let err = parse_track(&doc(&[r#"{"string":3,"fret":2,"onset_sec":0.5,"offset_sec":0.5}"#])).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn rejects_out_of_range_fret() {
        let err = parse_track(&doc(&[r#"{"string":1,"fret":20,"onset_sec":0.0,"offset_sec":0.5}"#])).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("fret 20")), "{err}");
        let err = parse_track(&doc(&[r#"{"string":7,"fret":1,"onset_sec":0.0,"offset_sec":0.5}"#])).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn overlap_names_both_events() {
        let err = parse_track(&doc(&[
            r#"{"string":2,"fret":1,"onset_sec":0.0,"offset_sec":0.6}"#,
            r#"{"string":3,"fret":1,"onset_sec":0.0,"offset_sec":0.6}"#,
            r#"{"string":2,"fret":3,"onset_sec":0.5,"offset_sec":0.9}"#,
        ]))
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn touching_events_are_not_overlaps() {
        parse_track(&doc(&[
            r#"{"string":2,"fret":1,"onset_sec":0.0,"offset_sec":0.5}"#,
            r#"{"string":2,"fret":3,"onset_sec":0.5,"offset_sec":0.9}"#,
        ]))
        .unwrap();
    }

    #[test]
    fn malformed_lines_carry_location() {
        match parse_track(&doc(&[r#"{"string":1,"fret":"x","onset_sec":0.0,"offset_sec":0.5}"#])) {
            Err(Error::Parse { line, field, .. }) => assert_eq!((line, field.as_str()), (2, "fret")),
            other => panic!("{other:?}"),
        }
        match parse_track(&doc(&[r#"{"string":1,"fret":1,"onset_sec":0.0}"#])) {
            Err(Error::Parse { line, field, .. }) => assert_eq!((line, field.as_str()), (2, "offset_sec")),
            other => panic!("{other:?}"),
        }
        match parse_track(&doc(&[r#"{"string":1,"fret":1,"onset_sec":0.0,"offset_sec":0.5,"velocity":3}"#])) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "velocity"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_track("not json"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_track(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn rasterizes_at_frame_start() {
        let track = SymbolicTrack {
            track_id: "r".into(),
            config: FretboardConfig::default(),
            duration_sec: 2.0,
            events: vec![NoteEvent {
                string: 1,
                fret: 3,
                onset_sec: 0.0,
                offset_sec: 1.0,
            }],
        };
        let frames = rasterize(&track, 4.0).unwrap();
        assert_eq!(frames.frets().row(0).to_vec(), vec![3, 3, 3, 3, -1, -1, -1, -1]);
        for s in 2..=6 {
            assert!(frames.frets().row(s - 1).iter().all(|&f| f == -1));
        }
    }

    #[test]
    fn empty_track_is_silent() {
        let track = SymbolicTrack {
            track_id: "e".into(),
            config: FretboardConfig::default(),
            duration_sec: 1.0,
            events: vec![],
        };
        let frames = rasterize(&track, 4.0).unwrap();
        assert_eq!(frames, FrameTablature::silent(FretboardConfig::default(), 4));
        assert!(rasterize(&track, 0.0).is_err());
    }

    #[test]
    fn default_rate_frame_count() {
        // ceil(30.5 * 22050 / 512) = ceil(1313.53) = 1314, within 0.1% of the 1312.7 average
        let n = frame_count(30.5, DEFAULT_FRAME_RATE);
        assert_eq!(n, 1314);
        assert!((n as f64 - 1312.7).abs() / 1312.7 < 1e-3);
        assert_eq!(frame_count(2.0, 4.0), 8);
        assert_eq!(frame_count(0.0, 4.0), 0);
        assert_eq!(frame_count(0.3, 10.0), 3);
    }

    #[test]
    fn targets_one_hot() {
        let cfg = FretboardConfig::default();
        let mut frames = FrameTablature::silent(cfg.clone(), 2);
        frames.frets[[0, 1]] = 0;
        let t = targets_of(&frames);
        assert_eq!(t.dim(), (126, 2));
        for s in 0..6 {
            assert_eq!(t[[s * 21, 0]], 1);
        }
        assert_eq!(t[[1, 1]], 1);
        assert_eq!(t[[0, 1]], 0);
        for n in 0..2 {
            assert_eq!(t.column(n).iter().map(|&x| x as usize).sum::<usize>(), 6);
        }
        assert_eq!(FrameTablature::from_one_hot(&cfg, &t).unwrap(), frames);
    }
}
