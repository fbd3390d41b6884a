//! String-quartet scores from mapping outputs, with JSON, MIDI and cue-list
//! exports.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use midly::num::{u15, u24, u28, u4, u7};
use midly::{Format, Header, MetaMessage, MidiMessage, PitchBend, Smf, Timing, TrackEvent, TrackEventKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::{quantize_quarter_tone, quarter_tone_frequency, Chunk, MappingError, TimbreEvent};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("empty sweep")]
    EmptySweep,
    #[error("step {step}: expected 4 chunks, got {count}")]
    BadChunkCount { step: usize, count: usize },
    #[error("{voice} cannot play quarter-tone step {pitch_step} at any octave")]
    RangeUnplayable { voice: Voice, pitch_step: i32 },
    #[error("invalid score: {0}")]
    Invalid(String),
    #[error("timeline events are not sorted by start")]
    Unsorted,
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("score JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("MIDI: {0}")]
    Midi(String),
    #[error(transparent)]
    Mapping(#[from] MappingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Voice {
    Violin1,
    Violin2,
    Viola,
    Cello,
}

impl Voice {
    pub const ALL: [Voice; 4] = [Voice::Violin1, Voice::Violin2, Voice::Viola, Voice::Cello];

    /// Playable quarter-tone steps from A4: violins G3–E7, viola C3–E6,
    /// cello C2–A5.
    pub fn step_range(self) -> (i32, i32) {
        match self {
            Voice::Violin1 | Voice::Violin2 => (-28, 62),
            Voice::Viola => (-42, 38),
            Voice::Cello => (-66, 24),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// General MIDI program (violin, viola, cello).
    fn program(self) -> u8 {
        match self {
            Voice::Violin1 | Voice::Violin2 => 40,
            Voice::Viola => 41,
            Voice::Cello => 42,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Voice::Violin1 => "violin1",
            Voice::Violin2 => "violin2",
            Voice::Viola => "viola",
            Voice::Cello => "cello",
        }
    }
}

impl fmt::Display for Voice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamic {
    Ppp,
    Pp,
    P,
    Mp,
    Mf,
    F,
    Ff,
    Fff,
}

impl Dynamic {
    /// Equal velocity steps from 16 (ppp) to 127 (fff).
    pub fn velocity(self) -> u8 {
        let k = self as u8 as f64;
        (16.0 + k * (127.0 - 16.0) / 7.0).round() as u8
    }

    pub fn mark(self) -> &'static str {
        match self {
            Dynamic::Ppp => "ppp",
            Dynamic::Pp => "pp",
            Dynamic::P => "p",
            Dynamic::Mp => "mp",
            Dynamic::Mf => "mf",
            Dynamic::F => "f",
            Dynamic::Ff => "ff",
            Dynamic::Fff => "fff",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Technique {
    SulPonticello,
    Ricochet,
    TremoloSlow,
    TremoloFast,
    Glissando { target_step: i32 },
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Technique::SulPonticello => f.write_str("sul-ponticello"),
            Technique::Ricochet => f.write_str("ricochet"),
            Technique::TremoloSlow => f.write_str("tremolo-slow"),
            Technique::TremoloFast => f.write_str("tremolo-fast"),
            Technique::Glissando { target_step } => write!(f, "glissando({target_step})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEvent {
    pub voice: Voice,
    /// Beats.
    pub start: f64,
    /// Beats.
    pub duration: f64,
    /// 24-TET steps from A4.
    pub pitch_step: i32,
    /// Unquantized frequency in Hz, shown above the note.
    pub exact_freq: f64,
    pub dynamic: Dynamic,
    #[serde(default)]
    pub technique: Option<Technique>,
}

impl ScoreEvent {
    pub fn quantized_freq(&self) -> f64 {
        quarter_tone_frequency(self.pitch_step)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreMetadata {
    pub method: String,
    #[serde(default)]
    pub state: Option<String>,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
}

pub const DEFAULT_TEMPO: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub events: Vec<ScoreEvent>,
    /// Beats per minute.
    pub tempo: f64,
    pub metadata: ScoreMetadata,
}

impl Score {
    pub fn new(mut events: Vec<ScoreEvent>, metadata: ScoreMetadata) -> Self {
        events.sort_by(|a, b| a.voice.cmp(&b.voice).then(a.start.total_cmp(&b.start)));
        Score {
            events,
            tempo: DEFAULT_TEMPO,
            metadata,
        }
    }

    pub fn voice_events(&self, voice: Voice) -> impl Iterator<Item = &ScoreEvent> {
        self.events.iter().filter(move |e| e.voice == voice)
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        let bad = |m: String| Err(ScoreError::Invalid(m));
        if !(self.tempo > 0.0 && self.tempo.is_finite()) {
            return bad(format!("tempo {}", self.tempo));
        }
        for (k, e) in self.events.iter().enumerate() {
            let (lo, hi) = e.voice.step_range();
            if !(e.duration > 0.0) || !(e.start >= 0.0) {
                return bad(format!("event {k}: start {} duration {}", e.start, e.duration));
            }
            if !(e.exact_freq > 0.0 && e.exact_freq.is_finite()) {
                return bad(format!("event {k}: exact frequency {}", e.exact_freq));
            }
            if e.pitch_step < lo || e.pitch_step > hi {
                return bad(format!("event {k}: step {} outside {} range", e.pitch_step, e.voice));
            }
        }
        for w in self.events.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.voice > b.voice || (a.voice == b.voice && a.start > b.start) {
                return bad("events not sorted by (voice, start)".into());
            }
            if a.voice == b.voice && a.start + a.duration > b.start + 1e-9 {
                return bad(format!("overlapping {} events at beat {}", a.voice, b.start));
            }
        }
        Ok(())
    }
}

/// Shifts `(step, freq)` by octaves until it fits `voice`.
fn fit_range(voice: Voice, step: i32, freq: f64) -> Result<(i32, f64), ScoreError> {
    let (lo, hi) = voice.step_range();
    let mut s = step;
    let mut f = freq;
    while s < lo {
        s += 24;
        f *= 2.0;
    }
    while s > hi {
        s -= 24;
        f /= 2.0;
    }
    if s < lo {
        return Err(ScoreError::RangeUnplayable { voice, pitch_step: step });
    }
    Ok((s, f))
}

fn note(voice: Voice, beat: usize, step: i32, freq: f64, dynamic: Dynamic) -> Result<ScoreEvent, ScoreError> {
    let (pitch_step, exact_freq) = fit_range(voice, step, freq)?;
    Ok(ScoreEvent {
        voice,
        start: beat as f64,
        duration: 1.0,
        pitch_step,
        exact_freq,
        dynamic,
        technique: None,
    })
}

/// How the second violin doubles the first in method (b).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Doubling {
    /// One quarter tone above violin 1.
    #[default]
    QuarterToneUp,
    Unison,
}

/// Method (b): per sweep step, `f_max` goes to the violins and `f_min` to
/// viola and cello (an octave lower), one beat per step. Pitch changes
/// within a voice are joined by glissandi.
pub fn score_method_b(freq_pairs: &[(f64, f64)], doubling: Doubling) -> Result<Score, ScoreError> {
    if freq_pairs.is_empty() {
        return Err(ScoreError::EmptySweep);
    }
    let mut events = Vec::with_capacity(4 * freq_pairs.len());
    for (beat, &(f_min, f_max)) in freq_pairs.iter().enumerate() {
        let hi = quantize_quarter_tone(f_max)?;
        let lo = quantize_quarter_tone(f_min)?;
        let (v2_step, v2_freq) = match doubling {
            Doubling::QuarterToneUp => (hi.step + 1, f_max * (1.0f64 / 24.0).exp2()),
            Doubling::Unison => (hi.step, f_max),
        };
        events.push(note(Voice::Violin1, beat, hi.step, f_max, Dynamic::Mf)?);
        events.push(note(Voice::Violin2, beat, v2_step, v2_freq, Dynamic::Mf)?);
        events.push(note(Voice::Viola, beat, lo.step, f_min, Dynamic::Mf)?);
        events.push(note(Voice::Cello, beat, lo.step - 24, f_min / 2.0, Dynamic::Mf)?);
    }
    let mut score = Score::new(
        events,
        ScoreMetadata {
            method: "b".into(),
            ..Default::default()
        },
    );
    for k in 1..score.events.len() {
        let (prev, next) = (&score.events[k - 1], &score.events[k]);
        if prev.voice == next.voice && prev.pitch_step != next.pitch_step {
            let target_step = next.pitch_step;
            score.events[k - 1].technique = Some(Technique::Glissando { target_step });
        }
    }
    Ok(score)
}

/// Whether method (c) marks chunk intensity by dynamics or by tremolo type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntensityMarking {
    #[default]
    Dynamics,
    /// Every note is mf with slow tremolo for `|intensity| ≤ 2`, fast above.
    Tremolo,
}

/// Dynamics ladder: 1…6 → ppp, pp, p, mf, f, ff; −1 → p sul ponticello;
/// −2 → f ricochet.
pub fn intensity_marking(intensity: i8, marking: IntensityMarking) -> (Dynamic, Option<Technique>) {
    if marking == IntensityMarking::Tremolo {
        let t = if intensity.abs() <= 2 {
            Technique::TremoloSlow
        } else {
            Technique::TremoloFast
        };
        return (Dynamic::Mf, Some(t));
    }
    match intensity {
        i8::MIN..=-2 => (Dynamic::F, Some(Technique::Ricochet)),
        -1 => (Dynamic::P, Some(Technique::SulPonticello)),
        0 | 1 => (Dynamic::Ppp, None),
        2 => (Dynamic::Pp, None),
        3 => (Dynamic::P, None),
        4 => (Dynamic::Mf, None),
        5 => (Dynamic::F, None),
        _ => (Dynamic::Ff, None),
    }
}

/// Method (c): slab `k` of each step goes to one voice, the top slab to
/// violin 1 and the bottom slab to the cello. Steps are given as chunk
/// lists ordered from the lowest slab up.
pub fn score_method_c(steps: &[&[Chunk]], marking: IntensityMarking) -> Result<Score, ScoreError> {
    if steps.is_empty() {
        return Err(ScoreError::EmptySweep);
    }
    let mut events = Vec::with_capacity(4 * steps.len());
    for (beat, chunks) in steps.iter().enumerate() {
        if chunks.len() != 4 {
            return Err(ScoreError::BadChunkCount {
                step: beat,
                count: chunks.len(),
            });
        }
        for (k, chunk) in chunks.iter().enumerate() {
            let voice = Voice::ALL[3 - k];
            let q = quantize_quarter_tone(chunk.frequency)?;
            let (dynamic, technique) = intensity_marking(chunk.intensity, marking);
            let mut e = note(voice, beat, q.step, chunk.frequency, dynamic)?;
            e.technique = technique;
            events.push(e);
        }
    }
    Ok(Score::new(
        events,
        ScoreMetadata {
            method: "c".into(),
            ..Default::default()
        },
    ))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ScoreError + '_ {
    move |source| ScoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn score_to_json(score: &Score) -> Result<String, ScoreError> {
    score.validate()?;
    Ok(serde_json::to_string_pretty(score)? + "\n")
}

pub fn score_from_json(text: &str) -> Result<Score, ScoreError> {
    let score: Score = serde_json::from_str(text)?;
    score.validate()?;
    Ok(score)
}

pub fn export_score_json(score: &Score, path: impl AsRef<Path>) -> Result<(), ScoreError> {
    let path = path.as_ref();
    fs::write(path, score_to_json(score)?).map_err(io_err(path))
}

pub const TICKS_PER_BEAT: u16 = 480;
/// Pitch-bend range declared through RPN 0, in semitones.
pub const BEND_RANGE_SEMITONES: u8 = 2;

/// MIDI key and signed pitch-bend offset for a quarter-tone step.
///
/// Odd steps sit half a semitone above the key, which with a ±2 semitone
/// range is a quarter of the positive bend span (+2048).
pub fn midi_pitch(step: i32) -> (u8, i16) {
    let key = 69 + step.div_euclid(2);
    let bend = step.rem_euclid(2) as i16 * (8192 / (2 * BEND_RANGE_SEMITONES as i16));
    (key.clamp(0, 127) as u8, bend)
}

fn ticks(beats: f64) -> u32 {
    (beats * TICKS_PER_BEAT as f64).round() as u32
}

fn controller(channel: u8, controller: u8, value: u8) -> TrackEventKind<'static> {
    TrackEventKind::Midi {
        channel: u4::new(channel),
        message: MidiMessage::Controller {
            controller: u7::new(controller),
            value: u7::new(value),
        },
    }
}

fn delta_encode(mut timed: Vec<(u32, u8, TrackEventKind<'_>)>) -> Vec<TrackEvent<'_>> {
    // stable sort keeps insertion order among equal (tick, priority)
    timed.sort_by_key(|&(t, prio, _)| (t, prio));
    let mut last = 0;
    let mut track: Vec<TrackEvent> = timed
        .into_iter()
        .map(|(t, _, kind)| {
            let delta = u28::new(t - last);
            last = t;
            TrackEvent { delta, kind }
        })
        .collect();
    track.push(TrackEvent {
        delta: u28::new(0),
        kind: TrackEventKind::Meta(MetaMessage::EndOfTrack),
    });
    track
}

/// Format-1 SMF: a tempo track plus one track (and channel) per voice.
pub fn score_to_midi(score: &Score) -> Result<Vec<u8>, ScoreError> {
    score.validate()?;
    let names: Vec<Vec<u8>> = Voice::ALL.iter().map(|v| v.name().as_bytes().to_vec()).collect();
    let texts: Vec<Vec<u8>> = score
        .events
        .iter()
        .map(|e| {
            let mut t = format!("{} {:.2} Hz", e.dynamic.mark(), e.exact_freq);
            if let Some(tech) = e.technique {
                t.push_str(&format!(" {tech}"));
            }
            t.into_bytes()
        })
        .collect();

    let micros = (60e6 / score.tempo).round() as u32;
    let mut tracks = vec![delta_encode(vec![(
        0,
        0,
        TrackEventKind::Meta(MetaMessage::Tempo(u24::new(micros.min(0xff_ffff)))),
    )])];
    for (vi, voice) in Voice::ALL.iter().enumerate() {
        let ch = vi as u8;
        let mut timed = vec![
            (0, 0, TrackEventKind::Meta(MetaMessage::TrackName(&names[vi]))),
            (
                0,
                0,
                TrackEventKind::Midi {
                    channel: u4::new(ch),
                    message: MidiMessage::ProgramChange {
                        program: u7::new(voice.program()),
                    },
                },
            ),
            (0, 0, controller(ch, 101, 0)),
            (0, 0, controller(ch, 100, 0)),
            (0, 0, controller(ch, 6, BEND_RANGE_SEMITONES)),
            (0, 0, controller(ch, 38, 0)),
            (0, 0, controller(ch, 101, 127)),
            (0, 0, controller(ch, 100, 127)),
        ];
        for (e, text) in score.events.iter().zip(&texts).filter(|(e, _)| e.voice == *voice) {
            let (key, bend) = midi_pitch(e.pitch_step);
            let on = ticks(e.start);
            let off = ticks(e.start + e.duration);
            let channel = u4::new(ch);
            timed.push((on, 1, TrackEventKind::Meta(MetaMessage::Text(text))));
            timed.push((
                on,
                1,
                TrackEventKind::Midi {
                    channel,
                    message: MidiMessage::PitchBend {
                        bend: PitchBend::from_int(bend),
                    },
                },
            ));
            timed.push((
                on,
                2,
                TrackEventKind::Midi {
                    channel,
                    message: MidiMessage::NoteOn {
                        key: u7::new(key),
                        vel: u7::new(e.dynamic.velocity()),
                    },
                },
            ));
            timed.push((
                off,
                0,
                TrackEventKind::Midi {
                    channel,
                    message: MidiMessage::NoteOff {
                        key: u7::new(key),
                        vel: u7::new(0),
                    },
                },
            ));
        }
        tracks.push(delta_encode(timed));
    }
    let smf = Smf {
        header: Header::new(Format::Parallel, Timing::Metrical(u15::new(TICKS_PER_BEAT))),
        tracks,
    };
    let mut out = Vec::new();
    smf.write_std(&mut out).map_err(|e| ScoreError::Midi(e.to_string()))?;
    Ok(out)
}

pub fn export_midi(score: &Score, path: impl AsRef<Path>) -> Result<(), ScoreError> {
    let path = path.as_ref();
    fs::write(path, score_to_midi(score)?).map_err(io_err(path))
}

/// A sounding note recovered from a MIDI file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MidiNote {
    pub voice: Voice,
    pub start_tick: u32,
    pub pitch_step: i32,
    pub velocity: u8,
}

/// Reads back note-ons with the pitch bend in force on their channel.
pub fn decode_midi_notes(bytes: &[u8]) -> Result<Vec<MidiNote>, ScoreError> {
    let smf = Smf::parse(bytes).map_err(|e| ScoreError::Midi(e.to_string()))?;
    let mut notes = Vec::new();
    for track in &smf.tracks {
        let mut tick = 0u32;
        let mut bend = [0i16; 16];
        for ev in track {
            tick += ev.delta.as_int();
            if let TrackEventKind::Midi { channel, message } = ev.kind {
                let ch = channel.as_int() as usize;
                match message {
                    MidiMessage::PitchBend { bend: b } => bend[ch] = b.as_int(),
                    MidiMessage::NoteOn { key, vel } if vel.as_int() > 0 => {
                        let voice = *Voice::ALL
                            .get(ch)
                            .ok_or_else(|| ScoreError::Midi(format!("unexpected channel {ch}")))?;
                        let quarter = bend[ch] / (8192 / (2 * BEND_RANGE_SEMITONES as i16));
                        notes.push(MidiNote {
                            voice,
                            start_tick: tick,
                            pitch_step: 2 * (key.as_int() as i32 - 69) + quarter as i32,
                            velocity: vel.as_int(),
                        });
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(notes)
}

/// `start_s,duration_s,n_partials,added_harmonic_index` rows; the last
/// column is empty when an event adds no harmonic.
pub fn timeline_csv(events: &[TimbreEvent]) -> Result<String, ScoreError> {
    if events.windows(2).any(|w| w[1].start < w[0].start) {
        return Err(ScoreError::Unsorted);
    }
    let mut out = String::from("start_s,duration_s,n_partials,added_harmonic_index\n");
    for e in events {
        let added = e.added_harmonic.map(|h| h.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", e.start, e.duration, e.partials.len(), added));
    }
    Ok(out)
}

pub fn export_timeline(events: &[TimbreEvent], path: impl AsRef<Path>) -> Result<(), ScoreError> {
    let path = path.as_ref();
    fs::write(path, timeline_csv(events)?).map_err(io_err(path))
}
