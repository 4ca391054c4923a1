//! WAV and JSON files. Audio is read as mono at the model rate and written as
//! 32-bit float; every write goes to a temporary file that is renamed into
//! place, so a failed run never leaves a truncated output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::dsp::{resample, AudioBuffer};
use crate::error::{Error, Result};
use crate::pipeline::ParameterTrack;

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// Writes through a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = tmp_path(path);
    match write(&tmp).and_then(|()| Ok(fs::rename(&tmp, path)?)) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

pub fn write_text_atomic(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |tmp| {
        let mut f = fs::File::create(tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
        Ok(())
    })
}

/// Reads a PCM (8 to 32 bit) or 32-bit float WAV, averages the channels and
/// resamples to `sample_rate` when the file rate differs.
pub fn read_wav(path: &Path, sample_rate: f64) -> Result<AudioBuffer> {
    let mut reader = WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Wav(format!("{}: no channels", path.display())));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (SampleFormat::Int, bits @ 8..=32) => {
            let scale = 2f64.powi(bits as i32 - 1);
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
        }
        (format, bits) => {
            return Err(Error::Wav(format!(
                "{}: unsupported sample format {format:?} with {bits} bits",
                path.display()
            )))
        }
    }
    .map_err(|e| wav_error(path, e))?;
    let mono: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    if mono.is_empty() {
        return Err(Error::Wav(format!("{}: no samples", path.display())));
    }
    let rate = spec.sample_rate as f64;
    let samples = if rate == sample_rate {
        mono
    } else {
        log::info!(
            "resampling {} from {rate} Hz to {sample_rate} Hz",
            path.display()
        );
        resample(&mono, rate, sample_rate)
    };
    AudioBuffer::new(samples, sample_rate)
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => Error::Wav(format!("{}: {other}", path.display())),
    }
}

/// Writes mono 32-bit float at the buffer's rate, which must be integral.
pub fn write_wav(path: &Path, audio: &AudioBuffer) -> Result<()> {
    let rate = audio.sample_rate();
    if rate.fract() != 0.0 || rate > u32::MAX as f64 {
        return Err(Error::InvalidInput(format!(
            "sample rate {rate} cannot be stored in a WAV header"
        )));
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: rate as u32,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    write_atomic(path, |tmp| {
        let mut w = WavWriter::create(tmp, spec)?;
        for s in audio.samples() {
            w.write_sample(*s as f32)?;
        }
        w.finalize()?;
        Ok(())
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text_atomic(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads and validates a parameter track.
pub fn read_track(path: &Path) -> Result<ParameterTrack> {
    let track: ParameterTrack = read_json(path)?;
    track.validate()?;
    Ok(track)
}

pub fn write_track(path: &Path, track: &ParameterTrack) -> Result<()> {
    track.validate()?;
    write_json(path, track)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(n: usize, fs: f64) -> Vec<f64> {
        (0..n)
            .map(|i| 0.5 * (2.0 * PI * 220.0 * i as f64 / fs).sin())
            .collect()
    }

    #[test]
    fn float_round_trip_is_exact_to_f32() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let a = AudioBuffer::new(tone(1000, 48000.0), 48000.0).unwrap();
        write_wav(&p, &a).unwrap();
        let b = read_wav(&p, 48000.0).unwrap();
        assert_eq!(b.len(), a.len());
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert_eq!(*y, *x as f32 as f64);
        }
        assert!(!tmp_path(&p).exists());
    }

    #[test]
    fn pcm16_stereo_is_downmixed_and_resampled() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        for s in tone(1600, 16000.0) {
            let v = (s * 32767.0) as i16;
            w.write_sample(v).unwrap();
            w.write_sample(v / 2).unwrap();
        }
        w.finalize().unwrap();
        let b = read_wav(&p, 48000.0).unwrap();
        assert_eq!(b.sample_rate(), 48000.0);
        assert_eq!(b.len(), 4800);
        // mean of full and half amplitude channels
        assert!((b.peak() - 0.375).abs() < 0.01, "{}", b.peak());
    }

    #[test]
    fn cd_rate_input_keeps_its_duration() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cd.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 44100,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        for s in tone(44100 + 37, 44100.0) {
            w.write_sample((s * 32767.0) as i16).unwrap();
        }
        w.finalize().unwrap();
        let b = read_wav(&p, 48000.0).unwrap();
        let expected = (44100.0 + 37.0) * 48000.0 / 44100.0;
        assert!(
            (b.len() as f64 - expected).abs() <= 1.0,
            "{} vs {expected}",
            b.len()
        );
    }

    #[test]
    fn missing_and_malformed_files_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.wav");
        let e = read_wav(&missing, 48000.0).unwrap_err();
        assert!(e.to_string().contains("nope.wav"), "{e}");
        let junk = dir.path().join("junk.wav");
        fs::write(&junk, b"not a wav").unwrap();
        let e = read_wav(&junk, 48000.0).unwrap_err();
        assert!(
            matches!(e, Error::Wav(_)) && e.to_string().contains("junk.wav"),
            "{e}"
        );
    }

    #[test]
    fn failed_write_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        let r = write_atomic(&p, |tmp| {
            fs::write(tmp, b"partial")?;
            Err(Error::InvalidInput("boom".into()))
        });
        assert!(r.is_err());
        assert!(!p.exists() && !tmp_path(&p).exists());
    }

    #[test]
    fn rejects_fractional_rates() {
        let dir = tempfile::tempdir().unwrap();
        let a = AudioBuffer::new(vec![0.0; 10], 44100.5).unwrap();
        assert!(write_wav(&dir.path().join("x.wav"), &a).is_err());
    }
}
