//! 16-bit PCM mono WAV I/O. Samples map to [-1, 1) by division by 32768.

use std::io::{Read, Seek, Write};
use std::path::Path;

use super::AudioClip;
use crate::error::{Error, Result};

fn spec(sample_rate: u32) -> hound::WavSpec {
    hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    }
}

pub fn quantize(s: f64) -> i16 {
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn decode<R: Read>(reader: R) -> Result<AudioClip> {
    let reader = hound::WavReader::new(reader)?;
    let s = reader.spec();
    if s.channels != 1 || s.bits_per_sample != 16 || s.sample_format != hound::SampleFormat::Int {
        return Err(Error::Config(format!(
            "expected 16-bit PCM mono, got {} channel(s) at {} bits",
            s.channels, s.bits_per_sample
        )));
    }
    if s.sample_rate == 0 {
        return Err(Error::Config("zero sample rate".into()));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|r| r.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(AudioClip::new(samples, s.sample_rate))
}

pub fn decode_bytes(bytes: &[u8]) -> Result<AudioClip> {
    decode(std::io::Cursor::new(bytes))
}

pub fn encode<W: Write + Seek>(clip: &AudioClip, writer: W) -> Result<()> {
    let mut w = hound::WavWriter::new(writer, spec(clip.sample_rate))?;
    for &s in &clip.samples {
        w.write_sample(quantize(s))?;
    }
    w.finalize()?;
    Ok(())
}

pub fn encode_bytes(clip: &AudioClip) -> Result<Vec<u8>> {
    let mut cur = std::io::Cursor::new(Vec::new());
    encode(clip, &mut cur)?;
    Ok(cur.into_inner())
}

pub fn read(path: impl AsRef<Path>) -> Result<AudioClip> {
    decode(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn write(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    std::fs::write(path, encode_bytes(clip)?)?;
    Ok(())
}
