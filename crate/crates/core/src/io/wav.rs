//! RIFF/WAVE reading (16/24-bit PCM, 32-bit float) and writing.

use std::path::Path;

use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Pcm24,
    Float32,
}

impl SampleFormat {
    fn bytes(self) -> usize {
        match self {
            SampleFormat::Pcm16 => 2,
            SampleFormat::Pcm24 => 3,
            SampleFormat::Float32 => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavHeader {
    pub channels: u16,
    pub sample_rate: u32,
    pub bits_per_sample: u16,
    pub format: SampleFormat,
    /// Size of the data chunk in bytes.
    pub data_length: u32,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::WavParse {
                offset: self.pos as u64,
                message: format!("unexpected end of file reading {what}"),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

fn parse_error(offset: usize, message: impl Into<String>) -> Error {
    Error::WavParse {
        offset: offset as u64,
        message: message.into(),
    }
}

fn parse_fmt(chunk: &[u8], offset: usize) -> Result<(u16, u32, u16, SampleFormat)> {
    if chunk.len() < 16 {
        return Err(parse_error(offset, "fmt chunk shorter than 16 bytes"));
    }
    let le16 = |i: usize| u16::from_le_bytes([chunk[i], chunk[i + 1]]);
    let mut tag = le16(0);
    let channels = le16(2);
    let sample_rate = u32::from_le_bytes(chunk[4..8].try_into().unwrap());
    let bits = le16(14);
    if tag == FORMAT_EXTENSIBLE {
        if chunk.len() < 26 {
            return Err(parse_error(offset, "extensible fmt chunk is truncated"));
        }
        tag = le16(24);
    }
    let format = match (tag, bits) {
        (FORMAT_PCM, 16) => SampleFormat::Pcm16,
        (FORMAT_PCM, 24) => SampleFormat::Pcm24,
        (FORMAT_FLOAT, 32) => SampleFormat::Float32,
        (FORMAT_PCM, b) => return Err(Error::UnsupportedFormat(format!("{b}-bit integer PCM"))),
        (FORMAT_FLOAT, b) => return Err(Error::UnsupportedFormat(format!("{b}-bit float"))),
        (t, _) => return Err(Error::UnsupportedFormat(format!("WAV codec tag 0x{t:04x}"))),
    };
    if channels == 0 {
        return Err(parse_error(offset + 2, "zero channels"));
    }
    if sample_rate == 0 {
        return Err(parse_error(offset + 4, "zero sample rate"));
    }
    Ok((channels, sample_rate, bits, format))
}

fn decode_sample(bytes: &[u8], format: SampleFormat) -> f64 {
    match format {
        SampleFormat::Pcm16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64 / 32768.0,
        SampleFormat::Pcm24 => {
            let v = i32::from_le_bytes([0, bytes[0], bytes[1], bytes[2]]) >> 8;
            v as f64 / 8_388_608.0
        }
        SampleFormat::Float32 => f32::from_le_bytes(bytes.try_into().unwrap()) as f64,
    }
}

/// Parse a complete WAV file. Multi-channel audio is averaged to mono.
pub fn parse_wav(bytes: &[u8]) -> Result<(WavHeader, AudioBuffer)> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "RIFF id")? != b"RIFF" {
        return Err(parse_error(0, "missing RIFF id"));
    }
    cur.u32("RIFF size")?;
    if cur.take(4, "WAVE id")? != b"WAVE" {
        return Err(parse_error(8, "missing WAVE id"));
    }

    let mut fmt = None;
    loop {
        let chunk_start = cur.pos;
        let id = cur.take(4, "chunk id")?;
        let size = cur.u32("chunk size")? as usize;
        match id {
            b"fmt " => {
                let body_offset = cur.pos;
                fmt = Some(parse_fmt(cur.take(size, "fmt chunk")?, body_offset)?);
            }
            b"data" => {
                let (channels, sample_rate, bits, format) =
                    fmt.ok_or_else(|| parse_error(chunk_start, "data chunk before fmt chunk"))?;
                let body_offset = cur.pos;
                let body = cur.take(size, "data chunk")?;
                let frame_bytes = format.bytes() * channels as usize;
                if !size.is_multiple_of(frame_bytes) {
                    return Err(parse_error(
                        body_offset,
                        format!("data length {size} is not a multiple of the frame size {frame_bytes}"),
                    ));
                }
                let samples: Vec<f64> = body
                    .chunks_exact(frame_bytes)
                    .map(|frame| {
                        frame
                            .chunks_exact(format.bytes())
                            .map(|s| decode_sample(s, format))
                            .sum::<f64>()
                            / channels as f64
                    })
                    .collect();
                if samples.is_empty() {
                    return Err(parse_error(body_offset, "data chunk holds no samples"));
                }
                let header = WavHeader {
                    channels,
                    sample_rate,
                    bits_per_sample: bits,
                    format,
                    data_length: size as u32,
                };
                let audio =
                    AudioBuffer::new(samples, sample_rate).map_err(|e| parse_error(body_offset, e.to_string()))?;
                return Ok((header, audio));
            }
            _ => {
                cur.take(size, "chunk body")?;
            }
        }
        if size % 2 == 1 && cur.pos < bytes.len() {
            cur.pos += 1;
        }
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wav(&bytes).map(|(_, audio)| audio)
}

/// Encode mono audio; 16-bit samples are rounded and clipped to the i16 range.
pub fn encode_wav(audio: &AudioBuffer, format: SampleFormat) -> Vec<u8> {
    let width = format.bytes();
    let data_len = audio.len() * width;
    let (tag, bits) = match format {
        SampleFormat::Pcm16 => (FORMAT_PCM, 16u16),
        SampleFormat::Pcm24 => (FORMAT_PCM, 24),
        SampleFormat::Float32 => (FORMAT_FLOAT, 32),
    };
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&audio.sample_rate().to_le_bytes());
    out.extend_from_slice(&(audio.sample_rate() * width as u32).to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in audio.samples() {
        match format {
            SampleFormat::Pcm16 => {
                let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
            SampleFormat::Pcm24 => {
                let v = (s * 8_388_608.0).round().clamp(-8_388_608.0, 8_388_607.0) as i32;
                out.extend_from_slice(&v.to_le_bytes()[..3]);
            }
            SampleFormat::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
        }
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer, format: SampleFormat) -> Result<()> {
    super::write_atomic(path.as_ref(), &encode_wav(audio, format))
}
