//! Binary PGM (P5, maxval 255) reading/writing plus the frame-sequence
//! loaders the CLI exposes: printf-style patterns, directories, and raw
//! concatenated Y files.

use super::Frame;
use crate::error::{Error, Result};
use std::fs;
use std::path::{Path, PathBuf};

pub fn encode(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.pixels());
    out
}

pub fn decode(bytes: &[u8]) -> Result<Frame> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        if bytes.starts_with(b"P2") {
            return Err(Error::Input("ASCII PGM (P2) is not supported; use binary P5".into()));
        }
        return Err(Error::Input("not a binary PGM (P5) file".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and '#' comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_digit() => break,
                _ => return Err(Error::Input("malformed PGM header".into())),
            }
        }
        let mut v: usize = 0;
        while let Some(b) = bytes.get(pos) {
            if !b.is_ascii_digit() {
                break;
            }
            v = v
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as usize))
                .ok_or_else(|| Error::Input("PGM header value overflow".into()))?;
            pos += 1;
        }
        *field = v;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Input(format!("PGM maxval must be 255, got {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Input("malformed PGM header".into())),
    }
    let need = width * height;
    if bytes.len() < pos + need {
        return Err(Error::Input(format!(
            "PGM raster truncated: need {need} bytes, have {}",
            bytes.len() - pos
        )));
    }
    Frame::new(width, height, bytes[pos..pos + need].to_vec())
}

pub fn read_file(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    decode(&bytes)
}

pub fn write_file(frame: &Frame, path: &Path) -> Result<()> {
    fs::write(path, encode(frame))
        .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}

/// Expands a printf-style `%d`/`%03d` pattern for one index.
pub fn expand_pattern(pattern: &str, index: usize) -> Result<String> {
    let Some(start) = pattern.find('%') else {
        return Err(Error::Usage(format!("pattern `{pattern}` has no % placeholder")));
    };
    let rest = &pattern[start + 1..];
    let digits_end = rest
        .find(|c: char| !c.is_ascii_digit())
        .ok_or_else(|| Error::Usage(format!("malformed pattern `{pattern}`")))?;
    if rest.as_bytes().get(digits_end) != Some(&b'd') {
        return Err(Error::Usage(format!("pattern `{pattern}` must use %d or %0Nd")));
    }
    let width_spec = &rest[..digits_end];
    let width: usize = if width_spec.is_empty() { 0 } else { width_spec.parse().unwrap_or(0) };
    Ok(format!(
        "{}{:0w$}{}",
        &pattern[..start],
        index,
        &rest[digits_end + 1..],
        w = width
    ))
}

/// Loads a frame sequence in ascending index order. Accepts a `%d`
/// pattern (first index 0 or 1), a directory of `.pgm` files (sorted by
/// name), or a single PGM file. All frames must share dimensions.
pub fn load_frames(input: &str) -> Result<Vec<Frame>> {
    let mut frames = Vec::new();
    if input.contains('%') {
        let first_existing = [0usize, 1]
            .into_iter()
            .find(|&i| expand_pattern(input, i).map(|p| Path::new(&p).exists()).unwrap_or(false));
        let Some(start) = first_existing else {
            return Err(Error::Input(format!("no frames match pattern `{input}`")));
        };
        let mut i = start;
        loop {
            let p = expand_pattern(input, i)?;
            if !Path::new(&p).exists() {
                break;
            }
            frames.push(read_file(Path::new(&p))?);
            i += 1;
        }
    } else {
        let path = Path::new(input);
        if path.is_dir() {
            let mut names: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| Error::Input(format!("cannot list {}: {e}", path.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().map(|e| e == "pgm").unwrap_or(false))
                .collect();
            names.sort();
            for p in names {
                frames.push(read_file(&p)?);
            }
        } else if path.exists() {
            frames.push(read_file(path)?);
        } else {
            return Err(Error::Input(format!("input `{input}` does not exist")));
        }
    }
    if frames.is_empty() {
        return Err(Error::Input(format!("no frames found at `{input}`")));
    }
    let (w, h) = (frames[0].width(), frames[0].height());
    for (i, f) in frames.iter().enumerate() {
        if f.width() != w || f.height() != h {
            return Err(Error::Input(format!(
                "frame {i} is {}x{}, expected {w}x{h}",
                f.width(),
                f.height()
            )));
        }
    }
    Ok(frames)
}

/// Writes frames through a `%d` pattern (indices from 0) or into a
/// directory as `000000.pgm`, `000001.pgm`, ...
pub fn write_frames(frames: &[Frame], output: &str) -> Result<()> {
    for (i, f) in frames.iter().enumerate() {
        let path = if output.contains('%') {
            PathBuf::from(expand_pattern(output, i)?)
        } else {
            fs::create_dir_all(output)?;
            Path::new(output).join(format!("{i:06}.pgm"))
        };
        write_file(f, &path)?;
    }
    Ok(())
}

/// Raw concatenated Y-plane file: frames of `width * height` bytes.
pub fn load_raw_y(path: &Path, width: usize, height: usize) -> Result<Vec<Frame>> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let frame_len = width * height;
    if frame_len == 0 || bytes.len() % frame_len != 0 {
        return Err(Error::Input(format!(
            "raw file length {} is not a multiple of {width}x{height}",
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(frame_len)
        .map(|c| Frame::new(width, height, c.to_vec()))
        .collect()
}

pub fn write_raw_y(frames: &[Frame], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for f in frames {
        out.extend_from_slice(f.pixels());
    }
    fs::write(path, out).map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_bytes() {
        let f = Frame::new(3, 2, vec![0, 128, 255, 7, 8, 9]).unwrap();
        assert_eq!(decode(&encode(&f)).unwrap(), f);
    }

    #[test]
    fn rejects_ascii_pgm() {
        let err = decode(b"P2\n2 2\n255\n0 1 2 3\n").unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn rejects_wrong_maxval_and_truncation() {
        assert!(decode(b"P5\n2 2\n65535\n\0\0\0\0\0\0\0\0").is_err());
        assert!(decode(b"P5\n4 4\n255\n\0\0").is_err());
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# a comment\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[5, 6]);
        let f = decode(&bytes).unwrap();
        assert_eq!((f.width(), f.height()), (2, 1));
        assert_eq!(f.pixels(), &[5, 6]);
    }

    #[test]
    fn pattern_expansion() {
        assert_eq!(expand_pattern("f/%03d.pgm", 7).unwrap(), "f/007.pgm");
        assert_eq!(expand_pattern("f/%d.pgm", 12).unwrap(), "f/12.pgm");
        assert!(expand_pattern("f/x.pgm", 0).is_err());
    }

    #[test]
    fn loads_sequences_and_rejects_mixed_dims() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().to_str().unwrap();
        for i in 0..3 {
            write_file(&Frame::filled(4, 3, i as u8), Path::new(&format!("{base}/{i:03}.pgm")))
                .unwrap();
        }
        let frames = load_frames(&format!("{base}/%03d.pgm")).unwrap();
        assert_eq!(frames.len(), 3);
        assert_eq!(frames[2].pixels()[0], 2);

        // directory form sees the same files
        assert_eq!(load_frames(base).unwrap().len(), 3);

        write_file(&Frame::filled(5, 3, 0), Path::new(&format!("{base}/003.pgm"))).unwrap();
        assert!(load_frames(&format!("{base}/%03d.pgm")).is_err());

        let empty = tempfile::tempdir().unwrap();
        assert!(load_frames(empty.path().to_str().unwrap()).is_err());
    }

    #[test]
    fn raw_y_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.y");
        let frames = vec![Frame::filled(4, 2, 9), Frame::filled(4, 2, 200)];
        write_raw_y(&frames, &path).unwrap();
        assert_eq!(load_raw_y(&path, 4, 2).unwrap(), frames);
        assert!(load_raw_y(&path, 3, 2).is_err());
    }
}
