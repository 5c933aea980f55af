//! Adapter for an external still-image codec executable (e.g. bpgenc /
//! bpgdec). Images cross the boundary as 8-bit PGM files in a temporary
//! directory; command templates carry {in}, {out} and {qp} placeholders.
//!
//! Configuration runs a probe: a small gradient must round-trip, and two
//! identical encode invocations must produce identical bytes.

use crate::data::{pgm, Frame};
use crate::error::{Error, Result};
use crate::residual::Qp;
use std::process::Command;

#[derive(Clone, Debug)]
pub struct ExternalCodec {
    encode_template: String,
    decode_template: String,
}

impl ExternalCodec {
    /// Parses the `LFP_EXTERNAL_CODEC` convention: encode and decode
    /// templates separated by `;;`.
    pub fn from_env_spec(spec: &str) -> Result<Self> {
        let (enc, dec) = spec.split_once(";;").ok_or_else(|| {
            Error::Config("external codec spec must be `<encode cmd>;;<decode cmd>`".into())
        })?;
        Self::configure(enc.trim(), dec.trim())
    }

    pub fn configure(encode_template: &str, decode_template: &str) -> Result<Self> {
        for (name, t) in [("encode", encode_template), ("decode", decode_template)] {
            if !t.contains("{in}") || !t.contains("{out}") {
                return Err(Error::Config(format!(
                    "{name} template must contain {{in}} and {{out}}: `{t}`"
                )));
            }
        }
        let codec = ExternalCodec {
            encode_template: encode_template.to_string(),
            decode_template: decode_template.to_string(),
        };
        codec.probe()?;
        Ok(codec)
    }

    /// Startup contract: round-trip an 8x8 gradient and check the encoder
    /// is deterministic across two invocations.
    fn probe(&self) -> Result<()> {
        let pixels = (0..64).map(|i| (i * 4) as u8).collect();
        let probe = Frame::new(8, 8, pixels)?;
        let qp = Qp::new(25)?;
        let a = self.encode_image(&probe, qp)?;
        let b = self.encode_image(&probe, qp)?;
        if a != b {
            return Err(Error::Backend(
                "external encoder is not deterministic on the probe image".into(),
            ));
        }
        let back = self.decode_image(&a)?;
        if back.width() != 8 || back.height() != 8 {
            return Err(Error::Backend(format!(
                "external codec probe decoded to {}x{}, expected 8x8",
                back.width(),
                back.height()
            )));
        }
        Ok(())
    }

    fn run(template: &str, input: &std::path::Path, output: &std::path::Path, qp: u8) -> Result<()> {
        let qp_s = qp.to_string();
        let tokens: Vec<String> = template
            .split_whitespace()
            .map(|t| {
                t.replace("{in}", &input.to_string_lossy())
                    .replace("{out}", &output.to_string_lossy())
                    .replace("{qp}", &qp_s)
            })
            .collect();
        let (cmd, args) = tokens
            .split_first()
            .ok_or_else(|| Error::Config("empty codec command template".into()))?;
        let status = Command::new(cmd)
            .args(args)
            .status()
            .map_err(|e| Error::Backend(format!("cannot launch `{cmd}`: {e}")))?;
        if !status.success() {
            return Err(Error::Backend(format!(
                "`{cmd}` exited with status {status}"
            )));
        }
        if !output.exists() {
            return Err(Error::Backend(format!(
                "`{cmd}` produced no output file {}",
                output.display()
            )));
        }
        Ok(())
    }

    pub fn encode_image(&self, image: &Frame, qp: Qp) -> Result<Vec<u8>> {
        let dir = tempfile::tempdir().map_err(|e| Error::Backend(e.to_string()))?;
        let in_path = dir.path().join("in.pgm");
        let out_path = dir.path().join("out.bin");
        pgm::write_file(image, &in_path)?;
        Self::run(&self.encode_template, &in_path, &out_path, qp.get())?;
        std::fs::read(&out_path).map_err(|e| Error::Backend(e.to_string()))
    }

    pub fn decode_image(&self, bytes: &[u8]) -> Result<Frame> {
        let dir = tempfile::tempdir().map_err(|e| Error::Backend(e.to_string()))?;
        let in_path = dir.path().join("in.bin");
        let out_path = dir.path().join("out.pgm");
        std::fs::write(&in_path, bytes).map_err(|e| Error::Backend(e.to_string()))?;
        Self::run(&self.decode_template, &in_path, &out_path, 0)?;
        pgm::read_file(&out_path)
    }
}
