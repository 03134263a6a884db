//! Binary checkpoints for fields and field trajectories.
//!
//! Field record (little endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `VBSF` |
//! | 2     | format version (`u16`) |
//! | 2     | grid size `N` (`u16`) |
//! | 1     | mean-zero flag (`0` or `1`) |
//! | 16 N^2 | coefficients as `(re, im)` `f64` pairs, row-major in FFT order |
//!
//! Trajectory: magic `VBST`, version `u16`, step count `L` (`u32`), `dt` and
//! `nu` (`f64`), followed by `L + 1` field records.

use crate::engine::PicardIterate;
use crate::error::{Error, Result};
use crate::field::{check_grid_size, ScalarField, MAX_GRID_SIZE};
use crate::oracle::VorticityTrajectory;
use num_complex::Complex64;

pub const FIELD_MAGIC: [u8; 4] = *b"VBSF";
pub const TRAJECTORY_MAGIC: [u8; 4] = *b"VBST";
pub const FORMAT_VERSION: u16 = 1;
pub const MAX_TRAJECTORY_STEPS: usize = 1 << 20;

const FIELD_HEADER: usize = 9;
const TRAJECTORY_HEADER: usize = 26;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < k {
            return Err(Error::format(format!(
                "truncated input: {what} needs {k} bytes at offset {}, {} left",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn magic(&mut self, want: [u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != want {
            return Err(Error::format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(&want)
            )));
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        let v = self.u16("version")?;
        if v != FORMAT_VERSION {
            return Err(Error::format(format!("unsupported format version {v}")));
        }
        Ok(())
    }

    fn field(&mut self) -> Result<ScalarField> {
        self.magic(FIELD_MAGIC)?;
        self.version()?;
        let n = self.u16("grid size")? as usize;
        if n > MAX_GRID_SIZE {
            return Err(Error::format(format!(
                "grid size {n} exceeds {MAX_GRID_SIZE}"
            )));
        }
        check_grid_size(n).map_err(|e| Error::format(e.to_string()))?;
        let mean_zero = match self.take(1, "mean-zero flag")?[0] {
            0 => false,
            1 => true,
            other => {
                return Err(Error::format(format!(
                    "mean-zero flag must be 0 or 1, got {other}"
                )))
            }
        };
        let raw = self.take(16 * n * n, "coefficients")?;
        let modes = raw
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        ScalarField::from_modes(n, modes, mean_zero).map_err(|e| Error::format(e.to_string()))
    }
}

fn write_field(out: &mut Vec<u8>, f: &ScalarField) -> Result<()> {
    let n = u16::try_from(f.n())
        .map_err(|_| Error::config(format!("grid size {} too large", f.n())))?;
    out.extend_from_slice(&FIELD_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.push(u8::from(f.is_mean_zero()));
    for c in f.modes() {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    Ok(())
}

pub fn encode_field(f: &ScalarField) -> Vec<u8> {
    let mut out = Vec::with_capacity(FIELD_HEADER + 16 * f.n() * f.n());
    write_field(&mut out, f).expect("grid sizes are bounded by MAX_GRID_SIZE");
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<ScalarField> {
    let mut r = Reader { bytes, pos: 0 };
    let f = r.field()?;
    if r.remaining() != 0 {
        return Err(Error::format(format!(
            "{} trailing bytes after field",
            r.remaining()
        )));
    }
    Ok(f)
}

/// Decoded trajectory checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCheckpoint {
    pub dt: f64,
    pub nu: f64,
    pub fields: Vec<ScalarField>,
}

impl TrajectoryCheckpoint {
    pub fn steps(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn n(&self) -> usize {
        self.fields[0].n()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    pub fn into_trajectory(self) -> Result<VorticityTrajectory> {
        VorticityTrajectory::from_parts(self.fields, self.nu, self.dt)
    }

    pub fn into_iterate(self, iteration: usize, alpha: f64) -> Result<PicardIterate> {
        PicardIterate::new(self.fields, iteration, alpha, self.dt)
    }
}

pub fn encode_trajectory(fields: &[ScalarField], dt: f64, nu: f64) -> Result<Vec<u8>> {
    if fields.len() < 2 || fields.len() - 1 > MAX_TRAJECTORY_STEPS {
        return Err(Error::config(format!(
            "trajectory needs between 1 and {MAX_TRAJECTORY_STEPS} steps, got {} fields",
            fields.len()
        )));
    }
    let n = fields[0].n();
    if fields.iter().any(|f| f.n() != n) {
        return Err(Error::config("trajectory fields have mixed grid sizes"));
    }
    let steps = (fields.len() - 1) as u32;
    let mut out =
        Vec::with_capacity(TRAJECTORY_HEADER + fields.len() * (FIELD_HEADER + 16 * n * n));
    out.extend_from_slice(&TRAJECTORY_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&steps.to_le_bytes());
    out.extend_from_slice(&dt.to_le_bytes());
    out.extend_from_slice(&nu.to_le_bytes());
    for f in fields {
        write_field(&mut out, f)?;
    }
    Ok(out)
}

pub fn decode_trajectory(bytes: &[u8]) -> Result<TrajectoryCheckpoint> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(TRAJECTORY_MAGIC)?;
    r.version()?;
    let steps = r.u32("step count")? as usize;
    let dt = r.f64("dt")?;
    let nu = r.f64("nu")?;
    if steps == 0 || steps > MAX_TRAJECTORY_STEPS {
        return Err(Error::format(format!(
            "step count {steps} outside 1..={MAX_TRAJECTORY_STEPS}"
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) || !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::format(format!(
            "invalid header values dt = {dt}, nu = {nu}"
        )));
    }
    let smallest_record = FIELD_HEADER + 16 * 4 * 4;
    if r.remaining() / smallest_record < steps + 1 {
        return Err(Error::format(format!(
            "{} bytes cannot hold {} field records",
            r.remaining(),
            steps + 1
        )));
    }
    let mut fields = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let f = r
            .field()
            .map_err(|e| Error::format(format!("field {i}: {e}")))?;
        if i > 0 && f.n() != fields.first().map_or(0, |g: &ScalarField| g.n()) {
            return Err(Error::format(format!(
                "field {i} has a different grid size"
            )));
        }
        fields.push(f);
    }
    if r.remaining() != 0 {
        return Err(Error::format(format!(
            "{} trailing bytes after trajectory",
            r.remaining()
        )));
    }
    Ok(TrajectoryCheckpoint { dt, nu, fields })
}
