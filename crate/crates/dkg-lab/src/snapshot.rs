//! Binary field snapshots.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic   4 bytes  "DKG2"
//! version u32      currently 1
//! n       u32      points per axis
//! L       f64      box half-width
//! t       f64      slice time
//! count   u32      number of field records
//! then per field:
//!   name_len u32, name UTF-8,
//!   kind     u8   (0 = real64, 1 = complex128 interleaved re/im),
//!   payload  n*n elements, row-major
//! ```
//!
//! Round trips are bit-exact; a resumed run rebuilds only the symbol tables.

use std::io::{Read, Write};
use std::path::Path;

use dkg_core::evolver::{AuxField, SimState};
use dkg_core::grid::{ScalarState, SpectralGrid, SpinorField, C64};

use crate::LabError;

pub const MAGIC: &[u8; 4] = b"DKG2";
pub const VERSION: u32 = 1;

const KIND_REAL: u8 = 0;
const KIND_COMPLEX: u8 = 1;

pub struct FieldRecord {
    pub name: String,
    pub kind: u8,
    pub real: Vec<f64>,
    pub complex: Vec<C64>,
}

fn io_err(e: std::io::Error, path: &Path) -> LabError {
    LabError::Io(format!("{}: {e}", path.display()))
}

fn write_field_c(w: &mut impl Write, name: &str, data: &[C64]) -> std::io::Result<()> {
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&[KIND_COMPLEX])?;
    for z in data {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn write_field_r(w: &mut impl Write, name: &str, data: &[f64]) -> std::io::Result<()> {
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&[KIND_REAL])?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_snapshot(path: &Path, state: &SimState) -> Result<(), LabError> {
    let file = std::fs::File::create(path).map_err(|e| io_err(e, path))?;
    let mut w = std::io::BufWriter::new(file);
    let inner = |w: &mut std::io::BufWriter<std::fs::File>| -> std::io::Result<()> {
        let grid = state.grid();
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(grid.n() as u32).to_le_bytes())?;
        w.write_all(&grid.half_width().to_le_bytes())?;
        w.write_all(&state.t.to_le_bytes())?;
        let count: u32 = if state.aux.is_some() { 8 } else { 4 };
        w.write_all(&count.to_le_bytes())?;
        write_field_c(w, "psi0", &state.psi.c0)?;
        write_field_c(w, "psi1", &state.psi.c1)?;
        write_field_r(w, "v", &state.v.u)?;
        write_field_r(w, "vt", &state.v.ut)?;
        if let Some(aux) = &state.aux {
            write_field_c(w, "aux0", &aux.p0)?;
            write_field_c(w, "aux0t", &aux.p0t)?;
            write_field_c(w, "aux1", &aux.p1)?;
            write_field_c(w, "aux1t", &aux.p1t)?;
        }
        w.flush()
    };
    inner(&mut w).map_err(|e| io_err(e, path))
}

pub struct SnapshotHeader {
    pub version: u32,
    pub n: usize,
    pub half_width: f64,
    pub t: f64,
    pub field_count: u32,
}

fn read_exact_checked(
    r: &mut impl Read,
    buf: &mut [u8],
    what: &str,
    path: &Path,
) -> Result<(), LabError> {
    r.read_exact(buf).map_err(|e| {
        LabError::Io(format!("{}: truncated snapshot while reading {what}: {e}", path.display()))
    })
}

fn read_u32(r: &mut impl Read, what: &str, path: &Path) -> Result<u32, LabError> {
    let mut b = [0u8; 4];
    read_exact_checked(r, &mut b, what, path)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read, what: &str, path: &Path) -> Result<f64, LabError> {
    let mut b = [0u8; 8];
    read_exact_checked(r, &mut b, what, path)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_header(r: &mut impl Read, path: &Path) -> Result<SnapshotHeader, LabError> {
    let mut magic = [0u8; 4];
    read_exact_checked(r, &mut magic, "magic", path)?;
    if &magic != MAGIC {
        return Err(LabError::Io(format!(
            "{}: bad magic {:?} (expected {:?})",
            path.display(),
            magic,
            MAGIC
        )));
    }
    let version = read_u32(r, "version", path)?;
    if version != VERSION {
        return Err(LabError::Io(format!(
            "{}: unsupported snapshot version {version} (expected {VERSION})",
            path.display()
        )));
    }
    let n = read_u32(r, "grid size", path)? as usize;
    let half_width = read_f64(r, "half width", path)?;
    let t = read_f64(r, "time", path)?;
    let field_count = read_u32(r, "field count", path)?;
    Ok(SnapshotHeader { version, n, half_width, t, field_count })
}

pub fn read_fields(
    r: &mut impl Read,
    header: &SnapshotHeader,
    path: &Path,
) -> Result<Vec<FieldRecord>, LabError> {
    let m = header.n * header.n;
    let mut fields = Vec::with_capacity(header.field_count as usize);
    for _ in 0..header.field_count {
        let name_len = read_u32(r, "field name length", path)? as usize;
        if name_len > 4096 {
            return Err(LabError::Io(format!(
                "{}: implausible field name length {name_len}",
                path.display()
            )));
        }
        let mut name_buf = vec![0u8; name_len];
        read_exact_checked(r, &mut name_buf, "field name", path)?;
        let name = String::from_utf8(name_buf)
            .map_err(|_| LabError::Io(format!("{}: field name is not UTF-8", path.display())))?;
        let mut kind = [0u8; 1];
        read_exact_checked(r, &mut kind, "field kind", path)?;
        let mut record = FieldRecord {
            name: name.clone(),
            kind: kind[0],
            real: Vec::new(),
            complex: Vec::new(),
        };
        match kind[0] {
            KIND_REAL => {
                let mut buf = vec![0u8; m * 8];
                read_exact_checked(r, &mut buf, &format!("payload of '{name}'"), path)?;
                record.real = buf
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
            }
            KIND_COMPLEX => {
                let mut buf = vec![0u8; m * 16];
                read_exact_checked(r, &mut buf, &format!("payload of '{name}'"), path)?;
                record.complex = buf
                    .chunks_exact(16)
                    .map(|c| {
                        C64::new(
                            f64::from_le_bytes(c[..8].try_into().unwrap()),
                            f64::from_le_bytes(c[8..].try_into().unwrap()),
                        )
                    })
                    .collect();
            }
            other => {
                return Err(LabError::Io(format!(
                    "{}: unknown element kind {other} for field '{name}'",
                    path.display()
                )))
            }
        }
        fields.push(record);
    }
    Ok(fields)
}

pub fn read_snapshot(path: &Path) -> Result<SimState, LabError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(e, path))?;
    let mut r = std::io::BufReader::new(file);
    let header = read_header(&mut r, path)?;
    let fields = read_fields(&mut r, &header, path)?;
    let grid = SpectralGrid::new(header.n, header.half_width)
        .map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;

    let take_c = |name: &str| -> Result<Vec<C64>, LabError> {
        fields
            .iter()
            .find(|f| f.name == name && f.kind == KIND_COMPLEX)
            .map(|f| f.complex.clone())
            .ok_or_else(|| {
                LabError::Io(format!("{}: missing complex field '{name}'", path.display()))
            })
    };
    let take_r = |name: &str| -> Result<Vec<f64>, LabError> {
        fields
            .iter()
            .find(|f| f.name == name && f.kind == KIND_REAL)
            .map(|f| f.real.clone())
            .ok_or_else(|| {
                LabError::Io(format!("{}: missing real field '{name}'", path.display()))
            })
    };

    let psi = SpinorField { grid: grid.clone(), c0: take_c("psi0")?, c1: take_c("psi1")? };
    let v = ScalarState { grid: grid.clone(), u: take_r("v")?, ut: take_r("vt")? };
    let aux = if fields.iter().any(|f| f.name == "aux0") {
        Some(AuxField {
            grid: grid.clone(),
            p0: take_c("aux0")?,
            p0t: take_c("aux0t")?,
            p1: take_c("aux1")?,
            p1t: take_c("aux1t")?,
        })
    } else {
        None
    };
    Ok(SimState { t: header.t, psi, v, aux })
}

#[cfg(test)]
mod tests {
    use super::*;
    use dkg_core::spinor::Spinor;

    fn sample_state(with_aux: bool) -> SimState {
        let grid = SpectralGrid::new(32, 6.0).unwrap();
        let psi = SpinorField::from_fn(&grid, |x, y| {
            Spinor::new(C64::new(x * 0.1, y * 0.2), C64::new(-y, x * x * 0.01))
        });
        let v = ScalarState::from_fn(&grid, |x, y| x + 2.0 * y, |x, _| x * 0.5);
        let aux = with_aux.then(|| {
            let mut a = AuxField::zeros(&grid);
            for p in 0..a.p0.len() {
                a.p0[p] = C64::new(p as f64 * 1e-3, -(p as f64) * 1e-4);
                a.p1t[p] = C64::new(0.25, p as f64);
            }
            a
        });
        SimState { t: 1.375, psi, v, aux }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for with_aux in [false, true] {
            let state = sample_state(with_aux);
            let path = dir.path().join(format!("s{with_aux}.dkg2"));
            write_snapshot(&path, &state).unwrap();
            let back = read_snapshot(&path).unwrap();
            assert_eq!(back.t.to_bits(), state.t.to_bits());
            for p in 0..state.psi.c0.len() {
                assert_eq!(back.psi.c0[p].re.to_bits(), state.psi.c0[p].re.to_bits());
                assert_eq!(back.psi.c1[p].im.to_bits(), state.psi.c1[p].im.to_bits());
                assert_eq!(back.v.u[p].to_bits(), state.v.u[p].to_bits());
                assert_eq!(back.v.ut[p].to_bits(), state.v.ut[p].to_bits());
            }
            assert_eq!(back.aux.is_some(), with_aux);
            if let (Some(a), Some(b)) = (&back.aux, &state.aux) {
                for p in 0..a.p0.len() {
                    assert_eq!(a.p0[p].re.to_bits(), b.p0[p].re.to_bits());
                    assert_eq!(a.p1t[p].im.to_bits(), b.p1t[p].im.to_bits());
                }
            }
        }
    }

    #[test]
    fn zero_state_round_trip() {
        let grid = SpectralGrid::new(16, 2.0).unwrap();
        let state = SimState {
            t: 0.0,
            psi: SpinorField::zeros(&grid),
            v: ScalarState::zeros(&grid),
            aux: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zero.dkg2");
        write_snapshot(&path, &state).unwrap();
        let back = read_snapshot(&path).unwrap();
        assert!(back.psi.c0.iter().all(|z| z.re == 0.0 && z.im == 0.0));
    }

    #[test]
    fn unknown_field_kind_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kind.dkg2");
        write_snapshot(&path, &sample_state(false)).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Header is 4+4+4+8+8+4 = 32 bytes; first field: name_len (4) +
        // "psi0" (4) + kind byte.
        bytes[40] = 7;
        std::fs::write(&path, &bytes).unwrap();
        let err = read_snapshot(&path).unwrap_err().to_string();
        assert!(err.contains("unknown element kind"), "{err}");
    }

    #[test]
    fn corrupted_magic_and_truncation_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.dkg2");
        let state = sample_state(false);
        write_snapshot(&path, &state).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        let err = read_snapshot(&path).unwrap_err().to_string();
        assert!(err.contains("bad magic"), "{err}");

        let state_bytes = {
            bytes[0] = b'D';
            bytes.truncate(bytes.len() / 2);
            bytes
        };
        std::fs::write(&path, &state_bytes).unwrap();
        let err = read_snapshot(&path).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }
}
