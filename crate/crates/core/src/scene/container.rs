use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{HsiCube, SpectralGrid};

/// Magic string opening every cube container.
pub const MAGIC: &str = "OPSINHSI1";

/// Writes a cube to the container format.
///
/// Layout: a text header (`OPSINHSI1`, then `height=`, `width=`, `bands=`,
/// `classes=`, `wavelengths=` comma-separated nm, terminated by a blank
/// line), then the raw little-endian f64 payload ordered x-major, then y,
/// then band, then one label byte per pixel in the same x-major pixel order.
/// Wavelengths round-trip exactly: they are printed in shortest form that
/// parses back to the identical f64.
pub fn save_scene(cube: &HsiCube, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);

    let wavelengths = cube
        .grid()
        .wavelengths()
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    write!(
        w,
        "{MAGIC}\nheight={}\nwidth={}\nbands={}\nclasses={}\nwavelengths={}\n\n",
        cube.height(),
        cube.width(),
        cube.bands(),
        cube.num_classes(),
        wavelengths
    )
    .map_err(io_err)?;

    for x in 0..cube.width() {
        for y in 0..cube.height() {
            for b in 0..cube.bands() {
                w.write_all(&cube.value(x, y, b).to_le_bytes()).map_err(io_err)?;
            }
        }
    }
    for x in 0..cube.width() {
        for y in 0..cube.height() {
            w.write_all(&[cube.label(x, y)]).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

fn read_header_line(reader: &mut impl Read, path: &Path) -> Result<String> {
    // Byte-at-a-time keeps the reader positioned exactly at the payload.
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = reader.read(&mut byte).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Err(Error::parse(path, "unexpected end of header"));
        }
        if byte[0] == b'\n' {
            break;
        }
        line.push(byte[0]);
        if line.len() > 1 << 20 {
            return Err(Error::parse(path, "header line exceeds 1 MiB"));
        }
    }
    String::from_utf8(line).map_err(|_| Error::parse(path, "header is not UTF-8"))
}

fn header_field<'a>(line: &'a str, key: &str, path: &Path) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| Error::parse(path, format!("expected `{key}=...`, got `{line}`")))
}

/// Reads a cube back from the container format, re-checking every cube
/// invariant (payload length, finite non-negative intensities, label range).
pub fn load_scene(path: impl AsRef<Path>) -> Result<HsiCube> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let magic = read_header_line(&mut r, path)?;
    if magic != MAGIC {
        return Err(Error::parse(path, format!("bad magic `{magic}`")));
    }
    let parse_usize = |line: &str, key: &str| -> Result<usize> {
        header_field(line, key, path)?
            .parse()
            .map_err(|e| Error::parse(path, format!("{key}: {e}")))
    };
    let height = parse_usize(&read_header_line(&mut r, path)?, "height")?;
    let width = parse_usize(&read_header_line(&mut r, path)?, "width")?;
    let bands = parse_usize(&read_header_line(&mut r, path)?, "bands")?;
    let classes = parse_usize(&read_header_line(&mut r, path)?, "classes")?;
    let wl_line = read_header_line(&mut r, path)?;
    let wavelengths: Vec<f64> = header_field(&wl_line, "wavelengths", path)?
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| Error::parse(path, format!("wavelength `{s}`: {e}")))
        })
        .collect::<Result<_>>()?;
    let blank = read_header_line(&mut r, path)?;
    if !blank.is_empty() {
        return Err(Error::parse(
            path,
            format!("expected blank line after header, got `{blank}`"),
        ));
    }

    if wavelengths.len() != bands {
        return Err(Error::parse(
            path,
            format!(
                "header declares {bands} bands but lists {} wavelengths",
                wavelengths.len()
            ),
        ));
    }
    let grid = SpectralGrid::new(wavelengths)?;

    let pixel_count = height
        .checked_mul(width)
        .ok_or_else(|| Error::parse(path, "dimension overflow"))?;
    let value_count = pixel_count
        .checked_mul(bands)
        .ok_or_else(|| Error::parse(path, "dimension overflow"))?;

    let mut payload = vec![0u8; value_count * 8];
    r.read_exact(&mut payload).map_err(|_| {
        Error::parse(
            path,
            format!("payload truncated: expected {} bytes of samples", value_count * 8),
        )
    })?;
    let mut label_bytes = vec![0u8; pixel_count];
    r.read_exact(&mut label_bytes).map_err(|_| {
        Error::parse(path, format!("labels truncated: expected {pixel_count} bytes"))
    })?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::parse(path, "trailing bytes after labels"));
    }

    // Undo the x-major file order into the pixel-major in-memory order.
    let mut data = vec![0.0; value_count];
    let mut offset = 0;
    for x in 0..width {
        for y in 0..height {
            for b in 0..bands {
                let bytes: [u8; 8] = payload[offset..offset + 8].try_into().expect("8 bytes");
                data[(y * width + x) * bands + b] = f64::from_le_bytes(bytes);
                offset += 8;
            }
        }
    }
    let mut labels = vec![0u8; pixel_count];
    let mut offset = 0;
    for x in 0..width {
        for y in 0..height {
            labels[y * width + x] = label_bytes[offset];
            offset += 1;
        }
    }

    HsiCube::new(height, width, grid, data, labels, classes)
}
