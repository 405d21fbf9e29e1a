//! Array file formats: a structured-text header describing a raw
//! little-endian binary payload stored next to it.
//!
//! Three kinds share the header schema: complex grids, non-Cartesian sample
//! sets (coordinates plus values, optionally density weights), and stacks of
//! per-bin displacement fields. Round trips are bit-exact.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use warpgrid::{ComplexGrid, DisplacementField, NonCartesianSet, Space};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Float32,
    Float64,
    Complex64,
    Complex128,
}

impl Dtype {
    fn bytes_per_element(self) -> usize {
        match self {
            Dtype::Float32 => 4,
            Dtype::Float64 => 8,
            Dtype::Complex64 => 8,
            Dtype::Complex128 => 16,
        }
    }

    fn is_complex(self) -> bool {
        matches!(self, Dtype::Complex64 | Dtype::Complex128)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AxisOrder {
    RowMajor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Endianness {
    Little,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
enum Header {
    ComplexGrid {
        dtype: Dtype,
        shape: Vec<usize>,
        axis_order: AxisOrder,
        endianness: Endianness,
        space: SpaceTag,
        payload: String,
    },
    Samples {
        dtype: Dtype,
        dim: usize,
        count: usize,
        axis_order: AxisOrder,
        endianness: Endianness,
        coords_dtype: Dtype,
        coords_payload: String,
        payload: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        weights_payload: Option<String>,
    },
    DisplacementFields {
        dtype: Dtype,
        bins: usize,
        dim: usize,
        grid_shape: Vec<usize>,
        reference_bin: usize,
        axis_order: AxisOrder,
        endianness: Endianness,
        payload: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SpaceTag {
    Image,
    Kspace,
}

impl From<Space> for SpaceTag {
    fn from(s: Space) -> Self {
        match s {
            Space::Image => SpaceTag::Image,
            Space::KSpace => SpaceTag::Kspace,
        }
    }
}

impl From<SpaceTag> for Space {
    fn from(s: SpaceTag) -> Self {
        match s {
            SpaceTag::Image => Space::Image,
            SpaceTag::Kspace => Space::KSpace,
        }
    }
}

fn payload_path(header_path: &Path, name: &str) -> PathBuf {
    header_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(name)
}

fn payload_name(header_path: &Path, suffix: &str) -> String {
    let base = header_path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| "array".to_string());
    format!("{base}{suffix}")
}

fn write_header(path: &Path, header: &Header) -> Result<()> {
    let text = toml::to_string_pretty(header).context("serializing header")?;
    fs::write(path, text).with_context(|| format!("writing header {}", path.display()))?;
    Ok(())
}

fn read_header(path: &Path) -> Result<Header> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading header {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing header {}", path.display()))
}

fn write_reals(path: &Path, data: &[f64], dtype: Dtype) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * dtype.bytes_per_element());
    match dtype {
        Dtype::Float64 => {
            for v in data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        Dtype::Float32 => {
            for v in data {
                bytes.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        _ => bail!("real payload cannot use a complex dtype"),
    }
    fs::write(path, bytes).with_context(|| format!("writing payload {}", path.display()))?;
    Ok(())
}

fn read_reals(path: &Path, dtype: Dtype, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).with_context(|| format!("reading payload {}", path.display()))?;
    if bytes.len() != expected * dtype.bytes_per_element() {
        bail!(
            "payload {} has {} bytes, expected {}",
            path.display(),
            bytes.len(),
            expected * dtype.bytes_per_element()
        );
    }
    let mut out = Vec::with_capacity(expected);
    match dtype {
        Dtype::Float64 => {
            for c in bytes.chunks_exact(8) {
                out.push(f64::from_le_bytes(c.try_into().unwrap()));
            }
        }
        Dtype::Float32 => {
            for c in bytes.chunks_exact(4) {
                out.push(f32::from_le_bytes(c.try_into().unwrap()) as f64);
            }
        }
        _ => bail!("real payload cannot use a complex dtype"),
    }
    Ok(out)
}

fn write_complex(path: &Path, data: &[Complex64], dtype: Dtype) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * dtype.bytes_per_element());
    match dtype {
        Dtype::Complex128 => {
            for v in data {
                bytes.extend_from_slice(&v.re.to_le_bytes());
                bytes.extend_from_slice(&v.im.to_le_bytes());
            }
        }
        Dtype::Complex64 => {
            for v in data {
                bytes.extend_from_slice(&(v.re as f32).to_le_bytes());
                bytes.extend_from_slice(&(v.im as f32).to_le_bytes());
            }
        }
        _ => bail!("complex payload cannot use a real dtype"),
    }
    fs::write(path, bytes).with_context(|| format!("writing payload {}", path.display()))?;
    Ok(())
}

fn read_complex(path: &Path, dtype: Dtype, expected: usize) -> Result<Vec<Complex64>> {
    if !dtype.is_complex() {
        bail!("expected a complex dtype");
    }
    let bytes = fs::read(path).with_context(|| format!("reading payload {}", path.display()))?;
    if bytes.len() != expected * dtype.bytes_per_element() {
        bail!(
            "payload {} has {} bytes, expected {}",
            path.display(),
            bytes.len(),
            expected * dtype.bytes_per_element()
        );
    }
    let mut out = Vec::with_capacity(expected);
    match dtype {
        Dtype::Complex128 => {
            for c in bytes.chunks_exact(16) {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                out.push(Complex64::new(re, im));
            }
        }
        Dtype::Complex64 => {
            for c in bytes.chunks_exact(8) {
                let re = f32::from_le_bytes(c[..4].try_into().unwrap()) as f64;
                let im = f32::from_le_bytes(c[4..].try_into().unwrap()) as f64;
                out.push(Complex64::new(re, im));
            }
        }
        _ => unreachable!(),
    }
    Ok(out)
}

pub fn write_grid(path: &Path, grid: &ComplexGrid) -> Result<()> {
    let payload = payload_name(path, ".bin");
    let header = Header::ComplexGrid {
        dtype: Dtype::Complex128,
        shape: grid.shape().to_vec(),
        axis_order: AxisOrder::RowMajor,
        endianness: Endianness::Little,
        space: grid.space().into(),
        payload: payload.clone(),
    };
    write_header(path, &header)?;
    write_complex(&payload_path(path, &payload), grid.data(), Dtype::Complex128)
}

pub fn read_grid(path: &Path) -> Result<ComplexGrid> {
    match read_header(path)? {
        Header::ComplexGrid {
            dtype,
            shape,
            space,
            payload,
            ..
        } => {
            let n: usize = shape.iter().product();
            let data = read_complex(&payload_path(path, &payload), dtype, n)?;
            Ok(ComplexGrid::new(shape, space.into(), data)?)
        }
        _ => bail!("{} is not a complex grid file", path.display()),
    }
}

pub fn write_samples(
    path: &Path,
    set: &NonCartesianSet,
    weights: Option<&[f64]>,
) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != set.count() {
            bail!("weights length {} != sample count {}", w.len(), set.count());
        }
    }
    let coords_payload = payload_name(path, ".coords.bin");
    let payload = payload_name(path, ".values.bin");
    let weights_payload = weights.map(|_| payload_name(path, ".weights.bin"));
    let header = Header::Samples {
        dtype: Dtype::Complex128,
        dim: set.dim(),
        count: set.count(),
        axis_order: AxisOrder::RowMajor,
        endianness: Endianness::Little,
        coords_dtype: Dtype::Float64,
        coords_payload: coords_payload.clone(),
        payload: payload.clone(),
        weights_payload: weights_payload.clone(),
    };
    write_header(path, &header)?;
    write_reals(&payload_path(path, &coords_payload), set.coords(), Dtype::Float64)?;
    write_complex(&payload_path(path, &payload), set.values(), Dtype::Complex128)?;
    if let (Some(w), Some(name)) = (weights, weights_payload) {
        write_reals(&payload_path(path, &name), w, Dtype::Float64)?;
    }
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<(NonCartesianSet, Option<Vec<f64>>)> {
    match read_header(path)? {
        Header::Samples {
            dtype,
            dim,
            count,
            coords_dtype,
            coords_payload,
            payload,
            weights_payload,
            ..
        } => {
            let coords = read_reals(&payload_path(path, &coords_payload), coords_dtype, count * dim)?;
            let values = read_complex(&payload_path(path, &payload), dtype, count)?;
            let weights = weights_payload
                .map(|name| read_reals(&payload_path(path, &name), Dtype::Float64, count))
                .transpose()?;
            Ok((NonCartesianSet::new(dim, coords, values)?, weights))
        }
        _ => bail!("{} is not a sample-set file", path.display()),
    }
}

pub fn write_field_stack(
    path: &Path,
    fields: &[DisplacementField],
    reference_bin: usize,
) -> Result<()> {
    if fields.is_empty() {
        bail!("field stack needs at least one bin");
    }
    let shape = fields[0].shape().to_vec();
    for f in fields {
        if f.shape() != shape.as_slice() {
            bail!("field stack has inconsistent grid shapes");
        }
    }
    let payload = payload_name(path, ".bin");
    let header = Header::DisplacementFields {
        dtype: Dtype::Float64,
        bins: fields.len(),
        dim: shape.len(),
        grid_shape: shape,
        reference_bin,
        axis_order: AxisOrder::RowMajor,
        endianness: Endianness::Little,
        payload: payload.clone(),
    };
    write_header(path, &header)?;
    let mut flat = Vec::new();
    for f in fields {
        flat.extend_from_slice(f.offsets());
    }
    write_reals(&payload_path(path, &payload), &flat, Dtype::Float64)
}

pub struct FieldStack {
    pub fields: Vec<DisplacementField>,
    pub reference_bin: usize,
}

pub fn read_field_stack(path: &Path) -> Result<FieldStack> {
    match read_header(path)? {
        Header::DisplacementFields {
            dtype,
            bins,
            dim,
            grid_shape,
            reference_bin,
            payload,
            ..
        } => {
            if grid_shape.len() != dim {
                bail!("field stack dim does not match its grid shape");
            }
            let nvox: usize = grid_shape.iter().product();
            let flat = read_reals(&payload_path(path, &payload), dtype, bins * dim * nvox)?;
            let mut fields = Vec::with_capacity(bins);
            for b in 0..bins {
                let offsets = flat[b * dim * nvox..(b + 1) * dim * nvox].to_vec();
                fields.push(DisplacementField::new(grid_shape.clone(), offsets)?);
            }
            Ok(FieldStack {
                fields,
                reference_bin,
            })
        }
        _ => bail!("{} is not a displacement-field stack", path.display()),
    }
}

/// Read and validate per-bin displacement fields for a reconstruction:
/// bin count and grid shape must match the model, entries must be finite
/// (enforced on construction), and the reference bin's field must be
/// identically zero.
pub fn ingest_displacement_fields(
    path: &Path,
    expected_bins: usize,
    grid_shape: &[usize],
) -> Result<FieldStack> {
    let stack = read_field_stack(path)?;
    if stack.fields.len() != expected_bins {
        bail!(
            "field stack has {} bins, reconstruction needs {}",
            stack.fields.len(),
            expected_bins
        );
    }
    if stack.reference_bin >= stack.fields.len() {
        bail!("reference bin {} out of range", stack.reference_bin);
    }
    for f in &stack.fields {
        if f.shape() != grid_shape {
            bail!(
                "field grid {:?} does not match the model grid {:?}",
                f.shape(),
                grid_shape
            );
        }
    }
    if !stack.fields[stack.reference_bin].is_zero() {
        bail!("reference bin field must be identically zero");
    }
    Ok(stack)
}
