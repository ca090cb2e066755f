//! Uniform periodic grid fields and the centered discrete Fourier pair.
//!
//! Sample j on axis i sits at x = -L_i + 2L_i·j/n; frequency index u maps
//! to ξ = (u - n/2)/(2L_i). The forward transform times the cell volume
//! (Π 2L_i/n) approximates ℱf(ξ) = ∫ e^{-2πi⟨ξ,x⟩} f(x) dx at those ξ, and
//! the inverse sum times Π 1/(2L_i) undoes it exactly on the grid, so the
//! pair is unitary with respect to the cell-weighted norms.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::packets::GaussianPacket;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Position,
    Frequency,
}

/// Complex samples of a function on a uniform periodic box, m ∈ {1, 2}.
#[derive(Debug, Clone)]
pub struct GridField {
    m: usize,
    half_widths: Vec<f64>,
    n: usize,
    space: Space,
    values: Vec<Complex64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldMeta {
    m: usize,
    #[serde(rename = "L")]
    l: Vec<f64>,
    n: usize,
    space: Space,
}

impl GridField {
    pub fn new(
        m: usize,
        half_widths: Vec<f64>,
        n: usize,
        space: Space,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        if m == 0 || m > 2 {
            return Err(Error::Dimension(format!("grid fields support m in {{1, 2}}, got {m}")));
        }
        if half_widths.len() != m || half_widths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidInput("need one positive half-width per axis".into()));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "n must be a power of two >= 16, got {n}"
            )));
        }
        if values.len() != n.pow(m as u32) {
            return Err(Error::InvalidInput(format!(
                "expected {} values, got {}",
                n.pow(m as u32),
                values.len()
            )));
        }
        Ok(Self {
            m,
            half_widths,
            n,
            space,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn half_widths(&self) -> &[f64] {
        &self.half_widths
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Position coordinate of sample index j on the given axis.
    pub fn coord(&self, axis: usize, j: usize) -> f64 {
        let l = self.half_widths[axis];
        -l + 2.0 * l * j as f64 / self.n as f64
    }

    /// Frequency coordinate of sample index u on the given axis.
    pub fn freq(&self, axis: usize, u: usize) -> f64 {
        (u as isize - (self.n / 2) as isize) as f64 / (2.0 * self.half_widths[axis])
    }

    /// Coordinates of the flat sample index, in the field's own space.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let pick = |axis: usize, j: usize| match self.space {
            Space::Position => self.coord(axis, j),
            Space::Frequency => self.freq(axis, j),
        };
        match self.m {
            1 => vec![pick(0, flat)],
            _ => vec![pick(0, flat / self.n), pick(1, flat % self.n)],
        }
    }

    /// Cell volume of the grid in its own space.
    pub fn cell_volume(&self) -> f64 {
        match self.space {
            Space::Position => self
                .half_widths
                .iter()
                .map(|l| 2.0 * l / self.n as f64)
                .product(),
            Space::Frequency => self.half_widths.iter().map(|l| 1.0 / (2.0 * l)).product(),
        }
    }

    /// Cell-volume-weighted L² norm.
    pub fn norm_l2(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        (sum * self.cell_volume()).sqrt()
    }

    /// Forward DFT onto the centered frequency grid.
    pub fn dft(&self) -> Result<GridField> {
        if self.space != Space::Position {
            return Err(Error::State("dft expects a position-space field".into()));
        }
        let mut values = self.values.clone();
        checkerboard(&mut values, self.m, self.n);
        fft_all_axes(&mut values, self.m, self.n, FftDirection::Forward);
        checkerboard(&mut values, self.m, self.n);
        let cv: f64 = self
            .half_widths
            .iter()
            .map(|l| 2.0 * l / self.n as f64)
            .product();
        for v in values.iter_mut() {
            *v *= cv;
        }
        GridField::new(
            self.m,
            self.half_widths.clone(),
            self.n,
            Space::Frequency,
            values,
        )
    }

    /// Inverse DFT back onto the position grid; exact round trip.
    pub fn idft(&self) -> Result<GridField> {
        if self.space != Space::Frequency {
            return Err(Error::State("idft expects a frequency-space field".into()));
        }
        let mut values = self.values.clone();
        checkerboard(&mut values, self.m, self.n);
        fft_all_axes(&mut values, self.m, self.n, FftDirection::Inverse);
        checkerboard(&mut values, self.m, self.n);
        let scale: f64 = self.half_widths.iter().map(|l| 1.0 / (2.0 * l)).product();
        for v in values.iter_mut() {
            *v *= scale;
        }
        GridField::new(
            self.m,
            self.half_widths.clone(),
            self.n,
            Space::Position,
            values,
        )
    }

    /// CSV dump: header `x1[,x2],re,im` (or `xi1[,xi2],…` in frequency
    /// space), rows lexicographic in sample index, 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let base = match self.space {
            Space::Position => "x",
            Space::Frequency => "xi",
        };
        let mut out = String::new();
        match self.m {
            1 => out.push_str(&format!("{base}1,re,im\n")),
            _ => out.push_str(&format!("{base}1,{base}2,re,im\n")),
        }
        for (flat, v) in self.values.iter().enumerate() {
            let point = self.point(flat);
            for c in &point {
                out.push_str(&format!("{c:.16e},"));
            }
            out.push_str(&format!("{:.16e},{:.16e}\n", v.re, v.im));
        }
        out
    }

    /// Grid metadata as JSON: `{"m":…, "L":[…], "n":…, "space":…}`.
    pub fn metadata_json(&self) -> String {
        serde_json::to_string(&FieldMeta {
            m: self.m,
            l: self.half_widths.clone(),
            n: self.n,
            space: self.space,
        })
        .expect("metadata serializes")
    }

    /// Rebuilds a field from its CSV dump and metadata JSON.
    pub fn from_csv_str(csv: &str, metadata_json: &str) -> Result<Self> {
        let meta: FieldMeta = serde_json::from_str(metadata_json)
            .map_err(|e| Error::Parse(format!("field metadata: {e}")))?;
        let mut lines = csv.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty field CSV".into()))?;
        let cols = header.split(',').count();
        if cols != meta.m + 2 {
            return Err(Error::Parse(format!(
                "field CSV header has {cols} columns, expected {}",
                meta.m + 2
            )));
        }
        let mut values = Vec::new();
        for (idx, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != meta.m + 2 {
                return Err(Error::Parse(format!("bad field CSV row {}", idx + 2)));
            }
            let re: f64 = parts[meta.m]
                .parse()
                .map_err(|e| Error::Parse(format!("row {}: {e}", idx + 2)))?;
            let im: f64 = parts[meta.m + 1]
                .parse()
                .map_err(|e| Error::Parse(format!("row {}: {e}", idx + 2)))?;
            values.push(Complex64::new(re, im));
        }
        GridField::new(meta.m, meta.l, meta.n, meta.space, values)
    }
}

/// Samples a callback on the position grid.
pub fn grid_sample<F>(source: F, half_widths: &[f64], n: usize, m: usize) -> Result<GridField>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    if m == 0 || m > 2 {
        return Err(Error::Dimension(format!("grid sampling supports m in {{1, 2}}, got {m}")));
    }
    if half_widths.len() != m {
        return Err(Error::InvalidInput("need one half-width per axis".into()));
    }
    let total = n
        .checked_pow(m as u32)
        .ok_or_else(|| Error::InvalidInput("grid too large".into()))?;
    let shell = GridField::new(m, half_widths.to_vec(), n, Space::Position, vec![
        Complex64::default();
        total
    ])?;
    let values: Vec<Complex64> = (0..total)
        .into_par_iter()
        .map(|flat| source(&shell.point(flat)))
        .collect();
    GridField::new(m, half_widths.to_vec(), n, Space::Position, values)
}

/// Samples a Gaussian packet on the position grid.
pub fn grid_sample_packet(packet: &GaussianPacket, half_widths: &[f64], n: usize) -> Result<GridField> {
    grid_sample(|x| packet.eval(x), half_widths, n, packet.dim())
}

/// Multiplies by (-1)^{j1+…+jm}; self-inverse companion of the centered
/// index convention.
fn checkerboard(values: &mut [Complex64], m: usize, n: usize) {
    match m {
        1 => {
            for (j, v) in values.iter_mut().enumerate() {
                if j % 2 == 1 {
                    *v = -*v;
                }
            }
        }
        _ => {
            values.par_chunks_mut(n).enumerate().for_each(|(j0, row)| {
                for (j1, v) in row.iter_mut().enumerate() {
                    if (j0 + j1) % 2 == 1 {
                        *v = -*v;
                    }
                }
            });
        }
    }
}

fn fft_rows(values: &mut [Complex64], n: usize, fft: &Arc<dyn Fft<f64>>) {
    values.par_chunks_mut(n).for_each_init(
        || vec![Complex64::default(); fft.get_inplace_scratch_len()],
        |scratch, row| fft.process_with_scratch(row, scratch),
    );
}

fn transpose_square(values: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); values.len()];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = values[j * n + i];
        }
    });
    out
}

pub(crate) fn fft_all_axes(values: &mut [Complex64], m: usize, n: usize, direction: FftDirection) {
    let fft = FftPlanner::new().plan_fft(n, direction);
    fft_rows(values, n, &fft);
    if m == 2 {
        let mut t = transpose_square(values, n);
        fft_rows(&mut t, n, &fft);
        let back = transpose_square(&t, n);
        values.copy_from_slice(&back);
    }
}
