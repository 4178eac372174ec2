//! Binary PGM (grayscale) and PPM (color-mapped) writers for matrices.

use std::fs;
use std::path::Path;

use neural_pde::Matrix;

/// Maps `v` from `[lo, hi]` to `0..=255`. A degenerate range maps to 0.
fn level(v: f64, lo: f64, hi: f64) -> u8 {
    if hi <= lo {
        return 0;
    }
    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    (t * 255.0).round() as u8
}

/// Blue → cyan → yellow → red ramp.
fn color(v: f64, lo: f64, hi: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 4] = [
        [0.0, 0.0, 0.5],
        [0.0, 0.8, 1.0],
        [1.0, 0.9, 0.0],
        [0.6, 0.0, 0.0],
    ];
    let t = if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (STOPS.len() - 1) as f64;
    let k = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - k as f64;
    let mut out = [0u8; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let val = STOPS[k][c] + f * (STOPS[k + 1][c] - STOPS[k][c]);
        *o = (val * 255.0).round() as u8;
    }
    out
}

pub fn range(ms: &[&Matrix]) -> (f64, f64) {
    ms.iter()
        .flat_map(|m| m.as_slice())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// One pixel per entry; matrix rows become image rows.
pub fn pgm_bytes(m: &Matrix, lo: f64, hi: f64) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", m.cols(), m.rows()).into_bytes();
    out.extend(m.as_slice().iter().map(|&v| level(v, lo, hi)));
    out
}

pub fn ppm_bytes(m: &Matrix, lo: f64, hi: f64) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", m.cols(), m.rows()).into_bytes();
    for &v in m.as_slice() {
        out.extend_from_slice(&color(v, lo, hi));
    }
    out
}

pub fn write_pgm(path: &Path, m: &Matrix, lo: f64, hi: f64) -> std::io::Result<()> {
    fs::write(path, pgm_bytes(m, lo, hi))
}

pub fn write_ppm(path: &Path, m: &Matrix, lo: f64, hi: f64) -> std::io::Result<()> {
    fs::write(path, ppm_bytes(m, lo, hi))
}

/// Pixel payload of a binary PGM or PPM along with its width and height.
#[cfg(test)]
pub fn decode(bytes: &[u8]) -> Option<(usize, usize, &[u8])> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while bytes.get(pos)?.is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while !bytes.get(pos)?.is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?);
    }
    let channels = match fields[0] {
        "P5" => 1,
        "P6" => 3,
        _ => return None,
    };
    let w: usize = fields[1].parse().ok()?;
    let h: usize = fields[2].parse().ok()?;
    let pixels = &bytes[pos + 1..];
    (pixels.len() == w * h * channels).then_some((w, h, pixels))
}
