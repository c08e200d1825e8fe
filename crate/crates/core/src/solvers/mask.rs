use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subset::Subset;

/// Per-feature inclusion values in `[0, 1]`, optionally laid out on an
/// `h × w` grid in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftMask {
    values: Vec<f64>,
    grid: Option<(usize, usize)>,
}

impl SoftMask {
    pub fn new(values: Vec<f64>, grid: Option<(usize, usize)>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("mask entry {bad} outside [0, 1]")));
        }
        if let Some((h, w)) = grid {
            if h * w != values.len() {
                return Err(Error::Config(format!(
                    "grid {h}x{w} does not match {} mask entries",
                    values.len()
                )));
            }
        }
        Ok(Self { values, grid })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> Option<(usize, usize)> {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Grid shape, treating a mask without one as a single row.
    pub fn shape(&self) -> (usize, usize) {
        self.grid.unwrap_or((1, self.values.len()))
    }

    pub fn to_csv(&self) -> String {
        let (h, w) = self.shape();
        let mut out = String::new();
        for r in 0..h {
            let row: Vec<String> = self.values[r * w..(r + 1) * w].iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Plain-text greyscale image, 255 = fully retained.
    pub fn to_pgm(&self) -> String {
        let (h, w) = self.shape();
        let mut out = format!("P2\n{w} {h}\n255\n");
        for r in 0..h {
            let row: Vec<String> = self.values[r * w..(r + 1) * w]
                .iter()
                .map(|v| ((v * 255.0).round() as u8).to_string())
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_csv())
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_pgm())
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Anisotropic total variation over the grid (a row if none is set).
pub fn tv_norm(mask: &SoftMask) -> f64 {
    let (h, w) = mask.shape();
    tv_on_grid(mask.values(), h, w)
}

pub(crate) fn tv_on_grid(s: &[f64], h: usize, w: usize) -> f64 {
    let mut total = 0.0;
    for r in 0..h {
        for c in 0..w {
            let here = s[r * w + c];
            if r + 1 < h {
                total += (s[(r + 1) * w + c] - here).abs();
            }
            if c + 1 < w {
                total += (s[r * w + c + 1] - here).abs();
            }
        }
    }
    total
}

/// Subgradient of [`tv_on_grid`], added into `out`.
pub(crate) fn tv_subgradient(s: &[f64], h: usize, w: usize, scale: f64, out: &mut [f64]) {
    let mut edge = |a: usize, b: usize| {
        let d = s[b] - s[a];
        let g = if d > 0.0 {
            scale
        } else if d < 0.0 {
            -scale
        } else {
            0.0
        };
        out[b] += g;
        out[a] -= g;
    };
    for r in 0..h {
        for c in 0..w {
            if r + 1 < h {
                edge(r * w + c, (r + 1) * w + c);
            }
            if c + 1 < w {
                edge(r * w + c, r * w + c + 1);
            }
        }
    }
}

pub(crate) fn edge_count(h: usize, w: usize) -> usize {
    h * w.saturating_sub(1) + h.saturating_sub(1) * w
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("threshold must lie in (0, 1), got {threshold}")))
    }
}

/// `{i : s_i >= threshold}`.
pub fn binarize(mask: &SoftMask, threshold: f64) -> Result<Subset> {
    check_threshold(threshold)?;
    Ok(Subset::from_mask(
        &mask.values().iter().map(|&v| v >= threshold).collect::<Vec<_>>(),
    ))
}

/// The `k` largest entries among those at or above `threshold`; ties go to
/// the lower index.
pub fn binarize_top_k(mask: &SoftMask, threshold: f64, k: usize) -> Result<Subset> {
    check_threshold(threshold)?;
    let mut order: Vec<usize> = (0..mask.len()).filter(|&i| mask.values()[i] >= threshold).collect();
    order.sort_by(|&a, &b| mask.values()[b].total_cmp(&mask.values()[a]).then(a.cmp(&b)));
    order.truncate(k);
    Subset::new(mask.len(), order)
}
