//! Terrain ingestion and line-of-sight visibility.
//!
//! A [`Dem`] is a height raster read from ESRI ASCII grid files. Heights are
//! posts: pixel `(r, c)` sits at `(r, c) * resolution` meters, row 0 first in
//! the file. A [`CoarseGrid`] picks every `step`-th post as a waypoint node;
//! each node owns the pixels closer to it than to any other node.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridEnvironment;
use crate::sensing::Visibility;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nodata {
    Reject,
    Fill(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dem {
    pub nrows: usize,
    pub ncols: usize,
    /// Meters per pixel.
    pub resolution: f64,
    /// Lower-left corner in map coordinates, when the header gives one.
    pub origin: Option<(f64, f64)>,
    heights: Vec<f64>,
}

impl Dem {
    pub fn from_heights(nrows: usize, ncols: usize, resolution: f64, heights: Vec<f64>) -> Result<Self> {
        if nrows == 0 || ncols == 0 || heights.len() != nrows * ncols {
            return Err(Error::config(format!(
                "DEM of {nrows}x{ncols} needs {} heights, got {}",
                nrows * ncols,
                heights.len()
            )));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::config("DEM resolution must be positive"));
        }
        if heights.iter().any(|h| !h.is_finite()) {
            return Err(Error::config("DEM heights must be finite"));
        }
        Ok(Self {
            nrows,
            ncols,
            resolution,
            origin: None,
            heights,
        })
    }

    pub fn flat(nrows: usize, ncols: usize, resolution: f64) -> Self {
        Self::from_heights(nrows, ncols, resolution, vec![0.0; nrows * ncols]).expect("valid flat DEM")
    }

    #[inline]
    pub fn height(&self, r: usize, c: usize) -> f64 {
        self.heights[r * self.ncols + c]
    }

    pub fn set_height(&mut self, r: usize, c: usize, h: f64) {
        self.heights[r * self.ncols + c] = h;
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.heights
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &h| {
                (lo.min(h), hi.max(h))
            })
    }

    /// Bilinear height at fractional pixel coordinates (clamped to the raster).
    pub fn interpolate(&self, r: f64, c: f64) -> f64 {
        let r = r.clamp(0.0, (self.nrows - 1) as f64);
        let c = c.clamp(0.0, (self.ncols - 1) as f64);
        let r0 = r.floor() as usize;
        let c0 = c.floor() as usize;
        let r1 = (r0 + 1).min(self.nrows - 1);
        let c1 = (c0 + 1).min(self.ncols - 1);
        let fr = r - r0 as f64;
        let fc = c - c0 as f64;
        let top = self.height(r0, c0) * (1.0 - fc) + self.height(r0, c1) * fc;
        let bottom = self.height(r1, c0) * (1.0 - fc) + self.height(r1, c1) * fc;
        top * (1.0 - fr) + bottom * fr
    }

    pub fn write_esri_ascii<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let (x, y) = self.origin.unwrap_or((0.0, 0.0));
        writeln!(w, "ncols {}", self.ncols)?;
        writeln!(w, "nrows {}", self.nrows)?;
        writeln!(w, "xllcorner {x}")?;
        writeln!(w, "yllcorner {y}")?;
        writeln!(w, "cellsize {}", self.resolution)?;
        writeln!(w, "NODATA_value -9999")?;
        for r in 0..self.nrows {
            let row = &self.heights[r * self.ncols..(r + 1) * self.ncols];
            let line: Vec<String> = row.iter().map(|h| h.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

pub fn load_dem(path: impl AsRef<Path>, nodata: Nodata) -> Result<Dem> {
    let text = std::fs::read_to_string(path)?;
    parse_esri_ascii(&text, nodata)
}

/// Parse an ESRI ASCII grid. Each data line must hold exactly `ncols` values.
pub fn parse_esri_ascii(text: &str, nodata: Nodata) -> Result<Dem> {
    let mut ncols = None;
    let mut nrows = None;
    let mut cellsize = None;
    let mut xll = None;
    let mut yll = None;
    let mut nodata_value = None;
    let mut heights = Vec::new();
    let mut rows_read = 0usize;
    let perr = |line: usize, message: String| Error::Parse { line, message };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let starts_alpha = line.chars().next().is_some_and(|ch| ch.is_ascii_alphabetic());
        if starts_alpha && rows_read == 0 {
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default().to_ascii_lowercase();
            let value = parts
                .next()
                .ok_or_else(|| perr(line_no, format!("header '{key}' has no value")))?;
            if parts.next().is_some() {
                return Err(perr(line_no, format!("header '{key}' has extra fields")));
            }
            let num: f64 = value
                .parse()
                .map_err(|_| perr(line_no, format!("header '{key}' value '{value}' is not numeric")))?;
            let as_count = |v: f64| {
                if v >= 1.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(perr(line_no, format!("header '{key}' must be a positive integer")))
                }
            };
            match key.as_str() {
                "ncols" => ncols = Some(as_count(num)?),
                "nrows" => nrows = Some(as_count(num)?),
                "cellsize" => cellsize = Some(num),
                "xllcorner" | "xllcenter" => xll = Some(num),
                "yllcorner" | "yllcenter" => yll = Some(num),
                "nodata_value" => nodata_value = Some(num),
                _ => return Err(perr(line_no, format!("unknown header key '{key}'"))),
            }
            continue;
        }
        let (Some(nc), Some(nr)) = (ncols, nrows) else {
            return Err(perr(line_no, "data before ncols/nrows header".into()));
        };
        if cellsize.is_none() {
            return Err(perr(line_no, "data before cellsize header".into()));
        }
        if rows_read == nr {
            return Err(perr(line_no, format!("more than {nr} data rows")));
        }
        let mut count = 0;
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| perr(line_no, format!("value '{tok}' is not numeric")))?;
            let v = if Some(v) == nodata_value {
                match nodata {
                    Nodata::Reject => {
                        return Err(perr(line_no, format!("nodata value in column {}", count + 1)));
                    }
                    Nodata::Fill(f) => f,
                }
            } else {
                v
            };
            if !v.is_finite() {
                return Err(perr(line_no, format!("value '{tok}' is not finite")));
            }
            heights.push(v);
            count += 1;
        }
        if count != nc {
            return Err(perr(line_no, format!("expected {nc} values, found {count}")));
        }
        rows_read += 1;
    }

    let last = text.lines().count();
    let ncols = ncols.ok_or_else(|| perr(last, "missing ncols header".into()))?;
    let nrows = nrows.ok_or_else(|| perr(last, "missing nrows header".into()))?;
    let cellsize = cellsize.ok_or_else(|| perr(last, "missing cellsize header".into()))?;
    if !(cellsize > 0.0) {
        return Err(perr(last, "cellsize must be positive".into()));
    }
    if rows_read != nrows {
        return Err(perr(last, format!("expected {nrows} data rows, found {rows_read}")));
    }
    let mut dem = Dem::from_heights(nrows, ncols, cellsize, heights)?;
    dem.origin = xll.zip(yll);
    Ok(dem)
}

/// Waypoint lattice over a DEM.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseGrid {
    /// Node spacing in meters.
    pub spacing: f64,
    /// Node spacing in pixels.
    pub step: usize,
    pub rows: usize,
    pub cols: usize,
    /// Ground elevation at each node, row-major.
    pub elevation: Vec<f64>,
}

impl CoarseGrid {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pixel coordinates of a node.
    pub fn node_pixel(&self, node: usize) -> (usize, usize) {
        ((node / self.cols) * self.step, (node % self.cols) * self.step)
    }

    /// Pixel index range owned by node index `i` along one axis.
    fn owned(&self, i: usize, count: usize, extent: usize) -> std::ops::Range<usize> {
        let centre = i * self.step;
        let lo = if i == 0 { 0 } else { centre - self.step / 2 };
        let hi = if i + 1 == count {
            extent
        } else {
            centre + self.step - self.step / 2
        };
        lo..hi.min(extent)
    }

    /// Pixels owned by a node.
    pub fn node_pixels(&self, node: usize, dem: &Dem) -> Vec<(usize, usize)> {
        let rr = self.owned(node / self.cols, self.rows, dem.nrows);
        let cr = self.owned(node % self.cols, self.cols, dem.ncols);
        rr.flat_map(|r| cr.clone().map(move |c| (r, c))).collect()
    }

    /// Grid world whose cells are the coarse nodes.
    pub fn environment(&self) -> GridEnvironment {
        GridEnvironment {
            rows: self.rows,
            cols: self.cols,
            cell_size: self.spacing,
        }
    }
}

/// Sample the DEM every `spacing` meters starting at pixel (0, 0).
pub fn coarsen(dem: &Dem, spacing: f64) -> Result<CoarseGrid> {
    if !(spacing >= dem.resolution) {
        return Err(Error::config(format!(
            "spacing {spacing} is finer than DEM resolution {}",
            dem.resolution
        )));
    }
    let ratio = spacing / dem.resolution;
    let step = ratio.round();
    if (ratio - step).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::config(format!(
            "spacing {spacing} is not a multiple of resolution {}",
            dem.resolution
        )));
    }
    let step = step as usize;
    let rows = (dem.nrows - 1) / step + 1;
    let cols = (dem.ncols - 1) / step + 1;
    let mut elevation = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            elevation.push(dem.height(r * step, c * step));
        }
    }
    Ok(CoarseGrid {
        spacing,
        step,
        rows,
        cols,
        elevation,
    })
}

/// Whether a target standing at `to` is visible from an observer at `from`.
///
/// Both eye and target points sit `observer_height` above ground. Terrain is
/// sampled every pixel along the segment with bilinear interpolation.
pub fn line_of_sight(dem: &Dem, from: (usize, usize), to: (usize, usize), observer_height: f64) -> bool {
    let (r0, c0) = (from.0 as f64, from.1 as f64);
    let (r1, c1) = (to.0 as f64, to.1 as f64);
    let dist = (r1 - r0).hypot(c1 - c0);
    let steps = dist.ceil() as usize;
    if steps <= 1 {
        return true;
    }
    let eye = dem.height(from.0, from.1) + observer_height;
    let target = dem.height(to.0, to.1) + observer_height;
    for s in 1..steps {
        let t = s as f64 / steps as f64;
        let ground = dem.interpolate(r0 + (r1 - r0) * t, c0 + (c1 - c0) * t);
        let sight = eye + (target - eye) * t;
        if ground > sight {
            return false;
        }
    }
    true
}

/// Fraction of each node's pixels visible from `from_node`.
pub fn viewshed_mask(dem: &Dem, grid: &CoarseGrid, from_node: usize, observer_height: f64) -> Vec<f64> {
    viewshed_mask_strided(dem, grid, from_node, observer_height, 1)
}

/// [`viewshed_mask`] evaluating only every `stride`-th owned pixel per axis.
pub fn viewshed_mask_strided(
    dem: &Dem,
    grid: &CoarseGrid,
    from_node: usize,
    observer_height: f64,
    stride: usize,
) -> Vec<f64> {
    let stride = stride.max(1);
    let eye = grid.node_pixel(from_node);
    (0..grid.len())
        .map(|node| {
            let pixels = grid.node_pixels(node, dem);
            let (seen, total) = pixels.iter().filter(|(r, c)| r % stride == 0 && c % stride == 0).fold(
                (0usize, 0usize),
                |(seen, total), &p| {
                    let vis = p == eye || line_of_sight(dem, eye, p, observer_height);
                    (seen + usize::from(vis), total + 1)
                },
            );
            if total == 0 {
                // stride skipped every owned pixel; fall back to the node post
                f64::from(u8::from(line_of_sight(
                    dem,
                    eye,
                    grid.node_pixel(node),
                    observer_height,
                )))
            } else {
                seen as f64 / total as f64
            }
        })
        .collect()
}

/// CSV `node_row,node_col,fraction` for one observer.
pub fn write_fraction_csv<W: Write>(grid: &CoarseGrid, fractions: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "node_row,node_col,fraction")?;
    for (node, f) in fractions.iter().enumerate() {
        writeln!(w, "{},{},{}", node / grid.cols, node % grid.cols, f)?;
    }
    Ok(())
}

/// Pairwise node visibility with a cut-off on the visible fraction.
#[derive(Debug, Clone)]
pub struct VisibilityTable {
    nodes: usize,
    fractions: Vec<f64>,
    pub threshold: f64,
}

impl VisibilityTable {
    pub fn compute(dem: &Dem, grid: &CoarseGrid, observer_height: f64, stride: usize, threshold: f64) -> Self {
        let rows: Vec<Vec<f64>> = (0..grid.len())
            .into_par_iter()
            .map(|from| viewshed_mask_strided(dem, grid, from, observer_height, stride))
            .collect();
        Self {
            nodes: grid.len(),
            fractions: rows.concat(),
            threshold,
        }
    }

    pub fn fraction(&self, from: usize, to: usize) -> f64 {
        self.fractions[from * self.nodes + to]
    }
}

impl Visibility for VisibilityTable {
    fn visible(&self, from: usize, to: usize) -> bool {
        self.fraction(from, to) >= self.threshold
    }
}
