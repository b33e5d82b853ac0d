//! Cell-centred grids over a complex-plane window and the fields stored on them.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::C64;

/// Rectangular window `[re_min, re_max] × [im_min, im_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Window {
    pub fn square(half_width: f64) -> Self {
        Window {
            re_min: -half_width,
            re_max: half_width,
            im_min: -half_width,
            im_max: half_width,
        }
    }

    pub fn area(&self) -> f64 {
        (self.re_max - self.re_min) * (self.im_max - self.im_min)
    }
}

/// `nx × ny` equal cells covering a window; index `iy·nx + ix`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(window: Window, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("grid", "nx and ny must be positive"));
        }
        let finite = [window.re_min, window.re_max, window.im_min, window.im_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || window.re_max <= window.re_min || window.im_max <= window.im_min {
            return Err(Error::invalid(
                "window",
                "bounds must be finite with min < max",
            ));
        }
        Ok(GridSpec { window, nx, ny })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        (self.window.re_max - self.window.re_min) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.window.im_max - self.window.im_min) / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn center(&self, ix: usize, iy: usize) -> C64 {
        C64::new(
            self.window.re_min + (ix as f64 + 0.5) * self.dx(),
            self.window.im_min + (iy as f64 + 0.5) * self.dy(),
        )
    }

    /// Centre of the cell with flat index `k`.
    pub fn center_of(&self, k: usize) -> C64 {
        self.center(k % self.nx, k / self.nx)
    }

    /// Cell containing `z`; points on the upper edges belong to the last cell.
    pub fn cell_of(&self, z: C64) -> Option<usize> {
        let w = &self.window;
        if !(z.re >= w.re_min && z.re <= w.re_max && z.im >= w.im_min && z.im <= w.im_max) {
            return None;
        }
        let ix = (((z.re - w.re_min) / self.dx()) as usize).min(self.nx - 1);
        let iy = (((z.im - w.im_min) / self.dy()) as usize).min(self.ny - 1);
        Some(self.index(ix, iy))
    }

    /// Grid of the cells that have all four neighbours.
    pub fn interior(&self) -> Result<GridSpec> {
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::GridMismatch(String::from(
                "stencils need at least 3 cells per axis",
            )));
        }
        let (dx, dy) = (self.dx(), self.dy());
        let w = &self.window;
        GridSpec::new(
            Window {
                re_min: w.re_min + dx,
                re_max: w.re_max - dx,
                im_min: w.im_min + dy,
                im_max: w.im_max - dy,
            },
            self.nx - 2,
            self.ny - 2,
        )
    }
}

/// Provenance stored alongside a field.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldMeta {
    pub estimator: String,
    pub n: usize,
    pub tau: f64,
    pub samples: u64,
    pub seed: Option<u64>,
    pub convention: String,
}

impl FieldMeta {
    pub fn new(estimator: &str, n: usize, tau: f64) -> Self {
        FieldMeta {
            estimator: String::from(estimator),
            n,
            tau,
            ..Default::default()
        }
    }
}

/// Real values with standard errors on a grid. Missing values are NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub meta: FieldMeta,
}

impl FieldGrid {
    pub fn new(
        spec: GridSpec,
        values: Vec<f64>,
        stderr: Vec<f64>,
        meta: FieldMeta,
    ) -> Result<Self> {
        if values.len() != spec.len() || stderr.len() != spec.len() {
            return Err(Error::DimensionMismatch {
                expected: spec.len(),
                got: values.len().max(stderr.len()),
            });
        }
        if stderr.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::invalid(
                "stderr",
                "standard errors must be nonnegative",
            ));
        }
        Ok(FieldGrid {
            spec,
            values,
            stderr,
            meta,
        })
    }

    /// Evaluates `f` at every cell centre; `f` returns `(value, stderr)`.
    pub fn from_fn<F: FnMut(C64) -> (f64, f64)>(spec: GridSpec, meta: FieldMeta, mut f: F) -> Self {
        let (values, stderr) = (0..spec.len()).map(|k| f(spec.center_of(k))).unzip();
        FieldGrid {
            spec,
            values,
            stderr,
            meta,
        }
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.spec.index(ix, iy)]
    }

    pub fn error(&self, ix: usize, iy: usize) -> f64 {
        self.stderr[self.spec.index(ix, iy)]
    }

    /// Midpoint-rule integral over the window, skipping missing cells.
    pub fn integral(&self) -> f64 {
        self.values.iter().filter(|v| !v.is_nan()).sum::<f64>() * self.spec.cell_area()
    }

    pub fn missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .filter(|v| !v.is_nan())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_and_centres_agree() {
        let g = GridSpec::new(Window::square(1.0), 4, 2).unwrap();
        assert_eq!(g.len(), 8);
        for k in 0..g.len() {
            assert_eq!(g.cell_of(g.center_of(k)), Some(k));
        }
        assert_eq!(g.cell_of(C64::new(1.0, 1.0)), Some(7));
        assert_eq!(g.cell_of(C64::new(1.01, 0.0)), None);
        let i = GridSpec::new(Window::square(1.5), 3, 3)
            .unwrap()
            .interior()
            .unwrap();
        assert_eq!((i.nx, i.ny), (1, 1));
        assert!(i.center(0, 0).norm() < 1e-15);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(GridSpec::new(Window::square(1.0), 0, 2).is_err());
        assert!(GridSpec::new(Window::square(-1.0), 2, 2).is_err());
        let g = GridSpec::new(Window::square(1.0), 2, 2).unwrap();
        assert!(FieldGrid::new(
            g,
            alloc::vec![0.0; 3],
            alloc::vec![0.0; 4],
            FieldMeta::default()
        )
        .is_err());
        assert!(FieldGrid::new(
            g,
            alloc::vec![0.0; 4],
            alloc::vec![-1.0; 4],
            FieldMeta::default()
        )
        .is_err());
    }
}
