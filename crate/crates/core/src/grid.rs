//! Dense row-major 2-D containers.

use crate::error::{Error, Result};

/// Row-major rectangular array.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "grid must be non-empty, got {width}x{height}"
            )));
        }
        Ok(Grid {
            width,
            height,
            data: vec![value; width * height],
        })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "grid must be non-empty, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "expected {} values for a {width}x{height} grid, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }
}

impl<T> Grid<T> {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[self.idx(x, y)]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        let i = self.idx(x, y);
        &mut self.data[i]
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Scalar image with a per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Grid<f64>,
    valid: Grid<bool>,
}

impl ScalarField {
    pub fn invalid(width: usize, height: usize) -> Result<Self> {
        Ok(ScalarField {
            values: Grid::filled(width, height, 0.0)?,
            valid: Grid::filled(width, height, false)?,
        })
    }

    pub fn from_parts(values: Grid<f64>, valid: Grid<bool>) -> Result<Self> {
        if !values.same_shape(&valid) {
            return Err(Error::Dimension(format!(
                "value grid {}x{} does not match mask grid {}x{}",
                values.width(),
                values.height(),
                valid.width(),
                valid.height()
            )));
        }
        Ok(ScalarField { values, valid })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.values.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.values.height()
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        *self.valid.get(x, y)
    }

    /// Value at a pixel, or `None` when the pixel is invalid.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Option<f64> {
        if *self.valid.get(x, y) {
            Some(*self.values.get(x, y))
        } else {
            None
        }
    }

    /// Raw stored value, meaningless when the pixel is invalid.
    #[inline]
    pub fn raw(&self, x: usize, y: usize) -> f64 {
        *self.values.get(x, y)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        *self.values.get_mut(x, y) = value;
        *self.valid.get_mut(x, y) = true;
    }

    #[inline]
    pub fn set_invalid(&mut self, x: usize, y: usize) {
        *self.values.get_mut(x, y) = 0.0;
        *self.valid.get_mut(x, y) = false;
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.values
    }

    pub fn validity(&self) -> &Grid<bool> {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.as_slice().iter().filter(|v| **v).count()
    }

    /// Iterator over `(x, y, value)` for valid pixels.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let w = self.width();
        self.valid
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v)
            .map(move |(i, _)| (i % w, i / w, self.values.as_slice()[i]))
    }

    pub fn same_shape(&self, other: &ScalarField) -> bool {
        self.values.same_shape(&other.values)
    }
}
