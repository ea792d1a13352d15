//! Dense row-major 2-D sample storage shared by every stage of the pipeline.
//!
//! Rows are fast time (depth), columns are channels or A-lines. Keeping one
//! layout everywhere means a "row of RF data" is always a contiguous slice,
//! which is what the row-vector fetch pattern of the beamformer relies on.

use std::ops::{Index, IndexMut};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid<T> {
    data: Vec<T>,
    rows: usize,
    cols: usize,
}

impl<T: Copy + Default> Grid<T> {
    pub fn zeroed(rows: usize, cols: usize) -> Self {
        Grid {
            data: vec![T::default(); rows * cols],
            rows,
            cols,
        }
    }
}

impl<T> Grid<T> {
    /// Wraps an existing row-major buffer. Panics if the length disagrees
    /// with the dimensions; callers construct the buffer themselves.
    pub fn from_vec(data: Vec<T>, rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols, "grid buffer length mismatch");
        Grid { data, rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.cols)
    }
}

impl Grid<i32> {
    pub fn to_f64(&self) -> Grid<f64> {
        Grid {
            data: self.data.iter().map(|&v| v as f64).collect(),
            rows: self.rows,
            cols: self.cols,
        }
    }
}

impl Grid<i64> {
    pub fn to_f64(&self) -> Grid<f64> {
        Grid {
            data: self.data.iter().map(|&v| v as f64).collect(),
            rows: self.rows,
            cols: self.cols,
        }
    }
}

impl<T> Index<(usize, usize)> for Grid<T> {
    type Output = T;

    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Grid<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}
