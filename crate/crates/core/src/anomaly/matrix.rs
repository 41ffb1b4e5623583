/// Dense row-major matrix of feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    data: Vec<T>,
    cols: usize,
}

impl<T: Copy> Matrix<T> {
    pub fn with_capacity(cols: usize, rows: usize) -> Self {
        Matrix {
            data: Vec::with_capacity(cols * rows),
            cols,
        }
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::with_capacity(cols, rows.len());
        for r in rows {
            m.push_row(r.as_ref());
        }
        m
    }

    /// # Panics
    /// If `row` has the wrong width.
    pub fn push_row(&mut self, row: &[T]) {
        assert_eq!(row.len(), self.cols, "row width mismatch");
        self.data.extend_from_slice(row);
    }

    pub fn rows(&self) -> usize {
        if self.cols == 0 {
            0
        } else {
            self.data.len() / self.cols
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[T]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows())
    }

    /// Keeps only `columns`, in the given order.
    pub fn project(&self, columns: &[usize]) -> Matrix<T> {
        let mut m = Matrix::with_capacity(columns.len(), self.rows());
        for r in self.iter_rows() {
            m.data.extend(columns.iter().map(|&c| r[c]));
        }
        m
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix<T> {
        let mut m = Matrix::with_capacity(self.cols, rows.len());
        for &i in rows {
            m.data.extend_from_slice(self.row(i));
        }
        m
    }
}
