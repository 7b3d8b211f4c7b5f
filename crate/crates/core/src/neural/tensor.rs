/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data does not match {rows}x{cols}");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|x| *x *= k);
    }

    /// `self += k * other`
    pub fn add_scaled(&mut self, other: &Tensor, k: f64) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += k * b;
        }
    }

    /// `self · wᵀ` for a weight `w` stored as (out × in).
    pub fn matmul_t(&self, w: &Tensor) -> Tensor {
        assert_eq!(self.cols, w.cols, "matmul_t inner dimension");
        let mut out = Tensor::zeros(self.rows, w.rows);
        for i in 0..self.rows {
            let x = self.row(i);
            let o = out.row_mut(i);
            for (k, ok) in o.iter_mut().enumerate() {
                *ok = dot(x, w.row(k));
            }
        }
        out
    }

    /// `self · w` for `w` stored as (in × out) relative to the row vectors.
    pub fn matmul(&self, w: &Tensor) -> Tensor {
        assert_eq!(self.cols, w.rows, "matmul inner dimension");
        let mut out = Tensor::zeros(self.rows, w.cols);
        for i in 0..self.rows {
            let o = &mut out.data[i * w.cols..(i + 1) * w.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    axpy(o, a, w.row(k));
                }
            }
        }
        out
    }

    /// `self += dyᵀ · x`, the weight gradient of `y = x · selfᵀ`.
    pub fn add_outer(&mut self, dy: &Tensor, x: &Tensor) {
        assert_eq!(dy.rows, x.rows);
        assert_eq!(self.shape(), (dy.cols, x.cols));
        for r in 0..dy.rows {
            let xr = x.row(r);
            for (k, &d) in dy.row(r).iter().enumerate() {
                if d != 0.0 {
                    axpy(&mut self.data[k * self.cols..(k + 1) * self.cols], d, xr);
                }
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
