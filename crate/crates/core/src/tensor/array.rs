use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Dense row-major array.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if numel(shape) != data.len() {
            return Err(Error::shape("tensor", format!("{} values for shape {:?}", data.len(), shape)));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, T::one())
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![v; numel(shape)] }
    }

    pub fn scalar(v: T) -> Self {
        Tensor { shape: vec![], data: vec![v] }
    }

    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> T) -> Self {
        Tensor { shape: shape.to_vec(), data: (0..numel(shape)).map(f).collect() }
    }

    pub fn from_f64(shape: &[usize], data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.data.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        if numel(shape) != self.len() {
            return Err(Error::shape("reshape", format!("{:?} -> {:?}", self.shape, shape)));
        }
        Ok(Tensor { shape: shape.to_vec(), data: self.data.clone() })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|v| U::lit(v.as_f64())).collect() }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }

    pub fn norm(&self) -> T {
        self.data.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    /// Nearest-neighbour 2× upsampling of an NHWC tensor.
    pub fn upsample2x(&self) -> Result<Self> {
        upsample2x(self)
    }

    /// 2×2 mean pooling of an NHWC tensor.
    pub fn downsample2x(&self) -> Result<Self> {
        downsample2x(self)
    }

    /// Rows `[start, start+count)` along axis 0.
    pub fn slice_rows(&self, start: usize, count: usize) -> Result<Self> {
        let rows = *self.shape.first().ok_or_else(|| Error::shape("slice_rows", "scalar tensor"))?;
        if start + count > rows {
            return Err(Error::shape("slice_rows", format!("{start}+{count} > {rows}")));
        }
        let inner = self.len() / rows.max(1);
        let mut shape = self.shape.clone();
        shape[0] = count;
        Ok(Tensor { shape, data: self.data[start * inner..(start + count) * inner].to_vec() })
    }

    /// Concatenate along axis 0.
    pub fn stack_rows(parts: &[Tensor<T>]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty("stack_rows"))?;
        let tail = &first.shape[1..];
        let mut rows = 0;
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        for p in parts {
            if p.shape.is_empty() || &p.shape[1..] != tail {
                return Err(Error::shape("stack_rows", format!("{:?} vs {:?}", p.shape, first.shape)));
            }
            rows += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        let mut shape = first.shape.clone();
        shape[0] = rows;
        Ok(Tensor { shape, data })
    }
}

pub(crate) fn same_shape<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::shape(op, format!("{:?} vs {:?}", a.shape, b.shape)));
    }
    Ok(())
}

pub(crate) fn zip_map<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
    same_shape(op, a, b)?;
    Ok(Tensor { shape: a.shape.clone(), data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect() })
}

/// `op(a)·op(b)` for 2-D operands, `op` optionally transposing.
pub(crate) fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, ta: bool, tb: bool) -> Result<Tensor<T>> {
    if a.rank() != 2 || b.rank() != 2 {
        return Err(Error::shape("matmul", format!("{:?} x {:?} (need rank 2)", a.shape, b.shape)));
    }
    let (ar, ac) = (a.shape[0], a.shape[1]);
    let (br, bc) = (b.shape[0], b.shape[1]);
    let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
    let (k2, n) = if tb { (bc, br) } else { (br, bc) };
    if k != k2 {
        return Err(Error::shape(
            "matmul",
            format!("{:?}{} x {:?}{}", a.shape, if ta { "ᵀ" } else { "" }, b.shape, if tb { "ᵀ" } else { "" }),
        ));
    }
    let (rsa, csa) = if ta { (1, ac as isize) } else { (ac as isize, 1) };
    let (rsb, csb) = if tb { (1, bc as isize) } else { (bc as isize, 1) };
    let mut out = vec![T::zero(); m * n];
    T::gemm(m, k, n, &a.data, rsa, csa, &b.data, rsb, csb, T::zero(), &mut out);
    Ok(Tensor { shape: vec![m, n], data: out })
}

fn nhwc(op: &'static str, t: &Tensor<impl Scalar>) -> Result<[usize; 4]> {
    match t.shape[..] {
        [n, h, w, c] => Ok([n, h, w, c]),
        _ => Err(Error::shape(op, format!("expected NHWC, got {:?}", t.shape))),
    }
}

fn kernel_dims<T: Scalar>(op: &'static str, w: &Tensor<T>) -> Result<[usize; 3]> {
    match w.shape[..] {
        [k, k2, ci, co] if k == k2 && k % 2 == 1 => Ok([k, ci, co]),
        _ => Err(Error::shape(op, format!("kernel {:?} must be [k, k, in, out] with odd k", w.shape))),
    }
}

/// Patch rows of one `[h,w,c]` example, written into `out` (`h*w` rows of `k*k*c`).
fn im2col<T: Scalar>(x: &[T], [h, w, c]: [usize; 3], k: usize, out: &mut [T]) {
    let p = k / 2;
    let cols = k * k * c;
    for i in 0..h {
        for j in 0..w {
            let row = (i * w + j) * cols;
            for di in 0..k {
                let ii = i as isize + di as isize - p as isize;
                let inside_row = ii >= 0 && ii < h as isize;
                for dj in 0..k {
                    let jj = j as isize + dj as isize - p as isize;
                    let dst = row + (di * k + dj) * c;
                    if inside_row && jj >= 0 && jj < w as isize {
                        let src = (ii as usize * w + jj as usize) * c;
                        out[dst..dst + c].copy_from_slice(&x[src..src + c]);
                    } else {
                        out[dst..dst + c].fill(T::zero());
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: patch rows of one example accumulated into `out` `[h,w,c]`.
fn col2im<T: Scalar>(cols: &[T], [h, w, c]: [usize; 3], k: usize, out: &mut [T]) {
    let p = k / 2;
    let width = k * k * c;
    for i in 0..h {
        for j in 0..w {
            let row = (i * w + j) * width;
            for di in 0..k {
                let ii = i as isize + di as isize - p as isize;
                if ii < 0 || ii >= h as isize {
                    continue;
                }
                for dj in 0..k {
                    let jj = j as isize + dj as isize - p as isize;
                    if jj < 0 || jj >= w as isize {
                        continue;
                    }
                    let dst = (ii as usize * w + jj as usize) * c;
                    let src = row + (di * k + dj) * c;
                    for (o, &v) in out[dst..dst + c].iter_mut().zip(&cols[src..src + c]) {
                        *o += v;
                    }
                }
            }
        }
    }
}

// Patch matrices are built a few examples at a time so the buffer stays cache sized
// while small images still share one gemm call.
const PATCH_ROWS: usize = 4096;

fn examples_per_chunk(per: usize) -> usize {
    (PATCH_ROWS / per.max(1)).max(1)
}

/// Same-padded, stride-1 convolution: x `[n,h,w,ci]`, kernel `[k,k,ci,co]`.
pub(crate) fn conv2d<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, h, wd, c] = nhwc("conv2d", x)?;
    let [k, ci, co] = kernel_dims("conv2d", w)?;
    if c != ci {
        return Err(Error::shape("conv2d", format!("input {:?} vs kernel {:?}", x.shape, w.shape)));
    }
    let rows = n * h * wd;
    let mut out = vec![T::zero(); rows * co];
    let width = k * k * ci;
    if k == 1 {
        T::gemm(rows, width, co, &x.data, width as isize, 1, &w.data, co as isize, 1, T::zero(), &mut out);
    } else {
        let per = h * wd;
        let chunk = examples_per_chunk(per).min(n);
        T::with_scratch(chunk * per * width, |cols| {
            for b0 in (0..n).step_by(chunk) {
                let m = chunk.min(n - b0);
                for b in 0..m {
                    let src = &x.data[(b0 + b) * per * c..(b0 + b + 1) * per * c];
                    im2col(src, [h, wd, c], k, &mut cols[b * per * width..(b + 1) * per * width]);
                }
                let dst = &mut out[b0 * per * co..(b0 + m) * per * co];
                T::gemm(m * per, width, co, cols, width as isize, 1, &w.data, co as isize, 1, T::zero(), dst);
            }
        });
    }
    Ok(Tensor { shape: vec![n, h, wd, co], data: out })
}

/// Adjoint of [`conv2d`] in its input: gradient `g` `[n,h,w,co]` back to `[n,h,w,ci]`.
pub(crate) fn conv2d_input_grad<T: Scalar>(g: &Tensor<T>, w: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, h, wd, c] = nhwc("conv2d_input_grad", g)?;
    let [k, ci, co] = kernel_dims("conv2d_input_grad", w)?;
    if c != co {
        return Err(Error::shape("conv2d_input_grad", format!("grad {:?} vs kernel {:?}", g.shape, w.shape)));
    }
    let width = k * k * ci;
    if k == 1 {
        let rows = n * h * wd;
        let mut data = vec![T::zero(); rows * width];
        T::gemm(rows, co, width, &g.data, co as isize, 1, &w.data, 1, co as isize, T::zero(), &mut data);
        return Ok(Tensor { shape: vec![n, h, wd, ci], data });
    }
    let per = h * wd;
    let chunk = examples_per_chunk(per).min(n);
    let mut data = vec![T::zero(); n * per * ci];
    T::with_scratch(chunk * per * width, |cols| {
        for b0 in (0..n).step_by(chunk) {
            let m = chunk.min(n - b0);
            let gb = &g.data[b0 * per * co..(b0 + m) * per * co];
            T::gemm(m * per, co, width, gb, co as isize, 1, &w.data, 1, co as isize, T::zero(), cols);
            for b in 0..m {
                let dst = &mut data[(b0 + b) * per * ci..(b0 + b + 1) * per * ci];
                col2im(&cols[b * per * width..(b + 1) * per * width], [h, wd, ci], k, dst);
            }
        }
    });
    Ok(Tensor { shape: vec![n, h, wd, ci], data })
}

/// Adjoint of [`conv2d`] in its kernel: `[k,k,ci,co]` from input `x` and output gradient `g`.
pub(crate) fn conv2d_kernel_grad<T: Scalar>(x: &Tensor<T>, g: &Tensor<T>, k: usize) -> Result<Tensor<T>> {
    let [n, h, wd, ci] = nhwc("conv2d_kernel_grad", x)?;
    let [gn, gh, gw, co] = nhwc("conv2d_kernel_grad", g)?;
    if (n, h, wd) != (gn, gh, gw) || k % 2 == 0 {
        return Err(Error::shape("conv2d_kernel_grad", format!("input {:?} vs grad {:?}, k={k}", x.shape, g.shape)));
    }
    let width = k * k * ci;
    let mut out = vec![T::zero(); width * co];
    if k == 1 {
        let rows = n * h * wd;
        T::gemm(width, rows, co, &x.data, 1, width as isize, &g.data, co as isize, 1, T::zero(), &mut out);
    } else {
        let per = h * wd;
        let chunk = examples_per_chunk(per).min(n);
        T::with_scratch(chunk * per * width, |cols| {
            for b0 in (0..n).step_by(chunk) {
                let m = chunk.min(n - b0);
                for b in 0..m {
                    let src = &x.data[(b0 + b) * per * ci..(b0 + b + 1) * per * ci];
                    im2col(src, [h, wd, ci], k, &mut cols[b * per * width..(b + 1) * per * width]);
                }
                let gb = &g.data[b0 * per * co..(b0 + m) * per * co];
                let beta = if b0 == 0 { T::zero() } else { T::one() };
                T::gemm(width, m * per, co, cols, 1, width as isize, gb, co as isize, 1, beta, &mut out);
            }
        });
    }
    Ok(Tensor { shape: vec![k, k, ci, co], data: out })
}

/// Nearest-neighbour 2× upsampling of H and W.
pub(crate) fn upsample2x<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, h, w, c] = nhwc("upsample2x", x)?;
    let (h2, w2) = (2 * h, 2 * w);
    let mut out = vec![T::zero(); n * h2 * w2 * c];
    for b in 0..n {
        for i in 0..h2 {
            for j in 0..w2 {
                let src = ((b * h + i / 2) * w + j / 2) * c;
                let dst = ((b * h2 + i) * w2 + j) * c;
                out[dst..dst + c].copy_from_slice(&x.data[src..src + c]);
            }
        }
    }
    Ok(Tensor { shape: vec![n, h2, w2, c], data: out })
}

/// 2×2 mean pooling of H and W.
pub(crate) fn downsample2x<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, h, w, c] = nhwc("downsample2x", x)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape("downsample2x", format!("odd spatial dims {:?}", x.shape)));
    }
    let (h2, w2) = (h / 2, w / 2);
    let quarter = T::lit(0.25);
    let mut out = vec![T::zero(); n * h2 * w2 * c];
    for b in 0..n {
        for i in 0..h {
            for j in 0..w {
                let src = ((b * h + i) * w + j) * c;
                let dst = ((b * h2 + i / 2) * w2 + j / 2) * c;
                for (o, &v) in out[dst..dst + c].iter_mut().zip(&x.data[src..src + c]) {
                    *o += v * quarter;
                }
            }
        }
    }
    Ok(Tensor { shape: vec![n, h2, w2, c], data: out })
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = numel(&shape[..axis]);
    let inner = numel(&shape[axis + 1..]);
    (outer, shape[axis], inner)
}

/// Sum over `axis`, removing it.
pub(crate) fn sum_axis<T: Scalar>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    if axis >= x.rank() {
        return Err(Error::shape("sum_axis", format!("axis {axis} of {:?}", x.shape)));
    }
    let (outer, len, inner) = split_axis(&x.shape, axis);
    if inner == 1 {
        let data = x.data.chunks_exact(len.max(1)).map(|r| r.iter().fold(T::zero(), |acc, &v| acc + v)).collect();
        let mut shape = x.shape.clone();
        shape.remove(axis);
        return Ok(Tensor { shape, data });
    }
    let mut out = vec![T::zero(); outer * inner];
    for o in 0..outer {
        for a in 0..len {
            let src = (o * len + a) * inner;
            for (d, &v) in out[o * inner..(o + 1) * inner].iter_mut().zip(&x.data[src..src + inner]) {
                *d += v;
            }
        }
    }
    let mut shape = x.shape.clone();
    shape.remove(axis);
    Ok(Tensor { shape, data: out })
}

/// Insert a new axis of size `n` at `axis`, repeating values along it.
pub(crate) fn broadcast_axis<T: Scalar>(x: &Tensor<T>, axis: usize, n: usize) -> Result<Tensor<T>> {
    if axis > x.rank() {
        return Err(Error::shape("broadcast_axis", format!("axis {axis} of {:?}", x.shape)));
    }
    let outer = numel(&x.shape[..axis]);
    let inner = numel(&x.shape[axis..]);
    let mut out = Vec::with_capacity(outer * n * inner);
    if inner == 1 {
        for &v in &x.data {
            out.extend(std::iter::repeat_n(v, n));
        }
    } else {
        for o in 0..outer {
            for _ in 0..n {
                out.extend_from_slice(&x.data[o * inner..(o + 1) * inner]);
            }
        }
    }
    let mut shape = x.shape.clone();
    shape.insert(axis, n);
    Ok(Tensor { shape, data: out })
}

fn last_dim<T: Scalar>(op: &'static str, x: &Tensor<T>) -> Result<(usize, usize)> {
    let c = *x.shape.last().ok_or_else(|| Error::shape(op, "scalar tensor"))?;
    Ok((x.len() / c.max(1), c))
}

pub(crate) fn concat_last<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (ra, ca) = last_dim("concat_last", a)?;
    let (rb, cb) = last_dim("concat_last", b)?;
    if ra != rb || a.shape[..a.rank() - 1] != b.shape[..b.rank() - 1] {
        return Err(Error::shape("concat_last", format!("{:?} vs {:?}", a.shape, b.shape)));
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    for r in 0..ra {
        out.extend_from_slice(&a.data[r * ca..(r + 1) * ca]);
        out.extend_from_slice(&b.data[r * cb..(r + 1) * cb]);
    }
    let mut shape = a.shape.clone();
    *shape.last_mut().unwrap() = ca + cb;
    Ok(Tensor { shape, data: out })
}

pub(crate) fn slice_last<T: Scalar>(x: &Tensor<T>, start: usize, len: usize) -> Result<Tensor<T>> {
    let (rows, c) = last_dim("slice_last", x)?;
    if start + len > c {
        return Err(Error::shape("slice_last", format!("{start}+{len} of {:?}", x.shape)));
    }
    let mut out = Vec::with_capacity(rows * len);
    for r in 0..rows {
        out.extend_from_slice(&x.data[r * c + start..r * c + start + len]);
    }
    let mut shape = x.shape.clone();
    *shape.last_mut().unwrap() = len;
    Ok(Tensor { shape, data: out })
}

/// Embed `x` into a zero tensor whose last dim is `total`, at offset `start`.
pub(crate) fn pad_last<T: Scalar>(x: &Tensor<T>, start: usize, total: usize) -> Result<Tensor<T>> {
    let (rows, c) = last_dim("pad_last", x)?;
    if start + c > total {
        return Err(Error::shape("pad_last", format!("{start}+{c} > {total}")));
    }
    let mut out = vec![T::zero(); rows * total];
    for r in 0..rows {
        out[r * total + start..r * total + start + c].copy_from_slice(&x.data[r * c..(r + 1) * c]);
    }
    let mut shape = x.shape.clone();
    *shape.last_mut().unwrap() = total;
    Ok(Tensor { shape, data: out })
}

pub(crate) fn add_bias<T: Scalar>(x: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, c) = last_dim("add_bias", x)?;
    if b.shape != [c] {
        return Err(Error::shape("add_bias", format!("{:?} + bias {:?}", x.shape, b.shape)));
    }
    let mut out = x.data.clone();
    for row in out.chunks_exact_mut(c) {
        for (o, &v) in row.iter_mut().zip(&b.data) {
            *o += v;
        }
    }
    Ok(Tensor { shape: x.shape.clone(), data: out })
}

/// Softmax over the last axis.
pub(crate) fn softmax_last<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, c) = last_dim("softmax", x)?;
    let mut out = x.data.clone();
    for row in out.chunks_exact_mut(c) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut s = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        for v in row.iter_mut() {
            *v = *v / s;
        }
    }
    Ok(Tensor { shape: x.shape.clone(), data: out })
}

/// Mean negative log-likelihood of `labels` under row-wise softmax of `logits`.
pub(crate) fn softmax_xent<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<Tensor<T>> {
    let (rows, c) = last_dim("softmax_xent", logits)?;
    if logits.rank() != 2 || labels.len() != rows || labels.iter().any(|&l| l >= c) {
        return Err(Error::shape("softmax_xent", format!("logits {:?} with {} labels", logits.shape, labels.len())));
    }
    let mut total = T::zero();
    for (row, &y) in logits.data.chunks_exact(c).zip(labels) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
        total += lse - row[y];
    }
    Ok(Tensor::scalar(total / T::lit(rows as f64)))
}
