//! Dense `(batch, channels, height, width)` tensors and the forward/backward
//! kernels for convolution, max pooling, flattening, and affine layers.
//!
//! A 2-D `(batch, features)` view is a tensor with `height == width == 1`.
//! Convolution uses cross-correlation orientation (no kernel flip): output
//! element `(b, f, oy, ox)` is
//! `sum_{c, i, j} w[f, c, i, j] * x[b, c, oy*s + i - p, ox*s + j - p] + bias[f]`
//! with zero fill outside the input.

use crate::error::{Error, Result};
use crate::linalg::{gemm, Op};

/// `(batch, channels, height, width)`.
pub type Shape4 = [usize; 4];

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape4,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Shape4, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::dim("Tensor::new", shape, format!("{} elements", data.len())));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape4) -> Self {
        Tensor {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: Shape4, value: f64) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    /// Builds a tensor by evaluating `f(b, c, y, x)` in row-major order.
    pub fn from_fn(shape: Shape4, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let [n, c, h, w] = shape;
        let mut data = Vec::with_capacity(n * c * h * w);
        for b in 0..n {
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f(b, ch, y, x));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    /// A `(rows, cols)` matrix view stored as `(rows, cols, 1, 1)`.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new([rows, cols, 1, 1], data)
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn height(&self) -> usize {
        self.shape[2]
    }

    pub fn width(&self) -> usize {
        self.shape[3]
    }

    /// Elements per batch item.
    pub fn features(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn is_flat(&self) -> bool {
        self.shape[2] == 1 && self.shape[3] == 1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        let [_, ch, h, w] = self.shape;
        ((b * ch + c) * h + y) * w + x
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.offset(b, c, y, x)]
    }

    /// Row `b` of the batch as a contiguous slice.
    pub fn item(&self, b: usize) -> &[f64] {
        let f = self.features();
        &self.data[b * f..(b + 1) * f]
    }

    pub fn reshape(self, shape: Shape4) -> Result<Tensor> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::dim("reshape", self.shape, shape));
        }
        Ok(Tensor { shape, data: self.data })
    }

    /// Selects batch items by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> Tensor {
        let f = self.features();
        let mut data = Vec::with_capacity(indices.len() * f);
        for &i in indices {
            data.extend_from_slice(self.item(i));
        }
        Tensor {
            shape: [indices.len(), self.shape[1], self.shape[2], self.shape[3]],
            data,
        }
    }

    /// Concatenates tensors along the channel axis.
    pub fn concat_channels(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
        let [n, _, h, w] = first.shape;
        for p in parts {
            if p.shape[0] != n || p.shape[2] != h || p.shape[3] != w {
                return Err(Error::dim("concat_channels", first.shape, p.shape));
            }
        }
        let total_c: usize = parts.iter().map(|p| p.shape[1]).sum();
        let mut data = Vec::with_capacity(n * total_c * h * w);
        for b in 0..n {
            for p in parts {
                data.extend_from_slice(p.item(b));
            }
        }
        Ok(Tensor {
            shape: [n, total_c, h, w],
            data,
        })
    }

    /// Inverse of [`Tensor::concat_channels`]: splits into groups of the given channel counts.
    pub fn split_channels(&self, counts: &[usize]) -> Result<Vec<Tensor>> {
        let [n, c, h, w] = self.shape;
        if counts.iter().sum::<usize>() != c {
            return Err(Error::dim("split_channels", self.shape, counts));
        }
        let plane = h * w;
        let mut out: Vec<Tensor> = counts.iter().map(|&k| Tensor::zeros([n, k, h, w])).collect();
        for b in 0..n {
            let src = self.item(b);
            let mut start = 0;
            for (part, &k) in out.iter_mut().zip(counts) {
                let len = k * plane;
                part.data[b * len..(b + 1) * len].copy_from_slice(&src[start..start + len]);
                start += len;
            }
        }
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::dim("add_assign", self.shape, other.shape));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Row-major `(rows, cols)` matrix; affine weights are stored `(in, out)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "Matrix::new",
                (rows, cols),
                format!("{} elements", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// `m` square filters of shape `(D, N, N)` with one bias each.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    weights: Tensor,
    biases: Vec<f64>,
}

impl FilterBank {
    pub fn new(weights: Tensor, biases: Vec<f64>) -> Result<Self> {
        let [m, _, kh, kw] = weights.shape();
        if kh != kw {
            return Err(Error::InvalidArgument(format!("kernel must be square, got {kh}x{kw}")));
        }
        if biases.len() != m {
            return Err(Error::dim(
                "FilterBank::new",
                format!("{m} filters"),
                format!("{} biases", biases.len()),
            ));
        }
        Ok(FilterBank { weights, biases })
    }

    pub fn zeros(filters: usize, in_channels: usize, kernel: usize) -> Self {
        FilterBank {
            weights: Tensor::zeros([filters, in_channels, kernel, kernel]),
            biases: vec![0.0; filters],
        }
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Tensor {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    /// Weight and bias buffers borrowed mutably at once.
    pub fn split_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights.data, &mut self.biases)
    }

    pub fn filters(&self) -> usize {
        self.weights.shape[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape[1]
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape[2]
    }
}

/// Affine layer parameters: `(in, out)` weights and `out` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Matrix::zeros(inputs, outputs),
            bias: vec![0.0; outputs],
        }
    }
}

/// Result of a backward pass: gradient w.r.t. the layer input plus the
/// parameter gradients, stored in the same type as the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GradPair<P> {
    pub input: Tensor,
    pub params: P,
}

/// Output spatial extent for a sliding window, or `None` if it does not tile exactly.
fn sliding_extent(size: usize, window: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = size + 2 * padding;
    if window > padded || !(padded - window).is_multiple_of(stride) {
        return None;
    }
    Some((padded - window) / stride + 1)
}

/// Geometry shared by the convolution forward and backward kernels.
struct ConvGeometry {
    in_c: usize,
    in_h: usize,
    in_w: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    out_h: usize,
    out_w: usize,
}

impl ConvGeometry {
    fn new(input: Shape4, filters: &FilterBank, stride: usize, padding: usize) -> Result<Self> {
        let kernel = filters.kernel();
        if stride == 0 {
            return Err(Error::InvalidArgument("convolution stride must be positive".into()));
        }
        if kernel == 0 {
            return Err(Error::InvalidArgument(
                "convolution kernel size must be positive".into(),
            ));
        }
        let [_, c, h, w] = input;
        if c != filters.in_channels() {
            return Err(Error::dim("conv2d", input, filters.weights.shape()));
        }
        let (out_h, out_w) = match (
            sliding_extent(h, kernel, stride, padding),
            sliding_extent(w, kernel, stride, padding),
        ) {
            (Some(oh), Some(ow)) => (oh, ow),
            _ => {
                return Err(Error::dim(
                    "conv2d",
                    input,
                    format!("kernel {kernel}, stride {stride}, padding {padding}"),
                ))
            }
        };
        Ok(ConvGeometry {
            in_c: c,
            in_h: h,
            in_w: w,
            kernel,
            stride,
            padding,
            out_h,
            out_w,
        })
    }

    fn patch_len(&self) -> usize {
        self.in_c * self.kernel * self.kernel
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Maps output position and kernel tap to an input position, if inside the image.
    #[inline]
    fn source(&self, o: usize, k: usize, size: usize) -> Option<usize> {
        let pos = (o * self.stride + k) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < size).then_some(pos as usize)
    }

    /// Patch matrix `(C·N·N, OH·OW)` for one image.
    fn im2col(&self, image: &[f64], cols: &mut [f64]) {
        let plane = self.out_plane();
        let n = self.kernel;
        for c in 0..self.in_c {
            let chan = &image[c * self.in_h * self.in_w..(c + 1) * self.in_h * self.in_w];
            for ky in 0..n {
                for kx in 0..n {
                    let row = &mut cols[((c * n + ky) * n + kx) * plane..][..plane];
                    for oy in 0..self.out_h {
                        let iy = self.source(oy, ky, self.in_h);
                        for ox in 0..self.out_w {
                            row[oy * self.out_w + ox] = match (iy, self.source(ox, kx, self.in_w)) {
                                (Some(iy), Some(ix)) => chan[iy * self.in_w + ix],
                                _ => 0.0,
                            };
                        }
                    }
                }
            }
        }
    }

    /// Scatter-adds a patch-matrix gradient back onto the image gradient.
    fn col2im(&self, cols: &[f64], image: &mut [f64]) {
        let plane = self.out_plane();
        let n = self.kernel;
        for c in 0..self.in_c {
            let chan = &mut image[c * self.in_h * self.in_w..(c + 1) * self.in_h * self.in_w];
            for ky in 0..n {
                for kx in 0..n {
                    let row = &cols[((c * n + ky) * n + kx) * plane..][..plane];
                    for oy in 0..self.out_h {
                        let Some(iy) = self.source(oy, ky, self.in_h) else {
                            continue;
                        };
                        for ox in 0..self.out_w {
                            if let Some(ix) = self.source(ox, kx, self.in_w) {
                                chan[iy * self.in_w + ix] += row[oy * self.out_w + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Output shape of a convolution, validating the same preconditions as the kernel.
pub fn conv2d_output_shape(input: Shape4, filters: &FilterBank, stride: usize, padding: usize) -> Result<Shape4> {
    let g = ConvGeometry::new(input, filters, stride, padding)?;
    Ok([input[0], filters.filters(), g.out_h, g.out_w])
}

pub fn conv2d_forward(input: &Tensor, filters: &FilterBank, stride: usize, padding: usize) -> Result<Tensor> {
    let g = ConvGeometry::new(input.shape, filters, stride, padding)?;
    let batch = input.batch();
    let m = filters.filters();
    let k = g.patch_len();
    let plane = g.out_plane();
    let mut out = Tensor::zeros([batch, m, g.out_h, g.out_w]);
    let mut cols = vec![0.0; k * plane];
    for b in 0..batch {
        g.im2col(input.item(b), &mut cols);
        let dst = &mut out.data[b * m * plane..(b + 1) * m * plane];
        for (f, row) in dst.chunks_mut(plane).enumerate() {
            row.fill(filters.biases[f]);
        }
        gemm(m, k, plane, filters.weights.data(), Op::N, &cols, Op::N, dst, true);
    }
    Ok(out)
}

/// Returns the input gradient and the filter/bias gradients (as a `FilterBank`).
pub fn conv2d_backward(
    input: &Tensor,
    filters: &FilterBank,
    upstream: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<GradPair<FilterBank>> {
    let g = ConvGeometry::new(input.shape, filters, stride, padding)?;
    let batch = input.batch();
    let m = filters.filters();
    let expected = [batch, m, g.out_h, g.out_w];
    if upstream.shape != expected {
        return Err(Error::dim("conv2d_backward", expected, upstream.shape));
    }
    let k = g.patch_len();
    let plane = g.out_plane();
    let mut grad_input = Tensor::zeros(input.shape);
    let mut grad_filters = FilterBank::zeros(m, g.in_c, g.kernel);
    let mut cols = vec![0.0; k * plane];
    let mut grad_cols = vec![0.0; k * plane];
    let in_len = input.features();
    for b in 0..batch {
        let dy = &upstream.data[b * m * plane..(b + 1) * m * plane];
        g.im2col(input.item(b), &mut cols);
        gemm(
            m,
            plane,
            k,
            dy,
            Op::N,
            &cols,
            Op::T,
            grad_filters.weights.data_mut(),
            true,
        );
        for (f, row) in dy.chunks(plane).enumerate() {
            grad_filters.biases[f] += row.iter().sum::<f64>();
        }
        gemm(
            k,
            m,
            plane,
            filters.weights.data(),
            Op::T,
            dy,
            Op::N,
            &mut grad_cols,
            false,
        );
        g.col2im(&grad_cols, &mut grad_input.data[b * in_len..(b + 1) * in_len]);
    }
    Ok(GradPair {
        input: grad_input,
        params: grad_filters,
    })
}

/// Flat input offsets of the selected maxima, one per pooled output element.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolIndices {
    input_shape: Shape4,
    output_shape: Shape4,
    argmax: Vec<usize>,
}

impl PoolIndices {
    pub fn input_shape(&self) -> Shape4 {
        self.input_shape
    }

    pub fn output_shape(&self) -> Shape4 {
        self.output_shape
    }

    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }

    /// For constructing routing tables by hand (mostly for tests).
    pub fn from_parts(input_shape: Shape4, output_shape: Shape4, argmax: Vec<usize>) -> Self {
        PoolIndices {
            input_shape,
            output_shape,
            argmax,
        }
    }
}

pub fn maxpool_output_shape(input: Shape4, window: usize, stride: usize, padding: usize) -> Result<Shape4> {
    if window == 0 || stride == 0 {
        return Err(Error::InvalidArgument("pool window and stride must be positive".into()));
    }
    if padding >= window {
        return Err(Error::InvalidArgument(format!(
            "pool padding {padding} must be smaller than window {window}"
        )));
    }
    let [n, c, h, w] = input;
    match (
        sliding_extent(h, window, stride, padding),
        sliding_extent(w, window, stride, padding),
    ) {
        (Some(oh), Some(ow)) => Ok([n, c, oh, ow]),
        _ => Err(Error::dim(
            "maxpool",
            input,
            format!("window {window}, stride {stride}, padding {padding}"),
        )),
    }
}

pub fn maxpool_forward(input: &Tensor, window: usize, stride: usize) -> Result<(Tensor, PoolIndices)> {
    maxpool_forward_padded(input, window, stride, 0)
}

/// Max pooling where out-of-image positions never win. Ties resolve to the
/// first maximum in row-major scan order of the window.
pub fn maxpool_forward_padded(
    input: &Tensor,
    window: usize,
    stride: usize,
    padding: usize,
) -> Result<(Tensor, PoolIndices)> {
    let out_shape = maxpool_output_shape(input.shape, window, stride, padding)?;
    let [n, c, h, w] = input.shape;
    let [_, _, oh, ow] = out_shape;
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for b in 0..n {
        for ch in 0..c {
            let base = (b * c + ch) * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = usize::MAX;
                    for ky in 0..window {
                        let iy = (oy * stride + ky) as isize - padding as isize;
                        if iy < 0 || iy as usize >= h {
                            continue;
                        }
                        for kx in 0..window {
                            let ix = (ox * stride + kx) as isize - padding as isize;
                            if ix < 0 || ix as usize >= w {
                                continue;
                            }
                            let idx = base + iy as usize * w + ix as usize;
                            let v = input.data[idx];
                            if best_idx == usize::MAX || v > best {
                                best = v;
                                best_idx = idx;
                            }
                        }
                    }
                    out.push(best);
                    argmax.push(best_idx);
                }
            }
        }
    }
    Ok((
        Tensor {
            shape: out_shape,
            data: out,
        },
        PoolIndices {
            input_shape: input.shape,
            output_shape: out_shape,
            argmax,
        },
    ))
}

pub fn maxpool_backward(indices: &PoolIndices, upstream: &Tensor) -> Result<Tensor> {
    if upstream.shape != indices.output_shape {
        return Err(Error::dim("maxpool_backward", indices.output_shape, upstream.shape));
    }
    let mut grad = Tensor::zeros(indices.input_shape);
    let len = grad.data.len();
    for (&idx, &g) in indices.argmax.iter().zip(&upstream.data) {
        if idx >= len {
            return Err(Error::Internal(format!(
                "pool argmax {idx} out of bounds for input of {len} elements"
            )));
        }
        grad.data[idx] += g;
    }
    Ok(grad)
}

/// `(batch, c, h, w)` to `(batch, c·h·w)` in row-major order.
pub fn flatten(input: &Tensor) -> Tensor {
    let f = input.features();
    Tensor {
        shape: [input.batch(), f, 1, 1],
        data: input.data.clone(),
    }
}

fn require_flat(op: &'static str, input: &Tensor) -> Result<()> {
    if input.is_flat() {
        Ok(())
    } else {
        Err(Error::dim(op, input.shape, "a (batch, features) view"))
    }
}

/// `output = input · weights + bias` per batch row.
pub fn affine_forward(input: &Tensor, weights: &Matrix, bias: &[f64]) -> Result<Tensor> {
    require_flat("affine_forward", input)?;
    let (n, fin) = (input.batch(), input.channels());
    if fin != weights.rows {
        return Err(Error::dim("affine_forward", input.shape, (weights.rows, weights.cols)));
    }
    if bias.len() != weights.cols {
        return Err(Error::dim(
            "affine_forward",
            (weights.rows, weights.cols),
            format!("bias of {}", bias.len()),
        ));
    }
    let fout = weights.cols;
    let mut out = Vec::with_capacity(n * fout);
    for _ in 0..n {
        out.extend_from_slice(bias);
    }
    gemm(n, fin, fout, &input.data, Op::N, &weights.data, Op::N, &mut out, true);
    Tensor::from_rows(n, fout, out)
}

pub fn affine_backward(input: &Tensor, weights: &Matrix, upstream: &Tensor) -> Result<GradPair<Dense>> {
    require_flat("affine_backward", input)?;
    require_flat("affine_backward", upstream)?;
    let (n, fin) = (input.batch(), input.channels());
    let fout = weights.cols;
    if fin != weights.rows {
        return Err(Error::dim("affine_backward", input.shape, (weights.rows, weights.cols)));
    }
    if upstream.shape != [n, fout, 1, 1] {
        return Err(Error::dim("affine_backward", [n, fout, 1, 1], upstream.shape));
    }
    let mut grad_in = vec![0.0; n * fin];
    gemm(
        n,
        fout,
        fin,
        &upstream.data,
        Op::N,
        &weights.data,
        Op::T,
        &mut grad_in,
        false,
    );
    let mut grad_w = Matrix::zeros(fin, fout);
    gemm(
        fin,
        n,
        fout,
        &input.data,
        Op::T,
        &upstream.data,
        Op::N,
        &mut grad_w.data,
        false,
    );
    let mut grad_b = vec![0.0; fout];
    for row in upstream.data.chunks(fout) {
        for (g, v) in grad_b.iter_mut().zip(row) {
            *g += v;
        }
    }
    Ok(GradPair {
        input: Tensor::from_rows(n, fin, grad_in)?,
        params: Dense {
            weights: grad_w,
            bias: grad_b,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Shape4, data: &[f64]) -> Tensor {
        Tensor::new(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn one_by_one_kernel_is_affine_map() {
        let x = t([1, 1, 2, 2], &[1., 2., 3., 4.]);
        let f = FilterBank::new(t([1, 1, 1, 1], &[2.]), vec![1.]).unwrap();
        let y = conv2d_forward(&x, &f, 1, 0).unwrap();
        assert_eq!(y.data(), &[3., 5., 7., 9.]);
    }

    #[test]
    fn ones_kernel_sums_patches() {
        let x = Tensor::filled([1, 1, 3, 3], 1.0);
        let f = FilterBank::new(Tensor::filled([1, 1, 2, 2], 1.0), vec![0.]).unwrap();
        let y = conv2d_forward(&x, &f, 1, 0).unwrap();
        assert_eq!(y.shape(), [1, 1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn conv_rejects_bad_shapes() {
        let x = Tensor::zeros([1, 2, 4, 4]);
        let f = FilterBank::zeros(1, 3, 2);
        assert!(matches!(conv2d_forward(&x, &f, 1, 0), Err(Error::Dimension { .. })));
        let f = FilterBank::zeros(1, 2, 3);
        // (4 - 3) is not divisible by stride 2.
        assert!(matches!(conv2d_forward(&x, &f, 2, 0), Err(Error::Dimension { .. })));
        assert!(matches!(conv2d_forward(&x, &f, 0, 0), Err(Error::InvalidArgument(_))));
        let f = FilterBank::zeros(1, 2, 0);
        assert!(matches!(conv2d_forward(&x, &f, 1, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn filter_bank_invariants() {
        assert!(FilterBank::new(Tensor::zeros([2, 1, 2, 3]), vec![0.; 2]).is_err());
        assert!(FilterBank::new(Tensor::zeros([2, 1, 2, 2]), vec![0.; 3]).is_err());
    }

    #[test]
    fn conv_backward_trivial_cases() {
        let x = Tensor::from_fn([1, 1, 3, 3], |_, _, y, x| (y * 3 + x) as f64);
        let f = FilterBank::new(t([1, 1, 1, 1], &[1.5]), vec![0.3]).unwrap();
        let zero = Tensor::zeros([1, 1, 3, 3]);
        let g = conv2d_backward(&x, &f, &zero, 1, 0).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.params.weights().data().iter().all(|&v| v == 0.0));
        assert_eq!(g.params.biases(), &[0.0]);

        let up = Tensor::from_fn([1, 1, 3, 3], |_, _, y, x| (y as f64) - (x as f64) * 0.5);
        let g = conv2d_backward(&x, &f, &up, 1, 0).unwrap();
        for (gi, ui) in g.input.data().iter().zip(up.data()) {
            assert_eq!(*gi, 1.5 * ui);
        }
        assert!(conv2d_backward(&x, &f, &Tensor::zeros([1, 1, 2, 2]), 1, 0).is_err());
    }

    #[test]
    fn maxpool_simple_and_ties() {
        let x = t([1, 1, 2, 2], &[1., 2., 3., 4.]);
        let (y, idx) = maxpool_forward(&x, 2, 2).unwrap();
        assert_eq!(y.data(), &[4.]);
        assert_eq!(idx.argmax(), &[3]);

        let c = Tensor::filled([1, 1, 4, 4], 7.0);
        let (y, idx) = maxpool_forward(&c, 2, 2).unwrap();
        assert!(y.data().iter().all(|&v| v == 7.0));
        // First index of each window in row-major scan order.
        assert_eq!(idx.argmax(), &[0, 2, 8, 10]);
    }

    #[test]
    fn maxpool_errors() {
        let x = Tensor::zeros([1, 1, 2, 2]);
        assert!(matches!(maxpool_forward(&x, 3, 1), Err(Error::Dimension { .. })));
        let x = Tensor::zeros([1, 1, 5, 5]);
        assert!(matches!(maxpool_forward(&x, 2, 2), Err(Error::Dimension { .. })));
        let bad = PoolIndices::from_parts([1, 1, 2, 2], [1, 1, 1, 1], vec![9]);
        assert!(matches!(
            maxpool_backward(&bad, &Tensor::filled([1, 1, 1, 1], 1.0)),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn maxpool_backward_routes() {
        let x = t([1, 1, 2, 2], &[0.5, -1., 3., 2.]);
        let (_, idx) = maxpool_forward(&x, 2, 2).unwrap();
        let g = maxpool_backward(&idx, &t([1, 1, 1, 1], &[2.5])).unwrap();
        assert_eq!(g.data(), &[0., 0., 2.5, 0.]);
        let g = maxpool_backward(&idx, &Tensor::zeros([1, 1, 1, 1])).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn padded_pool_preserves_size_and_ignores_padding() {
        let x = Tensor::filled([1, 1, 3, 3], -5.0);
        let (y, _) = maxpool_forward_padded(&x, 3, 1, 1).unwrap();
        assert_eq!(y.shape(), [1, 1, 3, 3]);
        assert!(y.data().iter().all(|&v| v == -5.0));
    }

    #[test]
    fn affine_examples() {
        let x = t([1, 2, 1, 1], &[1., 2.]);
        let y = affine_forward(&x, &Matrix::identity(2), &[0., 0.]).unwrap();
        assert_eq!(y, x);
        let y = affine_forward(&x, &Matrix::identity(2), &[3., -3.]).unwrap();
        assert_eq!(y.data(), &[4., -1.]);
        assert!(affine_forward(&x, &Matrix::identity(3), &[0.; 3]).is_err());
    }

    #[test]
    fn affine_backward_scalar_case() {
        // y = w x + b; dL/dy = g
        let (x, w, g) = (1.5, -2.0, 0.25);
        let input = t([1, 1, 1, 1], &[x]);
        let weights = Matrix::new(1, 1, vec![w]).unwrap();
        let grads = affine_backward(&input, &weights, &t([1, 1, 1, 1], &[g])).unwrap();
        assert_eq!(grads.input.data(), &[w * g]);
        assert_eq!(grads.params.weights.data(), &[x * g]);
        assert_eq!(grads.params.bias, vec![g]);

        let zero = affine_backward(&input, &weights, &Tensor::zeros([1, 1, 1, 1])).unwrap();
        assert_eq!(zero.input.data(), &[0.0]);
        assert_eq!(zero.params.weights.data(), &[0.0]);
        assert_eq!(zero.params.bias, vec![0.0]);
    }

    #[test]
    fn flatten_layout() {
        let one = t([1, 1, 1, 1], &[3.0]);
        assert_eq!(flatten(&one), one);
        let x = Tensor::from_fn([2, 3, 2, 2], |b, c, y, x| (b * 1000 + c * 100 + y * 10 + x) as f64);
        let f = flatten(&x);
        assert_eq!(f.shape(), [2, 12, 1, 1]);
        for b in 0..2 {
            for c in 0..3 {
                for y in 0..2 {
                    for xx in 0..2 {
                        assert_eq!(f.get(b, c * 4 + y * 2 + xx, 0, 0), x.get(b, c, y, xx));
                    }
                }
            }
        }
        assert_eq!(f.reshape([2, 3, 2, 2]).unwrap(), x);
    }

    #[test]
    fn concat_and_split_are_inverse() {
        let a = Tensor::from_fn([2, 1, 2, 2], |b, _, y, x| (b * 10 + y * 2 + x) as f64);
        let b = Tensor::from_fn([2, 2, 2, 2], |b, c, y, x| -((b * 100 + c * 10 + y * 2 + x) as f64));
        let cat = Tensor::concat_channels(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(cat.shape(), [2, 3, 2, 2]);
        assert_eq!(cat.get(1, 0, 1, 1), a.get(1, 0, 1, 1));
        assert_eq!(cat.get(1, 2, 0, 1), b.get(1, 1, 0, 1));
        let parts = cat.split_channels(&[1, 2]).unwrap();
        assert_eq!(parts, vec![a, b]);
    }
}
