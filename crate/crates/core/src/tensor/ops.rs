use super::conv::{self, ConvDims};
use super::{BackwardFn, Scalar, Tensor};
use crate::error::{Error, Result};

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> Error {
    Error::ShapeMismatch {
        op,
        left: a.to_vec(),
        right: b.to_vec(),
    }
}

struct Conv2dBackward {
    dims: ConvDims,
}

impl<T: Scalar> BackwardFn<T> for Conv2dBackward {
    fn name(&self) -> &'static str {
        "conv2d"
    }

    fn backward(&self, inputs: &[Tensor<T>], _output: &[T], grad_out: &[T]) -> Result<Vec<Option<Vec<T>>>> {
        let (x, w) = (&inputs[0], &inputs[1]);
        let gx = x
            .requires_grad()
            .then(|| conv::backward_input(self.dims, &w.data(), grad_out));
        let (gw, gb) = if w.requires_grad() || inputs[2].requires_grad() {
            let (gw, gb) = conv::backward_params(self.dims, &x.data(), grad_out);
            (Some(gw), Some(gb))
        } else {
            (None, None)
        };
        Ok(vec![gx, gw, gb])
    }
}

/// Same-size 2-D convolution: stride 1, zero padding `k / 2`.
///
/// `x` is (N, C, H, W), `weights` (O, C, k, k) with odd k, `bias` (O).
pub fn conv2d<T: Scalar>(x: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let xs = x.shape();
    let ws = weights.shape();
    if xs.len() != 4 || ws.len() != 4 || ws[2] != ws[3] || ws[2] % 2 == 0 {
        return Err(mismatch("conv2d", xs, ws));
    }
    if xs[1] != ws[1] {
        return Err(mismatch("conv2d", xs, ws));
    }
    if bias.shape() != [ws[0]] {
        return Err(mismatch("conv2d bias", ws, bias.shape()));
    }
    let dims = ConvDims {
        batch: xs[0],
        in_ch: xs[1],
        out_ch: ws[0],
        height: xs[2],
        width: xs[3],
        kernel: ws[2],
    };
    let out = conv::forward(dims, &x.data(), &weights.data(), &bias.data());
    Tensor::from_op(
        vec![dims.batch, dims.out_ch, dims.height, dims.width],
        out,
        vec![x.clone(), weights.clone(), bias.clone()],
        Box::new(Conv2dBackward { dims }),
    )
}

struct ReluBackward;

impl<T: Scalar> BackwardFn<T> for ReluBackward {
    fn name(&self) -> &'static str {
        "relu"
    }

    fn backward(&self, _inputs: &[Tensor<T>], output: &[T], grad_out: &[T]) -> Result<Vec<Option<Vec<T>>>> {
        // output > 0 exactly where input > 0; the kink gets zero gradient
        let g = output
            .iter()
            .zip(grad_out)
            .map(|(&y, &g)| if y > T::zero() { g } else { T::zero() })
            .collect();
        Ok(vec![Some(g)])
    }
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let out = x
        .data()
        .iter()
        .map(|&v| if v > T::zero() { v } else { T::zero() })
        .collect();
    Tensor::from_op(x.shape().to_vec(), out, vec![x.clone()], Box::new(ReluBackward))
}

struct ConcatBackward {
    batch: usize,
    a_len: usize,
    b_len: usize,
}

impl<T: Scalar> BackwardFn<T> for ConcatBackward {
    fn name(&self) -> &'static str {
        "concat_channels"
    }

    fn backward(&self, _inputs: &[Tensor<T>], _output: &[T], grad_out: &[T]) -> Result<Vec<Option<Vec<T>>>> {
        let mut ga = Vec::with_capacity(self.batch * self.a_len);
        let mut gb = Vec::with_capacity(self.batch * self.b_len);
        for chunk in grad_out.chunks_exact(self.a_len + self.b_len) {
            ga.extend_from_slice(&chunk[..self.a_len]);
            gb.extend_from_slice(&chunk[self.a_len..]);
        }
        Ok(vec![Some(ga), Some(gb)])
    }
}

/// Concatenates along the channel axis, `a`'s channels first.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.len() != 4 || sb.len() != 4 || sa[0] != sb[0] || sa[2..] != sb[2..] {
        return Err(mismatch("concat_channels", sa, sb));
    }
    let plane = sa[2] * sa[3];
    let a_len = sa[1] * plane;
    let b_len = sb[1] * plane;
    let (ad, bd) = (a.data(), b.data());
    let mut out = Vec::with_capacity(ad.len() + bd.len());
    for n in 0..sa[0] {
        out.extend_from_slice(&ad[n * a_len..(n + 1) * a_len]);
        out.extend_from_slice(&bd[n * b_len..(n + 1) * b_len]);
    }
    drop((ad, bd));
    Tensor::from_op(
        vec![sa[0], sa[1] + sb[1], sa[2], sa[3]],
        out,
        vec![a.clone(), b.clone()],
        Box::new(ConcatBackward {
            batch: sa[0],
            a_len,
            b_len,
        }),
    )
}

struct SliceBackward {
    channels: usize,
    start: usize,
    len: usize,
    plane: usize,
}

impl<T: Scalar> BackwardFn<T> for SliceBackward {
    fn name(&self) -> &'static str {
        "slice_channels"
    }

    fn backward(&self, _inputs: &[Tensor<T>], _output: &[T], grad_out: &[T]) -> Result<Vec<Option<Vec<T>>>> {
        let per_in = self.channels * self.plane;
        let per_out = self.len * self.plane;
        let batch = grad_out.len() / per_out;
        let mut g = vec![T::zero(); batch * per_in];
        for n in 0..batch {
            let dst = &mut g[n * per_in + self.start * self.plane..][..per_out];
            dst.copy_from_slice(&grad_out[n * per_out..(n + 1) * per_out]);
        }
        Ok(vec![Some(g)])
    }
}

/// Channels `start..start + len` of an (N, C, H, W) tensor.
pub fn slice_channels<T: Scalar>(x: &Tensor<T>, start: usize, len: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    if s.len() != 4 || len == 0 || start + len > s[1] {
        return Err(Error::invalid(format!(
            "slice_channels({start}, {len}) on shape {s:?}"
        )));
    }
    let plane = s[2] * s[3];
    let d = x.data();
    let mut out = Vec::with_capacity(s[0] * len * plane);
    for n in 0..s[0] {
        out.extend_from_slice(&d[(n * s[1] + start) * plane..][..len * plane]);
    }
    drop(d);
    Tensor::from_op(
        vec![s[0], len, s[2], s[3]],
        out,
        vec![x.clone()],
        Box::new(SliceBackward {
            channels: s[1],
            start,
            len,
            plane,
        }),
    )
}

#[derive(Clone, Copy)]
enum Binary {
    Add,
    Sub,
    Mul,
}

struct BinaryBackward(Binary);

impl<T: Scalar> BackwardFn<T> for BinaryBackward {
    fn name(&self) -> &'static str {
        match self.0 {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
        }
    }

    fn backward(&self, inputs: &[Tensor<T>], _output: &[T], g: &[T]) -> Result<Vec<Option<Vec<T>>>> {
        Ok(match self.0 {
            Binary::Add => vec![Some(g.to_vec()), Some(g.to_vec())],
            Binary::Sub => vec![Some(g.to_vec()), Some(g.iter().map(|&v| -v).collect())],
            Binary::Mul => {
                let (a, b) = (inputs[0].data(), inputs[1].data());
                vec![
                    Some(g.iter().zip(b.iter()).map(|(&g, &b)| g * b).collect()),
                    Some(g.iter().zip(a.iter()).map(|(&g, &a)| g * a).collect()),
                ]
            }
        })
    }
}

fn binary<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, kind: Binary) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        let name = match kind {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
        };
        return Err(mismatch(name, a.shape(), b.shape()));
    }
    let out: Vec<T> = {
        let (ad, bd) = (a.data(), b.data());
        let f = |(&x, &y): (&T, &T)| match kind {
            Binary::Add => x + y,
            Binary::Sub => x - y,
            Binary::Mul => x * y,
        };
        ad.iter().zip(bd.iter()).map(f).collect()
    };
    Tensor::from_op(
        a.shape().to_vec(),
        out,
        vec![a.clone(), b.clone()],
        Box::new(BinaryBackward(kind)),
    )
}

pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    binary(a, b, Binary::Add)
}

pub fn sub<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    binary(a, b, Binary::Sub)
}

/// Elementwise product.
pub fn mul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    binary(a, b, Binary::Mul)
}

struct AffineBackward<T> {
    factor: T,
}

impl<T: Scalar> BackwardFn<T> for AffineBackward<T> {
    fn name(&self) -> &'static str {
        "affine"
    }

    fn backward(&self, _inputs: &[Tensor<T>], _output: &[T], g: &[T]) -> Result<Vec<Option<Vec<T>>>> {
        Ok(vec![Some(g.iter().map(|&v| v * self.factor).collect())])
    }
}

/// `x + c`
pub fn add_scalar<T: Scalar>(x: &Tensor<T>, c: T) -> Result<Tensor<T>> {
    let out = x.data().iter().map(|&v| v + c).collect();
    Tensor::from_op(
        x.shape().to_vec(),
        out,
        vec![x.clone()],
        Box::new(AffineBackward { factor: T::one() }),
    )
}

/// `factor * x`
pub fn scale<T: Scalar>(x: &Tensor<T>, factor: T) -> Result<Tensor<T>> {
    let out = x.data().iter().map(|&v| v * factor).collect();
    Tensor::from_op(x.shape().to_vec(), out, vec![x.clone()], Box::new(AffineBackward { factor }))
}

struct ReduceBackward<T> {
    len: usize,
    factor: T,
}

impl<T: Scalar> BackwardFn<T> for ReduceBackward<T> {
    fn name(&self) -> &'static str {
        "reduce"
    }

    fn backward(&self, _inputs: &[Tensor<T>], _output: &[T], g: &[T]) -> Result<Vec<Option<Vec<T>>>> {
        Ok(vec![Some(vec![g[0] * self.factor; self.len])])
    }
}

fn reduce<T: Scalar>(x: &Tensor<T>, factor: T) -> Result<Tensor<T>> {
    let total = x.data().iter().map(|v| v.as_f64()).sum::<f64>();
    let value = T::from_f64_lossy(total) * factor;
    Tensor::from_op(
        vec![1],
        vec![value],
        vec![x.clone()],
        Box::new(ReduceBackward { len: x.numel(), factor }),
    )
}

/// Sum of all elements (accumulated in f64).
pub fn sum<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    reduce(x, T::one())
}

/// Mean of all elements (accumulated in f64).
pub fn mean<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let n = T::from_usize(x.numel()).expect("size fits");
    reduce(x, T::one() / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn ones_kernel_on_ones_image() {
        let x = t(&[1, 1, 5, 5], vec![1.0; 25]);
        let w = t(&[1, 1, 3, 3], vec![1.0; 9]);
        let b = t(&[1], vec![0.0]);
        let y = conv2d(&x, &w, &b).unwrap().to_vec();
        assert_eq!(y[2 * 5 + 2], 9.0);
        assert_eq!(y[2], 6.0);
        assert_eq!(y[0], 4.0);
        assert_eq!(y[24], 4.0);
    }

    #[test]
    fn delta_kernel_is_identity() {
        let data: Vec<f64> = (0..30).map(|v| v as f64 * 0.3 - 2.0).collect();
        let x = t(&[1, 1, 5, 6], data.clone());
        let mut k = vec![0.0; 9];
        k[4] = 1.0;
        let y = conv2d(&x, &t(&[1, 1, 3, 3], k), &t(&[1], vec![0.0])).unwrap();
        assert_eq!(y.to_vec(), data);
    }

    #[test]
    fn zero_weights_give_bias() {
        let x = t(&[1, 2, 4, 4], vec![3.0; 32]);
        let y = conv2d(&x, &t(&[1, 2, 3, 3], vec![0.0; 18]), &t(&[1], vec![0.25])).unwrap();
        assert!(y.to_vec().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn conv_channel_mismatch_reports_shapes() {
        let x = t(&[1, 2, 4, 4], vec![0.0; 32]);
        let w = t(&[1, 3, 3, 3], vec![0.0; 27]);
        match conv2d(&x, &w, &t(&[1], vec![0.0])) {
            Err(Error::ShapeMismatch { left, right, .. }) => {
                assert_eq!(left, vec![1, 2, 4, 4]);
                assert_eq!(right, vec![1, 3, 3, 3]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn relu_values_and_subgradient() {
        let x = Tensor::<f64>::parameter(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        let y = relu(&x).unwrap();
        assert_eq!(y.to_vec(), vec![0.0, 0.0, 2.0]);
        sum(&y).unwrap().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.0, 0.0, 1.0]);
        let neg = t(&[4], vec![-1.0, -2.0, -0.5, -9.0]);
        assert!(relu(&neg).unwrap().to_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn concat_shape_and_inverse() {
        let a = t(&[1, 64, 2, 2], (0..256).map(|v| v as f64).collect());
        let b = t(&[1, 128, 2, 2], (0..512).map(|v| -(v as f64)).collect());
        let c = concat_channels(&a, &b).unwrap();
        assert_eq!(c.shape(), &[1, 192, 2, 2]);
        assert_eq!(slice_channels(&c, 0, 64).unwrap().to_vec(), a.to_vec());
        assert_eq!(slice_channels(&c, 64, 128).unwrap().to_vec(), b.to_vec());
    }

    #[test]
    fn concat_spatial_mismatch() {
        let a = t(&[1, 1, 2, 2], vec![0.0; 4]);
        let b = t(&[1, 1, 2, 3], vec![0.0; 6]);
        assert!(matches!(concat_channels(&a, &b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn concat_gradient_routing() {
        let a = Tensor::<f64>::parameter(&[2, 1, 2, 2], vec![0.5; 8]).unwrap();
        let b = Tensor::<f64>::parameter(&[2, 3, 2, 2], vec![0.25; 24]).unwrap();
        sum(&concat_channels(&a, &b).unwrap()).unwrap().backward().unwrap();
        assert_eq!(a.grad().unwrap(), vec![1.0; 8]);
        assert_eq!(b.grad().unwrap(), vec![1.0; 24]);
    }
}
