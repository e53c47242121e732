//! Convolution primitives with analytic backward passes.
//!
//! Both convolution flavors used by the network reduce to one im2col + GEMM
//! core: the 3D convolutions are valid (no padding, stride one) over a
//! (views, y, x) volume, and the 2D convolutions are expressed as 3D
//! convolutions with a unit view axis after explicit zero padding. Gradients
//! with respect to input, kernel and bias are exact; every backward pass is
//! checked against central finite differences in the tests.

use ndarray::{s, Array, Array1, Array2, Array3, Array4, Array5, ArrayView3, ArrayView4, ArrayView5, Axis, Dimension, NdFloat};
use num_traits::FromPrimitive;
use rand::distr::uniform::SampleUniform;
use rand::Rng;

/// Scalar type of all network math; f32 for training, f64 for gradient
/// verification.
pub trait Real: NdFloat + FromPrimitive + SampleUniform {}
impl Real for f32 {}
impl Real for f64 {}

/// Gradients of a valid 3D convolution.
pub struct ConvGrads<F, D: Dimension> {
    pub input: Option<Array4<F>>,
    pub weight: Array<F, D>,
    pub bias: Array1<F>,
}

fn im2col<F: Real>(
    input: &ArrayView4<F>,
    kernel: (usize, usize, usize),
    out_dims: (usize, usize, usize),
) -> Array2<F> {
    let (cin, _v, _h, _w) = input.dim();
    let (kv, kh, kw) = kernel;
    let (ov, oh, ow) = out_dims;
    let k_len = cin * kv * kh * kw;
    let p_len = ov * oh * ow;
    let mut colt = Array2::<F>::zeros((k_len, p_len));
    for c in 0..cin {
        for dv in 0..kv {
            for dy in 0..kh {
                for dx in 0..kw {
                    let k = ((c * kv + dv) * kh + dy) * kw + dx;
                    let mut row = colt.row_mut(k);
                    let row = row.as_slice_mut().unwrap();
                    for vp in 0..ov {
                        for yp in 0..oh {
                            let src = input.slice(s![c, vp + dv, yp + dy, dx..dx + ow]);
                            let dst = (vp * oh + yp) * ow;
                            row[dst..dst + ow].copy_from_slice(src.as_slice().unwrap());
                        }
                    }
                }
            }
        }
    }
    colt
}

fn col2im<F: Real>(
    gcol: &Array2<F>,
    input_dims: (usize, usize, usize, usize),
    kernel: (usize, usize, usize),
    out_dims: (usize, usize, usize),
) -> Array4<F> {
    let (cin, _v, _h, _w) = input_dims;
    let (kv, kh, kw) = kernel;
    let (ov, oh, ow) = out_dims;
    let mut grad_input = Array4::<F>::zeros(input_dims);
    for c in 0..cin {
        for dv in 0..kv {
            for dy in 0..kh {
                for dx in 0..kw {
                    let k = ((c * kv + dv) * kh + dy) * kw + dx;
                    let row = gcol.row(k);
                    let row = row.as_slice().unwrap();
                    for vp in 0..ov {
                        for yp in 0..oh {
                            let mut dst =
                                grad_input.slice_mut(s![c, vp + dv, yp + dy, dx..dx + ow]);
                            let dst = dst.as_slice_mut().unwrap();
                            let src = &row[(vp * oh + yp) * ow..(vp * oh + yp) * ow + ow];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d = *d + *s;
                            }
                        }
                    }
                }
            }
        }
    }
    grad_input
}

/// Valid 3D convolution, stride one.
///
/// `input` is `[C_in, V, H, W]`, `weight` is `[C_out, C_in, kv, kh, kw]`;
/// the output is `[C_out, V-kv+1, H-kh+1, W-kw+1]`.
pub fn conv3d_valid<F: Real>(
    input: ArrayView4<F>,
    weight: ArrayView5<F>,
    bias: &Array1<F>,
) -> Array4<F> {
    let (cin, v, h, w) = input.dim();
    let (cout, wcin, kv, kh, kw) = weight.dim();
    assert_eq!(cin, wcin, "conv3d channel mismatch");
    assert!(v >= kv && h >= kh && w >= kw, "conv3d input smaller than kernel");
    let out_dims = (v - kv + 1, h - kh + 1, w - kw + 1);
    let input = input.as_standard_layout();
    let colt = im2col(&input.view().into_dimensionality().unwrap().to_owned(), (kv, kh, kw), out_dims);
    let k_len = cin * kv * kh * kw;
    let w_mat = weight
        .to_shape((cout, k_len))
        .expect("conv3d weight reshape");
    let mut out_mat = w_mat.dot(&colt);
    for (mut row, b) in out_mat.outer_iter_mut().zip(bias.iter()) {
        row.mapv_inplace(|x| x + *b);
    }
    out_mat
        .into_shape_with_order((cout, out_dims.0, out_dims.1, out_dims.2))
        .unwrap()
}

/// Backward pass of [`conv3d_valid`]. `need_grad_input` skips the (unused)
/// input gradient of the first layer.
pub fn conv3d_valid_backward<F: Real>(
    input: ArrayView4<F>,
    weight: ArrayView5<F>,
    grad_out: ArrayView4<F>,
    need_grad_input: bool,
) -> ConvGrads<F, ndarray::Ix5> {
    let (cin, v, h, w) = input.dim();
    let (cout, _, kv, kh, kw) = weight.dim();
    let out_dims = (v - kv + 1, h - kh + 1, w - kw + 1);
    let k_len = cin * kv * kh * kw;
    let p_len = out_dims.0 * out_dims.1 * out_dims.2;

    let input_std = input.as_standard_layout().to_owned();
    let colt = im2col(&input_std, (kv, kh, kw), out_dims);
    let g_std = grad_out.as_standard_layout();
    let g_mat = g_std
        .to_shape((cout, p_len))
        .expect("conv3d grad reshape");

    let grad_w_mat = g_mat.dot(&colt.t());
    let grad_weight = grad_w_mat
        .into_shape_with_order((cout, cin, kv, kh, kw))
        .unwrap();
    let grad_bias = g_mat.sum_axis(Axis(1));

    let grad_input = need_grad_input.then(|| {
        let w_mat = weight.to_shape((cout, k_len)).expect("conv3d weight reshape");
        let gcol = w_mat.t().dot(&g_mat);
        col2im(&gcol, (cin, v, h, w), (kv, kh, kw), out_dims)
    });

    ConvGrads {
        input: grad_input,
        weight: grad_weight,
        bias: grad_bias,
    }
}

fn pad2d<F: Real>(input: ArrayView3<F>, pad: usize) -> Array3<F> {
    if pad == 0 {
        return input.to_owned();
    }
    let (c, h, w) = input.dim();
    let mut out = Array3::zeros((c, h + 2 * pad, w + 2 * pad));
    out.slice_mut(s![.., pad..pad + h, pad..pad + w]).assign(&input);
    out
}

/// 2D convolution with symmetric zero padding, stride one.
///
/// `input` is `[C_in, H, W]`, `weight` is `[C_out, C_in, kh, kw]`. With
/// `pad = (k-1)/2` the spatial size is preserved.
pub fn conv2d<F: Real>(
    input: ArrayView3<F>,
    weight: ArrayView4<F>,
    bias: &Array1<F>,
    pad: usize,
) -> Array3<F> {
    let padded = pad2d(input, pad);
    let in4 = padded.insert_axis(Axis(1));
    let w5 = weight.insert_axis(Axis(2));
    let out = conv3d_valid(in4.view(), w5, bias);
    out.remove_axis(Axis(1))
}

/// Backward pass of [`conv2d`].
pub fn conv2d_backward<F: Real>(
    input: ArrayView3<F>,
    weight: ArrayView4<F>,
    grad_out: ArrayView3<F>,
    pad: usize,
    need_grad_input: bool,
) -> (Option<Array3<F>>, Array4<F>, Array1<F>) {
    let (_c, h, w) = input.dim();
    let padded = pad2d(input, pad);
    let in4 = padded.insert_axis(Axis(1));
    let w5 = weight.insert_axis(Axis(2));
    let g4 = grad_out.insert_axis(Axis(1));
    let grads = conv3d_valid_backward(in4.view(), w5, g4, need_grad_input);
    let grad_input = grads.input.map(|gi| {
        gi.remove_axis(Axis(1))
            .slice(s![.., pad..pad + h, pad..pad + w])
            .to_owned()
    });
    (
        grad_input,
        grads.weight.remove_axis(Axis(2)),
        grads.bias,
    )
}

pub fn relu<F: Real, D: Dimension>(a: &Array<F, D>) -> Array<F, D> {
    a.mapv(|x| if x > F::zero() { x } else { F::zero() })
}

/// Gradient through ReLU given the forward *output* (the mask `out > 0`
/// equals the mask of positive pre-activations).
pub fn relu_backward<F: Real, D: Dimension>(out: &Array<F, D>, grad: &Array<F, D>) -> Array<F, D> {
    let mut g = grad.clone();
    g.zip_mut_with(out, |g, o| {
        if *o <= F::zero() {
            *g = F::zero();
        }
    });
    g
}

pub fn sigmoid<F: Real, D: Dimension>(a: &Array<F, D>) -> Array<F, D> {
    a.mapv(|x| F::one() / (F::one() + (-x).exp()))
}

pub fn tanh<F: Real, D: Dimension>(a: &Array<F, D>) -> Array<F, D> {
    a.mapv(|x| x.tanh())
}

/// Glorot (Xavier) uniform initialization: U(-limit, limit) with
/// limit = sqrt(6 / (fan_in + fan_out)). Elements are drawn in row-major
/// order so initialization is reproducible for a given seeded RNG.
pub fn glorot_uniform<F: Real, D: Dimension, R: Rng>(
    rng: &mut R,
    dim: D,
    fan_in: usize,
    fan_out: usize,
) -> Array<F, D> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let lo = F::from_f64(-limit).unwrap();
    let hi = F::from_f64(limit).unwrap();
    Array::from_shape_simple_fn(dim, || rng.random_range(lo..hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_array<D: Dimension>(rng: &mut ChaCha8Rng, dim: D) -> Array<f64, D> {
        Array::from_shape_simple_fn(dim, || rng.random_range(-1.0..1.0))
    }

    /// Scalar probe loss: sum(output * cotangent) for a fixed random
    /// cotangent, so dL/d(output) == cotangent.
    fn probe<D: Dimension>(out: &Array<f64, D>, cot: &Array<f64, D>) -> f64 {
        (out * cot).sum()
    }

    #[test]
    fn conv3d_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let input = rand_array(&mut rng, ndarray::Ix4(3, 9, 12, 12));
        let weight = rand_array(&mut rng, ndarray::Ix5(5, 3, 3, 3, 3));
        let bias = Array1::zeros(5);
        let out = conv3d_valid(input.view(), weight.view(), &bias);
        assert_eq!(out.dim(), (5, 7, 10, 10));
    }

    #[test]
    fn conv3d_zero_input_gives_bias() {
        let input = Array4::<f64>::zeros((2, 9, 6, 6));
        let weight = Array5::from_elem((3, 2, 3, 3, 3), 0.5);
        let bias = ndarray::arr1(&[1.0, -2.0, 0.25]);
        let out = conv3d_valid(input.view(), weight.view(), &bias);
        for (c, &b) in bias.iter().enumerate() {
            assert!(out.index_axis(Axis(0), c).iter().all(|&x| x == b));
        }
    }

    #[test]
    fn conv3d_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let input = rand_array(&mut rng, ndarray::Ix4(2, 5, 6, 6));
        let mut weight = rand_array(&mut rng, ndarray::Ix5(3, 2, 3, 3, 3));
        let bias = rand_array(&mut rng, ndarray::Ix1(3));
        let out = conv3d_valid(input.view(), weight.view(), &bias);
        let cot = rand_array(&mut rng, out.raw_dim());

        let grads = conv3d_valid_backward(input.view(), weight.view(), cot.view(), true);

        let eps = 1e-6;
        // Sample a handful of weight coordinates.
        for &ix in &[[0, 0, 0, 0, 0], [1, 1, 2, 1, 0], [2, 0, 1, 2, 2]] {
            let orig = weight[ix];
            weight[ix] = orig + eps;
            let lp = probe(&conv3d_valid(input.view(), weight.view(), &bias), &cot);
            weight[ix] = orig - eps;
            let lm = probe(&conv3d_valid(input.view(), weight.view(), &bias), &cot);
            weight[ix] = orig;
            let fd = (lp - lm) / (2.0 * eps);
            assert!((fd - grads.weight[ix]).abs() < 1e-6, "weight fd {fd} vs {}", grads.weight[ix]);
        }
        // Input gradient.
        let gi = grads.input.unwrap();
        let mut input = input;
        for &ix in &[[0, 0, 0, 0], [1, 2, 3, 4], [0, 4, 5, 5]] {
            let orig = input[ix];
            input[ix] = orig + eps;
            let lp = probe(&conv3d_valid(input.view(), weight.view(), &bias), &cot);
            input[ix] = orig - eps;
            let lm = probe(&conv3d_valid(input.view(), weight.view(), &bias), &cot);
            input[ix] = orig;
            let fd = (lp - lm) / (2.0 * eps);
            assert!((fd - gi[ix]).abs() < 1e-6, "input fd {fd} vs {}", gi[ix]);
        }
        // Bias gradient equals the per-channel cotangent sum.
        for c in 0..3 {
            let expect = cot.index_axis(Axis(0), c).sum();
            assert!((grads.bias[c] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn conv2d_preserves_spatial_size_with_pad_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let input = rand_array(&mut rng, ndarray::Ix3(4, 8, 8));
        let weight = rand_array(&mut rng, ndarray::Ix4(6, 4, 3, 3));
        let bias = Array1::zeros(6);
        let out = conv2d(input.view(), weight.view(), &bias, 1);
        assert_eq!(out.dim(), (6, 8, 8));
    }

    #[test]
    fn conv2d_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut input = rand_array(&mut rng, ndarray::Ix3(3, 5, 5));
        let mut weight = rand_array(&mut rng, ndarray::Ix4(2, 3, 3, 3));
        let bias = rand_array(&mut rng, ndarray::Ix1(2));
        let out = conv2d(input.view(), weight.view(), &bias, 1);
        let cot = rand_array(&mut rng, out.raw_dim());

        let (gi, gw, _gb) =
            conv2d_backward(input.view(), weight.view(), cot.view(), 1, true);
        let gi = gi.unwrap();

        let eps = 1e-6;
        for &ix in &[[0, 0, 0, 0], [1, 2, 1, 2], [0, 1, 2, 0]] {
            let orig = weight[ix];
            weight[ix] = orig + eps;
            let lp = probe(&conv2d(input.view(), weight.view(), &bias, 1), &cot);
            weight[ix] = orig - eps;
            let lm = probe(&conv2d(input.view(), weight.view(), &bias, 1), &cot);
            weight[ix] = orig;
            let fd = (lp - lm) / (2.0 * eps);
            assert!((fd - gw[ix]).abs() < 1e-6);
        }
        for &ix in &[[0, 0, 0], [2, 4, 4], [1, 2, 3]] {
            let orig = input[ix];
            input[ix] = orig + eps;
            let lp = probe(&conv2d(input.view(), weight.view(), &bias, 1), &cot);
            input[ix] = orig - eps;
            let lm = probe(&conv2d(input.view(), weight.view(), &bias, 1), &cot);
            input[ix] = orig;
            let fd = (lp - lm) / (2.0 * eps);
            assert!((fd - gi[ix]).abs() < 1e-6);
        }
    }

    #[test]
    fn relu_and_backward() {
        let a = ndarray::arr1(&[-1.0, 0.0, 2.0]);
        let out = relu(&a);
        assert_eq!(out.to_vec(), vec![0.0, 0.0, 2.0]);
        let grad = ndarray::arr1(&[5.0, 5.0, 5.0]);
        let gi = relu_backward(&out, &grad);
        assert_eq!(gi.to_vec(), vec![0.0, 0.0, 5.0]);
    }

    #[test]
    fn glorot_limit_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w: Array2<f32> = glorot_uniform(&mut rng, ndarray::Ix2(64, 64), 64, 64);
        let limit = (6.0f32 / 128.0).sqrt();
        assert!(w.iter().all(|x| x.abs() <= limit));
        // Not degenerate.
        assert!(w.iter().any(|x| x.abs() > limit * 0.5));
    }
}
