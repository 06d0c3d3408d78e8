//! Dense HWC feature maps and the convolution/pooling kernels the UNet is
//! built from.

use rayon::prelude::*;

use super::SegmentationError;

/// Feature map stored row-major with interleaved channels (`H x W x C`).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self, SegmentationError> {
        if data.len() != height * width * channels {
            return Err(SegmentationError::ShapeMismatch(format!(
                "tensor buffer of {} values for shape {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Tensor {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Tensor {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, self.channels]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub(crate) fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub(crate) fn map_inplace(&mut self, f: impl Fn(f32) -> f32 + Sync) {
        self.data.par_iter_mut().for_each(|v| *v = f(*v));
    }

    pub(crate) fn add_channel_bias(&mut self, bias: &[f32]) {
        debug_assert_eq!(bias.len(), self.channels);
        let c = self.channels;
        self.data.par_chunks_mut(c).for_each(|px| {
            for (v, b) in px.iter_mut().zip(bias) {
                *v += *b;
            }
        });
    }
}

/// Convolution weights laid out `kh x kw x C_in x C_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    kh: usize,
    kw: usize,
    cin: usize,
    cout: usize,
    data: Vec<f32>,
}

impl Kernel {
    pub fn new(
        kh: usize,
        kw: usize,
        cin: usize,
        cout: usize,
        data: Vec<f32>,
    ) -> Result<Self, SegmentationError> {
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(SegmentationError::ShapeMismatch(format!(
                "kernel dims must be odd, got {kh}x{kw}"
            )));
        }
        if cin == 0 || cout == 0 {
            return Err(SegmentationError::ShapeMismatch(
                "kernel channel counts must be positive".into(),
            ));
        }
        if data.len() != kh * kw * cin * cout {
            return Err(SegmentationError::ShapeMismatch(format!(
                "kernel buffer of {} values for shape {kh}x{kw}x{cin}x{cout}",
                data.len()
            )));
        }
        Ok(Kernel {
            kh,
            kw,
            cin,
            cout,
            data,
        })
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.kh, self.kw, self.cin, self.cout]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, ky: usize, kx: usize, ci: usize, co: usize) -> f32 {
        self.data[((ky * self.kw + kx) * self.cin + ci) * self.cout + co]
    }
}

/// Zero-padded cross-correlation. Output is
/// `floor((H + 2p - kh) / stride) + 1` by the analogous width.
pub fn conv2d(
    input: &Tensor,
    kernel: &Kernel,
    stride: usize,
    zero_pad: usize,
) -> Result<Tensor, SegmentationError> {
    if stride == 0 {
        return Err(SegmentationError::ShapeMismatch("stride must be >= 1".into()));
    }
    if input.channels != kernel.cin {
        return Err(SegmentationError::ShapeMismatch(format!(
            "input has {} channels, kernel expects {}",
            input.channels, kernel.cin
        )));
    }
    let padded_h = input.height + 2 * zero_pad;
    let padded_w = input.width + 2 * zero_pad;
    if padded_h < kernel.kh || padded_w < kernel.kw {
        return Err(SegmentationError::ShapeMismatch(format!(
            "kernel {}x{} larger than padded input {padded_h}x{padded_w}",
            kernel.kh, kernel.kw
        )));
    }
    let out_h = (padded_h - kernel.kh) / stride + 1;
    let out_w = (padded_w - kernel.kw) / stride + 1;
    let (cin, cout) = (kernel.cin, kernel.cout);
    let mut out = vec![0.0f32; out_h * out_w * cout];

    out.par_chunks_mut(out_w * cout)
        .enumerate()
        .for_each(|(oy, row)| {
            for ox in 0..out_w {
                let acc = &mut row[ox * cout..(ox + 1) * cout];
                for ky in 0..kernel.kh {
                    let iy = (oy * stride + ky) as isize - zero_pad as isize;
                    if iy < 0 || iy >= input.height as isize {
                        continue;
                    }
                    for kx in 0..kernel.kw {
                        let ix = (ox * stride + kx) as isize - zero_pad as isize;
                        if ix < 0 || ix >= input.width as isize {
                            continue;
                        }
                        let px = (iy as usize * input.width + ix as usize) * cin;
                        let taps = (ky * kernel.kw + kx) * cin * cout;
                        for (ci, &x) in input.data[px..px + cin].iter().enumerate() {
                            if x == 0.0 {
                                continue;
                            }
                            let w = &kernel.data[taps + ci * cout..taps + (ci + 1) * cout];
                            for (a, &wv) in acc.iter_mut().zip(w) {
                                *a += x * wv;
                            }
                        }
                    }
                }
            }
        });

    Ok(Tensor {
        height: out_h,
        width: out_w,
        channels: cout,
        data: out,
    })
}

/// 2x2 max pooling with stride 2. Odd trailing rows/columns are dropped.
pub fn max_pool2(input: &Tensor) -> Tensor {
    let (h, w, c) = (input.height / 2, input.width / 2, input.channels);
    let mut data = vec![0.0f32; h * w * c];
    if data.is_empty() {
        return Tensor {
            height: h,
            width: w,
            channels: c,
            data,
        };
    }
    data.par_chunks_mut(w * c).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            for ch in 0..c {
                let m = input
                    .get(2 * y, 2 * x, ch)
                    .max(input.get(2 * y, 2 * x + 1, ch))
                    .max(input.get(2 * y + 1, 2 * x, ch))
                    .max(input.get(2 * y + 1, 2 * x + 1, ch));
                row[x * c + ch] = m;
            }
        }
    });
    Tensor {
        height: h,
        width: w,
        channels: c,
        data,
    }
}

/// Nearest-neighbour 2x upsampling.
pub fn upsample2(input: &Tensor) -> Tensor {
    let (h, w, c) = (input.height * 2, input.width * 2, input.channels);
    let mut data = Vec::with_capacity(h * w * c);
    for y in 0..h {
        for x in 0..w {
            let src = ((y / 2) * input.width + x / 2) * c;
            data.extend_from_slice(&input.data[src..src + c]);
        }
    }
    Tensor {
        height: h,
        width: w,
        channels: c,
        data,
    }
}

/// Channel concatenation `[a, b]` per pixel.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor, SegmentationError> {
    if a.height != b.height || a.width != b.width {
        return Err(SegmentationError::ShapeMismatch(format!(
            "cannot concatenate {}x{} with {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    let c = a.channels + b.channels;
    let mut data = Vec::with_capacity(a.height * a.width * c);
    for p in 0..a.height * a.width {
        data.extend_from_slice(&a.data[p * a.channels..(p + 1) * a.channels]);
        data.extend_from_slice(&b.data[p * b.channels..(p + 1) * b.channels]);
    }
    Ok(Tensor {
        height: a.height,
        width: a.width,
        channels: c,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Tensor {
        let data = (0..h * w * c).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::new(h, w, c, data).unwrap()
    }

    fn random_kernel(rng: &mut ChaCha8Rng, k: usize, cin: usize, cout: usize) -> Kernel {
        let data = (0..k * k * cin * cout).map(|_| rng.random_range(-1.0..1.0)).collect();
        Kernel::new(k, k, cin, cout, data).unwrap()
    }

    /// Direct summation in f64, iterating output channel outermost.
    fn conv_oracle(x: &Tensor, k: &Kernel, stride: usize, pad: usize) -> Vec<f64> {
        let [kh, kw, cin, cout] = k.shape();
        let oh = (x.height() + 2 * pad - kh) / stride + 1;
        let ow = (x.width() + 2 * pad - kw) / stride + 1;
        let mut out = vec![0.0; oh * ow * cout];
        for co in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut s = 0.0f64;
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * stride + ky) as i64 - pad as i64;
                            let ix = (ox * stride + kx) as i64 - pad as i64;
                            if iy < 0 || ix < 0 || iy >= x.height() as i64 || ix >= x.width() as i64 {
                                continue;
                            }
                            for ci in 0..cin {
                                s += x.get(iy as usize, ix as usize, ci) as f64
                                    * k.get(ky, kx, ci, co) as f64;
                            }
                        }
                    }
                    out[(oy * ow + ox) * cout + co] = s;
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_tensor(&mut rng, 4, 5, 2);
        // 1x1 kernel mapping channel i -> i
        let k = Kernel::new(1, 1, 2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(conv2d(&x, &k, 1, 0).unwrap(), x);
    }

    #[test]
    fn ones_kernel_on_constant_input() {
        let x = Tensor::new(5, 5, 1, vec![2.5; 25]).unwrap();
        let k = Kernel::new(3, 3, 1, 1, vec![1.0; 9]).unwrap();
        let y = conv2d(&x, &k, 1, 1).unwrap();
        assert_eq!(y.shape(), [5, 5, 1]);
        assert_eq!(y.get(2, 2, 0), 22.5);
        // corner sees a 2x2 window
        assert_eq!(y.get(0, 0, 0), 10.0);
    }

    #[test]
    fn random_case_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_tensor(&mut rng, 5, 5, 2);
        let k = random_kernel(&mut rng, 3, 2, 3);
        let got = conv2d(&x, &k, 1, 1).unwrap();
        let want = conv_oracle(&x, &k, 1, 1);
        for (g, w) in got.data().iter().zip(&want) {
            assert!((*g as f64 - w).abs() <= 1e-5 * w.abs().max(1.0));
        }
    }

    #[test]
    fn output_dims_follow_stride_formula() {
        let x = Tensor::zeros(7, 6, 1);
        let k = Kernel::new(3, 3, 1, 2, vec![0.0; 18]).unwrap();
        assert_eq!(conv2d(&x, &k, 2, 0).unwrap().shape(), [3, 2, 2]);
        assert_eq!(conv2d(&x, &k, 2, 1).unwrap().shape(), [4, 3, 2]);
        assert_eq!(conv2d(&x, &k, 3, 1).unwrap().shape(), [3, 2, 2]);
    }

    #[test]
    fn shape_errors() {
        let x = Tensor::zeros(4, 4, 2);
        let k = Kernel::new(3, 3, 1, 1, vec![0.0; 9]).unwrap();
        assert!(conv2d(&x, &k, 1, 1).is_err());
        let k = Kernel::new(3, 3, 2, 1, vec![0.0; 18]).unwrap();
        assert!(conv2d(&x, &k, 0, 1).is_err());
        assert!(conv2d(&Tensor::zeros(1, 1, 2), &k, 1, 0).is_err());
        assert!(Kernel::new(2, 3, 1, 1, vec![0.0; 6]).is_err());
    }

    #[test]
    fn pool_and_upsample() {
        let x = Tensor::new(2, 2, 1, vec![1.0, 4.0, -2.0, 3.0]).unwrap();
        assert_eq!(max_pool2(&x).data(), &[4.0]);
        let u = upsample2(&x);
        assert_eq!(u.shape(), [4, 4, 1]);
        assert_eq!(u.get(3, 3, 0), 3.0);
        assert_eq!(u.get(1, 2, 0), 4.0);
        let c = concat_channels(&x, &u.clone()).unwrap_err();
        assert!(matches!(c, SegmentationError::ShapeMismatch(_)));
    }

    fn dyadic_tensor(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Tensor {
        let data = (0..h * w * c).map(|_| rng.random_range(-8i32..=8) as f32 / 4.0).collect();
        Tensor::new(h, w, c, data).unwrap()
    }

    // Quarter-integer inputs keep every f32 product and partial sum exact,
    // so linearity can be checked at 1e-6 without rounding noise.
    proptest! {
        #[test]
        fn conv_is_linear(seed in 0u64..1000, alpha_q in -12i32..=12) {
            let alpha = alpha_q as f32 / 4.0;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = dyadic_tensor(&mut rng, 6, 5, 2);
            let y = dyadic_tensor(&mut rng, 6, 5, 2);
            let kd = dyadic_tensor(&mut rng, 3, 3, 4);
            let k = Kernel::new(3, 3, 2, 2, kd.data().to_vec()).unwrap();
            let sum = Tensor::new(6, 5, 2, x.data().iter().zip(y.data()).map(|(a, b)| a + b).collect()).unwrap();
            let scaled = Tensor::new(6, 5, 2, x.data().iter().map(|a| alpha * a).collect()).unwrap();
            let cx = conv2d(&x, &k, 1, 1).unwrap();
            let cy = conv2d(&y, &k, 1, 1).unwrap();
            let cs = conv2d(&sum, &k, 1, 1).unwrap();
            let ca = conv2d(&scaled, &k, 1, 1).unwrap();
            for i in 0..cs.data().len() {
                prop_assert!((cs.data()[i] - (cx.data()[i] + cy.data()[i])).abs() <= 1e-6);
                prop_assert!((ca.data()[i] - alpha * cx.data()[i]).abs() <= 1e-6);
            }
        }
    }
}
