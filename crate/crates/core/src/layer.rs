//! Layer descriptions and the linear algebra shared by the DNN and the SNN.
//!
//! Dense weights are stored row-major as `[in][out]`, so `weights[i * out + j]`
//! is the synapse from presynaptic neuron `i` to postsynaptic neuron `j`.
//! Conv2d weights are stored row-major as `[out_c][in_c][k][k]` and carry one
//! bias per output channel. Activation tensors are flattened `[c][h][w]`.

use serde::{Deserialize, Serialize};

use crate::network::KernelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    /// Output `[c, h, w]` for an input of spatial size `h x w`, or `None` when
    /// the kernel does not fit.
    pub fn output_shape(&self, h: usize, w: usize) -> Option<[usize; 3]> {
        if self.stride == 0 || self.kernel_size == 0 {
            return None;
        }
        let oh = (h + 2 * self.padding).checked_sub(self.kernel_size)? / self.stride + 1;
        let ow = (w + 2 * self.padding).checked_sub(self.kernel_size)? / self.stride + 1;
        Some([self.out_channels, oh, ow])
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel_size * self.kernel_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Dense,
    Conv2d(ConvGeometry),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_shape: Vec<usize>,
    pub out_shape: Vec<usize>,
    /// Kernel of the spikes arriving at this layer: the fire kernel of the
    /// presynaptic layer (the input encoder for layer 0) and this layer's
    /// integration kernel, which are always equal.
    pub kernel: KernelParams,
}

impl LayerSpec {
    pub fn dense(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>, kernel: KernelParams) -> Self {
        LayerSpec {
            kind: LayerKind::Dense,
            weights,
            bias,
            in_shape: vec![inputs],
            out_shape: vec![outputs],
            kernel,
        }
    }

    /// Conv layer over a `[c, h, w]` input. The output shape is derived from
    /// the geometry; an impossible geometry yields an empty output shape that
    /// validation will reject.
    pub fn conv2d(
        in_shape: [usize; 3],
        geometry: ConvGeometry,
        weights: Vec<f64>,
        bias: Vec<f64>,
        kernel: KernelParams,
    ) -> Self {
        let out_shape = geometry
            .output_shape(in_shape[1], in_shape[2])
            .map(|s| s.to_vec())
            .unwrap_or_default();
        LayerSpec {
            kind: LayerKind::Conv2d(geometry),
            weights,
            bias,
            in_shape: in_shape.to_vec(),
            out_shape,
            kernel,
        }
    }

    pub fn in_len(&self) -> usize {
        self.in_shape.iter().product()
    }

    pub fn out_len(&self) -> usize {
        self.out_shape.iter().product()
    }

    pub fn expected_weight_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense => self.in_len() * self.out_len(),
            LayerKind::Conv2d(g) => g.weight_len(),
        }
    }

    pub fn expected_bias_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense => self.out_len(),
            LayerKind::Conv2d(g) => g.out_channels,
        }
    }

    /// Bias of output unit `j` (for conv layers, the bias of its channel).
    #[inline]
    pub fn bias_of(&self, j: usize) -> f64 {
        match self.kind {
            LayerKind::Dense => self.bias[j],
            LayerKind::Conv2d(_) => {
                let plane = self.out_shape[1] * self.out_shape[2];
                self.bias[j / plane]
            }
        }
    }

    /// `out = W x + b`.
    pub fn affine(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.bias_of(j);
        }
        self.accumulate(x, out);
    }

    /// `out += W x`, skipping zero inputs.
    pub fn accumulate(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_len());
        debug_assert_eq!(out.len(), self.out_len());
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                self.scatter(i, xi, out);
            }
        }
    }

    /// `out[j] += scale * w_ij` for every postsynaptic `j` reached by input `i`.
    #[inline]
    pub fn scatter(&self, i: usize, scale: f64, out: &mut [f64]) {
        match self.kind {
            LayerKind::Dense => {
                let n = out.len();
                let row = &self.weights[i * n..(i + 1) * n];
                for (o, &w) in out.iter_mut().zip(row) {
                    *o += scale * w;
                }
            }
            LayerKind::Conv2d(g) => {
                let (ih, iw) = (self.in_shape[1], self.in_shape[2]);
                let (oh, ow) = (self.out_shape[1], self.out_shape[2]);
                let c = i / (ih * iw);
                let y = (i / iw) % ih;
                let x = i % iw;
                let k = g.kernel_size;
                for ky in 0..k {
                    let Some(oy) = conv_target(y, ky, g.padding, g.stride, oh) else {
                        continue;
                    };
                    for kx in 0..k {
                        let Some(ox) = conv_target(x, kx, g.padding, g.stride, ow) else {
                            continue;
                        };
                        for oc in 0..g.out_channels {
                            let w = self.weights[((oc * g.in_channels + c) * k + ky) * k + kx];
                            out[(oc * oh + oy) * ow + ox] += scale * w;
                        }
                    }
                }
            }
        }
    }

    /// `out += W x` evaluated output-major, one dot product per output unit.
    /// Same result as [`accumulate`](Self::accumulate) up to summation order.
    pub fn gather(&self, x: &[f64], out: &mut [f64]) {
        match self.kind {
            LayerKind::Dense => {
                let n = out.len();
                for (j, o) in out.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (i, &xi) in x.iter().enumerate() {
                        s += self.weights[i * n + j] * xi;
                    }
                    *o += s;
                }
            }
            LayerKind::Conv2d(g) => {
                let (ih, iw) = (self.in_shape[1] as isize, self.in_shape[2] as isize);
                let (oh, ow) = (self.out_shape[1], self.out_shape[2]);
                let k = g.kernel_size;
                for oc in 0..g.out_channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut s = 0.0;
                            for c in 0..g.in_channels {
                                for ky in 0..k {
                                    let y = (oy * g.stride + ky) as isize - g.padding as isize;
                                    if y < 0 || y >= ih {
                                        continue;
                                    }
                                    for kx in 0..k {
                                        let xx = (ox * g.stride + kx) as isize - g.padding as isize;
                                        if xx < 0 || xx >= iw {
                                            continue;
                                        }
                                        let xi = x[(c * ih as usize + y as usize) * iw as usize + xx as usize];
                                        s += xi * self.weights[((oc * g.in_channels + c) * k + ky) * k + kx];
                                    }
                                }
                            }
                            out[(oc * oh + oy) * ow + ox] += s;
                        }
                    }
                }
            }
        }
    }

    /// Accumulates parameter gradients for `out = W x + b` given `delta = dL/dout`,
    /// and writes `dL/dx` into `delta_in` when requested.
    pub fn backward(
        &self,
        x: &[f64],
        delta: &[f64],
        grad_w: &mut [f64],
        grad_b: &mut [f64],
        delta_in: Option<&mut [f64]>,
    ) {
        match self.kind {
            LayerKind::Dense => {
                let n = delta.len();
                for (gb, &d) in grad_b.iter_mut().zip(delta) {
                    *gb += d;
                }
                for (i, &xi) in x.iter().enumerate() {
                    if xi != 0.0 {
                        let row = &mut grad_w[i * n..(i + 1) * n];
                        for (g, &d) in row.iter_mut().zip(delta) {
                            *g += xi * d;
                        }
                    }
                }
                if let Some(din) = delta_in {
                    for (i, di) in din.iter_mut().enumerate() {
                        let row = &self.weights[i * n..(i + 1) * n];
                        *di = row.iter().zip(delta).map(|(w, d)| w * d).sum();
                    }
                }
            }
            LayerKind::Conv2d(g) => {
                let (ih, iw) = (self.in_shape[1], self.in_shape[2]);
                let (oh, ow) = (self.out_shape[1], self.out_shape[2]);
                let k = g.kernel_size;
                for oc in 0..g.out_channels {
                    let plane = &delta[oc * oh * ow..(oc + 1) * oh * ow];
                    grad_b[oc] += plane.iter().sum::<f64>();
                }
                let mut din = delta_in;
                if let Some(d) = din.as_deref_mut() {
                    d.fill(0.0);
                }
                for c in 0..g.in_channels {
                    for y in 0..ih {
                        for xx in 0..iw {
                            let i = (c * ih + y) * iw + xx;
                            let xi = x[i];
                            let mut acc = 0.0;
                            for ky in 0..k {
                                let Some(oy) = conv_target(y, ky, g.padding, g.stride, oh) else {
                                    continue;
                                };
                                for kx in 0..k {
                                    let Some(ox) = conv_target(xx, kx, g.padding, g.stride, ow) else {
                                        continue;
                                    };
                                    for oc in 0..g.out_channels {
                                        let widx = ((oc * g.in_channels + c) * k + ky) * k + kx;
                                        let d = delta[(oc * oh + oy) * ow + ox];
                                        grad_w[widx] += xi * d;
                                        acc += self.weights[widx] * d;
                                    }
                                }
                            }
                            if let Some(d) = din.as_deref_mut() {
                                d[i] = acc;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Output coordinate that input coordinate `pos` feeds through kernel tap
/// `tap`, if any.
#[inline]
fn conv_target(pos: usize, tap: usize, padding: usize, stride: usize, limit: usize) -> Option<usize> {
    let shifted = (pos + padding).checked_sub(tap)?;
    if shifted % stride != 0 {
        return None;
    }
    let o = shifted / stride;
    (o < limit).then_some(o)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> KernelParams {
        KernelParams::new(20.0, 0.0)
    }

    #[test]
    fn dense_affine_uses_in_out_layout() {
        // 2 inputs, 3 outputs
        let l = LayerSpec::dense(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![0.5, 0.0, -1.0], k());
        let mut out = vec![0.0; 3];
        l.affine(&[1.0, 2.0], &mut out);
        assert_eq!(out, vec![9.5, 12.0, 14.0]);
    }

    #[test]
    fn conv_scatter_matches_gather() {
        let g = ConvGeometry {
            in_channels: 2,
            out_channels: 3,
            kernel_size: 3,
            stride: 2,
            padding: 1,
        };
        let w: Vec<f64> = (0..g.weight_len())
            .map(|i| ((i * 7919) % 13) as f64 / 6.5 - 1.0)
            .collect();
        let l = LayerSpec::conv2d([2, 5, 6], g, w, vec![0.1, -0.2, 0.3], k());
        assert_eq!(l.out_shape, vec![3, 3, 3]);
        let x: Vec<f64> = (0..l.in_len()).map(|i| ((i * 31) % 11) as f64 / 11.0).collect();
        let mut out = vec![0.0; l.out_len()];
        l.affine(&x, &mut out);
        let mut want: Vec<f64> = (0..l.out_len()).map(|j| l.bias_of(j)).collect();
        l.gather(&x, &mut want);
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_output_shape_rejects_oversized_kernel() {
        let g = ConvGeometry {
            in_channels: 1,
            out_channels: 1,
            kernel_size: 5,
            stride: 1,
            padding: 0,
        };
        assert_eq!(g.output_shape(3, 3), None);
        assert_eq!(g.output_shape(5, 7), Some([1, 1, 3]));
    }
}
