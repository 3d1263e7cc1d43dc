//! Receptive-field bookkeeping along one spatial axis.
//!
//! A position is *unsafe* when any value in its receptive field comes from
//! padding (or a missing transposed-conv contribution at the border). Layers
//! act separably on rows and columns, so 2-D safety is the AND of both axes.

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Layer1d {
    Conv {
        kernel: usize,
        stride: usize,
        pad_before: usize,
        pad_after: usize,
    },
    ConvTranspose {
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    /// `x + inner(x)`.
    Residual(Vec<Layer1d>),
}

/// Propagates an unsafe mask through `layers`.
pub fn propagate_unsafe(mask: &[bool], layers: &[Layer1d]) -> Vec<bool> {
    layers.iter().fold(mask.to_vec(), |m, layer| step(&m, layer))
}

fn step(mask: &[bool], layer: &Layer1d) -> Vec<bool> {
    let n = mask.len() as isize;
    let bad = |i: isize| i < 0 || i >= n || mask[i as usize];
    match *layer {
        Layer1d::Conv {
            kernel,
            stride,
            pad_before,
            pad_after,
        } => {
            let out = (mask.len() + pad_before + pad_after - kernel) / stride + 1;
            (0..out)
                .map(|o| {
                    let start = (o * stride) as isize - pad_before as isize;
                    (0..kernel as isize).any(|t| bad(start + t))
                })
                .collect()
        }
        Layer1d::ConvTranspose {
            kernel,
            stride,
            padding,
        } => {
            let out = (mask.len() - 1) * stride + kernel - 2 * padding;
            (0..out as isize)
                .map(|o| {
                    (0..kernel as isize).any(|t| {
                        let num = o + padding as isize - t;
                        num.rem_euclid(stride as isize) == 0 && bad(num.div_euclid(stride as isize))
                    })
                })
                .collect()
        }
        Layer1d::Residual(ref inner) => {
            let branch = propagate_unsafe(mask, inner);
            assert_eq!(branch.len(), mask.len(), "residual branch must preserve size");
            branch.iter().zip(mask).map(|(a, b)| *a || *b).collect()
        }
    }
}

/// Number of leading (equivalently trailing) unsafe positions of a
/// symmetric mask.
pub fn margin(mask: &[bool]) -> usize {
    mask.iter().take_while(|&&u| u).count()
}
