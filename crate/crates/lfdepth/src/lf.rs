//! Core light-field containers and slicing operations.
//!
//! A 4D light field video is stored as a dense `[T, v, u, H, W, C]` tensor:
//! `T` frames, a 9x9 angular grid indexed `(v, u)` (row, column), spatial
//! `H x W` pixels and `C` color channels in `[0, 1]`. The network never sees
//! the full 4D structure — it consumes the central angular row and column as
//! two 9-view stacks per frame (the horizontal and vertical EPI volumes).

use ndarray::{s, Array, Array2, Array3, Array5, Array6, ArrayBase, Axis, Data, Dimension};

use crate::error::{Error, Result};
use crate::nn::Real;

/// Angular resolution along each axis of the view grid.
pub const ANGULAR: usize = 9;
/// Index of the central view in a 9-view stack.
pub const CENTRAL: usize = 4;
/// Spatial side length of a training patch.
pub const PATCH_SIZE: usize = 32;
/// Temporal length of a training patch.
pub const PATCH_FRAMES: usize = 5;
/// Default spatial stride of the patch grid.
pub const SPATIAL_STRIDE: usize = 16;
/// Default temporal stride of the patch grid.
pub const TEMPORAL_STRIDE: usize = 1;

/// Dense 4D light field video: `[T, v, u, H, W, C]`, values in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct LFVideo {
    pub data: Array6<f32>,
}

impl LFVideo {
    /// Wraps a raw tensor, checking the container invariants: a 9x9 angular
    /// grid, at least one frame, and finite values within `[0, 1]`.
    pub fn new(data: Array6<f32>) -> Result<Self> {
        let (t, v, u, _h, _w, _c) = data.dim();
        if v != ANGULAR || u != ANGULAR {
            return Err(Error::BadAngularExtent {
                views_v: v,
                views_u: u,
            });
        }
        if t < 1 {
            return Err(Error::InvalidInput {
                context: "LFVideo",
                reason: "frame count must be >= 1".into(),
            });
        }
        if data.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > 1.0) {
            return Err(Error::InvalidInput {
                context: "LFVideo",
                reason: "values must be finite and within [0, 1]".into(),
            });
        }
        Ok(Self { data })
    }

    pub fn frames(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().3
    }

    pub fn width(&self) -> usize {
        self.data.dim().4
    }

    pub fn channels(&self) -> usize {
        self.data.dim().5
    }

    /// The central sub-aperture view of one frame, `[H, W, C]`.
    pub fn central_view(&self, frame: usize) -> Array3<f32> {
        self.data
            .slice(s![frame, CENTRAL, CENTRAL, .., .., ..])
            .to_owned()
    }
}

/// Per-frame horizontal and vertical 9-view sub-aperture stacks,
/// each `[T, 9, h, w, C]`.
///
/// `horizontal[t][k]` is the view at angular position `(4, k)` (central row,
/// ordered left to right); `vertical[t][k]` is the view at `(k, 4)` (central
/// column, top to bottom). Index 4 of either stack is the central view.
#[derive(Debug, Clone)]
pub struct EPIStackSequence {
    pub horizontal: Array5<f32>,
    pub vertical: Array5<f32>,
    pub frame_indices: Vec<usize>,
}

impl EPIStackSequence {
    pub fn frames(&self) -> usize {
        self.horizontal.dim().0
    }

    pub fn height(&self) -> usize {
        self.horizontal.dim().2
    }

    pub fn width(&self) -> usize {
        self.horizontal.dim().3
    }

    pub fn channels(&self) -> usize {
        self.horizontal.dim().4
    }

    /// Crops a spatio-temporal window out of both stacks.
    pub fn crop(&self, t0: usize, y0: usize, x0: usize, t_len: usize, size: usize) -> Self {
        let range = s![t0..t0 + t_len, .., y0..y0 + size, x0..x0 + size, ..];
        EPIStackSequence {
            horizontal: self.horizontal.slice(range).to_owned(),
            vertical: self.vertical.slice(range).to_owned(),
            frame_indices: self.frame_indices[t0..t0 + t_len].to_vec(),
        }
    }
}

/// Single-channel disparity raster in pixels-of-shift units.
#[derive(Debug, Clone)]
pub struct DisparityMap {
    pub values: Array2<f32>,
    pub valid_mask: Array2<bool>,
}

impl DisparityMap {
    /// A fully valid map.
    pub fn dense(values: Array2<f32>) -> Self {
        let valid_mask = Array2::from_elem(values.raw_dim(), true);
        Self { values, valid_mask }
    }

    pub fn height(&self) -> usize {
        self.values.nrows()
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }
}

/// One training sample: a 5-frame 32x32 EPI-stack window plus ground truth
/// and provenance coordinates.
#[derive(Debug, Clone)]
pub struct PatchSample {
    pub epi: EPIStackSequence,
    /// Ground-truth disparity of the central view, `[5, 32, 32]`.
    pub gt: Array3<f32>,
    pub scene_id: String,
    pub t0: usize,
    pub y0: usize,
    pub x0: usize,
}

/// Slices the central angular row and column out of a light field video.
///
/// `horizontal = lf[:, 4, :, ...]` (vary u, left to right) and
/// `vertical = lf[:, :, 4, ...]` (vary v, top to bottom); index 4 of each
/// stack is the central view.
pub fn slice_epi_stacks(lf: &LFVideo) -> Result<EPIStackSequence> {
    let (t, v, u, ..) = lf.data.dim();
    if v != ANGULAR || u != ANGULAR {
        return Err(Error::BadAngularExtent {
            views_v: v,
            views_u: u,
        });
    }
    let horizontal = lf.data.slice(s![.., CENTRAL, .., .., .., ..]).to_owned();
    let vertical = lf.data.slice(s![.., .., CENTRAL, .., .., ..]).to_owned();
    Ok(EPIStackSequence {
        horizontal,
        vertical,
        frame_indices: (0..t).collect(),
    })
}

/// Subtracts the global mean of an array.
pub fn zero_mean<F, S, D>(stack: &ArrayBase<S, D>) -> Array<F, D>
where
    F: Real,
    S: Data<Elem = F>,
    D: Dimension,
{
    let n = F::from_usize(stack.len()).unwrap();
    let mean = stack.sum() / n;
    stack.mapv(|x| x - mean)
}

/// Zero-mean normalization over a batch: axis 0 indexes samples and each
/// sample's mean is taken over all of its remaining (view, spatial, channel)
/// elements.
pub fn zero_mean_normalize<F, S, D>(batch: &ArrayBase<S, D>) -> Array<F, D>
where
    F: Real,
    S: Data<Elem = F>,
    D: Dimension,
{
    let mut out = batch.to_owned();
    for mut sample in out.axis_iter_mut(Axis(0)) {
        let n = F::from_usize(sample.len()).unwrap();
        let mean = sample.sum() / n;
        sample.mapv_inplace(|x| x - mean);
    }
    out
}

/// Zero-pads two spatial axes of a stack by `pad` pixels on every side.
pub fn pad_spatial<F, S, D>(stack: &ArrayBase<S, D>, pad: usize, axes: (usize, usize)) -> Array<F, D>
where
    F: Real,
    S: Data<Elem = F>,
    D: Dimension,
{
    let mut shape = stack.raw_dim();
    shape[axes.0] += 2 * pad;
    shape[axes.1] += 2 * pad;
    let mut out = Array::zeros(shape);
    let mut interior = out.view_mut();
    interior.slice_axis_inplace(
        Axis(axes.0),
        ndarray::Slice::from(pad as isize..(pad + stack.shape()[axes.0]) as isize),
    );
    interior.slice_axis_inplace(
        Axis(axes.1),
        ndarray::Slice::from(pad as isize..(pad + stack.shape()[axes.1]) as isize),
    );
    interior.assign(stack);
    out
}

/// Grid coordinate of one patch window within a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatchCoord {
    pub t0: usize,
    pub y0: usize,
    pub x0: usize,
}

/// Enumerates the patch windows of a scene on the stride grid, in
/// deterministic (t, y, x) order.
pub fn patch_grid(
    height: usize,
    width: usize,
    frames: usize,
    spatial_stride: usize,
    temporal_stride: usize,
) -> Vec<PatchCoord> {
    if height < PATCH_SIZE || width < PATCH_SIZE || frames < PATCH_FRAMES {
        return Vec::new();
    }
    let mut coords = Vec::new();
    let mut t0 = 0;
    while t0 + PATCH_FRAMES <= frames {
        let mut y0 = 0;
        while y0 + PATCH_SIZE <= height {
            let mut x0 = 0;
            while x0 + PATCH_SIZE <= width {
                coords.push(PatchCoord { t0, y0, x0 });
                x0 += spatial_stride;
            }
            y0 += spatial_stride;
        }
        t0 += temporal_stride;
    }
    coords
}

/// Number of patches `patch_grid` yields; with the default strides this is
/// `(floor((H-32)/16)+1) * (floor((W-32)/16)+1) * (T-4)`.
pub fn patch_count(
    height: usize,
    width: usize,
    frames: usize,
    spatial_stride: usize,
    temporal_stride: usize,
) -> usize {
    if height < PATCH_SIZE || width < PATCH_SIZE || frames < PATCH_FRAMES {
        return 0;
    }
    let ny = (height - PATCH_SIZE) / spatial_stride + 1;
    let nx = (width - PATCH_SIZE) / spatial_stride + 1;
    let nt = (frames - PATCH_FRAMES) / temporal_stride + 1;
    ny * nx * nt
}

/// Cuts one patch out of pre-sliced EPI stacks and a ground-truth volume
/// (`gt` is `[T, H, W]`).
pub fn crop_patch(
    stacks: &EPIStackSequence,
    gt: &Array3<f32>,
    scene_id: &str,
    coord: PatchCoord,
) -> PatchSample {
    let PatchCoord { t0, y0, x0 } = coord;
    PatchSample {
        epi: stacks.crop(t0, y0, x0, PATCH_FRAMES, PATCH_SIZE),
        gt: gt
            .slice(s![
                t0..t0 + PATCH_FRAMES,
                y0..y0 + PATCH_SIZE,
                x0..x0 + PATCH_SIZE
            ])
            .to_owned(),
        scene_id: scene_id.to_string(),
        t0,
        y0,
        x0,
    }
}

/// Extracts every 5-frame, 32x32 patch of a scene on the stride grid.
pub fn extract_patches(
    lf: &LFVideo,
    gt: &[DisparityMap],
    scene_id: &str,
    spatial_stride: usize,
    temporal_stride: usize,
) -> Result<Vec<PatchSample>> {
    if lf.frames() < PATCH_FRAMES || lf.height() < PATCH_SIZE || lf.width() < PATCH_SIZE {
        return Err(Error::SceneTooSmall(scene_id.to_string()));
    }
    if gt.len() != lf.frames() {
        return Err(Error::ShapeMismatch {
            context: "extract_patches",
            expected: format!("{} ground-truth maps", lf.frames()),
            got: format!("{}", gt.len()),
        });
    }
    let stacks = slice_epi_stacks(lf)?;
    let gt_volume = stack_gt(gt);
    let coords = patch_grid(
        lf.height(),
        lf.width(),
        lf.frames(),
        spatial_stride,
        temporal_stride,
    );
    Ok(coords
        .into_iter()
        .map(|c| crop_patch(&stacks, &gt_volume, scene_id, c))
        .collect())
}

/// Stacks per-frame disparity maps into a `[T, H, W]` volume.
pub fn stack_gt(gt: &[DisparityMap]) -> Array3<f32> {
    let (h, w) = (gt[0].height(), gt[0].width());
    let mut out = Array3::zeros((gt.len(), h, w));
    for (t, map) in gt.iter().enumerate() {
        out.slice_mut(s![t, .., ..]).assign(&map.values);
    }
    out
}
