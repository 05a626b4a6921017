//! Grids, index conventions and interpolation.
//!
//! Spatial axes use pixel units (`x` is the column, `y` the row), the angular
//! axis samples `[0, 2π)` with `K` equidistant orientations. Out-of-range
//! spatial indices are mirrored (half-sample symmetric, `v[-1-m] = v[m]`),
//! orientation indices wrap around.

use std::f64::consts::PI;

use crate::error::{invalid, mismatch, Result};

/// Maps an orientation index onto `[0, k)`.
#[inline]
pub fn wrap_orientation(k: i64, num_orientations: usize) -> usize {
    debug_assert!(num_orientations >= 1);
    let n = num_orientations as i64;
    if (0..n).contains(&k) {
        return k as usize;
    }
    k.rem_euclid(n) as usize
}

/// Mirrors a spatial index into `[0, n)` using `v[-1-m] = v[m]`.
#[inline]
pub fn reflect_spatial(i: i64, n: usize) -> usize {
    debug_assert!(n >= 1);
    let n = n as i64;
    if (0..n).contains(&i) {
        return i as usize;
    }
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// A 2D scalar image stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("shape", "image dimensions must be positive"));
        }
        if data.len() != width * height {
            return Err(mismatch(width * height, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("data", "image contains non-finite values"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0);
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0);
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// Value at a possibly out-of-range index, mirrored into the grid.
    #[inline]
    pub fn get_reflect(&self, x: i64, y: i64) -> f64 {
        self.get(
            reflect_spatial(x, self.width),
            reflect_spatial(y, self.height),
        )
    }

    /// Bilinear interpolation with mirrored boundaries.
    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let a = self.get_reflect(x0, y0);
        let b = self.get_reflect(x0 + 1, y0);
        let c = self.get_reflect(x0, y0 + 1);
        let d = self.get_reflect(x0 + 1, y0 + 1);
        lerp(lerp(a, b, fx), lerp(c, d, fx), fy)
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn min_max(&self) -> (f64, f64) {
        min_max(&self.data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Rotation by +90° about the grid centre: `(x, y) -> (h-1-y, x)`.
    ///
    /// With `x` pointing right and `y` down this maps the direction angle
    /// `θ` onto `θ + π/2`.
    pub fn rotate90(&self) -> Image {
        let (w, h) = (self.width, self.height);
        let mut out = vec![0.0; w * h];
        // new width = h, new height = w
        for y in 0..h {
            for x in 0..w {
                let nx = h - 1 - y;
                let ny = x;
                out[ny * h + nx] = self.get(x, y);
            }
        }
        Image {
            width: h,
            height: w,
            data: out,
        }
    }

    /// Integer translation with mirrored boundaries.
    pub fn translate(&self, dx: i64, dy: i64) -> Image {
        Image::from_fn(self.width, self.height, |x, y| {
            self.get_reflect(x as i64 - dx, y as i64 - dy)
        })
    }
}

/// A scalar field on the `(x, y, θ)` grid, `x` fastest, then `y`, then `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    width: usize,
    height: usize,
    orientations: usize,
    data: Vec<f64>,
}

impl Volume {
    pub fn new(width: usize, height: usize, orientations: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || orientations == 0 {
            return Err(invalid("shape", "volume dimensions must be positive"));
        }
        let n = width * height * orientations;
        if data.len() != n {
            return Err(mismatch(n, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("data", "volume contains non-finite values"));
        }
        Ok(Self {
            width,
            height,
            orientations,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, orientations: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0 && orientations > 0);
        Self {
            width,
            height,
            orientations,
            data: vec![value; width * height * orientations],
        }
    }

    /// Builds a volume from `f(x, y, k)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        orientations: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Self {
        assert!(width > 0 && height > 0 && orientations > 0);
        let mut data = Vec::with_capacity(width * height * orientations);
        for k in 0..orientations {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(x, y, k));
                }
            }
        }
        Self {
            width,
            height,
            orientations,
            data,
        }
    }

    /// Stacks equally sized images as orientation slices.
    pub fn from_slices(slices: &[Image]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| invalid("slices", "at least one slice required"))?;
        let mut data = Vec::with_capacity(first.len() * slices.len());
        for s in slices {
            if !s.same_shape(first) {
                return Err(mismatch(
                    format!("{}x{}", first.width, first.height),
                    format!("{}x{}", s.width, s.height),
                ));
            }
            data.extend_from_slice(s.data());
        }
        Ok(Self {
            width: first.width,
            height: first.height,
            orientations: slices.len(),
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn orientations(&self) -> usize {
        self.orientations
    }

    /// Angular step `2π/K`.
    #[inline]
    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.orientations as f64
    }

    #[inline]
    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * self.dtheta()
    }

    #[inline]
    pub fn slice_len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.orientations)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, k: usize) -> usize {
        x + self.width * (y + self.height * k)
    }

    /// Inverse of [`Volume::index`].
    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let x = idx % self.width;
        let rest = idx / self.width;
        (x, rest % self.height, rest / self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, k: usize) -> f64 {
        self.data[self.index(x, y, k)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, k: usize, value: f64) {
        let i = self.index(x, y, k);
        self.data[i] = value;
    }

    /// Value at an arbitrary integer index: mirrored in space, periodic in θ.
    #[inline]
    pub fn get_wrapped(&self, x: i64, y: i64, k: i64) -> f64 {
        self.get(
            reflect_spatial(x, self.width),
            reflect_spatial(y, self.height),
            wrap_orientation(k, self.orientations),
        )
    }

    pub fn slice(&self, k: usize) -> Image {
        let n = self.slice_len();
        Image {
            width: self.width,
            height: self.height,
            data: self.data[k * n..(k + 1) * n].to_vec(),
        }
    }

    pub fn slice_data(&self, k: usize) -> &[f64] {
        let n = self.slice_len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn same_shape(&self, other: &Volume) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn check_shape(&self, other: &Volume) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(mismatch(
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ))
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        min_max(&self.data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Volume {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    /// A volume of the same shape holding `data`.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> Volume {
        debug_assert_eq!(data.len(), self.data.len());
        Volume {
            width: self.width,
            height: self.height,
            orientations: self.orientations,
            data,
        }
    }

    /// Spatial rotation by +90° combined with the orientation shift `K/4`.
    ///
    /// This is the grid-exact roto-translation under which the invariant
    /// operators are equivariant. Requires `4 | K`.
    pub fn rotate90(&self) -> Result<Volume> {
        if !self.orientations.is_multiple_of(4) {
            return Err(invalid(
                "orientations",
                format!(
                    "90° rotation needs K divisible by 4, got {}",
                    self.orientations
                ),
            ));
        }
        let shift = self.orientations / 4;
        let mut slices = vec![Image::filled(1, 1, 0.0); self.orientations];
        for k in 0..self.orientations {
            slices[(k + shift) % self.orientations] = self.slice(k).rotate90();
        }
        Volume::from_slices(&slices)
    }

    /// Integer spatial translation with mirrored boundaries.
    pub fn translate(&self, dx: i64, dy: i64) -> Volume {
        Volume::from_fn(self.width, self.height, self.orientations, |x, y, k| {
            self.get_wrapped(x as i64 - dx, y as i64 - dy, k as i64)
        })
    }
}

/// `a + t(b − a)`: exact when `a == b`, so constants interpolate to
/// themselves.
#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Trilinear interpolation at the fractional grid position `(x, y, k)`.
///
/// Spatial neighbours are mirrored, the orientation axis wraps. The result is
/// a convex combination of the eight surrounding samples.
#[inline]
pub fn trilinear_sample(v: &Volume, x: f64, y: f64, k: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let k0 = k.floor();
    let fx = x - x0;
    let fy = y - y0;
    let fk = k - k0;
    let (w, h, n) = v.shape();
    let xi0 = reflect_spatial(x0 as i64, w);
    let xi1 = reflect_spatial(x0 as i64 + 1, w);
    let yi0 = reflect_spatial(y0 as i64, h);
    let yi1 = reflect_spatial(y0 as i64 + 1, h);
    let ki0 = wrap_orientation(k0 as i64, n);
    let ki1 = wrap_orientation(k0 as i64 + 1, n);
    let d = v.data();
    let plane = |k: usize| {
        let base = k * w * h;
        let a = d[base + yi0 * w + xi0];
        let b = d[base + yi0 * w + xi1];
        let c = d[base + yi1 * w + xi0];
        let e = d[base + yi1 * w + xi1];
        lerp(lerp(a, b, fx), lerp(c, e, fx), fy)
    };
    if fk == 0.0 {
        plane(ki0)
    } else {
        lerp(plane(ki0), plane(ki1), fk)
    }
}

/// A boolean mask over an image (`layers == 1`) or a volume. `true` marks
/// cells that evolve; `false` cells are held at their initial value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    layers: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, layers: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height * layers {
            return Err(mismatch(width * height * layers, data.len()));
        }
        Ok(Self {
            width,
            height,
            layers,
            data,
        })
    }

    pub fn from_image_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            layers: 1,
            data,
        }
    }

    /// Marks every pixel whose image value exceeds `threshold`.
    pub fn from_image(img: &Image, threshold: f64) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            layers: 1,
            data: img.data().iter().map(|&v| v > threshold).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, layer: usize) -> bool {
        self.data[x + self.width * (y + self.height * layer)]
    }

    /// Matches an image grid exactly.
    pub fn check_image(&self, img: &Image) -> Result<()> {
        if self.layers == 1 && self.width == img.width() && self.height == img.height() {
            Ok(())
        } else {
            Err(mismatch(
                format!("{}x{}x1", img.width(), img.height()),
                format!("{}x{}x{}", self.width, self.height, self.layers),
            ))
        }
    }

    /// Broadcasts a 2D mask over all orientations of `v`; 3D masks must match
    /// the volume exactly.
    pub fn for_volume(&self, v: &Volume) -> Result<Mask> {
        let (w, h, n) = v.shape();
        if self.width != w || self.height != h || (self.layers != 1 && self.layers != n) {
            return Err(mismatch(
                format!("{w}x{h}x{n}"),
                format!("{}x{}x{}", self.width, self.height, self.layers),
            ));
        }
        if self.layers == n {
            return Ok(self.clone());
        }
        let mut data = Vec::with_capacity(w * h * n);
        for _ in 0..n {
            data.extend_from_slice(&self.data);
        }
        Ok(Mask {
            width: w,
            height: h,
            layers: n,
            data,
        })
    }
}

pub(crate) fn min_max(data: &[f64]) -> (f64, f64) {
    data.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_orientation_examples() {
        assert_eq!(wrap_orientation(-1, 32), 31);
        assert_eq!(wrap_orientation(32, 32), 0);
        assert_eq!(wrap_orientation(5, 32), 5);
    }

    #[test]
    fn reflect_spatial_examples() {
        assert_eq!(reflect_spatial(-1, 10), 0);
        assert_eq!(reflect_spatial(10, 10), 9);
        assert_eq!(reflect_spatial(3, 10), 3);
        assert_eq!(reflect_spatial(-3, 10), 2);
        assert_eq!(reflect_spatial(25, 10), 5);
        assert_eq!(reflect_spatial(-5, 1), 0);
    }

    #[test]
    fn trilinear_examples() {
        let v = Volume::from_fn(6, 5, 4, |x, y, k| (x * 31 + y * 7 + k * 3) as f64);
        assert_eq!(trilinear_sample(&v, 2.0, 3.0, 1.0), v.get(2, 3, 1));
        let c = Volume::filled(6, 5, 4, 1.75);
        assert!((trilinear_sample(&c, 2.3, 0.7, 3.6) - 1.75).abs() < 1e-15);
        let ramp = Volume::from_fn(8, 8, 4, |x, _, _| x as f64);
        assert!((trilinear_sample(&ramp, 2.5, 3.2, 1.4) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn trilinear_wraps_orientation() {
        let v = Volume::from_fn(3, 3, 4, |_, _, k| k as f64);
        // halfway between k = 3 and k = 0
        assert!((trilinear_sample(&v, 1.0, 1.0, 3.5) - 1.5).abs() < 1e-15);
        assert!((trilinear_sample(&v, 1.0, 1.0, -0.5) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Volume::new(2, 2, 2, vec![0.0; 7]).is_err());
        assert!(Image::new(1, 1, vec![f64::NAN]).is_err());
        assert!(Volume::filled(4, 4, 6, 0.0).rotate90().is_err());
    }

    #[test]
    fn rotate90_four_times_is_identity() {
        let v = Volume::from_fn(5, 5, 8, |x, y, k| (x + 10 * y + 100 * k) as f64);
        let r = v
            .rotate90()
            .and_then(|r| r.rotate90())
            .and_then(|r| r.rotate90())
            .and_then(|r| r.rotate90())
            .unwrap();
        assert_eq!(r, v);
        // x-ramp becomes a y-ramp
        let img = Image::from_fn(4, 4, |x, _| x as f64);
        let rot = img.rotate90();
        assert_eq!(rot.get(0, 2), 2.0);
        assert_eq!(rot.get(3, 2), 2.0);
    }

    #[test]
    fn mask_broadcast() {
        let m = Mask::from_image_fn(3, 2, |x, y| x == y);
        let v = Volume::filled(3, 2, 4, 0.0);
        let mv = m.for_volume(&v).unwrap();
        assert_eq!(mv.layers(), 4);
        assert_eq!(mv.count(), 8);
        assert!(m.for_volume(&Volume::filled(2, 2, 4, 0.0)).is_err());
    }

    proptest! {
        #[test]
        fn reflect_and_wrap_are_total_and_idempotent(i in -1000i64..1000, n in 1usize..40) {
            let r = reflect_spatial(i, n);
            prop_assert!(r < n);
            prop_assert_eq!(reflect_spatial(r as i64, n), r);
            let k = wrap_orientation(i, n);
            prop_assert!(k < n);
            prop_assert_eq!(wrap_orientation(k as i64, n), k);
        }

        #[test]
        fn trilinear_is_min_max_stable(
            seed in proptest::collection::vec(-5.0f64..5.0, 4 * 4 * 4),
            x in -3.0f64..7.0, y in -3.0f64..7.0, k in -6.0f64..10.0,
        ) {
            let v = Volume::new(4, 4, 4, seed).unwrap();
            let s = trilinear_sample(&v, x, y, k);
            let x0 = x.floor() as i64;
            let y0 = y.floor() as i64;
            let k0 = k.floor() as i64;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for dz in 0..2 {
                for dy in 0..2 {
                    for dx in 0..2 {
                        let val = v.get_wrapped(x0 + dx, y0 + dy, k0 + dz);
                        lo = lo.min(val);
                        hi = hi.max(val);
                    }
                }
            }
            prop_assert!(s >= lo - 1e-12 && s <= hi + 1e-12);
        }
    }
}
