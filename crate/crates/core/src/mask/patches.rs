use crate::error::{Error, Result};
use crate::image::Plane;

/// Vectorized `p × p` neighborhoods of a plane, one per sampled center.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchSet {
    pub patch_size: usize,
    /// Dimensions of the plane the patches came from.
    pub dims: (usize, usize),
    /// Centers in raster order.
    pub centers: Vec<(usize, usize)>,
    /// Flattened patches, `n = p²` values each, row-major within a patch.
    data: Vec<f64>,
}

impl PatchSet {
    /// Patch set from explicit vectors of length `p²`, not tied to an image.
    /// Patch `i` gets center `(i, 0)` on a `len × 1` grid.
    pub fn from_vectors(patch_size: usize, vectors: &[Vec<f64>]) -> Result<PatchSet> {
        let n = patch_size * patch_size;
        if n == 0 || vectors.iter().any(|v| v.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "every patch must have {n} values"
            )));
        }
        Ok(PatchSet {
            patch_size,
            dims: (vectors.len(), 1),
            centers: (0..vectors.len()).map(|i| (i, 0)).collect(),
            data: vectors.concat(),
        })
    }

    pub fn dim(&self) -> usize {
        self.patch_size * self.patch_size
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn patch(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim())
    }

    /// Copy with each patch's mean subtracted.
    pub fn centered(&self) -> PatchSet {
        let n = self.dim();
        let mut data = self.data.clone();
        for patch in data.chunks_exact_mut(n) {
            let mean = patch.iter().sum::<f64>() / n as f64;
            patch.iter_mut().for_each(|v| *v -= mean);
        }
        PatchSet {
            data,
            ..self.clone()
        }
    }

    /// Averages per-patch vectors back onto the pixel grid. Pixels covered by
    /// no footprint stay zero; footprint cells outside the plane are dropped.
    pub fn overlap_average<'a>(&self, vectors: impl Iterator<Item = &'a [f64]>) -> Plane {
        let (h, w) = self.dims;
        let p = self.patch_size as isize;
        let r = p / 2;
        let mut sum = vec![0.0; h * w];
        let mut count = vec![0u32; h * w];
        for (&(cy, cx), v) in self.centers.iter().zip(vectors) {
            for dy in 0..p {
                let y = cy as isize + dy - r;
                if y < 0 || y >= h as isize {
                    continue;
                }
                for dx in 0..p {
                    let x = cx as isize + dx - r;
                    if x < 0 || x >= w as isize {
                        continue;
                    }
                    let idx = y as usize * w + x as usize;
                    sum[idx] += v[(dy * p + dx) as usize];
                    count[idx] += 1;
                }
            }
        }
        let data = sum
            .into_iter()
            .zip(count)
            .map(|(s, c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect();
        Plane {
            height: h,
            width: w,
            data,
        }
    }
}

/// Patches of size `p` centered every `stride` pixels, edge-replicated at borders.
pub fn extract_patches(high: &Plane, p: usize, stride: usize) -> Result<PatchSet> {
    if p % 2 == 0 || p == 0 {
        return Err(Error::InvalidArgument(format!(
            "patch size must be odd, got {p}"
        )));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    if p > high.height || p > high.width {
        return Err(Error::TooSmall(format!(
            "patch size {p} exceeds {}x{} plane",
            high.height, high.width
        )));
    }
    let r = (p / 2) as isize;
    let mut centers = Vec::new();
    let mut data = Vec::new();
    for cy in (0..high.height).step_by(stride) {
        for cx in (0..high.width).step_by(stride) {
            centers.push((cy, cx));
            for dy in -r..=r {
                for dx in -r..=r {
                    data.push(high.get_clamped(cy as isize + dy, cx as isize + dx));
                }
            }
        }
    }
    Ok(PatchSet {
        patch_size: p,
        dims: (high.height, high.width),
        centers,
        data,
    })
}
