use crate::error::Result;
use crate::filters::FilterSpec;
use crate::image::{Image, Plane};

/// Split of a luma image into a smooth base and its residual.
#[derive(Clone, Debug)]
pub struct FrequencyDecomposition {
    pub low: Image,
    /// `input - low`, values in `[-1, 1]`.
    pub high: Plane,
}

/// Low band = `spec` applied to the luma of `img`; high band = luma − low.
pub fn decompose(img: &Image, spec: &FilterSpec) -> Result<FrequencyDecomposition> {
    let luma = img.to_grayscale();
    let low = spec.apply(&luma)?;
    let high = luma
        .data()
        .iter()
        .zip(low.data())
        .map(|(v, l)| v - l)
        .collect();
    Ok(FrequencyDecomposition {
        high: Plane::new(luma.height(), luma.width(), high)?,
        low,
    })
}
