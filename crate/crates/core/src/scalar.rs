use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, NumCast};

/// Real scalar used for turn probabilities, backlogs and phase priorities.
///
/// `-inf` from [`Float::neg_infinity`] doubles as the "no compatible neighbor"
/// sentinel of the coordination function, so only IEEE floats qualify.
pub trait Scalar:
    Float + NumCast + FromStr + Display + Debug + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal; exact for `f64`, rounded for `f32`.
    fn lit(value: f64) -> Self {
        <Self as NumCast>::from(value).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite or infinite float converts to f64")
    }

    /// Absolute tolerance for checks like "probabilities sum to one".
    fn tolerance() -> Self {
        Self::epsilon() * Self::lit(64.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
