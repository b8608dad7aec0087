//! Scalar convex profiles: the measured-energy curves that the minimax
//! solvers approximate by chords.

/// A convex real function of one variable, optionally with its derivative.
///
/// Evaluation outside the function's domain returns NaN; solvers turn
/// non-finite values into [`crate::Error::NonFinite`].
pub trait ConvexProfile {
    fn value(&self, x: f64) -> f64;

    fn slope(&self, _x: f64) -> Option<f64> {
        None
    }
}

impl<P: ConvexProfile + ?Sized> ConvexProfile for &P {
    fn value(&self, x: f64) -> f64 {
        (**self).value(x)
    }

    fn slope(&self, x: f64) -> Option<f64> {
        (**self).slope(x)
    }
}

/// Wraps a closure as a profile without a derivative.
pub struct FnProfile<F>(pub F);

impl<F: Fn(f64) -> f64> ConvexProfile for FnProfile<F> {
    fn value(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

/// Wraps a closure and its derivative.
pub struct FnProfileWithSlope<F, G> {
    pub value: F,
    pub slope: G,
}

impl<F: Fn(f64) -> f64, G: Fn(f64) -> f64> ConvexProfile for FnProfileWithSlope<F, G> {
    fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    fn slope(&self, x: f64) -> Option<f64> {
        Some((self.slope)(x))
    }
}
