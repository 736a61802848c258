//! Classical fixed-step fourth-order Runge-Kutta on flat `f64` buffers.

use alloc::vec;
use alloc::vec::Vec;

/// An autonomous vector field `y' = f(y)`.
pub trait VectorField {
    type Error;

    fn len(&self) -> usize;

    fn eval(&self, y: &[f64], dy: &mut [f64]) -> Result<(), Self::Error>;
}

/// Reusable stage buffers for one system size.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(len: usize) -> Self {
        Rk4 {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            tmp: vec![0.0; len],
        }
    }

    /// Advances `y` by one step of size `h` in place.
    pub fn step<F: VectorField>(&mut self, field: &F, y: &mut [f64], h: f64) -> Result<(), F::Error> {
        let half = 0.5 * h;
        field.eval(y, &mut self.k1)?;
        axpy_into(&mut self.tmp, y, half, &self.k1);
        field.eval(&self.tmp, &mut self.k2)?;
        axpy_into(&mut self.tmp, y, half, &self.k2);
        field.eval(&self.tmp, &mut self.k3)?;
        axpy_into(&mut self.tmp, y, h, &self.k3);
        field.eval(&self.tmp, &mut self.k4)?;
        let sixth = h / 6.0;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

#[inline]
fn axpy_into(out: &mut [f64], y: &[f64], a: f64, k: &[f64]) {
    for ((o, yi), ki) in out.iter_mut().zip(y).zip(k) {
        *o = yi + a * ki;
    }
}
