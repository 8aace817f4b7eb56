use ndarray::{Array2, Zip};

pub const LEAKY_RELU_SLOPE: f64 = 0.2;

pub fn leaky_relu(x: &Array2<f64>, slope: f64) -> Array2<f64> {
    x.mapv(|v| if v > 0.0 { v } else { slope * v })
}

/// Gradient w.r.t. the input, given the forward input `x`.
pub fn leaky_relu_backward(x: &Array2<f64>, grad_out: &Array2<f64>, slope: f64) -> Array2<f64> {
    Zip::from(x)
        .and(grad_out)
        .map_collect(|&x, &g| if x > 0.0 { g } else { slope * g })
}

pub fn tanh(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(f64::tanh)
}

/// Gradient w.r.t. the input, given the forward output `y`.
pub fn tanh_backward(y: &Array2<f64>, grad_out: &Array2<f64>) -> Array2<f64> {
    Zip::from(y)
        .and(grad_out)
        .map_collect(|&y, &g| g * (1.0 - y * y))
}

pub fn sigmoid(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| {
        if v >= 0.0 {
            1.0 / (1.0 + (-v).exp())
        } else {
            let e = v.exp();
            e / (1.0 + e)
        }
    })
}

/// Gradient w.r.t. the input, given the forward output `y`.
pub fn sigmoid_backward(y: &Array2<f64>, grad_out: &Array2<f64>) -> Array2<f64> {
    Zip::from(y)
        .and(grad_out)
        .map_collect(|&y, &g| g * y * (1.0 - y))
}
