//! Elementwise scalar functions and their derivatives.

pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;
pub const SELU_SCALE: f64 = 1.050_700_987_355_480_5;
pub const ELU_ALPHA: f64 = 1.0;
pub const LEAKY_SLOPE: f64 = 0.01;
pub const SOFTSHRINK_LAMBDA: f64 = 0.5;
pub const THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryFn {
    Neg,
    Tanh,
    Sigmoid,
    Exp,
    Log,
    Abs,
    Sqrt,
    Square,
    Relu,
    Relu6,
    Hardtanh,
    Softsign,
    Threshold,
    Selu,
    Elu,
    LeakyRelu,
    Tanhshrink,
    Softplus,
    Softshrink,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    // log(1 + e^x) without overflow
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl UnaryFn {
    pub fn name(self) -> &'static str {
        match self {
            UnaryFn::Neg => "neg",
            UnaryFn::Tanh => "tanh",
            UnaryFn::Sigmoid => "sigmoid",
            UnaryFn::Exp => "exp",
            UnaryFn::Log => "log",
            UnaryFn::Abs => "abs",
            UnaryFn::Sqrt => "sqrt",
            UnaryFn::Square => "square",
            UnaryFn::Relu => "relu",
            UnaryFn::Relu6 => "relu6",
            UnaryFn::Hardtanh => "hardtanh",
            UnaryFn::Softsign => "softsign",
            UnaryFn::Threshold => "threshold",
            UnaryFn::Selu => "selu",
            UnaryFn::Elu => "elu",
            UnaryFn::LeakyRelu => "leaky_relu",
            UnaryFn::Tanhshrink => "tanhshrink",
            UnaryFn::Softplus => "softplus",
            UnaryFn::Softshrink => "softshrink",
        }
    }

    /// Returns the offending value when `x` is outside the function's domain.
    pub(crate) fn check_domain(self, x: f64) -> Result<(), String> {
        match self {
            UnaryFn::Log if x <= 0.0 || x.is_nan() => Err(format!("log of {x}")),
            UnaryFn::Sqrt if x < 0.0 || x.is_nan() => Err(format!("sqrt of {x}")),
            _ => Ok(()),
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            UnaryFn::Neg => -x,
            UnaryFn::Tanh => x.tanh(),
            UnaryFn::Sigmoid => sigmoid(x),
            UnaryFn::Exp => x.exp(),
            UnaryFn::Log => x.ln(),
            UnaryFn::Abs => x.abs(),
            UnaryFn::Sqrt => x.sqrt(),
            UnaryFn::Square => x * x,
            UnaryFn::Relu => x.max(0.0),
            UnaryFn::Relu6 => x.clamp(0.0, 6.0),
            UnaryFn::Hardtanh => x.clamp(-1.0, 1.0),
            UnaryFn::Softsign => x / (1.0 + x.abs()),
            UnaryFn::Threshold => {
                if x > THRESHOLD {
                    x
                } else {
                    0.0
                }
            }
            UnaryFn::Selu => {
                if x > 0.0 {
                    SELU_SCALE * x
                } else {
                    SELU_SCALE * SELU_ALPHA * x.exp_m1()
                }
            }
            UnaryFn::Elu => {
                if x > 0.0 {
                    x
                } else {
                    ELU_ALPHA * x.exp_m1()
                }
            }
            UnaryFn::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            UnaryFn::Tanhshrink => x - x.tanh(),
            UnaryFn::Softplus => softplus(x),
            UnaryFn::Softshrink => {
                if x > SOFTSHRINK_LAMBDA {
                    x - SOFTSHRINK_LAMBDA
                } else if x < -SOFTSHRINK_LAMBDA {
                    x + SOFTSHRINK_LAMBDA
                } else {
                    0.0
                }
            }
        }
    }

    /// Derivative at `x`, given the already-computed output `y`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        let step = |c: bool| if c { 1.0 } else { 0.0 };
        match self {
            UnaryFn::Neg => -1.0,
            UnaryFn::Tanh => 1.0 - y * y,
            UnaryFn::Sigmoid => y * (1.0 - y),
            UnaryFn::Exp => y,
            UnaryFn::Log => 1.0 / x,
            UnaryFn::Abs => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            UnaryFn::Sqrt => 0.5 / y,
            UnaryFn::Square => 2.0 * x,
            UnaryFn::Relu => step(x > 0.0),
            UnaryFn::Relu6 => step(x > 0.0 && x < 6.0),
            UnaryFn::Hardtanh => step(x > -1.0 && x < 1.0),
            UnaryFn::Softsign => {
                let d = 1.0 + x.abs();
                1.0 / (d * d)
            }
            UnaryFn::Threshold => step(x > THRESHOLD),
            UnaryFn::Selu => {
                if x > 0.0 {
                    SELU_SCALE
                } else {
                    y + SELU_SCALE * SELU_ALPHA
                }
            }
            UnaryFn::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    y + ELU_ALPHA
                }
            }
            UnaryFn::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            UnaryFn::Tanhshrink => {
                let t = x.tanh();
                t * t
            }
            UnaryFn::Softplus => sigmoid(x),
            UnaryFn::Softshrink => step(x.abs() > SOFTSHRINK_LAMBDA),
        }
    }
}
