//! Dense numeric core: tensors, a reverse-mode tape over a closed op set,
//! Adam, and finite-difference gradient checking.

mod adam;
mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{
    grad_check, grad_check_with_fault, relative_error, GradCheckReport, ParamCheck, FD_STEP,
    REL_ERROR_FLOOR,
};
pub use params::{glorot_uniform, ParamId, ParamSet};
pub use tape::{Fault, Gradients, NodeId, Tape, PROB_CLAMP};
pub use tensor::Tensor;
