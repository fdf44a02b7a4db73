//! Feature extractors: an LSTM returning its full hidden-state sequence and a
//! valid-mode 1-D convolution. Both run on single sequences or batches and
//! cache what their exact backward passes need.

mod conv1d;
mod lstm;

pub use conv1d::Conv1d;
pub use lstm::Lstm;
