//! From-scratch bidirectional peephole-LSTM encoder-decoder.

mod adam;
mod io;
mod linalg;
mod lstm;
mod model;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use io::{load_model, read_model, save_model, write_model, MODEL_MAGIC};
pub use lstm::{
    lstm_cell_forward, GateParams, LstmCellParams, Peephole, GATE_CELL, GATE_FORGET, GATE_INPUT,
    GATE_OUTPUT,
};
pub use model::{
    backward, backward_acc, bilstm_forward, init_params, model_forward, mse_loss, param_count,
    Hyper, ModelParams,
};
