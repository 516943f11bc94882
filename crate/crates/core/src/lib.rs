//! Hidden-unit logistic model for time-series classification.
//!
//! The model attaches `H` binary hidden units to every time step. Each unit
//! forms its own two-state chain, so the label-conditional sum over all
//! `2^(H*T)` hidden configurations factorizes over units and is computed
//! exactly with one forward-backward pass per chain, in time linear in both
//! `T` and `H`.
//!
//! ```
//! use hulm::{predict_distribution, train_sgd, synth_shift_task, Hyperparams};
//!
//! let data = synth_shift_task(10, 5, 1.0, 0.3, 7).unwrap();
//! let hyper = Hyperparams { hidden_units: 4, epochs: 10, ..Default::default() };
//! let report = train_sgd(&data, &hyper, None).unwrap();
//! let p = predict_distribution(&data.series[0], &report.params).unwrap();
//! assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
//! ```

pub mod classifier;
pub mod data;
pub mod error;
pub mod eval;
pub mod inference;
pub mod io;
pub mod learning;
pub mod math;
pub mod matrix;
pub mod model;
pub mod naive;
pub mod oracle;
pub mod synth;
pub mod verify;

pub use classifier::{search_lambda_model, train_model, ModelKind, TrainedModel};
pub use data::{
    holdout_split, kfold, load_dataset, read_dataset, save_dataset, standardize, window_slide, window_stack, write_dataset, Dataset,
    FoldPlan, Standardizer, Window,
};
pub use error::{Error, Result};
pub use eval::{
    confusion_matrix, cross_validate, cross_validate_with, error_rate, evaluate, f1_score, one_vs_rest_detect, one_vs_rest_detect_with,
    roc_auc, CvOptions, EvalReport,
};
pub use inference::{
    backward, forward, log_m, log_m_all, marginals, messages, predict_distribution, predict_label, LogMessages, Marginals, MessageTable,
};
pub use io::{load_model, model_from_str, model_to_string, save_model, ModelFile, Preprocess};
pub use learning::{
    cond_log_likelihood, gradient_batch, gradient_example, search_lambda, train_sgd, tune_lambda, Gradient, LambdaSearch, TrainReport,
};
pub use matrix::Matrix;
pub use model::{energy, init_params, log_potential, Block, HiddenAssignment, HulmParams, Hyperparams, LabelVector, TimeSeries};
pub use naive::{naive_predict, naive_train, naive_train_report, NaiveParams};
pub use oracle::{brute_log_m, brute_marginals, finite_diff_gradient, OracleBudget};
pub use synth::{synth_hmm_task, synth_order_task, synth_shift_task};
pub use verify::{run_verification, Fault, VerifyConfig, VerifyReport};
