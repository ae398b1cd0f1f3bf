//! Feature-selection experiments on small two-class tabular data.
//!
//! Three selectors are provided: feature–label correlation ranking, the
//! weight-magnitude input ranking of a trained network, and a genetic
//! algorithm wrapper whose fitness is the validation accuracy of a model
//! trained on the selected columns. Two from-scratch classifiers back the
//! wrapper: a ReLU/softmax MLP trained with Adam and an RBF-kernel SVM
//! trained with SMO.

pub mod correlation;
pub mod dataset;
pub mod experiments;
pub mod ga;
pub mod magnitude;
pub mod mlp;
pub mod model;
pub mod par;
pub mod report;
pub mod rng;
pub mod svm;
