//! Downstream classifiers and evaluation metrics.

pub mod linear;
pub mod metrics;
pub mod pca;
pub mod qcnn;
pub mod svm;

pub use linear::{joint_train, single_layer_train, LinearClassifier, StackedClassifier};
pub use metrics::{accuracy, balanced_accuracy, metrics, Metrics};
pub use pca::PcaProjection;
pub use qcnn::{qcnn_train, su4_unitary, Qcnn};
pub use svm::{svm_fit, svm_predict, svm_predict_rows, SvmModel};
