//! Trainable quantum data embeddings for ligand classification.
//!
//! * [`qcore`]: dense statevector / density-matrix primitives.
//! * [`circuit`]: parameterized gate lists with adjoint gradients.
//! * [`featuremap`]: ZZ and XYZ embedding circuits.
//! * [`kernels`]: fidelity, projected (PQK), RBF and linear Gram matrices.
//! * [`encoder`]: the classical network feeding the embedding circuits.
//! * [`training`]: fidelity-loss and kernel-alignment trainers, trace distances.
//! * [`models`]: QCNN, SVM, PCA, single-layer classifier, metrics.

pub mod circuit;
pub mod encoder;
pub mod error;
pub mod featuremap;
pub mod kernels;
pub mod models;
pub mod qcore;
pub mod training;

pub use error::{Error, Result};

/// Writes `bytes` to a sibling temp file and renames it over `path`, so
/// readers never observe a half-written file.
pub fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(std::path::Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
