//! Dense kernels: Hermitian eigendecomposition, noise subspace and the
//! null-space projection that removes one direction.

use num_complex::Complex64;
use subaoa::geometry::{MicArray, DEFAULT_CIRCULAR_RADIUS};
use subaoa::linalg::{hermitian_eig, noise_subspace, null_space_of_vector, CMatrix};

fn main() -> subaoa::Result<()> {
    let array = MicArray::circular(6, DEFAULT_CIRCULAR_RADIUS)?;
    let f = 1500.0;
    let a0 = array.steering_vector(f, 20.0)?.entries;
    let a1 = array.steering_vector(f, 140.0)?.entries;

    // two uncorrelated unit-power sources plus a little white noise
    let r = &a0 * a0.adjoint() + &a1 * a1.adjoint() * Complex64::new(0.5, 0.0)
        + CMatrix::identity(6, 6) * Complex64::new(1e-3, 0.0);
    let eig = hermitian_eig(&r)?;
    println!("eigenvalues {:?}", eig.eigenvalues.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    println!("reconstruction error {:.2e}", (eig.reconstruct() - &r).norm());

    let noise = noise_subspace(&eig, 2)?;
    let leak = |a: &subaoa::linalg::CVector| (noise.basis().adjoint() * a).norm_squared();
    println!("|N^H a0|^2 = {:.2e}, |N^H a1|^2 = {:.2e}", leak(&a0), leak(&a1));

    let b = null_space_of_vector(&a0)?;
    let x = CMatrix::from_columns(&[a0.clone(), a1.clone()]);
    let y = b.apply(&x)?;
    println!(
        "after projection: |B a0| = {:.2e}, |B a1| = {:.4} (was {:.4})",
        y.column(0).norm(),
        y.column(1).norm(),
        a1.norm()
    );
    Ok(())
}
