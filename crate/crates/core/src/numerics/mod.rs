//! Small dense linear algebra, integration, differentiation and root finding.

mod diff;
mod eigen;
mod lyapunov;
mod matrix;
mod ode;
mod poly;
mod roots;

pub use diff::{default_step, jacobian_fd};
pub use eigen::{condition_number, inv_sqrt_spd, sym_eig, EigenResult};
pub use lyapunov::{lyapunov_solve, require_hurwitz};
pub use matrix::Matrix;
pub use ode::{rk4_integrate, rk4_integrate_recording, rk4_step};
pub use poly::{char_poly, eigenvalues, is_hurwitz_poly, poly_roots, routh_table};
pub use roots::{newton_root, DEFAULT_MAX_ITER, DEFAULT_TOL};
