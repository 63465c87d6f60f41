use crate::data::Matrix;

/// Column-wise nonlinear distortion of the covariates: even columns become
/// `exp(x_j / 2)`, odd columns `x_j / (1 + exp(x_{j-1})) + 10`. A model linear
/// in the distorted columns is misspecified for anything linear in the
/// originals.
pub fn misspecify(x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let src = x.row(i);
        let dst = out.row_mut(i);
        for j in 0..src.len() {
            dst[j] = if j % 2 == 0 {
                (src[j] / 2.0).exp()
            } else {
                src[j] / (1.0 + src[j - 1].exp()) + 10.0
            };
        }
    }
    out
}
