/// Row-major strides `(row_stride, col_stride)` of a matrix view.
pub(crate) type Strides = (isize, isize);

pub(crate) const fn row_major(cols: usize) -> Strides {
    (cols as isize, 1)
}

/// Transposed view of a row-major `rows × cols` matrix.
pub(crate) const fn transposed(cols: usize) -> Strides {
    (1, cols as isize)
}

/// `c = a·b + beta·c` for an `m×k` view `a`, `k×n` view `b` and row-major `m×n` `c`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: Strides,
    b: &[f64],
    b_strides: Strides,
    beta: f64,
    c: &mut [f64],
) {
    assert!(
        a.len() >= m * k && b.len() >= k * n && c.len() >= m * n,
        "gemm operand too small"
    );
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserted lengths cover every element addressed by the
    // strides, which describe dense row-major or transposed row-major views.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
