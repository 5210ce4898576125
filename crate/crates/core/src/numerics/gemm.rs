/// Strided view of a row-major buffer as an `rows x cols` matrix.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [f64],
    pub rs: isize,
    pub cs: isize,
}

impl<'a> View<'a> {
    /// `rows x cols` row-major matrix, optionally read transposed.
    pub fn new(data: &'a [f64], cols: usize, transposed: bool) -> Self {
        if transposed {
            View { data, rs: 1, cs: cols as isize }
        } else {
            View { data, rs: cols as isize, cs: 1 }
        }
    }

    pub fn t(self) -> Self {
        View { data: self.data, rs: self.cs, cs: self.rs }
    }
}

/// `c += a * b` with `a: m x k`, `b: k x n`, `c: m x n` (strides `rsc`, `csc`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_acc(
    m: usize,
    k: usize,
    n: usize,
    a: View<'_>,
    b: View<'_>,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    let span = |rows: usize, cols: usize, rs: isize, cs: isize| {
        (rows - 1) * rs as usize + (cols - 1) * cs as usize + 1
    };
    assert!(a.data.len() >= span(m, k, a.rs, a.cs));
    assert!(b.data.len() >= span(k, n, b.rs, b.cs));
    assert!(c.len() >= span(m, n, rsc, csc));
    // SAFETY: the asserts above bound every address touched by the kernel.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            1.0,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}
