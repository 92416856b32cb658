//! Small dense Hermitian solves on packed lower-triangular storage.

use num_complex::Complex64;

/// Number of packed entries for an `n`×`n` lower triangle.
#[inline]
pub const fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Index of `(i, j)`, `j <= i`, in packed lower storage.
#[inline]
pub const fn packed_index(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

/// In-place Cholesky `A = L Lᴴ` of a Hermitian matrix given by its packed
/// lower triangle. Returns `false` if a pivot is not strictly positive.
pub fn cholesky_packed(a: &mut [Complex64], n: usize) -> bool {
    debug_assert_eq!(a.len(), packed_len(n));
    for j in 0..n {
        let mut d = a[packed_index(j, j)].re;
        for p in 0..j {
            d -= a[packed_index(j, p)].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let ljj = d.sqrt();
        a[packed_index(j, j)] = Complex64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = a[packed_index(i, j)];
            for p in 0..j {
                s -= a[packed_index(i, p)] * a[packed_index(j, p)].conj();
            }
            a[packed_index(i, j)] = s / ljj;
        }
    }
    true
}

/// Solves `L Lᴴ x = b` in place given the packed factor from
/// [`cholesky_packed`].
pub fn cholesky_solve_packed(l: &[Complex64], n: usize, b: &mut [Complex64]) {
    for i in 0..n {
        let mut s = b[i];
        for p in 0..i {
            s -= l[packed_index(i, p)] * b[p];
        }
        b[i] = s / l[packed_index(i, i)].re;
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for p in i + 1..n {
            s -= l[packed_index(p, i)].conj() * b[p];
        }
        b[i] = s / l[packed_index(i, i)].re;
    }
}
