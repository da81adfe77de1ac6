//! Raw dense matrix kernels.
//!
//! Every kernel computes each output element with a fixed accumulation
//! order, so results are bit-identical regardless of the rayon thread
//! count. Parallelism only splits work across disjoint output rows.

use rayon::prelude::*;

use super::Elem;

/// Below this many multiply-adds the sequential path wins.
const PAR_THRESHOLD: usize = 1 << 16;

/// C[m,n] = A[m,k] · B[k,n]
pub fn matmul_nn(a: &[Elem], b: &[Elem], m: usize, k: usize, n: usize) -> Vec<Elem> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![0.0; m * n];
    let row = |i: usize, crow: &mut [Elem]| {
        let arow = &a[i * k..(i + 1) * k];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (cj, &bj) in crow.iter_mut().zip(brow) {
                *cj += av * bj;
            }
        }
    };
    if m * k * n >= PAR_THRESHOLD {
        c.par_chunks_mut(n).enumerate().for_each(|(i, crow)| row(i, crow));
    } else {
        c.chunks_mut(n).enumerate().for_each(|(i, crow)| row(i, crow));
    }
    c
}

/// C[m,n] = A[m,k] · B[n,k]ᵀ  (row-row dot products)
pub fn matmul_nt(a: &[Elem], b: &[Elem], m: usize, k: usize, n: usize) -> Vec<Elem> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut c = vec![0.0; m * n];
    let row = |i: usize, crow: &mut [Elem]| {
        let arow = &a[i * k..(i + 1) * k];
        for (j, cj) in crow.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            let mut s = 0.0;
            for (&av, &bv) in arow.iter().zip(brow) {
                s += av * bv;
            }
            *cj = s;
        }
    };
    if m * k * n >= PAR_THRESHOLD {
        c.par_chunks_mut(n).enumerate().for_each(|(i, crow)| row(i, crow));
    } else {
        c.chunks_mut(n).enumerate().for_each(|(i, crow)| row(i, crow));
    }
    c
}

/// C[m,n] = A[p,m]ᵀ · B[p,n]
pub fn matmul_tn(a: &[Elem], b: &[Elem], p: usize, m: usize, n: usize) -> Vec<Elem> {
    debug_assert_eq!(a.len(), p * m);
    debug_assert_eq!(b.len(), p * n);
    let mut c = vec![0.0; m * n];
    let row = |i: usize, crow: &mut [Elem]| {
        for q in 0..p {
            let av = a[q * m + i];
            let brow = &b[q * n..(q + 1) * n];
            for (cj, &bj) in crow.iter_mut().zip(brow) {
                *cj += av * bj;
            }
        }
    };
    if m * p * n >= PAR_THRESHOLD {
        c.par_chunks_mut(n).enumerate().for_each(|(i, crow)| row(i, crow));
    } else {
        c.chunks_mut(n).enumerate().for_each(|(i, crow)| row(i, crow));
    }
    c
}

/// Batched C[b] = A[b] · B[b] with A: [bs,m,k], B: [bs,k,n].
pub fn bmm_nn(a: &[Elem], b: &[Elem], bs: usize, m: usize, k: usize, n: usize) -> Vec<Elem> {
    let mut c = vec![0.0; bs * m * n];
    let one = |bi: usize, cb: &mut [Elem]| {
        let ab = &a[bi * m * k..(bi + 1) * m * k];
        let bb = &b[bi * k * n..(bi + 1) * k * n];
        cb.copy_from_slice(&matmul_nn(ab, bb, m, k, n));
    };
    if bs > 1 && bs * m * k * n >= PAR_THRESHOLD {
        c.par_chunks_mut(m * n).enumerate().for_each(|(bi, cb)| one(bi, cb));
    } else {
        c.chunks_mut(m * n).enumerate().for_each(|(bi, cb)| one(bi, cb));
    }
    c
}

/// Batched C[b] = A[b] · B[b]ᵀ with A: [bs,m,k], B: [bs,n,k].
pub fn bmm_nt(a: &[Elem], b: &[Elem], bs: usize, m: usize, k: usize, n: usize) -> Vec<Elem> {
    let mut c = vec![0.0; bs * m * n];
    let one = |bi: usize, cb: &mut [Elem]| {
        let ab = &a[bi * m * k..(bi + 1) * m * k];
        let bb = &b[bi * n * k..(bi + 1) * n * k];
        cb.copy_from_slice(&matmul_nt(ab, bb, m, k, n));
    };
    if bs > 1 && bs * m * k * n >= PAR_THRESHOLD {
        c.par_chunks_mut(m * n).enumerate().for_each(|(bi, cb)| one(bi, cb));
    } else {
        c.chunks_mut(m * n).enumerate().for_each(|(bi, cb)| one(bi, cb));
    }
    c
}

/// Batched C[b] = A[b]ᵀ · B[b] with A: [bs,p,m], B: [bs,p,n].
pub fn bmm_tn(a: &[Elem], b: &[Elem], bs: usize, p: usize, m: usize, n: usize) -> Vec<Elem> {
    let mut c = vec![0.0; bs * m * n];
    let one = |bi: usize, cb: &mut [Elem]| {
        let ab = &a[bi * p * m..(bi + 1) * p * m];
        let bb = &b[bi * p * n..(bi + 1) * p * n];
        cb.copy_from_slice(&matmul_tn(ab, bb, p, m, n));
    };
    if bs > 1 && bs * m * p * n >= PAR_THRESHOLD {
        c.par_chunks_mut(m * n).enumerate().for_each(|(bi, cb)| one(bi, cb));
    } else {
        c.chunks_mut(m * n).enumerate().for_each(|(bi, cb)| one(bi, cb));
    }
    c
}
