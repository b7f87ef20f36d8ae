//! Products with an H² matrix and dense materialization.

use crate::error::{Error, Result};
use crate::matrix::{multiply, Matrix, Op};
use crate::scalar::Scalar;

use super::build::{BlockData, H2Matrix};

impl<T: Scalar> H2Matrix<T> {
    /// `y = A x` with `x` and `y` in the original point order.
    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n() {
            return Err(Error::Shape(format!(
                "matvec input has length {}, expected {}",
                x.len(),
                self.n()
            )));
        }
        let xt = self.tree.to_tree_order(x);
        let yt = self.matvec_tree_order(&xt);
        Ok(self.tree.from_tree_order(&yt))
    }

    /// `y = A x` with both vectors in tree order.
    pub fn matvec_tree_order(&self, x: &[T]) -> Vec<T> {
        let tree = &*self.tree;
        let count = tree.nodes().len();
        let mut y = vec![T::zero(); x.len()];

        // upward pass: xhat_t = U_t^T x_t
        let mut xhat: Vec<Vec<T>> = vec![Vec::new(); count];
        for i in (0..count).rev() {
            let node = tree.node(i);
            xhat[i] = match node.children {
                None => self.basis.leaf[i]
                    .as_ref()
                    .expect("leaf basis")
                    .matvec_t(&x[node.range()])
                    .expect("validated shape"),
                Some(children) => {
                    let mut acc = vec![T::zero(); self.basis.ranks[i]];
                    for c in children {
                        let e = self.basis.transfer[c].as_ref().expect("transfer");
                        let part = e.matvec_t(&xhat[c]).expect("validated shape");
                        acc.iter_mut().zip(&part).for_each(|(a, b)| *a += *b);
                    }
                    acc
                }
            };
        }

        let mut yhat: Vec<Vec<T>> = (0..count)
            .map(|i| vec![T::zero(); self.basis.ranks[i]])
            .collect();
        for b in &self.matrix.blocks {
            match &b.data {
                BlockData::LowRank(s) => {
                    let part = s.matvec(&xhat[b.col]).expect("validated shape");
                    yhat[b.row]
                        .iter_mut()
                        .zip(&part)
                        .for_each(|(a, v)| *a += *v);
                }
                BlockData::Dense(d) => {
                    let (t, s) = (tree.node(b.row), tree.node(b.col));
                    let part = d.matvec(&x[s.range()]).expect("validated shape");
                    y[t.range()]
                        .iter_mut()
                        .zip(&part)
                        .for_each(|(a, v)| *a += *v);
                }
            }
        }

        // downward pass
        for i in 0..count {
            let node = tree.node(i);
            match node.children {
                None => {
                    let u = self.basis.leaf[i].as_ref().expect("leaf basis");
                    let part = u.matvec(&yhat[i]).expect("validated shape");
                    y[node.range()]
                        .iter_mut()
                        .zip(&part)
                        .for_each(|(a, v)| *a += *v);
                }
                Some(children) => {
                    let parent = std::mem::take(&mut yhat[i]);
                    for c in children {
                        let e = self.basis.transfer[c].as_ref().expect("transfer");
                        let part = e.matvec(&parent).expect("validated shape");
                        yhat[c].iter_mut().zip(&part).for_each(|(a, v)| *a += *v);
                    }
                }
            }
        }
        y
    }

    /// Dense `n x n` matrix represented by `self`, in the original point
    /// order. Intended for small `n`.
    pub fn to_dense(&self) -> Matrix<T> {
        let tree = &*self.tree;
        let n = self.n();
        let bases = self.basis.explicit_bases(tree);
        let mut tree_order = Matrix::zeros(n, n);
        for b in &self.matrix.blocks {
            let block = match &b.data {
                BlockData::Dense(d) => d.clone(),
                BlockData::LowRank(s) => {
                    let us = multiply(&bases[b.row], Op::NoTrans, s, Op::NoTrans).expect("shape");
                    multiply(&us, Op::NoTrans, &bases[b.col], Op::Trans).expect("shape")
                }
            };
            let (t, s) = (tree.node(b.row), tree.node(b.col));
            for (jj, j) in s.range().enumerate() {
                tree_order.col_mut(j)[t.range()].copy_from_slice(block.col(jj));
            }
        }
        let perm = tree.perm();
        let mut out = Matrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                out[(perm[i], perm[j])] = tree_order[(i, j)];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use crate::h2::build::{build_h2, dense_kernel_matrix, H2Params};
    use crate::h2::points::perturbed_grid;
    use crate::matrix::frobenius;
    use crate::rsvd::gaussian_matrix;
    use crate::scalar::norm2;

    #[test]
    fn single_dense_block_is_exact() {
        let pts = perturbed_grid(50, 4);
        let h = build_h2::<f64>(&pts, &H2Params::default()).unwrap();
        let a = dense_kernel_matrix::<f64>(&pts, 0.1);
        let x = gaussian_matrix::<f64>(50, 1, 1);
        let y = h.matvec(x.as_slice()).unwrap();
        let z = a.matvec(x.as_slice()).unwrap();
        assert_eq!(y, z);
        assert_eq!(h.to_dense(), a);
    }

    #[test]
    fn zero_vector() {
        let pts = perturbed_grid(256, 5);
        let h = build_h2::<f64>(
            &pts,
            &H2Params {
                leaf_size: 16,
                ..H2Params::default()
            },
        )
        .unwrap();
        assert!(h.matvec(&vec![0.0; 256]).unwrap().iter().all(|&v| v == 0.0));
        assert!(h.matvec(&[0.0; 3]).is_err());
    }

    #[test]
    fn random_vector_against_dense() {
        let pts = perturbed_grid(512, 6);
        let h = build_h2::<f64>(&pts, &H2Params::default()).unwrap();
        assert!(h.matrix_tree().low_rank_count() > 0);
        let a = dense_kernel_matrix::<f64>(&pts, 0.1);
        let x = gaussian_matrix::<f64>(512, 1, 2);
        let y = h.matvec(x.as_slice()).unwrap();
        let z = a.matvec(x.as_slice()).unwrap();
        let diff: Vec<f64> = y.iter().zip(&z).map(|(p, q)| p - q).collect();
        assert!(norm2(&diff) / norm2(&z) <= 1e-7);
        let d = h.to_dense();
        let mut e = d.clone();
        e.as_mut_slice()
            .iter_mut()
            .zip(a.as_slice())
            .for_each(|(p, q)| *p -= q);
        assert!(frobenius(&e) / frobenius(&a) <= 1e-7);
    }
}
