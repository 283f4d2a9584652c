//! Block structures `χ = (𝐧, 𝐦)`, the perturbation set `𝐁_χ` and the
//! scaling set `𝐃_χ`.
//!
//! Blocks are laid out scalar blocks first, then full blocks. A scalar block
//! `bᵢI` of `𝐁_χ` sits opposite a full block of `𝐃_χ` and vice versa, which
//! is why the two sets commute.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{c64, spectral_norm, ComplexMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDims {
    #[serde(default)]
    pub scalar_dims: Vec<usize>,
    #[serde(default)]
    pub full_dims: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// `bI` in `𝐁_χ`, full in `𝐃_χ`.
    Scalar,
    /// Full in `𝐁_χ`, `dI` in `𝐃_χ`.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub offset: usize,
    pub size: usize,
    pub kind: BlockKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StructuredSet {
    BChi,
    DChi,
}

#[derive(Debug, Clone)]
pub struct StructuredBasis {
    pub basis: Vec<ComplexMatrix>,
    pub target: StructuredSet,
}

impl StructuredBasis {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// `Σ xᵢ Xᵢ`.
    pub fn combine(&self, x: &[f64]) -> ComplexMatrix {
        let n = self.basis[0].nrows();
        let mut out = ComplexMatrix::zeros(n, n);
        for (xi, bi) in x.iter().zip(&self.basis) {
            out += bi * c64(*xi, 0.0);
        }
        out
    }
}

impl BlockDims {
    pub fn new(scalar_dims: Vec<usize>, full_dims: Vec<usize>) -> Self {
        Self { scalar_dims, full_dims }
    }

    /// `χ = ((), (1, …, 1))`: `n` independent scalar entries on the diagonal.
    pub fn diagonal(n: usize) -> Self {
        Self::new(vec![], vec![1; n])
    }

    /// A single full block: the unstructured case.
    pub fn full(n: usize) -> Self {
        Self::new(vec![], vec![n])
    }

    pub fn dim(&self) -> usize {
        self.scalar_dims.iter().sum::<usize>() + self.full_dims.iter().sum::<usize>()
    }

    /// Compatible with an `n×n` plant.
    pub fn validate(&self, n: usize) -> bool {
        self.scalar_dims.len() + self.full_dims.len() > 0
            && self.scalar_dims.iter().chain(&self.full_dims).all(|&d| d > 0)
            && self.dim() == n
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if self.validate(n) {
            Ok(())
        } else {
            Err(Error::InvalidStructure(format!(
                "scalar_dims={:?} full_dims={:?} incompatible with dimension {n}",
                self.scalar_dims, self.full_dims
            )))
        }
    }

    pub fn blocks(&self) -> Vec<Block> {
        let mut off = 0;
        let mut out = Vec::new();
        for (&size, kind) in self
            .scalar_dims
            .iter()
            .map(|d| (d, BlockKind::Scalar))
            .chain(self.full_dims.iter().map(|d| (d, BlockKind::Full)))
        {
            out.push(Block {
                offset: off,
                size,
                kind,
            });
            off += size;
        }
        out
    }

    fn is_member(&self, m: &ComplexMatrix, tol: f64, scalar_kind: BlockKind) -> Result<bool> {
        let n = self.dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.nrows(),
            });
        }
        let thresh = tol * spectral_norm(m);
        let blocks = self.blocks();
        let mut owner = vec![0usize; n];
        for (k, b) in blocks.iter().enumerate() {
            owner[b.offset..b.offset + b.size].fill(k);
        }
        for i in 0..n {
            for j in 0..n {
                if owner[i] != owner[j] && m[(i, j)].norm() > thresh {
                    return Ok(false);
                }
            }
        }
        for b in blocks.iter().filter(|b| b.kind == scalar_kind) {
            let blk = m.view((b.offset, b.offset), (b.size, b.size)).into_owned();
            let mean = blk.trace() / c64(b.size as f64, 0.0);
            let dev = blk - ComplexMatrix::identity(b.size, b.size) * mean;
            if spectral_norm(&dev) > thresh {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn is_member_b(&self, m: &ComplexMatrix, tol: f64) -> Result<bool> {
        self.is_member(m, tol, BlockKind::Scalar)
    }

    pub fn is_member_d(&self, m: &ComplexMatrix, tol: f64) -> Result<bool> {
        self.is_member(m, tol, BlockKind::Full)
    }

    /// Canonical real basis of the Hermitian members of the target set.
    pub fn hermitian_basis(&self, target: StructuredSet) -> StructuredBasis {
        let n = self.dim();
        let repeated = match target {
            StructuredSet::BChi => BlockKind::Scalar,
            StructuredSet::DChi => BlockKind::Full,
        };
        let mut basis = Vec::new();
        for b in self.blocks() {
            if b.kind == repeated {
                let mut e = ComplexMatrix::zeros(n, n);
                for i in 0..b.size {
                    e[(b.offset + i, b.offset + i)] = c64(1.0, 0.0);
                }
                basis.push(e);
            } else {
                basis.extend(full_hermitian_basis(n, b.offset, b.size));
            }
        }
        StructuredBasis { basis, target }
    }

    pub fn commutation_check(&self, b: &ComplexMatrix, d: &ComplexMatrix, tol: f64) -> bool {
        let comm = d * b - b * d;
        spectral_norm(&comm) <= tol * spectral_norm(b) * spectral_norm(d)
    }

    fn random_member<R: Rng + ?Sized>(&self, rng: &mut R, repeated: BlockKind) -> ComplexMatrix {
        let n = self.dim();
        let mut m = ComplexMatrix::zeros(n, n);
        for b in self.blocks() {
            if b.kind == repeated {
                let z = gaussian_c(rng);
                for i in 0..b.size {
                    m[(b.offset + i, b.offset + i)] = z;
                }
            } else {
                for i in 0..b.size {
                    for j in 0..b.size {
                        m[(b.offset + i, b.offset + j)] = gaussian_c(rng);
                    }
                }
            }
        }
        m
    }

    pub fn random_b<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexMatrix {
        self.random_member(rng, BlockKind::Scalar)
    }

    pub fn random_d<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexMatrix {
        self.random_member(rng, BlockKind::Full)
    }
}

/// Tuple notation `((n₁, …), (m₁, …))`, scalar dims first.
impl std::fmt::Display for BlockDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tuple = |v: &[usize]| {
            let parts: Vec<String> = v.iter().map(usize::to_string).collect();
            format!("({})", parts.join(", "))
        };
        write!(f, "({}, {})", tuple(&self.scalar_dims), tuple(&self.full_dims))
    }
}

impl std::str::FromStr for BlockDims {
    type Err = Error;

    /// Parses the tuple notation, e.g. `((2), (1, 1))` or `((),(3))`.
    /// The shorthands `full:N` and `diag:N` are accepted too.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidStructure(format!("\"{s}\": {why}"));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some((kind, n)) = compact.split_once(':') {
            let n: usize = n.parse().map_err(|_| bad("expected a block size after ':'"))?;
            return match kind {
                "full" => Ok(Self::full(n)),
                "diag" => Ok(Self::diagonal(n)),
                _ => Err(bad("unknown shorthand")),
            };
        }
        let inner = compact
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| bad("expected an outer pair of parentheses"))?;
        let split = inner.find("),(").ok_or_else(|| bad("expected two tuples"))?;
        let (first, second) = (&inner[..=split], &inner[split + 2..]);
        let tuple = |t: &str| -> Result<Vec<usize>> {
            let body = t
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| bad("malformed tuple"))?;
            body.split(',')
                .filter(|p| !p.is_empty())
                .map(|p| p.parse().map_err(|_| bad("block sizes must be positive integers")))
                .collect()
        };
        let dims = Self::new(tuple(first)?, tuple(second)?);
        if dims.dim() == 0 || dims.scalar_dims.iter().chain(&dims.full_dims).any(|&d| d == 0) {
            return Err(bad("need at least one block and no empty blocks"));
        }
        Ok(dims)
    }
}

fn full_hermitian_basis(n: usize, off: usize, m: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        let mut e = ComplexMatrix::zeros(n, n);
        e[(off + i, off + i)] = c64(1.0, 0.0);
        out.push(e);
    }
    for i in 0..m {
        for j in i + 1..m {
            let mut e = ComplexMatrix::zeros(n, n);
            e[(off + i, off + j)] = c64(1.0, 0.0);
            e[(off + j, off + i)] = c64(1.0, 0.0);
            out.push(e);
        }
    }
    for i in 0..m {
        for j in i + 1..m {
            let mut e = ComplexMatrix::zeros(n, n);
            e[(off + i, off + j)] = c64(0.0, 1.0);
            e[(off + j, off + i)] = c64(0.0, -1.0);
            out.push(e);
        }
    }
    out
}

fn gaussian_c<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    crate::sampling::standard_complex(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuple_notation_round_trip() {
        let chi: BlockDims = "((2), (1, 1))".parse().unwrap();
        assert_eq!(chi, BlockDims::new(vec![2], vec![1, 1]));
        assert_eq!(chi.to_string(), "((2), (1, 1))");
        assert_eq!("((),(3))".parse::<BlockDims>().unwrap(), BlockDims::full(3));
        assert_eq!("diag:2".parse::<BlockDims>().unwrap(), BlockDims::diagonal(2));
        for bad in ["", "(1,2)", "((),())", "((0),(1))", "((a),(1))"] {
            assert!(bad.parse::<BlockDims>().is_err(), "{bad}");
        }
    }
    use crate::matrix::{diag_real, from_rows, identity, inverse};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn validate_examples() {
        assert!(BlockDims::new(vec![], vec![1, 1]).validate(2));
        assert!(!BlockDims::new(vec![2], vec![]).validate(3));
        assert!(BlockDims::new(vec![1], vec![2]).validate(3));
        assert!(!BlockDims::new(vec![], vec![]).validate(0));
    }

    #[test]
    fn membership_examples() {
        let chi = BlockDims::diagonal(2);
        assert!(chi.is_member_b(&diag_real(&[0.5, 0.25]), 1e-12).unwrap());
        let upper = from_rows(&[&[c64(1.0, 0.0), c64(1.0, 0.0)], &[c64(0.0, 0.0), c64(1.0, 0.0)]]);
        assert!(!chi.is_member_b(&upper, 1e-12).unwrap());
        let scalar = BlockDims::new(vec![2], vec![]);
        assert!(scalar.is_member_b(&(identity(2) * c64(0.3, -2.0)), 1e-12).unwrap());
        assert!(!scalar.is_member_b(&diag_real(&[1.0, 2.0]), 1e-12).unwrap());
        assert!(matches!(
            chi.is_member_b(&identity(3), 1e-12),
            Err(Error::DimensionMismatch { .. })
        ));

        assert!(chi.is_member_d(&diag_real(&[2.0, 7.0]), 1e-12).unwrap());
        let herm = from_rows(&[&[c64(2.0, 0.0), c64(1.0, 1.0)], &[c64(1.0, -1.0), c64(3.0, 0.0)]]);
        assert!(scalar.is_member_d(&herm, 1e-12).unwrap());
        assert!(!chi.is_member_d(&herm, 1e-12).unwrap());
    }

    #[test]
    fn basis_dimensions() {
        let chi = BlockDims::diagonal(2);
        let d = chi.hermitian_basis(StructuredSet::DChi);
        assert_eq!(d.basis, vec![diag_real(&[1.0, 0.0]), diag_real(&[0.0, 1.0])]);
        let scalar = BlockDims::new(vec![2], vec![]);
        assert_eq!(scalar.hermitian_basis(StructuredSet::DChi).len(), 4);
        let b = scalar.hermitian_basis(StructuredSet::BChi);
        assert_eq!(b.basis, vec![identity(2)]);

        let mixed = BlockDims::new(vec![2, 1], vec![3, 1]);
        assert_eq!(mixed.hermitian_basis(StructuredSet::DChi).len(), 4 + 1 + 2);
        assert_eq!(mixed.hermitian_basis(StructuredSet::BChi).len(), 2 + 9 + 1);
        for set in [StructuredSet::BChi, StructuredSet::DChi] {
            for e in mixed.hermitian_basis(set).basis {
                assert_eq!(e, e.adjoint());
                let member = match set {
                    StructuredSet::BChi => mixed.is_member_b(&e, 1e-12),
                    StructuredSet::DChi => mixed.is_member_d(&e, 1e-12),
                };
                assert!(member.unwrap());
            }
        }
    }

    #[test]
    fn commutation_and_closure() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let shapes = [
            BlockDims::new(vec![2, 1], vec![2]),
            BlockDims::new(vec![3], vec![1, 1]),
            BlockDims::diagonal(4),
            BlockDims::full(3),
        ];
        for _ in 0..500 {
            for chi in &shapes {
                let b = chi.random_b(&mut rng);
                let d = chi.random_d(&mut rng);
                assert!(chi.commutation_check(&b, &d, 1e-12));
                let d2 = chi.random_d(&mut rng);
                assert!(chi.is_member_d(&(&d * &d2), 1e-10).unwrap());
                assert!(chi.is_member_d(&d.adjoint(), 1e-12).unwrap());
                if let Some(inv) = inverse(&d) {
                    assert!(chi.is_member_d(&inv, 1e-8).unwrap());
                }
                let x = chi.hermitian_basis(StructuredSet::BChi).combine(
                    &(0..chi.hermitian_basis(StructuredSet::BChi).len())
                        .map(|_| rng.random::<f64>() - 0.5)
                        .collect::<Vec<_>>(),
                );
                assert!(chi.is_member_b(&(&x * &x), 1e-10).unwrap());
            }
        }
        // an off-pattern entry in D breaks commutation with a generic B
        let chi = BlockDims::diagonal(2);
        let b = diag_real(&[1.0, 2.0]);
        let mut d = identity(2);
        d[(0, 1)] = c64(0.5, 0.0);
        assert!(!chi.commutation_check(&b, &d, 1e-12));
        // scalar block against a full D block
        let scalar = BlockDims::new(vec![2], vec![]);
        let herm = from_rows(&[&[c64(2.0, 0.0), c64(1.0, 1.0)], &[c64(1.0, -1.0), c64(3.0, 0.0)]]);
        assert!(scalar.commutation_check(&(identity(2) * c64(0.4, 0.1)), &herm, 1e-12));
    }

    #[test]
    fn product_is_blockwise_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let chi = BlockDims::new(vec![2], vec![1, 2]);
        let b = chi.random_b(&mut rng);
        let d = chi.random_d(&mut rng);
        let bd = &b * &d;
        for blk in chi.blocks() {
            let s = (blk.offset, blk.offset);
            let shape = (blk.size, blk.size);
            let expect = b.view(s, shape).into_owned() * d.view(s, shape).into_owned();
            assert!((bd.view(s, shape).into_owned() - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn serializes_as_two_arrays() {
        let chi = BlockDims::new(vec![2], vec![1, 1]);
        let s = serde_json::to_string(&chi).unwrap();
        assert_eq!(s, r#"{"scalar_dims":[2],"full_dims":[1,1]}"#);
        let back: BlockDims = toml::from_str("scalar_dims = []\nfull_dims = [1, 1]").unwrap();
        assert_eq!(back, BlockDims::diagonal(2));
    }
}
