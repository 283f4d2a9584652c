//! Serde adapters: complex scalars as `[re, im]`, matrices as row-major
//! nested arrays of those, and reals that may be infinite (`"inf"`).

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::matrix::ComplexMatrix;

pub mod complex {
    use super::*;

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

pub mod matrix {
    use super::*;
    use serde::de::Error;

    pub fn to_rows(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
        m.row_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<ComplexMatrix, String> {
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != nc) {
            return Err(format!("row {i} has {} entries, expected {nc}", rows[i].len()));
        }
        Ok(ComplexMatrix::from_fn(nr, nc, |i, j| {
            let [re, im] = rows[i][j];
            Complex64::new(re, im)
        }))
    }

    pub fn serialize<S: Serializer>(m: &ComplexMatrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ComplexMatrix, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        from_rows(&rows).map_err(D::Error::custom)
    }
}

/// JSON has no infinity; `±∞` travels as the strings `"inf"` / `"-inf"`.
pub mod extended {
    use super::*;
    use serde::de::Error;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Finite(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v.is_infinite() {
            Repr::Text(if v > 0.0 { "inf" } else { "-inf" }.into())
        } else {
            Repr::Finite(v)
        }
    }

    fn from_repr(r: Repr) -> Result<f64, String> {
        match r {
            Repr::Finite(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(format!("expected a number or \"inf\", got \"{other}\"")),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?).map_err(D::Error::custom)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|x| to_repr(*x)).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?
                .into_iter()
                .map(|r| from_repr(r).map_err(D::Error::custom))
                .collect()
        }
    }
}
