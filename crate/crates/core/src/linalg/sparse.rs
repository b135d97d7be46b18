use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Compressed sparse row matrix.
///
/// Column indices within a row are sorted and unique. The JSON form is a
/// coordinate list (`row`, `col`, `val`) so fixtures stay readable.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Builds a matrix from triplets. Duplicate entries are summed; explicit
    /// zeros are kept so that structural patterns survive round-trips.
    ///
    /// Panics if an index is out of range.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(i, j, _) in &sorted {
            assert!(i < nrows && j < ncols, "triplet ({i},{j}) outside {nrows}x{ncols}");
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut vals: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            vals.push(v);
            last = Some((i, j));
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    /// Dense row-major input, mostly for tests and small examples.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut t = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), ncols, "ragged dense matrix");
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(col, val)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(p) => self.vals[range.start + p],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `y += A^T x`
    pub fn add_tr_mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            out[i][j] = v;
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CooRepr {
    nrows: usize,
    ncols: usize,
    row: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl Serialize for SparseMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut repr = CooRepr {
            nrows: self.nrows,
            ncols: self.ncols,
            row: Vec::with_capacity(self.nnz()),
            col: Vec::with_capacity(self.nnz()),
            val: Vec::with_capacity(self.nnz()),
        };
        for (i, j, v) in self.triplets() {
            repr.row.push(i);
            repr.col.push(j);
            repr.val.push(v);
        }
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SparseMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let repr = CooRepr::deserialize(d)?;
        if repr.row.len() != repr.col.len() || repr.row.len() != repr.val.len() {
            return Err(D::Error::custom("row/col/val lengths differ"));
        }
        let mut t = Vec::with_capacity(repr.row.len());
        for ((&i, &j), &v) in repr.row.iter().zip(&repr.col).zip(&repr.val) {
            if i >= repr.nrows || j >= repr.ncols {
                return Err(D::Error::custom(format!(
                    "entry ({i},{j}) outside {}x{}",
                    repr.nrows, repr.ncols
                )));
            }
            t.push((i, j, v));
        }
        Ok(Self::from_triplets(repr.nrows, repr.ncols, &t))
    }
}

/// Serde helper for bound vectors: infinities travel as `null`.
pub mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let repr: Vec<Option<f64>> = v
            .iter()
            .map(|&x| if x.is_finite() { Some(x) } else { None })
            .collect();
        repr.serialize(s)
    }

    /// `null` decodes to the infinity given by the sign of the neighbouring
    /// finite convention: callers pick the field-specific variant below.
    fn decode<'de, D: Deserializer<'de>>(d: D, fill: f64) -> Result<Vec<f64>, D::Error> {
        let repr: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(repr.into_iter().map(|x| x.unwrap_or(fill)).collect())
    }

    pub mod lower {
        use serde::{Deserializer, Serializer};
        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            super::serialize(v, s)
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            super::decode(d, f64::NEG_INFINITY)
        }
    }

    pub mod upper {
        use serde::{Deserializer, Serializer};
        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            super::serialize(v, s)
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            super::decode(d, f64::INFINITY)
        }
    }
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = SparseMatrix::from_triplets(2, 3, &[(1, 2, 1.0), (0, 1, 2.0), (1, 2, 0.5)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn matvec_and_transpose() {
        let m = SparseMatrix::from_dense(&[vec![1.0, 0.0, 2.0], vec![0.0, -1.0, 3.0]]);
        assert_eq!(m.mul_vec(&[1.0, 2.0, 3.0]), vec![7.0, 7.0]);
        let mut y = vec![0.0; 3];
        m.add_tr_mul_vec(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![1.0, -1.0, 5.0]);
    }

    #[test]
    fn json_is_coordinate_list() {
        let m = SparseMatrix::from_dense(&[vec![0.0, 4.0]]);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"nrows":1,"ncols":2,"row":[0],"col":[1],"val":[4.0]}"#);
        let back: SparseMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_rejects_out_of_range_entry() {
        let s = r#"{"nrows":1,"ncols":2,"row":[0],"col":[2],"val":[4.0]}"#;
        assert!(serde_json::from_str::<SparseMatrix>(s).is_err());
    }
}
